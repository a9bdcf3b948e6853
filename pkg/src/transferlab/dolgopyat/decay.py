"""Decay of ``||~L_s^n||_{1,t}`` and growth of the resolvent ``(Id - L_s)^{-1}``.

Functions are carried as stacked nodal data ``(f, f'/|t|)`` and the
operators as the augmented block matrix acting on them, so the discrete
``||.||_{1,t}`` is ``max|a| + max|b|``. The induced norm has no closed form;
two numbers are reported instead of one:

* a lower estimate, the largest image norm over random unit-norm
  trigonometric polynomials, and
* an upper proxy, the block-norm bound
  ``max(||P|| + ||R||, ||Q|| + ||S||)`` for ``G = [[P, Q], [R, S]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, stats

from ..branch_maps import ExpandingSystem
from ..function_space import Grid, build_grid, default_grid_size
from ..spectral import SpectralData, leading_eigendata
from ..transfer_operator import assemble, augmented_matrix, truncation_policy
from ._io import ReportMixin, file_stem
from .context import OutOfScopeError, TwistedContext
from .uni import UniCertificate, uni_certificate

RESIDUAL_LIMIT = 0.05
DEFAULT_UNI_N = 10


def block_norm(G: np.ndarray) -> float:
    """Induced-norm bound of a ``2m x 2m`` block map in ``max|a| + max|b|``."""
    m = G.shape[0] // 2
    inf = lambda B: float(np.max(np.sum(np.abs(B), axis=1))) if B.size else 0.0  # noqa: E731
    P, Q, R, S = G[:m, :m], G[:m, m:], G[m:, :m], G[m:, m:]
    return max(inf(P) + inf(R), inf(Q) + inf(S))


def discrete_norm(y: np.ndarray) -> float:
    m = len(y) // 2
    return float(np.max(np.abs(y[:m])) + np.max(np.abs(y[m:])))


def random_unit_functions(grid: Grid, t: float, count: int, seed: int, terms: int = 8) -> np.ndarray:
    """Stacked ``(f, f'/|t|)`` for random trig polynomials with ``|freq| <= 2|t|``.

    Each column has unit discrete ``||.||_{1,t}`` norm.
    """
    rng = np.random.default_rng(seed)
    x = grid.nodes
    at = abs(t) if t != 0 else 1.0
    cols = []
    for _ in range(count):
        freq = rng.uniform(-2.0 * at, 2.0 * at, terms)
        coef = rng.standard_normal(terms) + 1j * rng.standard_normal(terms)
        E = np.exp(1j * np.outer(x, freq))
        f = E @ coef
        df = E @ (1j * freq * coef)
        y = np.concatenate([f, df / at])
        cols.append(y / discrete_norm(y))
    return np.array(cols).T


def threshold_certificate(system: ExpandingSystem, n: int = DEFAULT_UNI_N) -> UniCertificate:
    """UNI certificate used for the ``|t|`` threshold: the broad candidate family."""
    return uni_certificate(system, n, "broad")


def _require_threshold(t: float, cert: UniCertificate) -> None:
    if cert.D <= 0 or abs(t) < max(2.0 * math.pi / cert.D, 4.0):
        raise OutOfScopeError(
            "theorem hypothesis |t| ≥ max(2π/D, 4) violated: "
            f"|t|={abs(t)}, D={cert.D:.6f}, threshold={cert.t_threshold:.4f}"
        )


@dataclass(frozen=True)
class DecayFit:
    gamma: float
    A: int | None
    n_start: float
    residual: float
    points: int


def _fit_at(n_values: np.ndarray, y: np.ndarray, A: int, L: float) -> DecayFit | None:
    sel = n_values >= A * L
    if sel.sum() < 3:
        return None
    slope, icpt = np.polyfit(n_values[sel], y[sel], 1)
    res = float(np.sqrt(np.mean((y[sel] - (icpt + slope * n_values[sel])) ** 2)))
    return DecayFit(math.exp(slope), A, A * L, res, int(sel.sum()))


def fit_decay(n_values, norms, t: float, max_A: int = 50) -> DecayFit:
    """Fit ``log norm = c + n log gamma`` on ``n >= A log|t|`` with the smallest integer ``A``
    whose RMS residual is below ``RESIDUAL_LIMIT`` (at least three points)."""
    n_values = np.asarray(n_values, dtype=float)
    y = np.log(np.asarray(norms, dtype=float))
    L = math.log(abs(t))
    last = None
    for A in range(1, max_A + 1):
        fit = _fit_at(n_values, y, A, L)
        if fit is None:
            break
        last = fit
        if fit.residual < RESIDUAL_LIMIT:
            return fit
    if last is None:
        sel = n_values >= 1
        slope, icpt = np.polyfit(n_values[sel], y[sel], 1)
        res = float(np.sqrt(np.mean((y[sel] - (icpt + slope * n_values[sel])) ** 2)))
        return DecayFit(math.exp(slope), None, 1.0, res, int(sel.sum()))
    return DecayFit(last.gamma, None, last.n_start, last.residual, last.points)


@dataclass(frozen=True, eq=False)
class DecayReport(ReportMixin):
    system: str
    sigma: float
    t: float
    N: int
    n_values: tuple
    lower: tuple
    upper: tuple
    fit: DecayFit
    lower_fit: DecayFit
    D: float
    t_threshold: float
    sample_count: int
    seed: int

    kind = "decay"
    csv_header = ("n", "lower", "upper")

    @property
    def gamma(self) -> float:
        return self.fit.gamma

    @property
    def A(self) -> int | None:
        return self.fit.A

    @property
    def consistent(self) -> bool:
        return all(lo <= up * (1 + 1e-12) for lo, up in zip(self.lower, self.upper))

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "sigma": self.sigma,
            "t": self.t,
            "N": self.N,
            "gamma": self.fit.gamma,
            "A": self.fit.A,
            "fit_start": self.fit.n_start,
            "fit_residual": self.fit.residual,
            "fit_points": self.fit.points,
            "gamma_lower": self.lower_fit.gamma,
            "D": self.D,
            "t_threshold": self.t_threshold,
            "sample_count": self.sample_count,
            "seed": self.seed,
            "method": {
                "lower": "max over random unit trigonometric polynomials, |freq| <= 2|t|",
                "upper": "block-norm bound of the augmented (value, derivative/|t|) matrix power",
                "fit": f"least squares on log(upper), n >= A log|t|, RMS < {RESIDUAL_LIMIT}",
            },
            "n": list(self.n_values),
            "lower": list(self.lower),
            "upper": list(self.upper),
        }

    def csv_rows(self) -> list:
        return [list(r) for r in zip(self.n_values, self.lower, self.upper)]

    def stem(self) -> str:
        return file_stem("decay", self.system, self.sigma, self.t, None, self.seed)


def norm_decay(
    system: ExpandingSystem,
    sigma: float,
    t: float,
    n_range: Sequence[int],
    sample_count: int,
    seed: int,
    grid: Grid | None = None,
    spec: SpectralData | None = None,
    cert: UniCertificate | None = None,
) -> DecayReport:
    """Lower estimate and upper proxy of ``||~L_s^n||_{1,t}`` for ``n`` in ``n_range``."""
    cert = threshold_certificate(system) if cert is None else cert
    _require_threshold(t, cert)
    if grid is None:
        grid = spec.grid if spec is not None else build_grid(default_grid_size(t))
    ctx = TwistedContext(system, complex(sigma, t), grid, spec, derivative_blocks=True)
    G = ctx.augmented()
    ns = sorted(set(int(n) for n in n_range))
    if ns and ns[0] < 0:
        raise ValueError("iteration counts must be nonnegative")
    Y = random_unit_functions(grid, t, sample_count, seed)
    lower, upper = [], []
    Gp = np.eye(G.shape[0], dtype=complex)
    Z = Y.copy()
    k = 0
    for n in ns:
        while k < n:
            Gp = G @ Gp
            Z = G @ Z
            k += 1
        if n == 0:
            lower.append(1.0)
            upper.append(1.0)
            continue
        upper.append(block_norm(Gp))
        lower.append(max(discrete_norm(Z[:, j]) for j in range(Z.shape[1])))
    fit_n = [n for n in ns if n > 0]
    up = [u for n, u in zip(ns, upper) if n > 0]
    lo = [v for n, v in zip(ns, lower) if n > 0]
    return DecayReport(
        system=system.name,
        sigma=float(sigma),
        t=float(t),
        N=grid.N,
        n_values=tuple(ns),
        lower=tuple(lower),
        upper=tuple(upper),
        fit=fit_decay(fit_n, up, t),
        lower_fit=fit_decay(fit_n, lo, t),
        D=cert.D,
        t_threshold=cert.t_threshold,
        sample_count=sample_count,
        seed=seed,
    )


def uniform_refit(reports: Sequence["DecayReport"]) -> dict[float, DecayFit]:
    """Refit every report with one common ``A``, the largest per-report value.

    A single ``A`` makes the fit windows ``n >= A log|t|`` start later for
    larger ``|t|``, as in the uniform statement over ``t``.
    """
    As = [r.fit.A for r in reports if r.fit.A is not None]
    if not As:
        return {r.t: r.fit for r in reports}
    A = max(As)
    out = {}
    for r in reports:
        ns = np.array([n for n in r.n_values if n > 0], dtype=float)
        y = np.log([u for n, u in zip(r.n_values, r.upper) if n > 0])
        fit = _fit_at(ns, y, A, math.log(abs(r.t)))
        out[r.t] = fit if fit is not None else DecayFit(r.fit.gamma, None, r.fit.n_start, r.fit.residual, r.fit.points)
    return out


@dataclass(frozen=True, eq=False)
class ResolventReport(ReportMixin):
    system: str
    sigma: float
    alpha: float
    t_values: tuple
    estimates: tuple
    upper: tuple
    excluded: tuple
    exponent: float
    exponent_stderr: float
    t0: float
    sample_count: int
    seed: int
    N_values: tuple = ()

    kind = "resolvent"
    csv_header = ("t", "N", "estimate", "upper")

    @property
    def passed(self) -> bool:
        return bool(self.exponent <= self.alpha)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "sigma": self.sigma,
            "alpha": self.alpha,
            "exponent": self.exponent,
            "exponent_stderr": self.exponent_stderr,
            "t0": self.t0,
            "passed": self.passed,
            "t": list(self.t_values),
            "N": list(self.N_values),
            "estimate": list(self.estimates),
            "upper": list(self.upper),
            "excluded": [list(e) for e in self.excluded],
            "sample_count": self.sample_count,
            "seed": self.seed,
        }

    def csv_rows(self) -> list:
        return [list(r) for r in zip(self.t_values, self.N_values, self.estimates, self.upper)]

    def stem(self) -> str:
        return file_stem("resolvent", self.system, self.sigma, None, None, self.seed)


def resolvent_norm(
    system: ExpandingSystem,
    s: complex,
    grid: Grid,
    sample_count: int,
    seed: int,
    spec: SpectralData | None = None,
) -> tuple[float, float]:
    """Sampled lower estimate and block-norm upper proxy of ``||(Id - L_s)^{-1}||_{1,t}``.

    Uses the unnormalised operator. Raises ``numpy.linalg.LinAlgError`` when
    ``Id - L_s`` is numerically singular.
    """
    s = complex(s)
    trunc = spec.trunc if spec is not None else truncation_policy(system, s.real, grid)
    op = assemble(system, s, grid, trunc, derivative_blocks=True)
    G = augmented_matrix(op)
    Mtx = np.eye(G.shape[0]) - G
    lu = linalg.lu_factor(Mtx, check_finite=False)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-13 * np.max(np.abs(np.diag(lu[0]))):
        raise np.linalg.LinAlgError("Id - L_s is numerically singular")
    Y = random_unit_functions(grid, s.imag, sample_count, seed)
    Z = linalg.lu_solve(lu, Y, check_finite=False)
    est = max(discrete_norm(Z[:, j]) for j in range(Z.shape[1]))
    inv = linalg.lu_solve(lu, np.eye(G.shape[0]), check_finite=False)
    return est, block_norm(inv)


def resolvent_bound(
    system: ExpandingSystem,
    sigma: float,
    t_grid: Sequence[float],
    alpha: float,
    sample_count: int = 32,
    seed: int = 0,
    cert: UniCertificate | None = None,
    grid_rule=default_grid_size,
) -> ResolventReport:
    """Estimate the resolvent norm along ``t_grid`` and fit its power-law exponent in ``|t|``.

    Points where ``Id - L_s`` is singular are recorded in ``excluded`` and
    left out of the fit. The fit uses all remaining points, so ``t0`` is the
    smallest of them.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    cert = threshold_certificate(system) if cert is None else cert
    for t in t_grid:
        _require_threshold(t, cert)
    ts, Ns, ests, ups, excl = [], [], [], [], []
    specs: dict = {}
    for t in t_grid:
        grid = build_grid(grid_rule(t))
        if grid.N not in specs:
            specs[grid.N] = leading_eigendata(system, sigma, grid)
        try:
            est, up = resolvent_norm(system, complex(sigma, t), grid, sample_count, seed, specs[grid.N])
        except np.linalg.LinAlgError as exc:
            excl.append((float(t), str(exc)))
            continue
        ts.append(float(t))
        Ns.append(grid.N)
        ests.append(est)
        ups.append(up)
    if len(ts) >= 2:
        reg = stats.linregress(np.log(np.abs(ts)), np.log(ests))
        exponent, stderr = float(reg.slope), float(reg.stderr)
    else:
        exponent, stderr = math.nan, math.nan
    return ResolventReport(
        system=system.name,
        sigma=float(sigma),
        alpha=float(alpha),
        t_values=tuple(ts),
        estimates=tuple(ests),
        upper=tuple(ups),
        excluded=tuple(excl),
        exponent=exponent,
        exponent_stderr=stderr,
        t0=min(ts) if ts else math.nan,
        sample_count=sample_count,
        seed=seed,
        N_values=tuple(Ns),
    )
