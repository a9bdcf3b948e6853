"""Leading eigendata of the real-parameter operators ``L_sigma``.

Power iteration gives ``lambda_sigma`` and ``f_sigma``, adjoint iteration
from the quadrature weights gives ``mu_sigma`` and deflation gives the
subdominant ratio. Only the two top modes are ever needed, so no dense
eigensolver is involved here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .branch_maps import ExpandingSystem, birkhoff_roof, compose_branches
from .function_space import Grid, GridFunction, MeasureWeights, integrate
from .transfer_operator import OperatorMatrix, TruncationPolicy, assemble, truncation_policy

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


class ConvergenceError(RuntimeError):
    """Power iteration did not settle; carries the last estimates."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class PositivityError(RuntimeError):
    """A power iterate changed sign, so the leading mode is not positive."""


class GapEstimate(NamedTuple):
    ratio: float
    converged: bool
    iterations: int

    @property
    def upper_bound_only(self) -> bool:
        return not self.converged


@dataclass(frozen=True, eq=False)
class SpectralData:
    """``lambda_sigma``, ``f_sigma``, ``mu_sigma`` and ``nu_sigma = f_sigma mu_sigma``.

    Normalised so that ``mu(1) = 1`` and ``mu(f) = 1``; ``nu`` is then a
    probability vector.
    """

    sigma: float
    lam: float
    eigenfunction: GridFunction
    mu: MeasureWeights
    nu: MeasureWeights
    residual: float
    iterations: int
    trunc: TruncationPolicy
    system_name: str
    gap: float = math.nan
    gap_converged: bool = False
    operator: OperatorMatrix | None = field(default=None, repr=False)

    @property
    def grid(self) -> Grid:
        return self.eigenfunction.grid

    def with_gap(self, est: GapEstimate) -> "SpectralData":
        return SpectralData(
            self.sigma, self.lam, self.eigenfunction, self.mu, self.nu, self.residual,
            self.iterations, self.trunc, self.system_name, est.ratio, est.converged, self.operator,
        )

    def to_dict(self) -> dict:
        return {
            "system": self.system_name,
            "sigma": self.sigma,
            "N": self.grid.N,
            "truncation": self.trunc.to_dict(),
            "lambda": self.lam,
            "gap": None if math.isnan(self.gap) else self.gap,
            "gap_converged": self.gap_converged,
            "residual": self.residual,
            "iterations": self.iterations,
            "nodes": self.grid.nodes.tolist(),
            "eigenfunction": np.real(self.eigenfunction.values).tolist(),
            "mu": self.mu.weights.tolist(),
        }

    def to_json(self, path=None, indent: int = 2) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _real_operator(system, sigma, grid, trunc, op) -> OperatorMatrix:
    if op is not None:
        if op.t != 0.0 or op.normalized or abs(op.sigma - sigma) > 0.0:
            raise ValueError("expected the unnormalised operator at s = sigma")
        return op
    if trunc is None:
        trunc = truncation_policy(system, sigma, grid)
    return assemble(system, sigma, grid, trunc)


def _power(A: np.ndarray, v: np.ndarray, tol: float, max_iter: int, positive: bool):
    v = v / np.max(np.abs(v))
    lam_prev = math.inf
    for it in range(1, max_iter + 1):
        w = A @ v
        if positive and (np.any(w < 0.0) and np.any(w > 0.0)):
            # tiny negative values from rounding are tolerated
            if np.min(w) < -1e-12 * np.max(np.abs(w)):
                raise PositivityError(f"iterate {it} changed sign (min {np.min(w):.3e})")
        lam = float(np.max(np.abs(w)))
        w = w / lam
        res = float(np.max(np.abs(A @ w - lam * w)))
        if abs(lam - lam_prev) < tol and res < tol * max(1.0, lam):
            return lam, w, res, it
        lam_prev, v = lam, w
    raise ConvergenceError(
        f"power iteration did not converge in {max_iter} steps",
        {"lambda": lam, "residual": res, "iterations": max_iter},
    )


def leading_eigendata(
    system: ExpandingSystem,
    sigma: float,
    grid: Grid,
    trunc: TruncationPolicy | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    op: OperatorMatrix | None = None,
) -> SpectralData:
    """Leading eigenvalue, positive eigenfunction and eigenmeasure at real ``sigma``."""
    sigma = float(sigma)
    op = _real_operator(system, sigma, grid, trunc, op)
    A = np.real(op.matrix)
    lam, f, res, iters = _power(A, np.ones(grid.size), tol, max_iter, positive=True)
    if np.any(f <= 0.0):
        raise PositivityError("leading eigenvector is not strictly positive at every node")
    # left fixed vector, started from the quadrature weights
    mu_lam, w, _, mu_iters = _power(A.T, np.array(grid.quad_weights), tol, max_iter, positive=False)
    w = w / w.sum()
    scale = float(w @ f)
    f = f / scale
    res = res / scale
    mu = MeasureWeights(grid, w)
    eig = GridFunction(grid, f)
    nu = mu.with_density(eig)
    return SpectralData(
        sigma=sigma,
        lam=lam,
        eigenfunction=eig,
        mu=mu,
        nu=nu,
        residual=res,
        iterations=max(iters, mu_iters),
        trunc=op.trunc,
        system_name=system.name,
        operator=op,
    )


def _start_vector(n: int) -> np.ndarray:
    # fixed generic start; only needs a component on the subdominant mode
    return np.random.default_rng(20240101).standard_normal(n)


def subdominant_gap(
    system: ExpandingSystem,
    sigma: float,
    grid: Grid,
    trunc: TruncationPolicy | None = None,
    tol: float = 1e-10,
    max_iter: int = 20_000,
    spec: SpectralData | None = None,
) -> GapEstimate:
    """``|lambda_2| / lambda_sigma`` by power iteration with the top mode projected out.

    Two-step growth factors are used so that a complex or negative
    subdominant pair does not make the estimate oscillate.
    """
    if spec is None:
        spec = leading_eigendata(system, sigma, grid, trunc)
    A = np.real(spec.operator.matrix)
    f = np.real(spec.eigenfunction.values)
    w = spec.mu.weights
    v = _start_vector(grid.size)
    v = v - f * (w @ v)
    est_prev = math.inf
    est = math.inf
    for it in range(1, max_iter + 1):
        v = v / np.max(np.abs(v))
        u = A @ v
        u = u - f * (w @ u)
        u2 = A @ u
        u2 = u2 - f * (w @ u2)
        nrm = np.max(np.abs(u2))
        if nrm == 0.0:
            return GapEstimate(0.0, True, it)
        est = math.sqrt(nrm / np.max(np.abs(v))) / spec.lam
        if abs(est - est_prev) < tol:
            return GapEstimate(min(est, 1.0), True, it)
        est_prev, v = est, u2
    return GapEstimate(min(est, 1.0), False, max_iter)


class LambdaScan(NamedTuple):
    sigmas: tuple
    lambdas: tuple
    monotone: bool


def lambda_scan(
    system: ExpandingSystem,
    sigmas: Sequence[float],
    grid: Grid,
    trunc: TruncationPolicy | None = None,
    tol: float = DEFAULT_TOL,
    slack: float = 1e-10,
) -> LambdaScan:
    """``lambda_sigma`` for each ``sigma`` in input order, plus a nonincreasing flag.

    A fixed ``trunc`` contributes its cutoff and correction order; the
    tail bound itself is recomputed at each ``sigma``.
    """
    lams = []
    cache: dict = {}
    for s in sigmas:
        s = float(s)
        if s not in cache:
            tr = None
            if trunc is not None:
                tr = truncation_policy(system, s, grid, trunc.tolerance, trunc.order, trunc.M)
            cache[s] = leading_eigendata(system, s, grid, tr, tol).lam
        lams.append(cache[s])
    order = np.argsort(np.asarray(sigmas, dtype=float), kind="stable")
    ordered = np.asarray(lams)[order]
    mono = bool(np.all(np.diff(ordered) <= slack))
    return LambdaScan(tuple(float(s) for s in sigmas), tuple(lams), mono)


def cylinder_mass(system: ExpandingSystem, spec: SpectralData, word) -> float:
    """``nu_sigma(h_w [0, 1])`` through the eigenmeasure identity.

    ``nu(1_{h_w I}) = lambda^{-n} mu(exp(-sigma r^(n) o h_w) |h_w'| f o h_w)``,
    evaluated with the grid quadrature of ``mu``.
    """
    h = compose_branches(system, word)
    roof = birkhoff_roof(system, h)
    x = spec.grid.nodes
    g = np.exp(-spec.sigma * roof.value(x)) * np.abs(h.deriv(x)) * spec.eigenfunction(np.clip(h.func(x), 0.0, 1.0))
    val = integrate(GridFunction(spec.grid, np.real(g)), spec.mu)
    return float(val) / spec.lam ** len(word)
