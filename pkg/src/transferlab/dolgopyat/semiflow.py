"""Monte Carlo correlations of the suspension semi-flow over the base map.

Points of the suspension ``{(x, u): 0 <= u < r(x)}`` are drawn from the
invariant measure ``nu_0 x du`` normalised by ``int r d nu_0``: base points
come from ``nu_0`` by inverse CDF and carry the weight ``r(x)``, heights are
uniform below the roof. The flow moves ``u`` up at unit speed and jumps
``(x, r(x)) -> (T x, 0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from ..branch_maps import ExpandingSystem
from ..function_space import build_grid
from ..spectral import SpectralData, leading_eigendata
from ._io import ReportMixin, file_stem
from .context import OutOfScopeError

_MAX_JUMPS = 10_000


def bump(z):
    """``exp(-1 / (1 - z^2))`` on ``|z| < 1``, zero outside."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2))
    return out


def bump_observable(xc: float = 0.35, xw: float = 0.15, uc: float = 0.5, uw: float = 0.4) -> Callable:
    """Smooth ``F(x, u)`` supported in ``|x - xc| < xw``, ``|u - uc| < uw``."""

    def F(x, u):
        return bump((np.asarray(x) - xc) / xw) * bump((np.asarray(u) - uc) / uw)

    return F


def sample_base(spec: SpectralData, count: int, rng, resolution: int = 20001) -> np.ndarray:
    """Draw from ``nu_0`` using the inverse CDF of its density on a fine grid."""
    x = np.linspace(0.0, 1.0, resolution)
    dens = np.maximum(np.real(spec.eigenfunction(x)), 0.0)
    cdf = cumulative_trapezoid(dens, x, initial=0.0)
    cdf /= cdf[-1]
    return np.interp(rng.uniform(0.0, 1.0, count), cdf, x)


def flow(system: ExpandingSystem, x: np.ndarray, u: np.ndarray, dt: float):
    """Advance every point by time ``dt``."""
    x = x.copy()
    u = u + dt
    r = system.roof.eval(x)
    for _ in range(_MAX_JUMPS):
        jump = u >= r
        if not jump.any():
            return x, u
        u[jump] -= r[jump]
        x[jump] = system.forward(x[jump])
        r[jump] = system.roof.eval(x[jump])
    raise RuntimeError("roof too small: flow did not settle")


@dataclass(frozen=True, eq=False)
class CorrelationReport(ReportMixin):
    system: str
    times: tuple
    covariance: tuple
    stderr: tuple
    rate: float
    rate_ci: tuple
    fit_times: tuple
    sample_count: int
    seed: int

    kind = "correlate"
    csv_header = ("time", "covariance", "stderr")

    @property
    def rate_positive(self) -> bool:
        return bool(self.rate_ci[0] > 0)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "rate": self.rate,
            "rate_ci95": list(self.rate_ci),
            "rate_positive": self.rate_positive,
            "fit_times": list(self.fit_times),
            "times": list(self.times),
            "covariance": list(self.covariance),
            "stderr": list(self.stderr),
            "sample_count": self.sample_count,
            "seed": self.seed,
        }

    def csv_rows(self) -> list:
        return [list(r) for r in zip(self.times, self.covariance, self.stderr)]

    def stem(self) -> str:
        return file_stem("correlate", self.system, 0, None, None, self.seed)


def semiflow_correlation(
    system: ExpandingSystem,
    F: Callable,
    G: Callable,
    time_grid: Sequence[float],
    sample_count: int,
    seed: int,
    spec: SpectralData | None = None,
    significance: float = 3.0,
) -> CorrelationReport:
    """Estimate ``Cov(F, G o phi^tau)`` for each ``tau`` and fit an exponential rate.

    The rate is the negated slope of ``log|cov|`` against ``tau`` over the
    times where ``|cov|`` exceeds ``significance`` standard errors; the 95%
    interval comes from the regression standard error.
    """
    if system.constants.sigma0 >= 0.0:
        raise OutOfScopeError("branch sums diverge at sigma = 0; the suspension measure is not defined")
    times = np.asarray(sorted(float(t) for t in time_grid))
    if times.size == 0 or times[0] < 0:
        raise ValueError("times must be nonnegative")
    if spec is None:
        spec = leading_eigendata(system, 0.0, build_grid(64))
    rng = np.random.default_rng(seed)
    x = sample_base(spec, sample_count, rng)
    r = system.roof.eval(x)
    mean_r = float(np.mean(r))
    if not math.isfinite(mean_r):
        raise OutOfScopeError("roof is not integrable against nu_0")
    w = r / mean_r
    u = rng.uniform(0.0, 1.0, sample_count) * r
    f0 = F(x, u)
    fbar = float(np.mean(w * f0))
    cov, se = [], []
    now = 0.0
    for tau in times:
        x, u = flow(system, x, u, tau - now)
        now = tau
        g = G(x, u)
        gbar = float(np.mean(w * g))
        z = w * (f0 - fbar) * (g - gbar)
        cov.append(float(np.mean(z)))
        se.append(float(np.std(z, ddof=1) / math.sqrt(sample_count)))
    cov_a, se_a = np.array(cov), np.array(se)
    sel = np.abs(cov_a) > significance * se_a
    rate, ci, fit_t = math.nan, (math.nan, math.nan), ()
    if sel.sum() >= 3:
        reg = stats.linregress(times[sel], np.log(np.abs(cov_a[sel])))
        q = stats.t.ppf(0.975, sel.sum() - 2)
        rate = -float(reg.slope)
        ci = (rate - q * float(reg.stderr), rate + q * float(reg.stderr))
        fit_t = tuple(float(v) for v in times[sel])
    return CorrelationReport(
        system=system.name,
        times=tuple(float(v) for v in times),
        covariance=tuple(cov),
        stderr=tuple(se),
        rate=rate,
        rate_ci=ci,
        fit_times=fit_t,
        sample_count=sample_count,
        seed=seed,
    )
