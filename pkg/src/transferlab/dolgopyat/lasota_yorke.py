"""Empirical constant in the Lasota-Yorke bound for the normalised operators.

For each test function and node the smallest ``C`` with

    |(~L_s^n f)'(x)| <= C |s| ~L_sigma^n(|f|)(x) + rho^n ~L_sigma^n(|f'|)(x)

is computed; the estimate is the maximum over the family. ``rho^n`` is the
empirical contraction ``max_w sup|h_w'|`` over words of length ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..branch_maps import ExpandingSystem, compose_branches, enumerate_words
from ..function_space import GridFunction
from ..spectral import SpectralData
from .context import TwistedContext


@dataclass(frozen=True)
class LasotaYorkeEstimate:
    C: float
    rho: float
    rho_n: float
    per_function: tuple
    n: int
    sigma: float
    t: float


def _as_grid_function(f, grid) -> GridFunction:
    if isinstance(f, GridFunction):
        return f
    return GridFunction.from_callable(grid, f)


_MAX_WORDS = 4096


def contraction_rate(system: ExpandingSystem, n: int, samples: int = 257) -> float:
    """``max sup|h_w'|`` over length-``n`` words with the smallest digits.

    For the Gauss system the maximum sits on the all-ones word; for finite
    systems every word is visited while the count stays below ``_MAX_WORDS``.
    """
    avail = system.branch_count if system.branch_count is not None else 4
    cap = max(1, min(avail, int(round(_MAX_WORDS ** (1.0 / n)))))
    return max(compose_branches(system, w).sup_deriv(samples) for w in enumerate_words(system, n, cap))


def lasota_yorke_estimate(
    system: ExpandingSystem,
    spec: SpectralData,
    t: float,
    n: int,
    family: Sequence[GridFunction | Callable],
    sigma: float | None = None,
    context: TwistedContext | None = None,
) -> LasotaYorkeEstimate:
    """Smallest ``C`` over ``family`` and all nodes.

    ``rho`` in the result is the per-step geometric mean ``rho_n^(1/n)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    sigma = spec.sigma if sigma is None else float(sigma)
    if context is None or not context.op_s.has_derivative_blocks:
        context = TwistedContext(system, complex(sigma, t), spec=spec, derivative_blocks=True)
    grid = context.grid
    G = np.linalg.matrix_power(context.augmented(), n)
    P = context.power("sigma", n)
    scale = abs(t) if t != 0 else 1.0
    m = grid.size
    rho_n = contraction_rate(system, n)
    rho = rho_n ** (1.0 / n)
    s_abs = context.abs_s
    per = []
    for f in family:
        g = _as_grid_function(f, grid)
        vals = g.values
        dvals = grid.diff_matrix @ vals
        out = G @ np.concatenate([vals, dvals / scale])
        dnew = np.abs(out[m:]) * scale
        a = P @ np.abs(vals)
        b = P @ np.abs(dvals)
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(a > 0, (dnew - rho_n * b) / (s_abs * a), 0.0)
        per.append(max(0.0, float(np.max(need))))
    return LasotaYorkeEstimate(max(per) if per else 0.0, rho, rho_n, tuple(per), n, sigma, t)
