"""Failure of the doubling property for the doubling map with a two-valued roof.

For ``T(x) = 2x mod 1`` with ``exp(r) = 3`` on the left half and ``3/2`` on
the right half, ``nu_sigma`` is the Bernoulli measure with
``p_0 = 1 / (1 + 2^sigma)``. The dyadic intervals of length ``2^-n`` just left
and right of 1/2 are the cylinders ``0 1^(n-1)`` and ``1 0^(n-1)``, so their
mass ratio is ``(p_1/p_0)^(n-2) = 2^(sigma (n-2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from ..branch_maps import make_doubling_counterexample
from ..function_space import Grid, build_grid
from ..spectral import cylinder_mass, leading_eigendata
from ._io import ReportMixin, file_stem


class FedererRow(NamedTuple):
    n: int
    left: float
    right: float
    ratio: float
    log2_ratio: Fraction


def left_word(n: int) -> tuple:
    return (0,) + (1,) * (n - 1)


def right_word(n: int) -> tuple:
    return (1,) + (0,) * (n - 1)


def symbol_probabilities(sigma) -> tuple[float, float]:
    """``(p_0, p_1)`` from ``w_0 = 3^-sigma / 2`` and ``w_1 = (3/2)^-sigma / 2``."""
    s = float(sigma)
    w0 = 3.0**-s / 2.0
    w1 = 1.5**-s / 2.0
    return w0 / (w0 + w1), w1 / (w0 + w1)


@dataclass(frozen=True, eq=False)
class FedererTable(ReportMixin):
    sigma: Fraction
    rows: tuple

    kind = "federer"
    csv_header = ("n", "left", "right", "ratio", "log2_ratio")

    @property
    def max_abs_log2_ratio(self) -> Fraction:
        return max(abs(r.log2_ratio) for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "sigma": str(self.sigma),
            "rows": [
                {"n": r.n, "left": r.left, "right": r.right, "ratio": r.ratio, "log2_ratio": str(r.log2_ratio)}
                for r in self.rows
            ],
        }

    def csv_rows(self) -> list:
        return [list(r) for r in self.rows]

    def stem(self) -> str:
        return file_stem("federer", "doubling", _sigma_tag(self.sigma))


def _sigma_tag(sigma: Fraction) -> str:
    return str(sigma.numerator) if sigma.denominator == 1 else f"{sigma.numerator}o{sigma.denominator}"


def federer_table(sigma, n_max: int) -> FedererTable:
    """Rows ``n = 1..n_max`` of left/right masses, their ratio and the exact ``log2`` ratio.

    ``sigma`` is converted with ``Fraction`` (decimal strings stay exact), and
    the exponent ``log2(left/right) = sigma (n - 2)`` is kept rational.
    """
    if n_max < 3:
        raise ValueError("n_max must be at least 3")
    sig = Fraction(sigma) if not isinstance(sigma, float) else Fraction(sigma).limit_denominator(10**12)
    p0, p1 = symbol_probabilities(sig)
    rows = []
    for n in range(1, n_max + 1):
        left = p0 * p1 ** (n - 1)
        right = p1 * p0 ** (n - 1)
        expo = sig * (n - 2)
        rows.append(FedererRow(n, left, right, 2.0 ** float(expo), expo))
    return FedererTable(sig, tuple(rows))


class CrossCheck(NamedTuple):
    n: int
    left_grid: float
    right_grid: float
    left_error: float
    right_error: float


def federer_crosscheck(table: FedererTable, n_max: int = 8, grid: Grid | None = None) -> list[CrossCheck]:
    """Compare the symbolic rows with cylinder masses of the grid eigendata."""
    system = make_doubling_counterexample()
    grid = build_grid(64) if grid is None else grid
    spec = leading_eigendata(system, float(table.sigma), grid)
    out = []
    for row in table.rows:
        if row.n > n_max:
            break
        lg = cylinder_mass(system, spec, left_word(row.n))
        rg = cylinder_mass(system, spec, right_word(row.n))
        out.append(CrossCheck(row.n, lg, rg, abs(lg - row.left), abs(rg - row.right)))
    return out


def grid_log2_ratios(checks) -> np.ndarray:
    return np.array([math.log2(c.left_grid / c.right_grid) for c in checks])
