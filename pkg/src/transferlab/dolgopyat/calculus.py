"""Two complex numbers with phases at least pi/3 apart cannot add up fully.

If ``cos(theta_1 - theta_2) <= 1/2`` then
``|z_1 + z_2| <= max(eta r_1 + r_2, r_1 + eta r_2)`` for every
``eta >= (sqrt(7) - 1) / 2``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

ETA_MIN = (math.sqrt(7.0) - 1.0) / 2.0
# cos(pi/3) evaluates to 0.5000000000000001; the boundary pair must count as applicable
COS_TOL = 1e-12


class CalculusCheck(NamedTuple):
    applicable: bool
    margin: float


class SweepResult(NamedTuple):
    count: int
    violations: int
    min_margin: float
    eta: float
    seed: int


def _check_eta(eta: float) -> None:
    if not (ETA_MIN <= eta < 1.0):
        raise ValueError(f"eta must lie in [(sqrt(7)-1)/2, 1) = [{ETA_MIN:.6f}, 1), got {eta}")


def _cos_diff(z1, z2):
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    r = np.abs(z1) * np.abs(z2)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.real(z1 * np.conj(z2)) / r
    # a zero summand makes the bound trivial, so treat it as applicable
    return np.where(r > 0, c, -1.0)


def _margin(z1, z2, eta):
    r1, r2 = np.abs(z1), np.abs(z2)
    return np.maximum(eta * r1 + r2, r1 + eta * r2) - np.abs(np.asarray(z1) + np.asarray(z2))


def calculus_lemma_check(z1: complex, z2: complex, eta: float, check_range: bool = True) -> CalculusCheck:
    """Applicability of the phase condition and the slack of the inequality.

    ``check_range=False`` evaluates the inequality for ``eta`` outside the
    lemma's range, which is how its sharpness is probed.
    """
    if check_range:
        _check_eta(eta)
    applicable = bool(_cos_diff(z1, z2) <= 0.5 + COS_TOL)
    return CalculusCheck(applicable, float(_margin(complex(z1), complex(z2), eta)))


def calculus_sweep(count: int, eta: float = ETA_MIN, seed: int = 0, batch: int = 250_000) -> SweepResult:
    """Draw ``count`` random applicable pairs and count violations of the inequality.

    Pairs are drawn with log-uniform moduli over six decades and uniform
    phases; non-applicable draws are discarded. Margins below ``-1e-12``
    (relative to the larger modulus) count as violations.
    """
    _check_eta(eta)
    rng = np.random.default_rng(seed)
    got = 0
    violations = 0
    worst = math.inf
    while got < count:
        m = batch
        r1 = 10.0 ** rng.uniform(-3, 3, m)
        r2 = 10.0 ** rng.uniform(-3, 3, m)
        th1 = rng.uniform(-math.pi, math.pi, m)
        th2 = rng.uniform(-math.pi, math.pi, m)
        z1 = r1 * np.exp(1j * th1)
        z2 = r2 * np.exp(1j * th2)
        ok = np.cos(th1 - th2) <= 0.5
        z1, z2 = z1[ok], z2[ok]
        take = min(count - got, len(z1))
        z1, z2 = z1[:take], z2[:take]
        marg = _margin(z1, z2, eta) / np.maximum(np.abs(z1), np.abs(z2))
        violations += int(np.sum(marg < -1e-12))
        if take:
            worst = min(worst, float(marg.min()))
        got += take
    return SweepResult(count, violations, worst, eta, seed)


def boundary_pair() -> tuple[complex, complex]:
    """``r_1 = r_2 = 1`` with phase difference exactly ``arccos(1/2)``."""
    return 1.0 + 0j, complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
