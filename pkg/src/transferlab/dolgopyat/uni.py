"""Uniform non-integrability certificates.

For two n-letter inverse branches ``h, k`` the phase difference is
``psi = r^(n) o h - r^(n) o k``. A pair certifies UNI with constant ``D`` when
``|psi'| >= D`` on all of [0, 1].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ..branch_maps import ExpandingSystem, InverseBranch, birkhoff_roof, compose_branches
from ._io import ReportMixin, file_stem

DEFAULT_RESOLUTION = 4097


class InvalidPairError(ValueError):
    """The two branches do not come from words of the same length."""


class PsiPair(NamedTuple):
    psi: Callable
    dpsi: Callable
    inf: float
    sup: float
    slack: float


def _certified_extrema(d: np.ndarray, x: np.ndarray) -> tuple[float, float, float]:
    a = np.abs(d)
    dx = float(x[1] - x[0])
    # Lipschitz constant of psi' from the sampled second differences
    lip = float(np.max(np.abs(np.diff(d)))) / dx if len(d) > 1 else 0.0
    slack = lip * dx / 2.0
    return max(0.0, float(a.min()) - slack), float(a.max()) + slack, slack


def psi_pair(
    system: ExpandingSystem, h: InverseBranch, k: InverseBranch, resolution: int = DEFAULT_RESOLUTION
) -> PsiPair:
    """``psi_{h,k}`` with a certified lower bound on ``|psi'|`` and an upper bound on it."""
    if len(h.word) != len(k.word):
        raise InvalidPairError(f"word lengths differ: {len(h.word)} vs {len(k.word)}")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    rh = birkhoff_roof(system, h)
    rk = birkhoff_roof(system, k)

    def psi(x):
        return rh.value(x) - rk.value(x)

    def dpsi(x):
        return rh.deriv(x) - rk.deriv(x)

    x = np.linspace(0.0, 1.0, resolution)
    inf, sup, slack = _certified_extrema(dpsi(x), x)
    return PsiPair(psi, dpsi, inf, sup, slack)


def fibonacci_pell_words(n: int) -> tuple[tuple, tuple]:
    """All-ones and all-twos words; their Mobius entries are Fibonacci and Pell numbers."""
    return (1,) * n, (2,) * n


def broad_candidates(system: ExpandingSystem, n: int, digit_cap: int = 8) -> list[tuple]:
    """Pairs among the words ``a^n`` and ``a^(n-1) b`` with digits up to ``digit_cap``."""
    digits = system.digits(digit_cap)
    words = {(a,) * n for a in digits}
    words |= {(a,) * (n - 1) + (b,) for a in digits for b in digits}
    return list(itertools.combinations(sorted(words), 2))


def default_candidates(system: ExpandingSystem, n: int) -> list[tuple]:
    if system.tail.kind == "gauss":
        return [fibonacci_pell_words(n)]
    digits = system.digits(4)
    return list(itertools.combinations([(d,) * n for d in digits], 2))


@dataclass(frozen=True)
class UniCertificate(ReportMixin):
    """Best pair among the candidates and its certified ``D = inf |psi'|``."""

    system: str
    n: int
    h_word: tuple
    k_word: tuple
    D: float
    sup_psi: float
    resolution: int
    Kbar: float
    slack: float
    candidates: tuple = field(default=(), repr=False)

    kind = "uni"
    csv_header = ("h_word", "k_word", "D", "sup_psi")

    @property
    def certified(self) -> bool:
        return self.D > 0.0

    @property
    def Delta(self) -> float:
        """``2 pi / D``, the phase-sweep length of the cancellation argument."""
        return 2.0 * math.pi / self.D if self.D > 0 else math.inf

    @property
    def t_threshold(self) -> float:
        return max(self.Delta, 4.0)

    @property
    def sup_within_bound(self) -> bool:
        return self.sup_psi <= 2.0 * self.Kbar + 1e-8

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "n": self.n,
            "h_word": list(self.h_word),
            "k_word": list(self.k_word),
            "D": self.D,
            "sup_psi": self.sup_psi,
            "two_Kbar": 2.0 * self.Kbar,
            "certified": self.certified,
            "t_threshold": self.t_threshold if self.certified else None,
            "resolution": self.resolution,
            "lipschitz_slack": self.slack,
            "candidate_count": len(self.candidates),
        }

    def csv_rows(self) -> list:
        return [list(c) for c in self.candidates]

    def stem(self) -> str:
        return file_stem("uni", self.system, n=self.n)


def uni_certificate(
    system: ExpandingSystem,
    n: int,
    candidates: Sequence[tuple] | str | None = None,
    resolution: int = DEFAULT_RESOLUTION,
) -> UniCertificate:
    """Scan candidate word pairs of length ``n`` and keep the one with largest ``D``.

    ``candidates`` may be explicit word pairs, ``"broad"`` or ``None`` for the
    system default. When every pair gives ``D = 0`` the returned certificate
    has ``certified == False``.
    """
    if n < 1:
        raise ValueError("word length must be at least 1")
    if candidates is None:
        candidates = default_candidates(system, n)
    elif isinstance(candidates, str):
        if candidates != "broad":
            raise ValueError(f"unknown candidate family {candidates!r}")
        candidates = broad_candidates(system, n)
    candidates = [(tuple(h), tuple(k)) for h, k in candidates]
    if not candidates:
        raise ValueError("no candidate pairs")
    x = np.linspace(0.0, 1.0, resolution)
    dR: dict = {}
    for pair in candidates:
        for w in pair:
            if len(w) != n:
                raise InvalidPairError(f"word {w} does not have length {n}")
            if w not in dR:
                dR[w] = birkhoff_roof(system, compose_branches(system, w)).deriv(x)
    rows = []
    best = None
    for h, k in candidates:
        D, sup, slack = _certified_extrema(dR[h] - dR[k], x)
        rows.append((h, k, D, sup))
        if best is None or D > best[2]:
            best = (h, k, D, sup, slack)
    h, k, D, sup, slack = best
    return UniCertificate(
        system=system.name,
        n=n,
        h_word=h,
        k_word=k,
        D=D,
        sup_psi=sup,
        resolution=resolution,
        Kbar=system.constants.Kbar,
        slack=slack,
        candidates=tuple(rows),
    )
