"""Countable-branch expanding interval maps and their roof functions.

A system is described by its inverse branches ``h_d`` (indexed by digits),
the forward map on each closed monotonicity interval, a roof function ``r``
given per monotonicity interval, and a handful of regularity constants.
Countable families are never materialised; branches are built lazily from
their digit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


class InvalidWordError(ValueError):
    """A digit sequence does not index branches of the system."""


class InvalidSystemError(ValueError):
    """A system violates a structural assumption (e.g. a non-monotone branch)."""


class DivergentSumError(ValueError):
    """The branch sum diverges at the requested real parameter."""


@dataclass(frozen=True, eq=False)
class InverseBranch:
    """A contraction ``h`` of [0, 1] with its first two derivatives.

    ``mobius`` holds exact integer coefficients ``(a, b, c, d)`` when
    ``h(x) = (a x + b) / (c x + d)``; ``affine`` holds ``(slope, intercept)``
    for affine branches.
    """

    word: tuple
    func: Callable = field(repr=False)
    deriv: Callable = field(repr=False)
    deriv2: Callable = field(repr=False)
    mobius: tuple | None = None
    affine: tuple | None = None

    def __call__(self, x):
        return self.func(x)

    def eval(self, x):
        return self.func(x)

    @classmethod
    def from_mobius(cls, word, coeffs) -> "InverseBranch":
        a, b, c, d = (int(v) for v in coeffs)
        det = a * d - b * c
        if d == 0:
            raise InvalidSystemError("Mobius branch with d = 0 is not defined at x = 0")
        # exact big-integer ratios, then floats: safe for very long words
        A, B, Cc = a / d, b / d, c / d
        J = det / d / d

        def func(x):
            x = np.asarray(x, dtype=float)
            return (A * x + B) / (Cc * x + 1.0)

        def deriv(x):
            x = np.asarray(x, dtype=float)
            return J / (Cc * x + 1.0) ** 2

        def deriv2(x):
            x = np.asarray(x, dtype=float)
            return -2.0 * Cc * J / (Cc * x + 1.0) ** 3

        return cls(tuple(word), func, deriv, deriv2, mobius=(a, b, c, d))

    @classmethod
    def from_affine(cls, word, slope: float, intercept: float) -> "InverseBranch":
        slope, intercept = float(slope), float(intercept)

        def func(x):
            return slope * np.asarray(x, dtype=float) + intercept

        def deriv(x):
            return np.full(np.shape(x), slope) if np.ndim(x) else slope

        def deriv2(x):
            return np.zeros(np.shape(x)) if np.ndim(x) else 0.0

        return cls(tuple(word), func, deriv, deriv2, affine=(slope, intercept))

    def image(self) -> tuple[float, float]:
        """The interval ``h([0, 1])`` as ``(left, right)``."""
        ends = sorted((float(self.func(0.0)), float(self.func(1.0))))
        return ends[0], ends[1]

    def sup_deriv(self, samples: int = 65) -> float:
        x = np.linspace(0.0, 1.0, samples)
        return float(np.max(np.abs(self.deriv(x))))


def compose_pair(outer: InverseBranch, inner: InverseBranch) -> InverseBranch:
    """``outer o inner`` with exact coefficients whenever both sides carry them."""
    word = tuple(outer.word) + tuple(inner.word)
    if outer.mobius is not None and inner.mobius is not None:
        a1, b1, c1, d1 = outer.mobius
        a2, b2, c2, d2 = inner.mobius
        return InverseBranch.from_mobius(
            word, (a1 * a2 + b1 * c2, a1 * b2 + b1 * d2, c1 * a2 + d1 * c2, c1 * b2 + d1 * d2)
        )
    if outer.affine is not None and inner.affine is not None:
        s1, i1 = outer.affine
        s2, i2 = inner.affine
        return InverseBranch.from_affine(word, s1 * s2, s1 * i2 + i1)

    def func(x):
        return outer.func(inner.func(x))

    def deriv(x):
        return outer.deriv(inner.func(x)) * inner.deriv(x)

    def deriv2(x):
        y = inner.func(x)
        g1 = inner.deriv(x)
        return outer.deriv2(y) * g1**2 + outer.deriv(y) * inner.deriv2(x)

    return InverseBranch(word, func, deriv, deriv2)


class RoofFunction:
    """Roof ``r`` given per monotonicity interval.

    ``pullback(d, x)`` is ``r(h_d(x))`` using the piece of ``r`` that belongs to
    branch ``d`` (so it is C^1 on all of [0, 1]); ``eval(x)`` uses the left-limit
    value at partition points.
    """

    def __init__(self, eval_fn, pullback_fn, pullback_deriv_fn, inf_r: float, K: float):
        self._eval = eval_fn
        self._pullback = pullback_fn
        self._pullback_deriv = pullback_deriv_fn
        self.inf_r = float(inf_r)
        self.K = float(K)

    def eval(self, x):
        return self._eval(np.asarray(x, dtype=float))

    __call__ = eval

    def pullback(self, digit, x):
        return self._pullback(digit, np.asarray(x, dtype=float))

    def pullback_deriv(self, digit, x):
        return self._pullback_deriv(digit, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SystemConstants:
    """Regularity constants: ``|h'| <= C rho_hat^n``, ``|h''| <= K |h'|``.

    ``rho`` is a fixed rate in ``(rho_hat, 1)`` used for the distortion
    constant ``K / (1 - rho)`` of n-fold compositions.
    """

    rho_hat: float
    C: float
    K: float
    sigma0: float
    rho: float

    @property
    def Kbar(self) -> float:
        return self.K / (1.0 - self.rho)


@dataclass(frozen=True)
class TailModel:
    """Analytic control of ``sum_{m > M} sup exp(-sigma r o h_m) |h_m'|``.

    ``kind == "finite"``: no tail once all branches are kept.
    ``kind == "gauss"``: ``h_m(x) = 1/(m + x)`` with ``r = log|T'|`` so the
    branch weight is ``(m + x)^(-2(1 + s))`` and Hurwitz-zeta sums are exact.
    """

    kind: str = "finite"

    def bound(self, sigma: float, M: int, branch_count: int | None = None) -> float:
        if self.kind == "finite":
            if branch_count is not None and M >= branch_count:
                return 0.0
            return math.inf
        if self.kind == "gauss":
            p = 2.0 * (1.0 + sigma)
            if p <= 1.0:
                raise DivergentSumError(f"branch sum diverges for sigma={sigma} <= -1/2")
            return M ** (1.0 - p) / (p - 1.0)
        raise ValueError(f"unknown tail model {self.kind!r}")


class ExpandingSystem:
    """Inverse branches, forward map and roof of a piecewise expanding map."""

    def __init__(
        self,
        name: str,
        branch_fn: Callable[[int], InverseBranch],
        forward_branch: Callable,
        roof: RoofFunction,
        constants: SystemConstants,
        *,
        first_digit: int = 1,
        branch_count: int | None = None,
        tail: TailModel = TailModel(),
        descriptor: dict | None = None,
    ):
        self.name = name
        self._branch_fn = branch_fn
        self._forward_branch = forward_branch
        self.roof = roof
        self.constants = constants
        self.first_digit = int(first_digit)
        self.branch_count = branch_count
        self.tail = tail
        self.descriptor = descriptor or {"builtin": name}
        self._cache: dict = {}

    def __repr__(self) -> str:
        count = "infinite" if self.branch_count is None else self.branch_count
        return f"ExpandingSystem({self.name!r}, branches={count})"

    @property
    def is_finite(self) -> bool:
        return self.branch_count is not None

    def valid_digit(self, d) -> bool:
        if int(d) != d or d < self.first_digit:
            return False
        return self.branch_count is None or d < self.first_digit + self.branch_count

    def branch(self, d: int) -> InverseBranch:
        if not self.valid_digit(d):
            raise InvalidWordError(f"digit {d!r} does not index a branch of {self.name}")
        d = int(d)
        if d not in self._cache:
            self._cache[d] = self._branch_fn(d)
        return self._cache[d]

    def digits(self, M: int | None = None) -> list[int]:
        """The first ``M`` digits (all of them for a finite system when M is None)."""
        if M is None:
            if self.branch_count is None:
                raise ValueError("an infinite system needs an explicit cutoff")
            M = self.branch_count
        if self.branch_count is not None:
            M = min(M, self.branch_count)
        return list(range(self.first_digit, self.first_digit + M))

    def forward_branch(self, d: int, y):
        """Forward map restricted to the closed monotonicity interval of branch ``d``."""
        return self._forward_branch(d, np.asarray(y, dtype=float))

    def forward(self, y):
        """Forward map ``T`` on [0, 1]; partition points go to the left branch's image."""
        return self._forward_global(np.asarray(y, dtype=float))

    def _forward_global(self, y):
        raise NotImplementedError

    def branch_arrays(self, digits, x):
        """Per-node, per-digit arrays ``h(x), h'(x), h''(x), r(h(x)), (r o h)'(x)``.

        All arrays have shape ``(len(x), len(digits))``.
        """
        x = np.asarray(x, dtype=float)
        cols = [[] for _ in range(5)]
        for d in digits:
            h = self.branch(d)
            ones = np.ones_like(x)
            vals = (
                h.func(x) * ones,
                h.deriv(x) * ones,
                h.deriv2(x) * ones,
                self.roof.pullback(d, x) * ones,
                self.roof.pullback_deriv(d, x) * ones,
            )
            for col, v in zip(cols, vals):
                col.append(v)
        return tuple(np.stack(c, axis=1) for c in cols)

    def partition_points(self, M: int) -> np.ndarray:
        ends = sorted({e for d in self.digits(M) for e in self.branch(d).image()})
        return np.array(ends)

    def tail_bound(self, sigma: float, M: int) -> float:
        return self.tail.bound(sigma, M, self.branch_count)


class _GaussSystem(ExpandingSystem):
    def branch_arrays(self, digits, x):
        m = np.asarray(digits, dtype=float)[None, :]
        z = np.asarray(x, dtype=float)[:, None] + m
        inv = 1.0 / z
        return inv, -inv**2, 2.0 * inv**3, 2.0 * np.log(z), 2.0 * inv

    def _forward_global(self, y):
        y = np.atleast_1d(y)
        out = np.zeros_like(y)
        nz = y > 0
        inv = 1.0 / y[nz]
        out[nz] = inv - np.floor(inv)
        return out


class _TableSystem(ExpandingSystem):
    """Finitely many branches; global forward map via the partition."""

    def _forward_global(self, y):
        y = np.atleast_1d(y)
        out = np.empty_like(y)
        digits = self.digits()
        lefts = np.array([self.branch(d).image()[0] for d in digits])
        order = np.argsort(lefts)
        rights = np.array([self.branch(digits[i]).image()[1] for i in order])
        # left-limit convention: a partition point belongs to the interval on its left
        idx = np.clip(np.searchsorted(rights, y, side="left"), 0, len(order) - 1)
        for k, i in enumerate(order):
            sel = idx == k
            if sel.any():
                out[sel] = self.forward_branch(digits[i], y[sel])
        return out


def make_gauss_system() -> ExpandingSystem:
    """Gauss map ``T(x) = {1/x}`` with roof ``r = log|T'| = -2 log x``.

    Branches ``h_m(x) = 1/(m + x)``, ``m >= 1``, carry Mobius coefficients
    ``(0, 1, 1, m)``.
    """

    def branch_fn(m):
        return InverseBranch.from_mobius((m,), (0, 1, 1, m))

    def forward_branch(m, y):
        return 1.0 / y - m

    def eval_fn(x):
        with np.errstate(divide="ignore"):
            return -2.0 * np.log(x)

    def pullback(m, x):
        return 2.0 * np.log(m + x)

    def pullback_deriv(m, x):
        return 2.0 / (m + x)

    # inf r = 0 is attained only at x = 1
    roof = RoofFunction(eval_fn, pullback, pullback_deriv, inf_r=0.0, K=2.0)
    rho_hat = GOLDEN**-2
    constants = SystemConstants(
        rho_hat=rho_hat, C=GOLDEN**2, K=2.0, sigma0=-0.5, rho=math.sqrt(rho_hat)
    )
    return _GaussSystem(
        "gauss",
        branch_fn,
        forward_branch,
        roof,
        constants,
        first_digit=1,
        branch_count=None,
        tail=TailModel("gauss"),
    )


def make_doubling_counterexample() -> ExpandingSystem:
    """``T(x) = 2x mod 1`` with ``exp(r) = 3`` on [0, 1/2] and ``3/2`` on (1/2, 1]."""
    values = (math.log(3.0), math.log(1.5))

    def branch_fn(d):
        return InverseBranch.from_affine((d,), 0.5, 0.5 * d)

    def forward_branch(d, y):
        return 2.0 * y - d

    def eval_fn(x):
        return np.where(x <= 0.5, values[0], values[1])

    def pullback(d, x):
        return np.full(np.shape(x), values[d]) if np.ndim(x) else values[d]

    def pullback_deriv(d, x):
        return np.zeros(np.shape(x)) if np.ndim(x) else 0.0

    roof = RoofFunction(eval_fn, pullback, pullback_deriv, inf_r=values[1], K=0.0)
    constants = SystemConstants(rho_hat=0.5, C=1.0, K=0.0, sigma0=-math.inf, rho=0.75)
    return _TableSystem(
        "doubling",
        branch_fn,
        forward_branch,
        roof,
        constants,
        first_digit=0,
        branch_count=2,
        tail=TailModel("finite"),
    )


BUILTIN_SYSTEMS = {
    "gauss": make_gauss_system,
    "doubling": make_doubling_counterexample,
}


def compose_branches(system: ExpandingSystem, word: Sequence[int]) -> InverseBranch:
    """``h_{d_1} o h_{d_2} o ... o h_{d_n}`` for ``word = (d_1, ..., d_n)``."""
    word = tuple(word)
    if not word:
        raise InvalidWordError("empty word")
    for d in word:
        if not system.valid_digit(d):
            raise InvalidWordError(f"digit {d!r} does not index a branch of {system.name}")
    return _compose_cached(system, word)


def _compose_cached(system, word):
    key = ("word",) + word
    cached = system._cache.get(key)
    if cached is None:
        if len(word) == 1:
            cached = system.branch(word[0])
        else:
            cached = compose_pair(system.branch(word[0]), _compose_cached(system, word[1:]))
        system._cache[key] = cached
    return cached


class BirkhoffRoof(NamedTuple):
    value: Callable
    deriv: Callable


def birkhoff_roof(system: ExpandingSystem, branch: InverseBranch) -> BirkhoffRoof:
    """Evaluators for ``x -> r^(n)(h(x))`` and its derivative.

    The n-fold Birkhoff sum along ``h = h_{d_1} o ... o h_{d_n}`` equals
    ``sum_k r(h_{d_k}(g_k(x)))`` with ``g_k`` the tail composition, so it is
    accumulated from the innermost digit outward.
    """
    word = tuple(branch.word)

    def _walk(x):
        y = np.asarray(x, dtype=float)
        dy = np.ones_like(y)
        total = np.zeros_like(y)
        dtotal = np.zeros_like(y)
        for d in reversed(word):
            total = total + system.roof.pullback(d, y)
            dtotal = dtotal + system.roof.pullback_deriv(d, y) * dy
            h = system.branch(d)
            dy = dy * h.deriv(y)
            y = h.func(y)
        return total, dtotal

    def value(x):
        return _walk(x)[0]

    def deriv(x):
        return _walk(x)[1]

    return BirkhoffRoof(value, deriv)


def enumerate_words(system: ExpandingSystem, depth: int, digit_cap: int | None = None):
    digits = system.digits(digit_cap if digit_cap is not None else system.branch_count)
    words = [()]
    for _ in range(depth):
        words = [w + (d,) for w in words for d in digits]
    return words


@dataclass
class ValidationReport:
    system: str
    rho_hat: float
    C_hat: float
    K_hat: float
    Kbar_hat: float
    roof_distortion: float
    inf_r_sampled: float
    sigma0: float
    partial_sums: list
    tail_bounds: list
    checks: dict
    sample_count: int
    depth: int
    words_checked: int

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "rho_hat": self.rho_hat,
            "C_hat": self.C_hat,
            "K_hat": self.K_hat,
            "Kbar_hat": self.Kbar_hat,
            "roof_distortion": self.roof_distortion,
            "inf_r_sampled": self.inf_r_sampled,
            "sigma0": self.sigma0,
            "partial_sums": list(self.partial_sums),
            "tail_bounds": list(self.tail_bounds),
            "checks": dict(self.checks),
            "ok": self.ok,
            "sample_count": self.sample_count,
            "depth": self.depth,
            "words_checked": self.words_checked,
        }


def validate_system(
    system: ExpandingSystem,
    sample_count: int = 101,
    depth: int = 4,
    digit_cap: int = 5,
    summability_cutoffs: Sequence[int] = (10, 100, 1000),
) -> ValidationReport:
    """Sampling-based check of the standing assumptions on branches and roof."""
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    x = np.linspace(0.0, 1.0, sample_count)
    c = system.constants
    tol = 1e-12
    checks = {
        "range": True,
        "inverse": True,
        "contraction": True,
        "distortion": True,
        "roof_distortion": True,
        "roof_positive": True,
        "summability": True,
    }
    K_hat = 0.0
    roof_dist = 0.0
    inf_r = math.inf
    for d in system.digits(digit_cap):
        h = system.branch(d)
        hx, d1, d2 = _sample(h, x)
        _check_monotone(h, d1)
        if np.any(hx < -tol) or np.any(hx > 1 + tol):
            checks["range"] = False
        back = system.forward_branch(d, hx)
        if np.any(np.abs(back - x) > 1e-10):
            checks["inverse"] = False
        K_hat = max(K_hat, float(np.max(np.abs(d2) / np.abs(d1))))
        rd = np.abs(system.roof.pullback_deriv(d, x))
        roof_dist = max(roof_dist, float(np.max(rd)))
        rvals = system.roof.pullback(d, x)
        inf_r = min(inf_r, float(np.min(rvals)))
    if roof_dist > system.roof.K * (1 + tol) + tol:
        checks["roof_distortion"] = False
    if inf_r < system.roof.inf_r - tol or inf_r < 0:
        checks["roof_positive"] = False

    level_sup = []
    Kbar_hat = 0.0
    words_checked = 0
    for n in range(1, depth + 1):
        best = 0.0
        for w in enumerate_words(system, n, digit_cap):
            h = compose_branches(system, w)
            hx, d1, d2 = _sample(h, x)
            _check_monotone(h, d1)
            words_checked += 1
            if np.any(hx < -tol) or np.any(hx > 1 + tol):
                checks["range"] = False
            sup = float(np.max(np.abs(d1)))
            best = max(best, sup)
            if sup > c.C * c.rho_hat**n * (1 + 1e-12) + tol:
                checks["contraction"] = False
            ratio = float(np.max(np.abs(d2) / np.abs(d1)))
            Kbar_hat = max(Kbar_hat, ratio)
            if ratio > c.Kbar * (1 + 1e-12) + tol:
                checks["distortion"] = False
        level_sup.append(best)
    rho_hat = float(np.exp(np.log(level_sup[-1]) / depth)) if level_sup[-1] > 0 else 0.0
    C_hat = max(s / rho_hat**n for n, s in enumerate(level_sup, start=1)) if rho_hat else 0.0

    partial, tails = [], []
    for M in summability_cutoffs:
        digits = system.digits(M)
        partial.append(float(sum(system.branch(d).sup_deriv() for d in digits)))
        tails.append(float(system.tail_bound(0.0, len(digits))))
    if any(b < a - tol for a, b in zip(partial, partial[1:])):
        checks["summability"] = False
    finite_tails = [t for t in tails if math.isfinite(t)]
    if len(finite_tails) != len(tails) or any(b > a for a, b in zip(tails, tails[1:])):
        checks["summability"] = False

    return ValidationReport(
        system=system.name,
        rho_hat=rho_hat,
        C_hat=float(C_hat),
        K_hat=K_hat,
        Kbar_hat=Kbar_hat,
        roof_distortion=roof_dist,
        inf_r_sampled=inf_r,
        sigma0=c.sigma0,
        partial_sums=partial,
        tail_bounds=tails,
        checks=checks,
        sample_count=sample_count,
        depth=depth,
        words_checked=words_checked,
    )


def _sample(h: InverseBranch, x):
    return (
        np.asarray(h.func(x), dtype=float),
        np.asarray(h.deriv(x), dtype=float) * np.ones_like(x),
        np.asarray(h.deriv2(x), dtype=float) * np.ones_like(x),
    )


def _check_monotone(h: InverseBranch, d1) -> None:
    if np.any(d1 == 0) or not (np.all(d1 > 0) or np.all(d1 < 0)):
        raise InvalidSystemError(f"branch {h.word} is not strictly monotone")


# ---------------------------------------------------------------------------
# configuration documents


def system_from_config(cfg) -> ExpandingSystem:
    """Build a system from a builtin name or a custom definition.

    Custom document (JSON object)::

        {"name": "tent3",
         "branches": {"affine": [[slope, intercept], ...]}      # or
         "branches": {"mobius": [[a, b, c, d], ...]},
         "roof": [{"upto": 0.5, "value": 1.0, "slope": 0.0}, ...],
         "constants": {"rho_hat": .., "C": .., "K": .., "rho": ..}}   # optional

    Roof pieces are affine in x, listed left to right and closed on the right
    (``upto`` of the last piece must be 1). Each branch image must lie inside a
    single piece. Digits of custom systems start at 1.
    """
    if isinstance(cfg, str):
        if cfg not in BUILTIN_SYSTEMS:
            raise InvalidSystemError(f"unknown builtin system {cfg!r}")
        return BUILTIN_SYSTEMS[cfg]()
    if isinstance(cfg, (Path,)):
        cfg = json.loads(Path(cfg).read_text())
    allowed = {"name", "branches", "roof", "constants"}
    unknown = set(cfg) - allowed
    if unknown:
        raise InvalidSystemError(f"unknown keys in system definition: {sorted(unknown)}")
    name = cfg.get("name", "custom")
    spec = cfg["branches"]
    if set(spec) == {"affine"}:
        rows = [tuple(map(float, r)) for r in spec["affine"]]
        branches = [
            InverseBranch.from_affine((i + 1,), s, b) for i, (s, b) in enumerate(rows)
        ]
    elif set(spec) == {"mobius"}:
        rows = [tuple(int(v) for v in r) for r in spec["mobius"]]
        branches = [InverseBranch.from_mobius((i + 1,), r) for i, r in enumerate(rows)]
    else:
        raise InvalidSystemError("branches must be given as {'affine': ...} or {'mobius': ...}")
    if not branches:
        raise InvalidSystemError("a system needs at least one branch")
    pieces = [
        (float(p["upto"]), float(p["value"]), float(p.get("slope", 0.0))) for p in cfg["roof"]
    ]
    if any(b[0] <= a[0] for a, b in zip(pieces, pieces[1:])) or abs(pieces[-1][0] - 1.0) > 1e-15:
        raise InvalidSystemError("roof pieces must have increasing 'upto' ending at 1")
    lefts = [0.0] + [p[0] for p in pieces[:-1]]

    def piece_index(x):
        return np.clip(np.searchsorted([p[0] for p in pieces], x, side="left"), 0, len(pieces) - 1)

    def piece_value(k, x):
        up, val, slope = pieces[k]
        return val + slope * (x - lefts[k])

    branch_piece = []
    for h in branches:
        lo, hi = (min(max(e, 0.0), 1.0) for e in h.image())
        k = int(piece_index((lo + hi) / 2))
        if lo < lefts[k] - 1e-14 or hi > pieces[k][0] + 1e-14:
            raise InvalidSystemError(f"branch {h.word} straddles a roof breakpoint")
        branch_piece.append(k)

    def eval_fn(x):
        x = np.asarray(x, dtype=float)
        k = piece_index(x)
        vals = np.array([p[1] for p in pieces])[k]
        slopes = np.array([p[2] for p in pieces])[k]
        return vals + slopes * (x - np.array(lefts)[k])

    def pullback(d, x):
        h = branches[d - 1]
        return piece_value(branch_piece[d - 1], np.clip(h.func(x), 0.0, 1.0))

    def pullback_deriv(d, x):
        h = branches[d - 1]
        return pieces[branch_piece[d - 1]][2] * np.asarray(h.deriv(x), dtype=float) * np.ones_like(x)

    def forward_branch(d, y):
        h = branches[d - 1]
        if h.affine is not None:
            s, b = h.affine
            return (y - b) / s
        a, b, c, dd = h.mobius
        # inverse of (a x + b)/(c x + d) is (d y - b)/(a - c y)
        return (dd * y - b) / (a - c * y)

    x = np.linspace(0.0, 1.0, 201)
    sups = [float(np.max(np.abs(h.deriv(x) * np.ones_like(x)))) for h in branches]
    dist = [float(np.max(np.abs(h.deriv2(x) * np.ones_like(x)) / np.abs(h.deriv(x) * np.ones_like(x)))) for h in branches]
    rvals = np.concatenate([np.atleast_1d(pullback(i + 1, x)) for i in range(len(branches))])
    roof_K = max(abs(p[2]) for p in pieces) * max(sups)
    consts = dict(cfg.get("constants", {}))
    unknown = set(consts) - {"rho_hat", "C", "K", "rho", "sigma0"}
    if unknown:
        raise InvalidSystemError(f"unknown constants: {sorted(unknown)}")
    rho_hat = float(consts.get("rho_hat", max(sups)))
    K = float(consts.get("K", max(max(dist), roof_K)))
    constants = SystemConstants(
        rho_hat=rho_hat,
        C=float(consts.get("C", 1.0)),
        K=K,
        sigma0=float(consts.get("sigma0", -math.inf)),
        rho=float(consts.get("rho", (1.0 + rho_hat) / 2.0)),
    )
    roof = RoofFunction(eval_fn, pullback, pullback_deriv, inf_r=float(np.min(rvals)), K=max(roof_K, K))
    return _TableSystem(
        name,
        lambda d: branches[d - 1],
        forward_branch,
        roof,
        constants,
        first_digit=1,
        branch_count=len(branches),
        tail=TailModel("finite"),
        descriptor=json.loads(json.dumps(cfg)),
    )


@lru_cache(maxsize=None)
def fibonacci(n: int) -> int:
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def pell(n: int) -> int:
    """``0, 1, P_n = 2 P_{n-1} + P_{n-2}``."""
    a, b = 0, 1
    for _ in range(n):
        a, b = b, 2 * b + a
    return a
