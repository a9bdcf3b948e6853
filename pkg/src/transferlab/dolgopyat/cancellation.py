"""Phase cancellation between two inverse branches and the damping function chi.

For a cone pair ``(u, v)`` and the UNI branches ``h, k`` the two-term sum

    F(x) = e^{-s R_h(x)} |h'(x)| (v f)(h x) + e^{-s R_k(x)} |k'(x)| (v f)(k x)

is compared with the damped majorants ``eta U_h + U_k`` and ``U_h + eta U_k``
(the same terms with ``u`` and ``sigma`` in place of ``v`` and ``s``). The
probe looks for windows where one majorant dominates ``|F|``; the sweep turns
them into disjoint intervals on which ``chi`` dips to ``eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..branch_maps import ExpandingSystem, InverseBranch, birkhoff_roof, compose_branches
from ..function_space import REFINE_FACTOR, GridFunction, cone_check
from ..spectral import SpectralData
from ._io import ReportMixin, file_stem
from .calculus import ETA_MIN
from .context import TwistedContext, check_window
from .uni import UniCertificate

DEFAULT_ETA = 0.9
FINE_RESOLUTION = 8193
MARGIN_TOL = 1e-12
# phase is frozen where the twisted terms vanish
_ZERO = 1e-12


class ChiConstructionError(ValueError):
    """The ramps of chi cannot meet the slope bound."""


@dataclass(frozen=True, eq=False)
class ConePair:
    """Functions ``u > 0`` and ``v`` with ``|v| <= u`` and log-derivatives at most ``2 C |t|``."""

    u: GridFunction
    v: GridFunction
    C: float
    t: float
    margin: float

    @property
    def ok(self) -> bool:
        return self.margin >= -MARGIN_TOL and bool(np.all(np.real(self.u.values) > 0))

    @classmethod
    def make(cls, u: GridFunction, v: GridFunction, C: float, t: float, strict: bool = True, refine: int = REFINE_FACTOR):
        if C <= 0 or t == 0:
            raise ValueError("cone pairs need C > 0 and t != 0")
        chk = cone_check(u, v, C, t, refine)
        # |v| = u up to rounding is still on the cone boundary
        positive = bool(np.all(np.real(u.values) > 0))
        if strict and (chk.margin < -MARGIN_TOL or not positive):
            raise ValueError(f"pair violates the cone condition (margin {chk.margin:.3e})")
        return cls(u, v, float(C), float(t), chk.margin)


class ProbeRecord(NamedTuple):
    x0: float
    case: str  # "easy", "hard" or "fail"
    x1: float
    distance: float
    kind: str  # "h", "k" or ""
    margin: float

    @property
    def located(self) -> bool:
        return self.case != "fail" and self.margin >= -MARGIN_TOL


class Interval(NamedTuple):
    a: float
    b: float
    kind: str
    margin: float


@dataclass(frozen=True, eq=False)
class CancellationReport(ReportMixin):
    system: str
    sigma: float
    t: float
    n: int
    eta: float
    delta: float
    Delta: float
    D: float
    h_word: tuple
    k_word: tuple
    records: tuple
    intervals: tuple
    complete: bool
    fine_resolution: int
    _state: dict = field(default_factory=dict, repr=False)

    kind = "cancellation"
    csv_header = ("x0", "case", "x1", "distance", "type", "margin", "located")

    @property
    def coverage(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.located for r in self.records) / len(self.records)

    @property
    def min_margin(self) -> float:
        vals = [r.margin for r in self.records if r.case != "fail"]
        vals += [iv.margin for iv in self.intervals]
        return min(vals) if vals else math.inf

    @property
    def gaps(self) -> list[float]:
        """Lengths of the leading gap, the gaps between intervals and the trailing gap."""
        ends = [0.0] + [v for iv in self.intervals for v in (iv.a, iv.b)] + [1.0]
        return [ends[2 * i + 1] - ends[2 * i] for i in range(len(ends) // 2)]

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "sigma": self.sigma,
            "t": self.t,
            "n": self.n,
            "eta": self.eta,
            "delta": self.delta,
            "Delta": self.Delta,
            "D": self.D,
            "h_word": list(self.h_word),
            "k_word": list(self.k_word),
            "coverage": self.coverage,
            "min_margin": self.min_margin,
            "complete": self.complete,
            "intervals": [list(iv) for iv in self.intervals],
            "fine_resolution": self.fine_resolution,
            "base_points": len(self.records),
        }

    def csv_rows(self) -> list:
        return [list(r) + [r.located] for r in self.records]

    def stem(self) -> str:
        return file_stem("cancellation", self.system, self.sigma, self.t, self.n)


def _check_eta(eta: float) -> None:
    if not (ETA_MIN <= eta < 1.0):
        raise ValueError(f"eta must lie in [(sqrt(7)-1)/2, 1), got {eta}")


class _PairTerms:
    """Branch terms of ``F`` and of its majorants on a sorted point set."""

    def __init__(self, system, spec: SpectralData, h, k, s: complex, u, v, pts, eta):
        self.pts = pts
        sigma = s.real
        out = {}
        for name, b in (("h", h), ("k", k)):
            y = np.clip(b.func(pts), 0.0, 1.0)
            R = birkhoff_roof(system, b).value(pts)
            J = np.abs(b.deriv(pts))
            fb = np.real(spec.eigenfunction(y))
            ub = np.real(u(y))
            vb = v(y)
            out[name] = (
                np.exp(-s * R) * J * vb * fb,
                np.exp(-sigma * R) * J * ub * fb,
                np.abs(vb),
                ub,
            )
        Th, Uh, avh, uh = out["h"]
        Tk, Uk, avk, uk = out["k"]
        self.U = {"h": Uh, "k": Uk}
        F = np.abs(Th + Tk)
        scale = Uh + Uk
        self.margin = {
            "h": (eta * Uh + Uk - F) / scale,
            "k": (Uh + eta * Uk - F) / scale,
        }
        self.easy = avh <= np.maximum(uh, uk) / 2.0
        ang = np.angle(Th * np.conj(Tk))
        frozen = (avh < _ZERO) | (avk < _ZERO)
        if frozen.any():
            idx = np.where(~frozen, np.arange(len(ang)), 0)
            np.maximum.accumulate(idx, out=idx)
            ang = ang[idx]
        self.theta = np.unwrap(ang)
        self._bad = {
            key: np.concatenate([[0], np.cumsum(m < -MARGIN_TOL)]) for key, m in self.margin.items()
        }

    def crossings(self) -> np.ndarray:
        """Points where the unwrapped phase passes through pi modulo 2 pi."""
        c = (self.theta - math.pi) / (2.0 * math.pi)
        fl = np.floor(c)
        i = np.nonzero(fl[1:] != fl[:-1])[0]
        if len(i) == 0:
            return np.empty(0)
        target = np.maximum(fl[i], fl[i + 1])
        frac = (target - c[i]) / (c[i + 1] - c[i])
        return self.pts[i] + frac * (self.pts[i + 1] - self.pts[i])

    def _slice(self, lo, hi):
        return np.searchsorted(self.pts, lo, "left"), np.searchsorted(self.pts, hi, "right")

    def window_ok(self, lo, hi, kind) -> bool:
        i, j = self._slice(lo, hi)
        return j > i and self._bad[kind][j] - self._bad[kind][i] == 0

    def window_margin(self, lo, hi) -> tuple[str, float]:
        i, j = self._slice(lo, hi)
        if j <= i:
            return "", -math.inf
        mh = float(self.margin["h"][i:j].min())
        mk = float(self.margin["k"][i:j].min())
        return ("h", mh) if mh >= mk else ("k", mk)


def _point_set(grid, fine: int) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, fine), grid.nodes]))


def cancellation_probe(
    system: ExpandingSystem,
    spec: SpectralData,
    pair: ConePair,
    cert: UniCertificate,
    s: complex,
    eta: float = DEFAULT_ETA,
    delta: float | None = None,
    Delta: float | None = None,
    base_points: int = 64,
    fine_resolution: int = FINE_RESOLUTION,
) -> CancellationReport:
    """Locate cancellation windows near every base point and sweep out disjoint intervals.

    A base point is *located* when a window centre ``x1`` within ``Delta/|t|``
    is found on whose ``delta/|t|``-window one of the two damped majorants
    dominates ``|F|`` at every fine point and grid node.
    """
    _check_eta(eta)
    s = complex(s)
    t = s.imag
    check_window(t, cert.D)
    Delta = 2.0 * math.pi / cert.D if Delta is None else float(Delta)
    delta = Delta / 10.0 if delta is None else float(delta)
    if not 0.0 < delta <= Delta:
        raise ValueError("need 0 < delta <= Delta")
    at = abs(t)
    w, reach = delta / at, Delta / at
    h = compose_branches(system, cert.h_word)
    k = compose_branches(system, cert.k_word)
    pts = _point_set(spec.grid, fine_resolution)
    terms = _PairTerms(system, spec, h, k, s, pair.u, pair.v, pts, eta)
    cross = terms.crossings()

    records = []
    for x0 in np.linspace(0.0, 1.0, base_points):
        cands = []
        yh, yk = h.func(x0), k.func(x0)
        if abs(pair.v(yh)) <= max(np.real(pair.u(yh)), np.real(pair.u(yk))) / 2.0:
            cands.append(("easy", float(x0)))
        near = cross[np.abs(cross - x0) <= reach]
        for x1 in near[np.argsort(np.abs(near - x0), kind="stable")]:
            cands.append(("hard", float(x1)))
        rec = ProbeRecord(float(x0), "fail", math.nan, math.nan, "", -math.inf)
        for case, x1 in cands:
            kind, m = terms.window_margin(max(0.0, x1 - w), min(1.0, x1 + w))
            if m >= -MARGIN_TOL:
                rec = ProbeRecord(float(x0), case, x1, abs(x1 - x0), kind, m)
                break
            if rec.case == "fail" or m > rec.margin:
                rec = ProbeRecord(float(x0), "fail", x1, abs(x1 - x0), kind, m)
        records.append(rec)

    # disjoint intervals with gaps at most 2 Delta/|t|
    centres = np.unique(np.concatenate([cross, pts[terms.easy]]))
    intervals = []
    pos, first = 0.0, True
    complete = False
    while True:
        lower = w if first else pos + w
        upper = min(1.0 - w, (reach + w) if first else pos + 2.0 * reach + w)
        pick = None
        lo_i = np.searchsorted(centres, lower, "right" if not first else "left")
        for x1 in centres[lo_i:]:
            if x1 > upper:
                break
            oks = [kd for kd in ("h", "k") if terms.window_ok(x1 - w, x1 + w, kd)]
            if oks:
                kind, m = terms.window_margin(x1 - w, x1 + w)
                pick = (float(x1), kind, m)
                break
        if pick is None:
            break
        x1, kind, m = pick
        intervals.append(Interval(x1 - w, x1 + w, kind, m))
        pos, first = x1 + w, False
        if pos >= 1.0 - reach:
            complete = True
            break

    return CancellationReport(
        system=system.name,
        sigma=s.real,
        t=t,
        n=cert.n,
        eta=eta,
        delta=delta,
        Delta=Delta,
        D=cert.D,
        h_word=tuple(cert.h_word),
        k_word=tuple(cert.k_word),
        records=tuple(records),
        intervals=tuple(intervals),
        complete=complete,
        fine_resolution=fine_resolution,
        _state={"system": system, "spec": spec, "pair": pair, "h": h, "k": k, "s": s, "pts": pts, "terms": terms},
    )


def _smootherstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (z * (6.0 * z - 15.0) + 10.0)


def _smootherstep_deriv(z):
    z = np.clip(z, 0.0, 1.0)
    return 30.0 * z**2 * (z - 1.0) ** 2


def _invert_word(system: ExpandingSystem, word, y):
    x = np.asarray(y, dtype=float)
    for d in word:
        x = system.forward_branch(d, x)
    return np.clip(x, 0.0, 1.0)


class ChiFunction:
    """``chi`` on [0, 1], equal to ``phi(T^n y)`` on the images of the typed intervals.

    ``phi`` is 1 off the intervals, ``eta`` on their middle thirds and a
    quintic smootherstep ramp on the outer thirds. It is kept as a callable
    (rather than nodal values) because its dips live on tiny cylinders.
    """

    def __init__(self, system, h: InverseBranch, k: InverseBranch, intervals, eta: float, slope_bound: float):
        self.system = system
        self.branches = {"h": h, "k": k}
        self.intervals = tuple(intervals)
        self.eta = float(eta)
        self.slope_bound = float(slope_bound)

    def phi(self, kind: str, x) -> np.ndarray:
        """``chi`` pulled back by the branch of type ``kind``."""
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for iv in self.intervals:
            if iv.kind != kind:
                continue
            L = (iv.b - iv.a) / 3.0
            ramp = np.where(x < iv.a + L, _smootherstep((x - iv.a) / L), _smootherstep((iv.b - x) / L))
            ramp = np.where((x >= iv.a) & (x <= iv.b), ramp, 0.0)
            out = np.minimum(out, 1.0 - (1.0 - self.eta) * ramp)
        return out

    def dphi(self, kind: str, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for iv in self.intervals:
            if iv.kind != kind:
                continue
            L = (iv.b - iv.a) / 3.0
            left = (x >= iv.a) & (x < iv.a + L)
            right = (x > iv.b - L) & (x <= iv.b)
            out = out - np.where(left, (1.0 - self.eta) * _smootherstep_deriv((x - iv.a) / L) / L, 0.0)
            out = out + np.where(right, (1.0 - self.eta) * _smootherstep_deriv((iv.b - x) / L) / L, 0.0)
        return out

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.ones_like(y)
        for kind, b in self.branches.items():
            lo, hi = b.image()
            sel = (y >= lo) & (y <= hi)
            if sel.any():
                x = _invert_word(self.system, b.word, y[sel])
                out[sel] = np.minimum(out[sel], self.phi(kind, x))
        return out

    def on_grid(self, grid) -> GridFunction:
        return GridFunction(grid, self(grid.nodes))

    def max_slope(self, samples: int = 20001) -> float:
        """``sup |chi'|`` via ``chi'(b x) = phi'(x) / b'(x)``."""
        x = np.linspace(0.0, 1.0, samples)
        best = 0.0
        for kind, b in self.branches.items():
            best = max(best, float(np.max(np.abs(self.dphi(kind, x) / b.deriv(x)))))
        return best


@dataclass(frozen=True, eq=False)
class Domination:
    margins: np.ndarray = field(repr=False)
    min_margin: float
    new_u: GridFunction = field(repr=False)
    new_v: GridFunction = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.min_margin >= -MARGIN_TOL


def rho_nC(h: InverseBranch, k: InverseBranch, samples: int = 4097) -> float:
    x = np.linspace(0.0, 1.0, samples)
    return float(min(np.min(np.abs(h.deriv(x))), np.min(np.abs(k.deriv(x)))))


def chi_build(
    report: CancellationReport,
    grid=None,
    eta: float | None = None,
    rho_n_C: float | None = None,
    delta: float | None = None,
    t: float | None = None,
) -> ChiFunction:
    """Build ``chi`` from the report's intervals and check its slope bound.

    The bound is ``|chi'| <= 3 (1 - eta) |t| / (rho_nC delta)``. Call
    :func:`domination` afterwards for the pointwise comparison of the
    twisted and damped iterates.
    """
    st = report._state
    eta = report.eta if eta is None else float(eta)
    _check_eta(eta)
    delta = report.delta if delta is None else float(delta)
    t = report.t if t is None else float(t)
    h, k = st["h"], st["k"]
    rho = rho_nC(h, k) if rho_n_C is None else float(rho_n_C)
    bound = 3.0 * (1.0 - eta) * abs(t) / (rho * delta)
    chi = ChiFunction(st["system"], h, k, report.intervals, eta, bound)
    for iv in report.intervals:
        L = (iv.b - iv.a) / 3.0
        # steepest ramp: 15/8 (1 - eta) / L on the parameter side, divided by min|b'|
        if 1.875 * (1.0 - eta) / (L * rho) > bound * (1.0 + 1e-12):
            raise ChiConstructionError(
                f"interval of length {iv.b - iv.a:.3e} is too short for the slope bound at delta={delta}"
            )
    return chi


def domination(
    report: CancellationReport, chi: ChiFunction, context: TwistedContext, fine: bool = True
) -> Domination:
    """Check ``|~L_s^n v| <= ~L_sigma^n(chi u)`` at the nodes (and fine points).

    ``~L_sigma^n(chi u)`` equals ``~L_sigma^n u`` minus the damping of the two
    UNI terms, ``(1 - phi_b) U_b / (lambda^n f)``, since ``chi = 1`` on every
    other n-cylinder.
    """
    st = report._state
    pair: ConePair = st["pair"]
    spec = st["spec"]
    n = report.n
    grid = pair.u.grid
    Vs = GridFunction(grid, context.power("s", n) @ pair.v.values)
    Us = GridFunction(grid, context.power("sigma", n) @ np.real(pair.u.values))
    lam_n = spec.lam**n

    def damping(x):
        total = np.zeros_like(x)
        fx = np.real(spec.eigenfunction(x))
        for kind, b in chi.branches.items():
            y = np.clip(b.func(x), 0.0, 1.0)
            R = birkhoff_roof(st["system"], b).value(x)
            U = np.exp(-report.sigma * R) * np.abs(b.deriv(x)) * np.real(pair.u(y)) * np.real(spec.eigenfunction(y))
            total = total + (1.0 - chi.phi(kind, x)) * U / (lam_n * fx)
        return total

    nodes = grid.nodes
    u_nodes = np.real(Us.values) - damping(nodes)
    margins = [u_nodes - np.abs(Vs.values)]
    if fine:
        pts = st["pts"]
        margins.append(np.real(Us(pts)) - damping(pts) - np.abs(Vs(pts)))
    m = np.concatenate(margins)
    return Domination(m, float(m.min()), GridFunction(grid, u_nodes), Vs)
