"""Cone iteration with damping and the weighted L2 contraction of twisted iterates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..branch_maps import ExpandingSystem
from ..function_space import (
    REFINE_FACTOR,
    Grid,
    GridFunction,
    GridMismatchError,
    build_grid,
    default_grid_size,
    integrate,
)
from ..spectral import SpectralData, leading_eigendata
from ._io import ReportMixin, file_stem
from .cancellation import (
    DEFAULT_ETA,
    MARGIN_TOL,
    ConePair,
    cancellation_probe,
    chi_build,
    domination,
)
from .context import TwistedContext, check_window
from .uni import UniCertificate, uni_certificate


@dataclass(frozen=True, eq=False)
class ConeIteration:
    """Pairs ``(u_m, v_m)`` for ``m = 0..m_max`` and the per-step diagnostics."""

    pairs: tuple
    cone_margins: tuple
    domination_margins: tuple
    coverages: tuple
    failures: tuple
    cert: UniCertificate = field(repr=False)

    @property
    def ok(self) -> bool:
        return not self.failures

    def l2_sequence(self, nu) -> list[float]:
        return [float(integrate(GridFunction(p.u.grid, np.real(p.u.values) ** 2), nu)) for p in self.pairs]


def _initial_pair(f: GridFunction, C: float, t: float) -> ConePair:
    sup = f.sup(REFINE_FACTOR)
    if sup == 0:
        raise ValueError("f must not vanish identically")
    u0 = GridFunction.constant(f.grid, 1.0)
    return ConePair.make(u0, f / sup, C, t, strict=False)


def cone_iterate(
    system: ExpandingSystem,
    spec: SpectralData,
    f: GridFunction,
    n: int,
    s: complex,
    m_max: int,
    eta: float = DEFAULT_ETA,
    C: float | None = None,
    cert: UniCertificate | None = None,
    context: TwistedContext | None = None,
    fine_resolution: int = 4097,
    delta: float | None = None,
    Delta: float | None = None,
) -> ConeIteration:
    """``u_m = ~L_sigma^n(chi_{m-1} u_{m-1})``, ``v_m = ~L_s^n v_{m-1}`` from ``u_0 = 1, v_0 = f/sup|f|``.

    A fresh probe and ``chi`` are built at every step. Violations of the cone
    condition, of ``|v_m| <= u_m <= 1`` or of the domination are recorded as
    ``(step, reason)`` rather than raised.
    """
    s = complex(s)
    t = s.imag
    if C is None:
        C = max(1.0, system.constants.Kbar)
    if cert is None:
        cert = uni_certificate(system, n)
    if cert.n != n:
        raise ValueError(f"certificate is for n={cert.n}, iteration uses n={n}")
    check_window(t, cert.D)
    if context is None:
        context = TwistedContext(system, s, f.grid, spec)
    pair = _initial_pair(f, C, t)
    pairs = [pair]
    cone_m = [pair.margin]
    dom_m, cov, fails = [], [], []
    if pair.margin < -MARGIN_TOL:
        fails.append((0, "initial pair outside the cone"))
    for m in range(1, m_max + 1):
        rep = cancellation_probe(system, spec, pair, cert, s, eta, delta, Delta, fine_resolution=fine_resolution)
        chi = chi_build(rep)
        dom = domination(rep, chi, context)
        dom_m.append(dom.min_margin)
        cov.append(rep.coverage)
        if not dom.ok:
            fails.append((m, "domination"))
        pair = ConePair.make(dom.new_u, dom.new_v, C, t, strict=False)
        pairs.append(pair)
        cone_m.append(pair.margin)
        u = np.real(pair.u.values)
        if pair.margin < -MARGIN_TOL:
            fails.append((m, "cone"))
        if np.max(u) > 1.0 + 1e-9 or np.any(np.abs(pair.v.values) > u + MARGIN_TOL):
            fails.append((m, "bounds"))
    return ConeIteration(tuple(pairs), tuple(cone_m), tuple(dom_m), tuple(cov), tuple(fails), cert)


@dataclass(frozen=True, eq=False)
class ContractionReport(ReportMixin):
    """Weighted L2 norms of ``~L_s^{mn} f / sup|f|`` for ``m = 0..m_max``.

    ``integrals`` is the direct sequence; ``cone_integrals`` (when requested)
    is the sequence of ``int u_m^2 d nu_0`` from the damped cone iteration.
    """

    system: str
    sigma: float
    t: float
    n: int
    N: int
    integrals: tuple
    ratios: tuple
    beta: float
    sup_norms: tuple
    cone_integrals: tuple = ()
    cone_margins: tuple = ()
    cone_failures: tuple = ()

    kind = "l2"
    csv_header = ("m", "integral", "ratio", "sup_norm", "cone_integral", "cone_margin")

    @property
    def contracting(self) -> bool:
        return self.beta < 1.0

    @property
    def cone_monotone(self) -> bool:
        c = self.cone_integrals
        return all(c[i + 1] <= c[i] + 1e-12 for i in range(len(c) - 1))

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "sigma": self.sigma,
            "t": self.t,
            "n": self.n,
            "N": self.N,
            "integrals": list(self.integrals),
            "ratios": list(self.ratios),
            "beta": self.beta,
            "contracting": self.contracting,
            "sup_norms": list(self.sup_norms),
            "cone_integrals": list(self.cone_integrals),
            "cone_margins": list(self.cone_margins),
            "cone_failures": [list(f) for f in self.cone_failures],
        }

    def csv_rows(self) -> list:
        rows = []
        for m, val in enumerate(self.integrals):
            ratio = self.ratios[m - 1] if m >= 1 else math.nan
            ci = self.cone_integrals[m] if m < len(self.cone_integrals) else math.nan
            cm = self.cone_margins[m] if m < len(self.cone_margins) else math.nan
            rows.append([m, val, ratio, self.sup_norms[m], ci, cm])
        return rows

    def stem(self) -> str:
        return file_stem("l2", self.system, self.sigma, self.t, self.n)


def l2_contraction(
    system: ExpandingSystem,
    sigma: float,
    t: float,
    n: int,
    m_max: int,
    f: GridFunction | Callable,
    grid: Grid | None = None,
    spec: SpectralData | None = None,
    spec0: SpectralData | None = None,
    cone: bool = False,
    eta: float = DEFAULT_ETA,
    C: float | None = None,
    cert: UniCertificate | None = None,
    delta: float | None = None,
    Delta: float | None = None,
) -> ContractionReport:
    """``int |~L_{sigma+it}^{mn} f|^2 d nu_0 / sup|f|^2`` for ``m = 0..m_max``.

    ``beta`` is the largest ratio of consecutive terms (``nan`` if the
    sequence hits zero). ``f`` is a GridFunction or a callable sampled at the
    grid nodes.
    """
    if grid is None:
        grid = f.grid if isinstance(f, GridFunction) else build_grid(default_grid_size(t))
    if not isinstance(f, GridFunction):
        f = GridFunction.from_callable(grid, f)
    elif f.grid is not grid:
        raise GridMismatchError(f"f lives on {f.grid!r}, computation on {grid!r}")
    sigma = float(sigma)
    if cert is None:
        cert = uni_certificate(system, n)
    check_window(t, cert.D)
    if spec is None:
        spec = leading_eigendata(system, sigma, grid)
    if spec0 is None:
        spec0 = spec if sigma == 0.0 else leading_eigendata(system, 0.0, grid)
    if spec.grid is not grid or spec0.grid is not grid:
        raise GridMismatchError("spectral data lives on a different grid")
    nu0 = spec0.nu
    s = complex(sigma, t)
    ctx = TwistedContext(system, s, grid, spec)
    sup = f.sup(REFINE_FACTOR)
    vals = f.values / sup if sup > 0 else np.zeros(grid.size, dtype=complex)
    P = ctx.power("s", n)
    integrals, sups = [], []
    v = vals
    for m in range(m_max + 1):
        g = GridFunction(grid, v)
        integrals.append(float(integrate(abs(g) * abs(g), nu0)))
        sups.append(g.sup(REFINE_FACTOR))
        v = P @ v
    ratios = []
    for a, b in zip(integrals[:-1], integrals[1:]):
        ratios.append(b / a if a > 0 else math.nan)
    finite = [r for r in ratios if not math.isnan(r)]
    beta = max(finite) if finite else math.nan
    cone_ints, cone_marg, cone_fail = (), (), ()
    if cone and sup > 0:
        it = cone_iterate(system, spec, f, n, s, m_max, eta, C, cert, ctx, delta=delta, Delta=Delta)
        cone_ints = tuple(it.l2_sequence(nu0))
        cone_marg = it.cone_margins
        cone_fail = it.failures
    return ContractionReport(
        system=system.name,
        sigma=sigma,
        t=float(t),
        n=n,
        N=grid.N,
        integrals=tuple(integrals),
        ratios=tuple(ratios),
        beta=beta,
        sup_norms=tuple(sups),
        cone_integrals=cone_ints,
        cone_margins=tuple(cone_marg),
        cone_failures=tuple(cone_fail),
    )
