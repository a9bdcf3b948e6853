"""Chebyshev-Lobatto collocation on [0, 1].

Functions are stored as nodal values on ``N + 1`` Chebyshev-Lobatto points.
Off-node evaluation uses the second barycentric formula, derivatives use the
barycentric differentiation matrix and integrals use Clenshaw-Curtis weights.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

REFINE_FACTOR = 10


class GridMismatchError(ValueError):
    """Two objects live on different collocation grids."""


class Grid:
    """Chebyshev-Lobatto grid with its interpolation, derivative and quadrature data.

    Use :func:`build_grid` rather than instantiating directly; grids are cached
    and compared by identity.
    """

    def __init__(self, N: int):
        if int(N) != N or N < 2:
            raise ValueError(f"grid parameter N must be an integer >= 2, got {N!r}")
        N = int(N)
        self.N = N
        j = np.arange(N + 1)
        # symmetric form keeps x_j + x_{N-j} == 1 and the midpoint exact
        self.nodes = (1.0 - np.sin(np.pi * (N - 2 * j) / (2 * N))) / 2.0
        w = (-1.0) ** j
        w[0] *= 0.5
        w[-1] *= 0.5
        self.bary_weights = w
        self.diff_matrix = self._diff_matrix()
        self.quad_weights = _clenshaw_curtis(N)
        for arr in (self.nodes, self.bary_weights, self.diff_matrix, self.quad_weights):
            arr.setflags(write=False)

    def _diff_matrix(self) -> np.ndarray:
        N = self.N
        i = np.arange(N + 1)[:, None]
        j = np.arange(N + 1)[None, :]
        # x_i - x_j through a product of sines avoids cancellation near the ends
        dx = np.sin(np.pi * (i + j) / (2 * N)) * np.sin(np.pi * (i - j) / (2 * N))
        np.fill_diagonal(dx, 1.0)
        w = self.bary_weights
        D = (w[None, :] / w[:, None]) / dx
        np.fill_diagonal(D, 0.0)
        np.fill_diagonal(D, -D.sum(axis=1))
        return D

    @property
    def size(self) -> int:
        return self.N + 1

    def interp_matrix(self, y) -> np.ndarray:
        """Rows of barycentric interpolation weights for the points ``y``."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        diff = y[:, None] - self.nodes[None, :]
        exact = diff == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            q = self.bary_weights[None, :] / diff
            B = q / q.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        if hit.any():
            B[hit] = exact[hit].astype(float)
        return B

    def refined(self, factor: int = REFINE_FACTOR) -> "Grid":
        return build_grid(self.N * factor)

    def refine_matrix(self, factor: int = REFINE_FACTOR) -> np.ndarray:
        return _refine_matrix(self.N, factor)

    def __repr__(self) -> str:
        return f"Grid(N={self.N})"


def _clenshaw_curtis(N: int) -> np.ndarray:
    # Trefethen, Spectral Methods in MATLAB (clencurt), scaled from [-1, 1] to [0, 1]
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    inner = theta[1:-1]
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
        v -= np.cos(N * inner) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * inner) / (4 * k**2 - 1)
    w[1:-1] = 2.0 * v / N
    return w / 2.0


@lru_cache(maxsize=64)
def build_grid(N: int) -> Grid:
    """Return the (cached) Chebyshev-Lobatto grid with ``N + 1`` nodes on [0, 1]."""
    return Grid(N)


@lru_cache(maxsize=32)
def _refine_matrix(N: int, factor: int) -> np.ndarray:
    B = build_grid(N).interp_matrix(build_grid(N * factor).nodes)
    B.setflags(write=False)
    return B


def default_grid_size(t: float) -> int:
    """Node-count rule resolving the ``exp(i t r o h)`` oscillations."""
    return max(64, 4 + int(np.ceil(1.5 * abs(t))))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex function represented by its values at the grid nodes."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        vals = vals.astype(complex if np.iscomplexobj(vals) else float, copy=True)
        if vals.shape != (self.grid.size,):
            raise GridMismatchError(
                f"expected {self.grid.size} nodal values, got shape {vals.shape}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable) -> "GridFunction":
        return cls(grid, np.broadcast_to(func(grid.nodes), grid.nodes.shape))

    @classmethod
    def constant(cls, grid: Grid, c: complex) -> "GridFunction":
        return cls(grid, np.full(grid.size, c))

    def __call__(self, x):
        return evaluate(self, x)

    def _check(self, other: "GridFunction") -> None:
        if other.grid is not self.grid:
            raise GridMismatchError(f"{self.grid!r} vs {other.grid!r}")

    def _binary(self, other, op) -> "GridFunction":
        if isinstance(other, GridFunction):
            self._check(other)
            other = other.values
        return GridFunction(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def conj(self) -> "GridFunction":
        return GridFunction(self.grid, np.conj(self.values))

    @property
    def real(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.real)

    def derivative(self) -> "GridFunction":
        return derivative(self)

    def sup(self, refine: int = REFINE_FACTOR) -> float:
        return _refined_sup(self, refine)

    def to_csv(self, path) -> None:
        write_grid_function_csv(self, path)


@dataclass(frozen=True, eq=False)
class MeasureWeights:
    """Weights of a (signed, in general) measure acting on nodal values."""

    grid: Grid
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).copy()
        if w.shape != (self.grid.size,):
            raise GridMismatchError(f"expected {self.grid.size} weights, got {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.weights >= 0.0))

    def normalized(self) -> "MeasureWeights":
        return MeasureWeights(self.grid, self.weights / self.mass)

    def with_density(self, density: GridFunction) -> "MeasureWeights":
        if density.grid is not self.grid:
            raise GridMismatchError(f"{density.grid!r} vs {self.grid!r}")
        return MeasureWeights(self.grid, self.weights * np.real(density.values))


def lebesgue(grid: Grid) -> MeasureWeights:
    """Clenshaw-Curtis weights, i.e. Lebesgue measure on [0, 1]."""
    return MeasureWeights(grid, grid.quad_weights)


def evaluate(f: GridFunction, x):
    """Barycentric interpolation of ``f`` at ``x`` (scalar or array) in [0, 1]."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa < 0.0) | (xa > 1.0)) or np.any(np.isnan(xa)):
        raise ValueError("evaluation point outside [0, 1]")
    out = f.grid.interp_matrix(xa.ravel()) @ f.values
    return out.reshape(xa.shape) if xa.ndim else out[0]


def derivative(f: GridFunction) -> GridFunction:
    return GridFunction(f.grid, f.grid.diff_matrix @ f.values)


def integrate(f: GridFunction, m: MeasureWeights) -> complex:
    if f.grid is not m.grid:
        raise GridMismatchError(f"{f.grid!r} vs {m.grid!r}")
    val = m.weights @ f.values
    return complex(val) if np.iscomplexobj(val) else float(val)


def _refined_sup(f: GridFunction, refine: int) -> float:
    if refine <= 1:
        return float(np.max(np.abs(f.values)))
    fine = f.grid.refine_matrix(refine) @ f.values
    return float(max(np.max(np.abs(fine)), np.max(np.abs(f.values))))


def c1t_norm(f: GridFunction, t: float, refine: int = REFINE_FACTOR) -> float:
    """``sup|f| + sup|f'| / |t|`` with sups taken on a refined interpolation grid."""
    if t == 0:
        raise ValueError("the C^1 norm scaling requires t != 0")
    return _refined_sup(f, refine) + _refined_sup(derivative(f), refine) / abs(t)


class ConeCheck(NamedTuple):
    ok: bool
    margin: float


def cone_check(
    u: GridFunction, v: GridFunction, C: float, t: float, refine: int = REFINE_FACTOR
) -> ConeCheck:
    """Check ``u > 0``, ``|v| <= u`` and ``max(|u'|, |v'|) <= 2 C |t| u``.

    The margin is the smallest slack over all three checks on the refined
    sample set; negative means violated.
    """
    u._check(v)
    if refine > 1:
        B = u.grid.refine_matrix(refine)
        uu, vv = B @ u.values, B @ v.values
        du, dv = B @ derivative(u).values, B @ derivative(v).values
    else:
        uu, vv = u.values, v.values
        du, dv = derivative(u).values, derivative(v).values
    uu = np.real(uu)
    bound = 2.0 * C * abs(t) * uu
    margin = min(
        float(np.min(uu)),
        float(np.min(uu - np.abs(vv))),
        float(np.min(bound - np.maximum(np.abs(du), np.abs(dv)))),
    )
    positive = bool(np.all(uu > 0.0))
    return ConeCheck(positive and margin >= 0.0, margin)


def write_grid_function_csv(f: GridFunction, path) -> None:
    """Columns: ``node``, ``re``, ``im`` (one row per node, increasing x)."""
    vals = np.asarray(f.values, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "re", "im"])
        for x, v in zip(f.grid.nodes, vals):
            w.writerow([repr(float(x)), repr(float(v.real)), repr(float(v.imag))])


def read_grid_function_csv(path) -> GridFunction:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    grid = build_grid(len(rows) - 1)
    vals = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    return GridFunction(grid, vals)
