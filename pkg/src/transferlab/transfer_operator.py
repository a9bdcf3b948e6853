"""Twisted transfer operators as collocation matrices.

Row ``j`` of the assembled matrix maps nodal values ``f`` to

    (L_s f)(x_j) = sum_m exp(-s r(h_m(x_j))) |h_m'(x_j)| f(h_m(x_j)),

where ``f`` between nodes is the barycentric interpolant. Countable systems
keep branches ``m <= M`` explicitly. For the Gauss family the remaining
branches are folded in through a local polynomial fit of ``f`` on
``[0, 1/(M+1)]`` and exact Hurwitz-zeta sums of the branch weights, which is
still linear in ``f``.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache

import mpmath
import numpy as np
from scipy import special

from .branch_maps import DivergentSumError, ExpandingSystem
from .function_space import Grid, GridFunction, GridMismatchError

DEFAULT_TOLERANCE = 1e-8
DEFAULT_ORDER = 8
# phase change of exp(-i t r o h) across one grid cell above which aliasing is likely
OSCILLATION_LIMIT = 2.0
_CHUNK = 256


class TruncationError(ValueError):
    """The branch tail exceeds the requested tolerance."""

    def __init__(self, message: str, required_M: int | None = None):
        super().__init__(message)
        self.required_M = required_M


class OscillationWarning(UserWarning):
    """The twist oscillates too fast for the collocation grid."""


class InvalidSpectralDataError(ValueError):
    """Normalisation data is unusable (e.g. a nonpositive eigenfunction)."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Branch cutoff ``M`` with its certified tail bound.

    ``tail_bound`` bounds the discarded branch sum under a hard cutoff.
    With ``order > 0`` the discarded branches are corrected analytically and
    ``residual_bound`` models what the correction leaves behind.
    """

    M: int
    tolerance: float
    tail_bound: float
    order: int = 0
    residual_bound: float = math.nan

    @property
    def corrected(self) -> bool:
        return self.order > 0

    @property
    def effective_bound(self) -> float:
        return self.residual_bound if self.corrected else self.tail_bound

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "tolerance": self.tolerance,
            "tail_bound": self.tail_bound,
            "order": self.order,
            "residual_bound": self.residual_bound,
        }


def tail_bound(system: ExpandingSystem, sigma: float, M: int) -> float:
    """Certified bound on ``sum_{m > M} sup exp(-sigma r o h_m) |h_m'|``."""
    if sigma <= system.constants.sigma0:
        raise DivergentSumError(f"sigma={sigma} is not above sigma0={system.constants.sigma0}")
    return system.tail_bound(sigma, M)


def _residual_model(tail: float, N: int, M: int, order: int) -> float:
    # local fit of a grid function of bandwidth ~N on an interval of width 1/(M+1)
    return tail * (N / (M + 1.0)) ** (order + 1) / math.factorial(order + 1)


def truncation_policy(
    system: ExpandingSystem,
    sigma: float,
    grid: Grid,
    tolerance: float = DEFAULT_TOLERANCE,
    order: int | None = None,
    M: int | None = None,
) -> TruncationPolicy:
    """Pick a cutoff meeting ``tolerance``; explicit ``M``/``order`` are honoured."""
    if system.is_finite:
        M = system.branch_count if M is None else M
        return TruncationPolicy(M, tolerance, tail_bound(system, sigma, M), 0, 0.0)
    if system.tail.kind != "gauss":
        if M is None:
            raise TruncationError("an explicit cutoff is required for this system")
        return TruncationPolicy(M, tolerance, tail_bound(system, sigma, M), 0, math.nan)
    order = DEFAULT_ORDER if order is None else int(order)
    if order == 0:
        if M is None:
            p = 2.0 * (1.0 + sigma)
            M = math.ceil(((p - 1.0) * tolerance) ** (-1.0 / (p - 1.0)))
        tb = tail_bound(system, sigma, M)
        return TruncationPolicy(M, tolerance, tb, 0, tb)
    if M is None:
        M = max(4 * grid.N, 256)
        while _residual_model(tail_bound(system, sigma, M), grid.N, M, order) > tolerance:
            M *= 2
            if M > 10**6:
                raise TruncationError("no cutoff below 1e6 meets the tolerance", M)
    tb = tail_bound(system, sigma, M)
    return TruncationPolicy(M, tolerance, tb, order, _residual_model(tb, grid.N, M, order))


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Collocation matrix of ``L_s`` (or of its normalisation) on a grid.

    ``weight_block`` and ``chain_block`` are present when derivative data was
    assembled: ``(L f)' = weight_block @ f + chain_block @ f'``.
    """

    matrix: np.ndarray = field(repr=False)
    s: complex
    grid: Grid
    trunc: TruncationPolicy
    system_name: str
    normalized: bool = False
    weight_block: np.ndarray | None = field(default=None, repr=False)
    chain_block: np.ndarray | None = field(default=None, repr=False)
    eigen_scale: tuple | None = field(default=None, repr=False)

    @property
    def sigma(self) -> float:
        return float(np.real(self.s))

    @property
    def t(self) -> float:
        return float(np.imag(self.s))

    @property
    def has_derivative_blocks(self) -> bool:
        return self.weight_block is not None


def _fit_matrix(grid: Grid, M: int, order: int) -> np.ndarray:
    """Map nodal values to coefficients ``a_k`` of ``f(y) ~ sum a_k ((M+1) y)^k``."""
    k = np.arange(order + 1)
    u = (1.0 - np.cos(np.pi * (k + 0.5) / (order + 1))) / 2.0
    V = u[:, None] ** k[None, :]
    return np.linalg.solve(V, grid.interp_matrix(u / (M + 1.0)))


@lru_cache(maxsize=256)
def _hurwitz_table(s: complex, M: int, nodes: tuple, count: int) -> np.ndarray:
    """``Z[j, q] = (M+1)^q-free sums sum_{m > M} (m + x_j)^(-(2s + 2 + q))``."""
    a = np.asarray(nodes) + (M + 1.0)
    Z = np.empty((len(a), count), dtype=complex)
    if s.imag == 0.0:
        for q in range(count):
            Z[:, q] = special.zeta(2.0 * s.real + 2.0 + q, a)
    else:
        for j, aj in enumerate(a):
            # integer shifts go through zeta(p) minus a partial sum, which cancels badly
            extra = math.ceil((2.0 * s.real + 2.0 + count) * math.log10(aj)) if aj == int(aj) else 0
            with mpmath.workdps(20 + extra):
                for q in range(count):
                    Z[j, q] = complex(mpmath.zeta(2.0 * s + 2.0 + q, aj))
    return Z


def _gauss_tail_blocks(s: complex, grid: Grid, trunc: TruncationPolicy, derivative: bool):
    M, K = trunc.M, trunc.order
    fit = _fit_matrix(grid, M, K)
    Z = _hurwitz_table(complex(s), M, tuple(grid.nodes.tolist()), K + 3)
    scale = (M + 1.0) ** np.arange(K + 1)

    def block(shift, coef):
        return coef * (Z[:, shift : shift + K + 1] * scale[None, :]) @ fit

    main = block(0, 1.0)
    if not derivative:
        return main, None, None
    # weight (m+x)^-(2s+2): d/dx gives -(2s+2)(m+x)^-(2s+3); chain factor h' = -(m+x)^-2
    return main, block(1, -(2.0 * s + 2.0)), block(2, -1.0)


def assemble(
    system: ExpandingSystem,
    s: complex,
    grid: Grid,
    trunc: TruncationPolicy | None = None,
    derivative_blocks: bool = False,
) -> OperatorMatrix:
    """Assemble ``L_s`` on ``grid`` keeping the branches allowed by ``trunc``."""
    s = complex(s)
    sigma, t = s.real, s.imag
    if sigma <= system.constants.sigma0:
        raise DivergentSumError(f"sigma={sigma} is not above sigma0={system.constants.sigma0}")
    if trunc is None:
        trunc = truncation_policy(system, sigma, grid)
    bound = trunc.effective_bound
    if not bound <= trunc.tolerance:
        need = None
        if system.tail.kind == "gauss":
            need = truncation_policy(system, sigma, grid, trunc.tolerance, trunc.order).M
        raise TruncationError(
            f"tail bound {bound:.3e} exceeds tolerance {trunc.tolerance:.1e} at M={trunc.M}",
            need,
        )
    if trunc.corrected and system.tail.kind != "gauss":
        raise TruncationError("tail correction is only available for the Gauss family")

    x = grid.nodes
    n = grid.size
    real = t == 0.0
    dtype = float if real else complex
    A = np.zeros((n, n), dtype=dtype)
    A1 = np.zeros((n, n), dtype=dtype) if derivative_blocks else None
    A2 = np.zeros((n, n), dtype=dtype) if derivative_blocks else None
    digits = system.digits(trunc.M)
    worst_phase = 0.0
    for start in range(0, len(digits), _CHUNK):
        chunk = digits[start : start + _CHUNK]
        Y, H1, H2, R, Rd = system.branch_arrays(chunk, x)
        W = np.abs(H1) * (np.exp(-sigma * R) if real else np.exp(-s * R))
        B = grid.interp_matrix(np.clip(Y, 0.0, 1.0).ravel()).reshape(n, len(chunk), n)
        A += np.einsum("rc,rcj->rj", W, B)
        if derivative_blocks:
            A1 += np.einsum("rc,rcj->rj", W * (-s * Rd + H2 / H1) if not real else W * (-sigma * Rd + H2 / H1), B)
            A2 += np.einsum("rc,rcj->rj", W * H1, B)
        if t != 0.0:
            worst_phase = max(worst_phase, abs(t) * float(np.max(np.abs(np.diff(R, axis=0)))))
    if trunc.corrected:
        main, w_blk, c_blk = _gauss_tail_blocks(s, grid, trunc, derivative_blocks)
        A = A + (main.real if real else main)
        if derivative_blocks:
            A1 = A1 + (w_blk.real if real else w_blk)
            A2 = A2 + (c_blk.real if real else c_blk)
    if worst_phase > OSCILLATION_LIMIT:
        warnings.warn(
            f"twist phase changes by {worst_phase:.2f} rad across a grid cell at |t|={abs(t)}; "
            f"increase N (currently {grid.N})",
            OscillationWarning,
            stacklevel=2,
        )
    return OperatorMatrix(
        matrix=A,
        s=s,
        grid=grid,
        trunc=trunc,
        system_name=system.name,
        weight_block=A1,
        chain_block=A2,
    )


def apply(op: OperatorMatrix, f: GridFunction) -> GridFunction:
    if f.grid is not op.grid:
        raise GridMismatchError(f"operator on {op.grid!r}, function on {f.grid!r}")
    return GridFunction(op.grid, op.matrix @ f.values)


def iterate(op: OperatorMatrix, f: GridFunction, n: int) -> GridFunction:
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    if f.grid is not op.grid:
        raise GridMismatchError(f"operator on {op.grid!r}, function on {f.grid!r}")
    v = f.values
    for _ in range(n):
        v = op.matrix @ v
    return GridFunction(op.grid, v)


def normalize(op: OperatorMatrix, spec) -> OperatorMatrix:
    """Matrix of ``f -> L_s(f_sigma f) / (lambda_sigma f_sigma)``."""
    if op.normalized:
        raise ValueError("operator is already normalised")
    if spec.eigenfunction.grid is not op.grid:
        raise GridMismatchError("spectral data lives on a different grid")
    if abs(spec.sigma - op.sigma) > 1e-14:
        raise InvalidSpectralDataError(f"spectral data at sigma={spec.sigma}, operator at {op.sigma}")
    f = np.real(spec.eigenfunction.values)
    if np.any(f <= 0.0):
        raise InvalidSpectralDataError("eigenfunction is not positive at every node")
    lam = float(spec.lam)
    M = op.matrix * f[None, :] / (lam * f)[:, None]
    return replace(op, matrix=M, normalized=True, eigen_scale=(lam, f, op.grid.diff_matrix @ f))


def augmented_matrix(op: OperatorMatrix) -> np.ndarray:
    """Action on stacked ``(f, f'/|t|)`` nodal data, a ``2(N+1)`` square matrix.

    Built from the value and derivative blocks, so it is exactly
    multiplicative: ``augmented(L)^n`` represents ``L^n``.
    """
    if not op.has_derivative_blocks:
        raise ValueError("assemble with derivative_blocks=True first")
    t = abs(op.t) if op.t != 0.0 else 1.0
    A, A1, A2 = op.matrix, op.weight_block, op.chain_block
    n = op.grid.size
    if op.normalized:
        lam, f, df = op.eigen_scale
        inv = 1.0 / (lam * f)
        P = A
        R = (-(df / f)[:, None] * P + inv[:, None] * (A1 * f[None, :] + A2 * df[None, :])) / t
        S = inv[:, None] * A2 * f[None, :]
    else:
        P, R, S = A, A1 / t, A2
    G = np.zeros((2 * n, 2 * n), dtype=complex)
    G[:n, :n] = P
    G[n:, :n] = R
    G[n:, n:] = S
    return G


def export_operator(op: OperatorMatrix, path) -> None:
    """Dense dump, row-major with real and imaginary parts interleaved.

    ``.csv``: one matrix row per line, ``re_0, im_0, re_1, im_1, ...``.
    Anything else: little-endian binary, two int64 (rows, cols) followed by
    ``rows * cols * 2`` float64 values.
    """
    M = np.asarray(op.matrix, dtype=complex)
    inter = np.empty((M.shape[0], 2 * M.shape[1]))
    inter[:, 0::2] = M.real
    inter[:, 1::2] = M.imag
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "w") as fh:
            for row in inter:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
    else:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", *M.shape))
            fh.write(inter.astype("<f8").tobytes())


def load_operator_dump(path) -> np.ndarray:
    path = str(path)
    if path.endswith(".csv"):
        inter = np.loadtxt(path, delimiter=",", ndmin=2)
    else:
        with open(path, "rb") as fh:
            rows, cols = struct.unpack("<qq", fh.read(16))
            inter = np.frombuffer(fh.read(), dtype="<f8").reshape(rows, 2 * cols)
    return inter[:, 0::2] + 1j * inter[:, 1::2]
