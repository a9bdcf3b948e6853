"""Normalised operators at ``s`` and at ``sigma`` sharing one grid and one eigendata."""

from __future__ import annotations

import math

import numpy as np

from ..branch_maps import ExpandingSystem
from ..function_space import Grid, build_grid, default_grid_size
from ..spectral import SpectralData, leading_eigendata
from ..transfer_operator import (
    OperatorMatrix,
    TruncationPolicy,
    assemble,
    augmented_matrix,
    normalize,
    truncation_policy,
)


class OutOfScopeError(ValueError):
    """Parameters violate a hypothesis of the estimate being tested."""


class TwistedContext:
    """``~L_s`` and ``~L_sigma`` on a common grid, with cached matrix powers.

    ``spec`` must be the eigendata at ``sigma = Re s`` on ``grid``.
    """

    def __init__(
        self,
        system: ExpandingSystem,
        s: complex,
        grid: Grid | None = None,
        spec: SpectralData | None = None,
        trunc: TruncationPolicy | None = None,
        derivative_blocks: bool = False,
    ):
        s = complex(s)
        self.system = system
        self.s = s
        self.sigma = s.real
        self.t = s.imag
        if grid is None:
            grid = spec.grid if spec is not None else build_grid(default_grid_size(self.t))
        self.grid = grid
        if trunc is None:
            trunc = spec.trunc if spec is not None else truncation_policy(system, self.sigma, grid)
        if spec is None:
            spec = leading_eigendata(system, self.sigma, grid, trunc)
        if spec.grid is not grid or abs(spec.sigma - self.sigma) > 0.0:
            raise ValueError("spectral data does not match the grid or sigma")
        self.spec = spec
        self.trunc = trunc
        raw = assemble(system, s, grid, trunc, derivative_blocks=derivative_blocks)
        self.op_s: OperatorMatrix = normalize(raw, spec)
        self.op_sigma: OperatorMatrix = normalize(spec.operator, spec)
        self.lam = spec.lam
        self.f = np.real(spec.eigenfunction.values)
        self._powers: dict = {}

    @property
    def abs_s(self) -> float:
        return abs(self.s)

    def power(self, which: str, n: int) -> np.ndarray:
        """``n``-th power of ``~L_s`` (``which='s'``) or ``~L_sigma`` (``'sigma'``)."""
        key = (which, n)
        if key not in self._powers:
            base = self.op_s.matrix if which == "s" else np.real(self.op_sigma.matrix)
            self._powers[key] = np.linalg.matrix_power(base, n)
        return self._powers[key]

    def augmented(self) -> np.ndarray:
        return augmented_matrix(self.op_s)

    def eigenfunction_at(self, x) -> np.ndarray:
        return np.real(self.spec.eigenfunction(np.clip(x, 0.0, 1.0)))


def check_window(t: float, D: float, minimum: float = 0.0) -> None:
    """Raise unless ``|t| > 2 pi / D`` (and ``|t| >= minimum``)."""
    if D <= 0.0:
        raise OutOfScopeError("no UNI certificate (D = 0)")
    need = 2.0 * math.pi / D
    if not abs(t) > need or abs(t) < minimum:
        raise OutOfScopeError(
            f"|t| = {abs(t)} is below the threshold max(2*pi/D, {minimum}) = {max(need, minimum):.4f}"
        )
