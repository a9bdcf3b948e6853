import math

import numpy as np
import pytest

from transferlab.dolgopyat.contraction import cone_iterate, l2_contraction
from transferlab.dolgopyat.context import OutOfScopeError
from transferlab.dolgopyat.uni import uni_certificate
from transferlab.function_space import GridFunction, GridMismatchError

T = 50.0


@pytest.fixture(scope="module")
def cert4(gauss):
    return uni_certificate(gauss, 4)


def test_zero_function(gauss, grid50, gauss_spec50, cert4):
    f = GridFunction.constant(grid50, 0.0)
    rep = l2_contraction(gauss, 0.0, T, 4, 3, f, spec=gauss_spec50, cert=cert4)
    assert rep.integrals == (0.0,) * 4
    assert all(math.isnan(r) for r in rep.ratios) and math.isnan(rep.beta)


def test_constant_function_bounded(gauss, grid50, gauss_spec50, cert4):
    f = GridFunction.constant(grid50, 1.0)
    rep = l2_contraction(gauss, 0.0, T, 4, 4, f, spec=gauss_spec50, cert=cert4)
    assert rep.integrals[0] == pytest.approx(1.0, abs=1e-12)
    assert all(v <= 1.0 + 1e-12 for v in rep.integrals)
    assert all(s <= 1.0 + 1e-9 for s in rep.sup_norms)


def test_no_steps(gauss, grid50, gauss_spec50, cert4):
    rep = l2_contraction(gauss, 0.0, T, 4, 0, lambda x: np.exp(1j * T * x), grid=grid50, spec=gauss_spec50, cert=cert4)
    assert len(rep.integrals) == 1 and rep.ratios == ()


def test_oscillatory_contracts(gauss, grid50, gauss_spec50, cert4):
    rep = l2_contraction(gauss, 0.0, T, 4, 6, lambda x: np.exp(1j * T * x), grid=grid50, spec=gauss_spec50, cert=cert4)
    assert rep.contracting
    assert all(r < 1 for r in rep.ratios)
    # contraction of the L2 sequence goes with a shrinking sup norm
    assert rep.sup_norms[-1] < rep.sup_norms[0]


def test_grid_mismatch(gauss, grid50, grid64, gauss_spec50, cert4):
    f = GridFunction.constant(grid64, 1.0)
    with pytest.raises(GridMismatchError):
        l2_contraction(gauss, 0.0, T, 4, 2, f, grid=grid50, spec=gauss_spec50, cert=cert4)


def test_below_window(gauss, grid50, gauss_spec50, cert4):
    with pytest.raises(OutOfScopeError):
        l2_contraction(gauss, 0.0, 1.0, 4, 2, lambda x: np.ones_like(x), grid=grid50, spec=gauss_spec50, cert=cert4)


def test_cone_iteration_of_constant(gauss, grid50, gauss_spec50, cert4):
    f = GridFunction.constant(grid50, 1.0)
    it = cone_iterate(gauss, gauss_spec50, f, 4, complex(0, T), 3, cert=cert4)
    assert it.ok
    assert all(m >= -1e-12 for m in it.cone_margins)
    for p in it.pairs:
        u = np.real(p.u.values)
        assert np.max(u) <= 1 + 1e-9
        assert np.all(np.abs(p.v.values) <= u + 1e-12)
    seq = it.l2_sequence(gauss_spec50.nu)
    assert all(b <= a + 1e-12 for a, b in zip(seq, seq[1:]))


def test_cone_certificate_length(gauss, grid50, gauss_spec50, cert4):
    f = GridFunction.constant(grid50, 1.0)
    with pytest.raises(ValueError):
        cone_iterate(gauss, gauss_spec50, f, 5, complex(0, T), 1, cert=cert4)
