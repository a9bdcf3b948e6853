import math

import pytest

from transferlab.dolgopyat.calculus import ETA_MIN, boundary_pair, calculus_lemma_check, calculus_sweep


def test_opposite_pair():
    c = calculus_lemma_check(1, -1, ETA_MIN)
    assert c.applicable and c.margin == pytest.approx(1 + ETA_MIN)


def test_aligned_pair_not_applicable():
    assert not calculus_lemma_check(1, 1, 0.9).applicable


def test_boundary_pair():
    z1, z2 = boundary_pair()
    c = calculus_lemma_check(z1, z2, ETA_MIN)
    assert c.applicable
    assert abs(z1 + z2) == pytest.approx(math.sqrt(3), abs=1e-15)
    assert 1 + ETA_MIN == pytest.approx(1.8229, abs=1e-4)
    assert c.margin >= 0
    weak = calculus_lemma_check(z1, z2, 2 / 3, check_range=False)
    assert weak.margin < 0 and math.sqrt(3) > 5 / 3


@pytest.mark.parametrize("eta", [0.5, 2 / 3, 1.0, 1.2])
def test_eta_range(eta):
    with pytest.raises(ValueError):
        calculus_lemma_check(1, -1, eta)


def test_small_sweep_is_deterministic():
    a = calculus_sweep(20_000, seed=3)
    b = calculus_sweep(20_000, seed=3)
    assert a == b and a.violations == 0


def test_sweep_detects_weaker_eta():
    # the boundary region is dense enough that eta = 0.7 fails for some pair in the lemma's class
    import numpy as np

    from transferlab.dolgopyat.calculus import _margin

    th = np.linspace(math.pi / 3, math.pi, 1001)
    z2 = np.exp(1j * th)
    assert np.min(_margin(np.ones_like(z2), z2, 0.7)) < 0
    assert np.min(_margin(np.ones_like(z2), z2, ETA_MIN)) >= -1e-15
