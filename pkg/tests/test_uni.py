import math

import numpy as np
import pytest

from transferlab.branch_maps import compose_branches
from transferlab.dolgopyat.uni import (
    InvalidPairError,
    broad_candidates,
    fibonacci_pell_words,
    psi_pair,
    uni_certificate,
)


def _closed_form_dpsi(h, k, x):
    # (r^(n) o h)' = -h''/h' = 2c/(cx + d) for a Gauss word with coefficients (a, b, c, d)
    _, _, c, d = h.mobius
    _, _, c2, d2 = k.mobius
    return 2.0 * (c / (c * x + d) - c2 / (c2 * x + d2))


def test_identical_branches_give_zero(gauss):
    h = compose_branches(gauss, (1, 3, 2))
    p = psi_pair(gauss, h, h)
    x = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(p.psi(x), 0.0)
    assert p.inf == 0.0 and p.sup == 0.0


def test_mobius_closed_form(gauss, rng):
    x = np.linspace(0, 1, 101)
    for _ in range(10):
        n = int(rng.integers(1, 8))
        h = compose_branches(gauss, tuple(rng.integers(1, 9, n)))
        k = compose_branches(gauss, tuple(rng.integers(1, 9, n)))
        p = psi_pair(gauss, h, k)
        np.testing.assert_allclose(np.abs(p.dpsi(x)), np.abs(_closed_form_dpsi(h, k, x)), atol=1e-9)


def test_fibonacci_pell_pair_minimum(gauss):
    hw, kw = fibonacci_pell_words(10)
    assert hw == (1,) * 10 and kw == (2,) * 10
    p = psi_pair(gauss, compose_branches(gauss, hw), compose_branches(gauss, kw))
    x = np.linspace(0, 1, 100_001)
    oracle = 2.0 * np.abs(1.0 / (x + 89 / 55) - 1.0 / (x + 2378 / 985))
    assert abs(p.inf - oracle.min()) <= 1e-3
    assert abs(p.inf - 0.1781) <= 1e-3
    assert np.argmin(oracle) == len(x) - 1
    assert p.inf <= oracle.min()


def test_word_length_mismatch(gauss):
    with pytest.raises(InvalidPairError):
        psi_pair(gauss, compose_branches(gauss, (1, 1)), compose_branches(gauss, (2,)))
    with pytest.raises(InvalidPairError):
        uni_certificate(gauss, 3, [((1, 1, 1), (2, 2))])


def test_certificate_gauss(gauss):
    cert = uni_certificate(gauss, 10)
    assert abs(cert.D - 0.178) <= 1e-3
    assert cert.certified
    assert 0.0 <= cert.D <= cert.sup_psi <= 2 * cert.Kbar + 1e-8
    assert cert.Delta == pytest.approx(2 * math.pi / cert.D)


def test_certificate_convergence(gauss):
    Ds = [uni_certificate(gauss, n).D for n in range(5, 16)]
    assert abs(Ds[-1] - Ds[-6]) / Ds[-1] < 1e-3
    assert abs(Ds[-1] - Ds[-2]) < abs(Ds[1] - Ds[0])


def test_certificate_doubling_is_zero(doubling):
    cert = uni_certificate(doubling, 3, broad_candidates(doubling, 3))
    assert cert.D == 0.0 and not cert.certified
    assert cert.t_threshold == math.inf


def test_broad_family_beats_default(gauss):
    assert uni_certificate(gauss, 6, "broad").D >= uni_certificate(gauss, 6).D


def test_bad_arguments(gauss):
    with pytest.raises(ValueError):
        uni_certificate(gauss, 0)
    with pytest.raises(ValueError):
        uni_certificate(gauss, 3, [])
    with pytest.raises(ValueError):
        uni_certificate(gauss, 3, "narrow")


def test_certificate_serialisation(gauss, tmp_path):
    cert = uni_certificate(gauss, 4)
    out = cert.save(tmp_path)
    assert out["json"].endswith("uni_gauss_n4.json")
    import json

    assert json.loads(open(out["json"]).read())["D"] == cert.D
