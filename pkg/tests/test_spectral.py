import json

import numpy as np
import pytest

from transferlab.branch_maps import DivergentSumError
from transferlab.function_space import GridFunction, build_grid, integrate
from transferlab.spectral import cylinder_mass, lambda_scan, leading_eigendata, subdominant_gap
from transferlab.transfer_operator import assemble, normalize


def test_doubling_sigma0(doubling, grid64):
    sp = leading_eigendata(doubling, 0.0, grid64)
    assert sp.lam == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(sp.eigenfunction.values, 1.0, atol=1e-12)
    np.testing.assert_allclose(sp.mu.weights, grid64.quad_weights, atol=1e-12)


def test_doubling_sigma1(doubling, grid64):
    sp = leading_eigendata(doubling, 1.0, grid64)
    assert sp.lam == pytest.approx((1 / 3 + 2 / 3) / 2, abs=1e-14)


def test_gauss_fixed_point(gauss_spec, grid64):
    assert abs(gauss_spec.lam - 1.0) <= 1e-9
    f = np.real(gauss_spec.eigenfunction.values)
    ref = 1.0 / (1.0 + grid64.nodes)
    ratio = f / ref
    assert np.max(np.abs(ratio / ratio.mean() - 1.0)) <= 1e-8


def test_normalisations(gauss, doubling, grid64):
    for system, sigma in ((gauss, 0.0), (gauss, 0.04), (gauss, -0.05), (doubling, 0.5)):
        sp = leading_eigendata(system, sigma, grid64)
        one = GridFunction.constant(grid64, 1.0)
        assert np.all(np.real(sp.eigenfunction.values) > 0)
        assert integrate(one, sp.mu) == pytest.approx(1.0, abs=1e-9)
        assert integrate(sp.eigenfunction, sp.mu) == pytest.approx(1.0, abs=1e-9)
        assert sp.nu.mass == pytest.approx(1.0, abs=1e-9)
        L = assemble(system, sigma, grid64).matrix
        f = np.real(sp.eigenfunction.values)
        assert np.max(np.abs(L @ f - sp.lam * f)) <= max(sp.residual, 1e-10) * (1 + 1e-6)
        assert sp.residual <= 1e-9


def test_gap_values(gauss, doubling, grid64):
    g = subdominant_gap(gauss, 0.0, grid64)
    assert g.converged and abs(g.ratio - 0.303663) <= 1e-4
    d = subdominant_gap(doubling, 0.0, grid64)
    assert abs(d.ratio - 0.5) <= 1e-8
    assert subdominant_gap(doubling, 1.0, grid64).ratio < 1.0


def test_lambda_scan(gauss, doubling, grid64):
    scan = lambda_scan(gauss, [-0.05, 0.0, 0.05], grid64)
    a, b, c = scan.lambdas
    assert a > b > c and abs(b - 1.0) <= 1e-9 and scan.monotone
    d = lambda_scan(doubling, [0.0, 1.0], grid64)
    np.testing.assert_allclose(d.lambdas, [1.0, 0.5], atol=1e-14)
    rep = lambda_scan(gauss, [0.02, 0.02], grid64)
    assert abs(rep.lambdas[0] - rep.lambdas[1]) <= 1e-12


def test_duality_and_fixed_constant(gauss, grid64, gauss_spec, rng):
    op = normalize(assemble(gauss, 0.0, grid64), gauss_spec)
    nu = gauss_spec.nu
    np.testing.assert_allclose(op.matrix @ np.ones(grid64.size), 1.0, atol=1e-9)
    for _ in range(20):
        c = rng.standard_normal(5)
        f = np.polynomial.chebyshev.chebval(2 * grid64.nodes - 1, c)
        assert nu.weights @ (op.matrix @ f) == pytest.approx(nu.weights @ f, abs=1e-9)


def test_refinement_stability(gauss, doubling):
    for system in (gauss, doubling):
        a = leading_eigendata(system, 0.03, build_grid(48)).lam
        b = leading_eigendata(system, 0.03, build_grid(96)).lam
        assert abs(a - b) <= 1e-8


def test_below_sigma0(gauss, grid64):
    with pytest.raises(DivergentSumError):
        leading_eigendata(gauss, -0.5, grid64)


def test_json(gauss_spec, tmp_path):
    p = tmp_path / "spec.json"
    gauss_spec.to_json(p)
    d = json.loads(p.read_text())
    assert d["lambda"] == gauss_spec.lam and len(d["eigenfunction"]) == 65


def test_cylinder_masses_partition(doubling, grid64):
    sp = leading_eigendata(doubling, 0.5, grid64)
    words = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    assert sum(cylinder_mass(doubling, sp, w) for w in words) == pytest.approx(1.0, abs=1e-12)


def test_gauss_cylinder_mass(gauss, gauss_spec):
    # Gauss measure of [1/2, 1] is log2(4/3)
    assert cylinder_mass(gauss, gauss_spec, (1,)) == pytest.approx(np.log2(4 / 3), abs=1e-9)
    # at sigma = 0 the eigenmeasure is Lebesgue measure
    x = gauss_spec.grid.nodes
    for k in range(6):
        assert gauss_spec.mu.weights @ x**k == pytest.approx(1.0 / (k + 1), abs=1e-8)
