import numpy as np
import pytest

from transferlab.function_space import (
    GridFunction,
    GridMismatchError,
    MeasureWeights,
    build_grid,
    c1t_norm,
    cone_check,
    default_grid_size,
    derivative,
    evaluate,
    integrate,
    lebesgue,
    read_grid_function_csv,
    write_grid_function_csv,
)


def test_small_grid_nodes():
    g = build_grid(2)
    np.testing.assert_array_equal(g.nodes, [0.0, 0.5, 1.0])


@pytest.mark.parametrize("N", [1, 0, 2.5])
def test_invalid_grid(N):
    with pytest.raises(ValueError):
        build_grid(N)


def test_grid_invariants():
    for N in (2, 8, 16, 64, 129):
        g = build_grid(N)
        assert np.all(np.diff(g.nodes) > 0)
        assert g.nodes[0] == 0.0 and g.nodes[-1] == 1.0
        assert abs(g.quad_weights.sum() - 1.0) < 1e-14
        assert np.max(np.abs(g.diff_matrix.sum(axis=1))) < 1e-12


def test_grids_are_cached():
    assert build_grid(16) is build_grid(16)


def test_constant_integral_and_square_derivative():
    g = build_grid(16)
    one = GridFunction.constant(g, 1.0)
    assert integrate(one, lebesgue(g)) == pytest.approx(1.0, abs=1e-15)
    f = GridFunction.from_callable(g, lambda x: x**2)
    assert evaluate(derivative(f), 0.5) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(derivative(f).values, 2 * g.nodes, atol=1e-10)


def test_evaluate_examples():
    g8 = build_grid(8)
    assert evaluate(GridFunction.constant(g8, 3.0), 0.123) == pytest.approx(3.0, abs=1e-14)
    f = GridFunction.from_callable(g8, lambda x: x**5)
    assert evaluate(f, 0.3) == pytest.approx(0.00243, abs=1e-12)
    g64 = build_grid(64)
    e = GridFunction.from_callable(g64, lambda x: np.exp(50j * x))
    assert abs(evaluate(e, 0.7) - np.exp(35j)) < 1e-8


def test_evaluate_exact_at_nodes():
    g = build_grid(12)
    f = GridFunction(g, np.random.default_rng(0).standard_normal(13))
    np.testing.assert_array_equal(evaluate(f, g.nodes), f.values)


@pytest.mark.parametrize("x", [-0.1, 1.0 + 1e-9, np.nan])
def test_evaluate_domain(x):
    f = GridFunction.constant(build_grid(4), 1.0)
    with pytest.raises(ValueError):
        evaluate(f, x)


def test_derivative_finite_difference_oracle():
    g = build_grid(64)
    f = GridFunction.from_callable(g, lambda x: np.sin(10 * x))
    x = np.linspace(0.01, 0.99, 41)
    h = 1e-5
    fd = (np.sin(10 * (x + h)) - np.sin(10 * (x - h))) / (2 * h)
    np.testing.assert_allclose(evaluate(derivative(f), x), fd, atol=1e-5)
    np.testing.assert_allclose(derivative(GridFunction.constant(g, 2.0)).values, 0.0, atol=1e-10)


def test_integrals():
    g = build_grid(32)
    x = GridFunction.from_callable(g, lambda x: x)
    assert integrate(x, lebesgue(g)) == pytest.approx(0.5, abs=1e-12)
    dens = GridFunction.from_callable(g, lambda x: 1.0 / ((1.0 + x) * np.log(2.0)))
    m = lebesgue(g).with_density(dens)
    assert integrate(GridFunction.constant(g, 1.0), m) == pytest.approx(1.0, abs=1e-10)
    assert integrate(GridFunction.constant(g, 1.0), m.normalized()) == pytest.approx(1.0, abs=1e-14)


def test_integrate_grid_mismatch():
    with pytest.raises(GridMismatchError):
        integrate(GridFunction.constant(build_grid(8), 1.0), lebesgue(build_grid(9)))
    with pytest.raises(GridMismatchError):
        GridFunction(build_grid(8), np.ones(5))
    with pytest.raises(GridMismatchError):
        MeasureWeights(build_grid(8), np.ones(3))


def test_c1t_norm_examples():
    g = build_grid(64)
    assert c1t_norm(GridFunction.constant(g, 1.0), 10) == pytest.approx(1.0, abs=1e-12)
    assert c1t_norm(GridFunction.from_callable(g, lambda x: x), 4) == pytest.approx(1.25, abs=1e-12)
    e = GridFunction.from_callable(g, lambda x: np.exp(50j * x))
    assert c1t_norm(e, 50) == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError):
        c1t_norm(e, 0)


def test_cone_check_examples():
    g = build_grid(64)
    one = GridFunction.constant(g, 1.0)
    assert cone_check(one, GridFunction.constant(g, 0.5), 1.0, 10).ok
    for t in (1.0, 5.0, 30.0):
        assert cone_check(one, GridFunction.from_callable(g, lambda x: 0.999 * np.exp(1j * t * x)), 1.0, t).ok
    res = cone_check(GridFunction.from_callable(g, lambda x: x), GridFunction.constant(g, 0.0), 1.0, 10)
    assert not res.ok and res.margin <= 0


def test_default_grid_rule():
    assert default_grid_size(10) == 64
    assert default_grid_size(100) == 154
    assert default_grid_size(-100) == 154


def test_grid_function_csv_roundtrip(tmp_path):
    g = build_grid(10)
    f = GridFunction.from_callable(g, lambda x: np.exp(3j * x))
    p = tmp_path / "f.csv"
    write_grid_function_csv(f, p)
    assert p.read_text().splitlines()[0] == "node,re,im"
    back = read_grid_function_csv(p)
    assert back.grid is g
    np.testing.assert_array_equal(back.values, f.values)


def test_nodewise_algebra():
    g = build_grid(6)
    a = GridFunction.from_callable(g, lambda x: 1 + 1j * x)
    b = GridFunction.from_callable(g, lambda x: 2 - x)
    np.testing.assert_array_equal((a * b).values, a.values * b.values)
    np.testing.assert_array_equal((a + b).values, a.values + b.values)
    np.testing.assert_array_equal(abs(a).values, np.abs(a.values))
    np.testing.assert_array_equal(a.conj().values, np.conj(a.values))
    with pytest.raises(GridMismatchError):
        a + GridFunction.constant(build_grid(7), 1.0)
