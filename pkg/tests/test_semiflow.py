from types import SimpleNamespace

import numpy as np
import pytest

from transferlab.dolgopyat.context import OutOfScopeError
from transferlab.dolgopyat.semiflow import bump, bump_observable, flow, semiflow_correlation

TIMES = np.arange(0.0, 8.01, 0.5)


def test_constant_observables(gauss, gauss_spec):
    one = lambda x, u: np.ones_like(x)  # noqa: E731
    rep = semiflow_correlation(gauss, one, one, [0.0, 1.0, 2.0], 5000, 1, spec=gauss_spec)
    assert np.max(np.abs(rep.covariance)) <= 1e-12


def test_variance_at_time_zero(gauss, gauss_spec):
    F = bump_observable()
    rep = semiflow_correlation(gauss, F, F, [0.0], 5000, 2, spec=gauss_spec)
    assert rep.covariance[0] >= 0


def test_deterministic(gauss, gauss_spec, tmp_path):
    F = bump_observable()
    a = semiflow_correlation(gauss, F, F, TIMES, 4000, 7, spec=gauss_spec)
    b = semiflow_correlation(gauss, F, F, TIMES, 4000, 7, spec=gauss_spec)
    assert a.to_dict() == b.to_dict()
    pa = a.save(tmp_path / "a")["csv"]
    pb = b.save(tmp_path / "b")["csv"]
    assert open(pa, "rb").read() == open(pb, "rb").read()


@pytest.mark.slow
def test_positive_rate(gauss, gauss_spec):
    F = bump_observable()
    rep = semiflow_correlation(gauss, F, F, TIMES, 1_000_000, 0, spec=gauss_spec)
    assert rep.rate_positive and rep.rate > 0


def test_flow_preserves_fibre(gauss, rng):
    x = rng.uniform(0.05, 1, 500)
    u = rng.uniform(0, 1, 500) * gauss.roof.eval(x)
    x2, u2 = flow(gauss, x, u, 3.0)
    assert np.all(u2 >= 0) and np.all(u2 < gauss.roof.eval(x2))


def test_bump():
    assert bump(np.array([1.0, -2.0]))[0] == 0.0
    assert bump(np.array([0.0]))[0] == pytest.approx(np.exp(-1))


def test_divergent_system():
    fake = SimpleNamespace(constants=SimpleNamespace(sigma0=0.0), name="fake")
    with pytest.raises(OutOfScopeError):
        semiflow_correlation(fake, None, None, [0.0], 10, 0)


def test_negative_time(gauss, gauss_spec):
    F = bump_observable()
    with pytest.raises(ValueError):
        semiflow_correlation(gauss, F, F, [-1.0], 10, 0, spec=gauss_spec)
