from fractions import Fraction

import numpy as np
import pytest

from transferlab.dolgopyat.federer import (
    federer_crosscheck,
    federer_table,
    grid_log2_ratios,
    left_word,
    right_word,
    symbol_probabilities,
)


def test_sigma_zero_is_doubling():
    t = federer_table(0, 12)
    assert all(r.ratio == 1.0 and r.log2_ratio == 0 for r in t.rows)


def test_sigma_one_exponents():
    t = federer_table(1, 15)
    assert [abs(r.log2_ratio) for r in t.rows] == [abs(Fraction(n - 2)) for n in range(1, 16)]


def test_half_sigma_at_twenty():
    t = federer_table("0.5", 20)
    assert t.sigma == Fraction(1, 2)
    assert t.rows[-1].log2_ratio == 9
    assert t.max_abs_log2_ratio == 9
    assert t.stem() == "federer_doubling_s1o2"


def test_exact_ratio_matches_masses():
    t = federer_table(Fraction(1, 2), 20)
    for r in t.rows:
        assert np.log2(r.left / r.right) == pytest.approx(float(r.log2_ratio), abs=1e-10)


def test_probabilities():
    p0, p1 = symbol_probabilities(Fraction(1))
    assert p0 == pytest.approx(1 / 3) and p0 + p1 == pytest.approx(1.0)


def test_words_are_adjacent_to_half():
    for n in range(1, 6):
        left, right = left_word(n), right_word(n)
        a = sum(b * 2.0 ** -(i + 1) for i, b in enumerate(left))
        b = sum(b * 2.0 ** -(i + 1) for i, b in enumerate(right))
        assert a + 2.0**-n == 0.5 and b == 0.5


def test_small_n_max():
    with pytest.raises(ValueError):
        federer_table(1, 2)


def test_grid_crosscheck():
    t = federer_table("0.5", 10)
    checks = federer_crosscheck(t, 8)
    assert len(checks) == 8
    assert max(max(c.left_error, c.right_error) for c in checks) <= 1e-8
    np.testing.assert_allclose(grid_log2_ratios(checks), [float(r.log2_ratio) for r in t.rows[:8]], atol=1e-6)
