"""Acceptance gate: ten end-to-end criteria at their stated tolerances.

Each test records one PASS/FAIL line (criterion, runtime, key numbers); the
lines are printed in the terminal summary. Run on its own with
``pytest tests/test_acceptance.py`` or ``python3 tests/test_acceptance.py``.
"""

import json
import math
import time
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from transferlab.branch_maps import compose_branches, make_gauss_system
from transferlab.cli import main as cli_main
from transferlab.dolgopyat.calculus import ETA_MIN, boundary_pair, calculus_lemma_check, calculus_sweep
from transferlab.dolgopyat.cancellation import ConePair, cancellation_probe, chi_build, domination
from transferlab.dolgopyat.context import TwistedContext
from transferlab.dolgopyat.contraction import l2_contraction
from transferlab.dolgopyat.decay import norm_decay, resolvent_bound, threshold_certificate
from transferlab.dolgopyat.federer import federer_crosscheck, federer_table
from transferlab.dolgopyat.uni import fibonacci_pell_words, uni_certificate
from transferlab.function_space import GridFunction, build_grid, default_grid_size
from transferlab.spectral import leading_eigendata, subdominant_gap
from transferlab.transfer_operator import truncation_policy

RESULTS: list = []

WIRSING = 0.303663


class Criterion:
    """Times a block and records one result line, also when an assertion fails."""

    def __init__(self, number, title, limit):
        self.number, self.title, self.limit = number, title, limit
        self.notes = []

    def note(self, text):
        self.notes.append(text)

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.t0
        ok = exc_type is None and elapsed < self.limit
        detail = "; ".join(self.notes)
        if exc_type is not None:
            detail = (detail + "; " if detail else "") + f"{exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        RESULTS.append(
            f"[{'PASS' if ok else 'FAIL'}] {self.number:>2}. {self.title} ({elapsed:.1f}s / {self.limit:g}s) {detail}"
        )
        print(RESULTS[-1])
        if exc_type is None and not ok:
            raise AssertionError(f"criterion {self.number} exceeded its runtime limit: {elapsed:.1f}s")
        return False


@pytest.fixture(scope="module")
def gauss():
    return make_gauss_system()


def test_criterion_01_gauss_fixed_point(gauss):
    with Criterion(1, "Gauss fixed point", 10) as c:
        grid = build_grid(64)
        trunc = truncation_policy(gauss, 0.0, grid, tolerance=1e-8)
        spec = leading_eigendata(gauss, 0.0, grid, trunc)
        # oracle: telescoping sum_m (x+m)^-2 / (1 + 1/(x+m)) = sum_m 1/((x+m)(x+m+1)) = 1/(1+x)
        for x in (0.0, 0.3, 1.0):
            s = mpmath.nsum(lambda m: 1 / ((x + m) * (x + m + 1)), [1, mpmath.inf])
            assert abs(float(s) - 1 / (1 + x)) < 1e-14
        y = np.linspace(0, 1, 2001)
        f = np.real(spec.eigenfunction(y))
        ref = 1 / (1 + y)
        scale = np.dot(f, ref) / np.dot(ref, ref)
        err = float(np.max(np.abs(f - scale * ref) / (scale * ref)))
        c.note(f"lambda0-1={spec.lam - 1:.2e}, f0 rel err={err:.2e}, tail={trunc.effective_bound:.1e}")
        assert trunc.effective_bound <= 1e-8
        assert abs(spec.lam - 1) <= 1e-9
        assert err <= 1e-8


def test_criterion_02_subdominant_gap(gauss):
    with Criterion(2, "Subdominant eigenvalue", 30) as c:
        vals = {}
        for N in (64, 128):
            grid = build_grid(N)
            spec = leading_eigendata(gauss, 0.0, grid)
            vals[N] = subdominant_gap(gauss, 0.0, grid, spec=spec).ratio * spec.lam
        c.note(f"|lambda2| N=64: {vals[64]:.8f}, N=128: {vals[128]:.8f}")
        assert abs(vals[64] - WIRSING) <= 1e-4
        assert abs(vals[128] - WIRSING) <= 1e-4
        assert abs(vals[64] - vals[128]) <= 1e-4


def test_criterion_03_uni_certificate(gauss):
    with Criterion(3, "UNI certificate", 5) as c:
        cert = uni_certificate(gauss, 10)
        hw, kw = fibonacci_pell_words(10)
        assert (cert.h_word, cert.k_word) == (hw, kw)
        # oracle: closed form 2 |c/(cx+d) - c'/(c'x+d')| minimised on a fine grid
        _, _, c1, d1 = compose_branches(gauss, hw).mobius
        _, _, c2, d2 = compose_branches(gauss, kw).mobius
        x = np.linspace(0, 1, 200_001)
        oracle = float(np.min(2 * np.abs(c1 / (c1 * x + d1) - c2 / (c2 * x + d2))))
        D15 = uni_certificate(gauss, 15).D
        rel = abs(D15 - cert.D) / cert.D
        c.note(f"D10={cert.D:.6f} (oracle {oracle:.6f}), sup={cert.sup_psi:.4f} <= 2Kbar={2 * cert.Kbar:.4f}, rel change to n=15 {rel:.1e}")
        assert abs(cert.D - 0.178) <= 1e-3
        assert abs(oracle - 0.178) <= 1e-3 and cert.D <= oracle
        assert cert.sup_psi <= 2 * cert.Kbar
        assert rel < 1e-3


def test_criterion_04_calculus_lemma():
    with Criterion(4, "Calculus lemma", 5) as c:
        sweep = calculus_sweep(10**6, eta=ETA_MIN, seed=0)
        z1, z2 = boundary_pair()
        at_min = calculus_lemma_check(z1, z2, ETA_MIN)
        weak = calculus_lemma_check(z1, z2, 2 / 3, check_range=False)
        c.note(f"violations={sweep.violations} of {sweep.count}, |z1+z2|={abs(z1 + z2):.4f}, 1+eta={1 + ETA_MIN:.4f}")
        assert sweep.count == 10**6 and sweep.violations == 0
        assert abs(abs(z1 + z2) - math.sqrt(3)) < 1e-15
        assert abs(z1 + z2) <= 1.8229 and at_min.margin >= 0
        assert weak.margin < 0 and math.sqrt(3) > 5 / 3


def test_criterion_05_cancellation_and_chi(gauss):
    with Criterion(5, "Cancellation probe and chi", 60) as c:
        t = 50.0
        grid = build_grid(default_grid_size(t))
        spec = leading_eigendata(gauss, 0.0, grid)
        cert = uni_certificate(gauss, 10)
        s = complex(0.0, t)
        u = GridFunction.constant(grid, 1.0)
        v = GridFunction.from_callable(grid, lambda x: np.exp(1j * t * x))
        pair = ConePair.make(u, v, 1.0, t)
        rep = cancellation_probe(gauss, spec, pair, cert, s)
        reach = 2 * math.pi / (cert.D * t)
        within = sum(1 for r in rep.records if r.located and r.distance <= reach) / len(rep.records)
        chi = chi_build(rep)
        dom = domination(rep, chi, TwistedContext(gauss, s, grid, spec))
        c.note(f"located within 2pi/(D|t|): {within:.3f}, probe margin={rep.min_margin:.2e}, domination margin={dom.min_margin:.2e}")
        assert within >= 0.95
        assert rep.min_margin >= -1e-12
        assert dom.min_margin >= -1e-12


def test_criterion_06_l2_contraction(gauss):
    with Criterion(6, "L2 contraction", 60) as c:
        t = 50.0
        reps = {}
        for N in (64, 128):
            reps[N] = l2_contraction(gauss, 0.0, t, 4, 8, lambda x: np.exp(1j * t * x), grid=build_grid(N))
        diff = float(np.max(np.abs(np.subtract(reps[64].integrals, reps[128].integrals))))
        c.note(f"max ratio={max(reps[128].ratios):.4f}, N=64 vs 128 diff={diff:.1e}")
        assert all(r < 1 for r in reps[64].ratios) and all(r < 1 for r in reps[128].ratios)
        assert len(reps[128].ratios) == 8
        assert diff <= 1e-6


def test_criterion_07_decay(gauss):
    with Criterion(7, "Norm decay", 300) as c:
        cert = threshold_certificate(gauss)
        parts = []
        for t in (10.0, 30.0, 100.0):
            rep = norm_decay(gauss, 0.0, t, range(0, 41), 32, 0, cert=cert)
            up = dict(zip(rep.n_values, rep.upper))
            worst = max(up[a + b] - up[a] * up[b] for a in range(1, 21) for b in range(1, 21))
            parts.append(f"t={t:g}: gamma={rep.gamma:.3f} A={rep.A} res={rep.fit.residual:.3f}")
            assert rep.upper[0] == 1.0 and rep.lower[0] == 1.0
            assert rep.gamma < 1 and rep.A is not None and rep.fit.residual < 0.05
            assert worst <= 1e-10
            assert rep.consistent
        c.note(", ".join(parts))


def test_criterion_08_resolvent(gauss):
    with Criterion(8, "Resolvent growth", 120) as c:
        rep = resolvent_bound(gauss, 0.0, [30.0, 60.0, 120.0, 240.0], 0.9, sample_count=32, seed=0)
        c.note(f"exponent={rep.exponent:.4f} +- {rep.exponent_stderr:.4f}, excluded={len(rep.excluded)}")
        assert len(rep.t_values) == 4
        assert rep.exponent <= 0.9


def test_criterion_09_federer():
    with Criterion(9, "Federer counterexample", 1) as c:
        half = federer_table(Fraction(1, 2), 20)
        assert all(isinstance(r.log2_ratio, Fraction) for r in half.rows)
        assert all(abs(r.log2_ratio) == Fraction(1, 2) * abs(r.n - 2) for r in half.rows)
        checks = federer_crosscheck(half, 8)
        err = max(max(ch.left_error, ch.right_error) for ch in checks)
        zero = federer_table(0, 20)
        c.note(f"max|log2 ratio|={half.max_abs_log2_ratio} at n=20, grid mass error={err:.1e}")
        assert len(checks) == 8 and err <= 1e-8
        assert all(r.ratio == 1.0 for r in zero.rows)


def test_criterion_10_determinism(tmp_path):
    with Criterion(10, "Byte-identical reruns", 300) as c:
        configs = {
            "decay": {"t": [30.0], "n_max": 20, "sample_count": 8, "seed": 5},
            "resolvent": {"t": [30.0, 60.0], "sample_count": 8, "seed": 5},
            "correlate": {"sample_count": 20000, "seed": 5},
        }
        compared = 0
        for sub, body in configs.items():
            cfg = tmp_path / f"{sub}.json"
            cfg.write_text(json.dumps(body))
            dirs = [tmp_path / f"{sub}_a", tmp_path / f"{sub}_b"]
            for d in dirs:
                assert cli_main([sub, "--config", str(cfg), "--out", str(d)]) == 0
            names = sorted(p.name for p in dirs[0].glob("*.csv"))
            assert names and names == sorted(p.name for p in dirs[1].glob("*.csv"))
            for name in names:
                assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), f"{sub}: {name} differs"
                compared += 1
        c.note(f"{compared} CSV files identical across reruns (decay, resolvent, correlate)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
