"""Nonintegrability of the Gauss roof and the resulting phase cancellation.

Two words of length n (all ones and all twos) give inverse branches whose
roof differences have derivative bounded away from zero. At frequency t the
phases of e^{it r^(n) o h} and e^{it r^(n) o k} then rotate against each
other, and the probe finds, near every point, a place where the two terms of
the branch sum partially cancel.
"""

import math

import numpy as np

from transferlab.branch_maps import compose_branches, make_gauss_system
from transferlab.dolgopyat import (
    ConePair,
    TwistedContext,
    cancellation_probe,
    chi_build,
    domination,
    uni_certificate,
)
from transferlab.function_space import GridFunction, build_grid, default_grid_size
from transferlab.spectral import leading_eigendata

gauss = make_gauss_system()

print("n    D_n        sup|psi'|  threshold 2pi/D")
for n in (2, 4, 6, 8, 10, 12, 15):
    cert = uni_certificate(gauss, n)
    print(f"{n:<4d} {cert.D:.6f}   {cert.sup_psi:.6f}   {cert.t_threshold:.2f}")

broad = uni_certificate(gauss, 10, "broad")
print(f"\nbroad family at n=10: D={broad.D:.4f} from {broad.h_word} vs {broad.k_word}")

t = 50.0
grid = build_grid(default_grid_size(t))
spec = leading_eigendata(gauss, 0.0, grid)
cert = uni_certificate(gauss, 10)
s = complex(0.0, t)
pair = ConePair.make(
    GridFunction.constant(grid, 1.0), GridFunction.from_callable(grid, lambda x: np.exp(1j * t * x)), 1.0, t
)
rep = cancellation_probe(gauss, spec, pair, cert, s)
cases = {c: sum(r.case == c for r in rep.records) for c in ("easy", "hard", "fail")}
print(f"\nprobe at t={t:g}: {len(rep.records)} base points, cases {cases}")
print(f"coverage {rep.coverage:.3f}, reach 2pi/(D t) = {2 * math.pi / (cert.D * t):.4f}")
print(f"{len(rep.intervals)} cancellation intervals, largest gap {max(rep.gaps, default=0):.4f}")

chi = chi_build(rep)
dom = domination(rep, chi, TwistedContext(gauss, s, grid, spec))
# chi dips to eta only on the images of the intervals under the selected branch
h, k = compose_branches(gauss, cert.h_word), compose_branches(gauss, cert.k_word)
for iv in rep.intervals:
    branch = h if iv.kind == "h" else k
    mid = branch(np.array([0.5 * (iv.a + iv.b)]))
    print(f"interval [{iv.a:.4f}, {iv.b:.4f}] on {iv.kind}: chi at the image of its midpoint = {chi(mid)[0]:.3f}")
print(f"max slope of chi {chi.max_slope():.3e} <= bound {chi.slope_bound:.3e}")
print(f"domination margin {dom.min_margin:.3e} ({'holds' if dom.ok else 'fails'})")
