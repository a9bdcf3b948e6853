"""Exponential decay of twisted operator powers and polynomial resolvent growth.

For |t| beyond the nonintegrability threshold the powers of the normalised
twisted operator contract in the norm sup|f| + sup|f'|/|t| at a rate that
does not depend on t, after a delay of order log|t|.
"""

import numpy as np

from transferlab.branch_maps import make_gauss_system
from transferlab.dolgopyat import l2_contraction, norm_decay, resolvent_bound, threshold_certificate, uniform_refit
from transferlab.function_space import build_grid

gauss = make_gauss_system()
cert = threshold_certificate(gauss)
print(f"frequency threshold max(2pi/D, 4) = {cert.t_threshold:.2f} (D = {cert.D:.4f})\n")

reports = [norm_decay(gauss, 0.0, t, range(41), 32, 0, cert=cert) for t in (10.0, 30.0, 100.0)]
for rep in reports:
    print(f"t={rep.t:5.0f}  gamma={rep.gamma:.3f}  A={rep.A}  fit from n>={rep.fit.n_start:.1f}  "
          f"upper(10)={rep.upper[10]:.2e}  lower(10)={rep.lower[10]:.2e}")
print("\nwith one common A:")
for t, fit in uniform_refit(reports).items():
    print(f"t={t:5.0f}  gamma={fit.gamma:.3f}  from n>={fit.n_start:.1f}")

t = 50.0
rep = l2_contraction(gauss, 0.0, t, 4, 8, lambda x: np.exp(1j * t * x), grid=build_grid(128))
print("\nweighted L2 norms of e^{itx} under blocks of 4 iterates:")
print("  " + "  ".join(f"{v:.2e}" for v in rep.integrals))

res = resolvent_bound(gauss, 0.0, [30.0, 60.0, 120.0, 240.0], 0.9, sample_count=16, seed=0, cert=cert)
print("\nresolvent norm estimates:")
for tv, est, up in zip(res.t_values, res.estimates, res.upper):
    print(f"t={tv:5.0f}  sampled {est:.3f}  block bound {up:.3f}")
print(f"growth exponent {res.exponent:.3f} +- {res.exponent_stderr:.3f}")
