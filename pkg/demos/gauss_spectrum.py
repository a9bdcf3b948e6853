"""Leading and subdominant eigenvalues of the Gauss transfer operator.

At sigma = 0 the operator fixes the Gauss density 1/((1+x) log 2); the
second eigenvalue in modulus is the Wirsing constant 0.3036630029...
"""

import numpy as np

from transferlab.branch_maps import make_gauss_system
from transferlab.function_space import build_grid
from transferlab.spectral import lambda_scan, leading_eigendata, subdominant_gap

gauss = make_gauss_system()

for N in (16, 32, 64, 128):
    grid = build_grid(N)
    spec = leading_eigendata(gauss, 0.0, grid)
    lam2 = subdominant_gap(gauss, 0.0, grid, spec=spec).ratio * spec.lam
    print(f"N={N:4d}  lambda_0 - 1 = {spec.lam - 1:+.2e}  |lambda_2| = {lam2:.10f}")

# the eigenfunction against the Gauss density
grid = build_grid(64)
spec = leading_eigendata(gauss, 0.0, grid)
x = np.linspace(0, 1, 9)
f = np.real(spec.eigenfunction(x))
print("\nx      f_0(x)      (1+x) f_0(x)")
for xi, fi in zip(x, f):
    print(f"{xi:.3f}  {fi:.10f}  {(1 + xi) * fi:.10f}")
print(f"1/log 2 = {1 / np.log(2):.10f}")

# pressure: lambda_sigma decreases through 1 at sigma = 0
scan = lambda_scan(gauss, [-0.2, -0.1, 0.0, 0.5, 1.0], grid)
print("\nsigma   lambda_sigma")
for s, lam in zip(scan.sigmas, scan.lambdas):
    print(f"{s:+.2f}   {lam:.8f}")
