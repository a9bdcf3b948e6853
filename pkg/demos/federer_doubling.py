"""Equilibrium measures of the doubling map need not be doubling.

With the two-valued roof log 3 / log(3/2), the equilibrium measure at sigma
is Bernoulli; the dyadic intervals just left and right of 1/2 then have mass
ratio exactly 2^(sigma (n-2)), unbounded in n unless sigma = 0.
"""

from fractions import Fraction

from transferlab.dolgopyat import federer_crosscheck, federer_table

for sigma in (Fraction(0), Fraction(1, 2), Fraction(1)):
    table = federer_table(sigma, 12)
    print(f"sigma = {sigma}")
    for r in table.rows[::3]:
        print(f"  n={r.n:2d}  left={r.left:.3e}  right={r.right:.3e}  log2 ratio={r.log2_ratio}")

table = federer_table(Fraction(1, 2), 8)
checks = federer_crosscheck(table)
print("\ngrid eigendata against the symbolic masses (sigma = 1/2):")
for c in checks:
    print(f"  n={c.n}  |error| left {c.left_error:.1e}, right {c.right_error:.1e}")
