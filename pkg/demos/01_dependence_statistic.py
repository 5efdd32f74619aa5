"""How the thresholded Hoeffding test behaves.

Hoeffding's D is rank based, so it sees any monotone or non-monotone
dependence, and it shrinks towards zero like 1/n for independent samples.
The masking step declares two variables dependent when D exceeds gamma,
so the useful question is how far the null spread sits below gamma at
the dataset sizes we use.
"""

import numpy as np

from causalmask.independence import hoeffding_d

g = np.random.default_rng(0)
x = g.uniform(-1, 1, 2000)

print("dependence of x with ...")
for label, y in [("x itself", x),
                 ("x**2 (non-monotone)", x ** 2),
                 ("x + heavy noise", x + 2 * g.standard_normal(2000)),
                 ("an independent draw", g.uniform(-1, 1, 2000))]:
    print(f"  {label:<22} D = {hoeffding_d(x, y): .5f}")

print("\nnull spread of D (independent uniforms, 200 draws each)")
for n in (250, 1000, 2000, 5000):
    d = np.array([hoeffding_d(g.random(n), g.random(n)) for _ in range(200)])
    print(f"  n={n:>5}: sd={d.std():.2e}  share above 1e-3: {np.mean(d > 1e-3):.3f}")
