"""Empty boxes inside the occupied range.

For a law of W that is symmetric about 1/2, the number L_n of empty boxes
below the last occupied one is geometric(1/2) for every n >= 1.  The exact
recursion and a simulation both confirm it, while an asymmetric law shows
why the symmetry is needed.
"""

import numpy as np

from sievelab import Beta, exact, sim
from sievelab.stats import chi_square_gof

geo = 0.5 ** (np.arange(12) + 1)

print("Exact pmf of L_n against geometric(1/2), k < 12")
for law in (Beta(0.5, 0.5), Beta(1, 1), Beta(3, 3)):
    tab = exact.pmf_L(law, 40, k_max=11)
    err = np.abs(tab.probs[1:, :12] - geo).max()
    print(f"  {str(law):<16s} max error over n <= 40: {err:.2e}")

# the symmetry is what matters, so an asymmetric law drifts away from 1/2
law = Beta(2, 1)
tab = exact.pmf_L(law, 40)
print(f"\n{law}: P(L_n = 0) for n = 1, 10, 40:",
      ", ".join(f"{tab.probs[n, 0]:.4f}" for n in (1, 10, 40)))
print(f"  mean of L_40 is {tab.mean(40):.4f}; the geometric mean would be 1")

print("\nSimulation of 50000 sieves with n = 500 balls, uniform W")
res = sim.batch_estimate(Beta(1, 1), n=500, replicates=50_000, seed=1, statistics=("L",))
rep = chi_square_gof(res.tallies("L"), geo, metadata={"name": "L_500 vs geometric(1/2)"})
print("  " + rep.line())
