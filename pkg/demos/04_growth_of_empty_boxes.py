"""Slow growth of E L_n when E|log(1 - W)| is infinite.

With P{W > x} = 1/(1 + |log(1 - x)|^0.3) the mean number of empty boxes
grows without bound, but only like a power of log n.  The Poissonised mean
is computed by a renewal integral and compared with simulation at fixed n.
"""

import math

from sievelab import ExampleGamma, exact, sim

law = ExampleGamma(0.3)
print("n        simulated E L_n        Poissonised mean    asymptotic form")
for i, n in enumerate((10 ** 2, 10 ** 3, 10 ** 4)):
    res = sim.batch_estimate(law, n=n, replicates=20_000, seed=40 + i, statistics=("L",),
                             method="coins")
    pois = exact.mean_L_poissonised(law, float(n)).value
    asym = exact.mean_L_asymptotic_iii(law, float(n))
    print(f"{n:<8d} {res.mean('L'):.4f} +- {res.se('L'):.4f}     {pois:.4f}"
          f"              {asym:.4f}")

# n = e^600 is still a double; the correction decays only like a power of log n
print("\nRatio of the asymptotic form to log(n)^0.7 / (0.7 mu), the bare leading term:")
mu = law.profile().mu
for log_n in (10, 100, 600):
    asym = exact.mean_L_asymptotic_iii(law, math.exp(log_n))
    print(f"  log n = {log_n:<5d} ratio {asym / (log_n ** 0.7 / (0.7 * mu)):.3f}")
