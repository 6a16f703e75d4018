"""Exact finite-n laws of the occupancy statistics.

The statistics are driven by two nonincreasing Markov chains on the
integers: ``q*`` (weak compositions, self-loops allowed) and ``q`` (strict
compositions).  All tables here are built by forward dynamic programming
over these kernels.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate, signal, special

from .errors import CapabilityError, ConsistencyError, NumericError, PrecisionError
from .laws import Beta, WLaw, _quad, _xmul

__all__ = [
    "KernelRow",
    "PmfTable",
    "kernel_qstar",
    "kernel_q",
    "pmf_L",
    "pmf_K",
    "pmf_M",
    "potential_g",
    "potential_row",
    "potential_table",
    "pmf_Z",
    "pmf_Z_table",
    "mean_L_explicit",
    "mean_L_via_Z",
    "s_ratio",
    "mean_L_poissonised",
    "mean_L_asymptotic_iii",
    "DOUBLE_N_MAX",
]

DOUBLE_N_MAX = 30
MASS_TOL = 1e-9
GROW_TOL = 1e-12
K_MAX_CAP = 1 << 14
SCHEMA = "sievelab/1"


@dataclass(frozen=True)
class KernelRow:
    n: int
    probs: np.ndarray
    kind: str = "qstar"


@dataclass
class PmfTable:
    """P{X_n = k} for n = 0..n_max and k = 0..k_max.

    ``deficit[n]`` is the probability mass beyond ``k_max`` for row n.
    """

    statistic: str
    law: str
    probs: np.ndarray
    deficit: np.ndarray
    warnings: list = field(default_factory=list)

    @property
    def n_max(self) -> int:
        return self.probs.shape[0] - 1

    @property
    def k_max(self) -> int:
        return self.probs.shape[1] - 1

    def pmf(self, n: int) -> np.ndarray:
        return self.probs[n]

    def cdf(self, n: int) -> np.ndarray:
        return np.cumsum(self.probs[n])

    def moment(self, n: int, order: int = 1) -> float:
        k = np.arange(self.k_max + 1, dtype=float)
        return float(np.dot(k ** order, self.probs[n]))

    def mean(self, n: int) -> float:
        return self.moment(n, 1)

    def means(self) -> np.ndarray:
        return self.probs @ np.arange(self.k_max + 1, dtype=float)

    def metadata(self) -> dict:
        return {"schema": SCHEMA, "statistic": self.statistic, "law": self.law,
                "n_max": self.n_max, "k_max": self.k_max,
                "max_mass_deficit": float(self.deficit.max(initial=0.0)),
                "warnings": list(self.warnings)}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "k", "probability"])
            for n in range(self.n_max + 1):
                for k in np.flatnonzero(self.probs[n]):
                    w.writerow([n, int(k), repr(float(self.probs[n, k]))])

    def to_json(self, path):
        out = self.metadata()
        out["probs"] = [row.tolist() for row in self.probs]
        out["deficit"] = self.deficit.tolist()
        with open(path, "w") as fh:
            json.dump(out, fh)


# -- kernels --------------------------------------------------------------

@lru_cache(maxsize=4096)
def _qstar(law: WLaw, n: int) -> np.ndarray:
    m = np.arange(n + 1, dtype=float)
    logc = special.gammaln(n + 1) - special.gammaln(m + 1) - special.gammaln(n - m + 1)
    if isinstance(law, Beta):
        a, b = law.a, law.b
        # betaln and gammaln differences lose ~1e-12 near n = 10^3; products do not
        log_p0 = math.fsum(np.log1p(-a / (a + b + np.arange(n))))
        if log_p0 > -575.0:
            p0 = math.exp(log_p0)
            k = m[:-1]
            row = p0 * np.r_[1.0, np.cumprod((n - k) / (k + 1) * (k + a) / (n - k - 1 + b))]
        else:
            row = np.exp(logc + special.betaln(m + a, n - m + b) - special.betaln(a, b))
    else:
        def binom_row(lw, l1w):
            with np.errstate(invalid="ignore"):
                t = np.where(m > 0, m * lw, 0.0) + np.where(m < n, (n - m) * l1w, 0.0)
            return np.exp(logc + t)
        row = np.clip(law.expect(binom_row, vector=True), 0.0, None)
    row.setflags(write=False)
    return row


def kernel_qstar(law: WLaw, n: int) -> KernelRow:
    """Transition row of the weak-composition chain from state n."""
    if n < 1:
        raise ValueError("kernel rows need n >= 1")
    return KernelRow(n, _qstar(law, n), "qstar")


def _q(law: WLaw, n: int) -> np.ndarray:
    row = _qstar(law, n)
    return row[:n] / (1.0 - row[n])


def kernel_q(law: WLaw, n: int) -> KernelRow:
    """Transition row of the composition chain (self-loop removed)."""
    if n < 1:
        raise ValueError("kernel rows need n >= 1")
    return KernelRow(n, _q(law, n), "q")


# -- distribution tables ------------------------------------------------

def _grow(build, k_max, n_max):
    auto = k_max is None
    k = 32 if auto else int(k_max)
    while True:
        probs = build(k)
        deficit = np.clip(1.0 - probs.sum(axis=1), 0.0, None)
        if not auto or deficit.max(initial=0.0) <= GROW_TOL or k >= K_MAX_CAP:
            return probs, deficit
        k *= 2


def _finish(stat, law, probs, deficit):
    warnings = []
    if deficit.max(initial=0.0) > MASS_TOL:
        worst = int(np.argmax(deficit))
        warnings.append(f"truncated: mass deficit {deficit[worst]:.3g} at n={worst}")
    return PmfTable(stat, str(law), probs, deficit, warnings)


def pmf_L(law: WLaw, n_max: int, k_max: Optional[int] = None) -> PmfTable:
    """Law of the number of empty boxes L_n within the occupancy range.

    Uses L_n = L_{Q*_n(1)} + 1{Q*_n(1) = n}; the self-loop term only refers to
    P{L_n = k - 1}, so each row is a first-order recursion in k.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")

    def build(k):
        P = np.zeros((n_max + 1, k + 1))
        P[0, 0] = 1.0
        for n in range(1, n_max + 1):
            q = _qstar(law, n)
            P[n] = signal.lfilter([1.0], [1.0, -q[n]], q[:n] @ P[:n])
        return P

    return _finish("L", law, *_grow(build, k_max, n_max))


def pmf_K(law: WLaw, n_max: int) -> PmfTable:
    """Law of the number of occupied boxes, from K_n = K_{Q_n(1)} + 1."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    P = np.zeros((n_max + 1, n_max + 1))
    P[0, 0] = 1.0
    for n in range(1, n_max + 1):
        P[n, 1:] = _q(law, n) @ P[:n, :-1]
    deficit = np.clip(1.0 - P.sum(axis=1), 0.0, None)
    return _finish("K", law, P, deficit)


def pmf_M(law: WLaw, n_max: int, k_max: Optional[int] = None) -> PmfTable:
    """Law of the occupancy range, from M_n = M_{Q*_n(1)} + 1."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")

    def build(k):
        P = np.zeros((n_max + 1, k + 1))
        P[0, 0] = 1.0
        for n in range(1, n_max + 1):
            q = _qstar(law, n)
            base = np.zeros(k + 1)
            base[1:] = q[:n] @ P[:n, :-1]
            P[n] = signal.lfilter([1.0], [1.0, -q[n]], base)
        return P

    return _finish("M", law, *_grow(build, k_max, n_max))


def potential_table(law: WLaw, n_max: int) -> np.ndarray:
    """Lower-triangular table G[n, m] = g(n, m), the probability that the chain
    Q_n ever visits m."""
    G = np.zeros((n_max + 1, n_max + 1))
    G[0, 0] = 1.0
    for n in range(1, n_max + 1):
        G[n, :n] = _q(law, n) @ G[:n, :n]
        G[n, n] = 1.0
    return G


@lru_cache(maxsize=64)
def _potential_row(law: WLaw, n: int) -> np.ndarray:
    h = np.zeros(n + 1)
    h[n] = 1.0
    for j in range(n, 0, -1):
        if h[j]:
            h[:j] += h[j] * _q(law, j)
    h.setflags(write=False)
    return h


def potential_row(law: WLaw, n: int) -> np.ndarray:
    """g(n, m) for m = 0..n, by pushing visit probabilities down from n."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return _potential_row(law, int(n))


def potential_g(law: WLaw, n: int, m: int) -> float:
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    return float(potential_row(law, n)[m])


def pmf_Z(law: WLaw, n: int) -> np.ndarray:
    """P{Z_n = m} for m = 0..n (index 0 carries zero mass)."""
    if n < 1:
        raise ValueError("pmf_Z needs n >= 1")
    h = potential_row(law, n)
    absorb = np.array([0.0] + [_q(law, m)[0] for m in range(1, n + 1)])
    p = h * absorb
    p[0] = 0.0
    dev = abs(p.sum() - 1.0)
    if dev > 1e-6:
        raise ConsistencyError(f"pmf_Z sums to {p.sum():.12g}", achieved=dev)
    return p


def pmf_Z_table(law: WLaw, n_max: int) -> PmfTable:
    """Rows P{Z_n = m}, n = 0..n_max, from the potential table (Z_0 = 0)."""
    G = potential_table(law, n_max)
    absorb = np.array([0.0] + [_q(law, m)[0] for m in range(1, n_max + 1)])
    P = G * absorb[None, :]
    P[0, 0] = 1.0
    deficit = np.abs(1.0 - P.sum(axis=1))
    if deficit.max(initial=0.0) > 1e-6:
        worst = int(np.argmax(deficit))
        raise ConsistencyError(f"Z row {worst} sums to {P[worst].sum():.12g}",
                               achieved=float(deficit[worst]))
    return PmfTable("Z", str(law), P, np.zeros(n_max + 1))


# -- means ----------------------------------------------------------------

def _rational_moments(law, n):
    params = law.rational_params() if isinstance(law, Beta) else None
    if params is None:
        return None
    a, b = params
    ew, e1w = [Fraction(1)], [Fraction(1)]
    for i in range(n):
        ew.append(ew[-1] * (a + i) / (a + b + i))
        e1w.append(e1w[-1] * (b + i) / (a + b + i))
    return ew, e1w


@lru_cache(maxsize=64)
def _precise_moments(law, n):
    # the alternating sum amplifies moment errors by up to C(n, n/2)
    if isinstance(law, Beta):
        return law.power_moments(n)
    ew, e1w = [1.0], [1.0]
    for k in range(1, n + 1):
        ew.append(law.expect(lambda lw, l1w: math.exp(_xmul(k, lw)), epsabs=1e-18, epsrel=1e-14))
        e1w.append(law.expect(lambda lw, l1w: math.exp(_xmul(k, l1w)), epsabs=1e-18, epsrel=1e-14))
    return ew, e1w


def mean_L_explicit(law: WLaw, n: int, precision: str = "auto") -> float:
    """E L_n from the alternating binomial sum.

    ``precision`` is ``"rational"`` (exact, Beta laws with rational
    parameters), ``"double"`` (only for n <= 30; the sum cancels
    catastrophically beyond that) or ``"auto"``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if precision not in ("auto", "rational", "double"):
        raise ValueError(f"unknown precision {precision!r}")
    if precision in ("auto", "rational"):
        mom = _rational_moments(law, n)
        if mom is not None:
            ew, e1w = mom
            total = sum((-1) ** (k + 1) * math.comb(n, k) * (1 - e1w[k]) / (1 - ew[k])
                        for k in range(1, n + 1))
            return float(total)
        if precision == "rational":
            raise PrecisionError(f"{law} has no exact rational moments")
    if n > DOUBLE_N_MAX:
        raise PrecisionError(
            f"double-precision alternating sum is unreliable for n > {DOUBLE_N_MAX} "
            f"(terms of size C(n, n/2) cancel); use a law with rational moments")
    ew, e1w = _precise_moments(law, n)
    terms = [(-1) ** (k + 1) * math.comb(n, k) * (1 - e1w[k]) / (1 - ew[k])
             for k in range(1, n + 1)]
    return math.fsum(terms)


def s_ratio(law: WLaw, n: int) -> float:
    """E W^n / E (1 - W)^n, evaluated from log-moments."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(law.log_mixed_moment(n, 0) - law.log_mixed_moment(0, n))


def mean_L_via_Z(law: WLaw, n: int) -> float:
    """E L_n as the mean of s_{Z_n}."""
    pz = pmf_Z(law, n)
    lw, l1w = law.log_power_moments(n)
    s = np.exp(lw[1:] - l1w[1:])
    return float(np.dot(pz[1:], s))


class PoissonisedMean(NamedTuple):
    value: float
    method: str


def _series_terms_exact(law, t):
    mom_n = int(3 * t + 60)
    mom = _rational_moments(law, mom_n)
    if mom is None:
        return None
    ew, e1w = mom
    tf = Fraction(t)
    total = Fraction(0)
    term = Fraction(1)
    for k in range(1, mom_n + 1):
        term = term * tf / k
        total += (-1) ** (k + 1) * term * (1 - e1w[k]) / (1 - ew[k])
        if k > 2 * t and term < Fraction(1, 10 ** 30):
            break
    return float(total)


def _series_double(law, t):
    kmax = int(3 * t + 60)
    ew, e1w = law.power_moments(kmax)
    k = np.arange(1, kmax + 1)
    logw = k * math.log(t) - special.gammaln(k + 1)
    mag = np.exp(logw)
    terms = np.where(k % 2 == 1, 1.0, -1.0) * mag * (1 - e1w[1:]) / (1 - ew[1:])
    # absolute moment accuracy ~1e-12 for quadrature laws, ~1e-15 for Beta
    rel = 1e-15 if isinstance(law, Beta) else 1e-12
    return math.fsum(terms), float(mag.max() * rel * kmax)


def _renewal_function(law, x_max, step):
    xs = np.arange(0.0, x_max + step / 2, step)
    S = np.array([law.survival_log_w(x) for x in xs])
    f = -np.diff(S)  # f[j-1] = P{(j-1) step < X <= j step}
    # theta: conditional position of X inside each cell, as a fraction of step
    cell_int = np.array([_quad(law.survival_log_w, xs[j], xs[j + 1])
                         for j in range(xs.size - 1)])
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(f > 0, (cell_int - step * S[1:]) / (step * f), 0.5)
    theta = np.clip(theta, 0.0, 1.0)
    near, far = f * (1.0 - theta), f * theta  # weights of U(x_i - x_{j-1}), U(x_i - x_j)
    N = xs.size
    U = np.empty(N)
    U[0] = 1.0
    for i in range(1, N):
        # U(x_i) = 1 + sum_j E[U(x_i - X); X in cell j], U linear on each cell;
        # the j = 1 near term contains U(x_i) itself
        j = np.arange(2, i + 1)
        acc = far[0] * U[i - 1]
        if j.size:
            acc += np.dot(near[j - 1], U[i - j + 1]) + np.dot(far[j - 1], U[i - j])
        U[i] = (1.0 + acc) / (1.0 - near[0])
    return xs, U


def _integral_path(law, t, step=None):
    prof = law.profile()

    def h(x):
        s = t * math.exp(-x)
        return law.phi(s) - math.exp(-s)

    if isinstance(law, Beta) and law.b == 1:
        # renewal measure is an atom at 0 plus Lebesgue measure times theta
        x_hi = math.log(t) + 60.0
        return h(0.0) + law.a * _quad(h, 0.0, x_hi, points=[math.log(t)] if t > 1 else None)
    if not prof.mu_finite:
        raise CapabilityError("integral path needs a finite mu for the Blackwell tail")
    x_hi = max(math.log(t), 0.0) + 40.0

    def stieltjes(step):
        xs, U = _renewal_function(law, x_hi, step)
        s = t * np.exp(-xs)
        hv = law.phi_many(s) - np.exp(-s)
        return hv[0] * U[0] + np.dot(0.5 * (hv[1:] + hv[:-1]), np.diff(U))

    step = step or 0.04
    # the discretisation order depends on how singular the law of |log W| is
    # at 0, so it is estimated from three levels before extrapolating
    i1, i2, i3 = stieltjes(step), stieltjes(step / 2), stieltjes(step / 4)
    d1, d2 = i2 - i1, i3 - i2
    body = i3
    if abs(d2) > 1e-12 and 1.5 < d1 / d2 < 8.0:
        body = i3 + d2 / (d1 / d2 - 1.0)
    tail = _quad(h, x_hi, x_hi + 60.0) / prof.mu
    return float(body + tail)


def mean_L_poissonised(law: WLaw, t: float, method: str = "auto",
                       tol: float = 1e-8) -> PoissonisedMean:
    """E L_{Pi_t} for a Poisson(t) number of balls.

    ``method`` is ``"series"``, ``"integral"`` or ``"auto"``: the alternating
    series is used for t <= 30 when its cancellation error is below ``tol``
    (always, for rational Beta laws evaluated exactly), otherwise the
    renewal-measure integral.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if method not in ("auto", "series", "integral"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "series") and (t <= 30 or method == "series"):
        exact = _series_terms_exact(law, t)
        if exact is not None:
            return PoissonisedMean(exact, "series-rational")
        val, err = _series_double(law, t)
        if err <= tol:
            return PoissonisedMean(val, "series-double")
        if method == "series":
            raise PrecisionError(f"series cancellation error {err:.2g} exceeds {tol:g}",
                                 achieved=err)
    try:
        return PoissonisedMean(_integral_path(law, t), "integral")
    except NumericError as exc:
        raise NumericError(f"both evaluation paths failed at t={t}: {exc}") from exc


def mean_L_asymptotic_iii(law: WLaw, n: float) -> float:
    """(1/mu) * integral over [1, n] of phi(y)/y dy: the growth of E L_n when
    mu is finite and nu infinite."""
    prof = law.profile()
    if not prof.mu_finite or prof.nu_finite:
        raise CapabilityError(
            "this asymptotic form needs mu < inf and nu = inf; "
            f"got mu={prof.mu}, nu={prof.nu}")
    if n <= 1:
        return 0.0
    val = _quad(lambda s: law.phi(math.exp(s)), 0.0, math.log(n), epsabs=1e-10, epsrel=1e-8)
    return val / prof.mu
