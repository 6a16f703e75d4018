"""Reference limit laws and normalising constants."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate, interpolate, optimize, special, stats

from .errors import CapabilityError, LawError, NumericError
from .laws import QUAD_LIMIT, WLaw, _quad

__all__ = [
    "LimitLawHandle", "Normal", "StableAlpha", "OneStable", "MittagLeffler",
    "MixedPoissonL", "ZLimit", "ArcsineBeta", "Geometric", "GeometricHalf",
    "Normalization", "stable_cdf", "one_stable_cdf", "mittag_leffler_moment",
    "mittag_leffler_sample", "mittag_leffler_cdf", "pgf_L_infinity",
    "pmf_L_infinity", "mean_L_infinity", "pmf_Z_limit",
    "survival_L_infinity_series", "SeriesValue", "normalization", "g_limit",
    "khat_mean", "parse_dist",
]

GP_TOL = 1e-9


# -- Gil-Pelaez inversions --------------------------------------------------

def _quad_checked(f, lo, hi, tol, **kw):
    with np.errstate(all="ignore"):
        val, err, *rest = integrate.quad(f, lo, hi, epsabs=tol, epsrel=0.0,
                                         limit=4000, full_output=True, **kw)
    if len(rest) > 1 and err > 100 * tol:
        raise NumericError(f"inversion integral failed: {rest[1]}", achieved=err)
    return val, err


def _stable_consts(alpha):
    g = special.gamma(1.0 - alpha)
    return g * math.cos(math.pi * alpha / 2), g * math.sin(math.pi * alpha / 2)


def stable_cdf(alpha: float, x: float, tol: float = GP_TOL) -> float:
    """CDF of the alpha-stable law with characteristic function
    exp{-|t|^a Gamma(1-a) (cos(pi a/2) + i sin(pi a/2) sgn t)}, 1 < a < 2."""
    if not 1.0 < alpha < 2.0:
        raise LawError("stable_cdf needs alpha in (1, 2)")
    A, B = _stable_consts(alpha)
    # tail of the integral is below exp(-A T^a) / (a A T^a)
    T = (max(-math.log(tol), 1.0) + 5.0) / A
    T = T ** (1.0 / alpha)

    def f(t):
        return math.exp(-A * t ** alpha) * math.sin(t * x + B * t ** alpha) / t

    def graded(hi, budget):
        # the t^(a-1) term at 0 defeats the quadrature error estimate on one panel
        edges = np.r_[0.0, np.geomspace(1e-6 * hi, hi, 7)]
        return sum(_quad_checked(f, lo, up, budget / 7)[0] for lo, up in zip(edges[:-1], edges[1:]))

    if abs(x) * T < 400:
        val = graded(T, tol)
    else:
        t0 = min(T, 1.0 / abs(x))
        v0 = graded(t0, tol / 3)
        fs = lambda t: math.exp(-A * t ** alpha) * math.cos(B * t ** alpha) / t
        fc = lambda t: math.exp(-A * t ** alpha) * math.sin(B * t ** alpha) / t
        v1, _ = _quad_checked(fs, t0, T, tol / 3, weight="sin", wvar=x)
        v2, _ = _quad_checked(fc, t0, T, tol / 3, weight="cos", wvar=x)
        val = v0 + v1 + v2
    return float(min(1.0, max(0.0, 0.5 + val / math.pi)))


def one_stable_cdf(x: float, tol: float = GP_TOL) -> float:
    """CDF of the 1-stable law with characteristic function
    exp{-|t| (pi/2 - i log|t| sgn t)}."""
    eps = 1e-7
    # near 0 the integrand is log t - x + O(t log^2 t)
    head = eps * (math.log(eps) - 1.0) - x * eps
    T = (-math.log(tol) + 5.0) * 2.0 / math.pi

    def f(t):
        return math.exp(-0.5 * math.pi * t) * math.sin(t * math.log(t) - t * x) / t

    if abs(x) <= 20:
        # graded panels near the logarithmic singularity, then unit panels
        edges = np.concatenate([np.geomspace(eps, 1.0, 8), np.arange(2.0, T, 1.0), [T]])
        val = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            val += _quad_checked(f, lo, hi, tol / len(edges))[0]
    else:
        # sin(t log t - t x) split into sin/cos weights in x, smooth beyond t0
        t0 = 1.0 / abs(x)
        edges = np.geomspace(eps, t0, 8)
        val = sum(_quad_checked(f, lo, hi, tol / 20)[0] for lo, hi in zip(edges[:-1], edges[1:]))
        fa = lambda t: math.exp(-0.5 * math.pi * t) * math.sin(t * math.log(t)) / t
        fb = lambda t: math.exp(-0.5 * math.pi * t) * math.cos(t * math.log(t)) / t
        val += _quad_checked(fa, t0, T, tol / 4, weight="cos", wvar=x)[0]
        val -= _quad_checked(fb, t0, T, tol / 4, weight="sin", wvar=x)[0]
    return float(min(1.0, max(0.0, 0.5 - (head + val) / math.pi)))


# -- Mittag-Leffler ---------------------------------------------------------

def mittag_leffler_moment(alpha: float, k: int) -> float:
    """k-th moment k! / (Gamma(1-a)^k Gamma(1+a k))."""
    if not 0.0 <= alpha < 1.0:
        raise LawError("Mittag-Leffler index must lie in [0, 1)")
    if k < 1 or int(k) != k:
        raise LawError("moment order must be a positive integer")
    return math.exp(special.gammaln(k + 1) - k * special.gammaln(1 - alpha)
                    - special.gammaln(1 + alpha * k))


def _kanter_a(alpha, u):
    return ((np.sin(alpha * u) / np.sin(u)) ** (1.0 / (1.0 - alpha))
            * np.sin((1.0 - alpha) * u) / np.sin(alpha * u))


def mittag_leffler_sample(alpha: float, rng, size=None):
    """S^-a / Gamma(1-a) with S positive a-stable, E exp(-l S) = exp(-l^a)."""
    if not 0.0 < alpha < 1.0:
        raise LawError("Mittag-Leffler sampling needs alpha in (0, 1)")
    u = math.pi * (rng.random(size) + 2.0 ** -54)
    e = rng.standard_exponential(size)
    # Kanter: S = (A(U) / E)^((1-a)/a), hence S^-a = (E / A(U))^(1-a)
    out = (e / _kanter_a(alpha, u)) ** (1.0 - alpha) / special.gamma(1.0 - alpha)
    return out if np.ndim(out) else float(out)


def _kanter_a_reflected(alpha, w):
    # A(pi - w) without forming pi - w, which loses w for small w
    sa = np.sin(alpha * (math.pi - w))
    return (sa / np.sin(w)) ** (1.0 / (1.0 - alpha)) * np.sin((1.0 - alpha) * (math.pi - w)) / sa


_ML_S_LO = -80.0


def _ml_integrand(alpha, z):
    # u = pi - exp(s), so the spike of A at u = pi spreads over a log scale
    def f(s):
        w = np.exp(s)
        with np.errstate(over="ignore"):
            return -np.expm1(-_kanter_a_reflected(alpha, w) * z) * w
    return f


def mittag_leffler_cdf(alpha: float, x: float) -> float:
    if not 0.0 <= alpha < 1.0:
        raise LawError("Mittag-Leffler index must lie in [0, 1)")
    if x <= 0:
        return 0.0
    if alpha == 0.0:
        return -math.expm1(-x)
    z = (x * special.gamma(1.0 - alpha)) ** (1.0 / (1.0 - alpha))
    f = _ml_integrand(alpha, z)
    hi = math.log(math.pi)
    edges = [_ML_S_LO, hi]
    g = lambda s: math.log(float(_kanter_a_reflected(alpha, math.exp(s)))) + math.log(z)
    # A decreases in s; split where A z = 1
    with np.errstate(over="ignore", divide="ignore"):
        if g(hi - 1e-12) < 0.0 < g(_ML_S_LO):
            edges.insert(1, optimize.brentq(g, _ML_S_LO, hi - 1e-12, xtol=1e-12))
    val = sum(_quad(f, lo, up, epsabs=1e-14, epsrel=1e-11) for lo, up in zip(edges[:-1], edges[1:]))
    return float(min(1.0, max(0.0, val / math.pi)))


# -- empty boxes and last box ------------------------------------------------

def pgf_L_infinity(theta: float, s: float) -> float:
    if not theta > 0:
        raise LawError("theta must be positive")
    if not 0.0 <= s <= 1.0:
        raise LawError("s must lie in [0, 1]")
    return math.exp(special.gammaln(1 + theta) + special.gammaln(1 + theta - theta * s)
                    - special.gammaln(1 + 2 * theta - theta * s))


def mean_L_infinity(theta: float) -> float:
    """Derivative of the generating function at s = 1."""
    return theta * float(special.digamma(1 + theta) - special.digamma(1.0))


@lru_cache(maxsize=4096)
def pmf_L_infinity(theta: float, k: int) -> float:
    """Mixed Poisson probability with intensity theta |log(1 - W)|, W ~ beta(theta, 1).

    The intensity y has density (1 - e^{-y/theta})^(theta-1) e^{-y/theta}.
    """
    if not theta > 0:
        raise LawError("theta must be positive")
    if k < 0 or int(k) != k:
        raise LawError("k must be a nonnegative integer")
    lg = special.gammaln(k + 1)

    def f(y):
        if y <= 0:
            return 0.0
        return math.exp(k * math.log(y) - y - lg - y / theta
                        + (theta - 1) * math.log(-math.expm1(-y / theta)))

    mode = max(float(k), 1e-3)
    hi = mode + 60.0 + 12.0 * math.sqrt(mode)
    return _quad(f, 0.0, hi, epsabs=1e-14, epsrel=1e-11,
                 points=[p for p in (1e-6, 1e-3, 1.0, mode) if p < hi])


def pmf_Z_limit(law: WLaw, k: int) -> float:
    """P{Z = k} = E (1-W)^k / (mu k)."""
    mu = law.profile().mu
    if not math.isfinite(mu):
        raise CapabilityError("the last-box limit needs a finite mu")
    if k < 1:
        raise LawError("k must be a positive integer")
    return math.exp(law.log_mixed_moment(0, k)) / (mu * k)


class SeriesValue(NamedTuple):
    value: float
    bound: float
    terms: int
    widened: bool


def survival_L_infinity_series(law: WLaw, i: int, pmf_L_table=None, J: int = 200,
                               tol: float = 1e-2) -> SeriesValue:
    """P{L_inf >= i} = (1/mu) sum_j (E W^j / j) P{L_j = i - 1}, truncated at J.

    The remainder is bounded by (nu - sum_{j<=J} E W^j / j) / mu, since each
    probability is at most 1 and nu = sum_j E W^j / j.  ``widened`` flags a
    bound above ``tol``.
    """
    prof = law.profile()
    if not (prof.mu_finite and prof.nu_finite):
        raise CapabilityError("the series needs finite mu and nu")
    if i < 1:
        raise LawError("i must be a positive integer")
    if pmf_L_table is None:
        from .exact import pmf_L
        pmf_L_table = pmf_L(law, J)
    J = min(J, pmf_L_table.n_max)
    col = np.zeros(J + 1)
    if i - 1 <= pmf_L_table.k_max:
        col = pmf_L_table.probs[: J + 1, i - 1]
    ew = np.exp(law.log_power_moments(J)[0])
    j = np.arange(1, J + 1)
    w = ew[1:] / j
    value = math.fsum(w * col[1:]) / prof.mu
    bound = max(prof.nu - math.fsum(w), 0.0) / prof.mu
    return SeriesValue(value, bound, J, bound > tol)


# -- normalisation ---------------------------------------------------------

@dataclass(frozen=True)
class Normalization:
    a: float
    b: float
    case: str
    statistic: str = "M"
    notes: str = ""

    def standardize(self, x):
        return (np.asarray(x, dtype=float) - self.b) / self.a

    def limit(self, law: Optional[WLaw] = None) -> "LimitLawHandle":
        prof = law.profile() if law is not None else None
        if self.case in ("a", "b"):
            return Normal()
        if self.case == "c":
            return StableAlpha(prof.tail_alpha)
        if self.case == "d":
            return OneStable()
        return MittagLeffler(prof.tail_alpha)


def classify(profile) -> str:
    """Limit regime of M_n from the moment profile alone."""
    if profile.sigma2_finite:
        return "a"
    a = profile.tail_alpha
    if a is None:
        raise CapabilityError("sigma^2 is infinite and no tail index is known")
    if a == 2:
        return "b"
    if 1 < a < 2:
        return "c"
    if a == 1:
        return "d"
    if 0 <= a < 1:
        return "e"
    raise CapabilityError(f"tail index {a} outside [0, 2]")


def _centering_M(law, case, x):
    prof = law.profile()
    if case in ("a", "b", "c"):
        return x / prof.mu
    if case == "d":
        m = law.m_function
        r = _r_function(prof)
        return x / m(x / r(m(x)))
    return 0.0


def _r_function(prof):
    # x P{|log W| > r(x)} -> 1 with P{|log W| > y} ~ L / y
    return lambda x: prof.tail_const * x


def _scale(law, case, x):
    prof = law.profile()
    if case == "a":
        return math.sqrt(prof.sigma2 * x / prof.mu ** 3)
    if case == "b":
        return prof.mu ** -1.5 * law.norming_c(x)
    if case == "c":
        a = prof.tail_alpha
        return prof.mu ** (-(a + 1) / a) * law.norming_c(x)
    if case == "d":
        if prof.tail_const is None:
            raise CapabilityError("case (d) needs the tail constant of |log W|")
        m = law.m_function
        r = _r_function(prof)
        return r(x / m(x)) / m(x)
    a = prof.tail_alpha
    slowly = prof.tail_const if prof.tail_const is not None else x ** a * law.survival_log_w(x)
    return x ** a / slowly


def normalization(law: WLaw, log_n: float, statistic: str = "M") -> Normalization:
    """Constants (a_n, b_n) such that (X_n - b_n)/a_n has a proper limit."""
    if statistic not in ("M", "K"):
        raise ValueError("statistic must be 'M' or 'K'")
    if not log_n > 0:
        raise ValueError("log_n must be positive")
    prof = law.profile()
    case = classify(prof)
    a = _scale(law, case, log_n)
    b = _centering_M(law, case, log_n)
    notes = ""
    if case == "d":
        notes = "r(x) = L * x with P{|log W| > y} ~ L / y"
    if statistic == "K" and case != "e":
        b = _centering_K(law, case, log_n)
        notes = (notes + "; " if notes else "") + "K centering: convolution with |log(1-W)|"
    if not a > 0:
        raise NumericError(f"non-positive scale {a}")
    return Normalization(float(a), float(b), case, statistic, notes)


def _centering_K(law, case, x):
    prof = law.profile()
    if case in ("a", "b", "c"):
        # integral of (x - y)/mu against dF(y) equals (1/mu) * integral of F over [0, x]
        F = lambda y: 1.0 - law.survival_log_1mw(y)
        pts = [p for p in (1.0, 10.0, 100.0) if p < x]
        return _quad(F, 0.0, x, epsabs=1e-10, epsrel=1e-12, points=pts or None) / prof.mu

    def integrand(lw, l1w):
        y = -l1w
        return _centering_M(law, case, x - y) if y < x - 1e-9 else 0.0

    return law.expect(integrand, epsabs=1e-10, epsrel=1e-10)


def g_limit(law: WLaw, m: int) -> float:
    """lim g(n, m) = (1 - E W^m) / (mu m), zero when mu is infinite."""
    if m < 1:
        raise LawError("m must be a positive integer")
    mu = law.profile().mu
    if not math.isfinite(mu):
        return 0.0
    return -math.expm1(law.log_mixed_moment(m, 0)) / (mu * m)


def khat_mean(law: WLaw, r: int) -> float:
    """E K^_r = 1 / (r mu) for the limit partition."""
    if r < 1:
        raise LawError("r must be a positive integer")
    mu = law.profile().mu
    return 0.0 if not math.isfinite(mu) else 1.0 / (r * mu)


# -- handles ------------------------------------------------------------------

@dataclass(frozen=True)
class LimitLawHandle:
    """Evaluable limit law.  Continuous handles implement ``cdf``; discrete
    ones implement ``pmf`` (``cdf`` is then the cumulative sum)."""

    kind: str = field(init=False, default="")
    discrete: bool = field(init=False, default=False)
    tol: float = field(default=GP_TOL, compare=False, kw_only=True)
    tabulated = False  # large arrays are served by an interpolation table

    def cdf(self, x):
        xs = np.asarray(x, dtype=float)
        if self.discrete:
            flat = np.floor(xs).ravel()
            kmax = int(max(flat.max(initial=0), 0))
            cum = np.cumsum([self.pmf(k) for k in range(kmax + 1)])
            idx = np.clip(flat.astype(int), -1, kmax)
            out = np.where(idx < 0, 0.0, cum[np.maximum(idx, 0)])
        else:
            out = np.array([self._cdf_scalar(v) for v in xs.ravel()])
        out = out.reshape(xs.shape)
        return out if out.ndim else float(out)

    def _cdf_scalar(self, x):
        raise NotImplementedError

    def pmf(self, k):
        raise CapabilityError(f"{self.kind} is not discrete")

    def moment(self, k: int) -> float:
        raise CapabilityError(f"no closed-form moments for {self.kind}")

    def mean(self) -> float:
        return self.moment(1)

    def tabulate(self, grid):
        """Rows (x or k, value, tolerance): pmf for discrete laws, cdf otherwise."""
        grid = np.asarray(grid)
        tol = self.tol
        if self.discrete:
            vals = [self.pmf(int(k)) for k in grid]
        else:
            vals = self.cdf(grid)
            if self.tabulated and grid.size >= TABLE_MIN:
                tol += TABLE_TOL
        return [(g.item(), float(v), tol) for g, v in zip(grid, np.atleast_1d(vals))]

    def to_csv(self, path, grid):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k" if self.discrete else "x", "pmf" if self.discrete else "cdf",
                        "tolerance"])
            w.writerows(self.tabulate(grid))

    def __str__(self):
        return self.kind


@dataclass(frozen=True)
class Normal(LimitLawHandle):
    def __post_init__(self):
        object.__setattr__(self, "kind", "normal")

    def cdf(self, x):
        out = stats.norm.cdf(x)
        return out if np.ndim(out) else float(out)

    def moment(self, k):
        return 0.0 if k % 2 else float(math.prod(range(k - 1, 0, -2)))

    def sample(self, rng, size=None):
        return rng.standard_normal(size)


TABLE_MIN = 50  # arrays at least this long are served from the table
TABLE_TOL = 1e-8  # interpolation error bound of the table, on top of tol


class _Tabulated:
    """Monotone cubic interpolant of an expensive cdf: piecewise uniform in x
    on the bulk and in (log|x|, log F) on the power-law left tail.  Points off
    the grid are evaluated directly."""

    SEAM = -40.0

    def __init__(self, func):
        tail_x = -np.geomspace(1e4, -self.SEAM, 240)
        bulk_x = np.r_[np.linspace(self.SEAM, 40.0, 6401), np.linspace(40.25, 80.0, 160)]
        tail_y = np.array([func(v) for v in tail_x])
        bulk_y = np.maximum.accumulate(np.array([func(v) for v in bulk_x]))
        tail_y = np.minimum(np.maximum.accumulate(tail_y), bulk_y[0])
        self.func, self.lo, self.hi = func, tail_x[0], bulk_x[-1]
        self.f_lo, self.f_hi = tail_y[0], bulk_y[-1]
        self.tail = interpolate.PchipInterpolator(np.log(-tail_x[::-1]), np.log(tail_y[::-1]))
        self.bulk = interpolate.PchipInterpolator(bulk_x, bulk_y)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        in_tail = (x >= self.lo) & (x < self.SEAM)
        in_bulk = (x >= self.SEAM) & (x <= self.hi)
        out[in_tail] = np.exp(self.tail(np.log(-x[in_tail])))
        out[in_bulk] = self.bulk(x[in_bulk])
        # off the grid: direct values, clamped to keep the cdf monotone across the ends
        for idx in zip(*np.nonzero(~(in_tail | in_bulk))):
            v = self.func(float(x[idx]))
            out[idx] = min(v, self.f_lo) if x[idx] < self.lo else max(v, self.f_hi)
        return out


@lru_cache(maxsize=16)
def _stable_table(alpha, tol):
    return _Tabulated(lambda v: stable_cdf(alpha, v, tol))


@lru_cache(maxsize=4)
def _one_stable_table(tol):
    return _Tabulated(lambda v: one_stable_cdf(v, tol))


@dataclass(frozen=True)
class StableAlpha(LimitLawHandle):
    alpha: float = 1.5
    tabulated = True

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise LawError("stable index must lie in (1, 2)")
        object.__setattr__(self, "kind", f"stable:{self.alpha:g}")

    def _cdf_scalar(self, x):
        return stable_cdf(self.alpha, x, self.tol)

    def cdf(self, x):
        """Vectorised; large arrays go through a cached monotone interpolant."""
        if np.size(x) < TABLE_MIN:
            return super().cdf(x)
        out = _stable_table(self.alpha, self.tol)(x)
        return out if out.ndim else float(out)

    def moment(self, k):
        if k == 1:
            return 0.0
        raise CapabilityError("only the first moment of the stable law is finite")


@dataclass(frozen=True)
class OneStable(LimitLawHandle):
    tabulated = True
    def __post_init__(self):
        object.__setattr__(self, "kind", "one-stable")

    def _cdf_scalar(self, x):
        return one_stable_cdf(x, self.tol)

    def cdf(self, x):
        if np.size(x) < TABLE_MIN:
            return super().cdf(x)
        out = _one_stable_table(self.tol)(x)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class MittagLeffler(LimitLawHandle):
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise LawError("Mittag-Leffler index must lie in [0, 1)")
        object.__setattr__(self, "kind", f"ml:{self.alpha:g}")

    def _cdf_scalar(self, x):
        return mittag_leffler_cdf(self.alpha, x)

    def cdf(self, x):
        if np.size(x) < TABLE_MIN or self.alpha == 0.0:
            return super().cdf(x)
        xs = np.asarray(x, dtype=float)
        flat = xs.ravel()
        out = np.zeros(flat.size)
        pos = flat > 0
        z = (flat[pos] * special.gamma(1.0 - self.alpha)) ** (1.0 / (1.0 - self.alpha))
        val = integrate.quad_vec(_ml_integrand(self.alpha, z), _ML_S_LO, math.log(math.pi),
                                 epsabs=1e-13, epsrel=1e-10, limit=QUAD_LIMIT)[0]
        tail = val / math.pi
        out[pos] = np.clip(tail, 0.0, 1.0)
        return out.reshape(xs.shape)

    def moment(self, k):
        return mittag_leffler_moment(self.alpha, k)

    def sample(self, rng, size=None):
        if self.alpha == 0.0:
            return rng.standard_exponential(size)
        return mittag_leffler_sample(self.alpha, rng, size)


@dataclass(frozen=True)
class ArcsineBeta(LimitLawHandle):
    """Limit of log Z_n / log n: beta(1 - alpha, alpha), delta at 1 for alpha = 0."""

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise LawError("index must lie in [0, 1)")
        object.__setattr__(self, "kind", f"arcsine:{self.alpha:g}")

    def cdf(self, x):
        if self.alpha == 0.0:
            out = (np.asarray(x, dtype=float) >= 1.0).astype(float)
        else:
            out = stats.beta.cdf(x, 1.0 - self.alpha, self.alpha)
        return out if np.ndim(out) else float(out)

    def moment(self, k):
        if self.alpha == 0.0:
            return 1.0
        return float(stats.beta.moment(k, 1.0 - self.alpha, self.alpha))


@dataclass(frozen=True)
class Geometric(LimitLawHandle):
    """P{k} = p (1 - p)^k on k = 0, 1, ..."""

    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise LawError("geometric parameter must lie in (0, 1]")
        object.__setattr__(self, "kind", f"geometric:{self.p:g}")
        object.__setattr__(self, "discrete", True)

    def pmf(self, k):
        return 0.0 if k < 0 else self.p * (1.0 - self.p) ** k

    def moment(self, k):
        q = 1.0 - self.p
        if k == 1:
            return q / self.p
        if k == 2:
            return q * (1.0 + q) / self.p ** 2
        raise CapabilityError("moments above 2 not tabulated")


@dataclass(frozen=True)
class GeometricHalf(Geometric):
    """The law of L_n for symmetric W, for every n >= 1."""

    p: float = field(default=0.5, init=False)


@dataclass(frozen=True)
class MixedPoissonL(LimitLawHandle):
    theta: float = 1.0

    def __post_init__(self):
        if not self.theta > 0:
            raise LawError("theta must be positive")
        object.__setattr__(self, "kind", f"mixedpoisson:{self.theta:g}")
        object.__setattr__(self, "discrete", True)

    def pmf(self, k):
        return 0.0 if k < 0 else pmf_L_infinity(float(self.theta), int(k))

    def pgf(self, s):
        return pgf_L_infinity(self.theta, s)

    def moment(self, k):
        if k == 1:
            return mean_L_infinity(self.theta)
        raise CapabilityError("only the mean is available in closed form")


@dataclass(frozen=True)
class ZLimit(LimitLawHandle):
    law: Optional[WLaw] = None

    def __post_init__(self):
        if self.law is None:
            raise LawError("ZLimit needs a law")
        if not self.law.profile().mu_finite:
            raise CapabilityError("the last-box limit needs a finite mu")
        object.__setattr__(self, "kind", f"zlimit:{self.law}")
        object.__setattr__(self, "discrete", True)

    def pmf(self, k):
        return 0.0 if k < 1 else pmf_Z_limit(self.law, int(k))

    def moment(self, k):
        if k == 1:
            # sum_k E(1-W)^k / mu = E (1-W)/W / mu
            return self.law.expect(lambda lw, l1w: math.exp(l1w - lw)) / self.law.profile().mu
        raise CapabilityError("only the mean is available")


def parse_dist(spec: str) -> LimitLawHandle:
    """Handle from a tag such as ``stable:1.5``, ``one-stable``, ``ml:0.5``,
    ``mixedpoisson:1``, ``zlimit:beta(1,1)``, ``arcsine:0.5``, ``normal`` or
    ``geometric``."""
    from .laws import parse_law
    name, _, arg = spec.strip().partition(":")
    name = name.lower()
    try:
        if name == "normal":
            return Normal()
        if name in ("geometric", "geometric-half"):
            return GeometricHalf() if arg in ("", "0.5", "1/2") else Geometric(float(arg))
        if name in ("one-stable", "onestable"):
            return OneStable()
        if name == "stable":
            return StableAlpha(float(arg))
        if name in ("ml", "mittag-leffler"):
            return MittagLeffler(float(arg))
        if name == "mixedpoisson":
            return MixedPoissonL(float(arg))
        if name == "arcsine":
            return ArcsineBeta(float(arg))
        if name == "zlimit":
            return ZLimit(parse_law(arg))
    except ValueError as exc:
        raise LawError(f"bad distribution spec {spec!r}: {exc}") from exc
    raise LawError(f"unknown distribution {spec!r}")
