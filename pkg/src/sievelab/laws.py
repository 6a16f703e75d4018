"""Laws of the stick-breaking factor W and their moment functionals.

Every law is an immutable value object.  Expectations are computed on a
family-specific integration variable chosen so that ``log W`` and
``log(1 - W)`` are both available to full double precision, which matters
for laws that put mass extremely close to 0 or 1.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize, special

from .errors import CapabilityError, LatticeLawError, LawError, NumericError

__all__ = [
    "WLaw",
    "Beta",
    "LogPareto",
    "ExampleGamma",
    "InverseCdf",
    "Dirac",
    "MomentProfile",
    "parse_law",
    "sample_w",
    "mixed_moment",
    "moment_profile",
    "survival_log_w",
    "m_function",
    "norming_c",
    "phi",
]

EPSABS = 1e-12
EPSREL = 1e-10
QUAD_LIMIT = 2000

INF = math.inf


def _quad(f, lo, hi, epsabs=EPSABS, epsrel=EPSREL, points=None):
    """Scalar adaptive Gauss-Kronrod with an explicit failure mode."""
    with np.errstate(all="ignore"):
        kw = {}
        if points is not None and np.isfinite(lo) and np.isfinite(hi):
            kw["points"] = points
        res = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel,
                             limit=QUAD_LIMIT, full_output=1, **kw)
    val, err = res[0], res[1]
    if len(res) > 3 and err > max(epsabs, epsrel * abs(val)) * 100:
        raise NumericError(f"quadrature did not converge: {res[3]}", achieved=err)
    return val


def _xmul(k, logx):
    """k * log x with the convention 0 * log 0 = 0."""
    if np.ndim(k):
        with np.errstate(invalid="ignore"):
            return np.where(k == 0, 0.0, k * logx)
    return 0.0 if k == 0 else k * logx


def _quad_vec(f, lo, hi, epsabs=EPSABS, epsrel=EPSREL):
    with np.errstate(all="ignore"):
        val, err, info = integrate.quad_vec(f, lo, hi, epsabs=epsabs, epsrel=epsrel,
                                            limit=QUAD_LIMIT, full_output=True)
    if not info.success and err > max(epsabs, epsrel * np.max(np.abs(val))) * 100:
        raise NumericError(f"vector quadrature did not converge: {info.message}",
                           achieved=err)
    return val


def _open_uniform(rng, size):
    # values in the open interval (0, 1)
    return rng.random(size) + 2.0 ** -54


def _log1mexp(x):
    """log(1 - exp(-x)) for x >= 0, accurate at both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x > math.log(2.0), np.log1p(-np.exp(-x)), np.log(-np.expm1(-x)))


@dataclass(frozen=True)
class MomentProfile:
    """Logarithmic moments of W together with the tail description of |log W|.

    ``mu = E|log W|``, ``sigma2 = Var(log W)`` and ``nu = E|log(1 - W)|``; each
    may be ``math.inf``.  When |log W| has a regularly varying tail
    ``x**-tail_alpha * tail_const`` the two tail fields are set.
    """

    mu: float
    sigma2: float
    nu: float
    tail_alpha: Optional[float] = None
    tail_const: Optional[float] = None

    def __post_init__(self):
        if math.isfinite(self.mu) and not self.mu > 0:
            raise LawError("finite mu must be positive")
        if math.isfinite(self.sigma2) and not math.isfinite(self.mu):
            raise LawError("finite sigma2 requires finite mu")

    @property
    def mu_finite(self) -> bool:
        return math.isfinite(self.mu)

    @property
    def sigma2_finite(self) -> bool:
        return math.isfinite(self.sigma2)

    @property
    def nu_finite(self) -> bool:
        return math.isfinite(self.nu)


class WLaw:
    """Base class of the distribution of W on (0, 1).

    Subclasses provide the integration variable through ``_grid_logs``,
    ``_grid_weight`` and ``_grid_bounds``, and a joint sampler of
    ``(log W, log(1 - W))``.
    """

    # -- sampling -----------------------------------------------------
    def transform(self, u):
        """Map uniform variates to W (the map used by :meth:`sample`)."""
        raise NotImplementedError

    def sample(self, rng, size=None):
        return self.transform(_open_uniform(rng, size))

    def sample_logs(self, rng, size=None):
        """Joint draw of ``(log W, log(1 - W))`` without forming W itself."""
        w = self.sample(rng, size)
        with np.errstate(divide="ignore"):
            return np.log(w), np.log1p(-w)

    def sample_log_w(self, rng, size=None):
        """Draws of the walk increment |log W|."""
        return -self.sample_logs(rng, size)[0]

    # -- expectations -------------------------------------------------
    def _grid_bounds(self):
        raise NotImplementedError

    def _grid_logs(self, s):
        raise NotImplementedError

    def _grid_weight(self, s):
        raise NotImplementedError

    def expect(self, func: Callable, vector: bool = False,
               epsabs: float = EPSABS, epsrel: float = EPSREL):
        """E func(log W, log(1 - W)) by adaptive quadrature.

        With ``vector=True`` func may return an array and the integral is
        taken componentwise.
        """
        lo, hi = self._grid_bounds()

        def integrand(s):
            lw, l1w = self._grid_logs(s)
            wt = self._grid_weight(s)
            if wt == 0.0:
                return 0.0 * np.asarray(func(-1.0, -1.0), dtype=float)
            return wt * np.asarray(func(lw, l1w), dtype=float)

        if vector:
            return _quad_vec(integrand, lo, hi, epsabs=epsabs, epsrel=epsrel)
        return _quad(lambda s: float(integrand(s)), lo, hi, epsabs=epsabs, epsrel=epsrel)

    def mixed_moment(self, a, b) -> float:
        """E[W**a (1 - W)**b]."""
        if a < 0 or b < 0:
            raise LawError("moment orders must be nonnegative")
        if a == 0 and b == 0:
            return 1.0
        return self.expect(lambda lw, l1w: math.exp(_xmul(a, lw) + _xmul(b, l1w)))

    def log_mixed_moment(self, a, b) -> float:
        if a == 0 and b == 0:
            return 0.0
        return math.log(self.expect(lambda lw, l1w: math.exp(_xmul(a, lw) + _xmul(b, l1w)),
                                    epsabs=0.0))

    def power_moments(self, n: int):
        """Arrays (E W**k, E (1-W)**k) for k = 0..n."""
        return _power_moments(self, int(n))

    def log_power_moments(self, n: int):
        """Arrays (log E W**k, log E (1-W)**k) for k = 0..n, relatively accurate."""
        return _log_power_moments(self, int(n))

    # -- functionals --------------------------------------------------
    def profile(self) -> MomentProfile:
        return _cached_profile(self)

    def _compute_profile(self) -> MomentProfile:
        raise NotImplementedError

    def survival_log_w(self, x: float) -> float:
        """P{|log W| > x}."""
        raise NotImplementedError

    def survival_log_1mw(self, y: float) -> float:
        """P{|log(1 - W)| > y}."""
        raise NotImplementedError

    def m_function(self, x: float) -> float:
        """Truncated mean of |log W|: integral of the survival over [0, x]."""
        if x < 0:
            raise LawError("m_function needs x >= 0")
        if x == 0:
            return 0.0
        return _quad(self.survival_log_w, 0.0, x)

    def phi(self, t: float) -> float:
        """E exp(-t (1 - W))."""
        if t < 0:
            raise LawError("phi needs t >= 0")
        if t == 0:
            return 1.0
        return self.expect(lambda lw, l1w: math.exp(-t * math.exp(l1w)))

    def phi_many(self, ts) -> np.ndarray:
        """phi on an array of t >= 0, by one vector quadrature."""
        ts = np.asarray(ts, dtype=float)
        if np.any(ts < 0):
            raise LawError("phi needs t >= 0")
        return self.expect(lambda lw, l1w: np.exp(-ts * math.exp(l1w)), vector=True)

    def norming_c(self, x: float) -> float:
        raise CapabilityError(
            f"norming function c(x) is available in closed form only for "
            f"LogPareto laws; got {self}")

    def rational_params(self):
        """Exact rational parameters when all moments are rational, else None."""
        return None


def _rational(x, max_den=10 ** 6):
    fr = Fraction(x).limit_denominator(max_den)
    return fr if float(fr) == float(x) else None


@lru_cache(maxsize=256)
def _cached_profile(law: WLaw) -> MomentProfile:
    return law._compute_profile()


@lru_cache(maxsize=256)
def _power_moments(law: WLaw, n: int):
    if isinstance(law, Beta):
        lw, l1w = _log_power_moments(law, n)
        return np.exp(lw), np.exp(l1w)
    ks = np.arange(n + 1, dtype=float)
    both = law.expect(lambda lw, l1w: np.exp(np.concatenate([_xmul(ks, lw), _xmul(ks, l1w)])),
                      vector=True)
    ew, e1w = both[: n + 1], both[n + 1:]
    ew[0] = e1w[0] = 1.0
    return ew, e1w


@lru_cache(maxsize=256)
def _log_power_moments(law: WLaw, n: int):
    if isinstance(law, Beta):
        ks = np.arange(n + 1, dtype=float)
        base = special.betaln(law.a, law.b)
        return (special.betaln(law.a + ks, law.b) - base,
                special.betaln(law.a, law.b + ks) - base)
    lw = np.zeros(n + 1)
    l1w = np.zeros(n + 1)
    for k in range(1, n + 1):
        lw[k] = law.log_mixed_moment(k, 0)
        l1w[k] = law.log_mixed_moment(0, k)
    return lw, l1w


def _check_positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise LawError(f"{name} must be a positive real, got {value!r}")


@dataclass(frozen=True)
class Beta(WLaw):
    """beta(a, b) law with density proportional to x**(a-1) (1-x)**(b-1)."""

    a: float
    b: float

    def __post_init__(self):
        _check_positive("a", self.a)
        _check_positive("b", self.b)

    def __str__(self):
        return f"beta({self.a!r},{self.b!r})"

    def transform(self, u):
        if self.a == 1 and self.b == 1:
            return np.asarray(u, dtype=float) if np.ndim(u) else float(u)
        return special.betaincinv(self.a, self.b, u)

    def sample(self, rng, size=None):
        return rng.beta(self.a, self.b, size)

    def sample_logs(self, rng, size=None):
        if self.b == 1:
            x = rng.exponential(1.0 / self.a, size)
            return -x, _log1mexp(x)
        if self.a == 1:
            y = rng.exponential(1.0 / self.b, size)
            return _log1mexp(y), -y
        ga = rng.standard_gamma(self.a, size)
        gb = rng.standard_gamma(self.b, size)
        with np.errstate(divide="ignore"):
            tot = np.log(ga + gb)
            return np.log(ga) - tot, np.log(gb) - tot

    def _grid_bounds(self):
        return -INF, INF

    def _grid_logs(self, s):
        return special.log_expit(s), special.log_expit(-s)

    def _grid_weight(self, s):
        return math.exp(self.a * special.log_expit(s) + self.b * special.log_expit(-s)
                        - special.betaln(self.a, self.b))

    def mixed_moment(self, a, b):
        if a < 0 or b < 0:
            raise LawError("moment orders must be nonnegative")
        return math.exp(self.log_mixed_moment(a, b))

    def log_mixed_moment(self, a, b):
        return float(special.betaln(a + self.a, b + self.b) - special.betaln(self.a, self.b))

    def _compute_profile(self):
        a, b = self.a, self.b
        return MomentProfile(
            mu=float(special.digamma(a + b) - special.digamma(a)),
            sigma2=float(special.polygamma(1, a) - special.polygamma(1, a + b)),
            nu=float(special.digamma(a + b) - special.digamma(b)),
        )

    def survival_log_w(self, x):
        if x <= 0:
            return 1.0
        return float(special.betainc(self.a, self.b, math.exp(-x)))

    def survival_log_1mw(self, y):
        if y <= 0:
            return 1.0
        return float(special.betainc(self.b, self.a, math.exp(-y)))

    def phi(self, t):
        if t < 0:
            raise LawError("phi needs t >= 0")
        if t == 0:
            return 1.0
        if self.a == 1 and self.b == 1:
            return -math.expm1(-t) / t
        if t <= 50:
            return float(special.hyp1f1(self.b, self.a + self.b, -t))
        return super().phi(t)

    def phi_many(self, ts):
        return np.array([self.phi(float(t)) for t in np.ravel(ts)]).reshape(np.shape(ts))

    def rational_params(self):
        a, b = _rational(self.a), _rational(self.b)
        if a is None or b is None:
            return None
        return a, b


@dataclass(frozen=True)
class LogPareto(WLaw):
    """W = exp(-X) with P{X > x} = min(1, (x/x0)**-alpha)."""

    alpha: float
    x0: float = 1.0

    def __post_init__(self):
        _check_positive("alpha", self.alpha)
        _check_positive("x0", self.x0)
        if self.alpha > 2:
            raise LawError("LogPareto alpha must lie in (0, 2]")

    def __str__(self):
        return f"logpareto({self.alpha!r},{self.x0!r})"

    def transform(self, u):
        u = np.asarray(u, dtype=float)
        out = np.exp(-self.x0 * u ** (-1.0 / self.alpha))
        return out if out.ndim else float(out)

    def sample_logs(self, rng, size=None):
        x = self.x0 * _open_uniform(rng, size) ** (-1.0 / self.alpha)
        return -x, _log1mexp(x)

    def _grid_bounds(self):
        return 0.0, INF

    def _grid_logs(self, s):
        x = self.x0 * math.exp(s) if s < 700 else INF
        return -x, float(_log1mexp(x))

    def _grid_weight(self, s):
        return self.alpha * math.exp(-self.alpha * s)

    def _compute_profile(self):
        a, x0 = self.alpha, self.x0
        mu = a * x0 / (a - 1) if a > 1 else INF
        nu = self.expect(lambda lw, l1w: -l1w)
        return MomentProfile(mu=mu, sigma2=INF, nu=nu, tail_alpha=a, tail_const=x0 ** a)

    def survival_log_w(self, x):
        if x <= self.x0:
            return 1.0
        return (x / self.x0) ** (-self.alpha)

    def survival_log_1mw(self, y):
        if y <= 0:
            return 1.0
        c = -float(_log1mexp(y))  # |log W| below c  <=>  |log(1-W)| above y
        return 0.0 if c <= self.x0 else 1.0 - (c / self.x0) ** (-self.alpha)

    def m_function(self, x):
        if x < 0:
            raise LawError("m_function needs x >= 0")
        a, x0 = self.alpha, self.x0
        if x <= x0:
            return float(x)
        if a == 1:
            return x0 + x0 * math.log(x / x0)
        return x0 + x0 / (1 - a) * ((x / x0) ** (1 - a) - 1)

    def norming_c(self, x):
        if x <= 0:
            raise LawError("norming_c needs x > 0")
        if self.alpha == 2:
            # x * L(c) / c**2 = 1 with L(c) = 2 x0**2 log(c / x0); larger root
            x0 = self.x0
            if x <= math.e ** 2:
                raise LawError("alpha = 2 norming needs x > e**2")
            f = lambda c: c * c - 2 * x0 * x0 * x * math.log(c / x0)
            lo = x0 * math.sqrt(x)
            hi = lo * 2
            while f(hi) < 0:
                hi *= 2
            return optimize.brentq(f, lo, hi, xtol=1e-14 * hi, rtol=1e-14)
        if not 0 < self.alpha < 2:
            return super().norming_c(x)
        # x * L / c**alpha = 1 with L = x0**alpha
        return self.x0 * x ** (1.0 / self.alpha)


@dataclass(frozen=True)
class ExampleGamma(WLaw):
    """Law with P{W > x} = 1 / (1 + |log(1 - x)|**gamma), gamma in (0, 1/2).

    Here E log**2 W is finite while |log(1 - W)| has tail index gamma, so
    nu is infinite.
    """

    gamma: float

    def __post_init__(self):
        _check_positive("gamma", self.gamma)
        if not self.gamma < 0.5:
            raise LawError("ExampleGamma gamma must lie in (0, 1/2)")

    def __str__(self):
        return f"examplegamma({self.gamma!r})"

    def transform(self, u):
        u = np.asarray(u, dtype=float)
        out = -np.expm1(-((1 - u) / u) ** (1.0 / self.gamma))
        return out if out.ndim else float(out)

    def sample_logs(self, rng, size=None):
        # log Y is logistic with scale 1/gamma, where Y = |log(1 - W)|
        y = np.exp(rng.logistic(0.0, 1.0 / self.gamma, size))
        return _log1mexp(y), -y

    def _grid_bounds(self):
        return -INF, INF

    def _grid_logs(self, s):
        if s < -30:
            # log(1 - e^-y) = log y - y/2 + O(y^2)
            y = math.exp(s)
            return s - 0.5 * y, -y
        y = math.exp(s) if s < 700 else INF
        return float(_log1mexp(y)), -y

    def _grid_weight(self, s):
        g = self.gamma
        return g * special.expit(g * s) * special.expit(-g * s)

    def _compute_profile(self):
        mu = self.expect(lambda lw, l1w: -lw)
        second = self.expect(lambda lw, l1w: lw * lw)
        return MomentProfile(mu=mu, sigma2=second - mu * mu, nu=INF)

    def survival_log_w(self, x):
        if x <= 0:
            return 1.0
        c = -float(_log1mexp(x))
        cg = c ** self.gamma
        return cg / (1.0 + cg)

    def survival_log_1mw(self, y):
        if y <= 0:
            return 1.0
        return 1.0 / (1.0 + y ** self.gamma)


@dataclass(frozen=True, eq=False)
class InverseCdf(WLaw):
    """Extension point: a law given by a monotone quantile map (0,1) -> (0,1).

    Moments are computed by quadrature; supply ``profile_override`` to
    declare infinite moments analytically instead.
    """

    quantile: Callable[[float], float]
    name: str = "inversecdf"
    profile_override: Optional[MomentProfile] = field(default=None)

    def __str__(self):
        return self.name

    def transform(self, u):
        if np.ndim(u):
            return np.vectorize(self.quantile, otypes=[float])(u)
        return float(self.quantile(u))

    def _grid_bounds(self):
        return 0.0, 1.0

    def _grid_logs(self, s):
        w = float(self.quantile(s))
        with np.errstate(divide="ignore"):
            return math.log(w) if w > 0 else -INF, math.log1p(-w) if w < 1 else -INF

    def _grid_weight(self, s):
        return 1.0

    def _compute_profile(self):
        if self.profile_override is not None:
            return self.profile_override
        mu = self.expect(lambda lw, l1w: -lw)
        second = self.expect(lambda lw, l1w: lw * lw)
        nu = self.expect(lambda lw, l1w: -l1w)
        return MomentProfile(mu=mu, sigma2=second - mu * mu, nu=nu)

    def _cdf(self, w):
        # P{W < w} by bisection on the quantile map
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.quantile(mid) < w:
                lo = mid
            else:
                hi = mid
        return lo

    def survival_log_w(self, x):
        return 1.0 if x <= 0 else self._cdf(math.exp(-x))

    def survival_log_1mw(self, y):
        return 1.0 if y <= 0 else 1.0 - self._cdf(-math.expm1(-y))


@dataclass(frozen=True)
class Dirac(WLaw):
    """Point mass at p.  Lattice, hence rejected unless ``allow_lattice``."""

    p: float
    allow_lattice: bool = False

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise LawError("Dirac location must lie in (0, 1)")
        if not self.allow_lattice:
            raise LatticeLawError(
                "a point mass makes |log W| lattice (geometric frequencies); the "
                "limit theorems require a non-lattice law. Pass allow_lattice=True "
                "for exploratory use.")

    def __str__(self):
        return f"dirac({self.p!r})"

    def transform(self, u):
        return np.full(np.shape(u), self.p) if np.ndim(u) else self.p

    def expect(self, func, vector=False, epsabs=EPSABS, epsrel=EPSREL):
        out = np.asarray(func(math.log(self.p), math.log1p(-self.p)), dtype=float)
        return out if vector else float(out)

    def _compute_profile(self):
        lp = -math.log(self.p)
        return MomentProfile(mu=lp, sigma2=0.0, nu=-math.log1p(-self.p))

    def survival_log_w(self, x):
        return 1.0 if x < -math.log(self.p) else 0.0

    def survival_log_1mw(self, y):
        return 1.0 if y < -math.log1p(-self.p) else 0.0


# -- law grammar --------------------------------------------------------

_LAW_RE = re.compile(r"^\s*([a-z]+)\s*\(([^()]*)\)\s*$", re.IGNORECASE)
_FAMILIES = {"beta": (Beta, 2, 2), "logpareto": (LogPareto, 1, 2),
             "examplegamma": (ExampleGamma, 1, 1)}


def parse_law(text: str) -> WLaw:
    """Parse ``beta(a,b)``, ``logpareto(alpha[,x0])`` or ``examplegamma(gamma)``."""
    m = _LAW_RE.match(text)
    if not m:
        raise LawError(f"cannot parse law {text!r}")
    name = m.group(1).lower()
    if name not in _FAMILIES:
        raise LawError(f"unknown law family {name!r}; expected one of {sorted(_FAMILIES)}")
    cls, lo, hi = _FAMILIES[name]
    try:
        args = [float(Fraction(tok.strip())) for tok in m.group(2).split(",")]
    except (ValueError, ZeroDivisionError):
        raise LawError(f"bad numeric argument in {text!r}") from None
    if not lo <= len(args) <= hi:
        raise LawError(f"{name} takes {lo}..{hi} arguments, got {len(args)}")
    return cls(*args)


# -- functional interface -----------------------------------------------

def sample_w(law: WLaw, rng, size=None):
    """Draw W from ``law`` using the generator ``rng``."""
    return law.sample(rng, size)


def mixed_moment(law: WLaw, a, b) -> float:
    return law.mixed_moment(a, b)


def moment_profile(law: WLaw) -> MomentProfile:
    return law.profile()


def survival_log_w(law: WLaw, x: float) -> float:
    if x < 0:
        raise LawError("survival_log_w needs x >= 0")
    return law.survival_log_w(x)


def m_function(law: WLaw, x: float) -> float:
    return law.m_function(x)


def norming_c(law: WLaw, x: float) -> float:
    return law.norming_c(x)


def phi(law: WLaw, t: float) -> float:
    return law.phi(t)
