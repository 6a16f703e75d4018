"""Monte Carlo engine for the Bernoulli sieve.

All samplers take an explicit ``numpy.random.Generator`` and keep the
multiplicative walk in log space: the walk point ``Q_k`` is represented by
``S_k = -log Q_k`` and a ball with uniform mark ``U`` by ``E = -log U``, so
box ``k`` is the interval ``(S_{k-1}, S_k]`` of the exponential marks.

Two exact samplers of a finite-n occupancy are provided:

* ``method="marks"`` throws n exponential marks and buckets them against
  the walk (the paintbox picture);
* ``method="coins"`` allocates balls box by box, sending each remaining
  ball to box k with probability ``1 - W_k``.

They are equal in law and are checked against each other in the tests.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Dict, Optional

import numpy as np

from .errors import CapabilityError, LawError
from .laws import WLaw, _log1mexp

__all__ = [
    "OccupancySample",
    "LimitPartitionSample",
    "BatchResult",
    "child_rng",
    "simulate_occupancy",
    "simulate_poissonised",
    "paintbox_realisation",
    "renewal_count",
    "renewal_counts",
    "small_box_count",
    "sample_T",
    "shortcut_sample_M",
    "shortcut_sample_Z",
    "stationary_delay",
    "simulate_limit_partition",
    "limit_partition_batch",
    "batch_estimate",
    "SCHEMA",
]

SCHEMA = "sievelab/1"
STATISTICS = ("K", "M", "L", "Z")


def child_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for stream ``index`` of master ``seed``.

    The derivation is a pure function of ``(seed, index)``, so streams can be
    consumed in any order or on any thread.
    """
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class OccupancySample:
    n_balls: int
    K: int
    M: int
    L: int
    Z: int
    spectrum: Dict[int, int] = field(default_factory=dict)

    def check(self):
        """Assert the per-sample identities; returns self for chaining."""
        assert self.L == self.M - self.K
        assert sum(self.spectrum.values()) == self.K
        assert sum(r * c for r, c in self.spectrum.items()) == self.n_balls
        if self.n_balls:
            assert self.Z >= 1
        else:
            assert self.K == self.M == self.L == self.Z == 0
        return self


@dataclass(frozen=True)
class LimitPartitionSample:
    khat: Dict[int, int]
    y_leftmost: float
    window_right: float
    n_boxes: int


# -- walks --------------------------------------------------------------

def _chunk_for(law: WLaw, t_max: float, lo=8, hi=1 << 14) -> int:
    prof = law.profile()
    if prof.mu_finite and math.isfinite(t_max) and t_max > 0:
        mean = t_max / prof.mu
        sd = math.sqrt(prof.sigma2 * t_max / prof.mu ** 3) if prof.sigma2_finite else mean
        return int(min(hi, max(lo, mean + 4 * sd + 4)))
    return lo * 2


def _walk_until(law: WLaw, T, rng, chunk=None):
    """Walk points S_1, S_2, ... per row until a point exceeds T (row-wise).

    Returns ``(S, L1W)``: matrices of walk points and of log(1 - W_k), padded
    with +inf / -inf beyond what was generated.
    """
    T = np.asarray(T, dtype=float)
    R = T.shape[0]
    if chunk is None:
        chunk = _chunk_for(law, float(np.max(T, initial=0.0)))
    last = np.zeros(R)
    active = np.flatnonzero(last <= T)
    blocks_s, blocks_l = [], []
    while active.size:
        lw, l1w = law.sample_logs(rng, (active.size, chunk))
        pts = last[active, None] + np.cumsum(-lw, axis=1)
        s_blk = np.full((R, chunk), np.inf)
        l_blk = np.full((R, chunk), -np.inf)
        s_blk[active] = pts
        l_blk[active] = l1w
        blocks_s.append(s_blk)
        blocks_l.append(l_blk)
        last[active] = pts[:, -1]
        active = active[last[active] <= T[active]]
    if not blocks_s:
        return np.empty((R, 0)), np.empty((R, 0))
    return np.hstack(blocks_s), np.hstack(blocks_l)


def _renewal_block(law: WLaw, t, rng, chunk=None):
    """N_t = inf{k >= 1: S_k > t} and the last walk point <= t (0 if none)."""
    t = np.asarray(t, dtype=float)
    R = t.shape[0]
    if chunk is None:
        chunk = _chunk_for(law, float(np.max(t, initial=0.0)))
        chunk = max(8, min(chunk, (1 << 22) // max(R, 1)))
    count = np.ones(R, dtype=np.int64)
    below = np.zeros(R)
    last = np.zeros(R)
    active = np.arange(R)
    while active.size:
        inc = law.sample_log_w(rng, (active.size, chunk))
        pts = last[active, None] + np.cumsum(inc, axis=1)
        le = pts <= t[active, None]
        k = le.sum(axis=1)
        count[active] += k
        has = k > 0
        below[active[has]] = pts[has, k[has] - 1]
        last[active] = pts[:, -1]
        active = active[last[active] <= t[active]]
    return count, below


# -- occupancy ----------------------------------------------------------

def _stats_from_runs(R, run_row, run_box, run_cnt, n_arr, r_max):
    K = np.bincount(run_row, minlength=R).astype(np.int64)
    M = np.zeros(R, dtype=np.int64)
    Z = np.zeros(R, dtype=np.int64)
    if run_row.size:
        # runs are sorted by (row, box): the last run of a row is its box M
        last = np.flatnonzero(np.r_[run_row[1:] != run_row[:-1], True])
        M[run_row[last]] = run_box[last]
        Z[run_row[last]] = run_cnt[last]
    width = r_max + 1
    capped = np.minimum(run_cnt, width)
    spec = np.bincount(run_row * (width + 1) + capped,
                       minlength=R * (width + 1)).reshape(R, width + 1)
    return dict(n=np.asarray(n_arr, dtype=np.int64), K=K, M=M, L=M - K, Z=Z,
                spectrum=spec[:, 1:width].astype(np.int64), overflow=spec[:, width])


def _paintbox_block(law, n_arr, rng, r_max, keep=False):
    n_arr = np.asarray(n_arr, dtype=np.int64)
    R = n_arr.size
    nmax = int(n_arr.max(initial=0))
    E = rng.standard_exponential((R, nmax))
    valid = np.arange(nmax)[None, :] < n_arr[:, None]
    E[~valid] = np.inf
    T = np.where(n_arr > 0, np.max(np.where(valid, E, -np.inf), axis=1, initial=-np.inf), 0.0)
    S, _ = _walk_until(law, T, rng)
    kw = S.shape[1]
    order = np.argsort(np.hstack([S, E]), axis=1, kind="stable")
    is_walk = order < kw
    box = np.cumsum(is_walk, axis=1) + 1
    is_mark = ~is_walk & np.take_along_axis(
        np.hstack([np.zeros((R, kw), bool), valid]), order, axis=1)
    rows, cols = np.nonzero(is_mark)
    boxes = box[rows, cols]
    if rows.size:
        brk = np.r_[True, (rows[1:] != rows[:-1]) | (boxes[1:] != boxes[:-1])]
        starts = np.flatnonzero(brk)
        cnt = np.diff(np.r_[starts, rows.size])
        out = _stats_from_runs(R, rows[starts], boxes[starts], cnt, n_arr, r_max)
    else:
        out = _stats_from_runs(R, rows, boxes, rows, n_arr, r_max)
    if keep:
        out["marks"], out["walk"] = E, S
    return out


def _coins_block(law, n_arr, rng, r_max):
    n_arr = np.asarray(n_arr, dtype=np.int64)
    R = n_arr.size
    rem = n_arr.copy()
    cols = []
    active = np.flatnonzero(rem > 0)
    while active.size:
        _, l1w = law.sample_logs(rng, active.size)
        c = rng.binomial(rem[active], np.exp(l1w))
        col = np.zeros(R, dtype=np.int64)
        col[active] = c
        cols.append(col)
        rem[active] -= c
        active = active[rem[active] > 0]
    if not cols:
        e = np.empty(0, dtype=np.int64)
        return _stats_from_runs(R, e, e, e, n_arr, r_max)
    C = np.vstack(cols).T  # R x steps
    rows, boxes = np.nonzero(C)
    return _stats_from_runs(R, rows, boxes + 1, C[rows, boxes], n_arr, r_max)


def _occupancy_block(law, n_arr, rng, method, r_max):
    if method == "marks":
        return _paintbox_block(law, n_arr, rng, r_max)
    if method == "coins":
        return _coins_block(law, n_arr, rng, r_max)
    raise ValueError(f"unknown method {method!r}; use 'marks' or 'coins'")


def _single(block, r_max) -> OccupancySample:
    spectrum = {r + 1: int(c) for r, c in enumerate(block["spectrum"][0]) if c}
    if block["overflow"][0]:
        raise AssertionError("spectrum overflow for a single sample")
    return OccupancySample(int(block["n"][0]), int(block["K"][0]), int(block["M"][0]),
                           int(block["L"][0]), int(block["Z"][0]), spectrum)


def simulate_occupancy(law: WLaw, n: int, rng, method: str = "marks") -> OccupancySample:
    """One realisation of the sieve with ``n`` balls."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return _single(_occupancy_block(law, [n], rng, method, max(n, 1)), max(n, 1))


def paintbox_realisation(law: WLaw, n: int, rng):
    """Like ``simulate_occupancy`` but also returns the marks and walk used.

    Returns ``(sample, marks, walk)`` where ``marks`` are the n exponential
    marks and ``walk`` the generated points S_1, S_2, ... (the last one
    exceeding the largest mark).
    """
    blk = _paintbox_block(law, [n], rng, max(n, 1), keep=True)
    walk = blk["walk"][0]
    return _single(blk, max(n, 1)), blk["marks"][0], walk[np.isfinite(walk)]


def simulate_poissonised(law: WLaw, t: float, rng, method: str = "marks") -> OccupancySample:
    """Sieve fed with a Poisson(t) number of balls."""
    if not t > 0:
        raise ValueError("t must be positive")
    return simulate_occupancy(law, int(rng.poisson(t)), rng, method)


# -- renewal quantities ---------------------------------------------------

def renewal_count(law: WLaw, t: float, rng) -> int:
    """N_t: index of the first walk point strictly above t."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return int(_renewal_block(law, [t], rng)[0][0])


def renewal_counts(law: WLaw, t: float, rng, size: int) -> np.ndarray:
    return _renewal_block(law, np.full(size, float(t)), rng)[0]


def small_box_count(law: WLaw, x: float, rng, chunk: int = 32) -> int:
    """N*(x): number of boxes with frequency at least exp(-x).

    The walk is consumed in fixed-size chunks so that, for one generator
    state, the counts are nondecreasing in ``x``.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    count = 0
    prev = 0.0  # S_{k-1}
    while prev <= x:
        lw, l1w = law.sample_logs(rng, chunk)
        pts = prev + np.cumsum(-lw)
        starts = np.r_[prev, pts[:-1]]
        live = starts <= x
        count += int(np.count_nonzero(live & (l1w - starts >= -x)))
        prev = pts[-1]
    return count


def sample_T(log_n: float, rng, size=None):
    """Maximum of n standard exponentials, for n = exp(log_n), drawn exactly.

    Uses T = -log(1 - exp(-V/n)) with V standard exponential, evaluated in
    log space so that astronomically large n is fine.
    """
    v = rng.standard_exponential(size)
    log_z = np.log(v) - log_n
    z = np.exp(log_z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(log_z < -30.0, -log_z + 0.5 * z, -np.log(-np.expm1(-z)))
    return out if np.ndim(out) else float(out)


def shortcut_sample_M(law: WLaw, log_n: float, rng, size=None):
    """Exact draw of the occupancy range M_n via M_n = N_{T_n}."""
    if not log_n > 0:
        raise ValueError("log_n must be positive")
    T = np.atleast_1d(sample_T(log_n, rng, size))
    N, _ = _renewal_block(law, T, rng)
    return N if size is not None else int(N[0])


def _big_int_from_log(logz: float) -> int:
    if logz < 700:
        return max(1, int(round(math.exp(logz))))
    return int(Decimal(logz).exp())


def shortcut_sample_Z(law: WLaw, log_n: float, rng, size=None, log: bool = False):
    """Draw of Z_n (balls in the last occupied box) for n = exp(log_n).

    Given the maximum mark T and the last walk point c below it, the other
    n - 1 marks are iid exponentials conditioned on being below T, so
    ``Z - 1 ~ Binomial(n - 1, p)`` with ``p = (F(T) - F(c)) / F(T)``.  This is
    exact while n fits in 64 bits (log_n <= 40); beyond that the binomial is
    replaced by its Poisson or normal approximation, whose error is
    negligible at that scale.  With ``log=True`` returns log Z as float.
    """
    if not log_n > 0:
        raise ValueError("log_n must be positive")
    T = np.atleast_1d(sample_T(log_n, rng, size))
    _, c = _renewal_block(law, T, rng)
    log_p = np.where(c > 0, -c + _log1mexp(T - c) - _log1mexp(T), 0.0)
    p = np.exp(log_p)
    if log_n <= 40:
        n = int(round(math.exp(log_n)))
        z = 1 + rng.binomial(max(n - 1, 0), p)
        if log:
            return np.log(z.astype(float)) if size is not None else float(math.log(z[0]))
        return z if size is not None else int(z[0])
    log_lam = log_n + log_p
    small = log_lam < 30.0
    logz = np.empty_like(log_lam)
    logz[small] = np.log1p(rng.poisson(np.exp(log_lam[small])).astype(float))
    big = ~small
    g = rng.standard_normal(np.count_nonzero(big))
    logz[big] = log_lam[big] + np.log1p(np.sqrt((1 - p[big]) * np.exp(-log_lam[big])) * g)
    if log:
        return logz if size is not None else float(logz[0])
    vals = [_big_int_from_log(v) for v in logz]
    return np.array(vals, dtype=object) if size is not None else vals[0]


# -- limit partition ------------------------------------------------------

_DELAY_TABLES: dict = {}


def stationary_delay(law: WLaw, rng, size=None):
    """Draws from the density P{|log W| > x} / mu (the stationary delay)."""
    prof = law.profile()
    if not prof.mu_finite:
        raise CapabilityError("the stationary renewal process needs a finite mu")
    from .laws import Beta, LogPareto
    v = rng.random(size)
    if isinstance(law, Beta) and law.b == 1:
        return -np.log1p(-v) / law.a
    if isinstance(law, LogPareto):
        a, x0 = law.alpha, law.x0
        m = v * prof.mu
        return np.where(m <= x0, m,
                        x0 * np.maximum(1 + (1 - a) * (m - x0) / x0, 1e-300) ** (1 / (1 - a)))
    key = law
    if key not in _DELAY_TABLES:
        hi = 1.0
        while law.survival_log_w(hi) > 1e-12 and hi < 1e12:
            hi *= 2
        xs = hi * np.linspace(0.0, 1.0, 20001) ** 2
        surv = np.array([law.survival_log_w(x) for x in xs])
        cum = np.r_[0.0, np.cumsum(0.5 * (surv[1:] + surv[:-1]) * np.diff(xs))]
        _DELAY_TABLES[key] = (cum / cum[-1], xs)
    frac, xs = _DELAY_TABLES[key]
    return np.interp(v, frac, xs)


_LEFT_EDGE = 40.0  # walk is run until B-points fall below exp(-40)


def limit_partition_batch(law: WLaw, window_depth: float, rng, size: int, r_max: int = 10):
    """Vectorised draws of (K^_0, ..., K^_{r_max}) from the limit partition.

    Returns an integer matrix of shape ``(size, r_max + 1)``.  The stationary
    renewal process is started exactly at the left end -window_depth of the
    log-window, so the boxes (0, exp(window_depth)) of B are simulated from
    the stationary law; the box straddling the right window edge is dropped.
    Atoms of the unit Poisson process are drawn per box, which is equivalent
    to overlaying the process itself.
    """
    if not window_depth > 0:
        raise ValueError("window_depth must be positive")
    first = -window_depth + stationary_delay(law, rng, size)
    S, L1W = _walk_until(law, np.full(size, _LEFT_EDGE) - first, rng)
    pts = np.hstack([first[:, None], first[:, None] + S])  # points of P, increasing
    l1w = L1W  # box between pts[j] and pts[j+1] has length exp(-pts[j]) (1 - W)
    lengths = np.where(np.isfinite(pts[:, 1:]), np.exp(-pts[:, :-1] + l1w), 0.0)
    counts = rng.poisson(lengths)
    J = counts.shape[1]
    occupied = counts > 0
    # Y sits in the leftmost occupied box, i.e. the largest j with counts > 0
    jstar = np.where(occupied.any(axis=1), J - 1 - np.argmax(occupied[:, ::-1], axis=1), -1)
    in_range = np.arange(J)[None, :] <= jstar[:, None]
    out = np.zeros((size, r_max + 1), dtype=np.int64)
    for r in range(r_max + 1):
        out[:, r] = np.count_nonzero(in_range & (counts == r), axis=1)
    return out


def simulate_limit_partition(law: WLaw, window_depth: float, rng) -> LimitPartitionSample:
    """One draw of the limit partition (K^_r) with the location of Y."""
    if not law.profile().mu_finite:
        raise CapabilityError("the limit partition needs a finite mu")
    first = -window_depth + float(stationary_delay(law, rng))
    S, L1W = _walk_until(law, np.array([_LEFT_EDGE - first]), rng)
    pts = np.r_[first, first + S[0][np.isfinite(S[0])]]
    l1w = L1W[0][: pts.size - 1]
    lengths = np.exp(-pts[:-1] + l1w)
    counts = rng.poisson(lengths)
    occ = np.flatnonzero(counts)
    if occ.size == 0:
        return LimitPartitionSample({}, math.inf, math.exp(-first), int(lengths.size))
    j = occ[-1]
    left = math.exp(-pts[j + 1])
    y = left + lengths[j] * float(rng.beta(1, counts[j]))
    vals, freq = np.unique(counts[: j + 1], return_counts=True)
    khat = {int(v): int(f) for v, f in zip(vals, freq)}
    return LimitPartitionSample(khat, y, math.exp(-first), int(j + 1))


# -- batches -------------------------------------------------------------

def _block_size(n_hint: float, method: str) -> int:
    if method == "coins":
        return 1 << 14
    return int(max(1, min(1 << 14, (1 << 21) // max(int(n_hint), 1))))


@dataclass
class BatchResult:
    """Per-replicate statistics of a batch run, plus summaries."""

    law: str
    seed: int
    replicates: int
    method: str
    n: Optional[int]
    t: Optional[float]
    values: Dict[str, np.ndarray]
    spectrum: np.ndarray

    def mean(self, stat):
        return float(np.mean(self.values[stat]))

    def se(self, stat):
        x = self.values[stat]
        return float(np.std(x, ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan

    def tallies(self, stat) -> np.ndarray:
        return np.bincount(self.values[stat])

    def pmf(self, stat) -> np.ndarray:
        t = self.tallies(stat)
        return t / t.sum()

    def summary(self) -> dict:
        out = {"schema": SCHEMA, "law": self.law, "seed": self.seed,
               "replicates": self.replicates, "method": self.method,
               "n": self.n, "t": self.t, "moments": {}}
        for s, x in self.values.items():
            out["moments"][s] = {"mean": self.mean(s), "se": self.se(s),
                                 "var": float(np.var(x, ddof=1)) if x.size > 1 else math.nan}
        return out

    def to_csv(self, path):
        r_max = self.spectrum.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            stats_ = [s for s in STATISTICS if s in self.values]
            w.writerow(["n", *stats_, *[f"K_{r}" for r in range(1, r_max + 1)]])
            cols = [self.values["n"], *[self.values[s] for s in stats_]]
            for i in range(self.replicates):
                w.writerow([int(c[i]) for c in cols] + [int(v) for v in self.spectrum[i]])

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def batch_estimate(law: WLaw, n: Optional[int] = None, replicates: int = 1, seed: int = 0,
                   statistics=STATISTICS, method: str = "marks", t: Optional[float] = None,
                   r_max: int = 10, workers: int = 1) -> BatchResult:
    """Run ``replicates`` independent sieves with a fixed (``n``) or Poisson(``t``) ball count.

    Replicates are split into blocks whose size depends only on the problem
    size; block b draws from ``child_rng(seed, b)``.  The outcome is therefore
    identical for any number of ``workers``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if (n is None) == (t is None):
        raise ValueError("give exactly one of n or t")
    if n is not None and n < 0:
        raise ValueError("n must be nonnegative")
    for s in statistics:
        if s not in STATISTICS:
            raise ValueError(f"unknown statistic {s!r}")
    bs = _block_size(n if n is not None else t, method)
    blocks = [(b, min(bs, replicates - b * bs)) for b in range(-(-replicates // bs))]

    def run(item):
        b, size = item
        rng = child_rng(seed, b)
        n_arr = np.full(size, n, dtype=np.int64) if n is not None else rng.poisson(t, size)
        return _occupancy_block(law, n_arr, rng, method, r_max)

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    keep = ("n", *statistics)
    values = {k: np.concatenate([p[k] for p in parts]) for k in keep}
    spectrum = np.vstack([p["spectrum"] for p in parts])
    return BatchResult(str(law), int(seed), int(replicates), method, n, t, values, spectrum)
