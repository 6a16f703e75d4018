"""Goodness-of-fit reports used by the verification suite."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import SieveError

__all__ = [
    "GofReport", "HarnessError", "ks_one_sample", "chi_square_gof",
    "chi_square_homogeneity", "tv_distance", "moment_z", "dominance_check",
    "write_jsonl", "summary_table", "bonferroni_note", "ALPHA",
]

ALPHA = 1e-3
KINDS = ("KS1", "KS2", "ChiSquare", "MomentZ", "TVDistance", "DominanceCheck")


class HarnessError(SieveError, ValueError):
    """Input that a test cannot be run on."""


@dataclass
class GofReport:
    kind: str
    statistic: float
    value: float  # p-value, or a distance for TVDistance / DominanceCheck
    threshold: float
    passed: bool
    sizes: tuple
    metadata: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise HarnessError(f"unknown report kind {self.kind}")

    @property
    def is_pvalue(self) -> bool:
        return self.kind in ("KS1", "KS2", "ChiSquare", "MomentZ")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["value_kind"] = "p-value" if self.is_pvalue else "distance"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), default=_jsonable, sort_keys=True)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        what = "p" if self.is_pvalue else "d"
        op = ">" if self.is_pvalue else "<"
        name = self.metadata.get("name", self.kind)
        return (f"{tag}  {name:<40s} {self.kind:<14s} stat={self.statistic:.4g} "
                f"{what}={self.value:.4g} ({op} {self.threshold:g})")


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _pass_p(p, alpha):
    return bool(p > alpha)


def ks_one_sample(samples, cdf, alpha: float = ALPHA, metadata: Optional[dict] = None,
                  max_distance: Optional[float] = None) -> GofReport:
    """Kolmogorov-Smirnov distance to a continuous cdf with the asymptotic p-value.

    ``cdf`` is a callable or a limit-law handle.  A discrete handle gets a
    pooled chi-square report instead.  With ``max_distance`` the report
    additionally requires the sup-distance to stay below it.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 100:
        raise HarnessError("ks_one_sample needs at least 100 samples")
    if getattr(cdf, "discrete", False):
        return _discrete_fallback(x, cdf, alpha, metadata)
    warnings = []
    ties = n - np.unique(x).size
    if ties > 0.01 * n:
        warnings.append(f"discrete data: {ties} tied values; KS p-value is not valid")
    F = np.asarray(cdf.cdf(x) if hasattr(cdf, "cdf") else cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max((i / n - F).max(), (F - (i - 1) / n).max()))
    p = float(stats.kstwobign.sf(d * math.sqrt(n)))
    ok = _pass_p(p, alpha)
    if max_distance is not None:
        ok = ok and d < max_distance
    meta = dict(metadata or {})
    if max_distance is not None:
        meta["max_distance"] = max_distance
    return GofReport("KS1", d, p, alpha, ok, (n,), meta, warnings)


def _discrete_fallback(x, handle, alpha, metadata):
    # KS p-values are invalid for discrete laws; pooled chi-square replaces them
    if np.any(x < 0) or np.any(x != np.floor(x)):
        raise HarnessError("samples for a discrete law must be nonnegative integers")
    counts = np.bincount(x.astype(np.int64))
    pmf = np.array([handle.pmf(k) for k in range(counts.size)])
    rep = chi_square_gof(counts, pmf, alpha=alpha, metadata=metadata)
    rep.warnings.append(f"KS requested against discrete law {handle}; chi-square used instead")
    return rep


def _pool(observed, expected, min_expected):
    """Merge adjacent cells until each expected count reaches ``min_expected``:
    left to right, with the remainder folded into the last kept cell."""
    obs_out, exp_out = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= min_expected:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_out:
            obs_out[-1] += o_acc
            exp_out[-1] += e_acc
        else:
            obs_out.append(o_acc)
            exp_out.append(e_acc)
    return np.array(obs_out), np.array(exp_out)


def chi_square_gof(counts, pmf, alpha: float = ALPHA, min_expected: float = 5.0,
                   metadata: Optional[dict] = None) -> GofReport:
    """Pearson chi-square of category counts against a pmf over the same
    categories; mass of the pmf beyond the last category joins the tail cell."""
    counts = np.asarray(counts, dtype=float).ravel()
    pmf = np.asarray(pmf, dtype=float).ravel()
    total = counts.sum()
    if total < 1000:
        raise HarnessError("chi_square_gof needs at least 1000 counts")
    if pmf.size < counts.size:
        pmf = np.concatenate([pmf, np.zeros(counts.size - pmf.size)])
    elif pmf.size > counts.size:
        counts = np.concatenate([counts, np.zeros(pmf.size - counts.size)])
    if np.any(pmf < -1e-12):
        raise HarnessError("pmf has negative entries")
    pmf = np.clip(pmf, 0.0, None)
    tail = max(0.0, 1.0 - pmf.sum())
    pmf = pmf.copy()
    pmf[-1] += tail
    obs, exp = _pool(counts, pmf * total, min_expected)
    dof = obs.size - 1
    if dof < 1:
        raise HarnessError("fewer than two cells after pooling")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(exp > 0, (obs - exp) ** 2 / exp, np.where(obs > 0, np.inf, 0.0))
    stat = float(terms.sum())
    p = float(stats.chi2.sf(stat, dof))
    meta = dict(metadata or {})
    meta["cells"] = int(obs.size)
    return GofReport("ChiSquare", stat, p, alpha, _pass_p(p, alpha), (int(total),), meta)


def chi_square_homogeneity(counts_a, counts_b, alpha: float = ALPHA,
                           min_expected: float = 5.0,
                           metadata: Optional[dict] = None) -> GofReport:
    """Two-sample chi-square test that two count vectors over the same
    categories come from one law; sparse categories are pooled."""
    a = np.asarray(counts_a, dtype=float).ravel()
    b = np.asarray(counts_b, dtype=float).ravel()
    m = max(a.size, b.size)
    a = np.pad(a, (0, m - a.size))
    b = np.pad(b, (0, m - b.size))
    if a.sum() < 1000 or b.sum() < 1000:
        raise HarnessError("chi_square_homogeneity needs at least 1000 counts per sample")
    # pool on the smaller of the two expected counts, ordered by pooled frequency
    order = np.argsort(-(a + b), kind="stable")
    a, b = a[order], b[order]
    na, nb = a.sum(), b.sum()
    pooled = a + b
    exp_min = pooled * min(na, nb) / (na + nb)
    cells_a, cells_b = [], []
    acc_a = acc_b = acc_e = 0.0
    for x, y, e in zip(a, b, exp_min):
        acc_a += x
        acc_b += y
        acc_e += e
        if acc_e >= min_expected:
            cells_a.append(acc_a)
            cells_b.append(acc_b)
            acc_a = acc_b = acc_e = 0.0
    if acc_a + acc_b > 0:
        if cells_a:
            cells_a[-1] += acc_a
            cells_b[-1] += acc_b
        else:
            cells_a.append(acc_a)
            cells_b.append(acc_b)
    table = np.array([cells_a, cells_b])
    if table.shape[1] < 2:
        raise HarnessError("fewer than two cells after pooling")
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    meta = dict(metadata or {})
    meta["cells"] = int(table.shape[1])
    return GofReport("ChiSquare", float(stat), float(p), alpha, _pass_p(p, alpha),
                     (int(na), int(nb)), meta)


def tv_distance(pmf_a, pmf_b, threshold: float = 0.01,
                metadata: Optional[dict] = None) -> GofReport:
    """Total variation distance between two pmfs on a common index set."""
    a = np.asarray(pmf_a, dtype=float).ravel()
    b = np.asarray(pmf_b, dtype=float).ravel()
    m = max(a.size, b.size)
    a = np.pad(a, (0, m - a.size))
    b = np.pad(b, (0, m - b.size))
    d = 0.5 * float(np.abs(a - b).sum())
    return GofReport("TVDistance", d, d, threshold, d < threshold, (a.size, b.size),
                     dict(metadata or {}))


def moment_z(samples, target_mean: float, target_variance: Optional[float] = None,
             alpha: float = ALPHA, metadata: Optional[dict] = None) -> GofReport:
    """Two-sided z-test of the sample mean; the standard error uses the target
    variance when given, the sample variance otherwise."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise HarnessError("moment_z needs at least 2 samples")
    var = target_variance if target_variance is not None else float(x.var(ddof=1))
    se = math.sqrt(var / n)
    z = (float(x.mean()) - target_mean) / se if se > 0 else (
        0.0 if x.mean() == target_mean else math.inf)
    p = float(2 * stats.norm.sf(abs(z)))
    meta = dict(metadata or {})
    meta.update(sample_mean=float(x.mean()), se=se)
    return GofReport("MomentZ", z, p, alpha, _pass_p(p, alpha), (n,), meta)


def dominance_check(samples_x, samples_y, metadata: Optional[dict] = None) -> GofReport:
    """Empirical check that X is stochastically dominated by Y, i.e. that
    F_X(t) >= F_Y(t) - eps everywhere, with eps = 3 sqrt((1/|X| + 1/|Y|)/2).

    The reported statistic is the largest violation sup_t (F_Y(t) - F_X(t)).
    """
    x = np.sort(np.asarray(samples_x, dtype=float).ravel())
    y = np.sort(np.asarray(samples_y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise HarnessError("dominance_check needs nonempty samples")
    eps = 3.0 * math.sqrt((1.0 / x.size + 1.0 / y.size) / 2.0)
    grid = np.union1d(x, y)
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    viol = float(max(0.0, (fy - fx).max()))
    meta = dict(metadata or {})
    meta["epsilon"] = eps
    return GofReport("DominanceCheck", viol, viol, eps, viol <= eps, (x.size, y.size), meta)


def bonferroni_note(n_tests: int, alpha: float = ALPHA) -> Optional[str]:
    if n_tests > 10:
        return (f"{n_tests} tests at level {alpha:g} each: family-wise error up to "
                f"{min(1.0, n_tests * alpha):.3g} (Bonferroni)")
    return None


def write_jsonl(reports: Sequence[GofReport], path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def summary_table(reports: Sequence[GofReport]) -> str:
    lines = [r.line() for r in reports]
    passed = sum(r.passed for r in reports)
    lines.append(f"{passed}/{len(reports)} passed")
    note = bonferroni_note(len(reports))
    if note:
        lines.append("note: " + note)
    return "\n".join(lines)
