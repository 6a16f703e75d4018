import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sievelab import sim
from sievelab.laws import Beta
from sievelab.limits import Geometric, Normal
from sievelab.stats import (
    GofReport, HarnessError, bonferroni_note, chi_square_gof, chi_square_homogeneity,
    dominance_check, ks_one_sample, moment_z, summary_table, tv_distance, write_jsonl,
)


def geometric_counts(p, size, seed):
    x = np.random.default_rng(seed).geometric(p, size) - 1
    return np.bincount(x)


def geometric_pmf(p, kmax):
    k = np.arange(kmax + 1)
    return p * (1 - p) ** k


# -- KS ----------------------------------------------------------------------
def test_ks_calibration():
    x = Normal().sample(np.random.default_rng(1), 10 ** 5)
    rep = ks_one_sample(x, Normal())
    assert rep.passed and rep.value > 1e-4


def test_ks_calibration_rate():
    # 1000 seeded null runs: rejections at 1e-3 are Binomial(1000, 1e-3)
    rng = np.random.default_rng(2)
    rejects = sum(not ks_one_sample(rng.standard_normal(2000), stats.norm.cdf).passed
                  for _ in range(1000))
    assert rejects <= 5


def test_ks_power():
    x = Normal().sample(np.random.default_rng(3), 10 ** 5) + 1.0
    rep = ks_one_sample(x, Normal())
    assert rep.value < 1e-10 and not rep.passed


def test_ks_discrete_data_warns():
    x = np.random.default_rng(4).poisson(3.0, 5000).astype(float)
    rep = ks_one_sample(x, stats.norm(3, np.sqrt(3)).cdf)
    assert rep.warnings and "discrete" in rep.warnings[0]


def test_ks_discrete_handle_falls_back_to_chi_square():
    x = np.random.default_rng(5).geometric(0.5, 10 ** 4) - 1
    rep = ks_one_sample(x, Geometric(0.5))
    assert rep.kind == "ChiSquare" and rep.passed
    assert any("chi-square" in w for w in rep.warnings)
    with pytest.raises(HarnessError):
        ks_one_sample(x + 0.5, Geometric(0.5))


def test_ks_too_few_samples():
    with pytest.raises(HarnessError):
        ks_one_sample(np.zeros(99), stats.norm.cdf)


def test_ks_max_distance():
    x = np.random.default_rng(6).standard_normal(10 ** 4)
    assert ks_one_sample(x, stats.norm.cdf, max_distance=0.05).passed
    assert not ks_one_sample(x, stats.norm.cdf, max_distance=1e-6).passed


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(7).standard_normal(3000)
    rep = ks_one_sample(x, stats.norm.cdf)
    assert rep.statistic == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-15)


# -- chi-square --------------------------------------------------------------
def test_chi_square_calibration():
    counts = geometric_counts(0.5, 10 ** 5, 8)
    rep = chi_square_gof(counts, geometric_pmf(0.5, counts.size - 1))
    assert rep.passed


def test_chi_square_power():
    counts = geometric_counts(0.5, 10 ** 5, 9)
    rep = chi_square_gof(counts, geometric_pmf(0.6, counts.size - 1))
    assert rep.value < 1e-6


def test_chi_square_all_mass_one_cell():
    with pytest.raises(HarnessError):
        chi_square_gof([5000], [1.0])
    with pytest.raises(HarnessError):
        chi_square_gof([10, 10], [0.5, 0.5])  # under 1000 counts


def test_chi_square_tail_mass_folded():
    # a pmf truncated at 3 still sums to one after the tail joins the last cell
    counts = geometric_counts(0.5, 10 ** 5, 10)
    short = np.r_[counts[:3], counts[3:].sum()]
    assert chi_square_gof(short, geometric_pmf(0.5, 2)).passed


def test_chi_square_impossible_category():
    rep = chi_square_gof([500, 500, 10], [0.5, 0.5, 0.0], min_expected=0.0)
    assert rep.statistic == np.inf and not rep.passed


def test_chi_square_rejects_negative_pmf():
    with pytest.raises(HarnessError):
        chi_square_gof([600, 600], [1.1, -0.1])


def test_homogeneity():
    a = geometric_counts(0.5, 10 ** 5, 11)
    b = geometric_counts(0.5, 10 ** 5, 12)
    c = geometric_counts(0.55, 10 ** 5, 13)
    assert chi_square_homogeneity(a, b).passed
    assert chi_square_homogeneity(a, c).value < 1e-6
    with pytest.raises(HarnessError):
        chi_square_homogeneity([1, 2], a)


@given(st.lists(st.integers(0, 50), min_size=2, max_size=30), st.floats(0.5, 20))
@settings(max_examples=80, deadline=None)
def test_pooling_preserves_totals(obs, m):
    from sievelab.stats import _pool
    obs = np.array(obs, dtype=float)
    exp = np.full(obs.size, obs.sum() / obs.size)
    o, e = _pool(obs, exp, m)
    assert o.sum() == pytest.approx(obs.sum())
    assert e.sum() == pytest.approx(exp.sum())
    if o.size > 1:
        assert np.all(e >= m - 1e-9)


# -- TV, moments, dominance --------------------------------------------------
def test_tv_examples():
    p = np.array([0.2, 0.3, 0.5])
    assert tv_distance(p, p).value == 0.0
    assert tv_distance([1.0, 0.0], [0.0, 0.0, 1.0]).value == pytest.approx(1.0)
    assert tv_distance([0.5, 0.5], [0.6, 0.4], threshold=0.2).passed


@given(st.lists(st.floats(0, 1), min_size=1, max_size=20),
       st.lists(st.floats(0, 1), min_size=1, max_size=20))
@settings(max_examples=60)
def test_tv_bounds_and_symmetry(a, b):
    a = np.array(a) + 1e-3
    b = np.array(b) + 1e-3
    a, b = a / a.sum(), b / b.sum()
    d = tv_distance(a, b).value
    assert 0.0 <= d <= 1.0 + 1e-12
    assert d == pytest.approx(tv_distance(b, a).value)


def test_moment_z():
    x = np.random.default_rng(14).exponential(2.0, 10 ** 5)
    assert moment_z(x, 2.0).passed
    assert moment_z(x, 2.0, target_variance=4.0).passed
    assert moment_z(x, 2.1).value < 1e-10
    assert moment_z([1.0, 1.0], 1.0).statistic == 0.0
    with pytest.raises(HarnessError):
        moment_z([1.0], 1.0)


def test_dominance_basic():
    rng = np.random.default_rng(15)
    x = rng.standard_normal(10 ** 4)
    y = rng.standard_normal(10 ** 4) + 0.5
    assert dominance_check(x, y).passed
    rep = dominance_check(y, x)
    assert not rep.passed and rep.statistic > rep.threshold
    assert rep.threshold == pytest.approx(3 * np.sqrt(1e-4))


def test_dominance_subadditivity_M():
    # M_200 is dominated by the sum of two independent copies of M_100
    law = Beta(1, 1)
    reps = 10 ** 5
    big = sim.batch_estimate(law, n=200, replicates=reps, seed=16, statistics=("M",))
    a = sim.batch_estimate(law, n=100, replicates=reps, seed=17, statistics=("M",))
    b = sim.batch_estimate(law, n=100, replicates=reps, seed=18, statistics=("M",))
    rep = dominance_check(big.values["M"], a.values["M"] + b.values["M"])
    assert rep.passed, rep.line()


# -- reports -----------------------------------------------------------------
def test_report_invariants_and_json(tmp_path):
    x = np.random.default_rng(19).standard_normal(500)
    reports = [ks_one_sample(x, stats.norm.cdf, metadata={"law": "n", "seed": 19}),
               tv_distance([1.0], [1.0]), moment_z(x, 0.0)]
    for r in reports:
        assert r.passed == (r.value > r.threshold if r.is_pvalue else r.value < r.threshold)
        if r.is_pvalue:
            assert 0.0 <= r.value <= 1.0
    write_jsonl(reports, tmp_path / "r.jsonl")
    rows = [json.loads(line) for line in (tmp_path / "r.jsonl").read_text().splitlines()]
    assert [r["kind"] for r in rows] == ["KS1", "TVDistance", "MomentZ"]
    assert rows[0]["metadata"]["seed"] == 19
    assert rows[1]["value_kind"] == "distance"
    text = summary_table(reports)
    assert text.splitlines()[-1] == "3/3 passed"


def test_unknown_kind_rejected():
    with pytest.raises(HarnessError):
        GofReport("KS3", 0.0, 1.0, 0.1, True, (1,))


def test_bonferroni_note():
    assert bonferroni_note(10) is None
    assert "Bonferroni" in bonferroni_note(11)
    reports = [tv_distance([1.0], [1.0]) for _ in range(12)]
    assert "Bonferroni" in summary_table(reports)


def test_reports_deterministic():
    def run():
        x = sim.batch_estimate(Beta(1, 1), n=50, replicates=2000, seed=20).values["L"]
        return chi_square_gof(np.bincount(x), geometric_pmf(0.5, 60)).to_json()
    assert run() == run()
