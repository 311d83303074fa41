import io

import numpy as np
import pytest
from scipy import stats as sps

from solgeo.errors import DomainError
from solgeo.geometry import SolParams, upper_bound_iii
from solgeo.rng import CH_AUX, normals, uniforms
from solgeo.sde import SimConfig, simulate, simulate_batch, y_infinity
from solgeo.stats import (
    LABEL_CENTRE,
    LABEL_MINUS,
    LABEL_PLUS,
    LABEL_UNDECIDED,
    ReferenceLaw,
    SampleSet,
    TestReport,
    boundary_classify,
    clt_sample,
    deviation_profile,
    deviation_summaries,
    dist_clt_sample,
    distance_reference,
    escape_rate,
    hill_sweep,
    ks_statistic,
    lateral_frame,
    reference_sample,
    tail_exponent,
)

NORMAL = ReferenceLaw("std-normal")


def test_containers():
    with pytest.raises(DomainError):
        SampleSet(np.zeros(99), "x")
    with pytest.raises(DomainError):
        ReferenceLaw("cauchy")
    s = SampleSet(np.arange(300.0).reshape(100, 3), "a,b,c", t=2.0)
    assert s.N == 100 and s.column(1).values[0] == 1.0
    buf = io.StringIO()
    s.to_csv(buf)
    assert buf.getvalue().splitlines()[:2] == ["a,b,c", "0.0,1.0,2.0"]


def test_report_pass_and_serialisation():
    r = TestReport("k", 0.05, 0.06, 100, 7, {"a": 1.0})
    assert r.passed
    assert not TestReport("k", np.nan, 1.0, 100, 7).passed
    assert not TestReport("k", 0.07, 0.06, 100, 7).passed
    d = r.to_dict()
    assert d == {"name": "k", "params": {"a": 1.0, "N": 100, "seed": 7},
                 "statistic": 0.05, "threshold": 0.06, "pass": True}
    assert r.line().startswith("PASS")


# --- KS and reference laws --------------------------------------------------

def test_ks_normal_sample():
    s = reference_sample(NORMAL, 10_000, seed=3)
    assert ks_statistic(s, NORMAL) < 1.63 / np.sqrt(10_000)


def test_ks_identical_and_shifted():
    x = normals(4, 0, CH_AUX, 0, 10_000)
    assert ks_statistic(x, x) == 0.0
    # sup |Phi(x) - Phi(x - 1)| = 2 Phi(1/2) - 1
    exact = 2 * sps.norm.cdf(0.5) - 1
    assert exact == pytest.approx(0.3829, abs=1e-4)
    assert abs(ks_statistic(x + 1.0, NORMAL) - exact) < 0.02


def test_ks_rejects_multivariate_and_closed_form_misuse():
    with pytest.raises(DomainError):
        ks_statistic(np.zeros((100, 2)), NORMAL)
    with pytest.raises(DomainError):
        ks_statistic(np.zeros(100), ReferenceLaw("scaled-bm-functional"))


def test_brownian_extrema_reference():
    ref = reference_sample(ReferenceLaw("scaled-bm-functional"), 2000, steps=10_000, seed=5)
    mx, mn, w1 = ref.values.T
    assert np.all(mx >= 0) and np.all(mn >= 0)
    assert np.all(mx + mn >= np.abs(w1))
    # reflection principle: max W ~ |N|, mean sqrt(2/pi)
    assert abs(mx.mean() - np.sqrt(2 / np.pi)) < 3 * mx.std(ddof=1) / np.sqrt(2000)
    assert np.all(distance_reference(ref).values >= mx + mn)
    scaled = reference_sample(ReferenceLaw("scaled-bm-functional", 2.0, 3.0), 2000, 10_000, seed=5)
    assert np.allclose(scaled.values[:, 0], 2 * mx) and np.allclose(scaled.values[:, 1], 3 * mn)
    with pytest.raises(DomainError):
        reference_sample(ReferenceLaw("scaled-bm-functional"), 200, steps=100)


# --- central limit samples and escape ---------------------------------------

def test_clt_sample_horizon_guard():
    cfg = SimConfig(SolParams(1, 1, 1), T=1.0, dt=0.01)
    with pytest.raises(DomainError):
        clt_sample(cfg, 100, t=5.0)


def test_clt_sample_negative_drift_mirror():
    cfg = SimConfig(SolParams(1, 1, -1), T=100.0, dt=0.05, seed=6, scheme="time-change")
    v = clt_sample(cfg, 2000, t=100.0).values
    assert ks_statistic(v[:, 1], NORMAL) < 0.06
    assert np.percentile(np.abs(v[:, 0]), 95) < 0.5


def test_escape_interval_for_unit_drift():
    cfg = SimConfig(SolParams(1, 1, 1), T=200.0, dt=0.05, seed=7)
    e = escape_rate(cfg, 200.0, 2000)
    assert 0.85 <= e.low <= 1.0 <= e.high <= 1.15
    assert e.n_skipped == 0
    cfg = SimConfig(SolParams(1, 1, -0.5), T=200.0, dt=0.05, seed=8)
    e = escape_rate(cfg, 200.0, 2000)
    assert e.low <= 0.5 <= e.high


def test_distance_clt_mean_is_centred():
    # the surrogate's bias decays like 1/sqrt(t); at t = 1600 it is below 3 se for N = 1000
    cfg = SimConfig(SolParams(1, 1, 1), T=1600.0, dt=0.05, seed=9, scheme="time-change")
    s = dist_clt_sample(cfg, 1000, 1600.0)
    se = s.values.std(ddof=1) / np.sqrt(s.N)
    assert abs(s.values.mean()) < 3 * se
    with pytest.raises(DomainError):
        dist_clt_sample(cfg, 1000, 1600.0, surrogate="exact")


# --- tails ------------------------------------------------------------------

def test_hill_on_exact_pareto():
    u = uniforms(10, 0, CH_AUX, 0, 100_000)
    x = u ** (-1.0 / 2.0)
    est = tail_exponent(x, 5000)
    assert 1.9 <= est.kappa_hat <= 2.1
    assert est.ci_low < 2.0 < est.ci_high
    assert set(hill_sweep(x, 5000)) == {2500, 5000, 10_000}


def test_hill_errors():
    with pytest.raises(DomainError):
        tail_exponent(np.ones(1000), 200)
    with pytest.raises(DomainError):
        tail_exponent(np.r_[np.zeros(990), np.ones(10)], 50)


@pytest.mark.parametrize("q,lo,hi", [(1.0, 1.7, 2.3), (2.0, 0.85, 1.15)])
def test_tail_exponent_of_transversal_limit(q, lo, hi):
    cfg = SimConfig(SolParams(1.0, q, 1.0), T=0.05, dt=0.05, seed=11, scheme="time-change")
    est = tail_exponent(y_infinity(cfg, 100_000), 2000)
    assert lo <= est.kappa_hat <= hi


# --- deviation --------------------------------------------------------------

def test_profile_zero_on_the_geodesic():
    pr = SolParams(1, 1, 1)

    class OnRay:
        times = np.arange(0.0, 11.0)
        X = np.zeros(11)
        Y = np.full(11, 0.3)
        Z = np.arange(0.0, 11.0)

    prof = deviation_profile(OnRay, 0.3, pr)
    assert np.all(prof.ratio == 0) and prof.summary == 0
    assert list(prof.n) == list(range(2, 11))


def test_lateral_frame_matches_linear_coordinates():
    pr = SolParams(1.0, 1.3, 0.8)
    cfg = SimConfig(pr, T=60.0, dt=0.01, seed=12, save_every=100)
    b = simulate_batch(cfg, 3, local=True)
    for i in range(3):
        path = b.path(i)
        u, v = lateral_frame(b, i, pr)
        yinf = path.Y[-1]
        direct = deviation_profile(path, yinf, pr)
        framed = deviation_profile(path, yinf, pr, lateral=(u, v))
        # the direct difference Y - Y_inf loses digits like e^{q a n}; compare where it is still exact
        early = direct.n <= 6
        assert np.allclose(direct.ratio[early], framed.ratio[early], rtol=1e-6, atol=1e-9)
        assert np.all(np.isfinite(framed.ratio))


def test_deviation_with_steeper_drift():
    cfg = SimConfig(SolParams(1, 1, 2), T=0.1, dt=0.1, seed=13, scheme="time-change")
    s = deviation_summaries(cfg, 100, 10_000)
    assert np.mean(s <= 1.0 + 0.5) >= 0.95
    with pytest.raises(DomainError):
        deviation_summaries(SimConfig(SolParams(1, 1, 0), T=0.1, dt=0.1), 2, 100)


# --- boundary ---------------------------------------------------------------

def test_single_path_labels():
    p_plus = simulate(SimConfig(SolParams(1, 1, 1), T=100.0, dt=0.01, seed=14, save_every=5000))
    assert boundary_classify(p_plus, SolParams(1, 1, 1)) == LABEL_PLUS
    p_minus = simulate(SimConfig(SolParams(1, 1, -1), T=100.0, dt=0.01, seed=14, save_every=5000))
    assert boundary_classify(p_minus, SolParams(1, 1, -1)) == LABEL_MINUS
    short = simulate(SimConfig(SolParams(1, 1, 0), T=1.0, dt=0.01, seed=14, save_every=50))
    assert boundary_classify(short, SolParams(1, 1, 0)) in (LABEL_UNDECIDED, LABEL_CENTRE)


def test_translated_proxy_formula():
    pr = SolParams(1, 1, 1)
    # proxy of the point one unit off the ray at height 0 is the bound at (0, 1, 0)
    assert upper_bound_iii((0.0, 1.0, 0.0), pr) > 0
