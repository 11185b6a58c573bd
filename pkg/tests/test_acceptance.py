"""Full-scale acceptance runs A1 to A7.

Each test prints one ``PASS``/``FAIL`` line with the measured values, then
asserts the criterion.  Runtime limits are part of each criterion.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from idla.experiments import SUMMARY, ExperimentConfig, run_experiment
from idla.validate import ValidateOptions, run_checks

SEED = 7


def _report(capsys, tag: str, ok: bool, detail: str, seconds: float, limit: float) -> None:
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} {tag}: {detail}; runtime {seconds:.1f}s (limit {limit:.0f}s)")


def _summary(recs, n, name, param=""):
    for r in recs:
        if r.replicate == SUMMARY and r.n == n and r.observable == name and r.param == param:
            return r.value
    raise KeyError((n, name, param))


def _timed(name, cfg):
    t0 = time.perf_counter()
    recs = run_experiment(name, cfg)
    return recs, time.perf_counter() - t0


@pytest.mark.slow
def test_a1_fluctuations(capsys):
    ns = (16, 32, 64, 128)
    recs, secs = _timed("fluctuations", ExperimentConfig(n=ns, replicates=200, seed=SEED))
    mean = np.array([_summary(recs, n, "mean_max_fluctuation", "") for n in ns], float)
    ratio = mean / np.log(ns)
    band = ratio.max() / ratio.min()
    slope = float(np.polyfit(np.log(ns), np.log(mean), 1)[0])
    per_n = mean / np.array(ns)
    sublinear = slope < 1.0 and bool(np.all(np.diff(per_n) < 0))
    ok = sublinear and band <= 3.0 and secs <= 600
    detail = (
        f"mean max fluctuation {np.round(mean, 3).tolist()}, /lnN {np.round(ratio, 3).tolist()}, "
        f"band {band:.2f} (<= 3), log-log slope {slope:.2f} (< 1)"
    )
    _report(capsys, "A1 fluctuations", ok, detail, secs, 600)
    assert sublinear and band <= 3.0
    assert secs <= 600


@pytest.mark.slow
def test_a2_stationary_height(capsys):
    ns = (16, 32, 64)
    cfg = ExperimentConfig(n=ns, replicates=200, samples=10, burnin_mult=20.0, seed=SEED)
    recs, secs = _timed("stationary", cfg)
    q99 = np.array([_summary(recs, n, "q99_h_over_logN") for n in ns], float)
    hmax = [_summary(recs, n, "max_height") for n in ns]
    band = q99.max() / q99.min()
    below_n = all(h <= n for h, n in zip(hmax, ns))
    ok = band <= 3.0 and below_n and secs <= 900
    detail = f"q99 h/lnN {np.round(q99, 3).tolist()}, band {band:.2f} (<= 3), max height {hmax} (<= N)"
    _report(capsys, "A2 stationary height", ok, detail, secs, 900)
    assert band <= 3.0 and below_n
    assert secs <= 900


@pytest.mark.slow
def test_a3_water_coupling(capsys):
    ds = (0.25, 0.5, 1.0, 2.0, 4.0)
    recs, secs = _timed("coupling", ExperimentConfig(n=(32,), replicates=500, d=ds, seed=SEED))
    freqs = [_summary(recs, 32, "coupling_frequency", f"d={d:g}") for d in ds]
    errors = sum(_summary(recs, 32, "replicates_error", f"d={d:g}") for d in ds)
    p_trend = _summary(recs, 32, "replicate_trend_p")
    p_mk5 = _summary(recs, 32, "mann_kendall_p")
    ok = p_trend < 0.01 and freqs[-1] >= 0.95 and secs <= 1200
    detail = (
        f"frequencies {np.round(freqs, 3).tolist()}, trend p {p_trend:.2g} (< 0.01; 5-point MK p {p_mk5:.3g}), "
        f"largest-d frequency {freqs[-1]:.3f} (>= 0.95), generator errors {errors}"
    )
    _report(capsys, "A3 water coupling", ok, detail, secs, 1200)
    assert p_trend < 0.01 and freqs[-1] >= 0.95
    assert secs <= 1200


@pytest.mark.slow
def test_a4_imbalance_persistence(capsys):
    delta = 0.02
    cfg = ExperimentConfig(n=(64,), replicates=1000, delta=delta, alpha=0.05, burnin_mult=20.0, seed=SEED)
    recs, secs = _timed("imbalance", cfg)
    p = _summary(recs, 64, "p_abs_u0_gt_delta")
    se = _summary(recs, 64, "p_se")
    flips = _summary(recs, 64, "fraction_sign_changed_end")
    inc, inc_se = _summary(recs, 64, "mean_increment"), _summary(recs, 64, "mean_increment_se")
    floor = 0.5 - 10 * delta - 3 * se
    ok = p >= floor and flips <= 0.20 and secs <= 1800
    detail = (
        f"P(|u0| > delta) {p:.3f} (>= {floor:.3f}), sign-change fraction {flips:.3f} (<= 0.20), "
        f"mean increment {inc:.2e} +- {inc_se:.1e}"
    )
    _report(capsys, "A4 imbalance", ok, detail, secs, 1800)
    assert p >= floor
    assert secs <= 1800
    assert flips <= 0.20


@pytest.mark.slow
def test_a5_gff(capsys):
    recs, secs = _timed("gff", ExperimentConfig(n=(64,), replicates=2000, y0=1.0, seed=SEED))
    mean, se = _summary(recs, 64, "mean"), _summary(recs, 64, "se")
    var, rel = _summary(recs, 64, "variance"), _summary(recs, 64, "variance_rel_err")
    ad_p = _summary(recs, 64, "anderson_darling_p")
    target = (1 - math.exp(-4 * math.pi)) / (8 * math.pi)
    ok = abs(mean) <= 3 * se and abs(rel) <= 0.15 and ad_p > 1e-3 and secs <= 1200
    detail = (
        f"mean {mean:.5f} (|.| <= 3 SE = {3 * se:.5f}), variance {var:.6f} vs {target:.6f} "
        f"(rel err {rel:+.3f}, <= 0.15), Anderson-Darling p {ad_p:.3g} (> 1e-3)"
    )
    _report(capsys, "A5 GFF variance", ok, detail, secs, 1200)
    assert abs(mean) <= 3 * se
    assert abs(rel) <= 0.15
    assert ad_p > 1e-3
    assert secs <= 1200


def _battery(capsys, tag, names, limit):
    t0 = time.perf_counter()
    res = run_checks(ValidateOptions(seed=SEED), names)
    secs = time.perf_counter() - t0
    ok = all(r.passed for r in res) and len(res) == len(names)
    with capsys.disabled():
        for r in res:
            print("\n  " + r.line(), end="")
    _report(capsys, tag, ok and secs <= limit, f"{sum(r.passed for r in res)}/{len(names)} checks", secs, limit)
    assert ok
    assert secs <= limit


def test_a6_oracle_exactness(capsys):
    names = [
        "cluster_law_N3_t<=3",
        "settle_contracted_vs_oracle",
        "settle_uncontracted_vs_oracle",
        "smash_order_invariance_exact",
    ]
    _battery(capsys, "A6 oracle exactness", names, 120)


def test_a7_closed_forms(capsys):
    names = ["psi_harmonicity", "q_N_residual", "mgf_first_passage", "apriori_moment_bound_N8"]
    _battery(capsys, "A7 closed-form checks", names, 180)
