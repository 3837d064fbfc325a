from __future__ import annotations

import json
import math
import warnings

import numpy as np
import pytest

from tailored_qec import experiments
from tailored_qec.codes import CodeFamily, build_code
from tailored_qec.decoder import WeightMetric, decode
from tailored_qec.experiments import (
    ExperimentSpec,
    PointResult,
    SweepResult,
    ThresholdFitError,
    degeneracy_study,
    failure_rate_pairs,
    fit_threshold,
    run_sweep,
    scaling_model,
    separation,
    subthreshold_scan,
)
from tailored_qec.geometry import LatticeSpec, build_lattice
from tailored_qec.noise import NoiseKind, NoiseSpec, sample_error
from tailored_qec.pauli import LogicalClass, extract_syndrome, is_logical_failure

IID = NoiseSpec(NoiseKind.IID)


def _spec(**kw):
    base = dict(family="CSS", lattices=(3, 5), noise=IID, metric=WeightMetric.manhattan(),
                p_grid=(0.05, 0.1), trials=500, master_seed=1)
    base.update(kw)
    return ExperimentSpec(**base)


def synthetic_points(p_th=0.16, nu=1.5, b=(0.2, 1.0, 0.5), ds=(7, 9, 11, 13), ps=None, trials=50_000, seed=0):
    rng = np.random.default_rng(seed)
    ps = np.linspace(0.14, 0.18, 9) if ps is None else ps
    pts = []
    for d in ds:
        for p in ps:
            mean = float(np.clip(scaling_model((p_th, nu, *b), p, d), 1e-6, 1 - 1e-6))
            fails = int(rng.binomial(trials, mean))
            f = fails / trials
            pts.append(PointResult("CSS", "manhattan", d, d, float(p), 0.0, 0.0, "", 0.0, trials, fails, f,
                                   math.sqrt(f * (1 - f) / trials), 0))
    return pts


def test_spec_validation():
    with pytest.raises(ValueError):
        _spec(trials=0)
    with pytest.raises(ValueError):
        _spec(p_grid=(0.1, 0.05))
    with pytest.raises(ValueError):
        _spec(p_grid=(0.1, 0.1))
    with pytest.raises(ValueError):
        _spec(lattices=((1, 3),))
    assert _spec().lattices == ((3, 3), (5, 5))


@pytest.mark.parametrize("family,noise", [
    ("CSS", IID),
    ("XZZX", NoiseSpec(pair_kind="XZ", p1_fraction=0.25)),
    ("MHHM", NoiseSpec(NoiseKind.GAUSSIAN, sigma_p=0.5)),
    ("MMHH", NoiseSpec(NoiseKind.TOY)),
])
def test_zero_noise_never_fails(family, noise):
    res = run_sweep(_spec(family=family, noise=noise, p_grid=(0.0,), trials=300, metric=WeightMetric.dijkstra()
                          if family == "MHHM" else WeightMetric.manhattan()))
    assert all(pt.failures == 0 for pt in res)


def test_subthreshold_ordering():
    res = run_sweep(_spec(lattices=(3, 7), p_grid=(0.05,), trials=10_000))
    by_d = {pt.distance: pt for pt in res}
    assert by_d[7].p_fail < by_d[3].p_fail
    assert separation(by_d[3], by_d[7]) > 3


def test_result_invariants_and_determinism():
    spec = _spec(lattices=(3,), p_grid=(0.12,), trials=2_500)
    a, b = run_sweep(spec), run_sweep(spec)
    assert a.points == b.points
    pt = a.points[0]
    assert pt.p_fail == pt.failures / pt.trials
    assert pt.stderr == pytest.approx(math.sqrt(pt.p_fail * (1 - pt.p_fail) / pt.trials))
    assert pt.failures == pt.x_flips + pt.z_flips + pt.y_flips
    assert a.metadata["spec"]["master_seed"] == 1 and a.metadata["version"].startswith("0.1.0+")
    other = run_sweep(_spec(lattices=(3,), p_grid=(0.12,), trials=2_500, master_seed=2))
    assert other.points[0].failures != pt.failures or other.points[0].x_flips != pt.x_flips


def test_worker_count_does_not_change_results():
    spec = _spec(lattices=(3, 5), p_grid=(0.08, 0.12), trials=2_200,
                 family="MHHM", noise=NoiseSpec(NoiseKind.GAUSSIAN, sigma_p=0.5, sigma_tot=0.5),
                 metric=WeightMetric.weighted_manhattan())
    assert run_sweep(spec, workers=1).points == run_sweep(spec, workers=2).points


def test_estimator_sanity_against_replicas():
    reps = [run_sweep(_spec(lattices=(5,), p_grid=(0.1,), trials=2_000, master_seed=100 + k)).points[0]
            for k in range(10)]
    spread = np.std([pt.p_fail for pt in reps], ddof=1)
    stderr = np.mean([pt.stderr for pt in reps])
    assert 1 / 1.5 <= spread / stderr <= 1.5


def _pauli_level_failure_rate(family, noise, metric, d, p, trials):
    """Independent slow pipeline: full Pauli errors, the public decoder and logical classes."""
    lat = build_lattice(LatticeSpec.square(d))
    spec = noise.with_p(p)
    fails = 0
    for t in range(trials):
        rng = np.random.default_rng([7, t])
        model = spec.realize(lat.n_qubits, rng)
        code = build_code(family, lat, model)
        err = sample_error(model, lat, t).op
        corr = decode(extract_syndrome(err, code), code, metric, model).op
        fails += is_logical_failure(err * corr, code.logicals, code) is not LogicalClass.NONE
    return fails / trials


@pytest.mark.parametrize("family,noise,metric", [
    ("CSS", IID, WeightMetric.manhattan()),
    ("MHHM", NoiseSpec(NoiseKind.GAUSSIAN, sigma_p=0.5, sigma_tot=0.5), WeightMetric.dijkstra()),
    ("XZZX", NoiseSpec(pair_kind="XZ", p1_fraction=0.25), WeightMetric.degeneracy_plus_correlation()),
])
def test_flip_space_matches_pauli_level_simulation(family, noise, metric):
    trials = 1_500
    slow = _pauli_level_failure_rate(family, noise, metric, 3, 0.12, trials)
    fast = run_sweep(_spec(family=family, noise=noise, metric=metric, lattices=(3,), p_grid=(0.12,),
                           trials=trials)).points[0].p_fail
    sd = math.sqrt(slow * (1 - slow) / trials + fast * (1 - fast) / trials)
    assert abs(slow - fast) < 4 * sd


def test_xxzz_balances_logical_classes_under_bias():
    eta = 10.0
    bias = (0.5 / (eta + 1), 0.5 / (eta + 1), eta / (eta + 1))
    res = run_sweep(_spec(family="XXZZ", noise=NoiseSpec(bias=bias), lattices=(5,), p_grid=(0.1,), trials=20_000))
    pt = res.points[0]
    x, z = pt.x_flips + pt.y_flips, pt.z_flips + pt.y_flips
    assert abs(x - z) < 3 * math.sqrt(pt.x_flips + pt.z_flips)
    css = run_sweep(_spec(noise=NoiseSpec(bias=bias), lattices=(5,), p_grid=(0.1,), trials=20_000)).points[0]
    # the undeformed code is lopsided under the same noise
    assert css.x_flips + css.y_flips < 0.5 * (css.z_flips + css.y_flips)


def test_block_failure_reports_coordinates(monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("bad")

    monkeypatch.setattr(experiments, "simulate_block", boom)
    with pytest.raises(RuntimeError, match=r"d=\(3,3\) p=0.05 block=0"):
        run_sweep(_spec(lattices=(3,), p_grid=(0.05,)))


def test_csv_round_trip(tmp_path):
    res = run_sweep(_spec(trials=200))
    res.to_csv(tmp_path / "r.csv")
    res.write_manifest(tmp_path / "r.json")
    again = SweepResult.from_csv(tmp_path / "r.csv")
    assert again.points == res.points
    assert again.metadata["spec"] == json.loads(json.dumps(res.metadata["spec"]))
    header = (tmp_path / "r.csv").read_text().splitlines()[0].split(",")
    assert header[:14] == ["family", "metric", "d1", "d2", "p", "sigma_p", "sigma_tot", "pair_kind", "p2",
                           "trials", "failures", "p_fail", "stderr", "seed"]
    assert len(res.select(d1=3)) == 2


def test_threshold_fit_closed_loop():
    fit = fit_threshold(synthetic_points())
    assert abs(fit.p_th - 0.16) < 0.002
    assert abs(fit.p_th - 0.16) < 2 * fit.p_th_stderr + 1e-4
    assert abs(fit.nu - 1.5) < 2 * fit.nu_stderr + 0.05
    assert fit.covariance.shape == (5, 5)
    assert fit.fit_window[0] <= fit.p_th <= fit.fit_window[1]
    assert fit.dof == 36 - 5 and fit.chi2 > 0
    assert fit.alpha_beta == (1.0, pytest.approx(1 / fit.nu))


def test_threshold_fit_window():
    pts = synthetic_points(ps=np.linspace(0.10, 0.22, 13))
    fit = fit_threshold(pts, window=(0.14, 0.18))
    assert fit.fit_window == (0.14, 0.18)
    assert abs(fit.p_th - 0.16) < 0.003


def test_threshold_fit_errors():
    flat = synthetic_points(b=(0.2, 0.0, 0.0))
    with pytest.raises(ThresholdFitError):
        fit_threshold(flat)
    with pytest.raises(ThresholdFitError):
        fit_threshold(synthetic_points(ds=(7, 9)))
    with pytest.raises(ThresholdFitError):
        fit_threshold(synthetic_points(ps=np.linspace(0.14, 0.18, 3)))
    # all curves below threshold: no crossing inside the window
    with pytest.raises(ThresholdFitError):
        fit_threshold(synthetic_points(ps=np.linspace(0.10, 0.13, 5)))


def test_subthreshold_scan():
    spec = _spec(lattices=(3, 5, 7), p_grid=(0.06,), trials=4_000)
    a, b = subthreshold_scan(spec), subthreshold_scan(spec)
    assert a == b
    assert a.slope < 0 and a.distances == (3, 5, 7)
    with pytest.raises(ValueError):
        subthreshold_scan(_spec())


def test_subthreshold_scan_drops_zero_points():
    pts = synthetic_points(ps=[0.12], ds=(5, 7, 9))
    pts.append(PointResult("CSS", "manhattan", 11, 11, 0.12, 0, 0, "", 0, 100, 0, 0.0, 0.0, 0))
    with pytest.warns(UserWarning, match="d=11"):
        est = subthreshold_scan(pts)
    assert est.distances == (5, 7, 9)


def test_slope_vanishes_at_the_crossing():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        est = subthreshold_scan(synthetic_points(ps=[0.16], ds=(5, 7, 9, 11, 13), trials=200_000))
    assert abs(est.slope) < 3 * est.stderr + 1e-3


def test_degeneracy_study_rows():
    rows = degeneracy_study("rotated", "single", distances=(3, 5), trials=400, p=0.08)
    assert [r.distance for r in rows] == [3, 5]
    for r in rows:
        assert r.baseline.metric == "manhattan" and r.degenerate.metric == "degeneracy"
        assert r.z == separation(r.baseline, r.degenerate)
    with pytest.raises(ValueError):
        degeneracy_study("rotated", "triple")


def test_failure_rate_pairs_and_separation():
    a = run_sweep(_spec(trials=300))
    b = run_sweep(_spec(trials=300, master_seed=9))
    pairs = failure_rate_pairs(a, b)
    assert [(d, x.p) for d, x, _ in pairs] == [(3, 0.05), (3, 0.1), (5, 0.05), (5, 0.1)]
    same = a.points[0]
    assert separation(same, same) == 0.0
