"""Acceptance criteria 1-11, each at its stated tolerance.

Every test stores a one-line verdict in ``RESULTS``; the conftest prints them
after the run. Run directly (``python tests/test_acceptance.py``) for the
acceptance suite alone.
"""
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from esngesture import reservoir as rsv
from esngesture.cli import main as cli_main
from esngesture.config import PRESETS
from esngesture.datasets import load
from esngesture.evaluation import plan_split, run_eval
from esngesture.features import RdmSequence, compute_dtm, compute_rtm
from esngesture.fixtures import fixture_path
from esngesture.nonlinear_readouts import rbf_kernel, scale_gamma, smo_binary
from esngesture.pipeline import build_encoder, sample_maps
from esngesture.readout import design_matrices, fit_ridge
from esngesture.synth import SynthSpec, nearest_centroid_accuracy, synth_generate

sys.path.insert(0, str(Path(__file__).parent))
from oracles import ridge_gd, ridge_inverse, svm_dual_pg  # noqa: E402

RESULTS: dict[int, str] = {}
_parts: dict[int, list] = {}

# Synthetic corpus shaped like the 11-class, 4-antenna, 32x32 recordings;
# the noise level is calibrated for nearest-centroid accuracy in [60%, 80%].
SYNTH = SynthSpec(noise=1.0, seed=0)


def report(n: int, ok: bool, detail: str) -> None:
    """Record a verdict; parametrized criteria accumulate into one line."""
    parts = _parts.setdefault(n, [])
    parts.append((ok, detail))
    verdict = "PASS" if all(p[0] for p in parts) else "FAIL"
    RESULTS[n] = f"criterion {n:2d} {verdict}  " + "; ".join(p[1] for p in parts)
    assert ok, detail


_cache = {}


def soli_synth():
    """Generated once: (records, holdout plan, generation seconds)."""
    if "synth" not in _cache:
        with threadpool_limits(1):
            t0 = time.perf_counter()
            recs = synth_generate(SYNTH, as_maps=True)
            gen_s = time.perf_counter() - t0
        _cache["synth"] = (recs, plan_split(recs, "holdout_50_50", 0), gen_s)
    return _cache["synth"]


def synth_reports():
    if "reports" not in _cache:
        recs, plan, gen_s = soli_synth()
        with threadpool_limits(1):
            t0 = time.perf_counter()
            mr = run_eval(recs, PRESETS["soli_mr"], plan)
            sr = run_eval(recs, PRESETS["soli_sr"], plan)
            run_s = time.perf_counter() - t0
        _cache["reports"] = (mr, sr, gen_s + run_s)
    return _cache["reports"]


def test_criterion_01_ridge_oracles():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_inv = worst_gd = 0.0
    for _ in range(20):
        f, s, c = int(rng.integers(10, 51)), int(rng.integers(30, 201)), int(rng.integers(2, 12))
        states = rng.uniform(-1, 1, (s, f))
        labels = rng.integers(0, c, s)
        labels[:c] = np.arange(c)
        lam = float(10 ** rng.uniform(-2, 0))
        d = design_matrices(states, labels, c)
        w = fit_ridge(d, lam).w_out
        ref = ridge_inverse(d.x, d.y, lam)
        gd = ridge_gd(d.x, d.y, lam)
        worst_inv = max(worst_inv, np.linalg.norm(w - ref) / np.linalg.norm(ref))
        worst_gd = max(worst_gd, np.linalg.norm(w - gd) / np.linalg.norm(gd))
    secs = time.perf_counter() - t0
    report(1, worst_inv <= 1e-8 and worst_gd <= 1e-4 and secs < 10,
           f"inverse err {worst_inv:.1e} (<=1e-8), GD err {worst_gd:.1e} (<=1e-4), {secs:.1f}s (<10s)")


@pytest.mark.parametrize("name,spec,input_dim", [("soli_sr", rsv.SOLI_SINGLE, 256),
                                                 ("dopnet_sr", rsv.DOPNET_SINGLE, 800)])
def test_criterion_02_echo_state_property(name, spec, input_dim):
    res = rsv.build(spec.with_(input_dim=input_dim))
    rng = np.random.default_rng(2)
    u = rng.uniform(0, 1, (200, input_dim))
    x0 = rng.uniform(-0.5, 0.5, spec.nodes)
    dist = float(np.linalg.norm(rsv.run(res, u) - rsv.run(res, u, x0)))
    report(2, dist <= 1e-6, f"{name} distance after 200 steps {dist:.2e} (<=1e-6)")


@pytest.mark.parametrize("name,spec,horizon", [("soli_sr", rsv.SOLI_SINGLE, 12000),
                                               ("dopnet_sr", rsv.DOPNET_SINGLE, 1000)])
def test_echo_state_property_long_horizon(name, spec, horizon):
    # supplementary: the initial condition is forgotten given enough steps;
    # with a small leak the gap contracts by roughly 1 - alpha * (1 - rho * tanh')
    # per step, so the slow Soli setting needs thousands of steps
    res = rsv.build(spec.with_(input_dim=64))
    rng = np.random.default_rng(2)
    u = rng.uniform(0, 1, (horizon, 64))
    x0 = rng.uniform(-0.5, 0.5, spec.nodes)
    xa, xb = np.zeros(spec.nodes), x0.copy()
    gaps = []
    for t in range(horizon):
        xa, xb = rsv.step(res, xa, u[t]), rsv.step(res, xb, u[t])
        gaps.append(np.linalg.norm(xa - xb))
    assert gaps[-1] <= 1e-6
    assert all(b <= a for a, b in zip(gaps[::50], gaps[50::50]))


def test_criterion_03_spectral_radius():
    worst = {}
    eig_worst = 0.0
    for name, spec in [("soli_sr", rsv.SOLI_SINGLE), ("soli_mr", rsv.SOLI_MULTI),
                       ("dopnet_sr", rsv.DOPNET_SINGLE)]:
        errs = []
        for seed in range(50):
            res = rsv.build(spec.with_(seed=seed, input_dim=4))
            errs.append(abs(res.achieved_rho - spec.spectral_radius) / spec.spectral_radius)
            if seed < 3:  # dense eigensolver cross-check on a few seeds
                rho = float(np.abs(np.linalg.eigvals(res.w_res)).max())
                eig_worst = max(eig_worst, abs(rho - spec.spectral_radius) / spec.spectral_radius)
        worst[name] = max(errs)
    ok = max(worst.values()) <= 1e-3 and eig_worst <= 1e-3
    report(3, ok, "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
           + f", eigvals check {eig_worst:.1e} (<=1e-3)")


def test_criterion_04_map_conservation():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(100):
        t, a, r, d = (int(v) for v in rng.integers([1, 1, 2, 2], [40, 5, 33, 33]))
        # values on a float32 grid so both summation orders are exact in float64
        frames = rng.integers(0, 2 ** 20, (t, a, r, d)).astype(np.float64) * 2.0 ** -10
        seq = RdmSequence(frames)
        for ant in range(a):
            rtm, dtm = compute_rtm(seq, ant).values, compute_dtm(seq, ant).values
            bad += int(not np.array_equal(rtm.sum(axis=1), dtm.sum(axis=1)))
    report(4, bad == 0, f"{bad} of 100 sequences violate exact RTM/DTM total equality")


def test_criterion_05_synthetic_end_to_end():
    recs, plan, _ = soli_synth()
    by_id = {r.id: r for r in recs}
    fold = plan.folds[0]
    nc = nearest_centroid_accuracy([by_id[i] for i in fold.train], [by_id[i] for i in fold.test])
    mr, sr, secs = synth_reports()
    a_mr, a_sr = mr.mean_accuracy, sr.mean_accuracy
    ok = 0.60 <= nc <= 0.80 and a_mr >= 0.95 and a_mr - a_sr >= 0.02 and secs < 120
    report(5, ok, f"NC {100 * nc:.1f}% (60-80), MR-RR_N {100 * a_mr:.2f}% (>=95), "
                  f"SR-RR_L {100 * a_sr:.2f}% (gap {100 * (a_mr - a_sr):.2f} >= 2), {secs:.0f}s (<120s)")


def test_criterion_06_protocols():
    recs, _, _ = soli_synth()
    meta = {r.id: r for r in recs}
    problems = []
    kf = plan_split(recs, "kfold_10", 0)
    tests = [i for f in kf.folds for i in f.test]
    if sorted(tests) != sorted(meta):
        problems.append("kfold test sets do not partition the data")
    for f in kf.folds:
        if set(f.train) & set(f.test) or len(f.train) + len(f.test) != len(recs):
            problems.append(f"kfold {f.key} train/test overlap")
    for lab in {r.label for r in recs}:
        counts = [sum(meta[i].label == lab for i in f.test) for f in kf.folds]
        if max(counts) - min(counts) > 1:
            problems.append(f"kfold class {lab} counts {counts}")
    loso = plan_split(recs, "leave_one_subject_out", 0)
    for f in loso.folds:
        if {meta[i].subject for i in f.train} & {meta[i].subject for i in f.test}:
            problems.append(f"LOSO {f.key} leaks a subject")
    so = plan_split(recs, "leave_one_session_out", 0)
    for f in so.folds:
        pair = lambda i: (meta[i].subject, meta[i].session)  # noqa: E731
        if {pair(i) for i in f.train} & {pair(i) for i in f.test}:
            problems.append(f"session-out {f.key} leaks a session")
    report(6, not problems, f"{len(kf.folds)} k-fold, {len(loso.folds)} LOSO, {len(so.folds)} "
                            f"session-out folds; {'; '.join(problems) or 'no violations'}")


def test_criterion_07_confusion_identities():
    mr, sr, _ = synth_reports()
    recs, plan, _ = soli_synth()
    runs = [(mr, recs, plan), (sr, recs, plan)]
    fixture = load(fixture_path())
    for protocol in ("holdout_50_50", "kfold_10", "leave_one_subject_out", "leave_one_session_out"):
        fplan = plan_split(fixture, protocol, 0, folds=3)
        for readout in ("rr_l", "rr_n", "svm", "rf"):
            cfg = PRESETS["soli_mr"].with_(readout=readout, forest_trees=20,
                                           reservoir=rsv.SOLI_MULTI.with_(nodes=16))
            runs.append((run_eval(fixture, cfg, fplan), fixture, fplan))
    problems = 0
    for rep, source, p in runs:
        m = rep.confusion
        label = {r.id: r.label for r in source}
        tested = [label[i] for f in p.folds for i in f.test]
        expected = [tested.count(c) for c in rep.classes]
        problems += int(m.sum(axis=1).tolist() != expected)
        problems += int(np.trace(m) != sum(f.correct for f in rep.folds))
        problems += int(not np.isclose(np.trace(m) / m.sum(), rep.pooled_accuracy))
        for f in rep.folds:
            problems += int(not np.isclose(f.accuracy, f.correct / f.n_test))
    report(7, problems == 0, f"{len(runs)} reports checked, {problems} identity violations")


def test_criterion_08_svm_oracle():
    rng = np.random.default_rng(8)
    worst_agree, worst_eq, bounds_ok = 1.0, 0.0, True
    c = 10.0
    for _ in range(10):
        n = 60
        y = np.repeat([1.0, -1.0], n // 2)
        x = rng.standard_normal((n, 2)) + 1.5 * y[:, None] * np.array([1.0, 0.0])
        gamma = scale_gamma(x)
        k = rbf_kernel(x, x, gamma)
        alpha, b, _ = smo_binary(k, y, c)
        a_ref, b_ref = svm_dual_pg(k, y, c)
        probe = np.vstack([x, rng.uniform(-4, 4, (200, 2))])
        kp = rbf_kernel(x, probe, gamma)
        ours, ref = (alpha * y) @ kp + b, (a_ref * y) @ kp + b_ref
        worst_agree = min(worst_agree, float(np.mean(np.sign(ours) == np.sign(ref))))
        worst_eq = max(worst_eq, abs(float(alpha @ y)))
        bounds_ok &= bool(alpha.min() >= 0 and alpha.max() <= c)
    ok = worst_agree >= 0.95 and worst_eq <= 1e-8 and bounds_ok
    report(8, ok, f"min sign agreement {100 * worst_agree:.1f}% (>=95), "
                  f"max |sum a y| {worst_eq:.1e} (<=1e-8), box {'ok' if bounds_ok else 'violated'}")


def test_criterion_09_determinism(tmp_path, capsys):
    ds = str(fixture_path().parent)
    for run in ("a", "b"):
        assert cli_main(["--threads", "1", "train", "--dataset", ds, "--seed", "3",
                         "--output", str(tmp_path / f"{run}.esng")]) == 0
        assert cli_main(["--threads", "1", "evaluate", "--dataset", ds, "--seed", "3",
                         "--protocol", "kfold_10", "--set", "folds=3",
                         "--output", str(tmp_path / f"ev_{run}")]) == 0
    capsys.readouterr()
    same_model = (tmp_path / "a.esng").read_bytes() == (tmp_path / "b.esng").read_bytes()
    same_report = all((tmp_path / "ev_a" / f).read_bytes() == (tmp_path / "ev_b" / f).read_bytes()
                      for f in ("report.json", "confusion.csv", "config.json"))
    report(9, same_model and same_report,
           f"model files {'identical' if same_model else 'differ'}, "
           f"reports {'identical' if same_report else 'differ'}")


@pytest.mark.parametrize("env,preset,target", [("ESNG_SOLI_DIR", "soli_mr", 0.968),
                                               ("ESNG_DOPNET_DIR", "dopnet_sr", 0.927)])
def test_criterion_10_real_data(env, preset, target):
    path = os.environ.get(env)
    if not path:
        RESULTS.setdefault(10, "criterion 10 SKIP  set ESNG_SOLI_DIR / ESNG_DOPNET_DIR to converted data")
        pytest.skip(f"{env} not set")
    recs = load(path, as_maps=True)
    rep = run_eval(recs, PRESETS[preset], plan_split(recs, "holdout_50_50", 0))
    acc = rep.mean_accuracy
    if "SKIP" in RESULTS.get(10, ""):
        del RESULTS[10]
    report(10, acc >= target, f"{preset} holdout {100 * acc:.2f}% (>={100 * target:.1f})")


def test_criterion_11_dimensions():
    recs, _, _ = soli_synth()
    example = sample_maps(recs[0], PRESETS["soli_mr"].normalization)
    mr = build_encoder(PRESETS["soli_mr"], example).state_dim
    sr = build_encoder(PRESETS["soli_sr"], example).state_dim
    report(11, mr == 400 and sr == 500 and mr < sr, f"MR readout input {mr} < SR {sr}")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
