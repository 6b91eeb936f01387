import numpy as np
import pytest

from esngesture.datasets import load, save
from esngesture.errors import ParameterError
from esngesture.evaluation import plan_split
from esngesture.features import compute_dtm
from esngesture.synth import (CATALOG, SynthSpec, nearest_centroid_accuracy, synth_generate,
                              trajectory)

SMALL = dict(range_bins=16, doppler_bins=16, antennas=2, min_steps=20, max_steps=40)


def test_catalog_size():
    assert len(CATALOG) == 12
    SynthSpec(classes=12)
    with pytest.raises(ParameterError):
        SynthSpec(classes=13)


def test_trajectories_in_range():
    s = np.linspace(0, 1, 101)
    for name in CATALOG:
        r = trajectory(name, s)
        assert r.shape == (101,) and r.min() >= 0 and r.max() <= 1


def test_noise_free_same_class_differs_only_in_duration():
    recs = synth_generate(SynthSpec(classes=2, samples_per_class=6, subjects=1, sessions=1,
                                    noise=0.0, session_jitter=0.0, **SMALL))
    a, b = [r for r in recs if r.label == CATALOG[0]][:2]
    if a.steps == b.steps:
        assert np.array_equal(a.payload.frames, b.payload.frames)
    same = [r for r in recs if r.label == CATALOG[0]]
    by_len = {}
    for r in same:
        by_len.setdefault(r.steps, []).append(r)
    for group in by_len.values():
        for r in group[1:]:
            assert np.array_equal(r.payload.frames, group[0].payload.frames)


def test_approach_doppler_positive_half():
    recs = synth_generate(SynthSpec(classes=1, samples_per_class=4, noise=0.0, **SMALL))
    for r in recs:
        dtm = compute_dtm(r.payload).values
        bins = np.arange(dtm.shape[1])
        centroid = (dtm * bins).sum(1) / dtm.sum(1)
        interior = centroid[2:-2]
        assert np.all(interior > dtm.shape[1] // 2)


def test_deterministic_in_seed():
    a = synth_generate(SynthSpec(classes=3, samples_per_class=3, noise=0.5, seed=4, **SMALL))
    b = synth_generate(SynthSpec(classes=3, samples_per_class=3, noise=0.5, seed=4, **SMALL))
    c = synth_generate(SynthSpec(classes=3, samples_per_class=3, noise=0.5, seed=5, **SMALL))
    assert all(np.array_equal(x.payload.frames, y.payload.frames) for x, y in zip(a, b))
    assert not np.array_equal(a[0].payload.frames[:1], c[0].payload.frames[:1])


def test_reload_reproduces_generator(tmp_path):
    spec = SynthSpec(classes=4, samples_per_class=50, noise=0.4, **SMALL)
    recs = synth_generate(spec)
    save(recs, tmp_path, "s")
    back = load(tmp_path)
    assert all(np.array_equal(x.payload.frames, y.payload.frames) for x, y in zip(recs, back))


def test_subject_session_assignment():
    recs = synth_generate(SynthSpec(classes=2, samples_per_class=20, subjects=5, sessions=2, **SMALL))
    assert len({r.subject for r in recs}) == 5
    per = {}
    for r in recs:
        per.setdefault(r.subject, set()).add(r.session)
    assert all(len(v) == 2 for v in per.values())


def test_noise_free_nearest_centroid_separable():
    recs = synth_generate(SynthSpec(classes=11, samples_per_class=20, noise=0.0, **SMALL))
    plan = plan_split(recs, "holdout_50_50")
    by_id = {r.id: r for r in recs}
    tr = [by_id[i] for i in plan.folds[0].train]
    te = [by_id[i] for i in plan.folds[0].test]
    assert nearest_centroid_accuracy(tr, te) == 1.0


def test_as_maps_matches_rdm():
    spec = SynthSpec(classes=2, samples_per_class=2, noise=0.2, **SMALL)
    rdm = synth_generate(spec)
    maps = synth_generate(spec, as_maps=True)
    assert np.array_equal(compute_dtm(rdm[1].payload, 1).values, maps[1].payload[3].values)
