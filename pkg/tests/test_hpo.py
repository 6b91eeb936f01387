import json

import numpy as np
import pytest

from esngesture.config import PipelineConfig
from esngesture.errors import ParameterError
from esngesture.hpo import (Interval, SearchSpace, apply_params, default_space, evaluate_trial,
                            grid_search, random_search)
from esngesture.reservoir import SOLI_MULTI, ReservoirSpec
from esngesture.synth import SynthSpec, synth_generate

BASE = PipelineConfig(reservoir=ReservoirSpec(nodes=16, spectral_radius=0.9, input_scaling=1.0,
                                              density=0.5, leaking_rate=0.2, input_dim=8))


@pytest.fixture(scope="module")
def recs():
    return synth_generate(SynthSpec(classes=3, samples_per_class=12, subjects=3, sessions=2,
                                    noise=0.6, range_bins=8, doppler_bins=8, antennas=1,
                                    min_steps=8, max_steps=14), as_maps=True)


def point_space(cfg):
    r = cfg.reservoir
    return SearchSpace((r.nodes,), Interval(r.spectral_radius, r.spectral_radius),
                       Interval(r.input_scaling, r.input_scaling), Interval(r.density, r.density),
                       Interval(r.leaking_rate, r.leaking_rate, log=True),
                       Interval(cfg.ridge_lambda, cfg.ridge_lambda, log=True))


def small_space():
    return SearchSpace((8, 16, 24), Interval(0.5, 1.2), Interval(0.3, 2.0), Interval(0.2, 1.0),
                       Interval(0.05, 0.8, log=True), Interval(0.01, 1.0, log=True))


def test_interval_validation():
    with pytest.raises(ParameterError):
        Interval(2.0, 1.0)
    with pytest.raises(ParameterError):
        Interval(0.0, 1.0, log=True)
    with pytest.raises(ParameterError):
        SearchSpace((10,), Interval(0.5, 1), Interval(0.1, 1), Interval(0.1, 1.5),
                    Interval(0.1, 1, True), Interval(0.1, 1, True))


def test_log_uniform_sampling():
    rng = np.random.default_rng(0)
    v = np.array([Interval(1e-3, 1.0, log=True).sample(rng) for _ in range(4000)])
    assert v.min() >= 1e-3 and v.max() <= 1.0
    # log-uniform: each decade holds about a third of the mass
    assert abs(np.mean(v < 1e-2) - 1 / 3) < 0.04


def test_default_space_brackets_config():
    sp = default_space(PipelineConfig())
    assert sp.spectral_radius.low == pytest.approx(0.95 / 4) and sp.spectral_radius.high == pytest.approx(3.8)
    assert SOLI_MULTI.nodes in sp.nodes
    assert sp.leaking_rate.log and sp.ridge_lambda.log


def test_budget_one(recs):
    res = random_search(small_space(), 1, recs, BASE, seed=1)
    assert len(res.trials) == 1 and res.best is res.trials[0]


def test_point_space_identical_objectives(recs):
    res = random_search(point_space(BASE), 3, recs, BASE)
    assert len({t.objective for t in res.trials}) == 1


def test_log_and_best(recs):
    logged = []
    res = random_search(small_space(), 5, recs, BASE, seed=2, log=logged.append)
    assert len(res.trials) == 5 and [t.index for t in logged] == list(range(5))
    assert all(res.best.objective >= t.objective for t in res.trials)
    assert all(0 <= t.objective <= 1 for t in res.trials)
    first_max = max(t.objective for t in res.trials)
    assert res.best.index == min(t.index for t in res.trials if t.objective == first_max)
    assert json.loads(res.dumps())["best"] == res.best.index


def test_random_search_deterministic(recs):
    a = random_search(small_space(), 3, recs, BASE, seed=5)
    b = random_search(small_space(), 3, recs, BASE, seed=5)
    assert a.to_dict(timings=False) == b.to_dict(timings=False)


def test_failed_trial_recorded(recs):
    res = grid_search({"nodes": [16], "spectral_radius": [0.9]}, [recs[0]] * 2, BASE)
    assert res.trials[0].objective == 0.0 and res.trials[0].error


def test_grid_one_point(recs):
    res = grid_search({"ridge_lambda": [0.1]}, recs, BASE)
    assert len(res.trials) == 1
    assert res.best.objective == pytest.approx(evaluate_trial(recs, BASE, {"ridge_lambda": 0.1}))


def test_grid_lexicographic(recs):
    res = grid_search({"nodes": [8, 16], "leaking_rate": [0.1, 0.3]}, recs, BASE)
    assert [t.params for t in res.trials] == [
        {"nodes": 8, "leaking_rate": 0.1}, {"nodes": 8, "leaking_rate": 0.3},
        {"nodes": 16, "leaking_rate": 0.1}, {"nodes": 16, "leaking_rate": 0.3}]


def test_grid_represents_multi_reservoir_values():
    cfg = apply_params(PipelineConfig(), {"spectral_radius": 0.95, "input_scaling": 1.0,
                                          "density": 0.9, "leaking_rate": 0.0263})
    r = cfg.reservoir
    assert (r.spectral_radius, r.input_scaling, r.density, r.leaking_rate) == (0.95, 1.0, 0.9, 0.0263)


def test_grid_errors(recs):
    with pytest.raises(ParameterError):
        grid_search({}, recs, BASE)
    with pytest.raises(ParameterError):
        grid_search({"colour": [1]}, recs, BASE)


@pytest.mark.slow
def test_search_matches_or_beats_defaults(recs):
    baseline = evaluate_trial(recs, BASE, {})
    res = random_search(small_space(), 30, recs, BASE, seed=0)
    assert res.best.objective >= baseline - 0.01
