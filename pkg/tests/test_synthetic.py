import numpy as np
import pytest

from driverloc.errors import OverlappingActivities
from driverloc.keypoints import CAMERA_VIEWS, build_series, parse_keypoints
from driverloc.synthetic import (ScenarioActivity, ScenarioSpec, gen_null, gen_planted,
                                 gen_scenario, random_scenario, write_scenario)


def test_gen_null_and_planted():
    x = gen_null(50, 3, seed=1)
    assert x.shape == (50, 3)
    assert np.array_equal(x, gen_null(50, 3, seed=1))
    y = gen_planted(50, 3, 10, 20, 2.0, seed=1)
    np.testing.assert_allclose(y[10:20] - x[10:20], 2.0)
    assert np.array_equal(y[:10], x[:10]) and np.array_equal(y[20:], x[20:])
    with pytest.raises(ValueError):
        gen_planted(50, 3, 20, 10, 1.0)
    with pytest.raises(ValueError):
        gen_null(3, 2)


def test_spec_validation():
    with pytest.raises(OverlappingActivities):
        ScenarioSpec(100, activities=[ScenarioActivity(1, 10, 30), ScenarioActivity(2, 20, 40)]).validate()
    with pytest.raises(OverlappingActivities):
        ScenarioSpec(100, activities=[ScenarioActivity(1, 90, 110)]).validate()
    with pytest.raises(ValueError):
        ScenarioSpec(100, dim=4, activities=[ScenarioActivity(1, 10, 20, shift=[1.0])]).validate()


def test_spec_json_round_trip():
    spec = random_scenario(4, seed=3)
    assert ScenarioSpec.from_json(spec.to_json()) == spec


def test_random_scenario_layout():
    spec = random_scenario(10, seed=0)
    acts = spec.activities
    assert len(acts) == 10
    assert all(8 <= a.end_s - a.start_s <= 20.1 for a in acts)
    assert all(b.start_s - a.end_s >= 19.9 for a, b in zip(acts, acts[1:]))
    assert spec.n_seconds >= acts[-1].end_s
    assert random_scenario(10, seed=0) == spec


def test_gen_scenario_views_share_activity():
    spec = ScenarioSpec(120, activities=[ScenarioActivity(5, 40, 60, cov_scale=None)], seed=2)
    series, gt = gen_scenario(spec)
    assert set(series) == set(CAMERA_VIEWS)
    for s in series.values():
        assert s.values.shape == (1200, 22)
        assert 0 < s.values.min() and s.values.max() < 1
    # the activity moves every view away from its own baseline
    for s in series.values():
        inside = s.values[400:600].mean(axis=0)
        outside = np.concatenate([s.values[:400], s.values[600:]]).mean(axis=0)
        assert np.abs(inside - outside).mean() > 0.1
    assert [(a.class_id, a.start_s, a.end_s) for a in gt.activities] == [(5, 40, 60)]
    again, _ = gen_scenario(spec)
    assert all(np.array_equal(series[v].values, again[v].values) for v in series)


def test_cov_scale_activity():
    spec = ScenarioSpec(60, activities=[ScenarioActivity(1, 20, 40, cov_scale=3.0)], seed=0)
    s = gen_scenario(spec)[0][CAMERA_VIEWS[0]]
    assert s.values[200:400].std() > 1.5 * s.values[:200].std()


def test_write_scenario_reads_back(tmp_path):
    spec = random_scenario(2, seed=5)
    paths = write_scenario(spec, tmp_path)
    series, _ = gen_scenario(spec)
    for view in CAMERA_VIEWS:
        with open(paths[view.value], "rb") as fh:
            frames = parse_keypoints(fh, spec.sample_hz)
        s = build_series(frames, spec.sample_hz, spec.video_id, view)
        # pixel coordinates are written with 6 significant digits
        np.testing.assert_allclose(s.values, series[view].values, atol=1e-5)
    assert (tmp_path / "ground_truth.csv").read_text().startswith("video_id,class_id")


def test_gen_null_moments_and_seeds():
    x = gen_null(10_000, 4, seed=0)
    assert np.abs(x.mean(axis=0)).max() < 0.05
    assert not np.array_equal(x[:10], gen_null(10, 4, seed=1))


def test_planted_mean_difference():
    y = gen_planted(20_000, 3, 5_000, 15_000, [1.0, -2.0, 0.5], seed=3)
    diff = y[5_000:15_000].mean(axis=0) - np.concatenate([y[:5_000], y[15_000:]]).mean(axis=0)
    np.testing.assert_allclose(diff, [1.0, -2.0, 0.5], atol=0.06)


def test_empty_scenario():
    series, gt = gen_scenario(ScenarioSpec(30, seed=1))
    assert gt.activities == []
    assert all(len(s) == 300 for s in series.values())
