"""Test track evaluation, sweeps and the CSV outputs."""

import csv
import math
from dataclasses import replace

import numpy as np
import pytest

from aster.evaluation import (
    EVENTS_COLUMN,
    REPORT_COLUMNS,
    TRAJECTORY_COLUMNS,
    TRAVERSAL_EVENT,
    EvalReport,
    HoverPolicy,
    OraclePolicy,
    RandomPolicy,
    evaluate,
    evaluation_tracks,
    read_sweep_csv,
    read_trajectory_csv,
    sweep,
    trajectory_speeds,
    write_eval_report,
    write_sweep_csv,
)
from aster.tracks import Track, WaypointKind, make_waypoint

# pylint: disable=missing-function-docstring,redefined-outer-name

STRAIGHT = Track(
    waypoints=(make_waypoint((0.0, 0.0, 4.0), WaypointKind.UPRIGHT, 0.0),),
    name="straight",
)


def oracle(_: int) -> OraclePolicy:
    return OraclePolicy()


def hover(_: int) -> HoverPolicy:
    return HoverPolicy()


@pytest.fixture
def short_cfg(env_cfg):
    return replace(env_cfg, track_timeout=1.0)


def test_oracle_flies_a_straight_track(env_cfg, params, seeds):
    report = evaluate(oracle, [STRAIGHT], env_cfg, params, seeds)
    assert report.success_rate == 1.0
    record = report.records[0]
    assert record.traversals == 1
    assert 0.0 < record.completion_time < env_cfg.track_timeout
    assert 0.0 < record.avg_velocity <= record.max_velocity
    assert report.avg_completion_time == record.completion_time


def test_hover_never_succeeds(short_cfg, params, seeds):
    report = evaluate(hover, [STRAIGHT], short_cfg, params, seeds)
    record = report.records[0]
    assert report.success_rate == 0.0
    assert not record.success
    assert math.isnan(record.completion_time)
    assert math.isnan(report.avg_completion_time)
    assert record.traversals == 0
    assert record.max_velocity < 1e-6


def test_random_policy_reports_in_track_order(short_cfg, params, seeds):
    tracks = evaluation_tracks(3, 2, short_cfg, seeds)
    report = evaluate(
        lambda i: RandomPolicy(seeds.generator("policy", i)),
        tracks,
        short_cfg,
        params,
        seeds,
        workers=2,
    )
    assert [record.track_id for record in report.records] == [0, 1, 2]
    assert [record.track for record in report.records] == [
        "random-0",
        "random-1",
        "random-2",
    ]
    assert 0.0 <= report.success_rate <= 1.0
    assert all(np.isfinite(r.max_velocity) for r in report.records)


def test_evaluation_tracks_are_reproducible(env_cfg, seeds):
    first = evaluation_tracks(2, 4, env_cfg, seeds)
    second = evaluation_tracks(2, 4, env_cfg, seeds)
    assert [t.waypoints for t in first] == [t.waypoints for t in second]
    assert all(len(track) == 4 for track in first)


def test_report_files_are_consistent(tmp_path, env_cfg, params, seeds):
    report = evaluate(
        oracle, [STRAIGHT], env_cfg, params, seeds, keep_trajectory=True
    )
    write_eval_report(report, tmp_path)
    with (tmp_path / "eval_report.csv").open(newline="") as stream:
        rows = list(csv.DictReader(stream))
    assert tuple(rows[0]) == REPORT_COLUMNS
    assert rows[0]["success"] == "1"
    assert "success rate: 1.000" in (
        tmp_path / "eval_summary.txt"
    ).read_text()

    path = tmp_path / "trajectory_0000.csv"
    with path.open(newline="") as stream:
        header = next(csv.reader(stream))
    assert header == TRAJECTORY_COLUMNS + [EVENTS_COLUMN]
    trajectory = read_trajectory_csv(path)
    record = report.records[0]
    assert len(trajectory) == len(record.trajectory)
    speeds = trajectory_speeds(trajectory)
    assert math.isclose(np.mean(speeds), record.avg_velocity, rel_tol=1e-9)
    assert math.isclose(max(speeds), record.max_velocity, rel_tol=1e-9)
    assert TRAVERSAL_EVENT in trajectory[-1][EVENTS_COLUMN].split(";")
    assert math.isclose(
        float(trajectory[-1]["t"]), record.completion_time, rel_tol=1e-12
    )
    assert {row["phase"] for row in trajectory} <= {"taut", "slack"}


def test_sweep_without_variation_matches_evaluate(env_cfg, params, seeds):
    (row,) = sweep(oracle, [STRAIGHT], env_cfg, params, seeds, "l", [0.0])
    report = evaluate(oracle, [STRAIGHT], env_cfg, params, seeds)
    assert row.variation == 0.0
    assert row.success_rate == report.success_rate
    assert row.avg_completion_time == report.avg_completion_time
    assert row.avg_velocity == report.avg_velocity


def test_sweep_csv(tmp_path, short_cfg, params, seeds):
    rows = sweep(
        hover, [STRAIGHT], short_cfg, params, seeds, "m_l", [-0.2, 0.2]
    )
    path = tmp_path / "sweep_m_l.csv"
    write_sweep_csv(rows, path)
    parsed = read_sweep_csv(path)
    assert [row.variation for row in parsed] == [-0.2, 0.2]
    assert [row.param for row in parsed] == ["m_l", "m_l"]
    assert [row.success_rate for row in parsed] == [0.0, 0.0]


def test_sweep_rejects_unknown_parameter(env_cfg, params, seeds):
    with pytest.raises(ValueError):
        sweep(oracle, [STRAIGHT], env_cfg, params, seeds, "g_mag")


def test_empty_report():
    report = EvalReport.from_records([])
    assert report.success_rate == 0.0
    assert math.isnan(report.avg_completion_time)
