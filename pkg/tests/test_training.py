"""Test rollout collection, the training loop and checkpoints."""

import math
from dataclasses import replace

import numpy as np
import pytest
import torch

from aster.config import AsterConfig, fingerprint, read_config
from aster.env import ResetMode, VecEnv
from aster.errors import CheckpointError
from aster.policy import ActorCritic, PpoConfig
from aster.seeding import SeedManager
from aster.training import (
    METRIC_COLUMNS,
    collect_rollout,
    load_checkpoint,
    read_metrics_csv,
    save_checkpoint,
    train,
)

# pylint: disable=missing-function-docstring,redefined-outer-name

TINY = AsterConfig(
    ppo=PpoConfig(
        num_envs=2,
        horizon=4,
        iterations=2,
        checkpoint_every=1,
        hidden_sizes=(8,),
        epochs=1,
        num_minibatches=2,
    )
)


def same_parameters(first: ActorCritic, second: ActorCritic) -> bool:
    return all(
        torch.equal(a, b)
        for a, b in zip(first.parameters(), second.parameters())
    )


def test_zero_iterations_only_writes_config(tmp_path, seeds):
    result = train(TINY, seeds, out_dir=tmp_path, iterations=0)
    assert result.metrics == []
    assert read_config(tmp_path / "config.toml") == TINY
    assert not (tmp_path / "metrics.csv").exists()


def test_collect_rollout_shapes(seeds):
    model = ActorCritic(hidden_sizes=(8,))
    venv = VecEnv(
        3,
        TINY.env,
        TINY.physics,
        TINY.seed,
        seeds,
        ResetMode.HOVER,
    )
    batch, obs, finished = collect_rollout(model, venv, venv.reset(), 5)
    assert batch.observations.shape == (5, 3, 37)
    assert batch.actions.shape == (5, 3, 4)
    assert batch.rewards.shape == batch.dones.shape == (5, 3)
    assert batch.last_values.shape == (3,)
    assert obs.shape == (3, 37)
    assert len(finished) == int(batch.dones.sum())
    assert np.all(np.isfinite(batch.log_probs))


def test_tiny_run_writes_artifacts(tmp_path, seeds):
    result = train(TINY, seeds, out_dir=tmp_path)
    assert len(result.metrics) == 2
    header = (tmp_path / "metrics.csv").read_text().splitlines()[0]
    assert header == ",".join(METRIC_COLUMNS)
    rows = read_metrics_csv(tmp_path / "metrics.csv")
    assert [row.iteration for row in rows] == [1, 2]
    assert [row.env_steps for row in rows] == [8, 16]
    assert math.isfinite(rows[-1].policy_loss)
    for name in ("00001", "00002", "final"):
        assert (tmp_path / f"checkpoint_{name}.pt").exists()


def test_training_is_reproducible():
    first = train(TINY, SeedManager(9), reset_mode=ResetMode.HOVER)
    second = train(TINY, SeedManager(9), reset_mode=ResetMode.HOVER)
    assert same_parameters(first.model, second.model)
    assert [m.policy_loss for m in first.metrics] == [
        m.policy_loss for m in second.metrics
    ]


def test_callback_sees_every_iteration(seeds):
    seen = []
    train(
        TINY,
        seeds,
        reset_mode=ResetMode.HOVER,
        iterations=3,
        callback=seen.append,
    )
    assert [metrics.iteration for metrics in seen] == [1, 2, 3]


def test_checkpoint_round_trip(tmp_path):
    model = ActorCritic(
        hidden_sizes=(8,), generator=torch.Generator().manual_seed(4)
    )
    path = tmp_path / "model.pt"
    save_checkpoint(path, model, TINY, 7)
    loaded = load_checkpoint(path, fingerprint(TINY))
    assert loaded.iteration == 7
    assert loaded.config == TINY
    assert loaded.fingerprint == fingerprint(TINY)
    assert loaded.model.hidden_sizes == model.hidden_sizes
    assert same_parameters(loaded.model, model)
    assert loaded.optimizer_state is None


def test_checkpoint_fingerprint_mismatch(tmp_path):
    path = tmp_path / "model.pt"
    save_checkpoint(path, ActorCritic(hidden_sizes=(8,)), TINY, 1)
    other = replace(TINY, ppo=replace(TINY.ppo, gamma=0.9))
    with pytest.raises(CheckpointError, match="does not match"):
        load_checkpoint(path, fingerprint(other))


def test_garbage_checkpoint(tmp_path):
    path = tmp_path / "model.pt"
    path.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_foreign_checkpoint(tmp_path):
    path = tmp_path / "model.pt"
    torch.save({"weights": torch.zeros(3)}, path)
    with pytest.raises(CheckpointError, match="not an aster checkpoint"):
        load_checkpoint(path)
