"""Rollout collection, the PPO training loop and checkpoint files.

A run directory holds::

    config.toml              resolved configuration snapshot
    metrics.csv              one row per iteration
    checkpoint_00010.pt      periodic checkpoints
    checkpoint_final.pt      written when the loop ends
    checkpoint_interrupted.pt   written on KeyboardInterrupt
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import toml
import torch

from .config import AsterConfig, dumps_config, fingerprint, write_config
from .deserialize import load
from .env import ResetMode, VecEnv
from .errors import CheckpointError, DeserializeError, UpdateError
from .policy import (
    ActorCritic,
    RolloutBatch,
    UpdateStats,
    compute_gae,
    ppo_update,
)
from .seeding import SeedManager

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "aster-checkpoint"
CHECKPOINT_VERSION = 1

METRIC_COLUMNS = (
    "iteration",
    "env_steps",
    "episodes",
    "mean_reward",
    "mean_episode_length",
    "mean_traversals",
    "policy_loss",
    "value_loss",
    "approx_kl",
    "clip_fraction",
)

__all__ = [
    "EpisodeSummary",
    "IterationMetrics",
    "TrainResult",
    "Checkpoint",
    "collect_rollout",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "read_metrics_csv",
]


@dataclass(frozen=True)
class EpisodeSummary:
    episode_return: float
    length: int
    traversals: int
    reason: str


@dataclass(frozen=True)
class IterationMetrics:
    # pylint: disable=too-many-instance-attributes
    iteration: int
    env_steps: int
    episodes: int
    mean_reward: float
    mean_episode_length: float
    mean_traversals: float
    policy_loss: float
    value_loss: float
    approx_kl: float
    clip_fraction: float

    def row(self) -> List[Any]:
        return [getattr(self, name) for name in METRIC_COLUMNS]


@dataclass(eq=False)
class TrainResult:
    model: ActorCritic
    metrics: List[IterationMetrics] = field(default_factory=list)


@dataclass(eq=False)
class Checkpoint:
    model: ActorCritic
    config: AsterConfig
    iteration: int
    fingerprint: str
    optimizer_state: Optional[Dict[str, Any]] = None


def _obs_tensor(obs: np.ndarray, model: ActorCritic) -> torch.Tensor:
    return torch.as_tensor(obs, dtype=model.dtype)


def collect_rollout(
    model: ActorCritic,
    venv: VecEnv,
    obs: np.ndarray,
    horizon: int,
    generator: Optional[torch.Generator] = None,
) -> Tuple[RolloutBatch, np.ndarray, List[EpisodeSummary]]:
    """Step every environment `horizon` times with sampled actions.

    Returns:
        The batch (advantages not yet filled), the observation to continue
        from, and a summary per episode that finished during collection.
    """
    n = len(venv)
    shape = (horizon, n)
    observations = np.zeros(shape + (model.obs_size,))
    actions = np.zeros(shape + (model.act_size,))
    log_probs = np.zeros(shape)
    rewards = np.zeros(shape)
    dones = np.zeros(shape, dtype=bool)
    values = np.zeros(shape)
    finished: List[EpisodeSummary] = []
    for t in range(horizon):
        action, log_prob, value = model.act(
            _obs_tensor(obs, model), generator
        )
        raw = action.double().numpy()
        observations[t] = obs
        actions[t] = raw
        log_probs[t] = log_prob.double().numpy()
        values[t] = value.double().numpy()
        obs, rewards[t], dones[t], infos = venv.step(np.clip(raw, -1.0, 1.0))
        for info in infos:
            if info["reason"]:
                finished.append(
                    EpisodeSummary(
                        episode_return=info["episode_return"],
                        length=info["episode_length"],
                        traversals=info["traversals"],
                        reason=info["reason"],
                    )
                )
    with torch.no_grad():
        last_values = model.value(_obs_tensor(obs, model)).double().numpy()
    batch = RolloutBatch(
        observations=observations,
        actions=actions,
        log_probs=log_probs,
        rewards=rewards,
        dones=dones,
        values=values,
        last_values=last_values,
    )
    return batch, obs, finished


def _mean(values: List[float]) -> float:
    return float(np.mean(values)) if values else math.nan


def _write_metrics_header(path: Path) -> None:
    with path.open("w", newline="", encoding="utf-8") as stream:
        csv.writer(stream).writerow(METRIC_COLUMNS)


def _append_metrics(path: Path, metrics: IterationMetrics) -> None:
    with path.open("a", newline="", encoding="utf-8") as stream:
        csv.writer(stream).writerow(metrics.row())


def read_metrics_csv(path: Union[str, Path]) -> List[IterationMetrics]:
    with Path(path).open(newline="", encoding="utf-8") as stream:
        return [
            IterationMetrics(
                iteration=int(row["iteration"]),
                env_steps=int(row["env_steps"]),
                episodes=int(row["episodes"]),
                **{
                    name: float(row[name])
                    for name in METRIC_COLUMNS[3:]
                },
            )
            for row in csv.DictReader(stream)
        ]


def train(
    config: AsterConfig,
    seeds: SeedManager,
    reset_mode: ResetMode = ResetMode.AUTO,
    out_dir: Optional[Union[str, Path]] = None,
    iterations: Optional[int] = None,
    callback: Optional[Callable[[IterationMetrics], None]] = None,
) -> TrainResult:
    """Alternate rollout collection and PPO updates.

    `reset_mode` AUTO is the composite seeded/hover reset and HOVER the
    hover-only baseline; nothing else differs between the two arms. With
    `out_dir` set, the resolved config, the metrics CSV and checkpoints are
    written there. A failed update is logged and skipped.
    """
    # pylint: disable=too-many-locals
    cfg = config.ppo
    iterations = cfg.iterations if iterations is None else iterations
    model = ActorCritic.from_config(cfg, seeds.torch_generator("init"))
    result = TrainResult(model=model)
    run_dir = Path(out_dir) if out_dir is not None else None
    if run_dir is not None:
        run_dir.mkdir(parents=True, exist_ok=True)
        write_config(config, run_dir / "config.toml")
    if iterations == 0:
        return result

    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    sampler = seeds.torch_generator("actions")
    shuffler = seeds.torch_generator("minibatches")
    venv = VecEnv(
        cfg.num_envs,
        config.env,
        config.physics,
        config.seed,
        seeds,
        reset_mode,
    )
    metrics_path = run_dir / "metrics.csv" if run_dir is not None else None
    if metrics_path is not None:
        _write_metrics_header(metrics_path)
    iteration = 0
    try:
        obs = venv.reset()
        for iteration in range(1, iterations + 1):
            batch, obs, finished = collect_rollout(
                model, venv, obs, cfg.horizon, sampler
            )
            batch.advantages, batch.returns = compute_gae(
                batch.rewards,
                batch.values,
                batch.dones,
                cfg.gamma,
                cfg.gae_lambda,
                batch.last_values,
            )
            try:
                stats = ppo_update(model, optimizer, batch, cfg, shuffler)
            except UpdateError as error:
                logger.warning("iteration %d: %s", iteration, error)
                stats = UpdateStats(*([math.nan] * 5))
            metrics = IterationMetrics(
                iteration=iteration,
                env_steps=iteration * cfg.horizon * cfg.num_envs,
                episodes=len(finished),
                mean_reward=_mean([e.episode_return for e in finished]),
                mean_episode_length=_mean([e.length for e in finished]),
                mean_traversals=_mean([e.traversals for e in finished]),
                policy_loss=stats.policy_loss,
                value_loss=stats.value_loss,
                approx_kl=stats.approx_kl,
                clip_fraction=stats.clip_fraction,
            )
            result.metrics.append(metrics)
            logger.info(
                "iteration %d: reward %.3f, length %.1f, traversals %.2f",
                iteration,
                metrics.mean_reward,
                metrics.mean_episode_length,
                metrics.mean_traversals,
            )
            if metrics_path is not None:
                _append_metrics(metrics_path, metrics)
            if run_dir is not None and iteration % cfg.checkpoint_every == 0:
                save_checkpoint(
                    run_dir / f"checkpoint_{iteration:05d}.pt",
                    model,
                    config,
                    iteration,
                    optimizer,
                )
            if callback is not None:
                callback(metrics)
    except KeyboardInterrupt:
        if run_dir is not None:
            save_checkpoint(
                run_dir / "checkpoint_interrupted.pt",
                model,
                config,
                iteration,
                optimizer,
            )
        raise
    finally:
        venv.close()
    if run_dir is not None:
        save_checkpoint(
            run_dir / "checkpoint_final.pt",
            model,
            config,
            iteration,
            optimizer,
        )
    return result


def _signature(model: ActorCritic) -> Dict[str, Any]:
    return {
        "obs_size": model.obs_size,
        "act_size": model.act_size,
        "hidden_sizes": list(model.hidden_sizes),
        "dtype": str(model.dtype).replace("torch.", ""),
    }


def save_checkpoint(
    path: Union[str, Path],
    model: ActorCritic,
    config: AsterConfig,
    iteration: int,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "signature": _signature(model),
        "fingerprint": fingerprint(config),
        "config": dumps_config(config),
        "state_dict": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer else None,
        "iteration": iteration,
    }
    torch.save(payload, Path(path))
    logger.info("wrote checkpoint %s (iteration %d)", path, iteration)


def load_checkpoint(
    path: Union[str, Path], expected_fingerprint: Optional[str] = None
) -> Checkpoint:
    """Load a checkpoint, refusing foreign files and config mismatches.

    Raises:
        CheckpointError: unreadable file, wrong format, shape mismatch, or
            `expected_fingerprint` differs from the stored one.
    """
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as error:  # pylint: disable=broad-except
        raise CheckpointError(f"{path}: unreadable checkpoint") from error
    if not isinstance(payload, dict) or (
        payload.get("format") != CHECKPOINT_FORMAT
        or payload.get("version") != CHECKPOINT_VERSION
    ):
        raise CheckpointError(f"{path}: not an aster checkpoint")
    stored = payload["fingerprint"]
    if expected_fingerprint is not None and stored != expected_fingerprint:
        raise CheckpointError(
            f"{path}: config fingerprint {stored[:12]} does not match "
            f"the running config {expected_fingerprint[:12]}"
        )
    try:
        config = load(toml.loads(payload["config"]), AsterConfig)
    except (toml.TomlDecodeError, DeserializeError) as error:
        raise CheckpointError(f"{path}: embedded config: {error}") from error
    if fingerprint(config) != stored:
        raise CheckpointError(f"{path}: embedded config was modified")
    signature = payload["signature"]
    model = ActorCritic(
        obs_size=signature["obs_size"],
        act_size=signature["act_size"],
        hidden_sizes=signature["hidden_sizes"],
        dtype=getattr(torch, signature["dtype"]),
    )
    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as error:
        raise CheckpointError(f"{path}: {error}") from error
    return Checkpoint(
        model=model,
        config=config,
        iteration=payload["iteration"],
        fingerprint=stored,
        optimizer_state=payload["optimizer"],
    )
