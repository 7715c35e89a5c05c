"""Actor-critic networks and the PPO update.

The actor maps the 37-value observation to the mean of a Gaussian over
normalised actions (tanh output layer) with a state-independent log-std.
Samples are clamped to [-1, 1] before they reach the environment; the
log-probability is always taken on the unclamped sample.
"""

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import nn
from torch.distributions import Normal

from .env import ACTION_SIZE, OBSERVATION_SIZE
from .errors import UpdateError
from .overrides import non_negative, positive, unit_interval, validated

logger = logging.getLogger(__name__)

LOG_STD_MIN = -5.0
LOG_STD_MAX = 1.0

__all__ = [
    "PpoConfig",
    "ActorCritic",
    "RolloutBatch",
    "UpdateStats",
    "compute_gae",
    "clipped_surrogate",
    "ppo_update",
]


def _discount(value: float) -> None:
    if not 0.0 <= value < 1.0:
        raise ValueError(f"{value!r} must lie in [0, 1)")


@dataclass(frozen=True)
class PpoConfig:
    """PPO hyperparameters and the training batch shape.

    One iteration collects `horizon` steps from each of `num_envs`
    environments, then runs `epochs` passes over `num_minibatches`
    shuffled minibatches.
    """

    # pylint: disable=too-many-instance-attributes
    clip_ratio: float = field(default=0.2, metadata=validated(positive))
    gamma: float = field(default=0.99, metadata=validated(_discount))
    gae_lambda: float = field(default=0.95, metadata=validated(unit_interval))
    learning_rate: float = field(default=3e-4, metadata=validated(positive))
    epochs: int = field(default=4, metadata=validated(positive))
    num_minibatches: int = field(default=4, metadata=validated(positive))
    entropy_coef: float = field(default=0.0, metadata=validated(non_negative))
    value_coef: float = field(default=0.5, metadata=validated(non_negative))
    max_grad_norm: float = field(default=0.5, metadata=validated(positive))
    num_envs: int = field(default=256, metadata=validated(positive))
    horizon: int = field(default=64, metadata=validated(positive))
    hidden_sizes: Tuple[int, ...] = (128, 128)
    log_std_init: float = -0.5
    iterations: int = field(default=100, metadata=validated(non_negative))
    checkpoint_every: int = field(default=10, metadata=validated(positive))


def _init_linear(
    layer: nn.Linear, gain: float, generator: Optional[torch.Generator]
) -> None:
    """Xavier-uniform weights scaled by `gain`, zero bias."""
    fan_out, fan_in = layer.weight.shape
    bound = gain * math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        layer.weight.uniform_(-bound, bound, generator=generator)
        layer.bias.zero_()


def _mlp(
    sizes: Sequence[int],
    out_gain: float,
    generator: Optional[torch.Generator],
    dtype: torch.dtype,
) -> nn.Sequential:
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        linear = nn.Linear(fan_in, fan_out, dtype=dtype)
        last = i == len(sizes) - 2
        _init_linear(linear, out_gain if last else math.sqrt(2.0), generator)
        layers.append(linear)
        if not last:
            layers.append(nn.Tanh())
    return nn.Sequential(*layers)


class ActorCritic(nn.Module):
    """Separate policy and value MLPs with a shared log-std vector."""

    def __init__(
        self,
        obs_size: int = OBSERVATION_SIZE,
        act_size: int = ACTION_SIZE,
        hidden_sizes: Sequence[int] = (128, 128),
        log_std_init: float = -0.5,
        generator: Optional[torch.Generator] = None,
        dtype: torch.dtype = torch.float32,
    ):
        super().__init__()
        self.obs_size = obs_size
        self.act_size = act_size
        self.hidden_sizes = tuple(hidden_sizes)
        self.actor = _mlp(
            [obs_size, *hidden_sizes, act_size], 0.01, generator, dtype
        )
        self.critic = _mlp([obs_size, *hidden_sizes, 1], 1.0, generator, dtype)
        self.log_std = nn.Parameter(
            torch.full((act_size,), log_std_init, dtype=dtype)
        )

    @classmethod
    def from_config(
        cls,
        cfg: PpoConfig,
        generator: Optional[torch.Generator] = None,
    ) -> "ActorCritic":
        return cls(
            hidden_sizes=cfg.hidden_sizes,
            log_std_init=cfg.log_std_init,
            generator=generator,
        )

    @property
    def dtype(self) -> torch.dtype:
        return self.log_std.dtype

    def forward(self, obs: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Action mean in [-1, 1] and the clamped log-std.

        Raises:
            ValueError: `obs` holds a non-finite entry.
        """
        if not torch.isfinite(obs).all():
            raise ValueError("observation contains non-finite values")
        mean = torch.tanh(self.actor(obs))
        log_std = self.log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std.expand_as(mean)

    def distribution(self, obs: torch.Tensor) -> Normal:
        mean, log_std = self(obs)
        return Normal(mean, log_std.exp())

    def value(self, obs: torch.Tensor) -> torch.Tensor:
        return self.critic(obs).squeeze(-1)

    def log_prob(
        self, obs: torch.Tensor, actions: torch.Tensor
    ) -> torch.Tensor:
        return self.distribution(obs).log_prob(actions).sum(-1)

    @torch.no_grad()
    def act(
        self,
        obs: torch.Tensor,
        generator: Optional[torch.Generator] = None,
        deterministic: bool = False,
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Sample (raw action, log-prob, value) for a batch of observations.

        The raw action is unclamped; clamp it before stepping the env.
        """
        mean, log_std = self(obs)
        if deterministic:
            action = mean
        else:
            noise = torch.randn(
                mean.shape, generator=generator, dtype=mean.dtype
            )
            action = mean + log_std.exp() * noise
        log_prob = Normal(mean, log_std.exp()).log_prob(action).sum(-1)
        return action, log_prob, self.value(obs)


@dataclass(eq=False)
class RolloutBatch:
    """Per step per environment rollout data, shaped (horizon, num_envs, ...).

    `last_values` bootstraps the value after the final step.
    """

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    values: np.ndarray
    last_values: np.ndarray
    advantages: np.ndarray = field(default_factory=lambda: np.empty(0))
    returns: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __len__(self) -> int:
        return int(self.rewards.size)


@dataclass(frozen=True)
class UpdateStats:
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    lam: float,
    last_value: Union[np.ndarray, float] = 0.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates along the leading (time) axis.

    `dones[t]` marks that the episode ended at step t, so neither the
    value nor the advantage of step t + 1 leaks back across it.

    Returns:
        (advantages, returns) with returns = advantages + values.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    nonterminal = 1.0 - np.asarray(dones, dtype=float)
    advantages = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    next_value = np.asarray(last_value, dtype=float) * np.ones_like(
        rewards[0]
    )
    for t in reversed(range(len(rewards))):
        delta = rewards[t] + gamma * next_value * nonterminal[t] - values[t]
        running = delta + gamma * lam * nonterminal[t] * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def clipped_surrogate(
    log_probs: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    clip_ratio: float,
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """PPO clipped policy loss.

    Returns:
        (loss, clip fraction, approximate KL), the last two detached.
    """
    log_ratio = log_probs - old_log_probs
    ratio = log_ratio.exp()
    unclipped = ratio * advantages
    clipped = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * advantages
    loss = -torch.min(unclipped, clipped).mean()
    with torch.no_grad():
        clip_fraction = ((ratio - 1.0).abs() > clip_ratio).float().mean()
        approx_kl = ((ratio - 1.0) - log_ratio).mean()
    return loss, clip_fraction, approx_kl


def _flat(array: np.ndarray, width: int, dtype: torch.dtype) -> torch.Tensor:
    tensor = torch.as_tensor(array, dtype=dtype)
    return tensor.reshape(-1, width) if width else tensor.reshape(-1)


def ppo_update(
    model: ActorCritic,
    optimizer: torch.optim.Optimizer,
    batch: RolloutBatch,
    cfg: PpoConfig,
    generator: Optional[torch.Generator] = None,
) -> UpdateStats:
    """Clipped-surrogate plus value-MSE epochs over shuffled minibatches.

    Advantages are normalised to zero mean and unit std first.

    Raises:
        UpdateError: a loss became non-finite. Model and optimizer are
            restored to their state before the call.
    """
    dtype = model.dtype
    obs = _flat(batch.observations, model.obs_size, dtype)
    actions = _flat(batch.actions, model.act_size, dtype)
    old_log_probs = _flat(batch.log_probs, 0, dtype)
    returns = _flat(batch.returns, 0, dtype)
    advantages = _flat(batch.advantages, 0, dtype)
    advantages = (advantages - advantages.mean()) / (
        advantages.std(unbiased=False) + 1e-8
    )

    model_state = copy.deepcopy(model.state_dict())
    optimizer_state = copy.deepcopy(optimizer.state_dict())
    size = obs.shape[0]
    minibatch = max(1, size // cfg.num_minibatches)
    totals = np.zeros(5)
    count = 0
    for _ in range(cfg.epochs):
        order = torch.randperm(size, generator=generator)
        for start in range(0, size, minibatch):
            index = order[start : start + minibatch]
            dist = model.distribution(obs[index])
            log_probs = dist.log_prob(actions[index]).sum(-1)
            policy_loss, clip_fraction, approx_kl = clipped_surrogate(
                log_probs,
                old_log_probs[index],
                advantages[index],
                cfg.clip_ratio,
            )
            value_loss = (model.value(obs[index]) - returns[index]).pow(2)
            value_loss = value_loss.mean()
            entropy = dist.entropy().sum(-1).mean()
            loss = (
                policy_loss
                + cfg.value_coef * value_loss
                - cfg.entropy_coef * entropy
            )
            if not torch.isfinite(loss):
                model.load_state_dict(model_state)
                optimizer.load_state_dict(optimizer_state)
                raise UpdateError(f"non-finite PPO loss {loss.item()}")
            optimizer.zero_grad()
            loss.backward()
            nn.utils.clip_grad_norm_(model.parameters(), cfg.max_grad_norm)
            optimizer.step()
            totals += [
                policy_loss.item(),
                value_loss.item(),
                entropy.item(),
                approx_kl.item(),
                clip_fraction.item(),
            ]
            count += 1
    means = totals / max(count, 1)
    stats = UpdateStats(*(float(value) for value in means))
    logger.debug("ppo update: %s", stats)
    return stats
