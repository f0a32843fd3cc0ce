"""Exponentially discounted multiplicative-weights aggregation of experts.

The raw update w <- w**gamma * beta**loss drives weights to zero
double-exponentially fast for gamma < 1, which underflows float64 within a
few hundred steps. Weights therefore live in log space, where the update is
log w <- gamma * log w + log(beta) * loss and the probability step is a
plain softmax of gamma * log w.

Note that the discount is applied twice on purpose: the update has already
discounted the stored log weights, and the probability step raises them by
gamma again. The closed form log w[n+1] = gamma**n * log W + log(beta) *
(discounted loss), asserted by the tests, pins this behavior down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import NO_PREDICTION, ConfigError, SymbolId
from .ppm import BlendedDistribution, argmax_symbol


@dataclass
class HedgeConfig:
    """Aggregation parameters: update factor, discount, pool size, start weight."""

    beta: float
    gamma: float
    num_experts: int
    initial_weight: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must be in (0, 1], got {self.beta}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.num_experts < 1:
            raise ConfigError(f"need at least one expert, got {self.num_experts}")
        if not self.initial_weight > 0.0:
            raise ConfigError(f"initial weight must be > 0, got {self.initial_weight}")


@dataclass
class HedgeState:
    """Mutable per-run aggregation state (log weights and discounted losses)."""

    log_weights: np.ndarray
    step: int = 0
    discounted_expert_losses: np.ndarray = field(default=None)  # type: ignore[assignment]
    discounted_predictor_loss: float = 0.0

    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def init_state(config: HedgeConfig) -> HedgeState:
    k = config.num_experts
    return HedgeState(
        log_weights=np.full(k, math.log(config.initial_weight)),
        discounted_expert_losses=np.zeros(k),
    )


def expert_probabilities(state: HedgeState, gamma: float) -> np.ndarray:
    """Distribution over experts: softmax of gamma * log weights."""
    z = gamma * state.log_weights
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def combine(probabilities, distributions: list[BlendedDistribution]) -> dict[SymbolId, float]:
    """Pointwise convex mixture of expert distributions."""
    if len(probabilities) != len(distributions):
        raise ConfigError(
            f"{len(probabilities)} expert probabilities for {len(distributions)} distributions"
        )
    mixture: dict[SymbolId, float] = {}
    for p, dist in zip(probabilities, distributions):
        for s, q in dist.probs.items():
            mixture[s] = mixture.get(s, 0.0) + p * q
    return mixture


def predict(mixture: dict[SymbolId, float]) -> SymbolId:
    """Argmax of a mixture; smallest first-seen id on ties, sentinel if empty."""
    return argmax_symbol(mixture)


def zero_one_loss(actual: SymbolId, predicted: SymbolId) -> int:
    """0 iff the prediction matches; NO_PREDICTION always scores 1."""
    return 0 if predicted == actual else 1


def discount_accumulate(prev: float, instant_loss: float, gamma: float) -> float:
    """One step of the discounted running loss: gamma * prev + instant."""
    return gamma * prev + instant_loss


def update_weights(state: HedgeState, losses, gamma: float, beta: float) -> None:
    """Apply one round of losses: discount, then multiply in beta**loss."""
    losses = np.asarray(losses, dtype=float)
    state.log_weights = gamma * state.log_weights + math.log(beta) * losses
    state.discounted_expert_losses = gamma * state.discounted_expert_losses + losses
    state.step += 1


def max_total_loss(gamma: float, horizon: int) -> float:
    """Largest discounted loss reachable in ``horizon`` steps of unit losses."""
    if horizon < 0:
        raise ConfigError(f"horizon must be >= 0, got {horizon}")
    if gamma == 1.0:
        return float(horizon)
    return -math.expm1(horizon * math.log(gamma)) / (1.0 - gamma)


def optimal_beta(gamma: float, horizon: int, num_experts: int) -> float:
    """Update factor minimizing the worst-case regret bound at the horizon.

    Equals 1/(1 + sqrt(2 ln K / L)) where L is the maximum discounted loss
    reachable by ``horizon``; a single-expert pool degenerates to beta = 1.
    """
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if num_experts < 1:
        raise ConfigError(f"need at least one expert, got {num_experts}")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
    ratio = 2.0 * math.log(num_experts) / max_total_loss(gamma, horizon)
    return 1.0 / (1.0 + math.sqrt(ratio))


def loss_bound(gamma: float, horizon: int, num_experts: int, best_loss: float) -> float:
    """Guaranteed ceiling on the aggregate's discounted loss at the horizon.

    Valid when beta was chosen by :func:`optimal_beta` for the same
    (gamma, horizon, pool size): best expert's discounted loss plus
    sqrt(2 ln K * L) + ln K with L the maximum reachable discounted loss.
    """
    if best_loss < 0:
        raise ConfigError(f"best_loss must be >= 0, got {best_loss}")
    ln_k = math.log(num_experts)
    ceiling = max_total_loss(gamma, horizon)
    return best_loss + math.sqrt(2.0 * ln_k * ceiling) + ln_k
