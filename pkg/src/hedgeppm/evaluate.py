"""End-to-end online prediction loop, metrics, and verification checks.

One run couples a shared context trie (orders 0..max_order all read the same
counts), per-order escape-blended expert distributions, and discounted
multiplicative-weights aggregation. The per-step order is fixed: form the
expert mixture, predict, observe, score, update weights, and only then ingest
the observed symbol, so the trie never contains the symbol being predicted.

The discounted predictor loss accumulated here is the probability-weighted
expert loss (p . l per step), the quantity the regret bound controls; the 0/1
loss of the emitted argmax prediction feeds the accuracy curve.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import NO_PREDICTION, Alphabet, ConfigError
from .hedge import (
    HedgeConfig,
    combine,
    discount_accumulate,
    expert_probabilities,
    init_state,
    loss_bound,
    max_total_loss,
    optimal_beta,
    predict,
    update_weights,
    zero_one_loss,
)
from .ppm import all_order_distributions, argmax_symbol
from .sources import SourceSpec
from .trie import ContextTrie

#: Probability mass must reach 1 within this everywhere it is checked.
NORM_TOL = 1e-12


@dataclass
class PredictorConfig:
    """Run parameters; ``beta="auto"`` derives the update factor from the horizon."""

    max_order: int
    gamma: float = 1.0
    beta: float | str = "auto"
    horizon: Optional[int] = None
    initial_weight: float = 1.0
    check_normalization: bool = True

    def __post_init__(self) -> None:
        if self.max_order < 0:
            raise ConfigError(f"max_order must be >= 0, got {self.max_order}")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in (0, 1], got {self.gamma}")
        if isinstance(self.beta, str):
            if self.beta != "auto":
                raise ConfigError(f"beta must be a number in (0, 1] or 'auto', got {self.beta!r}")
            if self.horizon is None:
                raise ConfigError("beta='auto' requires a horizon")
        elif not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must be in (0, 1], got {self.beta}")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not self.initial_weight > 0.0:
            raise ConfigError(f"initial weight must be > 0, got {self.initial_weight}")

    @property
    def num_experts(self) -> int:
        return self.max_order + 1

    def resolved_beta(self) -> float:
        if self.beta == "auto":
            return optimal_beta(self.gamma, self.horizon, self.num_experts)
        return float(self.beta)


@dataclass
class MetricsTrace:
    """Per-step record of one online run plus the run's configuration echo."""

    gamma: float
    beta: float
    max_order: int
    initial_weight: float
    alphabet: Alphabet
    actual: np.ndarray
    predicted: np.ndarray
    losses: np.ndarray
    mixture_losses: np.ndarray
    cumulative_accuracy: np.ndarray
    discounted_loss: np.ndarray
    expert_predictions: np.ndarray
    expert_losses: np.ndarray
    expert_discounted_losses: np.ndarray
    probabilities: np.ndarray
    weights: np.ndarray
    bound: np.ndarray
    normalization_violations: int
    max_normalization_error: float

    @property
    def n(self) -> int:
        return len(self.actual)

    @property
    def num_experts(self) -> int:
        return self.max_order + 1


def run_online(config: PredictorConfig, stream: Iterable[str],
               alphabet: Optional[Alphabet] = None) -> MetricsTrace:
    """Run the full predict/observe/update/ingest loop over a token stream."""
    alphabet = alphabet if alphabet is not None else Alphabet()
    gamma = config.gamma
    beta = config.resolved_beta()
    k = config.num_experts
    trie = ContextTrie(config.max_order)
    state = init_state(HedgeConfig(beta, gamma, k, config.initial_weight))
    ln_k = math.log(k)

    actual_l: list[int] = []
    predicted_l: list[int] = []
    loss_l: list[int] = []
    mix_loss_l: list[float] = []
    acc_l: list[float] = []
    disc_l: list[float] = []
    bound_l: list[float] = []
    epred_l: list[np.ndarray] = []
    eloss_l: list[np.ndarray] = []
    edisc_l: list[np.ndarray] = []
    prob_l: list[np.ndarray] = []
    weight_l: list[np.ndarray] = []
    violations = 0
    max_err = 0.0
    correct = 0
    loss_ceiling = 0.0  # discounted all-ones loss, the running maximum

    def check(total) -> None:
        nonlocal violations, max_err
        err = abs(float(total) - 1.0)
        if err > NORM_TOL:
            violations += 1
        if err > max_err:
            max_err = err

    for n, token in enumerate(stream, start=1):
        probs = expert_probabilities(state, gamma)
        if config.check_normalization:
            check(probs.sum())
        if trie.root.count == 0:
            expert_preds = np.full(k, NO_PREDICTION, dtype=np.int64)
            predicted = NO_PREDICTION
        else:
            dists = all_order_distributions(trie, config.max_order)
            if config.check_normalization:
                for d in dists:
                    check(d.total())
            expert_preds = np.fromiter(
                (argmax_symbol(d.probs) for d in dists), dtype=np.int64, count=k
            )
            mixture = combine(probs, dists)
            if config.check_normalization:
                check(sum(mixture.values()))
            predicted = predict(mixture)

        actual = alphabet.intern(token)
        step_loss = zero_one_loss(actual, predicted)
        expert_losses = (expert_preds != actual).astype(float)
        mixture_loss = float(probs @ expert_losses)
        state.discounted_predictor_loss = discount_accumulate(
            state.discounted_predictor_loss, mixture_loss, gamma
        )
        weight_l.append(np.exp(state.log_weights))
        update_weights(state, expert_losses, gamma, beta)
        trie.ingest(actual)

        correct += 1 - step_loss
        loss_ceiling = gamma * loss_ceiling + 1.0
        best_now = float(state.discounted_expert_losses.min())
        actual_l.append(actual)
        predicted_l.append(predicted)
        loss_l.append(step_loss)
        mix_loss_l.append(mixture_loss)
        acc_l.append(correct / n)
        disc_l.append(state.discounted_predictor_loss)
        bound_l.append(best_now + math.sqrt(2.0 * ln_k * loss_ceiling) + ln_k)
        epred_l.append(expert_preds)
        eloss_l.append(expert_losses.astype(np.int8))
        edisc_l.append(state.discounted_expert_losses.copy())
        prob_l.append(probs)

    def stack(rows: list[np.ndarray], dtype) -> np.ndarray:
        if not rows:
            return np.zeros((0, k), dtype=dtype)
        return np.array(rows, dtype=dtype)

    return MetricsTrace(
        gamma=gamma,
        beta=beta,
        max_order=config.max_order,
        initial_weight=config.initial_weight,
        alphabet=alphabet,
        actual=np.array(actual_l, dtype=np.int64),
        predicted=np.array(predicted_l, dtype=np.int64),
        losses=np.array(loss_l, dtype=np.int8),
        mixture_losses=np.array(mix_loss_l, dtype=float),
        cumulative_accuracy=np.array(acc_l, dtype=float),
        discounted_loss=np.array(disc_l, dtype=float),
        expert_predictions=stack(epred_l, np.int64),
        expert_losses=stack(eloss_l, np.int8),
        expert_discounted_losses=stack(edisc_l, float),
        probabilities=stack(prob_l, float),
        weights=stack(weight_l, float),
        bound=np.array(bound_l, dtype=float),
        normalization_violations=violations,
        max_normalization_error=max_err,
    )


def best_expert(trace: MetricsTrace) -> tuple[int, float]:
    """Index and final discounted loss of the best expert; ties go to lower k."""
    if trace.n == 0:
        raise ValueError("empty trace has no best expert")
    final = trace.expert_discounted_losses[-1]
    k_star = int(np.argmin(final))
    return k_star, float(final[k_star])


def normalized_loss(trace: MetricsTrace, gamma: Optional[float] = None,
                    horizon: Optional[int] = None) -> float:
    """Final discounted loss divided by the maximum reachable discounted loss."""
    gamma = trace.gamma if gamma is None else gamma
    horizon = trace.n if horizon is None else horizon
    ceiling = max_total_loss(gamma, horizon)
    if ceiling == 0.0:
        return 0.0
    loss = float(trace.discounted_loss[-1]) if trace.n else 0.0
    return loss / ceiling


@dataclass
class BoundReport:
    holds: bool
    margin: float
    loss: float
    bound: float
    warning: Optional[str] = None


def verify_bound(trace: MetricsTrace, config: PredictorConfig) -> BoundReport:
    """Check the final discounted loss against its guaranteed ceiling."""
    _, best = best_expert(trace)
    bound = loss_bound(trace.gamma, trace.n, trace.num_experts, best)
    loss = float(trace.discounted_loss[-1])
    warning = None
    if config.beta != "auto":
        reference = optimal_beta(trace.gamma, trace.n, trace.num_experts)
        if abs(float(config.beta) - reference) > 1e-12:
            warning = (
                f"beta={config.beta} was not derived from the horizon "
                f"(expected {reference:.6f}); the bound is not guaranteed"
            )
    return BoundReport(holds=loss <= bound, margin=bound - loss, loss=loss,
                       bound=bound, warning=warning)


def _power_distribution(weights: np.ndarray, eta: float) -> np.ndarray:
    z = eta * np.log(weights)
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def check_majorization(weights, gamma: float, m: int, tol: float = NORM_TOL) -> bool:
    """True iff raising the weight exponent flattens the expert distribution.

    Compares sorted-descending prefix sums of the distributions induced by
    exponents gamma**m and gamma: every prefix of the former must not exceed
    the latter's, with equal totals.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0 or np.any(w <= 0.0):
        raise ConfigError("weights must be a non-empty positive vector")
    if not 0.0 < gamma <= 1.0:
        raise ConfigError(f"gamma must be in (0, 1], got {gamma}")
    if m < 1:
        raise ConfigError(f"exponent step count must be >= 1, got {m}")
    flat = np.cumsum(np.sort(_power_distribution(w, gamma ** m))[::-1])
    peaked = np.cumsum(np.sort(_power_distribution(w, gamma))[::-1])
    return bool(np.all(flat[:-1] <= peaked[:-1] + tol) and abs(flat[-1] - peaked[-1]) <= tol)


def check_ordered_inequality(weights, losses, gamma: float, m: int,
                             tol: float = NORM_TOL) -> Optional[bool]:
    """Expected loss under the flatter distribution is at least the peaked one.

    Applies only when weights are ascending and losses descending in the same
    expert order; returns None (inapplicable) when that precondition fails.
    """
    w = np.asarray(weights, dtype=float)
    l = np.asarray(losses, dtype=float)
    if w.shape != l.shape or w.ndim != 1 or w.size == 0:
        raise ConfigError("weights and losses must be equal-length vectors")
    if np.any(w <= 0.0):
        raise ConfigError("weights must be positive")
    if np.any((l < 0.0) | (l > 1.0)):
        raise ConfigError("losses must lie in [0, 1]")
    if np.any(np.diff(w) < 0.0) or np.any(np.diff(l) > 0.0):
        return None
    lhs = float(_power_distribution(w, gamma ** m) @ l)
    rhs = float(_power_distribution(w, gamma) @ l)
    return lhs >= rhs - tol


def accuracy_curve(trace: MetricsTrace, window: Optional[int] = None) -> np.ndarray:
    """Cumulative accuracy per step, or rolling accuracy over ``window`` steps."""
    hits = 1.0 - trace.losses.astype(float)
    if window is None:
        if trace.n == 0:
            return np.zeros(0)
        return np.cumsum(hits) / np.arange(1, trace.n + 1)
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    padded = np.concatenate([[0.0], np.cumsum(hits)])
    out = np.empty(trace.n)
    for i in range(1, trace.n + 1):
        lo = max(0, i - window)
        out[i - 1] = (padded[i] - padded[lo]) / (i - lo)
    return out


# ---------------------------------------------------------------------------
# Trace export

TRACE_COLUMNS = ["step", "actual", "predicted", "loss", "cum_acc", "disc_loss", "bound"]


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_trace_csv(trace: MetricsTrace, path: str, per_expert: bool = False) -> None:
    """Write the per-step trace; the sentinel prediction prints as empty."""
    header = list(TRACE_COLUMNS)
    k = trace.num_experts
    if per_expert:
        header += [f"p_{j}" for j in range(k)] + [f"L_{j}" for j in range(k)]
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(trace.n):
            pred = trace.predicted[i]
            row = [
                i + 1,
                trace.alphabet.token(int(trace.actual[i])),
                "" if pred == NO_PREDICTION else trace.alphabet.token(int(pred)),
                int(trace.losses[i]),
                _fmt(trace.cumulative_accuracy[i]),
                _fmt(trace.discounted_loss[i]),
                _fmt(trace.bound[i]),
            ]
            if per_expert:
                row += [_fmt(p) for p in trace.probabilities[i]]
                row += [_fmt(x) for x in trace.expert_discounted_losses[i]]
            writer.writerow(row)


def summarize(trace: MetricsTrace) -> dict:
    """Final-run summary as an ordered mapping of plain values."""
    out: dict = {
        "steps": trace.n,
        "gamma": trace.gamma,
        "beta": trace.beta,
        "max_order": trace.max_order,
        "num_experts": trace.num_experts,
        "alphabet_size": len(trace.alphabet),
    }
    if trace.n == 0:
        return out
    k_star, best = best_expert(trace)
    bound = loss_bound(trace.gamma, trace.n, trace.num_experts, best)
    ceiling = max_total_loss(trace.gamma, trace.n)
    out.update(
        {
            "accuracy": float(trace.cumulative_accuracy[-1]),
            "discounted_loss": float(trace.discounted_loss[-1]),
            "best_expert": k_star,
            "best_expert_loss": best,
            "bound": bound,
            "normalized_loss": float(trace.discounted_loss[-1]) / ceiling,
            "normalized_bound": bound / ceiling,
            "bound_holds": bool(trace.discounted_loss[-1] <= bound),
            "normalization_violations": trace.normalization_violations,
        }
    )
    return out


def format_summary(trace: MetricsTrace) -> str:
    parts = []
    for key, value in summarize(trace).items():
        parts.append(f"{key}={_fmt(value) if isinstance(value, float) else value}")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# Bound-verification suite

@dataclass
class BoundRun:
    """Outcome of one (gamma, max_order, seed) cell run at auto beta."""

    gamma: float
    max_order: int
    num_experts: int
    seed: int
    beta: float
    loss: float
    best_expert: int
    best_loss: float
    bound: float
    normalized_loss: float
    normalized_bound: float
    holds: bool
    normalization_violations: int


def _bound_run(task) -> BoundRun:
    tokens, gamma, max_order, seed = task
    config = PredictorConfig(max_order=max_order, gamma=gamma, beta="auto",
                             horizon=len(tokens))
    trace = run_online(config, tokens)
    report = verify_bound(trace, config)
    k_star, best = best_expert(trace)
    ceiling = max_total_loss(gamma, trace.n)
    return BoundRun(
        gamma=gamma,
        max_order=max_order,
        num_experts=config.num_experts,
        seed=seed,
        beta=trace.beta,
        loss=report.loss,
        best_expert=k_star,
        best_loss=best,
        bound=report.bound,
        normalized_loss=report.loss / ceiling,
        normalized_bound=report.bound / ceiling,
        holds=report.holds,
        normalization_violations=trace.normalization_violations,
    )


def run_bound_suite(spec: SourceSpec, gammas: Sequence[float], max_orders: Sequence[int],
                    seeds: Sequence[int], length: Optional[int],
                    jobs: int = 1) -> list[BoundRun]:
    """Run every (gamma, max_order, seed) cell; rows sorted deterministically.

    Sequences depend only on (spec, seed), so each seed's sequence is generated
    once up front and shared by every (gamma, max_order) cell.
    """
    if not gammas or not max_orders or not seeds:
        raise ConfigError("suite needs at least one gamma, max_order, and seed")
    sequences = {
        seed: spec.generate(None if spec.schedule is not None else length, seed)
        for seed in seeds
    }
    tasks = [
        (sequences[seed], gamma, order, seed)
        for gamma in gammas
        for order in max_orders
        for seed in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_bound_run, tasks, chunksize=4))
    else:
        rows = [_bound_run(t) for t in tasks]
    rows.sort(key=lambda r: (r.gamma, r.max_order, r.seed))
    return rows


# ---------------------------------------------------------------------------
# Randomized checks of the two weight-distribution inequalities

def _random_case(rng: np.random.Generator) -> tuple[np.ndarray, float, int]:
    k = int(rng.integers(1, 13))
    w = np.exp(rng.uniform(-30.0, 5.0, size=k))
    gamma = 1.0 if rng.random() < 0.1 else 1.0 - rng.random()
    m = int(rng.integers(1, 11))
    return w, gamma, m


def run_majorization_cases(cases: int, seed: int) -> list[str]:
    """Randomized prefix-dominance checks; returns failure descriptions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    failures = []
    for i in range(cases):
        w, gamma, m = _random_case(rng)
        if not check_majorization(w, gamma, m):
            failures.append(f"case {i}: K={w.size} gamma={gamma!r} M={m} weights={w.tolist()!r}")
    return failures


def run_ordered_cases(cases: int, seed: int) -> list[str]:
    """Randomized ordered-inequality checks with valid preconditions."""
    rng = np.random.Generator(np.random.PCG64(seed))
    failures = []
    for i in range(cases):
        w, gamma, m = _random_case(rng)
        w = np.sort(w)
        losses = np.sort(rng.random(w.size))[::-1]
        result = check_ordered_inequality(w, losses, gamma, m)
        if result is not True:
            failures.append(
                f"case {i}: K={w.size} gamma={gamma!r} M={m} "
                f"weights={w.tolist()!r} losses={losses.tolist()!r} -> {result}"
            )
    return failures
