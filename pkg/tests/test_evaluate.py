import csv
import math

import numpy as np
import pytest

from hedgeppm.core import NO_PREDICTION, Alphabet, ConfigError
from hedgeppm.evaluate import (
    MetricsTrace,
    PredictorConfig,
    accuracy_curve,
    best_expert,
    check_majorization,
    check_ordered_inequality,
    format_summary,
    normalized_loss,
    run_online,
    summarize,
    verify_bound,
    write_trace_csv,
)
from hedgeppm.hedge import loss_bound, max_total_loss, optimal_beta
from hedgeppm.sources import explicit_markov, sample


def make_trace(losses, gamma=1.0, max_order=2, beta=0.9, mixture_losses=None,
               expert_losses=None):
    """Fabricate a consistent trace from per-step 0/1 losses."""
    n = len(losses)
    k = max_order + 1
    losses = np.asarray(losses, dtype=np.int8)
    mixture = np.asarray(
        mixture_losses if mixture_losses is not None else losses, dtype=float
    )
    eloss = (
        np.asarray(expert_losses, dtype=np.int8)
        if expert_losses is not None
        else np.repeat(losses[:, None], k, axis=1)
    )
    disc = np.zeros(n)
    edisc = np.zeros((n, k))
    run, erun = 0.0, np.zeros(k)
    for i in range(n):
        run = gamma * run + mixture[i]
        erun = gamma * erun + eloss[i]
        disc[i] = run
        edisc[i] = erun
    alpha = Alphabet()
    alpha.intern("x")
    hits = 1.0 - losses.astype(float)
    return MetricsTrace(
        gamma=gamma,
        beta=beta,
        max_order=max_order,
        initial_weight=1.0,
        alphabet=alpha,
        actual=np.zeros(n, dtype=np.int64),
        predicted=np.zeros(n, dtype=np.int64),
        losses=losses,
        mixture_losses=mixture,
        cumulative_accuracy=np.cumsum(hits) / np.arange(1, n + 1) if n else np.zeros(0),
        discounted_loss=disc,
        expert_predictions=np.zeros((n, k), dtype=np.int64),
        expert_losses=eloss,
        expert_discounted_losses=edisc,
        probabilities=np.full((n, k), 1.0 / k),
        weights=np.ones((n, k)),
        bound=np.zeros(n),
        normalization_violations=0,
        max_normalization_error=0.0,
    )


class TestRunOnline:
    def test_constant_stream(self):
        trace = run_online(PredictorConfig(max_order=2, beta=0.9), ["a"] * 100)
        assert trace.losses[0] == 1
        assert trace.predicted[0] == NO_PREDICTION
        assert trace.losses[1:].sum() == 0
        assert trace.cumulative_accuracy[-1] == pytest.approx(0.99)

    def test_empty_stream(self):
        trace = run_online(PredictorConfig(max_order=1, beta=0.9), [])
        assert trace.n == 0
        with pytest.raises(ValueError):
            best_expert(trace)

    def test_new_symbol_always_scores_loss_one(self):
        trace = run_online(PredictorConfig(max_order=1, beta=0.9), ["a", "a", "b", "a"])
        assert trace.losses[0] == 1  # cold start
        assert trace.losses[2] == 1  # first occurrence of b

    def test_order_zero_pool_is_frequency_argmax(self):
        tokens = sample(
            explicit_markov({("a",): {"a": 0.6, "b": 0.4}, ("b",): {"a": 0.7, "b": 0.3}}),
            300, seed=5,
        )
        trace = run_online(PredictorConfig(max_order=0, beta=0.9), tokens)
        # independent oracle: most frequent symbol so far, first-seen tie-break
        alpha = Alphabet()
        counts: dict[int, int] = {}
        expected = []
        for t in tokens:
            if not counts:
                expected.append(NO_PREDICTION)
            else:
                best = min(counts, key=lambda s: (-counts[s], s))
                expected.append(best)
            sid = alpha.intern(t)
            counts[sid] = counts.get(sid, 0) + 1
        assert trace.predicted.tolist() == expected

    def test_initial_weight_invariance(self):
        tokens = sample(
            explicit_markov({("a",): {"a": 0.2, "b": 0.8}, ("b",): {"a": 0.9, "b": 0.1}}),
            400, seed=9,
        )
        t1 = run_online(PredictorConfig(max_order=2, gamma=0.9, beta=0.8), tokens)
        t2 = run_online(
            PredictorConfig(max_order=2, gamma=0.9, beta=0.8, initial_weight=7.3), tokens
        )
        assert t1.predicted.tolist() == t2.predicted.tolist()
        np.testing.assert_allclose(t1.probabilities, t2.probabilities, atol=1e-12)

    def test_normalization_instrumentation_clean(self):
        tokens = sample(explicit_markov({("a",): {"a": 0.5, "b": 0.5},
                                         ("b",): {"a": 0.5, "b": 0.5}}), 500, seed=1)
        trace = run_online(PredictorConfig(max_order=3, gamma=0.95, beta=0.8), tokens)
        assert trace.normalization_violations == 0
        assert trace.max_normalization_error <= 1e-12

    def test_auto_beta_requires_horizon(self):
        with pytest.raises(ConfigError):
            PredictorConfig(max_order=2, beta="auto", horizon=None)

    def test_gamma_out_of_range(self):
        with pytest.raises(ConfigError):
            PredictorConfig(max_order=2, gamma=1.2, beta=0.9)

    def test_stationary_source_error_rate_improves(self):
        # cumulative error at n=4000 should not exceed the rate at n=1000,
        # averaged over 20 seeds of a fixed stationary order-2 chain
        src = None
        from hedgeppm.sources import random_markov

        src = random_markov(2, list("abcd"), seed=21, concentration=0.1)
        early, late = [], []
        for seed in range(20):
            tokens = sample(src, 4000, seed)
            trace = run_online(
                PredictorConfig(max_order=2, gamma=1.0, beta="auto", horizon=4000), tokens
            )
            early.append(1.0 - trace.cumulative_accuracy[999])
            late.append(1.0 - trace.cumulative_accuracy[3999])
        assert np.mean(late) <= np.mean(early)


class TestBestExpert:
    def test_single_expert(self):
        trace = make_trace([1, 0, 1], max_order=0)
        assert best_expert(trace) == (0, pytest.approx(2.0))

    def test_all_equal_ties_to_first(self):
        trace = make_trace([1, 1], max_order=3)
        assert best_expert(trace)[0] == 0

    def test_matches_bruteforce_min(self):
        rng = np.random.default_rng(0)
        eloss = rng.integers(0, 2, size=(50, 4))
        trace = make_trace(rng.integers(0, 2, size=50), max_order=3,
                           gamma=0.9, expert_losses=eloss)
        k_star, best = best_expert(trace)
        brute = [sum(0.9 ** (49 - i) * eloss[i, k] for i in range(50)) for k in range(4)]
        assert best == pytest.approx(min(brute))
        assert k_star == int(np.argmin(brute))


class TestNormalizedLoss:
    def test_zero_loss_run(self):
        assert normalized_loss(make_trace([0] * 10)) == 0.0

    def test_all_loss_run_hits_ceiling(self):
        trace = make_trace([1] * 25, gamma=0.9)
        assert normalized_loss(trace) == pytest.approx(1.0)

    def test_plain_arithmetic(self):
        trace = make_trace([1] * 25 + [0] * 75, gamma=1.0)
        assert normalized_loss(trace) == pytest.approx(0.25)


class TestVerifyBound:
    def test_zero_loss_margin_is_full_slack(self):
        trace = make_trace([0] * 60, gamma=0.95, max_order=2, beta=optimal_beta(0.95, 60, 3))
        report = verify_bound(trace, PredictorConfig(max_order=2, gamma=0.95,
                                                     beta="auto", horizon=60))
        ceiling = max_total_loss(0.95, 60)
        assert report.holds
        assert report.margin == pytest.approx(math.sqrt(2 * math.log(3) * ceiling) + math.log(3))

    def test_adversarial_all_new_symbols_still_bounded(self):
        tokens = [f"s{i}" for i in range(200)]
        config = PredictorConfig(max_order=2, gamma=0.9, beta="auto", horizon=200)
        trace = run_online(config, tokens)
        report = verify_bound(trace, config)
        assert normalized_loss(trace) == pytest.approx(1.0)
        assert report.holds

    def test_foreign_beta_warns(self):
        config = PredictorConfig(max_order=2, gamma=1.0, beta=0.5)
        trace = run_online(config, ["a", "b"] * 50)
        report = verify_bound(trace, config)
        assert report.warning is not None

    def test_auto_beta_no_warning(self):
        config = PredictorConfig(max_order=2, gamma=1.0, beta="auto", horizon=100)
        trace = run_online(config, ["a", "b"] * 50)
        assert verify_bound(trace, config).warning is None


class TestMajorization:
    def test_known_pair(self):
        assert check_majorization([1.0, 2.0], 0.5, 2) is True

    def test_m_one_trivial(self):
        assert check_majorization([3.0, 1.0, 2.0], 0.7, 1) is True

    def test_uniform_weights(self):
        assert check_majorization([2.0, 2.0, 2.0], 0.4, 5) is True

    def test_rejects_nonpositive_weights(self):
        with pytest.raises(ConfigError):
            check_majorization([1.0, 0.0], 0.5, 2)


class TestOrderedInequality:
    def test_known_pair(self):
        assert check_ordered_inequality([1.0, 2.0], [1.0, 0.0], 0.5, 2) is True

    def test_equal_losses_give_equality(self):
        assert check_ordered_inequality([1.0, 2.0, 3.0], [0.5, 0.5, 0.5], 0.5, 3) is True

    def test_single_expert(self):
        assert check_ordered_inequality([2.0], [1.0], 0.5, 2) is True

    def test_violated_precondition_is_inapplicable(self):
        assert check_ordered_inequality([2.0, 1.0], [1.0, 0.0], 0.5, 2) is None
        assert check_ordered_inequality([1.0, 2.0], [0.0, 1.0], 0.5, 2) is None


class TestAccuracyCurve:
    def test_perfect_run(self):
        curve = accuracy_curve(make_trace([0] * 5))
        np.testing.assert_allclose(curve, 1.0)

    def test_alternating_limits_to_half(self):
        curve = accuracy_curve(make_trace([1, 0] * 50))
        assert curve[-1] == pytest.approx(0.5)

    def test_cumulative_matches_stored_field(self):
        trace = run_online(PredictorConfig(max_order=1, beta=0.9), ["a", "b", "a", "a", "b"])
        np.testing.assert_allclose(accuracy_curve(trace), trace.cumulative_accuracy)

    def test_rolling_window(self):
        curve = accuracy_curve(make_trace([1, 1, 0, 0]), window=2)
        np.testing.assert_allclose(curve, [0.0, 0.0, 0.5, 1.0])

    def test_bad_window(self):
        with pytest.raises(ConfigError):
            accuracy_curve(make_trace([0]), window=0)


class TestExport:
    def test_csv_roundtrip(self, tmp_path):
        trace = run_online(PredictorConfig(max_order=1, beta=0.9), ["a", "b", "a"])
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, str(path), per_expert=True)
        with open(path) as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 3
        assert rows[0]["predicted"] == ""  # cold start sentinel
        assert rows[0]["actual"] == "a"
        assert int(rows[0]["loss"]) == 1
        assert float(rows[2]["cum_acc"]) == pytest.approx(trace.cumulative_accuracy[2])
        assert "p_0" in rows[0] and "L_1" in rows[0]

    def test_summary_fields(self):
        trace = run_online(PredictorConfig(max_order=1, beta=0.9), ["a", "b", "a", "a"])
        summary = summarize(trace)
        assert summary["steps"] == 4
        assert summary["num_experts"] == 2
        assert 0.0 <= summary["normalized_loss"] <= 1.0
        text = format_summary(trace)
        assert "discounted_loss=" in text

    def test_per_step_bound_uses_running_best(self):
        trace = run_online(PredictorConfig(max_order=1, gamma=0.9, beta=0.8), ["a", "b"] * 20)
        n = trace.n
        best = trace.expert_discounted_losses[n - 1].min()
        expected = loss_bound(0.9, n, 2, float(best))
        assert trace.bound[-1] == pytest.approx(expected)
