"""Online symbol prediction with discounted expert aggregation.

A pool of fixed-order context models shares one bounded-depth frequency trie;
each order predicts through escape-blended conditional distributions, and a
discounted exponential-weights aggregator combines them so the mix tracks
whichever order is doing best lately.
"""

from .core import NO_PREDICTION, Alphabet, ConfigError, SequenceStream, StreamError, open_stream
from .evaluate import (
    BoundReport,
    BoundRun,
    MetricsTrace,
    PredictorConfig,
    accuracy_curve,
    best_expert,
    check_majorization,
    check_ordered_inequality,
    normalized_loss,
    run_bound_suite,
    run_online,
    summarize,
    verify_bound,
    write_trace_csv,
)
from .hedge import (
    HedgeConfig,
    HedgeState,
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
from .ppm import (
    BlendedDistribution,
    NodeDistribution,
    UndefinedDistributionError,
    all_order_distributions,
    blend_for_context,
    blended_distribution,
    expert_predict,
    node_distribution,
)
from .sources import (
    MarkovSource,
    RandomMarkovSource,
    SourceSpec,
    TrainedSampler,
    explicit_markov,
    load_source_spec,
    load_transition_table,
    random_markov,
    regime_switch,
    sample,
    train_sampler,
)
from .trie import ContextTrie, TrieNode

__version__ = "0.1.0"
