"""Tsetlin Machine learners for stochastic contextual bandits.

The package splits into the machine itself (`tm`), context binarization
(`binarize`), arm-selection policies (`policies`), the online evaluation
harness (`experiment`), dataset loaders and generators (`data`), DNF rule
extraction (`interpret`), and the command-line front end (`cli`).
"""

from .binarize import (
    BinarizationSchema,
    OneHotFeature,
    ThermometerFeature,
    cutoff_schema,
    fit_schema,
    threshold_binarize,
)
from .data import (
    ConvergenceError,
    TabularDataset,
    class_to_bandit,
    gen_noisy_xor,
    load_csv,
    load_interactions,
    recommender_to_bandit,
    save_csv,
    truncated_svd,
)
from .experiment import (
    AggregateCurves,
    BanditRound,
    Context,
    ExperimentTrace,
    aggregate_runs,
    cumulative_regret,
    cumulative_reward,
    run_experiment,
    write_aggregate_csv,
    write_trace_csv,
)
from .interpret import DnfExpression, dnf_eval, extract_arm_dnf, render_dnf, simplify_dnf
from .policies import (
    ArmHistory,
    LinUcbPolicy,
    LogisticEpsGreedyPolicy,
    Policy,
    PolicyConfig,
    TmEpsGreedyPolicy,
    TmThompsonExactPolicy,
    TmThompsonOnlinePolicy,
    eps_greedy_select,
    make_policy,
    policy_from_dict,
    thompson_step_exact,
    thompson_step_online,
)
from .tm import (
    ConfigError,
    FeedbackKind,
    TmConfig,
    TsetlinMachine,
    sample_type_i_transitions,
    sample_type_ii_transitions,
    transition_kind,
)

__version__ = "0.1.0"
