"""Self-truncating best-of-N decoding engine.

Run N parallel samplings of an autoregressive model, estimate the most
promising one early from the consistency of its layer-wise embedding
chain, truncate the rest, and finish only the winner. Ships with
full-generation baselines, a token-slot cost model, and a Monte Carlo
validator for the consistency-propagation bound.
"""

from .baselines import (
    FullBonResult,
    VoteTally,
    ablation_distance,
    coe_full_select,
    full_bon_generate,
    majority_vote,
)
from .clustered import (
    ClusteredTask,
    ClusteredTaskConfig,
    Question,
    build_clustered_task_model,
    default_task,
    extract_answer,
)
from .coe import (
    CoEChain,
    CoEFeature,
    argmin_select,
    chain_from_hidden,
    coe_feature,
    consistency_scores,
    pair_distance,
    update_chain,
)
from .conformance import CheckResult, run_interface_suite
from .controller import (
    DecodeResult,
    DecodeState,
    EstimationRecord,
    StBoNConfig,
    detect_earliest_time,
    run_stbon,
    vote_final,
)
from .costs import (
    CostReport,
    SlotLedger,
    empirical_c_T_distributions,
    measure_run,
    memory_reduction_rate,
)
from .errors import (
    BridgeFailureError,
    BridgeProtocolError,
    ConfigError,
    ContextOverflowError,
    DegenerateChainError,
    EmptySupportError,
    InsufficientSamplesError,
    ReplayMissError,
    StbonError,
)
from .harness import ExperimentConfig, load_config, paired_study, run_experiment, strip_wall_fields, sweep
from .interface import Model, ModelDescriptor, StepOutput, TokenSequence
from .replay import RecordingModel, ReplayModel
from .sampling import SamplingParams, TokenDistribution, derive_rng, sample_token, transform_logits
from .theorem import (
    BoundVerdict,
    CoupledChainConfig,
    CoupledTrajectory,
    check_drift_bound,
    check_markov_bound,
    simulate_coupled,
)
from .toy import ToyTransformer, ToyTransformerConfig, build_toy_transformer

__version__ = "0.1.0"

__all__ = [
    "FullBonResult",
    "VoteTally",
    "ablation_distance",
    "coe_full_select",
    "full_bon_generate",
    "majority_vote",
    "ClusteredTask",
    "ClusteredTaskConfig",
    "Question",
    "build_clustered_task_model",
    "default_task",
    "extract_answer",
    "CoEChain",
    "CoEFeature",
    "argmin_select",
    "chain_from_hidden",
    "coe_feature",
    "consistency_scores",
    "pair_distance",
    "update_chain",
    "CheckResult",
    "run_interface_suite",
    "DecodeResult",
    "DecodeState",
    "EstimationRecord",
    "StBoNConfig",
    "detect_earliest_time",
    "run_stbon",
    "vote_final",
    "CostReport",
    "SlotLedger",
    "empirical_c_T_distributions",
    "measure_run",
    "memory_reduction_rate",
    "BridgeFailureError",
    "BridgeProtocolError",
    "ConfigError",
    "ContextOverflowError",
    "DegenerateChainError",
    "EmptySupportError",
    "InsufficientSamplesError",
    "ReplayMissError",
    "StbonError",
    "ExperimentConfig",
    "load_config",
    "paired_study",
    "run_experiment",
    "strip_wall_fields",
    "sweep",
    "Model",
    "ModelDescriptor",
    "StepOutput",
    "TokenSequence",
    "RecordingModel",
    "ReplayModel",
    "SamplingParams",
    "TokenDistribution",
    "derive_rng",
    "sample_token",
    "transform_logits",
    "BoundVerdict",
    "CoupledChainConfig",
    "CoupledTrajectory",
    "check_drift_bound",
    "check_markov_bound",
    "simulate_coupled",
    "ToyTransformer",
    "ToyTransformerConfig",
    "build_toy_transformer",
    "__version__",
]
