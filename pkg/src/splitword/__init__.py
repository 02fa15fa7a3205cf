"""Simulation and verification laboratory for split-word processes."""

from .words import (
    BlockView,
    Word,
    block_decode,
    block_encode,
    canonical_word,
    hamming,
    subword,
    tilde_extract,
)
from .coupling import (
    Coupling,
    canonical_coupling,
    canonical_coupling_of_letters,
    change_innovations,
    h_count,
    match_predicate,
    partial_canonical_coupling,
    recover_innovations,
)
from .schedule import (
    ConditionReport,
    ConstRatio,
    Ex2,
    ExplicitRatios,
    Extracted,
    Schedule,
    ScheduleSpec,
    SelectionPlan,
    Tower2,
    build_schedule,
    build_selection_plan,
    condition_report,
    extract_index_intervals,
    extract_schedule,
    parse_spec,
    spec_to_string,
)
from .process import PairMode, Path, simulate_pair, simulate_path
from .metric import (
    AutCount,
    AutNode,
    SemiMetricValue,
    apply_aut,
    assignment_min,
    aut_count,
    choose_n0,
    e_bruteforce,
    e_exact,
    enumerate_aut,
    tail_bound,
)
from .reconstruct import (
    PipelineResult,
    PlanPair,
    ReconstructionPlan,
    canonical_prefix_word,
    full_chain,
    full_step_check,
    origin_event,
    partial_pipeline,
)
from .experiments import (
    BoundCheck,
    BoundReport,
    Estimate,
    bound_report,
    hoeffding_check,
    mc_estimate,
)

__version__ = "0.1.0"
