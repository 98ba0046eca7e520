"""Finite-temperature variational Monte Carlo with robust state decompositions."""

from .chainsim import (
    HamiltonianTerm,
    IsingSpec,
    SiteTrace,
    SweepConfig,
    SweepResult,
    freeze_outcomes,
    replay_sweep,
    run_sweep,
    step_site,
    write_site_trace,
)
from .decomp import (
    ConditionalModel,
    ReconstructionOp,
    apply_reconstruction,
    build_reconstruction,
    canonical_decompose,
    embed_model,
    load_model,
    param_count,
    save_model,
)
from .entropy import (
    classical_step_entropy,
    entropy_bound_dephased,
    error_channel_distortion,
    relative_entropy,
    step_entropy_production,
)
from .optim import (
    ObjectiveSpec,
    OptResult,
    continuation_schedule,
    default_init,
    evaluate_objective,
    fixed_outcome_gradient,
    line_minimize,
    minimize,
    write_trace_csv,
)
from .qmath import (
    DensityMatrix,
    PauliString,
    PureStateVector,
    condition_on_outcome,
    dephase,
    partial_trace,
    pauli_expectation,
    von_neumann_entropy,
)

__version__ = "0.1.0"
