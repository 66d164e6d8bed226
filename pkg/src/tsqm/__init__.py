"""Time-symmetrized quantum mechanics at desk scale.

Born and ABL probabilities over finite-dimensional Hilbert spaces,
counterfactual verdicts, element-of-reality scans, and a seeded Monte Carlo
simulator for pre- and postselected ensembles.
"""

from .config import TOL, Tolerances, default_backend
from .errors import (
    DimensionMismatch,
    EmptyEnsemble,
    InvariantViolation,
    NoPostselectedTrials,
    NotNormalized,
    ParseError,
    StepNotMeasure,
    TooManyContexts,
    TsqmError,
    UnknownOutcome,
    ValidationError,
    ZeroProbabilityOutcome,
    ZeroVector,
)
from .hilbert import (
    DensityOperator,
    Operator,
    Projector,
    StateVector,
    UnitaryOperator,
    apply,
    basis,
    identity,
    inner,
    ket,
    normalize,
    projector_onto,
    pure_density,
    subspace_projector,
    tensor,
    tensor_operator,
    trace,
)
from .measure import (
    MeasurementContext,
    ProbabilityTable,
    basis_context,
    born,
    born_at,
    born_distribution,
    computational_context,
    joint_born,
    lueders_update,
    subset_context,
    trace_probability,
)
from .tsvf import (
    BoundaryConditions,
    CounterfactualVerdict,
    ElementOfRealityReport,
    Verdict,
    abl_distribution,
    bipartition_contexts,
    born_certainty_implies_abl_certainty,
    element_of_reality_scan,
    evaluate_counterfactual,
)
from .ensemble import (
    NO_CLICK,
    DetectorModel,
    EnsembleStats,
    Evolve,
    ExperimentSpec,
    Measure,
    TrialRecord,
    compare_to_abl,
    detector_efficiency_report,
    exact_conditional,
    run_ensemble,
    run_trial,
)
from .rng import TrialStream
from .experiments import (
    BUILTINS,
    builtin,
    entangled_pair,
    spin_sequence,
    three_box,
    two_detector,
    two_slit_choice,
)
from .expfile import dump_experiment, dumps_experiment, parse_experiment

__version__ = "0.1.0"
