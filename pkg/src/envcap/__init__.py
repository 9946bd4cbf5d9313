"""Numerical toolkit for environment-assisted channel capacity bounds.

Evaluates the assisted quantum capacity, entropic lower bounds on the
assisted classical capacity, ensemble information bounds, PPT-detector
trace floors, code-size upper bounds, and high-entanglement subspace
constructions, with brute-force oracles cross-checking each closed form
at desk scale.
"""

from .tensor import (
    BipartiteShape,
    DensityOperator,
    DimensionError,
    DomainError,
    NormalizationError,
    PureStateVector,
    SchmidtDecomposition,
    haar_random_state,
    haar_random_unitary,
    is_ppt,
    partial_trace,
    partial_transpose,
    schmidt_decompose,
)
from .metrics import (
    EntropyTriple,
    binary_entropy,
    entanglement_entropy,
    fidelity,
    relative_entropy,
    shannon_mutual_information,
    trace_distance,
    verify_metric_inequalities,
    von_neumann_entropy,
)
from .channel import (
    ChannelSpecError,
    KrausSet,
    StinespringIsometry,
    adjoint_channel,
    amplitude_damping_isometry,
    apply_channel,
    complementary_channel,
    compose_channels,
    depolarizing_isometry,
    kraus_operators,
    load_channel_spec,
    load_channel_spec_file,
    make_random_mixture_of_unitaries,
    make_subspace_embedding_channel,
    stinespring_from_kraus,
    tensor_power_channel,
    tensor_product_channel,
)
from .bounds import (
    AccessibleInfoResult,
    AggregateLowerBound,
    BoundEntry,
    BoundParams,
    BoundReport,
    ConditionalBound,
    Ensemble,
    QCapacityConfig,
    QCapacityResult,
    accessible_information,
    chain_check,
    entropy_triple,
    local_information_bound,
    lower_bound_aggregate,
    lower_bound_basic,
    lower_bound_timeshare,
    max_code_size_per_signal_deficits,
    max_code_size_uniform_deficit,
    optimize_gamma,
    ppt_capacity_upper_bound,
    q_capacity,
)
from .detectors import (
    DetectorParams,
    InapplicableError,
    PovmElement,
    SolverConfig,
    best_detector_bound,
    detector_bound_large_deficit,
    detector_bound_small_deficit,
    min_trace_ppt_detector,
    nearest_maximally_entangled,
    random_ppt_element,
    random_ppt_povm,
    schmidt_tail_mass,
    truncate_state,
    verify_detector_bounds,
)
from .subspace import (
    ExampleChannel,
    MinEntanglementConfig,
    SubspaceParams,
    SubspaceSpec,
    antisymmetric_subspace,
    build_example_channel,
    guaranteed_subspace_dimension,
    min_entanglement,
    net_min_entanglement,
    sample_random_subspace,
    subspace_entanglement_floor,
    two_copy_superadditivity_probe,
)

__version__ = "0.1.0"
