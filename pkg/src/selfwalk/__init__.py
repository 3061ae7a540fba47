"""Self-interacting lattice walks: enumeration, sampling, geometry, phases."""

__version__ = "0.1.0"

from .paths import (  # noqa: F401
    LatticePath,
    Locality,
    Pattern,
    concatenate,
    count_pattern,
    displacement,
    elementary_loop,
    local_times,
    reverse,
)
from .potentials import (  # noqa: F401
    GCParams,
    PerturbationSpec,
    PhiSpec,
    classify,
    log_weight,
    model_annealed,
    model_domb_joyce,
    model_free,
    model_reinforced,
    model_saw,
    potential_of_path,
)
from .enumeration import (  # noqa: F401
    EnumerationResult,
    GFResult,
    all_paths_gf,
    bubble_check,
    connectivity_constant,
    endpoint_distribution,
    hitting_gf,
    partition_function,
    restricted_pf,
)
from .geometry import (  # noqa: F401
    ConeSpec,
    NormTable,
    WulffShape,
    build_norm_table,
    cone_contains,
    dual_drift,
    k_lambda0,
    polar_norm,
    surcharge,
    surcharge_trunk,
    wulff_membership,
    xi_estimate,
)
from .coarse import (  # noqa: F401
    IrreducibleDecomposition,
    Skeleton,
    cone_points_path,
    cone_points_skeleton,
    cone_points_trunk,
    irreducible_decompose,
    piece_weight_identity,
    q_measure_mass,
    q_tail_stats,
    skeleton_attractive,
    skeleton_repulsive,
    skeleton_stats,
    verify_p1_p2,
)
from .sampler import (  # noqa: F401
    ChainConfig,
    ChainStats,
    estimate_cone_density,
    estimate_endpoint_covariance,
    estimate_pattern_frequency,
    estimate_speed,
    mcmc_sample,
)
from .phase import (  # noqa: F401
    FreeEnergyEstimate,
    PhaseReport,
    RateFunctionTable,
    classify_phase,
    free_energy,
    implicit_surface_F,
    lambda_of_drift,
    perturbed_correction_f,
    rate_function,
    speed_from_free_energy,
)
