from ._outpost import (
    CountLaw,
    FiniteNEngine,
    HeineParams,
    InvalidArgument,
    NumericError,
    QuadratureConfig,
    RadialPotential,
    RegionSet,
    build_case1,
    build_case2,
    case1_limit,
    case1_predicted_mgf,
    case2_limit,
    case2_predicted_law,
    case2_predicted_mgf,
    classify,
    converge,
    count_regions,
    covariance,
    ginibre,
    heine_1d_pmf,
    laplacian,
    log_mgf,
    mean_vector,
    mgf,
    outpost_regions,
    pmf_point,
    pmf_table,
    sample,
    sample_moduli,
    tv_distance,
    validate_potential,
    variance_vector,
)

__all__ = [name for name in dir() if not name.startswith("_")]
