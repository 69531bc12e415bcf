//! Reference limit laws and the Monte Carlo harness around them.

mod ecdf;
mod experiments;
mod reference;

pub use ecdf::{dkw_slack, effective_size, ks_distance, two_sample_ks, EmpiricalCDF, DKW_LEVEL};
pub use experiments::{
    clt_experiment, discrepancy_limit_experiment, erdos_fortet_experiment, frechet_experiment, gap_exponent_for, lil_trace,
    lil_trace_csv, stable_experiment, ExperimentConfig, ExperimentReport, KsCheck, LilRow, Normalization, PointSource,
    CALIBRATION_TOLERANCE, CLT_CONTROL_MIN, EF_CONTROL_MIN, KS_TOLERANCE,
};
pub use reference::{
    erdos_fortet_cdf, erdos_fortet_sf, erdos_fortet_variance, frechet_cdf, gaussian_covariance, heavy_tail_quantile, kac_variance,
    kolmogorov_k, kolmogorov_k_alternating, normal_cdf, orbit_sum_variance, KacVariance, DEFAULT_NODES, KAC_QUADRATURE_LIMIT,
};
