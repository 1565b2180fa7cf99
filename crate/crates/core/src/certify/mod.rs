//! Certification pipeline: MLSI estimates, mixing and quasi-factorization checks, and their assembly.

mod assemble;
mod defect;
mod divergence;
mod ensemble;
mod mixing;
mod optimize;
mod quasi;
mod suite;

pub use assemble::{
    assemble_from, assemble_lower_bound, mixing_time_check, AssembledBound, MixingTimeReport, TrajectoryRow,
    DECAY_RELATIVE, HEURISTIC_CAVEAT, TRAJECTORY_ABSOLUTE, TRAJECTORY_FLOOR, TRAJECTORY_REFINE,
};
pub use defect::{defect_factors, spin_defect_condition, DefectFactors, InterfaceFactor, SpinDefectReport};
pub use divergence::{ClassicalDivergence, DenseDivergence, DivergenceOracle};
pub use ensemble::{
    sample_full_rank, sample_low_rank, sample_state, sample_states, Ensemble, FULL_RANK_FLOOR, MIXTURE_EPS,
};
pub use mixing::{
    fit_exponential, mixing_norm, mixing_scan, operator_interval_check, ExpFit, GibbsRef, IntervalReport,
    MixingConditionReport, MixingRow,
};
pub use optimize::{
    conditional_mlsi_estimate, conditional_quotient, mlsi_estimate, mlsi_quotient, qf_constant_estimate, qf_ratio,
    EstimateOptions, MlsiEstimate, QfReport, DEGENERATE, SIGMA_EXCLUSION,
};
pub use quasi::{
    check_separated_blocks, classical_log_defect, lemma_bound_cre_check, lemma_slack, step1_check, step1_slack,
    step2_check, step2_slack, CertState, InequalityReport, LemmaReport, Step1Report,
};
pub use suite::{
    dynamics_property_suite, entropy_property_range, entropy_property_suite, qmc_structure_suite,
    shielded_tripartitions, site_entropy_production_suite, PropertyKind, PropertyResult, QmcRow, QmcSuiteReport,
    SuiteReport, DECOMPOSITION_TOLERANCE, DERIVATIVE_STEP, DERIVATIVE_TOLERANCE, FIXED_POINT_TOLERANCE,
    TRACE_TOLERANCE,
};
