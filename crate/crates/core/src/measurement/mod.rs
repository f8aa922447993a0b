//! Simulated Pauli measurements of a 2-RDM with binomial shot noise, and
//! shot planning for the standard and completion-based schemes.

mod map;
mod noise;
mod plan;
mod scheme;

pub use map::{
    build_map, enumerate_quartets, exact_pauli_expectations, ElementRef, FermiPauliMap, Quartet,
    Unknown, EXPECTATION_SLACK,
};
pub use noise::{
    calibrate, measure_elements, shot_variance, simulate_shots, stream_rng, Calibration,
    CalibrationConfig,
};
pub use plan::{
    calibrate_standard, complete_measured, default_quartet_grid, plan_noisy, sample_quartets,
    select, synthetic_shot_reduction, NoisyPlan, PlanConfig, PlanPoint, SamplingUnit, ShotBudget,
    ShotReduction,
};
pub use scheme::{MeasuredRdm, MeasurementScheme, Selection};
