//! Coherent-state dynamics near hyperbolic fixed points: classical flows,
//! grid wavefunctions, Schrödinger propagators and the diagnostics that
//! compare them as ℏ → 0.

pub mod classical;
pub mod diagnostics;
pub mod error;
pub mod fit;
pub mod io;
pub mod polynomial;
pub mod propagators;
pub mod quantum;

pub use classical::{
    flow_map, hamiltonian_value, hyperbolic_analysis, integrate_flow, level_set_momentum, separation_exponent, step_count,
    separatrix, vector_field, Branch, HyperbolicData, LevelArc, PhaseSpacePoint, PotentialSpec, SeparatrixCurve,
    SystemSpec, Trajectory,
};
pub use diagnostics::{
    coherent_fit, egorov_error, egorov_series, evaluate, hbar_sweep, localization_metrics, revival_detector,
    CoherentFit, LocalizationMetrics, QuantumSetup, RevivalPeak, RevivalSummary, ScalingReport, SweepDiagnostic,
    SweepExperiment, TimeSchedule, TubeMass,
};
pub use error::{Error, Result};
pub use polynomial::Polynomial;
pub use propagators::{
    dilation_record, evolve_dilation, evolve_exact_reference, evolve_split_operator, stability_number,
    DilatedPacket, EvolutionRecord, ExactReference, PropagatorSpec, Snapshot,
};
pub use quantum::{
    energy, expectation_diffop, husimi, make_coherent_state, moments, position_cdf, projective_measurement,
    sample_positions, DiffOperator, EnvelopeSpec, GridSpec, HusimiField, MeasurementOutcome, Moments,
    SpectralObservable, Wavefunction,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
