use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{coherent_fit, egorov_error, localization_metrics, position_expectation, QuantumSetup};
use crate::classical::{flow_map, hyperbolic_analysis, step_count, PhaseSpacePoint, SystemSpec};
use crate::error::{invalid, Error, Result};
use crate::fit::linear_fit;
use crate::polynomial::Polynomial;
use crate::propagators::{evolve_split_operator, DilatedPacket};
use crate::quantum::{EnvelopeSpec, Wavefunction};

/// When a diagnostic is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSchedule {
    Fixed(f64),
    /// `fraction · λ⁻¹ log(1/ℏ)` with λ the exponent of the hyperbolic
    /// point at the origin.
    Ehrenfest(f64),
}

impl TimeSchedule {
    pub fn resolve(&self, system: &SystemSpec, hbar: f64) -> Result<f64> {
        match *self {
            Self::Fixed(t) => Ok(t),
            Self::Ehrenfest(fraction) => {
                let lambda = hyperbolic_analysis(system, PhaseSpacePoint::ORIGIN)?.exponent;
                Ok(fraction * (1.0 / hbar).ln() / lambda)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepExperiment {
    pub system: SystemSpec,
    /// Centre of the initial standard coherent state.
    pub start: PhaseSpacePoint,
    pub time: TimeSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepDiagnostic {
    CoherentFitResidual,
    /// Position symbol `f(q)`.
    EgorovError(Polynomial),
    DeltaQ,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// Decreasing.
    pub hbar: Vec<f64>,
    pub values: Vec<f64>,
    /// Slope of `log(value)` against `log(ℏ)`.
    pub exponent: f64,
    /// RMS residual of that fit, in natural-log units.
    pub residual: f64,
}

/// Evolved state of the experiment at its scheduled time.
fn evolved_state(exp: &SweepExperiment, setup: &QuantumSetup, t: f64) -> Result<Wavefunction> {
    match &exp.system {
        SystemSpec::Dilation => {
            DilatedPacket::new(exp.start.q, exp.start.p, EnvelopeSpec::StandardGaussian, setup.hbar)?
                .evolve(t)
                .sample(setup.grid)
        }
        system => {
            let potential = system.potential().expect("separable system");
            let psi0 = setup.coherent_state(exp.start)?;
            if t == 0.0 {
                return Ok(psi0);
            }
            let (n, h) = step_count(t, setup.dt.min(t));
            let record = evolve_split_operator(&psi0, &potential, h, n, n)?;
            Ok(record.final_state().clone())
        }
    }
}

/// One run of the experiment at `hbar` with the preset setup.
pub fn evaluate(exp: &SweepExperiment, hbar: f64, diagnostic: &SweepDiagnostic) -> Result<f64> {
    let setup = QuantumSetup::preset(&exp.system, hbar)?;
    let t = exp.time.resolve(&exp.system, hbar)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("diagnostic time must be nonnegative, got {t}")));
    }
    match diagnostic {
        SweepDiagnostic::EgorovError(symbol) => match exp.system.potential() {
            Some(potential) => egorov_error(&potential, symbol, exp.start, t, &setup),
            None => {
                let psi = evolved_state(exp, &setup, t)?;
                let classical = flow_map(&exp.system, exp.start, t, setup.dt)?;
                Ok((position_expectation(&psi, symbol) - symbol.eval(classical.q)).abs())
            }
        },
        SweepDiagnostic::CoherentFitResidual => {
            let psi = evolved_state(exp, &setup, t)?;
            let guess = flow_map(&exp.system, exp.start, t, setup.dt)?;
            Ok(coherent_fit(&psi, guess)?.residual)
        }
        SweepDiagnostic::DeltaQ => {
            let psi = evolved_state(exp, &setup, t)?;
            Ok(localization_metrics(&psi, None, 1.0)?.delta_q)
        }
    }
}

/// Runs the experiment for every `ℏ` (in parallel) and fits a power law
/// `value ∝ ℏ^exponent`.
pub fn hbar_sweep(exp: &SweepExperiment, hbars: &[f64], diagnostic: &SweepDiagnostic) -> Result<ScalingReport> {
    if hbars.len() < 3 {
        return Err(invalid(format!("a sweep needs at least 3 hbar values, got {}", hbars.len())));
    }
    if hbars.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(invalid("hbar values must be positive"));
    }
    let mut sorted = hbars.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    if sorted.len() < 3 {
        return Err(invalid("a sweep needs at least 3 distinct hbar values"));
    }
    if sorted[0] / sorted[sorted.len() - 1] < 100.0 * (1.0 - 1e-9) {
        return Err(invalid("hbar values must span at least two decades"));
    }

    let values = sorted
        .par_iter()
        .map(|&hbar| {
            let wrap = |source: Error| Error::Sweep { hbar, source: Box::new(source) };
            let v = evaluate(exp, hbar, diagnostic).map_err(wrap)?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(wrap(invalid(format!("diagnostic value {v} cannot enter a log-log fit"))));
            }
            Ok(v)
        })
        .collect::<Result<Vec<f64>>>()?;

    let xs: Vec<f64> = sorted.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(ScalingReport { hbar: sorted, values, exponent: fit.slope, residual: fit.rms_residual })
}
