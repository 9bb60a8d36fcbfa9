use std::fmt;

use ehrenfest_core::{
    energy, hamiltonian_value, integrate_flow, stability_number, DilatedPacket, EnvelopeSpec, GridSpec,
    PhaseSpacePoint, PotentialSpec, QuantumSetup, SystemSpec,
};
use serde::Serialize;

use crate::config::{Diagnostic, ExperimentConfig, HbarSpec};
use crate::CliError;

/// Largest tolerated split-operator phase per step.
pub const STABILITY_LIMIT: f64 = 0.5;
/// Closest a packet centre may sit to the grid edge, in units of `√ℏ`.
pub const CONTAINMENT_MARGIN: f64 = 10.0;
/// Momentum half-width of a coherent packet, in units of its spread `√(ℏ/2)`.
const MOMENTUM_MARGIN: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub level: Level,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.level {
            Level::Warning => "warning",
            Level::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Sweep,
}

/// Everything a single run needs, resolved from the config at one `ℏ`.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub system: SystemSpec,
    pub potential: Option<PotentialSpec>,
    pub setup: QuantumSetup,
    pub start: PhaseSpacePoint,
    pub t_final: f64,
    pub revival_window: (f64, f64),
}

impl Plan {
    pub fn new(config: &ExperimentConfig, hbar: f64) -> Result<Self, CliError> {
        let bad = |field: &str, e: ehrenfest_core::Error| CliError::Config(format!("{field}: {e}"));
        let system = match config.system() {
            SystemSpec::Harmonic { omega } => SystemSpec::harmonic(omega).map_err(|e| bad("omega", e))?,
            s => s,
        };
        let mut setup = QuantumSetup::preset(&system, hbar).map_err(|e| bad("hbar", e))?;
        if let Some(g) = config.grid {
            setup.grid = GridSpec::new(g.x_min, g.x_max, g.n).map_err(|e| bad("grid", e))?;
        }
        if let Some(dt) = config.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Config(format!("dt: must be positive, got {dt}")));
            }
            setup.dt = dt;
        }
        let t_final = config
            .time_spec()
            .schedule()?
            .resolve(&system, hbar)
            .map_err(|e| bad("t_final", e))?;
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(CliError::Config(format!("t_final: must be positive, got {t_final}")));
        }
        let revival_window = config.revival_window.unwrap_or_else(|| default_revival_window(&system, hbar, t_final));
        Ok(Self { potential: system.potential(), system, setup, start: config.start_point(), t_final, revival_window })
    }
}

/// `[T/2, 2T]` clipped to the run for hyperbolic scenarios, the second half
/// of the run otherwise.
fn default_revival_window(system: &SystemSpec, hbar: f64, t_final: f64) -> (f64, f64) {
    match ehrenfest_core::TimeSchedule::Ehrenfest(1.0).resolve(system, hbar) {
        Ok(t_e) if 0.5 * t_e < t_final => (0.5 * t_e, (2.0 * t_e).min(t_final)),
        _ => (0.5 * t_final, t_final),
    }
}

fn error(field: &str, message: impl Into<String>) -> Finding {
    Finding { level: Level::Error, field: field.to_string(), message: message.into() }
}

fn warning(field: &str, message: impl Into<String>) -> Finding {
    Finding { level: Level::Warning, field: field.to_string(), message: message.into() }
}

/// Checks a config without running it.
pub fn validate(config: &ExperimentConfig, mode: Mode) -> Vec<Finding> {
    let mut out = Vec::new();
    let hbars = config.hbar.values();
    match mode {
        Mode::Run if hbars.len() != 1 => {
            out.push(error("hbar", format!("run takes a single value, got {}; use sweep for lists", hbars.len())));
        }
        Mode::Sweep => {
            if hbars.len() < 3 || matches!(config.hbar, HbarSpec::Single(_)) {
                out.push(error("hbar", "a sweep needs a list of at least 3 values"));
            }
            if config.grid.is_some() || config.dt.is_some() {
                out.push(warning("grid", "sweeps use the preset grid and step at every hbar; overrides are ignored"));
            }
            let sweepable = [Diagnostic::CoherentFit, Diagnostic::Egorov, Diagnostic::Moments];
            if config.diagnostics.is_empty() {
                out.push(error("diagnostics", "a sweep needs one of coherent-fit, egorov, moments"));
            }
            for d in &config.diagnostics {
                if !sweepable.contains(d) {
                    out.push(error("diagnostics", format!("{} cannot be swept", d.name())));
                }
            }
        }
        _ => {}
    }
    if config.snapshot_stride == 0 {
        out.push(error("snapshot_stride", "must be at least 1"));
    }
    if config.diagnostics.contains(&Diagnostic::MeasurementSamples) && config.sample_count == 0 {
        out.push(error("sample_count", "must be at least 1"));
    }
    for &hbar in &hbars {
        if !(hbar > 0.0 && hbar.is_finite()) {
            out.push(error("hbar", format!("values must be positive, got {hbar}")));
            continue;
        }
        match Plan::new(config, hbar) {
            Ok(plan) => check_plan(config, &plan, mode, &mut out),
            Err(CliError::Config(msg)) => {
                let (field, message) = msg.split_once(": ").unwrap_or(("config", msg.as_str()));
                out.push(error(field, message));
            }
            Err(e) => out.push(error("config", e.to_string())),
        }
    }
    out.dedup();
    out
}

fn check_plan(config: &ExperimentConfig, plan: &Plan, mode: Mode, out: &mut Vec<Finding>) {
    let QuantumSetup { grid, hbar, dt } = plan.setup;
    let at = |msg: String| format!("{msg} (hbar = {hbar})");
    let margin = CONTAINMENT_MARGIN * hbar.sqrt();
    let start = plan.start;

    if !start.is_finite() {
        out.push(error("start", "must be finite"));
        return;
    }
    if start.q < grid.x_min + margin || start.q > grid.x_max - margin {
        out.push(error(
            "start",
            at(format!(
                "coherent state at q = {} lies within {} sqrt(hbar) of the grid boundary [{}, {}]",
                start.q, CONTAINMENT_MARGIN, grid.x_min, grid.x_max
            )),
        ));
        return;
    }
    if mode == Mode::Run && plan.t_final < dt && plan.potential.is_some() {
        out.push(warning("dt", at(format!("step {dt} exceeds t_final {}; a single shorter step is used", plan.t_final))));
    }

    let sigma_p = (0.5 * hbar).sqrt();
    let nyquist = grid.nyquist_momentum(hbar);
    if start.p.abs() + MOMENTUM_MARGIN * sigma_p > nyquist {
        out.push(error(
            "start",
            at(format!("momentum {} is not resolved by the grid (Nyquist momentum {nyquist})", start.p)),
        ));
        return;
    }

    match &plan.potential {
        None => {
            let packet = DilatedPacket::new(start.q, start.p, EnvelopeSpec::StandardGaussian, hbar)
                .map(|p| p.evolve(plan.t_final).sample(grid));
            if let Ok(Err(e)) | Err(e) = packet {
                out.push(error("t_final", at(format!("dilated packet leaves the grid by t = {}: {e}", plan.t_final))));
            }
        }
        Some(potential) => {
            let psi0 = match plan.setup.coherent_state(start) {
                Ok(psi) => psi,
                Err(e) => {
                    out.push(error("start", at(e.to_string())));
                    return;
                }
            };
            let e0 = energy(&psi0, potential);
            let ceiling = e0 + hbar.sqrt();
            let s = stability_number(potential, &grid, hbar, dt, ceiling);
            if s > STABILITY_LIMIT {
                out.push(warning(
                    "dt",
                    at(format!("phase per step {s:.3} exceeds {STABILITY_LIMIT}; reduce dt below {}", dt * STABILITY_LIMIT / s)),
                ));
            }
            let v_min = grid.points().into_iter().map(|x| potential.value(x)).fold(f64::INFINITY, f64::min);
            let p_max = (2.0 * (ceiling - v_min).max(0.0)).sqrt().max(start.p.abs());
            if p_max + MOMENTUM_MARGIN * sigma_p > nyquist {
                out.push(warning(
                    "grid",
                    at(format!("accessible momenta up to {p_max:.3} approach the Nyquist momentum {nyquist:.3}")),
                ));
            }
            if let Ok(path) = integrate_flow(&plan.system, start, plan.t_final, dt.min(plan.t_final)) {
                let (lo, hi) = path.points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x.q), hi.max(x.q)));
                if lo < grid.x_min + margin || hi > grid.x_max - margin {
                    out.push(warning(
                        "grid",
                        at(format!("classical path spans [{lo:.3}, {hi:.3}], within {CONTAINMENT_MARGIN} sqrt(hbar) of the boundary")),
                    ));
                }
            }
        }
    }

    if mode == Mode::Run {
        if config.diagnostics.contains(&Diagnostic::TubeMass) {
            match plan.system {
                SystemSpec::PotentialWell(_) | SystemSpec::Harmonic { .. } => {
                    let h = hamiltonian_value(&plan.system, start);
                    if ehrenfest_core::separatrix(&plan.system, h, 16).is_err() {
                        out.push(error("diagnostics", format!("tube-mass: the level set h = {h} is not a closed curve")));
                    }
                }
                _ => out.push(error("diagnostics", "tube-mass needs a potential well with closed level sets")),
            }
        }
        if config.diagnostics.contains(&Diagnostic::Revivals) {
            let (a, b) = plan.revival_window;
            if !(a >= 0.0 && a <= b && b <= plan.t_final) {
                out.push(error("revival_window", format!("[{a}, {b}] must lie within [0, {}]", plan.t_final)));
            }
        }
    }
}

/// Errors as one config message; warnings are logged.
pub(crate) fn check(config: &ExperimentConfig, mode: Mode) -> Result<(), CliError> {
    let findings = validate(config, mode);
    for f in findings.iter().filter(|f| f.level == Level::Warning) {
        log::warn!("{f}");
    }
    let errors: Vec<String> = findings
        .iter()
        .filter(|f| f.level == Level::Error)
        .map(|f| format!("{}: {}", f.field, f.message))
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(errors.join("; ")))
    }
}
