//! Quantum–classical correspondence measurements.

mod coherent;
mod sweep;

pub use coherent::{coherent_fit, CoherentFit, GRADIENT_TOLERANCE};
pub use sweep::{evaluate, hbar_sweep, ScalingReport, SweepDiagnostic, SweepExperiment, TimeSchedule};

use serde::{Deserialize, Serialize};

use crate::classical::{integrate_flow, step_count, Branch, PhaseSpacePoint, PotentialSpec, SeparatrixCurve, SystemSpec};
use crate::error::{invalid, Error, Result};
use crate::polynomial::Polynomial;
use crate::propagators::{evolve_split_operator, EvolutionRecord};
use crate::quantum::{husimi, make_coherent_state, moments, EnvelopeSpec, GridSpec, Wavefunction};

/// Grid, ℏ and time step of one quantum run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumSetup {
    pub grid: GridSpec,
    pub hbar: f64,
    pub dt: f64,
}

/// `ℏ` at which the double-well preset uses 4096 nodes on `[−2, 2]`.
pub const REFERENCE_HBAR: f64 = 1e-3;
const REFERENCE_SPACING: f64 = 4.0 / 4096.0;
pub const DEFAULT_DT: f64 = 1e-3;

impl QuantumSetup {
    /// Default setup for `system` at `hbar`. The grid spacing scales as `√ℏ`
    /// so that a coherent packet always spans the same number of nodes.
    pub fn preset(system: &SystemSpec, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid(format!("hbar must be positive, got {hbar}")));
        }
        let half_width = match system {
            SystemSpec::PotentialWell(PotentialSpec::DoubleWell) => 2.0,
            SystemSpec::Dilation => 12.0,
            _ => 8.0,
        };
        Ok(Self { grid: scaled_grid(half_width, hbar)?, hbar, dt: DEFAULT_DT })
    }

    pub fn coherent_state(&self, start: PhaseSpacePoint) -> Result<Wavefunction> {
        make_coherent_state(self.grid, self.hbar, start.q, start.p, &EnvelopeSpec::StandardGaussian)
    }
}

/// Power-of-two grid on `[−half_width, half_width)` resolving `√ℏ`.
pub fn scaled_grid(half_width: f64, hbar: f64) -> Result<GridSpec> {
    let dx = REFERENCE_SPACING * (hbar / REFERENCE_HBAR).sqrt();
    let cells = (2.0 * half_width / dx - 1e-6).ceil().max(64.0) as usize;
    GridSpec::new(-half_width, half_width, cells.next_power_of_two())
}

/// `|⟨ψᵗ, f(Q)ψᵗ⟩ − f(qᵗ)|` at every snapshot of the evolution, where `ψᵗ`
/// is the split-operator evolution of the coherent state at `start` and `qᵗ`
/// the velocity-Verlet trajectory on the same time grid.
pub fn egorov_series(
    potential: &PotentialSpec,
    symbol: &Polynomial,
    start: PhaseSpacePoint,
    t: f64,
    setup: &QuantumSetup,
    stride: usize,
) -> Result<Vec<(f64, f64)>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be nonnegative, got {t}")));
    }
    let psi0 = setup.coherent_state(start)?;
    let system = SystemSpec::PotentialWell(potential.clone());
    let (record, classical) = if t == 0.0 {
        (evolve_split_operator(&psi0, potential, setup.dt, 0, 1)?, vec![start])
    } else {
        let dt = setup.dt.min(t);
        let (n, h) = step_count(t, dt);
        let record = evolve_split_operator(&psi0, potential, h, n, stride)?;
        (record, integrate_flow(&system, start, t, dt)?.points)
    };
    Ok(record
        .snapshots
        .iter()
        .map(|snap| {
            let quantum = position_expectation(&snap.state, symbol);
            (snap.time, (quantum - symbol.eval(classical[snap.step].q)).abs())
        })
        .collect())
}

/// [`egorov_series`] at the final time only.
pub fn egorov_error(
    potential: &PotentialSpec,
    symbol: &Polynomial,
    start: PhaseSpacePoint,
    t: f64,
    setup: &QuantumSetup,
) -> Result<f64> {
    let series = egorov_series(potential, symbol, start, t, setup, usize::MAX)?;
    Ok(series.last().expect("final snapshot is always recorded").1)
}

/// `⟨ψ, f(Q)ψ⟩ / ‖ψ‖²`.
pub fn position_expectation(psi: &Wavefunction, symbol: &Polynomial) -> f64 {
    psi.grid()
        .points()
        .into_iter()
        .zip(psi.position_density())
        .map(|(x, w)| symbol.eval(x) * w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeMass {
    pub radius: f64,
    pub total: f64,
    /// Mass nearest to a `p ≥ 0` branch.
    pub upper: f64,
    pub lower: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationMetrics {
    pub delta_q: f64,
    /// `(Σ|ψ|⁴dx)⁻¹` for normalized ψ, a length.
    pub inverse_participation: f64,
    pub tube: Option<TubeMass>,
}

/// Husimi lattice spacing in units of `√ℏ`.
const TUBE_LATTICE_SPACING: f64 = 0.5;

/// Spread, inverse participation ratio and, given a curve, the Husimi mass
/// within phase-space distance `radius` of it.
///
/// The Husimi lattice is anchored at integer multiples of its spacing, so
/// lattices for different radii share their nodes.
pub fn localization_metrics(
    psi: &Wavefunction,
    curve: Option<&SeparatrixCurve>,
    radius: f64,
) -> Result<LocalizationMetrics> {
    let delta_q = moments(psi)?.delta_q;
    let dx = psi.grid().dx();
    let total = psi.norm_sqr();
    let quartic: f64 = psi.amplitudes().iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>() * dx;
    let inverse_participation = total * total / quartic;
    let tube = match curve {
        None => None,
        Some(curve) => Some(tube_mass(psi, curve, radius)?),
    };
    Ok(LocalizationMetrics { delta_q, inverse_participation, tube })
}

pub fn tube_mass(psi: &Wavefunction, curve: &SeparatrixCurve, radius: f64) -> Result<TubeMass> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid(format!("tube radius must be positive, got {radius}")));
    }
    if curve.arcs.is_empty() {
        return Err(Error::EmptyLevelSet { energy: curve.energy });
    }
    let spacing = TUBE_LATTICE_SPACING * psi.hbar().sqrt();
    let (q_min, q_max, p_min, p_max) = curve.bounds();
    let anchored = |lo: f64, hi: f64| -> Vec<f64> {
        let first = ((lo - radius) / spacing).floor() as i64;
        let last = ((hi + radius) / spacing).ceil() as i64;
        (first..=last).map(|k| k as f64 * spacing).collect()
    };
    let field = husimi(&psi.clone().normalized(), &anchored(q_min, q_max), &anchored(p_min, p_max))?;
    let in_branch = |branch: Branch| {
        field.mass_where(|x| {
            let (d, b) = curve.nearest(x);
            d <= radius && b == branch
        })
    };
    let upper = in_branch(Branch::Upper);
    let lower = in_branch(Branch::Lower);
    Ok(TubeMass { radius, total: upper + lower, upper, lower })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalPeak {
    pub time: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalSummary {
    pub window: (f64, f64),
    pub baseline: f64,
    pub peak: Option<RevivalPeak>,
}

/// A local maximum must rise this far above the median to count.
pub const REVIVAL_THRESHOLD: f64 = 0.1;

/// Largest strict local maximum of `|⟨ψ⁰, ψᵗ⟩|` in `[t_a, t_b]` that exceeds
/// the window median by [`REVIVAL_THRESHOLD`]; the earliest wins ties.
/// The first and last recorded samples have no two neighbours and are never
/// peaks.
pub fn revival_detector(record: &EvolutionRecord, t_a: f64, t_b: f64) -> Result<RevivalSummary> {
    revival_in_series(&record.times, &record.autocorrelation_modulus(), t_a, t_b)
}

pub fn revival_in_series(times: &[f64], values: &[f64], t_a: f64, t_b: f64) -> Result<RevivalSummary> {
    let (first, last) = match (times.first(), times.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => return Err(invalid("empty evolution record")),
    };
    if !(t_a <= t_b && t_a >= first && t_b <= last) {
        return Err(Error::WindowOutOfRange { start: t_a, end: t_b, first, last });
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= t_a && times[i] <= t_b).collect();
    if idx.is_empty() {
        return Err(Error::WindowOutOfRange { start: t_a, end: t_b, first, last });
    }
    let mut window: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    window.sort_by(|a, b| a.total_cmp(b));
    let m = window.len();
    let baseline = if m % 2 == 1 { window[m / 2] } else { 0.5 * (window[m / 2 - 1] + window[m / 2]) };

    let mut peak: Option<RevivalPeak> = None;
    for &i in &idx {
        if i == 0 || i + 1 == times.len() {
            continue;
        }
        let v = values[i];
        if v > values[i - 1] && v > values[i + 1] && v > baseline + REVIVAL_THRESHOLD {
            if peak.map_or(true, |p| v > p.height) {
                peak = Some(RevivalPeak { time: times[i], height: v });
            }
        }
    }
    Ok(RevivalSummary { window: (t_a, t_b), baseline, peak })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::separatrix;
    use crate::propagators::{dilation_record, DilatedPacket};

    #[test]
    fn preset_grids() {
        let s = QuantumSetup::preset(&SystemSpec::double_well(), 1e-3).unwrap();
        assert_eq!(s.grid, GridSpec::new(-2.0, 2.0, 4096).unwrap());
        assert_eq!(s.dt, 1e-3);
        let s = QuantumSetup::preset(&SystemSpec::double_well(), 1e-4).unwrap();
        assert_eq!(s.grid.n, 16384);
        let s = QuantumSetup::preset(&SystemSpec::double_well(), 1e-2).unwrap();
        assert_eq!(s.grid.n, 2048);
        let s = QuantumSetup::preset(&SystemSpec::Free, 0.5).unwrap();
        assert!(s.grid.n >= 64);
    }

    #[test]
    fn egorov_at_time_zero() {
        let setup = QuantumSetup::preset(&SystemSpec::double_well(), 1e-3).unwrap();
        let e = egorov_error(&PotentialSpec::DoubleWell, &Polynomial::identity(), PhaseSpacePoint::new(0.5, 0.0), 0.0, &setup)
            .unwrap();
        assert!(e < 1e-9, "{e}");
    }

    #[test]
    fn egorov_quadratic_symbol_offset() {
        // ⟨Q²⟩ − q² = ℏ/2 for a standard coherent state.
        let setup = QuantumSetup::preset(&SystemSpec::double_well(), 1e-3).unwrap();
        let f = Polynomial::new(vec![0.0, 0.0, 1.0]);
        let e = egorov_error(&PotentialSpec::DoubleWell, &f, PhaseSpacePoint::new(0.5, 0.0), 0.0, &setup).unwrap();
        assert!((e - 0.5e-3).abs() < 1e-9);
    }

    #[test]
    fn egorov_harmonic_is_exact() {
        let hbar = 1e-2;
        let setup = QuantumSetup::preset(&SystemSpec::harmonic(1.0).unwrap(), hbar).unwrap();
        let series = egorov_series(
            &PotentialSpec::Quadratic(1.0),
            &Polynomial::identity(),
            PhaseSpacePoint::new(1.0, 0.5),
            3.0,
            &setup,
            500,
        )
        .unwrap();
        assert_eq!(series.len(), 7);
        assert!(series.iter().all(|&(_, e)| e < 1e-8), "{series:?}");
    }

    #[test]
    fn initial_spread_and_tube() {
        let hbar: f64 = 1e-3;
        let setup = QuantumSetup::preset(&SystemSpec::double_well(), hbar).unwrap();
        let psi = setup.coherent_state(PhaseSpacePoint::new(0.5, level_set_p(0.5))).unwrap();
        let curve = separatrix(&SystemSpec::double_well(), 0.0, 401).unwrap();
        let m = localization_metrics(&psi, Some(&curve), 5.0 * hbar.sqrt()).unwrap();
        assert!((m.delta_q - (hbar / 2.0).sqrt()).abs() < 1e-4);
        let tube = m.tube.unwrap();
        assert!(tube.total >= 0.95, "{tube:?}");
        assert!(tube.upper > 0.9);
        let narrow = tube_mass(&psi, &curve, 2.0 * hbar.sqrt()).unwrap();
        assert!(narrow.total <= tube.total);
        // Inverse participation of a Gaussian of variance ℏ/2 is √(2πℏ).
        assert!((m.inverse_participation - (2.0 * std::f64::consts::PI * hbar).sqrt()).abs() < 1e-6);
    }

    fn level_set_p(q: f64) -> f64 {
        crate::classical::level_set_momentum(&PotentialSpec::DoubleWell, 0.0, q).unwrap()
    }

    #[test]
    fn wide_profile_spread() {
        let grid = GridSpec::new(-12.0, 12.0, 4096).unwrap();
        let hbar: f64 = 1e-3;
        let packet = DilatedPacket::new(0.0, 0.0, EnvelopeSpec::StandardGaussian, hbar).unwrap();
        let psi = packet.evolve(0.5 * (1.0 / hbar).ln()).sample(grid).unwrap();
        let m = localization_metrics(&psi, None, 1.0).unwrap();
        assert!((m.delta_q - 0.5f64.sqrt()).abs() < 1e-6);
        assert!(m.tube.is_none());
    }

    #[test]
    fn monotone_series_has_no_revival() {
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let down: Vec<f64> = times.iter().map(|t| (1.0 / t.cosh()).sqrt()).collect();
        assert!(revival_in_series(&times, &down, 0.0, 9.95).unwrap().peak.is_none());
        let up: Vec<f64> = times.iter().map(|t| t / 10.0).collect();
        assert!(revival_in_series(&times, &up, 0.0, 9.95).unwrap().peak.is_none());
    }

    #[test]
    fn revival_ties_pick_earliest() {
        let times: Vec<f64> = (0..9).map(|k| k as f64).collect();
        let v = [0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0];
        let s = revival_in_series(&times, &v, 0.0, 8.0).unwrap();
        assert_eq!(s.peak.unwrap().time, 2.0);
        assert_eq!(s.baseline, 0.0);
        assert!(matches!(revival_in_series(&times, &v, -1.0, 8.0), Err(Error::WindowOutOfRange { .. })));
    }

    #[test]
    fn dilation_autocorrelation_decays() {
        let grid = GridSpec::new(-12.0, 12.0, 4096).unwrap();
        let packet = DilatedPacket::new(0.0, 0.0, EnvelopeSpec::StandardGaussian, 1e-2).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.03).collect();
        let record = dilation_record(&packet, &times, 50, grid).unwrap();
        for (t, a) in record.times.iter().zip(record.autocorrelation_modulus()) {
            assert!((a - (1.0 / t.cosh()).sqrt()).abs() < 1e-10);
        }
        assert!(revival_detector(&record, 0.0, 3.0).unwrap().peak.is_none());
    }
}
