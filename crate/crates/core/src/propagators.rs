//! Schrödinger time evolution: a Strang split-operator scheme for
//! `−(ℏ²/2)∂² + V(x)` and closed-form propagators for the dilation, harmonic
//! and free systems.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::PotentialSpec;
use crate::error::{invalid, Error, Result};
use crate::quantum::{energy, EnvelopeSpec, GridSpec, Spectral, Wavefunction, DRIFT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorSpec {
    SplitOperator { dt: f64 },
    ExactDilation,
    ExactHarmonic { omega: f64 },
    ExactFree,
}

impl PropagatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::SplitOperator { dt } if !(dt > 0.0 && dt.is_finite()) => {
                Err(invalid(format!("split-operator step must be positive, got {dt}")))
            }
            Self::ExactHarmonic { omega } if !(omega > 0.0 && omega.is_finite()) => {
                Err(invalid(format!("harmonic frequency must be positive, got {omega}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub state: Wavefunction,
}

/// Dense per-step series plus strided state snapshots.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// `⟨ψ⁰, ψᵗ⟩`.
    pub autocorrelation: Vec<Complex64>,
    pub snapshots: Vec<Snapshot>,
}

impl EvolutionRecord {
    pub fn final_state(&self) -> &Wavefunction {
        &self.snapshots.last().expect("record holds the initial snapshot").state
    }

    pub fn autocorrelation_modulus(&self) -> Vec<f64> {
        self.autocorrelation.iter().map(|c| c.norm()).collect()
    }
}

/// Phase per step of the split factors, measured by half the range each
/// factor spans over the classically accessible window `V(q) ≤ energy_ceiling`
/// (a constant offset in either factor only changes the global phase).
/// Values above 0.5 mean the step resolves the packet's phases poorly.
pub fn stability_number(
    potential: &PotentialSpec,
    grid: &GridSpec,
    hbar: f64,
    dt: f64,
    energy_ceiling: f64,
) -> f64 {
    let accessible: Vec<f64> = grid
        .points()
        .into_iter()
        .map(|x| potential.value(x))
        .filter(|&v| v <= energy_ceiling)
        .collect();
    if accessible.is_empty() {
        return 0.0;
    }
    let v_min = accessible.iter().copied().fold(f64::INFINITY, f64::min);
    let v_max = accessible.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kinetic_max = (energy_ceiling - v_min).max(0.0);
    dt * (0.5 * (v_max - v_min) + 0.5 * kinetic_max) / hbar
}

/// Strang splitting `e^{−iVdt/2ℏ} e^{−iTdt/ℏ} e^{−iVdt/2ℏ}` with the kinetic
/// factor applied in the discrete Fourier basis.
pub struct SplitOperator {
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    spectral: Spectral,
}

impl SplitOperator {
    pub fn new(grid: &GridSpec, hbar: f64, potential: &PotentialSpec, dt: f64) -> Self {
        let half_potential = grid
            .points()
            .into_iter()
            .map(|x| Complex64::from_polar(1.0, -0.5 * dt * potential.value(x) / hbar))
            .collect();
        let inv_n = 1.0 / grid.n as f64;
        let kinetic = grid
            .wavenumbers()
            .into_iter()
            .map(|k| Complex64::from_polar(inv_n, -0.5 * dt * hbar * k * k))
            .collect();
        Self { half_potential, kinetic, spectral: Spectral::new(grid.n) }
    }

    pub fn step(&self, psi: &mut [Complex64]) {
        for (a, v) in psi.iter_mut().zip(&self.half_potential) {
            *a *= v;
        }
        self.spectral.forward(psi);
        for (a, k) in psi.iter_mut().zip(&self.kinetic) {
            *a *= k;
        }
        self.spectral.inverse(psi);
        for (a, v) in psi.iter_mut().zip(&self.half_potential) {
            *a *= v;
        }
    }
}

/// Evolves `psi0` for `n_steps` split-operator steps. Norm and
/// autocorrelation are recorded every step; states every `snapshot_stride`
/// steps and at the final step.
pub fn evolve_split_operator(
    psi0: &Wavefunction,
    potential: &PotentialSpec,
    dt: f64,
    n_steps: usize,
    snapshot_stride: usize,
) -> Result<EvolutionRecord> {
    PropagatorSpec::SplitOperator { dt }.validate()?;
    if snapshot_stride == 0 {
        return Err(invalid("snapshot stride must be at least 1"));
    }
    let grid = *psi0.grid();
    let hbar = psi0.hbar();
    let dx = grid.dx();

    let e0 = energy(psi0, potential);
    let stability = stability_number(potential, &grid, hbar, dt, e0 + hbar.sqrt());
    if stability > 0.5 {
        log::warn!("split-operator phase per step {stability:.3} exceeds 0.5; accuracy will degrade");
    }

    let propagator = SplitOperator::new(&grid, hbar, potential, dt);
    let initial = psi0.amplitudes().to_vec();
    let mut psi = initial.clone();
    let norm0 = psi0.norm();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut norms = Vec::with_capacity(n_steps + 1);
    let mut autocorrelation = Vec::with_capacity(n_steps + 1);
    let mut snapshots = Vec::new();

    let mut record_step = |step: usize, psi: &[Complex64]| -> Result<()> {
        let t = step as f64 * dt;
        let mut norm_sqr = 0.0;
        let mut overlap = Complex64::new(0.0, 0.0);
        for (a, b) in initial.iter().zip(psi) {
            norm_sqr += b.norm_sqr();
            overlap += a.conj() * b;
        }
        if !norm_sqr.is_finite() {
            return Err(Error::NonFiniteState { time: t });
        }
        times.push(t);
        norms.push((norm_sqr * dx).sqrt() / norm0);
        autocorrelation.push(overlap * dx / (norm0 * norm0));
        if step % snapshot_stride == 0 || step == n_steps {
            let state = Wavefunction::new(grid, hbar, psi.to_vec())
                .map_err(|_| Error::NonFiniteState { time: t })?;
            state.ensure_contained(DRIFT_TOLERANCE)?;
            snapshots.push(Snapshot { step, time: t, state });
        }
        Ok(())
    };

    record_step(0, &psi)?;
    for step in 1..=n_steps {
        propagator.step(&mut psi);
        record_step(step, &psi)?;
    }
    Ok(EvolutionRecord { times, norms, autocorrelation, snapshots })
}

/// A wave packet `ℏ^{-1/4} a((x − q₀)/√ℏ) e^{ip₀x/ℏ}` transported by the
/// quantized dilation `H = −(iℏ/2)(x∂ + ∂x)` for a time `t`:
/// `ψᵗ(x) = e^{−t/2} ψ⁰(e^{−t}x)`.
///
/// The state stays in closed form and is sampled only on request, so times
/// of order `log(1/ℏ)` remain representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilatedPacket {
    pub q0: f64,
    pub p0: f64,
    pub envelope: EnvelopeSpec,
    pub hbar: f64,
    pub time: f64,
}

impl DilatedPacket {
    pub fn new(q0: f64, p0: f64, envelope: EnvelopeSpec, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid(format!("hbar must be positive, got {hbar}")));
        }
        envelope.validate()?;
        Ok(Self { q0, p0, envelope, hbar, time: 0.0 })
    }

    pub fn evolve(&self, dt: f64) -> Self {
        Self { time: self.time + dt, ..self.clone() }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let y = (-self.time).exp() * x;
        let a = self.envelope.eval((y - self.q0) / self.hbar.sqrt());
        a * Complex64::from_polar(
            (-0.5 * self.time).exp() * self.hbar.powf(-0.25),
            self.p0 * y / self.hbar,
        )
    }

    /// Samples the packet without renormalizing; `MassEscape` when the
    /// boundary layer holds more than `10⁻⁸`.
    pub fn sample(&self, grid: GridSpec) -> Result<Wavefunction> {
        let psi = Wavefunction::from_fn(grid, self.hbar, |x| self.eval(x))?;
        psi.ensure_contained(crate::quantum::CONTAINMENT_TOLERANCE)?;
        Ok(psi)
    }
}

/// Dilation evolution of an analytically given packet, sampled on `grid`.
pub fn evolve_dilation(
    q0: f64,
    p0: f64,
    envelope: &EnvelopeSpec,
    hbar: f64,
    t: f64,
    grid: GridSpec,
) -> Result<Wavefunction> {
    DilatedPacket::new(q0, p0, envelope.clone(), hbar)?.evolve(t).sample(grid)
}

/// Autocorrelation record of a dilated packet on `times`, with snapshots at
/// every `snapshot_stride`-th time and the last one.
pub fn dilation_record(
    packet: &DilatedPacket,
    times: &[f64],
    snapshot_stride: usize,
    grid: GridSpec,
) -> Result<EvolutionRecord> {
    if times.is_empty() || snapshot_stride == 0 {
        return Err(invalid("need at least one time and a positive stride"));
    }
    let initial = packet.evolve(times[0]).sample(grid)?;
    let mut record = EvolutionRecord {
        times: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        autocorrelation: Vec::with_capacity(times.len()),
        snapshots: Vec::new(),
    };
    for (k, &t) in times.iter().enumerate() {
        let state = packet.evolve(t - times[0]).evolve(times[0]).sample(grid)?;
        record.times.push(t);
        record.norms.push(state.norm());
        record.autocorrelation.push(initial.inner_product(&state)?);
        if k % snapshot_stride == 0 || k == times.len() - 1 {
            record.snapshots.push(Snapshot { step: k, time: t, state });
        }
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactReference {
    Harmonic { omega: f64 },
    Free,
}

/// Closed-form evolution of the standard coherent state at `(q0, p0)` under
/// `p²/2 + ω²x²/2` (or the free particle), phase included.
///
/// The evolved state is `(πℏ)^{-1/4} Z^{-1/2} exp(i/ℏ[A(x−q)²/2 + p(x−q) + S + p₀q₀])`
/// with `A = Ż/Z`, `Z̈ = −ω²Z`, `Z(0) = 1`, `Ż(0) = i`, and `S` the classical
/// action along the centre trajectory.
pub fn evolve_exact_reference(
    kind: ExactReference,
    q0: f64,
    p0: f64,
    hbar: f64,
    t: f64,
    grid: GridSpec,
) -> Result<Wavefunction> {
    let i = Complex64::i();
    let (q, p, z, z_dot, action) = match kind {
        ExactReference::Harmonic { omega } => {
            PropagatorSpec::ExactHarmonic { omega }.validate()?;
            let (s, c) = (omega * t).sin_cos();
            let q = q0 * c + p0 / omega * s;
            let p = p0 * c - q0 * omega * s;
            let z = Complex64::new(c, s / omega);
            let z_dot = Complex64::new(-omega * s, c);
            let two = 2.0 * omega * t;
            let action = (p0 * p0 - omega * omega * q0 * q0) * two.sin() / (4.0 * omega)
                + 0.5 * q0 * p0 * (two.cos() - 1.0);
            (q, p, z, z_dot, action)
        }
        ExactReference::Free => {
            let z = Complex64::new(1.0, t);
            (q0 + p0 * t, p0, z, i, 0.5 * p0 * p0 * t)
        }
    };
    let a = z_dot / z;
    // Continuous branch of arg Z: it stays in the quadrant of ωt.
    let winding = match kind {
        ExactReference::Harmonic { omega } => omega * t,
        ExactReference::Free => t.atan(),
    };
    let raw = z.arg();
    let arg = raw + 2.0 * std::f64::consts::PI * ((winding - raw) / (2.0 * std::f64::consts::PI)).round();
    let prefactor = Complex64::from_polar((std::f64::consts::PI * hbar).powf(-0.25) / z.norm().sqrt(), -0.5 * arg);
    let psi = Wavefunction::from_fn(grid, hbar, |x| {
        let d = x - q;
        let phase = (a * d * d * 0.5 + p * d + action + p0 * q0) * i / hbar;
        prefactor * phase.exp()
    })?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{make_coherent_state, moments};
    use std::f64::consts::PI;

    fn l2_distance(a: &Wavefunction, b: &Wavefunction) -> f64 {
        let dx = a.grid().dx();
        (a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * dx)
            .sqrt()
    }

    #[test]
    fn exact_reference_matches_initial_state() {
        let grid = GridSpec::new(-4.0, 4.0, 1024).unwrap();
        let psi0 = make_coherent_state(grid, 1e-2, 0.7, -0.4, &EnvelopeSpec::StandardGaussian).unwrap();
        for kind in [ExactReference::Free, ExactReference::Harmonic { omega: 1.3 }] {
            let ex = evolve_exact_reference(kind, 0.7, -0.4, 1e-2, 0.0, grid).unwrap();
            assert!(l2_distance(&psi0, &ex) < 1e-12);
        }
    }

    #[test]
    fn harmonic_reference_center() {
        let grid = GridSpec::new(-4.0, 4.0, 1024).unwrap();
        let psi = evolve_exact_reference(ExactReference::Harmonic { omega: 1.0 }, 1.0, 0.0, 1e-2, PI / 2.0, grid)
            .unwrap();
        let m = moments(&psi).unwrap();
        assert!(m.mean_q.abs() < 1e-10 && (m.mean_p + 1.0).abs() < 1e-10);
        assert!((psi.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn free_reference_spreads() {
        let grid = GridSpec::new(-8.0, 8.0, 2048).unwrap();
        let hbar = 1e-2;
        let psi = evolve_exact_reference(ExactReference::Free, 0.0, 1.0, hbar, 2.0, grid).unwrap();
        let m = moments(&psi).unwrap();
        assert!((m.mean_q - 2.0).abs() < 1e-10);
        assert!((m.mean_p - 1.0).abs() < 1e-10);
        assert!((m.delta_q.powi(2) - 0.5 * hbar * 5.0).abs() < 1e-9);
    }

    #[test]
    fn harmonic_reference_branch_is_continuous() {
        // Overlap with a fine time step must vary smoothly through the
        // quarter periods where arg Z crosses ±π/2.
        let grid = GridSpec::new(-4.0, 4.0, 512).unwrap();
        let kind = ExactReference::Harmonic { omega: 2.0 };
        let mut prev = evolve_exact_reference(kind, 0.5, 0.0, 0.05, 0.0, grid).unwrap();
        for k in 1..=400 {
            let cur = evolve_exact_reference(kind, 0.5, 0.0, 0.05, k as f64 * 0.01, grid).unwrap();
            assert!(l2_distance(&prev, &cur) < 0.2, "jump at step {k}");
            prev = cur;
        }
    }

    #[test]
    fn dilation_closed_forms() {
        let grid = GridSpec::new(-12.0, 12.0, 4096).unwrap();
        for hbar in [1e-2, 1e-3] {
            let t0 = evolve_dilation(0.0, 0.0, &EnvelopeSpec::StandardGaussian, hbar, 0.0, grid).unwrap();
            let psi0 = make_coherent_state(grid, hbar, 0.0, 0.0, &EnvelopeSpec::StandardGaussian).unwrap();
            assert!(l2_distance(&t0, &psi0) < 1e-12);
            let half = 0.5 * (1.0 / hbar).ln();
            let psi = evolve_dilation(0.0, 0.0, &EnvelopeSpec::StandardGaussian, hbar, half, grid).unwrap();
            for (x, a) in grid.points().into_iter().zip(psi.amplitudes()) {
                let expect = PI.powf(-0.25) * (-0.5 * x * x).exp();
                assert!((a - expect).norm() < 1e-12);
            }
        }
        let hbar: f64 = 0.05;
        let wide = GridSpec::new(-80.0, 80.0, 4096).unwrap();
        let full = (1.0 / hbar).ln();
        let psi = evolve_dilation(0.0, 0.0, &EnvelopeSpec::StandardGaussian, hbar, full, wide).unwrap();
        for (x, a) in wide.points().into_iter().zip(psi.amplitudes()) {
            let expect = (hbar / PI).powf(0.25) * (-0.5 * hbar * x * x).exp();
            assert!((a - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn dilation_escape() {
        let grid = GridSpec::new(-2.0, 2.0, 1024).unwrap();
        let err = evolve_dilation(0.0, 0.0, &EnvelopeSpec::StandardGaussian, 1e-3, 5.0, grid).unwrap_err();
        assert!(matches!(err, Error::MassEscape { .. }));
    }

    #[test]
    fn dilation_group_property() {
        let packet = DilatedPacket::new(0.2, 0.5, EnvelopeSpec::StandardGaussian, 1e-2).unwrap();
        let grid = GridSpec::new(-12.0, 12.0, 2048).unwrap();
        let two_legs = packet.evolve(0.7).evolve(1.1).sample(grid).unwrap();
        let one_leg = packet.evolve(1.8).sample(grid).unwrap();
        assert!(l2_distance(&two_legs, &one_leg) < 1e-14);
    }

    #[test]
    fn split_operator_rejects_bad_input() {
        let grid = GridSpec::new(-2.0, 2.0, 256).unwrap();
        let psi = make_coherent_state(grid, 1e-2, 0.0, 0.0, &EnvelopeSpec::StandardGaussian).unwrap();
        assert!(evolve_split_operator(&psi, &PotentialSpec::DoubleWell, 0.0, 10, 1).is_err());
        assert!(evolve_split_operator(&psi, &PotentialSpec::DoubleWell, 1e-3, 10, 0).is_err());
    }

    #[test]
    fn split_operator_escape_is_reported() {
        let grid = GridSpec::new(-2.0, 2.0, 512).unwrap();
        let psi = make_coherent_state(grid, 1e-2, 0.0, 1.5, &EnvelopeSpec::StandardGaussian).unwrap();
        let err = evolve_split_operator(&psi, &PotentialSpec::Quadratic(0.0), 1e-2, 200, 10).unwrap_err();
        assert!(matches!(err, Error::MassEscape { .. }));
    }

    #[test]
    fn stability_heuristic() {
        let grid = GridSpec::new(-2.0, 2.0, 4096).unwrap();
        let v = PotentialSpec::DoubleWell;
        let hbar: f64 = 1e-3;
        assert!(stability_number(&v, &grid, hbar, 1e-3, hbar.sqrt()) <= 0.5);
        assert!(stability_number(&v, &grid, hbar, 1.0, hbar.sqrt()) > 0.5);
    }
}
