//! Wavefunctions on a uniform periodic grid and the quantities measured on
//! them.

mod envelope;
mod husimi;
mod measurement;
mod observables;

pub use envelope::{make_coherent_state, EnvelopeSpec};
pub use husimi::{husimi, uniform_lattice, HusimiField};
pub use measurement::{
    position_cdf, projective_measurement, sample_positions, MeasurementOutcome,
    SpectralObservable,
};
pub use observables::{energy, expectation_diffop, moments, Coefficient, DiffOperator, Moments};

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Uniform grid `x_j = x_min + j·dx`, `j = 0..n`, with `dx = (x_max − x_min)/n`.
/// The right end is identified with the left one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(invalid(format!("grid needs x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if n < 64 || !n.is_power_of_two() {
            return Err(invalid(format!("grid size must be a power of two >= 64, got {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Grid on `[−half_width, half_width)` shifted by half a cell, so that the
    /// nodes are mirror symmetric about 0 and none sits at the origin.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        let dx = 2.0 * half_width / n as f64;
        Self::new(-half_width + 0.5 * dx, half_width + 0.5 * dx, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * PI / (self.x_max - self.x_min);
        let n = self.n as isize;
        (0..n)
            .map(|j| if j < n / 2 { j } else { j - n } as f64 * dk)
            .collect()
    }

    /// Largest momentum `πℏ/dx` the grid represents.
    pub fn nyquist_momentum(&self, hbar: f64) -> f64 {
        PI * hbar / self.dx()
    }

    /// Number of nodes on each side counted as the boundary layer:
    /// together they make up the outermost 5% of the grid.
    pub fn boundary_layer(&self) -> usize {
        self.n.div_ceil(40)
    }

    /// Index range `[lo, hi)` of nodes with `|x − center| <= radius`.
    pub(crate) fn window(&self, center: f64, radius: f64) -> (usize, usize) {
        let dx = self.dx();
        let lo = ((center - radius - self.x_min) / dx).ceil().max(0.0) as usize;
        let hi = (((center + radius - self.x_min) / dx).floor() + 1.0).clamp(0.0, self.n as f64)
            as usize;
        (lo.min(hi), hi)
    }
}

/// Containment threshold at construction.
pub const CONTAINMENT_TOLERANCE: f64 = 1e-8;
/// Boundary mass beyond which a state is no longer trusted.
pub const DRIFT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    grid: GridSpec,
    hbar: f64,
    amplitudes: Vec<Complex64>,
}

impl Wavefunction {
    pub fn new(grid: GridSpec, hbar: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(invalid(format!("hbar must be positive, got {hbar}")));
        }
        if amplitudes.len() != grid.n {
            return Err(invalid(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                grid.n
            )));
        }
        if amplitudes.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(Error::NonFiniteState { time: f64::NAN });
        }
        Ok(Self { grid, hbar, amplitudes })
    }

    /// Samples `f` at every grid node.
    pub fn from_fn(grid: GridSpec, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, hbar, grid.points().into_iter().map(f).collect())
    }

    pub(crate) fn from_parts(grid: GridSpec, hbar: f64, amplitudes: Vec<Complex64>) -> Self {
        debug_assert_eq!(amplitudes.len(), grid.n);
        Self { grid, hbar, amplitudes }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Self {
        let s = 1.0 / self.norm();
        self.amplitudes.iter_mut().for_each(|a| *a *= s);
        self
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        self.amplitudes.iter_mut().for_each(|a| *a *= factor);
        self
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.hbar != other.hbar {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `⟨self, other⟩ = Σ conj(ψ_j) φ_j dx`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx())
    }

    /// Probability `Σ|ψ|²dx` carried by the outermost 5% of the nodes.
    pub fn boundary_mass(&self) -> f64 {
        let m = self.grid.boundary_layer();
        let n = self.grid.n;
        let edge: f64 = self.amplitudes[..m]
            .iter()
            .chain(&self.amplitudes[n - m..])
            .map(|a| a.norm_sqr())
            .sum();
        edge * self.grid.dx()
    }

    /// Fails with `MassEscape` when the boundary layer holds more than
    /// `threshold` of the total probability.
    pub fn ensure_contained(&self, threshold: f64) -> Result<()> {
        let boundary_mass = self.boundary_mass() / self.norm_sqr();
        if !(boundary_mass < threshold) {
            return Err(Error::MassEscape { boundary_mass, threshold });
        }
        Ok(())
    }

    /// Position probability weights `|ψ_j|²dx / ‖ψ‖²`.
    pub fn position_density(&self) -> Vec<f64> {
        let total = self.norm_sqr();
        let dx = self.grid.dx();
        self.amplitudes.iter().map(|a| a.norm_sqr() * dx / total).collect()
    }

    /// Momentum amplitudes `ψ̂(ℏk)` in FFT order, normalized so that
    /// `Σ|ψ̂|² dp = ‖ψ‖²`.
    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        Spectral::new(self.grid.n).forward(&mut buf);
        let scale = self.grid.dx() / (2.0 * PI * self.hbar).sqrt();
        buf.iter_mut().for_each(|a| *a *= scale);
        buf
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI * self.hbar / (self.grid.x_max - self.grid.x_min)
    }

    pub fn momentum_norm(&self) -> f64 {
        let dp = self.momentum_spacing();
        (self.momentum_amplitudes().iter().map(|a| a.norm_sqr()).sum::<f64>() * dp).sqrt()
    }

    /// Spectral derivative power `(−iℏ d/dx)^order ψ`.
    pub fn momentum_power(&self, order: u32) -> Vec<Complex64> {
        let spectral = Spectral::new(self.grid.n);
        let mut buf = self.amplitudes.clone();
        spectral.forward(&mut buf);
        let inv_n = 1.0 / self.grid.n as f64;
        for (a, k) in buf.iter_mut().zip(self.grid.wavenumbers()) {
            *a *= (self.hbar * k).powi(order as i32) * inv_n;
        }
        spectral.inverse(&mut buf);
        buf
    }
}

/// Forward/inverse FFT pair of a fixed length; the inverse is unnormalized.
pub(crate) struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub(crate) fn forward(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    pub(crate) fn inverse(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(-1.0, 1.0, 64).is_ok());
        assert!(GridSpec::new(-1.0, 1.0, 32).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 100).is_err());
        assert!(GridSpec::new(1.0, 1.0, 64).is_err());
        assert!(GridSpec::new(f64::NAN, 1.0, 64).is_err());
    }

    #[test]
    fn symmetric_grid_nodes_mirror() {
        let g = GridSpec::symmetric(3.0, 128).unwrap();
        for j in 0..g.n {
            assert!((g.x(j) + g.x(g.n - 1 - j)).abs() < 1e-14);
        }
    }

    #[test]
    fn wavenumbers_fft_order() {
        let g = GridSpec::new(0.0, 2.0 * PI, 64).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k[1], 1.0);
        assert_eq!(k[63], -1.0);
        assert_eq!(k[32], -32.0);
    }

    #[test]
    fn window_bounds() {
        let g = GridSpec::new(0.0, 64.0, 64).unwrap();
        assert_eq!(g.window(10.0, 2.0), (8, 13));
        assert_eq!(g.window(-100.0, 2.0), (0, 0));
        assert_eq!(g.window(63.0, 5.0), (58, 64));
    }

    #[test]
    fn rejects_bad_amplitudes() {
        let g = GridSpec::new(-1.0, 1.0, 64).unwrap();
        assert!(Wavefunction::new(g, 1.0, vec![Complex64::new(0.0, 0.0); 63]).is_err());
        assert!(Wavefunction::new(g, 0.0, vec![Complex64::new(0.0, 0.0); 64]).is_err());
        let mut a = vec![Complex64::new(0.0, 0.0); 64];
        a[3].re = f64::INFINITY;
        assert!(Wavefunction::new(g, 1.0, a).is_err());
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let g1 = GridSpec::new(-1.0, 1.0, 64).unwrap();
        let g2 = GridSpec::new(-1.0, 1.0, 128).unwrap();
        let a = Wavefunction::from_fn(g1, 1.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let b = Wavefunction::from_fn(g2, 1.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(a.inner_product(&b), Err(Error::GridMismatch)));
        let c = Wavefunction::from_fn(g1, 0.5, |_| Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(a.inner_product(&c), Err(Error::GridMismatch)));
    }

    #[test]
    fn even_odd_orthogonal() {
        let g = GridSpec::symmetric(8.0, 256).unwrap();
        let even = Wavefunction::from_fn(g, 1.0, |x| Complex64::new((-x * x).exp(), 0.0)).unwrap();
        let odd = Wavefunction::from_fn(g, 1.0, |x| Complex64::new(x * (-x * x).exp(), 0.0)).unwrap();
        assert!(even.inner_product(&odd).unwrap().norm() < 1e-12);
        let ip = even.inner_product(&even).unwrap();
        assert!((ip.re - even.norm_sqr()).abs() < 1e-12 && ip.im == 0.0);
    }
}
