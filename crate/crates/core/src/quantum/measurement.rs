use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridSpec, Wavefunction};
use crate::error::{invalid, Result};

/// Observable `Σ_j λ_j Π_j` with `Π_j` the indicator of the position bin
/// `[b_j, b_{j+1})` (the last bin also holds its right end).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralObservable {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralObservable {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || values.len() != breakpoints.len() - 1 {
            return Err(invalid("need m + 1 breakpoints for m bin values"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("bin values must be finite"));
        }
        Ok(Self { breakpoints, values })
    }

    /// A single bin spanning the whole grid.
    pub fn whole_grid(grid: &GridSpec, value: f64) -> Self {
        Self { breakpoints: vec![grid.x_min, grid.x_max], values: vec![value] }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bins(&self) -> usize {
        self.values.len()
    }

    /// Bin index of every grid node.
    pub fn assign(&self, grid: &GridSpec) -> Result<Vec<usize>> {
        let last_node = grid.x(grid.n - 1);
        let m = self.bins();
        if self.breakpoints[0] > grid.x_min || self.breakpoints[m] < last_node {
            return Err(invalid(format!(
                "partition [{}, {}] does not cover the grid [{}, {}]",
                self.breakpoints[0], self.breakpoints[m], grid.x_min, last_node
            )));
        }
        Ok((0..grid.n)
            .map(|j| {
                let x = grid.x(j);
                let k = self.breakpoints.partition_point(|&b| b <= x);
                k.saturating_sub(1).min(m - 1)
            })
            .collect())
    }

    /// The bin-valued multiplication operator sampled at the grid nodes.
    pub fn multiplier(&self, grid: &GridSpec) -> Result<Vec<Complex64>> {
        Ok(self
            .assign(grid)?
            .into_iter()
            .map(|b| Complex64::new(self.values[b], 0.0))
            .collect())
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    /// `p_j = ‖Π_j ψ‖²`.
    pub probabilities: Vec<f64>,
    /// `Π_j ψ / ‖Π_j ψ‖`, absent when `p_j < 10⁻¹⁴`.
    pub post_states: Vec<Option<Wavefunction>>,
    /// `Σ λ_j p_j`.
    pub expectation: f64,
}

pub const NEGLIGIBLE_PROBABILITY: f64 = 1e-14;

pub fn projective_measurement(
    psi: &Wavefunction,
    obs: &SpectralObservable,
) -> Result<MeasurementOutcome> {
    let grid = *psi.grid();
    let bins = obs.assign(&grid)?;
    let m = obs.bins();
    let dx = grid.dx();
    let mut probabilities = vec![0.0; m];
    for (a, &b) in psi.amplitudes().iter().zip(&bins) {
        probabilities[b] += a.norm_sqr();
    }
    probabilities.iter_mut().for_each(|p| *p *= dx);

    let post_states = probabilities
        .iter()
        .enumerate()
        .map(|(k, &pk)| {
            (pk >= NEGLIGIBLE_PROBABILITY).then(|| {
                let scale = 1.0 / pk.sqrt();
                let amps = psi
                    .amplitudes()
                    .iter()
                    .zip(&bins)
                    .map(|(a, &b)| if b == k { a * scale } else { Complex64::new(0.0, 0.0) })
                    .collect();
                Wavefunction::from_parts(grid, psi.hbar(), amps)
            })
        })
        .collect();
    let expectation = probabilities.iter().zip(obs.values()).map(|(p, v)| p * v).sum();
    Ok(MeasurementOutcome { probabilities, post_states, expectation })
}

/// Draws `count` positions from `|ψ(x_j)|² dx`, each node's weight spread
/// uniformly over its cell `[x_j − dx/2, x_j + dx/2)`. ChaCha8 seeded with
/// `seed`, so equal inputs give equal outputs on every platform.
pub fn sample_positions(psi: &Wavefunction, seed: u64, count: usize) -> Vec<f64> {
    let grid = psi.grid();
    let dx = grid.dx();
    let weights = psi.position_density();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cdf.push(acc);
    }
    let total = acc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * total;
            let j = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let below = if j == 0 { 0.0 } else { cdf[j - 1] };
            let frac = if weights[j] > 0.0 { ((u - below) / weights[j]).clamp(0.0, 1.0) } else { 0.5 };
            grid.x(j) + (frac - 0.5) * dx
        })
        .collect()
}

/// Cumulative distribution of the cell-spread density used by
/// [`sample_positions`].
pub fn position_cdf(psi: &Wavefunction) -> impl Fn(f64) -> f64 {
    let grid = *psi.grid();
    let weights = psi.position_density();
    let mut cdf = vec![0.0];
    for w in &weights {
        cdf.push(cdf.last().unwrap() + w);
    }
    move |x: f64| {
        let dx = grid.dx();
        let s = (x - grid.x_min) / dx + 0.5;
        if s <= 0.0 {
            return 0.0;
        }
        let j = s.floor() as usize;
        if j >= weights.len() {
            return cdf[weights.len()];
        }
        cdf[j] + (s - j as f64) * weights[j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{make_coherent_state, EnvelopeSpec};

    fn state() -> Wavefunction {
        let grid = GridSpec::symmetric(2.0, 512).unwrap();
        make_coherent_state(grid, 1e-2, 0.0, 0.0, &EnvelopeSpec::StandardGaussian).unwrap()
    }

    #[test]
    fn single_bin_is_identity() {
        let psi = state();
        let out = projective_measurement(&psi, &SpectralObservable::whole_grid(psi.grid(), 2.0)).unwrap();
        assert!((out.probabilities[0] - 1.0).abs() < 1e-14);
        assert_eq!(out.post_states[0].as_ref().unwrap().amplitudes().len(), psi.grid().n);
        for (a, b) in out.post_states[0].as_ref().unwrap().amplitudes().iter().zip(psi.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!((out.expectation - 2.0).abs() < 1e-13);
    }

    #[test]
    fn half_lines_split_even_state() {
        let psi = state();
        let obs = SpectralObservable::new(vec![-2.0, 0.0, 2.0], vec![-1.0, 1.0]).unwrap();
        let out = projective_measurement(&psi, &obs).unwrap();
        assert!((out.probabilities[0] - 0.5).abs() < 1e-10);
        assert!((out.probabilities[1] - 0.5).abs() < 1e-10);
        assert!(out.expectation.abs() < 1e-10);
    }

    #[test]
    fn empty_bins_have_no_post_state() {
        let psi = state();
        let obs = SpectralObservable::new(vec![-3.0, 1.8, 3.0], vec![0.0, 1.0]).unwrap();
        let out = projective_measurement(&psi, &obs).unwrap();
        assert!(out.post_states[1].is_none());
        assert!((out.post_states[0].as_ref().unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partition_validation() {
        assert!(SpectralObservable::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(SpectralObservable::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        let psi = state();
        let narrow = SpectralObservable::new(vec![-1.0, 1.0], vec![1.0]).unwrap();
        assert!(projective_measurement(&psi, &narrow).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let psi = state();
        assert_eq!(sample_positions(&psi, 7, 100), sample_positions(&psi, 7, 100));
        assert_ne!(sample_positions(&psi, 7, 100), sample_positions(&psi, 8, 100));
    }

    #[test]
    fn cdf_limits() {
        let psi = state();
        let cdf = position_cdf(&psi);
        assert_eq!(cdf(-10.0), 0.0);
        assert!((cdf(10.0) - 1.0).abs() < 1e-12);
        assert!((cdf(0.0) - 0.5).abs() < 1e-12);
    }
}
