use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Wavefunction;
use crate::classical::PhaseSpacePoint;
use crate::error::{invalid, Error, Result};

/// Gaussian overlaps are truncated beyond this many `√ℏ` from the center,
/// where the window function is below `e^{-40}`.
const OVERLAP_CUTOFF: f64 = 9.0;

/// Husimi density `|⟨ψ_qp, ψ⟩|² / (2πℏ)` on a rectangular lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HusimiField {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Row-major: `values[iq * p.len() + ip]`.
    pub values: Vec<f64>,
    pub hbar: f64,
}

/// `lo + k·spacing` for `k` with `lo <= value <= hi`.
pub fn uniform_lattice(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let n = ((hi - lo) / spacing + 1e-9).floor() as usize + 1;
    (0..n).map(|k| lo + k as f64 * spacing).collect()
}

/// Voronoi cell widths: half the gap to each neighbour, and the full gap at
/// the two ends.
fn cell_widths(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| match i {
            0 => nodes[1] - nodes[0],
            _ if i == n - 1 => nodes[n - 1] - nodes[n - 2],
            _ => 0.5 * (nodes[i + 1] - nodes[i - 1]),
        })
        .collect()
}

impl HusimiField {
    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.p.len() + ip]
    }

    pub fn node(&self, iq: usize, ip: usize) -> PhaseSpacePoint {
        PhaseSpacePoint::new(self.q[iq], self.p[ip])
    }

    /// Lattice quadrature of the density over the nodes accepted by `keep`.
    pub fn mass_where(&self, keep: impl Fn(PhaseSpacePoint) -> bool + Sync) -> f64 {
        let wq = cell_widths(&self.q);
        let wp = cell_widths(&self.p);
        (0..self.q.len())
            .into_par_iter()
            .map(|iq| {
                let mut row = 0.0;
                for ip in 0..self.p.len() {
                    if keep(self.node(iq, ip)) {
                        row += self.value(iq, ip) * wp[ip];
                    }
                }
                row * wq[iq]
            })
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_where(|_| true)
    }

    /// Lattice node holding the largest value.
    pub fn argmax(&self) -> (PhaseSpacePoint, f64) {
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        let np = self.p.len();
        (self.node(k / np, k % np), v)
    }
}

/// Evaluates the Husimi density of `psi` on the lattice `q_lattice × p_lattice`
/// using standard Gaussian coherent states.
pub fn husimi(psi: &Wavefunction, q_lattice: &[f64], p_lattice: &[f64]) -> Result<HusimiField> {
    if q_lattice.is_empty() || p_lattice.is_empty() {
        return Err(invalid("Husimi lattice must be non-empty"));
    }
    if q_lattice.windows(2).any(|w| w[0] >= w[1]) || p_lattice.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("Husimi lattice must be strictly increasing"));
    }
    let grid = *psi.grid();
    let hbar = psi.hbar();
    let nyquist = grid.nyquist_momentum(hbar);
    if let Some(&p) = p_lattice.iter().find(|p| p.abs() > nyquist) {
        return Err(Error::MomentumOutOfBand { p, nyquist });
    }
    let dx = grid.dx();
    let sqrt_hbar = hbar.sqrt();
    let norm = (PI * hbar).powf(-0.25);
    let density_scale = dx * dx / (2.0 * PI * hbar);
    let amps = psi.amplitudes();

    let rows: Vec<Vec<f64>> = q_lattice
        .par_iter()
        .map(|&q| {
            let (lo, hi) = grid.window(q, OVERLAP_CUTOFF * sqrt_hbar);
            let weighted: Vec<Complex64> = (lo..hi)
                .map(|j| {
                    let s = (grid.x(j) - q) / sqrt_hbar;
                    amps[j] * (norm * (-0.5 * s * s).exp())
                })
                .collect();
            p_lattice
                .iter()
                .map(|&p| {
                    if weighted.is_empty() {
                        return 0.0;
                    }
                    // e^{−ipx_j/ℏ} by recurrence along the window.
                    let step = Complex64::from_polar(1.0, -p * dx / hbar);
                    let mut phase = Complex64::from_polar(1.0, -p * grid.x(lo) / hbar);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, w) in weighted.iter().enumerate() {
                        if k % 64 == 0 {
                            phase = Complex64::from_polar(1.0, -p * grid.x(lo + k) / hbar);
                        }
                        acc += w * phase;
                        phase *= step;
                    }
                    acc.norm_sqr() * density_scale
                })
                .collect()
        })
        .collect();

    Ok(HusimiField {
        q: q_lattice.to_vec(),
        p: p_lattice.to_vec(),
        values: rows.into_iter().flatten().collect(),
        hbar,
    })
}
