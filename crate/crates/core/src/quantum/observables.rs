use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Spectral, Wavefunction, DRIFT_TOLERANCE};
use crate::classical::PotentialSpec;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean_q: f64,
    pub mean_p: f64,
    pub delta_q: f64,
    pub delta_p: f64,
    /// ΔQ·ΔP.
    pub product: f64,
}

/// Position and momentum means and dispersions. Momentum moments come from
/// the discrete Fourier transform, with momenta `ℏk`.
pub fn moments(psi: &Wavefunction) -> Result<Moments> {
    psi.ensure_contained(DRIFT_TOLERANCE)?;
    let grid = psi.grid();
    let rho = psi.position_density();
    let (mean_q, var_q) = mean_and_variance(grid.points().into_iter().zip(rho.iter().copied()));

    let mut buf = psi.amplitudes().to_vec();
    Spectral::new(grid.n).forward(&mut buf);
    let total: f64 = buf.iter().map(|a| a.norm_sqr()).sum();
    let hbar = psi.hbar();
    let (mean_p, var_p) = mean_and_variance(
        grid.wavenumbers()
            .into_iter()
            .zip(buf.iter())
            .map(|(k, a)| (hbar * k, a.norm_sqr() / total)),
    );
    let delta_q = var_q.sqrt();
    let delta_p = var_p.sqrt();
    Ok(Moments { mean_q, mean_p, delta_q, delta_p, product: delta_q * delta_p })
}

fn mean_and_variance(samples: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let mean: f64 = samples.clone().map(|(x, w)| x * w).sum();
    let var: f64 = samples.map(|(x, w)| (x - mean).powi(2) * w).sum();
    (mean, var)
}

/// A multiplication coefficient `a_l(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    /// Complex polynomial, ascending powers.
    Polynomial(Vec<Complex64>),
    /// Values at the grid nodes.
    Tabulated(Vec<Complex64>),
}

impl Coefficient {
    pub fn real_polynomial(coeffs: &[f64]) -> Self {
        Self::Polynomial(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    fn sample(&self, psi: &Wavefunction) -> Result<Vec<Complex64>> {
        match self {
            Self::Polynomial(c) => Ok(psi
                .grid()
                .points()
                .into_iter()
                .map(|x| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a))
                .collect()),
            Self::Tabulated(v) => {
                if v.len() != psi.grid().n {
                    return Err(Error::GridMismatch);
                }
                Ok(v.clone())
            }
        }
    }
}

/// `H = Σ_l a_l(x) (−iℏ d/dx)^l` for `l ≤ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    terms: Vec<Coefficient>,
}

impl DiffOperator {
    pub const MAX_ORDER: usize = 2;

    /// `terms[l]` multiplies the l-th momentum power.
    pub fn new(terms: Vec<Coefficient>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("differential operator needs at least one term"));
        }
        if terms.len() > Self::MAX_ORDER + 1 {
            return Err(Error::OrderUnsupported(terms.len() - 1));
        }
        Ok(Self { terms })
    }

    pub fn identity() -> Self {
        Self { terms: vec![Coefficient::real_polynomial(&[1.0])] }
    }

    pub fn position() -> Self {
        Self { terms: vec![Coefficient::real_polynomial(&[0.0, 1.0])] }
    }

    /// Multiplication by a real polynomial f(x).
    pub fn multiplication(coeffs: &[f64]) -> Self {
        Self { terms: vec![Coefficient::real_polynomial(coeffs)] }
    }

    /// `−(iℏ/2)(x d/dx + d/dx x) = x·P − iℏ/2`.
    pub fn symmetrized_dilation(hbar: f64) -> Self {
        Self {
            terms: vec![
                Coefficient::Polynomial(vec![Complex64::new(0.0, -0.5 * hbar)]),
                Coefficient::real_polynomial(&[0.0, 1.0]),
            ],
        }
    }

    /// `−(ℏ²/2) d²/dx² + V(x)`.
    pub fn schrodinger(potential: &PotentialSpec) -> Self {
        Self {
            terms: vec![
                Coefficient::real_polynomial(potential.polynomial().coeffs()),
                Coefficient::real_polynomial(&[0.0]),
                Coefficient::real_polynomial(&[0.5]),
            ],
        }
    }

    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }
}

/// `⟨ψ, Hψ⟩`, derivatives applied spectrally. For self-adjoint `H` the
/// imaginary part is roundoff.
pub fn expectation_diffop(psi: &Wavefunction, op: &DiffOperator) -> Result<Complex64> {
    let grid = psi.grid();
    let n = grid.n;
    let spectral = Spectral::new(n);
    let mut spectrum = psi.amplitudes().to_vec();
    spectral.forward(&mut spectrum);
    let momenta: Vec<f64> = grid.wavenumbers().into_iter().map(|k| psi.hbar() * k).collect();

    let mut h_psi = vec![Complex64::new(0.0, 0.0); n];
    for (order, coeff) in op.terms.iter().enumerate() {
        let a = coeff.sample(psi)?;
        if a.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        let derived = if order == 0 {
            psi.amplitudes().to_vec()
        } else {
            let mut buf: Vec<Complex64> = spectrum
                .iter()
                .zip(&momenta)
                .map(|(s, p)| s * p.powi(order as i32) / n as f64)
                .collect();
            spectral.inverse(&mut buf);
            buf
        };
        for ((h, a), d) in h_psi.iter_mut().zip(&a).zip(&derived) {
            *h += a * d;
        }
    }
    Ok(psi
        .amplitudes()
        .iter()
        .zip(&h_psi)
        .map(|(s, h)| s.conj() * h)
        .sum::<Complex64>()
        * grid.dx())
}

/// `⟨ψ, Hψ⟩ / ‖ψ‖²` for `H = P²/2 + V(Q)`, kinetic part evaluated on the
/// momentum grid.
pub fn energy(psi: &Wavefunction, potential: &PotentialSpec) -> f64 {
    let grid = psi.grid();
    let mut buf = psi.amplitudes().to_vec();
    Spectral::new(grid.n).forward(&mut buf);
    let total: f64 = buf.iter().map(|a| a.norm_sqr()).sum();
    let hbar = psi.hbar();
    let kinetic: f64 = grid
        .wavenumbers()
        .into_iter()
        .zip(&buf)
        .map(|(k, a)| 0.5 * (hbar * k).powi(2) * a.norm_sqr())
        .sum::<f64>()
        / total;
    let rho = psi.position_density();
    let pot: f64 = grid
        .points()
        .into_iter()
        .zip(&rho)
        .map(|(x, w)| potential.value(x) * w)
        .sum();
    kinetic + pot
}
