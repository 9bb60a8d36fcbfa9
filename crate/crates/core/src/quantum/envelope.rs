use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, Wavefunction, CONTAINMENT_TOLERANCE};
use crate::error::{invalid, Result};

/// Profile `a(η)` of a wave packet `ℏ^{-1/4} a((x − q)/√ℏ) e^{ipx/ℏ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeSpec {
    /// `π^{-1/4} e^{−η²/2}`.
    StandardGaussian,
    /// `(πs²)^{-1/4} e^{−η²/(2s²)}`.
    ScaledGaussian { width: f64 },
    /// Samples on the uniform grid `η_k = eta_min + k·spacing`, cubic
    /// (Catmull–Rom) interpolation between them and zero outside.
    CustomSamples { eta_min: f64, spacing: f64, values: Vec<Complex64> },
}

impl EnvelopeSpec {
    pub fn scaled_gaussian(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid(format!("envelope width must be positive, got {width}")));
        }
        Ok(Self::ScaledGaussian { width })
    }

    /// Builds a sampled envelope, rescaled to unit L² norm.
    pub fn custom(eta_min: f64, spacing: f64, mut values: Vec<Complex64>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite() && eta_min.is_finite()) {
            return Err(invalid("envelope samples need a positive spacing"));
        }
        if values.len() < 4 {
            return Err(invalid("envelope needs at least 4 samples"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(invalid("envelope samples must be finite"));
        }
        let norm = (values.iter().map(|v| v.norm_sqr()).sum::<f64>() * spacing).sqrt();
        if norm == 0.0 {
            return Err(invalid("envelope samples are all zero"));
        }
        values.iter_mut().for_each(|v| *v /= norm);
        Ok(Self::CustomSamples { eta_min, spacing, values })
    }

    pub fn eval(&self, eta: f64) -> Complex64 {
        match self {
            Self::StandardGaussian => Complex64::new(PI.powf(-0.25) * (-0.5 * eta * eta).exp(), 0.0),
            Self::ScaledGaussian { width } => {
                let s = eta / width;
                Complex64::new((PI * width * width).powf(-0.25) * (-0.5 * s * s).exp(), 0.0)
            }
            Self::CustomSamples { eta_min, spacing, values } => {
                catmull_rom(values, (eta - eta_min) / spacing)
            }
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Self::StandardGaussian => Ok(()),
            Self::ScaledGaussian { width } => Self::scaled_gaussian(*width).map(|_| ()),
            Self::CustomSamples { eta_min, spacing, values } => {
                Self::custom(*eta_min, *spacing, values.clone()).map(|_| ())
            }
        }
    }
}

fn catmull_rom(values: &[Complex64], s: f64) -> Complex64 {
    let last = values.len() - 1;
    if !(s >= 0.0 && s <= last as f64) {
        return Complex64::new(0.0, 0.0);
    }
    let i = (s.floor() as usize).min(last - 1);
    let t = s - i as f64;
    let at = |k: isize| -> Complex64 {
        if k < 0 || k as usize > last {
            Complex64::new(0.0, 0.0)
        } else {
            values[k as usize]
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let t2 = t * t;
    let t3 = t2 * t;
    (p1 * 2.0
        + (p2 - p0) * t
        + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
        + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
        * 0.5
}

/// Coherent state `ℏ^{-1/4} a((x − q)/√ℏ) e^{ipx/ℏ}` sampled on `grid` and
/// renormalized to unit grid norm.
///
/// Fails with `MassEscape` when the packet is not contained in the grid.
pub fn make_coherent_state(
    grid: GridSpec,
    hbar: f64,
    q: f64,
    p: f64,
    envelope: &EnvelopeSpec,
) -> Result<Wavefunction> {
    if !(q.is_finite() && p.is_finite()) {
        return Err(invalid("coherent state center must be finite"));
    }
    envelope.validate()?;
    let sqrt_hbar = hbar.sqrt();
    let prefactor = hbar.powf(-0.25);
    let psi = Wavefunction::from_fn(grid, hbar, |x| {
        envelope.eval((x - q) / sqrt_hbar) * Complex64::from_polar(prefactor, p * x / hbar)
    })?;
    psi.ensure_contained(CONTAINMENT_TOLERANCE)?;
    Ok(psi.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn grid() -> GridSpec {
        GridSpec::new(-2.0, 2.0, 1024).unwrap()
    }

    #[test]
    fn unit_norm() {
        for (q, p) in [(0.0, 0.0), (0.5, -0.3), (-1.2, 0.8)] {
            let psi = make_coherent_state(grid(), 1e-2, q, p, &EnvelopeSpec::StandardGaussian).unwrap();
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_unit_width_is_standard() {
        let a = make_coherent_state(grid(), 1e-2, 0.3, 0.2, &EnvelopeSpec::StandardGaussian).unwrap();
        let b = make_coherent_state(grid(), 1e-2, 0.3, 0.2, &EnvelopeSpec::scaled_gaussian(1.0).unwrap())
            .unwrap();
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn edge_packets_escape() {
        let err = make_coherent_state(grid(), 1e-3, 1.99, 0.0, &EnvelopeSpec::StandardGaussian)
            .unwrap_err();
        assert!(matches!(err, Error::MassEscape { .. }));
    }

    #[test]
    fn custom_envelope_normalized_and_interpolating() {
        let spacing = 0.05;
        let values: Vec<Complex64> = (0..401)
            .map(|k| {
                let eta = -10.0 + k as f64 * spacing;
                Complex64::new(3.0 * (-0.5 * eta * eta).exp(), 0.0)
            })
            .collect();
        let env = EnvelopeSpec::custom(-10.0, spacing, values).unwrap();
        // Unit norm: matches the standard Gaussian to interpolation accuracy.
        for eta in [-1.3, 0.0, 0.77, 2.1] {
            let a = env.eval(eta);
            let b = EnvelopeSpec::StandardGaussian.eval(eta);
            assert!((a - b).norm() < 1e-5, "{eta}: {a} vs {b}");
        }
        assert_eq!(env.eval(12.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn invalid_envelopes() {
        assert!(EnvelopeSpec::scaled_gaussian(0.0).is_err());
        assert!(EnvelopeSpec::custom(0.0, 0.1, vec![Complex64::new(0.0, 0.0); 8]).is_err());
        assert!(EnvelopeSpec::custom(0.0, -0.1, vec![Complex64::new(1.0, 0.0); 8]).is_err());
    }
}
