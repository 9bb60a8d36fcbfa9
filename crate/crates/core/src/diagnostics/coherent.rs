//! Best squeezed-Gaussian approximation of a wavefunction.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::PhaseSpacePoint;
use crate::error::{invalid, Error, Result};
use crate::quantum::{husimi, moments, Wavefunction};

/// Gaussians closer than this many `√ℏ` (in `1/√Re(1/w)` units) are
/// evaluated exactly; beyond it only `|ψ|²` contributes to the residual.
const WINDOW_SIGMAS: f64 = 12.0;
const MAX_SWEEPS: usize = 200;
const STALL_IMPROVEMENT: f64 = 1e-12;
const STALL_SWEEPS: usize = 3;
/// Gradient norm of the squared residual `r²`, in the scaled coordinates
/// below, accepted as an optimum. Rounding in `r²` hides gradients below
/// about `√(ε r²)`, hence the term proportional to the residual.
pub const GRADIENT_TOLERANCE: f64 = 1e-9;
const GRADIENT_TOLERANCE_PER_RESIDUAL: f64 = 1e-7;
const GRADIENT_STEP: f64 = 1e-5;

/// Gaussian `G(x) ∝ exp(−(x − q)²/(2w) + ip(x − q)/ℏ)` maximizing
/// `|⟨G, ψ⟩|/‖ψ‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentFit {
    pub center: PhaseSpacePoint,
    /// Complex width `w` with `Re w > 0`; `w = ℏ` for a standard coherent state.
    pub width: Complex64,
    /// Overlap modulus in `[0, 1]`.
    pub overlap: f64,
    /// `√(1 − overlap²)`.
    pub residual: f64,
    pub sweeps: usize,
}

/// Optimization works in `u = (q/√ℏ, p/√ℏ, ln(aℏ), bℏ)` with `1/w = a + ib`,
/// where every coordinate moves the Gaussian by O(1) in overlap.
struct Objective<'a> {
    xs: Vec<f64>,
    psi: &'a [Complex64],
    /// `Σ_{j<k} |ψ_j|²` and `Σ_{j≥k} |ψ_j|²`.
    prefix: Vec<f64>,
    suffix: Vec<f64>,
    dx: f64,
    x_min: f64,
    hbar: f64,
    evaluations: usize,
}

impl<'a> Objective<'a> {
    fn new(psi: &'a Wavefunction, amplitudes: &'a [Complex64]) -> Self {
        let grid = psi.grid();
        let n = grid.n;
        let mut prefix = vec![0.0; n + 1];
        let mut suffix = vec![0.0; n + 1];
        for j in 0..n {
            prefix[j + 1] = prefix[j] + amplitudes[j].norm_sqr();
        }
        for j in (0..n).rev() {
            suffix[j] = suffix[j + 1] + amplitudes[j].norm_sqr();
        }
        Self {
            xs: grid.points(),
            psi: amplitudes,
            prefix,
            suffix,
            dx: grid.dx(),
            x_min: grid.x_min,
            hbar: psi.hbar(),
            evaluations: 0,
        }
    }

    fn decode(&self, u: &[f64; 4]) -> (f64, f64, Complex64) {
        let s = self.hbar.sqrt();
        (u[0] * s, u[1] * s, Complex64::new(u[2].exp() / self.hbar, u[3] / self.hbar))
    }

    fn encode(&self, q: f64, p: f64, inv_w: Complex64) -> [f64; 4] {
        let s = self.hbar.sqrt();
        [q / s, p / s, (inv_w.re * self.hbar).ln(), inv_w.im * self.hbar]
    }

    /// Squared residual `‖ψ − ⟨Ĝ, ψ⟩Ĝ‖²` for the normalized Gaussian `Ĝ`.
    fn eval(&mut self, u: &[f64; 4]) -> (f64, Complex64) {
        self.evaluations += 1;
        if u.iter().any(|v| !v.is_finite()) {
            return (f64::INFINITY, Complex64::new(0.0, 0.0));
        }
        let (q, p, inv_w) = self.decode(u);
        let radius = WINDOW_SIGMAS / inv_w.re.sqrt();
        let n = self.xs.len();
        let lo = (((q - radius - self.x_min) / self.dx).ceil().max(0.0) as usize).min(n);
        let hi = ((((q + radius - self.x_min) / self.dx).floor() + 1.0).max(0.0) as usize).min(n);
        if lo >= hi {
            return (1.0, Complex64::new(0.0, 0.0));
        }
        let gauss: Vec<Complex64> = self.xs[lo..hi]
            .iter()
            .map(|&x| {
                let d = x - q;
                (-0.5 * inv_w * d * d + Complex64::new(0.0, p * d / self.hbar)).exp()
            })
            .collect();
        let mut gg = 0.0;
        let mut gpsi = Complex64::new(0.0, 0.0);
        for (g, a) in gauss.iter().zip(&self.psi[lo..hi]) {
            gg += g.norm_sqr();
            gpsi += g.conj() * a;
        }
        if gg == 0.0 {
            return (1.0, Complex64::new(0.0, 0.0));
        }
        let c = gpsi / gg;
        let inside: f64 = gauss
            .iter()
            .zip(&self.psi[lo..hi])
            .map(|(g, a)| (a - c * g).norm_sqr())
            .sum();
        let outside = self.prefix[lo] + self.suffix[hi];
        ((inside + outside) * self.dx, inv_w)
    }

    fn value(&mut self, u: &[f64; 4]) -> f64 {
        self.eval(u).0
    }

    fn along(&mut self, u: &[f64; 4], dir: &[f64; 4], t: f64) -> f64 {
        let v = shifted(u, dir, t);
        self.value(&v)
    }

    fn gradient(&mut self, u: &[f64; 4]) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (i, gi) in g.iter_mut().enumerate() {
            let e = unit(i);
            *gi = (self.along(u, &e, GRADIENT_STEP) - self.along(u, &e, -GRADIENT_STEP))
                / (2.0 * GRADIENT_STEP);
        }
        g
    }

    /// One damped Newton step from finite-difference derivatives; `None` when
    /// the Hessian is not positive definite.
    fn newton_direction(&mut self, u: &[f64; 4], f0: f64) -> Option<[f64; 4]> {
        let h = 1e-4;
        let mut hess = [[0.0; 4]; 4];
        let grad = self.gradient(u);
        let mut plus = [0.0; 4];
        let mut minus = [0.0; 4];
        for i in 0..4 {
            plus[i] = self.along(u, &unit(i), h);
            minus[i] = self.along(u, &unit(i), -h);
            hess[i][i] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h);
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let mut d = [0.0; 4];
                d[i] = h;
                d[j] = h;
                let fpp = self.along(u, &d, 1.0);
                let fmm = self.along(u, &d, -1.0);
                // f(x+h_i+h_j) + f(x−h_i−h_j) − f(x+h_i) − f(x−h_i) − f(x+h_j) − f(x−h_j) + 2f(x) = 2h²∂ij
                let mixed = (fpp + fmm - plus[i] - minus[i] - plus[j] - minus[j] + 2.0 * f0) / (2.0 * h * h);
                hess[i][j] = mixed;
                hess[j][i] = mixed;
            }
        }
        let step = solve_spd(hess, grad)?;
        Some(step.map(|s| -s))
    }
}

fn unit(i: usize) -> [f64; 4] {
    let mut e = [0.0; 4];
    e[i] = 1.0;
    e
}

fn shifted(u: &[f64; 4], dir: &[f64; 4], t: f64) -> [f64; 4] {
    [u[0] + t * dir[0], u[1] + t * dir[1], u[2] + t * dir[2], u[3] + t * dir[3]]
}

/// Cholesky solve of a 4×4 system; `None` unless positive definite.
fn solve_spd(a: [[f64; 4]; 4], b: [f64; 4]) -> Option<[f64; 4]> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = [0.0; 4];
    for i in 0..4 {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; 4];
    for i in (0..4).rev() {
        x[i] = (y[i] - ((i + 1)..4).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Minimizes `f` along a line from `t = 0` (where `f = f0`): downhill
/// bracketing followed by Brent's parabolic/golden search.
fn line_minimize(mut f: impl FnMut(f64) -> f64, f0: f64, step: f64) -> (f64, f64) {
    const GOLD: f64 = 1.618_033_988_749_895;
    let (mut a, mut fa) = (0.0, f0);
    let (mut b, mut fb) = (step, f(step));
    if fb > fa {
        let (c, fc) = (-step, f(-step));
        if fc >= fa {
            return brent(&mut f, -step, 0.0, step, f0);
        }
        b = c;
        fb = fc;
    }
    // Now f(b) < f(a): march on in the direction a → b.
    let mut c = b + GOLD * (b - a);
    let mut fc = f(c);
    let mut guard = 0;
    while fc < fb && guard < 60 {
        a = b;
        fa = fb;
        b = c;
        fb = fc;
        c = b + GOLD * (b - a);
        fc = f(c);
        guard += 1;
    }
    let _ = fa;
    let (lo, hi) = if a < c { (a, c) } else { (c, a) };
    brent(&mut f, lo, b, hi, fb)
}

fn brent(f: &mut impl FnMut(f64) -> f64, lo: f64, mid: f64, hi: f64, fmid: f64) -> (f64, f64) {
    const CGOLD: f64 = 0.381_966_011_250_105;
    let (mut a, mut b) = (lo, hi);
    let (mut x, mut w, mut v) = (mid, mid, mid);
    let (mut fx, mut fw, mut fv) = (fmid, fmid, fmid);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let xm = 0.5 * (a + b);
        let tol1 = 1e-10 * x.abs() + 1e-12;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits a squeezed Gaussian to `psi` by coordinate descent in
/// `(q, p, Re 1/w, Im 1/w)`, accelerated by pattern and Newton moves.
///
/// The centre is seeded at the Husimi maximum within `3√ℏ` of `guess`.
/// Fails with `OptimizerStalled` (carrying the best fit found) when several
/// sweeps in a row stop improving before the gradient tolerance is met.
pub fn coherent_fit(psi: &Wavefunction, guess: PhaseSpacePoint) -> Result<CoherentFit> {
    if !guess.is_finite() {
        return Err(invalid("coherent fit guess must be finite"));
    }
    let hbar = psi.hbar();
    let norm = psi.norm();
    if !(norm > 0.0) {
        return Err(invalid("cannot fit the zero wavefunction"));
    }
    let amplitudes: Vec<Complex64> = psi.amplitudes().iter().map(|a| a / norm).collect();
    let mut obj = Objective::new(psi, &amplitudes);

    let seed = husimi_seed(psi, guess)?;
    let mut candidates = vec![obj.encode(seed.q, seed.p, Complex64::new(1.0 / hbar, 0.0))];
    if let Ok(m) = moments(psi) {
        // A Gaussian with 1/w = a + ib has ΔQ² = 1/(2a) and a Q–P
        // covariance of −ℏb/(2a).
        let cov = position_momentum_covariance(psi, m.mean_q, m.mean_p);
        let a = 0.5 / (m.delta_q * m.delta_q);
        let b = -cov / (hbar * m.delta_q * m.delta_q);
        if a.is_finite() && b.is_finite() && a > 0.0 {
            candidates.push(obj.encode(seed.q, seed.p, Complex64::new(a, b)));
        }
    }
    let mut u = candidates[0];
    let mut f = obj.value(&u);
    for c in &candidates[1..] {
        let fc = obj.value(c);
        if fc < f {
            u = *c;
            f = fc;
        }
    }

    let mut steps = [0.25; 4];
    let mut stalled = 0;
    let mut gradient = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        let start = u;
        let f_start = f;
        for i in 0..4 {
            let e = unit(i);
            let (t, ft) = line_minimize(|t| obj.along(&u, &e, t), f, steps[i]);
            if ft < f {
                u = shifted(&u, &e, t);
                f = ft;
            }
            steps[i] = (2.0 * t.abs()).clamp(1e-6, 1.0);
        }
        let d = [u[0] - start[0], u[1] - start[1], u[2] - start[2], u[3] - start[3]];
        if norm4(&d) > 0.0 {
            let (t, ft) = line_minimize(|t| obj.along(&u, &d, t), f, 0.5);
            if ft < f {
                u = shifted(&u, &d, t);
                f = ft;
            }
        }
        if let Some(dir) = obj.newton_direction(&u, f) {
            let (t, ft) = line_minimize(|t| obj.along(&u, &dir, t), f, 1.0);
            if ft < f {
                u = shifted(&u, &dir, t);
                f = ft;
            }
        }

        gradient = norm4(&obj.gradient(&u));
        if gradient <= GRADIENT_TOLERANCE + GRADIENT_TOLERANCE_PER_RESIDUAL * f.max(0.0).sqrt() {
            return Ok(finish(&obj, &u, f, sweep));
        }
        let improvement = f_start.max(0.0).sqrt() - f.max(0.0).sqrt();
        stalled = if improvement < STALL_IMPROVEMENT { stalled + 1 } else { 0 };
        if stalled >= STALL_SWEEPS {
            return Err(Error::OptimizerStalled { best: Box::new(finish(&obj, &u, f, sweep)), gradient });
        }
    }
    Err(Error::OptimizerStalled { best: Box::new(finish(&obj, &u, f, MAX_SWEEPS)), gradient })
}

fn finish(obj: &Objective, u: &[f64; 4], f: f64, sweeps: usize) -> CoherentFit {
    let (q, p, inv_w) = obj.decode(u);
    let r2 = f.clamp(0.0, 1.0);
    CoherentFit {
        center: PhaseSpacePoint::new(q, p),
        width: 1.0 / inv_w,
        overlap: (1.0 - r2).sqrt(),
        residual: r2.sqrt(),
        sweeps,
    }
}

/// Symmetrized `⟨(Q − q̄)(P − p̄) + (P − p̄)(Q − q̄)⟩ / 2`.
fn position_momentum_covariance(psi: &Wavefunction, mean_q: f64, mean_p: f64) -> f64 {
    let p_psi = psi.momentum_power(1);
    let dx = psi.grid().dx();
    let total = psi.norm_sqr();
    let qp: Complex64 = psi
        .grid()
        .points()
        .into_iter()
        .zip(psi.amplitudes())
        .zip(&p_psi)
        .map(|((x, a), pa)| (x - mean_q) * a.conj() * (pa - mean_p * a))
        .sum::<Complex64>()
        * dx
        / total;
    qp.re
}

fn husimi_seed(psi: &Wavefunction, guess: PhaseSpacePoint) -> Result<PhaseSpacePoint> {
    let s = psi.hbar().sqrt();
    let nyquist = psi.grid().nyquist_momentum(psi.hbar());
    let step = 0.25 * s;
    let axis = |c: f64, cap: f64| -> Vec<f64> {
        (-12..=12)
            .map(|k| c + k as f64 * step)
            .filter(|v| v.abs() <= cap)
            .collect()
    };
    let qs = axis(guess.q, f64::INFINITY);
    let ps = axis(guess.p, nyquist);
    if ps.is_empty() {
        return Err(Error::MomentumOutOfBand { p: guess.p, nyquist });
    }
    Ok(husimi(psi, &qs, &ps)?.argmax().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagators::{evolve_exact_reference, ExactReference};
    use crate::quantum::{make_coherent_state, EnvelopeSpec, GridSpec};

    #[test]
    fn exact_coherent_state() {
        let grid = GridSpec::new(-2.0, 2.0, 2048).unwrap();
        let hbar = 1e-3;
        let psi = make_coherent_state(grid, hbar, 0.4, -0.3, &EnvelopeSpec::StandardGaussian).unwrap();
        let fit = coherent_fit(&psi, PhaseSpacePoint::new(0.42, -0.28)).unwrap();
        assert!(fit.center.distance(&PhaseSpacePoint::new(0.4, -0.3)) < 1e-6, "{fit:?}");
        assert!(fit.residual < 1e-8, "{fit:?}");
        assert!((fit.width - Complex64::new(hbar, 0.0)).norm() < 1e-6 * hbar);
    }

    #[test]
    fn squeezed_harmonic_state() {
        let grid = GridSpec::new(-4.0, 4.0, 2048).unwrap();
        let hbar = 1e-2;
        let kind = ExactReference::Harmonic { omega: 2.0 };
        let t = 0.6;
        let psi = evolve_exact_reference(kind, 0.5, 0.2, hbar, t, grid).unwrap();
        let (s, c) = (2.0 * t).sin_cos();
        let center = PhaseSpacePoint::new(0.5 * c + 0.1 * s, 0.2 * c - 1.0 * s);
        let fit = coherent_fit(&psi, center).unwrap();
        assert!(fit.residual < 1e-5);
        assert!(fit.center.distance(&center) < 1e-6);
        assert!(fit.width.re > 0.0);
    }

    #[test]
    fn global_phase_does_not_matter() {
        let grid = GridSpec::new(-2.0, 2.0, 1024).unwrap();
        let env = EnvelopeSpec::scaled_gaussian(1.7).unwrap();
        let psi = make_coherent_state(grid, 1e-2, 0.1, 0.3, &env).unwrap();
        let a = coherent_fit(&psi, PhaseSpacePoint::new(0.1, 0.3)).unwrap();
        let b = coherent_fit(&psi.clone().scaled(Complex64::from_polar(1.0, 2.1)), PhaseSpacePoint::new(0.1, 0.3))
            .unwrap();
        assert!((a.overlap - b.overlap).abs() < 1e-12);
    }

    #[test]
    fn cholesky_solves() {
        let a = [[4.0, 1.0, 0.0, 0.0], [1.0, 3.0, 0.0, 0.0], [0.0, 0.0, 2.0, 0.5], [0.0, 0.0, 0.5, 1.0]];
        let x = solve_spd(a, [1.0, 2.0, 3.0, 4.0]).unwrap();
        for i in 0..4 {
            let r: f64 = (0..4).map(|j| a[i][j] * x[j]).sum();
            assert!((r - [1.0, 2.0, 3.0, 4.0][i]).abs() < 1e-12);
        }
        assert!(solve_spd([[-1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]], [1.0; 4]).is_none());
    }
}
