//! Classical Hamiltonian flows in one degree of freedom.
//!
//! Potential-type systems `h = p²/2 + V(q)` are stepped with velocity Verlet
//! (kick-drift-kick). The dilation system `h = qp` is sampled from its closed
//! form `(q₀eᵗ, p₀e⁻ᵗ)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::polynomial::Polynomial;

/// A point `(q, p)` of the two-dimensional phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub q: f64,
    pub p: f64,
}

impl PhaseSpacePoint {
    pub const ORIGIN: Self = Self { q: 0.0, p: 0.0 };

    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.q - other.q).hypot(self.p - other.p)
    }

    fn offset(&self, dir: [f64; 2], scale: f64) -> Self {
        Self::new(self.q + scale * dir[0], self.p + scale * dir[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialSpec {
    /// V(x) = x²(x² − 1).
    DoubleWell,
    /// V(x) = k x² / 2.
    Quadratic(f64),
    /// Arbitrary polynomial of degree at most 8.
    Custom(Polynomial),
}

pub const MAX_CUSTOM_DEGREE: usize = 8;

impl PotentialSpec {
    pub fn custom(coeffs: Vec<f64>) -> Result<Self> {
        let poly = Polynomial::new(coeffs);
        if poly.degree() > MAX_CUSTOM_DEGREE {
            return Err(invalid(format!(
                "custom potential has degree {} > {MAX_CUSTOM_DEGREE}",
                poly.degree()
            )));
        }
        if !poly.is_finite() {
            return Err(invalid("custom potential has non-finite coefficients"));
        }
        Ok(Self::Custom(poly))
    }

    pub fn polynomial(&self) -> Polynomial {
        match self {
            Self::DoubleWell => Polynomial::new(vec![0.0, 0.0, -1.0, 0.0, 1.0]),
            Self::Quadratic(k) => Polynomial::new(vec![0.0, 0.0, 0.5 * k]),
            Self::Custom(p) => p.clone(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::DoubleWell => {
                let x2 = x * x;
                x2 * (x2 - 1.0)
            }
            Self::Quadratic(k) => 0.5 * k * x * x,
            Self::Custom(p) => p.eval(x),
        }
    }

    /// V'(x).
    pub fn slope(&self, x: f64) -> f64 {
        match self {
            Self::DoubleWell => 4.0 * x * x * x - 2.0 * x,
            Self::Quadratic(k) => k * x,
            Self::Custom(p) => p.derivative().eval(x),
        }
    }

    /// V''(x).
    pub fn curvature(&self, x: f64) -> f64 {
        match self {
            Self::DoubleWell => 12.0 * x * x - 2.0,
            Self::Quadratic(k) => *k,
            Self::Custom(p) => p.derivative().derivative().eval(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemSpec {
    PotentialWell(PotentialSpec),
    /// h(q, p) = qp.
    Dilation,
    Harmonic { omega: f64 },
    Free,
}

impl SystemSpec {
    pub fn double_well() -> Self {
        Self::PotentialWell(PotentialSpec::DoubleWell)
    }

    pub fn harmonic(omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid(format!("harmonic frequency must be > 0, got {omega}")));
        }
        Ok(Self::Harmonic { omega })
    }

    /// The potential of a separable system, `None` for the dilation.
    pub fn potential(&self) -> Option<PotentialSpec> {
        match self {
            Self::PotentialWell(v) => Some(v.clone()),
            Self::Harmonic { omega } => Some(PotentialSpec::Quadratic(omega * omega)),
            Self::Free => Some(PotentialSpec::Quadratic(0.0)),
            Self::Dilation => None,
        }
    }

    fn force(&self, q: f64) -> f64 {
        match self {
            Self::PotentialWell(v) => -v.slope(q),
            Self::Harmonic { omega } => -omega * omega * q,
            Self::Free | Self::Dilation => 0.0,
        }
    }

    /// Analytic Jacobian of the Hamiltonian vector field.
    pub fn jacobian(&self, x: PhaseSpacePoint) -> [[f64; 2]; 2] {
        match self {
            Self::PotentialWell(v) => [[0.0, 1.0], [-v.curvature(x.q), 0.0]],
            Self::Harmonic { omega } => [[0.0, 1.0], [-omega * omega, 0.0]],
            Self::Free => [[0.0, 1.0], [0.0, 0.0]],
            Self::Dilation => [[1.0, 0.0], [0.0, -1.0]],
        }
    }
}

pub fn hamiltonian_value(sys: &SystemSpec, x: PhaseSpacePoint) -> f64 {
    let kinetic = 0.5 * x.p * x.p;
    match sys {
        SystemSpec::PotentialWell(v) => kinetic + v.value(x.q),
        SystemSpec::Harmonic { omega } => kinetic + 0.5 * omega * omega * x.q * x.q,
        SystemSpec::Free => kinetic,
        SystemSpec::Dilation => x.q * x.p,
    }
}

/// Hamilton's equations: `(∂h/∂p, −∂h/∂q)`.
pub fn vector_field(sys: &SystemSpec, x: PhaseSpacePoint) -> (f64, f64) {
    match sys {
        SystemSpec::Dilation => (x.q, -x.p),
        _ => (x.p, sys.force(x.q)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhaseSpacePoint>,
    pub energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> PhaseSpacePoint {
        *self.points.last().expect("trajectory holds t = 0")
    }
}

/// Splits `[0, t_final]` into an integer number of equal steps no larger than `dt`.
pub fn step_count(t_final: f64, dt: f64) -> (usize, f64) {
    let ratio = t_final / dt;
    let rounded = ratio.round();
    let n = if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
        rounded as usize
    } else {
        ratio.ceil() as usize
    };
    let n = n.max(1);
    (n, t_final / n as f64)
}

/// Samples the Hamiltonian flow Φᵗ(x0) on `[0, t_final]`.
///
/// The caller keeps `λ·dt` small (below 0.1 for the largest local exponent);
/// the step is shrunk so that `t_final` is hit exactly.
pub fn integrate_flow(
    sys: &SystemSpec,
    x0: PhaseSpacePoint,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !x0.is_finite() {
        return Err(Error::NonFiniteState { time: 0.0 });
    }
    if !(dt > 0.0 && t_final.is_finite() && t_final >= dt) {
        return Err(invalid(format!(
            "need 0 < dt <= t_final, got dt = {dt}, t_final = {t_final}"
        )));
    }
    let (n, h) = step_count(t_final, dt);
    let mut times = Vec::with_capacity(n + 1);
    let mut points = Vec::with_capacity(n + 1);

    match sys {
        SystemSpec::Dilation => {
            for k in 0..=n {
                let t = if k == n { t_final } else { k as f64 * h };
                let x = PhaseSpacePoint::new(x0.q * t.exp(), x0.p * (-t).exp());
                if !x.is_finite() {
                    return Err(Error::NonFiniteState { time: t });
                }
                times.push(t);
                points.push(x);
            }
        }
        _ => {
            let (mut q, mut p) = (x0.q, x0.p);
            let mut f = sys.force(q);
            times.push(0.0);
            points.push(x0);
            for k in 1..=n {
                p += 0.5 * h * f;
                q += h * p;
                f = sys.force(q);
                p += 0.5 * h * f;
                let t = if k == n { t_final } else { k as f64 * h };
                if !(q.is_finite() && p.is_finite()) {
                    return Err(Error::NonFiniteState { time: t });
                }
                times.push(t);
                points.push(PhaseSpacePoint::new(q, p));
            }
        }
    }

    let energy = points.iter().map(|&x| hamiltonian_value(sys, x)).collect();
    Ok(Trajectory { times, points, energy })
}

/// Final point of [`integrate_flow`]; the identity for `t = 0`.
pub fn flow_map(sys: &SystemSpec, x0: PhaseSpacePoint, t: f64, dt: f64) -> Result<PhaseSpacePoint> {
    if t == 0.0 {
        return Ok(x0);
    }
    let dt = dt.min(t);
    Ok(integrate_flow(sys, x0, t, dt)?.last())
}

/// Upper end of the separation window used by [`separation_exponent`].
pub const SEPARATION_CEILING: f64 = 1e-2;

/// Fitted exponential growth rate of the distance between two trajectories
/// started `eps` apart.
///
/// Next to a hyperbolic fixed point the perturbation follows the unstable
/// direction, otherwise it is `(eps, 0)`. The slope of `log‖δ(t)‖` is fitted
/// on samples with `10·eps < ‖δ‖ < 10⁻²`. When the separation never grows past
/// `10·eps` (bounded motion) every sample below the ceiling is used instead.
pub fn separation_exponent(
    sys: &SystemSpec,
    x0: PhaseSpacePoint,
    eps: f64,
    t_final: f64,
    dt: f64,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("separation eps must be positive"));
    }
    let direction = match hyperbolic_analysis(sys, x0) {
        Ok(data) if data.fixed_point.distance(&x0) <= 1e-6 => data.unstable,
        _ => [1.0, 0.0],
    };
    let reference = integrate_flow(sys, x0, t_final, dt)?;
    let perturbed = integrate_flow(sys, x0.offset(direction, eps), t_final, dt)?;

    let samples: Vec<(f64, f64)> = reference
        .times
        .iter()
        .zip(reference.points.iter().zip(&perturbed.points))
        .map(|(&t, (a, b))| (t, a.distance(b)))
        .collect();

    let growing: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(_, d)| d > 10.0 * eps && d < SEPARATION_CEILING)
        .collect();
    let window = if growing.len() >= 10 {
        growing
    } else if samples.iter().all(|&(_, d)| d <= 10.0 * eps) {
        samples
            .into_iter()
            .filter(|&(_, d)| d > 0.0 && d < SEPARATION_CEILING)
            .collect()
    } else {
        growing
    };
    if window.len() < 10 {
        return Err(Error::DegenerateWindow { samples: window.len() });
    }
    let xs: Vec<f64> = window.iter().map(|w| w.0).collect();
    let ys: Vec<f64> = window.iter().map(|w| w.1.ln()).collect();
    Ok(crate::fit::linear_fit(&xs, &ys).slope)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicData {
    pub fixed_point: PhaseSpacePoint,
    /// Positive Lyapunov exponent λ of the fixed point.
    pub exponent: f64,
    /// Unit eigenvector for +λ.
    pub unstable: [f64; 2],
    /// Unit eigenvector for −λ.
    pub stable: [f64; 2],
}

const NEWTON_TOLERANCE: f64 = 1e-12;
const NEWTON_MAX_ITERATIONS: usize = 50;

fn numerical_jacobian(sys: &SystemSpec, x: PhaseSpacePoint) -> [[f64; 2]; 2] {
    let mut jac = [[0.0; 2]; 2];
    for (col, dir) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
        let h = 1e-6 * (1.0 + if col == 0 { x.q.abs() } else { x.p.abs() });
        let plus = vector_field(sys, x.offset(dir, h));
        let minus = vector_field(sys, x.offset(dir, -h));
        jac[0][col] = (plus.0 - minus.0) / (2.0 * h);
        jac[1][col] = (plus.1 - minus.1) / (2.0 * h);
    }
    jac
}

fn refine_fixed_point(sys: &SystemSpec, guess: PhaseSpacePoint) -> Result<PhaseSpacePoint> {
    let mut x = guess;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let (f0, f1) = vector_field(sys, x);
        if f0.hypot(f1) <= NEWTON_TOLERANCE {
            return Ok(x);
        }
        let j = numerical_jacobian(sys, x);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det.abs() < 1e-300 || !det.is_finite() {
            break;
        }
        let dq = (j[1][1] * f0 - j[0][1] * f1) / det;
        let dp = (j[0][0] * f1 - j[1][0] * f0) / det;
        x = PhaseSpacePoint::new(x.q - dq, x.p - dp);
        if !x.is_finite() {
            break;
        }
        if dq.hypot(dp) <= NEWTON_TOLERANCE * (1.0 + x.q.hypot(x.p)) {
            let (g0, g1) = vector_field(sys, x);
            if g0.hypot(g1) <= 1e3 * NEWTON_TOLERANCE {
                return Ok(x);
            }
        }
    }
    Err(Error::NoFixedPoint { iterations: NEWTON_MAX_ITERATIONS })
}

fn eigenvector(j: &[[f64; 2]; 2], mu: f64) -> [f64; 2] {
    // Rows of (J − μI) are orthogonal to the eigenvector; use the larger one.
    let r0 = [j[0][0] - mu, j[0][1]];
    let r1 = [j[1][0], j[1][1] - mu];
    let row = if r0[0].hypot(r0[1]) >= r1[0].hypot(r1[1]) { r0 } else { r1 };
    let mut v = [row[1], -row[0]];
    let norm = v[0].hypot(v[1]);
    v[0] /= norm;
    v[1] /= norm;
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

/// Refines a fixed point near `guess` and decomposes its linearization.
pub fn hyperbolic_analysis(sys: &SystemSpec, guess: PhaseSpacePoint) -> Result<HyperbolicData> {
    let fixed_point = refine_fixed_point(sys, guess)?;
    let j = sys.jacobian(fixed_point);
    let half_trace = 0.5 * (j[0][0] + j[1][1]);
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = half_trace * half_trace - det;
    if disc <= 0.0 || half_trace.abs() > 1e-9 * disc.sqrt() {
        return Err(Error::NotHyperbolic(if disc < 0.0 {
            format!("{half_trace} ± {}i", (-disc).sqrt())
        } else {
            format!("{} ± {}", half_trace, disc.max(0.0).sqrt())
        }));
    }
    let exponent = disc.sqrt();
    Ok(HyperbolicData {
        fixed_point,
        exponent,
        unstable: eigenvector(&j, exponent),
        stable: eigenvector(&j, -exponent),
    })
}

/// One connected piece of a level set, sampled over `q_range` on both
/// momentum branches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelArc {
    pub q_range: (f64, f64),
    /// p ≥ 0, ordered by increasing q.
    pub upper: Vec<PhaseSpacePoint>,
    /// p ≤ 0, ordered by increasing q.
    pub lower: Vec<PhaseSpacePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatrixCurve {
    pub energy: f64,
    pub arcs: Vec<LevelArc>,
}

/// Which sign branch of a level set a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Upper,
    Lower,
}

impl SeparatrixCurve {
    pub fn points(&self) -> impl Iterator<Item = &PhaseSpacePoint> {
        self.arcs.iter().flat_map(|a| a.upper.iter().chain(&a.lower))
    }

    /// Bounding box `(q_min, q_max, p_min, p_max)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), x| (a.min(x.q), b.max(x.q), c.min(x.p), d.max(x.p)),
        )
    }

    /// Euclidean distance from `x` to the sampled polyline, with the branch of
    /// the nearest segment.
    pub fn nearest(&self, x: PhaseSpacePoint) -> (f64, Branch) {
        let mut best = (f64::INFINITY, Branch::Upper);
        for arc in &self.arcs {
            for (branch, pts) in [(Branch::Upper, &arc.upper), (Branch::Lower, &arc.lower)] {
                for seg in pts.windows(2) {
                    let d = segment_distance(x, seg[0], seg[1]);
                    if d < best.0 {
                        best = (d, branch);
                    }
                }
            }
        }
        best
    }

    pub fn distance(&self, x: PhaseSpacePoint) -> f64 {
        self.nearest(x).0
    }
}

fn segment_distance(x: PhaseSpacePoint, a: PhaseSpacePoint, b: PhaseSpacePoint) -> f64 {
    let (dq, dp) = (b.q - a.q, b.p - a.p);
    let len2 = dq * dq + dp * dp;
    let s = if len2 > 0.0 {
        (((x.q - a.q) * dq + (x.p - a.p) * dp) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x.q - a.q - s * dq).hypot(x.p - a.p - s * dp)
}

/// `|p|` on the level set `h = energy` above `q`, or `None` when `q` is
/// classically forbidden.
pub fn level_set_momentum(potential: &PotentialSpec, energy: f64, q: f64) -> Option<f64> {
    let gap = energy - potential.value(q);
    if gap < 0.0 {
        None
    } else {
        Some((2.0 * gap).sqrt())
    }
}

const ROOT_SCAN_CELLS: usize = 20_000;

/// Classically allowed intervals `{q : V(q) ≤ energy}`.
fn allowed_intervals(potential: &PotentialSpec, energy: f64) -> Result<Vec<(f64, f64)>> {
    let poly = potential.polynomial();
    let deg = poly.degree();
    if deg == 0 || deg % 2 == 1 || poly.leading() < 0.0 {
        let constant_ok = deg == 0 && poly.eval(0.0) <= energy;
        return Err(if deg == 0 && !constant_ok {
            Error::EmptyLevelSet { energy }
        } else {
            Error::UnboundedLevelSet { energy }
        });
    }
    // Cauchy bound on the roots of V − E.
    let mut shifted = poly.coeffs().to_vec();
    shifted[0] -= energy;
    let lead = poly.leading();
    let bound = 1.0
        + shifted[..deg]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
    let gap = |q: f64| energy - potential.value(q);

    let h = 2.0 * bound / ROOT_SCAN_CELLS as f64;
    let mut roots = Vec::new();
    let mut prev_q = -bound;
    let mut prev_g = gap(prev_q);
    for k in 1..=ROOT_SCAN_CELLS {
        let q = -bound + k as f64 * h;
        let g = gap(q);
        if (prev_g < 0.0) != (g < 0.0) {
            roots.push(bisect(&gap, prev_q, q));
        }
        prev_q = q;
        prev_g = g;
    }
    let mut intervals = Vec::new();
    for pair in roots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if gap(0.5 * (a + b)) >= 0.0 {
            intervals.push((a, b));
        }
    }
    if intervals.is_empty() {
        return Err(Error::EmptyLevelSet { energy });
    }
    Ok(intervals)
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let neg_a = f(a) < 0.0;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == neg_a {
            a = m;
        } else {
            b = m;
        }
    }
    // The endpoint where V ≤ E, so that the turning point is allowed.
    if neg_a {
        b
    } else {
        a
    }
}

/// Samples the level set `h = energy` of a potential-type system.
///
/// Each allowed interval is sampled at Chebyshev–Lobatto abscissae, which
/// cluster near the turning points where `p(q)` is steep. Turning points carry
/// `p = 0` exactly.
pub fn separatrix(sys: &SystemSpec, energy: f64, n_samples: usize) -> Result<SeparatrixCurve> {
    let potential = match sys {
        SystemSpec::PotentialWell(_) | SystemSpec::Harmonic { .. } => sys.potential().unwrap(),
        SystemSpec::Dilation | SystemSpec::Free => {
            return Err(Error::UnsupportedSystem("separatrix needs a confining potential"))
        }
    };
    if n_samples < 2 {
        return Err(invalid("separatrix needs at least 2 samples per branch"));
    }
    let arcs = allowed_intervals(&potential, energy)?
        .into_iter()
        .map(|(a, b)| {
            let mut upper = Vec::with_capacity(n_samples);
            for i in 0..n_samples {
                let q = if i == 0 {
                    a
                } else if i == n_samples - 1 {
                    b
                } else {
                    let theta = std::f64::consts::PI * i as f64 / (n_samples - 1) as f64;
                    0.5 * (a + b) - 0.5 * (b - a) * theta.cos()
                };
                let p = if i == 0 || i == n_samples - 1 {
                    0.0
                } else {
                    level_set_momentum(&potential, energy, q).unwrap_or(0.0)
                };
                upper.push(PhaseSpacePoint::new(q, p));
            }
            let lower = upper.iter().map(|x| PhaseSpacePoint::new(x.q, -x.p)).collect();
            LevelArc { q_range: (a, b), upper, lower }
        })
        .collect();
    Ok(SeparatrixCurve { energy, arcs })
}
