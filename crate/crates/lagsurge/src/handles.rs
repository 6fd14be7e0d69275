//! Flat local models of the point, clean and E₂ surgery handles in ℂⁿ under
//! (q, p) ↦ q − ip, and the checks run on them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use quadrature::double_exponential;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{curve_from_profile, AdmissibleCurve, Profile, ProfileKind};
use crate::sampling::Halton;
use crate::symplectic_linalg::{omega, CMat};

/// Tolerance on grading endpoints.
pub const TAU_THETA: f64 = 1e-6;
/// Tolerance on ω restricted to a handle frame.
pub const TAU_OMEGA: f64 = 1e-8;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HandleKind {
    PointCurve,
    PointFlow,
    Clean,
    E2,
    /// The zero section, used as a reference chart.
    ZeroSection,
}

impl std::str::FromStr for HandleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point-curve" => Ok(Self::PointCurve),
            "point" | "point-flow" => Ok(Self::PointFlow),
            "clean" => Ok(Self::Clean),
            "e2" => Ok(Self::E2),
            "zero" => Ok(Self::ZeroSection),
            _ => Err(Error::Schema(format!("unknown handle kind '{s}'"))),
        }
    }
}

/// Local data of an E₂ handle: D = {q_f = q_f^D(q_b)} with
/// q_f^D(q_b)_m = −(M₀ᵀq_b)_m − ½ q_bᵀ H_m q_b and its conormal
/// p_b^D(q_b, p_f) = M(q_b)p_f, M(q_b)_{im} = M₀_{im} + (H_m q_b)_i.
#[derive(Clone, Debug, PartialEq)]
pub struct E2Data {
    /// k × (n−k).
    pub m0: DMatrix<f64>,
    /// One symmetric k × k matrix per fiber coordinate.
    pub hess: Vec<DMatrix<f64>>,
}

impl E2Data {
    pub fn new(m0: DMatrix<f64>, hess: Vec<DMatrix<f64>>) -> Result<Self> {
        let (k, f) = m0.shape();
        if hess.len() != f {
            return Err(Error::InvalidParameter(format!("expected {f} Hessians, got {}", hess.len())));
        }
        for h in &hess {
            if h.shape() != (k, k) {
                return Err(Error::InvalidParameter("Hessian has the wrong shape".into()));
            }
            if (h - h.transpose()).amax() > 1e-12 {
                return Err(Error::InvalidParameter("Hessian is not symmetric".into()));
            }
        }
        Ok(Self { m0, hess })
    }

    /// Linear data p_b^D = M₀ p_f.
    pub fn linear(m0: DMatrix<f64>) -> Self {
        let (k, f) = m0.shape();
        Self { m0, hess: vec![DMatrix::zeros(k, k); f] }
    }

    pub fn zero(n: usize, k: usize) -> Self {
        Self::linear(DMatrix::zeros(k, n - k))
    }

    fn m_at(&self, q_b: &[f64]) -> DMatrix<f64> {
        let mut m = self.m0.clone();
        let qb = DVector::from_column_slice(q_b);
        for (col, h) in self.hess.iter().enumerate() {
            let hq = h * &qb;
            for i in 0..m.nrows() {
                m[(i, col)] += hq[i];
            }
        }
        m
    }

    /// q_f^D(q_b).
    pub fn q_f(&self, q_b: &[f64]) -> Vec<f64> {
        let qb = DVector::from_column_slice(q_b);
        let lin = self.m0.transpose() * &qb;
        (0..self.hess.len()).map(|m| -lin[m] - 0.5 * qb.dot(&(&self.hess[m] * &qb))).collect()
    }

    /// p_b^D(q_b, p_f).
    pub fn p_b(&self, q_b: &[f64], p_f: &[f64]) -> Vec<f64> {
        let v = self.m_at(q_b) * DVector::from_column_slice(p_f);
        v.iter().copied().collect()
    }

    /// κ-matrix ∂_{q_j} p_b^D(0, r e)_i along the fiber direction e.
    pub fn kappa(&self, r: f64, e: &[f64]) -> DMatrix<f64> {
        let k = self.m0.nrows();
        let mut out = DMatrix::zeros(k, k);
        for (m, h) in self.hess.iter().enumerate() {
            out += h * (r * e[m]);
        }
        out
    }

    /// K(r) = arg det(I + M₀M₀ᵀ − iκ(r)), lifted continuously from K(0) = 0.
    /// With M₀ = 0 and diagonal κ this is Σ_j arg(1 − iκ_jj).
    pub fn k_correction(&self, r: f64, e: &[f64]) -> f64 {
        let k = self.m0.nrows();
        if k == 0 {
            return 0.0;
        }
        let p = DMatrix::identity(k, k) + &self.m0 * self.m0.transpose();
        let pe = SymmetricEigen::new(p);
        let inv_sqrt = &pe.eigenvectors * DMatrix::from_diagonal(&pe.eigenvalues.map(|x| 1.0 / x.sqrt())) * pe.eigenvectors.transpose();
        let s = &inv_sqrt * self.kappa(r, e) * &inv_sqrt;
        let s = 0.5 * (&s + s.transpose());
        -SymmetricEigen::new(s).eigenvalues.iter().map(|mu| mu.atan()).sum::<f64>()
    }
}

/// A handle chart with exact point and frame maps.
#[derive(Clone, Debug)]
pub struct HandleChart {
    pub kind: HandleKind,
    pub n: usize,
    pub k: usize,
    pub profile: Option<Profile>,
    pub curve: Option<AdmissibleCurve>,
    pub e2: Option<E2Data>,
    /// Amplitude a of the deformation p_n ↦ p_n + a·sin(q₁).
    pub perturbation: f64,
}

/// Builds a handle chart of the given kind.
pub fn build_handle(kind: HandleKind, n: usize, k: usize, profile: &Profile, e2: Option<E2Data>) -> Result<HandleChart> {
    if n == 0 || k >= n {
        return Err(Error::InvalidParameter(format!("need 0 ≤ k < n, got n = {n}, k = {k}")));
    }
    let point = matches!(kind, HandleKind::PointCurve | HandleKind::PointFlow);
    if point && k != 0 {
        return Err(Error::InvalidParameter("point handles have k = 0".into()));
    }
    let e2 = match kind {
        HandleKind::E2 => {
            let d = e2.ok_or_else(|| Error::InvalidParameter("E2 handle needs e2 data".into()))?;
            if d.m0.shape() != (k, n - k) {
                return Err(Error::InvalidParameter(format!("e2 data is {:?}, expected ({k}, {})", d.m0.shape(), n - k)));
            }
            Some(d)
        }
        _ => {
            if e2.is_some() {
                return Err(Error::InvalidParameter("e2 data given for a non-E2 handle".into()));
            }
            None
        }
    };
    let curve = if kind == HandleKind::PointCurve { Some(curve_from_profile(profile)?) } else { None };
    Ok(HandleChart { kind, n, k, profile: Some(profile.clone()), curve, e2, perturbation: 0.0 })
}

/// Point handle H_γ = {γ(s)x} from an admissible curve.
pub fn build_curve_handle(n: usize, curve: &AdmissibleCurve) -> Result<HandleChart> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(HandleChart { kind: HandleKind::PointCurve, n, k: 0, profile: None, curve: Some(curve.clone()), e2: None, perturbation: 0.0 })
}

/// The zero section of T*ℝⁿ as a chart.
pub fn zero_section(n: usize) -> HandleChart {
    HandleChart { kind: HandleKind::ZeroSection, n, k: n, profile: None, curve: None, e2: None, perturbation: 0.0 }
}

/// Orthonormal basis of x^⊥ from a Householder reflection.
fn sphere_tangents(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = x.iter().map(|xi| sign * xi).collect::<Vec<_>>();
    v[0] += 1.0;
    let vv: f64 = v.iter().map(|a| a * a).sum();
    (1..n).map(|j| (0..n).map(|i| f64::from(u8::from(i == j)) - 2.0 * v[i] * v[j] / vv).collect()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl HandleChart {
    /// Same chart with p_n deformed by a·sin(q₁); not Lagrangian for a ≠ 0, n ≥ 2.
    pub fn perturbed(&self, amplitude: f64) -> Self {
        Self { perturbation: amplitude, ..self.clone() }
    }

    /// Number of chart parameters.
    pub fn param_dim(&self) -> usize {
        match self.kind {
            HandleKind::PointCurve => self.n + 1,
            _ => self.n,
        }
    }

    fn eps(&self) -> f64 {
        match (&self.profile, &self.curve) {
            (Some(p), _) => p.eps,
            (None, Some(c)) => c.eps,
            _ => 1.0,
        }
    }

    fn flow_parts(&self, params: &[f64]) -> (Vec<Complex64>, CMat) {
        let (n, k) = (self.n, self.k);
        let nu = self.profile.as_ref().expect("flow handle has a profile");
        let q_b = &params[..k];
        let p_f = &params[k..n];
        let rho = norm(p_f);
        let (v, dv) = nu.value_deriv(rho);
        let u: Vec<f64> = p_f.iter().map(|x| x / rho).collect();
        let f = n - k;
        // G = ν′uuᵀ + (ν/ρ)(I − uuᵀ), the Jacobian of p ↦ ν(|p|)p/|p|.
        let g = DMatrix::from_fn(f, f, |i, j| {
            let uu = u[i] * u[j];
            dv * uu + v / rho * (f64::from(u8::from(i == j)) - uu)
        });
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        let mut frame = CMat::zeros(n, n);
        let (qf_d, m) = match &self.e2 {
            Some(d) => (d.q_f(q_b), Some(d.m_at(q_b))),
            None => (vec![0.0; f], None),
        };
        let p_b = match &m {
            Some(m) => m * DVector::from_column_slice(p_f),
            None => DVector::zeros(k),
        };
        for i in 0..k {
            z[i] = Complex64::new(q_b[i], -p_b[i]);
        }
        for i in 0..f {
            z[k + i] = Complex64::new(qf_d[i] + v * u[i], -p_f[i]);
        }
        for j in 0..k {
            frame[(j, j)] = Complex64::new(1.0, 0.0);
            if let Some(d) = &self.e2 {
                for i in 0..k {
                    let dp: f64 = (0..f).map(|mm| d.hess[mm][(i, j)] * p_f[mm]).sum();
                    frame[(i, j)] -= I * dp;
                }
                let qb = DVector::from_column_slice(q_b);
                for mm in 0..f {
                    let dq = -d.m0[(j, mm)] - (&d.hess[mm] * &qb)[j];
                    frame[(k + mm, j)] += Complex64::new(dq, 0.0);
                }
            }
        }
        for mm in 0..f {
            let col = k + mm;
            if let Some(m) = &m {
                for i in 0..k {
                    frame[(i, col)] = -I * m[(i, mm)];
                }
            }
            for i in 0..f {
                frame[(k + i, col)] = Complex64::new(g[(i, mm)], 0.0);
            }
            frame[(k + mm, col)] -= I;
        }
        (z, frame)
    }

    fn raw(&self, params: &[f64]) -> (Vec<Complex64>, CMat) {
        let n = self.n;
        match self.kind {
            HandleKind::ZeroSection => (params.iter().map(|&q| Complex64::new(q, 0.0)).collect(), CMat::identity(n, n)),
            HandleKind::PointCurve => {
                let c = self.curve.as_ref().expect("curve handle has a curve");
                let s = params[0];
                let w = &params[1..];
                let len = norm(w);
                let x: Vec<f64> = w.iter().map(|a| a / len).collect();
                let pt = c.eval(s);
                let gamma = Complex64::new(pt.a, pt.b);
                let dgamma = Complex64::new(pt.da, pt.db);
                let z = x.iter().map(|&xi| gamma * xi).collect();
                let mut frame = CMat::zeros(n, n);
                for i in 0..n {
                    frame[(i, 0)] = dgamma * x[i];
                }
                for (j, t) in sphere_tangents(&x).into_iter().enumerate() {
                    for i in 0..n {
                        frame[(i, j + 1)] = gamma * t[i];
                    }
                }
                (z, frame)
            }
            HandleKind::PointFlow | HandleKind::Clean | HandleKind::E2 => self.flow_parts(params),
        }
    }

    /// Point in ℂⁿ at the given parameters.
    pub fn point(&self, params: &[f64]) -> Vec<Complex64> {
        let (mut z, _) = self.raw(params);
        if self.perturbation != 0.0 {
            let q1 = z[0].re;
            z[self.n - 1] -= I * (self.perturbation * q1.sin());
        }
        z
    }

    /// Tangent frame (columns) at the given parameters.
    pub fn frame(&self, params: &[f64]) -> CMat {
        let (z, mut frame) = self.raw(params);
        if self.perturbation != 0.0 {
            let c = self.perturbation * z[0].re.cos();
            for j in 0..self.n {
                let dq1 = frame[(0, j)].re;
                frame[(self.n - 1, j)] -= I * (c * dq1);
            }
        }
        frame
    }

    /// Maps a point of [0,1)^d to chart parameters covering the handle
    /// region and a collar of its seams.
    pub fn sample_params(&self, u: &[f64]) -> Vec<f64> {
        let eps = self.eps();
        match self.kind {
            HandleKind::ZeroSection => u.iter().map(|x| 2.0 * x - 1.0).collect(),
            HandleKind::PointCurve => {
                let mut out = vec![eps * (1.4 * u[0] - 0.2)];
                out.extend(u[1..].iter().map(|x| 2.0 * x - 1.0));
                if norm(&out[1..]) < 1e-3 {
                    out[1] = 1.0;
                }
                out
            }
            _ => {
                let mut out: Vec<f64> = u[..self.k].iter().map(|x| 2.0 * x - 1.0).collect();
                let f: Vec<f64> = u[self.k..].iter().map(|x| 1.2 * eps * (2.0 * x - 1.0)).collect();
                let len = norm(&f);
                if len < 1e-6 * eps {
                    let mut g = vec![0.0; f.len()];
                    g[0] = 0.5 * eps;
                    out.extend(g);
                } else {
                    out.extend(f);
                }
                out
            }
        }
    }
}

/// Maximum of |ω(e_i, e_j)| over frames at `samples` low-discrepancy points.
pub fn lagrangian_check(chart: &HandleChart, samples: usize, seed: u64) -> f64 {
    let h = Halton::new(chart.param_dim(), seed);
    let mut worst = 0.0f64;
    for s in 0..samples {
        let params = chart.sample_params(&h.point(s as u64));
        let frame = chart.frame(&params);
        let cols: Vec<Vec<Complex64>> = (0..chart.n).map(|j| frame.column(j).iter().copied().collect()).collect();
        for i in 0..chart.n {
            for j in (i + 1)..chart.n {
                worst = worst.max(omega(&cols[i], &cols[j]).abs());
            }
        }
    }
    worst
}

/// Continuous lift of θ along c(r) = (0, ν(r)e₁, p_b^D(0, re₁), re₁).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradingLift {
    pub theta_start: f64,
    pub theta_end: f64,
    /// Radius standing in for r = 0⁺.
    pub r0: f64,
    pub steps: usize,
    pub max_step_phase: f64,
}

fn det2_arg(chart: &HandleChart, r: f64) -> f64 {
    let mut params = vec![0.0; chart.n];
    params[chart.k] = r;
    let d = chart.frame(&params).determinant();
    2.0 * d.arg()
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

fn lift_chart(chart: &HandleChart, eps: f64) -> Result<GradingLift> {
    let (n, k) = (chart.n, chart.k);
    let anchor = n as f64 - k as f64 - 1.0;
    // Walk r toward 0 until Det² is within 1e−10 of its limit 1.
    let mut r0 = 1e-7 * eps;
    while wrap(det2_arg(chart, r0)).abs() / (2.0 * PI) > 1e-10 && r0 > 1e-250 * eps {
        r0 *= 0.1;
    }
    let mut phase = wrap(det2_arg(chart, r0));
    let theta_start = anchor + phase / (2.0 * PI);
    let (u0, u1) = (r0.ln(), eps.ln());
    let mut u = u0;
    let mut h = (u1 - u0) / 400.0;
    let mut steps = 0;
    let mut max_step = 0.0f64;
    let cap = PI / 4.0;
    let h_max = (u1 - u0) / 200.0;
    while u < u1 {
        let next = (u + h).min(u1);
        let mid = 0.5 * (u + next);
        let raw_mid = det2_arg(chart, mid.exp());
        let raw = det2_arg(chart, next.exp());
        let delta = wrap(raw - phase);
        // Step doubling: the two half steps must agree with the full step.
        let halves = wrap(raw_mid - phase) + wrap(raw - raw_mid);
        if delta.abs() > cap || (halves - delta).abs() > 1e-9 {
            h *= 0.5;
            if h < 1e-14 {
                return Err(Error::LiftFailure(format!("phase jump {delta} at r = {}", next.exp())));
            }
            continue;
        }
        phase += delta;
        max_step = max_step.max(delta.abs());
        u = next;
        steps += 1;
        if delta.abs() < cap / 8.0 {
            h = (h * 1.5).min(h_max);
        }
    }
    Ok(GradingLift { theta_start, theta_end: anchor + phase / (2.0 * PI), r0, steps, max_step_phase: max_step })
}

/// θ at r = 0⁺ and at r = ε along the clean handle, anchored to ℝⁿ graded n−k−1.
pub fn grading_along_handle(n: usize, k: usize, profile: &Profile) -> Result<GradingLift> {
    if profile.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("grading needs an admissible profile".into()));
    }
    let kind = if k == 0 { HandleKind::PointFlow } else { HandleKind::Clean };
    let chart = build_handle(kind, n, k, profile, None)?;
    lift_chart(&chart, profile.eps)
}

/// As `grading_along_handle` for the E₂ handle, with θ(ε) reduced by K(ε)/π.
pub fn e2_grading_along_handle(n: usize, k: usize, profile: &Profile, e2: &E2Data) -> Result<GradingLift> {
    if profile.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("grading needs an admissible profile".into()));
    }
    let chart = build_handle(HandleKind::E2, n, k, profile, Some(e2.clone()))?;
    let mut lift = lift_chart(&chart, profile.eps)?;
    let mut e = vec![0.0; n - k];
    e[0] = 1.0;
    lift.theta_end -= e2.k_correction(profile.eps, &e) / PI;
    Ok(lift)
}

/// Planar tangent-angle lift of the curve r ↦ ν(r) − ir, as θ endpoints
/// for n = 1 (θ = angle/π, anchored at 0).
pub fn planar_tangent_lift(profile: &Profile, samples: usize) -> (f64, f64) {
    let eps = profile.eps;
    let radii = crate::profiles::log_radii(eps, samples, -250.0f64.max((1e-300f64 / eps).log10()), 0.0);
    let ang = |r: f64| {
        let d = profile.deriv(r);
        (-1.0f64).atan2(d)
    };
    let start = ang(radii[0]);
    let mut prev = start;
    let mut acc = 0.0;
    for &r in &radii[1..] {
        let a = ang(r);
        acc += wrap(a - prev);
        prev = a;
    }
    // Tangent at r→0 is horizontal (angle ±π), giving θ = 0 for ℝ graded 0.
    let start_theta = wrap(2.0 * start) / (2.0 * PI);
    (start_theta, start_theta + acc / PI)
}

/// ∫₀^ε r ν′(r) dr and the by-parts value −∫₀^ε ν(r) dr.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandleEnergy {
    pub value: f64,
    pub by_parts: f64,
    pub error_estimate: f64,
}

fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> (f64, f64) {
    let cuts = 8;
    let mut total = 0.0;
    let mut err = 0.0;
    for j in 0..cuts {
        let lo = a + (b - a) * j as f64 / cuts as f64;
        let hi = a + (b - a) * (j + 1) as f64 / cuts as f64;
        let out = double_exponential::integrate(f, lo, hi, 1e-13);
        total += out.integral;
        err += out.error_estimate;
    }
    (total, err)
}

pub fn handle_energy(profile: &Profile) -> Result<HandleEnergy> {
    if profile.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("energy needs an admissible profile".into()));
    }
    let (value, e1) = integrate(|r| r * profile.deriv(r), 0.0, profile.eps);
    let (area, e2) = integrate(|r| profile.value(r), 0.0, profile.eps);
    Ok(HandleEnergy { value, by_parts: -area, error_estimate: e1 + e2 })
}

/// Primitive f_H(r) = f₂ + ∫_ε^r s ν′(s) ds along the handle.
pub fn handle_primitive(profile: &Profile, f2: f64, r: f64) -> f64 {
    if r >= profile.eps {
        return f2;
    }
    f2 - integrate(|s| s * profile.deriv(s), r, profile.eps).0
}

/// Glued primitive constants on L, the handle and the other branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluedPrimitive {
    /// Constant of the primitive on L after gluing, f_H(0⁺).
    pub f1: f64,
    pub f2: f64,
    /// f1_input − f1: the constant removed from L's primitive.
    pub shift: f64,
    pub seam_gap_l: f64,
    pub seam_gap_fiber: f64,
}

pub fn glue_primitives(f1: f64, profile: &Profile, f2: f64, n: usize, k: usize) -> Result<GluedPrimitive> {
    if k >= n {
        return Err(Error::InvalidParameter(format!("need k < n, got n = {n}, k = {k}")));
    }
    if k + 1 == n {
        return Err(Error::AmbiguousGluing(format!(
            "k = n − 1 = {k}: the seam sphere S⁰ is disconnected and the constants need not agree"
        )));
    }
    let e = handle_energy(profile)?;
    let glued_f1 = f2 - e.value;
    let r_small = profile.eps * 1e-12;
    let seam_gap_l = (handle_primitive(profile, f2, r_small) - glued_f1).abs();
    let seam_gap_fiber = (handle_primitive(profile, f2, profile.eps) - f2).abs();
    Ok(GluedPrimitive { f1: glued_f1, f2, shift: f1 - glued_f1, seam_gap_l, seam_gap_fiber })
}

/// Result of the perturbation-disjointness check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disjointness {
    /// Minimum over the sample grids.
    pub grid_min: f64,
    /// Minimum of the exact point-to-graph distance over the handle samples.
    pub exact_min: f64,
    /// Every sample has opposite signs of handle and graph p_f along its ray.
    pub sign_certificate: bool,
    pub samples: usize,
}

/// Distance between the clean handle and Graph(df), f = c·|q_f|².
pub fn perturbation_disjointness(c: f64, n: usize, k: usize, profile: &Profile, samples: usize, seed: u64) -> Result<Disjointness> {
    if !(c < 0.0) {
        return Err(Error::InvalidParameter(format!("c must be negative, got {c}")));
    }
    let kind = if k == 0 { HandleKind::PointFlow } else { HandleKind::Clean };
    let chart = build_handle(kind, n, k, profile, None)?;
    let f = n - k;
    let eps = profile.eps;
    let halton = Halton::new(f.max(1), seed);
    let t_max = 2.0 * (profile.lambda + eps);
    let graph_n = 1000;
    let mut grid_min = f64::INFINITY;
    let mut exact_min = f64::INFINITY;
    let mut certificate = true;
    for s in 0..samples {
        let u = halton.point(s as u64);
        // Radius in (0, 0.99ε], direction from the remaining coordinates.
        let rho = eps * (1e-3 + 0.989 * u[0]);
        let mut dir: Vec<f64> = if f == 1 {
            vec![if s % 2 == 0 { 1.0 } else { -1.0 }]
        } else {
            let mut d: Vec<f64> = (0..f).map(|i| (2.0 * PI * u[i]).cos() + 0.1 * i as f64).collect();
            d[0] += u[0] - 0.5;
            d
        };
        let len = norm(&dir);
        dir.iter_mut().for_each(|x| *x /= len);
        let mut params = vec![0.0; n];
        for i in 0..f {
            params[k + i] = rho * dir[i];
        }
        let z = chart.point(&params);
        let q: Vec<f64> = (k..n).map(|i| z[i].re).collect();
        let p: Vec<f64> = (k..n).map(|i| -z[i].im).collect();
        // Exact projection onto {(x, 2cx)}.
        let denom = 1.0 + 4.0 * c * c;
        let x: Vec<f64> = (0..f).map(|i| (q[i] + 2.0 * c * p[i]) / denom).collect();
        let d_exact = (0..f).map(|i| (q[i] - x[i]).powi(2) + (p[i] - 2.0 * c * x[i]).powi(2)).sum::<f64>().sqrt();
        exact_min = exact_min.min(d_exact);
        // Grid over the graph along the same ray.
        for j in 0..=graph_n {
            let t = -t_max + 2.0 * t_max * j as f64 / graph_n as f64;
            let d2: f64 = (0..f).map(|i| (q[i] - t * dir[i]).powi(2) + (p[i] - 2.0 * c * t * dir[i]).powi(2)).sum();
            grid_min = grid_min.min(d2.sqrt());
        }
        // Along the ray through q_f: handle p_f·dir = ρ > 0, graph p_f·dir = 2c ν < 0.
        let handle_pf: f64 = (0..f).map(|i| p[i] * dir[i]).sum();
        let graph_pf: f64 = (0..f).map(|i| 2.0 * c * q[i] * dir[i]).sum();
        if handle_pf.signum() * graph_pf.signum() != -1.0 || graph_pf == 0.0 {
            certificate = false;
        }
    }
    Ok(Disjointness { grid_min, exact_min, sign_certificate: certificate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_admissible, AdmissibleCurve};
    use crate::symplectic_linalg::{index, index_rn_nrk_pair};
    use rand::Rng;

    fn nu() -> Profile {
        make_admissible(1.0, 0.5).unwrap()
    }

    #[test]
    fn point_flow_n1_matches_curve() {
        let p = nu();
        let chart = build_handle(HandleKind::PointFlow, 1, 0, &p, None).unwrap();
        let c = crate::profiles::curve_from_profile(&p).unwrap();
        for j in 1..200 {
            let r = 0.5 * j as f64 / 200.0;
            let z = chart.point(&[r]);
            assert_eq!(z[0], Complex64::new(p.value(r), -r));
            // The curve through the same point.
            let q = crate::profiles::profile_from_curve(&c).unwrap();
            assert!((q.value(r) - z[0].re).abs() < 1e-8);
            let zm = chart.point(&[-r]);
            assert_eq!(zm[0], Complex64::new(-p.value(r), r));
        }
    }

    #[test]
    fn curve_handle_equals_flow_handle() {
        let p = nu();
        let flow = build_handle(HandleKind::PointFlow, 3, 0, &p, None).unwrap();
        let curve = build_handle(HandleKind::PointCurve, 3, 0, &p, None).unwrap();
        let c = curve.curve.as_ref().unwrap();
        for j in 1..50 {
            let s = 0.5 * j as f64 / 50.0;
            let pt = c.eval(s);
            let x = [0.6, 0.0, 0.8];
            let zc = curve.point(&[s, x[0], x[1], x[2]]);
            let r = -pt.b;
            let zf = flow.point(&[r * x[0], r * x[1], r * x[2]]);
            for i in 0..3 {
                assert!((zc[i] - zf[i]).norm() < 1e-8, "s = {s}");
            }
        }
    }

    #[test]
    fn degeneration_chain() {
        let p = nu();
        let mut rng = crate::sampling::rng(1);
        let flow = build_handle(HandleKind::PointFlow, 3, 0, &p, None).unwrap();
        let clean0 = build_handle(HandleKind::Clean, 3, 0, &p, None).unwrap();
        let clean = build_handle(HandleKind::Clean, 3, 1, &p, None).unwrap();
        let e2 = build_handle(HandleKind::E2, 3, 1, &p, Some(E2Data::zero(3, 1))).unwrap();
        for _ in 0..100 {
            let params: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.6..0.6)).collect();
            let (a, b) = (flow.point(&params), clean0.point(&params));
            assert_eq!(a, b);
            assert_eq!(flow.frame(&params), clean0.frame(&params));
            let (c, d) = (clean.point(&params), e2.point(&params));
            for i in 0..3 {
                assert!((c[i] - d[i]).norm() <= 1e-12);
            }
            assert!((clean.frame(&params) - e2.frame(&params)).camax() <= 1e-12);
        }
    }

    #[test]
    fn frames_match_finite_differences() {
        let p = make_admissible(1.2, 0.6).unwrap();
        let m0 = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.4]);
        let h = vec![DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, -0.3]), DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.7])];
        let charts = vec![
            build_handle(HandleKind::PointFlow, 3, 0, &p, None).unwrap(),
            build_handle(HandleKind::Clean, 4, 2, &p, None).unwrap(),
            build_handle(HandleKind::E2, 4, 2, &p, Some(E2Data::new(m0, h).unwrap())).unwrap(),
            build_handle(HandleKind::Clean, 3, 1, &p, None).unwrap().perturbed(1e-2),
        ];
        for chart in charts {
            let params: Vec<f64> = (0..chart.n).map(|i| 0.11 + 0.07 * i as f64).collect();
            let frame = chart.frame(&params);
            for j in 0..chart.n {
                let h = 1e-6;
                let mut a = params.clone();
                let mut b = params.clone();
                a[j] += h;
                b[j] -= h;
                let (za, zb) = (chart.point(&a), chart.point(&b));
                for i in 0..chart.n {
                    let fd = (za[i] - zb[i]) / (2.0 * h);
                    assert!((fd - frame[(i, j)]).norm() < 1e-6, "{:?} col {j} row {i}", chart.kind);
                }
            }
        }
    }

    #[test]
    fn lagrangian_on_all_kinds() {
        let p = nu();
        for n in 1..=6 {
            for k in 0..n {
                let clean = build_handle(HandleKind::Clean, n, k, &p, None).unwrap();
                assert!(lagrangian_check(&clean, 200, 0) < TAU_OMEGA);
                let mut rng = crate::sampling::rng((n * 10 + k) as u64);
                let m0 = DMatrix::from_fn(k, n - k, |_, _| rng.gen_range(-1.0..1.0));
                let hess = (0..n - k)
                    .map(|_| {
                        let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
                        &a + a.transpose()
                    })
                    .collect();
                let e2 = build_handle(HandleKind::E2, n, k, &p, Some(E2Data::new(m0, hess).unwrap())).unwrap();
                assert!(lagrangian_check(&e2, 200, 0) < TAU_OMEGA);
            }
            let point = build_handle(HandleKind::PointCurve, n, 0, &p, None).unwrap();
            assert!(lagrangian_check(&point, 200, 0) < TAU_OMEGA);
        }
    }

    #[test]
    fn lagrangian_negative_control_and_zero_section() {
        let p = nu();
        let broken = build_handle(HandleKind::Clean, 2, 1, &p, None).unwrap().perturbed(1e-2);
        assert!(lagrangian_check(&broken, 1000, 0) > 1e-3);
        assert_eq!(lagrangian_check(&zero_section(4), 1000, 0), 0.0);
    }

    #[test]
    fn grading_endpoints() {
        let p = nu();
        for (n, k, start, end) in [(2, 0, 1.0, 1.0), (5, 2, 2.0, 1.5), (1, 0, 0.0, 0.5)] {
            let g = grading_along_handle(n, k, &p).unwrap();
            assert!((g.theta_start - start).abs() < TAU_THETA, "{n},{k}: {g:?}");
            assert!((g.theta_end - end).abs() < TAU_THETA, "{n},{k}: {g:?}");
            assert!(g.max_step_phase <= PI / 4.0);
        }
    }

    #[test]
    fn grading_planar_oracle() {
        let p = nu();
        let g = grading_along_handle(1, 0, &p).unwrap();
        let (a, b) = planar_tangent_lift(&p, 20000);
        assert!((g.theta_start - a).abs() < TAU_THETA, "{g:?} {a} {b}");
        assert!((g.theta_end - b).abs() < TAU_THETA, "{g:?} {a} {b}");
    }

    #[test]
    fn grading_all_dims_and_index_consistency() {
        let p = make_admissible(0.8, 0.4).unwrap();
        for n in 1..=6 {
            for k in 0..n {
                let g = grading_along_handle(n, k, &p).unwrap();
                assert!((g.theta_start - (n - k - 1) as f64).abs() < TAU_THETA);
                assert!((g.theta_end - (n - k) as f64 / 2.0).abs() < TAU_THETA);
                let (l1, l2) = index_rn_nrk_pair(n, k).unwrap();
                assert_eq!(index(&l1, &l2).unwrap().rounded, (k + 1) as i64);
            }
        }
    }

    #[test]
    fn e2_grading() {
        let p = nu();
        let zero = e2_grading_along_handle(3, 1, &p, &E2Data::zero(3, 1)).unwrap();
        let clean = grading_along_handle(3, 1, &p).unwrap();
        assert_eq!(zero, clean);
        let lin = E2Data::linear(DMatrix::from_element(1, 1, 0.3));
        let g = e2_grading_along_handle(2, 1, &p, &lin).unwrap();
        assert!((g.theta_start - 0.0).abs() < TAU_THETA && (g.theta_end - 0.5).abs() < TAU_THETA, "{g:?}");
        let mut rng = crate::sampling::rng(5);
        for _ in 0..10 {
            let (n, k) = (4, 2);
            let m0 = DMatrix::from_fn(k, n - k, |_, _| rng.gen_range(-1.0..1.0));
            let g = e2_grading_along_handle(n, k, &p, &E2Data::linear(m0)).unwrap();
            assert!((g.theta_start - 1.0).abs() < TAU_THETA && (g.theta_end - 1.0).abs() < TAU_THETA, "{g:?}");
        }
        // Curved D: κ ≠ 0 and the K-correction is needed.
        for &h in &[0.7, -1.3, 3.0] {
            let d = E2Data::new(DMatrix::zeros(1, 1), vec![DMatrix::from_element(1, 1, h)]).unwrap();
            let kc = d.k_correction(p.eps, &[1.0]);
            assert!((kc - Complex64::new(1.0, -h * p.eps).arg()).abs() < 1e-14);
            let g = e2_grading_along_handle(2, 1, &p, &d).unwrap();
            assert!((g.theta_end - 0.5).abs() < TAU_THETA, "{g:?}");
            assert!(kc.abs() > 0.1);
        }
        // Curved and tilted together.
        let d = E2Data::new(
            DMatrix::from_row_slice(2, 2, &[0.4, -0.3, 0.2, 0.9]),
            vec![DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -2.0]), DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.8])],
        )
        .unwrap();
        let g = e2_grading_along_handle(4, 2, &p, &d).unwrap();
        assert!((g.theta_start - 1.0).abs() < TAU_THETA && (g.theta_end - 1.0).abs() < TAU_THETA, "{g:?}");
    }

    #[test]
    fn energy_sign_parts_and_scaling() {
        let p = nu();
        let e = handle_energy(&p).unwrap();
        assert!(e.value < 0.0);
        assert!((e.value - e.by_parts).abs() < 1e-7);
        assert!(e.error_estimate < 1e-9);
        let e2 = handle_energy(&make_admissible(2.0, 0.5).unwrap()).unwrap();
        assert!((e2.value.abs() - 2.0 * e.value.abs()).abs() < 1e-6);
    }

    #[test]
    fn primitives() {
        let p = nu();
        let e = handle_energy(&p).unwrap().value;
        let g = glue_primitives(0.0, &p, 0.0, 3, 0).unwrap();
        assert!((g.shift - e).abs() < 1e-12);
        assert!(g.seam_gap_l < 1e-8 && g.seam_gap_fiber < 1e-8);
        let c = 2.5;
        let h = glue_primitives(0.0, &p, c, 3, 0).unwrap();
        assert!((h.f1 - (g.f1 + c)).abs() < 1e-12 && (h.f2 - (g.f2 + c)).abs() < 1e-12);
        assert!(matches!(glue_primitives(0.0, &p, 0.0, 2, 1), Err(Error::AmbiguousGluing(_))));
    }

    #[test]
    fn disjointness() {
        let p = make_admissible(0.3, 0.5).unwrap();
        let d = perturbation_disjointness(-0.05, 2, 1, &p, 10_000, 0).unwrap();
        assert!(d.grid_min > 1e-3 && d.exact_min > 1e-3);
        assert!(d.sign_certificate);
        assert!(d.grid_min >= d.exact_min - 1e-12);
        let mut prev = f64::INFINITY;
        for c in [-0.2, -0.1, -0.05] {
            let d = perturbation_disjointness(c, 2, 1, &p, 2000, 0).unwrap();
            assert!(d.grid_min < prev);
            prev = d.grid_min;
        }
        assert!(matches!(perturbation_disjointness(0.0, 2, 1, &p, 10, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn straight_curve_handle_is_lagrangian() {
        let c = AdmissibleCurve::straight(1.0, 0.5).unwrap();
        let chart = build_curve_handle(4, &c).unwrap();
        assert!(lagrangian_check(&chart, 500, 3) < TAU_OMEGA);
    }
}
