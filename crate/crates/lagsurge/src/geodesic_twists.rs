//! Normalized geodesic flows on Sⁿ, ℝPⁿ and ℂPⁿ, model Dehn twists and the
//! sampled surgery-equals-twist coincidence checks.
//!
//! Points of ℝPⁿ and ℂPⁿ are stored through their lift to the unit sphere;
//! the metric is scaled so that every closed geodesic has length 2π, which
//! makes the lifted great circle advance by half the flow time.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::{make_dehn_spherical, make_semi_admissible, profile_scaled, profile_sum, Profile, ProfileKind};
use crate::sampling::rng;

type CVec = Vec<Complex64>;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    Sphere(usize),
    RealProj(usize),
    ComplexProj(usize),
}

impl Model {
    pub fn n(&self) -> usize {
        match *self {
            Model::Sphere(n) | Model::RealProj(n) | Model::ComplexProj(n) => n,
        }
    }

    /// Dimension of the lifting sphere's ambient space (real or complex).
    pub fn ambient(&self) -> usize {
        self.n() + 1
    }

    /// Lifted great-circle angle per unit flow time.
    pub fn angle_rate(&self) -> f64 {
        match self {
            Model::Sphere(_) => 1.0,
            _ => 0.5,
        }
    }

    pub fn is_projective(&self) -> bool {
        !matches!(self, Model::Sphere(_))
    }

    /// Parses `sphere:2`, `rp:3` or `cp:1`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, n) = s.split_once(':').ok_or_else(|| Error::Schema(format!("model '{s}' lacks ':'")))?;
        let n: usize = n.parse().map_err(|_| Error::Schema(format!("bad dimension in '{s}'")))?;
        if n == 0 {
            return Err(Error::Schema("model dimension must be positive".into()));
        }
        match kind {
            "sphere" => Ok(Model::Sphere(n)),
            "rp" => Ok(Model::RealProj(n)),
            "cp" => Ok(Model::ComplexProj(n)),
            _ => Err(Error::Schema(format!("unknown model '{kind}'"))),
        }
    }
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(a: f64, x: &[Complex64], b: f64, y: &[Complex64]) -> CVec {
    x.iter().zip(y).map(|(p, q)| p * a + q * b).collect()
}

/// A covector on one of the models, stored as (base, horizontal vector).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CotangentPoint {
    pub model: Model,
    pub base: CVec,
    pub covector: CVec,
}

impl CotangentPoint {
    /// Validates and canonicalizes a point.
    pub fn new(model: Model, base: CVec, covector: CVec) -> Result<Self> {
        let m = model.ambient();
        if base.len() != m || covector.len() != m {
            return Err(Error::InvalidParameter(format!("expected vectors of length {m}")));
        }
        if !matches!(model, Model::ComplexProj(_)) && base.iter().chain(&covector).any(|z| z.im != 0.0) {
            return Err(Error::InvalidParameter("real model with complex coordinates".into()));
        }
        if (vnorm(&base) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("base is not a unit vector".into()));
        }
        let pair = dot(&base, &covector);
        let bad = match model {
            Model::ComplexProj(_) => pair.norm(),
            _ => pair.re.abs(),
        };
        if bad > 1e-12 * (1.0 + vnorm(&covector)) {
            return Err(Error::InvalidParameter("covector is not orthogonal to the base".into()));
        }
        Ok(Self { model, base, covector }.canonical())
    }

    fn raw(model: Model, base: CVec, covector: CVec) -> Self {
        Self { model, base, covector }.canonical()
    }

    /// First nonzero base coordinate made positive real (projective models).
    pub fn canonical(mut self) -> Self {
        if !self.model.is_projective() {
            return self;
        }
        let idx = self.base.iter().position(|z| z.norm() > 1e-12).unwrap_or(0);
        let z = self.base[idx];
        let phase = match self.model {
            Model::ComplexProj(_) => z.conj() / z.norm(),
            _ => Complex64::new(z.re.signum(), 0.0),
        };
        for v in self.base.iter_mut().chain(self.covector.iter_mut()) {
            *v *= phase;
        }
        self
    }

    /// ‖ξ‖ in the normalized metric.
    pub fn norm(&self) -> f64 {
        vnorm(&self.covector)
    }

    /// Distance between two points of the same model, minimized over the
    /// lift ambiguity.
    pub fn distance(&self, other: &CotangentPoint) -> f64 {
        let a: CVec = self.base.iter().chain(&self.covector).copied().collect();
        let b: CVec = other.base.iter().chain(&other.covector).copied().collect();
        let direct = |phase: Complex64| a.iter().zip(&b).map(|(x, y)| (x * phase - y).norm_sqr()).sum::<f64>().sqrt();
        match self.model {
            Model::Sphere(_) => direct(Complex64::new(1.0, 0.0)),
            Model::RealProj(_) => direct(Complex64::new(1.0, 0.0)).min(direct(Complex64::new(-1.0, 0.0))),
            Model::ComplexProj(_) => {
                let ip = dot(&a, &b);
                let phase = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
                direct(phase)
            }
        }
    }
}

/// Normalized Riemannian distance between base points.
pub fn base_distance(model: Model, x: &[Complex64], y: &[Complex64]) -> f64 {
    let ip = dot(x, y);
    match model {
        Model::Sphere(_) => ip.re.clamp(-1.0, 1.0).acos(),
        Model::RealProj(_) => 2.0 * ip.re.abs().min(1.0).acos(),
        Model::ComplexProj(_) => 2.0 * ip.norm().min(1.0).acos(),
    }
}

/// A random point with ‖ξ‖ uniform in [0, max_norm).
pub fn random_point<R: Rng>(model: Model, max_norm: f64, rng: &mut R) -> CotangentPoint {
    let m = model.ambient();
    let complex = matches!(model, Model::ComplexProj(_));
    let draw = |rng: &mut R| -> CVec {
        (0..m)
            .map(|_| {
                let re: f64 = rng.gen_range(-1.0..1.0);
                let im: f64 = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
                Complex64::new(re, im)
            })
            .collect()
    };
    let mut x = draw(rng);
    let nx = vnorm(&x);
    x.iter_mut().for_each(|z| *z /= nx);
    let mut v = draw(rng);
    let pr = dot(&x, &v);
    let pr = if complex { pr } else { Complex64::new(pr.re, 0.0) };
    for (vi, xi) in v.iter_mut().zip(&x) {
        *vi -= xi * pr;
    }
    let nv = vnorm(&v);
    let r = rng.gen_range(0.0..max_norm);
    v.iter_mut().for_each(|z| *z *= r / nv);
    CotangentPoint::raw(model, x, v)
}

/// Point with base x and covector r·u for a unit horizontal u.
pub fn fiber_point(model: Model, x: &[Complex64], u: &[Complex64], r: f64) -> CotangentPoint {
    CotangentPoint::raw(model, x.to_vec(), u.iter().map(|z| z * r).collect())
}

/// Flow for time t along the unit-speed geodesic in the covector direction.
pub fn geodesic_flow(pt: &CotangentPoint, t: f64) -> Result<CotangentPoint> {
    let r = pt.norm();
    if r == 0.0 {
        return Err(Error::ZeroCovector);
    }
    let a = pt.model.angle_rate() * t;
    let (s, c) = a.sin_cos();
    let u: CVec = pt.covector.iter().map(|z| z / r).collect();
    let base = axpy(c, &pt.base, s, &u);
    let cov = axpy(-s * r, &pt.base, c * r, &u);
    Ok(CotangentPoint::raw(pt.model, base, cov))
}

/// A model Dehn twist τ(ξ) = φ_{ν(‖ξ‖)}(ξ).
#[derive(Clone, Debug)]
pub struct TwistModel {
    pub model: Model,
    pub profile: Profile,
}

impl TwistModel {
    /// Spherical models take profiles with ν(0) = π; projective models take
    /// 2π-type profiles.
    pub fn new(model: Model, profile: Profile) -> Result<Self> {
        let want = if model.is_projective() { 2.0 * PI } else { PI };
        if profile.kind == ProfileKind::Admissible || (profile.lambda - want).abs() > 1e-12 {
            return Err(Error::ProfileMismatch(format!(
                "{model:?} needs a profile with ν(0) = {want}, got {:?} with ν(0) = {}",
                profile.kind, profile.lambda
            )));
        }
        Ok(Self { model, profile })
    }
}

/// The model twist; zero covectors go to the antipode (sphere) or stay fixed.
pub fn dehn_twist(tm: &TwistModel, pt: &CotangentPoint) -> CotangentPoint {
    let r = pt.norm();
    if r == 0.0 {
        return if tm.model.is_projective() {
            pt.clone()
        } else {
            CotangentPoint::raw(pt.model, pt.base.iter().map(|z| -z).collect(), pt.covector.clone())
        };
    }
    let t = tm.profile.value(r);
    if t == 0.0 {
        return pt.clone();
    }
    geodesic_flow(pt, t).expect("nonzero covector")
}

/// Inverse of the model twist, by the backward profile flow.
pub fn inverse_twist(tm: &TwistModel, pt: &CotangentPoint) -> CotangentPoint {
    let r = pt.norm();
    if r == 0.0 {
        return dehn_twist(tm, pt);
    }
    geodesic_flow(pt, -tm.profile.value(r)).expect("nonzero covector")
}

/// Rotation by angle a in the real plane spanned by orthonormal x, u,
/// applied to a vector: the matrix route to the great-circle flow.
fn plane_rotation(x: &[f64], u: &[f64], a: f64, v: &[f64]) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    let vx: f64 = x.iter().zip(v).map(|(p, q)| p * q).sum();
    let vu: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
    (0..v.len()).map(|i| v[i] + (c - 1.0) * (vx * x[i] + vu * u[i]) + s * (vx * u[i] - vu * x[i])).collect()
}

fn real_part(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).collect()
}

fn complexify(v: &[f64]) -> CVec {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

/// Fiber-surgery versus twist comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberSurgeryReport {
    /// Max distance between the surgery and twist samples with r ≥ δ.
    pub deviation: f64,
    /// Both sides are graphs over a ball around the antipode for r < δ.
    pub inner_graph: bool,
    pub samples: usize,
}

fn unit_tangent_samples(n: usize, x: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng(seed);
    (0..count)
        .map(|_| {
            let mut v: Vec<f64> = (0..=n).map(|_| g.gen_range(-1.0..1.0)).collect();
            let pr: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(x).for_each(|(a, b)| *a -= pr * b);
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= nv);
            v
        })
        .collect()
}

/// Deviation between Sⁿ #ₓ F_x built with `admissible` and τ(F_x) built with
/// `dehn`, over fiber radii r ≥ δ; no agreement precheck.
pub fn fiber_deviation(
    n: usize,
    x: &[f64],
    dehn: &Profile,
    admissible: &Profile,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<FiberSurgeryReport> {
    let model = Model::Sphere(n);
    let tm = TwistModel::new(model, dehn.clone())?;
    let xc = complexify(x);
    let dirs = unit_tangent_samples(n, x, samples, seed);
    let eps = dehn.eps.max(admissible.eps);
    let mut dev = 0.0f64;
    let mut inner_graph = true;
    let antipode: Vec<f64> = x.iter().map(|a| -a).collect();
    for (i, u) in dirs.iter().enumerate() {
        let frac = (i as f64 + 0.5) / samples as f64;
        let r = delta + (1.2 * eps - delta) * frac;
        // Surgery side: the flow handle through the matrix rotation route.
        let t = admissible.value(r);
        let hb = plane_rotation(x, u, t, x);
        let hc: Vec<f64> = plane_rotation(x, u, t, u).iter().map(|a| a * r).collect();
        let handle = CotangentPoint::raw(model, complexify(&hb), complexify(&hc));
        let twist = dehn_twist(&tm, &fiber_point(model, &xc, &complexify(u), r));
        dev = dev.max(handle.distance(&twist));
        // Inside r < δ: distance to the antipode grows strictly with r.
        let mut prev = -1.0;
        for j in 1..=20 {
            let r_in = delta * j as f64 / 21.0;
            let a = plane_rotation(x, u, admissible.value(r_in), x);
            let b = real_part(&dehn_twist(&tm, &fiber_point(model, &xc, &complexify(u), r_in)).base);
            let da = base_distance(model, &complexify(&a), &complexify(&antipode));
            let db = base_distance(model, &complexify(&b), &complexify(&antipode));
            if !(da > prev) || da > delta + 1e-9 || db > delta + 1e-9 {
                inner_graph = false;
            }
            prev = da;
        }
    }
    Ok(FiberSurgeryReport { deviation: dev, inner_graph, samples })
}

/// As `fiber_deviation`, after checking the two profiles agree for r ≥ δ.
pub fn surgery_vs_twist_fiber(
    n: usize,
    x: &[f64],
    dehn: &Profile,
    admissible: &Profile,
    delta: f64,
    samples: usize,
    seed: u64,
) -> Result<FiberSurgeryReport> {
    let top = dehn.eps.max(admissible.eps) * 1.2;
    for j in 0..=1000 {
        let r = delta + (top - delta) * j as f64 / 1000.0;
        if (dehn.value(r) - admissible.value(r)).abs() > 1e-12 {
            return Err(Error::ProfileMismatch(format!("profiles differ at r = {r}")));
        }
    }
    fiber_deviation(n, x, dehn, admissible, delta, samples, seed)
}

/// ℝPⁿ twist through the double cover: lift, τ_{Sⁿ}, push forward.
/// `lift_sign` chooses between the two lifts (x, 2w) and (−x, −2w).
pub fn rp_double_cover_twist(spherical: &TwistModel, pt: &CotangentPoint, lift_sign: f64) -> Result<CotangentPoint> {
    let n = pt.model.n();
    if pt.model != Model::RealProj(n) || spherical.model != Model::Sphere(n) {
        return Err(Error::InvalidParameter("need an ℝPⁿ point and an Sⁿ twist".into()));
    }
    let base: CVec = pt.base.iter().map(|z| z * lift_sign).collect();
    let cov: CVec = pt.covector.iter().map(|z| z * (2.0 * lift_sign)).collect();
    let up = dehn_twist(spherical, &CotangentPoint::raw(Model::Sphere(n), base, cov));
    Ok(CotangentPoint::raw(pt.model, up.base, up.covector.iter().map(|z| z * 0.5).collect()))
}

/// Graph comparison on Sⁿ × Sⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphTwistReport {
    pub deviation: f64,
    pub samples: usize,
}

/// E₂-flow image {(p, φ_{ν(‖p‖)}(p))} of the diagonal versus the twist graph
/// {(p, τ(p))} of the Dehn model.
pub fn graph_twist_check(n: usize, profile: &Profile, dehn: &Profile, samples: usize, seed: u64) -> Result<GraphTwistReport> {
    if profile.kind == ProfileKind::Admissible || (profile.lambda - PI).abs() > 1e-12 {
        return Err(Error::ProfileMismatch("graph check needs a semi-admissible profile with ν(0) = π".into()));
    }
    let model = Model::Sphere(n);
    let tm = TwistModel::new(model, dehn.clone())?;
    let mut g = rng(seed);
    let mut dev = 0.0f64;
    let eps = profile.eps.max(dehn.eps);
    for _ in 0..samples {
        let p = random_point(model, 1.2 * eps, &mut g);
        let x = real_part(&p.base);
        let r = p.norm();
        let second = if r == 0.0 {
            CotangentPoint::raw(model, p.base.iter().map(|z| -z).collect(), p.covector.clone())
        } else {
            let u: Vec<f64> = real_part(&p.covector).iter().map(|a| a / r).collect();
            let t = profile.value(r);
            let b = plane_rotation(&x, &u, t, &x);
            let c: Vec<f64> = plane_rotation(&x, &u, t, &u).iter().map(|a| a * r).collect();
            CotangentPoint::raw(model, complexify(&b), complexify(&c))
        };
        let twist = dehn_twist(&tm, &p);
        dev = dev.max(second.distance(&twist));
    }
    Ok(GraphTwistReport { deviation: dev, samples })
}

/// Sampled orbit of a rescaled geodesic lift on ℂPⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotatedLagrangianReport {
    pub max_omega: f64,
    pub samples: usize,
    /// Parameters t₀ < π with f(t₀) = −f(2π − t₀).
    pub immersed_params: Vec<f64>,
    /// Distance in T*ℂPⁿ between the two orbit points that meet at each t₀.
    pub self_intersection_gaps: Vec<f64>,
}

/// Point (γ(t), f(t)γ′(t)) of the orbit through the horizontal unit w.
fn orbit_point(e0: &[Complex64], w: &[Complex64], t: f64, f: f64) -> (CVec, CVec) {
    let (s, c) = (t / 2.0).sin_cos();
    (axpy(c, e0, s, w), axpy(-s * f, e0, c * f, w))
}

/// Orbit of c(t) = (γ(t), f(t)γ′(t)) under the stabilizer of x₀ = [e₀];
/// `f` returns (f(t), f′(t)).
pub fn rotated_lagrangian(n: usize, f: &dyn Fn(f64) -> (f64, f64), samples: usize, seed: u64) -> Result<RotatedLagrangianReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let (f0, _) = f(0.0);
    let (fpi, _) = f(PI);
    let (f2pi, _) = f(2.0 * PI);
    if !(f0 > 0.0) {
        return Err(Error::InvalidLift(format!("f(0) = {f0} is not positive")));
    }
    if fpi.abs() < 1e-12 {
        return Err(Error::InvalidLift("f(π) = 0".into()));
    }
    if f2pi.abs() > 1e-12 {
        return Err(Error::InvalidLift(format!("f(2π) = {f2pi} ≠ 0")));
    }
    for j in 0..100 {
        let h = 0.1 * (j as f64 + 1.0) / 100.0;
        if !(f(h).1 < 0.0) {
            return Err(Error::InvalidLift(format!("f is not decreasing at t = {h}")));
        }
        if !(f(2.0 * PI - h).1 < 0.0) {
            return Err(Error::InvalidLift(format!("f′ ≥ 0 near 2π at t = {}", 2.0 * PI - h)));
        }
    }
    let m = n + 1;
    let mut e0 = vec![ZERO; m];
    e0[0] = Complex64::new(1.0, 0.0);
    let mut g = rng(seed);
    let mut worst = 0.0f64;
    let omega = |a: (&CVec, &CVec), b: (&CVec, &CVec)| -> f64 {
        // ω = d(2 Re⟨ξ, dz⟩) on lifted tangent vectors (z-part, ξ-part).
        2.0 * (dot(a.1, b.0).re - dot(b.1, a.0).re)
    };
    for _ in 0..samples {
        let t = g.gen_range(0.0..2.0 * PI);
        let mut w: CVec =
            (0..m).map(|i| if i == 0 { ZERO } else { Complex64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)) }).collect();
        let nw = vnorm(&w);
        w.iter_mut().for_each(|z| *z /= nw);
        let (fv, fd) = f(t);
        let (s, c) = (t / 2.0).sin_cos();
        // ∂_t of (z, ξ).
        let zt = axpy(-0.5 * s, &e0, 0.5 * c, &w);
        let dir = axpy(-s, &e0, c, &w);
        let back = axpy(-0.5 * c * fv, &e0, -0.5 * s * fv, &w);
        let xt: CVec = dir.iter().zip(&back).map(|(a, b)| a * fd + b).collect();
        let mut tangents = vec![(zt, xt)];
        // Directions u ⊥_ℝ w inside e₀^⊥: derivatives along great circles of S^{2n−1}.
        let mut basis: Vec<CVec> = Vec::new();
        for i in 1..m {
            for unit in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut v = vec![ZERO; m];
                v[i] = unit;
                let pr = dot(&w, &v).re;
                for (vi, wi) in v.iter_mut().zip(&w) {
                    *vi -= wi * pr;
                }
                for b in &basis {
                    let pb = dot(b, &v).re;
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= bi * pb;
                    }
                }
                let nv = vnorm(&v);
                if nv > 1e-8 {
                    v.iter_mut().for_each(|z| *z /= nv);
                    basis.push(v);
                }
            }
        }
        for u in basis.iter().take(2 * n - 1) {
            let zu: CVec = u.iter().map(|a| a * s).collect();
            let xu: CVec = u.iter().map(|a| a * (c * fv)).collect();
            tangents.push((zu, xu));
        }
        for i in 0..tangents.len() {
            for j in (i + 1)..tangents.len() {
                let v = omega((&tangents[i].0, &tangents[i].1), (&tangents[j].0, &tangents[j].1));
                worst = worst.max(v.abs());
            }
        }
    }
    // Immersed points: sign changes of f(t) + f(2π − t) on (0, π).
    let h = |t: f64| f(t).0 + f(2.0 * PI - t).0;
    let mut immersed = Vec::new();
    let mut gaps = Vec::new();
    let grid = 2000;
    for j in 0..grid {
        let (a, b) = (PI * j as f64 / grid as f64, PI * (j + 1) as f64 / grid as f64);
        let a = a.max(1e-9);
        if h(a) * h(b) < 0.0 || h(b) == 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(lo) * h(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let t0 = 0.5 * (lo + hi);
            if immersed.last().is_none_or(|&p: &f64| (t0 - p).abs() > 1e-9) {
                immersed.push(t0);
                let mut w = vec![ZERO; m];
                w[1] = Complex64::new(1.0, 0.0);
                let wn: CVec = w.iter().map(|z| -z).collect();
                let (z1, x1) = orbit_point(&e0, &wn, t0, f(t0).0);
                let (z2, x2) = orbit_point(&e0, &w, 2.0 * PI - t0, f(2.0 * PI - t0).0);
                let p1 = CotangentPoint::raw(Model::ComplexProj(n), z1, x1);
                let p2 = CotangentPoint::raw(Model::ComplexProj(n), z2, x2);
                gaps.push(p1.distance(&p2));
            }
        }
    }
    Ok(RotatedLagrangianReport { max_omega: worst, samples, immersed_params: immersed, self_intersection_gaps: gaps })
}

/// Checks on the fiber surgery Q_x in T*ℂPⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpFiberReport {
    /// (i) max deviation of Q_x from F_x for ‖p‖ ≥ ε.
    pub outside_deviation: f64,
    /// (ii) range of dist(x₀, ·) over limit points of Q_x at the zero section.
    pub limit_dist_min: f64,
    pub limit_dist_max: f64,
    /// (iii) two-stage surgery versus τ(F_x); only for n = 1.
    pub composite_deviation: Option<f64>,
    /// Divisor points y of x₀ have x₀ in their own divisor.
    pub divisor_symmetric: bool,
    pub pass: bool,
}

pub fn cp_fiber_surgery_check(n: usize, eps: f64, samples: usize, seed: u64) -> Result<CpFiberReport> {
    let model = Model::ComplexProj(n);
    let m = n + 1;
    let mut e0 = vec![ZERO; m];
    e0[0] = Complex64::new(1.0, 0.0);
    let plateau = make_semi_admissible(1, 0.0, eps)?;
    let mut g = rng(seed);
    let dirs: Vec<CVec> = (0..samples)
        .map(|_| {
            let mut w: CVec =
                (0..m).map(|i| if i == 0 { ZERO } else { Complex64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0)) }).collect();
            let nw = vnorm(&w);
            w.iter_mut().for_each(|z| *z /= nw);
            w
        })
        .collect();
    let q_point = |u: &CVec, r: f64| -> CotangentPoint {
        let p = fiber_point(model, &e0, u, r);
        let t = plateau.value(r);
        if t == 0.0 {
            p
        } else {
            geodesic_flow(&p, t).expect("nonzero covector")
        }
    };
    let mut outside = 0.0f64;
    let mut dmin = f64::INFINITY;
    let mut dmax = 0.0f64;
    for (i, u) in dirs.iter().enumerate() {
        let r = eps * (1.0 + 2.0 * (i as f64 + 0.5) / samples as f64);
        outside = outside.max(q_point(u, r).distance(&fiber_point(model, &e0, u, r)));
        let lim = q_point(u, 1e-9 * eps);
        let d = base_distance(model, &e0, &lim.base);
        dmin = dmin.min(d);
        dmax = dmax.max(d);
    }
    let composite = if n == 1 {
        let second = make_dehn_spherical(eps / 4.0)?;
        let tm = TwistModel::new(model, profile_sum(&plateau, &second))?;
        let mut dev = 0.0f64;
        for (i, u) in dirs.iter().enumerate() {
            let r = 1.5 * eps * (i as f64 + 0.5) / samples as f64;
            let stage1 = q_point(u, r);
            let t2 = second.value(stage1.norm());
            let stage2 = if t2 == 0.0 { stage1 } else { geodesic_flow(&stage1, t2)? };
            let direct = dehn_twist(&tm, &fiber_point(model, &e0, u, r));
            dev = dev.max(stage2.distance(&direct));
        }
        Some(dev)
    } else {
        None
    };
    // Divisor symmetry: points of D have x₀ at distance π.
    let mut symmetric = true;
    for u in dirs.iter().take(100) {
        let y = geodesic_flow(&fiber_point(model, &e0, u, 1.0), PI)?;
        let d_xy = base_distance(model, &e0, &y.base);
        let back = geodesic_flow(&fiber_point(model, &y.base, &y.covector, 1.0), PI)?;
        let d_back = base_distance(model, &y.base, &back.base);
        let returns = base_distance(model, &back.base, &e0) < 1e-6;
        if (d_xy - PI).abs() > 1e-6 || (d_back - PI).abs() > 1e-6 || !returns {
            symmetric = false;
        }
    }
    let pass = outside < 1e-8 && dmin >= PI - 1e-4 && dmax <= PI + 1e-12 && composite.is_none_or(|d| d < 1e-6) && symmetric;
    Ok(CpFiberReport {
        outside_deviation: outside,
        limit_dist_min: dmin,
        limit_dist_max: dmax,
        composite_deviation: composite,
        divisor_symmetric: symmetric,
        pass,
    })
}

/// Ambient coordinates (x, w) ∈ ℝ^{2(n+1)} of a point of T*Sⁿ.
fn sphere_coords(p: &CotangentPoint) -> Vec<f64> {
    p.base.iter().chain(&p.covector).map(|z| z.re).collect()
}

/// Local chart of T*Sⁿ around (x, w): (a, b) ∈ ℝ²ⁿ.
fn sphere_chart(x: &[f64], w: &[f64], tangents: &[Vec<f64>], params: &[f64]) -> CotangentPoint {
    let n = tangents.len();
    let mut y: Vec<f64> = x.to_vec();
    for i in 0..n {
        for (yk, tk) in y.iter_mut().zip(&tangents[i]) {
            *yk += params[i] * tk;
        }
    }
    let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
    y.iter_mut().for_each(|a| *a /= ny);
    let mut v: Vec<f64> = w.to_vec();
    for i in 0..n {
        for (vk, tk) in v.iter_mut().zip(&tangents[i]) {
            *vk += params[n + i] * tk;
        }
    }
    let pr: f64 = v.iter().zip(&y).map(|(a, b)| a * b).sum();
    v.iter_mut().zip(&y).for_each(|(a, b)| *a -= pr * b);
    CotangentPoint::raw(Model::Sphere(n), complexify(&y), complexify(&v))
}

/// Max |ω(Dτ u, Dτ v) − ω(u, v)| over chart directions at `samples` points,
/// by central differences with step h.
pub fn twist_symplectic_defect(tm: &TwistModel, samples: usize, h: f64, seed: u64) -> Result<f64> {
    let n = tm.model.n();
    if tm.model != Model::Sphere(n) {
        return Err(Error::InvalidParameter("symplecticity check runs on spheres".into()));
    }
    let mut g = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut p = random_point(tm.model, tm.profile.eps, &mut g);
        if p.norm() < 0.05 * tm.profile.eps {
            p = random_point(tm.model, tm.profile.eps, &mut g);
        }
        let x = real_part(&p.base);
        let w = real_part(&p.covector);
        let tangents: Vec<Vec<f64>> = {
            let mut out: Vec<Vec<f64>> = Vec::new();
            for i in 0..=n {
                let mut v = vec![0.0; n + 1];
                v[i] = 1.0;
                let pr: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(&x).for_each(|(a, b)| *a -= pr * b);
                for b in &out {
                    let pb: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
                    v.iter_mut().zip(b).for_each(|(a, c)| *a -= pb * c);
                }
                let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if nv > 1e-6 && out.len() < n {
                    v.iter_mut().for_each(|a| *a /= nv);
                    out.push(v);
                }
            }
            out
        };
        let dim = 2 * n;
        let diff = |f: &dyn Fn(&[f64]) -> Vec<f64>, j: usize| -> Vec<f64> {
            let mut a = vec![0.0; dim];
            let mut b = vec![0.0; dim];
            a[j] = h;
            b[j] = -h;
            let (fa, fb) = (f(&a), f(&b));
            fa.iter().zip(&fb).map(|(p, q)| (p - q) / (2.0 * h)).collect()
        };
        let chart = |q: &[f64]| sphere_coords(&sphere_chart(&x, &w, &tangents, q));
        let twisted = |q: &[f64]| sphere_coords(&dehn_twist(tm, &sphere_chart(&x, &w, &tangents, q)));
        let m = n + 1;
        let om = |a: &[f64], b: &[f64]| -> f64 { (0..m).map(|i| a[m + i] * b[i] - b[m + i] * a[i]).sum() };
        let d0: Vec<Vec<f64>> = (0..dim).map(|j| diff(&chart, j)).collect();
        let d1: Vec<Vec<f64>> = (0..dim).map(|j| diff(&twisted, j)).collect();
        for i in 0..dim {
            for j in (i + 1)..dim {
                worst = worst.max((om(&d1[i], &d1[j]) - om(&d0[i], &d0[j])).abs());
            }
        }
    }
    Ok(worst)
}

/// ℝP¹ twist through the double cover versus τ²_{S¹} with ν′(r) = ν(2r),
/// in angle coordinates; returns the max angular/momentum deviation.
pub fn rp1_square_check(spherical: &Profile, samples: usize, seed: u64) -> Result<f64> {
    let tm = TwistModel::new(Model::Sphere(1), spherical.clone())?;
    let half = profile_scaled(spherical, 2.0)?;
    let tm_half = TwistModel::new(Model::Sphere(1), half.clone())?;
    let mut g = rng(seed);
    let mut dev = 0.0f64;
    for _ in 0..samples {
        // Single-formula region: 0 < |p̃| < support radius.
        let p_t: f64 = g.gen_range(0.01..0.99) * half.eps * if g.gen_bool(0.5) { 1.0 } else { -1.0 };
        let q_t: f64 = g.gen_range(0.0..2.0 * PI);
        // ℝP¹ through the lift: q = q̃/2, w = p̃·(−sin q, cos q).
        let q = q_t / 2.0;
        let pt = CotangentPoint::raw(Model::RealProj(1), complexify(&[q.cos(), q.sin()]), complexify(&[-p_t * q.sin(), p_t * q.cos()]));
        let out = rp_double_cover_twist(&tm, &pt, 1.0)?;
        let (x, w) = (real_part(&out.base), real_part(&out.covector));
        let q_out = 2.0 * x[1].atan2(x[0]);
        let p_out = w[0] * -x[1] + w[1] * x[0];
        // τ² on the circle ℝP¹ = ℝ/2πℤ with the scaled profile.
        let circle =
            CotangentPoint::raw(Model::Sphere(1), complexify(&[q_t.cos(), q_t.sin()]), complexify(&[-p_t * q_t.sin(), p_t * q_t.cos()]));
        let twice = dehn_twist(&tm_half, &dehn_twist(&tm_half, &circle));
        let cx = real_part(&twice.base);
        let cw = real_part(&twice.covector);
        let q_circ = cx[1].atan2(cx[0]);
        let p_circ = cw[0] * -cx[1] + cw[1] * cx[0];
        let dq = (q_out - q_circ + PI).rem_euclid(2.0 * PI) - PI;
        dev = dev.max(dq.abs()).max((p_out - p_circ).abs());
    }
    Ok(dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::make_matched_admissible;

    fn models() -> Vec<Model> {
        vec![Model::Sphere(1), Model::Sphere(3), Model::RealProj(2), Model::ComplexProj(1), Model::ComplexProj(3)]
    }

    #[test]
    fn flow_identity_period_norm_group_law() {
        for model in models() {
            let mut g = rng(3);
            for _ in 0..1000 {
                let p = random_point(model, 2.0, &mut g);
                if p.norm() == 0.0 {
                    continue;
                }
                assert!(geodesic_flow(&p, 0.0).unwrap().distance(&p) < 1e-14);
                assert!(geodesic_flow(&p, 2.0 * PI).unwrap().distance(&p) < 1e-10);
                let (s, t) = (g.gen_range(-5.0..5.0), g.gen_range(-5.0..5.0));
                let q = geodesic_flow(&p, s + t).unwrap();
                let r = geodesic_flow(&geodesic_flow(&p, s).unwrap(), t).unwrap();
                assert!(q.distance(&r) < 1e-10);
                assert!((q.norm() - p.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_covector_rejected() {
        let p = CotangentPoint::new(Model::Sphere(2), complexify(&[1.0, 0.0, 0.0]), complexify(&[0.0; 3])).unwrap();
        assert_eq!(geodesic_flow(&p, 1.0), Err(Error::ZeroCovector));
    }

    #[test]
    fn point_validation_and_canonical_form() {
        assert!(CotangentPoint::new(Model::Sphere(1), complexify(&[1.0, 1.0]), complexify(&[0.0, 0.0])).is_err());
        assert!(CotangentPoint::new(Model::Sphere(1), complexify(&[1.0, 0.0]), complexify(&[1.0, 0.0])).is_err());
        let p = CotangentPoint::new(Model::RealProj(1), complexify(&[-1.0, 0.0]), complexify(&[0.0, 0.5])).unwrap();
        assert_eq!(p.base[0].re, 1.0);
        assert_eq!(p.covector[1].re, -0.5);
        let z = vec![Complex64::new(0.0, 1.0), ZERO];
        let c = CotangentPoint::new(Model::ComplexProj(1), z, vec![ZERO, Complex64::new(0.3, 0.0)]).unwrap();
        assert!((c.base[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn twist_support_zero_section_and_inverse() {
        let eps = 0.4;
        let tm = TwistModel::new(Model::Sphere(2), make_dehn_spherical(eps).unwrap()).unwrap();
        let mut g = rng(8);
        for _ in 0..1000 {
            let p = random_point(Model::Sphere(2), 1.0, &mut g);
            let q = dehn_twist(&tm, &p);
            if p.norm() >= eps {
                assert!(q.distance(&p) < 1e-12);
            }
            assert!(inverse_twist(&tm, &q).distance(&p) < 1e-9);
        }
        let p = CotangentPoint::new(Model::Sphere(2), complexify(&[0.0, 1.0, 0.0]), complexify(&[0.0; 3])).unwrap();
        assert_eq!(real_part(&dehn_twist(&tm, &p).base), vec![0.0, -1.0, 0.0]);
        let fixed = fiber_point(Model::Sphere(2), &p.base, &complexify(&[1.0, 0.0, 0.0]), eps + 0.1);
        assert_eq!(dehn_twist(&tm, &fixed), fixed);
    }

    #[test]
    fn circle_twist_matches_explicit_formula() {
        let nu = make_dehn_spherical(0.5).unwrap();
        let tm = TwistModel::new(Model::Sphere(1), nu.clone()).unwrap();
        let mut g = rng(2);
        for _ in 0..1000 {
            let q: f64 = g.gen_range(0.0..2.0 * PI);
            let p: f64 = g.gen_range(-0.6..0.6);
            let pt = CotangentPoint::raw(Model::Sphere(1), complexify(&[q.cos(), q.sin()]), complexify(&[-p * q.sin(), p * q.cos()]));
            let out = dehn_twist(&tm, &pt);
            let q2 = q + nu.value(p.abs()) * p.signum();
            let expect =
                CotangentPoint::raw(Model::Sphere(1), complexify(&[q2.cos(), q2.sin()]), complexify(&[-p * q2.sin(), p * q2.cos()]));
            assert!(out.distance(&expect) < 1e-12);
        }
    }

    #[test]
    fn twist_is_symplectic() {
        for n in [1, 2, 3] {
            let tm = TwistModel::new(Model::Sphere(n), make_dehn_spherical(0.8).unwrap()).unwrap();
            assert!(twist_symplectic_defect(&tm, 50, 1e-5, 4).unwrap() < 1e-5);
        }
    }

    #[test]
    fn fiber_surgery_equals_twist() {
        let dehn = make_dehn_spherical(0.8).unwrap();
        let matched = make_matched_admissible(&dehn, 0.1).unwrap();
        for n in [1, 2] {
            let mut x = vec![0.0; n + 1];
            x[0] = 1.0;
            let rep = surgery_vs_twist_fiber(n, &x, &dehn, &matched, 0.1, 1000, 0).unwrap();
            assert!(rep.deviation < 1e-6, "{rep:?}");
            assert!(rep.inner_graph);
        }
        let other = make_matched_admissible(&make_dehn_spherical(0.5).unwrap(), 0.1).unwrap();
        let x = [1.0, 0.0];
        assert!(matches!(surgery_vs_twist_fiber(1, &x, &dehn, &other, 0.1, 100, 0), Err(Error::ProfileMismatch(_))));
        assert!(fiber_deviation(1, &x, &dehn, &other, 0.1, 1000, 0).unwrap().deviation > 1e-2);
    }

    #[test]
    fn rp_lift_independence_and_zero_section() {
        let tm = TwistModel::new(Model::Sphere(2), make_dehn_spherical(0.6).unwrap()).unwrap();
        let mut g = rng(11);
        for _ in 0..1000 {
            let p = random_point(Model::RealProj(2), 0.4, &mut g);
            let a = rp_double_cover_twist(&tm, &p, 1.0).unwrap();
            let b = rp_double_cover_twist(&tm, &p, -1.0).unwrap();
            assert!(a.distance(&b) < 1e-10);
        }
        for _ in 0..100 {
            let mut p = random_point(Model::RealProj(2), 0.4, &mut g);
            p.covector.iter_mut().for_each(|z| *z = ZERO);
            assert!(rp_double_cover_twist(&tm, &p, 1.0).unwrap().distance(&p) < 1e-15);
            let proj = TwistModel::new(
                Model::RealProj(2),
                profile_sum(&make_semi_admissible(1, 0.0, 0.6).unwrap(), &make_dehn_spherical(0.15).unwrap()),
            )
            .unwrap();
            assert_eq!(dehn_twist(&proj, &p), p);
        }
    }

    #[test]
    fn rp1_matches_circle_square() {
        let nu = make_dehn_spherical(0.6).unwrap();
        assert!(rp1_square_check(&nu, 1000, 0).unwrap() < 1e-8);
    }

    #[test]
    fn graph_check() {
        let dehn = make_dehn_spherical(0.5).unwrap();
        let semi = make_semi_admissible(1, 1.0, 0.5).unwrap();
        for n in [1, 2] {
            assert!(graph_twist_check(n, &semi, &dehn, 10_000, 0).unwrap().deviation < 1e-6);
        }
        let wrong = make_semi_admissible(1, 0.5, 0.5).unwrap();
        assert!(graph_twist_check(1, &wrong, &dehn, 10_000, 0).unwrap().deviation > 1e-2);
    }

    #[test]
    fn rotated_lagrangian_cp1() {
        let f = |t: f64| (0.5 * (1.0 - t / (2.0 * PI)), -0.5 / (2.0 * PI));
        let rep = rotated_lagrangian(1, &f, 1000, 0).unwrap();
        assert!(rep.max_omega < 1e-6);
        assert!(rep.immersed_params.is_empty());
        let rep = rotated_lagrangian(3, &f, 300, 0).unwrap();
        assert!(rep.max_omega < 1e-6);
    }

    #[test]
    fn rotated_lagrangian_immersed_and_invalid() {
        let f = |t: f64| {
            let s2 = (t / 2.0).sin().powi(2);
            let h = 1.0 - 2.5 * s2;
            let dh = -2.5 * (t / 2.0).sin() * (t / 2.0).cos();
            ((2.0 * PI - t) * h / (2.0 * PI), (-h + (2.0 * PI - t) * dh) / (2.0 * PI))
        };
        let rep = rotated_lagrangian(1, &f, 200, 0).unwrap();
        assert_eq!(rep.immersed_params.len(), 1);
        assert!(rep.self_intersection_gaps[0] < 1e-6);
        let t0 = 2.0 * (0.4f64).sqrt().asin();
        assert!((rep.immersed_params[0] - t0).abs() < 1e-9);
        let constant = |_t: f64| (0.3, 0.0);
        assert!(matches!(rotated_lagrangian(1, &constant, 10, 0), Err(Error::InvalidLift(_))));
        let zero_mid = |t: f64| ((PI - t) / PI * 0.5 * (1.0 - t / (2.0 * PI)), 0.0);
        assert!(matches!(rotated_lagrangian(1, &zero_mid, 10, 0), Err(Error::InvalidLift(_))));
    }

    #[test]
    fn cp_fiber() {
        let rep = cp_fiber_surgery_check(1, 0.4, 1000, 0).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.composite_deviation.unwrap() < 1e-6);
        let rep = cp_fiber_surgery_check(2, 0.4, 500, 0).unwrap();
        assert!(rep.outside_deviation < 1e-8 && rep.limit_dist_min >= PI - 1e-4, "{rep:?}");
        assert!(rep.pass);
    }

    #[test]
    fn twist_model_rejects_wrong_profile() {
        assert!(matches!(TwistModel::new(Model::ComplexProj(1), make_dehn_spherical(0.3).unwrap()), Err(Error::ProfileMismatch(_))));
        assert!(TwistModel::new(Model::ComplexProj(1), crate::profiles::make_dehn(0.3).unwrap()).is_ok());
    }
}
