//! Combinatorial Floer theory for graded exact immersed curves on the
//! cylinder T*S¹ = (ℝ/2πℤ) × ℝ, with complex coordinate z = q − ip.
//!
//! Curves are piecewise-analytic parametrizations with lifted q. Polygons
//! (bigons and triangles) are enumerated on the universal cover ℝ² as simple
//! polygons with convex corners whose boundary arcs follow single lifts.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homological_algebra::{cone, homology, les_ranks, nonzero_ranks, F2ChainMap, F2Complex, FpMatrix, Generator};
use crate::profiles::{curve_from_profile, dehn_extension, AdmissibleCurve, Profile, ProfileKind};
use crate::symplectic_linalg::{index, GradedLagrangianPlane, SymplecticSpace};

/// Tolerance for locating intersection points.
pub const TAU_INTERSECT: f64 = 1e-10;
/// Minimal |sin| of a crossing angle.
pub const TAU_TRANSVERSE: f64 = 1e-6;
/// Default truncation height for properly embedded curves.
pub const DEFAULT_HEIGHT: f64 = 3.0;

const MAX_CHORD: f64 = 0.04;
const MAX_TURN: f64 = 0.08;
const TWO_PI: f64 = 2.0 * PI;

type EvalFn = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// One analytic piece traversed from local parameter `a` to `b`.
#[derive(Clone)]
struct Segment {
    f: EvalFn,
    a: f64,
    b: f64,
}

impl Segment {
    fn new(f: EvalFn, a: f64, b: f64) -> Self {
        Self { f, a, b }
    }

    fn len(&self) -> f64 {
        (self.b - self.a).abs()
    }

    /// (q, p, q′, p′) at traversal time τ ∈ [0, len].
    fn eval(&self, tau: f64) -> [f64; 4] {
        let sign = if self.b >= self.a { 1.0 } else { -1.0 };
        let v = (self.f)(self.a + sign * tau);
        [v[0], v[1], sign * v[2], sign * v[3]]
    }
}

#[derive(Clone, Copy, Debug)]
struct Sample {
    t: f64,
    q: f64,
    p: f64,
    theta: f64,
    f: f64,
}

/// A graded exact curve on the cylinder, closed or properly embedded.
#[derive(Clone)]
pub struct CylinderCurve {
    pub name: String,
    pub closed: bool,
    segs: Vec<Segment>,
    starts: Vec<f64>,
    pub period: f64,
    /// q-advance per period in units of 2π (closed curves).
    pub winding: i64,
    /// Grading shift k of L[k] (θ − k).
    pub shift: i64,
    samples: Vec<Sample>,
}

impl std::fmt::Debug for CylinderCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CylinderCurve")
            .field("name", &self.name)
            .field("closed", &self.closed)
            .field("period", &self.period)
            .field("winding", &self.winding)
            .field("shift", &self.shift)
            .field("samples", &self.samples.len())
            .finish()
    }
}

fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

/// θ mod 1 of the tangent line with velocity (q′, p′).
fn raw_phase(dq: f64, dp: f64) -> f64 {
    (-dp).atan2(dq) / PI
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

impl CylinderCurve {
    fn build(name: &str, closed: bool, segs: Vec<Segment>, theta_hint: f64, shift: i64) -> Result<Self> {
        if segs.is_empty() {
            return Err(Error::InvalidParameter("curve has no segments".into()));
        }
        let mut starts = Vec::with_capacity(segs.len());
        let mut acc = 0.0;
        for s in &segs {
            starts.push(acc);
            acc += s.len();
        }
        let mut c = Self { name: name.to_string(), closed, segs, starts, period: acc, winding: 0, shift, samples: Vec::new() };
        // Continuity across segment joins.
        for i in 1..c.segs.len() {
            let end = c.segs[i - 1].eval(c.segs[i - 1].len());
            let start = c.segs[i].eval(0.0);
            if (end[0] - start[0]).abs() > 1e-9 || (end[1] - start[1]).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("{name}: segments {} and {i} do not meet", i - 1)));
            }
        }
        if closed {
            let a = c.segs[0].eval(0.0);
            let last = c.segs.len() - 1;
            let b = c.segs[last].eval(c.segs[last].len());
            let w = (b[0] - a[0]) / TWO_PI;
            if (w - w.round()).abs() > 1e-9 || (b[1] - a[1]).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("{name}: curve does not close up")));
            }
            c.winding = w.round() as i64;
        }
        c.sample(theta_hint)?;
        Ok(c)
    }

    fn seg_index(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1).min(self.segs.len() - 1)
    }

    /// (q, p, q′, p′) at global parameter t; closed curves extend periodically
    /// with lifted q.
    pub fn eval(&self, t: f64) -> [f64; 4] {
        let (tt, lap) = if self.closed {
            let lap = (t / self.period).floor();
            (t - lap * self.period, lap)
        } else {
            (t.clamp(0.0, self.period), 0.0)
        };
        let i = self.seg_index(tt);
        let mut v = self.segs[i].eval((tt - self.starts[i]).min(self.segs[i].len()));
        v[0] += lap * TWO_PI * self.winding as f64;
        v
    }

    pub fn point(&self, t: f64) -> (f64, f64) {
        let v = self.eval(t);
        (v[0], v[1])
    }

    pub fn velocity(&self, t: f64) -> (f64, f64) {
        let v = self.eval(t);
        (v[2], v[3])
    }

    fn sample(&mut self, theta_hint: f64) -> Result<()> {
        let mut ts: Vec<f64> = Vec::new();
        for (i, seg) in self.segs.iter().enumerate() {
            let start = self.starts[i];
            let len = seg.len();
            let n0 = 16usize;
            let mut pts = vec![0.0];
            let mut stack: Vec<(f64, f64, u32)> =
                (0..n0).rev().map(|j| (len * j as f64 / n0 as f64, len * (j + 1) as f64 / n0 as f64, 0)).collect();
            while let Some((a, b, depth)) = stack.pop() {
                let va = seg.eval(a);
                let vb = seg.eval(b);
                let chord = (vb[0] - va[0]).hypot(vb[1] - va[1]);
                let turn = (va[3].atan2(va[2]) - vb[3].atan2(vb[2]) + PI).rem_euclid(TWO_PI) - PI;
                if (chord > MAX_CHORD || turn.abs() > MAX_TURN) && depth < 40 && b - a > 1e-13 {
                    let m = 0.5 * (a + b);
                    stack.push((m, b, depth + 1));
                    stack.push((a, m, depth + 1));
                } else {
                    pts.push(b);
                }
            }
            let skip = if i == 0 { 0 } else { 1 };
            ts.extend(pts.iter().skip(skip).map(|&x| start + x));
        }
        if let Some(last) = ts.last_mut() {
            *last = self.period;
        }
        let mut samples = Vec::with_capacity(ts.len());
        let mut prev_theta = theta_hint;
        let mut prev_f = 0.0;
        let mut prev_t = 0.0;
        for (j, &t) in ts.iter().enumerate() {
            let v = self.eval_in_period(t);
            let speed = v[2].hypot(v[3]);
            if !(speed > 1e-12) {
                return Err(Error::InvalidParameter(format!("{}: velocity vanishes at t = {t}", self.name)));
            }
            let raw = raw_phase(v[2], v[3]);
            let theta = if j == 0 { raw + (theta_hint - raw).round() } else { prev_theta + wrap_half(raw - prev_theta) };
            let f = if j == 0 { 0.0 } else { prev_f + self.integrate_pdq(prev_t, t) };
            samples.push(Sample { t, q: v[0], p: v[1], theta, f });
            prev_theta = theta;
            prev_f = f;
            prev_t = t;
        }
        self.samples = samples;
        if self.closed {
            let first = self.samples[0];
            let last = *self.samples.last().expect("samples");
            if (last.theta - first.theta).abs() > 1e-8 {
                return Err(Error::InvalidParameter(format!(
                    "{}: Maslov class {} ≠ 0, the curve admits no grading",
                    self.name,
                    last.theta - first.theta
                )));
            }
            if last.f.abs() > 1e-8 {
                return Err(Error::InvalidParameter(format!("{}: ∮ p dq = {:e} ≠ 0, curve is not exact", self.name, last.f)));
            }
        }
        Ok(())
    }

    fn eval_in_period(&self, t: f64) -> [f64; 4] {
        let i = self.seg_index(t);
        self.segs[i].eval((t - self.starts[i]).clamp(0.0, self.segs[i].len()))
    }

    fn integrate_pdq(&self, a: f64, b: f64) -> f64 {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(x, w)| {
                let v = self.eval_in_period(m + h * x);
                w * v[1] * v[2]
            })
            .sum::<f64>()
            * h
    }

    fn reduce(&self, t: f64) -> f64 {
        if self.closed {
            t.rem_euclid(self.period)
        } else {
            t.clamp(0.0, self.period)
        }
    }

    fn sample_before(&self, tt: f64) -> usize {
        self.samples.partition_point(|s| s.t <= tt).saturating_sub(1).min(self.samples.len() - 1)
    }

    /// Grading θ(t) of the tangent line, including the shift.
    pub fn theta(&self, t: f64) -> f64 {
        let tt = self.reduce(t);
        let s = self.samples[self.sample_before(tt)];
        let v = self.eval_in_period(tt);
        let raw = raw_phase(v[2], v[3]);
        s.theta + wrap_half(raw - s.theta) - self.shift as f64
    }

    /// Primitive f with f′ = p q′, normalized by f(0) = 0.
    pub fn primitive(&self, t: f64) -> f64 {
        let tt = self.reduce(t);
        let s = self.samples[self.sample_before(tt)];
        s.f + self.integrate_pdq(s.t, tt)
    }

    /// Graded tangent line at t.
    pub fn plane(&self, t: f64) -> Result<GradedLagrangianPlane> {
        let v = self.eval(t);
        let n = v[2].hypot(v[3]);
        let u = Complex64::new(v[2] / n, -v[3] / n);
        let frame = DMatrix::from_element(1, 1, u);
        GradedLagrangianPlane::with_grading_near(SymplecticSpace::standard(1), frame, self.theta(t))
    }

    /// +1 if the parametrization agrees with the orientation e^{iπθ} induced
    /// by the grading, −1 otherwise.
    pub fn orientation_sign(&self) -> Result<i64> {
        let mut sign = 0i64;
        for s in self.samples.iter().step_by(7).chain(self.samples.last()) {
            let v = self.eval_in_period(s.t);
            let th = self.theta(s.t);
            let o = Complex64::from_polar(1.0, PI * th);
            let u = Complex64::new(v[2], -v[3]);
            let dot = (o.conj() * u).re;
            let here = if dot > 0.0 { 1 } else { -1 };
            if sign != 0 && here != sign {
                return Err(Error::InvalidParameter(format!("{}: grading orientation flips", self.name)));
            }
            sign = here;
        }
        Ok(sign)
    }

    /// L[k]: the grading θ − k.
    pub fn shifted(&self, k: i64) -> Self {
        let mut c = self.clone();
        c.shift += k;
        c
    }

    /// The curve (q, p) ↦ (q, c·p).
    pub fn scaled_vertically(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::InvalidParameter("scale factor must be positive".into()));
        }
        let segs = self
            .segs
            .iter()
            .map(|s| {
                let f = s.f.clone();
                let g: EvalFn = Arc::new(move |x| {
                    let v = f(x);
                    [v[0], factor * v[1], v[2], factor * v[3]]
                });
                Segment::new(g, s.a, s.b)
            })
            .collect();
        let hint = self.samples[0].theta;
        Self::build(&format!("{}*{factor}", self.name), self.closed, segs, hint, self.shift)
    }

    /// Lifted polyline from parameter ta to tb (either order).
    fn arc(&self, ta: f64, tb: f64) -> Vec<(f64, f64)> {
        let (lo, hi, rev) = if ta <= tb { (ta, tb, false) } else { (tb, ta, true) };
        let mut pts = vec![self.point(lo)];
        let n = self.samples.len();
        if self.closed {
            let lap_lo = (lo / self.period).floor() as i64;
            let lap_hi = (hi / self.period).floor() as i64;
            for lap in lap_lo..=lap_hi {
                let off = lap as f64 * self.period;
                let dq = lap as f64 * TWO_PI * self.winding as f64;
                for s in &self.samples[..n - 1] {
                    let t = s.t + off;
                    if t > lo && t < hi {
                        pts.push((s.q + dq, s.p));
                    }
                }
            }
        } else {
            for s in &self.samples {
                if s.t > lo && s.t < hi {
                    pts.push((s.q, s.p));
                }
            }
        }
        pts.push(self.point(hi));
        if rev {
            pts.reverse();
        }
        pts
    }

    /// Parameters t with p(t) = height.
    pub fn at_height(&self, height: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.samples.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a.p - height) * (b.p - height) <= 0.0 && a.p != b.p {
                let (mut lo, mut hi) = (a.t, b.t);
                let flo = a.p - height;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let fm = self.eval_in_period(mid)[1] - height;
                    if (fm < 0.0) == (flo < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let t = 0.5 * (lo + hi);
                if out.last().is_none_or(|&x: &f64| (x - t).abs() > 1e-9) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// (bottom q, top q) of a properly embedded curve with vertical ends, and
    /// +1 if it is traversed bottom to top.
    fn vertical_ends(&self) -> Option<(f64, f64, i64)> {
        if self.closed {
            return None;
        }
        let a = self.eval(0.0);
        let b = self.eval(self.period);
        if a[2].abs() > 1e-9 || b[2].abs() > 1e-9 {
            return None;
        }
        if a[1] < b[1] {
            Some((a[0], b[0], 1))
        } else {
            Some((b[0], a[0], -1))
        }
    }
}

/// The zero section, graded θ = 0.
pub fn zero_section() -> CylinderCurve {
    let f: EvalFn = Arc::new(|t| [t, 0.0, 1.0, 0.0]);
    CylinderCurve::build("zero", true, vec![Segment::new(f, 0.0, TWO_PI)], 0.0, 0).expect("zero section")
}

/// The fiber {q = q₀}, |p| ≤ height, traversed upward and graded θ = −1/2.
pub fn fiber(q0: f64, height: f64) -> Result<CylinderCurve> {
    if !(height > 0.0) {
        return Err(Error::InvalidParameter("height must be positive".into()));
    }
    let f: EvalFn = Arc::new(move |t| [q0, t, 0.0, 1.0]);
    CylinderCurve::build(&format!("fiber({q0})"), false, vec![Segment::new(f, -height, height)], -0.5, 0)
}

/// One Fourier term a·sin(k q + φ).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub k: u32,
    pub a: f64,
    pub phase: f64,
}

/// Graph p = Σ a sin(k q + φ) of an exact one-form, graded by continuation
/// from the zero section.
pub fn graph(terms: &[Term]) -> Result<CylinderCurve> {
    if terms.iter().any(|t| t.k == 0) {
        return Err(Error::InvalidParameter("graph terms need k ≥ 1 for exactness".into()));
    }
    let terms: Vec<Term> = terms.to_vec();
    let f: EvalFn = Arc::new(move |q| {
        let (mut p, mut dp) = (0.0, 0.0);
        for t in &terms {
            let x = t.k as f64 * q + t.phase;
            p += t.a * x.sin();
            dp += t.a * t.k as f64 * x.cos();
        }
        [q, p, 1.0, dp]
    });
    CylinderCurve::build("graph", true, vec![Segment::new(f, 0.0, TWO_PI)], 0.0, 0)
}

/// Closed or open Catmull–Rom spline through lifted points; closed splines
/// advance by 2π·winding per period.
pub fn custom_spline(points: &[(f64, f64)], closed: bool, winding: i64, theta_hint: f64) -> Result<CylinderCurve> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InvalidParameter("a spline needs at least 3 points".into()));
    }
    let pt = |i: i64| -> (f64, f64) {
        if closed {
            let m = i.rem_euclid(n as i64) as usize;
            let lap = i.div_euclid(n as i64) as f64;
            (points[m].0 + lap * TWO_PI * winding as f64, points[m].1)
        } else {
            points[i.clamp(0, n as i64 - 1) as usize]
        }
    };
    let spans = if closed { n } else { n - 1 };
    let mut segs = Vec::with_capacity(spans);
    for i in 0..spans as i64 {
        let (p0, p1) = (pt(i), pt(i + 1));
        let tangent = |j: i64| -> (f64, f64) {
            let (a, b) = (pt(j - 1), pt(j + 1));
            let scale = if !closed && (j == 0 || j == n as i64 - 1) { 1.0 } else { 0.5 };
            ((b.0 - a.0) * scale, (b.1 - a.1) * scale)
        };
        let (m0, m1) = (tangent(i), tangent(i + 1));
        let f: EvalFn = Arc::new(move |s| {
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            let d00 = 6.0 * s2 - 6.0 * s;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d01 = -6.0 * s2 + 6.0 * s;
            let d11 = 3.0 * s2 - 2.0 * s;
            [
                h00 * p0.0 + h10 * m0.0 + h01 * p1.0 + h11 * m1.0,
                h00 * p0.1 + h10 * m0.1 + h01 * p1.1 + h11 * m1.1,
                d00 * p0.0 + d10 * m0.0 + d01 * p1.0 + d11 * m1.0,
                d00 * p0.1 + d10 * m0.1 + d01 * p1.1 + d11 * m1.1,
            ]
        });
        segs.push(Segment::new(f, 0.0, 1.0));
    }
    CylinderCurve::build("spline", closed, segs, theta_hint, 0)
}

/// Geometry of the surgery scene beyond the main profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// Amplitude of the Morse branch p = −a sin q (h = a cos q).
    pub a: f64,
    /// Profile height of the handle resolving the distance-π point.
    pub div_lambda: f64,
    /// Support radius of that handle.
    pub div_eps: f64,
    /// Matching radius of the Dehn extension.
    pub delta: f64,
    pub height: f64,
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self { a: 0.3, div_lambda: 0.4, div_eps: 0.2, delta: 0.5, height: DEFAULT_HEIGHT }
    }
}

fn curve_eval(c: &AdmissibleCurve, s: f64) -> [f64; 4] {
    let p = c.eval(s);
    [p.a, p.b, p.da, p.db]
}

/// Pieces of the immersed winding-two curve built from the zero section and
/// the Morse branch, resolved at q = π; lifted q runs over [π + λ_D, 5π + λ_D].
/// When `cut` holds the handle curve of a second surgery at x₀ = 2π, the zero
/// section pieces are cut there and the result is the proper surgered curve.
fn immersed_pieces(g: &SceneGeometry, div: &AdmissibleCurve, cut: Option<&AdmissibleCurve>) -> Vec<Segment> {
    let a = g.a;
    let ld = g.div_lambda;
    let s_end = (1.2 * g.div_eps).min(0.9 * a);
    let mut segs = Vec::new();
    let zero: EvalFn = Arc::new(|t| [t, 0.0, 1.0, 0.0]);
    // Handle in the shear chart (u, v) ↦ (c + u + asin(v/a), v) around q = c.
    let chart = move |c: f64, u: [f64; 4]| -> [f64; 4] {
        let (uu, vv, du, dv) = (u[0], u[1], u[2], u[3]);
        let root = (a * a - vv * vv).sqrt();
        [c + uu + (vv / a).asin(), vv, du + dv / root, dv]
    };
    match cut {
        None => segs.push(Segment::new(zero.clone(), PI + ld, 3.0 * PI - ld)),
        Some(h) => {
            let h = h.clone();
            let lam = h.lambda;
            let top: EvalFn = Arc::new(move |s| {
                let v = curve_eval(&h, s);
                [TWO_PI + v[0], -v[1], v[2], -v[3]]
            });
            segs.push(Segment::new(top, g.height, -(PI - lam - ld)));
        }
    }
    let d1 = div.clone();
    let upper: EvalFn = Arc::new(move |s| {
        let v = curve_eval(&d1, s);
        chart(3.0 * PI, [-v[0], -v[1], -v[2], -v[3]])
    });
    segs.push(Segment::new(upper, 0.0, s_end));
    let morse: EvalFn = Arc::new(move |q| [q, -a * q.sin(), 1.0, -a * q.cos()]);
    let off = (s_end / a).asin();
    segs.push(Segment::new(morse, 3.0 * PI + off, 5.0 * PI - off));
    let d2 = div.clone();
    let lower: EvalFn = Arc::new(move |s| chart(5.0 * PI, curve_eval(&d2, s)));
    segs.push(Segment::new(lower, s_end, 0.0));
    match cut {
        None => {}
        Some(h) => {
            let h = h.clone();
            let lam = h.lambda;
            let bottom: EvalFn = Arc::new(move |s| {
                let v = curve_eval(&h, s);
                [6.0 * PI - v[0], v[1], -v[2], v[3]]
            });
            segs.push(Segment::new(bottom, -(PI - lam - ld), g.height));
        }
    }
    segs
}

fn check_geometry(g: &SceneGeometry) -> Result<()> {
    let ok = g.a > 0.0 && g.div_lambda > 0.0 && g.div_eps > 0.0 && g.div_eps < 0.8 * g.a && g.height > 0.0;
    if !ok {
        return Err(Error::InvalidParameter(format!("bad scene geometry {g:?}")));
    }
    if g.div_lambda >= PI / 2.0 {
        return Err(Error::InvalidParameter("distance-π handle is too wide".into()));
    }
    Ok(())
}

/// The immersed curve S_↬: zero section and the graph of d(a cos q), resolved
/// at q = π by a surgery from the Morse branch to the zero section; one
/// transverse double point remains at q = 0.
pub fn immersed_sphere(g: &SceneGeometry) -> Result<CylinderCurve> {
    check_geometry(g)?;
    let div = curve_from_profile(&crate::profiles::make_admissible(g.div_lambda, g.div_eps)?)?;
    CylinderCurve::build("immersed", true, immersed_pieces(g, &div, None), 0.0, 0)
}

/// The full surgery scene: S_↬, L = fiber at q = 0, S_↬[1] # L and τ(L).
#[derive(Clone, Debug)]
pub struct TwistScene {
    pub geometry: SceneGeometry,
    pub profile: Profile,
    pub dehn: Profile,
    pub s: CylinderCurve,
    pub l: CylinderCurve,
    pub surgery: CylinderCurve,
    pub tau_l: CylinderCurve,
    /// q0: the double point as a point of the zero-section branch of S and of L.
    pub q0: Intersection,
    /// Max |Δq| between S_↬[1] # L and τ(L) over |p| ≥ δ.
    pub deviation: f64,
}

/// The projective twist of the fiber at q = 0 with a 2π-type profile, lifted
/// to run from q = 2π (top) to q = 6π (bottom).
pub fn twisted_fiber(dehn: &Profile, height: f64) -> Result<CylinderCurve> {
    if dehn.kind != ProfileKind::Dehn {
        return Err(Error::ProfileMismatch("the cylinder twist needs a 2π-type profile".into()));
    }
    let nu = dehn.clone();
    let f: EvalFn = Arc::new(move |t| {
        let p = -t;
        if p >= 0.0 {
            let (v, d) = nu.value_deriv(p);
            [TWO_PI + v, p, -d, -1.0]
        } else {
            let (v, d) = nu.value_deriv(-p);
            [6.0 * PI - v, p, -d, -1.0]
        }
    });
    CylinderCurve::build("tau(fiber)", false, vec![Segment::new(f, -height, height)], -0.5, 0)
}

pub fn twist_scene(profile: &Profile, g: &SceneGeometry) -> Result<TwistScene> {
    check_geometry(g)?;
    if profile.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("the surgery needs an admissible profile".into()));
    }
    if profile.lambda + g.div_lambda >= PI - 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "λ = {} overlaps the handle at the distance-π point; the surgery branch is ambiguous",
            profile.lambda
        )));
    }
    if !(g.delta > g.a && g.delta < profile.eps && g.height > 1.5 * profile.eps) {
        return Err(Error::InvalidParameter("need a < δ < ε and height > 1.5 ε".into()));
    }
    let div = curve_from_profile(&crate::profiles::make_admissible(g.div_lambda, g.div_eps)?)?;
    let handle = curve_from_profile(profile)?;
    let s = CylinderCurve::build("immersed", true, immersed_pieces(g, &div, None), 0.0, 0)?;
    let l = fiber(0.0, g.height)?;
    let surgery = CylinderCurve::build("surgery", false, immersed_pieces(g, &div, Some(&handle)), -0.5, 0)?;
    let dehn = dehn_extension(profile, g.delta)?;
    let tau_l = twisted_fiber(&dehn, g.height)?;
    let q0 = intersections(&s, &l)?
        .into_iter()
        .find(|x| s.velocity(x.t0).1.abs() < 1e-12)
        .ok_or_else(|| Error::InvalidParameter("the fiber misses the zero-section branch".into()))?;
    if q0.index != 0 {
        return Err(Error::InvalidParameter(format!("Ind(S, L) at q0 is {}, expected 0", q0.index)));
    }
    // Literal coincidence on the matched region |p| ≥ δ.
    let mut deviation = 0.0f64;
    let m = 500;
    for j in 0..=m {
        let r = g.delta + (g.height * 0.999 - g.delta) * j as f64 / m as f64;
        for h in [r, -r] {
            let a = surgery.at_height(h);
            let b = tau_l.at_height(h);
            if a.len() != b.len() {
                deviation = f64::INFINITY;
                continue;
            }
            for (ta, tb) in a.iter().zip(&b) {
                let dq = surgery.point(*ta).0 - tau_l.point(*tb).0;
                deviation = deviation.max((dq - TWO_PI * (dq / TWO_PI).round()).abs());
            }
        }
    }
    Ok(TwistScene { geometry: *g, profile: profile.clone(), dehn, s, l, surgery, tau_l, q0, deviation })
}

/// A transverse intersection point c₀(t₀) = c₁(t₁) + (2πk, 0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intersection {
    pub t0: f64,
    pub t1: f64,
    pub k: i64,
    pub q: f64,
    pub p: f64,
    pub index: i64,
    pub raw_index: f64,
}

struct EdgeGrid {
    cell_q: f64,
    cell_p: f64,
    nq: i64,
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl EdgeGrid {
    fn new(pts: &[(f64, f64)]) -> Self {
        let nq = 256;
        let mut g = Self { cell_q: TWO_PI / nq as f64, cell_p: 0.05, nq, map: HashMap::new() };
        for i in 0..pts.len().saturating_sub(1) {
            for key in g.cells(pts[i], pts[i + 1]) {
                g.map.entry(key).or_default().push(i);
            }
        }
        g
    }

    fn cells(&self, a: (f64, f64), b: (f64, f64)) -> Vec<(i64, i64)> {
        let q_lo = a.0.min(b.0);
        let q_hi = a.0.max(b.0);
        let iq0 = (q_lo / self.cell_q).floor() as i64;
        let iq1 = (q_hi / self.cell_q).floor() as i64;
        let ip0 = (a.1.min(b.1) / self.cell_p).floor() as i64;
        let ip1 = (a.1.max(b.1) / self.cell_p).floor() as i64;
        let mut out = Vec::new();
        for iq in iq0..=iq1.min(iq0 + self.nq) {
            for ip in ip0..=ip1 {
                out.push((iq.rem_euclid(self.nq), ip));
            }
        }
        out
    }
}

fn polyline(c: &CylinderCurve) -> Vec<(f64, f64)> {
    c.samples.iter().map(|s| (s.q, s.p)).collect()
}

fn seg_hit(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> Option<(f64, f64)> {
    let r = (b.0 - a.0, b.1 - a.1);
    let s = (d.0 - c.0, d.1 - c.1);
    let den = cross(r, s);
    if den == 0.0 {
        return None;
    }
    let ac = (c.0 - a.0, c.1 - a.1);
    let u = cross(ac, s) / den;
    let v = cross(ac, r) / den;
    let tol = 1e-9;
    if u >= -tol && u <= 1.0 + tol && v >= -tol && v <= 1.0 + tol {
        Some((u, v))
    } else {
        None
    }
}

/// Newton refinement of c₀(t) = c₁(s) + (2πk, 0).
fn refine(c0: &CylinderCurve, c1: &CylinderCurve, mut t: f64, mut s: f64, k: i64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let a = c0.eval(t);
        let b = c1.eval(s);
        let fx = a[0] - b[0] - TWO_PI * k as f64;
        let fy = a[1] - b[1];
        if fx.hypot(fy) < 1e-14 {
            break;
        }
        let det = a[2] * (-b[3]) - (-b[2]) * a[3];
        if det == 0.0 {
            return None;
        }
        let dt = (fx * (-b[3]) - (-b[2]) * fy) / det;
        let ds = (a[2] * fy - a[3] * fx) / det;
        t -= dt;
        s -= ds;
    }
    if !c0.closed && !(0.0..=c0.period).contains(&t) || !c1.closed && !(0.0..=c1.period).contains(&s) {
        return None;
    }
    let a = c0.eval(t);
    let b = c1.eval(s);
    if (a[0] - b[0] - TWO_PI * k as f64).hypot(a[1] - b[1]) > TAU_INTERSECT {
        return None;
    }
    Some((t, s))
}

fn sin_angle(a: (f64, f64), b: (f64, f64)) -> f64 {
    cross(a, b).abs() / (a.0.hypot(a.1) * b.0.hypot(b.1))
}

/// Raw crossing pairs (t₀, t₁, k) located on the polylines and refined.
fn raw_crossings(c0: &CylinderCurve, c1: &CylinderCurve, same: bool) -> Result<Vec<(f64, f64, i64)>> {
    let p0 = polyline(c0);
    let p1 = polyline(c1);
    let grid = EdgeGrid::new(&p1);
    let mut found: Vec<(f64, f64, i64)> = Vec::new();
    let n1 = p1.len() - 1;
    for i in 0..p0.len() - 1 {
        let mut cands: Vec<usize> = Vec::new();
        for key in grid.cells(p0[i], p0[i + 1]) {
            if let Some(v) = grid.map.get(&key) {
                cands.extend(v);
            }
        }
        cands.sort_unstable();
        cands.dedup();
        for j in cands {
            if same {
                let gap = (i as i64 - j as i64).abs();
                let cyc = if c0.closed { gap.min(n1 as i64 - gap) } else { gap };
                if cyc <= 1 {
                    continue;
                }
            }
            let mid0 = 0.5 * (p0[i].0 + p0[i + 1].0);
            let mid1 = 0.5 * (p1[j].0 + p1[j + 1].0);
            let k0 = ((mid0 - mid1) / TWO_PI).round() as i64;
            for k in [k0 - 1, k0, k0 + 1] {
                let sh = TWO_PI * k as f64;
                let c = (p1[j].0 + sh, p1[j].1);
                let d = (p1[j + 1].0 + sh, p1[j + 1].1);
                if let Some((u, v)) = seg_hit(p0[i], p0[i + 1], c, d) {
                    let t = c0.samples[i].t + u * (c0.samples[i + 1].t - c0.samples[i].t);
                    let s = c1.samples[j].t + v * (c1.samples[j + 1].t - c1.samples[j].t);
                    if let Some((t, s)) = refine(c0, c1, t, s, k) {
                        found.push(normalize(c0, c1, t, s, k));
                    }
                }
            }
        }
    }
    // Deduplicate.
    let mut out: Vec<(f64, f64, i64)> = Vec::new();
    for x in found {
        let dup = out.iter().any(|y| param_close(c0, x.0, y.0) && param_close(c1, x.1, y.1));
        if !dup {
            out.push(x);
        }
    }
    if same {
        out.retain(|x| !(param_close(c0, x.0, x.1)));
    }
    for &(t, s, _) in &out {
        let va = c0.velocity(t);
        let vb = c1.velocity(s);
        let sa = sin_angle(va, vb);
        if sa < TAU_TRANSVERSE {
            let (q, p) = c0.point(t);
            return Err(Error::NonTransverse(format!("crossing angle {sa:e} at ({q}, {p})")));
        }
    }
    out.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(out)
}

fn param_close(c: &CylinderCurve, a: f64, b: f64) -> bool {
    let d = (a - b).abs();
    if c.closed {
        let m = d.rem_euclid(c.period);
        m < 1e-7 || c.period - m < 1e-7
    } else {
        d < 1e-7
    }
}

/// Brings t, s into [0, period) and adjusts the deck shift k.
fn normalize(c0: &CylinderCurve, c1: &CylinderCurve, t: f64, s: f64, k: i64) -> (f64, f64, i64) {
    let (mut t, mut s, mut k) = (t, s, k);
    if c0.closed {
        let lap = (t / c0.period).floor();
        t -= lap * c0.period;
        k -= lap as i64 * c0.winding;
        if t >= c0.period {
            t -= c0.period;
            k -= c0.winding;
        }
    }
    if c1.closed {
        let lap = (s / c1.period).floor();
        s -= lap * c1.period;
        k += lap as i64 * c1.winding;
        if s >= c1.period {
            s -= c1.period;
            k += c1.winding;
        }
    }
    (t, s, k)
}

/// All transverse intersections of c₀ and c₁ with Ind(c₀, c₁).
pub fn intersections(c0: &CylinderCurve, c1: &CylinderCurve) -> Result<Vec<Intersection>> {
    let raw = raw_crossings(c0, c1, false)?;
    raw.into_iter()
        .map(|(t0, t1, k)| {
            let ind = index(&c0.plane(t0)?, &c1.plane(t1)?)?;
            let (q, p) = c0.point(t0);
            Ok(Intersection { t0, t1, k, q: q.rem_euclid(TWO_PI), p, index: ind.rounded, raw_index: ind.raw })
        })
        .collect()
}

/// An ordered pair of preimages of a double point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchJump {
    pub t_from: f64,
    pub t_to: f64,
    pub q: f64,
    pub p: f64,
    pub index: i64,
    pub energy: f64,
}

/// Both orderings of every transverse double point, with
/// E(p, q) = −f(p) + f(q) and Ind(p, q).
pub fn branch_jumps(c: &CylinderCurve) -> Result<Vec<BranchJump>> {
    let raw = raw_crossings(c, c, true)?;
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for (t, s, _) in raw {
        let (a, b) = if t < s { (t, s) } else { (s, t) };
        if !pairs.iter().any(|&(x, y)| param_close(c, x, a) && param_close(c, y, b)) {
            pairs.push((a, b));
        }
    }
    let mut out = Vec::new();
    for (a, b) in pairs {
        for (x, y) in [(a, b), (b, a)] {
            let ind = index(&c.plane(x)?, &c.plane(y)?)?;
            let (q, p) = c.point(x);
            out.push(BranchJump {
                t_from: x,
                t_to: y,
                q: q.rem_euclid(TWO_PI),
                p,
                index: ind.rounded,
                energy: -c.primitive(x) + c.primitive(y),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionA {
    pub pass: bool,
    /// Jumps with positive energy and index below 3.
    pub witnesses: Vec<BranchJump>,
}

pub fn assumption_a(c: &CylinderCurve) -> Result<AssumptionA> {
    let witnesses: Vec<BranchJump> = branch_jumps(c)?.into_iter().filter(|j| j.energy > 0.0 && j.index < 3).collect();
    Ok(AssumptionA { pass: witnesses.is_empty(), witnesses })
}

fn segments_touch(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let o = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| cross((q.0 - p.0, q.1 - p.1), (r.0 - p.0, r.1 - p.1));
    let (o1, o2, o3, o4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0)) && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0)) {
        return true;
    }
    let on = |p: (f64, f64), q: (f64, f64), r: (f64, f64)| {
        r.0 >= p.0.min(q.0) && r.0 <= p.0.max(q.0) && r.1 >= p.1.min(q.1) && r.1 <= p.1.max(q.1)
    };
    (o1 == 0.0 && on(a, b, c)) || (o2 == 0.0 && on(a, b, d)) || (o3 == 0.0 && on(c, d, a)) || (o4 == 0.0 && on(c, d, b))
}

/// True when the closed polygon has no touching non-adjacent edges.
fn is_simple(poly: &[(f64, f64)]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let cell = 0.05;
    let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        let (x0, x1) = ((a.0.min(b.0) / cell).floor() as i64, (a.0.max(b.0) / cell).floor() as i64);
        let (y0, y1) = ((a.1.min(b.1) / cell).floor() as i64, (a.1.max(b.1) / cell).floor() as i64);
        for x in x0..=x1 {
            for y in y0..=y1 {
                map.entry((x, y)).or_default().push(i);
            }
        }
    }
    for bucket in map.values() {
        for (ii, &i) in bucket.iter().enumerate() {
            for &j in &bucket[ii + 1..] {
                let gap = (i as i64 - j as i64).unsigned_abs() as usize;
                if gap <= 1 || gap == n - 1 {
                    continue;
                }
                let (a, b) = edge(i);
                let (c, d) = edge(j);
                if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
    }
    true
}

fn signed_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| cross(poly[i], poly[(i + 1) % n])).sum::<f64>() * 0.5
}

/// One boundary arc of a polygon: a curve traversed from ta to tb.
struct ArcSpec<'a> {
    curve: &'a CylinderCurve,
    ta: f64,
    tb: f64,
}

/// Parameter targets tb ≡ t (mod period) reachable from ta by less than one
/// period.
fn arc_targets(c: &CylinderCurve, ta: f64, t: f64) -> Vec<f64> {
    if !c.closed {
        return vec![t];
    }
    let mut out = Vec::new();
    let base = t - c.period * ((t - ta) / c.period).floor();
    for cand in [base, base - c.period] {
        let d = cand - ta;
        if d.abs() > 1e-12 && d.abs() < c.period - 1e-12 {
            out.push(cand);
        }
    }
    out
}

/// Checks that the arcs, translated end to end on the universal cover, bound
/// an embedded polygon traversed clockwise in (q, p) with convex corners.
fn polygon_ok(arcs: &[ArcSpec<'_>]) -> bool {
    let mut poly: Vec<(f64, f64)> = Vec::new();
    let mut dirs: Vec<((f64, f64), (f64, f64))> = Vec::new();
    let mut cursor: Option<(f64, f64)> = None;
    let start = arcs[0].curve.point(arcs[0].ta);
    for arc in arcs {
        let mut pts = arc.curve.arc(arc.ta, arc.tb);
        let p0 = pts[0];
        let here = cursor.unwrap_or(p0);
        let dq = here.0 - p0.0;
        if (dq / TWO_PI - (dq / TWO_PI).round()).abs() > 1e-7 || (here.1 - p0.1).abs() > 1e-7 {
            return false;
        }
        let shift = TWO_PI * (dq / TWO_PI).round();
        for p in pts.iter_mut() {
            p.0 += shift;
        }
        let sign = if arc.tb >= arc.ta { 1.0 } else { -1.0 };
        let vin = arc.curve.velocity(arc.ta);
        let vout = arc.curve.velocity(arc.tb);
        dirs.push(((sign * vin.0, sign * vin.1), (sign * vout.0, sign * vout.1)));
        cursor = Some(*pts.last().expect("arc"));
        pts.pop();
        poly.extend(pts);
    }
    let end = cursor.expect("arcs");
    if (end.0 - start.0).abs() > 1e-7 || (end.1 - start.1).abs() > 1e-7 {
        return false;
    }
    if !(signed_area(&poly) < 0.0) {
        return false;
    }
    let m = arcs.len();
    for i in 0..m {
        let incoming = dirs[i].1;
        let outgoing = dirs[(i + 1) % m].0;
        if !(cross(incoming, outgoing) < 0.0) {
            return false;
        }
    }
    is_simple(&poly)
}

/// Floer cochain complex of a pair of curves.
#[derive(Clone, Debug)]
pub struct FloerComplex {
    pub generators: Vec<Intersection>,
    pub complex: F2Complex,
    /// (input, output) generator pairs of every counted bigon.
    pub bigons: Vec<(usize, usize)>,
}

impl FloerComplex {
    pub fn homology(&self) -> BTreeMap<i64, usize> {
        nonzero_ranks(&homology(&self.complex).expect("validated complex"))
    }
}

fn count_bigons(c0: &CylinderCurve, c1: &CylinderCurve, x: &Intersection, y: &Intersection) -> usize {
    let mut count = 0;
    for tb0 in arc_targets(c0, y.t0, x.t0) {
        for tb1 in arc_targets(c1, x.t1, y.t1) {
            let arcs = [ArcSpec { curve: c0, ta: y.t0, tb: tb0 }, ArcSpec { curve: c1, ta: x.t1, tb: tb1 }];
            if polygon_ok(&arcs) {
                count += 1;
            }
        }
    }
    count
}

/// Cochain complex on c₀ ∩ c₁ graded by Ind, with d counting embedded
/// bigons with convex corners whose boundary follows single lifts.
pub fn bigon_differential(c0: &CylinderCurve, c1: &CylinderCurve) -> Result<FloerComplex> {
    let gens = intersections(c0, c1)?;
    let n = gens.len();
    let mut d = FpMatrix::zeros(n, n, 2);
    let mut bigons = Vec::new();
    for (j, x) in gens.iter().enumerate() {
        for (i, y) in gens.iter().enumerate() {
            if y.index != x.index + 1 {
                continue;
            }
            let c = count_bigons(c0, c1, x, y);
            for _ in 0..c {
                bigons.push((j, i));
            }
            d.add_at(i, j, (c % 2) as u32);
        }
    }
    let d2 = d.mul(&d);
    for i in 0..n {
        for j in 0..n {
            if d2.get(i, j) != 0 {
                return Err(Error::ObstructionDetected(format!("d² ≠ 0 from generator {j} to {i}")));
            }
        }
    }
    let generators = gens.iter().enumerate().map(|(i, g)| Generator { label: format!("x{i}"), deg: g.index }).collect();
    let complex = F2Complex::new(generators, d)?;
    Ok(FloerComplex { generators: gens, complex, bigons })
}

/// Algebraic intersection number with parametrization orientations, from
/// winding and end data; None when an open curve lacks vertical ends.
pub fn winding_intersection(c0: &CylinderCurve, c1: &CylinderCurve) -> Option<i64> {
    match (c0.closed, c1.closed) {
        (true, true) => Some(0),
        (true, false) => c1.vertical_ends().map(|(_, _, v)| c0.winding * v),
        (false, true) => c0.vertical_ends().map(|(_, _, v)| -c1.winding * v),
        (false, false) => {
            let (b0, t0, v0) = c0.vertical_ends()?;
            let (b1, t1, v1) = c1.vertical_ends()?;
            let up = ((t0 - t1) / TWO_PI).floor() as i64 - ((b0 - b1) / TWO_PI).floor() as i64;
            Some(up * v0 * v1)
        }
    }
}

/// χ(CF(c₀, c₁)) against the winding oracle s₀·s₁·I.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerCheck {
    pub euler: i64,
    pub predicted: Option<i64>,
    pub agree: bool,
}

pub fn euler_check(c0: &CylinderCurve, c1: &CylinderCurve) -> Result<EulerCheck> {
    let gens = intersections(c0, c1)?;
    let euler: i64 = gens.iter().map(|g| if g.index.rem_euclid(2) == 0 { 1 } else { -1 }).sum();
    let predicted = winding_intersection(c0, c1).map(|i| i * c0.orientation_sign().unwrap_or(0) * c1.orientation_sign().unwrap_or(0));
    Ok(EulerCheck { euler, predicted, agree: predicted == Some(euler) })
}

/// Cone comparison for one test curve N.
#[derive(Clone, Debug)]
pub struct ConeCheck {
    pub cf_s: FloerComplex,
    pub cf_l: FloerComplex,
    pub cf_tau: FloerComplex,
    pub map: F2ChainMap,
    pub triangles: usize,
    pub cone_homology: BTreeMap<i64, usize>,
    pub tau_homology: BTreeMap<i64, usize>,
    pub ranks_match: bool,
    pub les_exact: bool,
    /// rank CF(N, τL) = rank CF(N, S) + rank CF(N, L) at chain level.
    pub chain_ranks_add: bool,
}

fn count_triangles(
    n: &CylinderCurve,
    s: &CylinderCurve,
    l: &CylinderCurve,
    x: &Intersection,
    q0: &Intersection,
    y: &Intersection,
) -> usize {
    let mut count = 0;
    for tb_s in arc_targets(s, x.t1, q0.t0) {
        for tb_l in arc_targets(l, q0.t1, y.t1) {
            for tb_n in arc_targets(n, y.t0, x.t0) {
                let arcs = [
                    ArcSpec { curve: s, ta: x.t1, tb: tb_s },
                    ArcSpec { curve: l, ta: q0.t1, tb: tb_l },
                    ArcSpec { curve: n, ta: y.t0, tb: tb_n },
                ];
                if polygon_ok(&arcs) {
                    count += 1;
                }
            }
        }
    }
    count
}

/// CF(N, S) → CF(N, L) by counting triangles with corners x, q0, y, then
/// homology of the cone versus HF(N, τL).
pub fn cone_check(scene: &TwistScene, n: &CylinderCurve) -> Result<ConeCheck> {
    let cf_s = bigon_differential(n, &scene.s)?;
    let cf_l = bigon_differential(n, &scene.l)?;
    let cf_tau = bigon_differential(n, &scene.tau_l)?;
    let mut m = FpMatrix::zeros(cf_l.generators.len(), cf_s.generators.len(), 2);
    let mut triangles = 0;
    for (j, x) in cf_s.generators.iter().enumerate() {
        for (i, y) in cf_l.generators.iter().enumerate() {
            if y.index != x.index + scene.q0.index {
                continue;
            }
            let c = count_triangles(n, &scene.s, &scene.l, x, &scene.q0, y);
            triangles += c;
            m.add_at(i, j, (c % 2) as u32);
        }
    }
    let map = F2ChainMap::new(cf_s.complex.clone(), cf_l.complex.clone(), 0, m)?;
    let cone_homology = nonzero_ranks(&homology(&cone(&map)?)?);
    let tau_homology = cf_tau.homology();
    let les_exact = les_ranks(&map)?.exact;
    let chain_ranks_add = cf_tau.generators.len() == cf_s.generators.len() + cf_l.generators.len();
    Ok(ConeCheck {
        ranks_match: cone_homology == tau_homology,
        cf_s,
        cf_l,
        cf_tau,
        map,
        triangles,
        cone_homology,
        tau_homology,
        les_exact,
        chain_ranks_add,
    })
}

/// The built-in family of exact pushoffs graph(d g_j), j < 10.
pub fn pushoff_family() -> Vec<Vec<Term>> {
    (0..10)
        .map(|j| {
            let jf = j as f64;
            vec![
                Term { k: 1 + (j % 3) as u32, a: 0.04 + 0.03 * jf, phase: 0.37 * jf + 0.1 },
                Term { k: 2 + (j % 2) as u32, a: 0.02 + 0.01 * jf, phase: 1.1 * jf },
            ]
        })
        .collect()
}

/// Degree-wise nonzero ranks of HF(c₀, c₁).
pub fn hf_ranks(c0: &CylinderCurve, c1: &CylinderCurve) -> Result<BTreeMap<i64, usize>> {
    Ok(bigon_differential(c0, c1)?.homology())
}

fn default_height() -> f64 {
    DEFAULT_HEIGHT
}

/// Curve kinds accepted in scene files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CurveKind {
    ZeroSection,
    Fiber {
        q: f64,
        #[serde(default = "default_height")]
        height: f64,
    },
    Graph {
        terms: Vec<Term>,
    },
    ImmersedSphere {
        #[serde(default)]
        geometry: Option<SceneGeometry>,
    },
    TwistedFiber {
        profile: String,
        delta: f64,
        #[serde(default = "default_height")]
        height: f64,
    },
    Surgery {
        profile: String,
        #[serde(default)]
        geometry: Option<SceneGeometry>,
    },
    CustomSpline {
        points: Vec<(f64, f64)>,
        closed: bool,
        #[serde(default)]
        winding: i64,
    },
}

/// A scene entry: a curve kind plus an optional grading hint θ(0) ≈ theta0
/// and a grading shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    #[serde(flatten)]
    pub kind: CurveKind,
    #[serde(default)]
    pub theta0: Option<f64>,
    #[serde(default)]
    pub shift: i64,
}

impl CurveSpec {
    pub fn build(&self) -> Result<CylinderCurve> {
        let mut c = match &self.kind {
            CurveKind::ZeroSection => zero_section(),
            CurveKind::Fiber { q, height } => fiber(*q, *height)?,
            CurveKind::Graph { terms } => graph(terms)?,
            CurveKind::ImmersedSphere { geometry } => immersed_sphere(&geometry.unwrap_or_default())?,
            CurveKind::TwistedFiber { profile, delta, height } => {
                let base = Profile::parse(profile)?;
                twisted_fiber(&dehn_extension(&base, *delta)?, *height)?
            }
            CurveKind::Surgery { profile, geometry } => twist_scene(&Profile::parse(profile)?, &geometry.unwrap_or_default())?.surgery,
            CurveKind::CustomSpline { points, closed, winding } => custom_spline(points, *closed, *winding, self.theta0.unwrap_or(0.0))?,
        };
        if let Some(hint) = self.theta0 {
            c.shift += (c.theta(0.0) - hint).round() as i64;
        }
        c.shift += self.shift;
        Ok(c)
    }

    /// Parses `zero`, `fiber:q=1.3[,height=3]`, `graph:k=1,a=0.2,phase=0.7`
    /// (terms separated by `;`) or `immersed`.
    pub fn parse(spec: &str) -> Result<CurveSpec> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let fields = |part: &str| -> Result<HashMap<String, f64>> {
            let mut out = HashMap::new();
            for kv in part.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| Error::Schema(format!("bad field '{kv}'")))?;
                let v: f64 = v.trim().parse().map_err(|_| Error::Schema(format!("bad number '{v}'")))?;
                out.insert(k.trim().to_string(), v);
            }
            Ok(out)
        };
        let need = |m: &HashMap<String, f64>, key: &str| m.get(key).copied().ok_or_else(|| Error::Schema(format!("missing field '{key}'")));
        let check_keys = |m: &HashMap<String, f64>, allowed: &[&str]| -> Result<()> {
            match m.keys().find(|k| !allowed.contains(&k.as_str())) {
                Some(k) => Err(Error::Schema(format!("unknown field '{k}'"))),
                None => Ok(()),
            }
        };
        let kind = match kind.trim() {
            "zero" | "zero_section" => CurveKind::ZeroSection,
            "immersed" | "immersed_sphere" => CurveKind::ImmersedSphere { geometry: None },
            "fiber" => {
                let m = fields(rest)?;
                check_keys(&m, &["q", "height"])?;
                CurveKind::Fiber { q: need(&m, "q")?, height: m.get("height").copied().unwrap_or(DEFAULT_HEIGHT) }
            }
            "graph" => {
                let mut terms = Vec::new();
                for part in rest.split(';') {
                    let m = fields(part)?;
                    check_keys(&m, &["k", "a", "phase"])?;
                    let k = need(&m, "k")?;
                    if k.fract() != 0.0 || k < 1.0 {
                        return Err(Error::Schema(format!("k must be a positive integer, got {k}")));
                    }
                    terms.push(Term { k: k as u32, a: need(&m, "a")?, phase: m.get("phase").copied().unwrap_or(0.0) });
                }
                CurveKind::Graph { terms }
            }
            other => return Err(Error::Schema(format!("unknown curve kind '{other}'"))),
        };
        Ok(CurveSpec { kind, theta0: None, shift: 0 })
    }
}

/// Parses a scene: a JSON array of curve specs or an object with `curves`.
pub fn parse_scene(value: &serde_json::Value) -> Result<Vec<CurveSpec>> {
    let arr = match value {
        serde_json::Value::Array(_) => value.clone(),
        serde_json::Value::Object(m) => m.get("curves").cloned().ok_or_else(|| Error::Schema("scene object lacks 'curves'".into()))?,
        _ => return Err(Error::Schema("scene must be an array of curve specs".into())),
    };
    serde_json::from_value(arr).map_err(|e| Error::Schema(e.to_string()))
}

impl CylinderCurve {
    /// Rows (t, q, p, θ, f) of the adaptive sample grid.
    pub fn sample_table(&self) -> Vec<[f64; 5]> {
        self.samples.iter().map(|s| [s.t, s.q, s.p, s.theta - self.shift as f64, s.f]).collect()
    }
}
