//! One-dimensional surgery profiles ν and admissible curves γ.
//!
//! Every profile is realized analytically from `exp(−1/x)` mollifiers, so
//! flatness at the support radius holds by construction.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative amplitude of the log-singular factor of the admissible template.
/// It forces ν′(0⁺) = −∞ while keeping ν(r) within 1e−6 of λ for r ≥ 1e−9.
pub const TEMPLATE_C: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Admissible,
    SemiAdmissible,
    Dehn,
    DehnSpherical,
}

#[derive(Debug)]
enum Eval {
    Template { lambda: f64, eps: f64, kappa: f64 },
    Semi { k: u32, alpha: f64, delta: f64, delta2: f64 },
    FromCurve(AdmissibleCurve),
    Isotopy { p0: Profile, p1: Profile, t: f64 },
    Matched { dehn: Profile, delta: f64, beta: f64 },
    Sum(Profile, Profile),
    DehnExtension { base: Profile, delta: f64 },
    Scaled { base: Profile, factor: f64 },
}

/// A surgery profile with exact value and first-derivative evaluators.
#[derive(Clone, Debug)]
pub struct Profile {
    pub kind: ProfileKind,
    /// ν(0⁺).
    pub lambda: f64,
    /// Support radius.
    pub eps: f64,
    /// Initial slope magnitude; +∞ for admissible profiles.
    pub alpha: f64,
    eval: Arc<Eval>,
}

/// φ(x) = 1/(1 − ln x) and its derivative, for x ∈ (0, 1).
pub fn log_phi(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, f64::INFINITY);
    }
    let phi = 1.0 / (1.0 - x.ln());
    (phi, phi * phi / x)
}

/// Smooth step S(x) = ψ(x)/(ψ(x) + ψ(1−x)), ψ(x) = exp(−κ/x), and S′.
pub fn smooth_step(x: f64, kappa: f64) -> (f64, f64) {
    let (s, _, ds) = smooth_step_full(x, kappa);
    (s, ds)
}

/// (S, 1 − S, S′) with 1 − S computed without cancellation.
pub fn smooth_step_full(x: f64, kappa: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let g = kappa / x - kappa / (1.0 - x);
    let (s, sc) = if g > 0.0 {
        let e = (-g).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = g.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    };
    let ds = if s == 0.0 || sc == 0.0 { 0.0 } else { s * sc * (kappa / (x * x) + kappa / ((1.0 - x) * (1.0 - x))) };
    (s, sc, ds)
}

fn template_kappa(eps: f64) -> f64 {
    1.0f64.max(1.0 / (2.0 * eps))
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Admissible profile from the fixed template
/// ν(r) = λ·(1 − S_κ(r/ε))·(1 − c·φ(r/ε)), κ = max(1, 1/(2ε)).
pub fn make_admissible(lambda: f64, eps: f64) -> Result<Profile> {
    positive("lambda", lambda)?;
    positive("eps", eps)?;
    let ratio = lambda / PI;
    if (ratio - ratio.round()).abs() < 1e-12 {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} is a band endpoint; use a semi-admissible profile")));
    }
    Ok(Profile {
        kind: ProfileKind::Admissible,
        lambda,
        eps,
        alpha: f64::INFINITY,
        eval: Arc::new(Eval::Template { lambda, eps, kappa: template_kappa(eps) }),
    })
}

fn semi(kind: ProfileKind, k: u32, alpha: f64, eps: f64) -> Result<Profile> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    positive("eps", eps)?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite and nonnegative, got {alpha}")));
    }
    let top = k as f64 * PI;
    let delta2 = if alpha > 0.0 { eps.min(top / alpha) } else { eps };
    Ok(Profile { kind, lambda: top, eps, alpha, eval: Arc::new(Eval::Semi { k, alpha, delta: delta2 / 4.0, delta2 }) })
}

/// Semi-admissible profile (kπ − αr)·(1 − S((r − δ)/(δ₂ − δ))),
/// δ₂ = min(ε, kπ/α), δ = δ₂/4.
pub fn make_semi_admissible(k: u32, alpha: f64, eps: f64) -> Result<Profile> {
    semi(ProfileKind::SemiAdmissible, k, alpha, eps)
}

/// Dehn profile, 2π − r near 0.
pub fn make_dehn(eps: f64) -> Result<Profile> {
    positive("eps", eps)?;
    if eps >= 2.0 * PI {
        return Err(Error::InvalidParameter("Dehn profile needs eps < 2π".into()));
    }
    semi(ProfileKind::Dehn, 2, 1.0, eps)
}

/// Spherical Dehn profile, π − r near 0.
pub fn make_dehn_spherical(eps: f64) -> Result<Profile> {
    positive("eps", eps)?;
    if eps >= PI {
        return Err(Error::InvalidParameter("spherical Dehn profile needs eps < π".into()));
    }
    semi(ProfileKind::DehnSpherical, 1, 1.0, eps)
}

/// Index k of the band ((k−1)π, kπ) containing λ.
pub fn band(lambda: f64) -> u32 {
    (lambda / PI).ceil().max(1.0) as u32
}

/// Pointwise convex combination (1−t)ν₀ + tν₁ of two admissible profiles in
/// one band.
pub fn profile_isotopy(p0: &Profile, p1: &Profile, t: f64) -> Result<Profile> {
    if p0.kind != ProfileKind::Admissible || p1.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("isotopy needs admissible profiles".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} outside [0, 1]")));
    }
    if band(p0.lambda) != band(p1.lambda) {
        return Err(Error::BandMismatch(format!("λ₀ = {} and λ₁ = {}", p0.lambda, p1.lambda)));
    }
    let eps = if t == 0.0 {
        p0.eps
    } else if t == 1.0 {
        p1.eps
    } else {
        p0.eps.max(p1.eps)
    };
    Ok(Profile {
        kind: ProfileKind::Admissible,
        lambda: (1.0 - t) * p0.lambda + t * p1.lambda,
        eps,
        alpha: f64::INFINITY,
        eval: Arc::new(Eval::Isotopy { p0: p0.clone(), p1: p1.clone(), t }),
    })
}

/// Admissible profile equal to a spherical Dehn profile for r ≥ δ:
/// ν_λ = ν_D − (1 − σ(r/δ))·(H(r) − r), H = (π − λ) + β·φ(r/δ), π − λ = β = δ/8.
pub fn make_matched_admissible(dehn: &Profile, delta: f64) -> Result<Profile> {
    if dehn.kind != ProfileKind::DehnSpherical {
        return Err(Error::ProfileMismatch("matching needs a spherical Dehn profile".into()));
    }
    positive("delta", delta)?;
    if delta > dehn.eps / 4.0 {
        return Err(Error::InvalidParameter(format!("delta = {delta} exceeds eps/4 = {}", dehn.eps / 4.0)));
    }
    let beta = delta / 8.0;
    Ok(Profile {
        kind: ProfileKind::Admissible,
        lambda: PI - beta,
        eps: dehn.eps,
        alpha: f64::INFINITY,
        eval: Arc::new(Eval::Matched { dehn: dehn.clone(), delta, beta }),
    })
}

/// Pointwise sum of two profiles; the sum of a π-plateau and a spherical Dehn
/// profile is a 2π-type Dehn profile.
pub fn profile_sum(a: &Profile, b: &Profile) -> Profile {
    let lambda = a.lambda + b.lambda;
    let alpha = a.alpha + b.alpha;
    let two_pi_type = (lambda - 2.0 * PI).abs() < 1e-12 && (alpha - 1.0).abs() < 1e-12;
    let kind = if two_pi_type { ProfileKind::Dehn } else { ProfileKind::SemiAdmissible };
    Profile { kind, lambda, eps: a.eps.max(b.eps), alpha, eval: Arc::new(Eval::Sum(a.clone(), b.clone())) }
}

/// Dehn profile that equals an admissible ν_λ (λ < π) for r ≥ δ and 2π − r
/// for r ≤ δ/2: ν_D = ν_λ + (2π − r − ν_λ)·(1 − S((r − δ/2)/(δ/2))).
pub fn dehn_extension(base: &Profile, delta: f64) -> Result<Profile> {
    if base.kind != ProfileKind::Admissible || base.lambda >= PI {
        return Err(Error::InvalidParameter("extension needs an admissible profile with λ < π".into()));
    }
    positive("delta", delta)?;
    if delta >= base.eps {
        return Err(Error::InvalidParameter("delta must be below the support radius".into()));
    }
    Ok(Profile {
        kind: ProfileKind::Dehn,
        lambda: 2.0 * PI,
        eps: base.eps,
        alpha: 1.0,
        eval: Arc::new(Eval::DehnExtension { base: base.clone(), delta }),
    })
}

/// Radially rescaled profile r ↦ ν(c·r).
pub fn profile_scaled(base: &Profile, factor: f64) -> Result<Profile> {
    positive("factor", factor)?;
    let alpha = base.alpha * factor;
    let kind = match base.kind {
        ProfileKind::Admissible => ProfileKind::Admissible,
        _ if (alpha - 1.0).abs() < 1e-15 => base.kind,
        _ => ProfileKind::SemiAdmissible,
    };
    Ok(Profile { kind, lambda: base.lambda, eps: base.eps / factor, alpha, eval: Arc::new(Eval::Scaled { base: base.clone(), factor }) })
}

impl Profile {
    /// ν(r) for r > 0.
    pub fn value(&self, r: f64) -> f64 {
        self.value_deriv(r).0
    }

    /// ν′(r) for r > 0.
    pub fn deriv(&self, r: f64) -> f64 {
        self.value_deriv(r).1
    }

    /// (ν(r), ν′(r)).
    pub fn value_deriv(&self, r: f64) -> (f64, f64) {
        if r >= self.eps {
            return (0.0, 0.0);
        }
        match &*self.eval {
            Eval::Template { lambda, eps, kappa } => {
                let x = r / eps;
                if x <= 0.0 {
                    return (*lambda, f64::NEG_INFINITY);
                }
                let (_, e, ds) = smooth_step_full(x, *kappa);
                let (phi, dphi) = log_phi(x);
                let f = 1.0 - TEMPLATE_C * phi;
                let v = lambda * e * f;
                let d = lambda / eps * (-ds * f - e * TEMPLATE_C * dphi);
                (v, d)
            }
            Eval::Semi { k, alpha, delta, delta2 } => {
                let lin = *k as f64 * PI - alpha * r;
                let (_, sc, ds) = smooth_step_full((r - delta) / (delta2 - delta), 1.0);
                let v = lin * sc;
                let d = -alpha * sc - lin * ds / (delta2 - delta);
                (v, d)
            }
            Eval::FromCurve(c) => c.profile_value_deriv(r),
            Eval::Isotopy { p0, p1, t } => {
                let (a, da) = p0.value_deriv(r);
                let (b, db) = p1.value_deriv(r);
                ((1.0 - t) * a + t * b, (1.0 - t) * da + t * db)
            }
            Eval::Matched { dehn, delta, beta } => {
                let (vd, dd) = dehn.value_deriv(r);
                let x = r / delta;
                if x >= 1.0 {
                    return (vd, dd);
                }
                let (sig, dsig) = smooth_step((x - 0.25) / 0.75, 1.0);
                let (phi, dphi) = log_phi(x);
                let h = beta + beta * phi - r;
                let dh = beta * dphi / delta - 1.0;
                let v = vd - (1.0 - sig) * h;
                let d = dd + dsig / (0.75 * delta) * h - (1.0 - sig) * dh;
                (v, d)
            }
            Eval::Sum(a, b) => {
                let (va, da) = a.value_deriv(r);
                let (vb, db) = b.value_deriv(r);
                (va + vb, da + db)
            }
            Eval::DehnExtension { base, delta } => {
                let half = delta / 2.0;
                if r <= half {
                    return (2.0 * PI - r, -1.0);
                }
                let (vb, db) = base.value_deriv(r);
                let (s, ds) = smooth_step((r - half) / half, 1.0);
                let w = 1.0 - s;
                let dw = -ds / half;
                let gap = 2.0 * PI - r - vb;
                (vb + gap * w, db + (-1.0 - db) * w + gap * dw)
            }
            Eval::Scaled { base, factor } => {
                let (v, d) = base.value_deriv(factor * r);
                (v, d * factor)
            }
        }
    }

    /// Radius where the profile reaches the value y, by bisection on the
    /// strictly decreasing part.
    pub fn inverse(&self, y: f64) -> f64 {
        if y >= self.lambda {
            return 0.0;
        }
        if y <= 0.0 {
            return self.eps;
        }
        let (mut lo, mut hi) = (0.0f64, self.eps);
        for _ in 0..1100 {
            let mid = if lo == 0.0 && hi > 1e-300 { hi * 1e-3 } else { 0.5 * (lo + hi) };
            let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { mid };
            if mid <= lo || mid >= hi {
                break;
            }
            if self.value(mid) > y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Canonical config string, when the profile comes from a template.
    pub fn config_string(&self) -> Option<String> {
        match &*self.eval {
            Eval::Template { lambda, eps, .. } => Some(format!("admissible:lambda={lambda},eps={eps}")),
            Eval::Semi { k, alpha, .. } => Some(match self.kind {
                ProfileKind::Dehn => format!("dehn:eps={}", self.eps),
                ProfileKind::DehnSpherical => format!("dehn-spherical:eps={}", self.eps),
                _ => format!("semi:k={k},alpha={alpha},eps={}", self.eps),
            }),
            _ => None,
        }
    }

    /// Checks the invariant predicate of the profile's kind at `samples`
    /// log-spaced radii.
    pub fn check_invariants(&self, samples: usize) -> std::result::Result<(), String> {
        let samples = samples.max(2);
        for j in 0..5 {
            let r = self.eps * (1.0 + j as f64 * 0.25);
            if self.value(r) != 0.0 {
                return Err(format!("ν({r}) ≠ 0 beyond the support"));
            }
        }
        let radii: Vec<f64> = (0..samples)
            .map(|j| {
                let u = j as f64 / (samples - 1) as f64;
                self.eps * 10f64.powf(-9.0 + u * (9.0 + 0.99f64.log10()))
            })
            .collect();
        let mut prev = f64::INFINITY;
        for &r in &radii {
            let (v, d) = self.value_deriv(r);
            if !v.is_finite() || !d.is_finite() {
                return Err(format!("non-finite value at r = {r}"));
            }
            if v > prev + 1e-12 {
                return Err(format!("ν increases at r = {r}"));
            }
            prev = v;
            if v < 0.0 {
                return Err(format!("ν({r}) < 0"));
            }
        }
        match self.kind {
            ProfileKind::Admissible => {
                for &r in &radii {
                    if !(self.deriv(r) < 0.0) {
                        return Err(format!("ν′({r}) is not negative"));
                    }
                }
                if (self.value(self.eps * 1e-300) - self.lambda).abs() > 1e-4 * self.lambda {
                    return Err("ν(0⁺) differs from λ".into());
                }
            }
            ProfileKind::SemiAdmissible | ProfileKind::Dehn | ProfileKind::DehnSpherical => {
                let top = self.lambda;
                let end = self.linear_end();
                for j in 1..=10 {
                    let r = end * j as f64 / 11.0;
                    if (self.value(r) - (top - self.alpha * r)).abs() > 1e-9 {
                        return Err(format!("ν({r}) is not kπ − αr on the initial segment"));
                    }
                }
                let slope_ok = match self.kind {
                    ProfileKind::Dehn => (top - 2.0 * PI).abs() < 1e-12 && (self.alpha - 1.0).abs() < 1e-12,
                    ProfileKind::DehnSpherical => (top - PI).abs() < 1e-12 && (self.alpha - 1.0).abs() < 1e-12,
                    _ => true,
                };
                if !slope_ok {
                    return Err("initial segment does not have the Dehn shape".into());
                }
                if self.kind == ProfileKind::DehnSpherical {
                    for &r in &radii {
                        let v = self.value(r);
                        if !(v > 0.0 && v < PI) {
                            return Err(format!("spherical profile leaves (0, π) at r = {r}"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Right end of the initial linear segment.
    pub fn linear_end(&self) -> f64 {
        match &*self.eval {
            Eval::Semi { delta, .. } => *delta,
            Eval::Sum(a, b) => a.linear_end().min(b.linear_end()),
            Eval::DehnExtension { delta, .. } => delta / 2.0,
            Eval::Scaled { base, factor } => base.linear_end() / factor,
            _ => 0.0,
        }
    }

    /// Parses `admissible:lambda=1.0,eps=0.5`, `semi:k=2,alpha=1,eps=0.5`,
    /// `dehn:eps=0.5` or `dehn-spherical:eps=0.5`.
    pub fn parse(spec: &str) -> Result<Profile> {
        let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Schema(format!("profile '{spec}' lacks ':'")))?;
        let mut lambda = None;
        let mut eps = None;
        let mut alpha = None;
        let mut k = None;
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (key, val) = kv.split_once('=').ok_or_else(|| Error::Schema(format!("bad field '{kv}'")))?;
            let num: f64 = val.trim().parse().map_err(|_| Error::Schema(format!("bad number '{val}'")))?;
            match key.trim() {
                "lambda" => lambda = Some(num),
                "eps" => eps = Some(num),
                "alpha" => alpha = Some(num),
                "k" => {
                    if num.fract() != 0.0 || num < 1.0 {
                        return Err(Error::Schema(format!("k must be a positive integer, got {val}")));
                    }
                    k = Some(num as u32)
                }
                other => return Err(Error::Schema(format!("unknown field '{other}'"))),
            }
        }
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::Schema(format!("missing field '{name}'")));
        match kind.trim() {
            "admissible" => make_admissible(need(lambda, "lambda")?, need(eps, "eps")?),
            "semi" | "semi-admissible" => {
                let k = k.ok_or_else(|| Error::Schema("missing field 'k'".into()))?;
                make_semi_admissible(k, need(alpha, "alpha")?, need(eps, "eps")?)
            }
            "dehn" => make_dehn(need(eps, "eps")?),
            "dehn-spherical" => make_dehn_spherical(need(eps, "eps")?),
            other => Err(Error::Schema(format!("unknown profile kind '{other}'"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.config_string() {
            Some(s) => write!(f, "{s}"),
            None => write!(f, "{:?}:lambda={},eps={}", self.kind, self.lambda, self.eps),
        }
    }
}

/// Constant C of the flatness bound |ν(ε − h)| ≤ C·exp(−1/(2h)) for the
/// admissible template.
pub fn flatness_constant(p: &Profile) -> f64 {
    p.lambda * (2.0 * template_kappa(p.eps)).exp()
}

#[derive(Debug)]
enum CurveRep {
    Straight,
    Profile { profile: Profile, s1: f64, s2: f64 },
}

/// Point and velocity of an admissible curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub a: f64,
    pub b: f64,
    pub da: f64,
    pub db: f64,
}

/// Plane curve s ↦ (a(s), b(s)) with (λ − s, 0) for s ≤ 0 and (0, −s) for
/// s ≥ ε, defined on `domain`.
#[derive(Clone, Debug)]
pub struct AdmissibleCurve {
    pub lambda: f64,
    pub eps: f64,
    pub domain: (f64, f64),
    rep: Arc<CurveRep>,
}

impl AdmissibleCurve {
    /// The straight model a = λ(1 − s/ε), b = −s on (0, ε).
    pub fn straight(lambda: f64, eps: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("eps", eps)?;
        Ok(Self { lambda, eps, domain: (f64::NEG_INFINITY, f64::INFINITY), rep: Arc::new(CurveRep::Straight) })
    }

    /// Same curve restricted to a parameter window.
    pub fn restricted(&self, lo: f64, hi: f64) -> Self {
        Self { lambda: self.lambda, eps: self.eps, domain: (lo, hi), rep: self.rep.clone() }
    }

    pub fn eval(&self, s: f64) -> CurvePoint {
        if s <= 0.0 {
            return CurvePoint { a: self.lambda - s, b: 0.0, da: -1.0, db: 0.0 };
        }
        if s >= self.eps {
            return CurvePoint { a: 0.0, b: -s, da: 0.0, db: -1.0 };
        }
        match &*self.rep {
            CurveRep::Straight => CurvePoint { a: self.lambda * (1.0 - s / self.eps), b: -s, da: -self.lambda / self.eps, db: -1.0 },
            CurveRep::Profile { profile, s1, s2 } => {
                if s >= *s2 {
                    let (v, d) = profile.value_deriv(s);
                    return CurvePoint { a: v, b: -s, da: d, db: -1.0 };
                }
                let (w, dw) = smooth_step((s - s1) / (s2 - s1), 1.0);
                let dw = dw / (s2 - s1);
                let (v, d) = profile.value_deriv(s);
                let lin = self.lambda - s;
                let a = (1.0 - w) * lin + w * v;
                let da = -(1.0 - w) + w * d + dw * (v - lin);
                let r = profile.inverse(a);
                let nd = profile.deriv(r);
                let db = if nd.is_finite() && nd != 0.0 { -da / nd } else { 0.0 };
                CurvePoint { a, b: -r, da, db }
            }
        }
    }

    fn profile_value_deriv(&self, r: f64) -> (f64, f64) {
        if r >= self.eps {
            return (0.0, 0.0);
        }
        if r <= 0.0 {
            return (self.lambda, f64::NEG_INFINITY);
        }
        // b is strictly decreasing on (0, ε) with b(0) = 0, b(ε) = −ε.
        let (mut lo, mut hi) = (0.0f64, self.eps);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if -self.eval(mid).b < r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let p = self.eval(0.5 * (lo + hi));
        (p.a, if p.db != 0.0 { -p.da / p.db } else { f64::NEG_INFINITY })
    }
}

/// The profile ν(r) = a(b⁻¹(−r)) captured by an admissible curve.
pub fn profile_from_curve(c: &AdmissibleCurve) -> Result<Profile> {
    if !(c.domain.0 <= 0.0 && c.domain.1 >= c.eps) {
        return Err(Error::NotInvertible(format!("domain [{}, {}] does not cover (0, ε = {})", c.domain.0, c.domain.1, c.eps)));
    }
    let n = 2000;
    let mut prev_b = 0.0;
    for j in 1..n {
        let s = c.eps * j as f64 / n as f64;
        let p = c.eval(s);
        if !(p.b < prev_b) || !(p.db <= 0.0) {
            return Err(Error::NotInvertible(format!("b is not strictly decreasing near s = {s}")));
        }
        prev_b = p.b;
    }
    Ok(Profile {
        kind: ProfileKind::Admissible,
        lambda: c.lambda,
        eps: c.eps,
        alpha: f64::INFINITY,
        eval: Arc::new(Eval::FromCurve(c.clone())),
    })
}

/// An admissible curve tracing {(ν(r), −r)}: a = λ − s near s = 0 and
/// b = −s once ν(s) + 2s ≤ λ fails.
pub fn curve_from_profile(p: &Profile) -> Result<AdmissibleCurve> {
    if p.kind != ProfileKind::Admissible {
        return Err(Error::InvalidParameter("curve_from_profile needs an admissible profile".into()));
    }
    // Largest s on a log grid below which ν(t) + 2t ≤ λ holds.
    let mut s2 = 0.0;
    for j in 0..=240 {
        let t = p.eps * 10f64.powf(-12.0 + 12.0 * j as f64 / 240.0) * 0.5;
        if p.value(t) + 2.0 * t <= p.lambda {
            s2 = t;
        } else {
            break;
        }
    }
    if s2 == 0.0 {
        return Err(Error::NotInvertible("profile leaves no room for the linear seam".into()));
    }
    Ok(AdmissibleCurve {
        lambda: p.lambda,
        eps: p.eps,
        domain: (f64::NEG_INFINITY, f64::INFINITY),
        rep: Arc::new(CurveRep::Profile { profile: p.clone(), s1: s2 / 2.0, s2 }),
    })
}

/// Log-spaced radii in (0, ε), from ε·10^{lo_exp} to ε·(1 − margin).
pub fn log_radii(eps: f64, n: usize, lo_exp: f64, margin: f64) -> Vec<f64> {
    let hi = (1.0 - margin).log10();
    (0..n)
        .map(|j| {
            let u = if n > 1 { j as f64 / (n - 1) as f64 } else { 0.5 };
            eps * 10f64.powf(lo_exp + u * (hi - lo_exp))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_template_basics() {
        let p = make_admissible(1.0, 0.5).unwrap();
        assert_eq!(p.value(0.5), 0.0);
        assert_eq!(p.value(1.5), 0.0);
        assert!((p.value(1e-9) - 1.0).abs() < 1e-6);
        for r in log_radii(0.5, 1000, -8.0, 1e-2) {
            assert!(p.deriv(r) < 0.0, "r = {r}");
        }
        p.check_invariants(1000).unwrap();
    }

    #[test]
    fn admissible_rejects_bad_input() {
        assert!(matches!(make_admissible(0.0, 0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_admissible(1.0, -0.5), Err(Error::InvalidParameter(_))));
        assert!(matches!(make_admissible(PI, 0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let profiles = vec![
            make_admissible(1.3, 0.4).unwrap(),
            make_semi_admissible(2, 1.0, 0.5).unwrap(),
            make_semi_admissible(1, 0.0, 0.5).unwrap(),
            make_matched_admissible(&make_dehn_spherical(0.8).unwrap(), 0.1).unwrap(),
            dehn_extension(&make_admissible(0.4, 0.3).unwrap(), 0.1).unwrap(),
        ];
        for p in profiles {
            for &r in &[0.01, 0.05, 0.11, 0.2, 0.27, 0.33] {
                if r >= p.eps {
                    continue;
                }
                let h = 1e-6;
                let fd = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
                assert!((fd - p.deriv(r)).abs() < 1e-5 * (1.0 + fd.abs()), "{p}: r={r} fd={fd} d={}", p.deriv(r));
            }
        }
    }

    #[test]
    fn flatness_bound_and_high_derivatives() {
        for &(lambda, eps) in &[(1.0, 0.5), (2.0, 0.3), (0.5, 1.2)] {
            let p = make_admissible(lambda, eps).unwrap();
            let c = flatness_constant(&p);
            for &h in &[1e-1, 1e-2] {
                if h < eps {
                    assert!(p.value(eps - h) <= c * (-1.0 / (2.0 * h)).exp());
                }
            }
            // Derivatives of order ≤ 4 by finite differences of ν′ at ε − 1e−3.
            let r = eps - 1e-3;
            let h = 1e-4;
            let d1 = p.deriv(r);
            let d2 = (p.deriv(r + h) - p.deriv(r - h)) / (2.0 * h);
            let d3 = (p.deriv(r + h) - 2.0 * d1 + p.deriv(r - h)) / (h * h);
            let d4 = (p.deriv(r + 2.0 * h) - 2.0 * p.deriv(r + h) + 2.0 * p.deriv(r - h) - p.deriv(r - 2.0 * h)) / (2.0 * h * h * h);
            for d in [p.value(r), d1, d2, d3, d4] {
                assert!(d.abs() < 1e-6);
            }
        }
    }

    #[test]
    fn semi_admissible_shapes() {
        let d = make_semi_admissible(2, 1.0, 0.5).unwrap();
        for &r in &[0.01, 0.05, 0.1] {
            assert!((d.value(r) - (2.0 * PI - r)).abs() < 1e-12);
        }
        let flat = make_semi_admissible(1, 0.0, 0.5).unwrap();
        for &r in &[0.01, 0.05, 0.1] {
            assert!((flat.value(r) - PI).abs() < 1e-12);
        }
        assert_eq!(d.value(0.5), 0.0);
        d.check_invariants(1000).unwrap();
        flat.check_invariants(1000).unwrap();
        make_dehn(0.5).unwrap().check_invariants(1000).unwrap();
        make_dehn_spherical(0.5).unwrap().check_invariants(1000).unwrap();
    }

    #[test]
    fn round_trip_straight_curve() {
        let c = AdmissibleCurve::straight(1.0, 0.5).unwrap();
        let p = profile_from_curve(&c).unwrap();
        let c2 = curve_from_profile(&p).unwrap();
        let p2 = profile_from_curve(&c2).unwrap();
        for r in log_radii(0.5, 1000, -6.0, 1e-3) {
            assert!((p.value(r) - (1.0 - r / 0.5)).abs() < 1e-8);
            assert!((p2.value(r) - p.value(r)).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn round_trip_template() {
        let p = make_admissible(1.0, 0.5).unwrap();
        let c = curve_from_profile(&p).unwrap();
        let q = profile_from_curve(&c).unwrap();
        for r in log_radii(0.5, 1000, -9.0, 1e-3) {
            assert!((q.value(r) - p.value(r)).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn curve_invariants() {
        let p = make_admissible(1.0, 0.5).unwrap();
        let c = curve_from_profile(&p).unwrap();
        for j in 0..50 {
            let s = -1.0 + j as f64 * 0.02;
            let pt = c.eval(s);
            assert_eq!((pt.a, pt.b), (1.0 - s, 0.0));
        }
        for j in 1..1000 {
            let s = 0.5 * j as f64 / 1000.0;
            let pt = c.eval(s);
            // Strict monotonicity up to underflow of the flat ends.
            assert!(pt.da < 0.0 || pt.a < 1e-300, "s = {s}: {pt:?}");
            assert!(pt.db < 0.0 || pt.b > -1e-300, "s = {s}: {pt:?}");
        }
        for j in 0..50 {
            let s = 0.5 + j as f64 * 0.02;
            let pt = c.eval(s);
            assert_eq!((pt.a, pt.b), (0.0, -s));
        }
    }

    #[test]
    fn degenerate_domain_not_invertible() {
        let c = AdmissibleCurve::straight(1.0, 0.5).unwrap().restricted(f64::NEG_INFINITY, 0.0);
        assert!(matches!(profile_from_curve(&c), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn isotopy_endpoints_and_band() {
        let p0 = make_admissible(1.0, 0.5).unwrap();
        let p1 = make_admissible(2.5, 0.7).unwrap();
        let a = profile_isotopy(&p0, &p1, 0.0).unwrap();
        let b = profile_isotopy(&p0, &p1, 1.0).unwrap();
        for r in log_radii(0.7, 100, -6.0, 1e-3) {
            assert!((a.value(r) - p0.value(r)).abs() < 1e-12);
            assert!((b.value(r) - p1.value(r)).abs() < 1e-12);
        }
        let mid = profile_isotopy(&p0, &p1, 0.5).unwrap();
        assert!((mid.lambda - 1.75).abs() < 1e-15);
        mid.check_invariants(1000).unwrap();
        let p2 = make_admissible(4.0, 0.5).unwrap();
        assert!(matches!(profile_isotopy(&p0, &p2, 0.5), Err(Error::BandMismatch(_))));
    }

    #[test]
    fn matched_profile_agrees_beyond_delta() {
        let d = make_dehn_spherical(0.8).unwrap();
        let m = make_matched_admissible(&d, 0.1).unwrap();
        m.check_invariants(1000).unwrap();
        for j in 0..100 {
            let r = 0.1 + 0.7 * j as f64 / 100.0;
            assert_eq!(m.value(r), d.value(r));
        }
    }

    #[test]
    fn parse_round_trip() {
        for s in ["admissible:lambda=1,eps=0.5", "semi:k=2,alpha=1,eps=0.5", "dehn:eps=0.5", "dehn-spherical:eps=0.4"] {
            let p = Profile::parse(s).unwrap();
            let q = Profile::parse(&p.config_string().unwrap()).unwrap();
            assert_eq!(p.value(0.1), q.value(0.1));
        }
        assert!(matches!(Profile::parse("admissible:lambda=x"), Err(Error::Schema(_))));
        assert!(matches!(Profile::parse("nonsense"), Err(Error::Schema(_))));
    }
}
