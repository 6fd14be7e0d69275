//! Graded Lagrangian planes in signed products of standard symplectic spaces.
//!
//! A plane is stored as a unitary frame `U`; the plane is the real column span
//! `U·ℝⁿ`. Coordinates on a factor with sign −1 are conjugated, so the
//! symplectic form is standard in stored coordinates and a single code path
//! serves `M` and `M⁻`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for frame checks.
pub const TAU_LIN: f64 = 1e-10;
/// Tolerance for clustering eigenvalues at 1.
pub const TAU_EIG: f64 = 1e-8;
/// Tolerance for integrality of indices.
pub const TAU_INT: f64 = 1e-6;

pub type CMat = DMatrix<Complex64>;

/// Product of standard symplectic vector spaces, some with negated form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymplecticSpace {
    pub factor_dims: Vec<usize>,
    pub factor_signs: Vec<i8>,
}

impl SymplecticSpace {
    pub fn new(factor_dims: Vec<usize>, factor_signs: Vec<i8>) -> Result<Self> {
        if factor_dims.len() != factor_signs.len() {
            return Err(Error::InvalidSpace(format!("{} dims but {} signs", factor_dims.len(), factor_signs.len())));
        }
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(Error::InvalidSpace("factor dimensions must be positive".into()));
        }
        if factor_signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpace("factor signs must be +1 or -1".into()));
        }
        Ok(Self { factor_dims, factor_signs })
    }

    /// The standard space ℂⁿ.
    pub fn standard(n: usize) -> Self {
        Self { factor_dims: vec![n], factor_signs: vec![1] }
    }

    /// ℂⁿ × ℂⁿ⁻, the home of the diagonal.
    pub fn doubled(n: usize) -> Self {
        Self { factor_dims: vec![n, n], factor_signs: vec![1, -1] }
    }

    /// Total complex dimension.
    pub fn dim(&self) -> usize {
        self.factor_dims.iter().sum()
    }

    pub fn product(&self, other: &SymplecticSpace) -> SymplecticSpace {
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        let mut factor_signs = self.factor_signs.clone();
        factor_signs.extend_from_slice(&other.factor_signs);
        SymplecticSpace { factor_dims, factor_signs }
    }

    pub fn negated(&self) -> SymplecticSpace {
        SymplecticSpace { factor_dims: self.factor_dims.clone(), factor_signs: self.factor_signs.iter().map(|s| -s).collect() }
    }
}

/// A Lagrangian plane together with a real lift θ of its squared phase.
#[derive(Clone, Debug, PartialEq)]
pub struct GradedLagrangianPlane {
    space: SymplecticSpace,
    frame: CMat,
    theta: f64,
}

/// Raw index value together with its nearest integer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexValue {
    pub raw: f64,
    pub rounded: i64,
}

impl IndexValue {
    fn from_raw(raw: f64) -> Self {
        Self { raw, rounded: raw.round() as i64 }
    }

    /// Distance of the raw value from the nearest integer.
    pub fn defect(&self) -> f64 {
        (self.raw - self.rounded as f64).abs()
    }
}

/// One eigenpair of a symmetric unitary matrix.
#[derive(Clone, Debug)]
pub struct EigenPhase {
    /// Phase in [0, 2π).
    pub phase: f64,
    pub value: Complex64,
    /// Real unit eigenvector, sign normalized.
    pub vector: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct PlaneJson {
    dims: Vec<usize>,
    signs: Vec<i8>,
    frame: Vec<[f64; 2]>,
    theta: f64,
}

fn unitarity_defect(u: &CMat) -> f64 {
    let n = u.nrows();
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

fn det_squared_of(u: &CMat) -> Complex64 {
    let d = u.determinant();
    let d2 = d * d;
    d2 / d2.norm()
}

/// Standard symplectic pairing of two vectors in stored coordinates.
pub fn omega(u: &[Complex64], v: &[Complex64]) -> f64 {
    -u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>().im
}

impl GradedLagrangianPlane {
    /// Builds a plane and validates unitarity and grading consistency.
    pub fn new(space: SymplecticSpace, frame: CMat, theta: f64) -> Result<Self> {
        let n = space.dim();
        if frame.nrows() != n || frame.ncols() != n {
            return Err(Error::InvalidFrame(format!("frame is {}x{} but the space has dimension {n}", frame.nrows(), frame.ncols())));
        }
        let defect = unitarity_defect(&frame);
        if !(defect < TAU_LIN) {
            return Err(Error::InvalidFrame(format!("unitarity defect {defect:e}")));
        }
        let phase = Complex64::from_polar(1.0, 2.0 * PI * theta);
        let mismatch = (phase - det_squared_of(&frame)).norm();
        if !(mismatch < TAU_LIN) {
            return Err(Error::InvalidFrame(format!("grading {theta} inconsistent with det² (mismatch {mismatch:e})")));
        }
        Ok(Self { space, frame, theta })
    }

    /// Builds a plane whose grading is the lift of det² closest to `theta_hint`.
    pub fn with_grading_near(space: SymplecticSpace, frame: CMat, theta_hint: f64) -> Result<Self> {
        let defect = unitarity_defect(&frame);
        if !(defect < TAU_LIN) {
            return Err(Error::InvalidFrame(format!("unitarity defect {defect:e}")));
        }
        let base = det_squared_of(&frame).arg() / (2.0 * PI);
        let theta = base + (theta_hint - base).round();
        Self::new(space, frame, theta)
    }

    /// ℝⁿ in ℂⁿ with the given grading (must be an integer).
    pub fn real(n: usize, theta: f64) -> Result<Self> {
        Self::new(SymplecticSpace::standard(n), CMat::identity(n, n), theta)
    }

    /// ℝᵏ × iℝⁿ⁻ᵏ in ℂⁿ with the given grading.
    pub fn conormal(n: usize, k: usize, theta: f64) -> Result<Self> {
        if k > n {
            return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
        }
        let mut frame = CMat::identity(n, n);
        for j in k..n {
            frame[(j, j)] = Complex64::i();
        }
        Self::new(SymplecticSpace::standard(n), frame, theta)
    }

    pub fn space(&self) -> &SymplecticSpace {
        &self.space
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// The grading shift L[k], which subtracts k from θ.
    pub fn shifted(&self, k: i64) -> Self {
        Self { space: self.space.clone(), frame: self.frame.clone(), theta: self.theta - k as f64 }
    }

    /// Right-multiplies the frame by a real orthogonal matrix; the plane is unchanged.
    pub fn regauged(&self, o: &DMatrix<f64>) -> Result<Self> {
        let oc = o.map(|x| Complex64::new(x, 0.0));
        Self::new(self.space.clone(), &self.frame * oc, self.theta)
    }

    /// Largest |ω| over pairs of frame columns.
    pub fn omega_residual(&self) -> f64 {
        let n = self.dim();
        let cols: Vec<Vec<Complex64>> = (0..n).map(|j| self.frame.column(j).iter().copied().collect()).collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max(omega(&cols[i], &cols[j]).abs());
            }
        }
        worst
    }

    pub fn to_json(&self) -> serde_json::Value {
        let n = self.dim();
        let mut frame = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.frame[(i, j)];
                frame.push([z.re, z.im]);
            }
        }
        serde_json::to_value(PlaneJson {
            dims: self.space.factor_dims.clone(),
            signs: self.space.factor_signs.clone(),
            frame,
            theta: self.theta,
        })
        .expect("plane serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: PlaneJson = serde_json::from_value(value.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let space = SymplecticSpace::new(raw.dims, raw.signs)?;
        let n = space.dim();
        if raw.frame.len() != n * n {
            return Err(Error::Schema(format!("frame has {} entries, expected {}", raw.frame.len(), n * n)));
        }
        let frame = CMat::from_row_iterator(n, n, raw.frame.iter().map(|p| Complex64::new(p[0], p[1])));
        Self::new(space, frame, raw.theta)
    }
}

/// Normalized squared determinant det(U)²/|det(U)²|.
pub fn det_squared_phase(plane: &GradedLagrangianPlane) -> Result<Complex64> {
    let defect = unitarity_defect(&plane.frame);
    if !(defect < TAU_LIN) {
        return Err(Error::InvalidFrame(format!("unitarity defect {defect:e}")));
    }
    Ok(det_squared_of(&plane.frame))
}

fn sym2_smallest_eigvec(g00: f64, g01: f64, g11: f64) -> (f64, f64) {
    let phi = 0.5 * (2.0 * g01).atan2(g00 - g11);
    (-phi.sin(), phi.cos())
}

fn off_norm(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)] * m[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Simultaneous Jacobi diagonalization of two commuting real symmetric matrices.
/// Returns `V` with `VᵀAV` and `VᵀBV` diagonal.
pub fn joint_jacobi(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut ms = [a.clone(), b.clone()];
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = ms.iter().map(|m| m.norm()).sum::<f64>().max(1e-300);
    for _sweep in 0..100 {
        let off: f64 = ms.iter().map(off_norm).sum();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut g00, mut g01, mut g11) = (0.0, 0.0, 0.0);
                for m in ms.iter() {
                    let h0 = 0.5 * (m[(p, p)] - m[(q, q)]);
                    let h1 = m[(p, q)];
                    g00 += h0 * h0;
                    g01 += h0 * h1;
                    g11 += h1 * h1;
                }
                if g11 <= 1e-32 * scale * scale {
                    continue;
                }
                let (mut u0, mut u1) = sym2_smallest_eigvec(g00, g01, g11);
                if u1 < 0.0 {
                    u0 = -u0;
                    u1 = -u1;
                }
                let theta = 0.5 * u0.atan2(u1);
                let (s, c) = theta.sin_cos();
                for m in ms.iter_mut() {
                    // M ← JᵀMJ with J_pp = c, J_pq = s, J_qp = −s, J_qq = c.
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    v
}

fn normalize_sign(v: &mut DVector<f64>) {
    if let Some(x) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if x < 0.0 {
            v.neg_mut();
        }
    }
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigen-decomposition of a complex symmetric unitary matrix `S = A + iB`.
/// `A` and `B` commute, so a real orthogonal basis diagonalizes both.
/// Pairs are sorted by phase with ties broken by eigenvector order.
pub fn eigenphases(s: &CMat) -> Vec<EigenPhase> {
    let a = s.map(|z| z.re);
    let b = s.map(|z| z.im);
    let a = (&a + a.transpose()) * 0.5;
    let b = (&b + b.transpose()) * 0.5;
    let v = joint_jacobi(&a, &b);
    let da = v.transpose() * &a * &v;
    let db = v.transpose() * &b * &v;
    let n = s.nrows();
    let mut out: Vec<EigenPhase> = (0..n)
        .map(|j| {
            let value = Complex64::new(da[(j, j)], db[(j, j)]);
            let mut phase = value.arg();
            if phase < 0.0 {
                phase += 2.0 * PI;
            }
            let mut vector = v.column(j).into_owned();
            normalize_sign(&mut vector);
            EigenPhase { phase, value, vector }
        })
        .collect();
    out.sort_by(|x, y| x.phase.partial_cmp(&y.phase).unwrap_or(std::cmp::Ordering::Equal).then_with(|| lex_cmp(&x.vector, &y.vector)));
    out
}

fn same_space(p0: &GradedLagrangianPlane, p1: &GradedLagrangianPlane) -> Result<()> {
    if p0.space != p1.space {
        return Err(Error::InvalidSpace("planes live in different spaces".into()));
    }
    Ok(())
}

/// Ordered Angle(Λ₀, Λ₁): the sum of φ/(4π) over eigenphases φ ∈ (0, 2π) of
/// `S = WWᵀ`, `W = U₀⁻¹U₁`, with intersection directions excluded.
pub fn angle(p0: &GradedLagrangianPlane, p1: &GradedLagrangianPlane) -> Result<f64> {
    same_space(p0, p1)?;
    let w = p0.frame.adjoint() * &p1.frame;
    let s = &w * w.transpose();
    let wt = w.transpose();
    let mut total = 0.0;
    for e in eigenphases(&s) {
        if (e.value - Complex64::new(1.0, 0.0)).norm() < TAU_EIG {
            let vc = e.vector.map(|x| Complex64::new(x, 0.0));
            let image = &wt * vc;
            let residual = image.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
            if residual < TAU_LIN {
                continue;
            }
            return Err(Error::DegenerateAngle(residual));
        }
        total += e.phase / (4.0 * PI);
    }
    Ok(total)
}

/// Ind(Λ₀, Λ₁) = n + θ₁ − θ₀ − 2·Angle(Λ₀, Λ₁).
pub fn index(p0: &GradedLagrangianPlane, p1: &GradedLagrangianPlane) -> Result<IndexValue> {
    let a = angle(p0, p1)?;
    let n = p0.dim() as f64;
    Ok(IndexValue::from_raw(n + p1.theta - p0.theta - 2.0 * a))
}

/// Block-diagonal product plane with summed grading.
pub fn product_plane(a: &GradedLagrangianPlane, b: &GradedLagrangianPlane) -> Result<GradedLagrangianPlane> {
    let (na, nb) = (a.dim(), b.dim());
    let mut frame = CMat::zeros(na + nb, na + nb);
    frame.view_mut((0, 0), (na, na)).copy_from(&a.frame);
    frame.view_mut((na, na), (nb, nb)).copy_from(&b.frame);
    GradedLagrangianPlane::new(a.space.product(&b.space), frame, a.theta + b.theta)
}

/// The same real subspace viewed in the negated space: the frame is
/// conjugated and the grading negated.
pub fn negate(plane: &GradedLagrangianPlane) -> Result<GradedLagrangianPlane> {
    GradedLagrangianPlane::new(plane.space.negated(), plane.frame.map(|z| z.conj()), -plane.theta)
}

/// Diagonal of ℂⁿ × ℂⁿ⁻ with its canonical grading −n/2.
pub fn canonical_diagonal(space: &SymplecticSpace) -> Result<GradedLagrangianPlane> {
    let ok = space.factor_dims.len() == 2 && space.factor_dims[0] == space.factor_dims[1] && space.factor_signs == [1, -1];
    if !ok {
        return Err(Error::InvalidSpace("expected ℂⁿ × ℂⁿ⁻ with signs (+1, -1)".into()));
    }
    let n = space.factor_dims[0];
    let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let ih = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    let mut frame = CMat::zeros(2 * n, 2 * n);
    for j in 0..n {
        // (e_j, e_j) and (i e_j, i e_j); the second factor is stored conjugated.
        frame[(j, j)] = h;
        frame[(n + j, j)] = h;
        frame[(j, n + j)] = ih;
        frame[(n + j, n + j)] = -ih;
    }
    GradedLagrangianPlane::new(space.clone(), frame, -(n as f64) / 2.0)
}

/// Tangent plane at the origin of Graph(dh), h(q) = ½qᵀAq, graded by
/// continuation along t ↦ Graph(t·dh) from the base grading.
pub fn graph_plane(a: &DMatrix<f64>, base: &GradedLagrangianPlane) -> Result<GradedLagrangianPlane> {
    let n = base.dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::InvalidParameter(format!("quadratic form must be {n}x{n}")));
    }
    if (a - a.transpose()).amax() > 1e-12 * (1.0 + a.amax()) {
        return Err(Error::InvalidParameter("quadratic form must be symmetric".into()));
    }
    if base.frame.iter().any(|z| z.im.abs() > TAU_LIN) {
        return Err(Error::InvalidFrame("base must be the zero-section plane ℝⁿ".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(a.clone());
    let q = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let mut d = CMat::zeros(n, n);
    let mut phase_shift = 0.0;
    for (j, &aj) in eig.eigenvalues.iter().enumerate() {
        d[(j, j)] = Complex64::new(1.0, -aj) / (1.0 + aj * aj).sqrt();
        phase_shift += aj.atan() / PI;
    }
    let frame = &q * d * q.adjoint();
    GradedLagrangianPlane::new(base.space.clone(), frame, base.theta - phase_shift)
}

/// The pair (ℝⁿ graded n−k−1, ℝᵏ × iℝⁿ⁻ᵏ graded (n−k)/2).
pub fn index_rn_nrk_pair(n: usize, k: usize) -> Result<(GradedLagrangianPlane, GradedLagrangianPlane)> {
    if k > n {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds n = {n}")));
    }
    let l1 = GradedLagrangianPlane::real(n, n as f64 - k as f64 - 1.0)?;
    let l2 = GradedLagrangianPlane::conormal(n, k, (n - k) as f64 / 2.0)?;
    Ok((l1, l2))
}

/// A unitary matrix from the QR factorization of a random complex matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let qr = m.qr();
    let q = qr.q();
    let r = qr.r();
    // Fix the phase ambiguity so the factor is well conditioned.
    let mut d = CMat::identity(n, n);
    for j in 0..n {
        let rjj = r[(j, j)];
        if rjj.norm() > 0.0 {
            d[(j, j)] = rjj / rjj.norm();
        }
    }
    q * d
}

/// A real orthogonal matrix from the QR factorization of a random real matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let m = DMatrix::<f64>::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// A random Lagrangian plane of ℂⁿ graded by the lift of det² in [0, 1).
pub fn random_plane<R: Rng>(space: &SymplecticSpace, rng: &mut R) -> GradedLagrangianPlane {
    let u = random_unitary(space.dim(), rng);
    GradedLagrangianPlane::with_grading_near(space.clone(), u, 0.5).expect("random unitary frame")
}
