//! Finite graded cochain complexes over a prime field (𝔽₂ by default),
//! mapping cones, homology, quasi-isomorphism certificates and the rank-one
//! cone transport.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense matrix over 𝔽_p, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpMatrix {
    pub rows: usize,
    pub cols: usize,
    pub p: u32,
    data: Vec<u32>,
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let mut result = 1u64;
    let mut base = a as u64 % p as u64;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p as u64;
        }
        base = base * base % p as u64;
        e >>= 1;
    }
    result as u32
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

impl FpMatrix {
    pub fn zeros(rows: usize, cols: usize, p: u32) -> Self {
        Self { rows, cols, p, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize, p: u32) -> Self {
        let mut m = Self::zeros(n, n, p);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u32) {
        self.data[i * self.cols + j] = v % self.p;
    }

    pub fn add_at(&mut self, i: usize, j: usize, v: u32) {
        let cur = self.get(i, j);
        self.set(i, j, (cur + v % self.p) % self.p);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn mul(&self, other: &FpMatrix) -> FpMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in product");
        let p = self.p as u64;
        let mut out = FpMatrix::zeros(self.rows, other.cols, self.p);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k) as u64;
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j) as u64;
                    if b != 0 {
                        let idx = i * out.cols + j;
                        out.data[idx] = ((out.data[idx] as u64 + a * b) % p) as u32;
                    }
                }
            }
        }
        out
    }

    pub fn add(&self, other: &FpMatrix) -> FpMatrix {
        let mut out = self.clone();
        for (x, y) in out.data.iter_mut().zip(&other.data) {
            *x = (*x + *y) % self.p;
        }
        out
    }

    pub fn scale(&self, t: u32) -> FpMatrix {
        let mut out = self.clone();
        for x in out.data.iter_mut() {
            *x = ((*x as u64 * t as u64) % self.p as u64) as u32;
        }
        out
    }

    pub fn neg(&self) -> FpMatrix {
        self.scale(self.p - 1)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> FpMatrix {
        let mut out = FpMatrix::zeros(rows.len(), cols.len(), self.p);
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }

    /// Reduced row echelon form and pivot columns.
    pub fn rref(&self) -> (FpMatrix, Vec<usize>) {
        let mut m = self.clone();
        let p = self.p as u64;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pr) = (r..m.rows).find(|&i| m.get(i, c) != 0) else { continue };
            if pr != r {
                for j in 0..m.cols {
                    m.data.swap(pr * m.cols + j, r * m.cols + j);
                }
            }
            let inv = inv_mod(m.get(r, c), self.p) as u64;
            for j in 0..m.cols {
                let v = m.get(r, j) as u64;
                m.set(r, j, (v * inv % p) as u32);
            }
            for i in 0..m.rows {
                if i == r {
                    continue;
                }
                let f = m.get(i, c) as u64;
                if f == 0 {
                    continue;
                }
                for j in 0..m.cols {
                    let v = (m.get(i, j) as u64 + p * p - f * m.get(r, j) as u64 % p) % p;
                    m.set(i, j, v as u32);
                }
            }
            pivots.push(c);
            r += 1;
        }
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Basis of the right kernel, as columns of the returned matrix.
    pub fn kernel(&self) -> FpMatrix {
        let (r, pivots) = self.rref();
        let free: Vec<usize> = (0..self.cols).filter(|c| !pivots.contains(c)).collect();
        let mut out = FpMatrix::zeros(self.cols, free.len(), self.p);
        for (k, &f) in free.iter().enumerate() {
            out.set(f, k, 1);
            for (row, &pc) in pivots.iter().enumerate() {
                let v = r.get(row, f);
                out.set(pc, k, (self.p - v) % self.p);
            }
        }
        out
    }

    /// Solves `self · x = b` for a single column `b`.
    pub fn solve(&self, b: &[u32]) -> Option<Vec<u32>> {
        let mut aug = FpMatrix::zeros(self.rows, self.cols + 1, self.p);
        for (i, &bi) in b.iter().enumerate().take(self.rows) {
            for j in 0..self.cols {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, self.cols, bi);
        }
        let (r, pivots) = aug.rref();
        if pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![0u32; self.cols];
        for (row, &pc) in pivots.iter().enumerate() {
            x[pc] = r.get(row, self.cols);
        }
        Some(x)
    }

    pub fn column(&self, j: usize) -> Vec<u32> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn hcat(&self, other: &FpMatrix) -> FpMatrix {
        let mut out = FpMatrix::zeros(self.rows, self.cols + other.cols, self.p);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
            for j in 0..other.cols {
                out.set(i, self.cols + j, other.get(i, j));
            }
        }
        out
    }

    fn from_columns(rows: usize, p: u32, cols: &[Vec<u32>]) -> FpMatrix {
        let mut out = FpMatrix::zeros(rows, cols.len(), p);
        for (j, c) in cols.iter().enumerate() {
            for (i, &v) in c.iter().enumerate() {
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn random<R: Rng>(rows: usize, cols: usize, p: u32, rng: &mut R) -> FpMatrix {
        let mut m = FpMatrix::zeros(rows, cols, p);
        for x in m.data.iter_mut() {
            *x = rng.gen_range(0..p);
        }
        m
    }
}

/// A generator of a complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    pub deg: i64,
}

/// Finite graded cochain complex over 𝔽_p. Column j of `d` is the image of
/// generator j.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct F2Complex {
    pub generators: Vec<Generator>,
    pub d: FpMatrix,
}

/// Closed graded map between complexes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct F2ChainMap {
    pub source: F2Complex,
    pub target: F2Complex,
    pub degree: i64,
    pub matrix: FpMatrix,
}

#[derive(Serialize, Deserialize)]
struct ComplexJson {
    generators: Vec<Generator>,
    d: Vec<[u32; 3]>,
    #[serde(default)]
    modulus: Option<u32>,
}

#[derive(Serialize, Deserialize)]
struct MapJson {
    #[serde(default)]
    degree: i64,
    entries: Vec<[u32; 3]>,
}

fn triplets(m: &FpMatrix) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for i in 0..m.rows {
        for j in 0..m.cols {
            let v = m.get(i, j);
            if v != 0 {
                out.push([i as u32, j as u32, v]);
            }
        }
    }
    out
}

fn from_triplets(rows: usize, cols: usize, p: u32, t: &[[u32; 3]]) -> Result<FpMatrix> {
    let mut m = FpMatrix::zeros(rows, cols, p);
    for &[i, j, v] in t {
        if i as usize >= rows || j as usize >= cols {
            return Err(Error::Schema(format!("triplet ({i}, {j}) out of range {rows}x{cols}")));
        }
        m.add_at(i as usize, j as usize, v);
    }
    Ok(m)
}

impl F2Complex {
    /// Validates degree and d² = 0.
    pub fn new(generators: Vec<Generator>, d: FpMatrix) -> Result<Self> {
        let n = generators.len();
        if d.rows != n || d.cols != n {
            return Err(Error::InvalidComplex(format!("differential is {}x{} for {n} generators", d.rows, d.cols)));
        }
        if !is_prime(d.p) {
            return Err(Error::InvalidComplex(format!("modulus {} is not prime", d.p)));
        }
        for i in 0..n {
            for j in 0..n {
                if d.get(i, j) != 0 && generators[i].deg != generators[j].deg + 1 {
                    return Err(Error::InvalidComplex(format!(
                        "d({}) hits {} outside degree + 1",
                        generators[j].label, generators[i].label
                    )));
                }
            }
        }
        if !d.mul(&d).is_zero() {
            return Err(Error::InvalidComplex("d² ≠ 0".into()));
        }
        Ok(Self { generators, d })
    }

    pub fn zero_differential(generators: Vec<Generator>, p: u32) -> Result<Self> {
        let n = generators.len();
        Self::new(generators, FpMatrix::zeros(n, n, p))
    }

    pub fn modulus(&self) -> u32 {
        self.d.p
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Generator indices in degree k.
    pub fn in_degree(&self, k: i64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.generators[i].deg == k).collect()
    }

    pub fn degrees(&self) -> Vec<i64> {
        let mut ds: Vec<i64> = self.generators.iter().map(|g| g.deg).collect();
        ds.sort_unstable();
        ds.dedup();
        ds
    }

    /// Generator counts per degree.
    pub fn histogram(&self) -> BTreeMap<i64, usize> {
        let mut h = BTreeMap::new();
        for g in &self.generators {
            *h.entry(g.deg).or_insert(0) += 1;
        }
        h
    }

    /// The shift C[k], whose degree-j part is C^{j+k}.
    pub fn shifted(&self, k: i64) -> F2Complex {
        let generators = self.generators.iter().map(|g| Generator { label: g.label.clone(), deg: g.deg - k }).collect();
        let d = if k.rem_euclid(2) == 1 { self.d.neg() } else { self.d.clone() };
        F2Complex { generators, d }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.generators.iter().map(|g| if g.deg.rem_euclid(2) == 0 { 1 } else { -1 }).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ComplexJson {
            generators: self.generators.clone(),
            d: triplets(&self.d),
            modulus: if self.d.p == 2 { None } else { Some(self.d.p) },
        })
        .expect("complex serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: ComplexJson = serde_json::from_value(value.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let n = raw.generators.len();
        let p = raw.modulus.unwrap_or(2);
        if !is_prime(p) {
            return Err(Error::Schema(format!("modulus {p} is not prime")));
        }
        let d = from_triplets(n, n, p, &raw.d)?;
        Self::new(raw.generators, d)
    }

    /// Random acyclic-or-not complex built as a direct sum of elementary
    /// pieces conjugated by a random change of basis.
    pub fn random<R: Rng>(max_gens: usize, p: u32, rng: &mut R) -> F2Complex {
        let n = rng.gen_range(1..=max_gens.max(1));
        let mut degs = Vec::new();
        let mut d = FpMatrix::zeros(n, n, p);
        let mut i = 0;
        while i < n {
            let deg = rng.gen_range(-2..=2);
            if i + 1 < n && rng.gen_bool(0.5) {
                degs.push(deg);
                degs.push(deg + 1);
                d.set(i + 1, i, rng.gen_range(1..p));
                i += 2;
            } else {
                degs.push(deg);
                i += 1;
            }
        }
        let generators: Vec<Generator> = degs.iter().enumerate().map(|(k, &deg)| Generator { label: format!("g{k}"), deg }).collect();
        let base = F2Complex { generators, d };
        base.random_change_of_basis(rng)
    }

    /// Conjugates the differential by a random degree-preserving invertible map.
    pub fn random_change_of_basis<R: Rng>(&self, rng: &mut R) -> F2Complex {
        let (g, ginv) = random_graded_automorphism(self, rng);
        F2Complex { generators: self.generators.clone(), d: g.mul(&self.d).mul(&ginv) }
    }
}

fn random_graded_automorphism<R: Rng>(c: &F2Complex, rng: &mut R) -> (FpMatrix, FpMatrix) {
    let n = c.len();
    let p = c.modulus();
    loop {
        let mut g = FpMatrix::zeros(n, n, p);
        for i in 0..n {
            for j in 0..n {
                if c.generators[i].deg == c.generators[j].deg {
                    g.set(i, j, rng.gen_range(0..p));
                }
            }
        }
        if g.rank() == n {
            let mut inv_cols = Vec::with_capacity(n);
            for j in 0..n {
                let mut e = vec![0u32; n];
                e[j] = 1;
                inv_cols.push(g.solve(&e).expect("invertible"));
            }
            let ginv = FpMatrix::from_columns(n, p, &inv_cols);
            return (g, ginv);
        }
    }
}

impl F2ChainMap {
    /// Validates the degree pattern and d_T·f = f·d_S.
    pub fn new(source: F2Complex, target: F2Complex, degree: i64, matrix: FpMatrix) -> Result<Self> {
        if matrix.rows != target.len() || matrix.cols != source.len() {
            return Err(Error::InvalidMap(format!(
                "matrix is {}x{}, expected {}x{}",
                matrix.rows,
                matrix.cols,
                target.len(),
                source.len()
            )));
        }
        if source.modulus() != target.modulus() || matrix.p != source.modulus() {
            return Err(Error::InvalidMap("field mismatch".into()));
        }
        for i in 0..target.len() {
            for j in 0..source.len() {
                if matrix.get(i, j) != 0 && target.generators[i].deg != source.generators[j].deg + degree {
                    return Err(Error::InvalidMap(format!(
                        "entry {} ← {} violates degree {degree}",
                        target.generators[i].label, source.generators[j].label
                    )));
                }
            }
        }
        let lhs = target.d.mul(&matrix);
        let rhs = matrix.mul(&source.d);
        let sign_ok = if degree.rem_euclid(2) == 0 { lhs == rhs } else { lhs == rhs.neg() };
        if !sign_ok {
            return Err(Error::InvalidMap("map does not commute with differentials".into()));
        }
        Ok(Self { source, target, degree, matrix })
    }

    pub fn identity(c: &F2Complex) -> F2ChainMap {
        F2ChainMap { source: c.clone(), target: c.clone(), degree: 0, matrix: FpMatrix::identity(c.len(), c.modulus()) }
    }

    pub fn zero(source: &F2Complex, target: &F2Complex, degree: i64) -> F2ChainMap {
        F2ChainMap {
            source: source.clone(),
            target: target.clone(),
            degree,
            matrix: FpMatrix::zeros(target.len(), source.len(), source.modulus()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(MapJson { degree: self.degree, entries: triplets(&self.matrix) }).expect("map serializes")
    }

    pub fn from_json(source: &F2Complex, target: &F2Complex, value: &serde_json::Value) -> Result<Self> {
        let raw: MapJson = serde_json::from_value(value.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        let m = from_triplets(target.len(), source.len(), source.modulus(), &raw.entries)?;
        Self::new(source.clone(), target.clone(), raw.degree, m)
    }
}

fn check(c: &F2Complex) -> Result<()> {
    F2Complex::new(c.generators.clone(), c.d.clone()).map(|_| ())
}

fn d_block(c: &F2Complex, k: i64) -> FpMatrix {
    c.d.submatrix(&c.in_degree(k + 1), &c.in_degree(k))
}

/// Ranks of H^k for every degree carrying generators.
pub fn homology(c: &F2Complex) -> Result<BTreeMap<i64, usize>> {
    check(c)?;
    let mut out = BTreeMap::new();
    for k in c.degrees() {
        let dim = c.in_degree(k).len();
        let rk_out = d_block(c, k).rank();
        let rk_in = d_block(c, k - 1).rank();
        out.insert(k, dim - rk_out - rk_in);
    }
    Ok(out)
}

/// Total homology rank.
pub fn total_rank(h: &BTreeMap<i64, usize>) -> usize {
    h.values().sum()
}

/// Drops zero entries so rank tables compare cleanly.
pub fn nonzero_ranks(h: &BTreeMap<i64, usize>) -> BTreeMap<i64, usize> {
    h.iter().filter(|(_, &v)| v > 0).map(|(&k, &v)| (k, v)).collect()
}

/// Cycle representatives of a basis of H^k, in coordinates of C^k.
pub fn homology_basis(c: &F2Complex, k: i64) -> Vec<Vec<u32>> {
    let idx = c.in_degree(k);
    let p = c.modulus();
    let z = d_block(c, k).kernel();
    let b = d_block(c, k - 1);
    let mut span = b.clone();
    let mut rank = span.rank();
    let mut reps = Vec::new();
    for j in 0..z.cols {
        let col = z.column(j);
        let cand = span.hcat(&FpMatrix::from_columns(idx.len(), p, std::slice::from_ref(&col)));
        let r = cand.rank();
        if r > rank {
            span = cand;
            rank = r;
            reps.push(col);
        }
    }
    reps
}

/// Rank of the map induced on H^k by a chain map of any degree.
pub fn induced_rank(f: &F2ChainMap, k: i64) -> usize {
    let src_idx = f.source.in_degree(k);
    let tgt_idx = f.target.in_degree(k + f.degree);
    let reps = homology_basis(&f.source, k);
    if reps.is_empty() || tgt_idx.is_empty() {
        return 0;
    }
    let fk = f.matrix.submatrix(&tgt_idx, &src_idx);
    let images: Vec<Vec<u32>> = reps
        .iter()
        .map(|r| {
            let col = FpMatrix::from_columns(src_idx.len(), f.matrix.p, std::slice::from_ref(r));
            fk.mul(&col).column(0)
        })
        .collect();
    let b = d_block(&f.target, k + f.degree - 1);
    let base = b.rank();
    let all = b.hcat(&FpMatrix::from_columns(tgt_idx.len(), f.matrix.p, &images));
    all.rank() - base
}

/// Mapping cone source[1] ⊕ target with differential (a, b) ↦ (−d a, f a + d b).
pub fn cone(f: &F2ChainMap) -> Result<F2Complex> {
    if f.degree != 0 {
        return Err(Error::InvalidMap(format!("cone needs a degree-0 map, got {}", f.degree)));
    }
    let f = F2ChainMap::new(f.source.clone(), f.target.clone(), f.degree, f.matrix.clone())?;
    let (na, nb) = (f.source.len(), f.target.len());
    let p = f.source.modulus();
    let mut generators = Vec::with_capacity(na + nb);
    for g in &f.source.generators {
        generators.push(Generator { label: format!("{}[1]", g.label), deg: g.deg - 1 });
    }
    generators.extend(f.target.generators.iter().cloned());
    let mut d = FpMatrix::zeros(na + nb, na + nb, p);
    let da = f.source.d.neg();
    for i in 0..na {
        for j in 0..na {
            d.set(i, j, da.get(i, j));
        }
    }
    for i in 0..nb {
        for j in 0..na {
            d.set(na + i, j, f.matrix.get(i, j));
        }
        for j in 0..nb {
            d.set(na + i, na + j, f.target.d.get(i, j));
        }
    }
    F2Complex::new(generators, d)
}

/// Folds cones left: Cone(⋯Cone(Cone(f₁) → C₃)⋯). Each later map is given
/// by its target and its matrix on the generators of the running cone.
pub fn iterated_cone(first: &F2ChainMap, rest: &[(F2Complex, FpMatrix)]) -> Result<F2Complex> {
    let mut current = cone(first)?;
    for (target, m) in rest {
        let f = F2ChainMap::new(current, target.clone(), 0, m.clone())?;
        current = cone(&f)?;
    }
    Ok(current)
}

/// Outcome of a quasi-isomorphism test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuasiIsoCertificate {
    pub is_quasi_iso: bool,
    /// Per degree: (source rank, target rank, induced rank).
    pub degrees: BTreeMap<i64, (usize, usize, usize)>,
    pub failing_degree: Option<i64>,
    /// Cycle representatives of source homology bases.
    pub source_bases: BTreeMap<i64, Vec<Vec<u32>>>,
}

/// True iff the induced map on homology is an isomorphism in every degree.
pub fn quasi_iso(f: &F2ChainMap) -> QuasiIsoCertificate {
    let hs = homology(&f.source).unwrap_or_default();
    let ht = homology(&f.target).unwrap_or_default();
    let mut degs: Vec<i64> = hs.keys().copied().collect();
    degs.extend(ht.keys().map(|k| k - f.degree));
    degs.sort_unstable();
    degs.dedup();
    let mut degrees = BTreeMap::new();
    let mut failing = None;
    let mut bases = BTreeMap::new();
    for k in degs {
        let a = hs.get(&k).copied().unwrap_or(0);
        let b = ht.get(&(k + f.degree)).copied().unwrap_or(0);
        let r = induced_rank(f, k);
        if !(a == b && b == r) && failing.is_none() {
            failing = Some(k);
        }
        degrees.insert(k, (a, b, r));
        bases.insert(k, homology_basis(&f.source, k));
    }
    QuasiIsoCertificate { is_quasi_iso: failing.is_none(), degrees, failing_degree: failing, source_bases: bases }
}

/// Explicit quasi-isomorphism Cone(c) → Cone(c′), (a, b) ↦ (a, t·b + η(a)),
/// where η solves c′ = t·c − (d η + η d).
#[derive(Clone, Debug)]
pub struct RankOneTransport {
    pub map: F2ChainMap,
    pub eta: FpMatrix,
    pub certificate: QuasiIsoCertificate,
}

/// Solves for the homotopy η and returns the transport map with its certificate.
pub fn rankone_cone_transport(c: &F2ChainMap, c_prime: &F2ChainMap, t: u32) -> Result<RankOneTransport> {
    let p = c.source.modulus();
    if t.is_multiple_of(p) {
        return Err(Error::InvalidParameter("t must be nonzero in the field".into()));
    }
    if c.degree != 0 || c_prime.degree != 0 || c.source != c_prime.source || c.target != c_prime.target {
        return Err(Error::InvalidMap("maps must be closed degree-0 maps between the same complexes".into()));
    }
    let (a, b) = (&c.source, &c.target);
    let (na, nb) = (a.len(), b.len());
    // Unknowns: η[i][j] for target generator i with deg = deg(source j) − 1.
    let mut unknowns = Vec::new();
    for i in 0..nb {
        for j in 0..na {
            if b.generators[i].deg == a.generators[j].deg - 1 {
                unknowns.push((i, j));
            }
        }
    }
    let rhs = c_prime.matrix.add(&c.matrix.scale(t).neg());
    // −(d_B η + η d_A) = c′ − t c, one equation per entry.
    let mut sys = FpMatrix::zeros(nb * na, unknowns.len(), p);
    let mut vec_b = vec![0u32; nb * na];
    for i in 0..nb {
        for j in 0..na {
            vec_b[i * na + j] = rhs.get(i, j);
        }
    }
    for (u, &(k, l)) in unknowns.iter().enumerate() {
        // η = E_{kl}: (d_B E)_{ij} = d_B[i][k] δ_{jl}; (E d_A)_{ij} = δ_{ik} d_A[l][j].
        for i in 0..nb {
            let v = b.d.get(i, k);
            if v != 0 {
                sys.add_at(i * na + l, u, p - v);
            }
        }
        for j in 0..na {
            let v = a.d.get(l, j);
            if v != 0 {
                sys.add_at(k * na + j, u, p - v);
            }
        }
    }
    let Some(x) = sys.solve(&vec_b) else {
        return Err(Error::NotHomotopic("no η solves c′ − t·c = −(dη + ηd)".into()));
    };
    let mut eta = FpMatrix::zeros(nb, na, p);
    for (u, &(i, j)) in unknowns.iter().enumerate() {
        eta.set(i, j, x[u]);
    }
    let src = cone(c)?;
    let tgt = cone(c_prime)?;
    let mut m = FpMatrix::zeros(na + nb, na + nb, p);
    for j in 0..na {
        m.set(j, j, 1);
        for i in 0..nb {
            m.set(na + i, j, eta.get(i, j));
        }
    }
    for i in 0..nb {
        m.set(na + i, na + i, t);
    }
    let map = F2ChainMap::new(src, tgt, 0, m)?;
    let certificate = quasi_iso(&map);
    if !certificate.is_quasi_iso {
        return Err(Error::InvalidMap("transport map failed the quasi-isomorphism check".into()));
    }
    Ok(RankOneTransport { map, eta, certificate })
}

/// One node of the long exact sequence of a cone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LesNode {
    pub degree: i64,
    pub space: String,
    pub dim: usize,
    pub rank_in: usize,
    pub rank_out: usize,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LesReport {
    pub nodes: Vec<LesNode>,
    pub exact: bool,
}

/// Rank bookkeeping of H(A) → H(B) → H(Cone) → H(A[1]) at every degree.
pub fn les_ranks(f: &F2ChainMap) -> Result<LesReport> {
    let c = cone(f)?;
    let (na, nb) = (f.source.len(), f.target.len());
    let p = f.source.modulus();
    let mut inc = FpMatrix::zeros(na + nb, nb, p);
    for i in 0..nb {
        inc.set(na + i, i, 1);
    }
    let inc = F2ChainMap::new(f.target.clone(), c.clone(), 0, inc)?;
    let mut proj = FpMatrix::zeros(na, na + nb, p);
    for i in 0..na {
        proj.set(i, i, 1);
    }
    let proj = F2ChainMap::new(c.clone(), f.source.clone(), 1, proj)?;
    let ha = homology(&f.source)?;
    let hb = homology(&f.target)?;
    let hc = homology(&c)?;
    let mut degs: Vec<i64> = ha.keys().chain(hb.keys()).chain(hc.keys()).copied().collect();
    degs.sort_unstable();
    degs.dedup();
    let (lo, hi) = match (degs.first(), degs.last()) {
        (Some(&l), Some(&h)) => (l - 1, h + 1),
        _ => (0, 0),
    };
    let mut nodes = Vec::new();
    for k in lo..=hi {
        let dim_a = ha.get(&k).copied().unwrap_or(0);
        let dim_b = hb.get(&k).copied().unwrap_or(0);
        let dim_c = hc.get(&k).copied().unwrap_or(0);
        let f_k = induced_rank(f, k);
        let i_k = induced_rank(&inc, k);
        let pi_k = induced_rank(&proj, k);
        let pi_prev = induced_rank(&proj, k - 1);
        nodes.push(LesNode { degree: k, space: "A".into(), dim: dim_a, rank_in: pi_prev, rank_out: f_k, exact: dim_a - f_k == pi_prev });
        nodes.push(LesNode { degree: k, space: "B".into(), dim: dim_b, rank_in: f_k, rank_out: i_k, exact: dim_b - i_k == f_k });
        nodes.push(LesNode { degree: k, space: "Cone".into(), dim: dim_c, rank_in: i_k, rank_out: pi_k, exact: dim_c - pi_k == i_k });
    }
    let exact = nodes.iter().all(|n| n.exact);
    Ok(LesReport { nodes, exact })
}

/// A random closed degree-0 map between two complexes, as a sum of
/// d-commuting pieces obtained by solving the chain-map equation.
pub fn random_chain_map<R: Rng>(a: &F2Complex, b: &F2Complex, rng: &mut R) -> F2ChainMap {
    let p = a.modulus();
    let (na, nb) = (a.len(), b.len());
    let mut unknowns = Vec::new();
    for i in 0..nb {
        for j in 0..na {
            if b.generators[i].deg == a.generators[j].deg {
                unknowns.push((i, j));
            }
        }
    }
    // d_B f − f d_A = 0 as a linear system; pick a random kernel element.
    let mut sys = FpMatrix::zeros(nb * na, unknowns.len(), p);
    for (u, &(k, l)) in unknowns.iter().enumerate() {
        for i in 0..nb {
            let v = b.d.get(i, k);
            if v != 0 {
                sys.add_at(i * na + l, u, v);
            }
        }
        for j in 0..na {
            let v = a.d.get(l, j);
            if v != 0 {
                sys.add_at(k * na + j, u, p - v);
            }
        }
    }
    let ker = sys.kernel();
    let mut m = FpMatrix::zeros(nb, na, p);
    for col in 0..ker.cols {
        let coeff = rng.gen_range(0..p);
        if coeff == 0 {
            continue;
        }
        for (u, &(i, j)) in unknowns.iter().enumerate() {
            let v = ker.get(u, col);
            if v != 0 {
                m.add_at(i, j, (coeff as u64 * v as u64 % p as u64) as u32);
            }
        }
    }
    F2ChainMap::new(a.clone(), b.clone(), 0, m).expect("kernel element is a chain map")
}

/// A random degree −1 map A → B.
pub fn random_homotopy<R: Rng>(a: &F2Complex, b: &F2Complex, rng: &mut R) -> FpMatrix {
    let p = a.modulus();
    let mut h = FpMatrix::zeros(b.len(), a.len(), p);
    for i in 0..b.len() {
        for j in 0..a.len() {
            if b.generators[i].deg == a.generators[j].deg - 1 {
                h.set(i, j, rng.gen_range(0..p));
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gens(degs: &[i64]) -> Vec<Generator> {
        degs.iter().enumerate().map(|(i, &deg)| Generator { label: format!("x{i}"), deg }).collect()
    }

    #[test]
    fn homology_examples() {
        let mut d = FpMatrix::zeros(2, 2, 2);
        d.set(1, 0, 1);
        let c = F2Complex::new(gens(&[0, 1]), d).unwrap();
        assert_eq!(total_rank(&homology(&c).unwrap()), 0);
        let z = F2Complex::zero_differential(gens(&[0, 0, 1, 3]), 2).unwrap();
        let h = homology(&z).unwrap();
        assert_eq!(h[&0], 2);
        assert_eq!(h[&1], 1);
        assert_eq!(h[&3], 1);
    }

    #[test]
    fn rejects_bad_differentials() {
        let mut d = FpMatrix::zeros(2, 2, 2);
        d.set(1, 0, 1);
        assert!(matches!(F2Complex::new(gens(&[0, 2]), d), Err(Error::InvalidComplex(_))));
        let mut d = FpMatrix::zeros(3, 3, 2);
        d.set(1, 0, 1);
        d.set(2, 1, 1);
        assert!(matches!(F2Complex::new(gens(&[0, 1, 2]), d), Err(Error::InvalidComplex(_))));
    }

    #[test]
    fn cone_of_identity_is_acyclic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let c = F2Complex::random(8, 2, &mut rng);
            let k = cone(&F2ChainMap::identity(&c)).unwrap();
            assert_eq!(total_rank(&homology(&k).unwrap()), 0);
        }
    }

    #[test]
    fn cone_of_zero_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let a = F2Complex::random(6, 2, &mut rng);
            let b = F2Complex::random(6, 2, &mut rng);
            let k = cone(&F2ChainMap::zero(&a, &b, 0)).unwrap();
            let ha = homology(&a).unwrap();
            let hb = homology(&b).unwrap();
            let hk = homology(&k).unwrap();
            for (&deg, &r) in &nonzero_ranks(&hk) {
                let expect = ha.get(&(deg + 1)).copied().unwrap_or(0) + hb.get(&deg).copied().unwrap_or(0);
                assert_eq!(r, expect);
            }
            assert_eq!(k.euler_characteristic(), b.euler_characteristic() - a.euler_characteristic());
        }
    }

    #[test]
    fn quasi_iso_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = F2Complex::zero_differential(gens(&[0, 1]), 2).unwrap();
        assert!(quasi_iso(&F2ChainMap::identity(&a)).is_quasi_iso);
        let cert = quasi_iso(&F2ChainMap::zero(&a, &a, 0));
        assert!(!cert.is_quasi_iso);
        assert_eq!(cert.failing_degree, Some(0));
        for _ in 0..10 {
            let c = F2Complex::random(8, 2, &mut rng);
            let c2 = c.random_change_of_basis(&mut rng);
            assert_eq!(homology(&c).unwrap(), homology(&c2).unwrap());
        }
    }

    #[test]
    fn rankone_transport_homotopic_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let a = F2Complex::random(6, 2, &mut rng);
            let b = F2Complex::random(6, 2, &mut rng);
            let c = random_chain_map(&a, &b, &mut rng);
            let h = random_homotopy(&a, &b, &mut rng);
            let m = c.matrix.add(&b.d.mul(&h)).add(&h.mul(&a.d));
            let cp = F2ChainMap::new(a.clone(), b.clone(), 0, m).unwrap();
            let tr = rankone_cone_transport(&c, &cp, 1).unwrap();
            assert!(tr.certificate.is_quasi_iso);
        }
    }

    #[test]
    fn rankone_transport_over_f3_with_scalar() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let a = F2Complex::random(5, 3, &mut rng);
            let b = F2Complex::random(5, 3, &mut rng);
            let c = random_chain_map(&a, &b, &mut rng);
            let h = random_homotopy(&a, &b, &mut rng);
            let t = 2;
            let m = c.matrix.scale(t).add(&b.d.mul(&h).add(&h.mul(&a.d)).neg());
            let cp = F2ChainMap::new(a.clone(), b.clone(), 0, m).unwrap();
            let tr = rankone_cone_transport(&c, &cp, t).unwrap();
            assert!(tr.certificate.is_quasi_iso);
        }
    }

    #[test]
    fn rankone_transport_rejects_zero_t() {
        let a = F2Complex::zero_differential(gens(&[0]), 2).unwrap();
        let f = F2ChainMap::identity(&a);
        assert!(matches!(rankone_cone_transport(&f, &f, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn distinct_classes_not_homotopic() {
        let a = F2Complex::zero_differential(gens(&[0]), 2).unwrap();
        let id = F2ChainMap::identity(&a);
        let zero = F2ChainMap::zero(&a, &a, 0);
        assert!(matches!(rankone_cone_transport(&id, &zero, 1), Err(Error::NotHomotopic(_))));
    }

    #[test]
    fn les_exact_on_random_cones() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let a = F2Complex::random(7, 2, &mut rng);
            let b = F2Complex::random(7, 2, &mut rng);
            let f = random_chain_map(&a, &b, &mut rng);
            assert!(les_ranks(&f).unwrap().exact);
        }
    }

    #[test]
    fn iterated_cone_folds_left() {
        let a = F2Complex::zero_differential(gens(&[0]), 2).unwrap();
        let first = F2ChainMap::identity(&a);
        let c1 = cone(&first).unwrap();
        let m = FpMatrix::zeros(1, c1.len(), 2);
        let it = iterated_cone(&first, &[(a.clone(), m)]).unwrap();
        assert_eq!(it.len(), 3);
        assert_eq!(nonzero_ranks(&homology(&it).unwrap()), BTreeMap::from([(0, 1)]));
    }

    #[test]
    fn json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = F2Complex::random(8, 2, &mut rng);
        assert_eq!(F2Complex::from_json(&c.to_json()).unwrap(), c);
    }
}
