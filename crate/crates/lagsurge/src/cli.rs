//! Check orchestration behind the command-line tool: run configs, canonical
//! JSON reports with input digests, CSV sample dumps and the regression
//! corpus runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::floer_cylinder::{self as fc, CurveSpec, CylinderCurve};
use crate::geodesic_twists as gt;
use crate::handles::{self, E2Data, HandleKind};
use crate::homological_algebra::{les_ranks, quasi_iso, rankone_cone_transport, F2ChainMap, F2Complex};
use crate::profiles::{make_dehn_spherical, make_matched_admissible, make_semi_admissible, Profile};
use crate::sampling::rng;
use crate::symplectic_linalg as sl;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn one() -> f64 {
    1.0
}

/// One subcommand with its arguments; file inputs are embedded by value so
/// that a config is self-contained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    Index {
        builtin: String,
        n: usize,
        #[serde(default)]
        k: Option<usize>,
    },
    Handle {
        kind: String,
        n: usize,
        k: usize,
        profile: String,
        #[serde(default)]
        checks: Vec<String>,
    },
    Twist {
        model: String,
        #[serde(default)]
        checks: Vec<String>,
        /// Overrides the model's default twist radius ε.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
    },
    Floer {
        scene: Value,
        #[serde(default)]
        test_curve: Option<String>,
        #[serde(default)]
        cone: bool,
        #[serde(default)]
        profile: Option<String>,
    },
    Cone {
        a: Value,
        b: Value,
        map: Value,
        #[serde(default)]
        map2: Option<Value>,
        #[serde(default)]
        t: Option<u32>,
        #[serde(default)]
        checks: Vec<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default = "one")]
    pub tol_scale: f64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self { command, seed: 0, samples: None, tol_scale: 1.0 }
    }

    pub fn from_json(value: &Value) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_value(value.clone()).map_err(|e| Error::Schema(e.to_string()))?;
        if !(cfg.tol_scale > 0.0) {
            return Err(Error::Schema("tol_scale must be positive".into()));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON of the config.
    pub fn digest(&self) -> String {
        let bytes = canonical_json(&self.to_json());
        Sha256::digest(bytes.as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub check_id: String,
    pub paper_ref: String,
    pub value: Value,
    pub threshold: Value,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub tool_version: String,
    pub input_digest: String,
    pub seed: u64,
    pub items: Vec<CheckItem>,
    pub pass: bool,
}

impl CheckReport {
    pub fn to_canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report serializes"))
    }

    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// A CSV table written under the dump directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: CheckReport,
    pub dumps: Vec<Dump>,
}

/// Failure of a run before any check executes.
#[derive(Clone, Debug, PartialEq)]
pub enum RunError {
    Schema(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Schema(m) => write!(f, "schema violation: {m}"),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        2
    }

    pub fn to_json(&self) -> Value {
        match self {
            RunError::Schema(m) => json!({"error": "schema", "message": m}),
        }
    }
}

fn schema(e: Error) -> RunError {
    match e {
        Error::Schema(m) => RunError::Schema(m),
        other => RunError::Schema(other.to_string()),
    }
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "\"NaN\"".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "\"Infinity\"".into()
        } else {
            "\"-Infinity\"".into()
        }
    } else if x == 0.0 {
        "0.0000000000000000e0".into()
    } else {
        format!("{x:.16e}")
    }
}

/// JSON with sorted keys, no whitespace and floats printed with 17
/// significant digits.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_canonical(v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                out.push_str(&fmt_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::Array(a) => {
            out.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(x, out);
            }
            out.push(']');
        }
        Value::Object(m) => {
            let sorted: BTreeMap<&String, &Value> = m.iter().collect();
            out.push('{');
            for (i, (k, x)) in sorted.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(x, out);
            }
            out.push('}');
        }
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or_else(|| Value::String(format!("{x}")))
}

struct Items {
    items: Vec<CheckItem>,
    tol: f64,
}

impl Items {
    fn push(&mut self, id: impl Into<String>, anchor: &str, value: Value, threshold: Value, pass: bool) {
        self.items.push(CheckItem { check_id: id.into(), paper_ref: anchor.into(), value, threshold, pass });
    }

    /// value < threshold·tol_scale.
    fn below(&mut self, id: impl Into<String>, anchor: &str, value: f64, threshold: f64) {
        let t = threshold * self.tol;
        self.push(id, anchor, num(value), num(t), value < t);
    }

    /// value > threshold (negative controls; not scaled).
    fn above(&mut self, id: impl Into<String>, anchor: &str, value: f64, threshold: f64) {
        self.push(id, anchor, num(value), json!({"min": num(threshold)}), value > threshold);
    }

    fn error(&mut self, id: impl Into<String>, anchor: &str, e: &Error) {
        self.push(id, anchor, json!({"error": e.to_string()}), Value::Null, false);
    }

    fn diagnostic(&mut self, id: impl Into<String>, anchor: &str, value: Value) {
        self.push(id, anchor, value, json!("diagnostic"), true);
    }
}

/// Executes a config; Err only for schema violations.
pub fn run(cfg: &RunConfig) -> std::result::Result<RunOutput, RunError> {
    if !(cfg.tol_scale > 0.0) {
        return Err(RunError::Schema("tol_scale must be positive".into()));
    }
    let mut items = Items { items: Vec::new(), tol: cfg.tol_scale };
    let mut dumps = Vec::new();
    match &cfg.command {
        Command::Index { builtin, n, k } => run_index(builtin, *n, *k, cfg, &mut items)?,
        Command::Handle { kind, n, k, profile, checks } => run_handle(kind, *n, *k, profile, checks, cfg, &mut items, &mut dumps)?,
        Command::Twist { model, checks, eps } => run_twist(model, checks, *eps, cfg, &mut items, &mut dumps)?,
        Command::Floer { scene, test_curve, cone, profile } => {
            run_floer(scene, test_curve.as_deref(), *cone, profile.as_deref(), &mut items, &mut dumps)?
        }
        Command::Cone { a, b, map, map2, t, checks } => run_cone(a, b, map, map2.as_ref(), *t, checks, &mut items)?,
    }
    let pass = items.items.iter().all(|i| i.pass);
    let report = CheckReport { tool_version: TOOL_VERSION.into(), input_digest: cfg.digest(), seed: cfg.seed, items: items.items, pass };
    Ok(RunOutput { report, dumps })
}

fn run_index(builtin: &str, n: usize, k: Option<usize>, cfg: &RunConfig, items: &mut Items) -> std::result::Result<(), RunError> {
    match builtin {
        "rn-nrk" => {
            if n == 0 {
                return Err(RunError::Schema("n must be positive".into()));
            }
            let ks: Vec<usize> = match k {
                Some(k) if k > n => return Err(RunError::Schema(format!("k = {k} exceeds n = {n}"))),
                Some(k) => vec![k],
                None => (0..=n).collect(),
            };
            for k in ks {
                let id = format!("index-rn-nrk[n={n},k={k}]");
                match sl::index_rn_nrk_pair(n, k).and_then(|(a, b)| sl::index(&a, &b)) {
                    Ok(v) => {
                        let expected = k as i64 + 1;
                        let tol = 1e-6 * items.tol;
                        let pass = v.rounded == expected && (v.raw - expected as f64).abs() < tol;
                        items.push(
                            id,
                            "index-table",
                            json!({"rounded": v.rounded, "raw": num(v.raw)}),
                            json!({"expected": expected, "raw_tol": num(tol)}),
                            pass,
                        );
                    }
                    Err(e) => items.error(id, "index-table", &e),
                }
            }
        }
        "diagonal" => {
            if n == 0 || n > 8 {
                return Err(RunError::Schema("diagonal check needs 1 ≤ n ≤ 8".into()));
            }
            let count = cfg.samples.unwrap_or(20);
            let mut g = rng(cfg.seed);
            for j in 0..=count {
                let frame = if j == 0 { sl::CMat::identity(n, n) } else { sl::random_unitary(n, &mut g) };
                let id = format!("diagonal-grading[n={n},plane={j}]");
                let res = (|| {
                    let space = sl::SymplecticSpace::doubled(n);
                    let delta = sl::canonical_diagonal(&space)?;
                    let lam = sl::GradedLagrangianPlane::with_grading_near(sl::SymplecticSpace::new(vec![n], vec![-1])?, frame, 0.0)?;
                    let prod = sl::product_plane(&sl::negate(&lam)?, &lam)?;
                    sl::index(&prod, &delta)
                })();
                match res {
                    Ok(v) => {
                        let tol = 1e-6 * items.tol;
                        let pass = v.rounded == n as i64 && (v.raw - n as f64).abs() < tol;
                        items.push(
                            id,
                            "diagonal-grading",
                            json!({"rounded": v.rounded, "raw": num(v.raw)}),
                            json!({"expected": n, "raw_tol": num(tol)}),
                            pass,
                        );
                    }
                    Err(e) => items.error(id, "diagonal-grading", &e),
                }
            }
        }
        "morse" => {
            if n == 0 || n > 6 {
                return Err(RunError::Schema("morse check needs 1 ≤ n ≤ 6".into()));
            }
            for code in 0..3usize.pow(n as u32) {
                let entries: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64 - 1.0).collect();
                let expected = entries.iter().filter(|&&x| x <= 0.0).count() as i64;
                let id = format!("morse-index[{entries:?}]");
                let res = (|| {
                    let base = sl::GradedLagrangianPlane::real(n, 0.0)?;
                    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(entries.clone()));
                    sl::index(&base, &sl::graph_plane(&a, &base)?)
                })();
                match res {
                    Ok(v) => {
                        let tol = 1e-6 * items.tol;
                        let pass = v.rounded == expected && (v.raw - expected as f64).abs() < tol;
                        items.push(
                            id,
                            "morse-index",
                            json!({"rounded": v.rounded, "raw": num(v.raw)}),
                            json!({"expected": expected, "raw_tol": num(tol)}),
                            pass,
                        );
                    }
                    Err(e) => items.error(id, "morse-index", &e),
                }
            }
        }
        other => return Err(RunError::Schema(format!("unknown builtin '{other}' (rn-nrk, diagonal, morse)"))),
    }
    Ok(())
}

fn wants(checks: &[String], name: &str) -> bool {
    checks.is_empty() || checks.iter().any(|c| c == name || c == "all")
}

fn validate_checks(checks: &[String], allowed: &[&str]) -> std::result::Result<(), RunError> {
    match checks.iter().find(|c| c.as_str() != "all" && !allowed.contains(&c.as_str())) {
        Some(c) => Err(RunError::Schema(format!("unknown check '{c}' (expected one of {allowed:?})"))),
        None => Ok(()),
    }
}

/// Random E₂ data with tilted and curved D.
pub fn random_e2<R: Rng>(n: usize, k: usize, rng: &mut R) -> E2Data {
    let m0 = DMatrix::from_fn(k, n - k, |_, _| rng.gen_range(-1.0..1.0));
    let hess = (0..n - k)
        .map(|_| {
            let a = DMatrix::from_fn(k, k, |_, _| rng.gen_range(-1.0..1.0));
            &a + a.transpose()
        })
        .collect();
    E2Data::new(m0, hess).expect("symmetric Hessians")
}

#[allow(clippy::too_many_arguments)]
fn run_handle(
    kind: &str,
    n: usize,
    k: usize,
    profile: &str,
    checks: &[String],
    cfg: &RunConfig,
    items: &mut Items,
    dumps: &mut Vec<Dump>,
) -> std::result::Result<(), RunError> {
    validate_checks(checks, &["lagrangian", "grading", "energy", "primitive"])?;
    let kind: HandleKind = kind.parse().map_err(schema)?;
    let profile = Profile::parse(profile).map_err(schema)?;
    if n == 0 || k >= n {
        return Err(RunError::Schema(format!("need 0 ≤ k < n, got n = {n}, k = {k}")));
    }
    let samples = cfg.samples.unwrap_or(1000);
    let mut g = rng(cfg.seed);
    let e2 = (kind == HandleKind::E2).then(|| random_e2(n, k, &mut g));
    if wants(checks, "lagrangian") {
        match handles::build_handle(kind, n, k, &profile, e2.clone()) {
            Ok(chart) => items.below(
                "handle-lagrangian",
                "handle-lagrangian",
                handles::lagrangian_check(&chart, samples, cfg.seed),
                handles::TAU_OMEGA,
            ),
            Err(e) => items.error("handle-lagrangian", "handle-lagrangian", &e),
        }
    }
    if wants(checks, "grading") {
        let res = match &e2 {
            Some(d) => handles::e2_grading_along_handle(n, k, &profile, d),
            None => handles::grading_along_handle(n, k, &profile),
        };
        match res {
            Ok(gl) => {
                let expected = ((n - k - 1) as f64, (n - k) as f64 / 2.0);
                let tol = handles::TAU_THETA * items.tol;
                let pass = (gl.theta_start - expected.0).abs() < tol && (gl.theta_end - expected.1).abs() < tol;
                items.push(
                    "handle-grading",
                    "handle-grading",
                    json!({"start": num(gl.theta_start), "end": num(gl.theta_end)}),
                    json!({"start": num(expected.0), "end": num(expected.1), "tol": num(tol)}),
                    pass,
                );
            }
            Err(e) => items.error("handle-grading", "handle-grading", &e),
        }
    }
    if wants(checks, "energy") {
        match handles::handle_energy(&profile) {
            Ok(e) => {
                let tol = 1e-7 * items.tol;
                let pass = e.value < 0.0 && (e.value - e.by_parts).abs() < tol;
                items.push(
                    "handle-energy",
                    "handle-energy",
                    json!({"value": num(e.value), "by_parts": num(e.by_parts)}),
                    json!({"sign": "negative", "by_parts_tol": num(tol)}),
                    pass,
                );
            }
            Err(e) => items.error("handle-energy", "handle-energy", &e),
        }
    }
    if wants(checks, "primitive") {
        match handles::glue_primitives(0.0, &profile, 0.0, n, k) {
            Ok(p) => {
                let gap = p.seam_gap_l.max(p.seam_gap_fiber);
                items.below("primitive-gluing", "primitive-gluing", gap, 1e-8);
            }
            Err(Error::AmbiguousGluing(m)) => items.diagnostic("primitive-gluing", "primitive-gluing", json!({"ambiguous": m})),
            Err(e) => items.error("primitive-gluing", "primitive-gluing", &e),
        }
    }
    dumps.push(profile_dump(&profile));
    Ok(())
}

fn profile_dump(p: &Profile) -> Dump {
    let m = 400;
    let rows = (1..=m)
        .map(|j| {
            let r = p.eps * j as f64 / m as f64;
            let (v, d) = p.value_deriv(r);
            vec![r, v, d]
        })
        .collect();
    Dump { name: "profile".into(), header: vec!["r".into(), "nu".into(), "dnu".into()], rows }
}

fn run_twist(
    model: &str,
    checks: &[String],
    eps: Option<f64>,
    cfg: &RunConfig,
    items: &mut Items,
    dumps: &mut Vec<Dump>,
) -> std::result::Result<(), RunError> {
    let checks: Vec<String> = checks
        .iter()
        .map(|c| match c.as_str() {
            "fiber-surgery" => "fiber".to_string(),
            "rp-cover" => "cover".to_string(),
            other => other.to_string(),
        })
        .collect();
    let checks = checks.as_slice();
    validate_checks(checks, &["fiber", "graph", "symplectic", "cover", "square", "cp-fiber"])?;
    let model = gt::Model::parse(model).map_err(schema)?;
    let samples = cfg.samples.unwrap_or(1000);
    let seed = cfg.seed;
    let sphere_eps = eps.unwrap_or(0.8);
    let rp_eps = eps.unwrap_or(0.6);
    let cp_eps = eps.unwrap_or(0.4);
    let dehn = make_dehn_spherical(sphere_eps).map_err(schema)?;
    match model {
        gt::Model::Sphere(n) => {
            if wants(checks, "fiber") {
                let delta = sphere_eps / 8.0;
                let matched = make_matched_admissible(&dehn, delta).map_err(schema)?;
                let mut x = vec![0.0; n + 1];
                x[0] = 1.0;
                match gt::surgery_vs_twist_fiber(n, &x, &dehn, &matched, delta, samples, seed) {
                    Ok(r) => {
                        items.below("fiber-surgery-twist", "surgery-equals-twist", r.deviation, 1e-6);
                        items.push("fiber-surgery-inner-graph", "surgery-equals-twist", json!(r.inner_graph), json!(true), r.inner_graph);
                    }
                    Err(e) => items.error("fiber-surgery-twist", "surgery-equals-twist", &e),
                }
                let other = make_matched_admissible(&make_dehn_spherical(0.625 * sphere_eps).map_err(schema)?, delta).map_err(schema)?;
                match gt::fiber_deviation(n, &x, &dehn, &other, delta, samples, seed) {
                    Ok(r) => items.above("fiber-surgery-negative-control", "surgery-equals-twist", r.deviation, 1e-2),
                    Err(e) => items.error("fiber-surgery-negative-control", "surgery-equals-twist", &e),
                }
                dumps.push(profile_dump(&matched));
            }
            if wants(checks, "graph") {
                let dehn_g = make_dehn_spherical(0.5).map_err(schema)?;
                let semi = make_semi_admissible(1, 1.0, 0.5).map_err(schema)?;
                let wrong = make_semi_admissible(1, 0.5, 0.5).map_err(schema)?;
                match gt::graph_twist_check(n, &semi, &dehn_g, samples, seed) {
                    Ok(r) => items.below("graph-twist", "graph-twist", r.deviation, 1e-6),
                    Err(e) => items.error("graph-twist", "graph-twist", &e),
                }
                match gt::graph_twist_check(n, &wrong, &dehn_g, samples, seed) {
                    Ok(r) => items.above("graph-twist-negative-control", "graph-twist", r.deviation, 1e-2),
                    Err(e) => items.error("graph-twist-negative-control", "graph-twist", &e),
                }
            }
            if wants(checks, "symplectic") {
                let res =
                    gt::TwistModel::new(model, dehn.clone()).and_then(|tm| gt::twist_symplectic_defect(&tm, samples.min(200), 1e-5, seed));
                match res {
                    Ok(d) => items.below("twist-symplectic", "twist-model", d, 1e-6),
                    Err(e) => items.error("twist-symplectic", "twist-model", &e),
                }
            }
        }
        gt::Model::RealProj(n) => {
            if wants(checks, "cover") {
                let res = gt::TwistModel::new(gt::Model::Sphere(n), make_dehn_spherical(rp_eps).map_err(schema)?).and_then(|tm| {
                    let mut g = rng(seed);
                    let mut worst = 0.0f64;
                    for _ in 0..samples {
                        let p = gt::random_point(model, 0.4, &mut g);
                        let a = gt::rp_double_cover_twist(&tm, &p, 1.0)?;
                        let b = gt::rp_double_cover_twist(&tm, &p, -1.0)?;
                        worst = worst.max(a.distance(&b));
                    }
                    Ok(worst)
                });
                match res {
                    Ok(d) => items.below("rp-cover-lift-independence", "projective-cover", d, 1e-10),
                    Err(e) => items.error("rp-cover-lift-independence", "projective-cover", &e),
                }
            }
            if n == 1 && wants(checks, "square") {
                match gt::rp1_square_check(&make_dehn_spherical(rp_eps).map_err(schema)?, samples, seed) {
                    Ok(d) => items.below("rp1-square", "projective-cover", d, 1e-8),
                    Err(e) => items.error("rp1-square", "projective-cover", &e),
                }
            }
        }
        gt::Model::ComplexProj(n) => {
            if wants(checks, "cp-fiber") {
                match gt::cp_fiber_surgery_check(n, cp_eps, samples, seed) {
                    Ok(r) => {
                        let v = serde_json::to_value(&r).expect("report serializes");
                        items.push("cp-fiber-surgery", "complex-projective-fiber", v, json!("all sub-checks"), r.pass);
                    }
                    Err(e) => items.error("cp-fiber-surgery", "complex-projective-fiber", &e),
                }
            }
        }
    }
    Ok(())
}

fn ranks_json(r: &BTreeMap<i64, usize>) -> Value {
    Value::Object(r.iter().map(|(k, v)| (k.to_string(), json!(v))).collect())
}

fn curve_dump(name: &str, c: &CylinderCurve) -> Dump {
    Dump {
        name: name.into(),
        header: ["t", "q", "p", "theta", "f"].iter().map(|s| s.to_string()).collect(),
        rows: c.sample_table().iter().map(|r| r.to_vec()).collect(),
    }
}

fn run_floer(
    scene: &Value,
    test_curve: Option<&str>,
    want_cone: bool,
    profile: Option<&str>,
    items: &mut Items,
    dumps: &mut Vec<Dump>,
) -> std::result::Result<(), RunError> {
    let specs = fc::parse_scene(scene).map_err(schema)?;
    let test = test_curve.map(CurveSpec::parse).transpose().map_err(schema)?;
    let profile = Profile::parse(profile.unwrap_or("admissible:lambda=1.0,eps=1.0")).map_err(schema)?;
    let mut curves: Vec<Option<CylinderCurve>> = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        match s.build() {
            Ok(c) => {
                dumps.push(curve_dump(&format!("curve_{i}"), &c));
                curves.push(Some(c));
            }
            Err(e) => {
                items.error(format!("curve[{i}]"), "graded-exact-curve", &e);
                curves.push(None);
            }
        }
    }
    for (i, c) in curves.iter().enumerate() {
        let Some(c) = c else { continue };
        match fc::assumption_a(c) {
            Ok(a) => {
                let w: Vec<Value> =
                    a.witnesses.iter().map(|j| json!({"q": num(j.q), "p": num(j.p), "index": j.index, "energy": num(j.energy)})).collect();
                items.diagnostic(format!("assumption-a[{i}]"), "assumption-a", json!({"holds": a.pass, "witnesses": w}));
            }
            Err(e) => items.error(format!("assumption-a[{i}]"), "assumption-a", &e),
        }
        match fc::branch_jumps(c) {
            Ok(jumps) => {
                let mut worst_e = 0.0f64;
                let mut ok = true;
                for pair in jumps.chunks(2) {
                    worst_e = worst_e.max((pair[0].energy + pair[1].energy).abs());
                    ok &= pair[0].index + pair[1].index == 1;
                }
                let tol = 1e-9 * items.tol;
                items.push(
                    format!("jump-antisymmetry[{i}]"),
                    "branch-jumps",
                    json!({"jumps": jumps.len() / 2, "energy_sum": num(worst_e), "index_sums_one": ok}),
                    json!({"energy_tol": num(tol)}),
                    ok && worst_e < tol,
                );
            }
            Err(e) => items.error(format!("jump-antisymmetry[{i}]"), "branch-jumps", &e),
        }
    }
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let (Some(a), Some(b)) = (&curves[i], &curves[j]) else { continue };
            match fc::bigon_differential(a, b) {
                Ok(cf) => {
                    items.push(
                        format!("floer[{i},{j}]"),
                        "bigon-differential",
                        json!({"generators": cf.generators.len(), "bigons": cf.bigons.len(), "hf": ranks_json(&cf.homology())}),
                        json!("d² = 0"),
                        true,
                    );
                    dumps.push(Dump {
                        name: format!("cf_{i}_{j}"),
                        header: vec!["q".into(), "p".into(), "index".into()],
                        rows: cf.generators.iter().map(|g| vec![g.q, g.p, g.index as f64]).collect(),
                    });
                }
                Err(e) => items.error(format!("floer[{i},{j}]"), "bigon-differential", &e),
            }
            match fc::euler_check(a, b) {
                Ok(e) if e.predicted.is_some() => items.push(
                    format!("euler[{i},{j}]"),
                    "euler-winding",
                    json!({"euler": e.euler}),
                    json!({"predicted": e.predicted}),
                    e.agree,
                ),
                Ok(_) => {}
                Err(e) => items.error(format!("euler[{i},{j}]"), "euler-winding", &e),
            }
        }
    }
    let n = match &test {
        Some(spec) => match spec.build() {
            Ok(c) => Some(c),
            Err(e) => {
                items.error("test-curve", "graded-exact-curve", &e);
                None
            }
        },
        None => None,
    };
    if let Some(n) = &n {
        for (i, c) in curves.iter().enumerate() {
            let Some(c) = c else { continue };
            match fc::hf_ranks(n, c) {
                Ok(r) => items.diagnostic(format!("hf[test,{i}]"), "bigon-differential", ranks_json(&r)),
                Err(e) => items.error(format!("hf[test,{i}]"), "bigon-differential", &e),
            }
        }
    }
    if want_cone {
        let n = n.ok_or_else(|| RunError::Schema("--cone needs --test-curve".into()))?;
        let is_fiber = matches!(test.as_ref().map(|t| &t.kind), Some(fc::CurveKind::Fiber { .. }));
        cone_items(&profile, &n, is_fiber, items, dumps);
    }
    Ok(())
}

/// Twist-scene checks for one test curve.
pub fn cone_items_report(profile: &Profile, n: &CylinderCurve, is_fiber: bool) -> Vec<CheckItem> {
    let mut items = Items { items: Vec::new(), tol: 1.0 };
    cone_items(profile, n, is_fiber, &mut items, &mut Vec::new());
    items.items
}

fn cone_items(profile: &Profile, n: &CylinderCurve, is_fiber: bool, items: &mut Items, dumps: &mut Vec<Dump>) {
    let scene = match fc::twist_scene(profile, &fc::SceneGeometry::default()) {
        Ok(s) => s,
        Err(e) => {
            items.error("twist-scene", "surgery-equals-twist", &e);
            return;
        }
    };
    dumps.push(curve_dump("scene_immersed", &scene.s));
    dumps.push(curve_dump("scene_surgery", &scene.surgery));
    dumps.push(curve_dump("scene_twisted_fiber", &scene.tau_l));
    items.below("twist-scene-deviation", "surgery-equals-twist", scene.deviation, 1e-6);
    let off = fc::fiber(scene.q0.q + 0.3, fc::DEFAULT_HEIGHT);
    match off.and_then(|f| fc::hf_ranks(&scene.s, &f)) {
        Ok(r) => {
            let expected = BTreeMap::from([(-1i64, 1usize), (0, 1)]);
            items.push("immersed-fiber-degrees", "immersed-fiber-degrees", ranks_json(&r), ranks_json(&expected), r == expected);
        }
        Err(e) => items.error("immersed-fiber-degrees", "immersed-fiber-degrees", &e),
    }
    match fc::cone_check(&scene, n) {
        Ok(c) => {
            items.push(
                "cone-ranks",
                "cone-relation",
                json!({"cone": ranks_json(&c.cone_homology), "triangles": c.triangles}),
                json!({"twisted": ranks_json(&c.tau_homology)}),
                c.ranks_match,
            );
            items.push("les-exact", "long-exact-sequence", json!(c.les_exact), json!(true), c.les_exact);
            let sizes = json!({"s": c.cf_s.generators.len(), "l": c.cf_l.generators.len(), "twisted": c.cf_tau.generators.len()});
            if is_fiber {
                items.push("chain-rank-additivity", "cone-relation", sizes, json!("twisted = s + l"), c.chain_ranks_add);
            } else {
                items.diagnostic("chain-rank-additivity", "cone-relation", sizes);
            }
        }
        Err(e) => items.error("cone-ranks", "cone-relation", &e),
    }
}

fn run_cone(
    a: &Value,
    b: &Value,
    map: &Value,
    map2: Option<&Value>,
    t: Option<u32>,
    checks: &[String],
    items: &mut Items,
) -> std::result::Result<(), RunError> {
    validate_checks(checks, &["les", "quasi-iso", "rankone"])?;
    let a = F2Complex::from_json(a).map_err(schema)?;
    let b = F2Complex::from_json(b).map_err(schema)?;
    let f = F2ChainMap::from_json(&a, &b, map).map_err(schema)?;
    if wants(checks, "les") {
        match les_ranks(&f) {
            Ok(r) => items.push("les-exact", "long-exact-sequence", json!({"nodes": r.nodes.len()}), json!(true), r.exact),
            Err(e) => items.error("les-exact", "long-exact-sequence", &e),
        }
    }
    if wants(checks, "quasi-iso") {
        let c = quasi_iso(&f);
        let degs: Value =
            c.degrees.iter().map(|(k, (s, t, i))| (k.to_string(), json!([s, t, i]))).collect::<serde_json::Map<_, _>>().into();
        items.push(
            "quasi-iso",
            "quasi-isomorphism",
            json!({"is_quasi_iso": c.is_quasi_iso, "degrees": degs, "failing_degree": c.failing_degree}),
            json!(true),
            c.is_quasi_iso,
        );
    }
    if checks.iter().any(|c| c == "rankone") {
        let m2 = map2.ok_or_else(|| RunError::Schema("rankone needs a second map".into()))?;
        let g = F2ChainMap::from_json(&a, &b, m2).map_err(schema)?;
        match rankone_cone_transport(&f, &g, t.unwrap_or(1)) {
            Ok(r) => items.push(
                "rankone-transport",
                "rankone-transport",
                json!({"quasi_iso": r.certificate.is_quasi_iso}),
                json!(true),
                r.certificate.is_quasi_iso,
            ),
            Err(Error::NotHomotopic(m)) => {
                items.push("rankone-transport", "rankone-transport", json!({"not_homotopic": m}), json!(true), false)
            }
            Err(e) => items.error("rankone-transport", "rankone-transport", &e),
        }
    }
    Ok(())
}

/// Writes every dump as `<dir>/<name>.csv`.
pub fn write_dumps(dir: &Path, dumps: &[Dump]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for d in dumps {
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", d.name)))?;
        w.write_record(&d.header)?;
        for row in &d.rows {
            w.write_record(row.iter().map(|x| format!("{x:.16e}")))?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Outcome of one corpus entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressCase {
    pub name: String,
    /// "ok", "drift", "missing-golden" or "error".
    pub status: String,
    pub drifts: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressSummary {
    pub cases: Vec<RegressCase>,
    pub pass: bool,
}

fn corpus_configs(dir: &Path) -> std::io::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(stem) = name.strip_suffix(".config.json") {
            out.push((stem.to_string(), path));
        }
    }
    out.sort();
    Ok(out)
}

fn run_file(path: &Path) -> std::result::Result<RunOutput, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let value: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let cfg = RunConfig::from_json(&value).map_err(|e| e.to_string())?;
    run(&cfg).map_err(|e| e.to_string())
}

/// Compares two reports; numbers within a relative 1e−9, everything else exact.
pub fn report_drift(golden: &Value, fresh: &Value) -> Vec<String> {
    let mut out = Vec::new();
    diff_values("", golden, fresh, &mut out);
    out
}

fn diff_values(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap_or(f64::NAN), y.as_f64().unwrap_or(f64::NAN));
            if !((x - y).abs() <= 1e-9 * x.abs().max(1.0)) {
                out.push(format!("{path}: {x} → {y}"));
            }
        }
        (Value::Array(x), Value::Array(y)) => {
            if x.len() != y.len() {
                out.push(format!("{path}: length {} → {}", x.len(), y.len()));
                return;
            }
            for (i, (u, v)) in x.iter().zip(y).enumerate() {
                diff_values(&format!("{path}[{i}]"), u, v, out);
            }
        }
        (Value::Object(x), Value::Object(y)) => {
            for (k, u) in x {
                match y.get(k) {
                    Some(v) => diff_values(&format!("{path}.{k}"), u, v, out),
                    None => out.push(format!("{path}.{k}: missing")),
                }
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                out.push(format!("{path}.{k}: unexpected"));
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} → {b}")),
    }
}

/// Reruns every `<name>.config.json` and compares with `<name>.golden.json`.
pub fn regress(dir: &Path) -> std::io::Result<RegressSummary> {
    let mut cases = Vec::new();
    for (name, path) in corpus_configs(dir)? {
        let golden_path = dir.join(format!("{name}.golden.json"));
        let fresh = run_file(&path);
        let case = match (fresh, std::fs::read_to_string(&golden_path)) {
            (Err(e), _) => RegressCase { name, status: "error".into(), drifts: vec![e] },
            (Ok(_), Err(_)) => RegressCase { name, status: "missing-golden".into(), drifts: Vec::new() },
            (Ok(out), Ok(text)) => match serde_json::from_str::<Value>(&text) {
                Ok(golden) => {
                    let fresh: Value = serde_json::from_str(&out.report.to_canonical_json()).expect("canonical JSON parses");
                    let drifts = report_drift(&golden, &fresh);
                    let status = if drifts.is_empty() { "ok" } else { "drift" };
                    RegressCase { name, status: status.into(), drifts }
                }
                Err(e) => RegressCase { name, status: "drift".into(), drifts: vec![format!("golden unreadable: {e}")] },
            },
        };
        cases.push(case);
    }
    let pass = cases.iter().all(|c| c.status == "ok" || c.status == "missing-golden");
    Ok(RegressSummary { cases, pass })
}

/// Regenerates every golden report of the corpus.
pub fn bless(dir: &Path) -> std::io::Result<usize> {
    let mut count = 0;
    for (name, path) in corpus_configs(dir)? {
        let out = run_file(&path).map_err(std::io::Error::other)?;
        std::fs::write(dir.join(format!("{name}.golden.json")), out.report.to_canonical_json() + "\n")?;
        count += 1;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_and_formats() {
        let v = json!({"b": 1.5, "a": [1, 0.1, {"z": null, "y": true}]});
        assert_eq!(canonical_json(&v), r#"{"a":[1,1.0000000000000001e-1,{"y":true,"z":null}],"b":1.5000000000000000e0}"#);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = RunConfig::new(Command::Index { builtin: "rn-nrk".into(), n: 5, k: Some(2) });
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn index_example() {
        let out = run(&RunConfig::new(Command::Index { builtin: "rn-nrk".into(), n: 5, k: Some(2) })).unwrap();
        assert!(out.report.pass);
        assert_eq!(out.report.items[0].value["rounded"], json!(3));
    }

    #[test]
    fn handle_example_endpoints() {
        let cmd = Command::Handle { kind: "clean".into(), n: 4, k: 1, profile: "admissible:lambda=1.0,eps=0.5".into(), checks: vec![] };
        let mut cfg = RunConfig::new(cmd);
        cfg.samples = Some(200);
        let out = run(&cfg).unwrap();
        assert!(out.report.pass, "{:?}", out.report);
        let g = out.report.items.iter().find(|i| i.check_id == "handle-grading").unwrap();
        assert!((g.value["start"].as_f64().unwrap() - 2.0).abs() < 1e-6);
        assert!((g.value["end"].as_f64().unwrap() - 1.5).abs() < 1e-6);
    }

    #[test]
    fn malformed_profile_is_schema_error() {
        let cmd = Command::Handle { kind: "clean".into(), n: 4, k: 1, profile: "admissible:lambda=abc".into(), checks: vec![] };
        let err = run(&RunConfig::new(cmd)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn drift_detection() {
        let a = json!({"x": 1.0, "y": [1, 2], "s": "a"});
        assert!(report_drift(&a, &a).is_empty());
        let b = json!({"x": 1.0 + 1e-12, "y": [1, 2], "s": "a"});
        assert!(report_drift(&a, &b).is_empty());
        let c = json!({"x": 1.1, "y": [1, 3], "s": "b"});
        assert_eq!(report_drift(&a, &c).len(), 3);
    }

    #[test]
    fn empty_corpus_passes() {
        let dir = tempfile::tempdir().unwrap();
        let s = regress(dir.path()).unwrap();
        assert!(s.pass && s.cases.is_empty());
    }
}
