//! Scenario configuration: TOML or JSON, validated with field paths.

use crate::elastic::Material;
use crate::fields::{parse_expression, Grid2, ParseError, SymExpr3};
use crate::probe::fit::geometric_sweep;
use crate::probe::{default_h_sweep, Variant};
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("schema error at '{field}': {message}")]
    Schema { field: String, message: String },
    #[error("expression error at '{field}': {source}")]
    Expression { field: String, source: ParseError },
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { field, .. } | ConfigError::Expression { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Minimize,
    Indicators,
    Curvature,
    Probe,
    Commutator,
}

impl Task {
    pub const ALL: [Task; 6] = [Task::Classify, Task::Minimize, Task::Indicators, Task::Curvature, Task::Probe, Task::Commutator];

    pub fn name(&self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Minimize => "minimize",
            Task::Indicators => "indicators",
            Task::Curvature => "curvature",
            Task::Probe => "probe",
            Task::Commutator => "commutator",
        }
    }

    fn needs_solver_grid(&self) -> bool {
        matches!(self, Task::Minimize | Task::Indicators | Task::Probe)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeConfig {
    pub variant: Option<Variant>,
    /// Expressions for v, w₁, w₂ when the deformation is not built from a minimizer.
    pub v: Option<String>,
    pub w: [Option<String>; 2],
    /// Quadrature grid nodes per axis.
    pub quad_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureConfig {
    pub point: [f64; 2],
    pub components: Vec<String>,
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommutatorConfig {
    /// Hölder exponent a; the surrogate is weier(1 + a, base, terms).
    pub a: f64,
    pub base: f64,
    pub terms: u32,
    pub grid: usize,
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub memory: usize,
    pub random_starts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// [x_min, x_max, y_min, y_max]
    pub domain: [f64; 4],
    pub nx: usize,
    pub ny: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Upper-triangle sources in the order 11, 12, 13, 22, 23, 33.
    #[serde(rename = "S")]
    pub s_src: [String; 6],
    #[serde(rename = "B")]
    pub b_src: [String; 6],
    pub s22_zero: bool,
    pub mu: f64,
    pub lambda: f64,
    pub tasks: Vec<Task>,
    pub h_sweep: Vec<f64>,
    pub seed: u64,
    pub probe: ProbeConfig,
    pub curvature: CurvatureConfig,
    pub commutator: CommutatorConfig,
    pub minimize: MinimizeConfig,
    #[serde(skip)]
    pub output: PathBuf,
    #[serde(skip)]
    pub s: SymExpr3,
    #[serde(skip)]
    pub b: SymExpr3,
}

impl ScenarioConfig {
    pub fn grid(&self) -> Grid2 {
        let [a, b, c, d] = self.domain;
        Grid2::new(a, b, c, d, self.nx, self.ny).expect("validated grid")
    }

    pub fn material(&self) -> Material {
        Material::new(self.mu, self.lambda).expect("validated material")
    }

    /// SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn has(&self, t: Task) -> bool {
        self.tasks.contains(&t)
    }

    /// Applies a new grid resolution and re-checks the solver minimum.
    pub fn set_grid(&mut self, n: usize) -> Result<(), ConfigError> {
        self.nx = n;
        self.ny = n;
        self.probe.quad_grid = n;
        check_grid(self)
    }
}

const UPPER: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let value = if is_json {
        serde_json::from_str::<Value>(&text).map_err(|e| ConfigError::Syntax { path: path.into(), message: e.to_string() })?
    } else {
        let t: toml::Table = toml::from_str(&text).map_err(|e| ConfigError::Syntax { path: path.into(), message: e.to_string() })?;
        serde_json::to_value(t).map_err(|e| ConfigError::Syntax { path: path.into(), message: e.to_string() })?
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    from_value(&value, stem)
}

pub fn from_toml_str(text: &str, default_name: &str) -> Result<ScenarioConfig, ConfigError> {
    let t: toml::Table =
        toml::from_str(text).map_err(|e| ConfigError::Syntax { path: "<string>".into(), message: e.to_string() })?;
    let v = serde_json::to_value(t).map_err(|e| ConfigError::Syntax { path: "<string>".into(), message: e.to_string() })?;
    from_value(&v, default_name)
}

fn schema(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Schema { field: field.to_string(), message: message.into() }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// A JSON object with key tracking, so unknown keys can be rejected.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
    seen: BTreeSet<&'static str>,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str) -> Result<Obj<'a>, ConfigError> {
        let map = v.as_object().ok_or_else(|| schema(path, "expected a table"))?;
        Ok(Obj { map, path: path.to_string(), seen: BTreeSet::new() })
    }

    fn get(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.map.get(key)
    }

    fn field(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn f64_opt(&mut self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| schema(&self.field(key), "expected a number")),
        }
    }

    fn f64_req(&mut self, key: &'static str) -> Result<f64, ConfigError> {
        self.f64_opt(key)?.ok_or_else(|| schema(&self.field(key), "missing required field"))
    }

    fn usize_opt(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                v.as_u64().map(|u| Some(u as usize)).ok_or_else(|| schema(&self.field(key), "expected a non-negative integer"))
            }
        }
    }

    fn str_opt(&mut self, key: &'static str) -> Result<Option<String>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(schema(&self.field(key), "expected a string")),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        for k in self.map.keys() {
            if !self.seen.contains(k.as_str()) {
                return Err(schema(&join(&self.path, k), "unknown field"));
            }
        }
        Ok(())
    }
}

fn expr_string(v: &Value, field: &str) -> Result<String, ConfigError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        _ => Err(schema(field, "expected an expression string or number")),
    }
}

/// Parses S or B: a string c (meaning c·I), a table keyed "11".."33", a list
/// of six upper-triangle entries, or a symmetric 3×3 nested list.
fn sym_matrix(v: &Value, field: &str) -> Result<[String; 6], ConfigError> {
    let mut out: [String; 6] = std::array::from_fn(|_| "0".to_string());
    match v {
        Value::String(_) | Value::Number(_) => {
            let s = expr_string(v, field)?;
            for k in [0, 3, 5] {
                out[k] = s.clone();
            }
        }
        Value::Object(map) => {
            let mut given = [false; 6];
            for (key, val) in map {
                let f = join(field, key);
                let b = key.as_bytes();
                let idx = if b.len() == 2 && (b'1'..=b'3').contains(&b[0]) && (b'1'..=b'3').contains(&b[1]) {
                    let (i, j) = ((b[0] - b'1') as usize, (b[1] - b'1') as usize);
                    UPPER.iter().position(|&p| p == (i.min(j), i.max(j))).unwrap()
                } else {
                    return Err(schema(&f, "expected an entry key such as \"11\", \"13\" or \"33\""));
                };
                if given[idx] {
                    return Err(schema(&f, "entry given twice (the matrix is symmetric)"));
                }
                given[idx] = true;
                out[idx] = expr_string(val, &f)?;
            }
        }
        Value::Array(items) if items.len() == 6 => {
            for (k, item) in items.iter().enumerate() {
                out[k] = expr_string(item, &format!("{field}[{k}]"))?;
            }
        }
        Value::Array(rows) if rows.len() == 3 && rows.iter().all(|r| r.is_array()) => {
            let mut m: [[String; 3]; 3] = Default::default();
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().unwrap();
                if row.len() != 3 {
                    return Err(schema(&format!("{field}[{i}]"), "expected 3 entries"));
                }
                for (j, e) in row.iter().enumerate() {
                    m[i][j] = expr_string(e, &format!("{field}[{i}][{j}]"))?;
                }
            }
            for (k, &(i, j)) in UPPER.iter().enumerate() {
                if m[i][j].trim() != m[j][i].trim() {
                    return Err(schema(&format!("{field}[{j}][{i}]"), "matrix must be symmetric"));
                }
                out[k] = m[i][j].clone();
            }
        }
        _ => return Err(schema(field, "expected a string, a table of entries, 6 upper-triangle entries or a 3×3 list")),
    }
    Ok(out)
}

fn parse_sym(src: &[String; 6], field: &str) -> Result<SymExpr3, ConfigError> {
    for (k, s) in src.iter().enumerate() {
        let (i, j) = UPPER[k];
        parse_expression(s)
            .map_err(|source| ConfigError::Expression { field: format!("{field}.{}{}", i + 1, j + 1), source })?;
    }
    SymExpr3::parse(std::array::from_fn(|k| src[k].as_str()))
        .map_err(|source| ConfigError::Expression { field: field.to_string(), source })
}

fn sweep_spec(v: &Value, field: &str, min_len: usize) -> Result<Vec<f64>, ConfigError> {
    let list = match v {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(k, x)| x.as_f64().ok_or_else(|| schema(&format!("{field}[{k}]"), "expected a number")))
            .collect::<Result<Vec<f64>, _>>()?,
        Value::Object(_) => {
            let mut o = Obj::new(v, field)?;
            let from = o.f64_req("from")?;
            let to = o.f64_req("to")?;
            let count = o.usize_opt("count")?.unwrap_or(8);
            o.finish()?;
            if !(from > 0.0 && to > 0.0) {
                return Err(schema(field, "from and to must be positive"));
            }
            geometric_sweep(from, to, count)
        }
        _ => return Err(schema(field, "expected a list of values or {from, to, count}")),
    };
    if list.len() < min_len {
        return Err(schema(field, format!("needs at least {min_len} values")));
    }
    if list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(schema(field, "values must be positive"));
    }
    Ok(list)
}

fn check_grid(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    if cfg.nx < 3 || cfg.ny < 3 {
        return Err(schema("grid", "need at least 3 nodes per axis"));
    }
    if cfg.tasks.iter().any(|t| t.needs_solver_grid()) && (cfg.nx < 17 || cfg.ny < 17) {
        return Err(schema("grid", "solver tasks need at least 17 nodes per axis"));
    }
    if cfg.probe.quad_grid < 2 {
        return Err(schema("probe.quad_grid", "need at least 2"));
    }
    Ok(())
}

pub fn from_value(root: &Value, default_name: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut o = Obj::new(root, "")?;
    let name = o.str_opt("name")?.unwrap_or_else(|| default_name.to_string());
    let alpha = o.f64_req("alpha")?;
    let gamma = o.f64_req("gamma")?;
    for (k, v) in [("alpha", alpha), ("gamma", gamma)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(schema(k, "must be a positive number"));
        }
    }
    let s_src = sym_matrix(o.get("S").ok_or_else(|| schema("S", "missing required field"))?, "S")?;
    let b_src = sym_matrix(o.get("B").ok_or_else(|| schema("B", "missing required field"))?, "B")?;
    let s = parse_sym(&s_src, "S")?;
    let b = parse_sym(&b_src, "B")?;

    let tasks_v = o.get("tasks").ok_or_else(|| schema("tasks", "missing required field"))?;
    let items = tasks_v.as_array().ok_or_else(|| schema("tasks", "expected a list"))?;
    let mut tasks = BTreeSet::new();
    for (k, t) in items.iter().enumerate() {
        let f = format!("tasks[{k}]");
        let s = t.as_str().ok_or_else(|| schema(&f, "expected a task name"))?;
        let task = Task::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| schema(&f, format!("unknown task '{s}' (expected one of classify, minimize, indicators, curvature, probe, commutator)")))?;
        tasks.insert(task);
    }
    if tasks.is_empty() {
        return Err(schema("tasks", "must name at least one task"));
    }

    let s22_zero = match o.get("s22_zero") {
        None => false,
        Some(v) => v.as_bool().ok_or_else(|| schema("s22_zero", "expected true or false"))?,
    };
    let seed = match o.get("seed") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| schema("seed", "expected a non-negative integer"))?,
    };
    let output = PathBuf::from(o.str_opt("output")?.unwrap_or_else(|| format!("prestrain-out/{name}")));

    let mut domain = [0.0, 1.0, 0.0, 1.0];
    if let Some(d) = o.get("domain") {
        let mut od = Obj::new(d, "domain")?;
        for (k, key) in [(0usize, "x"), (2, "y")] {
            if let Some(r) = od.get(key) {
                let f = join("domain", key);
                let arr = r.as_array().filter(|a| a.len() == 2).ok_or_else(|| schema(&f, "expected [min, max]"))?;
                let lo = arr[0].as_f64().ok_or_else(|| schema(&f, "expected numbers"))?;
                let hi = arr[1].as_f64().ok_or_else(|| schema(&f, "expected numbers"))?;
                if !(lo < hi) {
                    return Err(schema(&f, "min must be below max"));
                }
                domain[k] = lo;
                domain[k + 1] = hi;
            }
        }
        od.finish()?;
    }

    let (mut nx, mut ny) = (65, 65);
    if let Some(g) = o.get("grid") {
        match g {
            Value::Number(_) => {
                let n = g.as_u64().ok_or_else(|| schema("grid", "expected a positive integer"))? as usize;
                nx = n;
                ny = n;
            }
            Value::Object(_) => {
                let mut og = Obj::new(g, "grid")?;
                let n = og.usize_opt("n")?;
                nx = og.usize_opt("nx")?.or(n).unwrap_or(65);
                ny = og.usize_opt("ny")?.or(n).unwrap_or(65);
                og.finish()?;
            }
            _ => return Err(schema("grid", "expected an integer or {nx, ny}")),
        }
    }

    let (mut mu, mut lambda) = (1.0, 1.0);
    if let Some(m) = o.get("material") {
        let mut om = Obj::new(m, "material")?;
        mu = om.f64_opt("mu")?.unwrap_or(1.0);
        lambda = om.f64_opt("lambda")?.unwrap_or(1.0);
        om.finish()?;
    }
    Material::new(mu, lambda).map_err(|e| schema("material", e.to_string()))?;

    let h_sweep = match o.get("h_sweep") {
        None => default_h_sweep(),
        Some(v) => sweep_spec(v, "h_sweep", 6)?,
    };

    let mut probe = ProbeConfig { variant: None, v: None, w: [None, None], quad_grid: nx.max(ny) };
    if let Some(p) = o.get("probe") {
        let mut op = Obj::new(p, "probe")?;
        if let Some(vs) = op.str_opt("variant")? {
            probe.variant = Some(vs.parse().map_err(|e: crate::probe::ProbeError| schema("probe.variant", e.to_string()))?);
        }
        for (key, slot) in [("v", 0usize), ("w1", 1), ("w2", 2)] {
            if let Some(src) = op.str_opt(key)? {
                parse_expression(&src)
                    .map_err(|source| ConfigError::Expression { field: join("probe", key), source })?;
                match slot {
                    0 => probe.v = Some(src),
                    k => probe.w[k - 1] = Some(src),
                }
            }
        }
        if let Some(q) = op.usize_opt("quad_grid")? {
            probe.quad_grid = q;
        }
        op.finish()?;
    }

    let mut curvature = CurvatureConfig {
        point: [0.5 * (domain[0] + domain[1]), 0.5 * (domain[2] + domain[3])],
        components: vec!["1212".into(), "1213".into(), "1223".into()],
        sweep: crate::curvature::default_sweep(),
    };
    if let Some(c) = o.get("curvature") {
        let mut oc = Obj::new(c, "curvature")?;
        if let Some(p) = oc.get("point") {
            let arr = p.as_array().filter(|a| a.len() == 2).ok_or_else(|| schema("curvature.point", "expected [x1, x2]"))?;
            for k in 0..2 {
                curvature.point[k] = arr[k].as_f64().ok_or_else(|| schema("curvature.point", "expected numbers"))?;
            }
        }
        if let Some(cs) = oc.get("components") {
            let arr = cs.as_array().ok_or_else(|| schema("curvature.components", "expected a list"))?;
            let mut list = Vec::new();
            for (k, c) in arr.iter().enumerate() {
                let f = format!("curvature.components[{k}]");
                let s = c.as_str().ok_or_else(|| schema(&f, "expected a component such as \"1213\""))?;
                s.parse::<crate::curvature::Component>().map_err(|e| schema(&f, e.to_string()))?;
                list.push(s.to_string());
            }
            if list.is_empty() {
                return Err(schema("curvature.components", "must not be empty"));
            }
            curvature.components = list;
        }
        if let Some(sw) = oc.get("sweep") {
            curvature.sweep = sweep_spec(sw, "curvature.sweep", 6)?;
        }
        oc.finish()?;
    }

    let mut commutator = CommutatorConfig { a: 0.4, base: 2.0, terms: 7, grid: 257, epsilon: geometric_sweep(0.25, 0.02, 6) };
    if let Some(c) = o.get("commutator") {
        let mut oc = Obj::new(c, "commutator")?;
        commutator.a = oc.f64_opt("a")?.unwrap_or(commutator.a);
        commutator.base = oc.f64_opt("base")?.unwrap_or(commutator.base);
        commutator.terms = oc.usize_opt("terms")?.unwrap_or(commutator.terms as usize) as u32;
        commutator.grid = oc.usize_opt("grid")?.unwrap_or(commutator.grid);
        if let Some(e) = oc.get("epsilon") {
            commutator.epsilon = sweep_spec(e, "commutator.epsilon", 3)?;
        }
        oc.finish()?;
        if !(commutator.a > 0.0 && commutator.a < 1.0) {
            return Err(schema("commutator.a", "expected 0 < a < 1"));
        }
        if !(commutator.base > 1.0) {
            return Err(schema("commutator.base", "expected a base above 1"));
        }
        if commutator.grid < 17 {
            return Err(schema("commutator.grid", "need at least 17 nodes per axis"));
        }
    }

    let mut minimize = MinimizeConfig { max_iter: 1000, tol: 1e-12, memory: 10, random_starts: 3 };
    if let Some(m) = o.get("minimize") {
        let mut om = Obj::new(m, "minimize")?;
        minimize.max_iter = om.usize_opt("max_iter")?.unwrap_or(minimize.max_iter);
        minimize.tol = om.f64_opt("tol")?.unwrap_or(minimize.tol);
        minimize.memory = om.usize_opt("memory")?.unwrap_or(minimize.memory);
        minimize.random_starts = om.usize_opt("random_starts")?.unwrap_or(minimize.random_starts);
        om.finish()?;
        if !(minimize.tol > 0.0) || minimize.memory == 0 {
            return Err(schema("minimize", "tol must be positive and memory at least 1"));
        }
    }
    o.finish()?;

    let cfg = ScenarioConfig {
        name,
        domain,
        nx,
        ny,
        alpha,
        gamma,
        s_src,
        b_src,
        s22_zero,
        mu,
        lambda,
        tasks: tasks.into_iter().collect(),
        h_sweep,
        seed,
        probe,
        curvature,
        commutator,
        minimize,
        output,
        s,
        b,
    };
    check_grid(&cfg)?;
    Ok(cfg)
}
