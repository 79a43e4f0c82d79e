//! Scenario files: a domain, named node sets and fields, and a task list.
//!
//! Everything is plain TOML. Unknown keys are rejected rather than ignored,
//! so a typo in a config is a parse error instead of a silently dropped
//! setting.

use std::collections::{BTreeMap, BTreeSet};

use finepot::fine_analysis::RegularizeMode;
use finepot::fine_topology::WienerOptions;
use finepot::variational::VerifyKind;
use finepot::WeightSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSpec,
    #[serde(default)]
    pub sets: BTreeMap<String, SetSpec>,
    #[serde(default)]
    pub fields: BTreeMap<String, FieldSpec>,
    #[serde(default)]
    pub tasks: Vec<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub dim: usize,
    /// `[lo, hi]` per axis.
    pub bounds: Vec<[f64; 2]>,
    /// Nodes per axis.
    pub resolution: Vec<usize>,
    #[serde(default)]
    pub weight: WeightSpec,
    /// Default exponent for every task.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
        #[serde(default)]
        closed: bool,
    },
    /// Closed box `lower <= x <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Nodes within `half_width` (default h/2) of the segment.
    Segment {
        from: Vec<f64>,
        to: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        half_width: Option<f64>,
    },
    /// `{tip + s a + t : 0 <= s <= length, |t| <= scale * g(s), t ⊥ a}`
    /// with `g(s) = exp(-1/s)` or `s^beta`.
    Cusp {
        tip: Vec<f64>,
        axis: Vec<f64>,
        length: f64,
        profile: CuspProfile,
        #[serde(default = "one")]
        scale: f64,
    },
    Point { at: Vec<f64> },
    /// `x . normal > offset`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Nodes off the faces of the grid box.
    Interior,
    Full,
    Empty,
    Union(Vec<String>),
    Intersection(Vec<String>),
    /// First minus the union of the rest.
    Difference(Vec<String>),
    Complement(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuspProfile {
    Exp,
    Power { beta: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Affine {
        gradient: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// `coefficient * log|x - center| + offset`; `|x - center|` is floored at
    /// h/2 unless `center_value` fixes the value at the centre node.
    Log {
        center: Vec<f64>,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_value: Option<f64>,
    },
    /// `coefficient * |x - center|^exponent + offset`, floored like `log`.
    Power {
        center: Vec<f64>,
        exponent: f64,
        #[serde(default = "one")]
        coefficient: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_value: Option<f64>,
    },
    Distance {
        to: Vec<f64>,
    },
    /// `height * max(0, 1 - |x - center| / radius) + offset`.
    Cone {
        center: Vec<f64>,
        radius: f64,
        height: f64,
        #[serde(default)]
        offset: f64,
    },
    /// CSV with `node_index,...,value` rows; relative paths are resolved
    /// against the directory of the config file.
    File {
        path: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expect {
    pub value: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: TaskKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    /// `cp(e, a)`.
    Capacity {
        e: String,
        a: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Expect>,
        #[serde(default)]
        dump: bool,
    },
    /// `Cp(e)`.
    SobolevCapacity {
        e: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<Expect>,
        #[serde(default)]
        dump: bool,
    },
    Wiener {
        e: String,
        at: Vec<f64>,
        r0: f64,
        scales: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        options: Option<WienerOptions>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_verdict: Option<String>,
    },
    /// Fine openness of `v` at sampled points.
    FineCheck {
        v: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default = "one_usize")]
        stride: usize,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        scales: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect: Option<String>,
    },
    FineBoundary {
        e: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default = "one_usize")]
        stride: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r0: Option<f64>,
        scales: usize,
    },
    /// Obstacle problem on `u` with data `f` and obstacle `psi` (Dirichlet
    /// when absent). The solution is bound under the task name.
    Solve {
        u: String,
        f: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        psi: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iterations: Option<usize>,
        /// Closed-form field to compare against.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        oracle: Option<String>,
        /// Nodes on which the error is measured (default `u`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error_on: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_error: Option<f64>,
    },
    Verify {
        field: String,
        u: String,
        #[serde(default = "default_verify_kind")]
        verify: VerifyKind,
        #[serde(default = "default_tests")]
        n_tests: usize,
        #[serde(default = "yes")]
        expect_pass: bool,
    },
    /// `min(u1, u2)` on `u1_set`, `u2` elsewhere; verified on `u2_set`.
    Paste {
        u1_set: String,
        u2_set: String,
        u1: String,
        u2: String,
        #[serde(default = "default_tests")]
        n_tests: usize,
        #[serde(default = "yes")]
        expect_pass: bool,
    },
    /// Pointwise minimum, verified on `set`.
    Min {
        u: String,
        v: String,
        set: String,
        #[serde(default = "default_tests")]
        n_tests: usize,
        #[serde(default = "yes")]
        expect_pass: bool,
    },
    /// Extends `field` from `u` to `u ∪ e` and verifies it there. With
    /// `forget`, values on `e \ u` are discarded first and refilled.
    Remove {
        field: String,
        u: String,
        e: String,
        #[serde(default = "default_verify_kind")]
        verify: VerifyKind,
        #[serde(default = "default_tests")]
        n_tests: usize,
        #[serde(default)]
        forget: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold: Option<f64>,
        #[serde(default = "yes")]
        expect_pass: bool,
    },
    Regularize {
        field: String,
        u: String,
        mode: RegularizeMode,
        #[serde(default = "default_trim")]
        trim: f64,
    },
    Probe {
        field: String,
        at: Vec<f64>,
        r0: f64,
        #[serde(default = "default_trim")]
        trim: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_verdict: Option<String>,
    },
}

fn one_usize() -> usize {
    1
}

fn default_tol() -> f64 {
    finepot::capacity::DEFAULT_TOL
}

fn default_verify_kind() -> VerifyKind {
    VerifyKind::Superminimizer
}

fn default_tests() -> usize {
    100
}

fn yes() -> bool {
    true
}

fn default_trim() -> f64 {
    finepot::fine_analysis::DEFAULT_TRIM
}

impl TaskKind {
    pub fn label(&self) -> &'static str {
        match self {
            TaskKind::Capacity { .. } => "capacity",
            TaskKind::SobolevCapacity { .. } => "sobolev_capacity",
            TaskKind::Wiener { .. } => "wiener",
            TaskKind::FineCheck { .. } => "fine_check",
            TaskKind::FineBoundary { .. } => "fine_boundary",
            TaskKind::Solve { .. } => "solve",
            TaskKind::Verify { .. } => "verify",
            TaskKind::Paste { .. } => "paste",
            TaskKind::Min { .. } => "min",
            TaskKind::Remove { .. } => "remove",
            TaskKind::Regularize { .. } => "regularize",
            TaskKind::Probe { .. } => "probe",
        }
    }

    /// Whether the task binds a field under its own name.
    pub fn produces_field(&self) -> bool {
        matches!(
            self,
            TaskKind::Solve { .. }
                | TaskKind::Paste { .. }
                | TaskKind::Min { .. }
                | TaskKind::Remove { .. }
                | TaskKind::Regularize { .. }
        )
    }

    /// Set names the task reads.
    pub fn set_refs(&self) -> Vec<&str> {
        match self {
            TaskKind::Capacity { e, a, .. } => vec![e, a],
            TaskKind::SobolevCapacity { e, .. } | TaskKind::Wiener { e, .. } | TaskKind::FineBoundary { e, .. } => {
                vec![e]
            }
            TaskKind::FineCheck { v, .. } => vec![v],
            TaskKind::Solve { u, error_on, .. } => std::iter::once(u.as_str()).chain(error_on.as_deref()).collect(),
            TaskKind::Verify { u, .. } | TaskKind::Regularize { u, .. } => vec![u],
            TaskKind::Paste { u1_set, u2_set, .. } => vec![u1_set, u2_set],
            TaskKind::Min { set, .. } => vec![set],
            TaskKind::Remove { u, e, .. } => vec![u, e],
            TaskKind::Probe { .. } => vec![],
        }
    }

    /// Field names the task reads (closed forms or earlier task outputs).
    pub fn field_refs(&self) -> Vec<&str> {
        match self {
            TaskKind::Solve { f, psi, oracle, .. } => std::iter::once(f.as_str())
                .chain(psi.as_deref())
                .chain(oracle.as_deref())
                .collect(),
            TaskKind::Verify { field, .. }
            | TaskKind::Remove { field, .. }
            | TaskKind::Regularize { field, .. }
            | TaskKind::Probe { field, .. } => vec![field],
            TaskKind::Paste { u1, u2, .. } => vec![u1, u2],
            TaskKind::Min { u, v, .. } => vec![u, v],
            _ => vec![],
        }
    }

    pub fn p(&self) -> Option<f64> {
        match self {
            TaskKind::Capacity { p, .. }
            | TaskKind::SobolevCapacity { p, .. }
            | TaskKind::Wiener { p, .. }
            | TaskKind::FineCheck { p, .. }
            | TaskKind::FineBoundary { p, .. }
            | TaskKind::Solve { p, .. } => *p,
            _ => None,
        }
    }
}

impl SetSpec {
    fn refs(&self) -> Vec<&str> {
        match self {
            SetSpec::Union(v) | SetSpec::Intersection(v) | SetSpec::Difference(v) => v.iter().map(String::as_str).collect(),
            SetSpec::Complement(s) => vec![s],
            _ => vec![],
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, CliError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        Scenario::from_table(raw)
    }

    pub fn from_table(raw: toml::Table) -> Result<Scenario, CliError> {
        let scenario: Scenario = raw
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
        let known = toml::Table::try_from(&scenario).map_err(|e| CliError::Parse(e.to_string()))?;
        let mut unknown = Vec::new();
        unknown_keys(&toml::Value::Table(raw), &toml::Value::Table(known), "", &mut unknown);
        if !unknown.is_empty() {
            return Err(CliError::Parse(format!("unknown keys: {}", unknown.join(", "))));
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("scenario serializes")
    }

    /// Checks names, references and shapes without building anything.
    pub fn validate(&self) -> Result<(), CliError> {
        let d = &self.domain;
        let bad = |msg: String| Err(CliError::Parse(msg));
        if !(1..=3).contains(&d.dim) {
            return bad(format!("domain.dim must be 1, 2 or 3, got {}", d.dim));
        }
        if d.bounds.len() != d.dim || d.resolution.len() != d.dim {
            return bad("domain.bounds and domain.resolution need one entry per axis".into());
        }
        if !(d.p > 1.0) {
            return bad(format!("domain.p must exceed 1, got {}", d.p));
        }
        for (name, spec) in &self.sets {
            for r in spec.refs() {
                if !self.sets.contains_key(r) {
                    return bad(format!("set '{name}' refers to unknown set '{r}'"));
                }
            }
        }
        self.check_set_cycles()?;
        let mut bound_fields: BTreeSet<&str> = self.fields.keys().map(String::as_str).collect();
        let mut task_names = BTreeSet::new();
        for t in &self.tasks {
            if !task_names.insert(t.name.as_str()) {
                return bad(format!("duplicate task name '{}'", t.name));
            }
            if t.name.is_empty() || t.name.contains(['/', '\\']) || t.name.starts_with('.') {
                return bad(format!("task name '{}' is not a plain file name", t.name));
            }
            for s in t.kind.set_refs() {
                if !self.sets.contains_key(s) {
                    return bad(format!("task '{}' refers to unknown set '{s}'", t.name));
                }
            }
            for f in t.kind.field_refs() {
                if !bound_fields.contains(f) {
                    return bad(format!(
                        "task '{}' refers to unknown field '{f}' (fields and earlier producing tasks only)",
                        t.name
                    ));
                }
            }
            if t.kind.produces_field() {
                if self.fields.contains_key(&t.name) {
                    return bad(format!("task '{}' would shadow the field of the same name", t.name));
                }
                bound_fields.insert(t.name.as_str());
            }
            if let Some(p) = t.kind.p() {
                if !(p > 1.0) {
                    return bad(format!("task '{}': p must exceed 1, got {p}", t.name));
                }
            }
        }
        Ok(())
    }

    fn check_set_cycles(&self) -> Result<(), CliError> {
        fn visit<'a>(
            s: &'a Scenario,
            name: &'a str,
            stack: &mut Vec<&'a str>,
            done: &mut BTreeSet<&'a str>,
        ) -> Result<(), CliError> {
            if done.contains(name) {
                return Ok(());
            }
            if stack.contains(&name) {
                return Err(CliError::Parse(format!("set '{name}' is defined in terms of itself")));
            }
            stack.push(name);
            for r in s.sets[name].refs() {
                visit(s, r, stack, done)?;
            }
            stack.pop();
            done.insert(name);
            Ok(())
        }
        let mut done = BTreeSet::new();
        for name in self.sets.keys() {
            visit(self, name, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }
}

fn unknown_keys(raw: &toml::Value, known: &toml::Value, path: &str, out: &mut Vec<String>) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match (raw, known) {
        (toml::Value::Table(r), toml::Value::Table(k)) => {
            for (key, rv) in r {
                match k.get(key) {
                    Some(kv) => unknown_keys(rv, kv, &join(key), out),
                    None => out.push(join(key)),
                }
            }
        }
        (toml::Value::Array(r), toml::Value::Array(k)) => {
            for (i, (rv, kv)) in r.iter().zip(k).enumerate() {
                unknown_keys(rv, kv, &join(&i.to_string()), out);
            }
        }
        _ => {}
    }
}

/// Applies `key=value` to a parsed config. The key is a dotted path; array
/// elements are addressed by index (`tasks.0.r0`). The value is read as a
/// TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override '{spec}' is not of the form key=value")))?;
    let key = key.trim();
    let value = parse_value(value.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Parse(format!("bad override key '{key}'")));
    }
    let mut root = toml::Value::Table(std::mem::take(table));
    let ok = set_path(&mut root, &parts, value);
    if let toml::Value::Table(t) = root {
        *table = t;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Parse(format!("override key '{key}' does not name a field of the config")))
    }
}

/// A missing last key is added to its table; keys the schema does not know
/// are rejected later, when the table is parsed.
fn set_path(cur: &mut toml::Value, path: &[&str], value: toml::Value) -> bool {
    let Some((first, rest)) = path.split_first() else {
        *cur = value;
        return true;
    };
    match cur {
        toml::Value::Table(t) if rest.is_empty() => {
            t.insert(first.to_string(), value);
            true
        }
        toml::Value::Table(t) => t.get_mut(*first).is_some_and(|next| set_path(next, rest, value)),
        toml::Value::Array(a) => first
            .parse::<usize>()
            .ok()
            .and_then(|i| a.get_mut(i))
            .is_some_and(|next| set_path(next, rest, value)),
        _ => false,
    }
}

fn parse_value(text: &str) -> toml::Value {
    match format!("v = {text}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(text.to_string()),
    }
}
