//! Executes the task list of a scenario and writes its outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use finepot::capacity::{sobolev_capacity, variational_capacity, DEFAULT_TOL};
use finepot::fine_analysis::{fine_limit_probe, fine_regularize, min_combine, paste, remove_and_verify, RemovalOptions};
use finepot::fine_topology::{fine_boundary, is_finely_open, wiener_profile_with, Sampling, WienerOptions};
use finepot::variational::{solve_obstacle, verify, ObstacleProblem, VerifyKind};
use finepot::{io, FinepotError, NodeSet, ScalarField};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Expect, Scenario, TaskKind, TaskSpec};
use crate::error::CliError;
use crate::scene::Scene;

pub const TOOL_VERSION: &str = concat!("finepot ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Directory that relative file paths in the config resolve against.
    pub base_dir: PathBuf,
    pub jobs: usize,
    /// Run only these tasks (plus the tasks whose fields they read).
    pub only: Option<BTreeSet<String>>,
}

/// Outcome of a single expectation attached to a task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskRecord {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub files: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub scenario: String,
    pub seed: u64,
    pub config_echo: String,
    pub tasks: Vec<TaskRecord>,
    /// Every file written, relative to the output directory.
    pub files: Vec<String>,
    pub wall_seconds: f64,
    pub passed: bool,
}

impl RunReport {
    pub fn failed_checks(&self) -> Vec<(&str, &Check)> {
        self.tasks
            .iter()
            .flat_map(|t| t.checks.iter().filter(|c| !c.passed).map(move |c| (t.name.as_str(), c)))
            .collect()
    }
}

/// Per-task seed: stable under reordering and filtering of the task list.
pub fn task_seed(scenario_seed: u64, task: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in task.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
    rng.set_stream(h);
    rng.next_u64()
}

struct TaskOutput {
    result: Value,
    checks: Vec<Check>,
    files: Vec<(String, Vec<u8>)>,
    field: Option<ScalarField>,
}

/// Runs the selected tasks. Tasks whose inputs are ready run together in
/// waves of at most `jobs` threads; each task is deterministic on its own,
/// so outputs do not depend on `jobs`.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> Result<RunReport, CliError> {
    let started = Instant::now();
    scenario.validate()?;
    let selected = select_tasks(scenario, opts.only.as_ref())?;
    let mut scene = Scene::build(scenario, &opts.base_dir)?;
    fs::create_dir_all(&opts.out_dir).map_err(|e| io_err(&opts.out_dir, e))?;
    // leftovers from an earlier run would describe the wrong run
    for stale in ["report.json", "error.json"] {
        let _ = fs::remove_file(opts.out_dir.join(stale));
    }

    let echo = scenario.to_toml();
    let mut files = vec!["config.echo.toml".to_string()];
    write(&opts.out_dir, "config.echo.toml", echo.as_bytes())?;

    let levels = dependency_levels(scenario, &selected);
    let mut records: BTreeMap<usize, TaskRecord> = BTreeMap::new();
    for level in levels {
        let mut results: Vec<(usize, Result<(TaskOutput, f64), CliError>)> = Vec::new();
        for chunk in level.chunks(opts.jobs.max(1)) {
            let scene_ref = &scene;
            let done = std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&i| {
                        let task = &scenario.tasks[i];
                        let seed = task_seed(scenario.seed, &task.name);
                        s.spawn(move || {
                            let t0 = Instant::now();
                            let out = run_task(scenario, scene_ref, task, seed);
                            (i, out.map(|o| (o, t0.elapsed().as_secs_f64())))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("task thread panicked")).collect::<Vec<_>>()
            });
            results.extend(done);
        }
        // first error in task order wins
        results.sort_by_key(|(i, _)| *i);
        for (i, res) in results {
            let task = &scenario.tasks[i];
            let (out, wall) = res?;
            let seed = task_seed(scenario.seed, &task.name);
            let mut names = Vec::new();
            for (fname, bytes) in &out.files {
                write(&opts.out_dir, fname, bytes)?;
                names.push(fname.clone());
            }
            let json_name = format!("{}.json", task.name);
            let doc = json!({
                "name": task.name,
                "kind": task.kind.label(),
                "seed": seed,
                "result": out.result,
                "checks": out.checks,
                "files": names,
            });
            write(&opts.out_dir, &json_name, pretty(&doc).as_bytes())?;
            names.insert(0, json_name);
            files.extend(names.iter().cloned());
            if let Some(f) = out.field {
                scene.fields.insert(task.name.clone(), f);
            }
            records.insert(
                i,
                TaskRecord {
                    name: task.name.clone(),
                    kind: task.kind.label().to_string(),
                    seed,
                    passed: out.checks.iter().all(|c| c.passed),
                    checks: out.checks,
                    files: names,
                    wall_seconds: wall,
                },
            );
        }
    }

    let tasks: Vec<TaskRecord> = records.into_values().collect();
    files.push("report.json".to_string());
    let report = RunReport {
        tool_version: TOOL_VERSION.to_string(),
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        config_echo: echo,
        passed: tasks.iter().all(|t| t.passed),
        tasks,
        files,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    write(&opts.out_dir, "report.json", pretty(&report).as_bytes())?;
    Ok(report)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))
}

/// Indices of the requested tasks plus the producing tasks they read from.
fn select_tasks(s: &Scenario, only: Option<&BTreeSet<String>>) -> Result<BTreeSet<usize>, CliError> {
    let Some(only) = only else {
        return Ok((0..s.tasks.len()).collect());
    };
    let index: BTreeMap<&str, usize> = s.tasks.iter().enumerate().map(|(i, t)| (t.name.as_str(), i)).collect();
    let mut stack = Vec::new();
    for name in only {
        match index.get(name.as_str()) {
            Some(&i) => stack.push(i),
            None => return Err(CliError::Parse(format!("no task named '{name}' in scenario '{}'", s.name))),
        }
    }
    let mut out = BTreeSet::new();
    while let Some(i) = stack.pop() {
        if out.insert(i) {
            for f in s.tasks[i].kind.field_refs() {
                if let Some(&j) = index.get(f) {
                    if s.tasks[j].kind.produces_field() && j < i {
                        stack.push(j);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Groups tasks so that every task comes after the producers it reads.
fn dependency_levels(s: &Scenario, selected: &BTreeSet<usize>) -> Vec<Vec<usize>> {
    let mut level_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut levels: Vec<Vec<usize>> = Vec::new();
    for &i in selected {
        let t = &s.tasks[i];
        let lvl = t
            .kind
            .field_refs()
            .iter()
            .filter_map(|f| level_of.get(f).map(|l| l + 1))
            .max()
            .unwrap_or(0);
        if t.kind.produces_field() {
            level_of.insert(&t.name, lvl);
        }
        if levels.len() <= lvl {
            levels.resize(lvl + 1, Vec::new());
        }
        levels[lvl].push(i);
    }
    levels
}

fn expect_check(name: &str, got: f64, e: &Expect) -> Check {
    let rel = (got - e.value).abs() / e.value.abs().max(f64::MIN_POSITIVE);
    Check {
        name: name.to_string(),
        passed: rel <= e.rel_tol,
        detail: format!("got {got:.6e}, expected {:.6e} within {} (relative error {rel:.3e})", e.value, e.rel_tol),
    }
}

fn equal_check<T: PartialEq + std::fmt::Debug>(name: &str, got: T, want: T) -> Check {
    Check {
        name: name.to_string(),
        passed: got == want,
        detail: format!("got {got:?}, expected {want:?}"),
    }
}

fn label_of<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn field_files(name: &str, u: &ScalarField) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![(format!("{name}.csv"), io::field_to_csv(u).into_bytes())];
    if u.domain().dim() == 2 {
        if let Ok(img) = io::field_to_pgm(u) {
            out.push((format!("{name}.pgm"), img));
        }
    }
    out
}

fn mask_files(name: &str, inside: &NodeSet, inconclusive: Option<&NodeSet>) -> Vec<(String, Vec<u8>)> {
    let mut out = vec![(format!("{name}.csv"), io::mask_to_csv(inside).into_bytes())];
    if inside.domain().dim() == 2 {
        if let Ok(img) = io::classes_to_pgm(inside, inconclusive) {
            out.push((format!("{name}.pgm"), img));
        }
    }
    out
}

fn run_task(s: &Scenario, scene: &Scene, task: &TaskSpec, seed: u64) -> Result<TaskOutput, CliError> {
    let name = task.name.as_str();
    let fail = |e: FinepotError| CliError::Task {
        task: name.to_string(),
        source: e,
    };
    let set = |n: &str| &scene.sets[n];
    let field = |n: &str| &scene.fields[n];
    let p = task.kind.p().unwrap_or(s.domain.p);
    scene.domain.check_p(p).map_err(fail)?;
    let mut checks = Vec::new();
    let mut files = Vec::new();
    let mut produced = None;

    let result = match &task.kind {
        TaskKind::Capacity { e, a, expect, dump, .. } => {
            let r = variational_capacity(set(e), set(a), p, DEFAULT_TOL).map_err(fail)?;
            if let Some(x) = expect {
                checks.push(expect_check("value", r.value, x));
            }
            let reference = dump.then(|| format!("{name}.potential.csv"));
            if *dump {
                files.extend(field_files(&format!("{name}.potential"), &r.potential));
            }
            json!(r.summary(reference))
        }
        TaskKind::SobolevCapacity { e, expect, dump, .. } => {
            let r = sobolev_capacity(set(e), p, DEFAULT_TOL).map_err(fail)?;
            if let Some(x) = expect {
                checks.push(expect_check("value", r.value, x));
            }
            let reference = dump.then(|| format!("{name}.potential.csv"));
            if *dump {
                files.extend(field_files(&format!("{name}.potential"), &r.potential));
            }
            json!(r.summary(reference))
        }
        TaskKind::Wiener {
            e,
            at,
            r0,
            scales,
            options,
            expect_verdict,
            ..
        } => {
            let opts = options.unwrap_or_default();
            let prof = wiener_profile_with(set(e), at, p, *r0, *scales, &opts).map_err(fail)?;
            if let Some(want) = expect_verdict {
                checks.push(equal_check("verdict", label_of(&prof.verdict), want.clone()));
            }
            json!(prof)
        }
        TaskKind::FineCheck {
            v,
            stride,
            points,
            r0,
            scales,
            expect,
            ..
        } => {
            let sampling = Sampling {
                stride: *stride,
                points: points.clone(),
                r0: *r0,
                scales: *scales,
                options: None::<WienerOptions>,
            };
            let rep = is_finely_open(set(v), p, &sampling).map_err(fail)?;
            if let Some(want) = expect {
                checks.push(equal_check("aggregate", label_of(&rep.aggregate), want.clone()));
            }
            json!(rep)
        }
        TaskKind::FineBoundary {
            e, stride, r0, scales, ..
        } => {
            let sampling = Sampling {
                stride: *stride,
                r0: *r0,
                scales: *scales,
                ..Sampling::default()
            };
            let rep = fine_boundary(set(e), p, &sampling).map_err(fail)?;
            files.extend(mask_files(&format!("{name}.boundary"), &rep.boundary, Some(&rep.inconclusive)));
            json!({
                "boundary_count": rep.boundary.count(),
                "inconclusive_count": rep.inconclusive.count(),
                "skipped_count": rep.skipped.count(),
                "evaluated": rep.evaluated,
                "boundary_ref": format!("{name}.boundary.csv"),
            })
        }
        TaskKind::Solve {
            u,
            f,
            psi,
            tol,
            max_iterations,
            oracle,
            error_on,
            max_error,
            ..
        } => {
            let mut prob = match psi {
                Some(psi) => ObstacleProblem::new(set(u).clone(), field(f).clone(), field(psi).clone(), p, *tol),
                None => ObstacleProblem::dirichlet(set(u).clone(), field(f).clone(), p, *tol),
            };
            if let Some(m) = max_iterations {
                prob.max_iterations = *m;
            }
            let rep = solve_obstacle(&prob).map_err(fail)?;
            let mut doc = json!(rep.summary());
            doc["value_tol"] = json!(rep.value_tol);
            doc["solution_ref"] = json!(format!("{name}.csv"));
            if let Some(o) = oracle {
                let on = set(error_on.as_deref().unwrap_or(u));
                let (err, scale) = sup_error(&rep.solution, field(o), on);
                let rel = err / scale.max(f64::MIN_POSITIVE);
                doc["oracle"] = json!({ "field": o, "sup_error": err, "sup_oracle": scale, "sup_relative_error": rel });
                files.push((format!("{name}.oracle.csv"), io::field_to_csv(field(o)).into_bytes()));
                if let Some(m) = max_error {
                    checks.push(Check {
                        name: "sup_relative_error".into(),
                        passed: rel <= *m,
                        detail: format!("sup-relative error {rel:.3e}, allowed {m}"),
                    });
                }
            }
            files.extend(field_files(name, &rep.solution));
            produced = Some(rep.solution);
            doc
        }
        TaskKind::Verify {
            field: fname,
            u,
            verify: kind,
            n_tests,
            expect_pass,
        } => {
            let rep = verify(field(fname), set(u), p, *kind, *n_tests, seed).map_err(fail)?;
            checks.push(equal_check("verify", rep.passed, *expect_pass));
            json!(rep.summary())
        }
        TaskKind::Paste {
            u1_set,
            u2_set,
            u1,
            u2,
            n_tests,
            expect_pass,
        } => {
            let w = paste(set(u1_set), set(u2_set), field(u1), field(u2)).map_err(fail)?;
            let rep = verify(&w, set(u2_set), p, VerifyKind::Superminimizer, *n_tests, seed).map_err(fail)?;
            checks.push(equal_check("verify", rep.passed, *expect_pass));
            files.extend(field_files(name, &w));
            produced = Some(w);
            json!({ "verify": rep.summary(), "field_ref": format!("{name}.csv") })
        }
        TaskKind::Min {
            u,
            v,
            set: on,
            n_tests,
            expect_pass,
        } => {
            let w = min_combine(field(u), field(v), set(on)).map_err(fail)?;
            let rep = verify(&w, set(on), p, VerifyKind::Superminimizer, *n_tests, seed).map_err(fail)?;
            checks.push(equal_check("verify", rep.passed, *expect_pass));
            files.extend(field_files(name, &w));
            produced = Some(w);
            json!({ "verify": rep.summary(), "field_ref": format!("{name}.csv") })
        }
        TaskKind::Remove {
            field: fname,
            u,
            e,
            verify: kind,
            n_tests,
            forget,
            threshold,
            expect_pass,
        } => {
            let mut input = field(fname).clone();
            if *forget {
                for j in set(e).iter().filter(|&j| !set(u).contains(j)) {
                    input.set(j, f64::NAN);
                }
            }
            let opts = RemovalOptions {
                kind: *kind,
                n_tests: *n_tests,
                seed,
                capacity_threshold: *threshold,
            };
            let rep = remove_and_verify(&input, set(u), set(e), p, &opts).map_err(fail)?;
            checks.push(equal_check("verify", rep.verify.passed, *expect_pass));
            if let Some(below) = rep.below_threshold {
                checks.push(equal_check("capacity_below_threshold", below, true));
            }
            files.extend(field_files(name, &rep.extended));
            let doc = json!({
                "verify": rep.verify.summary(),
                "capacity_proxy": rep.capacity_proxy,
                "below_threshold": rep.below_threshold,
                "energy": rep.energy,
                "filled": rep.filled,
                "field_ref": format!("{name}.csv"),
            });
            produced = Some(rep.extended);
            doc
        }
        TaskKind::Regularize {
            field: fname,
            u,
            mode,
            trim,
        } => {
            let before = field(fname);
            let w = fine_regularize(before, set(u), *mode, *trim).map_err(fail)?;
            let changed: Vec<f64> = set(u)
                .iter()
                .map(|i| (w.get(i) - before.get(i)).abs())
                .filter(|d| *d > 0.0)
                .collect();
            files.extend(field_files(name, &w));
            produced = Some(w);
            json!({
                "changed_nodes": changed.len(),
                "max_change": changed.iter().cloned().fold(0.0, f64::max),
                "field_ref": format!("{name}.csv"),
            })
        }
        TaskKind::Probe {
            field: fname,
            at,
            r0,
            trim,
            expect_verdict,
        } => {
            let pr = fine_limit_probe(field(fname), at, *r0, *trim).map_err(fail)?;
            if let Some(want) = expect_verdict {
                checks.push(equal_check("verdict", label_of(&pr.verdict), want.clone()));
            }
            let mut doc = json!(pr);
            doc["raw_oscillation"] = json!(pr.raw_oscillation());
            doc["trimmed_oscillation"] = json!(pr.trimmed_oscillation());
            doc
        }
    };
    Ok(TaskOutput {
        result,
        checks,
        files,
        field: produced,
    })
}

/// Sup of `|u - o|` and of `|o|` over the finite oracle values on `on`.
fn sup_error(u: &ScalarField, o: &ScalarField, on: &NodeSet) -> (f64, f64) {
    on.iter()
        .filter(|&i| o.get(i).is_finite())
        .fold((0.0, 0.0), |(e, s), i| (f64::max(e, (u.get(i) - o.get(i)).abs()), f64::max(s, o.get(i).abs())))
}
