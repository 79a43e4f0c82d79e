use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finepot_cli::config::apply_override;
use finepot_cli::{gallery, run, CliError, RunOptions, RunReport, Scenario};

#[derive(Parser)]
#[command(name = "finepot", version, about = "Run fine potential theory scenarios on uniform grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario.
    Run(RunArgs),
    /// List the bundled scenarios.
    List,
    /// Run only the capacity and sobolev_capacity tasks.
    Capacity(RunArgs),
    /// Run only the wiener tasks.
    Wiener(RunArgs),
    /// Run only the fine_check and fine_boundary tasks.
    FineCheck(RunArgs),
    /// Run only the solve tasks.
    Solve(RunArgs),
    /// Run only the verify and remove tasks (and the solves they read).
    Verify(RunArgs),
    /// Run only the paste and min tasks (and the solves they read).
    Paste(RunArgs),
    /// Run only the probe and regularize tasks (and the solves they read).
    Probe(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Name of a bundled scenario; see `finepot list`.
    scenario: Option<String>,
    /// Scenario file; replaces the bundled name.
    #[arg(long, conflicts_with = "scenario")]
    config: Option<PathBuf>,
    /// Output directory [default: finepot-out/<scenario>].
    #[arg(long, env = "FINEPOT_OUT")]
    out: Option<PathBuf>,
    /// Replaces the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Independent tasks to run at once.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: u64,
    /// Override a config value, e.g. `--set domain.resolution=[129,129]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Restrict to the named tasks (repeatable).
    #[arg(long = "task", value_name = "NAME")]
    tasks: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, kinds): (RunArgs, &[&str]) = match cli.command {
        Command::List => {
            print!("{}", gallery::listing());
            return ExitCode::SUCCESS;
        }
        Command::Run(a) => (a, &[]),
        Command::Capacity(a) => (a, &["capacity", "sobolev_capacity"]),
        Command::Wiener(a) => (a, &["wiener"]),
        Command::FineCheck(a) => (a, &["fine_check", "fine_boundary"]),
        Command::Solve(a) => (a, &["solve"]),
        Command::Verify(a) => (a, &["verify", "remove"]),
        Command::Paste(a) => (a, &["paste", "min"]),
        Command::Probe(a) => (a, &["probe", "regularize"]),
    };
    let mut out_dir = args.out.clone();
    let result = load(&args).and_then(|(scenario, base)| {
        let out = out_dir
            .get_or_insert_with(|| Path::new("finepot-out").join(&scenario.name))
            .clone();
        let only = select(&scenario, &args.tasks, kinds)?;
        let opts = RunOptions {
            out_dir: out,
            base_dir: base,
            jobs: args.jobs as usize,
            only,
        };
        run(&scenario, &opts)
    });
    match result {
        Ok(report) => {
            summarize(&report, out_dir.as_deref().unwrap_or(Path::new(".")));
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            let doc = serde_json::to_string_pretty(&e.to_json()).expect("json");
            if let Some(dir) = &out_dir {
                if std::fs::create_dir_all(dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), format!("{doc}\n"));
                }
            }
            eprintln!("{doc}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Parses the scenario, applies `--set` and `--seed`, and returns it with
/// the directory its relative paths resolve against.
fn load(args: &RunArgs) -> Result<(Scenario, PathBuf), CliError> {
    let (text, base) = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
            let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (text, base)
        }
        (None, Some(name)) => (gallery::source(name)?.to_string(), PathBuf::from(".")),
        (None, None) => {
            return Err(CliError::Parse(
                "give a bundled scenario name or --config <file>; see `finepot list`".into(),
            ))
        }
    };
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    for o in &args.overrides {
        apply_override(&mut table, o)?;
    }
    if let Some(seed) = args.seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    Ok((Scenario::from_table(table)?, base))
}

fn select(s: &Scenario, names: &[String], kinds: &[&str]) -> Result<Option<BTreeSet<String>>, CliError> {
    if names.is_empty() && kinds.is_empty() {
        return Ok(None);
    }
    let picked: BTreeSet<String> = s
        .tasks
        .iter()
        .filter(|t| kinds.is_empty() || kinds.contains(&t.kind.label()))
        .filter(|t| names.is_empty() || names.contains(&t.name))
        .map(|t| t.name.clone())
        .collect();
    if let Some(missing) = names.iter().find(|n| !s.tasks.iter().any(|t| &t.name == *n)) {
        return Err(CliError::Parse(format!("no task named '{missing}' in scenario '{}'", s.name)));
    }
    if picked.is_empty() {
        return Err(CliError::Parse(format!(
            "scenario '{}' has no {} tasks to run",
            s.name,
            kinds.join("/")
        )));
    }
    Ok(Some(picked))
}

fn summarize(report: &RunReport, out: &Path) {
    for t in &report.tasks {
        let status = if t.passed { "ok" } else { "FAILED" };
        println!("{:<24} {:<18} {:>8.2}s  {status}", t.name, t.kind, t.wall_seconds);
        for c in t.checks.iter().filter(|c| !c.passed) {
            println!("    {}: {}", c.name, c.detail);
        }
    }
    println!("report: {}", out.join("report.json").display());
}
