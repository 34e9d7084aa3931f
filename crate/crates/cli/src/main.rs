//! `ftm`: batch driver for transfer-matrix scattering runs.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 identity check failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting checks

mod config;
mod output;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use crate::config::{apply_override, load_file, resolve_potential, RunConfig, Task};
use crate::output::{json_bytes, sha256_hex, write_artifacts};

pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IDENTITY: u8 = 4;

/// A run failure with its exit code and a machine-readable kind.
#[derive(Debug)]
pub struct Failure {
    pub kind: String,
    pub message: String,
    pub exit_code: u8,
}

impl Failure {
    pub fn invalid(kind: &str, message: String) -> Self {
        Self { kind: kind.into(), message, exit_code: EXIT_INVALID }
    }

    fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.exit_code } })
    }
}

impl From<ftm_core::error::Error> for Failure {
    fn from(e: ftm_core::error::Error) -> Self {
        let debug = format!("{e:?}");
        let kind: String = debug.chars().take_while(|c| c.is_alphanumeric()).collect();
        let exit_code = if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_INVALID };
        Self { kind, message: e.to_string(), exit_code }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ftm", version, about = "Transfer-matrix scattering runs from a config file")]
struct Cli {
    /// Run configuration (.json or .toml).
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    rtol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also sample the reciprocal pair (−n, −n₀) of every (n₀, n).
    #[arg(long)]
    paired: bool,
    /// Override any config key: --set potential.radius=1.5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl clap::ValueEnum for Task {
    fn value_variants<'a>() -> &'a [Self] {
        &[
            Task::Transfer,
            Task::Amplitudes,
            Task::AngleScan,
            Task::KScan,
            Task::SingularityScan,
            Task::VerifyIdentities,
            Task::OracleCompare,
        ]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

/// Config file, then flags, then `--set` overrides.
fn merged_config(cli: &Cli) -> Result<Value, Failure> {
    let mut v = match &cli.config {
        Some(path) => load_file(path)?,
        None => json!({}),
    };
    let obj = v.as_object_mut().expect("object");
    if let Some(t) = cli.task {
        obj.insert("task".into(), json!(t));
    }
    if let Some(k) = cli.k {
        obj.insert("k".into(), json!(k));
    }
    if let Some(d) = cli.d {
        obj.insert("d".into(), json!(d));
    }
    if let Some(r) = cli.rtol {
        obj.insert("rtol".into(), json!(r));
    }
    if let Some(o) = &cli.out {
        obj.insert("out".into(), json!(o));
    }
    if cli.paired {
        obj.insert("paired".into(), json!(true));
    }
    for s in &cli.set {
        apply_override(&mut v, s)?;
    }
    Ok(v)
}

fn configure_threads() -> Result<usize, Failure> {
    if let Ok(raw) = std::env::var("FTM_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::invalid("InvalidConfig", format!("FTM_THREADS must be a positive integer, got {raw:?}")))?;
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

struct Run {
    config: Option<RunConfig>,
    resolved: Value,
    input_files: Vec<Value>,
    inputs_sha256: String,
    seeds: Vec<u64>,
    outputs: Vec<Value>,
    summary: Value,
    task_seconds: f64,
}

fn execute(cli: &Cli, run: &mut Run) -> Result<bool, Failure> {
    configure_threads()?;
    let merged = merged_config(cli)?;
    let cfg = RunConfig::from_value(merged)?;
    run.resolved = serde_json::to_value(&cfg).expect("config serializes");
    run.config = Some(cfg.clone());

    let base = cli.config.as_deref().and_then(Path::parent).unwrap_or(Path::new("."));
    let potential = resolve_potential(&cfg, base)?;
    run.seeds = potential.seeds.clone();
    // Canonical (sorted-key) config JSON without the output location, followed
    // by every referenced file: identical inputs hash alike wherever they are written.
    let mut hashed = run.resolved.clone();
    hashed.as_object_mut().expect("object").remove("out");
    let mut inputs = serde_json::to_vec(&hashed).expect("config serializes");
    for path in &potential.files {
        let bytes = std::fs::read(path).map_err(|e| Failure::invalid("Io", format!("{}: {e}", path.display())))?;
        run.input_files.push(json!({ "path": path, "sha256": sha256_hex(&bytes) }));
        inputs.extend(bytes);
    }
    run.inputs_sha256 = sha256_hex(&inputs);

    std::fs::create_dir_all(&cfg.out).map_err(|e| Failure::invalid("Io", format!("cannot create {}: {e}", cfg.out.display())))?;
    let ctx = tasks::Context { cfg: &cfg, v: &potential.model, stepper: cfg.stepper() };
    ctx.stepper.validate()?;
    let start = Instant::now();
    let outcome = tasks::run(&ctx)?;
    run.task_seconds = start.elapsed().as_secs_f64();
    run.outputs = write_artifacts(&cfg.out, &outcome.artifacts)?;
    run.summary = outcome.summary;
    Ok(!outcome.identities_failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut run = Run {
        config: None,
        resolved: Value::Null,
        input_files: Vec::new(),
        inputs_sha256: String::new(),
        seeds: Vec::new(),
        outputs: Vec::new(),
        summary: Value::Null,
        task_seconds: 0.0,
    };
    let result = execute(&cli, &mut run);
    let (status, exit_code, error) = match &result {
        Ok(true) => ("ok", 0, Value::Null),
        Ok(false) => ("identity_check_failed", EXIT_IDENTITY, Value::Null),
        Err(f) => ("error", f.exit_code, f.to_json()["error"].clone()),
    };
    if let Err(f) = &result {
        eprintln!("{}", f.to_json());
    } else if exit_code == EXIT_IDENTITY {
        eprintln!(
            "{}",
            json!({ "error": { "kind": "IdentityCheckFailed", "message": format!("failed records: {}", run.summary["failed"]), "exit_code": EXIT_IDENTITY } })
        );
    }

    // The manifest is written even on failure, to the configured directory when
    // one was resolved and the working directory otherwise.
    let out_dir = run.config.as_ref().map(|c| c.out.clone()).or_else(|| cli.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    let manifest = json!({
        "tool": "ftm",
        "version": env!("CARGO_PKG_VERSION"),
        "task": run.config.as_ref().map(|c| c.task.name()),
        "status": status,
        "exit_code": exit_code,
        "error": error,
        "config": run.resolved,
        "inputs_sha256": run.inputs_sha256,
        "input_files": run.input_files,
        "seeds": run.seeds,
        "threads": rayon::current_num_threads(),
        "timings": { "task_seconds": run.task_seconds, "total_seconds": start.elapsed().as_secs_f64() },
        "outputs": run.outputs,
        "summary": run.summary,
    });
    let path = out_dir.join("manifest.json");
    if std::fs::create_dir_all(&out_dir).and_then(|_| std::fs::write(&path, json_bytes(&manifest))).is_err() {
        eprintln!("{}", Failure::invalid("Io", format!("cannot write {}", path.display())).to_json());
        return ExitCode::from(if exit_code == 0 { EXIT_INVALID } else { exit_code });
    }
    ExitCode::from(exit_code)
}
