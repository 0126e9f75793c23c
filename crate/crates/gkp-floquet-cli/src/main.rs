//! Command-line runner for GKP Floquet experiments.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 partial sweep (some points failed, the rest were written), 1 I/O.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod oracle;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{Conversions, ExperimentConfig};
use output::{ArtifactDir, Manifest, PointStatus, SCHEMA_VERSION};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Partial(String),
    Io(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
            Failure::Partial(m) => write!(f, "partial sweep: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<gkp_floquet::Error> for Failure {
    fn from(e: gkp_floquet::Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Partial(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "gkp-floquet", version, about = "Floquet-engineered GKP state experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Replaces `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `out` in the config, then runs/<kind>-<hash>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// `key.path=value`, value parsed as TOML. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config.
    Run(Common),
    /// Run the experiment once per value of a config field.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path of a numeric config field, e.g. model.impedance_ratio.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run the brute-force oracles and record them as fixtures.
    Oracle {
        #[arg(long, default_value = "oracle-fixtures")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// The distribution OpenBLAS picks a faulty AVX-512 kernel unless told
/// otherwise, and reads the choice once at load time. Re-run ourselves with
/// the variable set when it is missing.
fn ensure_blas_core() -> Option<ExitCode> {
    if std::env::var_os("OPENBLAS_CORETYPE").is_some() {
        return None;
    }
    let exe = std::env::current_exe().ok()?;
    let status = std::process::Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env("OPENBLAS_CORETYPE", "Haswell")
        .status()
        .ok()?;
    Some(ExitCode::from(status.code().unwrap_or(1) as u8))
}

fn main() -> ExitCode {
    if let Some(code) = ensure_blas_core() {
        return code;
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn set_workers(workers: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(Failure::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("worker pool: {e}")))?;
    }
    Ok(())
}

fn self_test() -> Result<(), Failure> {
    gkp_floquet::linalg::blas_self_test().map_err(|e| Failure::Numerical(e.to_string()))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { config, overrides } => {
            let (cfg, _) = load(&config, &overrides, None)?;
            println!("ok: {} config, hash {}", cfg.kind.name(), cfg.hash());
            Ok(())
        }
        Command::Run(common) => {
            set_workers(common.workers)?;
            self_test()?;
            let (cfg, conversions) = load(&common.config, &common.overrides, common.seed)?;
            let dir = out_dir(&common, &cfg);
            run_one(&cfg, conversions.as_ref(), &dir, &common)
        }
        Command::Sweep { common, axis, values } => {
            set_workers(common.workers)?;
            self_test()?;
            let values: Vec<String> = values.into_iter().filter(|v| !v.trim().is_empty()).collect();
            sweep(&common, &axis, &values)
        }
        Command::Oracle { out, seed, workers } => {
            set_workers(workers)?;
            self_test()?;
            let start = Instant::now();
            let records = oracle::run_all(seed)?;
            let mut dir = ArtifactDir::create(&out)?;
            dir.write_json("oracles.json", &records)?;
            for r in &records {
                println!(
                    "{:<36} {:>12.4e} < {:<8.1e} {}",
                    r.name,
                    r.value,
                    r.threshold,
                    if r.pass { "PASS" } else { "FAIL" }
                );
            }
            let meta = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "seed": seed,
                "code_version": env!("CARGO_PKG_VERSION"),
                "wall_time_s": start.elapsed().as_secs_f64(),
            });
            dir.write_json("metadata.json", &meta)?;
            match records.iter().filter(|r| !r.pass).count() {
                0 => Ok(()),
                n => Err(Failure::Numerical(format!("{n} oracle(s) failed"))),
            }
        }
    }
}

fn load(
    path: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<(ExperimentConfig, Option<Conversions>), Failure> {
    let mut tree = config::read_tree(path)?;
    for o in overrides {
        config::apply_override(&mut tree, o)?;
    }
    if let Some(s) = seed {
        config::apply_override(&mut tree, &format!("master_seed={s}"))?;
    }
    let mut cfg = config::from_tree(tree)?;
    let conversions = cfg.resolve()?;
    Ok((cfg, conversions))
}

fn out_dir(common: &Common, cfg: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{}-{}", cfg.kind.name(), &cfg.hash()[..12])))
}

#[derive(Serialize)]
struct Metadata<'a> {
    schema_version: &'static str,
    config_hash: String,
    kind: &'static str,
    seed: u64,
    code_version: &'static str,
    wall_time_s: f64,
    started_unix_s: u64,
    workers: usize,
    overrides: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    physical_conversions: Option<&'a Conversions>,
    ramp: gkp_floquet::prep::RampSchedule,
    files: Vec<String>,
}

fn run_one(
    cfg: &ExperimentConfig,
    conversions: Option<&Conversions>,
    dir: &Path,
    common: &Common,
) -> Result<(), Failure> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let start = Instant::now();
    let hash = cfg.hash();
    let outcome = experiments::run(cfg, &hash)?;
    let mut out = ArtifactDir::create(dir)?;
    out.write("config.toml", cfg.to_toml().as_bytes())?;
    for t in &outcome.tables {
        out.write_table(t)?;
    }
    out.write_json("results.json", &outcome.results)?;
    out.write("summary.txt", outcome.summary.as_bytes())?;
    let incomplete = outcome.points.iter().filter(|p| !p.complete).count();
    if !outcome.points.is_empty() {
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            config_hash: &hash,
            kind: cfg.kind.name(),
            axis: None,
            complete: incomplete == 0,
            points: &outcome.points,
        };
        out.write_json("manifest.json", &manifest)?;
    }
    let meta = Metadata {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        kind: cfg.kind.name(),
        seed: cfg.master_seed,
        code_version: env!("CARGO_PKG_VERSION"),
        wall_time_s: start.elapsed().as_secs_f64(),
        started_unix_s: started,
        workers: rayon::current_num_threads(),
        overrides: &common.overrides,
        physical_conversions: conversions,
        ramp: cfg.ramp,
        files: out.files().to_vec(),
    };
    out.write_json("metadata.json", &meta)?;
    print!("{}", outcome.summary);
    println!("wrote {}", out.root().display());
    if incomplete > 0 && incomplete == outcome.points.len() {
        let first = outcome.points[0].error.clone().unwrap_or_default();
        return Err(Failure::Numerical(format!("all {incomplete} points failed; first: {first}")));
    }
    if incomplete > 0 {
        return Err(Failure::Partial(format!(
            "{incomplete} of {} points failed; see manifest.json",
            outcome.points.len()
        )));
    }
    Ok(())
}

fn sweep(common: &Common, axis: &str, values: &[String]) -> Result<(), Failure> {
    let (base, _) = load(&common.config, &common.overrides, common.seed)?;
    check_axis(&base, axis, values)?;
    let root = out_dir(common, &base);
    let mut dir = ArtifactDir::create(&root)?;
    let hash = base.hash();
    let mut points = Vec::new();
    let mut combined: Vec<(String, csv::Writer<Vec<u8>>)> = Vec::new();
    for (i, value) in values.iter().enumerate() {
        let point_dir = root.join(format!("point-{i:03}"));
        let mut overrides = common.overrides.clone();
        overrides.push(format!("{axis}={value}"));
        let result = load(&common.config, &overrides, common.seed).and_then(|(cfg, conv)| {
            let point_common = Common { overrides: overrides.clone(), ..common.clone() };
            match run_one(&cfg, conv.as_ref(), &point_dir, &point_common) {
                Err(Failure::Partial(m)) => Err(Failure::Partial(m)),
                other => other.map(|_| cfg),
            }
        });
        let mut status = PointStatus::new(format!("{axis}={value}"), &result);
        status.dir = Some(format!("point-{i:03}"));
        if result.is_ok() {
            append_tables(&point_dir, axis, value, &mut combined)?;
        } else if let Err(e) = &result {
            eprintln!("point {axis}={value}: {e}");
        }
        points.push(status);
    }
    for (name, w) in combined {
        let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
        dir.write(&format!("sweep_{name}"), &bytes)?;
    }
    let incomplete = points.iter().filter(|p| !p.complete).count();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        config_hash: &hash,
        kind: base.kind.name(),
        axis: Some(axis),
        complete: incomplete == 0,
        points: &points,
    };
    dir.write_json("manifest.json", &manifest)?;
    println!("sweep over {axis}: {} point(s), {incomplete} failed; wrote {}", points.len(), root.display());
    if incomplete > 0 {
        return Err(Failure::Partial(format!("{incomplete} of {} points failed", points.len())));
    }
    Ok(())
}

/// The axis must name a numeric field, or an absent optional one given numbers.
fn check_axis(base: &ExperimentConfig, axis: &str, values: &[String]) -> Result<(), Failure> {
    let tree = toml::Value::try_from(base).map_err(|e| Failure::Config(e.to_string()))?;
    let mut node = Some(&tree);
    for part in axis.split('.') {
        node = node.and_then(|n| n.get(part));
    }
    let numeric = |v: &toml::Value| matches!(v, toml::Value::Integer(_) | toml::Value::Float(_));
    match node {
        Some(v) if !numeric(v) => return Err(Failure::Config(format!("sweep axis {axis} is not a numeric field"))),
        _ => {}
    }
    for v in values {
        if v.trim().parse::<f64>().is_err() && !matches!(v.trim(), "inf" | "+inf" | "nan") {
            return Err(Failure::Config(format!("sweep value {v:?} for {axis} is not a number")));
        }
    }
    Ok(())
}

/// Append a point's CSV tables to the combined ones, prefixed by the axis value.
fn append_tables(
    point_dir: &Path,
    axis: &str,
    value: &str,
    combined: &mut Vec<(String, csv::Writer<Vec<u8>>)>,
) -> Result<(), Failure> {
    let mut names: Vec<String> = std::fs::read_dir(point_dir)
        .map_err(|e| Failure::Io(format!("{}: {e}", point_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    for name in names {
        let path = point_dir.join(&name);
        let mut reader = csv::Reader::from_path(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let headers = reader.headers().map_err(|e| Failure::Io(e.to_string()))?.clone();
        let slot = match combined.iter().position(|(n, _)| *n == name) {
            Some(i) => i,
            None => {
                let mut w = csv::Writer::from_writer(Vec::new());
                let mut h = csv::StringRecord::from(vec!["sweep_axis", "sweep_value"]);
                h.extend(headers.iter());
                w.write_record(&h).map_err(|e| Failure::Io(e.to_string()))?;
                combined.push((name.clone(), w));
                combined.len() - 1
            }
        };
        for rec in reader.records() {
            let rec = rec.map_err(|e| Failure::Io(e.to_string()))?;
            let mut row = csv::StringRecord::from(vec![axis, value]);
            row.extend(rec.iter());
            combined[slot].1.write_record(&row).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}
