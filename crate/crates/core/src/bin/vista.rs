use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use vista_core::ais::{
    generate_synthetic_track, read_csv, read_masks, write_csv, write_masks, Dataset, SyntheticParams, TrackKind,
};
use vista_core::config::{Backend, RunConfig};
use vista_core::eval::{self, EvalReport, Predictions};
use vista_core::imputation::ImputationOutcome;
use vista_core::sdkg::{self, SdKg};
use vista_core::workflow::{run_build, run_impute, write_quarantine, Stats};
use vista_core::{Error, Result};

/// Knowledge-graph driven AIS trajectory imputation.
///
/// Exit codes: 0 success, 1 I/O or input data, 2 configuration or usage,
/// 3 evaluation coverage.
#[derive(Parser)]
#[command(name = "vista", version)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Runtime {
    /// Micro-batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// Oracle backend.
    #[arg(long, value_enum)]
    oracle: Option<Backend>,
    /// Segment length m.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Block-mask complete segments; writes masked.csv and mask.json.
    Mask {
        #[arg(long)]
        input: PathBuf,
        /// Removal probability per complete segment.
        #[arg(long, default_value_t = 0.2)]
        prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        m: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the knowledge graph; writes the snapshot plus stats.json and
    /// quarantine.jsonl next to it.
    BuildKg {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Snapshot to write; an existing one is extended.
        #[arg(long)]
        kg: Option<PathBuf>,
        /// Start from an empty graph even if the snapshot exists.
        #[arg(long)]
        fresh: bool,
        #[command(flatten)]
        rt: Runtime,
    },
    /// Impute every masked gap; writes outcomes.jsonl plus stats.json and
    /// quarantine.jsonl next to it.
    Impute {
        /// Masked CSV.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        kg: Option<PathBuf>,
        /// Outcome stream (JSON lines).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        rt: Runtime,
    },
    /// Score outcomes against ground truth on the masked records.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        outcomes: Option<PathBuf>,
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Also score Lin-ITP, Akima and Kalman on the same gaps.
        #[arg(long)]
        with_baselines: bool,
    },
    /// Write the DOT of the subgraph induced by the given nodes.
    ExportDot {
        #[arg(long)]
        kg: Option<PathBuf>,
        /// Comma-separated node names (e.g. Movement_Pattern_1) or ids.
        #[arg(long, value_delimiter = ',')]
        nodes: Vec<String>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic tracks as CSV.
    Synth {
        #[arg(long, default_value = "constant-velocity")]
        kind: TrackKind,
        #[arg(long, default_value_t = 10)]
        vessels: usize,
        /// Records per vessel.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Turn rate in radians per step (constant-turn).
        #[arg(long, default_value_t = 0.01)]
        turn_rate: f64,
        /// Position noise in degrees (noisy-linear).
        #[arg(long, default_value_t = 1e-3)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MissingOutcome { .. } => 3,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::InvalidInput(_) | Error::EmptyInput(_) => 1,
        _ => 2,
    }
}

fn required(p: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.ok_or_else(|| Error::Config(format!("--{flag} is required (or set it under [paths])")))
}

fn beside(file: &Path, name: &str) -> PathBuf {
    file.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).join(name)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Stats with an optional fatal error, written even when a run fails.
fn write_stats(path: &Path, stats: &Stats, error: Option<&Error>) -> Result<()> {
    let mut v = serde_json::to_value(stats)?;
    if let Some(e) = error {
        v["error"] = serde_json::Value::String(e.to_string());
    }
    write_json(path, &v)
}

fn load_config(path: Option<&Path>, rt: Option<&Runtime>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
            e => e,
        })?,
        None => RunConfig::default(),
    };
    if let Some(rt) = rt {
        if let Some(b) = rt.batch {
            cfg.scheduler.batch_size = b;
        }
        if let Some(o) = rt.oracle {
            cfg.oracle.backend = o;
        }
        if let Some(m) = rt.m {
            cfg.scheduler.m = m;
        }
        if let Some(s) = rt.seed {
            cfg.scheduler.seed = s;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_input(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
    }
    read_csv(path)
}

fn cmd_mask(input: &Path, prob: f64, seed: u64, m: usize, out: &Path) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidParameter("m must be at least 2".into()));
    }
    let data = read_input(input)?;
    let (masked, masks) = data.mask(m, prob, seed)?;
    ensure_dir(out)?;
    write_csv(&out.join("masked.csv"), masked.records())?;
    write_masks(&out.join("mask.json"), &masks)?;
    let gaps: usize = masks.iter().map(|x| x.targets.len()).sum();
    log::info!("masked {gaps} segments across {} vessels", masks.len());
    Ok(())
}

fn cmd_build(cfg: &RunConfig, input: PathBuf, kg_path: PathBuf, fresh: bool) -> Result<()> {
    let stats_path = beside(&kg_path, "stats.json");
    let quarantine_path = beside(&kg_path, "quarantine.jsonl");
    let run = || -> Result<(SdKg, Stats, Vec<_>)> {
        let data = read_input(&input)?;
        let kg = if !fresh && kg_path.is_file() { sdkg::load(&kg_path)? } else { SdKg::new() };
        let oracle = cfg.oracle()?;
        let context = cfg.context_source()?;
        let r = run_build(&data, kg, &cfg.scheduler, oracle.as_ref(), context.as_ref())?;
        Ok((r.kg, r.stats, r.quarantine))
    };
    if let Some(dir) = kg_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    match run() {
        Ok((kg, stats, quarantine)) => {
            sdkg::save(&kg, &kg_path)?;
            write_quarantine(&quarantine_path, &quarantine)?;
            write_stats(&stats_path, &stats, None)?;
            log::info!(
                "committed {}/{} segments ({} quarantined); graph has {} nodes, {} edges",
                stats.committed,
                stats.scheduled,
                stats.quarantined,
                stats.kg_nodes,
                stats.kg_edges
            );
            Ok(())
        }
        Err(e) => {
            let _ = write_stats(
                &stats_path,
                &Stats { batch_size: cfg.scheduler.batch_size, ..Default::default() },
                Some(&e),
            );
            Err(e)
        }
    }
}

fn cmd_impute(cfg: &RunConfig, input: PathBuf, mask: PathBuf, kg_path: PathBuf, out: PathBuf) -> Result<()> {
    let stats_path = beside(&out, "stats.json");
    let quarantine_path = beside(&out, "quarantine.jsonl");
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let run = || -> Result<(Stats, Vec<_>)> {
        let data = read_input(&input)?;
        let masks = read_masks(&mask)?;
        let kg = sdkg::load(&kg_path)?;
        let oracle = cfg.oracle()?;
        let file = std::fs::File::create(&out).map_err(|e| Error::io(&out, e))?;
        let mut w = std::io::BufWriter::new(file);
        let total: usize = masks.iter().map(|x| x.targets.len()).sum();
        let mut done = 0usize;
        let mut sink = |o: &ImputationOutcome| -> Result<()> {
            serde_json::to_writer(&mut w, o)?;
            w.write_all(b"\n").map_err(|e| Error::io(&out, e))?;
            done += 1;
            if done.is_multiple_of(100) || done == total {
                log::info!("imputed {done}/{total}");
            }
            Ok(())
        };
        let r = run_impute(&data, &masks, &kg, &cfg.scheduler, oracle.as_ref(), &mut sink)?;
        w.flush().map_err(|e| Error::io(&out, e))?;
        Ok((r.stats, r.quarantine))
    };
    match run() {
        Ok((stats, quarantine)) => {
            write_quarantine(&quarantine_path, &quarantine)?;
            write_stats(&stats_path, &stats, None)?;
            log::info!(
                "{} outcomes, {} fallbacks, {} quarantined",
                stats.committed,
                stats.fallbacks,
                stats.quarantined
            );
            Ok(())
        }
        Err(e) => {
            let _ = write_stats(
                &stats_path,
                &Stats { batch_size: cfg.scheduler.batch_size, ..Default::default() },
                Some(&e),
            );
            Err(e)
        }
    }
}

/// The fields of an outcome line that scoring needs.
#[derive(Deserialize)]
struct OutcomeLine {
    vessel_id: String,
    segment_index: usize,
    points: Vec<(f64, f64, i64)>,
}

fn read_predictions(path: &Path) -> Result<Predictions> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Predictions::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let o: OutcomeLine = serde_json::from_str(&line)?;
        out.insert((o.vessel_id, o.segment_index), o.points);
    }
    Ok(out)
}

fn cmd_eval(
    cfg: &RunConfig,
    truth: &Path,
    outcomes: PathBuf,
    mask: PathBuf,
    report: &Path,
    baselines: bool,
) -> Result<()> {
    let data = read_input(truth)?;
    let masks = read_masks(&mask)?;
    let preds = read_predictions(&outcomes)?;
    let metrics = eval::evaluate(&data, &preds, &masks)?;
    let comparison = if baselines {
        let masked = eval::masked_view(&data, &masks)?;
        let rows = eval::comparison_table(("vista", metrics, 0), &data, &masked, &masks, &cfg.kalman)?;
        print!("{}", eval::render_table(&rows));
        rows
    } else {
        Vec::new()
    };
    let config = serde_json::json!({
        "truth": truth,
        "outcomes": outcomes,
        "mask": mask,
        "with_baselines": baselines,
        "kalman": cfg.kalman,
    });
    if let Some(dir) = report.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_json(report, &EvalReport { metrics, config, comparison })?;
    log::info!("n={} mhd={:.6} km", metrics.n, metrics.mhd);
    Ok(())
}

fn cmd_export_dot(kg_path: &Path, nodes: &[String], out: Option<&Path>) -> Result<()> {
    let kg = sdkg::load(kg_path)?;
    let ids = sdkg::resolve_nodes(&kg, nodes.iter().map(String::as_str))?;
    let dot = sdkg::to_dot(&kg.induced_subgraph(&ids)?);
    match out {
        Some(p) => std::fs::write(p, dot).map_err(|e| Error::io(p, e)),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

fn cmd_synth(
    kind: TrackKind,
    vessels: usize,
    n: usize,
    turn_rate: f64,
    sigma: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let mut records = Vec::with_capacity(vessels * n);
    for i in 0..vessels {
        let p = SyntheticParams {
            vessel_id: format!("{}", 219_000_000 + i),
            start: (55.0 + 0.05 * (i % 20) as f64, 10.0 + 0.05 * (i / 20) as f64),
            turn_rate,
            sigma,
            seed: seed.wrapping_add(i as u64),
            ..Default::default()
        };
        records.extend(generate_synthetic_track(kind, n, &p)?.into_records());
    }
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    write_csv(out, &records)
}

fn run(cli: Cli) -> Result<()> {
    let cfg_path = cli.config.as_deref();
    match cli.command {
        Command::Mask { input, prob, seed, m, out } => cmd_mask(&input, prob, seed, m, &out),
        Command::BuildKg { input, kg, fresh, rt } => {
            let cfg = load_config(cfg_path, Some(&rt))?;
            let input = required(input.or(cfg.paths.input.clone()), "input")?;
            let kg = required(kg.or(cfg.paths.kg.clone()), "kg")?;
            cmd_build(&cfg, input, kg, fresh)
        }
        Command::Impute { input, mask, kg, out, rt } => {
            let cfg = load_config(cfg_path, Some(&rt))?;
            let input = required(input.or(cfg.paths.input.clone()), "input")?;
            let mask = required(mask.or(cfg.paths.mask.clone()), "mask")?;
            let kg = required(kg.or(cfg.paths.kg.clone()), "kg")?;
            let out = required(out.or(cfg.paths.outcomes.clone()), "out")?;
            cmd_impute(&cfg, input, mask, kg, out)
        }
        Command::Eval { truth, outcomes, mask, report, with_baselines } => {
            let cfg = load_config(cfg_path, None)?;
            let outcomes = required(outcomes.or(cfg.paths.outcomes.clone()), "outcomes")?;
            let mask = required(mask.or(cfg.paths.mask.clone()), "mask")?;
            cmd_eval(&cfg, &truth, outcomes, mask, &report, with_baselines)
        }
        Command::ExportDot { kg, nodes, out } => {
            let cfg = load_config(cfg_path, None)?;
            let kg = required(kg.or(cfg.paths.kg.clone()), "kg")?;
            cmd_export_dot(&kg, &nodes, out.as_deref())
        }
        Command::Synth { kind, vessels, n, turn_rate, sigma, seed, out } => {
            cmd_synth(kind, vessels, n, turn_rate, sigma, seed, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
