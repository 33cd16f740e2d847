//! Command-line front end: `qstomo <subcommand> [flags]`.
//!
//! Every subcommand accepts `--config FILE`, a line-based `key=value` file
//! whose keys are long flag names. Explicit flags override file values.
//! Failures print one line `error: kind=<kind> msg=<message>` and exit 1;
//! usage errors exit 2.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::bench::{
    bench_csv, bench_from_csv, fidelity_svg, latency_svg, samples_csv, throughput,
    time_engine_samples, write_svg, BenchStats, DEFAULT_BENCH_N, DEFAULT_WARMUP,
};
use crate::datagen::{generate_dataset, read_dataset, write_dataset, GenConfig, PhaseSchedule};
use crate::error::{Error, Result};
use crate::nn::{load_model, save_model, train, write_training_log, TrainConfig, DEFAULT_ARCH};
use crate::pipeline::{
    estimate_params, evaluate_fidelity_sweep, reconstruct, write_density_text, Engine, EngineKind,
    FidelityReport, ReconOptions, WignerGrid, DEFAULT_BINS,
};
use crate::quant::{
    collect_calibration_stats, quantize_model, save_qmodel, CalibMethod, CalibStats,
};
use crate::StateParams;

#[derive(Parser, Debug)]
#[command(
    name = "qstomo",
    version,
    about = "Neural-network tomography of squeezed thermal states"
)]
#[command(args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labeled synthetic dataset (.qds).
    Gen(GenArgs),
    /// Train the float model on a dataset and write a .qnn file.
    Train(TrainArgs),
    /// Collect activation range statistics (CSV) over a calibration set.
    Calibrate(CalibrateArgs),
    /// Quantize a float model to INT8 and write a .qnq file.
    Quantize(QuantizeArgs),
    /// Evaluate an engine on a labeled dataset; writes the per-bin fidelity CSV.
    Eval(EvalArgs),
    /// Time single-sequence inference; writes the benchmark CSV.
    Bench(BenchArgs),
    /// Reconstruct photon numbers, density matrix and Wigner function.
    Reconstruct(ReconstructArgs),
    /// Render fidelity and latency SVG figures from CSV reports.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// key=value file with defaults for this subcommand's flags.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Append a generation timestamp to text outputs.
    #[arg(long)]
    stamp: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = crate::datagen::DEFAULT_SEQ_LEN)]
    seq_len: usize,
    /// Local-oscillator phase schedule: linear or random.
    #[arg(long, default_value = "linear")]
    schedule: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = DEFAULT_ARCH)]
    arch: String,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Per-epoch loss CSV.
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CalibArgs {
    #[arg(long)]
    model: PathBuf,
    /// Calibration dataset (.qds); `quantize` also accepts a stats CSV.
    #[arg(long)]
    calib: PathBuf,
    /// Number of leading calibration sequences to use.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Clip ranges to this percentile instead of min/max.
    #[arg(long)]
    percentile: Option<f64>,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    #[command(flatten)]
    calib: CalibArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    #[command(flatten)]
    calib: CalibArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long, default_value = "fp32")]
    engine: String,
    /// .qnn for fp32, .qnq for int8.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Per-example CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Fidelity figure for this engine alone.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BENCH_N)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    warmup: usize,
    /// Add a row to an existing benchmark CSV instead of replacing it.
    #[arg(long)]
    append: bool,
    /// Raw per-inference latencies (index,latency_ms).
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Also report parallel inferences per second.
    #[arg(long)]
    throughput: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Explicit parameters "r,theta,nbar".
    #[arg(long, conflicts_with_all = ["model", "data"])]
    params: Option<String>,
    #[arg(long, default_value = "fp32")]
    engine: String,
    #[arg(long, requires = "data")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    data: Option<PathBuf>,
    /// Example of --data to estimate from.
    #[arg(long, default_value_t = 0)]
    index: usize,
    /// Output directory for density.txt and wigner.csv.
    #[arg(long)]
    out: PathBuf,
    /// Fock cutoff; enables the density matrix.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, requires = "wigner_step")]
    wigner_range: Option<f64>,
    #[arg(long, requires = "wigner_range")]
    wigner_step: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Fidelity bins CSV as LABEL=PATH (repeatable).
    #[arg(long, value_name = "LABEL=PATH")]
    fidelity: Vec<String>,
    /// Benchmark CSV (repeatable; rows are concatenated).
    #[arg(long)]
    bench: Vec<PathBuf>,
    /// Output directory for fidelity.svg and latency.svg.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match apply_config(argv) {
        Ok(a) => a,
        Err(e) => return report_error(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => report_error(&e),
    }
}

fn report_error(e: &Error) -> i32 {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error: kind={} msg={msg}", e.kind());
    1
}

/// Splices `--key value` pairs from a `--config` file in front of the
/// explicit flags so the latter take precedence.
fn apply_config(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<Option<&str>> = argv.iter().map(|a| a.to_str()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        match a {
            Some("--config") => path = strs.get(i + 1).copied().flatten().map(PathBuf::from),
            Some(s) if s.starts_with("--config=") => {
                path = Some(PathBuf::from(&s["--config=".len()..]))
            }
            _ => {}
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let Some(sub_pos) = strs
        .iter()
        .skip(1)
        .position(|a| a.is_some_and(|s| !s.starts_with('-')))
        .map(|p| p + 1)
    else {
        return Ok(argv);
    };
    let sub_name = strs[sub_pos].unwrap_or_default();
    let cmd = Cli::command();
    let Some(sub) = cmd.get_subcommands().find(|s| s.get_name() == sub_name) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}:{}: expected key=value",
                path.display(),
                lineno + 1
            ))
        })?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()))
            .filter(|_| key != "config")
            .ok_or_else(|| Error::Config(format!("unknown key {key:?} for {sub_name}")))?;
        if arg.get_action().takes_values() {
            injected.push(OsString::from(format!("--{key}")));
            injected.push(OsString::from(value));
        } else {
            match value {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                v => {
                    return Err(Error::Config(format!(
                        "{key} expects true or false, got {v:?}"
                    )))
                }
            }
        }
    }
    let mut out = argv[..=sub_pos].to_vec();
    out.extend(injected);
    out.extend_from_slice(&argv[sub_pos + 1..]);
    Ok(out)
}

fn setup(common: &Common) -> Result<()> {
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // Ignored if a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    Ok(())
}

fn stamp_line(common: &Common, comment: (&str, &str)) -> String {
    if !common.stamp {
        return String::new();
    }
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    format!("{}generated unix_time={secs}{}\n", comment.0, comment.1)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_schedule(s: &str) -> Result<u8> {
    Ok(match s {
        "linear" | "0" => PhaseSchedule::Linear.id(),
        "random" | "1" => PhaseSchedule::Random.id(),
        other => {
            return Err(Error::Config(format!(
                "unknown schedule {other:?} (expected linear or random)"
            )))
        }
    })
}

fn load_engine(args: &EngineArgs) -> Result<Engine> {
    Engine::load(args.engine.parse::<EngineKind>()?, &args.model)
}

fn calibration_stats(args: &CalibArgs) -> Result<CalibStats> {
    let model = load_model(&args.model)?;
    let is_csv = args.calib.extension().is_some_and(|e| e == "csv");
    if is_csv {
        return CalibStats::read_csv(&args.calib);
    }
    let ds = read_dataset(&args.calib)?;
    let n = args.n.min(ds.len());
    let method = match args.percentile {
        Some(p) => CalibMethod::Percentile(p),
        None => CalibMethod::MinMax,
    };
    collect_calibration_stats(&model, &ds.slice(0..n), method)
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Gen(a) => {
            setup(&a.common)?;
            let cfg = GenConfig {
                n_examples: a.n,
                seq_len: a.seq_len,
                schedule_id: parse_schedule(&a.schedule)?,
                global_seed: a.seed,
                ..GenConfig::default()
            };
            let ds = generate_dataset(&cfg)?;
            write_dataset(&ds, &a.out)?;
            log::info!("wrote {} examples to {}", ds.len(), a.out.display());
        }
        Command::Train(a) => {
            setup(&a.common)?;
            let ds = read_dataset(&a.data)?;
            let cfg = TrainConfig {
                arch: a.arch,
                epochs: a.epochs,
                batch_size: a.batch_size,
                learning_rate: a.lr,
                seed: a.seed,
                val_fraction: a.val_fraction,
                ..TrainConfig::default()
            };
            let outcome = train(&ds, &cfg)?;
            save_model(&outcome.model, &a.out)?;
            if let Some(log) = &a.log {
                write_training_log(&outcome.log, log)?;
            }
            let best = &outcome.log[outcome.best_epoch];
            println!(
                "best_epoch={} val_loss={:.6}",
                outcome.best_epoch, best.val_loss
            );
        }
        Command::Calibrate(a) => {
            setup(&a.common)?;
            let stats = calibration_stats(&a.calib)?;
            write_text(
                &a.out,
                &(stats.to_csv() + &stamp_line(&a.common, ("# ", ""))),
            )?;
        }
        Command::Quantize(a) => {
            setup(&a.common)?;
            let model = load_model(&a.calib.model)?;
            let stats = calibration_stats(&a.calib)?;
            save_qmodel(&quantize_model(&model, &stats)?, &a.out)?;
        }
        Command::Eval(a) => {
            setup(&a.common)?;
            let engine = load_engine(&a.engine)?;
            let ds = read_dataset(&a.data)?;
            let report = evaluate_fidelity_sweep(&engine, &ds, a.bins)?;
            let stamp = stamp_line(&a.common, ("# ", ""));
            write_text(&a.out, &(report.bins_csv() + &stamp))?;
            if let Some(path) = &a.records {
                write_text(path, &(report.records_csv() + &stamp))?;
            }
            if let Some(path) = &a.svg {
                let svg = fidelity_svg(&[(a.engine.engine.as_str(), &report.bins)])?;
                write_text(path, &(svg + &stamp_line(&a.common, ("<!-- ", " -->"))))?;
            }
            println!(
                "engine={} n={} mean_fidelity={:.6} std_fidelity={:.6}",
                engine.kind().tag(),
                report.len(),
                report.mean_fidelity(),
                report.std_fidelity()
            );
        }
        Command::Bench(a) => {
            setup(&a.common)?;
            let engine = load_engine(&a.engine)?;
            let ds = read_dataset(&a.data)?;
            let (stats, samples) = time_engine_samples(&engine, &ds, a.n, a.warmup)?;
            let mut rows = Vec::new();
            if a.append && a.out.exists() {
                let text = std::fs::read_to_string(&a.out).map_err(|e| Error::io(&a.out, e))?;
                rows = bench_from_csv(&text)?;
            }
            println!(
                "engine={} n={} mean_ms={:.4} median_ms={:.4} p95_ms={:.4} total_s={:.3}",
                stats.engine, stats.n, stats.mean_ms, stats.median_ms, stats.p95_ms, stats.total_s
            );
            rows.push(stats);
            write_text(
                &a.out,
                &(bench_csv(&rows) + &stamp_line(&a.common, ("# ", ""))),
            )?;
            if let Some(raw) = &a.raw {
                write_text(raw, &samples_csv(&samples))?;
            }
            if a.throughput {
                let threads = a.common.threads.unwrap_or_else(rayon::current_num_threads);
                let t = throughput(&engine, &ds, a.n, threads)?;
                println!(
                    "throughput engine={} threads={} per_second={:.1}",
                    t.engine, t.threads, t.per_second
                );
            }
        }
        Command::Reconstruct(a) => {
            setup(&a.common)?;
            let params = match (&a.params, &a.model, &a.data) {
                (Some(text), _, _) => parse_params(text)?,
                (None, Some(model), Some(data)) => {
                    let engine = Engine::load(a.engine.parse()?, model)?;
                    let ds = read_dataset(data)?;
                    if a.index >= ds.len() {
                        return Err(Error::InvalidParam(format!(
                            "index {} of {} examples",
                            a.index,
                            ds.len()
                        )));
                    }
                    estimate_params(&engine, ds.sequence(a.index))?
                }
                _ => {
                    return Err(Error::Config(
                        "reconstruct needs --params or --model with --data".into(),
                    ))
                }
            };
            let wigner = match (a.wigner_range, a.wigner_step) {
                (Some(r), Some(s)) => Some(WignerGrid::new(r, s)?),
                _ => None,
            };
            let bundle = reconstruct(&params, &ReconOptions { dim: a.dim, wigner })?;
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            if let Some(rho) = &bundle.density {
                write_density_text(rho, &a.out.join("density.txt"))?;
            }
            if let Some(w) = &bundle.wigner {
                w.write_csv(&a.out.join("wigner.csv"))?;
            }
            if let Some(t) = bundle.truncation {
                println!(
                    "warning=truncation dim={} deficit={:.3e} tail_mass={:.3e}",
                    t.dim, t.deficit, t.tail_mass
                );
            }
            let ph = bundle.photons;
            println!(
                "r={:.6} theta={:.6} nbar={:.6} squeezing_db={:.4} n_total={:.6} n_pure={:.6} n_env={:.6}",
                params.r(),
                params.theta(),
                params.nbar(),
                params.squeezing_db(),
                ph.total,
                ph.pure,
                ph.env
            );
        }
        Command::Report(a) => {
            setup(&a.common)?;
            if a.fidelity.is_empty() && a.bench.is_empty() {
                return Err(Error::Config(
                    "report needs --fidelity and/or --bench inputs".into(),
                ));
            }
            std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
            let stamp = stamp_line(&a.common, ("<!-- ", " -->"));
            if !a.fidelity.is_empty() {
                let mut series = Vec::new();
                for spec in &a.fidelity {
                    let (label, path) = match spec.split_once('=') {
                        Some((l, p)) => (l.to_string(), PathBuf::from(p)),
                        None => {
                            let p = PathBuf::from(spec);
                            let stem = p
                                .file_stem()
                                .map(|s| s.to_string_lossy().into_owned())
                                .unwrap_or_default();
                            (stem, p)
                        }
                    };
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    series.push((label, FidelityReport::bins_from_csv(&text)?));
                }
                let refs: Vec<(&str, &[_])> = series
                    .iter()
                    .map(|(l, b)| (l.as_str(), b.as_slice()))
                    .collect();
                write_svg(
                    &(fidelity_svg(&refs)? + &stamp),
                    &a.out.join("fidelity.svg"),
                )?;
            }
            if !a.bench.is_empty() {
                let mut rows: Vec<BenchStats> = Vec::new();
                for path in &a.bench {
                    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    rows.extend(bench_from_csv(&text)?);
                }
                write_svg(&(latency_svg(&rows)? + &stamp), &a.out.join("latency.svg"))?;
            }
        }
    }
    Ok(())
}

fn parse_params(text: &str) -> Result<StateParams> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--params expects r,theta,nbar, got {text:?}")))?;
    match v[..] {
        [r, theta, nbar] => StateParams::new(r, theta, nbar),
        _ => Err(Error::Config(format!(
            "--params expects three values, got {}",
            v.len()
        ))),
    }
}
