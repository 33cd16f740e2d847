//! Per-inference latency and throughput measurement.

mod svg;

pub use svg::{fidelity_svg, latency_svg, write_svg};

use std::fmt::Write as _;
use std::hint::black_box;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::Estimator;

pub const DEFAULT_BENCH_N: usize = 10_000;
pub const DEFAULT_WARMUP: usize = 100;
pub const BENCH_CSV_HEADER: &str = "engine,n,mean_ms,median_ms,p95_ms,std_ms,total_s";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchStats {
    pub engine: String,
    pub n: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Nearest-rank 95th percentile.
    pub p95_ms: f64,
    /// Population standard deviation.
    pub std_ms: f64,
    pub total_s: f64,
    pub warmup: usize,
}

/// Summary of raw per-inference latencies in milliseconds. `total_s` is the
/// sum of the samples; [`time_engine`] replaces it with the wall time.
pub fn summarize_stats(engine: &str, samples_ms: &[f64]) -> Result<BenchStats> {
    if samples_ms.is_empty() {
        return Err(Error::Empty("latency samples"));
    }
    if samples_ms.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParam(
            "latency samples must be finite and nonnegative".into(),
        ));
    }
    let n = samples_ms.len();
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sum: f64 = sorted.iter().sum();
    // shifted by the minimum so constant samples give an exact mean
    let shift = sorted[0];
    let mean = shift + sorted.iter().map(|v| v - shift).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let rank = ((0.95 * n as f64).ceil() as usize).max(1);
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(BenchStats {
        engine: engine.to_string(),
        n,
        mean_ms: mean,
        median_ms: median,
        p95_ms: sorted[rank - 1],
        std_ms: var.sqrt(),
        total_s: sum / 1e3,
        warmup: 0,
    })
}

/// Times `n` single-threaded inferences after `warmup` untimed ones, cycling
/// through the dataset. Returns the stats and the raw samples.
pub fn time_engine_samples<E: Estimator>(
    engine: &E,
    ds: &Dataset,
    n: usize,
    warmup: usize,
) -> Result<(BenchStats, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParam("benchmark needs n > 0".into()));
    }
    if ds.is_empty() {
        return Err(Error::Empty("benchmark dataset"));
    }
    if ds.seq_len() != engine.input_len() {
        return Err(Error::DimensionMismatch {
            left: engine.input_len(),
            right: ds.seq_len(),
        });
    }
    let mut scratch = engine.scratch();
    for i in 0..warmup {
        black_box(engine.estimate_with(ds.sequence(i % ds.len()), &mut scratch)?);
    }
    let mut samples = Vec::with_capacity(n);
    let start = Instant::now();
    for i in 0..n {
        let seq = ds.sequence(i % ds.len());
        let t0 = Instant::now();
        black_box(engine.estimate_with(black_box(seq), &mut scratch)?);
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let total_s = start.elapsed().as_secs_f64();
    let mut stats = summarize_stats(engine.tag(), &samples)?;
    stats.total_s = total_s;
    stats.warmup = warmup;
    Ok((stats, samples))
}

pub fn time_engine<E: Estimator>(
    engine: &E,
    ds: &Dataset,
    n: usize,
    warmup: usize,
) -> Result<BenchStats> {
    Ok(time_engine_samples(engine, ds, n, warmup)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThroughputStats {
    pub engine: String,
    pub n: usize,
    pub threads: usize,
    pub total_s: f64,
    pub per_second: f64,
}

/// Parallel inferences per second over `n` cycled inputs.
pub fn throughput<E: Estimator>(
    engine: &E,
    ds: &Dataset,
    n: usize,
    threads: usize,
) -> Result<ThroughputStats> {
    if n == 0 || threads == 0 {
        return Err(Error::InvalidParam(
            "throughput needs n > 0 and threads > 0".into(),
        ));
    }
    if ds.is_empty() {
        return Err(Error::Empty("benchmark dataset"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    pool.install(|| {
        (0..n).into_par_iter().try_for_each_init(
            || engine.scratch(),
            |s, i| {
                engine.estimate_with(ds.sequence(i % ds.len()), s).map(|p| {
                    black_box(p);
                })
            },
        )
    })?;
    let total_s = start.elapsed().as_secs_f64();
    Ok(ThroughputStats {
        engine: engine.tag().to_string(),
        n,
        threads,
        total_s,
        per_second: n as f64 / total_s,
    })
}

pub fn bench_csv(stats: &[BenchStats]) -> String {
    let mut out = format!("{BENCH_CSV_HEADER}\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.engine, s.n, s.mean_ms, s.median_ms, s.p95_ms, s.std_ms, s.total_s
        );
    }
    out
}

pub fn write_bench_csv(stats: &[BenchStats], path: &Path) -> Result<()> {
    std::fs::write(path, bench_csv(stats)).map_err(|e| Error::io(path, e))
}

pub fn bench_from_csv(text: &str) -> Result<Vec<BenchStats>> {
    let mut lines = text.lines();
    if lines.next() != Some(BENCH_CSV_HEADER) {
        return Err(Error::Corrupt("bench CSV header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let bad = || Error::Corrupt(format!("bench CSV line {line:?}"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(BenchStats {
                engine: f[0].to_string(),
                n: f[1].parse().map_err(|_| bad())?,
                mean_ms: num(f[2])?,
                median_ms: num(f[3])?,
                p95_ms: num(f[4])?,
                std_ms: num(f[5])?,
                total_s: num(f[6])?,
                warmup: 0,
            })
        })
        .collect()
}

/// `index,latency_ms` dump of raw samples.
pub fn samples_csv(samples_ms: &[f64]) -> String {
    let mut out = String::from("index,latency_ms\n");
    for (i, v) in samples_ms.iter().enumerate() {
        let _ = writeln!(out, "{i},{v:.9}");
    }
    out
}
