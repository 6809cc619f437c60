//! Corpus harness: run algorithm x benchmark x repetition matrices against
//! external interestingness commands, aggregate with geometric means, and
//! compare paired query counts with the Wilcoxon signed-rank test.

use crate::cdd::{reduce_once, Algorithm, ReduceParams};
use crate::error::MathError;
use crate::input::{segment, Granularity};
use crate::oracle::{CachedOracle, ExternalOracle, ExternalOracleConfig, PropertyOracle};
use crate::probdd::GainTieRule;
use crate::telemetry::{TelemetryReport, TelemetrySink};
use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// exp(mean(ln xs)); all inputs must be strictly positive.
pub fn geometric_mean(xs: &[f64]) -> Result<f64, MathError> {
    if xs.is_empty() {
        return Err(MathError::Domain("geometric mean of an empty set".into()));
    }
    if let Some(bad) = xs.iter().find(|&&x| !(x > 0.0)) {
        return Err(MathError::Domain(format!(
            "geometric mean requires positive values, got {bad}"
        )));
    }
    // identical samples (e.g. repeated deterministic runs) average to
    // themselves exactly, with no exp/ln round-trip noise
    if xs.iter().all(|x| *x == xs[0]) {
        return Ok(xs[0]);
    }
    let mean_ln = xs.iter().map(|x| x.ln()).sum::<f64>() / xs.len() as f64;
    Ok(mean_ln.exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct WilcoxonResult {
    /// Nonzero-difference pairs actually used.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub z: f64,
    /// Two-sided, from the tie-corrected normal approximation.
    pub p_value: f64,
}

/// Paired two-sided Wilcoxon signed-rank test, normal approximation with
/// tie correction. Zero differences are dropped; fewer than 6 nonzero
/// pairs is an error (exact small-sample tables are not provided).
pub fn wilcoxon_signed_rank(xs: &[f64], ys: &[f64]) -> Result<WilcoxonResult, MathError> {
    if xs.len() != ys.len() {
        return Err(MathError::Domain(format!(
            "paired samples must have equal length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    let diffs: Vec<f64> = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n < 6 {
        return Err(MathError::InsufficientData(format!(
            "{n} nonzero pairs; the normal approximation needs at least 6 \
             (exact small-sample tables are unsupported)"
        )));
    }

    // rank |d| ascending, averaging ranks within tie groups
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        diffs[a]
            .abs()
            .partial_cmp(&diffs[b].abs())
            .expect("differences are finite")
    });
    let mut ranks = vec![0.0f64; n];
    let mut tie_correction = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && diffs[order[j]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let t = (j - i) as f64;
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1..=j
        for &k in &order[i..j] {
            ranks[k] = avg_rank;
        }
        tie_correction += t * t * t - t;
        i = j;
    }

    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let total = nf * (nf + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let mean = total / 2.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_correction / 48.0;
    let z = (w_plus - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0);
    Ok(WilcoxonResult {
        n,
        w_plus,
        w_minus,
        z,
        p_value,
    })
}

fn default_parallelism() -> usize {
    1
}

fn default_timeout() -> f64 {
    300.0
}

fn default_p0() -> f64 {
    0.1
}

fn default_granularity() -> String {
    "line".into()
}

#[derive(Debug, Clone, Deserialize)]
pub struct BenchEntry {
    pub name: String,
    pub input_path: PathBuf,
    /// Whitespace-split into executable + fixed arguments.
    pub oracle_cmd: String,
    #[serde(default = "default_granularity")]
    pub granularity: String,
    #[serde(default = "default_p0")]
    pub p0: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BenchManifest {
    pub benchmarks: Vec<BenchEntry>,
    pub algorithms: Vec<String>,
    pub repetitions: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

impl BenchManifest {
    /// Parse a manifest from JSON or TOML, chosen by file extension.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: BenchManifest = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)?,
            _ => serde_json::from_str(&text)?,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.benchmarks.is_empty() {
            anyhow::bail!("manifest lists no benchmarks");
        }
        if self.algorithms.is_empty() {
            anyhow::bail!("manifest lists no algorithms");
        }
        if self.repetitions == 0 {
            anyhow::bail!("repetitions must be >= 1");
        }
        if self.parallelism == 0 {
            anyhow::bail!("parallelism must be >= 1");
        }
        for alg in &self.algorithms {
            alg.parse::<Algorithm>().map_err(anyhow::Error::msg)?;
        }
        for b in &self.benchmarks {
            b.granularity
                .parse::<Granularity>()
                .map_err(anyhow::Error::msg)?;
            if !(b.p0 > 0.0 && b.p0 < 1.0) {
                anyhow::bail!("benchmark {}: p0 must be in (0,1), got {}", b.name, b.p0);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRow {
    pub benchmark: String,
    pub algorithm: String,
    pub repetition: u64,
    pub seed: u64,
    /// "ok", "initial-check-failed", or "error: ..."
    pub status: String,
    pub final_size: u64,
    pub final_bytes: u64,
    pub queries: u64,
    pub cache_hits: u64,
    pub spawns: u64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub benchmark: String,
    pub algorithm: String,
    pub repetitions_ok: u64,
    pub final_size_gm: f64,
    pub time_gm: f64,
    pub queries_gm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PValueRow {
    pub metric: String,
    pub algorithm_a: String,
    pub algorithm_b: String,
    pub n_pairs: usize,
    pub z: f64,
    pub p_value: f64,
    pub note: String,
}

#[derive(Debug, Serialize)]
pub struct MatrixReport {
    pub runs: Vec<RunRow>,
    pub aggregates: Vec<AggregateRow>,
    pub pvalues: Vec<PValueRow>,
}

fn run_cell(entry: &BenchEntry, alg: Algorithm, rep: u64, manifest: &BenchManifest, out_dir: &Path) -> RunRow {
    let seed = manifest.base_seed + rep;
    let mut row = RunRow {
        benchmark: entry.name.clone(),
        algorithm: alg.name().into(),
        repetition: rep,
        seed,
        status: "ok".into(),
        final_size: 0,
        final_bytes: 0,
        queries: 0,
        cache_hits: 0,
        spawns: 0,
        wall_time_secs: 0.0,
    };

    let run = |mut row: RunRow| -> anyhow::Result<RunRow> {
        let raw = std::fs::read(&entry.input_path)
            .with_context(|| format!("reading input {}", entry.input_path.display()))?;
        let granularity: Granularity = entry.granularity.parse().map_err(anyhow::Error::msg)?;
        let list = segment(&raw, granularity);

        let cfg = ExternalOracleConfig {
            command: entry.oracle_cmd.split_whitespace().map(String::from).collect(),
            candidate_filename: entry
                .input_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "candidate".into()),
            timeout: Duration::from_secs_f64(manifest.timeout_secs),
            log_dir: None,
        };
        let mut oracle = CachedOracle::new(ExternalOracle::new(cfg)?);

        // precondition: the property must hold on the untouched input
        if !oracle.evaluate(&list)?.verdict.holds() {
            row.status = "initial-check-failed".into();
            return Ok(row);
        }

        let mut sink = TelemetrySink::new(alg.name());
        let params = ReduceParams {
            p0: entry.p0,
            seed,
            tie_rule: GainTieRule::Strict,
            max_queries: None,
        };
        let out = reduce_once(alg, &list, &mut oracle, &params, &mut sink)?;

        let telemetry_dir = out_dir.join("telemetry");
        std::fs::create_dir_all(&telemetry_dir)?;
        let report = TelemetryReport::new(&sink, &entry.name);
        std::fs::write(
            telemetry_dir.join(format!("{}_{}_{}.json", entry.name, alg.name(), rep)),
            serde_json::to_string_pretty(&report.to_json())?,
        )?;

        row.final_size = out.final_size() as u64;
        row.final_bytes = out.final_bytes() as u64;
        row.queries = out.oracle_invocations;
        row.cache_hits = out.cache_hits;
        row.spawns = oracle.spawn_count();
        row.wall_time_secs = out.wall_time_secs;
        Ok(row)
    };

    match run(row.clone()) {
        Ok(done) => done,
        Err(e) => {
            row.status = format!("error: {e}");
            row
        }
    }
}

/// Execute the full benchmark x algorithm x repetition matrix, write
/// `runs.csv`, `results.csv`, `pvalues.csv` and `matrix.json` plus per-run
/// telemetry under `out_dir`, and return the collected table.
pub fn run_matrix(manifest: &BenchManifest, out_dir: &Path) -> anyhow::Result<MatrixReport> {
    manifest.validate()?;
    std::fs::create_dir_all(out_dir)?;

    let mut cells: Vec<(usize, Algorithm, u64)> = Vec::new();
    for (bi, _) in manifest.benchmarks.iter().enumerate() {
        for alg in &manifest.algorithms {
            let alg: Algorithm = alg.parse().map_err(anyhow::Error::msg)?;
            for rep in 0..manifest.repetitions {
                cells.push((bi, alg, rep));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallelism)
        .build()?;
    let mut runs: Vec<RunRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(bi, alg, rep)| run_cell(&manifest.benchmarks[bi], alg, rep, manifest, out_dir))
            .collect()
    });
    runs.sort_by(|a, b| {
        (&a.benchmark, &a.algorithm, a.repetition).cmp(&(&b.benchmark, &b.algorithm, b.repetition))
    });

    let aggregates = aggregate(manifest, &runs);
    let pvalues = pairwise_pvalues(manifest, &runs);

    write_csv(&out_dir.join("runs.csv"), &runs)?;
    write_csv(&out_dir.join("results.csv"), &aggregates)?;
    write_csv(&out_dir.join("pvalues.csv"), &pvalues)?;
    let report = MatrixReport {
        runs,
        aggregates,
        pvalues,
    };
    std::fs::write(
        out_dir.join("matrix.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    Ok(report)
}

fn ok_rows<'a>(runs: &'a [RunRow], bench: &str, alg: &str) -> Vec<&'a RunRow> {
    runs.iter()
        .filter(|r| r.benchmark == bench && r.algorithm == alg && r.status == "ok")
        .collect()
}

fn aggregate(manifest: &BenchManifest, runs: &[RunRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for b in &manifest.benchmarks {
        for alg in &manifest.algorithms {
            let rows = ok_rows(runs, &b.name, alg);
            let gm = |f: &dyn Fn(&RunRow) -> f64| {
                let vals: Vec<f64> = rows.iter().map(|r| f(r)).collect();
                geometric_mean(&vals).unwrap_or(f64::NAN)
            };
            out.push(AggregateRow {
                benchmark: b.name.clone(),
                algorithm: alg.clone(),
                repetitions_ok: rows.len() as u64,
                final_size_gm: gm(&|r| r.final_size as f64),
                time_gm: gm(&|r| r.wall_time_secs),
                queries_gm: gm(&|r| r.queries as f64),
            });
        }
    }
    out
}

fn pairwise_pvalues(manifest: &BenchManifest, runs: &[RunRow]) -> Vec<PValueRow> {
    let metrics: [(&str, fn(&RunRow) -> f64); 3] = [
        ("final_size", |r| r.final_size as f64),
        ("time", |r| r.wall_time_secs),
        ("queries", |r| r.queries as f64),
    ];
    let mut out = Vec::new();
    for (ai, a) in manifest.algorithms.iter().enumerate() {
        for b in &manifest.algorithms[ai + 1..] {
            for (metric, extract) in metrics {
                // pair cells on (benchmark, repetition); both runs must be ok
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for bench in &manifest.benchmarks {
                    let ra = ok_rows(runs, &bench.name, a);
                    let rb = ok_rows(runs, &bench.name, b);
                    for ca in &ra {
                        if let Some(cb) = rb.iter().find(|r| r.repetition == ca.repetition) {
                            xs.push(extract(ca));
                            ys.push(extract(cb));
                        }
                    }
                }
                let row = match wilcoxon_signed_rank(&xs, &ys) {
                    Ok(w) => PValueRow {
                        metric: metric.into(),
                        algorithm_a: a.clone(),
                        algorithm_b: b.clone(),
                        n_pairs: w.n,
                        z: w.z,
                        p_value: w.p_value,
                        note: String::new(),
                    },
                    Err(e) => PValueRow {
                        metric: metric.into(),
                        algorithm_a: a.clone(),
                        algorithm_b: b.clone(),
                        n_pairs: xs.len(),
                        z: f64::NAN,
                        p_value: f64::NAN,
                        note: e.to_string(),
                    },
                };
                out.push(row);
            }
        }
    }
    out
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
