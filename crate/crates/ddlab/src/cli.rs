//! Command-line entry points: reduce, check-minimal, verify-theory, bench,
//! and gen.
//!
//! Exit codes: 0 success; 1 invalid arguments or internal failure; 2 the
//! oracle rejects the untouched input; 3 the oracle command is unavailable;
//! 4 (check-minimal only) the input is not 1-minimal.

use crate::bench::BenchManifest;
use crate::cdd::{fixpoint_reduce, reduce_once, Algorithm, ReduceParams};
use crate::error::{OracleError, ReduceError};
use crate::input::{reassemble, segment, ElementList, Granularity};
use crate::oracle::{
    check_one_minimal, CachedOracle, ExternalOracle, ExternalOracleConfig, PropertyOracle,
};
use crate::probdd::GainTieRule;
use crate::synthetic;
use crate::telemetry::{TelemetryReport, TelemetrySink};
use crate::theory;
use clap::{Args, Parser, Subcommand};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INITIAL_REJECTED: i32 = 2;
pub const EXIT_ORACLE_UNAVAILABLE: i32 = 3;
pub const EXIT_NOT_MINIMAL: i32 = 4;

#[derive(Parser)]
#[command(
    name = "ddlab",
    version,
    about = "Test-input minimization with ddmin, probabilistic and counter-based reduction"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize an input file while an oracle command keeps succeeding.
    Reduce(ReduceArgs),
    /// Check whether an input is 1-minimal with respect to an oracle.
    CheckMinimal(CheckMinimalArgs),
    /// Emit the round/probability/size schedule and verify its bounds.
    VerifyTheory(VerifyTheoryArgs),
    /// Run a benchmark matrix from a manifest file.
    Bench(BenchArgs),
    /// Generate a planted input file + oracle script pair.
    Gen(GenArgs),
}

#[derive(Args)]
struct OracleArgs {
    /// Input file to minimize.
    #[arg(long)]
    input: PathBuf,
    /// Interestingness command (whitespace-split); invoked with the
    /// candidate path appended, exit 0 means the property holds.
    #[arg(long)]
    oracle: String,
    /// Segmentation unit.
    #[arg(long, default_value = "line")]
    granularity: String,
    /// Per-query timeout in seconds; a timed-out query counts as failing.
    #[arg(long, default_value_t = 300.0)]
    timeout: f64,
    /// Disable verdict caching by content digest.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args)]
struct ReduceArgs {
    #[command(flatten)]
    oracle: OracleArgs,
    /// Algorithm: ddmin | probdd | probdd-norandom | cdd.
    #[arg(long, default_value = "cdd")]
    alg: String,
    /// Initial per-element probability for probdd/cdd.
    #[arg(long, default_value_t = 0.1)]
    p0: f64,
    /// Seed for randomized tie-breaking.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rerun the reducer on its own output until the size stops shrinking.
    #[arg(long)]
    fixpoint: bool,
    /// Cap on fixpoint iterations.
    #[arg(long, default_value_t = 10)]
    max_iterations: u32,
    /// Abort with an error after this many oracle queries.
    #[arg(long)]
    max_queries: Option<u64>,
    /// Write per-query telemetry JSON here.
    #[arg(long)]
    telemetry: Option<PathBuf>,
    /// Write the summary JSON here (always printed to stdout too).
    #[arg(long)]
    report: Option<PathBuf>,
    /// probdd gain tie handling: strict | larger.
    #[arg(long, default_value = "strict")]
    probdd_tie: String,
    /// Also check the result for 1-minimality and report the flag.
    #[arg(long)]
    check_minimal: bool,
}

#[derive(Args)]
struct CheckMinimalArgs {
    #[command(flatten)]
    oracle: OracleArgs,
}

#[derive(Args)]
struct VerifyTheoryArgs {
    /// Initial per-element probability.
    #[arg(long)]
    p0: f64,
    /// Also write the schedule CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Manifest file (JSON or TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for CSV and telemetry files.
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Number of elements.
    #[arg(long, default_value_t = 64)]
    n: u64,
    /// Kernel size (elements the oracle requires).
    #[arg(long, default_value_t = 8)]
    kernel: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving input.txt, oracle.sh and kernel.txt.
    #[arg(long)]
    out: PathBuf,
}

/// Parse argv and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successful exits
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.cmd {
        Cmd::Reduce(args) => cmd_reduce(args),
        Cmd::CheckMinimal(args) => cmd_check_minimal(args),
        Cmd::VerifyTheory(args) => cmd_verify_theory(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Gen(args) => cmd_gen(args),
    }
}

fn usage_error(msg: impl std::fmt::Display) -> i32 {
    eprintln!("error: {msg}");
    EXIT_USAGE
}

enum CliOracle {
    Plain(ExternalOracle),
    Cached(CachedOracle<ExternalOracle>),
}

impl CliOracle {
    fn cache_hits(&self) -> u64 {
        match self {
            CliOracle::Plain(_) => 0,
            CliOracle::Cached(c) => c.hits(),
        }
    }
}

impl PropertyOracle for CliOracle {
    fn evaluate(
        &mut self,
        list: &ElementList,
    ) -> Result<crate::oracle::Evaluation, OracleError> {
        match self {
            CliOracle::Plain(o) => o.evaluate(list),
            CliOracle::Cached(o) => o.evaluate(list),
        }
    }

    fn description(&self) -> String {
        match self {
            CliOracle::Plain(o) => o.description(),
            CliOracle::Cached(o) => o.description(),
        }
    }

    fn spawn_count(&self) -> u64 {
        match self {
            CliOracle::Plain(o) => o.spawn_count(),
            CliOracle::Cached(o) => o.spawn_count(),
        }
    }
}

struct Prepared {
    list: ElementList,
    oracle: CliOracle,
}

/// Build the oracle, segment the input, and check the precondition that the
/// property holds on the untouched input. The precondition query is not
/// counted: query numbers cover only the algorithms' own attempts.
fn prepare(args: &OracleArgs) -> Result<Prepared, i32> {
    let granularity: Granularity = args
        .granularity
        .parse()
        .map_err(|e| usage_error(format!("--granularity: {e}")))?;
    if !(args.timeout > 0.0) {
        return Err(usage_error("--timeout must be positive"));
    }
    let raw = std::fs::read(&args.input)
        .map_err(|e| usage_error(format!("reading {}: {e}", args.input.display())))?;
    let list = segment(&raw, granularity);

    let cfg = ExternalOracleConfig {
        command: args.oracle.split_whitespace().map(String::from).collect(),
        candidate_filename: args
            .input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "candidate".into()),
        timeout: Duration::from_secs_f64(args.timeout),
        log_dir: None,
    };
    let external = ExternalOracle::new(cfg).map_err(|e| usage_error(e))?;
    let mut oracle = if args.no_cache {
        CliOracle::Plain(external)
    } else {
        CliOracle::Cached(CachedOracle::new(external))
    };

    match oracle.evaluate(&list) {
        Ok(eval) if eval.verdict.holds() => Ok(Prepared { list, oracle }),
        Ok(_) => {
            eprintln!(
                "error: the oracle rejects the untouched input {}",
                args.input.display()
            );
            Err(EXIT_INITIAL_REJECTED)
        }
        Err(OracleError::Unavailable(msg)) => {
            eprintln!("error: oracle command unavailable: {msg}");
            Err(EXIT_ORACLE_UNAVAILABLE)
        }
        Err(e) => Err(usage_error(e)),
    }
}

fn reduce_error_code(e: &ReduceError) -> i32 {
    match e {
        ReduceError::Oracle(OracleError::Unavailable(_)) => EXIT_ORACLE_UNAVAILABLE,
        _ => EXIT_USAGE,
    }
}

fn cmd_reduce(args: ReduceArgs) -> i32 {
    let alg: Algorithm = match args.alg.parse() {
        Ok(a) => a,
        Err(e) => return usage_error(format!("--alg: {e}")),
    };
    let tie_rule: GainTieRule = match args.probdd_tie.parse() {
        Ok(t) => t,
        Err(e) => return usage_error(format!("--probdd-tie: {e}")),
    };
    if !(args.p0 > 0.0 && args.p0 < 1.0) {
        return usage_error(format!("--p0 must be in (0,1), got {}", args.p0));
    }
    let mut prep = match prepare(&args.oracle) {
        Ok(p) => p,
        Err(code) => return code,
    };

    let params = ReduceParams {
        p0: args.p0,
        seed: args.seed,
        tie_rule,
        max_queries: args.max_queries,
    };
    let mut sink = TelemetrySink::new(alg.name());
    let initial_elements = prep.list.len();
    let initial_bytes = reassemble(&prep.list).len();

    let (outcome, fixpoint_sizes, productive) = if args.fixpoint {
        match fixpoint_reduce(
            alg,
            &prep.list,
            &mut prep.oracle,
            &params,
            args.max_iterations,
            &mut sink,
        ) {
            Ok(f) => (f.outcome, Some(f.iteration_sizes), Some(f.productive_iterations)),
            Err(e) => {
                eprintln!("error: {e}");
                return reduce_error_code(&e);
            }
        }
    } else {
        match reduce_once(alg, &prep.list, &mut prep.oracle, &params, &mut sink) {
            Ok(o) => (o, None, None),
            Err(e) => {
                eprintln!("error: {e}");
                return reduce_error_code(&e);
            }
        }
    };

    let reduced_path = {
        let mut s = args.oracle.input.clone().into_os_string();
        s.push(".reduced");
        PathBuf::from(s)
    };
    if let Err(e) = std::fs::write(&reduced_path, reassemble(&outcome.final_list)) {
        return usage_error(format!("writing {}: {e}", reduced_path.display()));
    }

    let one_minimal = if args.check_minimal {
        match check_one_minimal(&outcome.final_list, &mut prep.oracle) {
            Ok(report) => Some(report),
            Err(e) => {
                eprintln!("error: {e}");
                return reduce_error_code(&e);
            }
        }
    } else {
        None
    };

    let mut summary = serde_json::json!({
        "input": args.oracle.input.display().to_string(),
        "reduced_output": reduced_path.display().to_string(),
        "algorithm": alg.name(),
        "granularity": args.oracle.granularity,
        "p0": args.p0,
        "seed": args.seed,
        "initial_elements": initial_elements,
        "initial_bytes": initial_bytes,
        "final_elements": outcome.final_size(),
        "final_bytes": outcome.final_bytes(),
        "queries": outcome.oracle_invocations,
        "spawns": prep.oracle.spawn_count(),
        "cache_hits": prep.oracle.cache_hits(),
        "rounds": outcome.rounds,
        "wall_time_secs": outcome.wall_time_secs,
    });
    if let Some(sizes) = fixpoint_sizes {
        summary["fixpoint_iteration_sizes"] = serde_json::json!(sizes);
        summary["fixpoint_productive_iterations"] = serde_json::json!(productive);
    }
    if let Some(report) = &one_minimal {
        summary["one_minimal"] = serde_json::json!(report.is_one_minimal);
        summary["removable_ids"] = serde_json::json!(report.removable_ids);
    }

    if let Some(path) = &args.telemetry {
        let input_name = args.oracle.input.display().to_string();
        let report = TelemetryReport::new(&sink, &input_name);
        let body = serde_json::to_string_pretty(&report.to_json()).expect("serializable report");
        if let Err(e) = std::fs::write(path, body) {
            return usage_error(format!("writing {}: {e}", path.display()));
        }
    }
    let body = serde_json::to_string_pretty(&summary).expect("serializable summary");
    if let Some(path) = &args.report {
        if let Err(e) = std::fs::write(path, &body) {
            return usage_error(format!("writing {}: {e}", path.display()));
        }
    }
    println!("{body}");
    EXIT_OK
}

fn cmd_check_minimal(args: CheckMinimalArgs) -> i32 {
    let mut prep = match prepare(&args.oracle) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let report = match check_one_minimal(&prep.list, &mut prep.oracle) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return reduce_error_code(&e);
        }
    };
    if report.is_one_minimal {
        println!("1-minimal: no single-element deletion preserves the property");
        EXIT_OK
    } else {
        let ids: Vec<String> = report.removable_ids.iter().map(|id| id.to_string()).collect();
        println!("not 1-minimal: removable elements: {}", ids.join(", "));
        EXIT_NOT_MINIMAL
    }
}

fn cmd_verify_theory(args: VerifyTheoryArgs) -> i32 {
    if !(args.p0 > 0.0 && args.p0 < 1.0) {
        return usage_error(format!("--p0 must be in (0,1), got {}", args.p0));
    }
    let mut lines = vec!["r,p_r,s_r,real_s,lower,upper,bound_holds".to_string()];
    let mut all_hold = true;
    let mut r: u32 = 0;
    loop {
        let p_r = theory::prob_at_round(r, args.p0).expect("validated p0");
        let s_r = match crate::cdd::compute_size(r, args.p0) {
            Ok(s) => s,
            Err(e) => return usage_error(e),
        };
        let real = if p_r < 1.0 {
            theory::size_from_prob(p_r).expect("p_r in (0,1)")
        } else {
            1.0
        };
        let (lower, upper, holds_str) = if real > 1.0 {
            let next_real = theory::size_recursion(real).expect("real > 1");
            let lower = theory::decay() * real - 1.0;
            let upper = theory::decay() * real;
            let holds = next_real >= lower - 1e-9 && next_real <= upper + 1e-9;
            all_hold &= holds;
            (lower.to_string(), upper.to_string(), holds.to_string())
        } else {
            (String::new(), String::new(), String::new())
        };
        lines.push(format!("{r},{p_r},{s_r},{real},{lower},{upper},{holds_str}"));
        if s_r == 1 {
            break;
        }
        r += 1;
    }
    let body = lines.join("\n") + "\n";
    print!("{body}");
    if let Some(path) = &args.out {
        if let Err(e) = std::fs::write(path, &body) {
            return usage_error(format!("writing {}: {e}", path.display()));
        }
    }
    if all_hold {
        EXIT_OK
    } else {
        eprintln!("error: a schedule bound check failed");
        EXIT_USAGE
    }
}

fn cmd_bench(args: BenchArgs) -> i32 {
    let manifest = match BenchManifest::load(&args.manifest) {
        Ok(m) => m,
        Err(e) => return usage_error(e),
    };
    match crate::bench::run_matrix(&manifest, &args.out) {
        Ok(report) => {
            let ok = report.runs.iter().filter(|r| r.status == "ok").count();
            println!(
                "{} runs ({ok} ok); results in {}",
                report.runs.len(),
                args.out.display()
            );
            EXIT_OK
        }
        Err(e) => usage_error(e),
    }
}

fn cmd_gen(args: GenArgs) -> i32 {
    let (list, kernel) = match synthetic::gen_planted(args.n, args.kernel, args.seed) {
        Ok(pair) => pair,
        Err(e) => return usage_error(e),
    };
    if let Err(e) = write_planted_pair(&args.out, &list, &kernel) {
        return usage_error(e);
    }
    println!(
        "wrote {} elements with a {}-element kernel to {}",
        args.n,
        args.kernel,
        args.out.display()
    );
    EXIT_OK
}

fn write_planted_pair(
    dir: &Path,
    list: &ElementList,
    kernel: &BTreeSet<crate::input::ElementId>,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("input.txt"), reassemble(list))?;

    let markers: Vec<String> = list
        .elements()
        .iter()
        .filter(|e| kernel.contains(&e.id))
        .map(|e| String::from_utf8_lossy(&e.payload).trim().to_string())
        .collect();
    let script = dir.join("oracle.sh");
    let mut f = std::fs::File::create(&script)?;
    writeln!(f, "#!/bin/sh")?;
    writeln!(f, "# holds iff every kernel line is still present")?;
    writeln!(f, "for m in {}; do", markers.join(" "))?;
    writeln!(f, "  grep -qx \"$m\" \"$1\" || exit 1")?;
    writeln!(f, "done")?;
    writeln!(f, "exit 0")?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755))?;
    }

    let kernel_list: Vec<String> = kernel.iter().map(|id| id.to_string()).collect();
    std::fs::write(dir.join("kernel.txt"), kernel_list.join("\n") + "\n")?;
    Ok(())
}
