//! Property oracles: the decision contract every reducer queries.
//!
//! An oracle decides whether a candidate variant still has the property of
//! interest. The external oracle runs an interestingness command (exit 0
//! means the property holds); the planted and table oracles are synthetic
//! stand-ins with known ground truth, used by the test suites and the
//! desk-scale experiments.

use crate::error::OracleError;
use crate::input::{content_digest, reassemble, ElementId, ElementList};
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Verdict of one property evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Fails,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::Holds
    }
}

/// One evaluation with the bookkeeping the telemetry layer needs.
#[derive(Debug, Clone, Copy)]
pub struct Evaluation {
    pub verdict: Verdict,
    /// The command exceeded its time budget; recorded as a failing verdict.
    pub timed_out: bool,
    /// Served from the query cache without running anything.
    pub cached: bool,
}

impl Evaluation {
    fn fresh(verdict: Verdict) -> Self {
        Evaluation {
            verdict,
            timed_out: false,
            cached: false,
        }
    }
}

/// The property ψ: deterministic within one run (same content, same verdict).
pub trait PropertyOracle {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError>;

    fn description(&self) -> String;

    /// Processes actually spawned so far (0 for in-process oracles).
    fn spawn_count(&self) -> u64 {
        0
    }
}

/// Synthetic monotone oracle: ψ(v) holds iff a hidden kernel is fully present.
#[derive(Debug, Clone)]
pub struct PlantedOracle {
    kernel: BTreeSet<ElementId>,
}

impl PlantedOracle {
    /// Rejects an empty kernel: it would make ψ(∅) hold, which the drivers
    /// forbid.
    pub fn new(kernel: BTreeSet<ElementId>) -> Result<Self, OracleError> {
        if kernel.is_empty() {
            return Err(OracleError::InvalidConfig(
                "planted kernel must be nonempty".into(),
            ));
        }
        Ok(PlantedOracle { kernel })
    }

    pub fn kernel(&self) -> &BTreeSet<ElementId> {
        &self.kernel
    }
}

impl PropertyOracle for PlantedOracle {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError> {
        let ids = list.id_set();
        let verdict = if self.kernel.is_subset(&ids) {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        Ok(Evaluation::fresh(verdict))
    }

    fn description(&self) -> String {
        format!("planted(|kernel|={})", self.kernel.len())
    }
}

/// Exact truth-table oracle: ψ(v) holds iff ids(v) is in the holding family.
/// Allows non-monotone properties for 1-minimality experiments.
#[derive(Debug, Clone)]
pub struct TableOracle {
    holding: HashSet<BTreeSet<ElementId>>,
}

impl TableOracle {
    /// The full initial id-set must hold and the empty set must fail.
    pub fn new(
        full: BTreeSet<ElementId>,
        holding: HashSet<BTreeSet<ElementId>>,
    ) -> Result<Self, OracleError> {
        if !holding.contains(&full) {
            return Err(OracleError::InvalidConfig(
                "table oracle: full initial id-set must be in the holding family".into(),
            ));
        }
        if holding.contains(&BTreeSet::new()) {
            return Err(OracleError::InvalidConfig(
                "table oracle: empty set must not hold".into(),
            ));
        }
        Ok(TableOracle { holding })
    }

    pub fn holds_set(&self, ids: &BTreeSet<ElementId>) -> bool {
        self.holding.contains(ids)
    }
}

impl PropertyOracle for TableOracle {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError> {
        let verdict = if self.holds_set(&list.id_set()) {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        Ok(Evaluation::fresh(verdict))
    }

    fn description(&self) -> String {
        format!("table(|holding|={})", self.holding.len())
    }
}

/// Oracle that holds only on the full initial list; every proper variant
/// fails. Drives the worst-case traces where no deletion ever succeeds.
#[derive(Debug, Clone)]
pub struct AllFailOracle {
    full: BTreeSet<ElementId>,
}

impl AllFailOracle {
    pub fn new(full: BTreeSet<ElementId>) -> Self {
        AllFailOracle { full }
    }
}

impl PropertyOracle for AllFailOracle {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError> {
        let verdict = if list.id_set() == self.full {
            Verdict::Holds
        } else {
            Verdict::Fails
        };
        Ok(Evaluation::fresh(verdict))
    }

    fn description(&self) -> String {
        "all-fail".into()
    }
}

/// Configuration for the external interestingness command.
#[derive(Debug, Clone)]
pub struct ExternalOracleConfig {
    /// Executable followed by its fixed arguments; the candidate path is
    /// appended as the last argument.
    pub command: Vec<String>,
    /// Name under which each variant is written inside its fresh temp dir.
    pub candidate_filename: String,
    pub timeout: Duration,
    /// Capture stdout/stderr to per-query log files under this directory.
    pub log_dir: Option<PathBuf>,
}

impl ExternalOracleConfig {
    pub fn validate(&self) -> Result<(), OracleError> {
        if self.command.is_empty() {
            return Err(OracleError::InvalidConfig("empty oracle command".into()));
        }
        if self.timeout.is_zero() {
            return Err(OracleError::InvalidConfig("timeout must be > 0".into()));
        }
        Ok(())
    }
}

/// Runs the interestingness command on each variant in a fresh temp dir.
///
/// Protocol: variant written as `candidate_filename`, command invoked with
/// the candidate path as its last argument and `DD_CANDIDATE` set to it;
/// exit 0 means the property holds; a timeout is a failing verdict.
pub struct ExternalOracle {
    cfg: ExternalOracleConfig,
    spawns: u64,
    queries: u64,
}

impl ExternalOracle {
    pub fn new(cfg: ExternalOracleConfig) -> Result<Self, OracleError> {
        cfg.validate()?;
        Ok(ExternalOracle {
            cfg,
            spawns: 0,
            queries: 0,
        })
    }

    fn run_once(&mut self, variant: &[u8]) -> Result<(Verdict, bool), OracleError> {
        let dir = tempfile::tempdir()?;
        let candidate = dir.path().join(&self.cfg.candidate_filename);
        std::fs::write(&candidate, variant)?;

        let mut cmd = Command::new(&self.cfg.command[0]);
        cmd.args(&self.cfg.command[1..])
            .arg(&candidate)
            .env("DD_CANDIDATE", &candidate)
            .current_dir(dir.path())
            .stdin(Stdio::null());

        let (stdout, stderr) = match &self.cfg.log_dir {
            Some(log_dir) => {
                std::fs::create_dir_all(log_dir)?;
                let out = std::fs::File::create(log_dir.join(format!("query-{}.out", self.queries)))?;
                let err = std::fs::File::create(log_dir.join(format!("query-{}.err", self.queries)))?;
                (Stdio::from(out), Stdio::from(err))
            }
            None => (Stdio::null(), Stdio::null()),
        };
        cmd.stdout(stdout).stderr(stderr);

        let mut child = cmd
            .spawn()
            .map_err(|e| OracleError::Unavailable(format!("{}: {e}", self.cfg.command[0])))?;
        self.spawns += 1;

        let deadline = Instant::now() + self.cfg.timeout;
        loop {
            match child.try_wait()? {
                Some(status) => {
                    let verdict = if status.success() {
                        Verdict::Holds
                    } else {
                        Verdict::Fails
                    };
                    return Ok((verdict, false));
                }
                None => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return Ok((Verdict::Fails, true));
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
            }
        }
    }
}

impl PropertyOracle for ExternalOracle {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError> {
        self.queries += 1;
        let variant = reassemble(list);
        let (verdict, timed_out) = self.run_once(&variant)?;
        Ok(Evaluation {
            verdict,
            timed_out,
            cached: false,
        })
    }

    fn description(&self) -> String {
        format!("external({})", self.cfg.command.join(" "))
    }

    fn spawn_count(&self) -> u64 {
        self.spawns
    }
}

/// Memoizes verdicts by content digest. Insert-once: a cached verdict is
/// never changed. Enabling or disabling the cache must not change any
/// algorithm's result, only the process-spawn count.
pub struct CachedOracle<O: PropertyOracle> {
    inner: O,
    map: HashMap<String, (Verdict, bool)>,
    hits: u64,
    misses: u64,
}

impl<O: PropertyOracle> CachedOracle<O> {
    pub fn new(inner: O) -> Self {
        CachedOracle {
            inner,
            map: HashMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: PropertyOracle> PropertyOracle for CachedOracle<O> {
    fn evaluate(&mut self, list: &ElementList) -> Result<Evaluation, OracleError> {
        let digest = content_digest(list);
        if let Some(&(verdict, timed_out)) = self.map.get(&digest) {
            self.hits += 1;
            return Ok(Evaluation {
                verdict,
                timed_out,
                cached: true,
            });
        }
        let eval = self.inner.evaluate(list)?;
        self.misses += 1;
        self.map.insert(digest, (eval.verdict, eval.timed_out));
        Ok(eval)
    }

    fn description(&self) -> String {
        format!("cached({})", self.inner.description())
    }

    fn spawn_count(&self) -> u64 {
        self.inner.spawn_count()
    }
}

/// Result of a 1-minimality check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OneMinimalReport {
    pub is_one_minimal: bool,
    pub removable_ids: BTreeSet<ElementId>,
}

/// Check 1-minimality: which single elements can still be removed while
/// keeping ψ? Requires ψ(l) to hold; issues one evaluation per element.
pub fn check_one_minimal(
    list: &ElementList,
    oracle: &mut dyn PropertyOracle,
) -> Result<OneMinimalReport, crate::error::ReduceError> {
    let initial = oracle.evaluate(list)?;
    if !initial.verdict.holds() {
        return Err(crate::error::ReduceError::PreconditionFailed(
            "1-minimality check requires the property to hold on the input".into(),
        ));
    }
    let mut removable = BTreeSet::new();
    for e in list.elements() {
        let deleted: BTreeSet<ElementId> = [e.id].into_iter().collect();
        let variant = list.without(&deleted);
        if oracle.evaluate(&variant)?.verdict.holds() {
            removable.insert(e.id);
        }
    }
    Ok(OneMinimalReport {
        is_one_minimal: removable.is_empty(),
        removable_ids: removable,
    })
}

/// Convenience for tests and the synthetic generators: write an oracle
/// shell script that greps the candidate for a required marker.
pub fn write_grep_script(path: &std::path::Path, marker: &str) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "#!/bin/sh")?;
    writeln!(f, "grep -q \"{marker}\" \"$1\"")?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))?;
    }
    Ok(())
}
