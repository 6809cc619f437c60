//! ddlab: a test-input minimization toolkit.
//!
//! Three delta-debugging algorithms — classic ddmin, probabilistic
//! reduction (ProbDD), and counter-based reduction (CDD) — run against
//! pluggable property oracles, with query-category telemetry, a
//! 1-minimality checker, executable probability/size theory, and a
//! benchmark harness with geometric-mean and Wilcoxon aggregation.

pub mod bench;
pub mod cdd;
pub mod cli;
pub mod ddmin;
pub mod error;
pub mod input;
pub mod oracle;
pub mod probdd;
pub mod session;
pub mod synthetic;
pub mod telemetry;
pub mod theory;

pub use cdd::{cdd_reduce, compute_size, fixpoint_reduce, reduce_once, Algorithm, ReduceParams};
pub use ddmin::ddmin_reduce;
pub use error::{MathError, OracleError, ReduceError};
pub use input::{segment, ElementId, ElementList, Granularity, ReductionOutcome};
pub use oracle::{
    check_one_minimal, AllFailOracle, CachedOracle, ExternalOracle, ExternalOracleConfig,
    PlantedOracle, PropertyOracle, TableOracle, Verdict,
};
pub use probdd::{probdd_reduce, GainTieRule, ProbDdConfig};
pub use telemetry::{QueryCategory, QueryOutcome, QueryRecord, TelemetrySink};
