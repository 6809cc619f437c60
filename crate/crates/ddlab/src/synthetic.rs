//! Generators for desk-scale experiment inputs: planted-kernel lists and
//! small non-monotone truth tables with exhaustively computed ground truth.

use crate::error::OracleError;
use crate::input::{segment, ElementId, ElementList, Granularity};
use crate::oracle::TableOracle;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashSet};

/// A numbered one-token-per-line input of `n` elements.
pub fn numbered_lines(n: u64) -> ElementList {
    let text: String = (1..=n).map(|i| format!("item{i}\n")).collect();
    segment(text.as_bytes(), Granularity::Line)
}

/// Generate an `n`-element list plus a seeded `k`-element kernel sampled
/// without replacement. Pair it with a `PlantedOracle` for a monotone
/// reduction problem whose unique 1-minimal answer is the kernel.
pub fn gen_planted(
    n: u64,
    k: usize,
    seed: u64,
) -> Result<(ElementList, BTreeSet<ElementId>), OracleError> {
    if n == 0 || k == 0 || k as u64 > n {
        return Err(OracleError::InvalidConfig(format!(
            "kernel size must satisfy 1 <= k <= n, got n={n} k={k}"
        )));
    }
    let list = numbered_lines(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<ElementId> = list.ids().collect();
    ids.shuffle(&mut rng);
    let kernel: BTreeSet<ElementId> = ids.into_iter().take(k).collect();
    Ok((list, kernel))
}

/// A small random truth table together with its brute-force ground truth.
#[derive(Debug, Clone)]
pub struct SyntheticTable {
    pub list: ElementList,
    pub holding: HashSet<BTreeSet<ElementId>>,
    /// Every holding subset none of whose single-element deletions holds,
    /// found by enumerating all 2^n subsets.
    pub minimal: Vec<BTreeSet<ElementId>>,
}

impl SyntheticTable {
    pub fn oracle(&self) -> TableOracle {
        TableOracle::new(self.list.id_set(), self.holding.clone())
            .expect("generated tables satisfy the construction constraints")
    }
}

/// Generate a random truth table over `n <= 8` elements: the full set holds,
/// the empty set fails, every other subset holds with probability `density`.
/// Monotonicity is not enforced, so generated tables exercise the
/// non-monotone paths of the reducers.
pub fn gen_truth_table(n: u64, seed: u64, density: f64) -> Result<SyntheticTable, OracleError> {
    if n == 0 || n > 8 {
        return Err(OracleError::InvalidConfig(format!(
            "truth tables support 1 <= n <= 8 elements, got {n}"
        )));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(OracleError::InvalidConfig(format!(
            "density must be in [0,1], got {density}"
        )));
    }
    let list = numbered_lines(n);
    let ids: Vec<ElementId> = list.ids().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut holding: HashSet<BTreeSet<ElementId>> = HashSet::new();
    let full: BTreeSet<ElementId> = ids.iter().copied().collect();
    for mask in 1u32..(1 << n) {
        let subset: BTreeSet<ElementId> = ids
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &id)| id)
            .collect();
        let include = subset == full || rng.gen_bool(density);
        if include {
            holding.insert(subset);
        }
    }

    let minimal = enumerate_minimal(&holding);
    Ok(SyntheticTable {
        list,
        holding,
        minimal,
    })
}

/// All 1-minimal members of a holding family.
pub fn enumerate_minimal(
    holding: &HashSet<BTreeSet<ElementId>>,
) -> Vec<BTreeSet<ElementId>> {
    let mut minimal: Vec<BTreeSet<ElementId>> = holding
        .iter()
        .filter(|s| {
            s.iter().all(|drop| {
                let smaller: BTreeSet<ElementId> =
                    s.iter().copied().filter(|id| id != drop).collect();
                !holding.contains(&smaller)
            })
        })
        .cloned()
        .collect();
    minimal.sort();
    minimal
}
