//! Property-based invariants over random inputs.

use ddlab::bench::geometric_mean;
use ddlab::input::{reassemble, segment, Granularity};
use ddlab::oracle::PlantedOracle;
use ddlab::telemetry::TelemetrySink;
use proptest::prelude::*;
use std::collections::BTreeSet;

proptest! {
    #[test]
    fn segment_reassemble_is_identity(bytes in proptest::collection::vec(any::<u8>(), 0..512)) {
        for granularity in [Granularity::Line, Granularity::Word, Granularity::Char] {
            let list = segment(&bytes, granularity);
            prop_assert_eq!(reassemble(&list), bytes.clone());
        }
    }

    #[test]
    fn element_ids_are_unique_and_ordered(text in "[ a-z\n]{0,200}") {
        for granularity in [Granularity::Line, Granularity::Word, Granularity::Char] {
            let list = segment(text.as_bytes(), granularity);
            let ids: Vec<u64> = list.ids().map(|id| id.0).collect();
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(&ids, &sorted);
            if let Some(&first) = ids.first() {
                prop_assert_eq!(first, 1);
            }
        }
    }

    #[test]
    fn geometric_mean_scale_equivariance(
        xs in proptest::collection::vec(0.001f64..1000.0, 1..20),
        c in 0.001f64..1000.0,
    ) {
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        let lhs = geometric_mean(&scaled).unwrap();
        let rhs = c * geometric_mean(&xs).unwrap();
        prop_assert!((lhs / rhs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn geometric_mean_between_min_and_max(
        xs in proptest::collection::vec(0.001f64..1000.0, 1..20),
    ) {
        let gm = geometric_mean(&xs).unwrap();
        let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = xs.iter().cloned().fold(0.0f64, f64::max);
        prop_assert!(gm >= min * (1.0 - 1e-12) && gm <= max * (1.0 + 1e-12));
    }

    #[test]
    fn reducers_preserve_subsequence_and_kernel(
        n in 2u64..40,
        seed in 0u64..1000,
    ) {
        let k = 1 + (seed as usize % n as usize);
        let (list, kernel) = ddlab::synthetic::gen_planted(n, k, seed).unwrap();
        for alg in [
            ddlab::Algorithm::Ddmin,
            ddlab::Algorithm::ProbDd,
            ddlab::Algorithm::Cdd,
        ] {
            let mut oracle = PlantedOracle::new(kernel.clone()).unwrap();
            let mut sink = TelemetrySink::new(alg.name());
            let params = ddlab::ReduceParams { seed, ..Default::default() };
            let out = ddlab::reduce_once(alg, &list, &mut oracle, &params, &mut sink).unwrap();
            prop_assert!(out.final_list.is_subsequence_of(&list));
            prop_assert_eq!(out.final_list.id_set(), kernel.clone());
            // every query deletes a nonempty subset of the then-live ids
            let all: BTreeSet<_> = list.id_set();
            for q in sink.records() {
                prop_assert!(!q.deleted_ids.is_empty());
                prop_assert!(q.deleted_ids.is_subset(&all));
            }
        }
    }
}
