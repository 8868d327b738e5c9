//! Randomized invariant checks.

use proptest::prelude::*;

use zec::codes::{search_zero_error_code, verify_zero_error_code, SearchMode};
use zec::coupled::{coupled_graph, is_walkable};
use zec::{configs, NoiseFsm};

fn bundled_channel(idx: usize) -> NoiseFsm {
    let c = &configs::ALL[idx % configs::ALL.len()];
    NoiseFsm::parse(c.json).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// A difference sequence is walkable iff its mod-q negation is:
    /// swapping the two coupled walks negates every label.
    #[test]
    fn walkability_negation_symmetry(
        idx in 0usize..configs::ALL.len(),
        raw in prop::collection::vec(0u32..64, 1..7),
    ) {
        let ch = bundled_channel(idx);
        let cg = coupled_graph(&ch).unwrap();
        let d: Vec<u32> = raw.iter().map(|x| x % ch.q).collect();
        let neg: Vec<u32> = d.iter().map(|&x| (ch.q - x) % ch.q).collect();
        prop_assert_eq!(is_walkable(&cg, &d), is_walkable(&cg, &neg));
    }

    /// Every code the search returns survives independent verification.
    #[test]
    fn searched_codes_verify(
        idx in 0usize..configs::ALL.len(),
        n in 1usize..4,
        greedy in any::<bool>(),
    ) {
        let ch = bundled_channel(idx);
        let vertices = (ch.q as f64).powi(n as i32);
        if vertices > 256.0 {
            return Ok(()); // keep the confusability graph small
        }
        // exact branch-and-bound explodes on the larger product graphs
        let mode = if greedy || vertices > 100.0 { SearchMode::Greedy } else { SearchMode::Exact };
        let code = search_zero_error_code(&ch, n, mode).unwrap();
        prop_assert!(verify_zero_error_code(&ch, &code).unwrap());
        prop_assert!(!code.codewords.is_empty());
    }

    /// Channel specs survive a serialization round trip unchanged.
    #[test]
    fn config_round_trip(idx in 0usize..configs::ALL.len(), q in 2u32..6) {
        let ch = bundled_channel(idx).with_alphabet(q).unwrap();
        let reparsed = NoiseFsm::parse(&ch.to_json()).unwrap();
        prop_assert_eq!(ch.to_doc(), reparsed.to_doc());
        prop_assert_eq!(NoiseFsm::from_doc(&reparsed.to_doc()).unwrap().to_doc(), ch.to_doc());
    }
}

/// The binary no-consecutive-errors graph is a subgraph of the three-state
/// graph (every admissible noise sequence of the former is admissible for
/// the latter), so the richer channel can never support a larger code.
#[test]
fn subgraph_monotonicity_of_code_sizes() {
    for q in [2u32, 3] {
        let sparse = NoiseFsm::parse(configs::FIG3_NO_CONSECUTIVE)
            .unwrap()
            .with_alphabet(q)
            .unwrap();
        let rich = NoiseFsm::parse(configs::EX2_THREE_STATE)
            .unwrap()
            .with_alphabet(q)
            .unwrap();
        for n in 1..=4usize {
            let best_sparse = search_zero_error_code(&sparse, n, SearchMode::Exact).unwrap();
            let best_rich = search_zero_error_code(&rich, n, SearchMode::Exact).unwrap();
            assert!(
                best_rich.codewords.len() <= best_sparse.codewords.len(),
                "q={q} n={n}: {} > {}",
                best_rich.codewords.len(),
                best_sparse.codewords.len()
            );
        }
    }
}
