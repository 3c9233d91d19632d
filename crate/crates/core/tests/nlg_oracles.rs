mod common;

use common::{lcs_brute, meteor_brute, meteor_from_counts};
use impression_eval::nlg::{bleu, lcs_len, meteor_alignment, meteor_lite, rouge_l, TokenSequence};
use proptest::prelude::*;

fn seq(tokens: &[&str]) -> TokenSequence {
    TokenSequence::from_tokens(tokens.iter().copied())
}

#[test]
fn lcs_matches_enumeration_for_all_short_ternary_pairs() {
    // the acceptance target runs the same sweep up to length 8
    assert_eq!(common::lcs_exhaustive_mismatches(6, lcs_len), 0);
}

#[test]
fn exhaustive_oracle_catches_a_wrong_lcs() {
    assert!(common::lcs_exhaustive_mismatches(3, |a, b| lcs_len(a, b).saturating_sub(1)) > 0);
}

#[test]
fn subsequence_enumeration_agrees_with_bitset_oracle() {
    assert_eq!(common::lcs_exhaustive_mismatches(5, lcs_brute), 0);
}

#[test]
fn rouge_hand_case() {
    let r = rouge_l(&seq(&["a", "c", "e"]), &seq(&["a", "b", "c", "d", "e"]));
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 0.6, 0.75));
}

#[test]
fn bleu_brevity_penalty_case() {
    let b = bleu(
        &seq(&["a", "b", "c", "d"]),
        &seq(&["a", "b", "c", "d", "e", "f"]),
        4,
    );
    assert!((b - (1.0f64 - 6.0 / 4.0).exp()).abs() < 1e-12);
    assert!((b - 0.60653).abs() < 1e-5);
}

#[test]
fn meteor_hand_cases() {
    let s = seq(&["a", "b", "c", "d"]);
    assert_eq!(meteor_lite(&s, &s), 0.9921875);
    assert_eq!(meteor_lite(&seq(&["a", "b"]), &seq(&["b", "a"])), 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn meteor_alignment_is_optimal_on_small_inputs(
        cand in proptest::collection::vec(0u8..3, 0..8),
        refs in proptest::collection::vec(0u8..3, 0..8),
    ) {
        let names = ["a", "b", "c"];
        let c: Vec<&str> = cand.iter().map(|&i| names[i as usize]).collect();
        let r: Vec<&str> = refs.iter().map(|&i| names[i as usize]).collect();
        let alignment = meteor_alignment(&seq(&c), &seq(&r));
        let (m, chunks) = meteor_brute(&c, &r);
        prop_assert_eq!((alignment.matches, alignment.chunks), (m, chunks));
        if !c.is_empty() && !r.is_empty() {
            let expected = meteor_from_counts(m, chunks, c.len(), r.len());
            prop_assert!((meteor_lite(&seq(&c), &seq(&r)) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_metrics_are_bounded(
        cand in proptest::collection::vec(0u8..5, 0..30),
        refs in proptest::collection::vec(0u8..5, 1..30),
    ) {
        let names = ["a", "b", "c", "d", "e"];
        let c = seq(&cand.iter().map(|&i| names[i as usize]).collect::<Vec<_>>());
        let r = seq(&refs.iter().map(|&i| names[i as usize]).collect::<Vec<_>>());
        for v in [bleu(&c, &r, 4), meteor_lite(&c, &r), rouge_l(&c, &r).f1] {
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
        }
    }

    #[test]
    fn lcs_is_symmetric_and_bounded(
        a in proptest::collection::vec(0u8..3, 0..20),
        b in proptest::collection::vec(0u8..3, 0..20),
    ) {
        let l = lcs_len(&a, &b);
        prop_assert_eq!(l, lcs_len(&b, &a));
        prop_assert!(l <= a.len().min(b.len()));
    }
}
