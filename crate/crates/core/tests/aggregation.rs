use impression_eval::analysis::{
    aggregate_leaderboard, distribution_stats, stratify_by_tracer, Metric, SampleScore,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRACERS: [&str; 4] = ["FDG", "PSMA", "tau", "amyloid"];

fn random_scores(seed: u64, n: usize) -> Vec<SampleScore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut u = || rng.gen_range(0.0..1.0);
            SampleScore {
                report_id: format!("R{i}"),
                model_name: ["alpha", "beta", "gamma"][i % 3].into(),
                tracer: TRACERS[(i * 7 / 3) % 4].into(),
                bleu4: u(),
                rouge_l_p: u(),
                rouge_l_r: u(),
                rouge_l_f: u(),
                meteor: u(),
                bertscore_f: if i % 5 == 0 { None } else { Some(u()) },
                sbert: None,
                ecr: u(),
                uer: u(),
                fcr: (u() * 10.0).round() / 10.0,
                fcr_criteria: vec![],
            }
        })
        .collect()
}

fn brute_mean(
    scores: &[SampleScore],
    keep: impl Fn(&SampleScore) -> bool,
    metric: Metric,
) -> Option<f64> {
    let values: Vec<f64> = scores
        .iter()
        .filter(|s| keep(s))
        .filter_map(|s| s.get(metric))
        .collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

#[test]
fn leaderboard_means_match_recomputation() {
    let scores = random_scores(1, 300);
    let rows = aggregate_leaderboard(&scores);
    assert_eq!(rows.len(), 3);
    for row in &rows {
        for metric in Metric::ALL {
            let want = brute_mean(&scores, |s| s.model_name == row.model_name, metric);
            match (row.get(metric), want) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{} {metric}", row.model_name),
                (a, b) => assert_eq!(a, b),
            }
        }
        assert_eq!(row.n, 100);
    }
    let bleu: Vec<f64> = rows.iter().map(|r| r.get(Metric::Bleu4).unwrap()).collect();
    assert!(bleu.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn stratification_matches_group_by() {
    let scores = random_scores(2, 400);
    let matrix = stratify_by_tracer(&scores);
    for model in &matrix.models {
        for tracer in &matrix.tracers {
            for metric in Metric::ALL {
                let want = brute_mean(
                    &scores,
                    |s| &s.model_name == model && &s.tracer == tracer,
                    metric,
                );
                match (matrix.cell(model, tracer, metric), want) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }
    // a (model, tracer) pair with no samples is absent, not zero
    let only_fdg: Vec<SampleScore> = scores
        .iter()
        .filter(|s| s.tracer == "FDG")
        .cloned()
        .collect();
    let mut with_tau = only_fdg.clone();
    let mut extra = scores.iter().find(|s| s.tracer == "tau").unwrap().clone();
    extra.model_name = "alpha".into();
    with_tau.push(extra);
    let m = stratify_by_tracer(&with_tau);
    assert!(m.has_cell("alpha", "tau"));
    assert!(!m.has_cell("beta", "tau"));
    assert_eq!(m.cell("beta", "tau", Metric::Ecr), None);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregates_are_permutation_invariant(seed in any::<u64>(), n in 1usize..120) {
        let scores = random_scores(seed, n);
        let mut shuffled = scores.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        prop_assert_eq!(aggregate_leaderboard(&scores), aggregate_leaderboard(&shuffled));
        prop_assert_eq!(stratify_by_tracer(&scores), stratify_by_tracer(&shuffled));
        prop_assert_eq!(distribution_stats(&scores), distribution_stats(&shuffled));
    }

    #[test]
    fn means_stay_in_unit_interval(seed in any::<u64>(), n in 1usize..60) {
        for row in aggregate_leaderboard(&random_scores(seed, n)) {
            for metric in Metric::ALL {
                if let Some(v) = row.get(metric) {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            prop_assert!(row.n > 0);
        }
    }
}
