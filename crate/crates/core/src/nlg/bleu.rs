use std::collections::HashMap;

use super::TokenSequence;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU with clipped n-gram precisions and brevity penalty.
///
/// A zero precision at order two or higher is replaced by `1 / (2c)` where
/// `c` is the candidate length. A zero unigram precision (or an empty
/// candidate or reference) gives 0.
pub fn bleu(candidate: &TokenSequence, reference: &TokenSequence, max_n: usize) -> f64 {
    let cand = &candidate.tokens;
    let refs = &reference.tokens;
    let (c, r) = (cand.len(), refs.len());
    if c == 0 || r == 0 || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let ref_counts = ngram_counts(refs, n);
        let cand_counts = ngram_counts(cand, n);
        let clipped: usize = cand_counts
            .iter()
            .map(|(gram, &count)| count.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let total = c.saturating_sub(n - 1);
        let precision = if clipped == 0 || total == 0 {
            if n == 1 {
                return 0.0;
            }
            1.0 / (2.0 * c as f64)
        } else {
            clipped as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let brevity = if c >= r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    brevity * (log_sum / max_n as f64).exp()
}
