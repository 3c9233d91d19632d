use super::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeL {
    let l = lcs_len(&candidate.tokens, &reference.tokens);
    if l == 0 {
        return RougeL {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    RougeL {
        precision: l as f64 / c,
        recall: l as f64 / r,
        // 2PR/(P+R) simplifies to 2L/(c+r)
        f1: 2.0 * l as f64 / (c + r),
    }
}
