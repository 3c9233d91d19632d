//! Exact-match METEOR.
//!
//! The alignment matches as many unigrams as possible one-to-one and, among
//! those alignments, looks for one with the fewest chunks. Minimizing chunks
//! is a common-string-partition problem, so the search is a greedy
//! longest-run seed refined by a depth-first search with a fixed node budget.
//! Small inputs are solved exactly; large ones return the best alignment
//! found within the budget.

use std::collections::HashMap;

use super::TokenSequence;

const SEARCH_BUDGET: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// For each candidate position, the aligned reference position.
    pub links: Vec<Option<usize>>,
    pub matches: usize,
    pub chunks: usize,
}

fn count_chunks(links: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    for (i, link) in links.iter().enumerate() {
        if let Some(j) = *link {
            let continues = i > 0 && j > 0 && links[i - 1] == Some(j - 1);
            if !continues {
                chunks += 1;
            }
        }
    }
    chunks
}

struct Search<'a> {
    cand: &'a [u32],
    refs: &'a [u32],
    positions: &'a [Vec<usize>],
    used: Vec<bool>,
    links: Vec<Option<usize>>,
    skips_left: Vec<usize>,
    best_chunks: usize,
    best: Vec<Option<usize>>,
    nodes: usize,
}

impl Search<'_> {
    fn run(&mut self, i: usize, chunks: usize) {
        if chunks >= self.best_chunks || self.nodes >= SEARCH_BUDGET {
            return;
        }
        self.nodes += 1;
        if i == self.cand.len() {
            self.best_chunks = chunks;
            self.best = self.links.clone();
            return;
        }
        let tok = self.cand[i] as usize;

        // extend the current chunk
        let next = match i.checked_sub(1).and_then(|p| self.links[p]) {
            Some(j) if j + 1 < self.refs.len() => Some(j + 1),
            _ => None,
        };
        if let Some(j) = next {
            if !self.used[j] && self.refs[j] as usize == tok {
                self.assign(i, j, chunks);
            }
        }
        // leave unaligned, if the token type has surplus occurrences
        if self.skips_left[tok] > 0 {
            self.skips_left[tok] -= 1;
            self.run(i + 1, chunks);
            self.skips_left[tok] += 1;
        }
        // open a new chunk
        for k in 0..self.positions[tok].len() {
            let j = self.positions[tok][k];
            if Some(j) != next && !self.used[j] {
                self.assign(i, j, chunks + 1);
            }
        }
    }

    fn assign(&mut self, i: usize, j: usize, chunks: usize) {
        self.used[j] = true;
        self.links[i] = Some(j);
        self.run(i + 1, chunks);
        self.links[i] = None;
        self.used[j] = false;
    }
}

fn intern<'a>(candidate: &'a [String], reference: &'a [String]) -> (Vec<u32>, Vec<u32>, usize) {
    let mut ids: HashMap<&'a str, u32> = HashMap::new();
    let mut id = |t: &'a String| {
        let next = ids.len() as u32;
        *ids.entry(t.as_str()).or_insert(next)
    };
    let cand: Vec<u32> = candidate.iter().map(&mut id).collect();
    let refs: Vec<u32> = reference.iter().map(&mut id).collect();
    (cand, refs, ids.len())
}

/// Maximum one-to-one exact alignment with (near-)minimal chunk count.
pub fn meteor_alignment(candidate: &TokenSequence, reference: &TokenSequence) -> Alignment {
    let (cand, refs, vocab) = intern(&candidate.tokens, &reference.tokens);
    let mut positions = vec![Vec::new(); vocab];
    for (j, &t) in refs.iter().enumerate() {
        positions[t as usize].push(j);
    }

    // Greedy seed: at each unaligned candidate position take the unused
    // reference occurrence that starts the longest aligned run.
    let mut used = vec![false; refs.len()];
    let mut links: Vec<Option<usize>> = vec![None; cand.len()];
    let mut i = 0;
    while i < cand.len() {
        let mut best: Option<(usize, usize)> = None;
        for &j in &positions[cand[i] as usize] {
            if used[j] {
                continue;
            }
            let mut run = 0;
            while i + run < cand.len()
                && j + run < refs.len()
                && !used[j + run]
                && cand[i + run] == refs[j + run]
            {
                run += 1;
            }
            if best.is_none_or(|(_, r)| run > r) {
                best = Some((j, run));
            }
        }
        match best {
            Some((j, run)) => {
                for k in 0..run {
                    used[j + k] = true;
                    links[i + k] = Some(j + k);
                }
                i += run;
            }
            None => i += 1,
        }
    }
    let matches = links.iter().flatten().count();
    let mut chunks = count_chunks(&links);

    if chunks > 1 {
        let mut cand_counts = vec![0usize; vocab];
        let mut ref_counts = vec![0usize; vocab];
        cand.iter().for_each(|&t| cand_counts[t as usize] += 1);
        refs.iter().for_each(|&t| ref_counts[t as usize] += 1);
        let skips_left = cand_counts
            .iter()
            .zip(&ref_counts)
            .map(|(&a, &b)| a.saturating_sub(b))
            .collect();
        let mut search = Search {
            cand: &cand,
            refs: &refs,
            positions: &positions,
            used: vec![false; refs.len()],
            links: vec![None; cand.len()],
            skips_left,
            best_chunks: chunks,
            best: links.clone(),
            nodes: 0,
        };
        search.run(0, 0);
        if search.best_chunks < chunks {
            links = search.best;
            chunks = search.best_chunks;
        }
    }
    Alignment {
        links,
        matches,
        chunks,
    }
}

/// METEOR restricted to exact unigram matches.
pub fn meteor_lite(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let alignment = meteor_alignment(candidate, reference);
    let m = alignment.matches as f64;
    if alignment.matches == 0 {
        return 0.0;
    }
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let penalty = 0.5 * (alignment.chunks as f64 / m).powi(3);
    f_mean * (1.0 - penalty)
}
