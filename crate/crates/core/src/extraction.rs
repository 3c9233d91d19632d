//! Greedy longest-match entity extraction.
//!
//! The scan walks the normalized text left to right. Where a term starts, the
//! longest one is taken and the scan jumps past it; otherwise it advances one
//! character. Matches therefore never overlap.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::lexicon::{Category, Matcher, NormalizedText};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityMatch {
    pub term: String,
    pub category: Category,
    /// Character index into the original (unnormalized) text.
    pub start: usize,
    /// Span length in original characters.
    pub length: usize,
}

/// Deduplicated normalized terms extracted from one text.
pub type EntitySet = BTreeSet<String>;

/// A match on normalized character positions; used by metrics that work on
/// the normalized text directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NormalizedMatch<'m> {
    pub term: &'m str,
    pub category: Category,
    pub start: usize,
    pub length: usize,
}

pub(crate) fn scan<'m>(matcher: &'m Matcher, text: &NormalizedText) -> Vec<NormalizedMatch<'m>> {
    let chars = text.chars();
    let mut matches = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        match matcher.longest_match_at(chars, pos) {
            Some(hit) => {
                matches.push(NormalizedMatch {
                    term: hit.term,
                    category: hit.category,
                    start: pos,
                    length: hit.length,
                });
                pos += hit.length;
            }
            None => pos += 1,
        }
    }
    matches
}

pub fn extract_entities(matcher: &Matcher, text: &str) -> Vec<EntityMatch> {
    let normalized = NormalizedText::new(text);
    scan(matcher, &normalized)
        .into_iter()
        .map(|m| {
            let (start, length) = normalized.original_span(m.start, m.start + m.length);
            EntityMatch {
                term: m.term.to_string(),
                category: m.category,
                start,
                length,
            }
        })
        .collect()
}

pub fn entity_set(matches: &[EntityMatch]) -> EntitySet {
    matches.iter().map(|m| m.term.clone()).collect()
}

/// `entity_set(extract_entities(..))` without materializing spans.
pub fn extract_entity_set(matcher: &Matcher, text: &str) -> EntitySet {
    let normalized = NormalizedText::new(text);
    scan(matcher, &normalized)
        .into_iter()
        .map(|m| m.term.to_string())
        .collect()
}
