//! Entity Coverage Rate, Unsupported Entity Rate and Format Compliance Rate.

mod rubric;

use serde::{Deserialize, Serialize};

use crate::extraction::EntitySet;
use crate::lexicon::Matcher;

pub use rubric::{
    fcr, score_criterion, Compliance, Criterion, CriterionKind, Rubric, DEFAULT_DENYLIST,
};

/// Fraction of reference entities reproduced by the candidate.
///
/// An empty reference set gives 1.0: nothing could have been omitted.
pub fn ecr(e_ref: &EntitySet, e_gen: &EntitySet) -> f64 {
    if e_ref.is_empty() {
        return 1.0;
    }
    let covered = e_ref.iter().filter(|e| e_gen.contains(*e)).count();
    covered as f64 / e_ref.len() as f64
}

/// Fraction of candidate entities absent from the reference set.
///
/// An empty candidate set gives 0.0.
pub fn uer(e_ref: &EntitySet, e_gen: &EntitySet) -> f64 {
    if e_gen.is_empty() {
        return 0.0;
    }
    let unsupported = e_gen.iter().filter(|e| !e_ref.contains(*e)).count();
    unsupported as f64 / e_gen.len() as f64
}

/// Which entity set UER compares the candidate against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UerSource {
    /// Entities of the reference impression.
    #[default]
    Impression,
    /// Entities of the source findings.
    Findings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalScores {
    pub ecr: f64,
    pub uer: f64,
    pub fcr: f64,
    pub criterion_scores: Vec<f64>,
}

/// Computes all three clinical scores for one candidate text.
pub fn clinical_scores(
    e_ref: &EntitySet,
    e_uer_ref: &EntitySet,
    e_gen: &EntitySet,
    candidate: &str,
    rubric: &Rubric,
    matcher: &Matcher,
) -> ClinicalScores {
    let (fcr, criterion_scores) = fcr(candidate, rubric, matcher);
    ClinicalScores {
        ecr: ecr(e_ref, e_gen),
        uer: uer(e_uer_ref, e_gen),
        fcr,
        criterion_scores,
    }
}
