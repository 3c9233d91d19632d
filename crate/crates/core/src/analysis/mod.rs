//! Per-sample scoring and the aggregate views built on top of it.

mod aggregate;
mod stats;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clinical::{self, Rubric, UerSource};
use crate::corpus::Report;
use crate::error::{Error, Result};
use crate::extraction::extract_entity_set;
use crate::lexicon::Matcher;
use crate::nlg::{self, EmbeddingStore, Scheme};
use crate::runner::Candidate;

pub use aggregate::{
    aggregate_leaderboard, distribution_stats, sort_leaderboard, stratify_by_tracer,
    DistributionRow, LeaderboardRow, TracerMatrix,
};
pub use stats::{
    correlation_by_model, correlation_matrix, pearson, quartiles, CorrelationLevel,
    CorrelationMatrix, FiveNumber,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bleu4,
    RougeL,
    Meteor,
    BertScore,
    Sbert,
    Ecr,
    Uer,
    Fcr,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Bleu4,
        Metric::RougeL,
        Metric::Meteor,
        Metric::BertScore,
        Metric::Sbert,
        Metric::Ecr,
        Metric::Uer,
        Metric::Fcr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Bleu4 => "bleu4",
            Metric::RougeL => "rouge_l",
            Metric::Meteor => "meteor",
            Metric::BertScore => "bertscore",
            Metric::Sbert => "sbert",
            Metric::Ecr => "ecr",
            Metric::Uer => "uer",
            Metric::Fcr => "fcr",
        }
    }

    /// UER counts fabrications; every other column rewards larger values.
    pub fn higher_is_better(self) -> bool {
        self != Metric::Uer
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// Every metric value for one (report, candidate) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub report_id: String,
    pub model_name: String,
    pub tracer: String,
    pub bleu4: f64,
    pub rouge_l_p: f64,
    pub rouge_l_r: f64,
    pub rouge_l_f: f64,
    pub meteor: f64,
    pub bertscore_f: Option<f64>,
    pub sbert: Option<f64>,
    pub ecr: f64,
    pub uer: f64,
    pub fcr: f64,
    pub fcr_criteria: Vec<f64>,
}

impl SampleScore {
    pub fn get(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu4 => Some(self.bleu4),
            Metric::RougeL => Some(self.rouge_l_f),
            Metric::Meteor => Some(self.meteor),
            Metric::BertScore => self.bertscore_f,
            Metric::Sbert => self.sbert,
            Metric::Ecr => Some(self.ecr),
            Metric::Uer => Some(self.uer),
            Metric::Fcr => Some(self.fcr),
        }
    }
}

/// Shared, read-only inputs for scoring.
pub struct ScoringContext<'a> {
    pub matcher: &'a Matcher,
    pub rubric: &'a Rubric,
    pub scheme: Scheme,
    pub uer_source: UerSource,
    pub embeddings: Option<&'a EmbeddingStore>,
}

pub fn score_sample(
    report: &Report,
    candidate: &Candidate,
    ctx: &ScoringContext<'_>,
) -> Result<SampleScore> {
    if candidate.report_id != report.id {
        return Err(Error::Argument(format!(
            "candidate for {:?} scored against report {:?}",
            candidate.report_id, report.id
        )));
    }
    let e_ref = extract_entity_set(ctx.matcher, &report.impression);
    let e_gen = extract_entity_set(ctx.matcher, &candidate.impression);
    let findings_entities;
    let e_uer_ref = match ctx.uer_source {
        UerSource::Impression => &e_ref,
        UerSource::Findings => {
            findings_entities = extract_entity_set(ctx.matcher, &report.findings);
            &findings_entities
        }
    };
    let clinical = clinical::clinical_scores(
        &e_ref,
        e_uer_ref,
        &e_gen,
        &candidate.impression,
        ctx.rubric,
        ctx.matcher,
    );

    let cand_tokens = nlg::tokenize(&candidate.impression, ctx.scheme);
    let ref_tokens = nlg::tokenize(&report.impression, ctx.scheme);
    let overlap = nlg::overlap_scores(&cand_tokens, &ref_tokens);

    let (bertscore_f, sbert) = match ctx
        .embeddings
        .and_then(|store| store.pair(&report.id, &candidate.model_name))
    {
        Some((cand, reference)) => (
            Some(nlg::bertscore_from_embeddings(cand, reference)?.2),
            Some(nlg::sbert_score(
                &cand.sentence_vector,
                &reference.sentence_vector,
            )?),
        ),
        None => (None, None),
    };

    Ok(SampleScore {
        report_id: report.id.clone(),
        model_name: candidate.model_name.clone(),
        tracer: report.tracer.clone(),
        bleu4: overlap.bleu4,
        rouge_l_p: overlap.rouge_l_p,
        rouge_l_r: overlap.rouge_l_r,
        rouge_l_f: overlap.rouge_l_f,
        meteor: overlap.meteor,
        bertscore_f,
        sbert,
        ecr: clinical.ecr,
        uer: clinical.uer,
        fcr: clinical.fcr,
        fcr_criteria: clinical.criterion_scores,
    })
}
