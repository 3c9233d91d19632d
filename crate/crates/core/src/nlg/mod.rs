//! Text-overlap metrics (BLEU-4, ROUGE-L, METEOR) and the embedding-based
//! semantic scores. All functions are pure and return values in `[0, 1]`.

mod bleu;
mod meteor;
mod rouge;
mod semantic;
mod tokenize;

pub use bleu::bleu;
pub use meteor::{meteor_alignment, meteor_lite, Alignment};
pub use rouge::{lcs_len, rouge_l, RougeL};
pub use semantic::{
    bertscore_from_embeddings, sbert_score, sentence_cosine, EmbeddingBundle, EmbeddingRecord,
    EmbeddingStore, Side,
};
pub use tokenize::{tokenize, Scheme, TokenSequence};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapScores {
    pub bleu4: f64,
    pub rouge_l_p: f64,
    pub rouge_l_r: f64,
    pub rouge_l_f: f64,
    pub meteor: f64,
}

pub fn overlap_scores(candidate: &TokenSequence, reference: &TokenSequence) -> OverlapScores {
    let rouge = rouge_l(candidate, reference);
    OverlapScores {
        bleu4: bleu(candidate, reference, 4),
        rouge_l_p: rouge.precision,
        rouge_l_r: rouge.recall,
        rouge_l_f: rouge.f1,
        meteor: meteor_lite(candidate, reference),
    }
}
