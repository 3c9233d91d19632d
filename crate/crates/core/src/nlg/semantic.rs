use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Externally computed vectors for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingBundle {
    pub token_vectors: Vec<Vec<f64>>,
    pub sentence_vector: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(vectors: &[Vec<f64>], dim: usize) -> Result<()> {
    match vectors.iter().find(|v| v.len() != dim) {
        Some(v) => Err(Error::Argument(format!(
            "embedding dimension mismatch: {} vs {dim}",
            v.len()
        ))),
        None => Ok(()),
    }
}

/// Greedy max-cosine matching between token vectors (no IDF weighting).
///
/// Returns `(precision, recall, f1)`, each floored at 0.
pub fn bertscore_from_embeddings(
    cand: &EmbeddingBundle,
    reference: &EmbeddingBundle,
) -> Result<(f64, f64, f64)> {
    let (Some(first), false) = (
        cand.token_vectors.first(),
        reference.token_vectors.is_empty(),
    ) else {
        return Err(Error::Argument("token vector list is empty".into()));
    };
    let dim = first.len();
    check_dims(&cand.token_vectors, dim)?;
    check_dims(&reference.token_vectors, dim)?;

    let unit = |vs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        vs.iter()
            .map(|v| {
                let n = norm(v);
                if n == 0.0 {
                    vec![0.0; v.len()]
                } else {
                    v.iter().map(|x| x / n).collect()
                }
            })
            .collect()
    };
    let c = unit(&cand.token_vectors);
    let r = unit(&reference.token_vectors);
    let sim: Vec<Vec<f64>> = c
        .iter()
        .map(|cv| r.iter().map(|rv| dot(cv, rv).clamp(-1.0, 1.0)).collect())
        .collect();

    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / c.len() as f64;
    let recall = (0..r.len())
        .map(|j| {
            sim.iter()
                .map(|row| row[j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum::<f64>()
        / r.len() as f64;
    let (p, r) = (precision.max(0.0), recall.max(0.0));
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    Ok((p, r, f))
}

/// Cosine similarity in `[-1, 1]`.
pub fn sentence_cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "sentence vector dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Argument("zero sentence vector".into()));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Leaderboard form of the sentence score: cosine floored at 0.
pub fn sbert_score(a: &[f64], b: &[f64]) -> Result<f64> {
    sentence_cosine(a, b).map(|c| c.max(0.0))
}


#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Candidate,
    Reference,
}

/// One line of the embeddings JSONL file. Candidate-side lines may carry a
/// `model` to disambiguate when several models answered the same report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub token_vectors: Vec<Vec<f64>>,
    pub sentence_vector: Vec<f64>,
}

/// Embeddings keyed by sample id, validated to one shared dimension.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    reference: HashMap<String, EmbeddingBundle>,
    candidate: HashMap<(String, Option<String>), EmbeddingBundle>,
}

impl EmbeddingStore {
    pub fn from_records(records: impl IntoIterator<Item = EmbeddingRecord>) -> Result<Self> {
        let mut store = EmbeddingStore::default();
        let mut dim: Option<usize> = None;
        for record in records {
            let d = *dim.get_or_insert(record.sentence_vector.len());
            if d == 0 {
                return Err(Error::Validation(format!(
                    "{}: empty sentence vector",
                    record.id
                )));
            }
            if record.token_vectors.is_empty() {
                return Err(Error::Validation(format!(
                    "{}: no token vectors",
                    record.id
                )));
            }
            if record.sentence_vector.len() != d {
                return Err(Error::Validation(format!(
                    "{}: sentence vector dimension {} differs from {d}",
                    record.id,
                    record.sentence_vector.len()
                )));
            }
            check_dims(&record.token_vectors, d)
                .map_err(|e| Error::Validation(format!("{}: {e}", record.id)))?;
            if norm(&record.sentence_vector) == 0.0 {
                return Err(Error::Validation(format!(
                    "{}: zero sentence vector",
                    record.id
                )));
            }
            let bundle = EmbeddingBundle {
                token_vectors: record.token_vectors,
                sentence_vector: record.sentence_vector,
            };
            let duplicate = match record.side {
                Side::Reference => store.reference.insert(record.id.clone(), bundle).is_some(),
                Side::Candidate => store
                    .candidate
                    .insert((record.id.clone(), record.model), bundle)
                    .is_some(),
            };
            if duplicate {
                return Err(Error::Validation(format!(
                    "duplicate {:?} embedding for {}",
                    record.side, record.id
                )));
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut records = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?);
        }
        Self::from_records(records)
    }

    /// Candidate and reference bundles for a sample, preferring a
    /// model-specific candidate entry over a model-less one.
    pub fn pair(&self, id: &str, model: &str) -> Option<(&EmbeddingBundle, &EmbeddingBundle)> {
        let reference = self.reference.get(id)?;
        let candidate = self
            .candidate
            .get(&(id.to_string(), Some(model.to_string())))
            .or_else(|| self.candidate.get(&(id.to_string(), None)))?;
        Some((candidate, reference))
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty() && self.candidate.is_empty()
    }
}
