//! End-to-end evaluation: load inputs, score every candidate, write the
//! per-sample and aggregate artifacts plus a manifest.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::analysis::{
    aggregate_leaderboard, correlation_by_model, correlation_matrix, distribution_stats,
    score_sample, stratify_by_tracer, CorrelationLevel, CorrelationMatrix, LeaderboardRow, Metric,
    SampleScore, ScoringContext,
};
use crate::clinical::{Rubric, UerSource};
use crate::corpus::{load_corpus, Corpus, Split};
use crate::error::{Error, Result};
use crate::lexicon::{load_or_builtin, Matcher};
use crate::nlg::{EmbeddingStore, Scheme};
use crate::runner::{
    generate_candidates, load_candidates, Candidate, EndpointConfig, GenerationFailure, Outcome,
};

pub const SCORES_FILE: &str = "scores.jsonl";
pub const LEADERBOARD_FILE: &str = "leaderboard.csv";
pub const STRATIFICATION_FILE: &str = "stratification.csv";
pub const DISTRIBUTION_FILE: &str = "distribution.csv";
pub const CORRELATION_SAMPLE_FILE: &str = "correlation_sample.csv";
pub const CORRELATION_WITHIN_MODEL_FILE: &str = "correlation_within_model.csv";
pub const CORRELATION_MODEL_FILE: &str = "correlation_model.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// How sample-level correlations are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pool {
    /// Every (report, model) score is one observation.
    #[default]
    Sample,
    /// One matrix per model, computed over that model's samples only.
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    File(PathBuf),
    Endpoint {
        config: PathBuf,
        template: PathBuf,
        cache: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateConfig {
    pub corpus: PathBuf,
    /// Empty means the builtin vocabulary.
    pub lexicons: Vec<PathBuf>,
    pub rubric: Option<PathBuf>,
    pub candidates: CandidateSource,
    pub embeddings: Option<PathBuf>,
    pub out: PathBuf,
    pub scheme: Scheme,
    pub uer_source: UerSource,
    pub pool: Pool,
    pub seed: u64,
    /// Worker threads; does not influence any output value.
    #[serde(skip)]
    pub jobs: usize,
}

impl EvaluateConfig {
    pub fn new(
        corpus: impl Into<PathBuf>,
        candidates: impl Into<PathBuf>,
        out: impl Into<PathBuf>,
    ) -> Self {
        EvaluateConfig {
            corpus: corpus.into(),
            lexicons: Vec::new(),
            rubric: None,
            candidates: CandidateSource::File(candidates.into()),
            embeddings: None,
            out: out.into(),
            scheme: Scheme::default(),
            uer_source: UerSource::default(),
            pool: Pool::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

/// A problem with one candidate that was skipped rather than aborting the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftError {
    pub id: String,
    pub model: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct EvaluateSummary {
    pub scores: Vec<SampleScore>,
    pub leaderboard: Vec<LeaderboardRow>,
    pub soft_errors: Vec<SoftError>,
    pub outputs: Vec<PathBuf>,
}

/// Fails with a configuration error unless `path` can be opened for reading.
pub fn check_readable(path: &Path, what: &str) -> Result<()> {
    if path.is_dir() {
        return Err(Error::Config(format!(
            "{what} {} is a directory",
            path.display()
        )));
    }
    std::fs::File::open(path)
        .map(drop)
        .map_err(|e| Error::Config(format!("cannot read {what} {}: {e}", path.display())))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Scores every candidate against its test-split reference, in candidate
/// order. Candidates without a test reference, duplicates, and per-sample
/// scoring failures become soft errors.
pub fn score_candidates(
    corpus: &Corpus,
    candidates: &[Candidate],
    ctx: &ScoringContext<'_>,
    jobs: usize,
) -> Result<(Vec<SampleScore>, Vec<SoftError>)> {
    let mut soft = Vec::new();
    let mut seen = HashSet::new();
    let mut work = Vec::with_capacity(candidates.len());
    for cand in candidates {
        let reject = |message: String| SoftError {
            id: cand.report_id.clone(),
            model: cand.model_name.clone(),
            message,
        };
        match corpus.get(&cand.report_id) {
            None => soft.push(reject("no report with this id".into())),
            Some(r) if r.split != Split::Test => soft.push(reject(format!(
                "report is in the {} split",
                r.split.as_str()
            ))),
            Some(r) => {
                if seen.insert((cand.report_id.as_str(), cand.model_name.as_str())) {
                    work.push((r, cand));
                } else {
                    soft.push(reject("duplicate candidate for this model".into()));
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<SampleScore>> = pool.install(|| {
        work.par_iter()
            .map(|(report, cand)| score_sample(report, cand, ctx))
            .collect()
    });

    let mut scores = Vec::with_capacity(results.len());
    for ((_, cand), result) in work.iter().zip(results) {
        match result {
            Ok(s) => scores.push(s),
            Err(e) => soft.push(SoftError {
                id: cand.report_id.clone(),
                model: cand.model_name.clone(),
                message: e.to_string(),
            }),
        }
    }
    Ok((scores, soft))
}

fn fmt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

fn csv_bytes(rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    w.into_inner().expect("in-memory csv flush")
}

pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> Vec<u8> {
    let mut out = vec![std::iter::once("model")
        .chain(Metric::ALL.iter().map(|m| m.name()))
        .chain(std::iter::once("n"))
        .map(str::to_string)
        .collect()];
    for row in rows {
        let mut line = vec![row.model_name.clone()];
        line.extend(Metric::ALL.iter().map(|m| fmt4(row.get(*m))));
        line.push(row.n.to_string());
        out.push(line);
    }
    csv_bytes(out)
}

pub fn stratification_csv(scores: &[SampleScore]) -> Vec<u8> {
    let matrix = stratify_by_tracer(scores);
    let mut header = vec!["model".to_string(), "metric".to_string()];
    header.extend(matrix.tracers.iter().cloned());
    let mut out = vec![header];
    for model in &matrix.models {
        for metric in Metric::ALL {
            let mut line = vec![model.clone(), metric.name().to_string()];
            line.extend(
                matrix
                    .tracers
                    .iter()
                    .map(|t| fmt4(matrix.cell(model, t, metric))),
            );
            out.push(line);
        }
    }
    csv_bytes(out)
}

pub fn distribution_csv(scores: &[SampleScore]) -> Vec<u8> {
    let mut out = vec![["model", "metric", "n", "min", "q1", "median", "q3", "max"]
        .map(str::to_string)
        .to_vec()];
    for row in distribution_stats(scores) {
        let s = row.stats;
        out.push(vec![
            row.model_name,
            row.metric.name().to_string(),
            row.n.to_string(),
            fmt4(Some(s.min)),
            fmt4(Some(s.q1)),
            fmt4(Some(s.median)),
            fmt4(Some(s.q3)),
            fmt4(Some(s.max)),
        ]);
    }
    csv_bytes(out)
}

fn matrix_rows(prefix: Option<&str>, matrix: &CorrelationMatrix) -> Vec<Vec<String>> {
    matrix
        .metrics
        .iter()
        .zip(&matrix.values)
        .map(|(metric, values)| {
            prefix
                .map(str::to_string)
                .into_iter()
                .chain(std::iter::once(metric.name().to_string()))
                .chain(values.iter().map(|v| fmt4(*v)))
                .collect()
        })
        .collect()
}

fn matrix_header(with_model: bool) -> Vec<String> {
    let lead: &[&str] = if with_model {
        &["model", "metric"]
    } else {
        &["metric"]
    };
    lead.iter()
        .copied()
        .chain(Metric::ALL.iter().map(|m| m.name()))
        .map(str::to_string)
        .collect()
}

pub fn correlation_csv(matrix: &CorrelationMatrix) -> Vec<u8> {
    let mut out = vec![matrix_header(false)];
    out.extend(matrix_rows(None, matrix));
    csv_bytes(out)
}

pub fn correlation_by_model_csv(matrices: &BTreeMap<String, CorrelationMatrix>) -> Vec<u8> {
    let mut out = vec![matrix_header(true)];
    for (model, matrix) in matrices {
        out.extend(matrix_rows(Some(model), matrix));
    }
    csv_bytes(out)
}

pub fn scores_jsonl(scores: &[SampleScore]) -> Vec<u8> {
    let mut out = String::new();
    for s in scores {
        out.push_str(&serde_json::to_string(s).expect("score serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes every artifact except the manifest; returns the paths written.
pub fn write_outputs(scores: &[SampleScore], pool: Pool, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    write_file(dir, SCORES_FILE, &scores_jsonl(scores), &mut written)?;
    let leaderboard = aggregate_leaderboard(scores);
    write_file(
        dir,
        LEADERBOARD_FILE,
        &leaderboard_csv(&leaderboard),
        &mut written,
    )?;
    write_file(
        dir,
        STRATIFICATION_FILE,
        &stratification_csv(scores),
        &mut written,
    )?;
    write_file(
        dir,
        DISTRIBUTION_FILE,
        &distribution_csv(scores),
        &mut written,
    )?;
    match pool {
        Pool::Sample => {
            let m = correlation_matrix(scores, &Metric::ALL, CorrelationLevel::Sample);
            write_file(
                dir,
                CORRELATION_SAMPLE_FILE,
                &correlation_csv(&m),
                &mut written,
            )?;
        }
        Pool::Model => {
            let m = correlation_by_model(scores, &Metric::ALL);
            write_file(
                dir,
                CORRELATION_WITHIN_MODEL_FILE,
                &correlation_by_model_csv(&m),
                &mut written,
            )?;
        }
    }
    let m = correlation_matrix(scores, &Metric::ALL, CorrelationLevel::Model);
    write_file(
        dir,
        CORRELATION_MODEL_FILE,
        &correlation_csv(&m),
        &mut written,
    )?;
    Ok(written)
}

struct LoadedCandidates {
    candidates: Vec<Candidate>,
    soft_errors: Vec<SoftError>,
    inputs: serde_json::Value,
}

fn load_candidate_source(source: &CandidateSource, corpus: &Corpus) -> Result<LoadedCandidates> {
    match source {
        CandidateSource::File(path) => Ok(LoadedCandidates {
            candidates: load_candidates(path)?,
            soft_errors: Vec::new(),
            inputs: json!({"candidates": {"path": path, "sha256": sha256_file(path)?}}),
        }),
        CandidateSource::Endpoint {
            config,
            template,
            cache,
        } => {
            let endpoint = EndpointConfig::load(config)?;
            let template_text =
                std::fs::read_to_string(template).map_err(|e| Error::io(template, e))?;
            let reports: Vec<_> = corpus.split(Split::Test).collect();
            let outcomes = generate_candidates(&reports, &endpoint, &template_text, cache)?;
            let (candidates, failures) = split_outcomes(outcomes);
            Ok(LoadedCandidates {
                candidates,
                soft_errors: failures
                    .into_iter()
                    .map(|f| SoftError {
                        id: f.report_id,
                        model: f.model_name,
                        message: format!(
                            "generation failed after {} attempts: {}",
                            f.attempts, f.message
                        ),
                    })
                    .collect(),
                inputs: json!({
                    "endpoint_config": {"path": config, "sha256": sha256_file(config)?},
                    "prompt_template": {"path": template, "sha256": sha256_file(template)?},
                    "model": endpoint.model_name,
                }),
            })
        }
    }
}

pub fn split_outcomes(outcomes: Vec<Outcome>) -> (Vec<Candidate>, Vec<GenerationFailure>) {
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Outcome::Generated(c) => candidates.push(c),
            Outcome::Failed(f) => failures.push(f),
        }
    }
    (candidates, failures)
}

/// Verifies every configured input path is readable before any work starts.
pub fn check_inputs(cfg: &EvaluateConfig) -> Result<()> {
    check_readable(&cfg.corpus, "corpus")?;
    for path in &cfg.lexicons {
        check_readable(path, "lexicon")?;
    }
    if let Some(path) = &cfg.rubric {
        check_readable(path, "rubric")?;
    }
    if let Some(path) = &cfg.embeddings {
        check_readable(path, "embeddings")?;
    }
    match &cfg.candidates {
        CandidateSource::File(path) => check_readable(path, "candidates")?,
        CandidateSource::Endpoint {
            config, template, ..
        } => {
            check_readable(config, "endpoint config")?;
            check_readable(template, "prompt template")?;
        }
    }
    Ok(())
}

/// Runs the full evaluation described by `cfg` and writes its outputs.
pub fn evaluate(cfg: &EvaluateConfig) -> Result<EvaluateSummary> {
    check_inputs(cfg)?;
    let corpus = load_corpus(&cfg.corpus)?;
    let lexicon = load_or_builtin(&cfg.lexicons)?;
    let matcher = Matcher::new(&lexicon);
    let rubric = match &cfg.rubric {
        Some(path) => Rubric::load(path)?,
        None => Rubric::default(),
    };
    let embeddings = cfg
        .embeddings
        .as_ref()
        .map(EmbeddingStore::load)
        .transpose()?;
    let loaded = load_candidate_source(&cfg.candidates, &corpus)?;

    let ctx = ScoringContext {
        matcher: &matcher,
        rubric: &rubric,
        scheme: cfg.scheme,
        uer_source: cfg.uer_source,
        embeddings: embeddings.as_ref(),
    };
    let (scores, mut soft_errors) = score_candidates(&corpus, &loaded.candidates, &ctx, cfg.jobs)?;
    let mut all_soft = loaded.soft_errors;
    all_soft.append(&mut soft_errors);

    let mut outputs = write_outputs(&scores, cfg.pool, &cfg.out)?;

    let mut inputs = json!({
        "corpus": {"path": cfg.corpus, "sha256": sha256_file(&cfg.corpus)?},
        "lexicons": cfg.lexicons.iter().map(|p| Ok(json!({"path": p, "sha256": sha256_file(p)?})))
            .collect::<Result<Vec<_>>>()?,
    });
    if let Some(path) = &cfg.rubric {
        inputs["rubric"] = json!({"path": path, "sha256": sha256_file(path)?});
    }
    if let Some(path) = &cfg.embeddings {
        inputs["embeddings"] = json!({"path": path, "sha256": sha256_file(path)?});
    }
    if let (Some(dst), Some(src)) = (inputs.as_object_mut(), loaded.inputs.as_object()) {
        dst.extend(src.clone());
    }

    let rubric_value: serde_json::Value =
        serde_json::from_str(&rubric.to_json()).expect("rubric json round-trips");
    let settings = json!({
        "scheme": cfg.scheme,
        "uer_source": cfg.uer_source,
        "pool": cfg.pool,
        "seed": cfg.seed,
    });
    // content-addressed: identical inputs and settings give the same hash
    // regardless of paths or thread count
    let fingerprint_inputs = json!({
        "settings": settings,
        "rubric": rubric_value,
        "lexicon_sha256": lexicon.fingerprint(),
        "input_hashes": collect_hashes(&inputs),
    });
    let config_sha256 = hex::encode(Sha256::digest(fingerprint_inputs.to_string().as_bytes()));

    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config_sha256": config_sha256,
        "config": cfg,
        "settings": settings,
        "rubric": rubric_value,
        "lexicon": {
            "sha256": lexicon.fingerprint(),
            "terms": lexicon.len(),
            "sources": lexicon.sources(),
        },
        "inputs": inputs,
        "counts": {
            "candidates": loaded.candidates.len(),
            "scored": scores.len(),
            "soft_errors": all_soft.len(),
        },
        "runtime": {"jobs": cfg.jobs},
        "soft_errors": all_soft,
        "outputs": outputs.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy()).collect::<Vec<_>>(),
    });
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(&cfg.out, MANIFEST_FILE, &manifest_bytes, &mut outputs)?;

    Ok(EvaluateSummary {
        leaderboard: aggregate_leaderboard(&scores),
        scores,
        soft_errors: all_soft,
        outputs,
    })
}

fn collect_hashes(value: &serde_json::Value) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![value];
    while let Some(v) = stack.pop() {
        match v {
            serde_json::Value::Object(map) => {
                if let Some(serde_json::Value::String(h)) = map.get("sha256") {
                    out.push(h.clone());
                }
                stack.extend(map.values());
            }
            serde_json::Value::Array(items) => stack.extend(items),
            _ => {}
        }
    }
    out.sort();
    out
}

/// Candidate generation for the test split of a corpus.
pub fn generate(
    corpus_path: &Path,
    endpoint_path: &Path,
    template_path: &Path,
    cache_dir: &Path,
) -> Result<(Vec<Candidate>, Vec<GenerationFailure>)> {
    check_readable(corpus_path, "corpus")?;
    check_readable(endpoint_path, "endpoint config")?;
    check_readable(template_path, "prompt template")?;
    let corpus = load_corpus(corpus_path)?;
    let endpoint = EndpointConfig::load(endpoint_path)?;
    let template =
        std::fs::read_to_string(template_path).map_err(|e| Error::io(template_path, e))?;
    let reports: Vec<_> = corpus.split(Split::Test).collect();
    let outcomes = generate_candidates(&reports, &endpoint, &template, cache_dir)?;
    Ok(split_outcomes(outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::LeaderboardRow;

    #[test]
    fn leaderboard_layout() {
        let rows = vec![LeaderboardRow {
            model_name: "a,b".into(),
            means: [
                Some(0.5),
                Some(1.0 / 3.0),
                None,
                None,
                None,
                Some(1.0),
                Some(0.0),
                Some(0.25),
            ],
            n: 3,
        }];
        let text = String::from_utf8(leaderboard_csv(&rows)).unwrap();
        assert_eq!(
            text,
            "model,bleu4,rouge_l,meteor,bertscore,sbert,ecr,uer,fcr,n\n\
             \"a,b\",0.5000,0.3333,,,,1.0000,0.0000,0.2500,3\n"
        );
    }

    #[test]
    fn unreadable_input_is_config_error() {
        let err = check_readable(Path::new("/definitely/not/here.jsonl"), "corpus").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
