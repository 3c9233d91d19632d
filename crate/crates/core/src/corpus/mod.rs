//! Report corpora: JSONL loading and writing, patient-level split checks and
//! the synthetic fixture generator.

mod fixture;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fixture::{
    generate_fixture, load_sidecar, write_sidecar, Fixture, FixtureEntities, FixtureSpec, SplitMix,
};

pub const UNKNOWN_TRACER: &str = "unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn unknown_tracer() -> String {
    UNKNOWN_TRACER.to_string()
}

/// One findings/impression record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub patient_id: String,
    #[serde(default = "unknown_tracer")]
    pub tracer: String,
    pub findings: String,
    pub impression: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub reports: Vec<Report>,
    pub source_path: String,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and blank texts.
    pub fn new(reports: Vec<Report>, source_path: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(reports.len());
        for report in &reports {
            check_texts(report).map_err(Error::Validation)?;
            if !seen.insert(report.id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate report id {:?}",
                    report.id
                )));
            }
        }
        Ok(Corpus {
            reports,
            source_path: source_path.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.id == id)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Report> {
        self.reports.iter().filter(move |r| r.split == split)
    }

    /// Serializes as JSONL in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for report in &self.reports {
            out.push_str(&serde_json::to_string(report).expect("report serializes"));
            out.push('\n');
        }
        out
    }
}

fn check_texts(report: &Report) -> std::result::Result<(), String> {
    if report.findings.trim().is_empty() {
        return Err(format!("report {:?} has empty findings", report.id));
    }
    if report.impression.trim().is_empty() {
        return Err(format!("report {:?} has empty impression", report.id));
    }
    Ok(())
}

/// Reads a JSONL corpus. Blank lines are skipped; unknown keys are ignored.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reports = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_error = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let report: Report = serde_json::from_str(&line).map_err(|e| parse_error(e.to_string()))?;
        check_texts(&report).map_err(parse_error)?;
        if !seen.insert(report.id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate report id {:?} at line {}",
                report.id,
                idx + 1
            )));
        }
        reports.push(report);
    }
    Ok(Corpus {
        reports,
        source_path: path.display().to_string(),
    })
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(corpus.to_jsonl().as_bytes())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Patients with reports in more than one split, sorted.
    pub violations: Vec<String>,
}

impl SplitReport {
    pub fn is_patient_disjoint(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Validation => self.validation,
            Split::Test => self.test,
        }
    }
}

/// Counts reports per split and lists patients that leak across splits.
pub fn validate_split(corpus: &Corpus) -> Result<SplitReport> {
    let mut splits_by_patient: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    let mut report = SplitReport {
        train: 0,
        validation: 0,
        test: 0,
        violations: Vec::new(),
    };
    for r in &corpus.reports {
        if r.patient_id.trim().is_empty() {
            return Err(Error::Validation(format!(
                "report {:?} has empty patient_id",
                r.id
            )));
        }
        match r.split {
            Split::Train => report.train += 1,
            Split::Validation => report.validation += 1,
            Split::Test => report.test += 1,
        }
        splits_by_patient
            .entry(&r.patient_id)
            .or_default()
            .insert(r.split);
    }
    report.violations = splits_by_patient
        .into_iter()
        .filter(|(_, splits)| splits.len() > 1)
        .map(|(patient, _)| patient.to_string())
        .collect();
    Ok(report)
}
