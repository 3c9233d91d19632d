//! Medical term dictionaries and the longest-match automaton built from them.
//!
//! Term files are UTF-8, one entry per line as `term[<TAB>category]`. Lines
//! starting with `#` and blank lines are skipped. Untagged terms are
//! `general`. When the same normalized term appears more than once, the
//! first category seen wins.

mod matcher;
mod normalize;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use matcher::{build_matcher, Matcher, TermMatch};
pub use normalize::{normalize_text, NormalizedText};

const BUILTIN_LEXICON: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Anatomy,
    Tracer,
    Pathology,
    General,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Anatomy => "anatomy",
            Category::Tracer => "tracer",
            Category::Pathology => "pathology",
            Category::General => "general",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "anatomy" => Ok(Category::Anatomy),
            "tracer" => Ok(Category::Tracer),
            "pathology" => Ok(Category::Pathology),
            "general" | "" => Ok(Category::General),
            other => Err(format!("unknown term category {other:?}")),
        }
    }
}

/// A normalized, deduplicated term dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    terms: BTreeMap<String, Category>,
    sources: Vec<String>,
}

impl Lexicon {
    /// Builds a lexicon from raw `(term, category)` pairs, normalizing each
    /// term. Terms that are empty after normalization are dropped.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Category)>,
        S: AsRef<str>,
    {
        let mut lexicon = Lexicon {
            terms: BTreeMap::new(),
            sources: Vec::new(),
        };
        for (term, category) in entries {
            lexicon.insert(term.as_ref(), category);
        }
        lexicon.ensure_non_empty()?;
        Ok(lexicon)
    }

    /// The dictionary shipped with the crate (anatomy, tracer, pathology and
    /// general PET/CT vocabulary in Chinese and English).
    pub fn builtin() -> Self {
        let mut lexicon = Lexicon {
            terms: BTreeMap::new(),
            sources: vec!["builtin".to_string()],
        };
        let entries =
            parse_entries(BUILTIN_LEXICON, Path::new("builtin")).expect("builtin lexicon parses");
        for (term, category) in entries {
            lexicon.insert(&term, category);
        }
        lexicon
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN_LEXICON
    }

    fn insert(&mut self, raw: &str, category: Category) {
        let term = normalize_text(raw.trim());
        if term.trim().is_empty() {
            return;
        }
        self.terms.entry(term).or_insert(category);
    }

    fn ensure_non_empty(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Validation("lexicon contains no terms".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.contains_key(term)
    }

    pub fn category(&self, term: &str) -> Option<Category> {
        self.terms.get(term).copied()
    }

    /// Terms in sorted order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, Category)> {
        self.terms.iter().map(|(t, c)| (t.as_str(), *c))
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    /// SHA-256 over the sorted `term<TAB>category` listing.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for (term, category) in self.iter() {
            hasher.update(term.as_bytes());
            hasher.update(b"\t");
            hasher.update(category.as_str().as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn parse_entries(text: &str, path: &Path) -> Result<Vec<(String, Category)>> {
    let mut entries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (term, category) = match line.split_once('\t') {
            Some((term, tag)) => {
                let category = tag.parse::<Category>().map_err(|message| Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message,
                })?;
                (term, category)
            }
            None => (line, Category::General),
        };
        entries.push((term.to_string(), category));
    }
    Ok(entries)
}

/// Loads and merges term files in order. The merged lexicon must be non-empty.
pub fn load_lexicon<P: AsRef<Path>>(paths: &[P]) -> Result<Lexicon> {
    let mut lexicon = Lexicon {
        terms: BTreeMap::new(),
        sources: Vec::new(),
    };
    for path in paths {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (term, category) in parse_entries(&text, path)? {
            lexicon.insert(&term, category);
        }
        lexicon.sources.push(path.display().to_string());
    }
    lexicon.ensure_non_empty()?;
    Ok(lexicon)
}

/// Convenience wrapper: builtin lexicon when no paths are given.
pub fn load_or_builtin(paths: &[PathBuf]) -> Result<Lexicon> {
    if paths.is_empty() {
        Ok(Lexicon::builtin())
    } else {
        load_lexicon(paths)
    }
}
