//! Rule-based format criteria and the compliance rubric.
//!
//! Rubric files are JSON:
//!
//! ```json
//! {"criteria": [{"kind": "numbered_sectioning", "params": {"full_min": 2}}],
//!  "boilerplate_denylist": ["as an ai"]}
//! ```
//!
//! Omitted params take their defaults. Each criterion scores 0, 0.5 or 1; a
//! text that is empty after trimming scores 0 everywhere.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::extraction::{scan, NormalizedMatch};
use crate::lexicon::{normalize_text, Category, Matcher, NormalizedText};

pub const DEFAULT_DENYLIST: &[&str] = &[
    "as an ai",
    "language model",
    "i cannot",
    "i am not a doctor",
    "i'm not a doctor",
    "please consult",
    "disclaimer",
    "here is",
    "here's",
    "hope this helps",
    "作为人工智能",
    "作为ai",
    "语言模型",
    "我不是医生",
    "请咨询",
    "仅供参考",
    "以下是",
    "希望对您有帮助",
    "免责声明",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Compliance {
    None,
    Partial,
    Full,
}

impl Compliance {
    pub fn value(self) -> f64 {
        match self {
            Compliance::None => 0.0,
            Compliance::Partial => 0.5,
            Compliance::Full => 1.0,
        }
    }

    fn from_count(count: usize, full_min: usize, partial_min: usize) -> Self {
        if count >= full_min {
            Compliance::Full
        } else if count >= partial_min {
            Compliance::Partial
        } else {
            Compliance::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    NumberedSectioning,
    AnatomicalMarkers,
    TerminologyDensity,
    LengthBounds,
    BoilerplateAbsence,
}

impl CriterionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionKind::NumberedSectioning => "numbered_sectioning",
            CriterionKind::AnatomicalMarkers => "anatomical_markers",
            CriterionKind::TerminologyDensity => "terminology_density",
            CriterionKind::LengthBounds => "length_bounds",
            CriterionKind::BoilerplateAbsence => "boilerplate_absence",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "numbered_sectioning" => CriterionKind::NumberedSectioning,
            "anatomical_markers" => CriterionKind::AnatomicalMarkers,
            "terminology_density" => CriterionKind::TerminologyDensity,
            "length_bounds" => CriterionKind::LengthBounds,
            "boilerplate_absence" => CriterionKind::BoilerplateAbsence,
            other => return Err(Error::Config(format!("unknown criterion kind {other:?}"))),
        })
    }
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountParams {
    pub full_min: usize,
    pub partial_min: usize,
}

impl Default for CountParams {
    fn default() -> Self {
        CountParams {
            full_min: 2,
            partial_min: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityParams {
    pub full: f64,
    pub partial: f64,
}

impl Default for DensityParams {
    fn default() -> Self {
        DensityParams {
            full: 0.25,
            partial: 0.10,
        }
    }
}

/// Character-count bands; the full band is a ±3x band around a 240-character
/// impression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LengthParams {
    pub full_min: usize,
    pub full_max: usize,
    pub partial_min: usize,
    pub partial_max: usize,
}

impl Default for LengthParams {
    fn default() -> Self {
        LengthParams {
            full_min: 60,
            full_max: 720,
            partial_min: 20,
            partial_max: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Criterion {
    NumberedSectioning(CountParams),
    AnatomicalMarkers(CountParams),
    TerminologyDensity(DensityParams),
    LengthBounds(LengthParams),
    /// Normalized deny-list phrases.
    BoilerplateAbsence(Vec<String>),
}

impl Criterion {
    pub fn kind(&self) -> CriterionKind {
        match self {
            Criterion::NumberedSectioning(_) => CriterionKind::NumberedSectioning,
            Criterion::AnatomicalMarkers(_) => CriterionKind::AnatomicalMarkers,
            Criterion::TerminologyDensity(_) => CriterionKind::TerminologyDensity,
            Criterion::LengthBounds(_) => CriterionKind::LengthBounds,
            Criterion::BoilerplateAbsence(_) => CriterionKind::BoilerplateAbsence,
        }
    }

    fn params_json(&self) -> Value {
        match self {
            Criterion::NumberedSectioning(p) | Criterion::AnatomicalMarkers(p) => {
                serde_json::to_value(p)
            }
            Criterion::TerminologyDensity(p) => serde_json::to_value(p),
            Criterion::LengthBounds(p) => serde_json::to_value(p),
            Criterion::BoilerplateAbsence(_) => Ok(Value::Object(Default::default())),
        }
        .expect("params serialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawCriterion {
    kind: String,
    #[serde(default)]
    params: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRubric {
    criteria: Vec<RawCriterion>,
    #[serde(default)]
    boilerplate_denylist: Option<Vec<String>>,
}

/// Ordered list of format criteria.
#[derive(Debug, Clone, PartialEq)]
pub struct Rubric {
    criteria: Vec<Criterion>,
    denylist: Vec<String>,
}

impl Default for Rubric {
    fn default() -> Self {
        let denylist: Vec<String> = DEFAULT_DENYLIST.iter().map(|s| s.to_string()).collect();
        Rubric {
            criteria: vec![
                Criterion::NumberedSectioning(CountParams::default()),
                Criterion::AnatomicalMarkers(CountParams::default()),
                Criterion::TerminologyDensity(DensityParams::default()),
                Criterion::LengthBounds(LengthParams::default()),
                Criterion::BoilerplateAbsence(normalize_all(&denylist)),
            ],
            denylist,
        }
    }
}

fn normalize_all(phrases: &[String]) -> Vec<String> {
    phrases
        .iter()
        .map(|p| normalize_text(p.trim()))
        .filter(|p| !p.is_empty())
        .collect()
}

fn params<T: serde::de::DeserializeOwned + Default>(kind: &str, value: Value) -> Result<T> {
    if value.is_null() {
        return Ok(T::default());
    }
    serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("bad params for criterion {kind}: {e}")))
}

impl Rubric {
    pub fn new(criteria: Vec<Criterion>) -> Result<Self> {
        if criteria.is_empty() {
            return Err(Error::Config("rubric needs at least one criterion".into()));
        }
        let denylist = criteria
            .iter()
            .find_map(|c| match c {
                Criterion::BoilerplateAbsence(d) => Some(d.clone()),
                _ => None,
            })
            .unwrap_or_default();
        Ok(Rubric { criteria, denylist })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawRubric =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("rubric: {e}")))?;
        let denylist = raw
            .boilerplate_denylist
            .unwrap_or_else(|| DEFAULT_DENYLIST.iter().map(|s| s.to_string()).collect());
        let normalized = normalize_all(&denylist);
        let criteria = raw
            .criteria
            .into_iter()
            .map(|c| {
                let kind = CriterionKind::parse(&c.kind)?;
                Ok(match kind {
                    CriterionKind::NumberedSectioning => {
                        Criterion::NumberedSectioning(params(&c.kind, c.params)?)
                    }
                    CriterionKind::AnatomicalMarkers => {
                        Criterion::AnatomicalMarkers(params(&c.kind, c.params)?)
                    }
                    CriterionKind::TerminologyDensity => {
                        Criterion::TerminologyDensity(params(&c.kind, c.params)?)
                    }
                    CriterionKind::LengthBounds => {
                        Criterion::LengthBounds(params(&c.kind, c.params)?)
                    }
                    CriterionKind::BoilerplateAbsence => {
                        Criterion::BoilerplateAbsence(normalized.clone())
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if criteria.is_empty() {
            return Err(Error::Config("rubric needs at least one criterion".into()));
        }
        Ok(Rubric { criteria, denylist })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let raw = RawRubric {
            criteria: self
                .criteria
                .iter()
                .map(|c| RawCriterion {
                    kind: c.kind().as_str().to_string(),
                    params: c.params_json(),
                })
                .collect(),
            boilerplate_denylist: Some(self.denylist.clone()),
        };
        serde_json::to_string_pretty(&raw).expect("rubric serializes")
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }
}

/// Shared per-text state so the scan runs once for all criteria.
struct TextView<'a, 'm> {
    raw: &'a str,
    normalized: NormalizedText,
    matches: Vec<NormalizedMatch<'m>>,
}

impl<'a, 'm> TextView<'a, 'm> {
    fn new(raw: &'a str, matcher: &'m Matcher) -> Self {
        let normalized = NormalizedText::new(raw);
        let matches = scan(matcher, &normalized);
        TextView {
            raw,
            normalized,
            matches,
        }
    }
}

fn score_view(view: &TextView<'_, '_>, criterion: &Criterion) -> Compliance {
    if view.raw.trim().is_empty() {
        return Compliance::None;
    }
    match criterion {
        Criterion::NumberedSectioning(p) => Compliance::from_count(
            count_enumeration_markers(view.raw),
            p.full_min,
            p.partial_min,
        ),
        Criterion::AnatomicalMarkers(p) => {
            let distinct: BTreeSet<&str> = view
                .matches
                .iter()
                .filter(|m| m.category == Category::Anatomy)
                .map(|m| m.term)
                .collect();
            Compliance::from_count(distinct.len(), p.full_min, p.partial_min)
        }
        Criterion::TerminologyDensity(p) => {
            let total = view
                .normalized
                .chars()
                .iter()
                .filter(|c| !c.is_whitespace())
                .count();
            if total == 0 {
                return Compliance::None;
            }
            let covered: usize = view
                .matches
                .iter()
                .map(|m| m.term.chars().filter(|c| !c.is_whitespace()).count())
                .sum();
            let density = covered as f64 / total as f64;
            if density >= p.full {
                Compliance::Full
            } else if density >= p.partial {
                Compliance::Partial
            } else {
                Compliance::None
            }
        }
        Criterion::LengthBounds(p) => {
            let len = view.raw.trim().chars().count();
            if (p.full_min..=p.full_max).contains(&len) {
                Compliance::Full
            } else if (p.partial_min..=p.partial_max).contains(&len) {
                Compliance::Partial
            } else {
                Compliance::None
            }
        }
        Criterion::BoilerplateAbsence(denylist) => {
            let text = view.normalized.as_string();
            if denylist.iter().any(|phrase| text.contains(phrase.as_str())) {
                Compliance::None
            } else {
                Compliance::Full
            }
        }
    }
}

/// Scores one criterion on `text`: 0, 0.5 or 1.
pub fn score_criterion(text: &str, criterion: &Criterion, matcher: &Matcher) -> f64 {
    score_view(&TextView::new(text, matcher), criterion).value()
}

/// Mean criterion score and the per-criterion vector, in rubric order.
pub fn fcr(text: &str, rubric: &Rubric, matcher: &Matcher) -> (f64, Vec<f64>) {
    let view = TextView::new(text, matcher);
    let scores: Vec<f64> = rubric
        .criteria
        .iter()
        .map(|c| score_view(&view, c).value())
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    (mean, scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerStyle {
    Dot,
    Comma,
    Paren,
    Circled,
}

fn is_clause_boundary(c: char) -> bool {
    c.is_whitespace() || "。；;，,：:！!？?".contains(c)
}

fn ascii_digit(c: char) -> Option<u32> {
    match c {
        '0'..='9' => Some(c as u32 - '0' as u32),
        '０'..='９' => Some(c as u32 - '０' as u32),
        _ => None,
    }
}

/// Recognizes an enumeration marker starting at `chars[i]`.
fn marker_at(chars: &[char], i: usize) -> Option<MarkerStyle> {
    let c = chars[i];
    if ('\u{2460}'..='\u{2473}').contains(&c) {
        return Some(MarkerStyle::Circled);
    }
    if ('\u{2474}'..='\u{2487}').contains(&c) {
        return Some(MarkerStyle::Paren);
    }
    let digits_from = |start: usize| {
        let mut j = start;
        while j < chars.len() && j - start < 3 && ascii_digit(chars[j]).is_some() {
            j += 1;
        }
        (j > start).then_some(j)
    };
    if c == '(' || c == '（' {
        let end = digits_from(i + 1)?;
        return matches!(chars.get(end), Some(')') | Some('）')).then_some(MarkerStyle::Paren);
    }
    let end = digits_from(i)?;
    match chars.get(end) {
        Some('、') => Some(MarkerStyle::Comma),
        Some('.') | Some('．') => {
            let decimal = chars.get(end + 1).and_then(|&n| ascii_digit(n)).is_some();
            (!decimal).then_some(MarkerStyle::Dot)
        }
        _ => None,
    }
}

/// Largest number of markers sharing one style that open a line or clause.
fn count_enumeration_markers(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = [0usize; 4];
    for i in 0..chars.len() {
        if i > 0 && !is_clause_boundary(chars[i - 1]) {
            continue;
        }
        if let Some(style) = marker_at(&chars, i) {
            counts[style as usize] += 1;
        }
    }
    counts.into_iter().max().unwrap_or(0)
}
