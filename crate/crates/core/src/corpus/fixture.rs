//! Synthetic findings/impression corpora with planted, recorded entities.
//!
//! Templates only use connective text that contains no lexicon term and no
//! character sequence that could join with a planted term into a longer one,
//! so the planted entity lists are exactly what extraction should recover.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Report, Split};
use crate::error::{Error, Result};
use crate::lexicon::normalize_text;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMix {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitMix {
    fn default() -> Self {
        SplitMix {
            train: 8.0,
            validation: 1.0,
            test: 1.0,
        }
    }
}

impl SplitMix {
    pub fn test_only() -> Self {
        SplitMix {
            train: 0.0,
            validation: 0.0,
            test: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub n_reports: usize,
    pub n_patients: usize,
    pub tracer_mix: BTreeMap<String, f64>,
    pub split_mix: SplitMix,
}

impl FixtureSpec {
    pub fn new(seed: u64, n_reports: usize, n_patients: usize) -> Self {
        FixtureSpec {
            seed,
            n_reports,
            n_patients,
            tracer_mix: default_tracer_mix(),
            split_mix: SplitMix::default(),
        }
    }
}

pub fn default_tracer_mix() -> BTreeMap<String, f64> {
    [
        ("FDG", 85.0),
        ("PSMA", 4.0),
        ("DOTATATE", 3.0),
        ("amyloid", 3.0),
        ("tau", 3.0),
        ("dopamine", 2.0),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Sidecar record: planted normalized entities for one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntities {
    pub id: String,
    pub findings_entities: Vec<String>,
    pub impression_entities: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub corpus: Corpus,
    pub entities: Vec<FixtureEntities>,
}

struct Vocabulary {
    anatomy: &'static [&'static str],
    pathology: &'static [&'static str],
    lesion: &'static [&'static str],
    normal: &'static [&'static str],
    intro: &'static str,
    intro_unknown: &'static str,
    impression: &'static str,
    verdicts: &'static [&'static str],
    closing: &'static [&'static str],
    // English separates a numbering marker from its item with a space.
    marker_space: bool,
}

const ZH: Vocabulary = Vocabulary {
    anatomy: &[
        "右肺上叶",
        "右肺中叶",
        "右肺下叶",
        "左肺上叶",
        "左肺下叶",
        "纵隔",
        "肺门",
        "肝脏",
        "脾脏",
        "胰腺",
        "肾上腺",
        "甲状腺",
        "前列腺",
        "乳腺",
        "胃",
        "结肠",
        "直肠",
        "骨骼",
        "椎体",
        "脑",
        "颈部",
        "腋窝",
        "腹膜后",
        "盆腔",
        "淋巴结",
        "肺",
    ],
    pathology: &[
        "肺癌",
        "转移",
        "结节",
        "肿块",
        "淋巴瘤",
        "骨转移",
        "肝转移",
        "炎症",
        "钙化",
        "积液",
        "增生",
        "肉芽肿",
        "恶性肿瘤",
        "术后改变",
    ],
    lesion: &[
        "{anat}见{path}，大小约{size}cm，SUVmax约{suv}。",
        "{anat}见一{path}影，SUVmax约{suv}。",
        "{anat}可见{path}，范围约{size}cm，SUVmax约{suv}。",
        "{anat}见{path}，放射性摄取增高，SUVmax约{suv}。",
        "{anat}见{path}，呈高代谢，SUVmax约{suv}。",
    ],
    normal: &["{anat}未见明显异常。", "{anat}形态大小未见异常。"],
    intro: "本次检查采用{tracer}示踪剂显像，图像质量良好。",
    intro_unknown: "本次检查采用示踪剂显像，图像质量良好。",
    impression: "{marker}{anat}见{path}，SUVmax约{suv}，{verdict}。",
    verdicts: &["考虑恶性可能", "考虑良性病变", "建议随访观察"],
    closing: &["其余区域未见明显异常。", "建议定期随访复查。"],
    marker_space: false,
};

const EN: Vocabulary = Vocabulary {
    anatomy: &[
        "right upper lobe",
        "right lower lobe",
        "left upper lobe",
        "left lower lobe",
        "mediastinum",
        "hilum",
        "liver",
        "spleen",
        "pancreas",
        "adrenal gland",
        "thyroid",
        "prostate",
        "breast",
        "stomach",
        "colon",
        "rectum",
        "skeleton",
        "vertebra",
        "brain",
        "neck",
        "axilla",
        "retroperitoneum",
        "pelvis",
        "lymph node",
        "lung",
    ],
    pathology: &[
        "lung cancer",
        "metastasis",
        "nodule",
        "mass",
        "lymphoma",
        "bone metastasis",
        "inflammation",
        "calcification",
        "effusion",
        "hyperplasia",
        "granuloma",
    ],
    lesion: &[
        "A {path} is seen in the {anat}, measuring {size} cm with SUVmax {suv}. ",
        "The {anat} shows {path} with SUVmax of {suv}. ",
        "Hypermetabolic {path} is noted in the {anat}, SUVmax {suv}. ",
    ],
    normal: &[
        "No abnormal finding is noted in the {anat}. ",
        "The {anat} appears unremarkable. ",
    ],
    intro: "The study was performed with {tracer} as the imaging agent. ",
    intro_unknown: "The study was performed with the scheduled imaging agent. ",
    impression: "{marker}{Path} in the {anat}, SUVmax {suv}, {verdict}.",
    verdicts: &[
        "suspicious for malignant disease",
        "likely benign",
        "follow-up advised",
    ],
    closing: &[
        "No other abnormal finding is identified.",
        "Clinical follow-up is recommended.",
    ],
    marker_space: true,
};

/// (surface text, planted normalized term) for known tracer tags.
fn tracer_surface(tag: &str, zh: bool) -> Option<(&'static str, &'static str)> {
    let found = match tag.to_ascii_lowercase().as_str() {
        "fdg" => ("18F-FDG", "fdg"),
        "psma" => ("68Ga-PSMA", "psma"),
        "dotatate" => ("68Ga-DOTATATE", "dotatate"),
        "tau" => ("tau", "tau"),
        "amyloid" if zh => ("淀粉样蛋白", "淀粉样蛋白"),
        "amyloid" => ("amyloid", "amyloid"),
        "dopamine" if zh => ("多巴胺", "多巴胺"),
        "dopamine" => ("dopamine", "dopamine"),
        _ => return None,
    };
    Some(found)
}

const ZH_FRACTION: f64 = 0.7;
const FINDINGS_TARGET: (usize, usize) = (740, 960);
const IMPRESSION_TARGET: (usize, usize) = (190, 270);

fn marker(style: usize, n: usize) -> String {
    match style {
        0 => format!("{n}."),
        1 => format!("{n}、"),
        2 => format!("({n})"),
        _ => char::from_u32(0x2460 + (n as u32 - 1).min(19))
            .unwrap()
            .to_string(),
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Lesion {
    anatomy: &'static str,
    pathology: &'static str,
    suv: f64,
}

fn weighted_index(weights: &[f64], what: &str) -> Result<WeightedIndex<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Argument(format!(
            "{what} weights must be finite and non-negative"
        )));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Argument(format!("{what} weights sum to zero")));
    }
    WeightedIndex::new(weights).map_err(|e| Error::Argument(format!("{what}: {e}")))
}

/// Generates a deterministic synthetic corpus with a planted-entity sidecar.
pub fn generate_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    if spec.n_patients == 0 {
        return Err(Error::Argument("n_patients must be at least 1".into()));
    }
    let tracer_tags: Vec<&String> = spec.tracer_mix.keys().collect();
    let tracer_weights: Vec<f64> = spec.tracer_mix.values().copied().collect();
    let tracer_dist = weighted_index(&tracer_weights, "tracer")?;
    let split_dist = weighted_index(
        &[
            spec.split_mix.train,
            spec.split_mix.validation,
            spec.split_mix.test,
        ],
        "split",
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let patient_splits: Vec<Split> = (0..spec.n_patients)
        .map(|_| Split::ALL[split_dist.sample(&mut rng)])
        .collect();

    let mut reports = Vec::with_capacity(spec.n_reports);
    let mut entities = Vec::with_capacity(spec.n_reports);
    for i in 0..spec.n_reports {
        let patient = if i < spec.n_patients {
            i
        } else {
            rng.gen_range(0..spec.n_patients)
        };
        let tracer = tracer_tags[tracer_dist.sample(&mut rng)].clone();
        let id = format!("R{:06}", i + 1);
        let (findings, impression, planted) = synthesize(&mut rng, &tracer);
        entities.push(FixtureEntities {
            id: id.clone(),
            findings_entities: planted.0.into_iter().collect(),
            impression_entities: planted.1.into_iter().collect(),
        });
        reports.push(Report {
            id,
            patient_id: format!("P{:05}", patient + 1),
            tracer,
            findings,
            impression,
            split: patient_splits[patient],
        });
    }
    let corpus = Corpus::new(reports, format!("fixture:seed={}", spec.seed))?;
    Ok(Fixture { corpus, entities })
}

type Planted = (BTreeSet<String>, BTreeSet<String>);

fn synthesize(rng: &mut ChaCha8Rng, tracer: &str) -> (String, String, Planted) {
    let zh = rng.gen_bool(ZH_FRACTION);
    let vocab = if zh { &ZH } else { &EN };
    let mut findings_terms = BTreeSet::new();
    let mut impression_terms = BTreeSet::new();
    let plant = |set: &mut BTreeSet<String>, surface: &str| {
        set.insert(normalize_text(surface));
    };

    let mut findings = match tracer_surface(tracer, zh) {
        Some((surface, term)) => {
            findings_terms.insert(term.to_string());
            vocab.intro.replace("{tracer}", surface)
        }
        None => vocab.intro_unknown.to_string(),
    };

    let mut anatomy: Vec<&'static str> = vocab.anatomy.to_vec();
    anatomy.shuffle(rng);
    let mut anatomy = anatomy.into_iter().cycle();

    let n_lesions = rng.gen_range(5..=9);
    let mut lesions = Vec::with_capacity(n_lesions);
    for _ in 0..n_lesions {
        let lesion = Lesion {
            anatomy: anatomy.next().unwrap(),
            pathology: vocab.pathology.choose(rng).unwrap(),
            suv: rng.gen_range(1.5..25.0),
        };
        let template = *vocab.lesion.choose(rng).unwrap();
        let sentence = template
            .replace("{anat}", lesion.anatomy)
            .replace("{path}", lesion.pathology)
            .replace("{size}", &format!("{:.1}", rng.gen_range(0.5..5.0)))
            .replace("{suv}", &format!("{:.1}", lesion.suv));
        plant(&mut findings_terms, lesion.anatomy);
        plant(&mut findings_terms, lesion.pathology);
        plant(&mut findings_terms, "SUVmax");
        if template.contains("放射性摄取") {
            plant(&mut findings_terms, "放射性摄取");
        }
        if template.contains("高代谢") {
            plant(&mut findings_terms, "高代谢");
        }
        if template.starts_with("Hypermetabolic") {
            plant(&mut findings_terms, "hypermetabolic");
        }
        findings.push_str(&sentence);
        lesions.push(lesion);
    }

    let findings_target = rng.gen_range(FINDINGS_TARGET.0..=FINDINGS_TARGET.1);
    while findings.chars().count() < findings_target {
        let organ = anatomy.next().unwrap();
        let template = vocab.normal.choose(rng).unwrap();
        findings.push_str(&template.replace("{anat}", organ));
        plant(&mut findings_terms, organ);
    }
    let findings = findings.trim_end().to_string();

    // Impression: numbered items drawn from the findings' lesions, most
    // suspicious first.
    lesions.sort_by(|a, b| b.suv.total_cmp(&a.suv));
    let style = rng.gen_range(0..4);
    let impression_target = rng.gen_range(IMPRESSION_TARGET.0..=IMPRESSION_TARGET.1);
    let mut items: Vec<String> = Vec::new();
    let mut length = 0;
    let mut closing = vocab.closing.iter();
    let mut lesion_iter = lesions.iter();
    while length < impression_target {
        let n = items.len() + 1;
        let mut mark = marker(style, n);
        if vocab.marker_space {
            mark.push(' ');
        }
        let item = if let Some(lesion) = lesion_iter.next() {
            plant(&mut impression_terms, lesion.anatomy);
            plant(&mut impression_terms, lesion.pathology);
            plant(&mut impression_terms, "SUVmax");
            vocab
                .impression
                .replace("{marker}", &mark)
                .replace("{anat}", lesion.anatomy)
                .replace("{Path}", &capitalize(lesion.pathology))
                .replace("{path}", lesion.pathology)
                .replace("{suv}", &format!("{:.1}", lesion.suv))
                .replace("{verdict}", vocab.verdicts.choose(rng).unwrap())
        } else if let Some(line) = closing.next() {
            format!("{mark}{line}")
        } else {
            break;
        };
        length += item.chars().count() + 1;
        items.push(item);
    }
    let impression = items.join("\n");
    (findings, impression, (findings_terms, impression_terms))
}

pub fn write_sidecar(entities: &[FixtureEntities], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for record in entities {
        out.push_str(&serde_json::to_string(record).expect("sidecar serializes"));
        out.push('\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

pub fn load_sidecar(path: impl AsRef<Path>) -> Result<Vec<FixtureEntities>> {
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
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::validate_split;
    use crate::lexicon::Lexicon;

    #[test]
    fn same_seed_same_bytes() {
        let spec = FixtureSpec::new(7, 10, 4);
        let a = generate_fixture(&spec).unwrap();
        let b = generate_fixture(&spec).unwrap();
        assert_eq!(a.corpus.to_jsonl(), b.corpus.to_jsonl());
        assert_eq!(a.entities, b.entities);
        let c = generate_fixture(&FixtureSpec::new(8, 10, 4)).unwrap();
        assert_ne!(a.corpus.to_jsonl(), c.corpus.to_jsonl());
    }

    #[test]
    fn tracer_mix_is_respected() {
        let mut spec = FixtureSpec::new(3, 1000, 300);
        spec.tracer_mix = [("FDG".to_string(), 9.0), ("tau".to_string(), 1.0)].into();
        let fx = generate_fixture(&spec).unwrap();
        let fdg = fx
            .corpus
            .reports
            .iter()
            .filter(|r| r.tracer == "FDG")
            .count();
        let frac = fdg as f64 / 1000.0;
        assert!((frac - 0.9).abs() <= 0.05, "FDG fraction {frac}");
    }

    #[test]
    fn single_patient_single_split() {
        let fx = generate_fixture(&FixtureSpec::new(11, 25, 1)).unwrap();
        let split = fx.corpus.reports[0].split;
        assert!(fx.corpus.reports.iter().all(|r| r.split == split));
        assert!(validate_split(&fx.corpus).unwrap().violations.is_empty());
    }

    #[test]
    fn zero_weights_are_argument_errors() {
        let mut spec = FixtureSpec::new(1, 5, 2);
        spec.tracer_mix = [("FDG".to_string(), 0.0)].into();
        assert!(matches!(generate_fixture(&spec), Err(Error::Argument(_))));
        spec.tracer_mix = BTreeMap::new();
        assert!(matches!(generate_fixture(&spec), Err(Error::Argument(_))));
        let mut spec = FixtureSpec::new(1, 5, 2);
        spec.split_mix = SplitMix {
            train: 0.0,
            validation: 0.0,
            test: 0.0,
        };
        assert!(matches!(generate_fixture(&spec), Err(Error::Argument(_))));
        assert!(matches!(
            generate_fixture(&FixtureSpec::new(1, 5, 0)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn lengths_track_targets() {
        let fx = generate_fixture(&FixtureSpec::new(5, 400, 100)).unwrap();
        let n = fx.corpus.len() as f64;
        let mean = |f: fn(&Report) -> &str| {
            fx.corpus
                .reports
                .iter()
                .map(|r| f(r).chars().count() as f64)
                .sum::<f64>()
                / n
        };
        let findings = mean(|r| &r.findings);
        let impression = mean(|r| &r.impression);
        assert!(
            (findings - 870.0).abs() < 870.0 * 0.1,
            "findings mean {findings}"
        );
        assert!(
            (impression - 240.0).abs() < 240.0 * 0.15,
            "impression mean {impression}"
        );
    }

    #[test]
    fn impression_entities_are_a_subset_of_findings_entities() {
        let fx = generate_fixture(&FixtureSpec::new(9, 200, 50)).unwrap();
        for e in &fx.entities {
            let findings: BTreeSet<_> = e.findings_entities.iter().collect();
            assert!(
                e.impression_entities.iter().all(|t| findings.contains(t)),
                "{}",
                e.id
            );
            assert!(!e.impression_entities.is_empty());
        }
    }

    #[test]
    fn vocabulary_is_in_builtin_lexicon() {
        let lex = Lexicon::builtin();
        for vocab in [&ZH, &EN] {
            for term in vocab.anatomy.iter().chain(vocab.pathology) {
                assert!(lex.contains(&normalize_text(term)), "{term}");
            }
        }
        for tag in ["fdg", "psma", "dotatate", "tau", "amyloid", "dopamine"] {
            for zh in [true, false] {
                let (_, term) = tracer_surface(tag, zh).unwrap();
                assert!(lex.contains(term), "{term}");
            }
        }
        for term in ["suvmax", "放射性摄取", "高代谢", "hypermetabolic"] {
            assert!(lex.contains(term));
        }
    }

    #[test]
    fn sidecar_round_trip() {
        let fx = generate_fixture(&FixtureSpec::new(2, 5, 2)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_sidecar(&fx.entities, f.path()).unwrap();
        assert_eq!(load_sidecar(f.path()).unwrap(), fx.entities);
    }
}
