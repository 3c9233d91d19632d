use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use impression_eval::clinical::{Rubric, UerSource};
use impression_eval::corpus::{
    generate_fixture, load_corpus, validate_split, write_corpus, write_sidecar, FixtureSpec, Split,
    SplitMix,
};
use impression_eval::extraction::extract_entities;
use impression_eval::lexicon::{load_or_builtin, Lexicon, Matcher};
use impression_eval::nlg::Scheme;
use impression_eval::pipeline::{self, CandidateSource, EvaluateConfig, Pool};
use impression_eval::runner::{write_jsonl, Candidate};

#[derive(Parser)]
#[command(
    name = "impeval",
    version,
    about = "Evaluate generated radiology impressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score candidates against reference impressions and write reports.
    Evaluate(EvaluateArgs),
    /// Query a chat-completion endpoint for test-split impressions.
    Generate(GenerateArgs),
    /// Write a synthetic corpus with ground-truth entity sidecar.
    Fixture(FixtureArgs),
    /// Print the entity matches found in a text.
    NerDebug(NerDebugArgs),
    /// Print the default format rubric.
    Rubric {
        #[arg(long, required = true)]
        dump_default: bool,
    },
    /// Check that no patient appears in more than one split.
    SplitCheck {
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Character,
    Whitespace,
}

#[derive(Clone, Copy, ValueEnum)]
enum UerSourceArg {
    Impression,
    Findings,
}

#[derive(Clone, Copy, ValueEnum)]
enum PoolArg {
    Sample,
    Model,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Lexicon TSV; repeatable. Defaults to the builtin vocabulary.
    #[arg(long)]
    lexicon: Vec<PathBuf>,
    #[arg(long)]
    rubric: Option<PathBuf>,
    /// Candidates JSONL with `id`, `model`, `impression`.
    #[arg(
        long,
        required_unless_present = "endpoint",
        conflicts_with = "endpoint"
    )]
    candidates: Option<PathBuf>,
    /// Endpoint config JSON; generates candidates instead of reading them.
    #[arg(long, requires_all = ["template", "cache"])]
    endpoint: Option<PathBuf>,
    #[arg(long)]
    template: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Precomputed embeddings JSONL for the semantic metrics.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "character")]
    scheme: SchemeArg,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "impression")]
    uer_source: UerSourceArg,
    #[arg(long, value_enum, default_value = "sample")]
    pool: PoolArg,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    endpoint: PathBuf,
    /// Prompt template containing exactly one `{findings}`.
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    /// Candidates JSONL to write; failures go to `<out>.failures.jsonl`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    reports: usize,
    #[arg(long)]
    patients: Option<usize>,
    /// Tracer weight as TAG=WEIGHT; repeatable. Defaults to an FDG-heavy mix.
    #[arg(long, value_parser = parse_weight)]
    tracer: Vec<(String, f64)>,
    #[arg(long, default_value_t = 8.0)]
    train: f64,
    #[arg(long, default_value_t = 1.0)]
    validation: f64,
    #[arg(long, default_value_t = 1.0)]
    test: f64,
    /// Corpus JSONL; the entity sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Also write the builtin lexicon as TSV.
    #[arg(long)]
    lexicon_out: Option<PathBuf>,
    /// Also write reference-copy candidates for the test split.
    #[arg(long)]
    identity_candidates: Option<PathBuf>,
    #[arg(long, default_value = "reference")]
    model: String,
}

#[derive(Args)]
struct NerDebugArgs {
    #[arg(long)]
    lexicon: Vec<PathBuf>,
    text: String,
}

fn parse_weight(s: &str) -> std::result::Result<(String, f64), String> {
    let (tag, weight) = s.split_once('=').ok_or("expected TAG=WEIGHT")?;
    let weight: f64 = weight.parse().map_err(|e| format!("bad weight: {e}"))?;
    Ok((tag.to_string(), weight))
}

fn sidecar_path(corpus: &Path) -> PathBuf {
    let stem = corpus
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    corpus.with_file_name(format!("{stem}.entities.jsonl"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let candidates = match (args.candidates, args.endpoint) {
        (Some(path), _) => CandidateSource::File(path),
        (None, Some(config)) => CandidateSource::Endpoint {
            config,
            template: args.template.expect("clap enforces --template"),
            cache: args.cache.expect("clap enforces --cache"),
        },
        (None, None) => unreachable!("clap enforces a candidate source"),
    };
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cfg = EvaluateConfig {
        corpus: args.corpus,
        lexicons: args.lexicon,
        rubric: args.rubric,
        candidates,
        embeddings: args.embeddings,
        out: args.out,
        scheme: match args.scheme {
            SchemeArg::Character => Scheme::Character,
            SchemeArg::Whitespace => Scheme::Whitespace,
        },
        uer_source: match args.uer_source {
            UerSourceArg::Impression => UerSource::Impression,
            UerSourceArg::Findings => UerSource::Findings,
        },
        pool: match args.pool {
            PoolArg::Sample => Pool::Sample,
            PoolArg::Model => Pool::Model,
        },
        seed: args.seed,
        jobs: jobs.max(1),
    };
    let summary = pipeline::evaluate(&cfg)?;
    for e in &summary.soft_errors {
        eprintln!("skipped {} ({}): {}", e.id, e.model, e.message);
    }
    eprintln!(
        "scored {} samples across {} models; {} skipped; outputs in {}",
        summary.scores.len(),
        summary.leaderboard.len(),
        summary.soft_errors.len(),
        cfg.out.display()
    );
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let (candidates, failures) =
        pipeline::generate(&args.corpus, &args.endpoint, &args.template, &args.cache)?;
    write_jsonl(&candidates, &args.out)?;
    let failures_path = with_suffix(&args.out, ".failures.jsonl");
    if failures.is_empty() {
        if failures_path.exists() {
            std::fs::remove_file(&failures_path)
                .with_context(|| format!("removing stale {}", failures_path.display()))?;
        }
    } else {
        write_jsonl(&failures, &failures_path)?;
    }
    let cached = candidates.iter().filter(|c| c.cached).count();
    eprintln!(
        "generated {} candidates ({} from cache), {} failures",
        candidates.len(),
        cached,
        failures.len()
    );
    Ok(())
}

fn run_fixture(args: FixtureArgs) -> Result<()> {
    let mut spec = FixtureSpec::new(
        args.seed,
        args.reports,
        args.patients.unwrap_or(args.reports),
    );
    if !args.tracer.is_empty() {
        spec.tracer_mix = args.tracer.into_iter().collect();
    }
    spec.split_mix = SplitMix {
        train: args.train,
        validation: args.validation,
        test: args.test,
    };
    let fixture = generate_fixture(&spec)?;
    write_corpus(&fixture.corpus, &args.out)?;
    write_sidecar(&fixture.entities, sidecar_path(&args.out))?;
    if let Some(path) = &args.lexicon_out {
        std::fs::write(path, Lexicon::builtin_source()).map_err(|e| {
            impression_eval::Error::Io {
                path: path.clone(),
                source: e,
            }
        })?;
    }
    if let Some(path) = &args.identity_candidates {
        let candidates: Vec<Candidate> = fixture
            .corpus
            .split(Split::Test)
            .map(|r| Candidate::new(&r.id, &args.model, &r.impression))
            .collect();
        write_jsonl(&candidates, path)?;
    }
    Ok(())
}

fn run_ner_debug(args: NerDebugArgs) -> Result<()> {
    for path in &args.lexicon {
        pipeline::check_readable(path, "lexicon")?;
    }
    let lexicon = load_or_builtin(&args.lexicon)?;
    let matcher = Matcher::new(&lexicon);
    let mut out = std::io::stdout().lock();
    for m in extract_entities(&matcher, &args.text) {
        writeln!(out, "{}\t{}\t{}\t{}", m.start, m.length, m.category, m.term)?;
    }
    Ok(())
}

fn run_split_check(corpus: &Path) -> Result<()> {
    pipeline::check_readable(corpus, "corpus")?;
    let corpus = load_corpus(corpus)?;
    let report = validate_split(&corpus)?;
    writeln!(
        std::io::stdout().lock(),
        "{}",
        serde_json::to_string_pretty(&report)?
    )?;
    if !report.is_patient_disjoint() {
        eprintln!(
            "{} patients appear in more than one split",
            report.violations.len()
        );
    }
    Ok(())
}

// A closed downstream pipe (`impeval ... | head`) is not a failure.
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

/// 1 for I/O failures while running or writing, 2 for bad configuration or input.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<impression_eval::Error>() {
        Some(impression_eval::Error::Io { .. }) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => run_evaluate(args),
        Command::Generate(args) => run_generate(args),
        Command::Fixture(args) => run_fixture(args),
        Command::NerDebug(args) => run_ner_debug(args),
        Command::Rubric { .. } => {
            writeln!(std::io::stdout().lock(), "{}", Rubric::default().to_json())
                .map_err(Into::into)
        }
        Command::SplitCheck { corpus } => run_split_check(&corpus),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) if is_broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
