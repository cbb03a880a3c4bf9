use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kpa_core::error::ErrorClass;
use kpa_core::evaluation::{
    annotator_kappa, best_match_sample, default_levels, fleiss_from_annotations, load_sample, precision_at_coverage,
    reliable_annotators, split_consistency, AnnotationSet, FleissMode, ANNOTATOR_KAPPA_CUTOFF,
};
use kpa_core::ingest::{load_dataset, load_labeled_pairs};
use kpa_core::pipeline::{emit_report, run_analysis, run_matching_eval, Fold, FoldSpec, ReportFormat, ScorerSpec};
use kpa_core::scoring::{CachedScorer, ScoreTable};
use kpa_core::{AnalysisConfig, Domain, Error, MatchScorer, Policy, PolicyKind};

#[derive(Debug, Parser)]
#[command(name = "kpa", version, about = "Automatic key point analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract key points from a comment file and match every comment to them.
    Analyze(AnalyzeArgs),
    /// Cross-validate a matching model over labeled pairs.
    EvalMatch(EvalMatchArgs),
    /// Precision at coverage for a labeled sample of analysis output.
    EvalSample(EvalSampleArgs),
    /// Inter-annotator agreement statistics.
    Agreement(AgreementArgs),
    /// Run the HTTP job service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Comments as JSONL.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_domain)]
    domain: Option<Domain>,
    /// TOML config; `profile` selects the per-domain defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// table:<path>, lexical or remote:<url>.
    #[arg(long)]
    scorer: Option<ScorerSpec>,
    #[arg(long)]
    max_kps: Option<usize>,
    #[arg(long, value_parser = parse_kind)]
    policy: Option<PolicyKind>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    selection_threshold: Option<f64>,
    #[arg(long)]
    rematch_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportArg::Structured)]
    report_format: ReportArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportArg {
    Structured,
    Table,
}

#[derive(Debug, Args)]
struct EvalMatchArgs {
    /// Labeled pairs CSV.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, default_value_t = 4)]
    folds: usize,
    #[arg(long, default_value_t = 4)]
    dev_size: usize,
    /// pairs (the file's score column), gold, or a scorer spec. `{fold}` in
    /// a table path is replaced by the fold index.
    #[arg(long, default_value = "pairs")]
    scorer: String,
    #[arg(long, value_delimiter = ',', value_parser = parse_kind, default_value = "th,bm,bm+th")]
    policies: Vec<PolicyKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ReportArg::Table)]
    format: ReportArg,
}

#[derive(Debug, Args)]
struct EvalSampleArgs {
    /// JSONL of {comment_id, key_point_id, score, label}.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, value_delimiter = ',')]
    coverage_levels: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AgreementArgs {
    /// JSONL of {comment_id, key_point_id, annotator_id, judgment}.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    annotator_kappa: bool,
    #[arg(long, default_value_t = 50)]
    min_shared: usize,
    #[arg(long, default_value_t = 5)]
    min_peers: usize,
    #[arg(long, default_value_t = ANNOTATOR_KAPPA_CUTOFF)]
    kappa_cutoff: f64,
    #[arg(long)]
    fleiss: bool,
    /// Fleiss over match / no-match / unclear instead of match vs the rest.
    #[arg(long)]
    three_way: bool,
    #[arg(long)]
    split_consistency: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "kpa-store")]
    store: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, default_value_t = 2)]
    workers: usize,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: kpa_core::policies::PolicyError| e.to_string())
}

/// A failure with the class that picks the exit code.
struct Failure {
    class: ErrorClass,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

/// Prefixes a failure while reading `path` with the path.
fn reading<E: Into<Error>>(path: &std::path::Path) -> impl FnOnce(E) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e.into());
        Failure {
            message: format!("{}: {}", path.display(), f.message),
            ..f
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        class: ErrorClass::Usage,
        message: message.into(),
    }
}

fn data(message: impl ToString) -> Failure {
    Failure {
        class: ErrorClass::Data,
        message: message.to_string(),
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| data(format!("writing {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(data)
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    text
}

fn analyze(args: AnalyzeArgs) -> Result<(), Failure> {
    let mut cfg = match &args.config {
        Some(path) => AnalysisConfig::load(path, args.domain)?,
        None => AnalysisConfig::for_domain(
            args.domain
                .ok_or_else(|| usage("give --domain or a --config naming a profile"))?,
        ),
    };
    if let Some(domain) = args.domain {
        if domain != cfg.domain {
            return Err(usage(format!(
                "--domain {domain} contradicts the config's {}",
                cfg.domain
            )));
        }
    }
    if let Some(scorer) = args.scorer {
        cfg.scorer = scorer;
    }
    if let Some(n) = args.max_kps {
        cfg.max_kps = n;
    }
    if let Some(t) = args.selection_threshold {
        cfg.selection_threshold = t;
    }
    if let Some(t) = args.rematch_threshold {
        cfg.rematch_threshold = Some(t);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.policy.is_some() || args.threshold.is_some() {
        let kind = args.policy.unwrap_or(cfg.final_policy.kind());
        let threshold = match (args.threshold, kind) {
            (Some(t), _) => Some(t),
            (None, PolicyKind::BestMatch) => None,
            (None, kind) if kind == cfg.final_policy.kind() => cfg.final_policy.threshold(),
            (None, kind) => return Err(usage(format!("--policy {kind} needs --threshold"))),
        };
        cfg.final_policy = Policy::new(kind, threshold).map_err(|e| usage(e.to_string()))?;
    }
    cfg.validate()?;

    let dataset = load_dataset(&args.input, cfg.domain).map_err(reading(&args.input))?;
    let scorers = cfg.scorer.build()?;
    let matcher = CachedScorer::new(scorers.matcher.clone());
    let result = run_analysis(&dataset, &cfg, &matcher, scorers.quality.as_ref())?;
    let format = match args.report_format {
        ReportArg::Structured => ReportFormat::Structured,
        ReportArg::Table => ReportFormat::HumanTable,
    };
    emit(args.out.as_ref(), &emit_report(&result, format))
}

fn eval_match(args: EvalMatchArgs) -> Result<(), Failure> {
    if args.policies.is_empty() {
        return Err(usage("--policies is empty"));
    }
    let pairs = load_labeled_pairs(&args.pairs).map_err(reading(&args.pairs))?;
    if pairs.is_empty() {
        return Err(data(format!("{} has no pairs", args.pairs.display())));
    }
    let mut topics: Vec<String> = pairs.iter().map(|p| p.topic.clone()).collect();
    topics.sort();
    topics.dedup();
    let spec = FoldSpec::build(&topics, args.folds, args.dev_size, args.seed)?;

    let fixed: Option<Arc<dyn MatchScorer>> = match args.scorer.as_str() {
        "pairs" => Some(Arc::new(ScoreTable::from_pair_scores(&pairs).map_err(Error::from)?.strict(true))),
        "gold" => Some(Arc::new(ScoreTable::gold(&pairs).strict(true))),
        _ => None,
    };
    let template = args.scorer.clone();
    let provider = |i: usize, _: &Fold| -> kpa_core::Result<Arc<dyn MatchScorer>> {
        if let Some(s) = &fixed {
            return Ok(s.clone());
        }
        let spec: ScorerSpec = template.replace("{fold}", &i.to_string()).parse().map_err(Error::Config)?;
        Ok(Arc::new(CachedScorer::new(spec.build()?.matcher)))
    };
    let table = run_matching_eval(&pairs, &spec, &provider, &args.policies)?;
    let text = match args.format {
        ReportArg::Table => table.to_table(),
        ReportArg::Structured => json(&table),
    };
    emit(args.out.as_ref(), &text)
}

fn eval_sample(args: EvalSampleArgs) -> Result<(), Failure> {
    let records = load_sample(&args.sample).map_err(reading(&args.sample))?;
    let sample = best_match_sample(&records);
    let levels = args.coverage_levels.unwrap_or_else(default_levels);
    let curve = precision_at_coverage(&sample, &levels).map_err(|e| match e {
        kpa_core::evaluation::EvalError::InvalidLevels(m) => usage(m),
        e => Failure::from(Error::from(e)),
    })?;
    emit(args.out.as_ref(), &json(&curve))
}

#[derive(Debug, Default, Serialize)]
struct AgreementReport {
    items: usize,
    annotators: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotator_kappa: Option<std::collections::BTreeMap<String, f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reliable_annotators: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fleiss_kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    split_consistency: Option<f64>,
}

fn agreement(args: AgreementArgs) -> Result<(), Failure> {
    let mut set = AnnotationSet::load(&args.annotations).map_err(reading(&args.annotations))?;
    let mut report = AgreementReport {
        items: set.len(),
        annotators: set.annotators().len(),
        ..AgreementReport::default()
    };
    let none_requested = !(args.annotator_kappa || args.fleiss || args.split_consistency);
    if args.annotator_kappa {
        let kappas = annotator_kappa(&set, args.min_shared, args.min_peers);
        let keep = reliable_annotators(&kappas, args.kappa_cutoff);
        set.retain_annotators(|a| keep.iter().any(|k| k == a));
        report.annotator_kappa = Some(kappas);
        report.reliable_annotators = Some(keep);
    }
    if args.fleiss || none_requested {
        let mode = if args.three_way {
            FleissMode::ThreeWay
        } else {
            FleissMode::Collapsed
        };
        report.fleiss_kappa = Some(fleiss_from_annotations(&set, mode).map_err(Error::from)?);
    }
    if args.split_consistency {
        report.split_consistency = Some(split_consistency(&set, args.seed).map_err(Error::from)?);
    }
    emit(args.out.as_ref(), &json(&report))
}

fn serve(args: ServeArgs) -> Result<(), Failure> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(data)?;
    eprintln!("listening on {}", args.addr);
    runtime
        .block_on(kpa_service::serve(args.addr, args.store, args.workers))
        .map_err(data)
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Scorer => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::EvalMatch(a) => eval_match(a),
        Command::EvalSample(a) => eval_sample(a),
        Command::Agreement(a) => agreement(a),
        Command::Serve(a) => serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(exit_code(f.class))
        }
    }
}
