//! Command-line surface. The binary only forwards to [`run`].
//!
//! Exit codes are shared by all subcommands: 0 on success, 2 for usage or
//! configuration errors (bad flags, unreadable config, missing input paths),
//! 3 for data and validation errors (malformed inputs, single-class training
//! data, dimension mismatches, unlabeled scores).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::{
    join, load_embeddings, load_manifest, EmbeddingStore, Label, Manifest, RecordFilter, Split,
};
use crate::fusion::{fuse_pipeline, video_score, FrameScores, FusionRule, ScoreRecord};
use crate::io::{to_json_lines, write_atomic};
use crate::metrics::{evaluate, HterThreshold, MetricsReport, ScoreSet};
use crate::probe::{predict, train_head, ProbeHead, TrainConfig};
use crate::protocols::{run_protocol, ProtocolInputs, ProtocolResult, ProtocolSpec};
use crate::report::{
    det_csv, det_svg, metrics_table, parse_det_csv, protocol_table, ReportDocument,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Fallback seed when neither `--seed` nor a config file sets one.
pub const SEED_ENV: &str = "PAD_EVAL_SEED";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
        }
    }

    fn config(msg: impl fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    /// Data error tagged with the variant name of the underlying error.
    fn data<E: fmt::Debug + fmt::Display>(e: E) -> Self {
        let debug = format!("{e:?}");
        let kind: String = debug
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .collect();
        CliError::Data(format!("{kind}: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    TextTable,
    DetCsv,
    DetSvg,
}

#[derive(Debug, Parser)]
#[command(
    name = "pad-eval",
    version,
    about = "Presentation attack detection evaluation on frozen embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a probe head per backbone and write head + training log JSON.
    Train(TrainArgs),
    /// Apply heads to embeddings; writes frame- and video-level score files.
    Score(ScoreArgs),
    /// Fuse per-model score files with MIN/MAX/SUM/AVG.
    Fuse(FuseArgs),
    /// Compute metrics for score files against manifest labels.
    Eval(EvalArgs),
    /// Run an evaluation protocol end to end.
    Protocol(ProtocolArgs),
    /// Render DET curves from det-csv files into one SVG.
    ReportDet(ReportDetArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// JSON run configuration; explicit flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    /// `model_id=path`, repeatable; repeated ids are merged.
    #[arg(long)]
    pub embeddings: Vec<String>,
    #[arg(long, default_value = "train")]
    pub split: Split,
    #[arg(long)]
    pub dataset: Vec<String>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    #[arg(long)]
    pub embeddings: Vec<String>,
    /// `model_id=path` of a trained head, repeatable.
    #[arg(long)]
    pub head: Vec<String>,
    /// Only score records of this split.
    #[arg(long)]
    pub split: Option<Split>,
    #[arg(long)]
    pub dataset: Vec<String>,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Score files (JSON lines), one or more models each.
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    #[arg(long, required = true, value_parser = parse_rule)]
    pub rule: Vec<FusionRule>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    #[arg(long, required = true)]
    pub scores: Vec<PathBuf>,
    /// Fixed HTER threshold; defaults to the D-EER threshold of each score set.
    #[arg(long)]
    pub hter_threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub formats: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct ProtocolArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub protocol_config: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Vec<PathBuf>,
    #[arg(long)]
    pub embeddings: Vec<String>,
    /// Folds evaluated in parallel.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub formats: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct ReportDetArgs {
    /// `label=path` or `path` of a det-csv file, repeatable.
    #[arg(long = "det-csv", required = true)]
    pub det_csv: Vec<String>,
    /// Output SVG file.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_rule(s: &str) -> Result<FusionRule, String> {
    s.parse()
        .map_err(|e: crate::fusion::FusionError| e.to_string())
}

/// Values a `--config` file may provide. Every field is optional and loses to
/// the matching flag.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifests: Vec<PathBuf>,
    /// `model_id=path` entries.
    pub embeddings: Vec<String>,
    pub heads: Vec<String>,
    pub protocol_config: Option<PathBuf>,
    pub train: Option<TrainConfig>,
    pub out_dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    fn load(path: &Option<PathBuf>) -> CliResult<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = read_config_text(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

fn read_config_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn pick<T>(flag: Vec<T>, config: Vec<T>) -> Vec<T> {
    if flag.is_empty() {
        config
    } else {
        flag
    }
}

fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::config(format!("{SEED_ENV}={v} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn require_existing(path: &Path, what: &str) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::config(format!(
            "{what} `{}` does not exist",
            path.display()
        )))
    }
}

fn out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = flag
        .or(config)
        .ok_or_else(|| CliError::config("--out-dir is required"))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn split_pair(spec: &str, flag: &str) -> CliResult<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((id, path)) if !id.is_empty() && !path.is_empty() => {
            Ok((id.to_owned(), PathBuf::from(path)))
        }
        _ => Err(CliError::config(format!(
            "--{flag} expects model_id=path, got `{spec}`"
        ))),
    }
}

fn load_manifests(paths: &[PathBuf]) -> CliResult<Manifest> {
    if paths.is_empty() {
        return Err(CliError::config("at least one --manifest is required"));
    }
    for p in paths {
        require_existing(p, "manifest")?;
    }
    let parts = paths
        .iter()
        .map(|p| load_manifest(p).map_err(CliError::data))
        .collect::<CliResult<Vec<_>>>()?;
    Manifest::merge(&parts).map_err(CliError::data)
}

fn load_stores(specs: &[String]) -> CliResult<BTreeMap<String, EmbeddingStore>> {
    if specs.is_empty() {
        return Err(CliError::config(
            "at least one --embeddings model_id=path is required",
        ));
    }
    let pairs = specs
        .iter()
        .map(|s| split_pair(s, "embeddings"))
        .collect::<CliResult<Vec<_>>>()?;
    for (_, p) in &pairs {
        require_existing(p, "embedding store")?;
    }
    let mut stores: BTreeMap<String, EmbeddingStore> = BTreeMap::new();
    for (id, p) in pairs {
        let s = load_embeddings(&p).map_err(CliError::data)?;
        match stores.get_mut(&id) {
            Some(existing) => existing.extend_from(&s).map_err(CliError::data)?,
            None => {
                stores.insert(id, s);
            }
        }
    }
    Ok(stores)
}

/// Safe file stem for a model or system id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    write_atomic(path, contents)
        .map_err(|e| CliError::Data(format!("writing {}: {e}", path.display())))
}

fn read_scores(paths: &[PathBuf]) -> CliResult<Vec<ScoreRecord>> {
    let mut out = Vec::new();
    for p in paths {
        require_existing(p, "score file")?;
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: ScoreRecord = serde_json::from_str(line).map_err(|e| {
                CliError::Data(format!("MalformedLine: {}:{}: {e}", p.display(), i + 1))
            })?;
            if !r.score.is_finite() {
                return Err(CliError::Data(format!(
                    "NonFiniteScore: {}:{}",
                    p.display(),
                    i + 1
                )));
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Scores grouped by model (in first-appearance order), then by id.
fn group_scores(records: &[ScoreRecord]) -> (Vec<String>, BTreeMap<String, FrameScores>) {
    let mut models = Vec::new();
    let mut grouped: BTreeMap<String, FrameScores> = BTreeMap::new();
    for r in records {
        if !models.contains(&r.model_id) {
            models.push(r.model_id.clone());
        }
        grouped
            .entry(r.model_id.clone())
            .or_default()
            .entry(r.id.clone())
            .or_default()
            .push(r.score);
    }
    (models, grouped)
}

/// Entry point: parses `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Train(a) => cmd_train(a),
        Command::Score(a) => cmd_score(a),
        Command::Fuse(a) => cmd_fuse(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Protocol(a) => cmd_protocol(a),
        Command::ReportDet(a) => cmd_report_det(a),
    }
}

fn train_config(base: Option<TrainConfig>, seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..base.unwrap_or_default()
    }
}

pub fn cmd_train(args: TrainArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let seed = resolve_seed(args.common.seed, cfg.seed)?;
    let mut config = train_config(cfg.train, seed);
    if let Some(lr) = args.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(e) = args.epochs {
        config.epochs = e;
    }
    if let Some(b) = args.batch_size {
        config.batch_size = b;
    }
    config.validate().map_err(CliError::config)?;
    let manifest_paths = pick(args.manifest, cfg.manifests);
    let store_specs = pick(args.embeddings, cfg.embeddings);
    let manifest = load_manifests(&manifest_paths)?;
    let stores = load_stores(&store_specs)?;
    let dir = out_dir(args.common.out_dir, cfg.out_dir)?;

    let mut filter = RecordFilter::all().split(args.split);
    if !args.dataset.is_empty() {
        filter.dataset_ids = Some(args.dataset.clone());
    }
    for (model, store) in &stores {
        let ds = join(&manifest, store, &filter).map_err(CliError::data)?;
        let (head, log) = train_head(&ds, model, &config).map_err(CliError::data)?;
        let stem = file_stem(model);
        head.save(&dir.join(format!("{stem}.head.json")))
            .map_err(CliError::data)?;
        let log_json = serde_json::to_string_pretty(&log).expect("log serializes") + "\n";
        write_file(
            &dir.join(format!("{stem}.trainlog.json")),
            log_json.as_bytes(),
        )?;
        log::info!(
            "{model}: trained on {} samples, final loss {:.6}",
            ds.len(),
            log.final_loss
        );
    }
    Ok(())
}

pub fn cmd_score(args: ScoreArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let manifest = load_manifests(&pick(args.manifest, cfg.manifests))?;
    let stores = load_stores(&pick(args.embeddings, cfg.embeddings))?;
    let head_specs = pick(args.head, cfg.heads);
    if head_specs.is_empty() {
        return Err(CliError::config(
            "at least one --head model_id=path is required",
        ));
    }
    let dir = out_dir(args.common.out_dir, cfg.out_dir)?;

    let mut filter = RecordFilter::all();
    if let Some(s) = args.split {
        filter = filter.split(s);
    }
    if !args.dataset.is_empty() {
        filter.dataset_ids = Some(args.dataset.clone());
    }
    for spec in &head_specs {
        let (model, path) = split_pair(spec, "head")?;
        require_existing(&path, "head")?;
        let head = ProbeHead::load(&path).map_err(CliError::data)?;
        let store = stores.get(&model).ok_or_else(|| {
            CliError::config(format!("no --embeddings given for model `{model}`"))
        })?;
        let ds = join(&manifest, store, &filter).map_err(CliError::data)?;
        let mut frames = Vec::with_capacity(ds.len());
        let mut per_video: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in ds.samples() {
            let score = predict(&head, &s.embedding).map_err(CliError::data)?;
            frames.push(ScoreRecord {
                id: s.record.sample_id.clone(),
                model_id: model.clone(),
                score,
            });
            per_video
                .entry(s.record.video_id.clone())
                .or_default()
                .push(score);
        }
        let mut videos = Vec::with_capacity(per_video.len());
        for (video, scores) in &per_video {
            let v = video_score(scores, video, &model).map_err(CliError::data)?;
            videos.push(ScoreRecord {
                id: v.video_id,
                model_id: v.model_id,
                score: v.score,
            });
        }
        let stem = file_stem(&model);
        write_file(
            &dir.join(format!("{stem}.frames.jsonl")),
            to_json_lines(&frames).expect("scores serialize").as_bytes(),
        )?;
        write_file(
            &dir.join(format!("{stem}.videos.jsonl")),
            to_json_lines(&videos).expect("scores serialize").as_bytes(),
        )?;
    }
    Ok(())
}

pub fn cmd_fuse(args: FuseArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let records = read_scores(&args.scores)?;
    let dir = out_dir(args.common.out_dir, cfg.out_dir)?;
    let (models, grouped) = group_scores(&records);
    if models.is_empty() {
        return Err(CliError::Data(
            "EmptyModelList: score files are empty".into(),
        ));
    }
    for rule in &args.rule {
        let fused = fuse_pipeline(&grouped, &models, *rule).map_err(CliError::data)?;
        let system = rule.system_id(&models);
        let out: Vec<ScoreRecord> = fused
            .into_iter()
            .map(|(id, score)| ScoreRecord {
                id,
                model_id: system.clone(),
                score,
            })
            .collect();
        write_file(
            &dir.join(format!("fused_{}.jsonl", rule.name().to_lowercase())),
            to_json_lines(&out).expect("scores serialize").as_bytes(),
        )?;
    }
    Ok(())
}

fn eval_conventions(policy: HterThreshold) -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert(
        "decision_rule".into(),
        "attack iff score >= threshold".into(),
    );
    c.insert("hter_threshold".into(), policy.describe());
    c.insert(
        "bpcer_at_apcer".into(),
        "minimum BPCER over operating points with APCER <= target".into(),
    );
    c
}

pub fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let manifest = load_manifests(&pick(args.manifest, cfg.manifests))?;
    let records = read_scores(&args.scores)?;
    let dir = out_dir(args.common.out_dir, cfg.out_dir)?;
    let formats = if args.formats.is_empty() {
        cfg.formats
            .unwrap_or_else(|| vec![Format::Json, Format::TextTable])
    } else {
        args.formats
    };

    let mut labels: BTreeMap<&str, Label> = BTreeMap::new();
    for r in manifest.records() {
        labels.insert(&r.video_id, r.label);
        labels.insert(&r.sample_id, r.label);
    }
    let (models, grouped) = group_scores(&records);
    let policy = match args.hter_threshold {
        Some(t) => HterThreshold::Fixed(t),
        None => HterThreshold::TestEer,
    };
    let mut reports: Vec<(String, MetricsReport)> = Vec::new();
    for model in &models {
        let mut set = ScoreSet::new(Vec::new(), Vec::new()).expect("empty set");
        for (id, scores) in &grouped[model] {
            if scores.len() > 1 {
                return Err(CliError::Data(format!(
                    "DuplicateScore: `{id}` is scored {} times by `{model}`",
                    scores.len()
                )));
            }
            let label = labels.get(id.as_str()).ok_or_else(|| {
                CliError::Data(format!("UnlabeledScore: `{id}` is not in the manifest"))
            })?;
            match label {
                Label::Attack => set.attack_scores.push(scores[0]),
                Label::BonaFide => set.bonafide_scores.push(scores[0]),
            }
        }
        let report = evaluate(&set, policy).map_err(CliError::data)?;
        reports.push((model.clone(), report));
    }

    for (model, report) in &reports {
        let stem = file_stem(model);
        if formats.contains(&Format::Json) {
            let doc = ReportDocument::new(model, report.clone(), eval_conventions(policy));
            write_file(
                &dir.join(format!("{stem}.report.json")),
                doc.to_json().as_bytes(),
            )?;
        }
        if formats.contains(&Format::DetCsv) {
            write_file(
                &dir.join(format!("{stem}.det.csv")),
                det_csv(&report.det).as_bytes(),
            )?;
        }
        if formats.contains(&Format::DetSvg) {
            let svg = det_svg(&[(model.clone(), report.det.clone())]);
            write_file(&dir.join(format!("{stem}.det.svg")), svg.as_bytes())?;
        }
    }
    if formats.contains(&Format::TextTable) {
        let named: Vec<(String, &MetricsReport)> =
            reports.iter().map(|(m, r)| (m.clone(), r)).collect();
        write_file(&dir.join("report.txt"), metrics_table(&named).as_bytes())?;
    }
    Ok(())
}

/// Resolves the protocol run (spec, inputs, training configuration) from
/// flags and an optional run configuration.
pub fn cmd_protocol(args: ProtocolArgs) -> CliResult<()> {
    let cfg = RunConfig::load(&args.common.config)?;
    let spec_path = args
        .protocol_config
        .or(cfg.protocol_config)
        .ok_or_else(|| CliError::config("--protocol-config is required"))?;
    let spec = ProtocolSpec::from_json(&read_config_text(&spec_path)?)
        .map_err(|e| CliError::config(format!("{}: {e}", spec_path.display())))?;
    let seed = resolve_seed(
        args.common.seed,
        cfg.seed.or(spec.train.as_ref().map(|t| t.seed)),
    )?;
    let config = train_config(spec.train.clone().or(cfg.train), seed);
    config.validate().map_err(CliError::config)?;
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(1).max(1);
    let formats = if args.formats.is_empty() {
        cfg.formats
            .unwrap_or_else(|| vec![Format::Json, Format::TextTable])
    } else {
        args.formats
    };
    let manifest = load_manifests(&pick(args.manifest, cfg.manifests))?;
    let stores = load_stores(&pick(args.embeddings, cfg.embeddings))?;
    let dir = out_dir(args.common.out_dir, cfg.out_dir)?;

    let inputs = ProtocolInputs {
        manifest: &manifest,
        stores: &stores,
    };
    let result = run_protocol(&inputs, &spec, &config, jobs).map_err(CliError::data)?;
    write_protocol_outputs(&result, &dir, &formats)
}

pub fn write_protocol_outputs(
    result: &ProtocolResult,
    dir: &Path,
    formats: &[Format],
) -> CliResult<()> {
    if formats.contains(&Format::Json) {
        write_file(
            &dir.join("protocol_report.json"),
            result.to_json().as_bytes(),
        )?;
    }
    if formats.contains(&Format::TextTable) {
        write_file(
            &dir.join("protocol_report.txt"),
            protocol_table(result).as_bytes(),
        )?;
    }
    let want_csv = formats.contains(&Format::DetCsv);
    let want_svg = formats.contains(&Format::DetSvg);
    if want_csv || want_svg {
        for fold in &result.folds {
            let mut curves = Vec::new();
            for r in &fold.reports {
                let stem = file_stem(&format!("{}__{}__{}", fold.fold_id, r.system, r.subset));
                if want_csv {
                    write_file(
                        &dir.join(format!("{stem}.det.csv")),
                        det_csv(&r.metrics.det).as_bytes(),
                    )?;
                }
                curves.push((
                    format!("{} ({})", r.system, r.subset),
                    r.metrics.det.clone(),
                ));
            }
            if want_svg {
                let svg = det_svg(&curves);
                write_file(
                    &dir.join(format!("{}.det.svg", file_stem(&fold.fold_id))),
                    svg.as_bytes(),
                )?;
            }
        }
    }
    Ok(())
}

pub fn cmd_report_det(args: ReportDetArgs) -> CliResult<()> {
    let mut curves = Vec::new();
    for spec in &args.det_csv {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) if !l.is_empty() => (l.to_owned(), PathBuf::from(p)),
            _ => {
                let p = PathBuf::from(spec);
                let label = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| spec.clone());
                (label, p)
            }
        };
        require_existing(&path, "det-csv")?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let det = parse_det_csv(&text)
            .map_err(|e| CliError::Data(format!("{}: {}", path.display(), CliError::data(e))))?;
        curves.push((label, det));
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| {
                CliError::config(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
    }
    write_file(&args.out, det_svg(&curves).as_bytes())
}
