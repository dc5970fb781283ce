use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use zonespot::config::Config;
use zonespot::eval::{evaluate, GroundTruth};
use zonespot::features::FeatureMode;
use zonespot::lexmap::ZoneRuleTable;
use zonespot::manifest::Manifest;
use zonespot::pipeline::{
    dtw_baseline, load_manifest_lines, mean_zone_error, prepare_keywords, segment_lines, spot_lines, train_char_models,
    train_zone_models, LineData, PipelineConfig, SpotMode, SpotOptions, ZoneMethod,
};
use zonespot::seqmodel::ModelSet;
use zonespot::spotting::{fit_local_thresholds, read_hits, read_thresholds, thresholds_to_tsv, write_hits, ThresholdPolicy};
use zonespot::synth::{generate, read_word_boxes, SynthConfig};
use zonespot::zones::{ProjectionMode, ZoneBoundaries};

#[derive(Parser)]
#[command(name = "zonespot", version, about = "Zone-aware HMM keyword spotting for handwritten text lines")]
struct Cli {
    /// key = value configuration file
    #[arg(short, long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a configuration key; may be repeated
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Log more (-v info, -vv debug)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic line corpus
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train character HMMs from a manifest
    TrainChars(TrainCharsArgs),
    /// Train the zone HMMs from lines with known zone rows
    TrainZones {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Training log; defaults to `<out>.log.csv`
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Find the middle-zone boundaries of every line
    SegmentZones(SegmentArgs),
    /// Spot keywords in the lines of a manifest
    Spot(SpotArgs),
    /// Score a hit list against manifest transcriptions
    Evaluate(EvaluateArgs),
    /// Whole-word DTW baseline
    DtwBaseline {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Word boxes (`line_id idx x_start x_end text`)
        #[arg(long)]
        words: PathBuf,
        #[arg(long)]
        keywords: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Middle,
}

impl From<Mode> for SpotMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => SpotMode::Full,
            Mode::Middle => SpotMode::Middle,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Fg,
    Bg,
    #[value(name = "fg+bg")]
    FgBg,
}

impl From<Features> for FeatureMode {
    fn from(f: Features) -> Self {
        match f {
            Features::Fg => FeatureMode::Fg,
            Features::Bg => FeatureMode::Bg,
            Features::FgBg => FeatureMode::FgBg,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Global,
    Local,
}

#[derive(Args)]
struct TrainCharsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "fg+bg")]
    features: Features,
    /// Zone rule table (needed for middle mode)
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Directory of `<line_id>.zones.tsv` files; the manifest's zone column otherwise
    #[arg(long)]
    zones: Option<PathBuf>,
    /// Training log; defaults to `<out>.log.csv`
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for `<line_id>.zones.tsv`
    #[arg(long)]
    out: PathBuf,
    /// Zone model file
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    model: Option<PathBuf>,
    /// Use projection analysis instead of the zone HMMs
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

#[derive(Args)]
struct SpotArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Character model file
    #[arg(long)]
    models: PathBuf,
    /// One keyword per line
    #[arg(long)]
    keywords: PathBuf,
    /// Hit list TSV
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    mode: Mode,
    #[arg(long, value_enum, default_value = "fg+bg")]
    features: Features,
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Directory of `<line_id>.zones.tsv` files; the manifest's zone column otherwise
    #[arg(long)]
    zones: Option<PathBuf>,
    /// Drop hits whose upper and lower modifier counts disagree with the keyword
    #[arg(long)]
    rerank: bool,
    /// Global score threshold (fallback for keywords missing from --thresholds)
    #[arg(long, allow_hyphen_values = true)]
    threshold: Option<f64>,
    /// Per-keyword thresholds (`keyword<TAB>threshold`)
    #[arg(long)]
    thresholds: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    hits: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    keywords: PathBuf,
    /// Output prefix: writes `<out>.curve.csv` and `<out>.report.tsv`
    #[arg(long)]
    out: PathBuf,
    /// Also write `<out>.svg`
    #[arg(long)]
    svg: bool,
    /// Fit per-keyword F1-optimal thresholds and write them here
    #[arg(long)]
    fit_thresholds: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(zonespot::Error),
}

impl From<zonespot::Error> for Failure {
    fn from(e: zonespot::Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Data(zonespot::Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_config(cli: &Cli) -> Result<Config, Failure> {
    let mut c = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::new(),
    };
    for pair in &cli.set {
        c.set_pair(pair).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(c)
}

fn read_keywords(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect())
}

fn load_rules(path: Option<&Path>, needed: bool) -> Result<Option<ZoneRuleTable>, Failure> {
    match path {
        Some(p) => Ok(Some(ZoneRuleTable::load(p)?)),
        None if needed => Err(Failure::Usage("middle-zone mode needs --rules".into())),
        None => Ok(None),
    }
}

/// Zone boundaries per line from a directory, or else from the manifest.
fn line_zones(lines: &[LineData], dir: Option<&Path>) -> Result<Vec<ZoneBoundaries>, Failure> {
    match dir {
        Some(d) => Ok(lines.iter().map(|l| ZoneBoundaries::load(&d.join(format!("{}.zones.tsv", l.id)))).collect::<Result<_, _>>()?),
        None => {
            let missing: Vec<&str> = lines.iter().filter(|l| l.truth.is_none()).map(|l| l.id.as_str()).collect();
            if !missing.is_empty() {
                return Err(Failure::Usage(format!(
                    "zone boundaries needed: pass --zones or list zone files in the manifest (missing for {})",
                    missing.join(", ")
                )));
            }
            Ok(lines.iter().map(|l| l.truth.clone().unwrap()).collect())
        }
    }
}

fn cmd_synth(config: &Config, out: &Path) -> CmdResult {
    let cfg = SynthConfig::from_config(config)?;
    let corpus = generate(&cfg)?;
    let layout = corpus.write(out)?;
    println!(
        "wrote {} training and {} test lines, {} keywords to {}",
        corpus.train.len(),
        corpus.test.len(),
        corpus.vocabulary.keywords.len(),
        layout.root.display()
    );
    Ok(())
}

fn cmd_train_chars(cfg: &PipelineConfig, a: &TrainCharsArgs) -> CmdResult {
    let mode: SpotMode = a.mode.into();
    let lines = load_manifest_lines(&a.manifest)?;
    let rules = load_rules(a.rules.as_deref(), mode == SpotMode::Middle)?;
    let zones = match mode {
        SpotMode::Middle => Some(line_zones(&lines, a.zones.as_deref())?),
        SpotMode::Full => None,
    };
    let (models, log) = train_char_models(&lines, zones.as_deref(), mode, a.features.into(), rules.as_ref(), cfg)?;
    models.save(&a.out)?;
    let log_path = a.log.clone().unwrap_or_else(|| with_suffix(&a.out, ".log.csv"));
    write_file(&log_path, &log.to_csv())?;
    println!("trained {} models on {} lines; wrote {} and {}", models.len(), lines.len(), a.out.display(), log_path.display());
    Ok(())
}

fn cmd_train_zones(cfg: &PipelineConfig, manifest: &Path, out: &Path, log: Option<&Path>) -> CmdResult {
    let lines = load_manifest_lines(manifest)?;
    let (models, train_log) = train_zone_models(&lines, cfg)?;
    models.save(out)?;
    let log_path = log.map(Path::to_path_buf).unwrap_or_else(|| with_suffix(out, ".log.csv"));
    write_file(&log_path, &train_log.to_csv())?;
    println!("trained zone models; wrote {} and {}", out.display(), log_path.display());
    Ok(())
}

fn cmd_segment(cfg: &PipelineConfig, a: &SegmentArgs) -> CmdResult {
    let lines = load_manifest_lines(&a.manifest)?;
    let models = a.model.as_deref().map(ModelSet::<f64>::load).transpose()?;
    let method = match a.baseline {
        Some(Baseline::Global) => ZoneMethod::Projection(ProjectionMode::Global),
        Some(Baseline::Local) => ZoneMethod::Projection(ProjectionMode::Local),
        None => ZoneMethod::Hmm,
    };
    let zones = segment_lines(&lines, method, models.as_ref(), cfg)?;
    fs::create_dir_all(&a.out).map_err(|e| io_err(&a.out, e))?;
    for (l, z) in lines.iter().zip(&zones) {
        z.save(&a.out.join(format!("{}.zones.tsv", l.id)))?;
    }
    print!("wrote {} zone files to {}", zones.len(), a.out.display());
    if lines.iter().all(|l| l.truth.is_some()) {
        print!("; mean absolute boundary error {:.3} px", mean_zone_error(&lines, &zones)?);
    }
    println!();
    Ok(())
}

fn cmd_spot(cfg: &PipelineConfig, a: &SpotArgs) -> CmdResult {
    let mode: SpotMode = a.mode.into();
    let lines = load_manifest_lines(&a.manifest)?;
    let models = ModelSet::<f64>::load(&a.models)?;
    let rules = load_rules(a.rules.as_deref(), mode == SpotMode::Middle || a.rerank)?;
    let zones = if mode == SpotMode::Middle || a.rerank { Some(line_zones(&lines, a.zones.as_deref())?) } else { None };
    let raw = read_keywords(&a.keywords)?;
    let (keywords, oov) = prepare_keywords(&raw, mode, &models, rules.as_ref());
    for k in &oov {
        warn!("keyword {k:?} cannot be spelled with the models; skipped");
    }
    let fallback = a.threshold.unwrap_or(f64::NEG_INFINITY);
    let threshold = match &a.thresholds {
        Some(p) => ThresholdPolicy::Local { thresholds: read_thresholds(p)?, fallback },
        None => ThresholdPolicy::Global(fallback),
    };
    for k in &keywords {
        if let (_, true) = threshold.threshold(&k.query.raw) {
            if a.thresholds.is_some() {
                warn!("no threshold for {:?}; using the global value {fallback}", k.query.raw);
            }
        }
    }
    let opts = SpotOptions { mode, features: a.features.into(), threshold, rerank: a.rerank };
    let hits = spot_lines(&lines, zones.as_deref(), &models, &keywords, &opts, cfg)?;
    write_hits(&a.out, &hits)?;
    let kept = hits.iter().filter(|h| h.kept).count();
    println!("{} hits ({kept} kept) for {} keywords on {} lines; {} skipped", hits.len(), keywords.len(), lines.len(), oov.len());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> CmdResult {
    let hits = read_hits(&a.hits)?;
    let manifest = Manifest::load(&a.manifest)?;
    let keywords = read_keywords(&a.keywords)?;
    let gt = GroundTruth::from_transcriptions(manifest.records.iter().map(|r| (r.line_id.as_str(), r.transcription.as_str())), &keywords)?;
    let report = evaluate(&hits, &gt, &keywords)?;
    for k in &report.excluded {
        info!("keyword {k:?} has no relevant lines and is left out of the mean");
    }
    write_file(&with_suffix(&a.out, ".curve.csv"), &report.curve_csv())?;
    write_file(&with_suffix(&a.out, ".report.tsv"), &report.report_tsv())?;
    if a.svg {
        let title = a.hits.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        write_file(&with_suffix(&a.out, ".svg"), &report.curve_svg(&title))?;
    }
    if let Some(p) = &a.fit_thresholds {
        let totals = keywords.iter().map(|k| (k.clone(), gt.relevant_count(k))).collect();
        let fitted = fit_local_thresholds(&hits, &|h| gt.is_relevant(&h.line_id, &h.keyword), &totals);
        write_file(p, &thresholds_to_tsv(&fitted))?;
    }
    println!("MAP {:.4} over {} keywords", report.map, report.per_keyword.len());
    Ok(())
}

fn cmd_dtw(cfg: &PipelineConfig, train: &Path, test: &Path, words: &Path, keywords: &Path, out: &Path) -> CmdResult {
    let (train, test) = (load_manifest_lines(train)?, load_manifest_lines(test)?);
    let words = read_word_boxes(words)?;
    let keywords = read_keywords(keywords)?;
    let hits = dtw_baseline(&train, &test, &words, &keywords, cfg)?;
    write_hits(out, &hits)?;
    println!("{} hits for {} keywords on {} lines", hits.len(), keywords.len(), test.len());
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    let config = load_config(cli)?;
    let cfg = || PipelineConfig::from_config(&config).map_err(|e| Failure::Usage(e.to_string()));
    match &cli.command {
        Command::Synth { out } => cmd_synth(&config, out),
        Command::TrainChars(a) => cmd_train_chars(&cfg()?, a),
        Command::TrainZones { manifest, out, log } => cmd_train_zones(&cfg()?, manifest, out, log.as_deref()),
        Command::SegmentZones(a) => cmd_segment(&cfg()?, a),
        Command::Spot(a) => cmd_spot(&cfg()?, a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::DtwBaseline { train, test, words, keywords, out } => cmd_dtw(&cfg()?, train, test, words, keywords, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
