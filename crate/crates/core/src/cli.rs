//! Command-line front end: `train`, `eval`, `experiment` and `synth`.
//!
//! Every run resolves a [`RunConfig`] from defaults, an optional flat
//! `key=value` file (`--config`), then command-line flags, in that order of
//! precedence. The resolved configuration is echoed to the output directory
//! as `config.txt` in the same `key=value` form.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::warn;

use crate::baselines::{scvb0_train, Pcvb0, Pcvb0Config, ScvbConfig};
use crate::corpus::{load_corpus, load_corpus_with_vocab, split_heldout_documents, CorpusFormat};
use crate::error::{Error, Result};
use crate::eval::{heldout_perplexity, run_experiment, Algorithm, Execution, ExperimentConfig, HeldOutConfig};
use crate::hdp_state::effective_topics;
use crate::numerics::ScheduleParams;
use crate::pcsvb0::{self, TrainerConfig, DEFAULT_CORPUS_SCHEDULE, DEFAULT_DOC_SCHEDULE, DEFAULT_HYPER_SCHEDULE};
use crate::snapshot::ModelSnapshot;
use crate::synthetic::{self, SyntheticSpec};
use crate::TopicModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Eval,
    Experiment,
}

impl Command {
    fn as_str(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Experiment => "experiment",
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub corpus: Option<PathBuf>,
    pub format: CorpusFormat,
    pub algorithm: Algorithm,
    pub algorithms: Vec<Algorithm>,
    pub model: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub topics: usize,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub scvb_topics: Option<usize>,
    pub scvb_alpha: f64,
    pub epochs: usize,
    pub seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
    pub estimation_fraction: f64,
    pub heldout_passes: usize,
    pub eval_every: usize,
    pub hyper_updates: bool,
    pub wall_time: bool,
    pub corpus_schedule: ScheduleParams,
    pub doc_schedule: ScheduleParams,
    pub hyper_schedule: ScheduleParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Experiment,
            corpus: None,
            format: CorpusFormat::PlainText,
            algorithm: Algorithm::Pcsvb0,
            algorithms: vec![Algorithm::Pcsvb0, Algorithm::Scvb0, Algorithm::Pcvb0],
            model: None,
            output_dir: PathBuf::from("out"),
            topics: 200,
            beta: 0.01,
            alpha: 1.0,
            gamma: 1.0,
            scvb_topics: None,
            scvb_alpha: 0.1,
            epochs: 30,
            seed: 0,
            split_seed: 0,
            train_fraction: 0.8,
            estimation_fraction: 0.7,
            heldout_passes: 20,
            eval_every: 1,
            hyper_updates: true,
            wall_time: true,
            corpus_schedule: DEFAULT_CORPUS_SCHEDULE,
            doc_schedule: DEFAULT_DOC_SCHEDULE,
            hyper_schedule: DEFAULT_HYPER_SCHEDULE,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("invalid value {value:?} for {key}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    let v = value.trim();
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn path_str(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one `key=value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "command" => {
                self.command = match v {
                    "train" => Command::Train,
                    "eval" => Command::Eval,
                    "experiment" => Command::Experiment,
                    _ => return Err(Error::invalid(format!("unknown command {v:?}"))),
                }
            }
            "corpus" => self.corpus = opt_path(v),
            "format" => self.format = v.parse()?,
            "algorithm" => self.algorithm = v.parse()?,
            "algorithms" => {
                self.algorithms = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "model" => self.model = opt_path(v),
            "output_dir" => self.output_dir = PathBuf::from(v),
            "topics" | "T" => self.topics = parse_value("topics", v)?,
            "beta" => self.beta = parse_value("beta", v)?,
            "alpha" => self.alpha = parse_value("alpha", v)?,
            "gamma" => self.gamma = parse_value("gamma", v)?,
            "scvb_topics" => {
                self.scvb_topics = if v.is_empty() {
                    None
                } else {
                    Some(parse_value("scvb_topics", v)?)
                }
            }
            "scvb_alpha" => self.scvb_alpha = parse_value("scvb_alpha", v)?,
            "epochs" => self.epochs = parse_value("epochs", v)?,
            "seed" => self.seed = parse_value("seed", v)?,
            "split_seed" => self.split_seed = parse_value("split_seed", v)?,
            "train_fraction" => self.train_fraction = parse_value("train_fraction", v)?,
            "estimation_fraction" => self.estimation_fraction = parse_value("estimation_fraction", v)?,
            "heldout_passes" => self.heldout_passes = parse_value("heldout_passes", v)?,
            "eval_every" => self.eval_every = parse_value("eval_every", v)?,
            "hyper_updates" => self.hyper_updates = parse_value("hyper_updates", v)?,
            "wall_time" => self.wall_time = parse_value("wall_time", v)?,
            "corpus_s" => self.corpus_schedule.scale = parse_value(key, v)?,
            "corpus_tau" => self.corpus_schedule.offset = parse_value(key, v)?,
            "corpus_kappa" => self.corpus_schedule.kappa = parse_value(key, v)?,
            "doc_s" => self.doc_schedule.scale = parse_value(key, v)?,
            "doc_tau" => self.doc_schedule.offset = parse_value(key, v)?,
            "doc_kappa" => self.doc_schedule.kappa = parse_value(key, v)?,
            "hyper_s" => self.hyper_schedule.scale = parse_value(key, v)?,
            "hyper_tau" => self.hyper_schedule.offset = parse_value(key, v)?,
            "hyper_kappa" => self.hyper_schedule.kappa = parse_value(key, v)?,
            other => return Err(Error::invalid(format!("unknown setting {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key=value` text; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, got {line:?}"),
            })?;
            self.apply(key, value)?;
        }
        Ok(())
    }

    pub fn from_echo(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    /// Every setting, defaults included, one `key=value` per line.
    pub fn echo(&self) -> String {
        let algorithms: Vec<&str> = self.algorithms.iter().map(Algorithm::as_str).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("command", self.command.as_str().into());
        kv("corpus", path_str(&self.corpus));
        kv("format", self.format.as_str().into());
        kv("algorithm", self.algorithm.as_str().into());
        kv("algorithms", algorithms.join(","));
        kv("model", path_str(&self.model));
        kv("output_dir", self.output_dir.display().to_string());
        kv("T", self.topics.to_string());
        kv("beta", self.beta.to_string());
        kv("alpha", self.alpha.to_string());
        kv("gamma", self.gamma.to_string());
        kv(
            "scvb_topics",
            self.scvb_topics.map(|k| k.to_string()).unwrap_or_default(),
        );
        kv("scvb_alpha", self.scvb_alpha.to_string());
        kv("epochs", self.epochs.to_string());
        kv("seed", self.seed.to_string());
        kv("split_seed", self.split_seed.to_string());
        kv("train_fraction", self.train_fraction.to_string());
        kv("estimation_fraction", self.estimation_fraction.to_string());
        kv("heldout_passes", self.heldout_passes.to_string());
        kv("eval_every", self.eval_every.to_string());
        kv("hyper_updates", self.hyper_updates.to_string());
        kv("wall_time", self.wall_time.to_string());
        for (prefix, p) in [
            ("corpus", self.corpus_schedule),
            ("doc", self.doc_schedule),
            ("hyper", self.hyper_schedule),
        ] {
            kv(&format!("{prefix}_s"), p.scale.to_string());
            kv(&format!("{prefix}_tau"), p.offset.to_string());
            kv(&format!("{prefix}_kappa"), p.kappa.to_string());
        }
        s
    }

    pub fn trainer_config(&self) -> TrainerConfig {
        TrainerConfig {
            num_topics: self.topics,
            beta: self.beta,
            alpha_init: self.alpha,
            gamma_init: self.gamma,
            doc_schedule: self.doc_schedule,
            corpus_schedule: self.corpus_schedule,
            hyper_schedule: self.hyper_schedule,
            epochs: self.epochs,
            seed: self.seed,
            hyper_updates_enabled: self.hyper_updates,
        }
    }

    pub fn pcvb0_config(&self) -> Pcvb0Config {
        Pcvb0Config {
            num_topics: self.topics,
            beta: self.beta,
            alpha_init: self.alpha,
            gamma_init: self.gamma,
            iterations: self.epochs,
            seed: self.seed,
            hyper_updates_enabled: self.hyper_updates,
        }
    }

    /// SCVB0 settings; without an explicit topic count the truncation level is used.
    pub fn scvb_config(&self) -> ScvbConfig {
        ScvbConfig {
            num_topics: self.scvb_topics.unwrap_or(self.topics),
            alpha: self.scvb_alpha,
            beta: self.beta,
            doc_schedule: self.doc_schedule,
            corpus_schedule: self.corpus_schedule,
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    fn uses(&self, algorithm: Algorithm) -> bool {
        match self.command {
            Command::Train => self.algorithm == algorithm,
            Command::Experiment => self.algorithms.contains(&algorithm),
            Command::Eval => false,
        }
    }

    pub fn experiment_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            algorithms: self.algorithms.clone(),
            pcsvb0: self.trainer_config(),
            pcvb0: self.pcvb0_config(),
            scvb0: Some(self.scvb_config()),
            train_fraction: self.train_fraction,
            estimation_fraction: self.estimation_fraction,
            split_seed: self.split_seed,
            heldout: HeldOutConfig {
                passes: self.heldout_passes,
                doc_schedule: self.doc_schedule,
            },
            eval_every: self.eval_every,
            record_wall_time: self.wall_time,
            execution: Execution::Parallel,
            output_dir: Some(self.output_dir.clone()),
        }
    }

    /// Checks every parameter against the contracts of the modules that consume it.
    pub fn validate(&self) -> Result<()> {
        if self.corpus.is_none() {
            return Err(Error::invalid("--corpus is required"));
        }
        if self.command == Command::Eval && self.model.is_none() {
            return Err(Error::invalid("--model is required for eval"));
        }
        if self.command == Command::Experiment && self.algorithms.is_empty() {
            return Err(Error::invalid("at least one algorithm is required"));
        }
        for (name, f) in [
            ("train fraction", self.train_fraction),
            ("estimation fraction", self.estimation_fraction),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("{name} must lie in (0, 1), got {f}")));
            }
        }
        if self.heldout_passes == 0 {
            return Err(Error::invalid("heldout passes must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::invalid("eval_every must be at least 1"));
        }
        self.doc_schedule.validate()?;
        if self.command != Command::Eval {
            self.trainer_config().validate()?;
        }
        if self.uses(Algorithm::Scvb0) {
            self.scvb_config().validate()?;
        }
        if self.uses(Algorithm::Pcvb0) {
            self.pcvb0_config().validate()?;
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hdp-svb",
    version,
    about = "Collapsed stochastic variational inference for HDP topic models",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand, Debug)]
enum CliCommand {
    /// Fit one algorithm on a corpus and write a model snapshot.
    Train(RunArgs),
    /// Score a corpus as held-out data against a saved snapshot.
    Eval(RunArgs),
    /// Compare algorithms by held-out perplexity against documents seen.
    Experiment(RunArgs),
    /// Write a synthetic corpus drawn from a known LDA model.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat key=value file pre-seeding any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// plain-text-lines or uci-bow
    #[arg(long)]
    format: Option<String>,
    /// Algorithm for `train`: pcsvb0, pcvb0 or scvb0.
    #[arg(long)]
    algorithm: Option<String>,
    /// Comma-separated algorithms for `experiment`.
    #[arg(long)]
    algorithms: Option<String>,
    /// Snapshot to write (`train`) or read (`eval`).
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Truncation level T.
    #[arg(long = "topics", short = 'T')]
    topics: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// Initial document concentration.
    #[arg(long)]
    alpha: Option<f64>,
    /// Initial top-level concentration.
    #[arg(long)]
    gamma: Option<f64>,
    /// Topic count K for scvb0 (defaults to T).
    #[arg(long)]
    scvb_topics: Option<usize>,
    /// Symmetric document prior for scvb0.
    #[arg(long)]
    scvb_alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    estimation_fraction: Option<f64>,
    #[arg(long)]
    heldout_passes: Option<usize>,
    /// Evaluate every N epochs.
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    hyper_updates: Option<bool>,
    /// Record training time in the CSV; `false` writes 0 for byte-reproducible output.
    #[arg(long)]
    wall_time: Option<bool>,
    #[arg(long)]
    corpus_s: Option<f64>,
    #[arg(long)]
    corpus_tau: Option<f64>,
    #[arg(long)]
    corpus_kappa: Option<f64>,
    #[arg(long)]
    doc_s: Option<f64>,
    #[arg(long)]
    doc_tau: Option<f64>,
    #[arg(long)]
    doc_kappa: Option<f64>,
    #[arg(long)]
    hyper_s: Option<f64>,
    #[arg(long)]
    hyper_tau: Option<f64>,
    #[arg(long)]
    hyper_kappa: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        fn s<T: ToString>(x: &Option<T>) -> Option<String> {
            x.as_ref().map(T::to_string)
        }
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string());
        [
            ("corpus", p(&self.corpus)),
            ("format", self.format.clone()),
            ("algorithm", self.algorithm.clone()),
            ("algorithms", self.algorithms.clone()),
            ("model", p(&self.model)),
            ("output_dir", p(&self.output_dir)),
            ("topics", s(&self.topics)),
            ("beta", s(&self.beta)),
            ("alpha", s(&self.alpha)),
            ("gamma", s(&self.gamma)),
            ("scvb_topics", s(&self.scvb_topics)),
            ("scvb_alpha", s(&self.scvb_alpha)),
            ("epochs", s(&self.epochs)),
            ("seed", s(&self.seed)),
            ("split_seed", s(&self.split_seed)),
            ("train_fraction", s(&self.train_fraction)),
            ("estimation_fraction", s(&self.estimation_fraction)),
            ("heldout_passes", s(&self.heldout_passes)),
            ("eval_every", s(&self.eval_every)),
            ("hyper_updates", s(&self.hyper_updates)),
            ("wall_time", s(&self.wall_time)),
            ("corpus_s", s(&self.corpus_s)),
            ("corpus_tau", s(&self.corpus_tau)),
            ("corpus_kappa", s(&self.corpus_kappa)),
            ("doc_s", s(&self.doc_s)),
            ("doc_tau", s(&self.doc_tau)),
            ("doc_kappa", s(&self.doc_kappa)),
            ("hyper_s", s(&self.hyper_s)),
            ("hyper_tau", s(&self.hyper_tau)),
            ("hyper_kappa", s(&self.hyper_kappa)),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    fn resolve(&self, command: Command) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            config.apply_text(&text)?;
        }
        config.command = command;
        for (key, value) in self.overrides() {
            config.apply(key, &value)?;
        }
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5)]
    topics: usize,
    #[arg(long, default_value_t = 100)]
    vocab_size: usize,
    #[arg(long, default_value_t = 250)]
    docs: usize,
    #[arg(long, default_value_t = 100)]
    doc_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Writes the resolved configuration to `<output_dir>/config.txt`.
pub fn emit_config_echo(config: &RunConfig) -> Result<PathBuf> {
    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, config.echo()).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn progress_writer(path: &Path) -> Result<impl FnMut(usize, usize, f64, Option<f64>, usize) -> Result<()>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let path = path.to_path_buf();
    writeln!(out, "documents_seen,epoch,alpha,gamma,effective_topics").map_err(|e| Error::io(&path, e))?;
    Ok(
        move |docs: usize, epoch: usize, alpha: f64, gamma: Option<f64>, eff: usize| {
            let gamma = gamma.map(|g| g.to_string()).unwrap_or_default();
            writeln!(out, "{docs},{epoch},{alpha},{gamma},{eff}")
                .and_then(|_| out.flush())
                .map_err(|e| Error::io(&path, e))
        },
    )
}

fn run_train(config: &RunConfig) -> Result<()> {
    let corpus_path = config.corpus.as_ref().expect("validated");
    let (corpus, vocab) = load_corpus(corpus_path, config.format)?;
    emit_config_echo(config)?;
    let model_path = config
        .model
        .clone()
        .unwrap_or_else(|| config.output_dir.join("model.snap"));
    let mut progress = progress_writer(&config.output_dir.join("progress.csv"))?;
    let snapshot = match config.algorithm {
        Algorithm::Pcsvb0 => {
            let state = pcsvb0::train(&corpus, config.trainer_config(), |p, g| {
                if p.epoch_done {
                    let eff = effective_topics(g.counts.topic_totals(), 0.9);
                    progress(p.documents_seen, p.epoch, g.sticks.alpha, Some(g.sticks.gamma), eff)?;
                }
                Ok(())
            })?;
            ModelSnapshot::from_hdp(&state, &vocab)?
        }
        Algorithm::Scvb0 => {
            let state = scvb0_train(&corpus, config.scvb_config(), |p, s| {
                if p.epoch_done {
                    let eff = effective_topics(s.topic_totals(), 0.9);
                    progress(p.documents_seen, p.epoch, s.alpha, None, eff)?;
                }
                Ok(())
            })?;
            ModelSnapshot::from_lda(&state, &vocab)?
        }
        Algorithm::Pcvb0 => {
            let mut model = Pcvb0::new(&corpus, &config.pcvb0_config())?;
            for it in 1..=config.epochs {
                model.iterate(&corpus, 1)?;
                let eff = effective_topics(&model.n_k, 0.9);
                progress(
                    it * corpus.num_docs(),
                    it,
                    model.sticks.alpha,
                    Some(model.sticks.gamma),
                    eff,
                )?;
            }
            ModelSnapshot::from_pcvb0(&model, &vocab)?
        }
    };
    snapshot.save(&model_path)?;
    println!("wrote {}", model_path.display());
    Ok(())
}

fn run_eval(config: &RunConfig) -> Result<()> {
    let snapshot = ModelSnapshot::load(config.model.as_ref().expect("validated"))?;
    let corpus = load_corpus_with_vocab(
        config.corpus.as_ref().expect("validated"),
        config.format,
        &snapshot.vocab,
    )?;
    emit_config_echo(config)?;
    let heldout = split_heldout_documents(&corpus.documents, config.estimation_fraction, config.split_seed)?;
    if heldout.is_empty() {
        return Err(Error::invalid("no documents long enough to evaluate"));
    }
    let held = HeldOutConfig {
        passes: config.heldout_passes,
        doc_schedule: config.doc_schedule,
    };
    let p = heldout_perplexity(&snapshot, &heldout, &held, Execution::Parallel)?;
    println!("documents={} perplexity={p}", heldout.len());
    Ok(())
}

fn run_experiment_command(config: &RunConfig) -> Result<()> {
    let (corpus, _) = load_corpus(config.corpus.as_ref().expect("validated"), config.format)?;
    if config.algorithms.contains(&Algorithm::Scvb0) && config.scvb_topics.is_none() {
        warn!("no --scvb-topics given; scvb0 uses K = T = {}", config.topics);
    }
    emit_config_echo(config)?;
    let runs = run_experiment(&corpus, &config.experiment_config())?;
    for run in runs {
        if let Some(last) = run.records.last() {
            println!(
                "{}: final perplexity {} after {} documents ({} topics hold 90% of mass)",
                run.algorithm, last.perplexity, last.documents_seen, run.effective_topics
            );
        }
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_topics: args.topics,
        vocab_size: args.vocab_size,
        num_docs: args.docs,
        mean_len: args.doc_len,
        len_jitter: args.doc_len / 5,
        seed: args.seed,
        ..SyntheticSpec::default()
    };
    let corpus = synthetic::generate(&spec)?;
    fs::write(&args.output, synthetic::to_plain_text(&corpus)).map_err(|e| Error::io(&args.output, e))
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let (command, args) = match &cli.command {
        CliCommand::Train(a) => (Command::Train, a),
        CliCommand::Eval(a) => (Command::Eval, a),
        CliCommand::Experiment(a) => (Command::Experiment, a),
        CliCommand::Synth(a) => {
            return match run_synth(a) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_RUNTIME
                }
            };
        }
    };
    let config = match args.resolve(command).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = match command {
        Command::Train => run_train(&config),
        Command::Eval => run_eval(&config),
        Command::Experiment => run_experiment_command(&config),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
