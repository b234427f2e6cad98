//! Held-out perplexity and the algorithm comparison driver.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::{info, warn};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::baselines::{Pcvb0, Pcvb0Config, Scvb0, ScvbConfig};
use crate::corpus::{split_heldout_documents, split_train_heldout, Corpus, HeldOutDocument};
use crate::error::{Error, Result};
use crate::hdp_state::DocState;
use crate::model::{token_posterior, TopicModel};
use crate::numerics::{ScheduleParams, StepSchedule};
use crate::pcsvb0::{Pcsvb0, TrainerConfig, DEFAULT_DOC_SCHEDULE};

/// How independent held-out documents are evaluated. `Parallel` falls back
/// to sequential when the crate is built without the `parallel` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutConfig {
    pub passes: usize,
    pub doc_schedule: ScheduleParams,
}

impl Default for HeldOutConfig {
    fn default() -> Self {
        Self {
            passes: 20,
            doc_schedule: DEFAULT_DOC_SCHEDULE,
        }
    }
}

/// Fits a held-out document's topic counts against a frozen model using the
/// per-token document update only, restarting the step clock every pass.
pub fn estimate_heldout_doc<M: TopicModel + ?Sized>(
    model: &M,
    doc: &HeldOutDocument,
    passes: usize,
    doc_schedule: ScheduleParams,
) -> Result<DocState> {
    if passes == 0 {
        return Err(Error::invalid("held-out passes must be at least 1"));
    }
    let t = model.num_topics();
    let v = model.vocab_size();
    let tokens = &doc.estimation_tokens;
    if tokens.is_empty() {
        warn!("held-out document has no estimation tokens");
        return Ok(DocState {
            n_dk: vec![0.0; t],
            n_d: 0.0,
        });
    }
    if let Some(&w) = tokens.iter().find(|&&w| w >= v) {
        return Err(Error::invalid(format!("term id {w} outside vocabulary")));
    }
    let mut state = DocState::uniform(tokens.len(), t);
    let prior = model.prior();
    let totals = model.topic_totals();
    let beta = model.beta();
    let vb = v as f64 * beta;
    let mut clock = StepSchedule::new(doc_schedule)?;
    let mut column = vec![0.0; t];
    let mut q = vec![0.0; t];
    for _ in 0..passes {
        clock.reset();
        for &w in tokens {
            model.term_counts_into(w, &mut column);
            token_posterior(&state.n_dk, &prior, &column, totals, beta, vb, &mut q);
            let rho = clock.rho();
            for (n, &qk) in state.n_dk.iter_mut().zip(&q) {
                *n = (1.0 - rho) * *n + rho * state.n_d * qk;
            }
            clock.advance();
        }
    }
    Ok(state)
}

/// Sum of `ln p(w | d)` over `tokens` and the token count, with
/// `p(w | d) = sum_k theta_dk phi_kw`.
pub fn log_likelihood<M: TopicModel + ?Sized>(model: &M, state: &DocState, tokens: &[usize]) -> Result<f64> {
    let t = model.num_topics();
    let v = model.vocab_size();
    let prior = model.prior();
    let prior_sum: f64 = prior.iter().sum();
    let theta: Vec<f64> = state
        .n_dk
        .iter()
        .zip(&prior)
        .map(|(n, a)| (n + a) / (state.n_d + prior_sum))
        .collect();
    let beta = model.beta();
    let vb = v as f64 * beta;
    let denom: Vec<f64> = model.topic_totals().iter().map(|n| n + vb).collect();
    let mut column = vec![0.0; t];
    let mut total = 0.0;
    for &w in tokens {
        if w >= v {
            return Err(Error::invalid(format!("term id {w} outside vocabulary")));
        }
        model.term_counts_into(w, &mut column);
        let p: f64 = (0..t).map(|k| theta[k] * (column[k] + beta) / denom[k]).sum();
        if !(p > 0.0) {
            return Err(Error::Domain(format!("zero predictive probability for term {w}")));
        }
        total += p.ln();
    }
    Ok(total)
}

/// `exp(-(sum ln p) / N)` over every evaluation token of every document.
pub fn perplexity<M: TopicModel + ?Sized>(model: &M, states: &[DocState], eval_tokens: &[Vec<usize>]) -> Result<f64> {
    if states.len() != eval_tokens.len() {
        return Err(Error::invalid("document states and evaluation sets differ in length"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (state, tokens) in states.iter().zip(eval_tokens) {
        sum += log_likelihood(model, state, tokens)?;
        count += tokens.len();
    }
    finish_perplexity(sum, count)
}

fn finish_perplexity(log_sum: f64, count: usize) -> Result<f64> {
    if count == 0 {
        return Err(Error::invalid("no evaluation tokens"));
    }
    Ok((-log_sum / count as f64).exp())
}

/// Estimates every held-out document and scores its evaluation tokens.
/// Per-document sums are reduced in document order, so the result does not
/// depend on `exec`.
pub fn heldout_perplexity<M: TopicModel + ?Sized>(
    model: &M,
    heldout: &[HeldOutDocument],
    config: &HeldOutConfig,
    exec: Execution,
) -> Result<f64> {
    let score = |doc: &HeldOutDocument| -> Result<(f64, usize)> {
        let state = estimate_heldout_doc(model, doc, config.passes, config.doc_schedule)?;
        let ll = log_likelihood(model, &state, &doc.evaluation_tokens)?;
        Ok((ll, doc.evaluation_tokens.len()))
    };
    let parts: Vec<Result<(f64, usize)>> = match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => heldout.par_iter().map(score).collect(),
        _ => heldout.iter().map(score).collect(),
    };
    let mut sum = 0.0;
    let mut count = 0;
    for part in parts {
        let (ll, n) = part?;
        sum += ll;
        count += n;
    }
    finish_perplexity(sum, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Pcsvb0,
    Pcvb0,
    Scvb0,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Pcsvb0 => "pcsvb0",
            Algorithm::Pcvb0 => "pcvb0",
            Algorithm::Scvb0 => "scvb0",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pcsvb0" => Ok(Algorithm::Pcsvb0),
            "pcvb0" => Ok(Algorithm::Pcvb0),
            "scvb0" => Ok(Algorithm::Scvb0),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityRecord {
    pub algorithm: Algorithm,
    pub epoch: usize,
    pub documents_seen: usize,
    pub perplexity: f64,
    pub wall_ms: u128,
}

pub const CSV_HEADER: &str = "algorithm,epoch,documents_seen,perplexity,wall_ms";

impl PerplexityRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.algorithm, self.epoch, self.documents_seen, self.perplexity, self.wall_ms
        )
    }
}

/// Writes records as they arrive, flushing after each row.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
        };
        w.line(CSV_HEADER)?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.out, "{text}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn write(&mut self, record: &PerplexityRecord) -> Result<()> {
        self.line(&record.csv_row())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub pcsvb0: TrainerConfig,
    pub pcvb0: Pcvb0Config,
    /// Required when SCVB0 is requested; its topic count has no default.
    pub scvb0: Option<ScvbConfig>,
    pub train_fraction: f64,
    pub estimation_fraction: f64,
    pub split_seed: u64,
    pub heldout: HeldOutConfig,
    /// Evaluate after every `eval_every` epochs (and always after the last).
    pub eval_every: usize,
    /// When false, `wall_ms` is written as 0 so repeated runs are byte-identical.
    pub record_wall_time: bool,
    pub execution: Execution,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![Algorithm::Pcsvb0, Algorithm::Pcvb0],
            pcsvb0: TrainerConfig::default(),
            pcvb0: Pcvb0Config::default(),
            scvb0: None,
            train_fraction: 0.8,
            estimation_fraction: 0.7,
            split_seed: 0,
            heldout: HeldOutConfig::default(),
            eval_every: 1,
            record_wall_time: true,
            execution: Execution::Parallel,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub algorithm: Algorithm,
    pub records: Vec<PerplexityRecord>,
    /// Fraction-of-mass summary of the final model: topics needed to cover 90% of `n_k`.
    pub effective_topics: usize,
    pub final_topic_mass: Vec<f64>,
}

pub fn csv_path(dir: &Path, algorithm: Algorithm) -> PathBuf {
    dir.join(format!("{algorithm}.csv"))
}

struct Recorder {
    algorithm: Algorithm,
    writer: Option<RecordWriter>,
    records: Vec<PerplexityRecord>,
    record_wall_time: bool,
    train_time: Duration,
}

impl Recorder {
    fn new(algorithm: Algorithm, config: &ExperimentConfig) -> Result<Self> {
        let writer = match &config.output_dir {
            Some(dir) => Some(RecordWriter::create(csv_path(dir, algorithm))?),
            None => None,
        };
        Ok(Self {
            algorithm,
            writer,
            records: Vec::new(),
            record_wall_time: config.record_wall_time,
            train_time: Duration::ZERO,
        })
    }

    fn push(&mut self, epoch: usize, documents_seen: usize, perplexity: f64) -> Result<()> {
        let record = PerplexityRecord {
            algorithm: self.algorithm,
            epoch,
            documents_seen,
            perplexity,
            wall_ms: if self.record_wall_time {
                self.train_time.as_millis()
            } else {
                0
            },
        };
        info!("{} epoch {epoch}: perplexity {perplexity:.3}", self.algorithm);
        if let Some(w) = &mut self.writer {
            w.write(&record)?;
        }
        self.records.push(record);
        Ok(())
    }
}

fn due(epoch: usize, last: usize, every: usize) -> bool {
    epoch.is_multiple_of(every) || epoch == last
}

/// Splits the corpus, trains every requested algorithm and records held-out
/// perplexity against documents seen. Rows are flushed to disk as they are
/// produced, so a failure leaves the completed part of each curve behind.
pub fn run_experiment(corpus: &Corpus, config: &ExperimentConfig) -> Result<Vec<AlgorithmRun>> {
    if config.eval_every == 0 {
        return Err(Error::invalid("evaluation cadence must be at least 1"));
    }
    let (train, heldout_docs) = split_train_heldout(corpus, config.train_fraction, config.split_seed)?;
    let heldout = split_heldout_documents(&heldout_docs, config.estimation_fraction, config.split_seed)?;
    if heldout.is_empty() {
        return Err(Error::invalid("no held-out documents to evaluate"));
    }
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    info!(
        "{} training documents, {} held-out documents",
        train.num_docs(),
        heldout.len()
    );

    let mut runs = Vec::new();
    for &algorithm in &config.algorithms {
        let mut rec = Recorder::new(algorithm, config)?;
        let eval = |m: &dyn TopicModel| heldout_perplexity(m, &heldout, &config.heldout, config.execution);
        let final_mass = match algorithm {
            Algorithm::Pcsvb0 => {
                let mut trainer = Pcsvb0::new(&train, config.pcsvb0.clone())?;
                let epochs = config.pcsvb0.epochs;
                for epoch in 1..=epochs {
                    let start = Instant::now();
                    trainer.run_epoch(&train, epoch, &mut |_, _| Ok(()))?;
                    rec.train_time += start.elapsed();
                    if due(epoch, epochs, config.eval_every) {
                        rec.push(epoch, trainer.documents_seen(), eval(trainer.global())?)?;
                    }
                }
                trainer.global().n_k_by_stick()
            }
            Algorithm::Scvb0 => {
                let scvb = config
                    .scvb0
                    .clone()
                    .ok_or_else(|| Error::invalid("SCVB0 requires an explicit topic count"))?;
                let epochs = scvb.epochs;
                let mut trainer = Scvb0::new(&train, scvb)?;
                for epoch in 1..=epochs {
                    let start = Instant::now();
                    trainer.run_epoch(&train, epoch, &mut |_, _| Ok(()))?;
                    rec.train_time += start.elapsed();
                    if due(epoch, epochs, config.eval_every) {
                        rec.push(epoch, epoch * train.num_docs(), eval(trainer.state())?)?;
                    }
                }
                trainer.state().topic_totals().to_vec()
            }
            Algorithm::Pcvb0 => {
                let start = Instant::now();
                let mut model = Pcvb0::new(&train, &config.pcvb0)?;
                rec.train_time += start.elapsed();
                let iterations = config.pcvb0.iterations;
                for it in 1..=iterations {
                    let start = Instant::now();
                    model.iterate(&train, 1)?;
                    rec.train_time += start.elapsed();
                    if due(it, iterations, config.eval_every) {
                        rec.push(it, it * train.num_docs(), eval(&model)?)?;
                    }
                }
                model.n_k.clone()
            }
        };
        runs.push(AlgorithmRun {
            algorithm,
            records: rec.records,
            effective_topics: crate::hdp_state::effective_topics(&final_mass, 0.9),
            final_topic_mass: final_mass,
        });
    }
    Ok(runs)
}
