//! Word-at-a-time stochastic collapsed variational inference for the HDP.
//!
//! Each token updates its document's expected topic counts and the
//! corpus-level topic-word counts with decaying step sizes. After a document
//! has been processed the sticks are re-ordered by size and the stick
//! parameters and concentrations take one stochastic step.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document};
use crate::counts::TopicWordCounts;
use crate::error::{Error, Result};
use crate::hdp_state::{
    reorder_sticks, stochastic_update_alpha, stochastic_update_uv, update_gamma, DocState, GlobalState,
};
use crate::model::token_posterior;
use crate::numerics::{ScheduleParams, StepSchedule};

pub const DEFAULT_CORPUS_SCHEDULE: ScheduleParams = ScheduleParams::new(10.0, 1000.0, 0.9);
pub const DEFAULT_DOC_SCHEDULE: ScheduleParams = ScheduleParams::new(1.0, 10.0, 0.9);
pub const DEFAULT_HYPER_SCHEDULE: ScheduleParams = ScheduleParams::new(5.0, 100.0, 0.9);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    pub num_topics: usize,
    pub beta: f64,
    pub alpha_init: f64,
    pub gamma_init: f64,
    /// Document counts; restarts at every document visit, ticks per token.
    pub doc_schedule: ScheduleParams,
    /// Topic-word counts; ticks once per token over the whole run.
    pub corpus_schedule: ScheduleParams,
    /// Sticks and concentrations; ticks once per document.
    pub hyper_schedule: ScheduleParams,
    pub epochs: usize,
    pub seed: u64,
    pub hyper_updates_enabled: bool,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            num_topics: 200,
            beta: 0.01,
            alpha_init: 1.0,
            gamma_init: 1.0,
            doc_schedule: DEFAULT_DOC_SCHEDULE,
            corpus_schedule: DEFAULT_CORPUS_SCHEDULE,
            hyper_schedule: DEFAULT_HYPER_SCHEDULE,
            epochs: 30,
            seed: 0,
            hyper_updates_enabled: true,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_topics < 2 {
            return Err(Error::invalid(format!(
                "truncation must be at least 2, got {}",
                self.num_topics
            )));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        for (name, x) in [
            ("beta", self.beta),
            ("alpha", self.alpha_init),
            ("gamma", self.gamma_init),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {x}")));
            }
        }
        self.doc_schedule.validate()?;
        self.corpus_schedule.validate()?;
        self.hyper_schedule.validate()?;
        Ok(())
    }
}

/// Position in a training run, passed to progress hooks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    /// 1-based epoch currently running.
    pub epoch: usize,
    pub documents_seen: usize,
    /// True on the last document of an epoch.
    pub epoch_done: bool,
}

/// Approximate posterior over topics for one occurrence of term `w` in a document.
pub fn compute_qz(doc: &DocState, global: &GlobalState, w: usize) -> Result<Vec<f64>> {
    let t = global.num_topics();
    if w >= global.vocab_size() {
        return Err(Error::invalid(format!("term id {w} outside vocabulary")));
    }
    if doc.n_dk.len() != t {
        return Err(Error::invalid("document state has the wrong number of topics"));
    }
    let mut prior = vec![0.0; t];
    global.sticks.prior_into(&mut prior);
    let mut column = vec![0.0; t];
    global.counts.column_into(w, &mut column);
    let mut q = vec![0.0; t];
    let vb = global.vocab_size() as f64 * global.beta;
    let norm = token_posterior(
        &doc.n_dk,
        &prior,
        &column,
        global.counts.topic_totals(),
        global.beta,
        vb,
        &mut q,
    );
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain(format!("token posterior normalizer is {norm}")));
    }
    Ok(q)
}

fn check_distribution(q: &[f64]) -> Result<()> {
    let sum: f64 = q.iter().sum();
    if q.iter().any(|x| !(0.0..=1.0).contains(x)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("q must be a probability vector"));
    }
    Ok(())
}

fn check_step(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("step size must lie in (0, 1], got {rho}")))
    }
}

#[inline]
fn decay_doc_counts(n_dk: &mut [f64], n_d: f64, q: &[f64], rho: f64) {
    let keep = 1.0 - rho;
    for (n, &qk) in n_dk.iter_mut().zip(q) {
        *n = keep * *n + rho * n_d * qk;
    }
}

/// `n_dk <- (1 - rho) n_dk + rho n_d q_k`.
pub fn update_doc_counts(doc: &mut DocState, q: &[f64], rho: f64) -> Result<()> {
    check_step(rho)?;
    check_distribution(q)?;
    if q.len() != doc.n_dk.len() {
        return Err(Error::invalid("q length differs from document state"));
    }
    decay_doc_counts(&mut doc.n_dk, doc.n_d, q, rho);
    Ok(())
}

/// `n_kw <- (1 - rho) n_kw + rho n q_k [w == term]`.
pub fn update_topic_counts(global: &mut GlobalState, q: &[f64], w: usize, rho: f64) -> Result<()> {
    check_step(rho)?;
    check_distribution(q)?;
    if q.len() != global.num_topics() || w >= global.vocab_size() {
        return Err(Error::invalid("q length or term id out of range"));
    }
    global.counts.decay_and_add(w, q, rho, global.n_total);
    Ok(())
}

/// Token-level machinery shared by the HDP trainer and the LDA baseline.
#[derive(Debug, Clone)]
pub(crate) struct TokenSweeper {
    pub doc_clock: StepSchedule,
    pub corpus_clock: StepSchedule,
    q: Vec<f64>,
    column: Vec<f64>,
    /// Running `prod_i (1 - q_ik)` for the current document.
    pub miss: Vec<f64>,
}

impl TokenSweeper {
    pub fn new(num_topics: usize, doc: ScheduleParams, corpus: ScheduleParams) -> Result<Self> {
        Ok(Self {
            doc_clock: StepSchedule::new(doc)?,
            corpus_clock: StepSchedule::new(corpus)?,
            q: vec![0.0; num_topics],
            column: vec![0.0; num_topics],
            miss: vec![1.0; num_topics],
        })
    }

    /// One visit to a document: for every token compute `q`, update the
    /// document counts, then the corpus counts.
    pub fn sweep<F: FnMut(&[f64])>(
        &mut self,
        counts: &mut TopicWordCounts,
        doc_state: &mut DocState,
        tokens: &[usize],
        prior: &[f64],
        beta: f64,
        n_total: f64,
        mut observer: F,
    ) {
        let vb = counts.vocab_size() as f64 * beta;
        self.doc_clock.reset();
        self.miss.iter_mut().for_each(|m| *m = 1.0);
        for &w in tokens {
            counts.column_into(w, &mut self.column);
            token_posterior(
                &doc_state.n_dk,
                prior,
                &self.column,
                counts.topic_totals(),
                beta,
                vb,
                &mut self.q,
            );
            decay_doc_counts(&mut doc_state.n_dk, doc_state.n_d, &self.q, self.doc_clock.rho());
            counts.decay_and_add(w, &self.q, self.corpus_clock.rho(), n_total);
            self.doc_clock.advance();
            self.corpus_clock.advance();
            for (m, &qk) in self.miss.iter_mut().zip(&self.q) {
                *m *= 1.0 - qk;
            }
            observer(&self.q);
        }
    }

    /// Expected presence of each topic (slot order) in the last swept document.
    pub fn presence(&self) -> Vec<f64> {
        self.miss.iter().map(|m| (1.0 - m).clamp(0.0, 1.0)).collect()
    }
}

/// Stochastic collapsed HDP trainer.
#[derive(Debug, Clone)]
pub struct Pcsvb0 {
    config: TrainerConfig,
    global: GlobalState,
    doc_states: Vec<DocState>,
    sweeper: TokenSweeper,
    hyper_clock: StepSchedule,
    prior: Vec<f64>,
    rng: ChaCha8Rng,
    documents_seen: usize,
}

impl Pcsvb0 {
    pub fn new(corpus: &Corpus, config: TrainerConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let t = config.num_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let global = GlobalState::initialize(corpus, t, config.beta, config.alpha_init, config.gamma_init, &mut rng);
        let doc_states = corpus.documents.iter().map(|d| DocState::uniform(d.len(), t)).collect();
        Ok(Self {
            sweeper: TokenSweeper::new(t, config.doc_schedule, config.corpus_schedule)?,
            hyper_clock: StepSchedule::new(config.hyper_schedule)?,
            prior: vec![0.0; t],
            config,
            global,
            doc_states,
            rng,
            documents_seen: 0,
        })
    }

    pub fn global(&self) -> &GlobalState {
        &self.global
    }

    /// Mutable access for experiments that pin the stick weights.
    pub fn global_mut(&mut self) -> &mut GlobalState {
        &mut self.global
    }

    pub fn doc_state(&self, index: usize) -> &DocState {
        &self.doc_states[index]
    }

    pub fn documents_seen(&self) -> usize {
        self.documents_seen
    }

    pub fn into_global(self) -> GlobalState {
        self.global
    }

    /// Processes training document `index`. Returns its expected topic
    /// presence in stick order (after re-ordering).
    pub fn process_document(&mut self, index: usize, doc: &Document) -> Result<Vec<f64>> {
        self.process_document_observed(index, doc, |_| {})
    }

    /// As [`Pcsvb0::process_document`], calling `observer` with each token's
    /// posterior (slot order).
    pub fn process_document_observed<F: FnMut(&[f64])>(
        &mut self,
        index: usize,
        doc: &Document,
        observer: F,
    ) -> Result<Vec<f64>> {
        if doc.is_empty() {
            return Ok(vec![0.0; self.config.num_topics]);
        }
        if let Some(&w) = doc.tokens.iter().find(|&&w| w >= self.global.vocab_size()) {
            return Err(Error::invalid(format!("term id {w} outside vocabulary")));
        }
        self.global.sticks.prior_into(&mut self.prior);
        let state = &mut self.doc_states[index];
        self.sweeper.sweep(
            &mut self.global.counts,
            state,
            &doc.tokens,
            &self.prior,
            self.global.beta,
            self.global.n_total,
            observer,
        );
        let presence = self.sweeper.presence();
        self.documents_seen += 1;

        if !self.config.hyper_updates_enabled {
            self.hyper_clock.advance();
            return Ok(self.global.sticks.slot_to_stick(&presence));
        }

        reorder_sticks(&mut self.global);
        let presence = self.global.sticks.slot_to_stick(&presence);
        let rho = self.hyper_clock.rho();
        let sticks = &mut self.global.sticks;
        stochastic_update_uv(
            &mut sticks.u,
            &mut sticks.v,
            &presence,
            sticks.gamma,
            self.global.num_docs as f64,
            rho,
        )?;
        sticks.recompute_pi();
        sticks.gamma = update_gamma(&sticks.u, &sticks.v)?;
        sticks.alpha = stochastic_update_alpha(sticks.alpha, &presence, doc.len(), rho)?;
        self.hyper_clock.advance();
        Ok(presence)
    }

    /// Runs one shuffled pass over the corpus.
    pub fn run_epoch<H>(&mut self, corpus: &Corpus, epoch: usize, hook: &mut H) -> Result<()>
    where
        H: FnMut(Progress, &GlobalState) -> Result<()>,
    {
        let mut order: Vec<usize> = (0..corpus.num_docs()).collect();
        order.shuffle(&mut self.rng);
        let last = order.len() - 1;
        for (i, &d) in order.iter().enumerate() {
            self.process_document(d, &corpus.documents[d])?;
            let progress = Progress {
                epoch,
                documents_seen: self.documents_seen,
                epoch_done: i == last,
            };
            hook(progress, &self.global)?;
        }
        Ok(())
    }
}

/// Trains for `config.epochs` passes, calling `hook` after every document.
pub fn train<H>(corpus: &Corpus, config: TrainerConfig, mut hook: H) -> Result<GlobalState>
where
    H: FnMut(Progress, &GlobalState) -> Result<()>,
{
    let epochs = config.epochs;
    let mut trainer = Pcsvb0::new(corpus, config)?;
    for epoch in 1..=epochs {
        trainer.run_epoch(corpus, epoch, &mut hook)?;
    }
    Ok(trainer.into_global())
}
