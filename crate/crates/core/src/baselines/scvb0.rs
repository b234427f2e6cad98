use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document};
use crate::counts::TopicWordCounts;
use crate::error::{Error, Result};
use crate::hdp_state::DocState;
use crate::model::TopicModel;
use crate::numerics::ScheduleParams;
use crate::pcsvb0::{Progress, TokenSweeper, DEFAULT_CORPUS_SCHEDULE, DEFAULT_DOC_SCHEDULE};

#[derive(Debug, Clone, PartialEq)]
pub struct ScvbConfig {
    pub num_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub doc_schedule: ScheduleParams,
    pub corpus_schedule: ScheduleParams,
    pub epochs: usize,
    pub seed: u64,
}

impl ScvbConfig {
    pub fn new(num_topics: usize) -> Self {
        Self {
            num_topics,
            alpha: 0.1,
            beta: 0.01,
            doc_schedule: DEFAULT_DOC_SCHEDULE,
            corpus_schedule: DEFAULT_CORPUS_SCHEDULE,
            epochs: 30,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 {
            return Err(Error::invalid("topic count must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        for (name, x) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {x}")));
            }
        }
        self.doc_schedule.validate()?;
        self.corpus_schedule.validate()
    }
}

/// Corpus-level state of stochastic LDA with a symmetric document prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaState {
    pub counts: TopicWordCounts,
    pub alpha: f64,
    pub beta: f64,
    pub n_total: f64,
    pub num_docs: usize,
}

impl TopicModel for LdaState {
    fn num_topics(&self) -> usize {
        self.counts.num_topics()
    }

    fn vocab_size(&self) -> usize {
        self.counts.vocab_size()
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn prior_into(&self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.alpha);
    }

    fn term_counts_into(&self, term: usize, out: &mut [f64]) {
        self.counts.column_into(term, out);
    }

    fn topic_totals(&self) -> &[f64] {
        self.counts.topic_totals()
    }
}

#[derive(Debug, Clone)]
pub struct Scvb0 {
    config: ScvbConfig,
    state: LdaState,
    doc_states: Vec<DocState>,
    sweeper: TokenSweeper,
    prior: Vec<f64>,
    rng: ChaCha8Rng,
    documents_seen: usize,
}

impl Scvb0 {
    /// Initialization draws from the same seeded stream as the HDP trainer,
    /// so both start from identical counts for equal seeds and shapes.
    pub fn new(corpus: &Corpus, config: ScvbConfig) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let k = config.num_topics;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n_total = corpus.num_tokens() as f64;
        let state = LdaState {
            counts: TopicWordCounts::random_init(k, corpus.vocab_size, n_total, &mut rng),
            alpha: config.alpha,
            beta: config.beta,
            n_total,
            num_docs: corpus.num_docs(),
        };
        Ok(Self {
            sweeper: TokenSweeper::new(k, config.doc_schedule, config.corpus_schedule)?,
            prior: vec![config.alpha; k],
            doc_states: corpus.documents.iter().map(|d| DocState::uniform(d.len(), k)).collect(),
            config,
            state,
            rng,
            documents_seen: 0,
        })
    }

    pub fn config(&self) -> &ScvbConfig {
        &self.config
    }

    pub fn state(&self) -> &LdaState {
        &self.state
    }

    pub fn doc_state(&self, index: usize) -> &DocState {
        &self.doc_states[index]
    }

    pub fn into_state(self) -> LdaState {
        self.state
    }

    pub fn process_document_observed<F: FnMut(&[f64])>(
        &mut self,
        index: usize,
        doc: &Document,
        observer: F,
    ) -> Result<()> {
        if let Some(&w) = doc.tokens.iter().find(|&&w| w >= self.state.counts.vocab_size()) {
            return Err(Error::invalid(format!("term id {w} outside vocabulary")));
        }
        self.sweeper.sweep(
            &mut self.state.counts,
            &mut self.doc_states[index],
            &doc.tokens,
            &self.prior,
            self.state.beta,
            self.state.n_total,
            observer,
        );
        self.documents_seen += 1;
        Ok(())
    }

    pub fn run_epoch<H>(&mut self, corpus: &Corpus, epoch: usize, hook: &mut H) -> Result<()>
    where
        H: FnMut(Progress, &LdaState) -> Result<()>,
    {
        let mut order: Vec<usize> = (0..corpus.num_docs()).collect();
        order.shuffle(&mut self.rng);
        let last = order.len() - 1;
        for (i, &d) in order.iter().enumerate() {
            self.process_document_observed(d, &corpus.documents[d], |_| {})?;
            let progress = Progress {
                epoch,
                documents_seen: self.documents_seen,
                epoch_done: i == last,
            };
            hook(progress, &self.state)?;
        }
        Ok(())
    }
}

pub fn scvb0_train<H>(corpus: &Corpus, config: ScvbConfig, mut hook: H) -> Result<LdaState>
where
    H: FnMut(Progress, &LdaState) -> Result<()>,
{
    let epochs = config.epochs;
    let mut trainer = Scvb0::new(corpus, config)?;
    for epoch in 1..=epochs {
        trainer.run_epoch(corpus, epoch, &mut hook)?;
    }
    Ok(trainer.into_state())
}
