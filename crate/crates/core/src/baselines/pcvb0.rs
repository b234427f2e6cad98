//! Batch collapsed variational inference (zero-order) for the HDP.
//!
//! Every token keeps its own variational distribution so that it can be
//! excluded from the counts while it is being updated. Memory is
//! `O(tokens * T)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::hdp_state::{batch_update_alpha, batch_update_uv, update_gamma, Sticks, ALPHA_MAX, ALPHA_MIN};
use crate::model::{token_posterior, TopicModel};

const NEGATIVE_TOLERANCE: f64 = -1e-9;

/// Per-token topic posteriors for the whole training corpus, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPosteriorStore {
    num_topics: usize,
    /// Token offset of each document; one trailing entry.
    doc_offsets: Vec<usize>,
    q: Vec<f64>,
}

impl TokenPosteriorStore {
    fn new(corpus: &Corpus, num_topics: usize) -> Self {
        let mut doc_offsets = Vec::with_capacity(corpus.num_docs() + 1);
        let mut acc = 0;
        doc_offsets.push(0);
        for d in &corpus.documents {
            acc += d.len();
            doc_offsets.push(acc);
        }
        Self {
            num_topics,
            doc_offsets,
            q: vec![0.0; acc * num_topics],
        }
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn get(&self, doc: usize, pos: usize) -> &[f64] {
        let i = self.doc_offsets[doc] + pos;
        &self.q[i * self.num_topics..(i + 1) * self.num_topics]
    }

    fn get_mut(&mut self, doc: usize, pos: usize) -> &mut [f64] {
        let i = self.doc_offsets[doc] + pos;
        &mut self.q[i * self.num_topics..(i + 1) * self.num_topics]
    }

    /// All token posteriors of one document, concatenated.
    pub fn document(&self, doc: usize) -> &[f64] {
        let t = self.num_topics;
        &self.q[self.doc_offsets[doc] * t..self.doc_offsets[doc + 1] * t]
    }

    pub fn num_docs(&self) -> usize {
        self.doc_offsets.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pcvb0Config {
    pub num_topics: usize,
    pub beta: f64,
    pub alpha_init: f64,
    pub gamma_init: f64,
    pub iterations: usize,
    pub seed: u64,
    pub hyper_updates_enabled: bool,
}

impl Default for Pcvb0Config {
    fn default() -> Self {
        Self {
            num_topics: 200,
            beta: 0.01,
            alpha_init: 1.0,
            gamma_init: 1.0,
            iterations: 30,
            seed: 0,
            hyper_updates_enabled: true,
        }
    }
}

impl Pcvb0Config {
    pub fn validate(&self) -> Result<()> {
        if self.num_topics < 2 {
            return Err(Error::invalid("truncation must be at least 2"));
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
        Ok(())
    }
}

/// Batch PCVB0 state. Sticks keep their initial order (`order` is the identity).
#[derive(Debug, Clone, PartialEq)]
pub struct Pcvb0 {
    pub store: TokenPosteriorStore,
    /// Document-major `n_dk`.
    pub n_dk: Vec<f64>,
    /// Term-major `n_kw`: `n_kw[w * T + k]`.
    pub n_kw: Vec<f64>,
    pub n_k: Vec<f64>,
    pub sticks: Sticks,
    pub beta: f64,
    vocab_size: usize,
    hyper_updates_enabled: bool,
}

impl Pcvb0 {
    /// Random token posteriors from the seeded generator; counts are their sums.
    pub fn new(corpus: &Corpus, config: &Pcvb0Config) -> Result<Self> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let t = config.num_topics;
        let v = corpus.vocab_size;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = TokenPosteriorStore::new(corpus, t);
        for q in store.q.chunks_exact_mut(t) {
            q.iter_mut().for_each(|x| *x = rng.random_range(0.5..1.5));
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|x| *x /= s);
        }
        let mut model = Self {
            store,
            n_dk: vec![0.0; corpus.num_docs() * t],
            n_kw: vec![0.0; v * t],
            n_k: vec![0.0; t],
            sticks: Sticks::new(t, config.alpha_init, config.gamma_init),
            beta: config.beta,
            vocab_size: v,
            hyper_updates_enabled: config.hyper_updates_enabled,
        };
        model.rebuild_counts(corpus);
        Ok(model)
    }

    fn rebuild_counts(&mut self, corpus: &Corpus) {
        let t = self.store.num_topics;
        self.n_dk.iter_mut().for_each(|x| *x = 0.0);
        self.n_kw.iter_mut().for_each(|x| *x = 0.0);
        self.n_k.iter_mut().for_each(|x| *x = 0.0);
        for (d, doc) in corpus.documents.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                let q = self.store.get(d, i);
                for k in 0..t {
                    self.n_dk[d * t + k] += q[k];
                    self.n_kw[w * t + k] += q[k];
                    self.n_k[k] += q[k];
                }
            }
        }
    }

    pub fn num_topics(&self) -> usize {
        self.store.num_topics
    }

    pub fn doc_counts(&self, doc: usize) -> &[f64] {
        let t = self.num_topics();
        &self.n_dk[doc * t..(doc + 1) * t]
    }

    /// Re-estimates token `(doc, pos)` with term `w` with itself excluded
    /// from the counts. Returns the new posterior.
    pub fn token_update(&mut self, doc: usize, pos: usize, w: usize) -> Result<&[f64]> {
        let t = self.num_topics();
        let vb = self.vocab_size as f64 * self.beta;
        let mut prior = vec![0.0; t];
        self.sticks.prior_into(&mut prior);

        let old = self.store.get(doc, pos).to_vec();
        let n_dk = &mut self.n_dk[doc * t..(doc + 1) * t];
        let n_kw = &mut self.n_kw[w * t..(w + 1) * t];
        for k in 0..t {
            n_dk[k] -= old[k];
            n_kw[k] -= old[k];
            self.n_k[k] -= old[k];
            if n_dk[k] < NEGATIVE_TOLERANCE || n_kw[k] < NEGATIVE_TOLERANCE || self.n_k[k] < NEGATIVE_TOLERANCE {
                return Err(Error::Consistency(format!(
                    "negative count after excluding token ({doc}, {pos}) in topic {k}"
                )));
            }
        }
        let excl_dk: Vec<f64> = n_dk.iter().map(|x| x.max(0.0)).collect();
        let excl_kw: Vec<f64> = n_kw.iter().map(|x| x.max(0.0)).collect();
        let excl_k: Vec<f64> = self.n_k.iter().map(|x| x.max(0.0)).collect();
        let q = self.store.get_mut(doc, pos);
        token_posterior(&excl_dk, &prior, &excl_kw, &excl_k, self.beta, vb, q);
        for k in 0..t {
            n_dk[k] += q[k];
            n_kw[k] += q[k];
            self.n_k[k] += q[k];
        }
        Ok(self.store.get(doc, pos))
    }

    /// One pass over every token of the corpus, in document order.
    pub fn sweep(&mut self, corpus: &Corpus) -> Result<()> {
        for (d, doc) in corpus.documents.iter().enumerate() {
            for (i, &w) in doc.tokens.iter().enumerate() {
                self.token_update(d, i, w)?;
            }
        }
        Ok(())
    }

    /// Expected presence of every topic in every document, from the stored posteriors.
    pub fn presence(&self) -> Vec<Vec<f64>> {
        let t = self.num_topics();
        let one = |d: usize| -> Vec<f64> {
            let mut miss = vec![1.0; t];
            for q in self.store.document(d).chunks_exact(t) {
                for (m, &qk) in miss.iter_mut().zip(q) {
                    *m *= 1.0 - qk;
                }
            }
            miss.into_iter().map(|m| (1.0 - m).clamp(0.0, 1.0)).collect()
        };
        #[cfg(feature = "parallel")]
        {
            (0..self.store.num_docs()).into_par_iter().map(one).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..self.store.num_docs()).map(one).collect()
        }
    }

    /// Sticks, `pi`, `alpha` and `gamma` from the current token posteriors.
    pub fn update_hyper(&mut self, corpus: &Corpus) -> Result<()> {
        let presence = self.presence();
        let (u, v) = batch_update_uv(&presence, self.sticks.gamma)?;
        self.sticks.u = u;
        self.sticks.v = v;
        self.sticks.recompute_pi();
        let lengths: Vec<usize> = corpus.documents.iter().map(|d| d.len()).collect();
        let alpha = batch_update_alpha(&presence, &lengths, self.sticks.alpha)?;
        self.sticks.alpha = alpha.clamp(ALPHA_MIN, ALPHA_MAX);
        self.sticks.gamma = update_gamma(&self.sticks.u, &self.sticks.v)?;
        Ok(())
    }

    /// `iterations` rounds of a full sweep followed by the batch hyper updates.
    pub fn iterate(&mut self, corpus: &Corpus, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            self.sweep(corpus)?;
            if self.hyper_updates_enabled {
                self.update_hyper(corpus)?;
            }
        }
        Ok(())
    }

    /// Largest absolute gap between the counts and the sums of stored posteriors.
    pub fn consistency_gap(&self, corpus: &Corpus) -> f64 {
        let mut fresh = self.clone();
        fresh.rebuild_counts(corpus);
        let gap = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        gap(&self.n_dk, &fresh.n_dk)
            .max(gap(&self.n_kw, &fresh.n_kw))
            .max(gap(&self.n_k, &fresh.n_k))
    }
}

impl TopicModel for Pcvb0 {
    fn num_topics(&self) -> usize {
        self.store.num_topics
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn prior_into(&self, out: &mut [f64]) {
        self.sticks.prior_into(out);
    }

    fn term_counts_into(&self, term: usize, out: &mut [f64]) {
        let t = self.store.num_topics;
        out.copy_from_slice(&self.n_kw[term * t..(term + 1) * t]);
    }

    fn topic_totals(&self) -> &[f64] {
        &self.n_k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    #[test]
    fn single_token_corpus_gives_uniform_posterior() {
        let corpus = Corpus::new(vec![Document::new(vec![1])], 3);
        let mut m = Pcvb0::new(
            &corpus,
            &Pcvb0Config {
                num_topics: 2,
                ..Default::default()
            },
        )
        .unwrap();
        m.sticks.pi = vec![0.5, 0.5];
        let q = m.token_update(0, 0, 1).unwrap().to_vec();
        assert!((q[0] - 0.5).abs() < 1e-15 && (q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn counts_track_stored_posteriors() {
        let corpus = Corpus::new(
            vec![
                Document::new(vec![0, 1, 2, 2, 1]),
                Document::new(vec![3, 3, 4]),
                Document::new(vec![0, 4, 4, 1]),
            ],
            5,
        );
        let config = Pcvb0Config {
            num_topics: 4,
            seed: 2,
            ..Default::default()
        };
        let mut m = Pcvb0::new(&corpus, &config).unwrap();
        for _ in 0..5 {
            m.iterate(&corpus, 1).unwrap();
            assert!(m.consistency_gap(&corpus) < 1e-9);
            for d in 0..3 {
                for i in 0..corpus.documents[d].len() {
                    assert!((m.store.get(d, i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_iterations_is_identity_and_runs_are_deterministic() {
        let corpus = Corpus::new(vec![Document::new(vec![0, 1, 1]), Document::new(vec![2, 0])], 3);
        let config = Pcvb0Config {
            num_topics: 3,
            seed: 9,
            ..Default::default()
        };
        let mut a = Pcvb0::new(&corpus, &config).unwrap();
        let before = a.clone();
        a.iterate(&corpus, 0).unwrap();
        assert_eq!(a, before);
        a.iterate(&corpus, 3).unwrap();
        let mut b = Pcvb0::new(&corpus, &config).unwrap();
        b.iterate(&corpus, 3).unwrap();
        assert_eq!(a, b);
    }
}
