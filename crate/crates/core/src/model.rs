//! Read-only view of a fitted topic model, shared by every inference
//! algorithm and by saved snapshots.

use crate::hdp_state::GlobalState;

pub trait TopicModel: Sync {
    fn num_topics(&self) -> usize;

    fn vocab_size(&self) -> usize;

    fn beta(&self) -> f64;

    /// Document-level Dirichlet weights per topic (`alpha * pi_k` for the HDP,
    /// a constant for LDA).
    fn prior_into(&self, out: &mut [f64]);

    /// Expected counts `n_kw` of term `w` for every topic.
    fn term_counts_into(&self, term: usize, out: &mut [f64]);

    /// Expected topic totals `n_k`.
    fn topic_totals(&self) -> &[f64];

    fn prior(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.num_topics()];
        self.prior_into(&mut out);
        out
    }
}

/// `q_k ∝ (n_dk + prior_k) (n_kw + beta) / (n_k + V beta)`, normalized in place.
/// Returns the normalizer.
#[inline]
pub(crate) fn token_posterior(
    n_dk: &[f64],
    prior: &[f64],
    term_counts: &[f64],
    topic_totals: &[f64],
    beta: f64,
    vocab_beta: f64,
    q: &mut [f64],
) -> f64 {
    let mut norm = 0.0;
    for k in 0..q.len() {
        let x = (n_dk[k] + prior[k]) * (term_counts[k] + beta) / (topic_totals[k] + vocab_beta);
        q[k] = x;
        norm += x;
    }
    let inv = 1.0 / norm;
    q.iter_mut().for_each(|x| *x *= inv);
    norm
}

impl TopicModel for GlobalState {
    fn num_topics(&self) -> usize {
        self.sticks.num_topics()
    }

    fn vocab_size(&self) -> usize {
        self.counts.vocab_size()
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn prior_into(&self, out: &mut [f64]) {
        self.sticks.prior_into(out);
    }

    fn term_counts_into(&self, term: usize, out: &mut [f64]) {
        self.counts.column_into(term, out);
    }

    fn topic_totals(&self) -> &[f64] {
        self.counts.topic_totals()
    }
}
