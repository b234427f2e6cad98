//! Global state of the collapsed HDP: expected counts, truncated
//! stick-breaking weights and the concentration hyper-parameters.
//!
//! Per-topic count arrays (`n_kw`, `n_k`, every document's `n_dk`) are
//! indexed by a stable storage *slot*. The sticks (`u`, `v`, `pi`) are indexed
//! by *position* in the stick-breaking order, and `order[position] = slot`.
//! Re-ordering the sticks therefore permutes only the `T`-length stick
//! parameters and the slot map; no count array is moved.

use rand::Rng;

use crate::corpus::Corpus;
use crate::counts::TopicWordCounts;
use crate::error::{Error, Result};
use crate::numerics::digamma;

pub const ALPHA_MIN: f64 = 1e-4;
pub const ALPHA_MAX: f64 = 1e4;
pub const GAMMA_MIN: f64 = 1e-4;
pub const GAMMA_MAX: f64 = 1e4;

fn check_positive(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(x) => Err(Error::invalid(format!("{what} must be positive, got {x}"))),
        None => Ok(()),
    }
}

fn check_probabilities(xs: &[f64], what: &str) -> Result<()> {
    match xs.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        Some(x) => Err(Error::invalid(format!("{what} must lie in [0, 1], got {x}"))),
        None => Ok(()),
    }
}

fn check_step(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("step size must lie in (0, 1], got {rho}")))
    }
}

/// Truncated stick-breaking weights from Beta parameters `u`, `v`.
///
/// Proportions are `u_k / (u_k + v_k)` except the last, which is fixed at 1.
pub fn stick_breaking(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() || u.is_empty() {
        return Err(Error::invalid(format!(
            "stick parameters must have equal non-zero length, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    check_positive(u, "u")?;
    check_positive(v, "v")?;
    let mut pi = vec![0.0; u.len()];
    stick_breaking_into(u, v, &mut pi);
    Ok(pi)
}

pub(crate) fn stick_breaking_into(u: &[f64], v: &[f64], pi: &mut [f64]) {
    let last = pi.len() - 1;
    let mut remaining = 1.0;
    for k in 0..last {
        let frac = u[k] / (u[k] + v[k]);
        pi[k] = remaining * frac;
        remaining *= 1.0 - frac;
    }
    pi[last] = remaining;
}

/// Probability that a topic is used at least once in a document:
/// `1 - prod_i (1 - q_i)`.
pub fn expected_presence(q: &[f64]) -> Result<f64> {
    check_probabilities(q, "token posterior")?;
    let miss: f64 = q.iter().map(|qi| 1.0 - qi).product();
    Ok((1.0 - miss).clamp(0.0, 1.0))
}

/// Batch lower-bound stick parameters from per-document presences
/// (rows are documents, columns stick positions).
pub fn batch_update_uv(presence: &[Vec<f64>], gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let t = presence.first().map_or(0, Vec::len);
    if t == 0 {
        return Err(Error::invalid("presence matrix has no topics"));
    }
    let mut column = vec![0.0; t];
    for row in presence {
        if row.len() != t {
            return Err(Error::invalid("ragged presence matrix"));
        }
        check_probabilities(row, "presence")?;
        for (c, &p) in column.iter_mut().zip(row) {
            *c += p;
        }
    }
    let u = column.iter().map(|c| 1.0 + c).collect();
    let mut v = vec![0.0; t];
    let mut tail = 0.0;
    for k in (0..t).rev() {
        v[k] = gamma + tail;
        tail += column[k];
    }
    Ok((u, v))
}

/// Stochastic stick update: convex combination of the current parameters
/// and the batch values of a corpus made of `num_docs` copies of one document.
pub fn stochastic_update_uv(
    u: &mut [f64],
    v: &mut [f64],
    presence: &[f64],
    gamma: f64,
    num_docs: f64,
    rho: f64,
) -> Result<()> {
    check_step(rho)?;
    check_probabilities(presence, "presence")?;
    if u.len() != presence.len() || v.len() != presence.len() {
        return Err(Error::invalid("presence length differs from truncation"));
    }
    let keep = 1.0 - rho;
    let mut tail = 0.0;
    for k in (0..presence.len()).rev() {
        u[k] = keep * u[k] + rho * (1.0 + num_docs * presence[k]);
        v[k] = keep * v[k] + rho * (gamma + num_docs * tail);
        tail += presence[k];
    }
    Ok(())
}

/// One fixed-point step for the document concentration. Not clamped; the
/// result is 0 when no presence registers.
pub fn batch_update_alpha(presence: &[Vec<f64>], doc_lengths: &[usize], alpha_old: f64) -> Result<f64> {
    if !(alpha_old > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha_old}")));
    }
    if presence.len() != doc_lengths.len() {
        return Err(Error::invalid("presence rows differ from document count"));
    }
    let mut numerator = 0.0;
    for row in presence {
        check_probabilities(row, "presence")?;
        numerator += row.iter().sum::<f64>();
    }
    let psi_alpha = digamma(alpha_old)?;
    let mut denominator = 0.0;
    for &n in doc_lengths {
        if n == 0 {
            return Err(Error::invalid("document lengths must be at least 1"));
        }
        denominator += digamma(n as f64 + alpha_old)? - psi_alpha;
    }
    if !(denominator > 0.0) {
        return Err(Error::Domain("alpha update has zero denominator".into()));
    }
    Ok(numerator / denominator)
}

pub fn stochastic_update_alpha(alpha: f64, presence: &[f64], doc_len: usize, rho: f64) -> Result<f64> {
    check_step(rho)?;
    check_probabilities(presence, "presence")?;
    if doc_len == 0 {
        return Err(Error::invalid("document length must be at least 1"));
    }
    let denominator = digamma(doc_len as f64 + alpha)? - digamma(alpha)?;
    let target = presence.iter().sum::<f64>() / denominator;
    let target = target.clamp(ALPHA_MIN, ALPHA_MAX);
    Ok(((1.0 - rho) * alpha + rho * target).clamp(ALPHA_MIN, ALPHA_MAX))
}

/// Point estimate of the top-level concentration from the first `T - 1` sticks.
pub fn update_gamma(u: &[f64], v: &[f64]) -> Result<f64> {
    let t = u.len();
    if t < 2 {
        return Err(Error::invalid("gamma undefined at truncation 1"));
    }
    if v.len() != t {
        return Err(Error::invalid("stick parameter lengths differ"));
    }
    check_positive(u, "u")?;
    check_positive(v, "v")?;
    let mut denominator = 0.0;
    for k in 0..t - 1 {
        denominator += digamma(u[k] + v[k])? - digamma(v[k])?;
    }
    Ok(((t - 1) as f64 / denominator).clamp(GAMMA_MIN, GAMMA_MAX))
}

/// Smallest number of topics whose combined mass reaches `coverage` of the total.
pub fn effective_topics(mass: &[f64], coverage: f64) -> usize {
    let mut sorted: Vec<f64> = mass.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (i, m) in sorted.iter().enumerate() {
        acc += m;
        if acc >= coverage * total {
            return i + 1;
        }
    }
    sorted.len()
}

/// Stick-breaking parameters and concentrations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sticks {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
    /// `order[position]` is the storage slot of the topic at that stick position.
    pub order: Vec<usize>,
    pub alpha: f64,
    pub gamma: f64,
}

impl Sticks {
    pub fn new(num_topics: usize, alpha: f64, gamma: f64) -> Self {
        let u = vec![1.0; num_topics];
        let v = vec![gamma; num_topics];
        let mut pi = vec![0.0; num_topics];
        stick_breaking_into(&u, &v, &mut pi);
        Self {
            u,
            v,
            pi,
            order: (0..num_topics).collect(),
            alpha,
            gamma,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.u.len()
    }

    pub fn recompute_pi(&mut self) {
        stick_breaking_into(&self.u, &self.v, &mut self.pi);
    }

    /// `alpha * pi` written into slot order.
    pub fn prior_into(&self, out: &mut [f64]) {
        for (pos, &slot) in self.order.iter().enumerate() {
            out[slot] = self.alpha * self.pi[pos];
        }
    }

    pub fn slot_to_stick(&self, by_slot: &[f64]) -> Vec<f64> {
        self.order.iter().map(|&slot| by_slot[slot]).collect()
    }

    /// Sorts sticks by descending `mass` (slot-indexed), ties broken by
    /// current position. Returns the permutation applied: `perm[new] = old` position.
    pub fn reorder_by_mass(&mut self, mass: &[f64]) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.num_topics()).collect();
        perm.sort_by(|&a, &b| mass[self.order[b]].total_cmp(&mass[self.order[a]]));
        self.u = perm.iter().map(|&p| self.u[p]).collect();
        self.v = perm.iter().map(|&p| self.v[p]).collect();
        self.order = perm.iter().map(|&p| self.order[p]).collect();
        self.recompute_pi();
        perm
    }
}

/// Expected document-topic counts, slot-indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct DocState {
    pub n_dk: Vec<f64>,
    pub n_d: f64,
}

impl DocState {
    pub fn uniform(doc_len: usize, num_topics: usize) -> Self {
        let n_d = doc_len as f64;
        Self {
            n_dk: vec![n_d / num_topics as f64; num_topics],
            n_d,
        }
    }
}

/// Corpus-level state of the stochastic collapsed HDP.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalState {
    pub counts: TopicWordCounts,
    pub sticks: Sticks,
    pub beta: f64,
    /// Training token count `n`.
    pub n_total: f64,
    /// Training document count `D`.
    pub num_docs: usize,
}

impl GlobalState {
    pub fn initialize<R: Rng + ?Sized>(
        corpus: &Corpus,
        num_topics: usize,
        beta: f64,
        alpha: f64,
        gamma: f64,
        rng: &mut R,
    ) -> Self {
        let n_total = corpus.num_tokens() as f64;
        Self {
            counts: TopicWordCounts::random_init(num_topics, corpus.vocab_size, n_total, rng),
            sticks: Sticks::new(num_topics, alpha, gamma),
            beta,
            n_total,
            num_docs: corpus.num_docs(),
        }
    }

    /// A model with no observed counts.
    pub fn empty(num_topics: usize, vocab_size: usize, beta: f64, alpha: f64, gamma: f64) -> Self {
        Self {
            counts: TopicWordCounts::zeros(num_topics, vocab_size),
            sticks: Sticks::new(num_topics, alpha, gamma),
            beta,
            n_total: 0.0,
            num_docs: 0,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.sticks.num_topics()
    }

    pub fn vocab_size(&self) -> usize {
        self.counts.vocab_size()
    }

    /// Topic totals in stick order.
    pub fn n_k_by_stick(&self) -> Vec<f64> {
        self.sticks.slot_to_stick(self.counts.topic_totals())
    }

    /// `n_kw` for the topic at stick position `k`.
    pub fn n_kw_by_stick(&self, k: usize, w: usize) -> f64 {
        self.counts.get(self.sticks.order[k], w)
    }
}

/// Re-orders the sticks by descending expected topic mass `n_k`.
///
/// Returns the permutation of stick positions (`perm[new] = old`). Document
/// states are slot-indexed and stay valid without modification.
pub fn reorder_sticks(state: &mut GlobalState) -> Vec<usize> {
    let mass = state.counts.topic_totals().to_vec();
    state.sticks.reorder_by_mass(&mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn stick_breaking_examples() {
        assert_eq!(stick_breaking(&[3.0], &[2.0]).unwrap(), vec![1.0]);
        let pi = stick_breaking(&[2.0, 5.0], &[1.0, 5.0]).unwrap();
        assert!(close(pi[0], 2.0 / 3.0, 1e-15) && close(pi[1], 1.0 / 3.0, 1e-15));
        let pi = stick_breaking(&[1.0, 1.0, 9.0], &[1.0, 1.0, 9.0]).unwrap();
        assert_eq!(pi, vec![0.5, 0.25, 0.25]);
        assert!(stick_breaking(&[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(stick_breaking(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn presence_examples() {
        assert_eq!(expected_presence(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(close(expected_presence(&[0.3]).unwrap(), 0.3, 1e-15));
        assert_eq!(expected_presence(&[0.5, 0.5]).unwrap(), 0.75);
        assert!(expected_presence(&[1.2]).is_err());
        assert!(expected_presence(&[-0.1]).is_err());
    }

    #[test]
    fn batch_uv_examples() {
        let (u, v) = batch_update_uv(&[vec![0.0; 3], vec![0.0; 3]], 1.7).unwrap();
        assert_eq!(u, vec![1.0; 3]);
        assert_eq!(v, vec![1.7; 3]);
        let (u, v) = batch_update_uv(&[vec![1.0, 0.0]], 0.5).unwrap();
        assert_eq!(u, vec![2.0, 1.0]);
        assert_eq!(v, vec![0.5, 0.5]);
        let g = 0.3;
        let (u, v) = batch_update_uv(&[vec![1.0, 1.0, 0.0], vec![1.0, 0.0, 0.0]], g).unwrap();
        assert_eq!(u, vec![3.0, 2.0, 1.0]);
        assert_eq!(v, vec![g + 1.0, g, g]);
    }

    #[test]
    fn stochastic_uv_examples() {
        let mut u = vec![4.0, 2.0, 3.0];
        let mut v = vec![5.0, 5.0, 5.0];
        stochastic_update_uv(&mut u, &mut v, &[0.0; 3], 0.7, 10.0, 1.0).unwrap();
        assert_eq!(u, vec![1.0; 3]);
        assert_eq!(v, vec![0.7; 3]);

        let mut u = vec![3.0];
        let mut v = vec![1.0];
        stochastic_update_uv(&mut u, &mut v, &[0.2], 1.0, 10.0, 0.5).unwrap();
        assert!(close(u[0], 3.0, 1e-15));

        // fixed point
        let presence = [0.4, 0.1, 0.3];
        let (d, g) = (12.0, 0.9);
        let mut u: Vec<f64> = presence.iter().map(|p| 1.0 + d * p).collect();
        let mut v = vec![g + d * 0.4, g + d * 0.3, g];
        let (u0, v0) = (u.clone(), v.clone());
        stochastic_update_uv(&mut u, &mut v, &presence, g, d, 0.37).unwrap();
        for k in 0..3 {
            assert!(close(u[k], u0[k], 1e-12) && close(v[k], v0[k], 1e-12));
        }
        assert!(stochastic_update_uv(&mut u, &mut v, &presence, g, d, 0.0).is_err());
    }

    #[test]
    fn single_document_batch_matches_full_step() {
        let presence = vec![0.9, 0.35, 0.6, 0.0];
        let gamma = 1.3;
        let (bu, bv) = batch_update_uv(std::slice::from_ref(&presence), gamma).unwrap();
        let mut u = vec![7.0, 1.0, 2.0, 3.0];
        let mut v = vec![2.0; 4];
        stochastic_update_uv(&mut u, &mut v, &presence, gamma, 1.0, 1.0).unwrap();
        for k in 0..4 {
            assert!(close(u[k], bu[k], 1e-12) && close(v[k], bv[k], 1e-12));
        }
    }

    #[test]
    fn alpha_examples() {
        let a = batch_update_alpha(&[vec![1.0]], &[1], 1.0).unwrap();
        assert!(close(a, 1.0, 1e-10));
        assert_eq!(batch_update_alpha(&[vec![0.0, 0.0]], &[4], 1.0).unwrap(), 0.0);
        let rows = vec![vec![0.2, 0.45], vec![0.5, 0.1]];
        let doubled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| 2.0 * x).collect()).collect();
        let a1 = batch_update_alpha(&rows, &[3, 8], 0.6).unwrap();
        let a2 = batch_update_alpha(&doubled, &[3, 8], 0.6).unwrap();
        assert!(close(a2, 2.0 * a1, 1e-12));
        assert!(batch_update_alpha(&rows, &[3, 0], 0.6).is_err());
    }

    #[test]
    fn stochastic_alpha_examples() {
        let a = stochastic_update_alpha(1.0, &[1.0, 0.0], 1, 1.0).unwrap();
        assert!(close(a, 1.0, 1e-10));
        let a = stochastic_update_alpha(2.5, &[0.4, 0.3], 17, 1e-12).unwrap();
        assert!(close(a, 2.5, 1e-9));
        let a = stochastic_update_alpha(2.0, &[0.0, 0.0], 5, 0.25).unwrap();
        assert!(close(a, 0.75 * 2.0 + 0.25 * ALPHA_MIN, 1e-12));
    }

    #[test]
    fn gamma_examples() {
        assert!(close(update_gamma(&[1.0, 4.0], &[1.0, 4.0]).unwrap(), 1.0, 1e-10));
        assert!(close(
            update_gamma(&[1.0, 1.0, 9.0], &[1.0, 1.0, 9.0]).unwrap(),
            1.0,
            1e-10
        ));
        let small = update_gamma(&[100.0, 1.0], &[1.0, 1.0]).unwrap();
        let base = update_gamma(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(small < base);
        let err = update_gamma(&[1.0], &[1.0]).unwrap_err();
        assert!(err.to_string().contains("gamma undefined at truncation 1"));
    }

    #[test]
    fn reorder_transposes_and_is_identity_when_sorted() {
        let mut dense = vec![1.0; 2 * 3];
        dense[3..].iter_mut().for_each(|x| *x = 5.0);
        let mut state = GlobalState::empty(2, 3, 0.1, 1.0, 1.0);
        state.counts = TopicWordCounts::from_topic_major(2, 3, &dense);
        state.sticks.u = vec![2.0, 1.0];
        state.sticks.v = vec![3.0, 1.0];
        state.sticks.recompute_pi();

        let perm = reorder_sticks(&mut state);
        assert_eq!(perm, vec![1, 0]);
        assert_eq!(state.sticks.u, vec![1.0, 2.0]);
        assert_eq!(state.sticks.v, vec![1.0, 3.0]);
        assert_eq!(state.n_k_by_stick(), vec![15.0, 3.0]);
        assert_eq!(state.n_kw_by_stick(0, 2), 5.0);
        assert_eq!(state.sticks.pi, stick_breaking(&[1.0, 2.0], &[1.0, 3.0]).unwrap());

        let before = state.clone();
        let perm = reorder_sticks(&mut state);
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(state, before);
    }

    #[test]
    fn effective_topic_count() {
        assert_eq!(effective_topics(&[0.0, 0.0], 0.9), 0);
        assert_eq!(effective_topics(&[1.0, 90.0, 9.0], 0.9), 1);
        assert_eq!(effective_topics(&[1.0, 80.0, 19.0], 0.9), 2);
    }

    proptest! {
        #[test]
        fn stick_breaking_is_a_simplex(
            params in proptest::collection::vec((1e-3f64..1e3, 1e-3f64..1e3), 1..60)
        ) {
            let (u, v): (Vec<f64>, Vec<f64>) = params.into_iter().unzip();
            let pi = stick_breaking(&u, &v).unwrap();
            prop_assert!(pi.iter().all(|&p| p >= 0.0));
            prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn reorder_preserves_topic_mass_multiset(
            dense in proptest::collection::vec(0.0f64..10.0, 4 * 6),
            u in proptest::collection::vec(0.5f64..5.0, 4),
        ) {
            let mut state = GlobalState::empty(4, 6, 0.1, 1.0, 1.0);
            state.counts = TopicWordCounts::from_topic_major(4, 6, &dense);
            state.sticks.u = u;
            state.sticks.recompute_pi();
            let mut before = state.n_k_by_stick();
            let phi_before: Vec<Vec<f64>> = (0..4).map(|k| (0..6).map(|w| state.n_kw_by_stick(k, w)).collect()).collect();
            let perm = reorder_sticks(&mut state);
            let after = state.n_k_by_stick();
            prop_assert!(after.windows(2).all(|w| w[0] >= w[1]));
            for (new, &old) in perm.iter().enumerate() {
                for w in 0..6 {
                    prop_assert_eq!(state.n_kw_by_stick(new, w), phi_before[old][w]);
                }
            }
            let mut after_sorted = after.clone();
            before.sort_by(f64::total_cmp);
            after_sorted.sort_by(f64::total_cmp);
            prop_assert_eq!(before, after_sorted);
            prop_assert!((state.sticks.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
