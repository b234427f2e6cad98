//! Expected topic-word counts under repeated exponential decay.
//!
//! Every stochastic corpus-level update multiplies all `T x V` entries by
//! `1 - rho` and then adds mass to a single term column. The decay is kept as
//! one scalar multiplier over a raw matrix, so an update touches `T` entries
//! instead of `T * V`. Stored value = `scale * raw`.

use rand::Rng;

/// Below this the multiplier is folded back into the raw matrix.
const FOLD_THRESHOLD: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct TopicWordCounts {
    num_topics: usize,
    vocab_size: usize,
    // term-major: raw[w * num_topics + k]
    raw: Vec<f64>,
    scale: f64,
    topic_totals: Vec<f64>,
}

impl TopicWordCounts {
    pub fn zeros(num_topics: usize, vocab_size: usize) -> Self {
        Self {
            num_topics,
            vocab_size,
            raw: vec![0.0; num_topics * vocab_size],
            scale: 1.0,
            topic_totals: vec![0.0; num_topics],
        }
    }

    /// Builds counts from a topic-major (`k * V + w`) dense matrix.
    pub fn from_topic_major(num_topics: usize, vocab_size: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), num_topics * vocab_size);
        let mut counts = Self::zeros(num_topics, vocab_size);
        for k in 0..num_topics {
            for w in 0..vocab_size {
                let x = dense[k * vocab_size + w];
                counts.raw[w * num_topics + k] = x;
                counts.topic_totals[k] += x;
            }
        }
        counts
    }

    /// Symmetric counts with multiplicative noise in `[1 - 0.5, 1 + 0.5]`,
    /// rescaled so the total mass is exactly `total`.
    pub fn random_init<R: Rng + ?Sized>(num_topics: usize, vocab_size: usize, total: f64, rng: &mut R) -> Self {
        let base = total / (num_topics * vocab_size) as f64;
        let mut dense: Vec<f64> = (0..num_topics * vocab_size)
            .map(|_| base * (1.0 + rng.random_range(-0.5..=0.5)))
            .collect();
        let sum: f64 = dense.iter().sum();
        let fix = total / sum;
        dense.iter_mut().for_each(|x| *x *= fix);
        Self::from_topic_major(num_topics, vocab_size, &dense)
    }

    pub fn num_topics(&self) -> usize {
        self.num_topics
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    #[inline]
    pub fn get(&self, topic: usize, term: usize) -> f64 {
        self.scale * self.raw[term * self.num_topics + topic]
    }

    /// Writes `n_kw` for every topic of term `w` into `out`.
    #[inline]
    pub fn column_into(&self, term: usize, out: &mut [f64]) {
        let t = self.num_topics;
        let col = &self.raw[term * t..(term + 1) * t];
        for (o, &r) in out.iter_mut().zip(col) {
            *o = self.scale * r;
        }
    }

    /// Raw column and the multiplier that turns it into counts.
    #[inline]
    pub fn raw_column(&self, term: usize) -> (&[f64], f64) {
        let t = self.num_topics;
        (&self.raw[term * t..(term + 1) * t], self.scale)
    }

    pub fn topic_totals(&self) -> &[f64] {
        &self.topic_totals
    }

    pub fn total_mass(&self) -> f64 {
        self.scale * self.raw.iter().sum::<f64>()
    }

    /// Row sums recomputed from the matrix, for consistency checks.
    pub fn recomputed_topic_totals(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.num_topics];
        for col in self.raw.chunks_exact(self.num_topics) {
            for (t, &r) in totals.iter_mut().zip(col) {
                *t += r;
            }
        }
        totals.iter_mut().for_each(|t| *t *= self.scale);
        totals
    }

    /// `n_kw <- (1 - rho) n_kw + rho * mass * q_k * [w == term]`, with
    /// `n_k` updated the same way.
    pub fn decay_and_add(&mut self, term: usize, q: &[f64], rho: f64, mass: f64) {
        debug_assert_eq!(q.len(), self.num_topics);
        let keep = 1.0 - rho;
        if keep <= 0.0 {
            self.raw.iter_mut().for_each(|x| *x = 0.0);
            self.scale = 1.0;
        } else {
            self.scale *= keep;
            if self.scale < FOLD_THRESHOLD {
                self.fold();
            }
        }
        let t = self.num_topics;
        let add = rho * mass / self.scale;
        for (r, &qk) in self.raw[term * t..(term + 1) * t].iter_mut().zip(q) {
            *r += add * qk;
        }
        for (n, &qk) in self.topic_totals.iter_mut().zip(q) {
            *n = keep.max(0.0) * *n + rho * mass * qk;
        }
    }

    /// Multiplies the pending scale into the raw matrix.
    pub fn fold(&mut self) {
        let s = self.scale;
        self.raw.iter_mut().for_each(|x| *x *= s);
        self.scale = 1.0;
    }

    /// Dense topic-major copy, `out[k * V + w] = n_kw`.
    pub fn to_topic_major(&self) -> Vec<f64> {
        let (t, v) = (self.num_topics, self.vocab_size);
        let mut out = vec![0.0; t * v];
        for w in 0..v {
            for k in 0..t {
                out[k * v + w] = self.get(k, w);
            }
        }
        out
    }
}
