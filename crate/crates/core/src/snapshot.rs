//! Plain-text model snapshots.
//!
//! Layout (one item per line, fields separated by single spaces, floats in
//! shortest round-trip form):
//!
//! ```text
//! hdp-svb-snapshot 1
//! kind hdp|lda
//! topics <T>
//! vocab_size <V>
//! alpha <f64>
//! gamma <f64>          (hdp only)
//! beta <f64>
//! u <T floats>         (hdp only)
//! v <T floats>         (hdp only)
//! n_k <T floats>
//! n_kw                 followed by T lines of V floats, topic-major, stick order
//! vocab                followed by V lines, one term each
//! end
//! ```

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::{LdaState, Pcvb0};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::hdp_state::{stick_breaking, GlobalState, Sticks};
use crate::model::TopicModel;

pub const MAGIC: &str = "hdp-svb-snapshot";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    /// Stick-breaking prior with concentrations.
    Hdp { gamma: f64, u: Vec<f64>, v: Vec<f64> },
    /// Symmetric document prior.
    Lda,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    pub kind: PriorKind,
    pub alpha: f64,
    pub beta: f64,
    pub n_k: Vec<f64>,
    /// Term-major copy of `n_kw` for fast column access.
    n_kw: Vec<f64>,
    pub vocab: Vocabulary,
    prior: Vec<f64>,
}

impl ModelSnapshot {
    fn build(
        kind: PriorKind,
        alpha: f64,
        beta: f64,
        n_k: Vec<f64>,
        topic_major: &[f64],
        vocab: Vocabulary,
    ) -> Result<Self> {
        let t = n_k.len();
        let v = vocab.len();
        if t == 0 || topic_major.len() != t * v {
            return Err(Error::Snapshot(format!(
                "count matrix has {} entries, expected {t} x {v}",
                topic_major.len()
            )));
        }
        let prior = match &kind {
            PriorKind::Hdp { u, v, .. } => stick_breaking(u, v)
                .map_err(|e| Error::Snapshot(e.to_string()))?
                .into_iter()
                .map(|p| alpha * p)
                .collect(),
            PriorKind::Lda => vec![alpha; t],
        };
        if prior.len() != t {
            return Err(Error::Snapshot("stick parameters differ from topic count".into()));
        }
        let mut n_kw = vec![0.0; t * v];
        for k in 0..t {
            for w in 0..v {
                n_kw[w * t + k] = topic_major[k * v + w];
            }
        }
        Ok(Self {
            kind,
            alpha,
            beta,
            n_k,
            n_kw,
            vocab,
            prior,
        })
    }

    fn from_sticks(
        sticks: &Sticks,
        beta: f64,
        n_k_slot: &[f64],
        n_kw: impl Fn(usize, usize) -> f64,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let v = vocab.len();
        let t = sticks.num_topics();
        let mut topic_major = vec![0.0; t * v];
        for (k, &slot) in sticks.order.iter().enumerate() {
            for w in 0..v {
                topic_major[k * v + w] = n_kw(slot, w);
            }
        }
        Self::build(
            PriorKind::Hdp {
                gamma: sticks.gamma,
                u: sticks.u.clone(),
                v: sticks.v.clone(),
            },
            sticks.alpha,
            beta,
            sticks.slot_to_stick(n_k_slot),
            &topic_major,
            vocab.clone(),
        )
    }

    pub fn from_hdp(state: &GlobalState, vocab: &Vocabulary) -> Result<Self> {
        check_vocab(state.vocab_size(), vocab)?;
        Self::from_sticks(
            &state.sticks,
            state.beta,
            state.counts.topic_totals(),
            |k, w| state.counts.get(k, w),
            vocab,
        )
    }

    pub fn from_pcvb0(model: &Pcvb0, vocab: &Vocabulary) -> Result<Self> {
        check_vocab(model.vocab_size(), vocab)?;
        let t = model.num_topics();
        Self::from_sticks(
            &model.sticks,
            model.beta,
            &model.n_k,
            |k, w| model.n_kw[w * t + k],
            vocab,
        )
    }

    pub fn from_lda(state: &LdaState, vocab: &Vocabulary) -> Result<Self> {
        check_vocab(state.vocab_size(), vocab)?;
        Self::build(
            PriorKind::Lda,
            state.alpha,
            state.beta,
            state.counts.topic_totals().to_vec(),
            &state.counts.to_topic_major(),
            vocab.clone(),
        )
    }

    pub fn to_text(&self) -> Result<String> {
        use std::fmt::Write;
        let t = self.n_k.len();
        let v = self.vocab.len();
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        match &self.kind {
            PriorKind::Hdp { .. } => s.push_str("kind hdp\n"),
            PriorKind::Lda => s.push_str("kind lda\n"),
        }
        let _ = writeln!(s, "topics {t}");
        let _ = writeln!(s, "vocab_size {v}");
        let _ = writeln!(s, "alpha {}", self.alpha);
        if let PriorKind::Hdp { gamma, .. } = &self.kind {
            let _ = writeln!(s, "gamma {gamma}");
        }
        let _ = writeln!(s, "beta {}", self.beta);
        if let PriorKind::Hdp { u, v, .. } = &self.kind {
            let _ = writeln!(s, "u {}", join(u));
            let _ = writeln!(s, "v {}", join(v));
        }
        let _ = writeln!(s, "n_k {}", join(&self.n_k));
        s.push_str("n_kw\n");
        let mut row = vec![0.0; v];
        for k in 0..t {
            for (w, r) in row.iter_mut().enumerate() {
                *r = self.n_kw[w * t + k];
            }
            s.push_str(&join(&row));
            s.push('\n');
        }
        s.push_str("vocab\n");
        for term in self.vocab.terms() {
            if term.is_empty() || term.chars().any(char::is_whitespace) {
                return Err(Error::Snapshot(format!("term {term:?} cannot be stored")));
            }
            s.push_str(term);
            s.push('\n');
        }
        s.push_str("end\n");
        Ok(s)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::Snapshot(format!("unexpected end of file, expected {what}")))
        };
        fn keyed<'a>(line: (usize, &'a str), key: &str) -> Result<&'a str> {
            let (no, l) = line;
            let rest = l
                .strip_prefix(key)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| Error::Snapshot(format!("line {no}: expected {key:?}")))?;
            Ok(rest.trim_start())
        }
        fn scalar<T: FromStr>(line: (usize, &str), key: &str) -> Result<T> {
            let value = keyed(line, key)?;
            value
                .parse()
                .map_err(|_| Error::Snapshot(format!("line {}: invalid {key} {value:?}", line.0)))
        }
        fn floats(line: (usize, &str), key: Option<&str>, len: usize) -> Result<Vec<f64>> {
            let body = match key {
                Some(k) => keyed(line, k)?,
                None => line.1,
            };
            let xs = body
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(f64::from_str)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Snapshot(format!("line {}: {e}", line.0)))?;
            if xs.len() != len {
                return Err(Error::Snapshot(format!(
                    "line {}: expected {len} values, found {}",
                    line.0,
                    xs.len()
                )));
            }
            Ok(xs)
        }

        let version: u32 = scalar(next("header")?, MAGIC)?;
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let kind: String = scalar(next("kind")?, "kind")?;
        let t: usize = scalar(next("topics")?, "topics")?;
        let v: usize = scalar(next("vocab_size")?, "vocab_size")?;
        let alpha: f64 = scalar(next("alpha")?, "alpha")?;
        let hdp = match kind.as_str() {
            "hdp" => true,
            "lda" => false,
            other => return Err(Error::Snapshot(format!("unknown kind {other:?}"))),
        };
        let gamma: f64 = if hdp { scalar(next("gamma")?, "gamma")? } else { 0.0 };
        let beta: f64 = scalar(next("beta")?, "beta")?;
        let prior_kind = if hdp {
            let u = floats(next("u")?, Some("u"), t)?;
            let sv = floats(next("v")?, Some("v"), t)?;
            PriorKind::Hdp { gamma, u, v: sv }
        } else {
            PriorKind::Lda
        };
        let n_k = floats(next("n_k")?, Some("n_k"), t)?;
        keyed(next("n_kw")?, "n_kw")?;
        let mut topic_major = Vec::with_capacity(t * v);
        for _ in 0..t {
            topic_major.extend(floats(next("count row")?, None, v)?);
        }
        keyed(next("vocab")?, "vocab")?;
        let mut terms = Vec::with_capacity(v);
        for _ in 0..v {
            terms.push(next("term")?.1.to_owned());
        }
        keyed(next("end")?, "end")?;
        let vocab = Vocabulary::from_terms(terms).map_err(|e| Error::Snapshot(e.to_string()))?;
        Self::build(prior_kind, alpha, beta, n_k, &topic_major, vocab)
    }

    pub fn get(&self, topic: usize, term: usize) -> f64 {
        self.n_kw[term * self.n_k.len() + topic]
    }
}

fn check_vocab(v: usize, vocab: &Vocabulary) -> Result<()> {
    if v == vocab.len() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "model has {v} terms but the vocabulary has {}",
            vocab.len()
        )))
    }
}

impl TopicModel for ModelSnapshot {
    fn num_topics(&self) -> usize {
        self.n_k.len()
    }

    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn prior_into(&self, out: &mut [f64]) {
        out.copy_from_slice(&self.prior);
    }

    fn term_counts_into(&self, term: usize, out: &mut [f64]) {
        let t = self.n_k.len();
        out.copy_from_slice(&self.n_kw[term * t..(term + 1) * t]);
    }

    fn topic_totals(&self) -> &[f64] {
        &self.n_k
    }
}
