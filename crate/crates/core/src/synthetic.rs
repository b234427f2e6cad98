//! Seeded synthetic corpora drawn from a known LDA model.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Gamma};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_docs: usize,
    /// Document lengths are uniform in `mean_len ± len_jitter`.
    pub mean_len: usize,
    pub len_jitter: usize,
    pub topic_concentration: f64,
    pub doc_concentration: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_topics: 5,
            vocab_size: 100,
            num_docs: 250,
            mean_len: 100,
            len_jitter: 20,
            topic_concentration: 0.1,
            doc_concentration: 0.2,
            seed: 0,
        }
    }
}

fn dirichlet<R: Rng + ?Sized>(len: usize, concentration: f64, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    loop {
        let mut xs: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
        let s: f64 = xs.iter().sum();
        if s > 0.0 {
            xs.iter_mut().for_each(|x| *x /= s);
            return Ok(xs);
        }
    }
}

/// A synthetic corpus together with the parameters that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Topic-word distributions, one per topic.
    pub topics: Vec<Vec<f64>>,
    /// Document-topic proportions, one per document.
    pub proportions: Vec<Vec<f64>>,
}

impl SyntheticCorpus {
    /// Perplexity of the documents under the generating parameters.
    pub fn true_perplexity(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (doc, theta) in self.corpus.documents.iter().zip(&self.proportions) {
            for &w in &doc.tokens {
                let p: f64 = theta.iter().zip(&self.topics).map(|(t, phi)| t * phi[w]).sum();
                sum += p.ln();
                n += 1;
            }
        }
        (-sum / n as f64).exp()
    }
}

/// Draws a corpus; term `w` is spelled `w<w>` when written as text.
pub fn generate(spec: &SyntheticSpec) -> Result<Corpus> {
    generate_with_truth(spec).map(|s| s.corpus)
}

pub fn generate_with_truth(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.num_topics == 0 || spec.vocab_size == 0 || spec.num_docs == 0 || spec.mean_len == 0 {
        return Err(Error::invalid("synthetic corpus dimensions must be positive"));
    }
    if spec.len_jitter >= spec.mean_len {
        return Err(Error::invalid("length jitter must be below the mean length"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let phis = (0..spec.num_topics)
        .map(|_| dirichlet(spec.vocab_size, spec.topic_concentration, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let topics = phis
        .iter()
        .map(|phi| WeightedAliasIndex::new(phi.clone()).map_err(|e| Error::invalid(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let mut documents = Vec::with_capacity(spec.num_docs);
    let mut proportions = Vec::with_capacity(spec.num_docs);
    for _ in 0..spec.num_docs {
        let theta_p = dirichlet(spec.num_topics, spec.doc_concentration, &mut rng)?;
        let theta = WeightedAliasIndex::new(theta_p.clone()).map_err(|e| Error::invalid(e.to_string()))?;
        proportions.push(theta_p);
        let len = rng.random_range(spec.mean_len - spec.len_jitter..=spec.mean_len + spec.len_jitter);
        let tokens = (0..len)
            .map(|_| topics[theta.sample(&mut rng)].sample(&mut rng))
            .collect();
        documents.push(Document::new(tokens));
    }
    Ok(SyntheticCorpus {
        corpus: Corpus::new(documents, spec.vocab_size),
        topics: phis,
        proportions,
    })
}

/// One document per line in the plain-text corpus format.
pub fn to_plain_text(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        for (i, w) in doc.tokens.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "w{w}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = SyntheticSpec::default();
        let a = generate(&spec).unwrap();
        assert_eq!(a.num_docs(), 250);
        assert!(a.documents.iter().all(|d| (80..=120).contains(&d.len())));
        assert!(a.documents.iter().flat_map(|d| &d.tokens).all(|&w| w < 100));
        assert_eq!(a, generate(&spec).unwrap());
        assert_ne!(a, generate(&SyntheticSpec { seed: 1, ..spec }).unwrap());
    }

    #[test]
    fn text_reloads_to_the_same_documents() {
        let spec = SyntheticSpec {
            num_docs: 5,
            ..SyntheticSpec::default()
        };
        let corpus = generate(&spec).unwrap();
        let text = to_plain_text(&corpus);
        let (loaded, vocab) = crate::corpus::read_plain_text(std::io::Cursor::new(text), None).unwrap();
        for (a, b) in corpus.documents.iter().zip(&loaded.documents) {
            let spelled: Vec<String> = b.tokens.iter().map(|&id| vocab.term(id).unwrap().to_owned()).collect();
            let want: Vec<String> = a.tokens.iter().map(|w| format!("w{w}")).collect();
            assert_eq!(spelled, want);
        }
    }
}
