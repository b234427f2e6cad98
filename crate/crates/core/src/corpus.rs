//! Corpus ingestion and the document / token splits used for held-out evaluation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Dense mapping between term strings and ids `0..len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Self::new();
        for term in terms {
            let term = term.into();
            if vocab.index.contains_key(&term) {
                return Err(Error::invalid(format!("duplicate vocabulary term {term:?}")));
            }
            vocab.intern(&term);
        }
        Ok(vocab)
    }

    /// Returns the id of `term`, assigning the next free id if unseen.
    pub fn intern(&mut self, term: &str) -> usize {
        if let Some(&id) = self.index.get(term) {
            return id;
        }
        let id = self.terms.len();
        self.terms.push(term.to_owned());
        self.index.insert(term.to_owned(), id);
        id
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: usize) -> Option<&str> {
        self.terms.get(id).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub tokens: Vec<usize>,
}

impl Document {
    pub fn new(tokens: Vec<usize>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocab_size: usize,
}

impl Corpus {
    pub fn new(documents: Vec<Document>, vocab_size: usize) -> Self {
        Self { documents, vocab_size }
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents.iter().map(Document::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// A held-out document whose tokens are split into a part used to fit the
/// document's topic proportions and a part that is scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldOutDocument {
    pub estimation_tokens: Vec<usize>,
    pub evaluation_tokens: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// One document per line, whitespace separated tokens.
    PlainText,
    /// UCI sparse bag-of-words: `D`, `V`, `NNZ` header lines then `doc term count` triples.
    UciBow,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain-text-lines" | "text" | "plain" => Ok(CorpusFormat::PlainText),
            "uci-bow" | "uci" => Ok(CorpusFormat::UciBow),
            other => Err(Error::invalid(format!("unknown corpus format {other:?}"))),
        }
    }
}

impl CorpusFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            CorpusFormat::PlainText => "plain-text-lines",
            CorpusFormat::UciBow => "uci-bow",
        }
    }
}

/// Lowercases and strips everything that is not alphanumeric.
pub fn normalize_token(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Loads a corpus and builds its vocabulary.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<(Corpus, Vocabulary)> {
    let path = path.as_ref();
    let reader = open(path)?;
    match format {
        CorpusFormat::PlainText => read_plain_text(reader, None),
        CorpusFormat::UciBow => read_uci_bow(reader, None),
    }
}

/// Loads a corpus against an existing vocabulary. Plain-text terms missing
/// from the vocabulary are dropped; UCI ids must be inside it.
pub fn load_corpus_with_vocab(path: impl AsRef<Path>, format: CorpusFormat, vocab: &Vocabulary) -> Result<Corpus> {
    let path = path.as_ref();
    let reader = open(path)?;
    let (corpus, _) = match format {
        CorpusFormat::PlainText => read_plain_text(reader, Some(vocab))?,
        CorpusFormat::UciBow => read_uci_bow(reader, Some(vocab))?,
    };
    Ok(corpus)
}

pub fn read_plain_text<R: BufRead>(reader: R, fixed: Option<&Vocabulary>) -> Result<(Corpus, Vocabulary)> {
    let mut vocab = fixed.cloned().unwrap_or_default();
    let mut documents = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            message: e.to_string(),
        })?;
        let mut tokens = Vec::new();
        for raw in line.split_ascii_whitespace() {
            let term = normalize_token(raw);
            if term.is_empty() {
                continue;
            }
            match fixed {
                Some(v) => match v.id(&term) {
                    Some(id) => tokens.push(id),
                    None => dropped += 1,
                },
                None => tokens.push(vocab.intern(&term)),
            }
        }
        if !tokens.is_empty() {
            documents.push(Document::new(tokens));
        }
    }
    if dropped > 0 {
        warn!("dropped {dropped} out-of-vocabulary tokens");
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((Corpus::new(documents, vocab.len()), vocab))
}

fn parse_field<T: FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    let field = field.ok_or_else(|| Error::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    field.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} {field:?}"),
    })
}

pub fn read_uci_bow<R: BufRead>(reader: R, fixed: Option<&Vocabulary>) -> Result<(Corpus, Vocabulary)> {
    let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })),
    });
    let mut header = [0usize; 3];
    for (slot, name) in header
        .iter_mut()
        .zip(["document count", "vocabulary size", "entry count"])
    {
        let (lineno, line) = lines.next().ok_or(Error::EmptyCorpus)??;
        *slot = parse_field(Some(line.trim()), lineno, name)?;
    }
    let [num_docs, vocab_size, nnz] = header;
    if let Some(v) = fixed {
        if vocab_size > v.len() {
            return Err(Error::invalid(format!(
                "corpus declares {vocab_size} terms but the vocabulary has {}",
                v.len()
            )));
        }
    }

    let mut documents = vec![Vec::new(); num_docs];
    let mut entries = 0usize;
    for item in lines {
        let (lineno, line) = item?;
        let mut fields = line.split_ascii_whitespace();
        let doc: usize = parse_field(fields.next(), lineno, "document id")?;
        let term: usize = parse_field(fields.next(), lineno, "term id")?;
        let count: usize = parse_field(fields.next(), lineno, "count")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: "expected exactly three fields".into(),
            });
        }
        if doc == 0 || doc > num_docs {
            return Err(Error::Parse {
                line: lineno,
                message: format!("document id {doc} outside 1..={num_docs}"),
            });
        }
        if term == 0 || term > vocab_size {
            return Err(Error::Parse {
                line: lineno,
                message: format!("term id {term} outside 1..={vocab_size}"),
            });
        }
        documents[doc - 1].extend(std::iter::repeat_n(term - 1, count));
        entries += 1;
    }
    if entries != nnz {
        warn!("header declares {nnz} entries, read {entries}");
    }

    let empty = documents.iter().filter(|d| d.is_empty()).count();
    if empty > 0 {
        warn!("skipping {empty} empty documents");
    }
    let documents: Vec<Document> = documents
        .into_iter()
        .filter(|d| !d.is_empty())
        .map(Document::new)
        .collect();
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = match fixed {
        Some(v) => v.clone(),
        None => Vocabulary::from_terms((1..=vocab_size).map(|i| i.to_string()))?,
    };
    let vocab_size = vocab.len();
    Ok((Corpus::new(documents, vocab_size), vocab))
}

fn check_fraction(fraction: f64, what: &str) -> Result<()> {
    if fraction > 0.0 && fraction < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} must lie in (0, 1), got {fraction}")))
    }
}

/// Shuffles the documents with `seed` and keeps `round(train_fraction * D)`
/// of them for training (at least one); the rest are returned as held-out.
pub fn split_train_heldout(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Vec<Document>)> {
    check_fraction(train_fraction, "train fraction")?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let d = corpus.num_docs();
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let num_train = ((train_fraction * d as f64).round() as usize).clamp(1, d);
    if num_train == d {
        warn!("train fraction {train_fraction} of {d} documents leaves no held-out documents");
    }
    let train = order[..num_train]
        .iter()
        .map(|&i| corpus.documents[i].clone())
        .collect();
    let heldout = order[num_train..]
        .iter()
        .map(|&i| corpus.documents[i].clone())
        .collect();
    Ok((Corpus::new(train, corpus.vocab_size), heldout))
}

/// Splits a document's tokens at uniformly random positions. Returns `None`
/// (with a warning) for documents too short to give both parts a token.
pub fn split_tokens(doc: &Document, estimation_fraction: f64, seed: u64) -> Result<Option<HeldOutDocument>> {
    check_fraction(estimation_fraction, "estimation fraction")?;
    let n = doc.len();
    if n < 2 {
        warn!("document with {n} tokens excluded from evaluation");
        return Ok(None);
    }
    let num_est = ((estimation_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    for i in index::sample(&mut rng, n, num_est) {
        chosen[i] = true;
    }
    let mut estimation_tokens = Vec::with_capacity(num_est);
    let mut evaluation_tokens = Vec::with_capacity(n - num_est);
    for (&tok, &est) in doc.tokens.iter().zip(&chosen) {
        if est {
            estimation_tokens.push(tok);
        } else {
            evaluation_tokens.push(tok);
        }
    }
    Ok(Some(HeldOutDocument {
        estimation_tokens,
        evaluation_tokens,
    }))
}

/// Applies [`split_tokens`] to every held-out document, deriving one seed per
/// document from `seed` and its position.
pub fn split_heldout_documents(docs: &[Document], estimation_fraction: f64, seed: u64) -> Result<Vec<HeldOutDocument>> {
    let mut out = Vec::with_capacity(docs.len());
    for (i, doc) in docs.iter().enumerate() {
        let doc_seed = seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        if let Some(h) = split_tokens(doc, estimation_fraction, doc_seed)? {
            out.push(h);
        }
    }
    Ok(out)
}
