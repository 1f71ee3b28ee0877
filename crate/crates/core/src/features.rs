//! Token lists to model inputs: TF-IDF sparse vectors, averaged word
//! embeddings and fixed-length index sequences.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::artext::TokenList;

/// Sequence index of padding.
pub const PAD: usize = 0;
/// Sequence index of out-of-vocabulary tokens.
pub const UNK: usize = 1;
/// Default input length of the sequence models, in tokens.
pub const DEFAULT_MAXLEN: usize = 1200;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit on an empty corpus")]
    EmptyCorpus,
    #[error("vectorizer used before fit")]
    NotFitted,
    #[error("maxlen must be at least 1")]
    BadMaxlen,
    #[error("embedding file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("embedding file line {line}: {message}")]
    EmbeddingFormat { line: usize, message: String },
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("inconsistent vocabulary: {0}")]
    BadVocabulary(String),
}

/// Sorted token list with document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary", into = "RawVocabulary")]
pub struct Vocabulary {
    tokens: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct RawVocabulary {
    tokens: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
}

impl TryFrom<RawVocabulary> for Vocabulary {
    type Error = FeatureError;

    fn try_from(r: RawVocabulary) -> Result<Self, Self::Error> {
        if r.tokens.len() != r.df.len() {
            return Err(FeatureError::BadVocabulary("token and df lengths differ".into()));
        }
        if r.tokens.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FeatureError::BadVocabulary("tokens not strictly sorted".into()));
        }
        if r.df.iter().any(|&d| d == 0 || d > r.n_docs) {
            return Err(FeatureError::BadVocabulary("df outside 1..=N".into()));
        }
        let index = r.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Vocabulary { tokens: r.tokens, df: r.df, n_docs: r.n_docs, index })
    }
}

impl From<Vocabulary> for RawVocabulary {
    fn from(v: Vocabulary) -> Self {
        RawVocabulary { tokens: v.tokens, df: v.df, n_docs: v.n_docs }
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    pub fn df_of(&self, token: &str) -> Option<usize> {
        self.index_of(token).map(|i| self.df[i])
    }

    /// Index used in sequences: PAD and UNK come first.
    pub fn sequence_id(&self, token: &str) -> usize {
        self.index_of(token).map_or(UNK, |i| i + 2)
    }

    /// Rows of an embedding table over sequence ids.
    pub fn sequence_size(&self) -> usize {
        self.tokens.len() + 2
    }

    /// Token for a sequence id, or `None` for PAD/UNK.
    pub fn sequence_token(&self, id: usize) -> Option<&str> {
        id.checked_sub(2).and_then(|i| self.tokens.get(i)).map(String::as_str)
    }
}

/// Tokens with document frequency at least `min_df`.
pub fn fit_vocab(docs: &[TokenList], min_df: usize) -> Result<Vocabulary, FeatureError> {
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut uniq: Vec<&str> = doc.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_default() += 1;
        }
    }
    let (tokens, df): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|(_, d)| *d >= min_df.max(1)).map(|(t, d)| (t.to_owned(), d)).unzip();
    let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(Vocabulary { tokens, df, n_docs: docs.len(), index })
}

/// `(index, weight)` pairs with strictly increasing indices below `dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            out[i] = w;
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TfidfOptions {
    pub min_df: usize,
    /// `ln((1 + N) / (1 + df)) + 1` instead of `ln(N / df)`.
    pub smooth_idf: bool,
    pub l2_normalize: bool,
}

impl Default for TfidfOptions {
    fn default() -> Self {
        TfidfOptions { min_df: 1, smooth_idf: false, l2_normalize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FittedTfidf {
    vocab: Vocabulary,
    idf: Vec<f64>,
}

/// Raw-count TF times `ln(N / df)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    options: TfidfOptions,
    fitted: Option<FittedTfidf>,
}

impl TfidfVectorizer {
    pub fn new(options: TfidfOptions) -> Self {
        TfidfVectorizer { options, fitted: None }
    }

    pub fn options(&self) -> &TfidfOptions {
        &self.options
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn fit(&mut self, docs: &[TokenList]) -> Result<(), FeatureError> {
        let vocab = fit_vocab(docs, self.options.min_df)?;
        let n = vocab.n_docs() as f64;
        let idf = (0..vocab.len())
            .map(|i| {
                let df = vocab.df(i) as f64;
                if self.options.smooth_idf {
                    ((1.0 + n) / (1.0 + df)).ln() + 1.0
                } else {
                    (n / df).ln()
                }
            })
            .collect();
        self.fitted = Some(FittedTfidf { vocab, idf });
        Ok(())
    }

    pub fn vocabulary(&self) -> Result<&Vocabulary, FeatureError> {
        self.fitted.as_ref().map(|f| &f.vocab).ok_or(FeatureError::NotFitted)
    }

    pub fn idf(&self) -> Result<&[f64], FeatureError> {
        self.fitted.as_ref().map(|f| f.idf.as_slice()).ok_or(FeatureError::NotFitted)
    }

    pub fn dim(&self) -> Result<usize, FeatureError> {
        Ok(self.vocabulary()?.len())
    }

    /// Checks that a deserialized vectorizer has one finite idf per term.
    pub fn check(&self) -> Result<(), FeatureError> {
        let f = self.fitted.as_ref().ok_or(FeatureError::NotFitted)?;
        if f.idf.len() != f.vocab.len() || f.idf.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::BadVocabulary(format!(
                "{} idf values for {} terms",
                f.idf.len(),
                f.vocab.len()
            )));
        }
        Ok(())
    }

    pub fn transform(&self, doc: &TokenList) -> Result<SparseVector, FeatureError> {
        let f = self.fitted.as_ref().ok_or(FeatureError::NotFitted)?;
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc {
            if let Some(i) = f.vocab.index_of(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> =
            counts.into_iter().map(|(i, c)| (i, c * f.idf[i])).filter(|&(_, w)| w != 0.0).collect();
        if self.options.l2_normalize {
            let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                entries.iter_mut().for_each(|(_, w)| *w /= norm);
            }
        }
        Ok(SparseVector { dim: f.vocab.len(), entries })
    }
}

/// Fits a vectorizer with default options.
pub fn tfidf_fit(docs: &[TokenList]) -> Result<TfidfVectorizer, FeatureError> {
    let mut v = TfidfVectorizer::new(TfidfOptions::default());
    v.fit(docs)?;
    Ok(v)
}

/// Token → dense vector table read from the word-vector text format.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    index: HashMap<String, usize>,
    sha256: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl EmbeddingStore {
    /// Later duplicates replace earlier rows.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self, FeatureError> {
        if dim == 0 {
            return Err(FeatureError::ZeroDim);
        }
        let mut store = EmbeddingStore { dim, tokens: Vec::new(), vectors: Vec::new(), index: HashMap::new(), sha256: None };
        for (line, (token, v)) in rows.into_iter().enumerate() {
            if v.len() != dim {
                return Err(FeatureError::EmbeddingFormat {
                    line: line + 1,
                    message: format!("expected {dim} components, found {}", v.len()),
                });
            }
            store.insert(token, &v);
        }
        Ok(store)
    }

    fn insert(&mut self, token: String, v: &[f64]) {
        if let Some(&i) = self.index.get(&token) {
            log::warn!("duplicate embedding for {token:?}; keeping the later row");
            self.vectors[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
        } else {
            self.index.insert(token.clone(), self.tokens.len());
            self.tokens.push(token);
            self.vectors.extend_from_slice(v);
        }
    }

    /// Parses `vocab_size dim` then `token c1 .. c_dim` rows.
    pub fn parse(bytes: &[u8]) -> Result<Self, FeatureError> {
        let fmt = |line: usize, message: String| FeatureError::EmbeddingFormat { line, message };
        let mut lines = bytes.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, l)) => {
                    let l = l.map_err(|e| fmt(i + 1, e.to_string()))?;
                    if !l.trim().is_empty() {
                        break l;
                    }
                }
                None => return Err(fmt(1, "missing header".into())),
            }
        };
        let head: Vec<&str> = header.split_whitespace().collect();
        let [count, dim] = head.as_slice() else {
            return Err(fmt(1, format!("header must be \"vocab_size dim\", got {header:?}")));
        };
        let count: usize = count.parse().map_err(|_| fmt(1, format!("bad vocab_size {count:?}")))?;
        let dim: usize = dim.parse().map_err(|_| fmt(1, format!("bad dim {dim:?}")))?;
        if dim == 0 {
            return Err(FeatureError::ZeroDim);
        }

        let mut store = EmbeddingStore { dim, tokens: Vec::new(), vectors: Vec::new(), index: HashMap::new(), sha256: None };
        let mut rows = 0;
        let mut buf = Vec::with_capacity(dim);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line.map_err(|e| fmt(line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ').filter(|p| !p.is_empty());
            let token = parts.next().expect("non-blank line has a token").to_owned();
            buf.clear();
            for p in parts {
                let v: f64 = p.parse().map_err(|_| fmt(line_no, format!("non-numeric component {p:?}")))?;
                if !v.is_finite() {
                    return Err(fmt(line_no, format!("non-finite component {p:?}")));
                }
                buf.push(v);
            }
            if buf.len() != dim {
                return Err(fmt(line_no, format!("expected {dim} components, found {}", buf.len())));
            }
            store.insert(token, &buf);
            rows += 1;
        }
        if rows != count {
            return Err(fmt(1, format!("header declares {count} rows, file has {rows}")));
        }
        store.sha256 = Some(sha256_hex(bytes));
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let bytes = std::fs::read(path).map_err(|source| FeatureError::Io { path: path.display().to_string(), source })?;
        Self::parse(&bytes)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.tokens.len(), self.dim)?;
        for (i, t) in self.tokens.iter().enumerate() {
            write!(w, "{t}")?;
            for v in &self.vectors[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// SHA-256 of the file this store was parsed from.
    pub fn sha256(&self) -> Option<&str> {
        self.sha256.as_deref()
    }

    /// SHA-256 of the canonical text rendering; used when there is no source file.
    pub fn content_hash(&self) -> String {
        self.sha256.clone().unwrap_or_else(|| sha256_hex(self.to_text().as_bytes()))
    }
}

/// Mean of the in-store token vectors; zero vector when none are present.
pub fn average_embedding(tokens: &TokenList, store: &EmbeddingStore) -> Vec<f64> {
    let mut sum = vec![0.0; store.dim()];
    let mut n = 0usize;
    for v in tokens.iter().filter_map(|t| store.get(t)) {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        sum.iter_mut().for_each(|s| *s *= inv);
    }
    sum
}

/// Fixed-length sequence of vocabulary ids, post-padded with [`PAD`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IndexSequence(pub Vec<usize>);

impl IndexSequence {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of leading positions up to and including the last non-PAD id.
    pub fn effective_len(&self) -> usize {
        self.0.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1)
    }
}

/// Maps tokens to sequence ids (UNK for unknown), keeps the first `maxlen`,
/// and pads the tail with PAD.
pub fn encode_sequence(tokens: &TokenList, vocab: &Vocabulary, maxlen: usize) -> Result<IndexSequence, FeatureError> {
    if maxlen < 1 {
        return Err(FeatureError::BadMaxlen);
    }
    let mut ids: Vec<usize> = tokens.iter().take(maxlen).map(|t| vocab.sequence_id(t)).collect();
    ids.resize(maxlen, PAD);
    Ok(IndexSequence(ids))
}
