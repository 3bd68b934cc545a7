//! Initial node vectors: skip-gram token embeddings, positional encodings,
//! multi-head token self-attention and the node-type fusing layer.

use std::collections::{BTreeMap, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::AstKind;
use crate::tensor::{Tape, Tensor, TensorError, Var};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const OTHER_TYPE: &str = "OTHER";
pub const EMBEDDINGS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("embedding file: {0}")]
    Format(String),
}

/// Token to index mapping with `PAD = 0` and `UNK = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Tokens occurring at least `min_count` times, most frequent first,
    /// ties broken lexicographically.
    pub fn build<'a>(sentences: impl IntoIterator<Item = &'a [String]>, min_count: usize) -> Vocabulary {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in sentences {
            for t in s {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()))
    }

    /// Vocabulary from tokens in index order, after PAD and UNK.
    pub fn from_tokens(tokens: impl IntoIterator<Item = String>) -> Vocabulary {
        let mut v = Vocabulary { tokens: vec![PAD.into(), UNK.into()], index: HashMap::new() };
        for t in tokens {
            if t != PAD && t != UNK && !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v.index.insert(PAD.into(), 0);
        v.index.insert(UNK.into(), 1);
        v
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(1)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    /// Tokens in index order, PAD and UNK included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig { dim: 64, window: 5, negatives: 5, epochs: 5, learning_rate: 0.025, min_count: 1, seed: 0 }
    }
}

/// Frozen token embedding table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embeddings {
    #[serde(with = "vocab_serde")]
    pub vocab: Vocabulary,
    /// `|V| × c`.
    pub table: Tensor,
}

mod vocab_serde {
    use super::Vocabulary;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vocabulary, s: S) -> Result<S::Ok, S::Error> {
        v.tokens().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vocabulary, D::Error> {
        let tokens = Vec::<String>::deserialize(d)?;
        Ok(Vocabulary::from_tokens(tokens.into_iter().skip(2)))
    }
}

impl Embeddings {
    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn row(&self, token: &str) -> &[f64] {
        self.table.row_slice(self.vocab.get(token))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "format": "vulspg-embeddings",
            "version": EMBEDDINGS_FORMAT_VERSION,
            "embeddings": self,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Embeddings, EmbedError> {
        if v["format"] != "vulspg-embeddings" || v["version"] != EMBEDDINGS_FORMAT_VERSION {
            return Err(EmbedError::Format(format!("unsupported format {} version {}", v["format"], v["version"])));
        }
        let emb: Embeddings =
            serde_json::from_value(v["embeddings"].clone()).map_err(|e| EmbedError::Format(e.to_string()))?;
        if emb.table.shape.len() != 2 || emb.table.rows() != emb.vocab.len() {
            return Err(EmbedError::Format(format!(
                "table shape {:?} does not match {} tokens",
                emb.table.shape,
                emb.vocab.len()
            )));
        }
        Ok(emb)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling. Noise tokens are drawn from the
/// unigram distribution raised to 0.75. The PAD row is zero.
pub fn train_skipgram(sentences: &[Vec<String>], cfg: &SkipGramConfig) -> Result<Embeddings, EmbedError> {
    if sentences.iter().all(Vec::is_empty) {
        return Err(EmbedError::Config("empty pretraining corpus".into()));
    }
    if cfg.dim == 0 || cfg.window == 0 {
        return Err(EmbedError::Config("dimension and window must be positive".into()));
    }
    let vocab = Vocabulary::build(sentences.iter().map(Vec::as_slice), cfg.min_count.max(1));
    let (n, c) = (vocab.len(), cfg.dim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input: Vec<f64> = (0..n * c).map(|_| (rng.gen::<f64>() - 0.5) / c as f64).collect();
    let mut output = vec![0.0; n * c];

    let ids: Vec<Vec<usize>> = sentences.iter().map(|s| s.iter().map(|t| vocab.get(t)).collect()).collect();
    let mut counts = vec![0.0f64; n];
    for &i in ids.iter().flatten() {
        counts[i] += 1.0;
    }
    let weights: Vec<f64> = counts.iter().map(|&k| k.powf(0.75)).collect();
    let noise = WeightedIndex::new(&weights).map_err(|e| EmbedError::Config(e.to_string()))?;

    let pairs_per_epoch: usize = ids.iter().map(|s| s.len()).sum::<usize>().max(1);
    let total = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut seen = 0usize;
    let mut grad = vec![0.0; c];
    for _ in 0..cfg.epochs {
        for sent in &ids {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (cfg.learning_rate * (1.0 - seen as f64 / total)).max(cfg.learning_rate * 1e-4);
                seen += 1;
                let lo = pos.saturating_sub(cfg.window);
                let hi = (pos + cfg.window + 1).min(sent.len());
                for (q, &context) in sent.iter().enumerate().take(hi).skip(lo) {
                    if q == pos {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let targets = std::iter::once((context, 1.0))
                        .chain((0..cfg.negatives).map(|_| (noise.sample(&mut rng), 0.0)));
                    for (target, label) in targets {
                        if label == 0.0 && target == context {
                            continue;
                        }
                        let (vin, vout) = (&input[center * c..(center + 1) * c], &mut output[target * c..(target + 1) * c]);
                        let dot: f64 = vin.iter().zip(vout.iter()).map(|(a, b)| a * b).sum();
                        let g = lr * (label - sigmoid(dot));
                        for k in 0..c {
                            grad[k] += g * vout[k];
                            vout[k] += g * vin[k];
                        }
                    }
                    for (w, g) in input[center * c..(center + 1) * c].iter_mut().zip(&grad) {
                        *w += g;
                    }
                }
            }
        }
    }
    input[..c].iter_mut().for_each(|x| *x = 0.0);
    Ok(Embeddings { vocab, table: Tensor::matrix(n, c, input) })
}

/// `PE[pos, 2k] = sin(pos / 10000^(2k/c))`, `PE[pos, 2k+1] = cos(...)`.
pub fn positional_encoding(m: usize, c: usize) -> Result<Tensor, EmbedError> {
    if c % 2 != 0 {
        return Err(EmbedError::Config(format!("positional encoding needs an even width, got {c}")));
    }
    let mut pe = Tensor::zeros(m, c);
    for pos in 0..m {
        for k in 0..c / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * k as f64 / c as f64);
            pe.set(pos, 2 * k, angle.sin());
            pe.set(pos, 2 * k + 1, angle.cos());
        }
    }
    Ok(pe)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInitConfig {
    /// Token embedding width.
    pub c: usize,
    /// Maximum tokens per statement.
    pub m: usize,
    /// Attention heads.
    pub a: usize,
    /// Node vector width.
    pub z: usize,
    /// Node types; the last entry is the catch-all slot.
    pub type_vocab: Vec<String>,
}

impl Default for NodeInitConfig {
    fn default() -> Self {
        NodeInitConfig { c: 64, m: 32, a: 4, z: 64, type_vocab: default_type_vocab() }
    }
}

/// Statement kinds followed by `OTHER`.
pub fn default_type_vocab() -> Vec<String> {
    crate::frontend::ALL_KINDS
        .iter()
        .filter(|k| k.is_statement())
        .map(|k| k.as_str().to_string())
        .chain(std::iter::once(OTHER_TYPE.to_string()))
        .collect()
}

impl NodeInitConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: String| Err(EmbedError::Config(m));
        if self.a == 0 || self.c % self.a != 0 {
            return bad(format!("{} heads do not divide width {}", self.a, self.c));
        }
        if self.c % 2 != 0 {
            return bad(format!("token width {} must be even", self.c));
        }
        if self.m == 0 || self.z == 0 {
            return bad("m and z must be at least 1".into());
        }
        if self.type_vocab.last().map(String::as_str) != Some(OTHER_TYPE) {
            return bad(format!("type vocabulary must end with {OTHER_TYPE}"));
        }
        Ok(())
    }

    /// Width of `x_se ‖ x_type`.
    pub fn input_width(&self) -> usize {
        self.m * self.c + self.type_vocab.len()
    }

    pub fn head_width(&self) -> usize {
        self.c / self.a
    }

    /// Index of `kind` in the type vocabulary, or the `OTHER` slot.
    pub fn type_index(&self, kind: AstKind) -> usize {
        self.type_vocab.iter().position(|t| t == kind.as_str()).unwrap_or(self.type_vocab.len() - 1)
    }
}

/// Token matrix of a statement: embeddings plus positional encodings for
/// the first `m` non-PAD tokens. `None` for a statement with no tokens.
pub fn statement_matrix<'a>(
    emb: &Embeddings,
    pe: &Tensor,
    tokens: impl IntoIterator<Item = &'a str>,
    m: usize,
) -> Option<Tensor> {
    let c = emb.dim();
    let mut data = Vec::new();
    for (pos, tok) in tokens.into_iter().filter(|&t| t != PAD).take(m).enumerate() {
        data.extend(emb.row(tok).iter().zip(pe.row_slice(pos)).map(|(e, p)| e + p));
    }
    (!data.is_empty()).then(|| Tensor::matrix(data.len() / c, c, data))
}

/// Per-head query, key and value projections, each `c × c/a`.
#[derive(Debug, Clone, Copy)]
pub struct HeadParams {
    pub q: Var,
    pub k: Var,
    pub v: Var,
}

/// Row-wise attention weights `softmax(Q Kᵀ / √c)` of one head.
pub fn attention_weights(tape: &mut Tape, t: Var, head: HeadParams, c: usize) -> Result<Var, TensorError> {
    let q = tape.matmul(t, head.q)?;
    let k = tape.matmul(t, head.k)?;
    let kt = tape.transpose(k);
    let s = tape.matmul(q, kt)?;
    let s = tape.scale(s, 1.0 / (c as f64).sqrt());
    Ok(tape.softmax_rows(s))
}

/// `flatten(MultiHead(T, T, T))` for a `k × c` token matrix with `k ≤ m`.
/// Positions `k..m` are PAD: excluded from every softmax and zero in the
/// output, which is `1 × m·c`.
pub fn token_attention(tape: &mut Tape, t: Var, heads: &[HeadParams], c: usize, m: usize) -> Result<Var, TensorError> {
    let k = tape.value(t).rows();
    if tape.value(t).cols() != c || k > m {
        return Err(TensorError::Shape { op: "token_attention", left: tape.value(t).shape.clone(), right: vec![m, c] });
    }
    let mut outs = Vec::with_capacity(heads.len());
    for &h in heads {
        let w = attention_weights(tape, t, h, c)?;
        let v = tape.matmul(t, h.v)?;
        outs.push(tape.matmul(w, v)?);
    }
    let mut cat = tape.concat_cols(&outs)?;
    if tape.value(cat).cols() != c {
        return Err(TensorError::Shape { op: "token_attention heads", left: tape.value(cat).shape.clone(), right: vec![k, c] });
    }
    if k < m {
        let pad = tape.constant(Tensor::zeros(m - k, c));
        cat = tape.concat_rows(&[cat, pad])?;
    }
    Ok(tape.flatten(cat))
}

/// `x = (x_se ‖ x_type) W_l + b_l` for rows of stacked nodes.
pub fn init_node(tape: &mut Tape, x_se: Var, x_type: Var, w_l: Var, b_l: Var) -> Result<Var, TensorError> {
    let x = tape.concat_cols(&[x_se, x_type])?;
    let h = tape.matmul(x, w_l)?;
    tape.add_row(h, b_l)
}
