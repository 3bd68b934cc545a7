//! The SPG classifier: R-GCN encoders for the SPG and its three subgraphs,
//! node-level attention readout, subgraph-level attention and a softmax
//! classifier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::embed::{init_node, positional_encoding, statement_matrix, token_attention, EmbedError, Embeddings, HeadParams, NodeInitConfig};
use crate::graphs::EdgeKind;
use crate::spg::Spg;
use crate::tensor::{Bindings, ParamId, ParamStore, Tape, Tensor, TensorError, Var};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Floor applied to probabilities before the log in the loss.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, tape: &mut Tape, v: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(v),
            Activation::Tanh => tape.tanh(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphType {
    Spg,
    Cdg,
    Ddg,
    Fcdg,
}

impl GraphType {
    pub const ALL: [GraphType; 4] = [GraphType::Spg, GraphType::Cdg, GraphType::Ddg, GraphType::Fcdg];

    /// Relations the encoder of this graph type sees.
    pub fn relations(self) -> &'static [EdgeKind] {
        match self {
            GraphType::Spg => &EdgeKind::ALL,
            GraphType::Cdg => &[EdgeKind::Control],
            GraphType::Ddg => &[EdgeKind::Data],
            GraphType::Fcdg => &[EdgeKind::FunctionCall],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GraphType::Spg => "spg",
            GraphType::Cdg => "cdg",
            GraphType::Ddg => "ddg",
            GraphType::Fcdg => "fcdg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub node: NodeInitConfig,
    /// R-GCN layers `L`.
    pub layers: usize,
    pub rgcn_activation: Activation,
    pub attention_activation: Activation,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            node: NodeInitConfig::default(),
            layers: 2,
            rgcn_activation: Activation::Relu,
            attention_activation: Activation::Tanh,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Width of one graph feature vector, `(L+1)·z`.
    pub fn feature_width(&self) -> usize {
        (self.layers + 1) * self.node.z
    }

    /// Width of the classifier input, `2(L+1)·z`.
    pub fn classifier_width(&self) -> usize {
        2 * self.feature_width()
    }
}

#[derive(Debug, Clone)]
struct EncoderLayout {
    /// Per layer: one matrix per relation, then the self matrix.
    layers: Vec<(Vec<ParamId>, ParamId)>,
    theta: Vec<ParamId>,
    theta_self: ParamId,
}

#[derive(Debug, Clone)]
struct Layout {
    heads: Vec<[ParamId; 3]>,
    w_l: ParamId,
    b_l: ParamId,
    encoders: Vec<EncoderLayout>,
    w_r: ParamId,
    w_cn: ParamId,
    b_cn: ParamId,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect())
}

fn register(cfg: &ModelConfig, store: &mut ParamStore) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = &cfg.node;
    let (z, f) = (n.z, cfg.feature_width());
    let heads = (0..n.a)
        .map(|h| {
            ["q", "k", "v"].map(|p| store.add(format!("token.head{h}.{p}"), glorot(&mut rng, n.c, n.head_width())))
        })
        .collect();
    let w_l = store.add("node_init.w", glorot(&mut rng, n.input_width(), z));
    let b_l = store.add("node_init.b", Tensor::zeros(1, z));
    let encoders = GraphType::ALL
        .iter()
        .map(|g| {
            let layers = (0..cfg.layers)
                .map(|l| {
                    let rel = g
                        .relations()
                        .iter()
                        .map(|d| store.add(format!("{}.layer{l}.{}", g.name(), d.as_str()), glorot(&mut rng, z, z)))
                        .collect();
                    (rel, store.add(format!("{}.layer{l}.self", g.name()), glorot(&mut rng, z, z)))
                })
                .collect();
            let theta = g
                .relations()
                .iter()
                .map(|d| store.add(format!("{}.theta.{}", g.name(), d.as_str()), glorot(&mut rng, f, 1)))
                .collect();
            let theta_self = store.add(format!("{}.theta.self", g.name()), glorot(&mut rng, f, 1));
            EncoderLayout { layers, theta, theta_self }
        })
        .collect();
    let w_r = store.add("subgraph.w_r", glorot(&mut rng, f, f));
    let w_cn = store.add("classifier.w", glorot(&mut rng, 2 * f, 2));
    let b_cn = store.add("classifier.b", Tensor::zeros(1, 2));
    Layout { heads, w_l, b_l, encoders, w_r, w_cn, b_cn }
}

/// `n × n` mean-aggregation matrix of relation `kind`: row `i` holds
/// `1/|N_i|` at each in-neighbor `j`. `None` when the relation is absent.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize, EdgeKind)], kind: EdgeKind) -> Option<Tensor> {
    let mut a = Tensor::zeros(n, n);
    let mut any = false;
    for &(src, dst, k) in edges {
        if k == kind {
            a.set(dst, src, 1.0);
            any = true;
        }
    }
    if !any {
        return None;
    }
    for i in 0..n {
        let row = &mut a.data[i * n..(i + 1) * n];
        let deg: f64 = row.iter().sum();
        if deg > 0.0 {
            row.iter_mut().for_each(|x| *x /= deg);
        }
    }
    Some(a)
}

/// `σ(Σ_d A_d H W_d + H W_0)`. `relations` pairs an adjacency with its weight.
pub fn rgcn_layer(tape: &mut Tape, h: Var, relations: &[(Var, Var)], w_self: Var, act: Activation) -> Result<Var, TensorError> {
    let mut acc = tape.matmul(h, w_self)?;
    for &(adj, w) in relations {
        let agg = tape.matmul(adj, h)?;
        let t = tape.matmul(agg, w)?;
        acc = tape.add(acc, t)?;
    }
    Ok(act.apply(tape, acc))
}

/// `h⁽⁰⁾ ‖ … ‖ h⁽ᴸ⁾` with `h⁽⁰⁾ = x`. `layers[l]` holds that layer's
/// relation weights (aligned with `adjacency`) and self weight.
pub fn encode_graph(
    tape: &mut Tape,
    x: Var,
    adjacency: &[Option<Var>],
    layers: &[(Vec<Var>, Var)],
    act: Activation,
) -> Result<Var, TensorError> {
    let mut states = vec![x];
    let mut h = x;
    for (w_rel, w_self) in layers {
        let rel: Vec<(Var, Var)> = adjacency.iter().zip(w_rel).filter_map(|(a, &w)| a.map(|a| (a, w))).collect();
        h = rgcn_layer(tape, h, &rel, *w_self, act)?;
        states.push(h);
    }
    if states.len() == 1 {
        return Ok(x);
    }
    tape.concat_cols(&states)
}

/// Node attention readout. Returns `(S_G, α)` with `α` as a `1 × n` row.
pub fn node_attention_readout(
    tape: &mut Tape,
    hcat: Var,
    adjacency: &[Option<Var>],
    theta: &[Var],
    theta_self: Var,
    act: Activation,
) -> Result<(Var, Var), TensorError> {
    let mut score = tape.matmul(hcat, theta_self)?;
    for (a, &th) in adjacency.iter().zip(theta) {
        if let Some(a) = *a {
            let proj = tape.matmul(hcat, th)?;
            let agg = tape.matmul(a, proj)?;
            score = tape.add(score, agg)?;
        }
    }
    let z = act.apply(tape, score);
    let zt = tape.transpose(z);
    let alpha = tape.softmax_rows(zt);
    let s = tape.matmul(alpha, hcat)?;
    Ok((s, alpha))
}

/// Subgraph attention over `[S_cdg, S_ddg, S_fcdg]`. Returns `(S_AS, β)`.
pub fn subgraph_attention(tape: &mut Tape, s_spg: Var, subs: [Var; 3], w_r: Var) -> Result<(Var, Var), TensorError> {
    let spg_t = tape.transpose(s_spg);
    let proj = tape.matmul(w_r, spg_t)?;
    let mut scores = Vec::with_capacity(3);
    for s in subs {
        scores.push(tape.matmul(s, proj)?);
    }
    let r = tape.concat_cols(&scores)?;
    let beta = tape.softmax_rows(r);
    let stacked = tape.concat_rows(&subs)?;
    let s_as = tape.matmul(beta, stacked)?;
    Ok((s_as, beta))
}

/// `softmax((S_SPG ‖ S_AS) W_CN + b_CN)` as a `1 × 2` row.
pub fn classify(tape: &mut Tape, s_spg: Var, s_as: Var, w_cn: Var, b_cn: Var) -> Result<Var, TensorError> {
    let cat = tape.concat_cols(&[s_spg, s_as])?;
    let logits = tape.matmul(cat, w_cn)?;
    let logits = tape.add_row(logits, b_cn)?;
    Ok(tape.softmax_rows(logits))
}

/// `−ln p(label)`, with `p` floored at [`PROB_FLOOR`].
pub fn loss(tape: &mut Tape, probs: Var, label: u8) -> Result<Var, TensorError> {
    let p = tape.pick(probs, usize::from(label))?;
    let l = tape.ln(p, PROB_FLOOR);
    Ok(tape.scale(l, -1.0))
}

/// Argmax of a probability pair; an exact tie predicts 1.
pub fn predicted_label(p: [f64; 2]) -> u8 {
    u8::from(p[1] >= p[0])
}

/// Constant inputs derived from one SPG.
#[derive(Debug, Clone)]
pub struct PreparedSpg {
    pub n: usize,
    token_matrices: Vec<Option<Tensor>>,
    types: Tensor,
    /// Per graph type, adjacency per relation of that type.
    adjacency: Vec<Vec<Option<Tensor>>>,
}

impl PreparedSpg {
    /// Whether the subgraph of `g` has no edges.
    pub fn is_edge_empty(&self, g: GraphType) -> bool {
        self.adjacency[g as usize].iter().all(Option::is_none)
    }
}

/// Values recorded by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub probs: Var,
    pub s_spg: Var,
    pub s_as: Var,
    /// Node attention of each graph type, `None` for an edge-empty subgraph.
    pub alpha: [Option<Var>; 4],
    pub beta: Var,
    /// Graph features in `GraphType::ALL` order.
    pub features: [Var; 4],
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub embeddings: Embeddings,
    layout: Layout,
    pe: Tensor,
}

impl Model {
    pub fn new(config: ModelConfig, embeddings: Embeddings) -> Result<Model, ModelError> {
        config.node.validate()?;
        if embeddings.dim() != config.node.c {
            return Err(ModelError::Config(format!(
                "embedding width {} differs from token width {}",
                embeddings.dim(),
                config.node.c
            )));
        }
        let mut params = ParamStore::new();
        let layout = register(&config, &mut params);
        let pe = positional_encoding(config.node.m, config.node.c)?;
        Ok(Model { config, params, embeddings, layout, pe })
    }

    pub fn prepare(&self, spg: &Spg) -> PreparedSpg {
        let cfg = &self.config.node;
        let n = spg.nodes.len();
        let token_matrices = spg.nodes.iter().map(|v| statement_matrix(&self.embeddings, &self.pe, v.tokens(), cfg.m)).collect();
        let mut types = Tensor::zeros(n, cfg.type_vocab.len());
        for (i, v) in spg.nodes.iter().enumerate() {
            types.set(i, cfg.type_index(v.kind), 1.0);
        }
        let edges: Vec<(usize, usize, EdgeKind)> = spg.edges.iter().map(|e| (e.src, e.dst, e.kind)).collect();
        let adjacency = GraphType::ALL
            .iter()
            .map(|g| g.relations().iter().map(|&d| normalized_adjacency(n, &edges, d)).collect())
            .collect();
        PreparedSpg { n, token_matrices, types, adjacency }
    }

    /// Records the forward pass of `spg` on `tape`.
    pub fn forward(&self, tape: &mut Tape, b: &Bindings, spg: &PreparedSpg) -> Result<Forward, ModelError> {
        let cfg = &self.config;
        let (c, m) = (cfg.node.c, cfg.node.m);
        let heads: Vec<HeadParams> =
            self.layout.heads.iter().map(|h| HeadParams { q: b.get(h[0]), k: b.get(h[1]), v: b.get(h[2]) }).collect();
        let mut rows = Vec::with_capacity(spg.n);
        for t in &spg.token_matrices {
            rows.push(match t {
                Some(t) => {
                    let t = tape.constant(t.clone());
                    token_attention(tape, t, &heads, c, m)?
                }
                None => tape.constant(Tensor::zeros(1, m * c)),
            });
        }
        let x_se = tape.concat_rows(&rows)?;
        let x_type = tape.constant(spg.types.clone());
        let x = init_node(tape, x_se, x_type, b.get(self.layout.w_l), b.get(self.layout.b_l))?;

        let f = cfg.feature_width();
        let mut features = Vec::with_capacity(4);
        let mut alpha = [None; 4];
        for (gi, g) in GraphType::ALL.iter().enumerate() {
            if *g != GraphType::Spg && spg.is_edge_empty(*g) {
                features.push(tape.constant(Tensor::zeros(1, f)));
                continue;
            }
            let enc = &self.layout.encoders[gi];
            let adjacency: Vec<Option<Var>> =
                spg.adjacency[gi].iter().map(|a| a.as_ref().map(|a| tape.constant(a.clone()))).collect();
            let layers: Vec<(Vec<Var>, Var)> =
                enc.layers.iter().map(|(rel, s)| (rel.iter().map(|&p| b.get(p)).collect(), b.get(*s))).collect();
            let hcat = encode_graph(tape, x, &adjacency, &layers, cfg.rgcn_activation)?;
            let theta: Vec<Var> = enc.theta.iter().map(|&p| b.get(p)).collect();
            let (s, a) =
                node_attention_readout(tape, hcat, &adjacency, &theta, b.get(enc.theta_self), cfg.attention_activation)?;
            features.push(s);
            alpha[gi] = Some(a);
        }
        let s_spg = features[0];
        let (s_as, beta) = subgraph_attention(tape, s_spg, [features[1], features[2], features[3]], b.get(self.layout.w_r))?;
        let probs = classify(tape, s_spg, s_as, b.get(self.layout.w_cn), b.get(self.layout.b_cn))?;
        Ok(Forward { probs, s_spg, s_as, alpha, beta, features: [features[0], features[1], features[2], features[3]] })
    }

    /// `p(y | spg)`.
    pub fn predict(&self, spg: &PreparedSpg) -> Result<[f64; 2], ModelError> {
        let mut tape = Tape::new();
        let b = tape.bind_constants(&self.params);
        let out = self.forward(&mut tape, &b, spg)?;
        let p = &tape.value(out.probs).data;
        Ok([p[0], p[1]])
    }

    /// Loss of one labeled SPG and the gradient of every parameter.
    /// Parameters off this SPG's computation path get zero gradients.
    pub fn loss_and_grads(&self, spg: &PreparedSpg, label: u8) -> Result<(f64, Vec<Tensor>), ModelError> {
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let out = self.forward(&mut tape, &b, spg)?;
        let l = loss(&mut tape, out.probs, label)?;
        tape.backward(l)?;
        let grads = tape
            .grads(&b)
            .into_iter()
            .zip(self.params.tensors())
            .map(|(g, p)| g.unwrap_or_else(|| Tensor { shape: p.shape.clone(), data: vec![0.0; p.len()] }))
            .collect();
        Ok((tape.value(l).item(), grads))
    }

    pub fn to_json(&self) -> Value {
        json!({
            "format": "vulspg-model",
            "version": MODEL_FORMAT_VERSION,
            "config": self.config,
            "embeddings": self.embeddings,
            "weights": self.params.to_json(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Model, ModelError> {
        let bad = |m: String| ModelError::Checkpoint(m);
        if v["format"] != "vulspg-model" || v["version"] != MODEL_FORMAT_VERSION {
            return Err(bad(format!("unsupported format {} version {}", v["format"], v["version"])));
        }
        let config: ModelConfig = serde_json::from_value(v["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let embeddings: Embeddings = serde_json::from_value(v["embeddings"].clone()).map_err(|e| bad(e.to_string()))?;
        let weights = ParamStore::from_json(&v["weights"])?;
        let mut model = Model::new(config, embeddings)?;
        if weights.len() != model.params.len() {
            return Err(bad(format!("{} weights for {} parameters", weights.len(), model.params.len())));
        }
        for (_, name, t) in weights.iter() {
            let id = model.params.id(name).ok_or_else(|| bad(format!("unknown parameter `{name}`")))?;
            if model.params.get(id).shape != t.shape {
                return Err(bad(format!("parameter `{name}` has shape {:?}", t.shape)));
            }
            *model.params.get_mut(id) = t.clone();
        }
        Ok(model)
    }
}
