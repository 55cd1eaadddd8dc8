//! Token-level grammaticality models: a bidirectional LSTM encoder with an
//! intra-sentence attention classifier (optionally without attention), and
//! a fixed-window convolutional baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{
    AutodiffError, Graph, NodeId, Optimizer, ParamId, ParamStore, Scalar, Tensor,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot run the model on an empty sequence")]
    EmptySequence,
    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    IdOutOfRange { id: usize, vocab_size: usize },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Which architecture a model instance uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    BilstmAttn,
    BilstmNoattn,
    Conv,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::BilstmAttn => "bilstm-attn",
            Arch::BilstmNoattn => "bilstm-noattn",
            Arch::Conv => "conv",
        }
    }

    pub fn from_name(s: &str) -> Option<Arch> {
        match s {
            "bilstm-attn" => Some(Arch::BilstmAttn),
            "bilstm-noattn" => Some(Arch::BilstmNoattn),
            "conv" => Some(Arch::Conv),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub arch: Arch,
    pub vocab_size: usize,
    pub d_emb: usize,
    pub d_hidden: usize,
    pub conv_window: usize,
    pub conv_d_emb: usize,
    pub init_range: f64,
}

impl ModelConfig {
    pub fn new(arch: Arch, vocab_size: usize) -> Self {
        ModelConfig {
            arch,
            vocab_size,
            d_emb: 150,
            d_hidden: 150,
            conv_window: 3,
            conv_d_emb: 50,
            init_range: 0.05,
        }
    }

    fn validate(&self) {
        assert!(self.vocab_size >= 1, "vocab_size must be >= 1");
        assert!(self.d_emb >= 1 && self.d_hidden >= 1, "dims must be >= 1");
        assert!(self.conv_window % 2 == 1, "conv_window must be odd");
        assert!(self.init_range > 0.0, "init_range must be positive");
    }
}

/// Gate weights for one LSTM direction: input-to-hidden, hidden-to-hidden
/// and bias, for input, forget, output and candidate gates in that order.
#[derive(Clone, Copy, Debug)]
pub struct LstmParamIds {
    pub wx: [ParamId; 4],
    pub wh: [ParamId; 4],
    pub bias: [ParamId; 4],
}

#[derive(Clone, Copy, Debug)]
pub struct RecurrentParamIds {
    pub embedding: ParamId,
    pub fwd: LstmParamIds,
    pub bwd: LstmParamIds,
    /// Bilinear classifier matrix, d_emb x 2*d_hidden.
    pub classifier_w: ParamId,
    pub classifier_b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub struct ConvParamIds {
    pub embedding: ParamId,
    /// Learned embedding used at positions outside the sentence.
    pub pad: ParamId,
    /// Flattened kernel, conv_window * conv_d_emb.
    pub kernel: ParamId,
    pub bias: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub enum ParamIds {
    Recurrent(RecurrentParamIds),
    Conv(ConvParamIds),
}

/// One trained (or trainable) detector: configuration plus parameters.
pub struct Model<S: Scalar> {
    pub config: ModelConfig,
    pub store: ParamStore<S>,
    pub params: ParamIds,
}

fn uniform_tensor<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], range: f64) -> Tensor<S> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| S::from_f64(rng.gen_range(-range..range)))
        .collect();
    Tensor::from_vec(shape, data)
}

fn init_lstm<S: Scalar>(
    store: &mut ParamStore<S>,
    rng: &mut ChaCha8Rng,
    prefix: &str,
    d_emb: usize,
    d_hidden: usize,
    range: f64,
) -> LstmParamIds {
    const GATES: [&str; 4] = ["input", "forget", "output", "cand"];
    let mut wx = [ParamId::default_placeholder(); 4];
    let mut wh = [ParamId::default_placeholder(); 4];
    let mut bias = [ParamId::default_placeholder(); 4];
    for (i, gate) in GATES.iter().enumerate() {
        wx[i] = store.add(
            &format!("{prefix}.wx.{gate}"),
            uniform_tensor(rng, &[d_hidden, d_emb], range),
        );
        wh[i] = store.add(
            &format!("{prefix}.wh.{gate}"),
            uniform_tensor(rng, &[d_hidden, d_hidden], range),
        );
        bias[i] = store.add(
            &format!("{prefix}.bias.{gate}"),
            uniform_tensor(rng, &[d_hidden], range),
        );
    }
    LstmParamIds { wx, wh, bias }
}

impl<S: Scalar> Model<S> {
    /// Fresh model with all parameters drawn uniformly from
    /// (-init_range, +init_range), deterministically from the seed.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        config.validate();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let r = config.init_range;
        let params = match config.arch {
            Arch::BilstmAttn | Arch::BilstmNoattn => {
                let embedding = store.add(
                    "embedding",
                    uniform_tensor(&mut rng, &[config.vocab_size, config.d_emb], r),
                );
                let fwd = init_lstm(&mut store, &mut rng, "fwd", config.d_emb, config.d_hidden, r);
                let bwd = init_lstm(&mut store, &mut rng, "bwd", config.d_emb, config.d_hidden, r);
                let classifier_w = store.add(
                    "classifier.w",
                    uniform_tensor(&mut rng, &[config.d_emb, 2 * config.d_hidden], r),
                );
                let classifier_b =
                    store.add("classifier.b", uniform_tensor(&mut rng, &[], r));
                ParamIds::Recurrent(RecurrentParamIds {
                    embedding,
                    fwd,
                    bwd,
                    classifier_w,
                    classifier_b,
                })
            }
            Arch::Conv => {
                let embedding = store.add(
                    "conv.embedding",
                    uniform_tensor(&mut rng, &[config.vocab_size, config.conv_d_emb], r),
                );
                let pad = store.add(
                    "conv.pad",
                    uniform_tensor(&mut rng, &[config.conv_d_emb], r),
                );
                let kernel = store.add(
                    "conv.kernel",
                    uniform_tensor(&mut rng, &[config.conv_window * config.conv_d_emb], r),
                );
                let bias = store.add("conv.bias", uniform_tensor(&mut rng, &[], r));
                ParamIds::Conv(ConvParamIds {
                    embedding,
                    pad,
                    kernel,
                    bias,
                })
            }
        };
        Model {
            config,
            store,
            params,
        }
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        for &id in ids {
            if id >= self.config.vocab_size {
                return Err(ModelError::IdOutOfRange {
                    id,
                    vocab_size: self.config.vocab_size,
                });
            }
        }
        Ok(())
    }

    /// Per-token correctness probabilities built on `graph`, one node of
    /// shape [n].
    pub fn forward(&self, graph: &mut Graph<S>, ids: &[usize]) -> Result<NodeId, ModelError> {
        self.check_ids(ids)?;
        match &self.params {
            ParamIds::Recurrent(p) => {
                let attention = self.config.arch == Arch::BilstmAttn;
                forward_recurrent(graph, p, ids, attention).map_err(Into::into)
            }
            ParamIds::Conv(p) => {
                forward_conv(graph, p, ids, self.config.conv_window).map_err(Into::into)
            }
        }
    }

    /// Forward pass only, returning the probabilities as plain scalars.
    pub fn predict(&self, ids: &[usize]) -> Result<Vec<S>, ModelError> {
        let mut graph = Graph::new(&self.store);
        let probs = self.forward(&mut graph, ids)?;
        Ok(graph.value(probs).data().to_vec())
    }

    pub fn optimizer(&self, sgd_lr: Option<f64>, adam_lr: f64) -> Optimizer<S> {
        match sgd_lr {
            Some(lr) => Optimizer::sgd(lr),
            None => Optimizer::adam(adam_lr),
        }
    }
}

/// One LSTM step with the standard forget-gate equations:
/// i,f,o = sigmoid(Wx·x + Wh·h + b), g = tanh(...),
/// c' = f*c + i*g, h' = o*tanh(c').
pub fn lstm_step<S: Scalar>(
    graph: &mut Graph<S>,
    params: &LstmParamIds,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> crate::autodiff::Result<(NodeId, NodeId)> {
    let mut pre = [None; 4];
    for (k, slot) in pre.iter_mut().enumerate() {
        let wx = graph.param(params.wx[k]);
        let wh = graph.param(params.wh[k]);
        let b = graph.param(params.bias[k]);
        let xw = graph.matmul(wx, x)?;
        let hw = graph.matmul(wh, h)?;
        let s = graph.add(xw, hw)?;
        *slot = Some(graph.add(s, b)?);
    }
    let input = graph.sigmoid(pre[0].unwrap())?;
    let forget = graph.sigmoid(pre[1].unwrap())?;
    let output = graph.sigmoid(pre[2].unwrap())?;
    let cand = graph.tanh(pre[3].unwrap())?;
    let fc = graph.mul(forget, c)?;
    let ig = graph.mul(input, cand)?;
    let c_next = graph.add(fc, ig)?;
    let c_act = graph.tanh(c_next)?;
    let h_next = graph.mul(output, c_act)?;
    Ok((h_next, c_next))
}

/// Run both directions from zero states and concatenate per position:
/// position t carries [forward h_t ; backward h_t].
pub fn encode_bilstm<S: Scalar>(
    graph: &mut Graph<S>,
    fwd: &LstmParamIds,
    bwd: &LstmParamIds,
    xs: &[NodeId],
) -> crate::autodiff::Result<Vec<NodeId>> {
    let dim = {
        let wx = graph.param(fwd.wx[0]);
        graph.value(wx).shape()[0]
    };
    let run = |graph: &mut Graph<S>, params: &LstmParamIds, order: Vec<usize>| {
        let mut h = graph.constant(Tensor::zeros(&[dim]));
        let mut c = graph.constant(Tensor::zeros(&[dim]));
        let mut states = vec![h; order.len()];
        for &t in &order {
            let (h2, c2) = lstm_step(graph, params, xs[t], h, c)?;
            h = h2;
            c = c2;
            states[t] = h;
        }
        crate::autodiff::Result::Ok(states)
    };
    let fwd_states = run(graph, fwd, (0..xs.len()).collect())?;
    let bwd_states = run(graph, bwd, (0..xs.len()).rev().collect())?;
    fwd_states
        .iter()
        .zip(&bwd_states)
        .map(|(&f, &b)| graph.concat(&[f, b]))
        .collect()
}

/// Intra-sentence attention: energies E[t][i] = h_t . h_i, row-softmax
/// weights, and context rows C[t] = sum_i alpha[t][i] * h_i.
/// Returns (energies, weights, contexts), each n x 2*d_hidden or n x n.
pub fn attend<S: Scalar>(
    graph: &mut Graph<S>,
    hidden_tape: &[NodeId],
) -> crate::autodiff::Result<(NodeId, NodeId, NodeId)> {
    let tape = graph.stack_rows(hidden_tape)?;
    let tape_t = graph.transpose(tape)?;
    let energies = graph.matmul(tape, tape_t)?;
    let weights = graph.softmax_rows(energies)?;
    let contexts = graph.matmul(weights, tape)?;
    Ok((energies, weights, contexts))
}

/// Bilinear scores s_t = x_t . (W c_t) + b followed by a sigmoid, for all
/// positions at once: rows of `inputs` are x_t, rows of `contexts` are c_t.
pub fn score_tokens<S: Scalar>(
    graph: &mut Graph<S>,
    classifier_w: ParamId,
    classifier_b: ParamId,
    inputs: NodeId,
    contexts: NodeId,
) -> crate::autodiff::Result<NodeId> {
    let w = graph.param(classifier_w);
    let b = graph.param(classifier_b);
    let projected = graph.matmul(inputs, w)?;
    let pointwise = graph.mul(projected, contexts)?;
    let scores = graph.row_sum(pointwise)?;
    let shifted = graph.add(scores, b)?;
    graph.sigmoid(shifted)
}

fn forward_recurrent<S: Scalar>(
    graph: &mut Graph<S>,
    p: &RecurrentParamIds,
    ids: &[usize],
    attention: bool,
) -> crate::autodiff::Result<NodeId> {
    let table = graph.param(p.embedding);
    let xs: Vec<NodeId> = ids
        .iter()
        .map(|&id| graph.lookup(table, id))
        .collect::<crate::autodiff::Result<_>>()?;
    let tape = encode_bilstm(graph, &p.fwd, &p.bwd, &xs)?;
    let contexts = if attention {
        let (_, _, contexts) = attend(graph, &tape)?;
        contexts
    } else {
        graph.stack_rows(&tape)?
    };
    let inputs = graph.stack_rows(&xs)?;
    score_tokens(graph, p.classifier_w, p.classifier_b, inputs, contexts)
}

fn forward_conv<S: Scalar>(
    graph: &mut Graph<S>,
    p: &ConvParamIds,
    ids: &[usize],
    window: usize,
) -> crate::autodiff::Result<NodeId> {
    let table = graph.param(p.embedding);
    let pad = graph.param(p.pad);
    let kernel = graph.param(p.kernel);
    let bias = graph.param(p.bias);
    let half = (window / 2) as isize;
    let n = ids.len() as isize;
    let mut scores = Vec::with_capacity(ids.len());
    for i in 0..n {
        let mut ctx = Vec::with_capacity(window);
        for off in -half..=half {
            let j = i + off;
            if j < 0 || j >= n {
                ctx.push(pad);
            } else {
                ctx.push(graph.lookup(table, ids[j as usize])?);
            }
        }
        let ctx = graph.concat(&ctx)?;
        scores.push(graph.dot(kernel, ctx)?);
    }
    let scores = graph.concat(&scores)?;
    let shifted = graph.add(scores, bias)?;
    graph.sigmoid(shifted)
}

impl ParamId {
    fn default_placeholder() -> ParamId {
        // overwritten before use in init_lstm
        ParamId(usize::MAX)
    }
}
