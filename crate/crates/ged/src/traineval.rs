//! Training loop, evaluation metrics, and model checkpointing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{Graph, NodeId, Optimizer, Scalar, Tensor};
use crate::corpus::{LabeledSentence, Vocabulary};
use crate::model::{Arch, Model, ModelConfig, ModelError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint parameter {name} has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error("checkpoint is missing parameter {0}")]
    MissingParam(String),
}

/// A sentence already mapped to vocabulary ids, with per-token labels
/// (1 = correct, 0 = erroneous).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub ids: Vec<usize>,
    pub labels: Vec<u8>,
}

/// Map tokens to ids through the vocabulary (unknown tokens become `<unk>`).
pub fn encode_dataset(vocab: &Vocabulary, data: &[LabeledSentence]) -> Vec<EncodedSentence> {
    data.iter()
        .map(|s| EncodedSentence {
            ids: vocab.encode(&s.tokens),
            labels: s.labels.clone(),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// When set, plain SGD with this learning rate is used instead of Adam.
    pub sgd: bool,
    /// Suppress the per-epoch loss line on stderr.
    pub quiet: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            epochs: 5,
            learning_rate: 1e-3,
            batch_size: 32,
            clip_norm: 5.0,
            sgd: false,
            quiet: true,
        }
    }
}

/// Mean binary cross-entropy over the tokens of one sentence, as a graph
/// node suitable for backpropagation.
pub fn sentence_loss<S: Scalar>(
    graph: &mut Graph<S>,
    model: &Model<S>,
    sentence: &EncodedSentence,
) -> Result<NodeId, TrainError> {
    assert_eq!(
        sentence.ids.len(),
        sentence.labels.len(),
        "ids and labels must be aligned"
    );
    let probs = model.forward(graph, &sentence.ids)?;
    let targets = Tensor::vector(
        sentence
            .labels
            .iter()
            .map(|&l| if l == 0 { S::zero() } else { S::one() })
            .collect(),
    );
    graph
        .bce_mean(probs, targets)
        .map_err(|e| TrainError::Model(e.into()))
}

/// Train in place; returns the mean loss of each epoch.
///
/// Batches are formed after a seeded shuffle each epoch. The gradient of a
/// batch is the average of per-sentence gradients, clipped by global norm
/// before the optimizer step, so results do not depend on sentence lengths
/// lining up.
pub fn train<S: Scalar>(
    model: &mut Model<S>,
    data: &[EncodedSentence],
    config: &TrainConfig,
) -> Result<Vec<f64>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let batch_size = config.batch_size.max(1);
    let mut optimizer: Optimizer<S> = if config.sgd {
        Optimizer::sgd(config.learning_rate)
    } else {
        Optimizer::adam(config.learning_rate)
    };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(batch_size).enumerate() {
            let mut grads = crate::autodiff::Gradients::zeros_like(&model.store);
            let inv = S::from_f64(1.0 / batch.len() as f64);
            for &si in batch {
                let mut graph = Graph::new(&model.store);
                let loss = sentence_loss(&mut graph, model, &data[si])?;
                let loss_val = graph.value(loss).item().to_f64();
                if !loss_val.is_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                    });
                }
                loss_sum += loss_val;
                let mut g = graph.backward(loss).map_err(ModelError::from)?;
                g.scale_assign(inv);
                grads.add_assign(&g);
            }
            grads.clip_by_global_norm(config.clip_norm);
            optimizer.step(&mut model.store, &grads);
        }
        let mean = loss_sum / data.len() as f64;
        if !config.quiet {
            eprintln!("epoch {epoch}: mean loss {mean:.6}");
        }
        epoch_losses.push(mean);
    }
    Ok(epoch_losses)
}

/// Detection quality, with precision/recall/F reported as percentages.
/// The positive class is "erroneous": a token is flagged when its predicted
/// correctness probability falls below the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub beta: f64,
    pub threshold: f64,
}

/// F_beta from precision and recall (any consistent scale); 0 when the
/// denominator vanishes.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

pub fn evaluate<S: Scalar>(
    model: &Model<S>,
    data: &[EncodedSentence],
    threshold: f64,
    beta: f64,
) -> Result<EvalReport, TrainError> {
    let (mut tp, mut fp, mut fnc) = (0u64, 0u64, 0u64);
    for sentence in data {
        let probs = model.predict(&sentence.ids)?;
        for (p, &label) in probs.iter().zip(&sentence.labels) {
            let flagged = Scalar::to_f64(*p) < threshold;
            let erroneous = label == 0;
            match (flagged, erroneous) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fnc += 1,
                (false, false) => {}
            }
        }
    }
    Ok(report_from_counts(tp, fp, fnc, threshold, beta))
}

pub fn report_from_counts(
    tp: u64,
    fp: u64,
    fnc: u64,
    threshold: f64,
    beta: f64,
) -> EvalReport {
    let pct = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    let precision = pct(tp, tp + fp);
    let recall = pct(tp, tp + fnc);
    EvalReport {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fnc,
        precision,
        recall,
        f_score: f_beta(precision, recall, beta),
        beta,
        threshold,
    }
}

const MAGIC: &[u8; 8] = b"GEDMDL\0\x01";
const VERSION: u32 = 1;

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| CheckpointError::Corrupt("unexpected end of file".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Serialize the model: magic bytes and version, a textual `key=value`
/// metadata header describing the architecture, then each named parameter
/// as a shape followed by little-endian f32 values.
pub fn save_checkpoint<S: Scalar, W: Write>(
    model: &Model<S>,
    w: &mut W,
) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    write_u32(w, VERSION)?;
    let c = &model.config;
    let header = format!(
        "arch={}\nvocab_size={}\nd_emb={}\nd_hidden={}\nconv_window={}\nconv_d_emb={}\ninit_range={}\n",
        c.arch.name(), c.vocab_size, c.d_emb, c.d_hidden, c.conv_window, c.conv_d_emb, c.init_range
    );
    write_u32(w, header.len() as u32)?;
    w.write_all(header.as_bytes())?;
    let count = model.store.iter().count();
    write_u32(w, count as u32)?;
    for (_, name, tensor) in model.store.iter() {
        write_u32(w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        write_u32(w, tensor.shape().len() as u32)?;
        for &d in tensor.shape() {
            write_u32(w, d as u32)?;
        }
        for &v in tensor.data() {
            w.write_all(&(v.to_f64() as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint_file<S: Scalar>(
    model: &Model<S>,
    path: &Path,
) -> Result<(), CheckpointError> {
    let mut w = BufWriter::new(File::create(path)?);
    save_checkpoint(model, &mut w)?;
    w.flush()?;
    Ok(())
}

fn header_field<'a>(
    fields: &'a std::collections::HashMap<&str, &str>,
    key: &str,
) -> Result<&'a str, CheckpointError> {
    fields
        .get(key)
        .copied()
        .ok_or_else(|| CheckpointError::Corrupt(format!("header is missing {key}")))
}

fn parse_field<T: std::str::FromStr>(
    fields: &std::collections::HashMap<&str, &str>,
    key: &str,
) -> Result<T, CheckpointError> {
    header_field(fields, key)?
        .parse()
        .map_err(|_| CheckpointError::Corrupt(format!("invalid value for {key}")))
}

pub fn load_checkpoint<S: Scalar, R: Read>(r: &mut R) -> Result<Model<S>, CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| CheckpointError::Corrupt("file too short".into()))?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let header_len = read_u32(r)? as usize;
    let mut header = vec![0u8; header_len];
    r.read_exact(&mut header)
        .map_err(|_| CheckpointError::Corrupt("truncated header".into()))?;
    let header = String::from_utf8(header)
        .map_err(|_| CheckpointError::Corrupt("header is not valid utf-8".into()))?;
    let fields: std::collections::HashMap<&str, &str> = header
        .lines()
        .filter_map(|l| l.split_once('='))
        .collect();
    let arch = Arch::from_name(header_field(&fields, "arch")?)
        .ok_or_else(|| CheckpointError::Corrupt("unknown architecture".into()))?;
    let config = ModelConfig {
        arch,
        vocab_size: parse_field(&fields, "vocab_size")?,
        d_emb: parse_field(&fields, "d_emb")?,
        d_hidden: parse_field(&fields, "d_hidden")?,
        conv_window: parse_field(&fields, "conv_window")?,
        conv_d_emb: parse_field(&fields, "conv_d_emb")?,
        init_range: parse_field(&fields, "init_range")?,
    };
    // a fresh model provides the parameter layout; values are overwritten
    let mut model = Model::<S>::new(config, 0);
    let count = read_u32(r)? as usize;
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)
            .map_err(|_| CheckpointError::Corrupt("truncated parameter name".into()))?;
        let name = String::from_utf8(name)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not utf-8".into()))?;
        let rank = read_u32(r)? as usize;
        if rank > 2 {
            return Err(CheckpointError::Corrupt(format!(
                "parameter {name} has unsupported rank {rank}"
            )));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(r)? as usize);
        }
        let id = model
            .store
            .id_of(&name)
            .ok_or_else(|| CheckpointError::Corrupt(format!("unexpected parameter {name}")))?;
        let expected = model.store.get(id).shape().to_vec();
        if shape != expected {
            return Err(CheckpointError::ShapeMismatch {
                name,
                found: shape,
                expected,
            });
        }
        let len: usize = shape.iter().product();
        let mut bytes = vec![0u8; len * 4];
        r.read_exact(&mut bytes)
            .map_err(|_| CheckpointError::Corrupt(format!("truncated values for {name}")))?;
        let tensor = model.store.get_mut(id);
        for (j, chunk) in bytes.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            tensor.data_mut()[j] = S::from_f64(v as f64);
        }
        seen.insert(name);
    }
    for (_, name, _) in model.store.iter() {
        if !seen.contains(name) {
            return Err(CheckpointError::MissingParam(name.to_string()));
        }
    }
    Ok(model)
}

pub fn load_checkpoint_file<S: Scalar>(path: &Path) -> Result<Model<S>, CheckpointError> {
    let mut r = BufReader::new(File::open(path)?);
    load_checkpoint(&mut r)
}
