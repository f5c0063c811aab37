//! Output heads over the fused representation: mean-pooled softmax
//! classification with binary cross entropy, a teacher-forced transformer
//! decoder with cross-attention for explanation generation, the generation
//! loss, the weighted joint objective, and greedy decoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AttnMask, NodeId, Tape, PROB_CLAMP};
use crate::datamodel::{BOS, EOS};
use crate::layers::{self, decoder_layer};
use crate::model::{BoundParams, ModelParams};
use crate::numcore::{Matrix, NumError, Scalar};

#[derive(Error, Debug)]
pub enum HeadsError {
    #[error("gold explanation has {len} tokens, exceeding max_gen_len {max}")]
    GoldTooLong { len: usize, max: usize },
    #[error("gold explanation must end with EOS")]
    GoldMissingEos,
    #[error("distributions cover {rows} positions but gold has {gold} tokens")]
    LengthMismatch { rows: usize, gold: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Decoder dimensions and decoding limits.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d: usize,
    pub max_gen_len: usize,
    /// Reuse the transposed token-embedding table as the output projection.
    pub tie_output: bool,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig {
            n_layers: 1,
            n_heads: 4,
            d: 32,
            max_gen_len: 64,
            tie_output: false,
        }
    }
}

/// Weights of the classification and generation losses in the joint
/// objective.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha1: 0.2,
            alpha2: 0.8,
        }
    }
}

/// Standalone classifier weights: a 2 x D projection and a two-logit bias.
#[derive(Clone, Debug)]
pub struct ClassifierHead<T> {
    pub w: Matrix<T>,
    pub b: Matrix<T>,
}

/// Mean-pool + affine + softmax on an existing tape. `cls_w` is 2 x D.
pub(crate) fn classify_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    z: NodeId,
    cls_w: NodeId,
    cls_b: NodeId,
) -> Result<NodeId, NumError> {
    let pooled = tape.mean_pool_rows(z);
    let wt = tape.transpose(cls_w);
    let logits = tape.matmul(pooled, wt)?;
    let logits = tape.add_bias_row(logits, cls_b)?;
    Ok(tape.softmax_rows(logits, AttnMask::Full))
}

/// p = softmax(W Z_pool + b) over {real, fake}.
pub fn classify<T: Scalar>(z: &Matrix<T>, head: &ClassifierHead<T>) -> Result<[T; 2], NumError> {
    let mut tape = Tape::new();
    let z_node = tape.constant(z.clone());
    let w = tape.constant(head.w.clone());
    let b = tape.constant(head.b.clone());
    let probs = classify_on_tape(&mut tape, z_node, w, b)?;
    let v = tape.value(probs);
    Ok([v.get(0, 0), v.get(0, 1)])
}

/// Binary cross entropy -[(1-y) ln p0 + y ln p1] with probability clamping.
pub fn bce_loss<T: Scalar>(p: [T; 2], y: u8) -> T {
    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::one() - lo;
    let picked = if y == 0 { p[0] } else { p[1] };
    -picked.max(lo).min(hi).ln()
}

/// Decoder forward for an explicit input prefix (already starting at BOS).
/// Returns the node holding one distribution row per input position.
fn decode_ids_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    memory: NodeId,
    input_ids: &[usize],
    bound: &BoundParams,
    cfg: &DecoderConfig,
) -> Result<NodeId, HeadsError> {
    let x = tape.gather_rows(bound.token_emb, input_ids)?;
    let positions = tape.constant(layers::sinusoidal_positions::<T>(input_ids.len(), cfg.d));
    let mut x = tape.add(x, positions)?;
    for layer in &bound.dec_layers {
        x = decoder_layer(tape, x, memory, layer, cfg.n_heads)?;
    }
    let logits = match bound.dec_out_w {
        Some(w) => tape.matmul(x, w)?,
        None => {
            let et = tape.transpose(bound.token_emb);
            tape.matmul(x, et)?
        }
    };
    let logits = tape.add_bias_row(logits, bound.dec_out_b)?;
    Ok(tape.softmax_rows(logits, AttnMask::Full))
}

/// Teacher-forced decode on an existing tape: input is BOS + gold[..-1],
/// output one distribution per gold position.
pub(crate) fn decode_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    memory: NodeId,
    gold: &[usize],
    bound: &BoundParams,
    cfg: &DecoderConfig,
) -> Result<NodeId, HeadsError> {
    if gold.last() != Some(&EOS) {
        return Err(HeadsError::GoldMissingEos);
    }
    if gold.len() > cfg.max_gen_len {
        return Err(HeadsError::GoldTooLong {
            len: gold.len(),
            max: cfg.max_gen_len,
        });
    }
    let mut input_ids = Vec::with_capacity(gold.len());
    input_ids.push(BOS);
    input_ids.extend_from_slice(&gold[..gold.len() - 1]);
    decode_ids_on_tape(tape, memory, &input_ids, bound, cfg)
}

/// Per-position output distributions under teacher forcing.
pub fn decode_teacher_forced<T: Scalar>(
    params: &ModelParams<T>,
    z: &Matrix<T>,
    gold: &[usize],
) -> Result<Matrix<T>, HeadsError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let memory = tape.constant(z.clone());
    let probs = decode_on_tape(&mut tape, memory, gold, &bound, &params.config.decoder)?;
    Ok(tape.value(probs).clone())
}

/// Mean over positions of -ln(distribution[gold token]), clamped.
pub fn gen_loss<T: Scalar>(distributions: &Matrix<T>, gold: &[usize]) -> Result<T, HeadsError> {
    if distributions.rows() != gold.len() {
        return Err(HeadsError::LengthMismatch {
            rows: distributions.rows(),
            gold: gold.len(),
        });
    }
    let lo = T::from_f64(PROB_CLAMP);
    let hi = T::one() - lo;
    let mut total = T::zero();
    for (i, &t) in gold.iter().enumerate() {
        total = total - distributions.get(i, t).max(lo).min(hi).ln();
    }
    Ok(total / T::from_f64(gold.len() as f64))
}

/// L = alpha1 * L_p + alpha2 * L_gen.
pub fn joint_loss<T: Scalar>(l_p: T, l_gen: T, w: &LossWeights) -> T {
    T::from_f64(w.alpha1) * l_p + T::from_f64(w.alpha2) * l_gen
}

/// Greedy decoding from BOS: append the argmax token (ties toward the
/// lowest id) until EOS or the length cap; EOS is not returned.
pub fn greedy_generate<T: Scalar>(
    params: &ModelParams<T>,
    z: &Matrix<T>,
    max_gen_len: usize,
) -> Result<Vec<usize>, HeadsError> {
    let mut generated: Vec<usize> = Vec::new();
    while generated.len() < max_gen_len {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let memory = tape.constant(z.clone());
        let mut input_ids = Vec::with_capacity(generated.len() + 1);
        input_ids.push(BOS);
        input_ids.extend_from_slice(&generated);
        let probs = decode_ids_on_tape(
            &mut tape,
            memory,
            &input_ids,
            &bound,
            &params.config.decoder,
        )?;
        let dist = tape.value(probs);
        let last = dist.row(dist.rows() - 1);
        let mut best = 0usize;
        let mut best_p = last[0];
        for (tok, &p) in last.iter().enumerate().skip(1) {
            if p > best_p {
                best_p = p;
                best = tok;
            }
        }
        if best == EOS {
            break;
        }
        generated.push(best);
    }
    Ok(generated)
}
