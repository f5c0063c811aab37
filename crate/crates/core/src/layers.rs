//! Shared transformer building blocks: multi-head attention, feed-forward,
//! and sinusoidal position encodings, expressed as tape fragments. The
//! encoder and decoder assemble their layers from these.

use crate::autodiff::{AttnMask, NodeId, Tape};
use crate::numcore::{Matrix, NumError, Scalar};

/// Node handles for one attention sublayer's projections.
#[derive(Clone, Copy)]
pub(crate) struct AttnNodes {
    pub wq: NodeId,
    pub bq: NodeId,
    pub wk: NodeId,
    pub bk: NodeId,
    pub wv: NodeId,
    pub bv: NodeId,
    pub wo: NodeId,
    pub bo: NodeId,
}

#[derive(Clone, Copy)]
pub(crate) struct NormNodes {
    pub gamma: NodeId,
    pub beta: NodeId,
}

#[derive(Clone, Copy)]
pub(crate) struct FfnNodes {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

pub(crate) struct EncoderLayerNodes {
    pub ln1: NormNodes,
    pub attn: AttnNodes,
    pub ln2: NormNodes,
    pub ffn: FfnNodes,
}

pub(crate) struct DecoderLayerNodes {
    pub ln1: NormNodes,
    pub self_attn: AttnNodes,
    pub ln2: NormNodes,
    pub cross_attn: AttnNodes,
    pub ln3: NormNodes,
    pub ffn: FfnNodes,
}

/// Scaled dot-product attention over `n_heads` column blocks. Returns the
/// projected output and the per-head attention probability nodes.
pub(crate) fn multi_head_attention<T: Scalar>(
    tape: &mut Tape<T>,
    queries: NodeId,
    keys_values: NodeId,
    w: &AttnNodes,
    n_heads: usize,
    mask: AttnMask,
) -> Result<(NodeId, Vec<NodeId>), NumError> {
    let d = tape.value(w.wq).cols();
    debug_assert_eq!(d % n_heads, 0);
    let dk = d / n_heads;
    let scale = T::from_f64(1.0 / (dk as f64).sqrt());

    let q = tape.matmul(queries, w.wq)?;
    let q = tape.add_bias_row(q, w.bq)?;
    let k = tape.matmul(keys_values, w.wk)?;
    let k = tape.add_bias_row(k, w.bk)?;
    let v = tape.matmul(keys_values, w.wv)?;
    let v = tape.add_bias_row(v, w.bv)?;

    let mut head_outs = Vec::with_capacity(n_heads);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = tape.slice_cols(q, h * dk, dk)?;
        let kh = tape.slice_cols(k, h * dk, dk)?;
        let vh = tape.slice_cols(v, h * dk, dk)?;
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scale(scores, scale);
        let p = tape.softmax_rows(scaled, mask);
        probs.push(p);
        head_outs.push(tape.matmul(p, vh)?);
    }
    let merged = tape.concat_cols(&head_outs)?;
    let out = tape.matmul(merged, w.wo)?;
    let out = tape.add_bias_row(out, w.bo)?;
    Ok((out, probs))
}

pub(crate) fn feed_forward<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    w: &FfnNodes,
) -> Result<NodeId, NumError> {
    let h = tape.matmul(x, w.w1)?;
    let h = tape.add_bias_row(h, w.b1)?;
    let h = tape.relu(h);
    let h = tape.matmul(h, w.w2)?;
    tape.add_bias_row(h, w.b2)
}

/// Pre-norm encoder layer: x + Attn(LN(x)), then x + FFN(LN(x)).
pub(crate) fn encoder_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    layer: &EncoderLayerNodes,
    n_heads: usize,
) -> Result<(NodeId, Vec<NodeId>), NumError> {
    let n1 = tape.layer_norm_rows(x, layer.ln1.gamma, layer.ln1.beta)?;
    let (attn, probs) =
        multi_head_attention(tape, n1, n1, &layer.attn, n_heads, AttnMask::Full)?;
    let x = tape.add(x, attn)?;
    let n2 = tape.layer_norm_rows(x, layer.ln2.gamma, layer.ln2.beta)?;
    let f = feed_forward(tape, n2, &layer.ffn)?;
    let out = tape.add(x, f)?;
    Ok((out, probs))
}

/// Pre-norm decoder layer: causal self-attention, cross-attention over the
/// encoder memory, then feed-forward, each with a residual.
pub(crate) fn decoder_layer<T: Scalar>(
    tape: &mut Tape<T>,
    x: NodeId,
    memory: NodeId,
    layer: &DecoderLayerNodes,
    n_heads: usize,
) -> Result<NodeId, NumError> {
    let n1 = tape.layer_norm_rows(x, layer.ln1.gamma, layer.ln1.beta)?;
    let (self_attn, _) =
        multi_head_attention(tape, n1, n1, &layer.self_attn, n_heads, AttnMask::Causal)?;
    let x = tape.add(x, self_attn)?;
    let n2 = tape.layer_norm_rows(x, layer.ln2.gamma, layer.ln2.beta)?;
    let (cross, _) =
        multi_head_attention(tape, n2, memory, &layer.cross_attn, n_heads, AttnMask::Full)?;
    let x = tape.add(x, cross)?;
    let n3 = tape.layer_norm_rows(x, layer.ln3.gamma, layer.ln3.beta)?;
    let f = feed_forward(tape, n3, &layer.ffn)?;
    tape.add(x, f)
}

/// Fixed sinusoidal position table: sin on even columns, cos on odd, with
/// the usual 10000^(2i/d) wavelengths.
pub(crate) fn sinusoidal_positions<T: Scalar>(len: usize, d: usize) -> Matrix<T> {
    Matrix::from_fn(len, d, |pos, j| {
        let i = j / 2;
        let rate = (pos as f64) / 10000f64.powf(2.0 * i as f64 / d as f64);
        T::from_f64(if j % 2 == 0 { rate.sin() } else { rate.cos() })
    })
}
