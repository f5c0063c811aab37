//! Sequence assembly and the trainable transformer encoder.
//!
//! A sample's segments are concatenated in the fixed order title, OCR,
//! frames, related docs, each position labeled with its source. Encoding
//! adds token embeddings (or a linear projection for frame features), a
//! learned source-tag embedding, and sinusoidal positions, then runs
//! pre-norm self-attention layers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NodeId, Tape};
use crate::datamodel::NewsVideoSample;
use crate::layers::{self, encoder_layer};
use crate::model::{BoundParams, ModelParams};
use crate::numcore::{Matrix, NumError, Scalar};
use crate::trainer::AblationMask;

#[derive(Error, Debug)]
pub enum EncoderError {
    #[error("sequence has {0} positions; at least 2 are required")]
    EmptySequence(usize),
    #[error("frame feature width {got} does not match configured D_in {expected}")]
    FrameWidth { expected: usize, got: usize },
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Source category of a sequence position; doubles as the node category in
/// the relation graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SourceTag {
    Title,
    Ocr,
    Frame,
    Related,
}

impl SourceTag {
    /// Row in the tag-embedding table.
    pub fn index(self) -> usize {
        match self {
            SourceTag::Title => 0,
            SourceTag::Ocr => 1,
            SourceTag::Frame => 2,
            SourceTag::Related => 3,
        }
    }
}

/// One position of the concatenated input sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeqItem {
    Title { token: usize },
    Ocr { token: usize },
    Frame { index: usize },
    Related { token: usize, doc: usize },
}

impl SeqItem {
    pub fn tag(&self) -> SourceTag {
        match self {
            SeqItem::Title { .. } => SourceTag::Title,
            SeqItem::Ocr { .. } => SourceTag::Ocr,
            SeqItem::Frame { .. } => SourceTag::Frame,
            SeqItem::Related { .. } => SourceTag::Related,
        }
    }

    pub fn token(&self) -> Option<usize> {
        match self {
            SeqItem::Title { token } | SeqItem::Ocr { token } | SeqItem::Related { token, .. } => {
                Some(*token)
            }
            SeqItem::Frame { .. } => None,
        }
    }
}

/// The labeled input sequence X for one sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceX {
    items: Vec<SeqItem>,
}

impl SequenceX {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[SeqItem] {
        &self.items
    }

    pub fn item(&self, pos: usize) -> SeqItem {
        self.items[pos]
    }

    /// Positions holding the given tag, in sequence order.
    pub fn positions_with_tag(&self, tag: SourceTag) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.tag() == tag)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Encoder dimensions. `d` must be divisible by `n_heads`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_in: usize,
    pub max_text_len: usize,
    pub max_frames: usize,
    pub vocab_size: usize,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), NumError> {
        if self.d == 0 || self.n_heads == 0 || self.d % self.n_heads != 0 {
            return Err(NumError::Invalid(format!(
                "encoder width {} must be a positive multiple of {} heads",
                self.d, self.n_heads
            )));
        }
        if self.vocab_size < 4 {
            return Err(NumError::Invalid("vocab size must be at least 4".into()));
        }
        Ok(())
    }
}

/// Encoder output: one row per sequence position.
#[derive(Clone, Debug)]
pub struct EncodedMatrix<T> {
    pub h: Matrix<T>,
    pub seq: SequenceX,
}

/// Concatenates the sample's segments, dropping any that the ablation mask
/// disables. Ordering among the surviving segments is preserved.
pub fn build_sequence(
    sample: &NewsVideoSample,
    ablation: &AblationMask,
) -> Result<SequenceX, EncoderError> {
    let mut items = Vec::new();
    if !ablation.no_title {
        for &token in &sample.title_tokens {
            items.push(SeqItem::Title { token });
        }
    }
    if !ablation.no_ocr {
        for &token in &sample.ocr_tokens {
            items.push(SeqItem::Ocr { token });
        }
    }
    if !ablation.no_visual {
        for index in 0..sample.frame_features.rows() {
            items.push(SeqItem::Frame { index });
        }
    }
    if !ablation.no_related {
        for (doc, tokens) in sample.related_docs.iter().enumerate() {
            for &token in tokens {
                items.push(SeqItem::Related { token, doc });
            }
        }
    }
    if items.len() < 2 {
        return Err(EncoderError::EmptySequence(items.len()));
    }
    Ok(SequenceX { items })
}

/// Raw per-position input features before positions and tags are added:
/// token embeddings for text positions, projected frame features for frame
/// positions. This is also the similarity space the relation graph uses.
pub(crate) fn input_features<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &BoundParams,
    sample: &NewsVideoSample,
    seq: &SequenceX,
    d_in: usize,
) -> Result<NodeId, EncoderError> {
    if sample.frame_features.cols() != d_in {
        return Err(EncoderError::FrameWidth {
            expected: d_in,
            got: sample.frame_features.cols(),
        });
    }
    // The fixed segment order yields at most three runs (tokens, frames,
    // tokens); each run becomes one gather or one projection.
    let mut parts: Vec<NodeId> = Vec::new();
    let mut pending_tokens: Vec<usize> = Vec::new();
    let flush =
        |tape: &mut Tape<T>, pending: &mut Vec<usize>, parts: &mut Vec<NodeId>| -> Result<(), NumError> {
            if !pending.is_empty() {
                let node = tape.gather_rows(bound.token_emb, pending)?;
                parts.push(node);
                pending.clear();
            }
            Ok(())
        };
    let items = seq.items();
    let mut idx = 0;
    while idx < items.len() {
        match items[idx] {
            SeqItem::Frame { .. } => {
                flush(tape, &mut pending_tokens, &mut parts)?;
                let mut rows = Vec::new();
                while idx < items.len() {
                    if let SeqItem::Frame { index } = items[idx] {
                        rows.push(sample.frame_features.row(index).to_vec());
                        idx += 1;
                    } else {
                        break;
                    }
                }
                let raw = Matrix::from_rows(&rows)?;
                let raw = tape.constant(raw.cast::<T>());
                let projected = tape.matmul(raw, bound.frame_w)?;
                let projected = tape.add_bias_row(projected, bound.frame_b)?;
                parts.push(projected);
            }
            it => {
                pending_tokens.push(it.token().expect("text item"));
                idx += 1;
            }
        }
    }
    flush(tape, &mut pending_tokens, &mut parts)?;
    let joined = if parts.len() == 1 {
        parts[0]
    } else {
        tape.concat_rows(&parts)?
    };
    Ok(joined)
}

/// Full encode on an existing tape: input features + tag embedding +
/// sinusoidal positions, then the layer stack. Returns the output node and
/// the per-layer-per-head attention probability nodes.
pub(crate) fn encode_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    bound: &BoundParams,
    cfg: &EncoderConfig,
    sample: &NewsVideoSample,
    seq: &SequenceX,
) -> Result<(NodeId, NodeId, Vec<NodeId>), EncoderError> {
    let features = input_features(tape, bound, sample, seq, cfg.d_in)?;
    let tag_ids: Vec<usize> = seq.items().iter().map(|it| it.tag().index()).collect();
    let tags = tape.gather_rows(bound.tag_emb, &tag_ids)?;
    let x = tape.add(features, tags)?;
    let positions = tape.constant(layers::sinusoidal_positions::<T>(seq.len(), cfg.d));
    let mut x = tape.add(x, positions)?;
    let mut attn_probs = Vec::new();
    for layer in &bound.enc_layers {
        let (next, probs) = encoder_layer(tape, x, layer, cfg.n_heads)?;
        x = next;
        attn_probs.extend(probs);
    }
    Ok((x, features, attn_probs))
}

/// Standalone encode: H = TE(X), shape S x D.
pub fn encode<T: Scalar>(
    sample: &NewsVideoSample,
    seq: &SequenceX,
    params: &ModelParams<T>,
) -> Result<EncodedMatrix<T>, EncoderError> {
    let (enc, _) = encode_with_attention(sample, seq, params)?;
    Ok(enc)
}

/// Encode, also returning every attention probability matrix (layer-major,
/// head-minor) for inspection.
pub fn encode_with_attention<T: Scalar>(
    sample: &NewsVideoSample,
    seq: &SequenceX,
    params: &ModelParams<T>,
) -> Result<(EncodedMatrix<T>, Vec<Matrix<T>>), EncoderError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let (h, _, probs) = encode_on_tape(&mut tape, &bound, &params.config.encoder, sample, seq)?;
    let attn = probs.iter().map(|&p| tape.value(p).clone()).collect();
    Ok((
        EncodedMatrix {
            h: tape.value(h).clone(),
            seq: seq.clone(),
        },
        attn,
    ))
}
