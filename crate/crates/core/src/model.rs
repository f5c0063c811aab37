//! Model assembly: the named parameter set, configuration, and the
//! end-to-end forward pass (encode, graph reasoning, fusion, heads).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{NodeId, Tape};
use crate::datamodel::NewsVideoSample;
use crate::encoder::{self, EncoderConfig, EncoderError, SequenceX};
use crate::gcn;
use crate::heads::{self, DecoderConfig, HeadsError, LossWeights};
use crate::layers::{AttnNodes, DecoderLayerNodes, EncoderLayerNodes, FfnNodes, NormNodes};
use crate::numcore::{LrGroup, Matrix, NumError, ParamTensor, Scalar};
use crate::relgraph::{self, GraphConfig, MultimodalGraph};
use crate::trainer::AblationMask;

#[derive(Error, Debug)]
pub enum ModelError {
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Heads(#[from] HeadsError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// Every dimension and switch that defines the architecture.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub graph: GraphConfig,
    /// GCN depth L; 1..=4.
    pub gcn_layers: usize,
    /// Feed-forward width multiplier for encoder and decoder layers.
    pub ff_mult: usize,
    pub loss: LossWeights,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), NumError> {
        self.encoder.validate()?;
        if self.decoder.d != self.encoder.d {
            return Err(NumError::Invalid(format!(
                "decoder width {} must match encoder width {}",
                self.decoder.d, self.encoder.d
            )));
        }
        if self.decoder.n_heads == 0 || self.decoder.d % self.decoder.n_heads != 0 {
            return Err(NumError::Invalid(
                "decoder width must be a positive multiple of its head count".into(),
            ));
        }
        if self.decoder.max_gen_len == 0 {
            return Err(NumError::Invalid("max_gen_len must be at least 1".into()));
        }
        if !(1..=4).contains(&self.gcn_layers) {
            return Err(NumError::Invalid(format!(
                "gcn_layers must lie in 1..=4, got {}",
                self.gcn_layers
            )));
        }
        if self.ff_mult == 0 {
            return Err(NumError::Invalid("ff_mult must be at least 1".into()));
        }
        if !self.graph.tau_sem.is_finite() {
            return Err(NumError::Invalid("tau_sem must be finite".into()));
        }
        if self.loss.alpha1 < 0.0 || self.loss.alpha2 < 0.0 {
            return Err(NumError::Invalid("loss weights must be >= 0".into()));
        }
        Ok(())
    }

    /// Desk-scale default: D=32, 2+1 layers, 4 heads.
    pub fn desk(vocab_size: usize, d_in: usize) -> Self {
        ModelConfig {
            encoder: EncoderConfig {
                d: 32,
                n_layers: 2,
                n_heads: 4,
                d_in,
                max_text_len: 224,
                max_frames: 80,
                vocab_size,
            },
            decoder: DecoderConfig {
                n_layers: 1,
                n_heads: 4,
                d: 32,
                max_gen_len: 64,
                tie_output: false,
            },
            graph: GraphConfig::default(),
            gcn_layers: 2,
            ff_mult: 4,
            loss: LossWeights::default(),
        }
    }

    /// Tiny configuration for gradient checks and unit tests.
    pub fn toy(d: usize, enc_layers: usize, vocab_size: usize, d_in: usize) -> Self {
        ModelConfig {
            encoder: EncoderConfig {
                d,
                n_layers: enc_layers,
                n_heads: 2,
                d_in,
                max_text_len: 64,
                max_frames: 16,
                vocab_size,
            },
            decoder: DecoderConfig {
                n_layers: 1,
                n_heads: 2,
                d,
                max_gen_len: 16,
                tie_output: false,
            },
            graph: GraphConfig::default(),
            gcn_layers: 2,
            ff_mult: 2,
            loss: LossWeights::default(),
        }
    }
}

/// The complete trainable parameter set, flat and name-indexed. Creation
/// order is fixed so seeded initialization is reproducible.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    tensors: Vec<ParamTensor<T>>,
    index: HashMap<String, usize>,
}

/// Node handles for every parameter on a tape, grouped by role.
pub(crate) struct BoundParams {
    pub token_emb: NodeId,
    pub tag_emb: NodeId,
    pub frame_w: NodeId,
    pub frame_b: NodeId,
    pub enc_layers: Vec<EncoderLayerNodes>,
    pub gcn_w: Vec<NodeId>,
    pub cls_w: NodeId,
    pub cls_b: NodeId,
    pub dec_layers: Vec<DecoderLayerNodes>,
    pub dec_out_w: Option<NodeId>,
    pub dec_out_b: NodeId,
}

struct ParamBuilder<T> {
    tensors: Vec<ParamTensor<T>>,
    index: HashMap<String, usize>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> ParamBuilder<T> {
    fn uniform(&mut self, name: String, rows: usize, cols: usize, bound: f64, group: LrGroup) {
        let value = {
            let rng = &mut self.rng;
            Matrix::from_fn(rows, cols, |_, _| {
                T::from_f64(rng.gen_range(-bound..bound))
            })
        };
        self.push(name, value, group);
    }

    fn constant(&mut self, name: String, rows: usize, cols: usize, v: f64, group: LrGroup) {
        self.push(name, Matrix::from_fn(rows, cols, |_, _| T::from_f64(v)), group);
    }

    fn push(&mut self, name: String, value: Matrix<T>, group: LrGroup) {
        debug_assert!(!self.index.contains_key(&name), "duplicate param {name}");
        self.index.insert(name.clone(), self.tensors.len());
        self.tensors.push(ParamTensor::new(name, value, group));
    }

    fn attn(&mut self, prefix: &str, d: usize) {
        let bound = 1.0 / (d as f64).sqrt();
        for part in ["wq", "wk", "wv", "wo"] {
            self.uniform(format!("{prefix}.{part}"), d, d, bound, LrGroup::Backbone);
            self.constant(
                format!("{prefix}.{}", part.replace('w', "b")),
                1,
                d,
                0.0,
                LrGroup::Backbone,
            );
        }
    }

    fn norm(&mut self, prefix: &str, d: usize) {
        self.constant(format!("{prefix}.gamma"), 1, d, 1.0, LrGroup::Backbone);
        self.constant(format!("{prefix}.beta"), 1, d, 0.0, LrGroup::Backbone);
    }

    fn ffn(&mut self, prefix: &str, d: usize, ff: usize) {
        self.uniform(
            format!("{prefix}.w1"),
            d,
            ff,
            1.0 / (d as f64).sqrt(),
            LrGroup::Backbone,
        );
        self.constant(format!("{prefix}.b1"), 1, ff, 0.0, LrGroup::Backbone);
        self.uniform(
            format!("{prefix}.w2"),
            ff,
            d,
            1.0 / (ff as f64).sqrt(),
            LrGroup::Backbone,
        );
        self.constant(format!("{prefix}.b2"), 1, d, 0.0, LrGroup::Backbone);
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Seeded initialization: weights uniform in (-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)), norms at identity, biases zero.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self, NumError> {
        config.validate()?;
        let d = config.encoder.d;
        let ff = d * config.ff_mult;
        let vocab = config.encoder.vocab_size;
        let mut b = ParamBuilder {
            tensors: Vec::new(),
            index: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let emb_bound = 1.0 / (d as f64).sqrt();
        b.uniform("embed.token".into(), vocab, d, emb_bound, LrGroup::Backbone);
        b.uniform("embed.tag".into(), 4, d, emb_bound, LrGroup::Backbone);
        b.uniform(
            "embed.frame_proj.w".into(),
            config.encoder.d_in,
            d,
            1.0 / (config.encoder.d_in as f64).sqrt(),
            LrGroup::Backbone,
        );
        b.constant("embed.frame_proj.b".into(), 1, d, 0.0, LrGroup::Backbone);
        for l in 0..config.encoder.n_layers {
            b.norm(&format!("enc.{l}.ln1"), d);
            b.attn(&format!("enc.{l}.attn"), d);
            b.norm(&format!("enc.{l}.ln2"), d);
            b.ffn(&format!("enc.{l}.ffn"), d, ff);
        }
        for l in 0..config.gcn_layers {
            b.uniform(format!("gcn.{l}.w"), d, d, emb_bound, LrGroup::Gcn);
        }
        b.uniform("head.cls.w".into(), 2, d, emb_bound, LrGroup::Backbone);
        b.constant("head.cls.b".into(), 1, 2, 0.0, LrGroup::Backbone);
        for l in 0..config.decoder.n_layers {
            b.norm(&format!("dec.{l}.ln1"), d);
            b.attn(&format!("dec.{l}.self"), d);
            b.norm(&format!("dec.{l}.ln2"), d);
            b.attn(&format!("dec.{l}.cross"), d);
            b.norm(&format!("dec.{l}.ln3"), d);
            b.ffn(&format!("dec.{l}.ffn"), d, ff);
        }
        if !config.decoder.tie_output {
            b.uniform("dec.out.w".into(), d, vocab, emb_bound, LrGroup::Backbone);
        }
        b.constant("dec.out.b".into(), 1, vocab, 0.0, LrGroup::Backbone);

        Ok(ModelParams {
            config,
            tensors: b.tensors,
            index: b.index,
        })
    }

    /// Rebuilds a parameter set from stored tensors (checkpoint loading).
    /// The tensor list must exactly match what `init` would create for the
    /// config, by name and shape.
    pub fn from_tensors(
        config: ModelConfig,
        tensors: Vec<ParamTensor<T>>,
    ) -> Result<Self, NumError> {
        let reference = ModelParams::<T>::init(config, 0)?;
        if reference.tensors.len() != tensors.len() {
            return Err(NumError::Invalid(format!(
                "expected {} tensors for this config, got {}",
                reference.tensors.len(),
                tensors.len()
            )));
        }
        for (expected, got) in reference.tensors.iter().zip(&tensors) {
            if expected.name != got.name
                || expected.value.shape() != got.value.shape()
                || expected.lr_group != got.lr_group
            {
                return Err(NumError::Invalid(format!(
                    "tensor {} does not match the config layout",
                    got.name
                )));
            }
        }
        Ok(ModelParams {
            config,
            tensors,
            index: reference.index,
        })
    }

    pub fn tensors(&self) -> &[ParamTensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor<T>] {
        &mut self.tensors
    }

    pub fn idx(&self, name: &str) -> usize {
        *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn tensor_by_name(&self, name: &str) -> &ParamTensor<T> {
        &self.tensors[self.idx(name)]
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
    }

    /// Total scalar parameter count.
    pub fn n_scalars(&self) -> usize {
        self.tensors
            .iter()
            .map(|t| t.value.rows() * t.value.cols())
            .sum()
    }

    /// Re-expresses the parameters at another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            config: self.config,
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor::new(t.name.clone(), t.value.cast::<U>(), t.lr_group))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Pushes one tape leaf per tensor and groups the handles by role.
    pub(crate) fn bind(&self, tape: &mut Tape<T>) -> BoundParams {
        let node = |tape: &mut Tape<T>, this: &Self, name: &str| -> NodeId {
            let idx = this.idx(name);
            tape.param(idx, this.tensors[idx].value.clone())
        };
        let attn = |tape: &mut Tape<T>, this: &Self, prefix: &str| -> AttnNodes {
            AttnNodes {
                wq: node(tape, this, &format!("{prefix}.wq")),
                bq: node(tape, this, &format!("{prefix}.bq")),
                wk: node(tape, this, &format!("{prefix}.wk")),
                bk: node(tape, this, &format!("{prefix}.bk")),
                wv: node(tape, this, &format!("{prefix}.wv")),
                bv: node(tape, this, &format!("{prefix}.bv")),
                wo: node(tape, this, &format!("{prefix}.wo")),
                bo: node(tape, this, &format!("{prefix}.bo")),
            }
        };
        let norm = |tape: &mut Tape<T>, this: &Self, prefix: &str| -> NormNodes {
            NormNodes {
                gamma: node(tape, this, &format!("{prefix}.gamma")),
                beta: node(tape, this, &format!("{prefix}.beta")),
            }
        };
        let ffn = |tape: &mut Tape<T>, this: &Self, prefix: &str| -> FfnNodes {
            FfnNodes {
                w1: node(tape, this, &format!("{prefix}.w1")),
                b1: node(tape, this, &format!("{prefix}.b1")),
                w2: node(tape, this, &format!("{prefix}.w2")),
                b2: node(tape, this, &format!("{prefix}.b2")),
            }
        };

        let token_emb = node(tape, self, "embed.token");
        let tag_emb = node(tape, self, "embed.tag");
        let frame_w = node(tape, self, "embed.frame_proj.w");
        let frame_b = node(tape, self, "embed.frame_proj.b");
        let enc_layers = (0..self.config.encoder.n_layers)
            .map(|l| EncoderLayerNodes {
                ln1: norm(tape, self, &format!("enc.{l}.ln1")),
                attn: attn(tape, self, &format!("enc.{l}.attn")),
                ln2: norm(tape, self, &format!("enc.{l}.ln2")),
                ffn: ffn(tape, self, &format!("enc.{l}.ffn")),
            })
            .collect();
        let gcn_w = (0..self.config.gcn_layers)
            .map(|l| node(tape, self, &format!("gcn.{l}.w")))
            .collect();
        let cls_w = node(tape, self, "head.cls.w");
        let cls_b = node(tape, self, "head.cls.b");
        let dec_layers = (0..self.config.decoder.n_layers)
            .map(|l| DecoderLayerNodes {
                ln1: norm(tape, self, &format!("dec.{l}.ln1")),
                self_attn: attn(tape, self, &format!("dec.{l}.self")),
                ln2: norm(tape, self, &format!("dec.{l}.ln2")),
                cross_attn: attn(tape, self, &format!("dec.{l}.cross")),
                ln3: norm(tape, self, &format!("dec.{l}.ln3")),
                ffn: ffn(tape, self, &format!("dec.{l}.ffn")),
            })
            .collect();
        let dec_out_w = if self.config.decoder.tie_output {
            None
        } else {
            Some(node(tape, self, "dec.out.w"))
        };
        let dec_out_b = node(tape, self, "dec.out.b");

        BoundParams {
            token_emb,
            tag_emb,
            frame_w,
            frame_b,
            enc_layers,
            gcn_w,
            cls_w,
            cls_b,
            dec_layers,
            dec_out_w,
            dec_out_b,
        }
    }
}

/// Node handles for the scalar losses and intermediate representations of
/// one sample's forward pass.
pub struct ForwardNodes {
    pub joint_loss: NodeId,
    pub cls_loss: NodeId,
    pub gen_loss: NodeId,
    pub cls_probs: NodeId,
    pub gen_probs: NodeId,
    pub h: NodeId,
    pub z: NodeId,
}

/// Full pipeline on one tape: encode, build the relation graph, reason,
/// fuse, then classification and teacher-forced generation losses. The
/// graph is `None` when the ablation disables it (Z = H bitwise).
pub fn build_forward<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    sample: &NewsVideoSample,
    ablation: &AblationMask,
    weights: &LossWeights,
) -> Result<(ForwardNodes, Option<MultimodalGraph>), ModelError> {
    let seq = encoder::build_sequence(sample, ablation)?;
    let bound = params.bind(tape);
    let (h, features, _) =
        encoder::encode_on_tape(tape, &bound, &params.config.encoder, sample, &seq)?;

    let (z, graph) = if ablation.no_graph {
        (h, None)
    } else {
        let graph = relgraph::build_graph(&seq, tape.value(features), &params.config.graph)?;
        let a_tilde = tape.constant(graph.a_tilde.cast::<T>());
        let g = gcn::gcn_on_tape(tape, h, a_tilde, &bound.gcn_w)?;
        let z = tape.add(h, g)?;
        (z, Some(graph))
    };

    let cls_probs = heads::classify_on_tape(tape, z, bound.cls_w, bound.cls_b)?;
    let cls_loss = tape.neg_log_likelihood(cls_probs, &[sample.label as usize])?;

    let gen_probs = heads::decode_on_tape(
        tape,
        z,
        &sample.explanation_tokens,
        &bound,
        &params.config.decoder,
    )?;
    let gen_loss = tape.neg_log_likelihood(gen_probs, &sample.explanation_tokens)?;

    let joint_loss = tape.add_weighted(
        cls_loss,
        gen_loss,
        T::from_f64(weights.alpha1),
        T::from_f64(weights.alpha2),
    )?;

    Ok((
        ForwardNodes {
            joint_loss,
            cls_loss,
            gen_loss,
            cls_probs,
            gen_probs,
            h,
            z,
        },
        graph,
    ))
}

/// Adds every parameter-leaf gradient from a completed backward pass into
/// the corresponding tensor's grad slot, in tape order.
pub fn accumulate_grads<T: Scalar>(
    tape: &Tape<T>,
    grads: &crate::autodiff::Gradients<T>,
    params: &mut ModelParams<T>,
) -> Result<(), NumError> {
    for (node, param) in tape.param_nodes() {
        if let Some(g) = grads.get(node) {
            let tensor = &mut params.tensors[param];
            tensor.grad = tensor.grad.add(g)?;
        }
    }
    Ok(())
}

/// Inference result for one sample.
#[derive(Clone, Debug)]
pub struct Prediction {
    /// 0 = real, 1 = fake.
    pub label: u8,
    pub p_real: f64,
    pub p_fake: f64,
    /// Generated explanation token ids, EOS excluded.
    pub explanation: Vec<usize>,
    pub graph: Option<MultimodalGraph>,
}

/// Classify and generate for one sample without touching gradients.
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    sample: &NewsVideoSample,
    ablation: &AblationMask,
) -> Result<Prediction, ModelError> {
    let seq = encoder::build_sequence(sample, ablation)?;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let (h, features, _) =
        encoder::encode_on_tape(&mut tape, &bound, &params.config.encoder, sample, &seq)?;
    let (z, graph) = if ablation.no_graph {
        (h, None)
    } else {
        let graph = relgraph::build_graph(&seq, tape.value(features), &params.config.graph)?;
        let a_tilde = tape.constant(graph.a_tilde.cast::<T>());
        let g = gcn::gcn_on_tape(&mut tape, h, a_tilde, &bound.gcn_w)?;
        let z = tape.add(h, g)?;
        (z, Some(graph))
    };
    let cls_probs = heads::classify_on_tape(&mut tape, z, bound.cls_w, bound.cls_b)?;
    let p0 = tape.value(cls_probs).get(0, 0).to_f64();
    let p1 = tape.value(cls_probs).get(0, 1).to_f64();
    let z_value = tape.value(z).clone();
    let explanation = heads::greedy_generate(params, &z_value, params.config.decoder.max_gen_len)?;
    Ok(Prediction {
        label: if p1 > p0 { 1 } else { 0 },
        p_real: p0,
        p_fake: p1,
        explanation,
        graph,
    })
}

/// Builds the per-position input-feature matrix outside any tape; used by
/// graph tooling and tests.
pub fn input_feature_matrix<T: Scalar>(
    params: &ModelParams<T>,
    sample: &NewsVideoSample,
    seq: &SequenceX,
) -> Result<Matrix<T>, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let node = encoder::input_features(&mut tape, &bound, sample, seq, params.config.encoder.d_in)?;
    Ok(tape.value(node).clone())
}
