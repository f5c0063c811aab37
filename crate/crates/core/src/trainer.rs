//! Optimization loop: AdamW with decoupled weight decay and per-group
//! learning rates, seeded shuffling, checkpoint retention by validation
//! loss, ablation switches, and the gradient-verification entry point.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tape;
use crate::checkpoint::{Checkpoint, RngState};
use crate::datamodel::{select, Dataset, DatasetSplit, NewsVideoSample, EOS};
use crate::heads::LossWeights;
use crate::metrics::{self, EvalReport};
use crate::model::{self, ModelError, ModelParams};
use crate::numcore::{rel_err, LrGroup, Matrix, NumError, Scalar};

/// Switches disabling one input segment or the relation graph, matching the
/// w/o-Title, w/o-OCR, w/o-Related, w/o-Visual, and w/o-Graph variants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationMask {
    pub no_title: bool,
    pub no_ocr: bool,
    pub no_related: bool,
    pub no_visual: bool,
    pub no_graph: bool,
}

impl AblationMask {
    pub const NONE: AblationMask = AblationMask {
        no_title: false,
        no_ocr: false,
        no_related: false,
        no_visual: false,
        no_graph: false,
    };

    /// The five single-switch variants in report order, with their labels.
    pub fn variants() -> [(&'static str, AblationMask); 5] {
        [
            ("w/o-Title", AblationMask { no_title: true, ..Self::NONE }),
            ("w/o-OCR", AblationMask { no_ocr: true, ..Self::NONE }),
            ("w/o-Related", AblationMask { no_related: true, ..Self::NONE }),
            ("w/o-Visual", AblationMask { no_visual: true, ..Self::NONE }),
            ("w/o-Graph", AblationMask { no_graph: true, ..Self::NONE }),
        ]
    }

    /// Parses the report labels used on the command line.
    pub fn from_label(label: &str) -> Option<AblationMask> {
        Self::variants()
            .into_iter()
            .find(|(name, _)| *name == label)
            .map(|(_, mask)| mask)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.no_title && self.no_ocr && self.no_related && self.no_visual {
            return Err(TrainError::Config(
                "cannot disable every input segment at once".into(),
            ));
        }
        Ok(())
    }
}

/// Training hyperparameters. Defaults: 15 epochs, batch size 10, lr 1e-3
/// for the GCN group and 1e-4 for everything else, loss weights (0.2, 0.8).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_gcn: f64,
    pub lr_backbone: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub seed: u64,
    pub ablation: AblationMask,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 10,
            lr_gcn: 1e-3,
            lr_backbone: 1e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            alpha1: 0.2,
            alpha2: 0.8,
            seed: 17,
            ablation: AblationMask::NONE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be at least 1".into()));
        }
        // lr = 0 is allowed so a null update can be exercised in tests.
        if self.lr_gcn < 0.0 || self.lr_backbone < 0.0 {
            return Err(TrainError::Config("learning rates must be >= 0".into()));
        }
        if self.alpha1 < 0.0 || self.alpha2 < 0.0 {
            return Err(TrainError::Config("loss weights must be >= 0".into()));
        }
        self.ablation.validate()
    }
}

#[derive(Error, Debug)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss in batch {0}")]
    NonFiniteLoss(usize),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
}

/// First/second moment estimates for every parameter, plus the step count
/// driving bias correction.
#[derive(Clone, Debug)]
pub struct OptimState<T> {
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
    step: u64,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<Matrix<T>> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.value.rows(), t.value.cols()))
            .collect();
        OptimState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }

    pub fn from_parts(first: Vec<Matrix<T>>, second: Vec<Matrix<T>>, step: u64) -> Self {
        OptimState {
            first,
            second,
            step,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &Matrix<T> {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &Matrix<T> {
        &self.second[i]
    }
}

/// One AdamW update from the gradients currently stored in the parameter
/// set: bias-corrected adaptive step, then decoupled decay
/// theta -= lr * lambda * theta. The learning rate follows each tensor's
/// group.
pub fn adamw_step<T: Scalar>(
    params: &mut ModelParams<T>,
    opt: &mut OptimState<T>,
    cfg: &TrainConfig,
) -> Result<(), TrainError> {
    opt.step += 1;
    let t = opt.step as i32;
    let bc1 = T::from_f64(1.0 - cfg.beta1.powi(t));
    let bc2 = T::from_f64(1.0 - cfg.beta2.powi(t));
    let beta1 = T::from_f64(cfg.beta1);
    let beta2 = T::from_f64(cfg.beta2);
    let one_m_beta1 = T::from_f64(1.0 - cfg.beta1);
    let one_m_beta2 = T::from_f64(1.0 - cfg.beta2);
    let eps = T::from_f64(cfg.eps);
    let decay = T::from_f64(cfg.weight_decay);

    for (i, tensor) in params.tensors_mut().iter_mut().enumerate() {
        if !tensor.grad.is_finite() {
            return Err(TrainError::NonFiniteGradient(tensor.name.clone()));
        }
        let lr = T::from_f64(match tensor.lr_group {
            LrGroup::Gcn => cfg.lr_gcn,
            LrGroup::Backbone => cfg.lr_backbone,
        });
        let m = opt.first[i].data_mut();
        let v = opt.second[i].data_mut();
        let g = tensor.grad.data();
        let theta = tensor.value.data_mut();
        for j in 0..theta.len() {
            m[j] = beta1 * m[j] + one_m_beta1 * g[j];
            v[j] = beta2 * v[j] + one_m_beta2 * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            theta[j] = theta[j] - lr * m_hat / (v_hat.sqrt() + eps);
            theta[j] = theta[j] - lr * decay * theta[j];
        }
    }
    Ok(())
}

/// Per-epoch record: mean train loss, mean validation loss, and the
/// validation metric report (absent when the validation split is empty).
#[derive(Clone, Debug, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_report: Option<EvalReport>,
}

/// Outcome of a training run: the best-validation checkpoint and the
/// per-epoch log.
pub struct TrainRun<T> {
    pub checkpoint: Checkpoint<T>,
    pub log: Vec<EpochLog>,
}

/// Mean joint loss over samples, forward only.
pub fn mean_joint_loss<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[&NewsVideoSample],
    cfg: &TrainConfig,
) -> Result<f64, TrainError> {
    let weights = LossWeights {
        alpha1: cfg.alpha1,
        alpha2: cfg.alpha2,
    };
    let mut total = 0.0;
    for sample in samples {
        let mut tape = Tape::new();
        let (nodes, _) = model::build_forward(&mut tape, params, sample, &cfg.ablation, &weights)?;
        total += tape.scalar(nodes.joint_loss).to_f64();
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Classification + generation metrics over a sample set, decoding each
/// explanation greedily.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    samples: &[&NewsVideoSample],
    ablation: &AblationMask,
) -> Result<EvalReport, TrainError> {
    let mut predictions = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    let mut candidates = Vec::with_capacity(samples.len());
    let mut references = Vec::with_capacity(samples.len());
    for sample in samples {
        let pred = model::predict(params, sample, ablation)?;
        predictions.push(pred.label);
        labels.push(sample.label);
        candidates.push(pred.explanation);
        let mut gold = sample.explanation_tokens.clone();
        if gold.last() == Some(&EOS) {
            gold.pop();
        }
        references.push(gold);
    }
    let [bleu1, bleu2, bleu3, bleu4] = metrics::bleu(&candidates, &references)?;
    let rouge_l = metrics::rouge_l(&candidates, &references)?;
    let meteor_lite = metrics::meteor_lite(&candidates, &references)?;
    let cider = metrics::cider(&candidates, &references)?;
    let (accuracy, macro_precision, macro_recall, macro_f1) =
        metrics::classification_report(&predictions, &labels)?;
    Ok(EvalReport {
        bleu1,
        bleu2,
        bleu3,
        bleu4,
        rouge_l,
        meteor_lite,
        cider,
        accuracy,
        macro_precision,
        macro_recall,
        macro_f1,
    })
}

/// Full training loop: seeded shuffling per epoch, per-batch forward and
/// backward over the joint objective, AdamW updates, per-epoch validation,
/// best-checkpoint retention by validation joint loss.
pub fn train<T: Scalar>(
    dataset: &Dataset,
    split: &DatasetSplit,
    config: crate::model::ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainRun<T>, TrainError> {
    cfg.validate()?;
    let train_samples = select(&dataset.samples, &split.train);
    let val_samples = select(&dataset.samples, &split.val);
    if train_samples.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    let weights = LossWeights {
        alpha1: cfg.alpha1,
        alpha2: cfg.alpha2,
    };

    let mut params = ModelParams::<T>::init(config, cfg.seed)?;
    let mut opt = OptimState::new(&params);
    // Separate stream so shuffling is independent of parameter draws.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let mut log: Vec<EpochLog> = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ModelParams<T>, OptimState<T>, usize, RngState)> = None;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train_samples.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut epoch_loss_sum = 0.0;
        for (batch_id, batch) in order.chunks(cfg.batch_size).enumerate() {
            params.zero_grads();
            let mut batch_loss = T::zero();
            for &idx in batch {
                let sample = train_samples[idx];
                let mut tape = Tape::new();
                let (nodes, _) =
                    model::build_forward(&mut tape, &params, sample, &cfg.ablation, &weights)?;
                let loss = tape.scalar(nodes.joint_loss);
                if !loss.is_finite() {
                    return Err(TrainError::NonFiniteLoss(batch_id));
                }
                batch_loss = batch_loss + loss;
                let grads = tape.backward(nodes.joint_loss)?;
                model::accumulate_grads(&tape, &grads, &mut params)?;
            }
            // Gradient of the batch-mean loss.
            let inv = T::from_f64(1.0 / batch.len() as f64);
            for tensor in params.tensors_mut() {
                tensor.grad = tensor.grad.scale(inv);
            }
            adamw_step(&mut params, &mut opt, cfg)?;
            epoch_loss_sum += batch_loss.to_f64();
        }
        let train_loss = epoch_loss_sum / train_samples.len() as f64;

        let (val_loss, val_report) = if val_samples.is_empty() {
            (train_loss, None)
        } else {
            let loss = mean_joint_loss(&params, &val_samples, cfg)?;
            let report = evaluate(&params, &val_samples, &cfg.ablation)?;
            (loss, Some(report))
        };
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            val_report,
        });

        let improved = best.as_ref().map_or(true, |(b, ..)| val_loss < *b);
        if improved {
            best = Some((
                val_loss,
                params.clone(),
                opt.clone(),
                epoch,
                RngState::capture(&shuffle_rng),
            ));
        }
    }

    let (best_val_loss, best_params, best_opt, best_epoch, rng) =
        best.expect("at least one epoch ran");
    Ok(TrainRun {
        checkpoint: Checkpoint {
            config,
            train_config: *cfg,
            vocab: dataset.vocab.clone(),
            epoch: best_epoch,
            best_val_loss,
            rng,
            params: best_params,
            opt: best_opt,
        },
        log,
    })
}

/// Result of comparing analytic backprop against central finite
/// differences over the full joint objective.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub checked_entries: usize,
}

/// Entries checked per tensor before seeded subsampling kicks in.
const GRAD_CHECK_FULL_LIMIT: usize = 200;

/// Compares analytic gradients of the joint loss on one sample against
/// central finite differences, entry by entry (or a seeded subsample for
/// tensors above 200 entries). 64-bit only.
pub fn grad_check(
    params: &ModelParams<f64>,
    sample: &NewsVideoSample,
    cfg: &TrainConfig,
    epsilon: f64,
) -> Result<GradCheckReport, TrainError> {
    let weights = LossWeights {
        alpha1: cfg.alpha1,
        alpha2: cfg.alpha2,
    };
    let loss_of = |p: &ModelParams<f64>| -> Result<f64, TrainError> {
        let mut tape = Tape::new();
        let (nodes, _) = model::build_forward(&mut tape, p, sample, &cfg.ablation, &weights)?;
        Ok(tape.scalar(nodes.joint_loss))
    };

    // Analytic gradients.
    let mut analytic = params.clone();
    analytic.zero_grads();
    {
        let mut tape = Tape::new();
        let (nodes, _) =
            model::build_forward(&mut tape, &analytic, sample, &cfg.ablation, &weights)?;
        let grads = tape.backward(nodes.joint_loss)?;
        model::accumulate_grads(&tape, &grads, &mut analytic)?;
    }

    let mut work = params.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst_param = String::new();
    let mut checked = 0usize;
    for i in 0..work.tensors().len() {
        let name = work.tensors()[i].name.clone();
        let len = {
            let shape = work.tensors()[i].value.shape();
            shape.0 * shape.1
        };
        let entries: Vec<usize> = if len <= GRAD_CHECK_FULL_LIMIT {
            (0..len).collect()
        } else {
            // Seeded subsample, deterministic per tensor.
            let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164 ^ i as u64);
            let mut all: Vec<usize> = (0..len).collect();
            all.shuffle(&mut rng);
            all.truncate(GRAD_CHECK_FULL_LIMIT);
            all
        };
        for &j in &entries {
            let original = work.tensors()[i].value.data()[j];
            work.tensors_mut()[i].value.data_mut()[j] = original + epsilon;
            let plus = loss_of(&work)?;
            work.tensors_mut()[i].value.data_mut()[j] = original - epsilon;
            let minus = loss_of(&work)?;
            work.tensors_mut()[i].value.data_mut()[j] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic.tensors()[i].grad.data()[j];
            let err = rel_err(a, numeric);
            if err > max_rel_err {
                max_rel_err = err;
                worst_param = name.clone();
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst_param,
        checked_entries: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::synth::{synth_generate, SynthConfig};
    use crate::datamodel::{make_split, SampleFilter, SplitMode};
    use crate::model::ModelConfig;
    use crate::numcore::ParamTensor;

    fn tiny_dataset(n: usize, seed: u64) -> Dataset {
        synth_generate(&SynthConfig {
            n_samples: n,
            vocab_size: 48,
            d_in: 5,
            max_frames: 6,
            fraction_fake: 0.5,
            fraction_non_ocr: 0.25,
            seed,
        })
        .unwrap()
    }

    fn tiny_cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 4,
            seed,
            ..TrainConfig::default()
        }
    }

    fn one_param_model() -> ModelParams<f64> {
        // Smallest valid model; only used to exercise adamw_step on a
        // controlled tensor below.
        ModelParams::init(ModelConfig::toy(8, 0, 32, 3), 0).unwrap()
    }

    #[test]
    fn zero_gradient_without_decay_is_a_fixed_point() {
        let mut params = one_param_model();
        let before: Vec<Matrix<f64>> =
            params.tensors().iter().map(|t| t.value.clone()).collect();
        let mut opt = OptimState::new(&params);
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        params.zero_grads();
        adamw_step(&mut params, &mut opt, &cfg).unwrap();
        for (t, b) in params.tensors().iter().zip(&before) {
            assert_eq!(&t.value, b, "{} moved", t.name);
        }
    }

    #[test]
    fn zero_gradient_with_decay_shrinks_exactly() {
        let mut params = one_param_model();
        let before: Vec<Matrix<f64>> =
            params.tensors().iter().map(|t| t.value.clone()).collect();
        let mut opt = OptimState::new(&params);
        let cfg = TrainConfig {
            weight_decay: 0.01,
            lr_gcn: 1e-3,
            lr_backbone: 1e-4,
            ..TrainConfig::default()
        };
        params.zero_grads();
        adamw_step(&mut params, &mut opt, &cfg).unwrap();
        for (t, b) in params.tensors().iter().zip(&before) {
            let lr = match t.lr_group {
                LrGroup::Gcn => cfg.lr_gcn,
                LrGroup::Backbone => cfg.lr_backbone,
            };
            for (got, orig) in t.value.data().iter().zip(b.data()) {
                let expected = orig - lr * cfg.weight_decay * orig;
                assert_eq!(*got, expected, "{}", t.name);
            }
        }
    }

    #[test]
    fn scalar_quadratic_matches_stepwise_oracle() {
        // Optimize f(theta) = theta^2 for 100 steps through adamw_step and
        // compare against an independent scalar implementation.
        let mut params = one_param_model();
        let idx = params.idx("head.cls.b");
        // Repurpose one scalar slot; zero every other gradient each step.
        params.tensors_mut()[idx].value.set(0, 0, 1.5);
        let mut opt = OptimState::new(&params);
        let cfg = TrainConfig {
            lr_backbone: 0.05,
            lr_gcn: 0.05,
            weight_decay: 0.004,
            ..TrainConfig::default()
        };

        let mut oracle_theta = 1.5f64;
        let mut om = 0.0f64;
        let mut ov = 0.0f64;
        for step in 1..=100u32 {
            params.zero_grads();
            let theta = params.tensors()[idx].value.get(0, 0);
            params.tensors_mut()[idx].grad.set(0, 0, 2.0 * theta);
            adamw_step(&mut params, &mut opt, &cfg).unwrap();

            let g = 2.0 * oracle_theta;
            om = cfg.beta1 * om + (1.0 - cfg.beta1) * g;
            ov = cfg.beta2 * ov + (1.0 - cfg.beta2) * g * g;
            let mh = om / (1.0 - cfg.beta1.powi(step as i32));
            let vh = ov / (1.0 - cfg.beta2.powi(step as i32));
            oracle_theta -= cfg.lr_backbone * mh / (vh.sqrt() + cfg.eps);
            oracle_theta -= cfg.lr_backbone * cfg.weight_decay * oracle_theta;

            let got = params.tensors()[idx].value.get(0, 0);
            assert!(
                (got - oracle_theta).abs() < 1e-12,
                "step {step}: {got} vs {oracle_theta}"
            );
        }
    }

    #[test]
    fn non_finite_gradient_aborts_with_the_parameter_name() {
        let mut params = one_param_model();
        let mut opt = OptimState::new(&params);
        let idx = params.idx("head.cls.w");
        params.tensors_mut()[idx].grad.data_mut()[0] = f64::NAN;
        let err = adamw_step(&mut params, &mut opt, &TrainConfig::default()).unwrap_err();
        match err {
            TrainError::NonFiniteGradient(name) => assert_eq!(name, "head.cls.w"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn zero_learning_rates_leave_parameters_bitwise_unchanged() {
        let ds = tiny_dataset(12, 3);
        let split = make_split(
            &ds.samples,
            (0.7, 0.15, 0.15),
            SplitMode::Random,
            SampleFilter::All,
            1,
        )
        .unwrap();
        let config = ModelConfig::toy(8, 1, ds.vocab.len(), 5);
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 4,
            lr_gcn: 0.0,
            lr_backbone: 0.0,
            weight_decay: 0.01,
            seed: 5,
            ..TrainConfig::default()
        };
        let reference = ModelParams::<f64>::init(config, cfg.seed).unwrap();
        let run = train::<f64>(&ds, &split, config, &cfg).unwrap();
        for (got, orig) in run.checkpoint.params.tensors().iter().zip(reference.tensors()) {
            assert_eq!(got.value, orig.value, "{} changed under lr=0", got.name);
        }
    }

    #[test]
    fn identical_seeds_give_identical_loss_logs() {
        let ds = tiny_dataset(16, 9);
        let split = make_split(
            &ds.samples,
            (0.7, 0.15, 0.15),
            SplitMode::Random,
            SampleFilter::All,
            2,
        )
        .unwrap();
        let config = ModelConfig::toy(8, 1, ds.vocab.len(), 5);
        let cfg = tiny_cfg(2, 11);
        let a = train::<f64>(&ds, &split, config, &cfg).unwrap();
        let b = train::<f64>(&ds, &split, config, &cfg).unwrap();
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.val_loss.to_bits(), y.val_loss.to_bits());
        }
    }

    #[test]
    fn grad_check_toy_model_under_tolerance() {
        let ds = tiny_dataset(4, 21);
        let config = ModelConfig::toy(8, 1, ds.vocab.len(), 5);
        let params = ModelParams::<f64>::init(config, 3).unwrap();
        let cfg = TrainConfig::default();
        let report = grad_check(&params, &ds.samples[0], &cfg, 1e-4).unwrap();
        assert!(
            report.max_rel_err < 1e-3,
            "max rel err {} at {}",
            report.max_rel_err,
            report.worst_param
        );
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let ds = tiny_dataset(10, 13);
        let split = make_split(
            &ds.samples,
            (0.6, 0.2, 0.2),
            SplitMode::Random,
            SampleFilter::All,
            4,
        )
        .unwrap();
        let config = ModelConfig::toy(8, 1, ds.vocab.len(), 5);
        let run = train::<f32>(&ds, &split, config, &tiny_cfg(1, 2)).unwrap();
        let bytes = run.checkpoint.to_bytes();
        let loaded = Checkpoint::<f32>::from_bytes(&bytes).unwrap();
        assert_eq!(loaded.to_bytes(), bytes);
        // Wrong-precision loading is rejected.
        assert!(Checkpoint::<f64>::from_bytes(&bytes).is_err());
    }

    #[test]
    fn param_tensor_grads_start_zero() {
        let p = ParamTensor::new("x", Matrix::<f64>::zeros(2, 2), LrGroup::Backbone);
        assert!(p.grad.data().iter().all(|&v| v == 0.0));
    }
}
