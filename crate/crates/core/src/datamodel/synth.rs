//! Seeded synthetic corpus with the same shape as the real one: real
//! samples carry one entity token consistently across title, OCR, and
//! related docs; fake samples swap the entity for its designated
//! contradiction token in the OCR text or in one related doc. Frame
//! features cluster around a per-entity anchor vector.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, NewsVideoSample, Vocabulary, EOS};
use crate::numcore::Matrix;

/// Scaffold words shared by every explanation template.
const TEMPLATE_WORDS: [&str; 16] = [
    "analysis", "shows", "title", "matches", "conflicts", "ocr", "frames", "related", "reports",
    "about", "verdict", "real", "fake", "and", "the", "news",
];

const FRAME_SIGMA: f64 = 0.1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub vocab_size: usize,
    pub d_in: usize,
    pub max_frames: usize,
    pub fraction_fake: f64,
    /// Fraction of samples generated without OCR text (C = 0).
    pub fraction_non_ocr: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 600,
            vocab_size: 64,
            d_in: 16,
            max_frames: 8,
            fraction_fake: 0.5,
            fraction_non_ocr: 0.2,
            seed: 17,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum ContraSource {
    Ocr,
    Related,
}

/// Deterministic generator: the seed fully determines the output bytes.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    if cfg.vocab_size < 32 {
        return Err(DataError::Invalid(format!(
            "synth vocab size must be at least 32, got {}",
            cfg.vocab_size
        )));
    }
    if !(0.0..=1.0).contains(&cfg.fraction_fake) || !(0.0..=1.0).contains(&cfg.fraction_non_ocr) {
        return Err(DataError::Invalid(
            "fraction_fake and fraction_non_ocr must lie in [0, 1]".into(),
        ));
    }
    if cfg.d_in == 0 || cfg.max_frames == 0 {
        return Err(DataError::Invalid(
            "d_in and max_frames must be positive".into(),
        ));
    }

    let budget = cfg.vocab_size - 4 - TEMPLATE_WORDS.len();
    let n_entities = (budget / 3).max(2);
    let n_fillers = budget - 2 * n_entities;

    let mut vocab = Vocabulary::new();
    for w in TEMPLATE_WORDS {
        vocab.intern(w);
    }
    let entity_strs: Vec<String> = (0..n_entities).map(|i| format!("e{i}")).collect();
    let contra_strs: Vec<String> = (0..n_entities).map(|i| format!("x{i}")).collect();
    let filler_strs: Vec<String> = (0..n_fillers).map(|i| format!("w{i}")).collect();
    for s in entity_strs.iter().chain(&contra_strs).chain(&filler_strs) {
        vocab.intern(s);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_samples;

    let anchors: Vec<Vec<f64>> = (0..n_entities)
        .map(|_| (0..cfg.d_in).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    let n_fake = (cfg.fraction_fake * n as f64 + 0.5).floor() as usize;
    let mut labels: Vec<u8> = vec![1; n_fake.min(n)];
    labels.resize(n, 0);
    labels.shuffle(&mut rng);

    let n_non_ocr = (cfg.fraction_non_ocr * n as f64 + 0.5).floor() as usize;
    let mut non_ocr: Vec<bool> = vec![true; n_non_ocr.min(n)];
    non_ocr.resize(n, false);
    non_ocr.shuffle(&mut rng);

    let n_events = (n / 8).max(3);

    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let event_idx = i % n_events;
        let entity_idx = event_idx % n_entities;
        let entity = entity_strs[entity_idx].as_str();
        let contra = contra_strs[entity_idx].as_str();
        let fake = labels[i] == 1;
        let no_ocr = non_ocr[i];

        let n_related = if no_ocr {
            1 + rng.gen_range(0..3usize)
        } else {
            rng.gen_range(0..4usize)
        };
        let source = if fake {
            if no_ocr || n_related == 0 {
                if no_ocr {
                    Some(ContraSource::Related)
                } else {
                    Some(ContraSource::Ocr)
                }
            } else if rng.gen_bool(0.5) {
                Some(ContraSource::Ocr)
            } else {
                Some(ContraSource::Related)
            }
        } else {
            None
        };

        let seq =
            |core: &str, extra: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
                let mut words: Vec<String> = (0..extra)
                    .map(|_| filler_strs[rng.gen_range(0..n_fillers)].clone())
                    .collect();
                let pos = rng.gen_range(0..=words.len());
                words.insert(pos, core.to_string());
                words
            };

        let title = seq(entity, 3 + rng.gen_range(0..4usize), &mut rng);
        let ocr = if no_ocr {
            Vec::new()
        } else {
            let core = if source == Some(ContraSource::Ocr) {
                contra
            } else {
                entity
            };
            seq(core, 2 + rng.gen_range(0..4usize), &mut rng)
        };
        let contra_doc = if source == Some(ContraSource::Related) && n_related > 0 {
            rng.gen_range(0..n_related)
        } else {
            usize::MAX
        };
        let related: Vec<Vec<String>> = (0..n_related)
            .map(|d| {
                let core = if d == contra_doc { contra } else { entity };
                seq(core, 2 + rng.gen_range(0..3usize), &mut rng)
            })
            .collect();

        let k = (2 + rng.gen_range(0..4usize)).min(cfg.max_frames).max(1);
        let anchor = &anchors[entity_idx];
        let frames = Matrix::from_fn(k, cfg.d_in, |_, j| {
            anchor[j] + FRAME_SIGMA * gaussian(&mut rng)
        });

        let text_src = if no_ocr { "frames" } else { "ocr" };
        let explanation: Vec<&str> = if fake {
            let src_word = match source {
                Some(ContraSource::Ocr) => "ocr",
                _ => "related",
            };
            vec![
                "analysis", "shows", "title", "conflicts", src_word, "and", "related", "reports",
                "about", entity, "verdict", "fake",
            ]
        } else {
            vec![
                "analysis", "shows", "title", "matches", text_src, "and", "related", "reports",
                "about", entity, "verdict", "real",
            ]
        };

        let to_ids = |tokens: &[String]| -> Vec<usize> {
            tokens
                .iter()
                .map(|t| vocab.lookup(t).expect("synth token interned"))
                .collect()
        };
        let mut explanation_tokens: Vec<usize> = explanation
            .iter()
            .map(|t| vocab.lookup(t).expect("synth token interned"))
            .collect();
        explanation_tokens.push(EOS);

        samples.push(NewsVideoSample {
            id: format!("s{i:05}"),
            event_id: format!("ev{event_idx:04}"),
            title_tokens: to_ids(&title),
            ocr_tokens: to_ids(&ocr),
            related_docs: related.iter().map(|d| to_ids(d)).collect(),
            frame_features: frames,
            label: labels[i],
            explanation_tokens,
        });
    }

    Ok(Dataset {
        samples,
        vocab,
        d_in: cfg.d_in,
    })
}

/// Box-Muller standard normal from two uniform draws.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
