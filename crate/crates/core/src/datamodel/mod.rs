//! Sample/vocabulary/dataset types, JSON-lines ingestion, and split
//! generation.
//!
//! The on-disk format is UTF-8 JSON Lines, one object per line with keys in
//! the order `id`, `event_id`, `label`, `title`, `ocr`, `related`, `frames`,
//! `explanation` and no extra whitespace. Loading a canonical file and saving
//! it again reproduces the bytes exactly.

pub mod synth;

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::Matrix;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

#[derive(Error, Debug)]
pub enum DataError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: parse error: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: invalid {field}: {msg}")]
    Validation {
        line: usize,
        field: &'static str,
        msg: String,
    },
    #[error("split error: {0}")]
    Split(String),
    #[error("{0}")]
    Invalid(String),
}

/// Token table with the four reserved ids at 0..=3. Non-reserved tokens get
/// ids in first-appearance order.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let id_to_token: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            token_to_id,
            id_to_token,
        }
    }

    /// Rebuild from an ordered token list (as stored in checkpoints). The
    /// first four entries must be the reserved tokens.
    pub fn from_ordered_tokens(tokens: &[String]) -> Result<Self, DataError> {
        if tokens.len() < 4 || tokens[..4] != RESERVED.map(String::from) {
            return Err(DataError::Invalid(
                "vocabulary must start with the four reserved tokens".into(),
            ));
        }
        let mut vocab = Vocabulary::new();
        for t in &tokens[4..] {
            vocab.intern(t);
        }
        if vocab.len() != tokens.len() {
            return Err(DataError::Invalid("duplicate token in vocabulary".into()));
        }
        Ok(vocab)
    }

    /// Id for `token`, inserting it if new.
    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.token_to_id.get(token) {
            return id;
        }
        let id = self.id_to_token.len();
        self.id_to_token.push(token.to_string());
        self.token_to_id.insert(token.to_string(), id);
        id
    }

    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    /// Id for `token`, or [`UNK`] when absent.
    pub fn lookup_or_unk(&self, token: &str) -> usize {
        self.lookup(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        false // always holds the reserved tokens
    }

    /// Tokens in id order, for serialization.
    pub fn ordered_tokens(&self) -> &[String] {
        &self.id_to_token
    }
}

/// One news-video sample: frames, title, OCR text, related news docs, the
/// real/fake label, and the reference explanation (token ids ending in EOS).
#[derive(Clone, Debug, PartialEq)]
pub struct NewsVideoSample {
    pub id: String,
    pub event_id: String,
    pub title_tokens: Vec<usize>,
    pub ocr_tokens: Vec<usize>,
    pub related_docs: Vec<Vec<usize>>,
    /// K x D_in, row per frame.
    pub frame_features: Matrix<f64>,
    /// 0 = real, 1 = fake.
    pub label: u8,
    pub explanation_tokens: Vec<usize>,
}

impl NewsVideoSample {
    pub fn has_ocr(&self) -> bool {
        !self.ocr_tokens.is_empty()
    }
}

/// Wire form of one JSON line. Field order here defines the canonical key
/// order on disk.
#[derive(Serialize, Deserialize)]
pub struct RawSample {
    pub id: String,
    pub event_id: String,
    pub label: u8,
    pub title: Vec<String>,
    pub ocr: Vec<String>,
    pub related: Vec<Vec<String>>,
    pub frames: Vec<Vec<f64>>,
    pub explanation: Vec<String>,
}

/// Truncation limits applied at load time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LoadOptions {
    pub max_text_len: usize,
    pub max_frames: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            max_text_len: 224,
            max_frames: 80,
        }
    }
}

/// Loaded dataset: validated samples plus the vocabulary they are encoded
/// against, and the frame-feature width shared by every sample.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub samples: Vec<NewsVideoSample>,
    pub vocab: Vocabulary,
    pub d_in: usize,
}

/// Loads a JSON-lines dataset, building the vocabulary from the file in
/// first-appearance order.
pub fn load_dataset(path: impl AsRef<Path>, opts: LoadOptions) -> Result<Dataset, DataError> {
    load_impl(path.as_ref(), opts, None)
}

/// Loads against an existing vocabulary; unknown tokens map to `<unk>`.
pub fn load_dataset_with_vocab(
    path: impl AsRef<Path>,
    opts: LoadOptions,
    vocab: &Vocabulary,
) -> Result<Dataset, DataError> {
    load_impl(path.as_ref(), opts, Some(vocab))
}

fn load_impl(
    path: &Path,
    opts: LoadOptions,
    fixed_vocab: Option<&Vocabulary>,
) -> Result<Dataset, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut vocab = fixed_vocab.cloned().unwrap_or_default();
    let frozen = fixed_vocab.is_some();
    let mut samples = Vec::new();
    let mut d_in: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let raw: RawSample = serde_json::from_str(line).map_err(|e| DataError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let sample = validate_raw(raw, line_no, opts, &mut vocab, frozen, &mut d_in)?;
        samples.push(sample);
    }
    Ok(Dataset {
        samples,
        vocab,
        d_in: d_in.unwrap_or(0),
    })
}

fn validate_raw(
    mut raw: RawSample,
    line: usize,
    opts: LoadOptions,
    vocab: &mut Vocabulary,
    frozen_vocab: bool,
    d_in: &mut Option<usize>,
) -> Result<NewsVideoSample, DataError> {
    if raw.label > 1 {
        return Err(DataError::Validation {
            line,
            field: "label",
            msg: format!("label must be 0 or 1, got {}", raw.label),
        });
    }
    if raw.title.is_empty() {
        return Err(DataError::Validation {
            line,
            field: "title",
            msg: "title must contain at least one token".into(),
        });
    }
    if raw.frames.is_empty() {
        return Err(DataError::Validation {
            line,
            field: "frames",
            msg: "at least one frame row is required".into(),
        });
    }
    let width = raw.frames[0].len();
    if width == 0 {
        return Err(DataError::Validation {
            line,
            field: "frames",
            msg: "frame rows must be non-empty".into(),
        });
    }
    for row in &raw.frames {
        if row.len() != width {
            return Err(DataError::Validation {
                line,
                field: "frames",
                msg: format!("frame row width {} differs from {}", row.len(), width),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Validation {
                line,
                field: "frames",
                msg: "frame features must be finite".into(),
            });
        }
    }
    match d_in {
        Some(expected) if *expected != width => {
            return Err(DataError::Validation {
                line,
                field: "frames",
                msg: format!("frame width {width} differs from dataset width {expected}"),
            });
        }
        Some(_) => {}
        None => *d_in = Some(width),
    }
    for doc in &raw.related {
        if doc.is_empty() {
            return Err(DataError::Validation {
                line,
                field: "related",
                msg: "related docs must be non-empty".into(),
            });
        }
    }

    // Truncate OCR first, then title, so M + C fits the text budget.
    if raw.title.len() + raw.ocr.len() > opts.max_text_len {
        let keep_ocr = opts.max_text_len.saturating_sub(raw.title.len());
        raw.ocr.truncate(keep_ocr);
        raw.title.truncate(opts.max_text_len);
    }
    raw.frames.truncate(opts.max_frames);

    let mut map = |tokens: &[String]| -> Vec<usize> {
        tokens
            .iter()
            .map(|t| {
                if frozen_vocab {
                    vocab.lookup_or_unk(t)
                } else {
                    vocab.intern(t)
                }
            })
            .collect()
    };
    let title_tokens = map(&raw.title);
    let ocr_tokens = map(&raw.ocr);
    let related_docs: Vec<Vec<usize>> = raw.related.iter().map(|d| map(d)).collect();
    let mut explanation_tokens = map(&raw.explanation);
    explanation_tokens.push(EOS);

    let frame_features =
        Matrix::from_rows(&raw.frames).map_err(|e| DataError::Validation {
            line,
            field: "frames",
            msg: e.to_string(),
        })?;

    Ok(NewsVideoSample {
        id: raw.id,
        event_id: raw.event_id,
        title_tokens,
        ocr_tokens,
        related_docs,
        frame_features,
        label: raw.label,
        explanation_tokens,
    })
}

fn to_raw(sample: &NewsVideoSample, vocab: &Vocabulary) -> RawSample {
    let strings = |ids: &[usize]| -> Vec<String> {
        ids.iter().map(|&i| vocab.token(i).to_string()).collect()
    };
    let mut explanation = sample.explanation_tokens.clone();
    if explanation.last() == Some(&EOS) {
        explanation.pop();
    }
    RawSample {
        id: sample.id.clone(),
        event_id: sample.event_id.clone(),
        label: sample.label,
        title: strings(&sample.title_tokens),
        ocr: strings(&sample.ocr_tokens),
        related: sample
            .related_docs
            .iter()
            .map(|d| strings(d))
            .collect(),
        frames: (0..sample.frame_features.rows())
            .map(|i| sample.frame_features.row(i).to_vec())
            .collect(),
        explanation: strings(&explanation),
    }
}

/// Canonical serialization of one sample (no trailing newline).
pub fn sample_to_line(sample: &NewsVideoSample, vocab: &Vocabulary) -> String {
    serde_json::to_string(&to_raw(sample, vocab)).expect("sample serialization cannot fail")
}

/// Writes samples in the canonical JSON-lines form.
pub fn save_dataset(
    path: impl AsRef<Path>,
    samples: &[NewsVideoSample],
    vocab: &Vocabulary,
) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut out = fs::File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    for sample in samples {
        let line = sample_to_line(sample, vocab);
        writeln!(out, "{line}").map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    Random,
    EventDisjoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleFilter {
    All,
    /// Keep only samples with OCR text (C > 0).
    OcrOnly,
    /// Keep only samples without OCR text (C = 0).
    NonOcrOnly,
}

impl SampleFilter {
    pub fn keeps(&self, sample: &NewsVideoSample) -> bool {
        match self {
            SampleFilter::All => true,
            SampleFilter::OcrOnly => sample.has_ocr(),
            SampleFilter::NonOcrOnly => !sample.has_ocr(),
        }
    }
}

/// Train/val/test partition over sample ids.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub mode: SplitMode,
    pub filter: SampleFilter,
}

impl DatasetSplit {
    pub fn contains(&self, id: &str) -> bool {
        self.train.iter().any(|s| s == id)
            || self.val.iter().any(|s| s == id)
            || self.test.iter().any(|s| s == id)
    }
}

/// Partitions the filtered corpus. Random mode shuffles by seed and sizes
/// val/test as floor(ratio * n) with the remainder going to train. Event
/// mode assigns whole events, largest first, to the most under-filled split.
pub fn make_split(
    samples: &[NewsVideoSample],
    ratios: (f64, f64, f64),
    mode: SplitMode,
    filter: SampleFilter,
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(DataError::Split("ratios must be positive".into()));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(DataError::Split(format!(
            "ratios must sum to 1, got {}",
            rt + rv + rs
        )));
    }
    let kept: Vec<&NewsVideoSample> = samples.iter().filter(|s| filter.keeps(s)).collect();
    let n = kept.len();

    let (train, val, test) = match mode {
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            order.shuffle(&mut rng);
            let n_val = (rv * n as f64).floor() as usize;
            let n_test = (rs * n as f64).floor() as usize;
            let n_train = n - n_val - n_test;
            let ids = |range: &[usize]| -> Vec<String> {
                range.iter().map(|&i| kept[i].id.clone()).collect()
            };
            (
                ids(&order[..n_train]),
                ids(&order[n_train..n_train + n_val]),
                ids(&order[n_train + n_val..]),
            )
        }
        SplitMode::EventDisjoint => {
            let mut events: Vec<(String, Vec<usize>)> = Vec::new();
            let mut index: HashMap<&str, usize> = HashMap::new();
            for (i, s) in kept.iter().enumerate() {
                match index.get(s.event_id.as_str()) {
                    Some(&e) => events[e].1.push(i),
                    None => {
                        index.insert(s.event_id.as_str(), events.len());
                        events.push((s.event_id.clone(), vec![i]));
                    }
                }
            }
            if events.len() < 3 {
                return Err(DataError::Split(format!(
                    "event-disjoint split needs at least 3 events, found {}",
                    events.len()
                )));
            }
            events.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
            let targets = [rt * n as f64, rv * n as f64, rs * n as f64];
            let mut assigned = [0usize; 3];
            let mut buckets: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
            for (_, members) in &events {
                let mut best = 0;
                let mut best_deficit = f64::NEG_INFINITY;
                for (k, &target) in targets.iter().enumerate() {
                    let deficit = target - assigned[k] as f64;
                    if deficit > best_deficit {
                        best_deficit = deficit;
                        best = k;
                    }
                }
                assigned[best] += members.len();
                buckets[best].extend_from_slice(members);
            }
            let ids = |bucket: &[usize]| -> Vec<String> {
                bucket.iter().map(|&i| kept[i].id.clone()).collect()
            };
            (ids(&buckets[0]), ids(&buckets[1]), ids(&buckets[2]))
        }
    };

    Ok(DatasetSplit {
        train,
        val,
        test,
        mode,
        filter,
    })
}

/// Resolves split id lists back to sample references.
pub fn select<'a>(
    samples: &'a [NewsVideoSample],
    ids: &[String],
) -> Vec<&'a NewsVideoSample> {
    let index: HashMap<&str, &NewsVideoSample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    ids.iter()
        .filter_map(|id| index.get(id.as_str()).copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::synth::{synth_generate, SynthConfig};
    use super::*;
    use std::collections::HashSet;

    fn tiny_dataset(n: usize, seed: u64) -> Dataset {
        synth_generate(&SynthConfig {
            n_samples: n,
            vocab_size: 48,
            d_in: 6,
            max_frames: 8,
            fraction_fake: 0.5,
            fraction_non_ocr: 0.25,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn empty_file_loads_reserved_vocab_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        fs::write(&path, "").unwrap();
        let ds = load_dataset(&path, LoadOptions::default()).unwrap();
        assert!(ds.samples.is_empty());
        assert_eq!(ds.vocab.len(), 4);
    }

    #[test]
    fn one_line_round_trips_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        let ds = tiny_dataset(1, 3);
        save_dataset(&path, &ds.samples, &ds.vocab).unwrap();
        let original = fs::read(&path).unwrap();

        let reloaded = load_dataset(&path, LoadOptions::default()).unwrap();
        let path2 = dir.path().join("two.jsonl");
        save_dataset(&path2, &reloaded.samples, &reloaded.vocab).unwrap();
        assert_eq!(original, fs::read(&path2).unwrap());
        assert_eq!(reloaded.samples.len(), 1);
    }

    #[test]
    fn save_load_preserves_canonical_lines() {
        // Reloading reassigns token ids in file-appearance order, so compare
        // the canonical serialization rather than raw id lists.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        let ds = tiny_dataset(12, 5);
        save_dataset(&path, &ds.samples, &ds.vocab).unwrap();
        let reloaded = load_dataset(&path, LoadOptions::default()).unwrap();
        assert_eq!(reloaded.samples.len(), ds.samples.len());
        for (a, b) in reloaded.samples.iter().zip(&ds.samples) {
            assert_eq!(
                sample_to_line(a, &reloaded.vocab),
                sample_to_line(b, &ds.vocab)
            );
        }
    }

    #[test]
    fn ragged_frame_row_is_a_frames_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(
            &path,
            r#"{"id":"a","event_id":"e","label":0,"title":["t"],"ocr":[],"related":[],"frames":[[0.0,1.0],[2.0]],"explanation":["x"]}"#,
        )
        .unwrap();
        let err = load_dataset(&path, LoadOptions::default()).unwrap_err();
        match err {
            DataError::Validation { field, line, .. } => {
                assert_eq!(field, "frames");
                assert_eq!(line, 1);
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let ds = tiny_dataset(1, 9);
        let good = sample_to_line(&ds.samples[0], &ds.vocab);
        fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
        let err = load_dataset(&path, LoadOptions::default()).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_tokens_map_to_unk_under_fixed_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.jsonl");
        let ds = tiny_dataset(2, 1);
        save_dataset(&path, &ds.samples, &ds.vocab).unwrap();
        let reduced = Vocabulary::new(); // reserved tokens only
        let loaded = load_dataset_with_vocab(&path, LoadOptions::default(), &reduced).unwrap();
        assert!(loaded.samples[0].title_tokens.iter().all(|&t| t == UNK));
    }

    #[test]
    fn truncation_drops_ocr_before_title() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("long.jsonl");
        let title: Vec<String> = (0..6).map(|i| format!("t{i}")).collect();
        let ocr: Vec<String> = (0..6).map(|i| format!("o{i}")).collect();
        let raw = RawSample {
            id: "a".into(),
            event_id: "e".into(),
            label: 0,
            title,
            ocr,
            related: vec![],
            frames: vec![vec![0.0, 0.0]],
            explanation: vec!["x".into()],
        };
        fs::write(&path, format!("{}\n", serde_json::to_string(&raw).unwrap())).unwrap();
        let opts = LoadOptions {
            max_text_len: 8,
            max_frames: 4,
        };
        let ds = load_dataset(&path, opts).unwrap();
        assert_eq!(ds.samples[0].title_tokens.len(), 6);
        assert_eq!(ds.samples[0].ocr_tokens.len(), 2);
    }

    #[test]
    fn split_sizes_follow_floor_remainder_rule() {
        let ds = tiny_dataset(40, 7);
        let split = make_split(
            &ds.samples,
            (0.85, 0.05, 0.10),
            SplitMode::Random,
            SampleFilter::All,
            13,
        )
        .unwrap();
        // floor(0.05*40)=2, floor(0.10*40)=4, remainder to train.
        assert_eq!(split.val.len(), 2);
        assert_eq!(split.test.len(), 4);
        assert_eq!(split.train.len(), 34);
    }

    #[test]
    fn documented_sizes_for_the_3614_sample_corpus() {
        // floor(0.05*3614)=180 and floor(0.10*3614)=361; remainder goes to
        // train, giving 3073/180/361 for the 85:5:10 split of 3614.
        let n = 3614usize;
        let n_val = (0.05 * n as f64).floor() as usize;
        let n_test = (0.10 * n as f64).floor() as usize;
        assert_eq!((n - n_val - n_test, n_val, n_test), (3073, 180, 361));
    }

    #[test]
    fn splits_are_disjoint_and_exhaustive() {
        let ds = tiny_dataset(50, 21);
        for filter in [SampleFilter::All, SampleFilter::OcrOnly, SampleFilter::NonOcrOnly] {
            let split = make_split(
                &ds.samples,
                (0.8, 0.1, 0.1),
                SplitMode::Random,
                filter,
                3,
            )
            .unwrap();
            let mut seen = HashSet::new();
            for id in split.train.iter().chain(&split.val).chain(&split.test) {
                assert!(seen.insert(id.clone()), "duplicate id {id}");
            }
            let expected: HashSet<String> = ds
                .samples
                .iter()
                .filter(|s| filter.keeps(s))
                .map(|s| s.id.clone())
                .collect();
            assert_eq!(seen, expected);
        }
    }

    #[test]
    fn event_disjoint_keeps_whole_events_together() {
        let ds = tiny_dataset(60, 2);
        let split = make_split(
            &ds.samples,
            (0.6, 0.2, 0.2),
            SplitMode::EventDisjoint,
            SampleFilter::All,
            3,
        )
        .unwrap();
        let events = |ids: &[String]| -> HashSet<String> {
            select(&ds.samples, ids)
                .iter()
                .map(|s| s.event_id.clone())
                .collect()
        };
        let (a, b, c) = (events(&split.train), events(&split.val), events(&split.test));
        assert!(a.is_disjoint(&b));
        assert!(a.is_disjoint(&c));
        assert!(b.is_disjoint(&c));
    }

    #[test]
    fn event_disjoint_needs_three_events() {
        let mut ds = tiny_dataset(10, 2);
        for s in &mut ds.samples {
            s.event_id = "only".into();
        }
        let err = make_split(
            &ds.samples,
            (0.8, 0.1, 0.1),
            SplitMode::EventDisjoint,
            SampleFilter::All,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, DataError::Split(_)));
    }

    #[test]
    fn non_ocr_filter_leaves_only_empty_ocr() {
        let ds = tiny_dataset(40, 11);
        let split = make_split(
            &ds.samples,
            (0.8, 0.1, 0.1),
            SplitMode::Random,
            SampleFilter::NonOcrOnly,
            5,
        )
        .unwrap();
        for sample in select(
            &ds.samples,
            &split
                .train
                .iter()
                .chain(&split.val)
                .chain(&split.test)
                .cloned()
                .collect::<Vec<_>>(),
        ) {
            assert!(sample.ocr_tokens.is_empty());
        }
    }
}
