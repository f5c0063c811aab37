//! Generation metrics (corpus BLEU-1..4, ROUGE-L, an exact-match METEOR
//! variant, CIDEr), macro classification metrics, and human-rating
//! aggregation. All functions are pure and deterministic.
//!
//! BLEU is corpus-level with no smoothing: a zero n-gram precision zeroes
//! every B_k with k >= n. METEOR is implemented without stemming or
//! synonymy ("meteor_lite") because tokens are opaque ids; alignments are
//! exact-match, maximizing matches and then minimizing chunks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("candidate list is empty")]
    EmptyCorpus,
    #[error("candidates and references differ in length: {0} vs {1}")]
    CorpusMismatch(usize, usize),
    #[error("{0}")]
    Invalid(String),
}

/// Generation plus classification scores for one evaluation run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub rouge_l: f64,
    pub meteor_lite: f64,
    pub cider: f64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Plain-text table with the columns in the order
    /// B1 B2 B3 B4 ROUGE-L METEOR CIDEr Rec Prec F1 Acc.
    pub fn text_table(&self) -> String {
        let header = format!(
            "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "B1", "B2", "B3", "B4", "ROUGE-L", "METEOR*", "CIDEr", "Rec", "Prec", "F1", "Acc"
        );
        let row = format!(
            "{:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            self.bleu1,
            self.bleu2,
            self.bleu3,
            self.bleu4,
            self.rouge_l,
            self.meteor_lite,
            self.cider,
            self.macro_recall,
            self.macro_precision,
            self.macro_f1,
            self.accuracy
        );
        format!("{header}\n{row}\n* METEOR-lite: exact-match unigram variant (no stemming/synonymy)\n")
    }
}

const BLEU_MAX_N: usize = 4;

fn ngram_counts(tokens: &[usize], n: usize) -> HashMap<&[usize], usize> {
    let mut counts: HashMap<&[usize], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-1..4 with clipped n-gram precision and brevity
/// penalty min(1, e^(1 - r/c)).
pub fn bleu(candidates: &[Vec<usize>], references: &[Vec<usize>]) -> Result<[f64; 4], MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(MetricError::CorpusMismatch(
            candidates.len(),
            references.len(),
        ));
    }
    let mut clipped = [0usize; BLEU_MAX_N];
    let mut total = [0usize; BLEU_MAX_N];
    let mut cand_len = 0usize;
    let mut ref_len = 0usize;
    for (cand, reference) in candidates.iter().zip(references) {
        cand_len += cand.len();
        ref_len += reference.len();
        for n in 1..=BLEU_MAX_N {
            let cand_counts = ngram_counts(cand, n);
            let ref_counts = ngram_counts(reference, n);
            for (gram, &c) in &cand_counts {
                total[n - 1] += c;
                clipped[n - 1] += c.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
    }
    let bp = if cand_len == 0 {
        0.0
    } else if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    let precisions: Vec<f64> = (0..BLEU_MAX_N)
        .map(|i| {
            if total[i] == 0 {
                0.0
            } else {
                clipped[i] as f64 / total[i] as f64
            }
        })
        .collect();
    let mut out = [0.0f64; 4];
    for (k, slot) in out.iter_mut().enumerate() {
        let order = k + 1;
        if precisions[..order].iter().any(|&p| p == 0.0) {
            *slot = 0.0;
        } else {
            let log_mean: f64 =
                precisions[..order].iter().map(|p| p.ln()).sum::<f64>() / order as f64;
            *slot = bp * log_mean.exp();
        }
    }
    Ok(out)
}

fn lcs_len(a: &[usize], b: &[usize]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

const ROUGE_BETA: f64 = 1.2;

/// LCS-based F-score for one pair, beta = 1.2.
pub fn rouge_l_pair(candidate: &[usize], reference: &[usize]) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let r = lcs / reference.len() as f64;
    let p = if candidate.is_empty() {
        0.0
    } else {
        lcs / candidate.len() as f64
    };
    let b2 = ROUGE_BETA * ROUGE_BETA;
    let denom = r + b2 * p;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * r * p / denom
    }
}

/// Corpus ROUGE-L: mean of per-pair scores.
pub fn rouge_l(candidates: &[Vec<usize>], references: &[Vec<usize>]) -> Result<f64, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(MetricError::CorpusMismatch(
            candidates.len(),
            references.len(),
        ));
    }
    let sum: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| rouge_l_pair(c, r))
        .sum();
    Ok(sum / candidates.len() as f64)
}

/// Maximum exact-match alignment size: sum over token types of the smaller
/// occurrence count.
fn max_matches(candidate: &[usize], reference: &[usize]) -> usize {
    let mut cand_counts: HashMap<usize, usize> = HashMap::new();
    for &t in candidate {
        *cand_counts.entry(t).or_insert(0) += 1;
    }
    let mut ref_counts: HashMap<usize, usize> = HashMap::new();
    for &t in reference {
        *ref_counts.entry(t).or_insert(0) += 1;
    }
    cand_counts
        .iter()
        .map(|(t, &c)| c.min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum()
}

const NO_CHUNK: usize = usize::MAX;
const EXACT_CHUNK_LIMIT: usize = 20;

/// Minimal chunk count over all maximum alignments, found by memoized
/// search over candidate positions. `last` is the ref index that would
/// extend the current chunk.
fn min_chunks_exact(
    candidate: &[usize],
    reference: &[usize],
    i: usize,
    mask: u64,
    last: usize,
    memo: &mut HashMap<(usize, u64, usize), (usize, usize)>,
) -> (usize, usize) {
    if i == candidate.len() {
        return (0, 0);
    }
    if let Some(&v) = memo.get(&(i, mask, last)) {
        return v;
    }
    // Option: leave this candidate position unmatched.
    let (m_skip, c_skip) = min_chunks_exact(candidate, reference, i + 1, mask, NO_CHUNK, memo);
    let mut best = (m_skip, c_skip);
    for (j, &t) in reference.iter().enumerate() {
        if t == candidate[i] && mask & (1 << j) == 0 {
            let (m, c) =
                min_chunks_exact(candidate, reference, i + 1, mask | (1 << j), j + 1, memo);
            let cost = if last == j { 0 } else { 1 };
            let key = (m + 1, c + cost);
            // Lexicographic: more matches first, then fewer chunks.
            if key.0 > best.0 || (key.0 == best.0 && key.1 < best.1) {
                best = key;
            }
        }
    }
    memo.insert((i, mask, last), best);
    best
}

/// Greedy longest-fragment chunk count for sequences too long for the
/// exact search: repeatedly aligns the longest common contiguous fragment.
fn chunks_greedy(candidate: &[usize], reference: &[usize]) -> usize {
    let mut cand_used = vec![false; candidate.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut chunks = 0;
    loop {
        let mut best_len = 0;
        let mut best = (0, 0);
        for ci in 0..candidate.len() {
            for ri in 0..reference.len() {
                let mut len = 0;
                while ci + len < candidate.len()
                    && ri + len < reference.len()
                    && !cand_used[ci + len]
                    && !ref_used[ri + len]
                    && candidate[ci + len] == reference[ri + len]
                {
                    len += 1;
                }
                if len > best_len {
                    best_len = len;
                    best = (ci, ri);
                }
            }
        }
        if best_len == 0 {
            return chunks;
        }
        for k in 0..best_len {
            cand_used[best.0 + k] = true;
            ref_used[best.1 + k] = true;
        }
        chunks += 1;
    }
}

/// Exact-match METEOR: unigram alignment maximizing matches then
/// minimizing chunks; Fmean = 10PR/(R + 9P); penalty 0.5 (chunks/m)^3.
pub fn meteor_lite_pair(candidate: &[usize], reference: &[usize]) -> f64 {
    let m = max_matches(candidate, reference);
    if m == 0 {
        return 0.0;
    }
    let chunks = if reference.len() <= EXACT_CHUNK_LIMIT {
        let mut memo = HashMap::new();
        let (matches, chunks) =
            min_chunks_exact(candidate, reference, 0, 0, NO_CHUNK, &mut memo);
        debug_assert_eq!(matches, m);
        chunks
    } else {
        chunks_greedy(candidate, reference)
    };
    let p = m as f64 / candidate.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = 10.0 * p * r / (r + 9.0 * p);
    let penalty = 0.5 * (chunks as f64 / m as f64).powi(3);
    fmean * (1.0 - penalty)
}

/// Corpus METEOR-lite: mean of per-pair scores.
pub fn meteor_lite(
    candidates: &[Vec<usize>],
    references: &[Vec<usize>],
) -> Result<f64, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(MetricError::CorpusMismatch(
            candidates.len(),
            references.len(),
        ));
    }
    let sum: f64 = candidates
        .iter()
        .zip(references)
        .map(|(c, r)| meteor_lite_pair(c, r))
        .sum();
    Ok(sum / candidates.len() as f64)
}

type NgramVec = HashMap<Vec<usize>, f64>;

fn tf_idf_vector(tokens: &[usize], n: usize, idf: &HashMap<Vec<usize>, f64>, n_docs: f64) -> NgramVec {
    let mut v: NgramVec = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *v.entry(w.to_vec()).or_insert(0.0) += 1.0;
        }
    }
    for (gram, weight) in v.iter_mut() {
        // Unseen n-grams count as df = 1 (maximum rarity).
        let idf_v = idf.get(gram).copied().unwrap_or_else(|| n_docs.ln());
        *weight *= idf_v;
    }
    v
}

fn cosine_sparse(a: &NgramVec, b: &NgramVec) -> f64 {
    let norm = |v: &NgramVec| -> f64 { v.values().map(|x| x * x).sum::<f64>().sqrt() };
    let na = norm(a);
    let nb = norm(b);
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    let mut dot = 0.0;
    // Deterministic order for the reduction.
    let mut keys: Vec<&Vec<usize>> = a.keys().collect();
    keys.sort();
    for k in keys {
        if let Some(bv) = b.get(k) {
            dot += a[k] * bv;
        }
    }
    dot / (na * nb)
}

/// CIDEr with idf = ln(N_docs / max(df, 1)) over the reference corpus and
/// 10 * cosine per n-gram order, averaged over n = 1..4 and over samples.
pub fn cider(candidates: &[Vec<usize>], references: &[Vec<usize>]) -> Result<f64, MetricError> {
    if candidates.is_empty() || references.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(MetricError::CorpusMismatch(
            candidates.len(),
            references.len(),
        ));
    }
    let n_docs = references.len() as f64;
    let mut idf_per_n: Vec<HashMap<Vec<usize>, f64>> = Vec::with_capacity(BLEU_MAX_N);
    for n in 1..=BLEU_MAX_N {
        let mut df: HashMap<Vec<usize>, usize> = HashMap::new();
        for reference in references {
            let mut seen: Vec<Vec<usize>> = ngram_counts(reference, n)
                .keys()
                .map(|k| k.to_vec())
                .collect();
            seen.sort();
            for gram in seen {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let idf = df
            .into_iter()
            .map(|(gram, d)| (gram, (n_docs / (d.max(1) as f64)).ln()))
            .collect();
        idf_per_n.push(idf);
    }
    let mut total = 0.0;
    for (cand, reference) in candidates.iter().zip(references) {
        let mut sample_score = 0.0;
        for n in 1..=BLEU_MAX_N {
            let idf = &idf_per_n[n - 1];
            let gc = tf_idf_vector(cand, n, idf, n_docs);
            let gr = tf_idf_vector(reference, n, idf, n_docs);
            sample_score += 10.0 * cosine_sparse(&gc, &gr);
        }
        total += sample_score / BLEU_MAX_N as f64;
    }
    Ok(total / candidates.len() as f64)
}

/// Accuracy plus macro precision/recall/F1 over the two classes; empty
/// denominators contribute 0.
pub fn classification_report(
    predictions: &[u8],
    labels: &[u8],
) -> Result<(f64, f64, f64, f64), MetricError> {
    if predictions.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if predictions.len() != labels.len() {
        return Err(MetricError::CorpusMismatch(predictions.len(), labels.len()));
    }
    if predictions.iter().chain(labels).any(|&v| v > 1) {
        return Err(MetricError::Invalid("labels must be 0 or 1".into()));
    }
    let mut confusion = [[0usize; 2]; 2]; // [label][prediction]
    for (&p, &y) in predictions.iter().zip(labels) {
        confusion[y as usize][p as usize] += 1;
    }
    let n = predictions.len() as f64;
    let accuracy = (confusion[0][0] + confusion[1][1]) as f64 / n;
    let mut precisions = [0.0f64; 2];
    let mut recalls = [0.0f64; 2];
    let mut f1s = [0.0f64; 2];
    for c in 0..2 {
        let tp = confusion[c][c] as f64;
        let fp = confusion[1 - c][c] as f64;
        let fn_ = confusion[c][1 - c] as f64;
        precisions[c] = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        recalls[c] = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1s[c] = if precisions[c] + recalls[c] > 0.0 {
            2.0 * precisions[c] * recalls[c] / (precisions[c] + recalls[c])
        } else {
            0.0
        };
    }
    Ok((
        accuracy,
        (precisions[0] + precisions[1]) / 2.0,
        (recalls[0] + recalls[1]) / 2.0,
        (f1s[0] + f1s[1]) / 2.0,
    ))
}

/// Adequacy rating categories, most favorable first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Adequacy {
    Justify,
    WeaklyJustify,
    /// Somewhat related to input.
    Sri,
    /// Not related to input.
    Nri,
}

impl Adequacy {
    pub const ALL: [Adequacy; 4] = [
        Adequacy::Justify,
        Adequacy::WeaklyJustify,
        Adequacy::Sri,
        Adequacy::Nri,
    ];

    fn rank(self) -> usize {
        match self {
            Adequacy::Justify => 0,
            Adequacy::WeaklyJustify => 1,
            Adequacy::Sri => 2,
            Adequacy::Nri => 3,
        }
    }
}

/// Per-sample ratings from one or more raters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleRatings {
    pub adequacy: Vec<Adequacy>,
    /// Fluency in [0, 1], one per rater.
    pub fluency: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HumanRatings {
    pub samples: Vec<SampleRatings>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanSummary {
    /// Fraction of samples whose majority vote landed in each category,
    /// in `Adequacy::ALL` order.
    pub distribution: [f64; 4],
    /// Fraction judged Justify or WeaklyJustify.
    pub adequacy_score: f64,
    pub mean_fluency: f64,
}

/// Majority voting per sample; ties resolve to the less favorable of the
/// tied categories.
pub fn aggregate_human(ratings: &HumanRatings) -> Result<HumanSummary, MetricError> {
    if ratings.samples.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut tally = [0usize; 4];
    let mut fluency_sum = 0.0;
    for (i, sample) in ratings.samples.iter().enumerate() {
        if sample.adequacy.is_empty() || sample.fluency.is_empty() {
            return Err(MetricError::Invalid(format!(
                "sample {i} has no ratings; at least one rater is required"
            )));
        }
        let mut counts = [0usize; 4];
        for &a in &sample.adequacy {
            counts[a.rank()] += 1;
        }
        let max = *counts.iter().max().expect("four categories");
        let majority = (0..4)
            .rev() // less favorable categories win ties
            .find(|&r| counts[r] == max)
            .expect("majority exists");
        tally[majority] += 1;
        fluency_sum +=
            sample.fluency.iter().sum::<f64>() / sample.fluency.len() as f64;
    }
    let n = ratings.samples.len() as f64;
    let distribution = [
        tally[0] as f64 / n,
        tally[1] as f64 / n,
        tally[2] as f64 / n,
        tally[3] as f64 / n,
    ];
    Ok(HumanSummary {
        distribution,
        adequacy_score: distribution[0] + distribution[1],
        mean_fluency: fluency_sum / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(seqs: &[&[usize]]) -> Vec<Vec<usize>> {
        seqs.iter().map(|s| s.to_vec()).collect()
    }

    #[test]
    fn bleu_identity_is_one() {
        let c = corpus(&[&[1, 2, 3, 4, 5], &[6, 7, 8, 9]]);
        let b = bleu(&c, &c).unwrap();
        for k in 0..4 {
            assert!((b[k] - 1.0).abs() < 1e-12, "B{} = {}", k + 1, b[k]);
        }
    }

    #[test]
    fn bleu_disjoint_is_zero() {
        let c = corpus(&[&[1, 2, 3, 4]]);
        let r = corpus(&[&[5, 6, 7, 8]]);
        assert_eq!(bleu(&c, &r).unwrap(), [0.0; 4]);
    }

    #[test]
    fn bleu_clipping_case() {
        // "the the the" vs "the cat": clipped unigram count is 1 of 3.
        let c = corpus(&[&[0, 0, 0]]);
        let r = corpus(&[&[0, 1]]);
        let b = bleu(&c, &r).unwrap();
        assert!((b[0] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(&b[1..], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn bleu_brevity_penalty_applies_to_short_candidates() {
        let c = corpus(&[&[1, 2]]);
        let r = corpus(&[&[1, 2, 3, 4]]);
        let b = bleu(&c, &r).unwrap();
        // p1 = 1, p2 = 1, BP = e^(1 - 4/2).
        let bp = (1.0f64 - 2.0).exp();
        assert!((b[0] - bp).abs() < 1e-12);
        assert!((b[1] - bp).abs() < 1e-12);
    }

    #[test]
    fn bleu_rejects_empty_corpus() {
        assert!(matches!(bleu(&[], &[]), Err(MetricError::EmptyCorpus)));
    }

    #[test]
    fn rouge_identity_and_disjoint() {
        let a = vec![1usize, 2, 3, 4];
        assert!((rouge_l_pair(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(rouge_l_pair(&[9, 9], &a), 0.0);
    }

    #[test]
    fn rouge_lcs_matches_brute_force_oracle() {
        // Oracle: enumerate all subsequences of the candidate, keep the
        // longest one that is also a subsequence of the reference.
        fn is_subseq(needle: &[usize], hay: &[usize]) -> bool {
            let mut it = hay.iter();
            needle.iter().all(|t| it.any(|h| h == t))
        }
        let mut rng = crate::test_rng(42);
        for _ in 0..40 {
            let len_a = rng.next_range(0, 9);
            let len_b = rng.next_range(1, 9);
            let a: Vec<usize> = (0..len_a).map(|_| rng.next_range(0, 4)).collect();
            let b: Vec<usize> = (0..len_b).map(|_| rng.next_range(0, 4)).collect();
            let mut best = 0;
            for mask in 0u32..(1 << a.len()) {
                let sub: Vec<usize> = a
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, &t)| t)
                    .collect();
                if is_subseq(&sub, &b) {
                    best = best.max(sub.len());
                }
            }
            assert_eq!(lcs_len(&a, &b), best, "a={a:?} b={b:?}");
        }
    }

    #[test]
    fn meteor_identical_length_four_analytic_value() {
        let a = vec![1usize, 2, 3, 4];
        assert!((meteor_lite_pair(&a, &a) - 0.9921875).abs() < 1e-15);
    }

    #[test]
    fn meteor_no_match_is_zero() {
        assert_eq!(meteor_lite_pair(&[1, 2], &[3, 4]), 0.0);
    }

    #[test]
    fn meteor_chunks_match_exhaustive_alignment_oracle() {
        // Oracle: recurse over reference positions (the implementation
        // recurses over candidate positions), enumerating every maximum
        // alignment and scanning chunk count from the chosen pairs.
        fn oracle(cand: &[usize], reference: &[usize]) -> Option<usize> {
            let m = max_matches(cand, reference);
            if m == 0 {
                return None;
            }
            fn rec(
                cand: &[usize],
                reference: &[usize],
                j: usize,
                cand_mask: u32,
                pairs: &mut Vec<(usize, usize)>,
                best: &mut Option<usize>,
                m: usize,
            ) {
                if j == reference.len() {
                    if pairs.len() == m {
                        let mut sorted = pairs.clone();
                        sorted.sort();
                        let mut chunks = 0;
                        for (idx, &(ci, ri)) in sorted.iter().enumerate() {
                            if idx == 0 {
                                chunks += 1;
                            } else {
                                let (pci, pri) = sorted[idx - 1];
                                if ci != pci + 1 || ri != pri + 1 {
                                    chunks += 1;
                                }
                            }
                        }
                        *best = Some(best.map_or(chunks, |b: usize| b.min(chunks)));
                    }
                    return;
                }
                // Skip reference position j.
                rec(cand, reference, j + 1, cand_mask, pairs, best, m);
                for (i, &t) in cand.iter().enumerate() {
                    if t == reference[j] && cand_mask & (1 << i) == 0 {
                        pairs.push((i, j));
                        rec(cand, reference, j + 1, cand_mask | (1 << i), pairs, best, m);
                        pairs.pop();
                    }
                }
            }
            let mut best = None;
            rec(cand, reference, 0, 0, &mut Vec::new(), &mut best, m);
            best
        }

        let mut rng = crate::test_rng(7);
        for _ in 0..60 {
            let len_a = rng.next_range(1, 9);
            let len_b = rng.next_range(1, 9);
            let a: Vec<usize> = (0..len_a).map(|_| rng.next_range(0, 5)).collect();
            let b: Vec<usize> = (0..len_b).map(|_| rng.next_range(0, 5)).collect();
            let m = max_matches(&a, &b);
            if m == 0 {
                continue;
            }
            let mut memo = HashMap::new();
            let (got_m, got_chunks) = min_chunks_exact(&a, &b, 0, 0, NO_CHUNK, &mut memo);
            assert_eq!(got_m, m);
            assert_eq!(Some(got_chunks), oracle(&a, &b), "a={a:?} b={b:?}");
        }
    }

    #[test]
    fn meteor_reordered_pair_has_two_chunks() {
        // Swapped halves align fully but in two fragments.
        let c = vec![3usize, 4, 1, 2];
        let r = vec![1usize, 2, 3, 4];
        // m=4, chunks=2: score = 1 * (1 - 0.5 * (2/4)^3).
        let expected = 1.0 * (1.0 - 0.5 * 0.125);
        assert!((meteor_lite_pair(&c, &r) - expected).abs() < 1e-12);
    }

    #[test]
    fn cider_zero_overlap_is_zero() {
        let c = corpus(&[&[1, 2, 3]]);
        let r = corpus(&[&[4, 5, 6]]);
        assert_eq!(cider(&c, &r).unwrap(), 0.0);
    }

    #[test]
    fn cider_single_document_corpus_is_zero_by_idf_guard() {
        let c = corpus(&[&[1, 2, 3]]);
        let r = corpus(&[&[1, 2, 3]]);
        // One document: every reference n-gram has df = 1 = N, idf = 0.
        assert_eq!(cider(&c, &r).unwrap(), 0.0);
    }

    #[test]
    fn cider_matches_direct_vector_oracle_on_three_doc_corpus() {
        let cands = corpus(&[&[1, 2, 3, 4], &[5, 6, 7], &[1, 5, 9, 9]]);
        let refs = corpus(&[&[1, 2, 3, 4], &[5, 6, 8], &[9, 9, 1, 5]]);
        let got = cider(&cands, &refs).unwrap();

        // Independent recomputation with plain vectors.
        let n_docs = 3.0f64;
        let mut total = 0.0;
        for (cand, reference) in cands.iter().zip(&refs) {
            let mut per_sample = 0.0;
            for n in 1..=4usize {
                let grams = |s: &[usize]| -> Vec<Vec<usize>> {
                    if s.len() < n {
                        vec![]
                    } else {
                        s.windows(n).map(|w| w.to_vec()).collect()
                    }
                };
                // df over refs.
                let mut df: HashMap<Vec<usize>, f64> = HashMap::new();
                for r in &refs {
                    let mut seen: Vec<Vec<usize>> = grams(r);
                    seen.sort();
                    seen.dedup();
                    for g in seen {
                        *df.entry(g).or_insert(0.0) += 1.0;
                    }
                }
                let weight = |s: &[usize]| -> HashMap<Vec<usize>, f64> {
                    let mut v: HashMap<Vec<usize>, f64> = HashMap::new();
                    for g in grams(s) {
                        *v.entry(g).or_insert(0.0) += 1.0;
                    }
                    for (g, w) in v.iter_mut() {
                        let d = df.get(g).copied().unwrap_or(1.0).max(1.0);
                        *w *= (n_docs / d).ln();
                    }
                    v
                };
                let vc = weight(cand);
                let vr = weight(reference);
                let dot: f64 = vc
                    .iter()
                    .filter_map(|(g, w)| vr.get(g).map(|x| w * x))
                    .sum();
                let nc: f64 = vc.values().map(|x| x * x).sum::<f64>().sqrt();
                let nr: f64 = vr.values().map(|x| x * x).sum::<f64>().sqrt();
                if nc > 1e-12 && nr > 1e-12 {
                    per_sample += 10.0 * dot / (nc * nr);
                }
            }
            total += per_sample / 4.0;
        }
        let expected = total / 3.0;
        assert!((got - expected).abs() < 1e-9, "got {got}, expected {expected}");
    }

    #[test]
    fn classification_perfect_and_all_wrong() {
        let labels = vec![0, 1, 0, 1];
        let (acc, p, r, f1) = classification_report(&labels, &labels).unwrap();
        assert_eq!((acc, p, r, f1), (1.0, 1.0, 1.0, 1.0));
        let flipped: Vec<u8> = labels.iter().map(|&v| 1 - v).collect();
        let (acc, ..) = classification_report(&flipped, &labels).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn classification_mixed_case_matches_confusion_oracle() {
        let predictions = vec![0u8, 1, 1, 0, 1, 0];
        let labels = vec![0u8, 1, 0, 0, 1, 1];
        let (acc, p, r, f1) = classification_report(&predictions, &labels).unwrap();
        // Confusion: tp0=2, fn0=1, tp1=2, fn1=1, fp0=1, fp1=1.
        let p0 = 2.0 / 3.0;
        let r0 = 2.0 / 3.0;
        let p1 = 2.0 / 3.0;
        let r1 = 2.0 / 3.0;
        let f0 = 2.0 * p0 * r0 / (p0 + r0);
        let f1e = 2.0 * p1 * r1 / (p1 + r1);
        assert!((acc - 4.0 / 6.0).abs() < 1e-12);
        assert!((p - (p0 + p1) / 2.0).abs() < 1e-12);
        assert!((r - (r0 + r1) / 2.0).abs() < 1e-12);
        assert!((f1 - (f0 + f1e) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_rater_distribution_is_raw() {
        let ratings = HumanRatings {
            samples: vec![
                SampleRatings {
                    adequacy: vec![Adequacy::Justify],
                    fluency: vec![0.9],
                },
                SampleRatings {
                    adequacy: vec![Adequacy::Nri],
                    fluency: vec![0.3],
                },
            ],
        };
        let s = aggregate_human(&ratings).unwrap();
        assert_eq!(s.distribution, [0.5, 0.0, 0.0, 0.5]);
        assert!((s.adequacy_score - 0.5).abs() < 1e-12);
        assert!((s.mean_fluency - 0.6).abs() < 1e-12);
    }

    #[test]
    fn tie_resolves_to_less_favorable_category() {
        let ratings = HumanRatings {
            samples: vec![SampleRatings {
                adequacy: vec![Adequacy::Justify, Adequacy::Sri],
                fluency: vec![0.8, 0.8],
            }],
        };
        let s = aggregate_human(&ratings).unwrap();
        assert_eq!(s.distribution, [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn reference_rating_distribution_reproduces() {
        // 20 samples voted 9/7/3/1 give the 45/35/15/5 distribution.
        let mut samples = Vec::new();
        for (count, cat) in [
            (9, Adequacy::Justify),
            (7, Adequacy::WeaklyJustify),
            (3, Adequacy::Sri),
            (1, Adequacy::Nri),
        ] {
            for _ in 0..count {
                samples.push(SampleRatings {
                    adequacy: vec![cat],
                    fluency: vec![0.91],
                });
            }
        }
        let s = aggregate_human(&HumanRatings { samples }).unwrap();
        assert_eq!(s.distribution, [0.45, 0.35, 0.15, 0.05]);
        assert!((s.adequacy_score - 0.80).abs() < 1e-12);
    }

    proptest! {
        // BLEU must not change under a consistent relabeling of the
        // vocabulary.
        #[test]
        fn bleu_is_invariant_under_token_relabeling(seed in 0u64..500) {
            let mut rng = crate::test_rng(seed);
            let n_pairs = rng.next_range(1, 5);
            let mut cands = Vec::new();
            let mut refs = Vec::new();
            for _ in 0..n_pairs {
                let lc = rng.next_range(1, 10);
                let lr = rng.next_range(1, 10);
                cands.push((0..lc).map(|_| rng.next_range(0, 8)).collect::<Vec<_>>());
                refs.push((0..lr).map(|_| rng.next_range(0, 8)).collect::<Vec<_>>());
            }
            // Bijective relabeling: token t -> 100 + (t * 3) % 24 is
            // injective on 0..8.
            let relabel = |s: &Vec<usize>| -> Vec<usize> {
                s.iter().map(|&t| 100 + (t * 3) % 24).collect()
            };
            let b1 = bleu(&cands, &refs).unwrap();
            let cands2: Vec<Vec<usize>> = cands.iter().map(relabel).collect();
            let refs2: Vec<Vec<usize>> = refs.iter().map(relabel).collect();
            let b2 = bleu(&cands2, &refs2).unwrap();
            for k in 0..4 {
                prop_assert!((b1[k] - b2[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn generation_metrics_stay_in_range(seed in 0u64..300) {
            let mut rng = crate::test_rng(seed);
            let lc = rng.next_range(1, 12);
            let lr = rng.next_range(1, 12);
            let c: Vec<usize> = (0..lc).map(|_| rng.next_range(0, 6)).collect();
            let r: Vec<usize> = (0..lr).map(|_| rng.next_range(0, 6)).collect();
            let rl = rouge_l_pair(&c, &r);
            prop_assert!((0.0..=1.0).contains(&rl));
            let ml = meteor_lite_pair(&c, &r);
            prop_assert!((0.0..=1.0).contains(&ml));
            let cd = cider(&[c.clone()], &[r.clone()]).unwrap();
            prop_assert!((0.0..=10.0).contains(&cd));
            let b = bleu(&[c], &[r]).unwrap();
            for v in b {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
