//! Rule-based multimodal relation graph over the sequence positions.
//!
//! Edges come from five rules: (1) title-OCR pairs that are surface
//! identical or whose input embeddings pass the semantic threshold,
//! (2) consecutive frames, (3) each frame to its most cosine-similar title
//! token, (4) each frame to its most similar OCR token, and (5) sequential
//! chains within each related doc plus a bridge from each doc's first token
//! to the last text node. Self-loops are added before normalization so no
//! degree is zero.

use serde::{Deserialize, Serialize};

use crate::encoder::{SeqItem, SequenceX, SourceTag};
use crate::numcore::{cosine_sim, Matrix, NumError, Scalar};

/// Knobs for the under-specified semantic-relevance rule.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Cosine threshold for title-OCR semantic relevance, in [-1, 1].
    pub tau_sem: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { tau_sem: 0.5 }
    }
}

/// Which rule produced an edge; serialized in graph dumps.
pub const RULE_TITLE_OCR: u8 = 1;
pub const RULE_FRAME_CHAIN: u8 = 2;
pub const RULE_FRAME_TITLE: u8 = 3;
pub const RULE_FRAME_OCR: u8 = 4;
pub const RULE_RELATED: u8 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeLogEntry {
    pub i: usize,
    pub j: usize,
    pub rule: u8,
}

/// Node categories, binary adjacency with self-loops, its symmetric
/// normalization, and the audit log of rule applications.
#[derive(Clone, Debug)]
pub struct MultimodalGraph {
    pub s: usize,
    pub categories: Vec<SourceTag>,
    pub a: Matrix<f64>,
    pub a_tilde: Matrix<f64>,
    pub edge_log: Vec<EdgeLogEntry>,
}

impl MultimodalGraph {
    /// Number of distinct undirected off-diagonal edges.
    pub fn edge_count(&self) -> usize {
        let mut n = 0;
        for i in 0..self.s {
            for j in (i + 1)..self.s {
                if self.a.get(i, j) != 0.0 {
                    n += 1;
                }
            }
        }
        n
    }
}

/// Applies the five rules to one sample's sequence. `features` is the
/// per-position input-embedding matrix (token embeddings and projected
/// frame rows), the similarity space for rules 1, 3, and 4.
pub fn build_graph<T: Scalar>(
    seq: &SequenceX,
    features: &Matrix<T>,
    cfg: &GraphConfig,
) -> Result<MultimodalGraph, NumError> {
    let s = seq.len();
    if features.rows() != s {
        return Err(NumError::Invalid(format!(
            "graph features have {} rows for {} sequence positions",
            features.rows(),
            s
        )));
    }
    let title_pos = seq.positions_with_tag(SourceTag::Title);
    let ocr_pos = seq.positions_with_tag(SourceTag::Ocr);
    let frame_pos = seq.positions_with_tag(SourceTag::Frame);
    let related_pos = seq.positions_with_tag(SourceTag::Related);
    let mut docs: Vec<Vec<usize>> = Vec::new();
    for &p in &related_pos {
        if let SeqItem::Related { doc, .. } = seq.item(p) {
            if doc >= docs.len() {
                docs.resize(doc + 1, Vec::new());
            }
            docs[doc].push(p);
        }
    }

    let tau = T::from_f64(cfg.tau_sem);
    let cos = |i: usize, j: usize| -> Result<T, NumError> {
        cosine_sim(features.row(i), features.row(j))
    };
    let mut edges: Vec<EdgeLogEntry> = Vec::new();

    // Rule 1: semantically relevant title-OCR pairs.
    for &ti in &title_pos {
        for &oj in &ocr_pos {
            let surface = seq.item(ti).token() == seq.item(oj).token();
            if surface || cos(ti, oj)? >= tau {
                edges.push(EdgeLogEntry {
                    i: ti,
                    j: oj,
                    rule: RULE_TITLE_OCR,
                });
            }
        }
    }

    // Rule 2: chain adjacent frames.
    for w in frame_pos.windows(2) {
        edges.push(EdgeLogEntry {
            i: w[0],
            j: w[1],
            rule: RULE_FRAME_CHAIN,
        });
    }

    // Rules 3 and 4: each frame to its most similar title/OCR token,
    // ties toward the lowest position.
    for (rule, targets) in [(RULE_FRAME_TITLE, &title_pos), (RULE_FRAME_OCR, &ocr_pos)] {
        if targets.is_empty() {
            continue;
        }
        for &f in &frame_pos {
            let mut best = targets[0];
            let mut best_sim = cos(f, targets[0])?;
            for &t in &targets[1..] {
                let sim = cos(f, t)?;
                if sim > best_sim {
                    best_sim = sim;
                    best = t;
                }
            }
            edges.push(EdgeLogEntry {
                i: f,
                j: best,
                rule,
            });
        }
    }

    // Rule 5: chain each related doc and bridge its first token to the
    // last text node (last OCR token if present, else last title token).
    let anchor = ocr_pos.last().or(title_pos.last()).copied();
    for doc in docs.iter().filter(|d| !d.is_empty()) {
        if let Some(a) = anchor {
            edges.push(EdgeLogEntry {
                i: doc[0],
                j: a,
                rule: RULE_RELATED,
            });
        }
        for w in doc.windows(2) {
            edges.push(EdgeLogEntry {
                i: w[0],
                j: w[1],
                rule: RULE_RELATED,
            });
        }
    }

    let mut a = Matrix::<f64>::zeros(s, s);
    for i in 0..s {
        a.set(i, i, 1.0);
    }
    for e in &edges {
        a.set(e.i, e.j, 1.0);
        a.set(e.j, e.i, 1.0);
    }
    let a_tilde = normalize_adjacency(&a)?;

    Ok(MultimodalGraph {
        s,
        categories: seq.items().iter().map(|it| it.tag()).collect(),
        a,
        a_tilde,
        edge_log: edges,
    })
}

/// Symmetric normalization D^(-1/2) A D^(-1/2) with D the degree matrix.
pub fn normalize_adjacency(a: &Matrix<f64>) -> Result<Matrix<f64>, NumError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumError::Invalid(format!(
            "adjacency must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            if v != 0.0 && v != 1.0 {
                return Err(NumError::Invalid("adjacency must be binary".into()));
            }
            if a.get(j, i) != v {
                return Err(NumError::Invalid("adjacency must be symmetric".into()));
            }
        }
    }
    let mut inv_sqrt_deg = vec![0.0f64; n];
    for (i, slot) in inv_sqrt_deg.iter_mut().enumerate() {
        let deg: f64 = a.row(i).iter().sum();
        if deg == 0.0 {
            return Err(NumError::Invalid(format!(
                "row {i} has zero degree; self-loops are required"
            )));
        }
        *slot = 1.0 / deg.sqrt();
    }
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, a.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j]);
        }
    }
    Ok(out)
}
