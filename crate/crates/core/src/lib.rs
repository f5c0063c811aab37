//! End-to-end pipeline for news-video veracity classification and
//! explanation generation: feature encoding, rule-based multimodal relation
//! graph, GCN reasoning, joint classify/generate heads, metrics, and a
//! deterministic training loop.

pub mod autodiff;
pub mod checkpoint;
pub mod datamodel;
pub mod encoder;
pub mod gcn;
pub mod heads;
pub(crate) mod layers;
pub mod metrics;
pub mod model;
pub mod relgraph;
pub mod trainer;
pub mod numcore;

pub use numcore::{Matrix, NumError, ParamTensor, Scalar};

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> TestRng {
    TestRng::new(seed)
}

/// Small deterministic generator for tests; splitmix64 under the hood.
#[cfg(test)]
pub(crate) struct TestRng {
    state: u64,
}

#[cfg(test)]
impl TestRng {
    fn new(seed: u64) -> Self {
        TestRng {
            state: seed.wrapping_add(0x9E3779B97F4A7C15),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn next_range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo) as u64) as usize
    }
}
