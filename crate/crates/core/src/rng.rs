//! Deterministic random streams with hierarchical substream derivation.
//!
//! Every piece of randomness in a campaign flows through a [`RandomStream`]
//! derived from a [`SeedTree`] path such as `seed/iteration/role`. Substreams
//! are statistically independent and reproducible regardless of which worker
//! thread executes them, so results are identical across worker counts and
//! across interrupt/resume boundaries.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Labels for the fixed substream roles used by the SBC engine.
pub mod roles {
    /// Generating parameter draw (prior draw or base-posterior draw).
    pub const THETA: u64 = 1;
    /// Predictive simulation from the generating draw.
    pub const SIMULATE: u64 = 2;
    /// Posterior refit (chains derive further children per chain index).
    pub const FIT: u64 = 3;
    /// Rank tie-breaking.
    pub const RANK: u64 = 4;
    /// Base-posterior fit in posterior-mode campaigns.
    pub const BASE: u64 = 5;
    /// Envelope calibration Monte Carlo.
    pub const ENVELOPE: u64 = 6;
}

fn scramble(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mix(state: u64, label: u64) -> u64 {
    scramble(state ^ scramble(label.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// A node in the seed-derivation tree. Cloning is cheap; children are derived
/// by label and never collide with siblings in practice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
    state: u64,
    path: Vec<u64>,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        SeedTree {
            seed,
            state: scramble(seed.wrapping_add(0x5851_F42D_4C95_7F2D)),
            path: Vec::new(),
        }
    }

    pub fn child(&self, label: u64) -> Self {
        let mut path = self.path.clone();
        path.push(label);
        SeedTree {
            seed: self.seed,
            state: mix(self.state, label),
            path,
        }
    }

    /// Materialize the stream at this node.
    pub fn rng(&self) -> RandomStream {
        let mut key = [0u8; 32];
        let mut s = self.state;
        for chunk in key.chunks_exact_mut(8) {
            s = scramble(s.wrapping_add(0x9E37_79B9_7F4A_7C15));
            chunk.copy_from_slice(&s.to_le_bytes());
        }
        RandomStream(ChaCha8Rng::from_seed(key))
    }

    /// Human-readable `seed/label/label/...` path, recorded in iteration logs.
    pub fn path_string(&self) -> String {
        let mut s = self.seed.to_string();
        for p in &self.path {
            s.push('/');
            s.push_str(&p.to_string());
        }
        s
    }
}

/// A single reproducible random stream (ChaCha8). Never share one stream
/// between concurrent tasks; derive a child per task instead.
#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn from_seed_tree(tree: &SeedTree) -> Self {
        tree.rng()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.0)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n` (n > 0).
    pub fn uniform_int(&mut self, n: u64) -> u64 {
        rand::Rng::random_range(&mut self.0, 0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.0)
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Half-normal with scale `sd` (the positive fold of N(0, sd^2)).
    pub fn half_normal(&mut self, sd: f64) -> f64 {
        (sd * self.standard_normal()).abs()
    }

    /// Normal truncated to the positive half-line, by rejection.
    pub fn positive_normal(&mut self, mean: f64, sd: f64) -> f64 {
        loop {
            let x = self.normal(mean, sd);
            if x > 0.0 {
                return x;
            }
        }
    }

    pub fn log_normal(&mut self, log_mean: f64, log_sd: f64) -> f64 {
        self.normal(log_mean, log_sd).exp()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.0.fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_paths_give_identical_streams() {
        let a = SeedTree::new(42).child(7).child(roles::THETA);
        let b = SeedTree::new(42).child(7).child(roles::THETA);
        let mut ra = a.rng();
        let mut rb = b.rng();
        for _ in 0..64 {
            assert_eq!(ra.0.next_u64(), rb.0.next_u64());
        }
    }

    #[test]
    fn sibling_streams_differ() {
        let root = SeedTree::new(42);
        let mut xs = Vec::new();
        for i in 0..100 {
            xs.push(root.child(i).rng().0.next_u64());
        }
        xs.sort_unstable();
        xs.dedup();
        assert_eq!(xs.len(), 100);
    }

    #[test]
    fn path_string_format() {
        let t = SeedTree::new(9).child(3).child(roles::FIT);
        assert_eq!(t.path_string(), "9/3/3");
    }

    #[test]
    fn half_normal_moment() {
        let mut rng = SeedTree::new(1).rng();
        let n = 1_000_000usize;
        let mean: f64 = (0..n).map(|_| rng.half_normal(1.0)).sum::<f64>() / n as f64;
        let expect = (2.0 / std::f64::consts::PI).sqrt();
        let se = (1.0 - 2.0 / std::f64::consts::PI).sqrt() / (n as f64).sqrt();
        assert!((mean - expect).abs() < 3.0 * se, "mean {mean} vs {expect}");
    }
}
