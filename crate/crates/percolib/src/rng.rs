//! Counter-based random numbers keyed by (master seed, stream index, item id).
//!
//! Every random decision in the sampler is a pure function of its key, so
//! configurations regenerate bit-identically, streams are embarrassingly
//! parallel with no shared state, and a single edge can be queried lazily
//! in any order with the same outcome as materializing the whole
//! configuration.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stafford mix 13, the SplitMix64 output finalizer. Full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Domain separators so edge coins, ghost-field coins and auxiliary draws
/// never collide even when ids overlap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Edge,
    GhostVertex,
    Aux,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Edge => 0x45,
            Domain::GhostVertex => 0x47,
            Domain::Aux => 0x58,
        }
    }
}

/// A derived key for one (master seed, stream, domain) triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey {
    key: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, stream: u64, domain: Domain) -> Self {
        let k = mix64(master_seed ^ GOLDEN.wrapping_mul(stream).wrapping_add(domain.tag()));
        StreamKey {
            key: mix64(k ^ domain.tag().wrapping_mul(GOLDEN)),
        }
    }

    /// Uniform 64-bit word for item `index` under this key.
    #[inline]
    pub fn uniform_u64(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform f64 in [0, 1).
    #[inline]
    pub fn uniform_f64(&self, index: u64) -> f64 {
        (self.uniform_u64(index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Bernoulli(p) acceptance threshold on the 64-bit uniform scale, exact at
/// the endpoints: p = 0 accepts nothing, p = 1 accepts everything. Coupled
/// monotonically in p (same uniform word, larger threshold).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BernoulliThreshold {
    t: u128,
}

impl BernoulliThreshold {
    pub fn new(p: f64) -> Self {
        let clamped = p.clamp(0.0, 1.0);
        let t = (clamped * (1u128 << 64) as f64) as u128;
        BernoulliThreshold { t }
    }

    #[inline]
    pub fn accept(&self, uniform: u64) -> bool {
        (uniform as u128) < self.t
    }
}

/// Convenience bundle: the open/closed coin for a single edge.
#[derive(Clone, Copy, Debug)]
pub struct EdgeCoins {
    key: StreamKey,
    threshold: BernoulliThreshold,
}

impl EdgeCoins {
    pub fn new(master_seed: u64, stream: u64, p: f64) -> Self {
        EdgeCoins {
            key: StreamKey::new(master_seed, stream, Domain::Edge),
            threshold: BernoulliThreshold::new(p),
        }
    }

    #[inline]
    pub fn open(&self, edge_id: u64) -> bool {
        self.threshold.accept(self.key.uniform_u64(edge_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_are_exact() {
        let key = StreamKey::new(7, 0, Domain::Edge);
        let never = BernoulliThreshold::new(0.0);
        let always = BernoulliThreshold::new(1.0);
        for i in 0..10_000u64 {
            let u = key.uniform_u64(i);
            assert!(!never.accept(u));
            assert!(always.accept(u));
        }
    }

    #[test]
    fn monotone_in_p() {
        let key = StreamKey::new(3, 5, Domain::Edge);
        let lo = BernoulliThreshold::new(0.3);
        let hi = BernoulliThreshold::new(0.7);
        for i in 0..10_000u64 {
            let u = key.uniform_u64(i);
            if lo.accept(u) {
                assert!(hi.accept(u));
            }
        }
    }

    #[test]
    fn frequency_near_p() {
        let coins = EdgeCoins::new(42, 0, 0.5);
        let n = 100_000u64;
        let mut open = 0u64;
        for i in 0..n {
            if coins.open(i) {
                open += 1;
            }
        }
        // 3 sigma binomial band around np.
        let mean = 0.5 * n as f64;
        let sigma = (0.25 * n as f64).sqrt();
        assert!((open as f64 - mean).abs() < 3.0 * sigma, "open = {open}");
    }

    #[test]
    fn streams_decorrelated() {
        let a = StreamKey::new(9, 0, Domain::Edge);
        let b = StreamKey::new(9, 1, Domain::Edge);
        let mut same = 0;
        for i in 0..4096u64 {
            if (a.uniform_u64(i) & 1) == (b.uniform_u64(i) & 1) {
                same += 1;
            }
        }
        assert!((same as f64 - 2048.0).abs() < 4.0 * 32.0);
    }
}
