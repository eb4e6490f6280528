//! Reproducible per-trajectory random streams.
//!
//! Every trajectory owns a ChaCha8 stream whose 256-bit seed is the SHA-256
//! digest of the master seed and a canonical encoding of the trajectory key.
//! Streams depend only on their own key, so growing a sweep never changes
//! trajectories that were already simulated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"mipt/trajectory-stream/v1";

/// Identity of one trajectory inside a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StreamKey {
    /// Distinguishes protocol families and run types.
    pub tag: u8,
    pub size: usize,
    pub p: f64,
    /// Cluster size or power-law exponent.
    pub param: f64,
    pub trajectory_id: u64,
}

impl StreamKey {
    fn encode(&self, master_seed: u64) -> [u8; 41] {
        let mut buf = [0u8; 41];
        buf[0..8].copy_from_slice(&master_seed.to_le_bytes());
        buf[8] = self.tag;
        buf[9..17].copy_from_slice(&(self.size as u64).to_le_bytes());
        buf[17..25].copy_from_slice(&self.p.to_bits().to_le_bytes());
        buf[25..33].copy_from_slice(&self.param.to_bits().to_le_bytes());
        buf[33..41].copy_from_slice(&self.trajectory_id.to_le_bytes());
        buf
    }
}

pub fn stream_seed(master_seed: u64, key: &StreamKey) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update(key.encode(master_seed));
    h.finalize().into()
}

pub fn stream_rng(master_seed: u64, key: &StreamKey) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(stream_seed(master_seed, key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn key(id: u64) -> StreamKey {
        StreamKey { tag: 1, size: 16, p: 0.3, param: 2.0, trajectory_id: id }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = stream_rng(9, &key(3)).random_iter().take(4).collect();
        let b: Vec<u64> = stream_rng(9, &key(3)).random_iter().take(4).collect();
        let c: Vec<u64> = stream_rng(9, &key(4)).random_iter().take(4).collect();
        let d: Vec<u64> = stream_rng(10, &key(3)).random_iter().take(4).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn seed_is_pinned() {
        // guards against accidental changes to the key encoding
        let s = stream_seed(1, &key(0));
        let again = stream_seed(1, &StreamKey { p: 0.3, ..key(0) });
        assert_eq!(s, again);
        assert_ne!(s, stream_seed(1, &StreamKey { p: 0.30000000000000004, ..key(0) }));
    }
}
