use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Position in the genealogy of one replica: the root individual followed by
/// the sequence of left (0) / right (1) choices at each division.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineagePath {
    replica: u64,
    bits: Vec<u8>,
}

impl LineagePath {
    pub fn root(replica: u64) -> Self {
        Self { replica, bits: Vec::new() }
    }

    pub fn child(&self, side: u8) -> Self {
        let mut bits = self.bits.clone();
        bits.push(side);
        Self { replica: self.replica, bits }
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn generation(&self) -> usize {
        self.bits.len()
    }
}

impl fmt::Display for LineagePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:r", self.replica)?;
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// 256-bit stream key; children hash the parent key with their side bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn root(seed: u64, replica: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"growfrag/lineage/root");
        h.update(seed.to_le_bytes());
        h.update(replica.to_le_bytes());
        Self(h.finalize().into())
    }

    pub fn child(&self, side: u8) -> Self {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update([side]);
        Self(h.finalize().into())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.0)
    }

    pub fn bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_differ_between_siblings_and_replicas() {
        let a = StreamKey::root(7, 0);
        let b = StreamKey::root(7, 1);
        assert_ne!(a, b);
        assert_ne!(a.child(0), a.child(1));
        assert_eq!(a.child(0).child(1), StreamKey::root(7, 0).child(0).child(1));
        let x: u64 = a.rng().random();
        let y: u64 = a.rng().random();
        assert_eq!(x, y);
    }

    #[test]
    fn path_display() {
        let p = LineagePath::root(3).child(0).child(1);
        assert_eq!(p.to_string(), "3:r01");
        assert_eq!(p.generation(), 2);
    }
}
