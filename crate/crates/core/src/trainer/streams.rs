//! Named, independent random streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Splits a master seed into independent ChaCha streams keyed by a name and,
/// optionally, an integer index (e.g. one stream per environment step).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn named(&self, name: &str) -> ChaCha8Rng {
        self.derive(name, None)
    }

    pub fn indexed(&self, name: &str, index: u64) -> ChaCha8Rng {
        self.derive(name, Some(index))
    }

    fn derive(&self, name: &str, index: Option<u64>) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.master.to_le_bytes());
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        match index {
            Some(i) => {
                h.update([1u8]);
                h.update(i.to_le_bytes());
            }
            None => h.update([0u8]),
        }
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&h.finalize());
        ChaCha8Rng::from_seed(seed)
    }
}
