//! Splittable, seeded randomness.
//!
//! A [`RngStream`] is an immutable key. Calling [`RngStream::rng`] always
//! yields a generator positioned at the start of the same sequence, so two
//! runs holding equal streams consume identical randomness. Child streams are
//! derived by hashing the parent key with a [`Role`] and an index, which makes
//! it cheap to hand a tester one shared internal stream while its sample
//! streams stay fresh.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a derived stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Internal,
    Sample1,
    Sample2,
    Flatten,
    Marking,
    Threshold,
    Split,
    Instance,
    Trial(u64),
}

impl Role {
    fn code(self) -> (u64, u64) {
        match self {
            Role::Internal => (1, 0),
            Role::Sample1 => (2, 0),
            Role::Sample2 => (3, 0),
            Role::Flatten => (4, 0),
            Role::Marking => (5, 0),
            Role::Threshold => (6, 0),
            Role::Split => (7, 0),
            Role::Instance => (8, 0),
            Role::Trial(k) => (9, k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    key: [u64; 4],
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        RngStream {
            key: [splitmix(&mut s), splitmix(&mut s), splitmix(&mut s), splitmix(&mut s)],
        }
    }

    /// Child stream for `role`.
    pub fn derive(&self, role: Role) -> Self {
        let (tag, index) = role.code();
        let mut out = [0u64; 4];
        let mut acc = tag.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ index.rotate_left(17);
        for (i, slot) in out.iter_mut().enumerate() {
            acc ^= self.key[i];
            let mut s = acc ^ (i as u64).wrapping_mul(0xA076_1D64_78BD_642F);
            *slot = splitmix(&mut s) ^ splitmix(&mut s).rotate_left(29);
            acc = acc.rotate_left(23).wrapping_add(*slot);
        }
        RngStream { key: out }
    }

    /// Shorthand for `derive(Role::Trial(k))`.
    pub fn trial(&self, k: u64) -> Self {
        self.derive(Role::Trial(k))
    }

    /// A generator at the start of this stream's sequence.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        for (chunk, word) in seed.chunks_exact_mut(8).zip(self.key.iter()) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// A 64-bit fingerprint of the key, recorded in per-trial output.
    pub fn fingerprint(&self) -> u64 {
        self.key[0] ^ self.key[1].rotate_left(13) ^ self.key[2].rotate_left(29) ^ self.key[3].rotate_left(47)
    }
}
