//! Seeded randomness and one-time pads.
//!
//! One [`SeededStream`] drives a whole experiment. Draws happen in a fixed
//! order: library contents first, then cache placement, then keys.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::bits::BitBlock;

/// Where a pad's bits came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadOrigin {
    /// The `draw`-th pad taken from a uniform key source.
    Uniform { draw: u64 },
    /// Bits set by hand rather than drawn; never a valid one-time pad.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pad {
    pub bits: BitBlock,
    pub origin: PadOrigin,
}

impl Pad {
    pub fn fixed(bits: BitBlock) -> Self {
        Pad {
            bits,
            origin: PadOrigin::Fixed,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Supplier of key material. Placement code asks for pads one at a time in
/// its documented order.
pub trait KeySource {
    fn draw_pad(&mut self, len: usize) -> Pad;
}

pub struct SeededStream {
    rng: ChaCha20Rng,
    pads_drawn: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        SeededStream {
            rng: ChaCha20Rng::seed_from_u64(seed),
            pads_drawn: 0,
        }
    }

    /// `len` i.i.d. fair bits.
    pub fn uniform_block(&mut self, len: usize) -> BitBlock {
        let mut words: Vec<u64> = alloc::vec![0; len.div_ceil(64)];
        for w in &mut words {
            *w = self.rng.next_u64();
        }
        BitBlock::from_words(words, len)
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }
}

impl KeySource for SeededStream {
    fn draw_pad(&mut self, len: usize) -> Pad {
        let bits = self.uniform_block(len);
        let draw = self.pads_drawn;
        self.pads_drawn += 1;
        Pad {
            bits,
            origin: PadOrigin::Uniform { draw },
        }
    }
}

/// Free-function form of [`SeededStream::uniform_block`].
pub fn gen_uniform_block(len: usize, stream: &mut SeededStream) -> BitBlock {
    stream.uniform_block(len)
}
