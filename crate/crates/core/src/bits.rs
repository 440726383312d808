//! Packed bit sequences.
//!
//! Bit `i` lives in word `i / 64` at position `i % 64` (little-endian bit
//! order within words). Bits past `len` in the last word are always zero,
//! so word-wise equality is block equality.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{param, Result};

const WORD: usize = 64;

#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitBlock {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

impl BitBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            words: alloc::vec![0; words_for(len)],
            len,
        }
    }

    /// Builds a block from raw words, clearing anything past `len`.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(words_for(len), 0);
        let mut block = Self { words, len };
        block.clear_tail();
        block
    }

    /// The low `len` bits of `value` (`len <= 64`).
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= WORD, "from_u64 takes at most 64 bits");
        Self::from_words(alloc::vec![value], len)
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut block = Self::new();
        for b in bits {
            block.push(b);
        }
        block
    }

    /// Parses a `0`/`1` string, first character is bit 0.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(param(alloc::format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(Self::from_bools)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(
            i < self.len,
            "bit index {i} out of range for length {}",
            self.len
        );
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len.is_multiple_of(WORD) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Copies bits `range` into a new block.
    pub fn slice(&self, range: Range<usize>) -> Self {
        assert!(range.start <= range.end && range.end <= self.len);
        let len = range.end - range.start;
        let mut out = Self::zeros(len);
        let shift = range.start % WORD;
        let first = range.start / WORD;
        for (j, w) in out.words.iter_mut().enumerate() {
            let lo = self.words.get(first + j).copied().unwrap_or(0) >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.words.get(first + j + 1).copied().unwrap_or(0) << (WORD - shift)
            };
            *w = lo | hi;
        }
        out.clear_tail();
        out
    }

    /// Appends all bits of `other`.
    pub fn extend_from(&mut self, other: &BitBlock) {
        if self.len.is_multiple_of(WORD) {
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat<'a, I: IntoIterator<Item = &'a BitBlock>>(parts: I) -> Self {
        let mut out = Self::new();
        for p in parts {
            out.extend_from(p);
        }
        out
    }

    /// Keeps the first `len` bits; longer requests are a no-op.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(words_for(len));
        self.clear_tail();
    }

    /// Grows the block with zero bits on the right.
    pub fn pad_to(&mut self, len: usize) {
        if len > self.len {
            self.len = len;
            self.words.resize(words_for(len), 0);
        }
    }

    /// In-place XOR; the result takes the longer of the two lengths.
    pub fn xor_assign_padded(&mut self, other: &BitBlock) {
        self.pad_to(other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    /// Serialized form: 8-byte little-endian bit length, then the packed
    /// bytes (bit `i` in byte `i / 8` at position `i % 8`), final partial
    /// byte zero in its high bits.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(8 + nbytes);
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        for i in 0..nbytes {
            out.push((self.words[i / 8] >> (8 * (i % 8))) as u8);
        }
        out
    }

    /// Inverse of [`to_bytes`](Self::to_bytes). Returns the block and the
    /// number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let header: [u8; 8] = bytes
            .get(..8)
            .and_then(|h| h.try_into().ok())
            .ok_or_else(|| param("bit block header truncated"))?;
        let len = usize::try_from(u64::from_le_bytes(header))
            .map_err(|_| param("bit block length does not fit in memory"))?;
        let nbytes = len.div_ceil(8);
        let body = bytes
            .get(8..8 + nbytes)
            .ok_or_else(|| param("bit block body truncated"))?;
        let mut block = Self::zeros(len);
        for (i, byte) in body.iter().enumerate() {
            block.words[i / 8] |= u64::from(*byte) << (8 * (i % 8));
        }
        if block.words.last().is_some_and(|w| {
            let used = len % WORD;
            used != 0 && w >> used != 0
        }) {
            return Err(param("bit block has nonzero padding bits"));
        }
        Ok((block, 8 + nbytes))
    }

    fn clear_tail(&mut self) {
        let used = self.len % WORD;
        if used != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << used) - 1;
            }
        }
    }
}

/// XOR of two blocks, the shorter operand zero-padded on the right.
pub fn xor_pad(a: &BitBlock, b: &BitBlock) -> BitBlock {
    let mut out = a.clone();
    out.xor_assign_padded(b);
    out
}

impl fmt::Debug for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitBlock({self})")
        } else {
            write!(f, "BitBlock(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl fmt::Display for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn b(s: &str) -> BitBlock {
        BitBlock::parse(s).unwrap()
    }

    fn naive_xor(a: &BitBlock, c: &BitBlock) -> BitBlock {
        let n = a.len().max(c.len());
        BitBlock::from_bools((0..n).map(|i| {
            let x = i < a.len() && a.get(i);
            let y = i < c.len() && c.get(i);
            x ^ y
        }))
    }

    #[test]
    fn xor_examples() {
        assert_eq!(xor_pad(&b("1011"), &b("1011")), b("0000"));
        assert_eq!(xor_pad(&b("101"), &BitBlock::new()), b("101"));
        assert_eq!(xor_pad(&b("11"), &b("1001")), b("0101"));
        assert_eq!(naive_xor(&b("11"), &b("1001")), b("0101"));
    }

    #[test]
    fn slice_crosses_word_boundary() {
        let mut block = BitBlock::zeros(200);
        for i in (0..200).step_by(3) {
            block.set(i, true);
        }
        let s = block.slice(62..131);
        assert_eq!(s.len(), 69);
        for i in 0..69 {
            assert_eq!(s.get(i), (62 + i) % 3 == 0);
        }
    }

    #[test]
    fn serialization_layout() {
        let block = b("1000000011");
        let bytes = block.to_bytes();
        assert_eq!(
            bytes,
            vec![10, 0, 0, 0, 0, 0, 0, 0, 0b0000_0001, 0b0000_0011]
        );
        assert_eq!(BitBlock::from_bytes(&bytes).unwrap(), (block, 10));
        assert_eq!(BitBlock::new().to_bytes(), vec![0; 8]);
    }

    #[test]
    fn rejects_dirty_padding() {
        let bytes = [3, 0, 0, 0, 0, 0, 0, 0, 0b1000_0000];
        assert!(BitBlock::from_bytes(&bytes).is_err());
        assert!(BitBlock::from_bytes(&[1, 0, 0]).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(BitBlock::parse("10x").is_err());
    }

    fn arb_block() -> impl Strategy<Value = BitBlock> {
        proptest::collection::vec(any::<bool>(), 0..300).prop_map(BitBlock::from_bools)
    }

    proptest! {
        #[test]
        fn xor_matches_naive(a in arb_block(), c in arb_block()) {
            prop_assert_eq!(xor_pad(&a, &c), naive_xor(&a, &c));
        }

        #[test]
        fn xor_undo_recovers_prefix(a in arb_block(), c in arb_block()) {
            let mut back = xor_pad(&xor_pad(&a, &c), &c);
            back.truncate(a.len());
            prop_assert_eq!(back, a);
        }

        #[test]
        fn xor_commutes_and_associates(a in arb_block(), c in arb_block(), d in arb_block()) {
            prop_assert_eq!(xor_pad(&a, &c), xor_pad(&c, &a));
            prop_assert_eq!(xor_pad(&xor_pad(&a, &c), &d), xor_pad(&a, &xor_pad(&c, &d)));
        }

        #[test]
        fn bytes_round_trip(a in arb_block()) {
            let bytes = a.to_bytes();
            prop_assert_eq!(bytes.len(), 8 + a.len().div_ceil(8));
            prop_assert_eq!(BitBlock::from_bytes(&bytes).unwrap(), (a, bytes.len()));
        }

        #[test]
        fn slice_and_concat_invert(a in arb_block(), cut in 0usize..300) {
            let cut = cut.min(a.len());
            let joined = BitBlock::concat([&a.slice(0..cut), &a.slice(cut..a.len())]);
            prop_assert_eq!(joined, a);
        }
    }
}
