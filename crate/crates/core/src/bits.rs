//! Fixed-length bit vectors.
//!
//! Bit `0` is the first (most significant) bit of the vector when it is
//! viewed as a big-endian string. Unused high bits of the last storage word
//! are always zero, so equality and hashing are structural.

use std::fmt;

use rand::Rng;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits {
    len: usize,
    words: Vec<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl Bits {
    pub fn zeros(len: usize) -> Self {
        Bits { len, words: vec![0; words_for(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Bits { len, words: vec![u64::MAX; words_for(len)] };
        b.trim();
        b
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut out = Bits::zeros(0);
        for b in bits {
            out.push(b);
        }
        out
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_uint(value: u64, width: usize) -> Self {
        let mut out = Bits::zeros(0);
        out.push_uint(value, width);
        out
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut b = Bits { len, words: (0..words_for(len)).map(|_| rng.gen()).collect() };
        b.trim();
        b
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Option<Self> {
        let mut out = Bits::zeros(0);
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => return None,
            }
        }
        Some(out)
    }

    /// Storage words; bit `i` lives at bit `i % 64` of word `i / 64`.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn push_uint(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        for j in (0..width).rev() {
            self.push((value >> j) & 1 == 1);
        }
    }

    pub fn extend_from(&mut self, other: &Bits) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Reads `width` bits starting at `start` as a big-endian integer.
    pub fn read_uint(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64);
        (start..start + width).fold(0u64, |acc, i| (acc << 1) | self.get(i) as u64)
    }

    pub fn slice(&self, start: usize, len: usize) -> Bits {
        Bits::from_bools((start..start + len).map(|i| self.get(i)))
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        self.zip_words(other, |a, b| a ^ b)
    }

    pub fn and(&self, other: &Bits) -> Bits {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Bits) -> Bits {
        self.zip_words(other, |a, b| a | b)
    }

    pub fn not(&self) -> Bits {
        let mut b = Bits { len: self.len, words: self.words.iter().map(|w| !w).collect() };
        b.trim();
        b
    }

    /// Big-endian byte encoding; the final byte is zero-padded on the right.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    /// Inverse of [`Bits::to_bytes`]. Returns `None` if `bytes` is too short.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Option<Bits> {
        if bytes.len() < len.div_ceil(8) {
            return None;
        }
        Some(Bits::from_bools((0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0)))
    }

    fn zip_words(&self, other: &Bits, f: impl Fn(u64, u64) -> u64) -> Bits {
        assert_eq!(self.len, other.len, "bit length mismatch");
        Bits {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    fn trim(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}
