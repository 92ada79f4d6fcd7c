//! XOR secret sharing of bit vectors.

use rand::Rng;

use super::SmpcError;
use crate::bits::Bits;

/// One party's XOR share of a bit vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BitShares(pub Bits);

impl BitShares {
    pub fn bits(&self) -> &Bits {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Splits `value` with a freshly drawn nonce. The first share is the nonce.
pub fn share<R: Rng + ?Sized>(value: &Bits, rng: &mut R) -> (BitShares, BitShares) {
    let nonce = Bits::random(value.len(), rng);
    share_with_nonce(value, nonce)
}

pub fn share_with_nonce(value: &Bits, nonce: Bits) -> (BitShares, BitShares) {
    let masked = value.xor(&nonce);
    (BitShares(nonce), BitShares(masked))
}

pub fn reconstruct(a: &BitShares, b: &BitShares) -> Result<Bits, SmpcError> {
    if a.len() != b.len() {
        return Err(SmpcError::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.0.xor(&b.0))
}
