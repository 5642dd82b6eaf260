//! IFC GlobalId codec: 128 bits written as 22 base-64 digits using the
//! IFC alphabet, most significant digit first.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub const ALPHABET: &[u8; 64] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$";

pub const GUID_LEN: usize = 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuidError {
    #[error("GlobalId must be 22 characters, got {0}")]
    Length(usize),
    #[error("invalid GlobalId character {0:?} at position {1}")]
    Character(char, usize),
    #[error("GlobalId first character must be 0-3, got {0:?}")]
    Overflow(char),
}

pub fn encode(bits: u128) -> String {
    let mut out = [0u8; GUID_LEN];
    let mut rest = bits;
    for slot in out.iter_mut().rev() {
        *slot = ALPHABET[(rest & 63) as usize];
        rest >>= 6;
    }
    // 22 * 6 = 132 bits of room, so the top digit only ever holds 2 bits
    debug_assert_eq!(rest, 0);
    String::from_utf8(out.to_vec()).expect("ascii alphabet")
}

fn digit(c: u8) -> Option<u128> {
    let v = match c {
        b'0'..=b'9' => c - b'0',
        b'A'..=b'Z' => c - b'A' + 10,
        b'a'..=b'z' => c - b'a' + 36,
        b'_' => 62,
        b'$' => 63,
        _ => return None,
    };
    Some(v as u128)
}

pub fn decode(s: &str) -> Result<u128, GuidError> {
    let bytes = s.as_bytes();
    if bytes.len() != GUID_LEN || s.chars().count() != GUID_LEN {
        return Err(GuidError::Length(s.chars().count()));
    }
    let mut acc: u128 = 0;
    for (i, &c) in bytes.iter().enumerate() {
        let d = digit(c).ok_or(GuidError::Character(c as char, i))?;
        if i == 0 && d > 3 {
            return Err(GuidError::Overflow(c as char));
        }
        acc = (acc << 6) | d;
    }
    Ok(acc)
}

pub fn is_valid(s: &str) -> bool {
    decode(s).is_ok()
}

/// Source of fresh GlobalIds. Either OS-random, or a seeded stream so that
/// repeated requests produce identical models.
pub struct GuidGenerator {
    rng: ChaCha20Rng,
}

impl GuidGenerator {
    pub fn random() -> Self {
        Self { rng: ChaCha20Rng::from_entropy() }
    }

    pub fn seeded(seed: [u8; 32]) -> Self {
        Self { rng: ChaCha20Rng::from_seed(seed) }
    }

    pub fn next_bits(&mut self) -> u128 {
        let mut buf = [0u8; 16];
        self.rng.fill_bytes(&mut buf);
        u128::from_be_bytes(buf)
    }

    pub fn next_guid(&mut self) -> String {
        encode(self.next_bits())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// A fresh random GlobalId.
pub fn new_guid() -> String {
    encode(rand::thread_rng().gen())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_max() {
        assert_eq!(encode(0), "0000000000000000000000");
        assert_eq!(encode(u128::MAX), "3$$$$$$$$$$$$$$$$$$$$$");
        assert_eq!(decode("3$$$$$$$$$$$$$$$$$$$$$").unwrap(), u128::MAX);
    }

    #[test]
    fn malformed() {
        assert_eq!(decode("abc"), Err(GuidError::Length(3)));
        assert_eq!(decode("4000000000000000000000"), Err(GuidError::Overflow('4')));
        assert!(matches!(decode("000000000000000000000-"), Err(GuidError::Character('-', 21))));
        assert!(decode("00000000000000000000é").is_err());
    }

    #[test]
    fn fixture_guid_round_trips() {
        let g = "2AyG2X0sb16Bjd4gQc07yZ";
        assert_eq!(encode(decode(g).unwrap()), g);
    }

    #[test]
    fn seeded_is_reproducible() {
        let mut a = GuidGenerator::seeded([7; 32]);
        let mut b = GuidGenerator::seeded([7; 32]);
        for _ in 0..10 {
            let g = a.next_guid();
            assert_eq!(g, b.next_guid());
            assert!(is_valid(&g));
        }
    }
}
