//! Double-length TDEA keys and the block operations built on them.

use std::fmt;

use des::cipher::{BlockDecrypt, BlockEncrypt, KeyInit};
use des::{Des, TdesEde2};
use zeroize::{Zeroize, ZeroizeOnDrop};

use crate::error::{Error, HexField};

pub const BLOCK_LEN: usize = 8;
pub const KEY_LEN: usize = 16;

/// Mask applied to a key to obtain the second key of each derivation pair.
pub(crate) const DERIVATION_MASK: [u8; KEY_LEN] = [
    0xC0, 0xC0, 0xC0, 0xC0, 0x00, 0x00, 0x00, 0x00, 0xC0, 0xC0, 0xC0, 0xC0, 0x00, 0x00, 0x00, 0x00,
];

/// A double-length (16-byte) triple-DES key.
///
/// Key material is overwritten with zeros when the value is dropped.
#[derive(Clone, Zeroize, ZeroizeOnDrop)]
pub struct TdeaKey([u8; KEY_LEN]);

impl TdeaKey {
    pub const fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        Self(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, Error> {
        let bytes: [u8; KEY_LEN] = bytes.try_into().map_err(|_| Error::WrongLength {
            field: HexField::Key,
            expected: KEY_LEN * 2,
            actual: bytes.len() * 2,
        })?;
        Ok(Self(bytes))
    }

    /// Parses 32 hex characters, either case.
    pub fn from_hex(hex: &str) -> Result<Self, Error> {
        Ok(Self(crate::hexfmt::decode_fixed(hex, HexField::Key)?))
    }

    pub fn to_hex(&self) -> String {
        crate::hexfmt::encode(&self.0)
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn left_half(&self) -> [u8; BLOCK_LEN] {
        self.0[..BLOCK_LEN].try_into().unwrap()
    }

    pub fn right_half(&self) -> [u8; BLOCK_LEN] {
        self.0[BLOCK_LEN..].try_into().unwrap()
    }

    pub fn xor(&self, mask: &[u8; KEY_LEN]) -> Self {
        let mut out = [0u8; KEY_LEN];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(mask)) {
            *o = a ^ b;
        }
        Self(out)
    }

    /// Encrypts one block with two-key TDEA (EDE).
    pub fn encrypt_block(&self, block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        let mut buf = (*block).into();
        self.cipher().encrypt_block(&mut buf);
        buf.into()
    }

    pub fn decrypt_block(&self, block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
        let mut buf = (*block).into();
        self.cipher().decrypt_block(&mut buf);
        buf.into()
    }

    /// CBC encryption with an all-zero IV. `data` must be block aligned.
    pub fn cbc_encrypt(&self, data: &[u8]) -> Vec<u8> {
        debug_assert_eq!(data.len() % BLOCK_LEN, 0);
        let cipher = self.cipher();
        let mut chain = [0u8; BLOCK_LEN];
        let mut out = Vec::with_capacity(data.len());
        for block in data.chunks_exact(BLOCK_LEN) {
            for (c, b) in chain.iter_mut().zip(block) {
                *c ^= b;
            }
            let mut buf = chain.into();
            cipher.encrypt_block(&mut buf);
            chain = buf.into();
            out.extend_from_slice(&chain);
        }
        out
    }

    pub fn cbc_decrypt(&self, data: &[u8]) -> Vec<u8> {
        debug_assert_eq!(data.len() % BLOCK_LEN, 0);
        let cipher = self.cipher();
        let mut prev = [0u8; BLOCK_LEN];
        let mut out = Vec::with_capacity(data.len());
        for block in data.chunks_exact(BLOCK_LEN) {
            let block: [u8; BLOCK_LEN] = block.try_into().unwrap();
            let mut buf = block.into();
            cipher.decrypt_block(&mut buf);
            let clear: [u8; BLOCK_LEN] = buf.into();
            out.extend(clear.iter().zip(&prev).map(|(c, p)| c ^ p));
            prev = block;
        }
        out
    }

    fn cipher(&self) -> TdesEde2 {
        TdesEde2::new_from_slice(&self.0).expect("16-byte key")
    }
}

/// Single-DES encryption of one block under an 8-byte key.
pub(crate) fn des_encrypt(key: &[u8; BLOCK_LEN], block: &[u8; BLOCK_LEN]) -> [u8; BLOCK_LEN] {
    let cipher = Des::new_from_slice(key).expect("8-byte key");
    let mut buf = (*block).into();
    cipher.encrypt_block(&mut buf);
    buf.into()
}

impl PartialEq for TdeaKey {
    fn eq(&self, other: &Self) -> bool {
        self.0
            .iter()
            .zip(other.0.iter())
            .fold(0u8, |acc, (a, b)| acc | (a ^ b))
            == 0
    }
}

impl Eq for TdeaKey {}

impl std::hash::Hash for TdeaKey {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state);
    }
}

// Key bytes stay out of debug output.
impl fmt::Debug for TdeaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TdeaKey(..)")
    }
}

/// Appends the 0x80 marker and zero-fills to the next block boundary.
pub fn pad(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() + BLOCK_LEN);
    out.extend_from_slice(data);
    out.push(0x80);
    while out.len() % BLOCK_LEN != 0 {
        out.push(0);
    }
    out
}

/// Strips padding added by [`pad`]; `None` if the marker is missing or misplaced.
pub fn unpad(data: &[u8]) -> Option<&[u8]> {
    if data.is_empty() || !data.len().is_multiple_of(BLOCK_LEN) {
        return None;
    }
    let marker = data.iter().rposition(|&b| b != 0)?;
    if data[marker] != 0x80 || data.len() - marker > BLOCK_LEN {
        return None;
    }
    Some(&data[..marker])
}
