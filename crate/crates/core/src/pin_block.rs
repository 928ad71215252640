//! ISO 9564 format 0 PIN blocks.

use std::fmt;

use crate::error::{Error, HexField};

pub const PIN_BLOCK_LEN: usize = 8;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PinBlock([u8; PIN_BLOCK_LEN]);

impl PinBlock {
    pub const fn from_bytes(raw: [u8; PIN_BLOCK_LEN]) -> Self {
        Self(raw)
    }

    pub fn from_hex(hex: &str) -> Result<Self, Error> {
        Ok(Self(crate::hexfmt::decode_fixed(hex, HexField::PinBlock)?))
    }

    pub fn as_bytes(&self) -> &[u8; PIN_BLOCK_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        crate::hexfmt::encode(&self.0)
    }

    /// Checks the part of the block that does not depend on the PAN: control
    /// nibble 0, PIN length 4 to 12, and the first two PIN digits.
    pub fn check_structure(&self) -> Result<(), Error> {
        let nibbles = nibbles(&self.0);
        if nibbles[0] != 0 || !(4..=12).contains(&nibbles[1]) {
            return Err(Error::MalformedBlock);
        }
        if nibbles[2..4].iter().any(|&n| n > 9) {
            return Err(Error::MalformedBlock);
        }
        Ok(())
    }
}

impl fmt::Debug for PinBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PinBlock(..)")
    }
}

pub fn encode_iso0(pin: &str, pan: &str) -> Result<PinBlock, Error> {
    if !(4..=12).contains(&pin.len()) || !is_digits(pin) {
        return Err(Error::BadPinLength);
    }
    let pan_field = pan_field(pan)?;

    let mut pin_field = [0xFu8; 16];
    pin_field[0] = 0;
    pin_field[1] = pin.len() as u8;
    for (slot, digit) in pin_field[2..].iter_mut().zip(pin.bytes()) {
        *slot = digit - b'0';
    }

    let mut out = pack(&pin_field);
    for (o, p) in out.iter_mut().zip(pack(&pan_field)) {
        *o ^= p;
    }
    Ok(PinBlock(out))
}

pub fn decode_iso0(block: &PinBlock, pan: &str) -> Result<String, Error> {
    let pan_field = pack(&pan_field(pan)?);
    let mut clear = block.0;
    for (c, p) in clear.iter_mut().zip(pan_field) {
        *c ^= p;
    }
    let nibbles = nibbles(&clear);
    if nibbles[0] != 0 {
        return Err(Error::MalformedBlock);
    }
    let len = usize::from(nibbles[1]);
    if !(4..=12).contains(&len) {
        return Err(Error::MalformedBlock);
    }
    let (digits, fill) = nibbles[2..].split_at(len);
    if digits.iter().any(|&d| d > 9) || fill.iter().any(|&f| f != 0xF) {
        return Err(Error::MalformedBlock);
    }
    Ok(digits.iter().map(|&d| char::from(b'0' + d)).collect())
}

/// Four zero nibbles then the rightmost twelve PAN digits, check digit excluded.
fn pan_field(pan: &str) -> Result<[u8; 16], Error> {
    if pan.len() < 13 || !is_digits(pan) {
        return Err(Error::BadPan);
    }
    let window = &pan.as_bytes()[pan.len() - 13..pan.len() - 1];
    let mut field = [0u8; 16];
    for (slot, digit) in field[4..].iter_mut().zip(window) {
        *slot = digit - b'0';
    }
    Ok(field)
}

fn is_digits(s: &str) -> bool {
    s.bytes().all(|b| b.is_ascii_digit())
}

fn pack(nibbles: &[u8; 16]) -> [u8; 8] {
    let mut out = [0u8; 8];
    for (o, pair) in out.iter_mut().zip(nibbles.chunks_exact(2)) {
        *o = (pair[0] << 4) | pair[1];
    }
    out
}

fn nibbles(bytes: &[u8; 8]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, b) in bytes.iter().enumerate() {
        out[2 * i] = b >> 4;
        out[2 * i + 1] = b & 0xF;
    }
    out
}
