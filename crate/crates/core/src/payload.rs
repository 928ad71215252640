//! Payload encryption under the PIN and data variants of a transaction key.
//!
//! PIN blocks are a single TDEA-ECB block. Data is padded with a 0x80 marker
//! and zero fill, then TDEA-CBC encrypted with a zero IV.

use crate::error::Error;
use crate::hierarchy::{variant_data_key, variant_pin_key, DerivedKey};
use crate::pin_block::{PinBlock, PIN_BLOCK_LEN};
use crate::tdea::{pad, unpad, BLOCK_LEN};

pub fn encrypt_pin(
    transaction_key: &DerivedKey,
    clear_pin_block: &PinBlock,
) -> Result<[u8; PIN_BLOCK_LEN], Error> {
    let pin_key = variant_pin_key(transaction_key)?;
    Ok(pin_key.key().encrypt_block(clear_pin_block.as_bytes()))
}

pub fn decrypt_pin(
    transaction_key: &DerivedKey,
    encrypted: &[u8; PIN_BLOCK_LEN],
) -> Result<PinBlock, Error> {
    let pin_key = variant_pin_key(transaction_key)?;
    Ok(PinBlock::from_bytes(pin_key.key().decrypt_block(encrypted)))
}

pub fn encrypt_data(transaction_key: &DerivedKey, plaintext: &[u8]) -> Result<Vec<u8>, Error> {
    let data_key = variant_data_key(transaction_key)?;
    if plaintext.is_empty() {
        return Err(Error::EmptyPlaintext);
    }
    Ok(data_key.key().cbc_encrypt(&pad(plaintext)))
}

pub fn decrypt_data(transaction_key: &DerivedKey, ciphertext: &[u8]) -> Result<Vec<u8>, Error> {
    let data_key = variant_data_key(transaction_key)?;
    if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(BLOCK_LEN) {
        return Err(Error::DecryptFailed);
    }
    let clear = data_key.key().cbc_decrypt(ciphertext);
    unpad(&clear)
        .map(<[u8]>::to_vec)
        .ok_or(Error::DecryptFailed)
}
