//! The DUKPT key hierarchy: BDK to initial key, initial key to transaction
//! keys, and transaction keys to usage variants.

use crate::error::Error;
use crate::ksn::{check_weight, Ksn, COUNTER_BITS};
use crate::tdea::{des_encrypt, TdeaKey, DERIVATION_MASK, KEY_LEN};

const PIN_VARIANT_MASK: [u8; KEY_LEN] = [0, 0, 0, 0, 0, 0, 0, 0xFF, 0, 0, 0, 0, 0, 0, 0, 0xFF];
const DATA_VARIANT_MASK: [u8; KEY_LEN] = [0, 0, 0, 0, 0, 0xFF, 0, 0, 0, 0, 0, 0, 0, 0xFF, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyRole {
    BaseDerivation,
    Initial,
    Transaction,
    PinVariant,
    DataVariant,
}

/// Key material tagged with the role it was derived for.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DerivedKey {
    key: TdeaKey,
    role: KeyRole,
}

impl DerivedKey {
    pub(crate) fn new(key: TdeaKey, role: KeyRole) -> Self {
        Self { key, role }
    }

    pub fn base_derivation(bdk: TdeaKey) -> Self {
        Self::new(bdk, KeyRole::BaseDerivation)
    }

    pub fn key(&self) -> &TdeaKey {
        &self.key
    }

    pub fn role(&self) -> KeyRole {
        self.role
    }

    pub fn into_key(self) -> TdeaKey {
        self.key
    }

    pub(crate) fn expect_role(&self, expected: KeyRole) -> Result<(), Error> {
        if self.role != expected {
            return Err(Error::WrongRole {
                expected,
                actual: self.role,
            });
        }
        Ok(())
    }
}

/// Derives the terminal's initial key (IPEK) from the BDK and initial KSN.
///
/// Counter bits in `initial_ksn` are ignored.
pub fn derive_ipek(bdk: &TdeaKey, initial_ksn: Ksn) -> DerivedKey {
    let block = initial_ksn.base().leftmost8();
    let mut out = [0u8; KEY_LEN];
    out[..8].copy_from_slice(&bdk.encrypt_block(&block));
    out[8..].copy_from_slice(&bdk.xor(&DERIVATION_MASK).encrypt_block(&block));
    DerivedKey::new(TdeaKey::from_bytes(out), KeyRole::Initial)
}

/// One non-reversible key generation step.
///
/// Each half of the output is `DES(k.left, M ^ k.right) ^ k.right` where `M`
/// is the rightmost eight KSN bytes; the left half uses the masked key.
pub fn nrkgp(current_key: &TdeaKey, ksn: Ksn) -> TdeaKey {
    let message = ksn.rightmost8();
    let half = |key: &TdeaKey| {
        let right = key.right_half();
        let mut block = message;
        xor_into(&mut block, &right);
        let mut block = des_encrypt(&key.left_half(), &block);
        xor_into(&mut block, &right);
        block
    };
    let mut out = [0u8; KEY_LEN];
    out[..8].copy_from_slice(&half(&current_key.xor(&DERIVATION_MASK)));
    out[8..].copy_from_slice(&half(current_key));
    TdeaKey::from_bytes(out)
}

/// Derives the key for `ksn` directly from the initial key, folding
/// [`nrkgp`] over the counter's set bits from most to least significant.
///
/// A zero counter yields the initial key itself.
pub fn derive_key_chain(ipek: &TdeaKey, ksn: Ksn) -> Result<DerivedKey, Error> {
    let counter = ksn.counter();
    check_weight(counter)?;
    if counter == 0 {
        return Ok(DerivedKey::new(ipek.clone(), KeyRole::Initial));
    }
    let mut key = ipek.clone();
    let mut partial = 0;
    for bit in (0..COUNTER_BITS).rev().map(|b| 1u32 << b) {
        if counter & bit != 0 {
            partial |= bit;
            key = nrkgp(&key, ksn.with_counter(partial));
        }
    }
    Ok(DerivedKey::new(key, KeyRole::Transaction))
}

pub fn variant_pin_key(transaction_key: &DerivedKey) -> Result<DerivedKey, Error> {
    transaction_key.expect_role(KeyRole::Transaction)?;
    Ok(DerivedKey::new(
        transaction_key.key.xor(&PIN_VARIANT_MASK),
        KeyRole::PinVariant,
    ))
}

pub fn variant_data_key(transaction_key: &DerivedKey) -> Result<DerivedKey, Error> {
    transaction_key.expect_role(KeyRole::Transaction)?;
    Ok(DerivedKey::new(
        transaction_key.key.xor(&DATA_VARIANT_MASK),
        KeyRole::DataVariant,
    ))
}

fn xor_into(dst: &mut [u8; 8], src: &[u8; 8]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d ^= s;
    }
}
