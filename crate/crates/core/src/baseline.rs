//! The predecessor schemes: one fixed key per terminal, and Master/Session
//! where a pre-shared key-encrypting key wraps a fresh session key per
//! transaction.

use std::collections::HashMap;

use rand::{CryptoRng, RngCore};

use crate::error::Error;
use crate::ksn::Ksn;
use crate::message::{SchemeTag, TransactionMessage};
use crate::pin_block::PinBlock;
use crate::tdea::{pad, unpad, TdeaKey, BLOCK_LEN, KEY_LEN};

/// CBC under the fixed key, same padding as DUKPT data.
pub fn fixed_encrypt(key: &TdeaKey, payload: &[u8]) -> Result<Vec<u8>, Error> {
    if payload.is_empty() {
        return Err(Error::EmptyPlaintext);
    }
    Ok(key.cbc_encrypt(&pad(payload)))
}

pub fn fixed_decrypt(key: &TdeaKey, ciphertext: &[u8]) -> Result<Vec<u8>, Error> {
    if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(BLOCK_LEN) {
        return Err(Error::DecryptFailed);
    }
    unpad(&key.cbc_decrypt(ciphertext))
        .map(<[u8]>::to_vec)
        .ok_or(Error::DecryptFailed)
}

#[derive(Debug, Clone)]
pub struct FixedKeyTerminal {
    key: TdeaKey,
    terminal_id: Ksn,
}

impl FixedKeyTerminal {
    /// `terminal_id` is carried in the KSN field of every message; its
    /// counter bits are cleared.
    pub fn new(key: TdeaKey, terminal_id: Ksn) -> Self {
        Self {
            key,
            terminal_id: terminal_id.base(),
        }
    }

    pub fn terminal_id(&self) -> Ksn {
        self.terminal_id
    }

    pub fn encrypt(&self, payload: &[u8]) -> Result<Vec<u8>, Error> {
        fixed_encrypt(&self.key, payload)
    }

    pub fn build_message(
        &self,
        pin: Option<&PinBlock>,
        data: Option<&[u8]>,
    ) -> Result<TransactionMessage, Error> {
        if pin.is_none() && data.is_none() {
            return Err(Error::EmptyMessage);
        }
        Ok(TransactionMessage {
            ksn: self.terminal_id,
            encrypted_pin_block: pin.map(|p| self.key.encrypt_block(p.as_bytes())),
            encrypted_data: data.map(|d| self.encrypt(d)).transpose()?,
            scheme: SchemeTag::Fixed,
            wrapped_session_key: None,
        })
    }
}

#[derive(Debug)]
pub struct MasterSessionContext {
    kek: TdeaKey,
    current_session_key: Option<TdeaKey>,
}

impl MasterSessionContext {
    pub fn new(kek: TdeaKey) -> Self {
        Self {
            kek,
            current_session_key: None,
        }
    }

    pub fn current_session_key(&self) -> Option<&TdeaKey> {
        self.current_session_key.as_ref()
    }

    /// Draws a fresh session key and wraps it under the KEK.
    pub fn wrap_session<R: RngCore + CryptoRng>(
        &mut self,
        rng: &mut R,
    ) -> ([u8; KEY_LEN], TdeaKey) {
        let mut raw = [0u8; KEY_LEN];
        rng.fill_bytes(&mut raw);
        let session = TdeaKey::from_bytes(raw);
        let wrapped = wrap(&self.kek, &session);
        self.current_session_key = Some(session.clone());
        (wrapped, session)
    }

    /// Rekeys, then encrypts the payloads under the new session key.
    pub fn build_message<R: RngCore + CryptoRng>(
        &mut self,
        rng: &mut R,
        terminal_id: Ksn,
        pin: Option<&PinBlock>,
        data: Option<&[u8]>,
    ) -> Result<TransactionMessage, Error> {
        if pin.is_none() && data.is_none() {
            return Err(Error::EmptyMessage);
        }
        let (wrapped, session) = self.wrap_session(rng);
        Ok(TransactionMessage {
            ksn: terminal_id.base(),
            encrypted_pin_block: pin.map(|p| session.encrypt_block(p.as_bytes())),
            encrypted_data: data.map(|d| fixed_encrypt(&session, d)).transpose()?,
            scheme: SchemeTag::MasterSession,
            wrapped_session_key: Some(wrapped),
        })
    }
}

pub fn ms_wrap_session<R: RngCore + CryptoRng>(
    ctx: &mut MasterSessionContext,
    rng: &mut R,
) -> ([u8; KEY_LEN], TdeaKey) {
    ctx.wrap_session(rng)
}

/// ECB over both halves of the session key.
pub fn ms_unwrap_session(kek: &TdeaKey, wrapped: &[u8; KEY_LEN]) -> TdeaKey {
    let mut out = [0u8; KEY_LEN];
    for (dst, src) in out
        .chunks_exact_mut(BLOCK_LEN)
        .zip(wrapped.chunks_exact(BLOCK_LEN))
    {
        dst.copy_from_slice(&kek.decrypt_block(src.try_into().unwrap()));
    }
    TdeaKey::from_bytes(out)
}

fn wrap(kek: &TdeaKey, session: &TdeaKey) -> [u8; KEY_LEN] {
    let mut out = [0u8; KEY_LEN];
    for (dst, src) in out
        .chunks_exact_mut(BLOCK_LEN)
        .zip(session.as_bytes().chunks_exact(BLOCK_LEN))
    {
        dst.copy_from_slice(&kek.encrypt_block(src.try_into().unwrap()));
    }
    out
}

/// Clear payloads recovered by a baseline host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaselineClear {
    pub pin_block: Option<PinBlock>,
    pub data: Option<Vec<u8>>,
    pub session_key: Option<TdeaKey>,
}

/// Host side for FIXED and MS messages: one key per terminal identifier.
#[derive(Debug, Default)]
pub struct BaselineHost {
    fixed_keys: HashMap<u64, TdeaKey>,
    keks: HashMap<u64, TdeaKey>,
}

impl BaselineHost {
    pub fn add_fixed_terminal(&mut self, terminal_id: Ksn, key: TdeaKey) {
        self.fixed_keys.insert(terminal_id.initial_id(), key);
    }

    pub fn add_master_session_terminal(&mut self, terminal_id: Ksn, kek: TdeaKey) {
        self.keks.insert(terminal_id.initial_id(), kek);
    }

    pub fn process_message(&self, msg: &TransactionMessage) -> Result<BaselineClear, Error> {
        msg.validate()?;
        let id = msg.ksn.initial_id();
        let (key, session_key) = match msg.scheme {
            SchemeTag::Fixed => (
                self.fixed_keys
                    .get(&id)
                    .ok_or(Error::UnknownKeySet(msg.ksn.key_set_id()))?
                    .clone(),
                None,
            ),
            SchemeTag::MasterSession => {
                let kek = self
                    .keks
                    .get(&id)
                    .ok_or(Error::UnknownKeySet(msg.ksn.key_set_id()))?;
                let wrapped = msg
                    .wrapped_session_key
                    .as_ref()
                    .ok_or(Error::DecryptFailed)?;
                let session = ms_unwrap_session(kek, wrapped);
                (session.clone(), Some(session))
            }
            SchemeTag::Dukpt => return Err(Error::UnsupportedScheme(SchemeTag::Dukpt)),
        };
        let pin_block = msg
            .encrypted_pin_block
            .map(|ct| {
                let block = PinBlock::from_bytes(key.decrypt_block(&ct));
                block.check_structure().map(|()| block)
            })
            .transpose()
            .map_err(|_| Error::DecryptFailed)?;
        let data = msg
            .encrypted_data
            .as_deref()
            .map(|ct| fixed_decrypt(&key, ct))
            .transpose()?;
        Ok(BaselineClear {
            pin_block,
            data,
            session_key,
        })
    }
}
