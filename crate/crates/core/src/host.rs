//! Acquirer-side DUKPT processing.
//!
//! The registry maps key-set identifiers (the top 24 KSN bits) to BDKs and
//! tracks the last accepted counter per device (the full 59-bit initial ID).
//! The in-memory BDK table stands in for an HSM.

use std::collections::HashMap;
use std::sync::{Mutex, RwLock};

use crate::error::Error;
use crate::hierarchy::{derive_ipek, derive_key_chain, DerivedKey};
use crate::ksn::{Ksn, KEY_SET_BITS};
use crate::message::{HostReply, HostStatus, SchemeTag, TransactionMessage};
use crate::payload::{decrypt_data, decrypt_pin};
use crate::pin_block::PinBlock;
use crate::tdea::TdeaKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplayPolicy {
    /// Accept a device's message only if its counter exceeds every counter
    /// previously accepted from that device.
    #[default]
    StrictlyIncreasing,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HostVerdict {
    pub status: HostStatus,
    pub clear_pin_block: Option<PinBlock>,
    pub clear_data: Option<Vec<u8>>,
    pub derived_counter: u32,
}

impl HostVerdict {
    fn rejected(status: HostStatus, counter: u32) -> Self {
        Self {
            status,
            clear_pin_block: None,
            clear_data: None,
            derived_counter: counter,
        }
    }

    pub fn is_accepted(&self) -> bool {
        self.status == HostStatus::Accepted
    }

    pub fn reply(&self) -> HostReply {
        match self.status {
            HostStatus::Accepted => HostReply::Ok {
                counter: self.derived_counter,
            },
            other => HostReply::Rejected(other),
        }
    }
}

#[derive(Debug, Default)]
pub struct HostRegistry {
    bdks: RwLock<HashMap<u32, TdeaKey>>,
    device_log: Mutex<HashMap<u64, u32>>,
    policy: ReplayPolicy,
}

impl HostRegistry {
    pub fn new(policy: ReplayPolicy) -> Self {
        Self {
            policy,
            ..Self::default()
        }
    }

    pub fn policy(&self) -> ReplayPolicy {
        self.policy
    }

    pub fn register_bdk(
        &self,
        key_set_id: u32,
        bdk: TdeaKey,
        overwrite: bool,
    ) -> Result<(), Error> {
        if key_set_id >> KEY_SET_BITS != 0 {
            return Err(Error::Parse(format!(
                "key set id {key_set_id:#X} exceeds {KEY_SET_BITS} bits"
            )));
        }
        let mut bdks = self.bdks.write().unwrap();
        if !overwrite && bdks.contains_key(&key_set_id) {
            return Err(Error::DuplicateKeySet(key_set_id));
        }
        bdks.insert(key_set_id, bdk);
        Ok(())
    }

    /// Re-derives the transaction key for `ksn` without touching replay state.
    pub fn rederive_key(&self, ksn: Ksn) -> Result<DerivedKey, Error> {
        let ipek = {
            let bdks = self.bdks.read().unwrap();
            let bdk = bdks
                .get(&ksn.key_set_id())
                .ok_or(Error::UnknownKeySet(ksn.key_set_id()))?;
            derive_ipek(bdk, ksn)
        };
        derive_key_chain(ipek.key(), ksn)
    }

    pub fn last_accepted(&self, initial_id: u64) -> Option<u32> {
        self.device_log.lock().unwrap().get(&initial_id).copied()
    }

    /// Processes one DUKPT message. Only non-DUKPT or structurally invalid
    /// messages produce an `Err`; every policy outcome is a verdict.
    pub fn process_message(&self, msg: &TransactionMessage) -> Result<HostVerdict, Error> {
        if msg.scheme != SchemeTag::Dukpt {
            return Err(Error::UnsupportedScheme(msg.scheme));
        }
        let counter = msg.ksn.counter();
        match msg.validate() {
            Ok(()) => {}
            Err(Error::CounterOverweight { .. }) => {
                return Ok(HostVerdict::rejected(
                    HostStatus::OverweightCounterRejected,
                    counter,
                ))
            }
            Err(e) => return Err(e),
        }
        if counter == 0 {
            // Counter zero names the initial key, never a transaction key.
            return Ok(HostVerdict::rejected(HostStatus::DecryptFailed, counter));
        }
        let key = match self.rederive_key(msg.ksn) {
            Ok(k) => k,
            Err(Error::UnknownKeySet(_)) => {
                return Ok(HostVerdict::rejected(HostStatus::UnknownKeySet, counter))
            }
            Err(e) => return Err(e),
        };

        let decrypted = (|| {
            let pin = msg
                .encrypted_pin_block
                .map(|ct| {
                    let block = decrypt_pin(&key, &ct)?;
                    block.check_structure().map(|()| block)
                })
                .transpose()?;
            let data = msg
                .encrypted_data
                .as_deref()
                .map(|ct| decrypt_data(&key, ct))
                .transpose()?;
            Ok::<_, Error>((pin, data))
        })();
        drop(key);
        let Ok((clear_pin_block, clear_data)) = decrypted else {
            return Ok(HostVerdict::rejected(HostStatus::DecryptFailed, counter));
        };

        {
            let mut log = self.device_log.lock().unwrap();
            let last = log.entry(msg.ksn.initial_id()).or_insert(0);
            if self.policy == ReplayPolicy::StrictlyIncreasing && counter <= *last {
                return Ok(HostVerdict::rejected(HostStatus::ReplayRejected, counter));
            }
            *last = (*last).max(counter);
        }

        Ok(HostVerdict {
            status: HostStatus::Accepted,
            clear_pin_block,
            clear_data,
            derived_counter: counter,
        })
    }

    /// Wire-level entry point: one message line in, one reply line out.
    pub fn process_wire(&self, line: &str) -> String {
        let reply = match TransactionMessage::from_wire(line) {
            Ok(msg) => match self.process_message(&msg) {
                Ok(verdict) => verdict.reply(),
                Err(_) => HostReply::Malformed,
            },
            Err(_) => HostReply::Malformed,
        };
        reply.to_wire()
    }
}
