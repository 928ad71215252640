//! Terminal-side DUKPT state machine.
//!
//! The terminal keeps one future-key register per counter bit. Register `i`
//! (1-based) always holds the key for a counter whose lowest set bit is bit
//! `i - 1`. Using a key spawns keys for the counters reachable by setting one
//! lower bit, then the used key is erased.

use zeroize::Zeroize;

use crate::error::Error;
use crate::hierarchy::{nrkgp, DerivedKey, KeyRole};
use crate::ksn::{next_counter, remaining_after, Ksn, COUNTER_BITS, MAX_COUNTER_BITS};
use crate::message::{SchemeTag, TransactionMessage};
use crate::payload::{encrypt_data, encrypt_pin};
use crate::pin_block::PinBlock;
use crate::record::Record;
use crate::tdea::TdeaKey;

pub const REGISTER_COUNT: usize = COUNTER_BITS as usize;

#[derive(Clone, Debug, Default)]
pub struct FutureKeyRegister {
    key: Option<TdeaKey>,
    counter: u32,
}

impl FutureKeyRegister {
    pub fn key(&self) -> Option<&TdeaKey> {
        self.key.as_ref()
    }

    /// The counter the stored key belongs to. Meaningless when empty.
    pub fn associated_counter(&self) -> u32 {
        self.counter
    }

    fn store(&mut self, key: TdeaKey, counter: u32) {
        self.key = Some(key);
        self.counter = counter;
    }

    fn erase(&mut self) {
        self.key.zeroize();
        self.counter = 0;
    }
}

/// A terminal's DUKPT state. `Clone` copies the full key state, which is
/// exactly what a device cloning attack does.
#[derive(Clone, Debug)]
pub struct TerminalState {
    ksn: Ksn,
    registers: [FutureKeyRegister; REGISTER_COUNT],
    exhausted: bool,
}

/// Installs the initial key and derives the first batch of future keys.
/// The initial key is consumed and not retained.
pub fn init_terminal(ipek: DerivedKey, initial_ksn: Ksn) -> Result<TerminalState, Error> {
    ipek.expect_role(KeyRole::Initial)?;
    if initial_ksn.counter() != 0 {
        return Err(Error::NonZeroCounter(initial_ksn.counter()));
    }
    let mut registers: [FutureKeyRegister; REGISTER_COUNT] = Default::default();
    for (bit, register) in registers.iter_mut().enumerate() {
        let counter = 1 << bit;
        register.store(
            nrkgp(ipek.key(), initial_ksn.with_counter(counter)),
            counter,
        );
    }
    Ok(TerminalState {
        ksn: initial_ksn,
        registers,
        exhausted: false,
    })
}

impl TerminalState {
    /// The KSN of the most recent transaction (counter 0 before the first).
    pub fn ksn(&self) -> Ksn {
        self.ksn
    }

    pub fn counter(&self) -> u32 {
        self.ksn.counter()
    }

    pub fn initial_id(&self) -> u64 {
        self.ksn.initial_id()
    }

    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn registers(&self) -> &[FutureKeyRegister; REGISTER_COUNT] {
        &self.registers
    }

    pub fn occupied_registers(&self) -> usize {
        self.registers.iter().filter(|r| r.key.is_some()).count()
    }

    /// Every key currently held, with the counter it belongs to.
    pub fn stored_keys(&self) -> impl Iterator<Item = (u32, &TdeaKey)> {
        self.registers
            .iter()
            .filter_map(|r| r.key.as_ref().map(|k| (r.counter, k)))
    }

    pub fn remaining_transactions(&self) -> u64 {
        if self.exhausted {
            0
        } else {
            remaining_after(self.counter())
        }
    }

    /// Advances the counter and releases the key for it.
    pub fn next_transaction_key(&mut self) -> Result<(Ksn, DerivedKey), Error> {
        if self.exhausted {
            return Err(Error::Exhausted);
        }
        let counter = match next_counter(self.counter()) {
            Ok(c) => c,
            Err(e) => {
                self.exhaust();
                return Err(e);
            }
        };
        let slot = counter.trailing_zeros() as usize;
        let key = match &self.registers[slot].key {
            Some(k) if self.registers[slot].counter == counter => k.clone(),
            _ => unreachable!("register {} does not hold counter {counter:#X}", slot + 1),
        };
        let ksn = self.ksn.with_counter(counter);

        // Children would exceed the weight limit at ten set bits.
        if counter.count_ones() < MAX_COUNTER_BITS {
            for child_bit in 0..slot {
                let child = counter | (1 << child_bit);
                self.registers[child_bit].store(nrkgp(&key, ksn.with_counter(child)), child);
            }
        }
        self.registers[slot].erase();
        self.ksn = ksn;
        if remaining_after(counter) == 0 {
            self.exhaust();
        }
        Ok((ksn, DerivedKey::new(key, KeyRole::Transaction)))
    }

    /// Draws one transaction key, encrypts the payloads under its variants
    /// and assembles the message. The key is dropped (and zeroed) on return.
    pub fn build_message(
        &mut self,
        pin: Option<&PinBlock>,
        data: Option<&[u8]>,
    ) -> Result<TransactionMessage, Error> {
        if pin.is_none() && data.is_none() {
            return Err(Error::EmptyMessage);
        }
        if data.is_some_and(<[u8]>::is_empty) {
            return Err(Error::EmptyPlaintext);
        }
        let (ksn, key) = self.next_transaction_key()?;
        Ok(TransactionMessage {
            ksn,
            encrypted_pin_block: pin.map(|p| encrypt_pin(&key, p)).transpose()?,
            encrypted_data: data.map(|d| encrypt_data(&key, d)).transpose()?,
            scheme: SchemeTag::Dukpt,
            wrapped_session_key: None,
        })
    }

    fn exhaust(&mut self) {
        self.exhausted = true;
        self.registers.iter_mut().for_each(FutureKeyRegister::erase);
    }

    /// Serializes the full state as one `key=value` record. Simulator use only.
    pub fn to_snapshot(&self) -> Record {
        let mut record = Record::new();
        record
            .push("ksn", self.ksn)
            .push("exhausted", u8::from(self.exhausted));
        for (i, reg) in self.registers.iter().enumerate() {
            let value = match &reg.key {
                Some(k) => format!("{:06X}:{}", reg.counter, k.to_hex()),
                None => "-".to_owned(),
            };
            record.push(&format!("r{:02}", i + 1), value);
        }
        record
    }

    pub fn from_snapshot(record: &Record) -> Result<Self, Error> {
        let ksn = Ksn::from_hex(record.require("ksn")?)?;
        let exhausted = match record.require("exhausted")? {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("bad exhausted flag `{other}`"))),
        };
        let mut registers: [FutureKeyRegister; REGISTER_COUNT] = Default::default();
        for (i, reg) in registers.iter_mut().enumerate() {
            let value = record.require(&format!("r{:02}", i + 1))?;
            if value == "-" {
                continue;
            }
            let (counter, key) = value
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("bad register value `{value}`")))?;
            let counter = u32::from_str_radix(counter, 16)
                .map_err(|_| Error::Parse(format!("bad register counter `{counter}`")))?;
            if counter.trailing_zeros() as usize != i || counter <= ksn.counter() {
                return Err(Error::Parse(format!(
                    "register {} cannot hold counter {counter:#X}",
                    i + 1
                )));
            }
            reg.store(TdeaKey::from_hex(key)?, counter);
        }
        Ok(TerminalState {
            ksn,
            registers,
            exhausted,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{derive_ipek, derive_key_chain};
    use crate::ksn::parse_ksn;

    fn setup() -> (TdeaKey, Ksn, TerminalState) {
        let bdk = TdeaKey::from_hex("0123456789ABCDEFFEDCBA9876543210").unwrap();
        let ksn = parse_ksn("FFFF9876543210E00000").unwrap();
        let ipek = derive_ipek(&bdk, ksn);
        let raw = ipek.key().clone();
        (raw, ksn, init_terminal(ipek, ksn).unwrap())
    }

    #[test]
    fn init_fills_all_registers_and_drops_ipek() {
        let (ipek, ksn, state) = setup();
        assert_eq!(state.occupied_registers(), 21);
        assert_eq!(state.counter(), 0);
        assert_eq!(
            state.registers()[0].key().unwrap(),
            derive_key_chain(&ipek, ksn.with_counter(1)).unwrap().key()
        );
        assert!(state.stored_keys().all(|(_, k)| *k != ipek));
        assert!(!state.to_snapshot().to_string().contains(&ipek.to_hex()));
    }

    #[test]
    fn init_checks_inputs() {
        let (_, ksn, _) = setup();
        let bdk = TdeaKey::from_hex("0123456789ABCDEFFEDCBA9876543210").unwrap();
        assert_eq!(
            init_terminal(derive_ipek(&bdk, ksn), ksn.with_counter(3)).unwrap_err(),
            Error::NonZeroCounter(3)
        );
        let wrong = DerivedKey::base_derivation(bdk);
        assert!(matches!(
            init_terminal(wrong, ksn),
            Err(Error::WrongRole { .. })
        ));
    }

    #[test]
    fn first_keys_match_direct_derivation() {
        let (ipek, ksn, mut state) = setup();
        for expected_counter in 1..=3 {
            let (k, key) = state.next_transaction_key().unwrap();
            assert_eq!(k.counter(), expected_counter);
            assert_eq!(
                key,
                derive_key_chain(&ipek, ksn.with_counter(expected_counter)).unwrap()
            );
        }
        assert_eq!(
            state.next_transaction_key().unwrap().1.key().to_hex(),
            derive_key_chain(&ipek, ksn.with_counter(4))
                .unwrap()
                .key()
                .to_hex()
        );
    }

    #[test]
    fn counter_three_key_comes_from_register_one() {
        let (ipek, ksn, mut state) = setup();
        state.next_transaction_key().unwrap();
        state.next_transaction_key().unwrap();
        // The counter-2 step placed counter 3's key in register 1.
        assert_eq!(state.registers()[0].associated_counter(), 3);
        let placed = state.registers()[0].key().unwrap().clone();
        let (_, key) = state.next_transaction_key().unwrap();
        assert_eq!(key.key(), &placed);
        assert_eq!(key.key().to_hex(), "0DF3D9422ACA56E547676D07AD6BADFA");
        assert_eq!(
            &placed,
            derive_key_chain(&ipek, ksn.with_counter(3)).unwrap().key()
        );
    }

    #[test]
    fn registers_stay_ahead_of_counter() {
        let (_, _, mut state) = setup();
        for _ in 0..300 {
            state.next_transaction_key().unwrap();
            assert!(state.occupied_registers() <= REGISTER_COUNT);
            for (c, _) in state.stored_keys() {
                assert!(c > state.counter());
            }
        }
    }

    #[test]
    fn remaining_counts_down() {
        let (_, _, mut state) = setup();
        assert_eq!(state.remaining_transactions(), 1_048_575);
        state.next_transaction_key().unwrap();
        assert_eq!(state.remaining_transactions(), 1_048_574);
    }

    #[test]
    fn build_message_validation() {
        let (_, _, mut state) = setup();
        assert_eq!(state.build_message(None, None), Err(Error::EmptyMessage));
        assert_eq!(
            state.build_message(None, Some(b"")),
            Err(Error::EmptyPlaintext)
        );
        // Rejected requests do not consume a counter.
        assert_eq!(state.counter(), 0);
        let msg = state.build_message(None, Some(b"amount=12")).unwrap();
        assert_eq!(msg.ksn.counter(), 1);
        assert!(msg.validate().is_ok());
    }

    #[test]
    fn snapshot_round_trip_preserves_behaviour() {
        let (_, _, mut state) = setup();
        for _ in 0..37 {
            state.next_transaction_key().unwrap();
        }
        let text = state.to_snapshot().to_string();
        let record = Record::parse_line(&text).unwrap().unwrap();
        let mut restored = TerminalState::from_snapshot(&record).unwrap();
        assert_eq!(restored.to_snapshot().to_string(), text);
        for _ in 0..50 {
            assert_eq!(
                restored.next_transaction_key().unwrap(),
                state.next_transaction_key().unwrap()
            );
        }
    }

    #[test]
    fn snapshot_rejects_inconsistent_register() {
        let (_, _, state) = setup();
        let text = state
            .to_snapshot()
            .to_string()
            .replace("r02=000002", "r02=000003");
        let record = Record::parse_line(&text).unwrap().unwrap();
        assert!(TerminalState::from_snapshot(&record).is_err());
    }

    #[test]
    fn exhaustion_near_end_of_counter_space() {
        let (ipek, ksn, _) = setup();
        // Start from a snapshot positioned just before the final counters.
        let mut state = TerminalState {
            ksn: ksn.with_counter(0x1FF000),
            registers: Default::default(),
            exhausted: false,
        };
        // Registers for 0x1FF000's successors: the ones a real run would hold.
        let c = 0x1FF000u32;
        for bit in 0..12 {
            let child = c | (1 << bit);
            if child.count_ones() <= 10 {
                let key = derive_key_chain(&ipek, ksn.with_counter(child))
                    .unwrap()
                    .into_key();
                state.registers[bit].store(key, child);
            }
        }
        let mut seen = Vec::new();
        while let Ok((k, key)) = state.next_transaction_key() {
            assert_eq!(key, derive_key_chain(&ipek, k).unwrap());
            seen.push(k.counter());
        }
        assert_eq!(seen.last(), Some(&0x1FF800));
        assert!(state.is_exhausted());
        assert_eq!(state.remaining_transactions(), 0);
        assert_eq!(state.occupied_registers(), 0);
        assert_eq!(state.next_transaction_key(), Err(Error::Exhausted));
    }
}
