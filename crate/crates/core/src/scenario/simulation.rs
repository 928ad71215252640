use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::profile::{evaluate_applicability, EndpointProfile};
use crate::baseline::{BaselineHost, FixedKeyTerminal, MasterSessionContext};
use crate::error::Error;
use crate::hierarchy::derive_ipek;
use crate::host::{HostRegistry, ReplayPolicy};
use crate::ksn::Ksn;
use crate::message::{HostReply, HostStatus, SchemeTag, TransactionMessage};
use crate::pin_block::{encode_iso0, PinBlock};
use crate::record::Record;
use crate::tdea::{TdeaKey, KEY_LEN};
use crate::terminal::{init_terminal, TerminalState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulationReport {
    pub scheme: SchemeTag,
    pub profile: String,
    pub seed: u64,
    pub transactions: u64,
    pub accepted: u64,
    pub distinct_keys: u64,
    /// Count per rejection status; every non-accepted status is listed.
    pub rejected: BTreeMap<HostStatus, u64>,
    /// Messages whose ciphertext equals one sent earlier in the run.
    pub repeated_ciphertexts: u64,
    pub elapsed: Duration,
}

impl SimulationReport {
    fn new(scheme: SchemeTag, profile: &str, seed: u64) -> Self {
        Self {
            scheme,
            profile: profile.to_owned(),
            seed,
            transactions: 0,
            accepted: 0,
            distinct_keys: 0,
            rejected: HostStatus::ALL
                .into_iter()
                .filter(|s| *s != HostStatus::Accepted)
                .map(|s| (s, 0))
                .collect(),
            repeated_ciphertexts: 0,
            elapsed: Duration::ZERO,
        }
    }

    pub fn ciphertext_reuse(&self) -> bool {
        self.repeated_ciphertexts > 0
    }

    fn count(&mut self, status: HostStatus) {
        if status == HostStatus::Accepted {
            self.accepted += 1;
        } else {
            *self.rejected.entry(status).or_default() += 1;
        }
    }

    /// One `field=value` record. Timing is left out so reports from the same
    /// seed are byte-identical.
    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.push("scheme", self.scheme)
            .push("profile", &self.profile)
            .push("seed", self.seed)
            .push("transactions", self.transactions)
            .push("accepted", self.accepted)
            .push("distinct_keys", self.distinct_keys);
        for (status, n) in &self.rejected {
            r.push(&snake(status.name()), n);
        }
        r.push("repeated_ciphertexts", self.repeated_ciphertexts)
            .push(
                "ciphertext_reuse",
                if self.ciphertext_reuse() { "yes" } else { "no" },
            );
        r
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let record = self.to_record();
        let width = record.fields().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in record.fields() {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

fn snake(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_ascii_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(c.to_ascii_lowercase());
    }
    out
}

/// The one card used throughout a run: every transaction carries the same
/// PIN block and card data, which is what exposes key reuse.
struct Card {
    pin_block: PinBlock,
    card_data: Vec<u8>,
}

impl Card {
    fn draw(rng: &mut impl Rng) -> Self {
        let digits = |rng: &mut dyn RngCore, n: usize| -> String {
            (0..n)
                .map(|_| char::from(b'0' + (rng.next_u32() % 10) as u8))
                .collect()
        };
        let pin = digits(rng, 4);
        let pan = format!("4{}", digits(rng, 15));
        Self {
            pin_block: encode_iso0(&pin, &pan).expect("generated PIN and PAN are valid"),
            card_data: format!("{pan}=2512101").into_bytes(),
        }
    }
}

fn random_key(rng: &mut impl RngCore) -> TdeaKey {
    let mut raw = [0u8; KEY_LEN];
    rng.fill_bytes(&mut raw);
    TdeaKey::from_bytes(raw)
}

/// Sends `msg` over the wire format and returns the host's decoded status.
fn round_trip_wire(
    msg: &TransactionMessage,
    host: impl FnOnce(&TransactionMessage) -> HostReply,
) -> HostStatus {
    let parsed =
        TransactionMessage::from_wire(&msg.to_wire()).expect("terminal emits valid wire lines");
    match HostReply::from_wire(&host(&parsed).to_wire()).expect("host emits valid replies") {
        HostReply::Ok { .. } => HostStatus::Accepted,
        HostReply::Rejected(s) => s,
        HostReply::Malformed => HostStatus::DecryptFailed,
    }
}

fn ciphertext_fingerprint(msg: &TransactionMessage) -> (Option<[u8; 8]>, Option<Vec<u8>>) {
    (msg.encrypted_pin_block, msg.encrypted_data.clone())
}

/// Drives `count` transactions from one terminal to a host over the wire
/// format. DUKPT runs require a profile the verdict engine accepts.
pub fn run_simulation(
    scheme: SchemeTag,
    profile: &EndpointProfile,
    count: u64,
    seed: u64,
) -> Result<SimulationReport, Error> {
    if scheme == SchemeTag::Dukpt && !evaluate_applicability(profile).permits_dukpt() {
        return Err(Error::ProfileIncompatible(profile.name.clone()));
    }
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let card = Card::draw(&mut rng);
    let terminal_id = Ksn::from_parts(rng.gen::<u64>() >> 5, 0);
    let mut report = SimulationReport::new(scheme, &profile.name, seed);
    let mut keys = HashSet::new();
    let mut ciphertexts = HashSet::new();

    match scheme {
        SchemeTag::Dukpt => {
            let bdk = random_key(&mut rng);
            let host = HostRegistry::new(ReplayPolicy::StrictlyIncreasing);
            host.register_bdk(terminal_id.key_set_id(), bdk.clone(), false)?;
            let mut terminal = init_terminal(derive_ipek(&bdk, terminal_id), terminal_id)?;
            for _ in 0..count {
                let msg = terminal.build_message(Some(&card.pin_block), Some(&card.card_data))?;
                let status = round_trip_wire(&msg, |m| match host.process_message(m) {
                    Ok(v) => v.reply(),
                    Err(_) => HostReply::Malformed,
                });
                if status == HostStatus::Accepted {
                    keys.insert(host.rederive_key(msg.ksn)?.into_key());
                }
                report.count(status);
                report.transactions += 1;
                if !ciphertexts.insert(ciphertext_fingerprint(&msg)) {
                    report.repeated_ciphertexts += 1;
                }
            }
        }
        SchemeTag::Fixed | SchemeTag::MasterSession => {
            let key = random_key(&mut rng);
            let mut host = BaselineHost::default();
            let fixed = FixedKeyTerminal::new(key.clone(), terminal_id);
            let mut ms = MasterSessionContext::new(key.clone());
            if scheme == SchemeTag::Fixed {
                host.add_fixed_terminal(terminal_id, key.clone());
                keys.insert(key);
            } else {
                host.add_master_session_terminal(terminal_id, key);
            }
            for _ in 0..count {
                let msg = match scheme {
                    SchemeTag::Fixed => {
                        fixed.build_message(Some(&card.pin_block), Some(&card.card_data))?
                    }
                    _ => {
                        let msg = ms.build_message(
                            &mut rng,
                            terminal_id,
                            Some(&card.pin_block),
                            Some(&card.card_data),
                        )?;
                        keys.extend(ms.current_session_key().cloned());
                        msg
                    }
                };
                let status = round_trip_wire(&msg, |m| match host.process_message(m) {
                    Ok(_) => HostReply::Ok { counter: 0 },
                    Err(Error::UnknownKeySet(_)) => HostReply::Rejected(HostStatus::UnknownKeySet),
                    Err(_) => HostReply::Rejected(HostStatus::DecryptFailed),
                });
                report.count(status);
                report.transactions += 1;
                if !ciphertexts.insert(ciphertext_fingerprint(&msg)) {
                    report.repeated_ciphertexts += 1;
                }
            }
        }
    }
    report.distinct_keys = keys.len() as u64;
    report.elapsed = started.elapsed();
    Ok(report)
}

/// DUKPT only: `terminals` devices under one BDK transact concurrently
/// against a shared host, `per_terminal` messages each.
pub fn run_fleet_simulation(
    profile: &EndpointProfile,
    terminals: u32,
    per_terminal: u64,
    seed: u64,
) -> Result<SimulationReport, Error> {
    if !evaluate_applicability(profile).permits_dukpt() {
        return Err(Error::ProfileIncompatible(profile.name.clone()));
    }
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let card = Card::draw(&mut rng);
    let bdk = random_key(&mut rng);
    let key_set: u64 = rng.gen_range(0..1 << 24);
    let host = HostRegistry::new(ReplayPolicy::StrictlyIncreasing);
    host.register_bdk(key_set as u32, bdk.clone(), false)?;

    let fleet: Vec<TerminalState> = (0..u64::from(terminals))
        .map(|device| {
            let ksn = Ksn::from_parts((key_set << 35) | device, 0);
            init_terminal(derive_ipek(&bdk, ksn), ksn)
        })
        .collect::<Result<_, _>>()?;

    let shared = Mutex::new((
        SimulationReport::new(SchemeTag::Dukpt, &profile.name, seed),
        HashSet::new(),
        HashSet::new(),
    ));
    std::thread::scope(|s| {
        let handles: Vec<_> = fleet
            .into_iter()
            .map(|mut terminal| {
                let (host, card, shared) = (&host, &card, &shared);
                s.spawn(move || -> Result<(), Error> {
                    for _ in 0..per_terminal {
                        let msg =
                            terminal.build_message(Some(&card.pin_block), Some(&card.card_data))?;
                        let status = round_trip_wire(&msg, |m| match host.process_message(m) {
                            Ok(v) => v.reply(),
                            Err(_) => HostReply::Malformed,
                        });
                        let key = host.rederive_key(msg.ksn)?.into_key();
                        let mut guard = shared.lock().unwrap();
                        let (report, keys, ciphertexts) = &mut *guard;
                        report.count(status);
                        report.transactions += 1;
                        if status == HostStatus::Accepted {
                            keys.insert(key);
                        }
                        if !ciphertexts.insert(ciphertext_fingerprint(&msg)) {
                            report.repeated_ciphertexts += 1;
                        }
                    }
                    Ok(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().expect("terminal thread panicked"))
    })?;

    let (mut report, keys, _) = shared.into_inner().unwrap();
    report.distinct_keys = keys.len() as u64;
    report.elapsed = started.elapsed();
    Ok(report)
}
