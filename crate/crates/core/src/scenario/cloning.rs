use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::Error;
use crate::hierarchy::derive_ipek;
use crate::host::{HostRegistry, ReplayPolicy};
use crate::ksn::Ksn;
use crate::message::HostStatus;
use crate::pin_block::encode_iso0;
use crate::tdea::{TdeaKey, KEY_LEN};
use crate::terminal::{init_terminal, TerminalState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sender {
    Legitimate,
    Clone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CloneEvent {
    pub sender: Sender,
    pub counter: u32,
    pub status: HostStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CloneAttackReport {
    pub policy: ReplayPolicy,
    /// Status of the clone's first message.
    pub clone_first_status: Option<HostStatus>,
    pub accepted: u64,
    pub replay_rejected: u64,
    pub other_rejected: u64,
    pub events: Vec<CloneEvent>,
}

impl CloneAttackReport {
    pub fn rejections(&self) -> u64 {
        self.replay_rejected + self.other_rejected
    }
}

/// Clones a terminal and runs both copies against one host.
///
/// The legitimate terminal sends one message, its full state is copied, then
/// the clone and the legitimate terminal alternate (clone first) until the
/// clone has sent `n_clone` and the legitimate terminal `n_legit` messages in
/// total. Both copies walk the same counter sequence, so every colliding
/// counter pair can be accepted at most once under the replay policy.
pub fn clone_attack_demo(
    n_legit: u64,
    n_clone: u64,
    seed: u64,
    policy: ReplayPolicy,
) -> Result<CloneAttackReport, Error> {
    if n_legit == 0 {
        return Err(Error::InvalidArgument(
            "the legitimate terminal must send at least one message".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut raw = [0u8; KEY_LEN];
    rng.fill_bytes(&mut raw);
    let bdk = TdeaKey::from_bytes(raw);
    let ksn = Ksn::from_parts(rng.gen::<u64>() >> 5, 0);
    let host = HostRegistry::new(policy);
    host.register_bdk(ksn.key_set_id(), bdk.clone(), false)?;
    let pin = encode_iso0("2468", "4761739001010119")?;

    let mut legit = init_terminal(derive_ipek(&bdk, ksn), ksn)?;
    let mut report = CloneAttackReport {
        policy,
        clone_first_status: None,
        accepted: 0,
        replay_rejected: 0,
        other_rejected: 0,
        events: Vec::new(),
    };

    let send = |terminal: &mut TerminalState,
                sender: Sender,
                report: &mut CloneAttackReport|
     -> Result<HostStatus, Error> {
        let msg = terminal.build_message(Some(&pin), None)?;
        let status = host.process_message(&msg)?.status;
        match status {
            HostStatus::Accepted => report.accepted += 1,
            HostStatus::ReplayRejected => report.replay_rejected += 1,
            _ => report.other_rejected += 1,
        }
        report.events.push(CloneEvent {
            sender,
            counter: msg.ksn.counter(),
            status,
        });
        Ok(status)
    };

    send(&mut legit, Sender::Legitimate, &mut report)?;

    // The cloning event: an exact copy of the terminal's key state.
    let mut clone = TerminalState::from_snapshot(&legit.to_snapshot())?;

    let legit_left = n_legit - 1;
    for i in 0..n_clone.max(legit_left) {
        if i < n_clone {
            let status = send(&mut clone, Sender::Clone, &mut report)?;
            report.clone_first_status.get_or_insert(status);
        }
        if i < legit_left {
            send(&mut legit, Sender::Legitimate, &mut report)?;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clone_is_indistinguishable_then_collides() {
        let report = clone_attack_demo(2, 1, 5, ReplayPolicy::StrictlyIncreasing).unwrap();
        assert_eq!(report.clone_first_status, Some(HostStatus::Accepted));
        let e = &report.events;
        assert_eq!(e.len(), 3);
        assert_eq!(
            (e[1].sender, e[1].counter, e[1].status),
            (Sender::Clone, 2, HostStatus::Accepted)
        );
        assert_eq!(
            (e[2].sender, e[2].counter, e[2].status),
            (Sender::Legitimate, 2, HostStatus::ReplayRejected)
        );
    }

    #[test]
    fn policy_off_accepts_everything() {
        let report = clone_attack_demo(10, 10, 5, ReplayPolicy::Disabled).unwrap();
        assert_eq!(report.accepted, 20);
        assert_eq!(report.rejections(), 0);
    }

    #[test]
    fn needs_a_legitimate_message() {
        assert!(clone_attack_demo(0, 3, 1, ReplayPolicy::StrictlyIncreasing).is_err());
    }

    #[test]
    fn uneven_runs() {
        let report = clone_attack_demo(1, 5, 2, ReplayPolicy::StrictlyIncreasing).unwrap();
        assert_eq!(report.accepted, 6);
        assert_eq!(report.rejections(), 0);
        let report = clone_attack_demo(8, 3, 2, ReplayPolicy::StrictlyIncreasing).unwrap();
        // Three colliding pairs; the legitimate terminal's later counters are fresh.
        assert_eq!(report.replay_rejected, 3);
        assert_eq!(report.accepted, 8);
    }
}
