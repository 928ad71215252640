use dukpt::record::Record;
use dukpt::scenario::{builtin_profiles, evaluate_applicability, run_simulation};
use dukpt::{
    decode_iso0, derive_ipek, encode_iso0, init_terminal, Error, HostRegistry, HostReply,
    HostStatus, Ksn, ReplayPolicy, SchemeTag, TdeaKey, TerminalState, TransactionMessage,
};
use proptest::prelude::*;

const BDK: &str = "0123456789ABCDEFFEDCBA9876543210";
const KSN0: &str = "FFFF9876543210E00000";
const PAN: &str = "4012345678909";

fn setup(policy: ReplayPolicy) -> (HostRegistry, TerminalState) {
    let bdk = TdeaKey::from_hex(BDK).unwrap();
    let ksn = Ksn::from_hex(KSN0).unwrap();
    let host = HostRegistry::new(policy);
    host.register_bdk(ksn.key_set_id(), bdk.clone(), false)
        .unwrap();
    let terminal = init_terminal(derive_ipek(&bdk, ksn), ksn).unwrap();
    (host, terminal)
}

#[test]
fn terminal_to_host_over_the_wire() {
    let (host, mut terminal) = setup(ReplayPolicy::StrictlyIncreasing);
    let pin = encode_iso0("1234", PAN).unwrap();
    for i in 1..=300u32 {
        let data = format!("{PAN}=2512 txn {i}");
        let msg = terminal
            .build_message(Some(&pin), Some(data.as_bytes()))
            .unwrap();
        let parsed = TransactionMessage::from_wire(&msg.to_wire()).unwrap();
        assert_eq!(parsed, msg);
        let verdict = host.process_message(&parsed).unwrap();
        assert_eq!(verdict.status, HostStatus::Accepted);
        assert_eq!(
            decode_iso0(verdict.clear_pin_block.as_ref().unwrap(), PAN).unwrap(),
            "1234"
        );
        assert_eq!(verdict.clear_data.as_deref(), Some(data.as_bytes()));
        assert_eq!(
            verdict.reply(),
            HostReply::Ok {
                counter: msg.ksn.counter()
            }
        );
    }
}

#[test]
fn wrong_bdk_fails_decryption() {
    let (_, mut terminal) = setup(ReplayPolicy::StrictlyIncreasing);
    let other = HostRegistry::new(ReplayPolicy::StrictlyIncreasing);
    let ksn = Ksn::from_hex(KSN0).unwrap();
    other
        .register_bdk(
            ksn.key_set_id(),
            TdeaKey::from_hex("FEDCBA98765432100123456789ABCDEF").unwrap(),
            false,
        )
        .unwrap();
    let msg = terminal.build_message(None, Some(b"payload")).unwrap();
    assert_eq!(
        other.process_message(&msg).unwrap().status,
        HostStatus::DecryptFailed
    );
    // A failed decrypt does not advance the replay window.
    assert_eq!(other.last_accepted(ksn.initial_id()), None);
}

#[test]
fn unknown_key_set_and_foreign_scheme() {
    let (host, _) = setup(ReplayPolicy::StrictlyIncreasing);
    let bdk = TdeaKey::from_hex(BDK).unwrap();
    let ksn = Ksn::from_hex("AAAAAA76543210E00000").unwrap();
    let mut stranger = init_terminal(derive_ipek(&bdk, ksn), ksn).unwrap();
    let mut msg = stranger.build_message(None, Some(b"x")).unwrap();
    assert_eq!(
        host.process_message(&msg).unwrap().status,
        HostStatus::UnknownKeySet
    );
    msg.scheme = SchemeTag::Fixed;
    assert!(matches!(
        host.process_message(&msg),
        Err(Error::UnsupportedScheme(SchemeTag::Fixed))
    ));
}

#[test]
fn no_bdk_or_ipek_bytes_leave_the_terminal() {
    let bdk = TdeaKey::from_hex(BDK).unwrap();
    let ksn = Ksn::from_hex(KSN0).unwrap();
    let ipek = derive_ipek(&bdk, ksn);
    let ipek_hex = ipek.key().to_hex();
    let mut terminal = init_terminal(ipek, ksn).unwrap();
    let pin = encode_iso0("987654", PAN).unwrap();
    let mut wire = String::new();
    for _ in 0..200 {
        let msg = terminal
            .build_message(Some(&pin), Some(b"track data"))
            .unwrap();
        wire.push_str(&msg.to_wire());
        wire.push('\n');
    }
    for secret in [BDK, &ipek_hex] {
        for half in [&secret[..16], &secret[16..]] {
            assert!(!wire.contains(half));
        }
    }
    assert!(!format!("{terminal:?}").contains(&BDK[..16]));
}

#[test]
fn clone_is_caught_by_replay_policy() {
    let (host, mut terminal) = setup(ReplayPolicy::StrictlyIncreasing);
    let first = terminal.build_message(None, Some(b"a")).unwrap();
    let mut clone = TerminalState::from_snapshot(&terminal.to_snapshot()).unwrap();
    let legit = terminal.build_message(None, Some(b"b")).unwrap();
    let cloned = clone.build_message(None, Some(b"c")).unwrap();
    assert_eq!(legit.ksn, cloned.ksn);
    assert!(host.process_message(&first).unwrap().is_accepted());
    assert!(host.process_message(&cloned).unwrap().is_accepted());
    assert_eq!(
        host.process_message(&legit).unwrap().status,
        HostStatus::ReplayRejected
    );
}

#[test]
fn every_builtin_gate_matches_simulation_outcome() {
    for profile in builtin_profiles() {
        let permitted = evaluate_applicability(&profile).permits_dukpt();
        let result = run_simulation(SchemeTag::Dukpt, &profile, 5, 1);
        match result {
            Ok(report) => {
                assert!(permitted, "{} ran but is not permitted", profile.name);
                assert_eq!(report.accepted, 5);
            }
            Err(Error::ProfileIncompatible(name)) => {
                assert!(!permitted);
                assert_eq!(name, profile.name);
            }
            Err(e) => panic!("{}: {e}", profile.name),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Under the strict policy a message is accepted exactly when its counter
    // exceeds every counter accepted before it.
    #[test]
    fn replay_decisions_follow_running_maximum(
        order in Just((0..12usize).collect::<Vec<_>>()).prop_shuffle()
    ) {
        let (host, mut terminal) = setup(ReplayPolicy::StrictlyIncreasing);
        let msgs: Vec<_> = (0..12)
            .map(|_| terminal.build_message(None, Some(b"p")).unwrap())
            .collect();
        let mut high = 0u32;
        for i in order {
            let counter = msgs[i].ksn.counter();
            let status = host.process_message(&msgs[i]).unwrap().status;
            if counter > high {
                prop_assert_eq!(status, HostStatus::Accepted);
                high = counter;
            } else {
                prop_assert_eq!(status, HostStatus::ReplayRejected);
            }
        }
    }

    #[test]
    fn snapshot_restore_continues_identically(steps in 0usize..400) {
        let (_, mut terminal) = setup(ReplayPolicy::Disabled);
        for _ in 0..steps {
            terminal.next_transaction_key().unwrap();
        }
        let line = terminal.to_snapshot().to_string();
        let record = Record::parse_line(&line).unwrap().unwrap();
        let mut restored = TerminalState::from_snapshot(&record).unwrap();
        for _ in 0..20 {
            let (ka, a) = terminal.next_transaction_key().unwrap();
            let (kb, b) = restored.next_transaction_key().unwrap();
            prop_assert_eq!(ka, kb);
            prop_assert_eq!(a.key(), b.key());
        }
    }
}
