//! Key Serial Number layout and transaction-counter arithmetic.
//!
//! An 80-bit KSN is the 59-bit initial identifier (key-set ID followed by the
//! device ID) and a 21-bit transaction counter in the least significant bits.
//! Counters with more than [`MAX_COUNTER_BITS`] set bits are never used.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, HexField};

pub const KSN_LEN: usize = 10;
pub const COUNTER_BITS: u32 = 21;
pub const COUNTER_MASK: u32 = (1 << COUNTER_BITS) - 1;
pub const MAX_COUNTER_BITS: u32 = 10;
/// Width of the key-set identifier at the top of the KSN.
pub const KEY_SET_BITS: u32 = 24;

const KSN_BITS: u32 = 80;
const KSN_VALUE_MASK: u128 = (1 << KSN_BITS) - 1;

/// Total number of usable (non-zero, at most ten bits set) counters.
pub const USABLE_COUNTERS: u64 = (1 << 20) - 1;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ksn(u128);

impl Ksn {
    pub fn from_bytes(bytes: [u8; KSN_LEN]) -> Self {
        let mut wide = [0u8; 16];
        wide[16 - KSN_LEN..].copy_from_slice(&bytes);
        Self(u128::from_be_bytes(wide))
    }

    /// Builds a KSN from an initial identifier (59 bits) and counter (21 bits).
    /// Excess high bits are discarded.
    pub fn from_parts(initial_id: u64, counter: u32) -> Self {
        let id = u128::from(initial_id) & ((1 << (KSN_BITS - COUNTER_BITS)) - 1);
        Self((id << COUNTER_BITS) | u128::from(counter & COUNTER_MASK))
    }

    pub fn from_hex(hex: &str) -> Result<Self, Error> {
        Ok(Self::from_bytes(crate::hexfmt::decode_fixed(
            hex,
            HexField::Ksn,
        )?))
    }

    pub fn to_bytes(self) -> [u8; KSN_LEN] {
        self.0.to_be_bytes()[16 - KSN_LEN..].try_into().unwrap()
    }

    pub fn to_hex(self) -> String {
        crate::hexfmt::encode(&self.to_bytes())
    }

    pub fn counter(self) -> u32 {
        (self.0 as u32) & COUNTER_MASK
    }

    /// Leftmost 59 bits: key-set identifier and device identifier.
    pub fn initial_id(self) -> u64 {
        (self.0 >> COUNTER_BITS) as u64
    }

    pub fn key_set_id(self) -> u32 {
        (self.0 >> (KSN_BITS - KEY_SET_BITS)) as u32
    }

    /// The KSN with all counter bits cleared.
    pub fn base(self) -> Self {
        Self(self.0 & !u128::from(COUNTER_MASK))
    }

    pub fn with_counter(self, counter: u32) -> Self {
        Self((self.base().0 | u128::from(counter & COUNTER_MASK)) & KSN_VALUE_MASK)
    }

    pub(crate) fn leftmost8(self) -> [u8; 8] {
        self.to_bytes()[..8].try_into().unwrap()
    }

    pub(crate) fn rightmost8(self) -> [u8; 8] {
        self.to_bytes()[KSN_LEN - 8..].try_into().unwrap()
    }
}

/// Parses a 20-character hex KSN.
pub fn parse_ksn(hex: &str) -> Result<Ksn, Error> {
    Ksn::from_hex(hex)
}

impl FromStr for Ksn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ksn::from_hex(s)
    }
}

impl fmt::Display for Ksn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Ksn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ksn({})", self.to_hex())
    }
}

/// True for counters a terminal may transact under.
pub fn is_usable_counter(counter: u32) -> bool {
    counter != 0 && counter <= COUNTER_MASK && counter.count_ones() <= MAX_COUNTER_BITS
}

pub fn check_weight(counter: u32) -> Result<(), Error> {
    let ones = counter.count_ones();
    if ones > MAX_COUNTER_BITS || counter > COUNTER_MASK {
        return Err(Error::CounterOverweight { counter, ones });
    }
    Ok(())
}

/// Smallest counter above `counter` with at most ten bits set.
pub fn next_counter(counter: u32) -> Result<u32, Error> {
    if counter >= COUNTER_MASK {
        return Err(Error::Exhausted);
    }
    let mut next = counter + 1;
    // Everything in [next, next + lowbit) keeps next's bits, so it is at least
    // as heavy and can be skipped wholesale.
    while next.count_ones() > MAX_COUNTER_BITS {
        next += next & next.wrapping_neg();
    }
    if next > COUNTER_MASK {
        return Err(Error::Exhausted);
    }
    Ok(next)
}

/// Number of usable counters strictly greater than `counter`.
pub fn remaining_after(counter: u32) -> u64 {
    if counter >= COUNTER_MASK {
        return 0;
    }
    // Values in 0..=2^21-1 with popcount <= 10 number exactly 2^20 (symmetry).
    (1u64 << 20) - light_values_up_to(counter)
}

/// Count of `x` in `0..=n` with at most ten bits set.
fn light_values_up_to(n: u32) -> u64 {
    let mut count = 0;
    let mut used = 0;
    for bit in (0..COUNTER_BITS).rev() {
        if n & (1 << bit) != 0 {
            // Keep the prefix, put 0 here, fill the lower `bit` bits freely.
            if used <= MAX_COUNTER_BITS {
                count += (0..=MAX_COUNTER_BITS - used)
                    .map(|k| binomial(bit, k))
                    .sum::<u64>();
            }
            used += 1;
        }
    }
    if used <= MAX_COUNTER_BITS {
        count += 1;
    }
    count
}

fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    (0..u64::from(k)).fold(1, |acc, i| acc * (u64::from(n) - i) / (i + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_next(c: u32) -> Option<u32> {
        (c + 1..=COUNTER_MASK).find(|x| x.count_ones() <= 10)
    }

    #[test]
    fn parse_examples() {
        let ksn = parse_ksn("FFFF9876543210E00000").unwrap();
        assert_eq!(ksn.counter(), 0);
        assert_eq!(ksn.initial_id(), (0xFFFF9876543210E00000u128 >> 21) as u64);
        assert_eq!(parse_ksn("FFFF9876543210E00001").unwrap().counter(), 1);
        // The 'E' nibble contributes only a zero to the counter's top bit.
        assert_eq!(
            parse_ksn("ffff9876543210efffff").unwrap().counter(),
            0x0FFFFF
        );
        assert_eq!(
            parse_ksn("FFFF9876543210FFFFFF").unwrap().counter(),
            0x1FFFFF
        );
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_ksn("FFFF9876543210E0000"),
            Err(Error::WrongLength {
                field: HexField::Ksn,
                expected: 20,
                actual: 19
            })
        ));
        assert!(matches!(
            parse_ksn("FFFF9876543210E0000G"),
            Err(Error::NonHexInput { .. })
        ));
    }

    #[test]
    fn bit_slices_against_manual_split() {
        // Slice the bytes by hand: last 21 bits span bytes 7..10.
        let bytes = hex::decode("FFFF9876543210EFFFFF").unwrap();
        let low =
            (u32::from(bytes[7] & 0x1F) << 16) | (u32::from(bytes[8]) << 8) | u32::from(bytes[9]);
        let ksn = parse_ksn("FFFF9876543210EFFFFF").unwrap();
        assert_eq!(ksn.counter(), low);
        assert_eq!(ksn.counter(), 0x0FFFFF);
        assert_eq!(ksn.base().to_hex(), "FFFF9876543210E00000");
        assert_eq!(ksn.key_set_id(), 0xFFFF98);
    }

    #[test]
    fn next_counter_examples() {
        assert_eq!(next_counter(0), Ok(1));
        assert_eq!(next_counter(0x0003FF), Ok(0x000400));
        assert_eq!(next_counter(0x0007FE), Ok(0x000800));
        assert_eq!(next_counter(0x1FF800), Err(Error::Exhausted));
        assert_eq!(next_counter(COUNTER_MASK), Err(Error::Exhausted));
    }

    #[test]
    fn next_counter_matches_scan_near_heavy_regions() {
        for c in (0x0FF000..0x0FF400).chain(0x1FF000..0x1FF801) {
            assert_eq!(next_counter(c).ok(), brute_next(c), "counter {c:#X}");
        }
    }

    #[test]
    fn remaining_examples() {
        assert_eq!(remaining_after(0), 1_048_575);
        assert_eq!(remaining_after(1), 1_048_574);
        assert_eq!(remaining_after(0x1FF800), 0);
    }

    proptest! {
        #[test]
        fn next_counter_is_smallest_light_successor(c in 0u32..COUNTER_MASK) {
            prop_assert_eq!(next_counter(c).ok(), brute_next(c));
        }

        #[test]
        fn remaining_matches_enumeration(c in 0u32..=COUNTER_MASK) {
            let brute = ((c + 1)..=COUNTER_MASK).filter(|x| x.count_ones() <= 10).count() as u64;
            prop_assert_eq!(remaining_after(c), brute);
        }

        #[test]
        fn base_is_stable_under_counter_updates(id in 0u64..(1 << 59), a in 0u32..=COUNTER_MASK, b in 0u32..=COUNTER_MASK) {
            let ksn = Ksn::from_parts(id, a);
            prop_assert_eq!(ksn.with_counter(b).base(), ksn.base());
            prop_assert_eq!(ksn.with_counter(b).counter(), b);
            prop_assert_eq!(ksn.initial_id(), id);
            prop_assert_eq!(Ksn::from_hex(&ksn.to_hex()).unwrap(), ksn);
        }
    }
}
