use thiserror::Error;

use crate::hierarchy::KeyRole;

/// Which hex-encoded value failed to parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HexField {
    Key,
    Ksn,
    PinBlock,
    Data,
    WrappedKey,
}

impl std::fmt::Display for HexField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HexField::Key => "key",
            HexField::Ksn => "KSN",
            HexField::PinBlock => "PIN block",
            HexField::Data => "data",
            HexField::WrappedKey => "wrapped key",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("{field} contains non-hex characters")]
    NonHexInput { field: HexField },
    #[error("{field} must be {expected} hex characters, got {actual}")]
    WrongLength {
        field: HexField,
        expected: usize,
        actual: usize,
    },
    #[error("transaction counter space exhausted")]
    Exhausted,
    #[error("counter {counter:#08X} has {ones} set bits (max 10)")]
    CounterOverweight { counter: u32, ones: u32 },
    #[error("expected a {expected:?} key, got {actual:?}")]
    WrongRole { expected: KeyRole, actual: KeyRole },
    #[error("plaintext is empty")]
    EmptyPlaintext,
    #[error("initial KSN must have a zero counter, got {0:#08X}")]
    NonZeroCounter(u32),
    #[error("message carries no payload")]
    EmptyMessage,
    #[error("key set {0:06X} is already registered")]
    DuplicateKeySet(u32),
    #[error("key set {0:06X} is not registered")]
    UnknownKeySet(u32),
    #[error("PIN must be 4 to 12 digits")]
    BadPinLength,
    #[error("PAN must be at least 13 digits")]
    BadPan,
    #[error("malformed PIN block")]
    MalformedBlock,
    #[error("decryption failed")]
    DecryptFailed,
    #[error("profile `{0}` cannot host a DUKPT terminal")]
    ProfileIncompatible(String),
    #[error("{0} messages are not handled here")]
    UnsupportedScheme(crate::message::SchemeTag),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
