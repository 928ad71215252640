//! Terminal to host messages and the single-line wire format:
//!
//! ```text
//! DUKPT1|<ksn>|<pinblock or ->|<data or ->|<DUKPT|FIXED|MS>[|<wrapped session key>]
//! ```
//!
//! The host answers `OK|<counter>` or `ERR|<status>`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, HexField};
use crate::hexfmt;
use crate::ksn::{Ksn, MAX_COUNTER_BITS};
use crate::pin_block::PIN_BLOCK_LEN;
use crate::tdea::{BLOCK_LEN, KEY_LEN};

pub const WIRE_MAGIC: &str = "DUKPT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeTag {
    Dukpt,
    Fixed,
    MasterSession,
}

impl SchemeTag {
    pub fn wire_name(self) -> &'static str {
        match self {
            SchemeTag::Dukpt => "DUKPT",
            SchemeTag::Fixed => "FIXED",
            SchemeTag::MasterSession => "MS",
        }
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for SchemeTag {
    type Err = Error;

    /// Accepts the wire names and a few friendlier spellings, any case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dukpt" => Ok(SchemeTag::Dukpt),
            "fixed" => Ok(SchemeTag::Fixed),
            "ms" | "master-session" | "mastersession" => Ok(SchemeTag::MasterSession),
            other => Err(Error::Parse(format!("unknown scheme `{other}`"))),
        }
    }
}

/// What a terminal sends to the host for one transaction.
///
/// For FIXED and MS messages the KSN field only identifies the terminal; its
/// counter bits are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionMessage {
    pub ksn: Ksn,
    pub encrypted_pin_block: Option<[u8; PIN_BLOCK_LEN]>,
    pub encrypted_data: Option<Vec<u8>>,
    pub scheme: SchemeTag,
    pub wrapped_session_key: Option<[u8; KEY_LEN]>,
}

impl TransactionMessage {
    pub fn validate(&self) -> Result<(), Error> {
        if self.encrypted_pin_block.is_none() && self.encrypted_data.is_none() {
            return Err(Error::EmptyMessage);
        }
        if let Some(data) = &self.encrypted_data {
            if data.is_empty() || data.len() % BLOCK_LEN != 0 {
                return Err(Error::Parse(
                    "encrypted data must be a non-empty multiple of 8 bytes".into(),
                ));
            }
        }
        if (self.scheme == SchemeTag::MasterSession) != self.wrapped_session_key.is_some() {
            return Err(Error::Parse(
                "a wrapped session key is required for MS and only for MS".into(),
            ));
        }
        if self.scheme == SchemeTag::Dukpt {
            let ones = self.ksn.counter().count_ones();
            if ones > MAX_COUNTER_BITS {
                return Err(Error::CounterOverweight {
                    counter: self.ksn.counter(),
                    ones,
                });
            }
        }
        Ok(())
    }

    pub fn to_wire(&self) -> String {
        let pin = self
            .encrypted_pin_block
            .map_or_else(|| "-".to_owned(), |b| hexfmt::encode(&b));
        let data = self
            .encrypted_data
            .as_deref()
            .map_or_else(|| "-".to_owned(), hexfmt::encode);
        let mut line = format!("{WIRE_MAGIC}|{}|{pin}|{data}|{}", self.ksn, self.scheme);
        if let Some(wrapped) = &self.wrapped_session_key {
            line.push('|');
            line.push_str(&hexfmt::encode(wrapped));
        }
        line
    }

    /// Parses a wire line. Structure is checked here; the counter weight rule
    /// is left to the host so it can answer with a specific status.
    pub fn from_wire(line: &str) -> Result<Self, Error> {
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('|').collect();
        if fields.first() != Some(&WIRE_MAGIC) {
            return Err(Error::Parse(format!(
                "wire line must start with {WIRE_MAGIC}"
            )));
        }
        if !(5..=6).contains(&fields.len()) {
            return Err(Error::Parse(format!(
                "expected 5 or 6 fields, got {}",
                fields.len()
            )));
        }
        let ksn = Ksn::from_hex(fields[1])?;
        let encrypted_pin_block = match fields[2] {
            "-" => None,
            hex => Some(hexfmt::decode_fixed(hex, HexField::PinBlock)?),
        };
        let encrypted_data = match fields[3] {
            "-" => None,
            hex => Some(hexfmt::decode(hex, HexField::Data)?),
        };
        // Scheme names on the wire are exact.
        let scheme = match fields[4] {
            "DUKPT" => SchemeTag::Dukpt,
            "FIXED" => SchemeTag::Fixed,
            "MS" => SchemeTag::MasterSession,
            other => return Err(Error::Parse(format!("unknown scheme tag `{other}`"))),
        };
        let wrapped_session_key = match fields.get(5) {
            Some(hex) => Some(hexfmt::decode_fixed(hex, HexField::WrappedKey)?),
            None => None,
        };
        let msg = TransactionMessage {
            ksn,
            encrypted_pin_block,
            encrypted_data,
            scheme,
            wrapped_session_key,
        };
        match msg.validate() {
            Ok(()) | Err(Error::CounterOverweight { .. }) => Ok(msg),
            Err(e) => Err(e),
        }
    }
}

/// Host outcome for one message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HostStatus {
    Accepted,
    ReplayRejected,
    OverweightCounterRejected,
    UnknownKeySet,
    DecryptFailed,
}

impl HostStatus {
    pub const ALL: [HostStatus; 5] = [
        HostStatus::Accepted,
        HostStatus::ReplayRejected,
        HostStatus::OverweightCounterRejected,
        HostStatus::UnknownKeySet,
        HostStatus::DecryptFailed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HostStatus::Accepted => "Accepted",
            HostStatus::ReplayRejected => "ReplayRejected",
            HostStatus::OverweightCounterRejected => "OverweightCounterRejected",
            HostStatus::UnknownKeySet => "UnknownKeySet",
            HostStatus::DecryptFailed => "DecryptFailed",
        }
    }
}

impl fmt::Display for HostStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Host reply line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HostReply {
    Ok {
        counter: u32,
    },
    Rejected(HostStatus),
    /// The line could not be parsed as a message.
    Malformed,
}

impl HostReply {
    pub fn to_wire(self) -> String {
        match self {
            HostReply::Ok { counter } => format!("OK|{counter}"),
            HostReply::Rejected(status) => format!("ERR|{status}"),
            HostReply::Malformed => "ERR|MalformedMessage".to_owned(),
        }
    }

    pub fn from_wire(line: &str) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("bad host reply `{line}`"));
        let (kind, rest) = line.trim_end().split_once('|').ok_or_else(bad)?;
        match kind {
            "OK" => Ok(HostReply::Ok {
                counter: rest.parse().map_err(|_| bad())?,
            }),
            "ERR" if rest == "MalformedMessage" => Ok(HostReply::Malformed),
            "ERR" => HostStatus::ALL
                .into_iter()
                .find(|s| s.name() == rest && *s != HostStatus::Accepted)
                .map(HostReply::Rejected)
                .ok_or_else(bad),
            _ => Err(bad()),
        }
    }
}
