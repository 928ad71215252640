//! DUKPT (Derived Unique Key Per Transaction) key management for TDEA.
//!
//! * [`hierarchy`]: initial key derivation, the non-reversible key step, key
//!   chains and PIN/data variants.
//! * [`terminal`]: the future-key register machine a terminal runs.
//! * [`host`]: acquirer-side re-derivation, decryption and replay checks.
//! * [`pin_block`]: ISO 9564 format 0 PIN blocks.
//! * [`baseline`]: the fixed-key and Master/Session schemes for comparison.
//! * [`scenario`]: endpoint profiles, the applicability verdict engine,
//!   end-to-end simulations and the terminal cloning demonstration.
//! * [`vectors`]: self-checking test vector files.

pub mod baseline;
pub mod error;
pub mod hexfmt;
pub mod hierarchy;
pub mod host;
pub mod ksn;
pub mod message;
pub mod payload;
pub mod pin_block;
pub mod record;
pub mod scenario;
pub mod tdea;
pub mod terminal;
pub mod vectors;

pub use error::{Error, Result};
pub use hierarchy::{
    derive_ipek, derive_key_chain, nrkgp, variant_data_key, variant_pin_key, DerivedKey, KeyRole,
};
pub use host::{HostRegistry, HostVerdict, ReplayPolicy};
pub use ksn::{next_counter, parse_ksn, Ksn};
pub use message::{HostReply, HostStatus, SchemeTag, TransactionMessage};
pub use pin_block::{decode_iso0, encode_iso0, PinBlock};
pub use tdea::TdeaKey;
pub use terminal::{init_terminal, TerminalState};
