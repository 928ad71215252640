//! Test vector files: one `key=value` record per line, `#` comments.
//!
//! Required fields are `bdk`, `ksn` (initial KSN), `counter` (hex),
//! `transaction_key`, `pin_key` and `data_key`. A record may also carry
//! `pin_block` + `pin_ciphertext` and `data` + `data_ciphertext`.

use crate::error::Error;
use crate::hexfmt;
use crate::hierarchy::{derive_ipek, derive_key_chain, variant_data_key, variant_pin_key};
use crate::ksn::{next_counter, Ksn};
use crate::payload::{encrypt_data, encrypt_pin};
use crate::pin_block::PinBlock;
use crate::record::{parse_records, Record};
use crate::tdea::TdeaKey;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VectorRecord {
    pub bdk: String,
    pub initial_ksn: String,
    pub counter: u32,
    pub expected_transaction_key: String,
    pub expected_pin_variant: String,
    pub expected_data_variant: String,
    pub pin_block: Option<(String, String)>,
    pub data: Option<(String, String)>,
}

impl VectorRecord {
    /// Computes a fully populated record.
    pub fn compute(
        bdk: &TdeaKey,
        initial_ksn: Ksn,
        counter: u32,
        pin_block: Option<&PinBlock>,
        data: Option<&[u8]>,
    ) -> Result<Self, Error> {
        let ipek = derive_ipek(bdk, initial_ksn);
        let tk = derive_key_chain(ipek.key(), initial_ksn.with_counter(counter))?;
        let pin_key = variant_pin_key(&tk)?;
        let data_key = variant_data_key(&tk)?;
        Ok(Self {
            bdk: bdk.to_hex(),
            initial_ksn: initial_ksn.base().to_hex(),
            counter,
            expected_transaction_key: tk.key().to_hex(),
            expected_pin_variant: pin_key.key().to_hex(),
            expected_data_variant: data_key.key().to_hex(),
            pin_block: pin_block
                .map(|p| Ok::<_, Error>((p.to_hex(), hexfmt::encode(&encrypt_pin(&tk, p)?))))
                .transpose()?,
            data: data
                .map(|d| {
                    Ok::<_, Error>((hexfmt::encode(d), hexfmt::encode(&encrypt_data(&tk, d)?)))
                })
                .transpose()?,
        })
    }

    pub fn to_record(&self) -> Record {
        let mut r = Record::new();
        r.push("bdk", &self.bdk)
            .push("ksn", &self.initial_ksn)
            .push("counter", format!("{:06X}", self.counter))
            .push("transaction_key", &self.expected_transaction_key)
            .push("pin_key", &self.expected_pin_variant)
            .push("data_key", &self.expected_data_variant);
        if let Some((clear, ct)) = &self.pin_block {
            r.push("pin_block", clear).push("pin_ciphertext", ct);
        }
        if let Some((clear, ct)) = &self.data {
            r.push("data", clear).push("data_ciphertext", ct);
        }
        r
    }

    pub fn from_record(r: &Record) -> Result<Self, Error> {
        let pair = |a: &str, b: &str| -> Result<Option<(String, String)>, Error> {
            match (r.get(a), r.get(b)) {
                (Some(x), Some(y)) => Ok(Some((x.to_owned(), y.to_owned()))),
                (None, None) => Ok(None),
                _ => Err(Error::Parse(format!(
                    "`{a}` and `{b}` must appear together"
                ))),
            }
        };
        let counter = r.require("counter")?;
        Ok(Self {
            bdk: r.require("bdk")?.to_owned(),
            initial_ksn: r.require("ksn")?.to_owned(),
            counter: u32::from_str_radix(counter, 16)
                .map_err(|_| Error::Parse(format!("bad counter `{counter}`")))?,
            expected_transaction_key: r.require("transaction_key")?.to_owned(),
            expected_pin_variant: r.require("pin_key")?.to_owned(),
            expected_data_variant: r.require("data_key")?.to_owned(),
            pin_block: pair("pin_block", "pin_ciphertext")?,
            data: pair("data", "data_ciphertext")?,
        })
    }

    /// Recomputes every expected value from `bdk`, `ksn` and `counter`.
    /// Returns the names of the fields that disagree.
    pub fn verify(&self) -> Result<Vec<&'static str>, Error> {
        let bdk = TdeaKey::from_hex(&self.bdk)?;
        let ksn = Ksn::from_hex(&self.initial_ksn)?;
        let pin = self
            .pin_block
            .as_ref()
            .map(|(clear, _)| PinBlock::from_hex(clear))
            .transpose()?;
        let data = self
            .data
            .as_ref()
            .map(|(clear, _)| hexfmt::decode(clear, crate::error::HexField::Data))
            .transpose()?;
        let fresh = Self::compute(&bdk, ksn, self.counter, pin.as_ref(), data.as_deref())?;

        let same = |a: &str, b: &str| a.eq_ignore_ascii_case(b);
        let mut bad = Vec::new();
        if !same(
            &self.expected_transaction_key,
            &fresh.expected_transaction_key,
        ) {
            bad.push("transaction_key");
        }
        if !same(&self.expected_pin_variant, &fresh.expected_pin_variant) {
            bad.push("pin_key");
        }
        if !same(&self.expected_data_variant, &fresh.expected_data_variant) {
            bad.push("data_key");
        }
        if let (Some((_, a)), Some((_, b))) = (&self.pin_block, &fresh.pin_block) {
            if !same(a, b) {
                bad.push("pin_ciphertext");
            }
        }
        if let (Some((_, a)), Some((_, b))) = (&self.data, &fresh.data) {
            if !same(a, b) {
                bad.push("data_ciphertext");
            }
        }
        Ok(bad)
    }
}

/// Records for the first `count` usable counters of one terminal.
pub fn generate(
    bdk: &TdeaKey,
    initial_ksn: Ksn,
    count: usize,
    pin_block: Option<&PinBlock>,
    data: Option<&[u8]>,
) -> Result<Vec<VectorRecord>, Error> {
    let mut out = Vec::with_capacity(count);
    let mut counter = 0;
    for _ in 0..count {
        counter = next_counter(counter)?;
        out.push(VectorRecord::compute(
            bdk,
            initial_ksn,
            counter,
            pin_block,
            data,
        )?);
    }
    Ok(out)
}

pub fn render_file(records: &[VectorRecord]) -> String {
    let mut out = String::from("# DUKPT test vectors: bdk ksn counter transaction_key pin_key data_key [pin_block pin_ciphertext] [data data_ciphertext]\n");
    for r in records {
        out.push_str(&r.to_record().to_string());
        out.push('\n');
    }
    out
}

/// Outcome of checking one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub line: usize,
    pub counter: u32,
    /// Empty when the record checks out.
    pub mismatches: Vec<&'static str>,
}

pub fn verify_file(text: &str) -> Result<Vec<VerifyOutcome>, Error> {
    parse_records(text)?
        .into_iter()
        .map(|(line, record)| {
            let tag = |e: Error| Error::Parse(format!("line {line}: {e}"));
            let v = VectorRecord::from_record(&record).map_err(tag)?;
            Ok(VerifyOutcome {
                line,
                counter: v.counter,
                mismatches: v.verify().map_err(tag)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pin_block::encode_iso0;

    fn inputs() -> (TdeaKey, Ksn) {
        (
            TdeaKey::from_hex("0123456789ABCDEFFEDCBA9876543210").unwrap(),
            Ksn::from_hex("FFFF9876543210E00000").unwrap(),
        )
    }

    #[test]
    fn generate_then_verify() {
        let (bdk, ksn) = inputs();
        let pin = encode_iso0("1234", "4012345678909").unwrap();
        let records = generate(&bdk, ksn, 12, Some(&pin), Some(b"hello")).unwrap();
        assert_eq!(records[0].pin_block.as_ref().unwrap().1, "1B9C1845EB993A7A");
        let text = render_file(&records);
        let outcomes = verify_file(&text).unwrap();
        assert_eq!(outcomes.len(), 12);
        assert!(outcomes.iter().all(|o| o.mismatches.is_empty()));
    }

    #[test]
    fn corrupted_key_is_named() {
        let (bdk, ksn) = inputs();
        let mut text = render_file(&generate(&bdk, ksn, 3, None, None).unwrap());
        text = text.replace(
            "C46551CEF9FD24B0AA9AD834130D3BC7",
            "C46551CEF9FD24B0AA9AD834130D3BC8",
        );
        let outcomes = verify_file(&text).unwrap();
        assert_eq!(outcomes[1].mismatches, vec!["transaction_key"]);
        assert_eq!(outcomes[1].line, 3);
        assert!(outcomes[0].mismatches.is_empty());
    }

    #[test]
    fn structural_errors() {
        assert!(verify_file("bdk=00 ksn=00").is_err());
        let (bdk, ksn) = inputs();
        let rec = VectorRecord::compute(&bdk, ksn, 1, None, Some(b"x")).unwrap();
        let line = rec.to_record().to_string();
        let broken = line
            .split(' ')
            .filter(|t| !t.starts_with("data="))
            .collect::<Vec<_>>()
            .join(" ");
        assert!(verify_file(&broken)
            .unwrap_err()
            .to_string()
            .contains("line 1"));
    }
}
