//! Canonical hex text encoding: either case accepted, uppercase emitted.

use crate::error::{Error, HexField};

pub fn encode(bytes: &[u8]) -> String {
    hex::encode_upper(bytes)
}

pub fn decode(text: &str, field: HexField) -> Result<Vec<u8>, Error> {
    if !text.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::NonHexInput { field });
    }
    if !text.len().is_multiple_of(2) {
        return Err(Error::WrongLength {
            field,
            expected: text.len() + 1,
            actual: text.len(),
        });
    }
    hex::decode(text).map_err(|_| Error::NonHexInput { field })
}

pub fn decode_fixed<const N: usize>(text: &str, field: HexField) -> Result<[u8; N], Error> {
    if !text.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(Error::NonHexInput { field });
    }
    if text.len() != N * 2 {
        return Err(Error::WrongLength {
            field,
            expected: N * 2,
            actual: text.len(),
        });
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(text, &mut out).map_err(|_| Error::NonHexInput { field })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercase_in_uppercase_out() {
        let bytes: [u8; 2] = decode_fixed("abcd", HexField::Key).unwrap();
        assert_eq!(encode(&bytes), "ABCD");
    }

    #[test]
    fn rejects_odd_and_non_hex() {
        assert!(matches!(
            decode("abc", HexField::Data),
            Err(Error::WrongLength { .. })
        ));
        assert_eq!(
            decode("zz", HexField::Data),
            Err(Error::NonHexInput {
                field: HexField::Data
            })
        );
    }
}
