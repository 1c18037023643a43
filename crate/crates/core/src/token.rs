//! Token IDs and the big-endian token-array encoding.

use alloc::vec::Vec;

use crate::error::{Error, Result};

pub type Token = u16;

/// End-of-document marker; sorts after every real token.
pub const SEPARATOR: Token = 0xFFFF;
/// Reserved ID for out-of-vocabulary words.
pub const UNK: Token = 0;
/// Largest ID a document or query may contain.
pub const MAX_TOKEN: Token = 0xFFFE;

/// Append the big-endian encoding of `tokens` to `out`.
pub fn encode_into(tokens: &[Token], out: &mut Vec<u8>) {
    out.reserve(tokens.len() * 2);
    for t in tokens {
        out.extend_from_slice(&t.to_be_bytes());
    }
}

pub fn encode(tokens: &[Token]) -> Vec<u8> {
    let mut out = Vec::with_capacity(tokens.len() * 2);
    encode_into(tokens, &mut out);
    out
}

/// Decode a big-endian token run. A trailing odd byte is ignored.
pub fn decode(bytes: &[u8]) -> Vec<Token> {
    bytes
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect()
}

#[inline]
pub fn token_at(bytes: &[u8], byte_offset: usize) -> Token {
    u16::from_be_bytes([bytes[byte_offset], bytes[byte_offset + 1]])
}

/// Document token runs must be non-empty and separator-free.
pub fn check_document(tokens: &[Token]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyDocument);
    }
    if tokens.contains(&SEPARATOR) {
        return Err(Error::SeparatorInQuery);
    }
    Ok(())
}

/// Queries must be non-empty and separator-free.
pub fn check_query(tokens: &[Token]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyQuery);
    }
    check_context(tokens)
}

/// Contexts may be empty but never contain a separator.
pub fn check_context(tokens: &[Token]) -> Result<()> {
    if tokens.contains(&SEPARATOR) {
        return Err(Error::SeparatorInQuery);
    }
    Ok(())
}

/// Split a decoded token array into its documents (separators dropped).
pub fn split_documents(tokens: &[Token]) -> Vec<&[Token]> {
    let mut docs = Vec::new();
    let mut start = 0;
    for (i, &t) in tokens.iter().enumerate() {
        if t == SEPARATOR {
            docs.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    docs
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn big_endian_layout() {
        let mut bytes = encode(&[1, 2, 3, 1, 2]);
        bytes.extend_from_slice(&SEPARATOR.to_be_bytes());
        assert_eq!(
            bytes,
            [0x00, 0x01, 0x00, 0x02, 0x00, 0x03, 0x00, 0x01, 0x00, 0x02, 0xFF, 0xFF]
        );
        assert_eq!(token_at(&bytes, 10), SEPARATOR);
    }

    #[test]
    fn byte_order_matches_token_order() {
        let a = encode(&[0x00FF, 7]);
        let b = encode(&[0x0100]);
        assert!(a < b);
        assert!(encode(&[MAX_TOKEN]) < encode(&[SEPARATOR]));
    }

    #[test]
    fn split_round_trip() {
        let flat = vec![1, 2, SEPARATOR, 3, SEPARATOR];
        let docs = split_documents(&flat);
        assert_eq!(docs, vec![&[1u16, 2][..], &[3u16][..]]);
    }

    #[test]
    fn rejects_bad_documents() {
        assert_eq!(check_document(&[]), Err(Error::EmptyDocument));
        assert_eq!(check_document(&[1, SEPARATOR]), Err(Error::SeparatorInQuery));
        assert_eq!(check_query(&[]), Err(Error::EmptyQuery));
        assert!(check_context(&[]).is_ok());
    }
}
