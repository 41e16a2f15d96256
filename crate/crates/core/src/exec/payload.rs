//! Friend-list payloads and their fixed-width byte encoding.
//!
//! A payload encodes as a 2-byte big-endian body length followed by the
//! UTF-8 body `owner:f1,f2,...` (friends sorted), zero-padded to a common
//! width so that payloads can be XORed together.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PayloadError {
    #[error("invalid symbol `{0}`: symbols are non-empty and contain neither ':' nor ','")]
    BadSymbol(String),
    #[error("encoded length {len} exceeds width {width}")]
    TooWide { len: usize, width: usize },
    #[error("malformed encoding: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MessagePayload {
    pub owner: String,
    /// Sorted, without duplicates.
    pub friends: Vec<String>,
}

fn check_symbol(s: &str) -> Result<(), PayloadError> {
    if s.is_empty() || s.contains([':', ',']) || s.chars().any(char::is_control) {
        Err(PayloadError::BadSymbol(s.to_string()))
    } else {
        Ok(())
    }
}

impl MessagePayload {
    pub fn new<S: Into<String>, I: IntoIterator<Item = S>>(owner: S, friends: I) -> Result<Self, PayloadError> {
        let owner = owner.into();
        check_symbol(&owner)?;
        let mut friends: Vec<String> = friends.into_iter().map(Into::into).collect();
        for f in &friends {
            check_symbol(f)?;
        }
        friends.sort();
        friends.dedup();
        Ok(Self { owner, friends })
    }

    fn body(&self) -> String {
        format!("{}:{}", self.owner, self.friends.join(","))
    }

    /// Bytes needed before padding.
    pub fn encoded_len(&self) -> usize {
        2 + self.body().len()
    }

    pub fn encode(&self, width: usize) -> Result<Vec<u8>, PayloadError> {
        let body = self.body();
        let len = 2 + body.len();
        if len > width || body.len() > u16::MAX as usize {
            return Err(PayloadError::TooWide { len, width });
        }
        let mut out = Vec::with_capacity(width);
        out.extend_from_slice(&(body.len() as u16).to_be_bytes());
        out.extend_from_slice(body.as_bytes());
        out.resize(width, 0);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PayloadError> {
        if bytes.len() < 2 {
            return Err(PayloadError::Malformed("shorter than the length prefix".into()));
        }
        let len = u16::from_be_bytes([bytes[0], bytes[1]]) as usize;
        let body = bytes
            .get(2..2 + len)
            .ok_or_else(|| PayloadError::Malformed(format!("body length {len} overruns buffer")))?;
        if bytes[2 + len..].iter().any(|&b| b != 0) {
            return Err(PayloadError::Malformed("non-zero padding".into()));
        }
        let body = std::str::from_utf8(body).map_err(|e| PayloadError::Malformed(e.to_string()))?;
        let (owner, rest) = body
            .split_once(':')
            .ok_or_else(|| PayloadError::Malformed("missing ':'".into()))?;
        let friends: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(',').collect() };
        let p = Self::new(owner, friends)?;
        if p.body() != body {
            return Err(PayloadError::Malformed("friends not in canonical order".into()));
        }
        Ok(p)
    }
}

/// Common encoding width: the longest encoded payload.
pub fn padded_width(payloads: &[MessagePayload]) -> usize {
    payloads.iter().map(MessagePayload::encoded_len).max().unwrap_or(2)
}

pub fn xor_into(acc: &mut [u8], other: &[u8]) {
    debug_assert_eq!(acc.len(), other.len());
    for (a, b) in acc.iter_mut().zip(other) {
        *a ^= b;
    }
}

/// Friend lists of users A..F from the common-friends example.
pub fn demo_payloads() -> Vec<MessagePayload> {
    [
        ("A", &["B", "C", "D"][..]),
        ("B", &["A", "D", "E"]),
        ("C", &["A", "E"]),
        ("D", &["A", "B", "F"]),
        ("E", &["B", "C", "F"]),
        ("F", &["D", "E"]),
    ]
    .iter()
    .map(|(o, f)| MessagePayload::new(*o, f.iter().copied()).expect("demo symbols are valid"))
    .collect()
}

/// Random friend lists for users `u0..u{m-1}`; each other user is a friend
/// with probability `density`.
pub fn synthetic_payloads(m: usize, density: f64, seed: u64) -> Vec<MessagePayload> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..m).map(|j| format!("u{j}")).collect();
    (0..m)
        .map(|j| {
            let friends: Vec<&String> = names
                .iter()
                .enumerate()
                .filter(|&(o, _)| o != j && rng.gen::<f64>() < density)
                .map(|(_, s)| s)
                .collect();
            MessagePayload::new(names[j].clone(), friends.into_iter().cloned()).expect("generated symbols are valid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn demo_encoding() {
        let p = demo_payloads();
        assert_eq!(padded_width(&p), 9);
        assert_eq!(p[0].encode(9).unwrap(), b"\x00\x07A:B,C,D".to_vec());
        assert_eq!(p[2].encode(9).unwrap(), b"\x00\x05C:A,E\x00\x00".to_vec());
    }

    #[test]
    fn rejects_separators() {
        assert!(MessagePayload::new("A,B", ["C"]).is_err());
        assert!(MessagePayload::new("A", [""]).is_err());
        assert!(matches!(demo_payloads()[0].encode(5), Err(PayloadError::TooWide { .. })));
    }

    #[test]
    fn self_xor_is_zero() {
        let p = demo_payloads();
        let mut a = p[3].encode(9).unwrap();
        xor_into(&mut a, &p[3].encode(9).unwrap());
        assert!(a.iter().all(|&b| b == 0));
    }

    #[test]
    fn xor_of_two_does_not_decode() {
        let p = demo_payloads();
        let mut a = p[2].encode(9).unwrap();
        xor_into(&mut a, &p[3].encode(9).unwrap());
        assert!(MessagePayload::decode(&a).is_err());
    }

    fn symbol() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9_é]{1,6}"
    }

    proptest! {
        #[test]
        fn round_trip(owner in symbol(), friends in proptest::collection::vec(symbol(), 0..8), extra in 0usize..5) {
            let p = MessagePayload::new(owner, friends).unwrap();
            let width = p.encoded_len() + extra;
            let bytes = p.encode(width).unwrap();
            prop_assert_eq!(bytes.len(), width);
            prop_assert_eq!(MessagePayload::decode(&bytes).unwrap(), p);
        }
    }
}
