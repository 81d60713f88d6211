//! Compressed-file layout: `MNMX1`, symbol count (u32 big-endian), SHA-256 of the
//! canonical strategy JSON, then the coder's bytes.

use minimax_core::mixtures::StrategySpec;
use minimax_core::model_families::FamilySpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Fail;

pub const MAGIC: &[u8; 5] = b"MNMX1";
pub const HEADER_LEN: usize = 5 + 4 + 32;

#[derive(Serialize)]
struct Canonical<'a> {
    family: &'a FamilySpec,
    strategy: &'a StrategySpec,
}

/// Digest of the family and strategy tree as compact JSON with fields in declaration order.
pub fn digest(family: &FamilySpec, strategy: &StrategySpec) -> [u8; 32] {
    let bytes = serde_json::to_vec(&Canonical { family, strategy }).expect("specs serialize");
    Sha256::digest(&bytes).into()
}

#[derive(Debug, PartialEq)]
pub struct Header {
    pub n: u32,
    pub digest: [u8; 32],
}

pub fn write(n: u32, digest: &[u8; 32], payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&n.to_be_bytes());
    out.extend_from_slice(digest);
    out.extend_from_slice(payload);
    out
}

pub fn read(bytes: &[u8]) -> Result<(Header, &[u8]), Fail> {
    if bytes.len() < HEADER_LEN {
        return Err(Fail::Data(format!("file has {} bytes, shorter than the {HEADER_LEN}-byte header", bytes.len())));
    }
    if &bytes[..5] != MAGIC {
        return Err(Fail::Data("not a compressed file (bad magic)".into()));
    }
    let n = u32::from_be_bytes(bytes[5..9].try_into().unwrap());
    let digest = bytes[9..HEADER_LEN].try_into().unwrap();
    Ok((Header { n, digest }, &bytes[HEADER_LEN..]))
}

/// Bytes to symbols: bits MSB-first for a binary alphabet, one symbol per byte otherwise.
pub fn unpack(bytes: &[u8], alphabet: usize) -> Result<Vec<usize>, Fail> {
    if alphabet == 2 {
        return Ok(bytes.iter().flat_map(|b| (0..8).rev().map(move |i| ((b >> i) & 1) as usize)).collect());
    }
    if let Some((pos, b)) = bytes.iter().enumerate().find(|(_, b)| **b as usize >= alphabet) {
        return Err(Fail::Data(format!("byte {b} at offset {pos} is outside the alphabet of size {alphabet}")));
    }
    Ok(bytes.iter().map(|b| *b as usize).collect())
}

pub fn pack(symbols: &[usize], alphabet: usize) -> Vec<u8> {
    if alphabet == 2 {
        return symbols
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, s)| acc | ((*s as u8) << (7 - i))))
            .collect();
    }
    symbols.iter().map(|s| *s as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let d = [7u8; 32];
        let file = write(123_456, &d, &[1, 2, 3]);
        let (h, payload) = read(&file).unwrap();
        assert_eq!(h, Header { n: 123_456, digest: d });
        assert_eq!(payload, &[1, 2, 3]);
        assert!(read(&file[..HEADER_LEN - 1]).is_err());
    }

    #[test]
    fn bits_are_msb_first() {
        let s = unpack(&[0b1010_0001], 2).unwrap();
        assert_eq!(s, vec![1, 0, 1, 0, 0, 0, 0, 1]);
        assert_eq!(pack(&s, 2), vec![0b1010_0001]);
        assert!(unpack(&[3], 3).is_err());
        assert_eq!(pack(&unpack(&[0, 2, 1], 3).unwrap(), 3), vec![0, 2, 1]);
    }
}
