//! Standard base64 with padding, as used inside the raw-data envelope.
//!
//! Encoding is canonical (single line, `=` padding). Decoding accepts
//! ASCII whitespace between groups, since envelopes may arrive with the
//! text content wrapped, and rejects everything else with
//! [`Status::PROTO_ERR`]: characters outside the alphabet, misplaced or
//! missing padding, and non-canonical trailing bits.

use alloc::string::String;
use alloc::vec::Vec;

use crate::status::Status;

const ALPHABET: &[u8; 64] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

const INVALID: u8 = 0xff;

const fn reverse_table() -> [u8; 256] {
    let mut table = [INVALID; 256];
    let mut i = 0;
    while i < 64 {
        table[ALPHABET[i] as usize] = i as u8;
        i += 1;
    }
    table
}

const REVERSE: [u8; 256] = reverse_table();

pub fn encode(data: &[u8]) -> String {
    let mut out = String::with_capacity(data.len().div_ceil(3) * 4);
    let mut chunks = data.chunks_exact(3);
    for chunk in &mut chunks {
        let n = (chunk[0] as u32) << 16 | (chunk[1] as u32) << 8 | chunk[2] as u32;
        out.push(ALPHABET[(n >> 18) as usize & 0x3f] as char);
        out.push(ALPHABET[(n >> 12) as usize & 0x3f] as char);
        out.push(ALPHABET[(n >> 6) as usize & 0x3f] as char);
        out.push(ALPHABET[n as usize & 0x3f] as char);
    }
    match chunks.remainder() {
        [] => {}
        [a] => {
            let n = (*a as u32) << 16;
            out.push(ALPHABET[(n >> 18) as usize & 0x3f] as char);
            out.push(ALPHABET[(n >> 12) as usize & 0x3f] as char);
            out.push_str("==");
        }
        [a, b] => {
            let n = (*a as u32) << 16 | (*b as u32) << 8;
            out.push(ALPHABET[(n >> 18) as usize & 0x3f] as char);
            out.push(ALPHABET[(n >> 12) as usize & 0x3f] as char);
            out.push(ALPHABET[(n >> 6) as usize & 0x3f] as char);
            out.push('=');
        }
        _ => unreachable!(),
    }
    out
}

pub fn decode(text: &str) -> Result<Vec<u8>, Status> {
    // Strip interior whitespace first so padding position checks see
    // the logical character stream.
    let mut symbols: Vec<u8> = Vec::with_capacity(text.len());
    for &b in text.as_bytes() {
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {}
            _ => symbols.push(b),
        }
    }
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    if !symbols.len().is_multiple_of(4) {
        return Err(Status::PROTO_ERR);
    }

    let mut out = Vec::with_capacity(symbols.len() / 4 * 3);
    let total_groups = symbols.len() / 4;
    for (group_idx, group) in symbols.chunks_exact(4).enumerate() {
        let last = group_idx + 1 == total_groups;
        let pad = group.iter().filter(|&&b| b == b'=').count();
        match pad {
            0 => {}
            // Padding may only terminate the final group.
            1 if last && group[3] == b'=' => {}
            2 if last && group[2] == b'=' && group[3] == b'=' => {}
            _ => return Err(Status::PROTO_ERR),
        }
        let mut n: u32 = 0;
        for &b in &group[..4 - pad] {
            let v = REVERSE[b as usize];
            if v == INVALID {
                return Err(Status::PROTO_ERR);
            }
            n = n << 6 | v as u32;
        }
        match pad {
            0 => {
                out.push((n >> 16) as u8);
                out.push((n >> 8) as u8);
                out.push(n as u8);
            }
            1 => {
                // 18 significant bits decode to 2 bytes; the low 2 bits
                // must be zero for a canonical encoding.
                if n & 0x3 != 0 {
                    return Err(Status::PROTO_ERR);
                }
                n >>= 2;
                out.push((n >> 8) as u8);
                out.push(n as u8);
            }
            2 => {
                if n & 0xf != 0 {
                    return Err(Status::PROTO_ERR);
                }
                out.push((n >> 4) as u8);
            }
            _ => unreachable!(),
        }
    }
    Ok(out)
}
