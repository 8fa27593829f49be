//! GPT-2 style reversible mapping between raw bytes and printable codepoints.

use std::sync::OnceLock;

struct Tables {
    byte_to_char: [char; 256],
    char_to_byte: std::collections::HashMap<char, u8>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut byte_to_char = ['\0'; 256];
        let printable =
            |b: u8| (b'!'..=b'~').contains(&b) || (0xA1..=0xAC).contains(&b) || (0xAE..=0xFF).contains(&b);
        let mut shift = 0u32;
        for b in 0..=255u8 {
            byte_to_char[b as usize] = if printable(b) {
                char::from(b)
            } else {
                let c = char::from_u32(256 + shift).expect("valid codepoint");
                shift += 1;
                c
            };
        }
        let char_to_byte = byte_to_char.iter().enumerate().map(|(b, &c)| (c, b as u8)).collect();
        Tables { byte_to_char, char_to_byte }
    })
}

#[inline]
pub fn byte_to_char(b: u8) -> char {
    tables().byte_to_char[b as usize]
}

#[inline]
pub fn char_to_byte(c: char) -> Option<u8> {
    tables().char_to_byte.get(&c).copied()
}

/// Maps raw bytes to their byte-level token string.
pub fn encode_bytes(bytes: &[u8]) -> String {
    bytes.iter().map(|&b| byte_to_char(b)).collect()
}

/// Inverse of [`encode_bytes`]; `None` if `s` contains a codepoint outside
/// the byte-level alphabet.
pub fn decode_str(s: &str) -> Option<Vec<u8>> {
    s.chars().map(char_to_byte).collect()
}
