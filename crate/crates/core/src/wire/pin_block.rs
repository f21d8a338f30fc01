//! ISO 9564 format-0 style PIN block.
//!
//! The clear PIN field `0 L P P P P (P P) F .. F` is XORed with the PAN field
//! `0 0 0 0 <12 PAN digits>`. This masks the PIN against the account number;
//! it is not encryption.

use std::fmt;

use super::WireError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PinBlock(pub [u8; 8]);

impl PinBlock {
    pub fn to_hex(&self) -> String {
        hex::encode_upper(self.0)
    }
}

impl fmt::Display for PinBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

fn check_pin(pin: &str) -> Result<(), WireError> {
    if !all_digits(pin) {
        return Err(WireError::NonDigit);
    }
    if !(4..=6).contains(&pin.len()) {
        return Err(WireError::BadPinLength(pin.len()));
    }
    Ok(())
}

/// The rightmost 12 PAN digits excluding the check digit, left-padded with
/// zeros, behind four zero nibbles.
fn pan_field(pan: &str) -> Result<[u8; 16], WireError> {
    if !all_digits(pan) {
        return Err(WireError::NonDigit);
    }
    let body = &pan.as_bytes()[..pan.len() - 1];
    let digits = &body[body.len().saturating_sub(12)..];
    let mut nibbles = [0u8; 16];
    for (slot, d) in nibbles[16 - digits.len()..].iter_mut().zip(digits) {
        *slot = d - b'0';
    }
    Ok(nibbles)
}

fn pack(nibbles: &[u8; 16]) -> [u8; 8] {
    let mut out = [0u8; 8];
    for (i, byte) in out.iter_mut().enumerate() {
        *byte = (nibbles[2 * i] << 4) | nibbles[2 * i + 1];
    }
    out
}

fn unpack(bytes: &[u8; 8]) -> [u8; 16] {
    let mut out = [0u8; 16];
    for (i, b) in bytes.iter().enumerate() {
        out[2 * i] = b >> 4;
        out[2 * i + 1] = b & 0x0F;
    }
    out
}

pub fn encode_pin_block(pin: &str, pan: &str) -> Result<PinBlock, WireError> {
    check_pin(pin)?;
    let mut field = [0x0Fu8; 16];
    field[0] = 0;
    field[1] = pin.len() as u8;
    for (slot, d) in field[2..].iter_mut().zip(pin.bytes()) {
        *slot = d - b'0';
    }
    let mask = pan_field(pan)?;
    for (f, m) in field.iter_mut().zip(mask) {
        *f ^= m;
    }
    Ok(PinBlock(pack(&field)))
}

pub fn extract_pin(block: &PinBlock, pan: &str) -> Result<String, WireError> {
    let mask = pan_field(pan)?;
    let mut field = unpack(&block.0);
    for (f, m) in field.iter_mut().zip(mask) {
        *f ^= m;
    }
    if field[0] != 0 {
        return Err(WireError::BadPinBlockControl(field[0]));
    }
    let len = usize::from(field[1]);
    if !(4..=6).contains(&len) {
        return Err(WireError::BadPinLength(len));
    }
    let mut pin = String::with_capacity(len);
    for &d in &field[2..2 + len] {
        if d > 9 {
            return Err(WireError::NonDigit);
        }
        pin.push(char::from(b'0' + d));
    }
    if let Some(pos) = (2 + len..16).find(|&i| field[i] != 0x0F) {
        return Err(WireError::BadPinBlockFill {
            position: pos,
            nibble: field[pos],
        });
    }
    Ok(pin)
}
