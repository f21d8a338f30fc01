//! Binary protocol between ATM terminal and switch.
//!
//! Frames are self-delimiting (`A7 4D | version | type | len:u16 | payload |
//! crc:u16`) and each message type has a fixed payload layout. Every decoder
//! here is total: arbitrary input yields a value or an error, never a panic.

mod crc;
mod frame;
mod message;
mod pin_block;

use thiserror::Error;

use crate::minutiae::{FingerprintTemplate, Minutia, MinutiaKind, MinutiaeError};

pub use crc::crc16;
pub use frame::{
    CRC_LEN, Frame, HEADER_LEN, MAGIC, MAX_PAYLOAD, MessageType, VERSION, decode_frame,
    decode_stream, encode_frame, frame_len, read_frame,
};
pub use message::{Message, RECORD_LEN, RecordKind, ResponseCode, Token, TxnType, WireRecord};
pub use pin_block::{PinBlock, encode_pin_block, extract_pin};

use message::Reader;

#[derive(Debug, Error, PartialEq)]
pub enum WireError {
    #[error("bad frame magic")]
    BadMagic,
    #[error("unsupported protocol version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("frame needs {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("crc mismatch: frame says {expected:#06x}, computed {actual:#06x}")]
    CrcMismatch { expected: u16, actual: u16 },
    #[error("unknown message type {0:#04x}")]
    UnknownMessageType(u8),
    #[error("payload of {0} bytes exceeds 65535")]
    PayloadTooLarge(usize),
    #[error("payload needs {needed} bytes, {available} available")]
    ShortPayload { needed: usize, available: usize },
    #[error("{msg_type} payload should be {expected} bytes, got {actual}")]
    PayloadLength {
        msg_type: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("unknown response code {0:#04x}")]
    UnknownResponseCode(u8),
    #[error("unknown transaction type {0}")]
    UnknownTxnType(u8),
    #[error("unknown record kind {0}")]
    UnknownRecordKind(u8),
    #[error("unknown minutia kind byte {0}")]
    UnknownMinutiaKind(u8),
    #[error("minutiae payload declares {declared} records in {bytes} bytes")]
    MinutiaeLength { declared: usize, bytes: usize },
    #[error("invalid template: {0}")]
    Template(#[from] MinutiaeError),
    #[error("too many statement records ({0}) for one response")]
    TooManyRecords(usize),
    #[error("card number must be 1 to 19 ASCII digits")]
    BadPan,
    #[error("non-digit in PIN or PAN")]
    NonDigit,
    #[error("PIN length {0} outside 4..=6")]
    BadPinLength(usize),
    #[error("PIN block control nibble {0:#x} is not 0")]
    BadPinBlockControl(u8),
    #[error("PIN block fill nibble at {position} is {nibble:#x}, expected 0xF")]
    BadPinBlockFill { position: usize, nibble: u8 },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for WireError {
    fn from(e: std::io::Error) -> Self {
        WireError::Io(e.to_string())
    }
}

/// Bytes per minutia in the binary template encoding.
pub const MINUTIA_LEN: usize = 7;

/// `count:u16`, then `x:u16 y:u16 angle:u16 kind:u8` per minutia.
pub fn encode_minutiae(t: &FingerprintTemplate) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + t.len() * MINUTIA_LEN);
    out.extend_from_slice(&(t.len() as u16).to_be_bytes());
    for m in t.minutiae() {
        out.extend_from_slice(&m.x().to_be_bytes());
        out.extend_from_slice(&m.y().to_be_bytes());
        out.extend_from_slice(&m.angle().to_be_bytes());
        out.push(m.kind().wire_code());
    }
    out
}

pub fn decode_minutiae(bytes: &[u8]) -> Result<FingerprintTemplate, WireError> {
    let mut r = Reader::new(bytes);
    let declared = usize::from(r.u16()?);
    if r.remaining() != declared * MINUTIA_LEN {
        return Err(WireError::MinutiaeLength {
            declared,
            bytes: bytes.len(),
        });
    }
    let minutiae = (0..declared)
        .map(|_| {
            let (x, y, angle) = (r.u16()?, r.u16()?, r.u16()?);
            let kind = r.u8()?;
            let kind =
                MinutiaKind::from_wire_code(kind).ok_or(WireError::UnknownMinutiaKind(kind))?;
            Ok(Minutia::new(x, y, angle, kind)?)
        })
        .collect::<Result<Vec<_>, WireError>>()?;
    Ok(FingerprintTemplate::new(minutiae)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_minutia_layout() {
        let t = FingerprintTemplate::new(vec![
            Minutia::new(10, 20, 90, MinutiaKind::RidgeEnding).unwrap(),
        ])
        .unwrap();
        let bytes = encode_minutiae(&t);
        assert_eq!(
            bytes,
            [0x00, 0x01, 0x00, 0x0A, 0x00, 0x14, 0x00, 0x5A, 0x00]
        );
        assert_eq!(decode_minutiae(&bytes).unwrap(), t);
    }

    #[test]
    fn minutiae_decode_errors() {
        assert_eq!(
            decode_minutiae(&[0, 0]),
            Err(WireError::Template(MinutiaeError::EmptyTemplate))
        );
        assert_eq!(
            decode_minutiae(&[0, 2, 0, 1, 0, 1, 0, 1, 0]),
            Err(WireError::MinutiaeLength {
                declared: 2,
                bytes: 9
            })
        );
        assert_eq!(
            decode_minutiae(&[0, 1, 0, 1, 0, 1, 0, 1, 7]),
            Err(WireError::UnknownMinutiaKind(7))
        );
        assert!(matches!(
            decode_minutiae(&[0, 1, 0x03, 0xE9, 0, 1, 0, 1, 0]),
            Err(WireError::Template(
                MinutiaeError::CoordinateOutOfRange { .. }
            ))
        ));
        assert!(decode_minutiae(&[0]).is_err());
    }
}
