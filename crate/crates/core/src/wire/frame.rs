use std::io::{self, Read};

use super::{WireError, crc16};

pub const MAGIC: [u8; 2] = [0xA7, 0x4D];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 6;
pub const CRC_LEN: usize = 2;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    AuthCardReq = 0x01,
    AuthCardResp = 0x02,
    BioVerifyReq = 0x03,
    BioVerifyResp = 0x04,
    TxnReq = 0x05,
    TxnResp = 0x06,
    EndSession = 0x07,
    Err = 0x7F,
}

impl MessageType {
    pub const ALL: [MessageType; 8] = [
        MessageType::AuthCardReq,
        MessageType::AuthCardResp,
        MessageType::BioVerifyReq,
        MessageType::BioVerifyResp,
        MessageType::TxnReq,
        MessageType::TxnResp,
        MessageType::EndSession,
        MessageType::Err,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageType::AuthCardReq => "AUTH_CARD_REQ",
            MessageType::AuthCardResp => "AUTH_CARD_RESP",
            MessageType::BioVerifyReq => "BIO_VERIFY_REQ",
            MessageType::BioVerifyResp => "BIO_VERIFY_RESP",
            MessageType::TxnReq => "TXN_REQ",
            MessageType::TxnResp => "TXN_RESP",
            MessageType::EndSession => "END_SESSION",
            MessageType::Err => "ERR",
        }
    }
}

impl TryFrom<u8> for MessageType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        MessageType::ALL
            .into_iter()
            .find(|t| *t as u8 == b)
            .ok_or(WireError::UnknownMessageType(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub version: u8,
    pub msg_type: MessageType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(msg_type: MessageType, payload: Vec<u8>) -> Self {
        Frame {
            version: VERSION,
            msg_type,
            payload,
        }
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + CRC_LEN
    }
}

/// Wire image: magic, version, type, BE payload length, payload, BE CRC of
/// everything before it.
pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, WireError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(frame.payload.len()));
    }
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(frame.version);
    out.push(frame.msg_type as u8);
    out.extend_from_slice(&(frame.payload.len() as u16).to_be_bytes());
    out.extend_from_slice(&frame.payload);
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    Ok(out)
}

/// Decodes one frame from the front of `bytes`, returning it with the number
/// of bytes consumed. Trailing bytes are left for the next call.
pub fn decode_frame(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
    let payload_len = check_header(bytes)?;
    let total = HEADER_LEN + payload_len + CRC_LEN;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            needed: total,
            available: bytes.len(),
        });
    }
    let body = &bytes[..HEADER_LEN + payload_len];
    let expected = u16::from_be_bytes([bytes[total - 2], bytes[total - 1]]);
    let actual = crc16(body);
    if expected != actual {
        return Err(WireError::CrcMismatch { expected, actual });
    }
    let msg_type = MessageType::try_from(bytes[3])?;
    Ok((
        Frame {
            version: bytes[2],
            msg_type,
            payload: body[HEADER_LEN..].to_vec(),
        },
        total,
    ))
}

/// Validates magic and version, returning the declared payload length.
fn check_header(bytes: &[u8]) -> Result<usize, WireError> {
    if bytes.len() < HEADER_LEN {
        if !MAGIC.starts_with(&bytes[..bytes.len().min(2)]) {
            return Err(WireError::BadMagic);
        }
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if bytes[..2] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes[2] != VERSION {
        return Err(WireError::UnsupportedVersion(bytes[2]));
    }
    Ok(usize::from(u16::from_be_bytes([bytes[4], bytes[5]])))
}

/// Total encoded length of the frame whose first `HEADER_LEN` bytes are
/// `header`, after validating magic and version.
pub fn frame_len(header: &[u8]) -> Result<usize, WireError> {
    Ok(HEADER_LEN + check_header(header)? + CRC_LEN)
}

/// Decodes every frame in a buffer holding whole frames back to back.
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<Frame>, WireError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (frame, used) = decode_frame(bytes)?;
        frames.push(frame);
        bytes = &bytes[used..];
    }
    Ok(frames)
}

/// Reads exactly one frame from a blocking reader. `Ok(None)` on a clean EOF
/// before the first byte.
pub fn read_frame(reader: &mut impl Read) -> Result<Option<Frame>, WireError> {
    let mut buf = vec![0u8; HEADER_LEN];
    match reader.read_exact(&mut buf[..1]) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    reader.read_exact(&mut buf[1..])?;
    let payload_len = check_header(&buf)?;
    buf.resize(HEADER_LEN + payload_len + CRC_LEN, 0);
    reader.read_exact(&mut buf[HEADER_LEN..])?;
    decode_frame(&buf).map(|(f, _)| Some(f))
}
