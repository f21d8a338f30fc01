//! Typed payloads for each message type. All integers big-endian.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::frame::{Frame, MessageType, decode_frame, encode_frame};
use super::{PinBlock, WireError, decode_minutiae, encode_minutiae};
use crate::minutiae::FingerprintTemplate;

/// Session handle issued by the switch after card and PIN approval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Token(pub [u8; 8]);

impl Token {
    pub const ZERO: Token = Token([0; 8]);

    pub fn is_zero(&self) -> bool {
        *self == Token::ZERO
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Token> {
        let bytes = hex::decode(s).ok()?;
        Some(Token(bytes.try_into().ok()?))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

macro_rules! byte_enum {
    ($(#[$meta:meta])* $name:ident, $err:ident { $($variant:ident = $value:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        #[repr(u8)]
        pub enum $name {
            $($variant = $value),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }
        }

        impl TryFrom<u8> for $name {
            type Error = WireError;

            fn try_from(b: u8) -> Result<Self, WireError> {
                match b {
                    $($value => Ok($name::$variant),)+
                    other => Err(WireError::$err(other)),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name().eq_ignore_ascii_case(s))
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($name)))
            }
        }
    };
}

byte_enum!(
    /// Outcome carried by every response message.
    ResponseCode, UnknownResponseCode {
        Approved = 0x00,
        InvalidCard = 0x01,
        InvalidPin = 0x02,
        PinTriesExceeded = 0x03,
        BiometricMismatch = 0x04,
        InsufficientFunds = 0x05,
        InvalidSession = 0x06,
        CardBlocked = 0x07,
        Malformed = 0x08,
        NotDispensable = 0x09,
    }
);

byte_enum!(TxnType, UnknownTxnType {
    Withdraw = 1,
    Deposit = 2,
    Balance = 3,
    Statement = 4,
});

byte_enum!(
    /// Ledger entry kind as sent in statements.
    RecordKind, UnknownRecordKind {
        Withdrawal = 1,
        Deposit = 2,
    }
);

/// Size of one statement record on the wire.
pub const RECORD_LEN: usize = 4 + 1 + 8 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRecord {
    pub seq: u32,
    pub kind: RecordKind,
    pub amount: u64,
    pub resulting_balance: u64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    AuthCardReq {
        pan: String,
        pin_block: PinBlock,
    },
    AuthCardResp {
        code: ResponseCode,
        token: Token,
        retries_remaining: u8,
    },
    BioVerifyReq {
        token: Token,
        sample: FingerprintTemplate,
    },
    BioVerifyResp {
        code: ResponseCode,
        score_milli: u16,
    },
    TxnReq {
        token: Token,
        txn_type: TxnType,
        amount: u64,
    },
    TxnResp {
        code: ResponseCode,
        balance: u64,
        records: Vec<WireRecord>,
    },
    EndSession {
        token: Token,
    },
    Err {
        code: ResponseCode,
    },
}

impl Message {
    pub fn msg_type(&self) -> MessageType {
        match self {
            Message::AuthCardReq { .. } => MessageType::AuthCardReq,
            Message::AuthCardResp { .. } => MessageType::AuthCardResp,
            Message::BioVerifyReq { .. } => MessageType::BioVerifyReq,
            Message::BioVerifyResp { .. } => MessageType::BioVerifyResp,
            Message::TxnReq { .. } => MessageType::TxnReq,
            Message::TxnResp { .. } => MessageType::TxnResp,
            Message::EndSession { .. } => MessageType::EndSession,
            Message::Err { .. } => MessageType::Err,
        }
    }

    /// Response code for response-type messages.
    pub fn response_code(&self) -> Option<ResponseCode> {
        match self {
            Message::AuthCardResp { code, .. }
            | Message::BioVerifyResp { code, .. }
            | Message::TxnResp { code, .. }
            | Message::Err { code } => Some(*code),
            _ => None,
        }
    }

    pub fn encode_payload(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        match self {
            Message::AuthCardReq { pan, pin_block } => {
                check_pan(pan)?;
                out.push(pan.len() as u8);
                out.extend_from_slice(pan.as_bytes());
                out.extend_from_slice(&pin_block.0);
            }
            Message::AuthCardResp {
                code,
                token,
                retries_remaining,
            } => {
                out.push(*code as u8);
                out.extend_from_slice(&token.0);
                out.push(*retries_remaining);
            }
            Message::BioVerifyReq { token, sample } => {
                out.extend_from_slice(&token.0);
                out.extend_from_slice(&encode_minutiae(sample));
            }
            Message::BioVerifyResp { code, score_milli } => {
                out.push(*code as u8);
                out.extend_from_slice(&score_milli.to_be_bytes());
            }
            Message::TxnReq {
                token,
                txn_type,
                amount,
            } => {
                out.extend_from_slice(&token.0);
                out.push(*txn_type as u8);
                out.extend_from_slice(&amount.to_be_bytes());
            }
            Message::TxnResp {
                code,
                balance,
                records,
            } => {
                let count = u8::try_from(records.len())
                    .map_err(|_| WireError::TooManyRecords(records.len()))?;
                out.push(*code as u8);
                out.extend_from_slice(&balance.to_be_bytes());
                out.push(count);
                for r in records {
                    out.extend_from_slice(&r.seq.to_be_bytes());
                    out.push(r.kind as u8);
                    out.extend_from_slice(&r.amount.to_be_bytes());
                    out.extend_from_slice(&r.resulting_balance.to_be_bytes());
                    out.extend_from_slice(&r.timestamp.to_be_bytes());
                }
            }
            Message::EndSession { token } => out.extend_from_slice(&token.0),
            Message::Err { code } => out.push(*code as u8),
        }
        Ok(out)
    }

    pub fn decode_payload(msg_type: MessageType, payload: &[u8]) -> Result<Message, WireError> {
        let mut r = Reader::new(payload);
        let msg = match msg_type {
            MessageType::AuthCardReq => {
                let len = usize::from(r.u8()?);
                let pan = std::str::from_utf8(r.take(len)?)
                    .map_err(|_| WireError::BadPan)?
                    .to_owned();
                check_pan(&pan)?;
                let pin_block = PinBlock(r.array()?);
                Message::AuthCardReq { pan, pin_block }
            }
            MessageType::AuthCardResp => Message::AuthCardResp {
                code: r.u8()?.try_into()?,
                token: Token(r.array()?),
                retries_remaining: r.u8()?,
            },
            MessageType::BioVerifyReq => {
                let token = Token(r.array()?);
                let sample = decode_minutiae(r.rest())?;
                Message::BioVerifyReq { token, sample }
            }
            MessageType::BioVerifyResp => Message::BioVerifyResp {
                code: r.u8()?.try_into()?,
                score_milli: r.u16()?,
            },
            MessageType::TxnReq => Message::TxnReq {
                token: Token(r.array()?),
                txn_type: r.u8()?.try_into()?,
                amount: r.u64()?,
            },
            MessageType::TxnResp => {
                let code = r.u8()?.try_into()?;
                let balance = r.u64()?;
                let count = usize::from(r.u8()?);
                if r.remaining() != count * RECORD_LEN {
                    return Err(WireError::PayloadLength {
                        msg_type: msg_type.name(),
                        expected: r.consumed() + count * RECORD_LEN,
                        actual: payload.len(),
                    });
                }
                let records = (0..count)
                    .map(|_| {
                        Ok(WireRecord {
                            seq: r.u32()?,
                            kind: r.u8()?.try_into()?,
                            amount: r.u64()?,
                            resulting_balance: r.u64()?,
                            timestamp: r.u64()?,
                        })
                    })
                    .collect::<Result<_, WireError>>()?;
                Message::TxnResp {
                    code,
                    balance,
                    records,
                }
            }
            MessageType::EndSession => Message::EndSession {
                token: Token(r.array()?),
            },
            MessageType::Err => Message::Err {
                code: r.u8()?.try_into()?,
            },
        };
        r.finish(msg_type)?;
        Ok(msg)
    }

    pub fn to_frame(&self) -> Result<Frame, WireError> {
        Ok(Frame::new(self.msg_type(), self.encode_payload()?))
    }

    pub fn from_frame(frame: &Frame) -> Result<Message, WireError> {
        Message::decode_payload(frame.msg_type, &frame.payload)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        encode_frame(&self.to_frame()?)
    }

    /// Decodes one framed message from the front of `bytes`.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Message, usize), WireError> {
        let (frame, used) = decode_frame(bytes)?;
        Ok((Message::from_frame(&frame)?, used))
    }
}

fn check_pan(pan: &str) -> Result<(), WireError> {
    if pan.is_empty() || pan.len() > 19 || !pan.bytes().all(|b| b.is_ascii_digit()) {
        return Err(WireError::BadPan);
    }
    Ok(())
}

/// Bounds-checked big-endian reader over a payload.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or(WireError::ShortPayload {
                needed: self.pos.saturating_add(n),
                available: self.buf.len(),
            })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("take returns N bytes"))
    }

    pub(crate) fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_be_bytes(self.array()?))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.array()?))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_be_bytes(self.array()?))
    }

    pub(crate) fn rest(&mut self) -> &'a [u8] {
        let out = &self.buf[self.pos..];
        self.pos = self.buf.len();
        out
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn consumed(&self) -> usize {
        self.pos
    }

    pub(crate) fn finish(&self, msg_type: MessageType) -> Result<(), WireError> {
        if self.remaining() != 0 {
            return Err(WireError::PayloadLength {
                msg_type: msg_type.name(),
                expected: self.pos,
                actual: self.buf.len(),
            });
        }
        Ok(())
    }
}
