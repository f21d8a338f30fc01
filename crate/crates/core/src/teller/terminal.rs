use std::io::{self, Read, Write};
use std::net::TcpStream;

use crate::minutiae::FingerprintTemplate;
use crate::wire::{Message, ResponseCode, Token, TxnType, encode_pin_block, read_frame};

use super::TellerError;

/// Client end of one terminal connection. Remembers the session token once
/// the card and PIN are approved and attaches it to later requests.
pub struct Terminal<S> {
    stream: S,
    token: Token,
    transcript: Vec<String>,
}

impl Terminal<TcpStream> {
    pub fn connect(addr: &str) -> Result<Self, TellerError> {
        let stream =
            TcpStream::connect(addr).map_err(|e| TellerError::Connect(format!("{addr}: {e}")))?;
        stream.set_nodelay(true).ok();
        Ok(Terminal::new(stream))
    }
}

impl<S: Read + Write> Terminal<S> {
    pub fn new(stream: S) -> Self {
        Terminal {
            stream,
            token: Token::ZERO,
            transcript: Vec::new(),
        }
    }

    pub fn token(&self) -> Token {
        self.token
    }

    pub fn into_inner(self) -> S {
        self.stream
    }

    /// Transcript lines (`> request`, `< response`) since the last call.
    pub fn take_transcript(&mut self) -> Vec<String> {
        std::mem::take(&mut self.transcript)
    }

    /// Sends one frame and waits for the reply.
    pub fn request(&mut self, msg: &Message) -> Result<Message, TellerError> {
        self.transcript.push(format!("> {}", describe(msg)));
        let bytes = msg
            .to_bytes()
            .map_err(|e| TellerError::Lost(e.to_string()))?;
        self.stream.write_all(&bytes).map_err(lost)?;
        self.stream.flush().map_err(lost)?;
        let frame = read_frame(&mut self.stream)
            .map_err(|e| TellerError::Lost(e.to_string()))?
            .ok_or_else(|| TellerError::Lost("switch closed the connection".into()))?;
        let resp = Message::from_frame(&frame)
            .map_err(|e| TellerError::Lost(format!("undecodable response: {e}")))?;
        self.transcript.push(format!("< {}", describe(&resp)));
        Ok(resp)
    }

    /// Card and PIN in one request; the PIN leaves only as a PIN block.
    pub fn authenticate(&mut self, pan: &str, pin: &str) -> Result<Message, TellerError> {
        let pin_block =
            encode_pin_block(pin, pan).map_err(|e| TellerError::Input(e.to_string()))?;
        let resp = self.request(&Message::AuthCardReq {
            pan: pan.to_owned(),
            pin_block,
        })?;
        if let Message::AuthCardResp {
            code: ResponseCode::Approved,
            token,
            ..
        } = resp
        {
            self.token = token;
        }
        Ok(resp)
    }

    pub fn verify_fingerprint(
        &mut self,
        sample: FingerprintTemplate,
    ) -> Result<Message, TellerError> {
        self.request(&Message::BioVerifyReq {
            token: self.token,
            sample,
        })
    }

    pub fn transact(&mut self, txn_type: TxnType, amount: u64) -> Result<Message, TellerError> {
        self.request(&Message::TxnReq {
            token: self.token,
            txn_type,
            amount,
        })
    }

    pub fn end(&mut self) -> Result<Message, TellerError> {
        let resp = self.request(&Message::EndSession { token: self.token })?;
        self.token = Token::ZERO;
        Ok(resp)
    }
}

fn lost(e: io::Error) -> TellerError {
    TellerError::Lost(e.to_string())
}

/// Stream wrapper that keeps a copy of every byte written, for comparing
/// what two front ends put on the wire.
pub struct RecordingStream<S> {
    pub inner: S,
    pub sent: Vec<u8>,
}

impl<S> RecordingStream<S> {
    pub fn new(inner: S) -> Self {
        RecordingStream {
            inner,
            sent: Vec::new(),
        }
    }
}

impl<S: Read> Read for RecordingStream<S> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.inner.read(buf)
    }
}

impl<S: Write> Write for RecordingStream<S> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.sent.extend_from_slice(&buf[..n]);
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// One-line rendering of a message for transcripts. PIN blocks are never
/// shown, and card numbers are masked.
pub fn describe(msg: &Message) -> String {
    let name = msg.msg_type().name();
    match msg {
        Message::AuthCardReq { pan, .. } => format!("{name} pan={}", mask_pan(pan)),
        Message::AuthCardResp {
            code,
            token,
            retries_remaining,
        } => format!("{name} {code} token={token} retries={retries_remaining}"),
        Message::BioVerifyReq { token, sample } => {
            format!("{name} token={token} minutiae={}", sample.len())
        }
        Message::BioVerifyResp { code, score_milli } => {
            format!("{name} {code} score_milli={score_milli}")
        }
        Message::TxnReq {
            token,
            txn_type,
            amount,
        } => format!("{name} token={token} {txn_type} {amount}"),
        Message::TxnResp {
            code,
            balance,
            records,
        } => {
            let mut s = format!("{name} {code} balance={balance} records={}", records.len());
            for r in records {
                s.push_str(&format!(
                    "\n    #{} {} {} -> {} at {}",
                    r.seq, r.kind, r.amount, r.resulting_balance, r.timestamp
                ));
            }
            s
        }
        Message::EndSession { token } => format!("{name} token={token}"),
        Message::Err { code } => format!("{name} {code}"),
    }
}

/// First six and last four digits kept.
pub fn mask_pan(pan: &str) -> String {
    if pan.len() <= 10 {
        return "*".repeat(pan.len());
    }
    format!(
        "{}{}{}",
        &pan[..6],
        "*".repeat(pan.len() - 10),
        &pan[pan.len() - 4..]
    )
}
