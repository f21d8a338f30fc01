//! Per-session authentication state machine: card and PIN, then fingerprint,
//! then any number of transactions.

use std::fmt;

use crate::minutiae::{decide, match_templates};
use crate::vault::{
    CardStatus, DEFAULT_STATEMENT_DEPTH, PinOutcome, TransactionRecord, TxnKind, Vault, VaultError,
};
use crate::wire::{Message, RecordKind, ResponseCode, Token, TxnType, WireRecord, extract_pin};

use super::SwitchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SessionState {
    AwaitCard,
    AwaitBiometric,
    Menu,
    Terminated,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::AwaitCard => "AwaitCard",
            SessionState::AwaitBiometric => "AwaitBiometric",
            SessionState::Menu => "Menu",
            SessionState::Terminated => "Terminated",
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub state: SessionState,
    /// Set once the card and PIN are approved.
    pub pan: Option<String>,
    /// Zero until the card and PIN are approved.
    pub token: Token,
    pub bio_failures: u32,
    pub created_at: u64,
    pub last_activity: u64,
}

impl Session {
    pub fn new(now_ms: u64) -> Session {
        Session {
            state: SessionState::AwaitCard,
            pan: None,
            token: Token::ZERO,
            bio_failures: 0,
            created_at: now_ms,
            last_activity: now_ms,
        }
    }

    pub fn is_live(&self) -> bool {
        self.state != SessionState::Terminated
    }

    pub fn is_expired(&self, now_ms: u64, timeout_ms: u64) -> bool {
        self.is_live() && now_ms.saturating_sub(self.last_activity) > timeout_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AuditKind {
    /// Card+PIN approval or fingerprint approval; `from` tells which.
    AuthOk,
    PinFail,
    BioFail,
    TxnOk,
    TxnFail,
    Timeout,
    End,
}

impl AuditKind {
    pub fn name(self) -> &'static str {
        match self {
            AuditKind::AuthOk => "AuthOk",
            AuditKind::PinFail => "PinFail",
            AuditKind::BioFail => "BioFail",
            AuditKind::TxnOk => "TxnOk",
            AuditKind::TxnFail => "TxnFail",
            AuditKind::Timeout => "Timeout",
            AuditKind::End => "End",
        }
    }
}

impl fmt::Display for AuditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of the audit trail. Never carries PIN material.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEvent {
    pub timestamp: u64,
    pub token: Token,
    pub kind: AuditKind,
    pub from: SessionState,
    pub to: SessionState,
    pub code: ResponseCode,
    pub detail: String,
}

impl fmt::Display for AuditEvent {
    /// `ts|token|kind|from|to|code|detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}|{}|{}|{}|{}|{}|{}",
            self.timestamp, self.token, self.kind, self.from, self.to, self.code, self.detail
        )
    }
}

/// What `transition` may consult and mutate besides the session itself.
pub struct Env<'a> {
    pub vault: &'a Vault,
    pub config: &'a SwitchConfig,
    pub now_ms: u64,
    /// Issues the token for a newly approved session.
    pub new_token: &'a mut dyn FnMut() -> Token,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub session: Session,
    pub response: Message,
    /// `None` only for messages that are not requests at all.
    pub audit: Option<AuditEvent>,
}

/// Applies one request to a session. Deterministic given the session, the
/// message, the vault contents and the token source; vault changes are the
/// only side effect.
pub fn transition(session: &Session, msg: &Message, env: &mut Env<'_>) -> Step {
    let mut next = session.clone();
    if session.is_live() {
        next.last_activity = env.now_ms;
    }
    let (response, kind, detail) = if !is_request(msg) {
        return Step {
            session: session.clone(),
            response: Message::Err {
                code: ResponseCode::Malformed,
            },
            audit: None,
        };
    } else if !session.is_live() {
        (
            reject(msg, ResponseCode::InvalidSession),
            fail_kind(msg),
            "session terminated".into(),
        )
    } else if request_token(msg).is_some_and(|t| t != session.token) {
        (
            reject(msg, ResponseCode::InvalidSession),
            fail_kind(msg),
            "token mismatch".into(),
        )
    } else {
        match (session.state, msg) {
            (SessionState::AwaitCard, Message::AuthCardReq { pan, pin_block }) => {
                auth_card(&mut next, pan, pin_block, env)
            }
            (SessionState::AwaitBiometric, Message::BioVerifyReq { sample, .. }) => {
                bio_verify(&mut next, sample, env)
            }
            (
                SessionState::Menu,
                Message::TxnReq {
                    txn_type, amount, ..
                },
            ) => txn(&mut next, *txn_type, *amount, env),
            (_, Message::EndSession { token }) => {
                next.state = SessionState::Terminated;
                (
                    Message::EndSession { token: *token },
                    AuditKind::End,
                    "ended by terminal".into(),
                )
            }
            _ => (
                reject(msg, ResponseCode::InvalidSession),
                fail_kind(msg),
                "out of order".into(),
            ),
        }
    };
    let code = response.response_code().unwrap_or(ResponseCode::Approved);
    let audit = AuditEvent {
        timestamp: env.now_ms,
        token: if next.token.is_zero() {
            session.token
        } else {
            next.token
        },
        kind,
        from: session.state,
        to: next.state,
        code,
        detail,
    };
    Step {
        session: next,
        response,
        audit: Some(audit),
    }
}

/// Ends an idle session, if it has been idle for longer than the timeout.
pub fn expire(session: &Session, now_ms: u64, timeout_ms: u64) -> Option<(Session, AuditEvent)> {
    if !session.is_expired(now_ms, timeout_ms) {
        return None;
    }
    let mut next = session.clone();
    next.state = SessionState::Terminated;
    let event = AuditEvent {
        timestamp: now_ms,
        token: session.token,
        kind: AuditKind::Timeout,
        from: session.state,
        to: SessionState::Terminated,
        code: ResponseCode::InvalidSession,
        detail: format!("idle {} ms", now_ms.saturating_sub(session.last_activity)),
    };
    Some((next, event))
}

fn is_request(msg: &Message) -> bool {
    matches!(
        msg,
        Message::AuthCardReq { .. }
            | Message::BioVerifyReq { .. }
            | Message::TxnReq { .. }
            | Message::EndSession { .. }
    )
}

fn request_token(msg: &Message) -> Option<Token> {
    match msg {
        Message::BioVerifyReq { token, .. }
        | Message::TxnReq { token, .. }
        | Message::EndSession { token } => Some(*token),
        _ => None,
    }
}

fn fail_kind(msg: &Message) -> AuditKind {
    match msg {
        Message::AuthCardReq { .. } => AuditKind::PinFail,
        Message::BioVerifyReq { .. } => AuditKind::BioFail,
        Message::EndSession { .. } => AuditKind::End,
        _ => AuditKind::TxnFail,
    }
}

/// The response a request gets when it is refused with `code`.
pub fn reject(msg: &Message, code: ResponseCode) -> Message {
    match msg {
        Message::AuthCardReq { .. } => Message::AuthCardResp {
            code,
            token: Token::ZERO,
            retries_remaining: 0,
        },
        Message::BioVerifyReq { .. } => Message::BioVerifyResp {
            code,
            score_milli: 0,
        },
        Message::TxnReq { .. } => Message::TxnResp {
            code,
            balance: 0,
            records: Vec::new(),
        },
        _ => Message::Err { code },
    }
}

fn auth_card(
    next: &mut Session,
    pan: &str,
    pin_block: &crate::wire::PinBlock,
    env: &mut Env<'_>,
) -> (Message, AuditKind, String) {
    let max_tries = env.config.pin_max_tries;
    let resp = |code, token, retries: u32| Message::AuthCardResp {
        code,
        token,
        retries_remaining: u8::try_from(retries).unwrap_or(u8::MAX),
    };
    let Some(card) = env.vault.card(pan) else {
        return (
            resp(ResponseCode::InvalidCard, Token::ZERO, 0),
            AuditKind::PinFail,
            "unknown card".into(),
        );
    };
    if card.status == CardStatus::Blocked {
        next.state = SessionState::Terminated;
        return (
            resp(ResponseCode::CardBlocked, Token::ZERO, 0),
            AuditKind::PinFail,
            "card blocked".into(),
        );
    }
    let remaining = max_tries.saturating_sub(card.failed_pin_attempts);
    let Ok(pin) = extract_pin(pin_block, pan) else {
        return (
            resp(ResponseCode::Malformed, Token::ZERO, remaining),
            AuditKind::PinFail,
            "unreadable PIN block".into(),
        );
    };
    match env.vault.verify_pin(pan, &pin, max_tries) {
        Ok(PinOutcome::Ok) => {
            let token = (env.new_token)();
            next.state = SessionState::AwaitBiometric;
            next.pan = Some(pan.to_owned());
            next.token = token;
            (
                resp(ResponseCode::Approved, token, max_tries),
                AuditKind::AuthOk,
                "card and PIN".into(),
            )
        }
        Ok(PinOutcome::WrongPin { remaining }) => (
            resp(ResponseCode::InvalidPin, Token::ZERO, remaining),
            AuditKind::PinFail,
            format!("wrong PIN, {remaining} left"),
        ),
        Ok(PinOutcome::Blocked) => {
            next.state = SessionState::Terminated;
            (
                resp(ResponseCode::PinTriesExceeded, Token::ZERO, 0),
                AuditKind::PinFail,
                "PIN tries exhausted, card blocked".into(),
            )
        }
        Err(VaultError::UnknownCard) => (
            resp(ResponseCode::InvalidCard, Token::ZERO, 0),
            AuditKind::PinFail,
            "unknown card".into(),
        ),
        Err(e) => {
            next.state = SessionState::Terminated;
            (
                resp(ResponseCode::InvalidSession, Token::ZERO, 0),
                AuditKind::PinFail,
                format!("vault: {e}"),
            )
        }
    }
}

fn bio_verify(
    next: &mut Session,
    sample: &crate::minutiae::FingerprintTemplate,
    env: &mut Env<'_>,
) -> (Message, AuditKind, String) {
    let enrolled = next
        .pan
        .as_deref()
        .and_then(|pan| env.vault.card(pan))
        .and_then(|card| env.vault.template(card.template_id));
    let result = enrolled
        .and_then(|gallery| match_templates(sample, &gallery, &env.config.match_params).ok());
    let Some(result) = result else {
        next.state = SessionState::Terminated;
        return (
            Message::BioVerifyResp {
                code: ResponseCode::InvalidSession,
                score_milli: 0,
            },
            AuditKind::BioFail,
            "no enrolled template".into(),
        );
    };
    let score_milli = score_milli(result.score);
    if decide(&result, env.config.match_threshold) {
        next.state = SessionState::Menu;
        let detail = format!("fingerprint score {score_milli}");
        return (
            Message::BioVerifyResp {
                code: ResponseCode::Approved,
                score_milli,
            },
            AuditKind::AuthOk,
            detail,
        );
    }
    next.bio_failures += 1;
    if next.bio_failures >= env.config.bio_max_tries {
        next.state = SessionState::Terminated;
    }
    (
        Message::BioVerifyResp {
            code: ResponseCode::BiometricMismatch,
            score_milli,
        },
        AuditKind::BioFail,
        format!("fingerprint score {score_milli}"),
    )
}

/// Score in thousandths, truncated. The epsilon keeps exact decimal scores
/// such as 0.7 from truncating to 699.
pub fn score_milli(score: f64) -> u16 {
    (score * 1000.0 + 1e-9).floor().clamp(0.0, 1000.0) as u16
}

fn txn(
    next: &mut Session,
    txn_type: TxnType,
    amount: u64,
    env: &mut Env<'_>,
) -> (Message, AuditKind, String) {
    let account_id = match next.pan.as_deref().and_then(|pan| env.vault.card(pan)) {
        Some(card) => card.account_id,
        None => {
            next.state = SessionState::Terminated;
            return (
                reject(
                    &Message::TxnReq {
                        token: next.token,
                        txn_type,
                        amount,
                    },
                    ResponseCode::InvalidSession,
                ),
                AuditKind::TxnFail,
                "card vanished".into(),
            );
        }
    };
    let balance = || env.vault.balance(account_id).unwrap_or(0);
    let fail = |code: ResponseCode, detail: String| {
        (
            Message::TxnResp {
                code,
                balance: balance(),
                records: Vec::new(),
            },
            AuditKind::TxnFail,
            detail,
        )
    };
    let amount_required = matches!(txn_type, TxnType::Withdraw | TxnType::Deposit);
    if amount_required != (amount != 0) {
        return fail(
            ResponseCode::Malformed,
            format!("{txn_type} with amount {amount}"),
        );
    }
    let outcome = match txn_type {
        TxnType::Withdraw => env
            .vault
            .withdraw(account_id, amount, env.config.dispense_multiple)
            .map(|r| (r.resulting_balance, Vec::new())),
        TxnType::Deposit => env
            .vault
            .deposit(account_id, amount)
            .map(|r| (r.resulting_balance, Vec::new())),
        TxnType::Balance => env.vault.balance(account_id).map(|b| (b, Vec::new())),
        TxnType::Statement => env
            .vault
            .statement(account_id, DEFAULT_STATEMENT_DEPTH)
            .and_then(|records| {
                Ok((
                    env.vault.balance(account_id)?,
                    records.iter().map(wire_record).collect(),
                ))
            }),
    };
    match outcome {
        Ok((balance, records)) => (
            Message::TxnResp {
                code: ResponseCode::Approved,
                balance,
                records,
            },
            AuditKind::TxnOk,
            format!("{txn_type} {amount}"),
        ),
        Err(e @ VaultError::InsufficientFunds { .. }) => {
            fail(ResponseCode::InsufficientFunds, e.to_string())
        }
        Err(e @ VaultError::NotDispensable { .. }) => {
            fail(ResponseCode::NotDispensable, e.to_string())
        }
        Err(e @ (VaultError::NonPositiveAmount | VaultError::BalanceOverflow)) => {
            fail(ResponseCode::Malformed, e.to_string())
        }
        Err(e) => {
            // Journal failure: nothing was committed, and the session cannot
            // safely continue.
            next.state = SessionState::Terminated;
            fail(ResponseCode::InvalidSession, format!("vault: {e}"))
        }
    }
}

pub fn wire_record(r: &TransactionRecord) -> WireRecord {
    WireRecord {
        seq: u32::try_from(r.seq).unwrap_or(u32::MAX),
        kind: match r.kind {
            TxnKind::Deposit => RecordKind::Deposit,
            TxnKind::Withdrawal => RecordKind::Withdrawal,
        },
        amount: r.amount,
        resulting_balance: r.resulting_balance,
        timestamp: r.timestamp,
    }
}
