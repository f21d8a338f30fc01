use std::collections::{HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};

use crate::clock::{Clock, SystemClock};
use crate::vault::Vault;
use crate::wire::{Frame, Message, ResponseCode, Token};

use super::session::{AuditEvent, Env, Session, SessionState, Step, expire, reject, transition};
use super::{AUDIT_FILE, SwitchConfig, SwitchError};

/// Idle timeouts after which a terminated session is forgotten. A request on
/// a forgotten token is treated like one on a token never issued.
pub const TOMBSTONE_TIMEOUTS: u64 = 10;

/// Result of dispatching one request.
#[derive(Debug, Clone, PartialEq)]
pub struct Dispatch {
    pub response: Message,
    /// False when the request named a token the switch never issued.
    pub session_found: bool,
}

/// The authorization switch: session table, audit trail and vault, shared by
/// the TCP listener and the HTTP gateway.
///
/// A card-and-PIN request always starts a fresh session; everything after
/// that is addressed by the token it was issued. Terminated sessions are kept
/// as tombstones so late requests on their tokens see `InvalidSession`; the
/// reaper drops them after [`TOMBSTONE_TIMEOUTS`] idle timeouts.
pub struct Switch {
    vault: Arc<Vault>,
    config: SwitchConfig,
    sessions: Mutex<HashMap<Token, Arc<Mutex<Session>>>>,
    audit: Mutex<AuditLog>,
    token_rng: Mutex<Box<dyn RngCore + Send>>,
    clock: Arc<dyn Clock>,
}

/// Events kept in memory when the audit file holds the full trail.
const AUDIT_TAIL: usize = 4096;

struct AuditLog {
    events: VecDeque<AuditEvent>,
    file: Option<File>,
}

fn lock<T: ?Sized>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Switch {
    pub fn new(vault: Arc<Vault>, config: SwitchConfig) -> Switch {
        Switch {
            vault,
            config,
            sessions: Mutex::new(HashMap::new()),
            audit: Mutex::new(AuditLog {
                events: VecDeque::new(),
                file: None,
            }),
            token_rng: Mutex::new(Box::new(StdRng::from_os_rng())),
            clock: Arc::new(SystemClock),
        }
    }

    /// Opens the vault in `config.data_dir` and appends audit lines to the
    /// audit file there.
    pub fn open(config: SwitchConfig) -> Result<Switch, SwitchError> {
        config.validate()?;
        let vault = Vault::open(&config.data_dir)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(config.data_dir.join(AUDIT_FILE))?;
        let switch = Switch::new(Arc::new(vault), config);
        lock(&switch.audit).file = Some(file);
        Ok(switch)
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Arc::new(clock);
        self
    }

    /// Seeded token source, for reproducible sessions.
    pub fn with_token_rng(mut self, rng: impl RngCore + Send + 'static) -> Self {
        self.token_rng = Mutex::new(Box::new(rng));
        self
    }

    pub fn vault(&self) -> &Arc<Vault> {
        &self.vault
    }

    pub fn config(&self) -> &SwitchConfig {
        &self.config
    }

    pub fn handle(&self, msg: &Message) -> Message {
        self.dispatch(msg).response
    }

    /// Handles a decoded frame; undecodable payloads get `ERR Malformed`.
    pub fn handle_frame(&self, frame: &Frame) -> Message {
        match Message::from_frame(frame) {
            Ok(msg) => self.handle(&msg),
            Err(_) => Message::Err {
                code: ResponseCode::Malformed,
            },
        }
    }

    pub fn dispatch(&self, msg: &Message) -> Dispatch {
        let now = self.clock.now_ms();
        let token = match msg {
            Message::AuthCardReq { .. } => None,
            Message::BioVerifyReq { token, .. }
            | Message::TxnReq { token, .. }
            | Message::EndSession { token } => Some(*token),
            _ => {
                return Dispatch {
                    response: Message::Err {
                        code: ResponseCode::Malformed,
                    },
                    session_found: true,
                };
            }
        };
        let Some(token) = token else {
            return Dispatch {
                response: self.start_session(msg, now),
                session_found: true,
            };
        };
        let Some(cell) = lock(&self.sessions).get(&token).cloned() else {
            return Dispatch {
                response: reject(msg, ResponseCode::InvalidSession),
                session_found: false,
            };
        };
        let mut session = lock(&cell);
        if let Some((expired, event)) = expire(&session, now, self.config.session_timeout_ms()) {
            *session = expired;
            self.record(event);
        }
        let step = self.run(&session, msg, now);
        *session = step.session;
        if let Some(event) = step.audit {
            self.record(event);
        }
        Dispatch {
            response: step.response,
            session_found: true,
        }
    }

    fn start_session(&self, msg: &Message, now: u64) -> Message {
        let step = self.run(&Session::new(now), msg, now);
        if !step.session.token.is_zero() {
            lock(&self.sessions).insert(step.session.token, Arc::new(Mutex::new(step.session)));
        }
        if let Some(event) = step.audit {
            self.record(event);
        }
        step.response
    }

    fn run(&self, session: &Session, msg: &Message, now_ms: u64) -> Step {
        let mut new_token = || self.fresh_token();
        let mut env = Env {
            vault: &self.vault,
            config: &self.config,
            now_ms,
            new_token: &mut new_token,
        };
        transition(session, msg, &mut env)
    }

    /// Issues a token that is neither zero nor held by any session, live or
    /// terminated.
    fn fresh_token(&self) -> Token {
        let sessions = lock(&self.sessions);
        let mut rng = lock(&self.token_rng);
        loop {
            let mut bytes = [0u8; 8];
            rng.fill_bytes(&mut bytes);
            let token = Token(bytes);
            if !token.is_zero() && !sessions.contains_key(&token) {
                return token;
            }
        }
    }

    /// Terminates every session idle past the timeout and forgets old
    /// tombstones; returns how many sessions were terminated.
    pub fn expire_idle(&self) -> usize {
        let now = self.clock.now_ms();
        let timeout = self.config.session_timeout_ms();
        let cells: Vec<_> = lock(&self.sessions).values().cloned().collect();
        let mut expired = 0;
        for cell in cells {
            let mut session = lock(&cell);
            if let Some((next, event)) = expire(&session, now, timeout) {
                *session = next;
                self.record(event);
                expired += 1;
            }
        }
        let keep = timeout.saturating_mul(TOMBSTONE_TIMEOUTS);
        lock(&self.sessions).retain(|_, cell| {
            let s = lock(cell);
            s.state != SessionState::Terminated || now.saturating_sub(s.last_activity) < keep
        });
        expired
    }

    /// Sessions held in memory, tombstones included.
    pub fn tracked_sessions(&self) -> usize {
        lock(&self.sessions).len()
    }

    pub fn session(&self, token: Token) -> Option<Session> {
        let cell = lock(&self.sessions).get(&token).cloned()?;
        let session = lock(&cell).clone();
        Some(session)
    }

    pub fn live_sessions(&self) -> usize {
        let cells: Vec<_> = lock(&self.sessions).values().cloned().collect();
        cells.iter().filter(|c| lock(c).is_live()).count()
    }

    /// Every event so far, or only the most recent ones when the switch
    /// writes an audit file.
    pub fn audit_events(&self) -> Vec<AuditEvent> {
        lock(&self.audit).events.iter().cloned().collect()
    }

    fn record(&self, event: AuditEvent) {
        let mut audit = lock(&self.audit);
        if let Some(file) = audit.file.as_mut()
            && let Err(e) = writeln!(file, "{event}")
        {
            tracing::error!("audit write failed: {e}");
        }
        tracing::info!(target: "audit", "{event}");
        if audit.file.is_some() && audit.events.len() >= AUDIT_TAIL {
            audit.events.pop_front();
        }
        audit.events.push_back(event);
    }
}
