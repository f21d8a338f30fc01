//! Bank-side authorization switch.
//!
//! A terminal proves card and PIN, then fingerprint, and only then may
//! transact. [`transition`] is the whole rulebook; [`Switch`] keeps the
//! session table and audit trail around it, and the TCP listener and HTTP
//! gateway are thin adapters over [`Switch::dispatch`].

mod config;
pub mod http;
mod server;
mod service;
mod session;

use thiserror::Error;

use crate::vault::VaultError;

pub use config::SwitchConfig;
pub use server::{BoundAddrs, handle_bytes, reap_idle, run, serve_tcp};
pub use service::{Dispatch, Switch};
pub use session::{
    AuditEvent, AuditKind, Env, Session, SessionState, Step, expire, reject, score_milli,
    transition, wire_record,
};

/// Audit trail, one event per line, in the data directory.
pub const AUDIT_FILE: &str = "audit.log";
/// Demo live samples offered by the gateway's sample picker.
pub const SAMPLES_DIR: &str = "samples";

#[derive(Debug, Error)]
pub enum SwitchError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Vault(#[from] VaultError),
    #[error("cannot bind {addr}: {reason}")]
    Bind { addr: String, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for SwitchError {
    fn from(e: std::io::Error) -> Self {
        SwitchError::Io(e.to_string())
    }
}
