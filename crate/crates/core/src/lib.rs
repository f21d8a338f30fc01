//! Three-factor ATM authorization: card number, PIN and fingerprint.
//!
//! - [`minutiae`]: fingerprint templates, matching, synthetic populations.
//! - [`vault`]: cardholders, PIN digests and the journaled account ledger.
//! - [`wire`]: the binary terminal protocol.
//! - [`switch`]: the session state machine and its TCP and HTTP front ends.
//! - [`teller`]: the terminal client, scripted and interactive.
//! - [`enroll`]: offline operator tools.

pub mod cli;
pub mod clock;
pub mod enroll;
pub mod minutiae;
pub mod switch;
pub mod teller;
pub mod vault;
pub mod wire;
