//! Cardholder directory, PIN verification and the account ledger.
//!
//! Every mutation is validated first, then written to the journal (and synced
//! when file-backed), and only then applied in memory. A rejected operation
//! therefore leaves both state and journal untouched. All mutations go through
//! one writer lock, which serializes them per account and orders journal
//! appends globally; reads share the lock.

mod journal;
mod luhn;
mod pin;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock, RwLockReadGuard};

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use thiserror::Error;

use crate::clock::{Clock, SystemClock};
use crate::minutiae::FingerprintTemplate;

pub use journal::{JournalEntry, JournalLine, Replayed, replay};
pub use luhn::{luhn_check, luhn_check_digit};
pub use pin::{MIN_PIN_ITERATIONS, PinDigest};

pub const JOURNAL_FILE: &str = "journal.log";
pub const LOCK_FILE: &str = "vault.lock";
pub const DEFAULT_MAX_PIN_TRIES: u32 = 3;
/// One ₦500 note, in kobo.
pub const DEFAULT_DISPENSE_MULTIPLE: u64 = 50_000;
pub const DEFAULT_STATEMENT_DEPTH: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum VaultError {
    #[error("invalid card number: {0}")]
    InvalidPan(String),
    #[error("card number already enrolled")]
    DuplicatePan,
    #[error("unknown card")]
    UnknownCard,
    #[error("PIN must be 4 to 6 digits")]
    InvalidPinFormat,
    #[error("unknown account {0}")]
    UnknownAccount(u64),
    #[error("amount must be positive")]
    NonPositiveAmount,
    #[error("amount {amount} is not a multiple of {multiple}")]
    NotDispensable { amount: u64, multiple: u64 },
    #[error("insufficient funds: balance {balance}, requested {requested}")]
    InsufficientFunds { balance: u64, requested: u64 },
    #[error("balance would overflow")]
    BalanceOverflow,
    #[error("statement depth must be at least 1")]
    InvalidStatementDepth,
    #[error("journal corrupt at line {line}: {reason}")]
    CorruptJournal { line: usize, reason: String },
    #[error("data directory is locked by another process")]
    Locked,
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for VaultError {
    fn from(e: std::io::Error) -> Self {
        VaultError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AccountId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CardStatus {
    Active,
    Blocked,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardRecord {
    pub pan: String,
    pub pin_digest: PinDigest,
    pub template_id: TemplateId,
    pub account_id: AccountId,
    pub status: CardStatus,
    /// Not journaled; resets to zero when the vault is reopened.
    pub failed_pin_attempts: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnKind {
    Deposit,
    Withdrawal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransactionRecord {
    /// Journal sequence number of the line that recorded this transaction.
    pub seq: u64,
    pub timestamp: u64,
    pub kind: TxnKind,
    pub amount: u64,
    pub resulting_balance: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Account {
    pub account_id: AccountId,
    pub opening_balance: u64,
    pub balance: u64,
    pub records: Vec<TransactionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PinOutcome {
    Ok,
    WrongPin { remaining: u32 },
    Blocked,
}

/// Complete in-memory vault contents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VaultState {
    pub cards: BTreeMap<String, CardRecord>,
    pub accounts: BTreeMap<AccountId, Account>,
    pub templates: BTreeMap<TemplateId, FingerprintTemplate>,
    /// Sequence number of the next journal line.
    pub next_seq: u64,
}

impl VaultState {
    /// The state as a replay would reconstruct it: PIN failure counters are
    /// session-scoped and not journaled.
    pub fn durable(&self) -> VaultState {
        let mut out = self.clone();
        for card in out.cards.values_mut() {
            card.failed_pin_attempts = 0;
        }
        out
    }

    fn seq(&self) -> u64 {
        self.next_seq.max(1)
    }

    /// Applies a journal line, checking it against the current state.
    pub(crate) fn apply(&mut self, line: &JournalLine) -> Result<(), String> {
        if line.seq < self.seq() {
            return Err(format!(
                "sequence {} does not advance past {}",
                line.seq,
                self.seq() - 1
            ));
        }
        match &line.entry {
            JournalEntry::Enroll {
                pan,
                account_id,
                template_id,
                opening_balance,
                pin,
                template,
            } => {
                if self.cards.contains_key(pan) {
                    return Err(format!("card {pan} enrolled twice"));
                }
                if self.accounts.contains_key(account_id)
                    || self.templates.contains_key(template_id)
                {
                    return Err("account or template id reused".into());
                }
                self.cards.insert(
                    pan.clone(),
                    CardRecord {
                        pan: pan.clone(),
                        pin_digest: pin.clone(),
                        template_id: *template_id,
                        account_id: *account_id,
                        status: CardStatus::Active,
                        failed_pin_attempts: 0,
                    },
                );
                self.accounts.insert(
                    *account_id,
                    Account {
                        account_id: *account_id,
                        opening_balance: *opening_balance,
                        balance: *opening_balance,
                        records: Vec::new(),
                    },
                );
                self.templates.insert(*template_id, template.clone());
            }
            JournalEntry::Block { pan } | JournalEntry::Unblock { pan } => {
                let card = self
                    .cards
                    .get_mut(pan)
                    .ok_or_else(|| format!("status change for unknown card {pan}"))?;
                card.failed_pin_attempts = 0;
                card.status = if matches!(line.entry, JournalEntry::Block { .. }) {
                    CardStatus::Blocked
                } else {
                    CardStatus::Active
                };
            }
            JournalEntry::Deposit {
                account_id,
                amount,
                resulting_balance,
            }
            | JournalEntry::Withdrawal {
                account_id,
                amount,
                resulting_balance,
            } => {
                let account = self
                    .accounts
                    .get_mut(account_id)
                    .ok_or_else(|| format!("transaction on unknown account {}", account_id.0))?;
                let deposit = matches!(line.entry, JournalEntry::Deposit { .. });
                let expected = if deposit {
                    account.balance.checked_add(*amount)
                } else {
                    account.balance.checked_sub(*amount)
                };
                if *amount == 0 || expected != Some(*resulting_balance) {
                    return Err(format!(
                        "transaction of {amount} from {} does not yield {resulting_balance}",
                        account.balance
                    ));
                }
                account.balance = *resulting_balance;
                account.records.push(TransactionRecord {
                    seq: line.seq,
                    timestamp: line.timestamp,
                    kind: if deposit {
                        TxnKind::Deposit
                    } else {
                        TxnKind::Withdrawal
                    },
                    amount: *amount,
                    resulting_balance: *resulting_balance,
                });
            }
        }
        self.next_seq = line.seq + 1;
        Ok(())
    }
}

enum Sink {
    Memory(Vec<u8>),
    File { file: File, _lock: File },
}

impl Sink {
    fn append(&mut self, line: &str) -> Result<(), VaultError> {
        match self {
            Sink::Memory(buf) => buf.extend_from_slice(line.as_bytes()),
            Sink::File { file, .. } => {
                file.write_all(line.as_bytes())?;
                file.sync_data()?;
            }
        }
        Ok(())
    }
}

struct Inner {
    state: VaultState,
    sink: Sink,
}

pub struct Vault {
    inner: RwLock<Inner>,
    clock: Box<dyn Clock>,
    salt_rng: Mutex<Box<dyn RngCore + Send>>,
    pin_iterations: u32,
    data_dir: Option<PathBuf>,
}

impl std::fmt::Debug for Vault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vault")
            .field("data_dir", &self.data_dir)
            .finish_non_exhaustive()
    }
}

impl Vault {
    /// Vault whose journal lives in memory; see [`Vault::journal_bytes`].
    pub fn in_memory() -> Vault {
        Vault::build(VaultState::default(), Sink::Memory(Vec::new()), None)
    }

    /// Rebuilds an in-memory vault from journal bytes, discarding a torn tail.
    pub fn from_journal(bytes: &[u8]) -> Result<Vault, VaultError> {
        let r = replay(bytes)?;
        Ok(Vault::build(
            r.state,
            Sink::Memory(bytes[..r.valid_len].to_vec()),
            None,
        ))
    }

    /// Opens (creating if needed) the vault in `dir`, taking an exclusive
    /// lock on it for the lifetime of the returned value.
    pub fn open(dir: impl AsRef<Path>) -> Result<Vault, VaultError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(dir.join(LOCK_FILE))?;
        lock.try_lock().map_err(|e| match e {
            fs::TryLockError::WouldBlock => VaultError::Locked,
            fs::TryLockError::Error(e) => e.into(),
        })?;

        let path = dir.join(JOURNAL_FILE);
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&path)?;
        let bytes = fs::read(&path)?;
        let r = replay(&bytes)?;
        if r.dropped_tail {
            tracing::warn!(
                discarded = bytes.len() - r.valid_len,
                "dropping torn journal tail"
            );
            file.set_len(r.valid_len as u64)?;
            file.sync_data()?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(Vault::build(
            r.state,
            Sink::File { file, _lock: lock },
            Some(dir.to_owned()),
        ))
    }

    fn build(state: VaultState, sink: Sink, data_dir: Option<PathBuf>) -> Vault {
        Vault {
            inner: RwLock::new(Inner { state, sink }),
            clock: Box::new(SystemClock),
            salt_rng: Mutex::new(Box::new(StdRng::from_os_rng())),
            pin_iterations: MIN_PIN_ITERATIONS,
            data_dir,
        }
    }

    pub fn with_clock(mut self, clock: impl Clock + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    /// Replaces the salt source, e.g. with a seeded generator for
    /// reproducible journals.
    pub fn with_salt_rng(mut self, rng: impl RngCore + Send + 'static) -> Self {
        self.salt_rng = Mutex::new(Box::new(rng));
        self
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    fn read(&self) -> RwLockReadGuard<'_, Inner> {
        self.inner.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` under the writer lock. `f` validates and returns the journal
    /// entry to commit, if any, plus a value handed on to `after`, which runs
    /// once the entry is durable and applied. An error from `f` leaves
    /// everything untouched.
    fn commit<R, T>(
        &self,
        f: impl FnOnce(&VaultState) -> Result<(Option<JournalEntry>, R), VaultError>,
        after: impl FnOnce(&mut VaultState, R) -> T,
    ) -> Result<T, VaultError> {
        let mut inner = self.inner.write().unwrap_or_else(|e| e.into_inner());
        let (entry, carry) = f(&inner.state)?;
        if let Some(entry) = entry {
            let line = JournalLine {
                seq: inner.state.seq(),
                timestamp: self.clock.now_ms(),
                entry,
            };
            inner.sink.append(&line.encode())?;
            inner
                .state
                .apply(&line)
                .expect("entries are validated before they are journaled");
        }
        Ok(after(&mut inner.state, carry))
    }

    pub fn enroll_cardholder(
        &self,
        pan: &str,
        pin: &str,
        template: FingerprintTemplate,
        opening_balance: u64,
    ) -> Result<(CardRecord, Account), VaultError> {
        check_pan(pan)?;
        if !pin::is_valid_pin(pin) {
            return Err(VaultError::InvalidPinFormat);
        }
        let mut salt = [0u8; 16];
        self.salt_rng
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .fill_bytes(&mut salt);
        let digest = PinDigest::derive(pin, salt, self.pin_iterations);
        let pan = pan.to_owned();
        self.commit(
            |state| {
                if state.cards.contains_key(&pan) {
                    return Err(VaultError::DuplicatePan);
                }
                let next_id = |max: Option<u64>| max.map_or(1, |m| m + 1);
                let entry = JournalEntry::Enroll {
                    pan: pan.clone(),
                    account_id: AccountId(next_id(state.accounts.keys().next_back().map(|a| a.0))),
                    template_id: TemplateId(next_id(
                        state.templates.keys().next_back().map(|t| t.0),
                    )),
                    opening_balance,
                    pin: digest,
                    template,
                };
                Ok((Some(entry), ()))
            },
            |state, ()| {
                let card = state.cards[&pan].clone();
                let account = state.accounts[&card.account_id].clone();
                (card, account)
            },
        )
    }

    /// Checks a PIN, counting failures. The `max_tries`-th consecutive failure
    /// blocks the card; a blocked card reports `Blocked` without checking.
    pub fn verify_pin(
        &self,
        pan: &str,
        candidate: &str,
        max_tries: u32,
    ) -> Result<PinOutcome, VaultError> {
        let digest = {
            let inner = self.read();
            let card = inner.state.cards.get(pan).ok_or(VaultError::UnknownCard)?;
            if card.status == CardStatus::Blocked {
                return Ok(PinOutcome::Blocked);
            }
            card.pin_digest.clone()
        };
        // The key derivation runs outside the lock.
        let matches = pin::is_valid_pin(candidate) && digest.verify(candidate);
        let pan = pan.to_owned();
        self.commit(
            |state| {
                let card = state.cards.get(&pan).ok_or(VaultError::UnknownCard)?;
                if card.status == CardStatus::Blocked {
                    return Ok((None, PinOutcome::Blocked));
                }
                if matches {
                    return Ok((None, PinOutcome::Ok));
                }
                if card.failed_pin_attempts + 1 >= max_tries {
                    Ok((
                        Some(JournalEntry::Block { pan: pan.clone() }),
                        PinOutcome::Blocked,
                    ))
                } else {
                    let remaining = max_tries - card.failed_pin_attempts - 1;
                    Ok((None, PinOutcome::WrongPin { remaining }))
                }
            },
            |state, outcome| {
                let card = state.cards.get_mut(&pan).expect("checked above");
                match outcome {
                    PinOutcome::Ok => card.failed_pin_attempts = 0,
                    PinOutcome::WrongPin { .. } => card.failed_pin_attempts += 1,
                    PinOutcome::Blocked => {}
                }
                outcome
            },
        )
    }

    pub fn block(&self, pan: &str) -> Result<(), VaultError> {
        self.set_status(pan, CardStatus::Blocked)
    }

    /// Operator unblock; also clears the failure counter.
    pub fn unblock(&self, pan: &str) -> Result<(), VaultError> {
        self.set_status(pan, CardStatus::Active)
    }

    fn set_status(&self, pan: &str, status: CardStatus) -> Result<(), VaultError> {
        let pan = pan.to_owned();
        self.commit(
            |state| {
                state.cards.get(&pan).ok_or(VaultError::UnknownCard)?;
                let entry = match status {
                    CardStatus::Blocked => JournalEntry::Block { pan: pan.clone() },
                    CardStatus::Active => JournalEntry::Unblock { pan: pan.clone() },
                };
                Ok((Some(entry), ()))
            },
            |_, _| (),
        )
    }

    pub fn deposit(
        &self,
        account_id: AccountId,
        amount: u64,
    ) -> Result<TransactionRecord, VaultError> {
        self.commit(
            |state| {
                let account = state
                    .accounts
                    .get(&account_id)
                    .ok_or(VaultError::UnknownAccount(account_id.0))?;
                if amount == 0 {
                    return Err(VaultError::NonPositiveAmount);
                }
                let resulting_balance = account
                    .balance
                    .checked_add(amount)
                    .ok_or(VaultError::BalanceOverflow)?;
                let entry = JournalEntry::Deposit {
                    account_id,
                    amount,
                    resulting_balance,
                };
                Ok((Some(entry), ()))
            },
            |state, _| {
                *state.accounts[&account_id]
                    .records
                    .last()
                    .expect("just appended")
            },
        )
    }

    pub fn withdraw(
        &self,
        account_id: AccountId,
        amount: u64,
        dispense_multiple: u64,
    ) -> Result<TransactionRecord, VaultError> {
        self.commit(
            |state| {
                let account = state
                    .accounts
                    .get(&account_id)
                    .ok_or(VaultError::UnknownAccount(account_id.0))?;
                if amount == 0 {
                    return Err(VaultError::NonPositiveAmount);
                }
                if dispense_multiple == 0 || !amount.is_multiple_of(dispense_multiple) {
                    return Err(VaultError::NotDispensable {
                        amount,
                        multiple: dispense_multiple,
                    });
                }
                if amount > account.balance {
                    return Err(VaultError::InsufficientFunds {
                        balance: account.balance,
                        requested: amount,
                    });
                }
                let entry = JournalEntry::Withdrawal {
                    account_id,
                    amount,
                    resulting_balance: account.balance - amount,
                };
                Ok((Some(entry), ()))
            },
            |state, _| {
                *state.accounts[&account_id]
                    .records
                    .last()
                    .expect("just appended")
            },
        )
    }

    /// The last `min(n, total)` records, oldest first.
    pub fn statement(
        &self,
        account_id: AccountId,
        n: usize,
    ) -> Result<Vec<TransactionRecord>, VaultError> {
        if n == 0 {
            return Err(VaultError::InvalidStatementDepth);
        }
        let inner = self.read();
        let account = inner
            .state
            .accounts
            .get(&account_id)
            .ok_or(VaultError::UnknownAccount(account_id.0))?;
        let skip = account.records.len().saturating_sub(n);
        Ok(account.records[skip..].to_vec())
    }

    pub fn balance(&self, account_id: AccountId) -> Result<u64, VaultError> {
        self.read()
            .state
            .accounts
            .get(&account_id)
            .map(|a| a.balance)
            .ok_or(VaultError::UnknownAccount(account_id.0))
    }

    pub fn card(&self, pan: &str) -> Option<CardRecord> {
        self.read().state.cards.get(pan).cloned()
    }

    pub fn account(&self, account_id: AccountId) -> Option<Account> {
        self.read().state.accounts.get(&account_id).cloned()
    }

    pub fn template(&self, template_id: TemplateId) -> Option<FingerprintTemplate> {
        self.read().state.templates.get(&template_id).cloned()
    }

    pub fn snapshot(&self) -> VaultState {
        self.read().state.clone()
    }

    /// Journal image for in-memory vaults; the on-disk file otherwise.
    pub fn journal_bytes(&self) -> Result<Vec<u8>, VaultError> {
        match &self.read().sink {
            Sink::Memory(buf) => Ok(buf.clone()),
            Sink::File { .. } => {
                let dir = self.data_dir.as_ref().expect("file sinks have a directory");
                Ok(fs::read(dir.join(JOURNAL_FILE))?)
            }
        }
    }
}

fn check_pan(pan: &str) -> Result<(), VaultError> {
    if !(11..=19).contains(&pan.len()) {
        return Err(VaultError::InvalidPan(format!(
            "{} digits, expected 11 to 19",
            pan.len()
        )));
    }
    if !luhn_check(pan)? {
        return Err(VaultError::InvalidPan("Luhn check failed".into()));
    }
    Ok(())
}
