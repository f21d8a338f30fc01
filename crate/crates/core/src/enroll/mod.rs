//! Operator tooling: enrollment, card status, demo populations, and the
//! biometric evaluation harness.
//!
//! Everything here works offline against a data directory; the vault's lock
//! file keeps it from running while a switch holds the same directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::clock::FixedClock;
use crate::minutiae::roc::format_roc_table;
use crate::minutiae::{
    FingerprintTemplate, MatchParams, MinutiaeError, SyntheticConfig, evaluate_far_frr,
    serialize_template, synthesize_population,
};
use crate::switch::SAMPLES_DIR;
use crate::vault::{
    Account, AccountId, CardRecord, CardStatus, Vault, VaultError, luhn_check, luhn_check_digit,
};

pub const EXIT_INVALID_CARD: i32 = 2;
pub const EXIT_DUPLICATE: i32 = 3;

/// Journal timestamp for seeded populations, so seeding is reproducible.
pub const SEED_EPOCH_MS: u64 = 1_700_000_000_000;
/// Issuer prefix of generated demo card numbers.
pub const DEMO_IIN: &str = "5061";
/// One hundred ₦500 notes, in kobo.
pub const DEFAULT_OPENING_BALANCE: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum EnrollError {
    #[error("invalid card number: {0}")]
    InvalidCard(String),
    #[error("card number already enrolled")]
    Duplicate,
    #[error("unknown card")]
    UnknownCard,
    #[error("data directory {0} is not empty")]
    NotEmpty(PathBuf),
    #[error("template: {0}")]
    Template(String),
    #[error(transparent)]
    Vault(VaultError),
    #[error(transparent)]
    Minutiae(#[from] MinutiaeError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<VaultError> for EnrollError {
    fn from(e: VaultError) -> Self {
        match e {
            VaultError::InvalidPan(why) => EnrollError::InvalidCard(why),
            VaultError::DuplicatePan => EnrollError::Duplicate,
            VaultError::UnknownCard => EnrollError::UnknownCard,
            other => EnrollError::Vault(other),
        }
    }
}

impl From<std::io::Error> for EnrollError {
    fn from(e: std::io::Error) -> Self {
        EnrollError::Io(e.to_string())
    }
}

impl EnrollError {
    pub fn exit_code(&self) -> i32 {
        match self {
            EnrollError::InvalidCard(_) => EXIT_INVALID_CARD,
            EnrollError::Duplicate => EXIT_DUPLICATE,
            _ => 1,
        }
    }
}

pub fn load_template(path: &Path) -> Result<FingerprintTemplate, EnrollError> {
    let text = fs::read_to_string(path)
        .map_err(|e| EnrollError::Template(format!("{}: {e}", path.display())))?;
    crate::minutiae::parse_template(&text)
        .map_err(|e| EnrollError::Template(format!("{}: {e}", path.display())))
}

pub fn add(
    data_dir: &Path,
    pan: &str,
    pin: &str,
    template: FingerprintTemplate,
    opening_balance: u64,
) -> Result<(CardRecord, Account), EnrollError> {
    // Checked before touching the directory so a typo creates nothing.
    if !luhn_check(pan)? {
        return Err(EnrollError::InvalidCard(
            "check digit does not match".into(),
        ));
    }
    let vault = Vault::open(data_dir)?;
    Ok(vault.enroll_cardholder(pan, pin, template, opening_balance)?)
}

pub fn set_blocked(data_dir: &Path, pan: &str, blocked: bool) -> Result<(), EnrollError> {
    let vault = Vault::open(data_dir)?;
    if blocked {
        vault.block(pan)?;
    } else {
        vault.unblock(pan)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedOptions {
    pub seed: u64,
    pub subjects: usize,
    pub opening_balance: u64,
    /// Live samples written per subject.
    pub samples_per_subject: usize,
}

impl Default for SeedOptions {
    fn default() -> Self {
        SeedOptions {
            seed: 42,
            subjects: 5,
            opening_balance: DEFAULT_OPENING_BALANCE,
            samples_per_subject: SyntheticConfig::default().samples_per_subject,
        }
    }
}

/// One seeded cardholder. Holds the clear PIN: print it once, then drop it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub label: String,
    pub pan: String,
    pub pin: String,
    pub account_id: AccountId,
    pub opening_balance: u64,
    /// Live-sample ids under the samples directory, genuine for this subject.
    pub samples: Vec<String>,
}

/// Creates a deterministic demo population in an empty data directory. The
/// noise-free base template is enrolled; the noisy samples are written to
/// the samples directory to play the part of live scans.
pub fn seed(data_dir: &Path, opts: &SeedOptions) -> Result<Vec<RosterEntry>, EnrollError> {
    if fs::read_dir(data_dir).is_ok_and(|mut d| d.next().is_some()) {
        return Err(EnrollError::NotEmpty(data_dir.to_owned()));
    }
    let population = synthesize_population(&SyntheticConfig {
        seed: opts.seed,
        n_subjects: opts.subjects,
        samples_per_subject: opts.samples_per_subject,
        ..SyntheticConfig::default()
    })?;

    let mut cred_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    cred_rng.set_stream(1);
    let mut salt_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    salt_rng.set_stream(2);
    let vault = Vault::open(data_dir)?
        .with_clock(FixedClock(SEED_EPOCH_MS))
        .with_salt_rng(salt_rng);
    let samples_dir = data_dir.join(SAMPLES_DIR);
    fs::create_dir_all(&samples_dir)?;

    let mut roster = Vec::with_capacity(population.len());
    for subject in population {
        let pan = loop {
            let pan = demo_pan(&mut cred_rng);
            if vault.card(&pan).is_none() {
                break pan;
            }
        };
        let pin = format!("{:04}", cred_rng.random_range(0..10_000u32));
        let (card, _) =
            vault.enroll_cardholder(&pan, &pin, subject.base.clone(), opts.opening_balance)?;
        let mut samples = Vec::new();
        for (k, sample) in subject.samples.iter().enumerate() {
            let id = format!("{}-{}", subject.label, k + 1);
            fs::write(
                samples_dir.join(format!("{id}.min")),
                serialize_template(sample),
            )?;
            samples.push(id);
        }
        roster.push(RosterEntry {
            label: subject.label,
            pan,
            pin,
            account_id: card.account_id,
            opening_balance: opts.opening_balance,
            samples,
        });
    }
    Ok(roster)
}

/// `5061` + 11 random digits + Luhn check digit.
fn demo_pan(rng: &mut impl Rng) -> String {
    let mut pan = String::from(DEMO_IIN);
    for _ in 0..11 {
        pan.push(char::from(b'0' + rng.random_range(0..10u8)));
    }
    let check = luhn_check_digit(&pan).expect("digits only");
    pan.push(char::from(b'0' + check));
    pan
}

pub const ROSTER_BANNER: &str = "# WARNING: demo credentials. PINs are shown only this once and are stored only as salted digests.";

pub fn format_roster(roster: &[RosterEntry]) -> String {
    let mut s = format!("{ROSTER_BANNER}\nlabel|pan|pin|account|opening_balance|samples\n");
    for r in roster {
        let _ = writeln!(
            s,
            "{}|{}|{}|{}|{}|{}",
            r.label,
            r.pan,
            r.pin,
            r.account_id.0,
            r.opening_balance,
            r.samples.join(",")
        );
    }
    s
}

/// `pan|account|status|balance|transactions`, ordered by card number.
pub fn list(data_dir: &Path) -> Result<String, EnrollError> {
    let vault = Vault::open(data_dir)?;
    let state = vault.snapshot();
    let mut s = String::from("pan|account|status|balance|transactions\n");
    for card in state.cards.values() {
        let account = &state.accounts[&card.account_id];
        let status = match card.status {
            CardStatus::Active => "active",
            CardStatus::Blocked => "blocked",
        };
        let _ = writeln!(
            s,
            "{}|{}|{}|{}|{}",
            card.pan,
            card.account_id.0,
            status,
            account.balance,
            account.records.len()
        );
    }
    Ok(s)
}

/// `threshold|FAR|FRR` rows for a synthetic population.
pub fn eval(
    cfg: &SyntheticConfig,
    params: &MatchParams,
    thresholds: &[f64],
) -> Result<String, EnrollError> {
    let rows = evaluate_far_frr(&synthesize_population(cfg)?, params, thresholds)?;
    Ok(format_roc_table(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_pans_are_luhn_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let pan = demo_pan(&mut rng);
            assert_eq!(pan.len(), 16);
            assert!(pan.starts_with(DEMO_IIN));
            assert!(luhn_check(&pan).unwrap(), "{pan}");
        }
    }
}
