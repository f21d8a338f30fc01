use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::minutiae::MatchParams;
use crate::vault::{DEFAULT_DISPENSE_MULTIPLE, DEFAULT_MAX_PIN_TRIES};

use super::SwitchError;

/// Switch settings. The config file holds `key = value` lines using the keys
/// below; `#` starts a comment.
///
/// | key | default |
/// |---|---|
/// | `listen_addr` | `127.0.0.1:7400` |
/// | `http_addr` | `127.0.0.1:8080` (empty disables the gateway) |
/// | `data_dir` | `atm-data` |
/// | `match.threshold` | `0.4` |
/// | `match.dmax` | `12` |
/// | `match.atol` | `20` |
/// | `match.rot_limit` | `45` |
/// | `pin.max_tries` | `3` |
/// | `bio.max_tries` | `1` |
/// | `session.timeout_secs` | `90` |
/// | `dispense.multiple` | `50000` |
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchConfig {
    pub listen_addr: String,
    pub http_addr: Option<String>,
    pub data_dir: PathBuf,
    pub match_threshold: f64,
    pub match_params: MatchParams,
    pub pin_max_tries: u32,
    pub bio_max_tries: u32,
    pub session_timeout_secs: u64,
    pub dispense_multiple: u64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            listen_addr: "127.0.0.1:7400".into(),
            http_addr: Some("127.0.0.1:8080".into()),
            data_dir: PathBuf::from("atm-data"),
            match_threshold: 0.4,
            match_params: MatchParams::default(),
            pin_max_tries: DEFAULT_MAX_PIN_TRIES,
            bio_max_tries: 1,
            session_timeout_secs: 90,
            dispense_multiple: DEFAULT_DISPENSE_MULTIPLE,
        }
    }
}

impl SwitchConfig {
    pub fn from_file(path: &Path) -> Result<Self, SwitchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SwitchError::Config(format!("{}: {e}", path.display())))?;
        text.parse()
    }

    /// Sets one key; used by the file parser and for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SwitchError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, SwitchError> {
            value
                .parse()
                .map_err(|_| SwitchError::Config(format!("bad value {value:?} for {key}")))
        }
        match key {
            "listen_addr" => self.listen_addr = value.to_owned(),
            "http_addr" => self.http_addr = (!value.is_empty()).then(|| value.to_owned()),
            "data_dir" => self.data_dir = PathBuf::from(value),
            "match.threshold" => self.match_threshold = parse(key, value)?,
            "match.dmax" => self.match_params.dmax = parse(key, value)?,
            "match.atol" => self.match_params.atol = parse(key, value)?,
            "match.rot_limit" => self.match_params.rot_limit = parse(key, value)?,
            "pin.max_tries" => self.pin_max_tries = parse(key, value)?,
            "bio.max_tries" => self.bio_max_tries = parse(key, value)?,
            "session.timeout_secs" => self.session_timeout_secs = parse(key, value)?,
            "dispense.multiple" => self.dispense_multiple = parse(key, value)?,
            other => return Err(SwitchError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SwitchError> {
        let fail = |m: &str| Err(SwitchError::Config(m.to_owned()));
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return fail("match.threshold must lie in [0, 1]");
        }
        if self.match_params.validate().is_err() {
            return fail(
                "match.dmax must be > 0, match.atol in (0, 90), match.rot_limit in [0, 180]",
            );
        }
        if self.pin_max_tries == 0 || self.pin_max_tries > u32::from(u8::MAX) {
            return fail("pin.max_tries must lie in 1..=255");
        }
        if self.bio_max_tries == 0 {
            return fail("bio.max_tries must be at least 1");
        }
        if self.session_timeout_secs == 0 {
            return fail("session.timeout_secs must be at least 1");
        }
        if self.dispense_multiple == 0 {
            return fail("dispense.multiple must be at least 1");
        }
        Ok(())
    }

    pub fn session_timeout_ms(&self) -> u64 {
        self.session_timeout_secs.saturating_mul(1000)
    }
}

impl FromStr for SwitchConfig {
    type Err = SwitchError;

    fn from_str(text: &str) -> Result<Self, SwitchError> {
        let mut config = SwitchConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                SwitchError::Config(format!("line {}: expected `key = value`", i + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

impl fmt::Display for SwitchConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "listen_addr = {}", self.listen_addr)?;
        writeln!(f, "http_addr = {}", self.http_addr.as_deref().unwrap_or(""))?;
        writeln!(f, "data_dir = {}", self.data_dir.display())?;
        writeln!(f, "match.threshold = {}", self.match_threshold)?;
        writeln!(f, "match.dmax = {}", self.match_params.dmax)?;
        writeln!(f, "match.atol = {}", self.match_params.atol)?;
        writeln!(f, "match.rot_limit = {}", self.match_params.rot_limit)?;
        writeln!(f, "pin.max_tries = {}", self.pin_max_tries)?;
        writeln!(f, "bio.max_tries = {}", self.bio_max_tries)?;
        writeln!(f, "session.timeout_secs = {}", self.session_timeout_secs)?;
        writeln!(f, "dispense.multiple = {}", self.dispense_multiple)
    }
}
