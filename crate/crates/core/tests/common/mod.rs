//! Shared fixtures and independent reference implementations.
//!
//! The oracles here deliberately avoid the crate's own helpers: they are
//! written the slow, obvious way so that agreement means something.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::net::SocketAddr;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;

use bioatm::minutiae::{FingerprintTemplate, MatchParams, Minutia, MinutiaKind, rigid_transform};
use bioatm::switch::{Switch, SwitchConfig};
use bioatm::vault::Vault;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- oracles

/// Bit-at-a-time shift register, poly 0x1021, init 0xFFFF, unreflected.
pub fn crc16_bitwise(bytes: &[u8]) -> u16 {
    let mut reg: u16 = 0xFFFF;
    for &byte in bytes {
        for bit in (0..8).rev() {
            let input = (byte >> bit) & 1 == 1;
            let top = reg & 0x8000 != 0;
            reg <<= 1;
            if top != input {
                reg ^= 0x1021;
            }
        }
    }
    reg
}

/// Pencil-and-paper Luhn: from the right, double every second digit and
/// add the digits of the product.
pub fn luhn_by_hand(pan: &str) -> bool {
    let digits: Vec<u32> = pan.chars().map(|c| c.to_digit(10).unwrap()).collect();
    let mut sum = 0;
    for (pos, d) in digits.iter().rev().enumerate() {
        if pos % 2 == 1 {
            let doubled = d * 2;
            sum += doubled / 10 + doubled % 10;
        } else {
            sum += d;
        }
    }
    sum % 10 == 0
}

/// PBKDF2-HMAC-SHA256 spelled out block by block over a bare HMAC.
pub fn pbkdf2_sha256(password: &[u8], salt: &[u8], iterations: u32) -> [u8; 32] {
    use hmac::{Hmac, KeyInit, Mac};
    type H = Hmac<sha2::Sha256>;
    let prf = |data: &[&[u8]]| -> [u8; 32] {
        let mut mac = <H as KeyInit>::new_from_slice(password).unwrap();
        for d in data {
            mac.update(d);
        }
        mac.finalize().into_bytes().into()
    };
    // One 32-byte block is all a 32-byte output needs.
    let mut u = prf(&[salt, &1u32.to_be_bytes()]);
    let mut out = u;
    for _ in 1..iterations {
        u = prf(&[&u]);
        for (o, x) in out.iter_mut().zip(u) {
            *o ^= x;
        }
    }
    out
}

/// Format-0 PIN block built as hex strings and XORed nibble by nibble.
pub fn pin_block_by_hand(pin: &str, pan: &str) -> String {
    let mut pin_field = format!("0{:X}{pin}", pin.len());
    while pin_field.len() < 16 {
        pin_field.push('F');
    }
    let body = &pan[..pan.len() - 1];
    let twelve = if body.len() >= 12 {
        body[body.len() - 12..].to_owned()
    } else {
        format!("{body:0>12}")
    };
    let pan_field = format!("0000{twelve}");
    pin_field
        .chars()
        .zip(pan_field.chars())
        .map(|(a, b)| {
            let x = a.to_digit(16).unwrap() ^ b.to_digit(16).unwrap();
            char::from_digit(x, 16).unwrap().to_ascii_uppercase()
        })
        .collect()
}

/// Size of a maximum bipartite matching (Kuhn's augmenting paths).
pub fn max_bipartite_matching(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(
        u: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    (0..adj.len())
        .filter(|&u| augment(u, adj, &mut vec![false; n_right], &mut owner))
        .count()
}

/// Candidate pairs under the alignment anchored on `probe[a]` -> `gallery[b]`,
/// computed independently of the matcher. `None` if the anchor is not a
/// valid hypothesis.
pub fn hypothesis_edges(
    probe: &[Minutia],
    gallery: &[Minutia],
    a: usize,
    b: usize,
    params: &MatchParams,
) -> Option<Vec<Vec<usize>>> {
    let (p, g) = (&probe[a], &gallery[b]);
    if p.kind() != g.kind() {
        return None;
    }
    let mut rot = (i32::from(g.angle()) - i32::from(p.angle())) % 360;
    if rot <= -180 {
        rot += 360;
    } else if rot > 180 {
        rot -= 360;
    }
    if f64::from(rot.abs()) > params.rot_limit {
        return None;
    }
    let theta = f64::from(rot).to_radians();
    // Rotate about the anchor, then move the anchor onto its partner.
    let place = |m: &Minutia| {
        let (dx, dy) = (
            f64::from(m.x()) - f64::from(p.x()),
            f64::from(m.y()) - f64::from(p.y()),
        );
        (
            f64::from(g.x()) + dx * theta.cos() - dy * theta.sin(),
            f64::from(g.y()) + dx * theta.sin() + dy * theta.cos(),
        )
    };
    let edges = probe
        .iter()
        .map(|q| {
            let (x, y) = place(q);
            let angle = f64::from(q.angle()) + f64::from(rot);
            gallery
                .iter()
                .enumerate()
                .filter(|(_, h)| {
                    let dist =
                        ((f64::from(h.x()) - x).powi(2) + (f64::from(h.y()) - y).powi(2)).sqrt();
                    let mut da = (angle - f64::from(h.angle())).abs() % 360.0;
                    if da > 180.0 {
                        da = 360.0 - da;
                    }
                    h.kind() == q.kind() && dist <= params.dmax + 1e-9 && da <= params.atol
                })
                .map(|(j, _)| j)
                .collect()
        })
        .collect();
    Some(edges)
}

/// Best pairing count over every hypothesis, each paired optimally.
pub fn brute_force_best_pairing(
    probe: &FingerprintTemplate,
    gallery: &FingerprintTemplate,
    params: &MatchParams,
) -> usize {
    let (p, g) = (probe.minutiae(), gallery.minutiae());
    let mut best = 0;
    for a in 0..p.len() {
        for b in 0..g.len() {
            if let Some(adj) = hypothesis_edges(p, g, a, b, params) {
                best = best.max(max_bipartite_matching(&adj, g.len()));
            }
        }
    }
    best
}

// --------------------------------------------------------------- fixtures

pub fn minutia(x: u16, y: u16, angle: u16, kind: MinutiaKind) -> Minutia {
    Minutia::new(x, y, angle, kind).unwrap()
}

/// Random template with `n` distinct points inside `[lo, hi]²`.
pub fn random_template(rng: &mut impl Rng, n: usize, lo: u16, hi: u16) -> FingerprintTemplate {
    let mut seen = std::collections::HashSet::new();
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let (x, y) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
        if seen.insert((x, y)) {
            let kind = if rng.random_bool(0.5) {
                MinutiaKind::RidgeEnding
            } else {
                MinutiaKind::Bifurcation
            };
            points.push(minutia(x, y, rng.random_range(0..360), kind));
        }
    }
    FingerprintTemplate::new(points).unwrap()
}

pub fn seeded_template(seed: u64, n: usize) -> FingerprintTemplate {
    random_template(&mut ChaCha8Rng::seed_from_u64(seed), n, 150, 850)
}

/// Luhn-valid 16-digit PAN derived from `n`.
pub fn pan(n: u64) -> String {
    let body = format!("400000{n:09}");
    for check in 0..10 {
        let candidate = format!("{body}{check}");
        if luhn_by_hand(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

/// One cardholder of a test vault.
#[derive(Debug, Clone)]
pub struct Holder {
    pub pan: String,
    pub pin: String,
    pub template: FingerprintTemplate,
}

impl Holder {
    pub fn new(n: u64) -> Holder {
        Holder {
            pan: pan(n),
            pin: format!("{:04}", 1000 + n * 37 % 9000),
            template: seeded_template(n, 30),
        }
    }
}

/// In-memory switch with `holders` enrolled at `balance` each.
pub fn test_switch(config: SwitchConfig, holders: &[Holder], balance: u64) -> Switch {
    let vault = Vault::in_memory();
    for h in holders {
        vault
            .enroll_cardholder(&h.pan, &h.pin, h.template.clone(), balance)
            .unwrap();
    }
    Switch::new(Arc::new(vault), config).with_token_rng(ChaCha8Rng::seed_from_u64(7))
}

/// Withdrawals in any whole unit, for ledger-centric tests.
pub fn loose_config() -> SwitchConfig {
    SwitchConfig {
        dispense_multiple: 1,
        ..SwitchConfig::default()
    }
}

/// Serves `switch` on an ephemeral port from a background runtime. Also
/// returns the gateway address when `http` is set.
pub fn spawn_switch(switch: Arc<Switch>, http: bool) -> (SocketAddr, Option<SocketAddr>) {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let tcp = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let http_listener = if http {
                Some(tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap())
            } else {
                None
            };
            tx.send((
                tcp.local_addr().unwrap(),
                http_listener.as_ref().map(|l| l.local_addr().unwrap()),
            ))
            .unwrap();
            if let Some(l) = http_listener {
                let router = bioatm::switch::http::router(switch.clone());
                tokio::spawn(async move { axum::serve(l, router).await });
            }
            let _ = bioatm::switch::serve_tcp(switch, tcp).await;
        });
    });
    rx.recv().unwrap()
}

// ------------------------------------------------------------- processes

pub fn atm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atm"))
}

/// A running `atm switch` child process; killed on drop.
pub struct SwitchProcess {
    pub child: Child,
    pub tcp: SocketAddr,
    pub http: Option<SocketAddr>,
}

impl SwitchProcess {
    /// Starts a switch on ephemeral ports and waits for it to report them.
    pub fn start(data_dir: &Path, extra: &[&str]) -> SwitchProcess {
        let mut child = atm()
            .args([
                "switch",
                "--listen",
                "127.0.0.1:0",
                "--http",
                "127.0.0.1:0",
                "--data-dir",
            ])
            .arg(data_dir)
            .args(extra)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
        let mut addr = |prefix: &str| -> SocketAddr {
            let line = lines.next().expect("switch exited early").unwrap();
            line.strip_prefix(prefix)
                .unwrap_or_else(|| panic!("unexpected output {line:?}"))
                .parse()
                .unwrap()
        };
        let tcp = addr("switch listening on ");
        let http = Some(addr("http gateway listening on "));
        SwitchProcess { child, tcp, http }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for SwitchProcess {
    fn drop(&mut self) {
        self.kill();
    }
}

/// `(label, pan, pin, samples)` from an `enroll seed` roster.
pub type RosterRow = (String, String, String, Vec<String>);

pub fn parse_roster(stdout: &str) -> Vec<RosterRow> {
    stdout
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("label|"))
        .map(|l| {
            let f: Vec<&str> = l.split('|').collect();
            (
                f[0].to_owned(),
                f[1].to_owned(),
                f[2].to_owned(),
                f[5].split(',').map(str::to_owned).collect(),
            )
        })
        .collect()
}

/// Runs `atm enroll seed` into `dir` and returns the roster.
pub fn seed_dir(dir: &Path, extra: &[&str]) -> Vec<RosterRow> {
    let out = atm()
        .args(["enroll", "seed", "--data-dir"])
        .arg(dir)
        .args(extra)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    parse_roster(&String::from_utf8(out.stdout).unwrap())
}

// --------------------------------------------------------------- messages

use bioatm::wire::{
    Message, MessageType, RecordKind, ResponseCode, Token, TxnType, WireRecord, encode_pin_block,
};

fn pick<T: Copy>(rng: &mut impl Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())]
}

pub fn random_digits(rng: &mut impl Rng, len: usize) -> String {
    (0..len)
        .map(|_| char::from(b'0' + rng.random_range(0..10u8)))
        .collect()
}

/// Random valid message of the given type.
pub fn random_message(rng: &mut impl Rng, t: MessageType) -> Message {
    let token = Token(rng.random());
    match t {
        MessageType::AuthCardReq => {
            let pan_len = rng.random_range(2..=19);
            let pan = random_digits(rng, pan_len);
            let pin_len = rng.random_range(4..=6);
            let pin = random_digits(rng, pin_len);
            Message::AuthCardReq {
                pin_block: encode_pin_block(&pin, &pan).unwrap(),
                pan,
            }
        }
        MessageType::AuthCardResp => Message::AuthCardResp {
            code: pick(rng, ResponseCode::ALL),
            token,
            retries_remaining: rng.random(),
        },
        MessageType::BioVerifyReq => {
            let n = rng.random_range(1..=60);
            Message::BioVerifyReq {
                token,
                sample: random_template(rng, n, 0, 1000),
            }
        }
        MessageType::BioVerifyResp => Message::BioVerifyResp {
            code: pick(rng, ResponseCode::ALL),
            score_milli: rng.random(),
        },
        MessageType::TxnReq => Message::TxnReq {
            token,
            txn_type: pick(rng, TxnType::ALL),
            amount: rng.random(),
        },
        MessageType::TxnResp => {
            let n = rng.random_range(0..=12);
            Message::TxnResp {
                code: pick(rng, ResponseCode::ALL),
                balance: rng.random(),
                records: (0..n)
                    .map(|_| WireRecord {
                        seq: rng.random(),
                        kind: pick(rng, RecordKind::ALL),
                        amount: rng.random(),
                        resulting_balance: rng.random(),
                        timestamp: rng.random(),
                    })
                    .collect(),
            }
        }
        MessageType::EndSession => Message::EndSession { token },
        MessageType::Err => Message::Err {
            code: pick(rng, ResponseCode::ALL),
        },
    }
}

// ----------------------------------------------------------------- ledger

use bioatm::vault::{AccountId, TxnKind, VaultError, VaultState, replay};

/// Drives `n_ops` random deposits and withdrawals (many of them invalid)
/// against a fresh in-memory vault, checking after every operation that
/// balances stay non-negative, that money is conserved against an
/// independent tally, and that rejected operations change nothing. Every
/// `checkpoint` operations the journal is replayed and compared with the
/// live state. Returns the final vault.
pub fn exercise_ledger(seed: u64, n_ops: usize, checkpoint: usize) -> Result<Vault, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vault = Vault::in_memory();
    let mut expected: Vec<(AccountId, u64)> = Vec::new();
    for k in 0..4u64 {
        let opening = rng.random_range(0..20_000);
        let (_, account) = vault
            .enroll_cardholder(
                &pan(seed.wrapping_mul(10) % 1_000_000_000 + k),
                "1234",
                seeded_template(k, 5),
                opening,
            )
            .map_err(|e| e.to_string())?;
        expected.push((account.account_id, opening));
    }
    let ghost = AccountId(999);
    for op in 1..=n_ops {
        let slot = rng.random_range(0..=expected.len());
        let id = expected.get(slot).map_or(ghost, |e| e.0);
        let amount = match rng.random_range(0..10) {
            0 => 0,
            1 => rng.random_range(20_000..100_000),
            _ => rng.random_range(1..6_000),
        };
        let deposit = rng.random_bool(0.45);
        let multiple = if rng.random_bool(0.8) { 1 } else { 1000 };
        let before_state = vault.snapshot();
        let before_journal = vault.journal_bytes().map_err(|e| e.to_string())?;
        let result = if deposit {
            vault.deposit(id, amount)
        } else {
            vault.withdraw(id, amount, multiple)
        };
        match result {
            Ok(record) => {
                let tally = &mut expected[slot].1;
                if deposit {
                    *tally += amount;
                } else {
                    *tally = tally
                        .checked_sub(amount)
                        .ok_or(format!("op {op}: overdraft accepted"))?;
                }
                if record.resulting_balance != *tally || record.amount != amount {
                    return Err(format!("op {op}: record {record:?}, tally {tally}"));
                }
                let kind = if deposit {
                    TxnKind::Deposit
                } else {
                    TxnKind::Withdrawal
                };
                if record.kind != kind {
                    return Err(format!("op {op}: wrong record kind"));
                }
            }
            Err(e) => {
                let legit = match &e {
                    VaultError::UnknownAccount(_) => id == ghost,
                    VaultError::NonPositiveAmount => amount == 0,
                    VaultError::NotDispensable { .. } => !deposit && amount % multiple != 0,
                    VaultError::InsufficientFunds { balance, .. } => !deposit && amount > *balance,
                    _ => false,
                };
                if !legit {
                    return Err(format!("op {op}: unexpected rejection {e}"));
                }
                if vault.snapshot() != before_state {
                    return Err(format!("op {op}: rejected operation changed state"));
                }
                if vault.journal_bytes().map_err(|e| e.to_string())? != before_journal {
                    return Err(format!("op {op}: rejected operation touched the journal"));
                }
            }
        }
        for (id, tally) in &expected {
            let account = vault.account(*id).ok_or("account vanished")?;
            let deposits: u64 = account
                .records
                .iter()
                .filter(|r| r.kind == TxnKind::Deposit)
                .map(|r| r.amount)
                .sum();
            let withdrawals: u64 = account
                .records
                .iter()
                .filter(|r| r.kind == TxnKind::Withdrawal)
                .map(|r| r.amount)
                .sum();
            if account.balance != *tally
                || account.opening_balance + deposits - withdrawals != account.balance
            {
                return Err(format!(
                    "op {op}: account {} balance {} != tally {tally}",
                    id.0, account.balance
                ));
            }
        }
        if op % checkpoint == 0 {
            check_replay(&vault).map_err(|e| format!("op {op}: {e}"))?;
        }
    }
    check_replay(&vault)?;
    Ok(vault)
}

pub fn check_replay(vault: &Vault) -> Result<(), String> {
    let bytes = vault.journal_bytes().map_err(|e| e.to_string())?;
    let replayed = replay(&bytes).map_err(|e| e.to_string())?;
    if replayed.dropped_tail || replayed.valid_len != bytes.len() {
        return Err("intact journal reported a torn tail".into());
    }
    if replayed.state != vault.snapshot().durable() {
        return Err("replayed state differs from live state".into());
    }
    Ok(())
}

/// Builds a journal of exactly `lines` lines, recording the state after
/// each, then replays every byte prefix and checks it lands on the state of
/// the last complete line.
pub fn check_every_prefix(lines: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(lines as u64);
    let vault = Vault::in_memory();
    let mut states: Vec<VaultState> = vec![VaultState::default()];
    let mut accounts = Vec::new();
    let mut k = 0;
    while states.len() <= lines {
        if accounts.len() < 3 || rng.random_bool(0.05) {
            k += 1;
            let (_, a) = vault
                .enroll_cardholder(&pan(500 + k), "9876", seeded_template(k, 4), 1_000)
                .map_err(|e| e.to_string())?;
            accounts.push(a.account_id);
        } else {
            let id = accounts[rng.random_range(0..accounts.len())];
            let amount = rng.random_range(1..400);
            if rng.random_bool(0.5) || vault.withdraw(id, amount, 1).is_err() {
                vault.deposit(id, amount).map_err(|e| e.to_string())?;
            }
        }
        states.push(vault.snapshot().durable());
    }
    let bytes = vault.journal_bytes().map_err(|e| e.to_string())?;
    if bytes.iter().filter(|&&b| b == b'\n').count() != lines {
        return Err("journal line count mismatch".into());
    }
    for len in 0..=bytes.len() {
        let prefix = &bytes[..len];
        let complete = prefix.iter().filter(|&&b| b == b'\n').count();
        let r = replay(prefix).map_err(|e| format!("prefix {len}: {e}"))?;
        if r.state != states[complete] {
            return Err(format!(
                "prefix {len}: state differs from the one after line {complete}"
            ));
        }
        // Appending after recovery continues the numbering.
        let recovered = Vault::from_journal(prefix).map_err(|e| e.to_string())?;
        if complete > 0 && complete < lines {
            let id = *states[complete].accounts.keys().next().unwrap();
            let rec = recovered.deposit(id, 1).map_err(|e| e.to_string())?;
            if rec.seq != states[complete].next_seq {
                return Err(format!("prefix {len}: resumed at seq {}", rec.seq));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------- session fuzzing

use bioatm::clock::ManualClock;
use bioatm::switch::{AuditKind, SessionState};

/// Sends `n_sequences` random request sequences through one switch and
/// checks, from the audit trail alone, that no transaction was approved on
/// a token without an earlier card-and-PIN approval and an earlier
/// fingerprint approval. Also cross-checks the trail against the responses.
/// Returns the number of approved transactions seen.
pub fn fuzz_order_enforcement(seed: u64, n_sequences: usize) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let holders: Vec<Holder> = (1..=4).map(Holder::new).collect();
    let clock = ManualClock::new(1_000_000);
    let config = SwitchConfig {
        dispense_multiple: 100,
        ..SwitchConfig::default()
    };
    let switch = test_switch(config, &holders, 50_000).with_clock(clock.clone());
    let timeout = switch.config().session_timeout_ms();
    let mut issued: Vec<Token> = Vec::new();
    let mut approved_txns = 0;

    for _ in 0..n_sequences {
        let holder = &holders[rng.random_range(0..holders.len())];
        let mut token = Token::ZERO;
        // What an honest terminal would send next: 0 card, 1 finger, 2 txn.
        let mut phase = 0;
        for _ in 0..rng.random_range(1..=10) {
            if rng.random_bool(0.05) {
                clock.advance(rng.random_range(0..2 * timeout));
            }
            let target = match rng.random_range(0..10) {
                0 if !issued.is_empty() => issued[rng.random_range(0..issued.len())],
                1 => Token(rng.random()),
                2 => Token::ZERO,
                _ => token,
            };
            let roll = if rng.random_bool(0.6) {
                [10, 35, 60][phase]
            } else {
                rng.random_range(0..100)
            };
            let msg = match roll {
                0..25 => {
                    let pin = if rng.random_bool(0.8) {
                        holder.pin.clone()
                    } else {
                        random_digits(&mut rng, 4)
                    };
                    let pan = if rng.random_bool(0.95) {
                        holder.pan.clone()
                    } else {
                        pan(rng.random_range(100..200))
                    };
                    Message::AuthCardReq {
                        pin_block: encode_pin_block(&pin, &pan).unwrap(),
                        pan,
                    }
                }
                25..45 => {
                    let sample = if rng.random_bool(0.8) {
                        holder.template.clone()
                    } else {
                        holders[rng.random_range(0..holders.len())].template.clone()
                    };
                    Message::BioVerifyReq {
                        token: target,
                        sample,
                    }
                }
                45..85 => {
                    let txn_type = TxnType::ALL[rng.random_range(0..TxnType::ALL.len())];
                    let amount = match rng.random_range(0..4) {
                        0 => 0,
                        1 => rng.random_range(1..1000),
                        _ => 100 * rng.random_range(1..300),
                    };
                    Message::TxnReq {
                        token: target,
                        txn_type,
                        amount,
                    }
                }
                85..95 => Message::EndSession { token: target },
                _ => {
                    let t = MessageType::ALL[rng.random_range(0..MessageType::ALL.len())];
                    random_message(&mut rng, t)
                }
            };
            let response = switch.handle(&msg);
            if let Message::AuthCardResp {
                code: ResponseCode::Approved,
                token: t,
                ..
            } = response
            {
                token = t;
                issued.push(t);
                phase = 1;
            }
            if matches!(
                response,
                Message::BioVerifyResp {
                    code: ResponseCode::Approved,
                    ..
                }
            ) {
                phase = 2;
            }
            if matches!(
                response,
                Message::TxnResp {
                    code: ResponseCode::Approved,
                    ..
                }
            ) {
                approved_txns += 1;
            }
        }
        for h in &holders {
            if switch
                .vault()
                .card(&h.pan)
                .is_some_and(|c| c.status == bioatm::vault::CardStatus::Blocked)
            {
                switch.vault().unblock(&h.pan).unwrap();
            }
        }
    }

    let events = switch.audit_events();
    let mut card_ok = std::collections::HashSet::new();
    let mut bio_ok = std::collections::HashSet::new();
    let mut txn_ok = 0;
    for (i, e) in events.iter().enumerate() {
        match (e.kind, e.from) {
            (AuditKind::AuthOk, SessionState::AwaitCard) => {
                card_ok.insert(e.token);
            }
            (AuditKind::AuthOk, SessionState::AwaitBiometric) => {
                if !card_ok.contains(&e.token) {
                    return Err(format!(
                        "event {i}: fingerprint approved before card and PIN: {e}"
                    ));
                }
                bio_ok.insert(e.token);
            }
            (AuditKind::AuthOk, _) => {
                return Err(format!("event {i}: approval from {}: {e}", e.from));
            }
            (AuditKind::TxnOk, from) => {
                txn_ok += 1;
                if from != SessionState::Menu
                    || !card_ok.contains(&e.token)
                    || !bio_ok.contains(&e.token)
                {
                    return Err(format!(
                        "event {i}: transaction approved without both approvals: {e}"
                    ));
                }
            }
            _ => {}
        }
    }
    if txn_ok != approved_txns {
        return Err(format!(
            "{approved_txns} approved responses but {txn_ok} TxnOk events"
        ));
    }
    Ok(approved_txns)
}

// ------------------------------------------------------- small matchings

/// A probe of at most 10 minutiae crowded into a small patch, and a noisy,
/// partial copy of it as the gallery: dense enough that pairing choices matter.
pub fn small_instance(rng: &mut ChaCha8Rng) -> (FingerprintTemplate, FingerprintTemplate) {
    let n = rng.random_range(2..=10);
    let probe = random_template(rng, n, 450, 530);
    let theta = rng.random_range(-20..=20);
    let moved = rigid_transform(
        &probe,
        f64::from(theta),
        rng.random_range(-30..=30),
        rng.random_range(-30..=30),
    );
    let jitter = |v: u16, rng: &mut ChaCha8Rng| {
        (i32::from(v) + rng.random_range(-6..=6)).clamp(0, 1000) as u16
    };
    let mut points = Vec::new();
    for m in moved.minutiae() {
        if rng.random_bool(0.85) {
            let angle = (i32::from(m.angle()) + rng.random_range(-15..=15)).rem_euclid(360) as u16;
            points.push(minutia(
                jitter(m.x(), rng),
                jitter(m.y(), rng),
                angle,
                m.kind(),
            ));
        }
    }
    points.sort_by_key(|m| (m.x(), m.y()));
    points.dedup_by_key(|m| (m.x(), m.y()));
    if points.is_empty() {
        points.push(moved.minutiae()[0]);
    }
    (probe, FingerprintTemplate::new(points).unwrap())
}
