mod common;

use std::net::TcpListener;
use std::path::Path;
use std::process::Output;
use std::sync::Arc;

use bioatm::minutiae::serialize_template;
use bioatm::switch::SwitchConfig;
use bioatm::teller::{
    RecordingStream, Script, ScriptedPrompter, Terminal, run_interactive, run_script,
};
use common::*;

fn run(addr: &str, script: &Path) -> Output {
    atm()
        .args(["teller", "run", "--addr", addr, "--script"])
        .arg(script)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// A seeded data directory with 10000 in every account, and a switch on it
/// that dispenses in thousands.
fn seeded_switch(dir: &Path) -> (SwitchProcess, Vec<RosterRow>) {
    let roster = seed_dir(dir, &["--subjects", "3", "--opening-balance", "10000"]);
    let switch = SwitchProcess::start(dir, &["--set", "dispense.multiple=1000"]);
    (switch, roster)
}

#[test]
fn scripted_withdrawal_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (switch, roster) = seeded_switch(dir.path());
    let (_, pan, pin, samples) = &roster[0];
    let script = dir.path().join("withdraw.txt");
    std::fs::write(
        &script,
        format!(
            "CARD {pan}\nPIN {pin} EXPECT Approved\nFINGERPRINT samples/{}.min EXPECT Approved\n\
             WITHDRAW 3000 EXPECT Approved\nBALANCE EXPECT Approved\nSTATEMENT 5 EXPECT Approved\nEND EXPECT Approved\n",
            samples[0]
        ),
    )
    .unwrap();
    let out = run(&switch.tcp.to_string(), &script);
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    assert!(
        stdout.contains("TXN_RESP Approved balance=7000 records=0"),
        "{stdout}"
    );
    assert!(stdout.contains(" 3000 -> 7000 "), "{stdout}");
    assert!(!stdout.contains(pin.as_str()), "PIN in transcript");
    assert!(
        !stdout.contains(pan.as_str()),
        "full card number in transcript"
    );
}

#[test]
fn script_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (switch, roster) = seeded_switch(dir.path());
    let addr = switch.tcp.to_string();
    let (_, pan, pin, samples) = &roster[1];
    let (_, _, _, other_samples) = &roster[2];
    let write = |name: &str, body: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };

    // A wrong PIN is an expected outcome, not a failure.
    let retry = write(
        "retry.txt",
        format!("CARD {pan}\nPIN 0000 EXPECT InvalidPin\nPIN {pin} EXPECT Approved\nEND\n"),
    );
    let out = run(&addr, &retry);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stdout));

    // Transactions are refused until the fingerprint is verified.
    let early = write(
        "early.txt",
        format!("CARD {pan}\nPIN {pin} EXPECT Approved\nWITHDRAW 1000 EXPECT Approved\n"),
    );
    let out = run(&addr, &early);
    assert_eq!(out.status.code(), Some(4));
    assert!(text(&out.stdout).contains("expected Approved, got InvalidSession"));

    let impostor = write(
        "impostor.txt",
        format!(
            "CARD {pan}\nPIN {pin}\nFINGERPRINT samples/{}.min EXPECT BiometricMismatch\nBALANCE EXPECT InvalidSession\n",
            other_samples[0]
        ),
    );
    assert_eq!(run(&addr, &impostor).status.code(), Some(0));
    let genuine = write(
        "genuine.txt",
        format!(
            "CARD {pan}\nPIN {pin}\nFINGERPRINT samples/{}.min EXPECT Approved\nEND\n",
            samples[0]
        ),
    );
    assert_eq!(run(&addr, &genuine).status.code(), Some(0));

    let bad = write("bad.txt", "CARD 123\nJUMP\n".into());
    let out = run(&addr, &bad);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("line 2"));
    assert_eq!(
        run(&addr, &dir.path().join("missing.txt")).status.code(),
        Some(3)
    );

    let missing_sample = write(
        "nosample.txt",
        format!("CARD {pan}\nPIN {pin}\nFINGERPRINT samples/none.min\n"),
    );
    assert_eq!(run(&addr, &missing_sample).status.code(), Some(3));
}

#[test]
fn unreachable_and_vanishing_switches() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.txt");
    std::fs::write(&script, format!("CARD {}\nPIN 1234\n", pan(1))).unwrap();

    let closed = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    assert_eq!(run(&closed.to_string(), &script).status.code(), Some(2));

    // Accepts, reads the request, hangs up without answering.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let (mut s, _) = listener.accept().unwrap();
        let _ = bioatm::wire::read_frame(&mut s);
    });
    assert_eq!(run(&addr.to_string(), &script).status.code(), Some(5));
}

fn holder_switch(h: &Holder) -> std::net::SocketAddr {
    let switch = Arc::new(test_switch(
        SwitchConfig {
            dispense_multiple: 1000,
            ..SwitchConfig::default()
        },
        std::slice::from_ref(h),
        10_000,
    ));
    spawn_switch(switch, false).0
}

fn write_template(dir: &Path, name: &str, h: &Holder) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serialize_template(&h.template)).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn interactive_happy_path_with_a_pin_retry() {
    let dir = tempfile::tempdir().unwrap();
    let h = Holder::new(1);
    let finger = write_template(dir.path(), "f.min", &h);
    let mut t = Terminal::connect(&holder_switch(&h).to_string()).unwrap();
    let mut input = ScriptedPrompter::new([
        "12ab".to_owned(),
        h.pan.clone(),
        "0000".into(),
        h.pin.clone(),
        "nope.min".into(),
        finger,
        "1".into(),
        "3000".into(),
        "1".into(),
        "2500".into(),
        "4".into(),
        "5".into(),
    ]);
    let mut out = Vec::new();
    assert_eq!(run_interactive(&mut t, &mut input, &mut out), 0);
    let out = text(&out);
    for expected in [
        "Invalid card number. Please re-enter.",
        "Invalid PIN. Please enter a valid PIN (2 tries remaining).",
        "Could not read the fingerprint",
        "Fingerprint verified.",
        "Please take your cash: 3000. New balance: 7000.",
        "This machine cannot dispense that amount.",
        "3000 ->         7000",
        "Thank you",
    ] {
        assert!(out.contains(expected), "missing {expected:?} in\n{out}");
    }
    assert!(!out.contains(h.pin.as_str()));
}

#[test]
fn interactive_mismatch_denies_access() {
    let dir = tempfile::tempdir().unwrap();
    let h = Holder::new(1);
    let finger = write_template(dir.path(), "other.min", &Holder::new(2));
    let mut t = Terminal::connect(&holder_switch(&h).to_string()).unwrap();
    let mut input = ScriptedPrompter::new([h.pan.clone(), h.pin.clone(), finger, "3".into()]);
    let mut out = Vec::new();
    assert_eq!(run_interactive(&mut t, &mut input, &mut out), 0);
    let out = text(&out);
    assert!(
        out.contains("ACCESS DENIED: fingerprint does not match. Logging off."),
        "{out}"
    );
    assert!(!out.contains("Select"));
    // The remaining answer was never asked for.
    assert_eq!(input.0.len(), 1);
}

#[test]
fn interactive_pin_lockout() {
    let h = Holder::new(1);
    let mut t = Terminal::connect(&holder_switch(&h).to_string()).unwrap();
    let mut input =
        ScriptedPrompter::new([h.pan.clone(), "0000".into(), "0001".into(), "0002".into()]);
    let mut out = Vec::new();
    assert_eq!(run_interactive(&mut t, &mut input, &mut out), 0);
    assert!(text(&out).contains("Your card has been blocked."));
}

#[test]
fn interactive_and_scripted_tellers_send_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let h = Holder::new(5);
    write_template(dir.path(), "f.min", &h);

    let scripted = {
        let stream = std::net::TcpStream::connect(holder_switch(&h)).unwrap();
        let mut t = Terminal::new(RecordingStream::new(stream));
        let script = Script::parse(&format!(
            "CARD {}\nPIN 0000\nPIN {}\nFINGERPRINT f.min\nWITHDRAW 3000\nDEPOSIT 250\nBALANCE\nSTATEMENT\nEND\n",
            h.pan, h.pin
        ))
        .unwrap();
        run_script(&mut t, &script, dir.path(), &mut std::io::sink()).unwrap();
        t.into_inner().sent
    };
    let interactive = {
        let stream = std::net::TcpStream::connect(holder_switch(&h)).unwrap();
        let mut t = Terminal::new(RecordingStream::new(stream));
        let finger = dir.path().join("f.min").to_str().unwrap().to_owned();
        let mut input = ScriptedPrompter::new([
            h.pan.clone(),
            "0000".into(),
            h.pin.clone(),
            finger,
            "1".into(),
            "3000".into(),
            "2".into(),
            "250".into(),
            "3".into(),
            "4".into(),
            "5".into(),
        ]);
        assert_eq!(run_interactive(&mut t, &mut input, &mut std::io::sink()), 0);
        t.into_inner().sent
    };
    assert!(!scripted.is_empty());
    assert_eq!(scripted, interactive);
    assert!(!scripted.windows(h.pin.len()).any(|w| w == h.pin.as_bytes()));
}
