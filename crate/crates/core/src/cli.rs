//! Command-line front end shared by the `atm` binary. The first argument
//! picks the tool (`switch`, `teller`, `enroll`); a binary or symlink named
//! after one of them runs that tool directly.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::enroll::{self, EnrollError, SeedOptions};
use crate::minutiae::roc::uniform_thresholds;
use crate::minutiae::{MatchParams, SyntheticConfig};
use crate::switch::{self, Switch, SwitchConfig};
use crate::teller::{self, Script, Terminal, TtyPrompter};

#[derive(Parser)]
#[command(
    name = "atm",
    version,
    about = "Card + PIN + fingerprint ATM authorization system"
)]
struct Cli {
    #[command(subcommand)]
    tool: Tool,
}

#[derive(Subcommand)]
enum Tool {
    /// Run the authorization switch (binary protocol and HTTP gateway).
    Switch(SwitchArgs),
    /// ATM terminal: scripted or interactive.
    #[command(subcommand)]
    Teller(TellerCmd),
    /// Offline operator tools; the switch must not be running on the same data directory.
    #[command(subcommand)]
    Enroll(EnrollCmd),
}

#[derive(Args)]
struct SwitchArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Terminal protocol address.
    #[arg(long)]
    listen: Option<String>,
    /// HTTP gateway address; an empty string disables the gateway.
    #[arg(long)]
    http: Option<String>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set match.threshold=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum TellerCmd {
    /// Run a session script; exits 0 when every expectation is met.
    Run {
        #[arg(long)]
        addr: String,
        #[arg(long)]
        script: PathBuf,
    },
    /// Text-mode ATM on this terminal.
    Interactive {
        #[arg(long)]
        addr: String,
    },
}

#[derive(Subcommand)]
enum EnrollCmd {
    /// Enroll one cardholder.
    Add {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        pan: String,
        /// Prompted for (without echo) when omitted.
        #[arg(long)]
        pin: Option<String>,
        /// Fingerprint template in the `MINUTIAE v1` text format.
        #[arg(long)]
        template: PathBuf,
        /// In minor units.
        #[arg(long, default_value_t = 0)]
        opening_balance: u64,
    },
    /// Create a deterministic demo population and print its roster.
    Seed {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = enroll::DEFAULT_OPENING_BALANCE)]
        opening_balance: u64,
        /// Live samples written per subject.
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Block a card; it stops authenticating until unblocked.
    Block {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        pan: String,
    },
    /// Reactivate a card and clear its PIN failure count.
    Unblock {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        pan: String,
    },
    /// Print the cardholder directory.
    List {
        #[arg(long)]
        data_dir: PathBuf,
    },
    /// Print `threshold|FAR|FRR` for a synthetic population.
    Eval(EvalArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    subjects: usize,
    #[arg(long, default_value_t = 5)]
    samples: usize,
    #[arg(long, default_value_t = 40)]
    minutiae: usize,
    /// Evenly spaced thresholds from 0 to 1 with this many intervals.
    #[arg(long, default_value_t = 20, conflicts_with = "thresholds")]
    steps: usize,
    /// Explicit ascending thresholds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = MatchParams::default().dmax)]
    dmax: f64,
    #[arg(long, default_value_t = MatchParams::default().atol)]
    atol: f64,
    #[arg(long, default_value_t = MatchParams::default().rot_limit)]
    rot_limit: f64,
}

const TOOLS: [&str; 3] = ["switch", "teller", "enroll"];

/// Parses `args` (including `argv[0]`) and runs the chosen tool, returning
/// the process exit code.
pub fn main_from(args: Vec<OsString>) -> i32 {
    let mut args = args;
    let invoked_as = args
        .first()
        .and_then(|a| Path::new(a).file_stem())
        .and_then(|s| s.to_str())
        .map(str::to_owned);
    if let Some(tool) = invoked_as.filter(|t| TOOLS.contains(&t.as_str())) {
        args.insert(1, tool.into());
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 64 } else { 0 };
        }
    };
    match cli.tool {
        Tool::Switch(a) => run_switch(a),
        Tool::Teller(cmd) => run_teller(cmd),
        Tool::Enroll(cmd) => match run_enroll(cmd) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
    }
}

fn switch_config(a: &SwitchArgs) -> Result<SwitchConfig, switch::SwitchError> {
    let mut config = match &a.config {
        Some(path) => SwitchConfig::from_file(path)?,
        None => SwitchConfig::default(),
    };
    if let Some(v) = &a.listen {
        config.set("listen_addr", v)?;
    }
    if let Some(v) = &a.http {
        config.set("http_addr", v)?;
    }
    if let Some(v) = &a.data_dir {
        config.data_dir.clone_from(v);
    }
    for kv in &a.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            switch::SwitchError::Config(format!("--set expects KEY=VALUE, got {kv:?}"))
        })?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn run_switch(a: SwitchArgs) -> i32 {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::INFO)
        .try_init()
        .ok();
    let result = switch_config(&a).and_then(|config| {
        let switch = Arc::new(Switch::open(config)?);
        let runtime = tokio::runtime::Runtime::new()?;
        runtime.block_on(switch::run(
            switch,
            async {
                let _ = tokio::signal::ctrl_c().await;
            },
            |bound| {
                println!("switch listening on {}", bound.tcp);
                if let Some(http) = bound.http {
                    println!("http gateway listening on {http}");
                }
                let _ = std::io::stdout().flush();
            },
        ))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run_teller(cmd: TellerCmd) -> i32 {
    let outcome = match cmd {
        TellerCmd::Run { addr, script } => (|| {
            let parsed = Script::from_file(&script)?;
            let mut terminal = Terminal::connect(&addr)?;
            let base = script.parent().unwrap_or(Path::new("."));
            teller::run_script(&mut terminal, &parsed, base, &mut std::io::stdout())
        })(),
        TellerCmd::Interactive { addr } => match Terminal::connect(&addr) {
            Ok(mut terminal) => {
                return teller::run_interactive(
                    &mut terminal,
                    &mut TtyPrompter,
                    &mut std::io::stdout(),
                );
            }
            Err(e) => Err(e),
        },
    };
    match outcome {
        Ok(()) => teller::EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_enroll(cmd: EnrollCmd) -> Result<(), EnrollError> {
    match cmd {
        EnrollCmd::Add {
            data_dir,
            pan,
            pin,
            template,
            opening_balance,
        } => {
            let template = enroll::load_template(&template)?;
            let pin = match pin {
                Some(p) => p,
                None => rpassword::prompt_password("PIN: ")?,
            };
            let (card, account) = enroll::add(&data_dir, &pan, &pin, template, opening_balance)?;
            println!(
                "enrolled {} account {} balance {}",
                teller::mask_pan(&card.pan),
                account.account_id.0,
                account.balance
            );
        }
        EnrollCmd::Seed {
            data_dir,
            seed,
            subjects,
            opening_balance,
            samples,
        } => {
            let roster = enroll::seed(
                &data_dir,
                &SeedOptions {
                    seed,
                    subjects,
                    opening_balance,
                    samples_per_subject: samples,
                },
            )?;
            print!("{}", enroll::format_roster(&roster));
        }
        EnrollCmd::Block { data_dir, pan } => {
            enroll::set_blocked(&data_dir, &pan, true)?;
            println!("blocked {}", teller::mask_pan(&pan));
        }
        EnrollCmd::Unblock { data_dir, pan } => {
            enroll::set_blocked(&data_dir, &pan, false)?;
            println!("unblocked {}", teller::mask_pan(&pan));
        }
        EnrollCmd::List { data_dir } => print!("{}", enroll::list(&data_dir)?),
        EnrollCmd::Eval(a) => {
            let cfg = SyntheticConfig {
                seed: a.seed,
                n_subjects: a.subjects,
                samples_per_subject: a.samples,
                minutiae_per_subject: a.minutiae,
                ..SyntheticConfig::default()
            };
            let params = MatchParams {
                dmax: a.dmax,
                atol: a.atol,
                rot_limit: a.rot_limit,
            };
            let thresholds = a.thresholds.unwrap_or_else(|| uniform_thresholds(a.steps));
            print!("{}", enroll::eval(&cfg, &params, &thresholds)?);
        }
    }
    Ok(())
}
