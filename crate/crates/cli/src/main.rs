//! `dukpt`: key derivation, simulation, test vectors and applicability
//! queries.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 crypto
//! policy error, 4 profile gating.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dukpt::scenario::{
    builtin_profile, builtin_profiles, clone_attack_demo, evaluate_applicability, parse_profiles,
    render_verdict_table, run_fleet_simulation, run_simulation, EndpointProfile,
};
use dukpt::{
    derive_ipek, derive_key_chain, variant_data_key, variant_pin_key, vectors, Error, HostRegistry,
    KeyRole, Ksn, PinBlock, ReplayPolicy, SchemeTag, TdeaKey,
};

#[derive(Parser)]
#[command(name = "dukpt", version, about = "DUKPT key management tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive a terminal's initial key from a BDK and initial KSN.
    DeriveIpek {
        #[arg(long)]
        bdk: String,
        #[arg(long)]
        ksn: String,
    },
    /// Derive the transaction key and its variants for a KSN with counter.
    DeriveKey {
        #[arg(long)]
        bdk: String,
        #[arg(long = "ksn-with-counter", alias = "ksn")]
        ksn: String,
    },
    /// Run an end-to-end terminal to host simulation.
    Simulate(SimulateArgs),
    /// Generate or verify a test vector file.
    Vectors {
        #[command(subcommand)]
        action: VectorAction,
    },
    /// Evaluate DUKPT applicability for endpoint profiles.
    Applicability {
        /// A built-in profile name (all built-ins when omitted).
        #[arg(long, conflicts_with = "profiles_file")]
        profile: Option<String>,
        /// File with one `name,storage,origin,dep1+dep2` profile per line.
        #[arg(long)]
        profiles_file: Option<PathBuf>,
    },
    /// Act as the acquirer host: read wire messages on stdin, write replies.
    Host {
        /// Key set registration as `KEYSET:BDK`, with KEYSET as 6 hex digits.
        #[arg(long = "bdk", required = true)]
        bdks: Vec<String>,
        #[arg(long)]
        no_replay_check: bool,
    },
    /// Clone a terminal and replay both copies against one host.
    CloneDemo {
        #[arg(long, default_value_t = 50)]
        legit: u64,
        #[arg(long, default_value_t = 50)]
        clone: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        no_replay_check: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long, default_value = "pos")]
    profile: String,
    /// Look `--profile` up in this file instead of the built-ins.
    #[arg(long)]
    profiles_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    count: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// DUKPT only: run this many terminals concurrently, `count` each.
    #[arg(long)]
    terminals: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Append the elapsed wall-clock time (makes output non-reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand)]
enum VectorAction {
    Generate {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value = "0123456789ABCDEFFEDCBA9876543210")]
        bdk: String,
        #[arg(long, default_value = "FFFF9876543210E00000")]
        ksn: String,
        /// Clear PIN block to encrypt in every record.
        #[arg(long)]
        pin_block: Option<String>,
        /// Hex data to encrypt in every record.
        #[arg(long)]
        data: Option<String>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    Verify {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Dukpt,
    Fixed,
    Ms,
}

impl From<SchemeArg> for SchemeTag {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Dukpt => SchemeTag::Dukpt,
            SchemeArg::Fixed => SchemeTag::Fixed,
            SchemeArg::Ms => SchemeTag::MasterSession,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Record,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CounterOverweight { .. } | Error::Exhausted | Error::WrongRole { .. } => 3,
            Error::ProfileIncompatible(_) => 4,
            _ => 2,
        };
        let message = match &e {
            Error::CounterOverweight { .. } => format!("OverweightCounter: {e}"),
            Error::ProfileIncompatible(_) => format!("ProfileIncompatible: {e}"),
            _ => e.to_string(),
        };
        Self { code, message }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let _ = out.flush();
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command, out: &mut impl Write) -> Result<(), Failure> {
    match command {
        Command::DeriveIpek { bdk, ksn } => {
            let ipek = derive_ipek(&TdeaKey::from_hex(&bdk)?, Ksn::from_hex(&ksn)?);
            writeln!(out, "{}", ipek.key().to_hex())?;
        }
        Command::DeriveKey { bdk, ksn } => derive_key(&bdk, &ksn, out)?,
        Command::Simulate(args) => simulate(args, out)?,
        Command::Vectors { action } => vectors_cmd(action, out)?,
        Command::Applicability {
            profile,
            profiles_file,
        } => {
            let profiles = match (profile, profiles_file) {
                (Some(name), _) => vec![lookup_profile(&name, None)?],
                (None, Some(path)) => parse_profiles(&fs::read_to_string(path)?)?,
                (None, None) => builtin_profiles(),
            };
            let rows: Vec<_> = profiles
                .into_iter()
                .map(|p| {
                    let v = evaluate_applicability(&p);
                    (p, v)
                })
                .collect();
            write!(out, "{}", render_verdict_table(&rows))?;
        }
        Command::Host {
            bdks,
            no_replay_check,
        } => host(&bdks, no_replay_check, out)?,
        Command::CloneDemo {
            legit,
            clone,
            seed,
            no_replay_check,
        } => {
            let policy = replay_policy(no_replay_check);
            let report = clone_attack_demo(legit, clone, seed, policy)?;
            for e in &report.events {
                writeln!(
                    out,
                    "{:<10} counter={:<6} {}",
                    format!("{:?}", e.sender),
                    e.counter,
                    e.status
                )?;
            }
            writeln!(
                out,
                "policy={policy:?} accepted={} replay_rejected={} other_rejected={}",
                report.accepted, report.replay_rejected, report.other_rejected
            )?;
        }
    }
    Ok(())
}

fn replay_policy(disabled: bool) -> ReplayPolicy {
    if disabled {
        ReplayPolicy::Disabled
    } else {
        ReplayPolicy::StrictlyIncreasing
    }
}

fn derive_key(bdk: &str, ksn: &str, out: &mut impl Write) -> Result<(), Failure> {
    let bdk = TdeaKey::from_hex(bdk)?;
    let ksn = Ksn::from_hex(ksn)?;
    let ipek = derive_ipek(&bdk, ksn);
    let key = derive_key_chain(ipek.key(), ksn)?;
    writeln!(out, "ksn={}", ksn)?;
    writeln!(out, "counter={}", ksn.counter())?;
    if key.role() == KeyRole::Initial {
        writeln!(
            out,
            "# counter 0 names the initial key (IPEK), not a transaction key"
        )?;
        writeln!(out, "ipek={}", key.key().to_hex())?;
        return Ok(());
    }
    writeln!(out, "transaction_key={}", key.key().to_hex())?;
    writeln!(out, "pin_key={}", variant_pin_key(&key)?.key().to_hex())?;
    writeln!(out, "data_key={}", variant_data_key(&key)?.key().to_hex())?;
    Ok(())
}

fn lookup_profile(name: &str, file: Option<&PathBuf>) -> Result<EndpointProfile, Failure> {
    let found = match file {
        Some(path) => parse_profiles(&fs::read_to_string(path)?)?
            .into_iter()
            .find(|p| p.name == name),
        None => builtin_profile(name),
    };
    found.ok_or_else(|| Failure::input(format!("unknown profile `{name}`")))
}

fn simulate(args: SimulateArgs, out: &mut impl Write) -> Result<(), Failure> {
    let profile = lookup_profile(&args.profile, args.profiles_file.as_ref())?;
    let scheme = SchemeTag::from(args.scheme);
    let report = match args.terminals {
        Some(_) if scheme != SchemeTag::Dukpt => {
            return Err(Failure::input(
                "--terminals applies to the DUKPT scheme only",
            ))
        }
        Some(n) => run_fleet_simulation(&profile, n, args.count, args.seed)?,
        None => run_simulation(scheme, &profile, args.count, args.seed)?,
    };
    match args.format {
        Format::Text => write!(out, "{}", report.render_text())?,
        Format::Record => writeln!(out, "{}", report.to_record())?,
    }
    if args.timing {
        writeln!(out, "elapsed_ms={}", report.elapsed.as_millis())?;
    }
    Ok(())
}

fn vectors_cmd(action: VectorAction, out: &mut impl Write) -> Result<(), Failure> {
    match action {
        VectorAction::Generate {
            count,
            bdk,
            ksn,
            pin_block,
            data,
            out: path,
        } => {
            let pin = pin_block.as_deref().map(PinBlock::from_hex).transpose()?;
            let data = data
                .as_deref()
                .map(|d| dukpt::hexfmt::decode(d, dukpt::error::HexField::Data))
                .transpose()?;
            let records = vectors::generate(
                &TdeaKey::from_hex(&bdk)?,
                Ksn::from_hex(&ksn)?,
                count,
                pin.as_ref(),
                data.as_deref(),
            )?;
            let text = vectors::render_file(&records);
            match path {
                Some(p) => fs::write(p, text)?,
                None => write!(out, "{text}")?,
            }
        }
        VectorAction::Verify { file } => {
            let outcomes = vectors::verify_file(&fs::read_to_string(&file)?)?;
            let failed: Vec<_> = outcomes
                .iter()
                .filter(|o| !o.mismatches.is_empty())
                .collect();
            for o in &failed {
                writeln!(
                    out,
                    "FAIL line {} counter={:06X}: {}",
                    o.line,
                    o.counter,
                    o.mismatches.join(",")
                )?;
            }
            writeln!(
                out,
                "{} records, {} passed, {} failed",
                outcomes.len(),
                outcomes.len() - failed.len(),
                failed.len()
            )?;
            if !failed.is_empty() {
                return Err(Failure {
                    code: 1,
                    message: format!("{} vector record(s) failed", failed.len()),
                });
            }
        }
    }
    Ok(())
}

fn host(bdks: &[String], no_replay_check: bool, out: &mut impl Write) -> Result<(), Failure> {
    let registry = HostRegistry::new(replay_policy(no_replay_check));
    for arg in bdks {
        let (set, key) = arg
            .split_once(':')
            .ok_or_else(|| Failure::input(format!("--bdk expects KEYSET:BDK, got `{arg}`")))?;
        let set = u32::from_str_radix(set, 16)
            .map_err(|_| Failure::input(format!("bad key set id `{set}`")))?;
        registry.register_bdk(set, TdeaKey::from_hex(key)?, false)?;
    }
    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "{}", registry.process_wire(line.trim()))?;
    }
    Ok(())
}
