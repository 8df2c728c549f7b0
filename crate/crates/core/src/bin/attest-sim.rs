use std::fs;
use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use attest_sim::bank::{BankConfig, BankService};
use attest_sim::channel::{self, BankEndpoint, ChannelConfig, Transport, DEFAULT_SERVER_TOKEN};
use attest_sim::codec::WireMessage;
use attest_sim::harness::{
    self, parse_ops, run_bench, BenchConfig, MonotonicClock, ScenarioError, SuiteReport,
    GENUINE_IMAGE,
};
use attest_sim::identity::{ActivationKey, Credentials, Pin, UserId};
use attest_sim::lma::{Lma, LoginSteps};
use attest_sim::tpm::{Tpm, TpmConfig};

#[derive(Parser)]
#[command(
    name = "attest-sim",
    version,
    about = "TPM-backed mobile banking attestation simulator"
)]
struct Cli {
    /// Run seed; overrides ATTEST_SIM_SEED.
    #[arg(long, global = true, env = "ATTEST_SIM_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one built-in scenario.
    Scenario { name: String },
    /// Run every built-in scenario and print the report tables.
    Suite {
        #[arg(long)]
        parallel: bool,
        /// Machine-readable results file.
        #[arg(long, default_value = "attest-sim-results.json")]
        out: PathBuf,
    },
    /// Time single TPM commands.
    Bench {
        #[arg(long, default_value_t = harness::DEFAULT_ITERATIONS)]
        iters: u32,
        #[arg(long, default_value = "rng,pcr-read,hash,sign,extend")]
        ops: String,
    },
    /// Render the tables from a results file written by `suite`.
    Report {
        #[arg(long, default_value = "attest-sim-results.json")]
        results: PathBuf,
    },
    /// Run the bank on a local TCP port.
    Serve {
        #[arg(long)]
        port: u16,
        /// Account to provision, as NAME:PASSWORD; repeatable.
        #[arg(long = "user")]
        users: Vec<String>,
        #[arg(long)]
        whitelist: Option<PathBuf>,
        /// Server authentication token; a built-in default if omitted.
        #[arg(long)]
        token: Option<String>,
    },
    /// Register and log in against a running bank.
    Client {
        #[arg(long)]
        server: String,
        /// NAME:PASSWORD of the provisioned account.
        #[arg(long)]
        user: String,
        /// Hex activation key printed by `serve`.
        #[arg(long)]
        activation_key: String,
        #[arg(long, default_value = "1234")]
        pin: String,
        /// Server authentication token; a built-in default if omitted.
        #[arg(long)]
        token: Option<String>,
        /// Flows to run in order: register, login-1, login-2, credential.
        #[arg(long, default_value = "register,login-1,login-2")]
        flows: String,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::Scenario { name } => {
            let report = match harness::run_scenario(&name, seed) {
                Ok(r) => r,
                Err(ScenarioError::ExpectationFailed { report, .. }) => *report,
                Err(e) => return Err(e.into()),
            };
            println!("scenario {} (seed {seed})", report.name);
            for (i, s) in report.steps.iter().enumerate() {
                let mut line = format!("{:>3}. {:<34} {}", i + 1, s.step, s.outcome);
                if let Some(c) = s.counters {
                    line.push_str(&format!("  [{c}]"));
                }
                if let Some(b) = s.request_bytes {
                    line.push_str(&format!("  {b} bytes"));
                }
                println!("{line}");
            }
            match &report.divergence {
                None => {
                    println!("PASS");
                    Ok(ExitCode::SUCCESS)
                }
                Some(d) => {
                    println!("FAIL: {d}");
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Suite { parallel, out } => {
            let report = harness::run_suite(seed, parallel);
            print!("{}", report.render());
            fs::write(&out, report.to_json())?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Bench { iters, ops } => {
            let config = BenchConfig {
                ops: parse_ops(&ops)?,
                iterations: iters,
                seed,
                ..BenchConfig::default()
            };
            let report = run_bench(&config, &mut MonotonicClock::new())?;
            print!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { results } => {
            let text = fs::read_to_string(&results).map_err(|e| {
                format!("{}: {e} (run `attest-sim suite` first)", results.display())
            })?;
            let report = SuiteReport::from_json(&text)?;
            print!("{}", report.tables()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            port,
            users,
            whitelist,
            token,
        } => serve(seed, port, &users, whitelist, token),
        Command::Client {
            server,
            user,
            activation_key,
            pin,
            token,
            flows,
            transcript,
        } => client(ClientArgs {
            seed,
            server,
            user,
            activation_key,
            pin,
            token,
            flows,
            transcript,
        }),
    }
}

fn credentials(spec: &str) -> Result<Credentials> {
    let (name, password) = spec.split_once(':').ok_or("expected NAME:PASSWORD")?;
    let user = UserId::from_name(name).ok_or("user name is longer than 12 bytes")?;
    Ok(Credentials::from_secret(user, password.as_bytes()))
}

fn serve(
    seed: u64,
    port: u16,
    users: &[String],
    whitelist: Option<PathBuf>,
    token: Option<String>,
) -> Result<ExitCode> {
    let bank = Arc::new(BankService::new(BankConfig {
        whitelist_path: whitelist,
        ..BankConfig::seeded(seed)
    })?);
    for spec in users {
        let creds = credentials(spec)?;
        bank.provision_account(&creds);
        let key = bank.issue_activation_key(&creds.user_id)?;
        let name = spec.split(':').next().unwrap_or_default();
        println!("{name} activation-key={}", key.to_hex());
    }
    let listener = TcpListener::bind(("127.0.0.1", port))?;
    println!("listening on {}", listener.local_addr()?);
    let endpoint = Arc::new(BankEndpoint::new(bank, token_bytes(token)));
    channel::serve(listener, endpoint)?;
    Ok(ExitCode::SUCCESS)
}

struct ClientArgs {
    seed: u64,
    server: String,
    user: String,
    activation_key: String,
    pin: String,
    token: Option<String>,
    flows: String,
    transcript: Option<PathBuf>,
}

fn client(args: ClientArgs) -> Result<ExitCode> {
    let addr: SocketAddr = args
        .server
        .to_socket_addrs()?
        .next()
        .ok_or("server address did not resolve")?;
    let creds = credentials(&args.user)?;
    let key = hex::decode(&args.activation_key)
        .ok()
        .and_then(|b| ActivationKey::from_slice(&b))
        .ok_or("activation key must be 40 hex digits")?;
    let pin = Pin::new(&args.pin)?;
    let cfg = ChannelConfig::new(Transport::LocalTcp(addr), token_bytes(args.token));
    let mut session = channel::open_session(&cfg)?;
    let mut lma = Lma::new(Tpm::new(TpmConfig::seeded(args.seed)));

    let mut all_granted = true;
    for flow in args.flows.split(',').map(str::trim) {
        let challenge = session.challenge().ok_or("server sent no challenge")?;
        let (request, evidence, counters) = match flow {
            "credential" => (WireMessage::CredentialLogin(creds), None, None),
            "register" | "login-1" | "login-2" => {
                lma.measure_software(GENUINE_IMAGE)?;
                let out = match flow {
                    "register" => lma.register(&key, &pin, &creds, &challenge),
                    "login-1" => lma.login(&pin, LoginSteps::One, &challenge),
                    _ => lma.login(&pin, LoginSteps::Two, &challenge),
                };
                let out = match out {
                    Ok(out) => out,
                    Err(e) => {
                        println!("{flow:<10} refused on device: {e}");
                        all_granted = false;
                        continue;
                    }
                };
                lma.end_session()?;
                (out.request, Some(out.evidence), Some(out.counters))
            }
            other => return Err(format!("unknown flow {other:?}").into()),
        };
        let reply = session.request(&request, evidence.as_ref())?;
        let decision = match reply {
            WireMessage::Grant(_) => "Grant".to_string(),
            WireMessage::Deny(r) => {
                all_granted = false;
                format!("Deny({r})")
            }
            other => format!("{:?}", other.kind()),
        };
        let mut line = format!(
            "{flow:<10} {decision:<24} {} bytes",
            request.payload().len()
        );
        if let Some(c) = counters {
            line.push_str(&format!("  [{c}]"));
        }
        println!("{line}");
    }
    if let Some(path) = args.transcript {
        fs::write(path, session.transcript().to_log())?;
    }
    Ok(if all_granted {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn token_bytes(token: Option<String>) -> Vec<u8> {
    token.map_or_else(|| DEFAULT_SERVER_TOKEN.to_vec(), String::into_bytes)
}
