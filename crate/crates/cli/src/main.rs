use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use preictal_cli::commands::{
    cmd_eval, cmd_gen, cmd_rtt, cmd_serve, cmd_stream, cmd_train, CmdError,
};
use preictal_cli::config::RunConfig;

/// Exit codes: 0 success, 1 usage, 2 bad data or config, 3 runtime
/// failure.
#[derive(Parser)]
#[command(name = "preictal", version, about = "EEG preictal state detection toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a single config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Shorthand for --set seed=N.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset.
    Gen,
    /// Train the reduction pipeline and classifier on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Leave-one-out evaluation with the comparator baseline.
    Eval {
        #[arg(long)]
        data: PathBuf,
    },
    /// Serve predictions over TCP.
    Serve {
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dimred: PathBuf,
    },
    /// Send segment files to a server and print its predictions.
    Stream {
        #[arg(long)]
        server: String,
        #[arg(long, default_value_t = 10_000)]
        timeout_ms: u64,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Measure echo round-trip times against a server.
    Rtt {
        #[arg(long)]
        server: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = preictal_net::DEFAULT_ECHO_PAYLOAD)]
        payload: usize,
        #[arg(long, default_value_t = 10_000)]
        timeout_ms: u64,
    },
}

/// Resolution order: defaults, then the config file, then --set and
/// --seed flags in command-line order.
fn resolve_config(common: &Common) -> Result<RunConfig, (i32, String)> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path).map_err(|e| (2, e.to_string()))?,
        None => RunConfig::default(),
    };
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| (1, format!("--set expects KEY=VALUE, got {pair:?}")))?;
        cfg.set(key.trim(), value.trim()).map_err(|e| (1, e.to_string()))?;
    }
    if let Some(seed) = common.seed {
        cfg.set("seed", &seed.to_string()).expect("seed key exists");
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), (i32, String)> {
    let cmd_err = |e: CmdError| (e.exit_code(), e.to_string());
    match &cli.command {
        Command::Gen => {
            let cfg = resolve_config(&cli.common)?;
            cmd_gen(&cfg, &cli.common.out).map_err(cmd_err)
        }
        Command::Train { data } => {
            let cfg = resolve_config(&cli.common)?;
            cmd_train(&cfg, data, &cli.common.out).map_err(cmd_err)
        }
        Command::Eval { data } => {
            let cfg = resolve_config(&cli.common)?;
            cmd_eval(&cfg, data, &cli.common.out).map_err(cmd_err)
        }
        Command::Serve { listen, model, dimred } => {
            cmd_serve(listen, model, dimred).map_err(cmd_err)
        }
        Command::Stream { server, timeout_ms, files } => {
            cmd_stream(server, Duration::from_millis(*timeout_ms), files).map_err(cmd_err)
        }
        Command::Rtt { server, count, payload, timeout_ms } => {
            cmd_rtt(server, *count, *payload, Duration::from_millis(*timeout_ms)).map_err(cmd_err)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help and --version through this path too.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code as u8)
        }
    }
}
