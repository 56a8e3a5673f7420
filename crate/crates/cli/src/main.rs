use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ethsim_cli::{parse_raw, run, validate, RunError};

#[derive(Parser)]
#[command(name = "ethsim", version, about = "Event/collapse dynamics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its data and summary files.
    Run {
        /// Config file (key=value lines or a JSON object).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override or add a key; repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (default: the config's `out`, else the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["csv", "json"])]
        format: Option<String>,
    },
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ETHSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("ETHSIM_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let Command::Run { config, set, out, format } = cli.command;

    let text = match &config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => String::new(),
    };
    let mut raw = match parse_raw(&text) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for pair in &set {
        let Some((k, v)) = pair.split_once('=') else {
            eprintln!("error: --set expects KEY=VALUE, got {pair:?}");
            return ExitCode::from(2);
        };
        raw.set(k.trim(), v.trim());
    }
    if let Some(f) = &format {
        raw.set("format", f);
    }
    let cfg = match validate(&raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out_dir = out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    match run(&cfg, &out_dir) {
        Ok(a) => {
            println!("{}", a.data_file.display());
            println!("{}", a.summary_file.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

fn one_line(e: &RunError) -> String {
    e.to_string().replace('\n', " ")
}
