// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::io::{self, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use trainer_cli::commands::{self, Failure, PerfArgs};
use trainer_cli::server;
use trainer_core::perf::VSyncPolicy;
use trainer_core::store::{now_ms, StoreConfig};
use trainer_core::{HintConfig, Mode, SessionRecord, Store};

#[derive(Parser)]
#[command(name = "trainer", version, about = "Engine procedure trainer: scenarios, sessions, reports, perf lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file.
    Validate {
        file: PathBuf,
        /// Also print the default step order.
        #[arg(long)]
        order: bool,
    },
    /// Run a session in the terminal (built-in scenario when FILE is omitted).
    Run {
        file: Option<PathBuf>,
        #[arg(long, default_value = "training")]
        mode: Mode,
        #[arg(long, default_value = "T3")]
        hints: HintConfig,
        /// Write the session record here when the session ends.
        #[arg(long)]
        record: Option<PathBuf>,
        #[arg(long)]
        student: Option<String>,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        session_id: Option<String>,
    },
    /// Verify a session record by replaying it.
    Replay {
        record: PathBuf,
        /// Scenario file, if the record is not for the built-in scenario.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Cohort tables from a CSV file or a session store.
    Report {
        #[arg(long, conflicts_with = "store", required_unless_present = "store")]
        cohort: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Groups to include (store only; default all).
        #[arg(long)]
        group: Vec<String>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Frame pacing, draw-call batching and before/after comparison.
    Perf {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        vsync: Option<VSyncPolicy>,
        #[arg(long, default_value_t = 90.0)]
        refresh: f64,
        /// Baseline metrics JSON (as written by `--json`).
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Print the metrics summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: i64,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, env = "TRAINER_DATA", default_value = "trainer-data")]
        data: PathBuf,
        /// Bearer token for teacher endpoints.
        #[arg(long, env = "TRAINER_TOKEN")]
        token: Option<String>,
        /// Static web client to serve at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> commands::Output {
    match command {
        Command::Validate { file, order } => commands::validate(&file, order),
        Command::Run { file, mode, hints, record, student, group, session_id } => {
            let sc = commands::load_scenario(file.as_deref())?;
            let id = session_id.unwrap_or_else(|| format!("cli-{}", now_ms()));
            let stdin = io::stdin();
            let mut stdout = io::stdout();
            let session = commands::run_interactive(&id, sc, mode, hints, stdin.lock(), &mut stdout)?;
            let _ = stdout.flush();
            match record {
                None => Ok(String::new()),
                Some(path) => {
                    let rec = SessionRecord::from_session(&session, student, group).map_err(Failure::input)?;
                    fs::write(&path, rec.to_canonical_string())
                        .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
                    Ok(format!("record written to {}\n", path.display()))
                }
            }
        }
        Command::Replay { record, scenario } => commands::replay(&record, scenario.as_deref()),
        Command::Report { cohort, store, group, scenario, json } => match (cohort, store) {
            (Some(csv), _) => commands::report_csv(&csv, json),
            (None, Some(dir)) => commands::report_store(&dir, &group, scenario.as_deref(), json),
            (None, None) => Err(Failure::input("pass --cohort CSV or --store DIR")),
        },
        Command::Perf { scene, trace, vsync, refresh, compare, json } => commands::perf(&PerfArgs {
            scene: scene.as_deref(),
            trace: trace.as_deref(),
            vsync,
            refresh_hz: refresh,
            compare: compare.as_deref(),
            json,
        }),
        Command::Serve { port, host, data, token, ui } => {
            let config = StoreConfig::new(data, port, token).map_err(Failure::input)?;
            let store = Store::open(&config.data_dir).map_err(|e| Failure::new(2, e))?;
            let opened = store.open_report();
            eprintln!(
                "store {}: {} sessions, {} temp files removed, {} quarantined",
                config.data_dir.display(),
                opened.sessions,
                opened.removed_temp_files,
                opened.quarantined.len()
            );
            let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(2, e))?;
            let addr = SocketAddr::new(host, config.port);
            runtime
                .block_on(server::serve(Arc::new(store), addr, config.auth_token, ui))
                .map_err(|e| Failure::new(2, format!("{addr}: {e}")))?;
            Ok(String::new())
        }
    }
}
