use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wmatch::app::{self, ListenArgs, ObservationSource, ReplayArgs, SimulateArgs};
use wmatch::detector::DEFAULT_WINDOW;
use wmatch::net::DEFAULT_PORT;

/// Match V2X addresses to sensed vehicles with dynamic watermarking.
#[derive(Parser)]
#[command(name = "wmatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and analyse it.
    Simulate {
        /// Scenario TOML file or bundled scenario name.
        #[arg(long, default_value = "lab_two_vehicle")]
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario duration, s.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Stream packets over UDP to HOST:PORT in real time.
        #[arg(long, value_name = "HOST:PORT")]
        emit: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        speedup: f64,
    },
    /// Analyse recorded observation and packet streams.
    Replay {
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        packets: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        /// Write report.json and series.csv here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Receive packets over UDP and match them against live observations.
    Listen {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "0.0.0.0")]
        bind: String,
        /// Observation CSV to tail, or tcp:HOST:PORT.
        #[arg(long)]
        obs: String,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        window: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WMATCH_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let exit = match cli.command {
        Command::Simulate { config, out, seed, duration, window, emit, speedup } => app::simulate(&SimulateArgs {
            config,
            out,
            seed,
            duration,
            window,
            emit,
            speedup,
        }),
        Command::Replay { obs, packets, truth, window, out } => app::replay(&ReplayArgs {
            observations: obs,
            packets,
            truth,
            out,
            window,
        }),
        Command::Listen { port, bind, obs, duration, window, out } => app::listen(&ListenArgs {
            bind,
            port,
            observations: ObservationSource::parse(&obs),
            duration,
            window,
            out,
        }),
    };
    ExitCode::from(exit.code() as u8)
}
