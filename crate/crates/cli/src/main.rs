//! `tightwin`: design, sweep, analyze and verify tight minimum-sidelobe
//! windows for the discrete Gabor transform.

mod commands;
mod error;
mod manifest;
mod proportion;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::proportion::Proportion;

#[derive(Debug, Parser)]
#[command(name = "tightwin", version, about = "Tight minimum-sidelobe windows for the DGT")]
pub struct Cli {
    /// Output file (window JSON, spectrum CSV or report JSON, depending on the command).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output directory for `sweep`.
    #[arg(long, global = true)]
    pub outdir: Option<PathBuf>,
    /// Seed for the random test signals of `verify`.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Stop once the Riemannian gradient norm is at most this.
    #[arg(long, global = true, default_value_t = 1e-15)]
    pub delta: f64,
    /// Newton iteration cap.
    #[arg(long, global = true, default_value_t = 1000)]
    pub imax: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the Slepian window for mainlobe proportion p.
    Slepian {
        #[arg(long = "K")]
        k: usize,
        /// `n/d` or a decimal in (0, 1).
        #[arg(long)]
        p: Proportion,
        /// Hop recorded in the window file [default: K/4].
        #[arg(long)]
        a: Option<usize>,
        /// Channels recorded in the window file [default: K].
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Design a tight minimum-sidelobe window by Riemannian Newton iteration.
    Design {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        a: usize,
        /// [default: K]
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long)]
        p: Proportion,
        /// `slepian` or `file:<window.json>`.
        #[arg(long, default_value = "slepian")]
        init: String,
    },
    /// Warm-started designs for p = 1/K, ..., pmax/K.
    Sweep {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        a: usize,
        /// [default: K]
        #[arg(long = "M")]
        m: Option<usize>,
        #[arg(long)]
        pmax: u64,
    },
    /// Spectrum CSV and concentration metrics of a window file.
    Analyze {
        window: PathBuf,
        /// Mainlobe proportion [default: the one stored in the window file].
        #[arg(long)]
        p: Option<Proportion>,
        /// Frequency samples on [-1/2, 1/2) [default: 16 K].
        #[arg(long)]
        num_points: Option<usize>,
    },
    /// Tightness check and DGT round trip on random signals.
    Verify {
        window: PathBuf,
        /// Signal length [default: 4 K, rounded up to a multiple of a and at least M].
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
    },
    /// Validate files written by this tool.
    SchemaCheck {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tightwin: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
