//! `mimo-ppsnr`: BER sweeps, closed-form PPSNR analytics, and self-checks
//! for MIMO MMSE links with imperfect channel estimation.

mod analytics;
mod config;
mod output;
mod validate;

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mimo_ppsnr::sim::run_curve;

#[derive(Parser)]
#[command(
    name = "mimo-ppsnr",
    version,
    about = "Post-processing SNR analysis and Monte Carlo BER simulation for MIMO MMSE receivers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep and write one CSV row per (configuration, SNR point)
    Curve(CurveArgs),
    /// Evaluate the closed-form per-stream PPSNR for an explicit channel
    Analytics(AnalyticsArgs),
    /// Run the built-in oracle and property self-checks
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// BPSK, 1x4 / 2x4 / 4x4, ML training and perfect CSI, 0-20 dB
    #[value(name = "fig1-bpsk", alias = "fig1")]
    Fig1Bpsk,
    /// 16QAM, 1x4 / 2x4 / 4x4, ML training and perfect CSI, 0-20 dB
    #[value(name = "fig2-16qam", alias = "fig2")]
    Fig2Qam16,
    /// QPSK 4x5 with fixed estimation error 0/5/10/20%, 0-40 dB
    #[value(name = "fig3-qpsk-floor", alias = "fig3")]
    Fig3QpskFloor,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModArg {
    Bpsk,
    Qpsk,
    Qam16,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CeArg {
    Perfect,
    Ml,
    Fixed,
}

#[derive(Args)]
pub struct CurveArgs {
    /// Experiment preset; mutually exclusive with the structural flags below
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// key=value config file; command-line flags override file entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transmit antennas
    #[arg(long)]
    nt: Option<usize>,
    /// Receive antennas
    #[arg(long)]
    nr: Option<usize>,
    /// Training symbols per packet
    #[arg(long)]
    ntr: Option<usize>,
    /// Constellation
    #[arg(long = "mod", value_enum)]
    modulation: Option<ModArg>,
    /// Channel-estimation mode
    #[arg(long, value_enum)]
    ce: Option<CeArg>,
    /// Estimation-error standard deviation (requires --ce fixed)
    #[arg(long)]
    sigma_e: Option<f64>,
    /// First Eb/N0 grid point in dB
    #[arg(long)]
    snr_start: Option<f64>,
    /// Last Eb/N0 grid point in dB
    #[arg(long)]
    snr_stop: Option<f64>,
    /// Grid step in dB
    #[arg(long)]
    snr_step: Option<f64>,
    /// Channel realizations per SNR point
    #[arg(long)]
    channels: Option<usize>,
    /// Packets per channel realization
    #[arg(long)]
    packets: Option<usize>,
    /// Symbol vectors per packet
    #[arg(long)]
    symbols: Option<usize>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path
    #[arg(long, default_value = "curve.csv")]
    out: PathBuf,
    /// Full experiment protocol (1000 channels x 500 packets x 2000 symbols)
    #[arg(long)]
    paper_scale: bool,
    /// Scale the ML estimation-error variance by N_t (per-antenna SNR variant)
    #[arg(long)]
    ce_var_nt: bool,
}

#[derive(Args)]
pub struct AnalyticsArgs {
    /// Channel matrix: rows separated by ';', entries by ',', complex
    /// entries like 1.2-0.8i
    #[arg(long)]
    h: String,
    /// Es/N0 in dB (per transmit antenna)
    #[arg(long)]
    es_n0_db: f64,
    /// Channel estimation error variance per entry
    #[arg(long, default_value_t = 0.0)]
    sigma_e2: f64,
    /// Per-antenna symbol energy
    #[arg(long, default_value_t = 1.0)]
    es: f64,
}

#[derive(Args)]
pub struct ValidateArgs {
    /// Seed for the stochastic checks
    #[arg(long, default_value_t = 20_250_810)]
    seed: u64,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var("MIMO_PPSNR_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .context("MIMO_PPSNR_THREADS must be a positive integer")?;
        if n == 0 {
            bail!("MIMO_PPSNR_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("failed to configure worker pool")?;
    }
    Ok(())
}

fn run_curve_command(args: CurveArgs) -> anyhow::Result<()> {
    let plan = config::resolve(&args)?;
    let mut results = Vec::with_capacity(plan.variants.len());
    for variant in &plan.variants {
        eprintln!("running {} ...", variant.label);
        let points = run_curve(&variant.cfg)
            .with_context(|| format!("simulation failed for {}", variant.label))?;
        results.push(points);
    }
    let csv = output::render_csv(&plan, &results);
    std::fs::write(&args.out, csv)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    output::print_summary(&plan, &results);
    println!("CSV written to {}", args.out.display());
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match cli.command {
        Command::Curve(args) => run_curve_command(args),
        Command::Analytics(args) => analytics::run(&args),
        Command::Validate(args) => validate::run(&args),
    });
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
