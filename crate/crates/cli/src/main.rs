mod commands;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use failure::{Failure, EXIT_CONFIG};

/// Second-order decoherence simulator.
///
/// Model parameters come from `--config` (JSON) and/or flags; flags win
/// over config values. Outputs go to `--out-dir` (or `SODEC_OUT_DIR`).
#[derive(Parser, Debug)]
#[command(name = "sodec", version)]
struct Cli {
    /// Directory for CSV/JSON outputs.
    #[arg(
        long,
        global = true,
        env = "SODEC_OUT_DIR",
        default_value = "sodec-out"
    )]
    out_dir: PathBuf,

    /// Reserved. All computations are deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decoherence factor for one reservoir mode holding N photons.
    #[command(allow_negative_numbers = true)]
    SingleMode(SingleModeArgs),
    /// Decoherence factor for a vacuum multi-mode reservoir.
    #[command(allow_negative_numbers = true)]
    MultiMode(MultiModeArgs),
    /// Continuum-limit decay rate and frequency shift.
    #[command(allow_negative_numbers = true)]
    Continuum(ContinuumArgs),
    /// Second-order correlation grid G(t, t').
    #[command(allow_negative_numbers = true)]
    Correlation(CorrelationArgs),
    /// Canned scans with default parameters.
    #[command(allow_negative_numbers = true)]
    Reproduce(ReproduceArgs),
    /// Subspace (or full Fock-space) Hamiltonian as JSON.
    #[command(allow_negative_numbers = true)]
    DumpHamiltonian(DumpArgs),
}

#[derive(Args, Debug, Clone, Default)]
struct TimeArgs {
    /// Last sample time.
    #[arg(long)]
    t_max: Option<f64>,
    /// Number of uniform samples on [0, t_max].
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Also emit the resonant closed form (single mode, omega_j = omega_e).
    #[arg(long)]
    closed_form: bool,
    /// Also invert the resolvent numerically.
    #[arg(long)]
    resolvent_inversion: bool,
    /// Also run the full Fock-space reference and report the deviation.
    #[arg(long)]
    oracle: bool,
    /// Largest Fock sector the oracle may build.
    #[arg(long, default_value_t = sodec_core::oracle::DEFAULT_STATE_CAP)]
    oracle_cap: usize,
}

#[derive(Args, Debug, Clone, Default)]
struct SingleModeModel {
    /// JSON model config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    omega_e: Option<f64>,
    #[arg(long)]
    omega_j: Option<f64>,
    /// Coupling d.
    #[arg(long)]
    d: Option<f64>,
    /// Photon number N of the reservoir mode.
    #[arg(long, default_value_t = 0)]
    n: u32,
}

#[derive(Args, Debug)]
struct SingleModeArgs {
    #[command(flatten)]
    model: SingleModeModel,
    #[command(flatten)]
    time: TimeArgs,
    #[command(flatten)]
    verify: VerifyArgs,
}

#[derive(Args, Debug, Clone, Default)]
struct CombArgs {
    /// Number of comb modes.
    #[arg(long)]
    comb_count: Option<usize>,
    /// Comb center (defaults to omega_e).
    #[arg(long)]
    comb_center: Option<f64>,
    #[arg(long)]
    comb_half_bandwidth: Option<f64>,
    /// Coupling of every comb mode.
    #[arg(long)]
    comb_coupling: Option<f64>,
    /// Explicit mode `OMEGA:D`; repeatable. Replaces any comb.
    #[arg(long = "mode", value_name = "OMEGA:D")]
    modes: Vec<String>,
}

#[derive(Args, Debug)]
struct MultiModeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    omega_e: Option<f64>,
    #[command(flatten)]
    comb: CombArgs,
    #[command(flatten)]
    time: TimeArgs,
    #[command(flatten)]
    verify: VerifyArgs,
}

#[derive(Args, Debug)]
struct ContinuumArgs {
    #[arg(long, default_value_t = 1.0)]
    omega_e: f64,
    /// Flat mode density.
    #[arg(long, default_value_t = 10.0)]
    rho: f64,
    /// Flat coupling.
    #[arg(long, default_value_t = 0.02)]
    d: f64,
    /// Support extends this far below omega_e.
    #[arg(long, default_value_t = 0.5)]
    below: f64,
    /// Support extends this far above omega_e.
    #[arg(long, default_value_t = 0.5)]
    above: f64,
    #[command(flatten)]
    time: TimeArgs,
    /// Compare against an equally spaced comb with this many modes at
    /// spacing 1/rho, centered at omega_e.
    #[arg(long)]
    comb_count: Option<usize>,
}

#[derive(Args, Debug)]
struct CorrelationArgs {
    /// Weight of |1_g,1_e>; the rest is split evenly.
    #[arg(long, conflicts_with_all = ["weights", "at"])]
    p_mid: Option<f64>,
    /// Diagonal weights `P_UPPER,P_MID,P_LOWER`.
    #[arg(long, conflicts_with = "at")]
    weights: Option<String>,
    /// Interaction time T: derive the weights from the model evolved to T.
    #[arg(long)]
    at: Option<f64>,
    #[command(flatten)]
    model: SingleModeModel,
    #[arg(long)]
    c1_re: Option<f64>,
    #[arg(long)]
    c1_im: Option<f64>,
    #[arg(long)]
    c2_re: Option<f64>,
    #[arg(long)]
    c2_im: Option<f64>,
    /// Grid covers [0, t_max] on both axes (default two fringe periods).
    #[arg(long)]
    t_max: Option<f64>,
    /// Points per axis. The default puts samples on every fringe extremum
    /// of the default range.
    #[arg(long, default_value_t = 65)]
    grid: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Figure {
    Fig1,
    Fig2,
    Continuum,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Placement {
    OnGrid,
    OffGrid,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    figure: Figure,
    #[arg(long)]
    collapse_threshold: Option<f64>,
    #[arg(long)]
    revival_threshold: Option<f64>,
    /// Samples below this factor are left out of decay fits.
    #[arg(long)]
    fit_floor: Option<f64>,
    /// Comb placement relative to omega_e (fig2).
    #[arg(long, value_enum, default_value_t = Placement::OnGrid)]
    placement: Placement,
    #[command(flatten)]
    time: TimeArgs,
}

#[derive(Args, Debug)]
struct DumpArgs {
    #[command(flatten)]
    model: SingleModeModel,
    /// Dump the full Fock-space sector instead of the invariant subspace.
    #[arg(long)]
    full: bool,
}

fn run(cli: Cli) -> Result<PathBuf, Failure> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::SingleMode(a) => commands::single_mode(out, a),
        Command::MultiMode(a) => commands::multi_mode(out, a),
        Command::Continuum(a) => commands::continuum(out, a),
        Command::Correlation(a) => commands::correlation(out, a),
        Command::Reproduce(a) => commands::reproduce(out, a),
        Command::DumpHamiltonian(a) => commands::dump_hamiltonian(out, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg
                .lines()
                .next()
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", Failure::config(first).to_json_line());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", f.to_json_line());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
