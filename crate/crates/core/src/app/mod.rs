//! Command-line driver.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use sweep::{run_sweep, SweepOptions, SweepOutcome};

use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "dicke", version, about = "Exact diagonalization and ergodicity diagnostics for the anisotropic Dicke model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lowest eigenvalues on a certified cutoff (index,energy).
    Spectrum(Flags),
    /// Spacing histogram against Poisson and Wigner-Dyson.
    Spacing(Flags),
    /// Consecutive-spacing ratios and their mean.
    Rstat(Flags),
    /// Thermal OTOC series t,F,deficit.
    Otoc(Flags),
    /// Maximum eigenstate overlap with a reference Hamiltonian.
    Overlap(Flags),
    /// (g1, g2) grid of diagnostics with checkpoint and resume.
    Sweep(Flags),
}

/// Every flag mirrors a config key of the same name.
#[derive(Debug, Args)]
struct Flags {
    /// key = value file; flags override it
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    omega: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    omega0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    g1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    g2: Option<String>,
    /// Pseudospin length (10, 1.5 or 3/2)
    #[arg(long)]
    j: Option<String>,
    /// Fock cutoff: auto or an integer
    #[arg(long, value_name = "auto|N")]
    nmax: Option<String>,
    /// Parity sector: +, - (or both for spectrum)
    #[arg(long, allow_hyphen_values = true, value_name = "+|-")]
    parity: Option<String>,
    /// Number of lowest levels (or target states) to certify
    #[arg(long)]
    levels: Option<String>,
    /// Cutoff convergence tolerance
    #[arg(long)]
    tol: Option<String>,
    /// Largest cutoff tried before giving up
    #[arg(long)]
    ceiling: Option<String>,
    /// Level index window LO:HI (half-open)
    #[arg(long, value_name = "LO:HI")]
    window: Option<String>,
    /// Energy ceiling for the window
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// global, local or local:W
    #[arg(long)]
    unfold: Option<String>,
    /// Histogram COUNT or LO:HI:COUNT
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    /// T or START:STOP:COUNT
    #[arg(long)]
    time: Option<String>,
    /// c in V = W = a†a + c
    #[arg(long, allow_hyphen_values = true)]
    shift: Option<String>,
    /// Half-width of the OTOC time average
    #[arg(long)]
    average: Option<String>,
    #[arg(long = "average-points")]
    average_points: Option<String>,
    /// Reference g1 for overlap
    #[arg(long = "ref-g1")]
    ref_g1: Option<String>,
    /// Reference g2 for overlap
    #[arg(long = "ref-g2")]
    ref_g2: Option<String>,
    /// Reference eigenspace grouping tolerance (auto = 1e-9 of the spectral width)
    #[arg(long = "degeneracy-tol")]
    degeneracy_tol: Option<String>,
    /// MIN:MAX:STEPS[,MIN:MAX:STEPS]
    #[arg(long)]
    grid: Option<String>,
    /// Sweep diagnostics, comma separated: r, otoc, order
    #[arg(long)]
    diagnostics: Option<String>,
    /// Corner mask radius recorded for plotting
    #[arg(long = "mask-radius")]
    mask_radius: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<String>,
    /// Sweep checkpoint (default OUT/sweep.checkpoint)
    #[arg(long)]
    checkpoint: Option<String>,
    /// Continue from an existing checkpoint
    #[arg(long)]
    resume: bool,
}

impl Flags {
    fn overrides(&self) -> Vec<(String, String)> {
        let fields: [(&str, &Option<String>); 28] = [
            ("omega", &self.omega),
            ("omega0", &self.omega0),
            ("g1", &self.g1),
            ("g2", &self.g2),
            ("j", &self.j),
            ("nmax", &self.nmax),
            ("parity", &self.parity),
            ("levels", &self.levels),
            ("tol", &self.tol),
            ("ceiling", &self.ceiling),
            ("window", &self.window),
            ("lambda", &self.lambda),
            ("unfold", &self.unfold),
            ("bins", &self.bins),
            ("beta", &self.beta),
            ("time", &self.time),
            ("shift", &self.shift),
            ("average", &self.average),
            ("average-points", &self.average_points),
            ("ref-g1", &self.ref_g1),
            ("ref-g2", &self.ref_g2),
            ("degeneracy-tol", &self.degeneracy_tol),
            ("grid", &self.grid),
            ("diagnostics", &self.diagnostics),
            ("mask-radius", &self.mask_radius),
            ("threads", &self.threads),
            ("out", &self.out),
            ("checkpoint", &self.checkpoint),
        ];
        let mut pairs: Vec<(String, String)> = fields
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        if self.resume {
            pairs.push(("resume".into(), "true".into()));
        }
        pairs
    }

    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides())
    }
}

fn execute(command: &Command) -> Result<PathBuf> {
    let (flags, name) = match command {
        Command::Spectrum(f) => (f, "spectrum"),
        Command::Spacing(f) => (f, "spacing"),
        Command::Rstat(f) => (f, "rstat"),
        Command::Otoc(f) => (f, "otoc"),
        Command::Overlap(f) => (f, "overlap"),
        Command::Sweep(f) => (f, "sweep"),
    };
    let cfg = flags.load()?;
    crate::exec::with_threads(cfg.threads, || match name {
        "spectrum" => commands::cmd_spectrum(&cfg),
        "spacing" => commands::cmd_spacing(&cfg),
        "rstat" => commands::cmd_rstat(&cfg),
        "otoc" => commands::cmd_otoc(&cfg),
        "overlap" => commands::cmd_overlap(&cfg),
        _ => {
            let options = SweepOptions {
                progress: true,
                ..SweepOptions::default()
            };
            let outcome = run_sweep(&cfg, &options)?;
            Ok(outcome.csv.unwrap_or(outcome.checkpoint))
        }
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(path) => {
            println!("{}", path.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
