use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use hjband::cli::{
    self, cmd_action, cmd_bands, cmd_dispersion, cmd_verify, parse_config_file, plot_script,
    CliError, RawConfig, RunConfig,
};

/// Band structure of the one-dimensional Kronig-Penney lattice through the
/// quantum Hamilton-Jacobi reduced action.
#[derive(Parser)]
#[command(name = "hjband", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate cos(Ke) on an energy grid
    Dispersion(CommonArgs),
    /// Locate the allowed energy bands on [emin, emax]
    Bands(CommonArgs),
    /// Construct the Bloch-consistent reduced action at one energy
    Action(CommonArgs),
    /// Run the invariant battery at one energy
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Barrier height V0 (>= 0)
    #[arg(long)]
    v0: Option<f64>,
    /// Well width c (> 0)
    #[arg(long)]
    c: Option<f64>,
    /// Barrier width d (> 0)
    #[arg(long)]
    d: Option<f64>,
    /// Lower end of the energy range
    #[arg(long)]
    emin: Option<f64>,
    /// Upper end of the energy range
    #[arg(long)]
    emax: Option<f64>,
    /// Number of grid samples
    #[arg(long)]
    samples: Option<usize>,
    /// Superposition parameter gamma in [-1, 1]
    #[arg(long)]
    gamma: Option<f64>,
    /// Superposition phase delta (radians)
    #[arg(long)]
    delta: Option<f64>,
    /// Energy for `action` and `verify`
    #[arg(long)]
    energy: Option<f64>,
    /// Periods covered by the `action` table
    #[arg(long)]
    periods: Option<usize>,
    /// Output format
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also emit a gnuplot script next to the CSV
    #[arg(long)]
    plot_script: bool,
    /// key=value configuration file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corrupt the solved constants (negative-control testing)
    #[arg(long, hide = true)]
    inject_error: bool,
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, CliError> {
        let flags = RawConfig {
            v0: self.v0,
            c: self.c,
            d: self.d,
            emin: self.emin,
            emax: self.emax,
            samples: self.samples,
            gamma: self.gamma,
            delta: self.delta,
            energy: self.energy,
            periods: self.periods,
            format: self.format,
            out: self.out,
            plot_script: self.plot_script,
            inject_error: self.inject_error,
            tolerances: Default::default(),
        };
        let merged = match &self.config {
            Some(path) => flags.over(parse_config_file(path)?),
            None => flags,
        };
        merged.validate()
    }
}

fn deliver(cfg: &RunConfig, subcommand: &str, output: String) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            std::fs::write(path, output).map_err(|e| {
                CliError::Config(format!("out: cannot write {}: {e}", path.display()))
            })?;
            if cfg.plot_script {
                let script_path = path.with_extension("gp");
                std::fs::write(&script_path, plot_script(subcommand, path)).map_err(|e| {
                    CliError::Config(format!("out: cannot write {}: {e}", script_path.display()))
                })?;
            }
        }
        None => print!("{output}"),
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                std::process::exit(cli::EXIT_OK);
            }
            return Err(CliError::Config(e.to_string()));
        }
    };
    match cli.command {
        Command::Dispersion(args) => {
            let cfg = args.into_config()?;
            let table = cmd_dispersion(&cfg)?;
            deliver(&cfg, "dispersion", table)
        }
        Command::Bands(args) => {
            let cfg = args.into_config()?;
            let table = cmd_bands(&cfg)?;
            deliver(&cfg, "bands", table)
        }
        Command::Action(args) => {
            let cfg = args.into_config()?;
            let table = cmd_action(&cfg)?;
            deliver(&cfg, "action", table)
        }
        Command::Verify(args) => {
            let cfg = args.into_config()?;
            let (report, all_pass) = cmd_verify(&cfg)?;
            deliver(&cfg, "verify", report)?;
            if !all_pass {
                return Err(CliError::Numeric("verification checks failed".into()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::from(cli::EXIT_OK as u8),
        Err(e) => {
            eprintln!("hjband: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
