//! `eprsim` binary: argument parsing, output routing and exit codes
//! (0 success, 1 usage/config error, 2 numerical failure).

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use eprsim_cli::commands::{self, ClfOptions, FitOptions, SweepVar};
use eprsim_cli::config::ExperimentConfig;
use eprsim_cli::CliError;

#[derive(Parser)]
#[command(
    name = "eprsim",
    version,
    about = "Frequency-domain noise model for EPR-entangled squeezed light"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Variance spectra at fixed readout angles (or the Wiener-conditioned
    /// spectrum, per the config's combiner)
    Spectrum {
        /// Experiment config file
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated readout angles in radians (default "0,pi")
        #[arg(long)]
        angles: Option<String>,
    },
    /// Long-format variance heatmap over frequency and readout angle
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Average over a frequency band `lo:hi` in Hz, one row per angle
        #[arg(long)]
        band: Option<String>,
    },
    /// Fit the total detection loss to squeezing/anti-squeezing records
    FitLoss {
        /// Input CSV with columns pump_power_mw,v_plus_db,v_minus_db
        #[arg(long)]
        data: PathBuf,
        /// Fit-curve CSV path (omitted: report only)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fix the OPO threshold power (mW); default 66.3
        #[arg(long)]
        threshold_mw: Option<f64>,
        /// Float the threshold power as a second fit parameter
        #[arg(long)]
        float_threshold: bool,
        /// OPO half-linewidth in Hz
        #[arg(long, default_value_t = 12.1e6)]
        gamma_opo_hz: f64,
        /// Dark-noise level relative to shot noise (dB), subtracted from
        /// the measured variances before fitting
        #[arg(long)]
        dark_noise_db: Option<f64>,
    },
    /// Coherent-locking-field error signals versus one swept phase
    Clf {
        #[arg(long, default_value_t = 0.29)]
        x: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_b_rad: f64,
        #[arg(long, default_value_t = 0.0)]
        phi_c_rad: f64,
        #[arg(long, default_value_t = 0.0)]
        phi_lo_rad: f64,
        #[arg(long, default_value_t = 1.21e6)]
        gamma_clf_hz: f64,
        #[arg(long, default_value_t = 12.1e6)]
        gamma_in_hz: f64,
        #[arg(long, default_value_t = 12.1e6)]
        gamma_tot_hz: f64,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        /// Evaluate the transmission signal with the reflection lock engaged
        #[arg(long)]
        locked: bool,
        /// Swept phase variable
        #[arg(long, value_enum, default_value_t = SweepArg::PhiC)]
        sweep: SweepArg,
        #[arg(long, default_value_t = 0.0)]
        sweep_start_rad: f64,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        sweep_stop_rad: f64,
        #[arg(long, default_value_t = 361)]
        sweep_points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a config file and print the derived experiment summary
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    PhiC,
    PhiLo,
    ThetaB,
}

impl From<SweepArg> for SweepVar {
    fn from(v: SweepArg) -> Self {
        match v {
            SweepArg::PhiC => SweepVar::PhiC,
            SweepArg::PhiLo => SweepVar::PhiLo,
            SweepArg::ThetaB => SweepVar::ThetaB,
        }
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Spectrum { config, out, angles } => {
            let cfg = ExperimentConfig::load(&config)?;
            let angles = match angles {
                Some(list) => commands::parse_angles(&list)?,
                None => vec![0.0, std::f64::consts::PI],
            };
            let csv = commands::cmd_spectrum(&cfg, &angles)?;
            emit(out.as_ref(), &csv)
        }
        Cmd::Sweep { config, out, band } => {
            let cfg = ExperimentConfig::load(&config)?;
            let band = band.map(|b| commands::parse_band(&b)).transpose()?;
            let csv = commands::cmd_sweep(&cfg, band)?;
            emit(out.as_ref(), &csv)
        }
        Cmd::FitLoss {
            data,
            out,
            threshold_mw,
            float_threshold,
            gamma_opo_hz,
            dark_noise_db,
        } => {
            if float_threshold && threshold_mw.is_some() {
                return Err(CliError::Usage(
                    "--float-threshold and --threshold-mw are mutually exclusive".into(),
                ));
            }
            let text = std::fs::read_to_string(&data).map_err(|e| CliError::Io {
                path: data.display().to_string(),
                message: e.to_string(),
            })?;
            let opts = FitOptions {
                threshold_mw: if float_threshold {
                    None
                } else {
                    Some(threshold_mw.unwrap_or(eprsim_core::analysis::DEFAULT_THRESHOLD_MW))
                },
                gamma_opo_hz,
                dark_noise_db,
            };
            let (report, curve) =
                commands::cmd_fit_loss(&text, &data.display().to_string(), &opts)?;
            print!("{report}");
            if let Some(path) = out {
                emit(Some(&path), &curve)?;
            }
            Ok(())
        }
        Cmd::Clf {
            x,
            theta_b_rad,
            phi_c_rad,
            phi_lo_rad,
            gamma_clf_hz,
            gamma_in_hz,
            gamma_tot_hz,
            gain,
            locked,
            sweep,
            sweep_start_rad,
            sweep_stop_rad,
            sweep_points,
            out,
        } => {
            let opts = ClfOptions {
                x,
                theta_b: theta_b_rad,
                phi_c: phi_c_rad,
                phi_lo: phi_lo_rad,
                gamma_clf_hz,
                gamma_in_hz,
                gamma_tot_hz,
                gain,
                locked,
                sweep: sweep.into(),
                sweep_start: sweep_start_rad,
                sweep_stop: sweep_stop_rad,
                sweep_points,
            };
            let csv = commands::cmd_clf(&opts)?;
            emit(out.as_ref(), &csv)
        }
        Cmd::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            print!("{}", commands::cmd_validate(&cfg, &config.display().to_string()));
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
