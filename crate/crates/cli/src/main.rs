//! `sdiq` — finite-size randomness certification for SI/MDI QRNGs.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdiq_cli::apply::{apply_mdi, apply_si, CountsFile};
use sdiq_cli::certfile::{
    mdi_certificate_text, parse_certificate, si_certificate_text,
};
use sdiq_cli::config::{CMode, DeltaMode, Protocol, RunConfig};
use sdiq_cli::pipeline::{
    certify_once, optimize_point, sweep, sweep_csv, CertifiedPoint, PointParams,
};
use sdiq_core::optics::{mdi_model, si_povm};

#[derive(Parser)]
#[command(name = "sdiq", version, about = "Finite-size randomness certification for semi-device-independent QRNGs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the bounded-difference mode.
    #[arg(long, value_enum)]
    mode_c: Option<CModeArg>,
    /// Override the Delta-placement mode.
    #[arg(long, value_enum)]
    mode_delta: Option<DeltaModeArg>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CModeArg {
    Paper,
    Conservative,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DeltaModeArg {
    Paper,
    Derived,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a single (mu, p_sig, loss) point.
    Certify {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the extracted dual certificate to this file.
        #[arg(long)]
        save_cert: Option<PathBuf>,
    },
    /// Sweep the configured loss range and write a CSV.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// CSV output path (overrides the config's `output`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Optimize mu and/or p_sig at a single loss point.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Apply a saved certificate to measured counts.
    Apply {
        #[command(flatten)]
        common: CommonArgs,
        /// Saved certificate file.
        #[arg(long)]
        certificate: PathBuf,
        /// Measured counts file (TOML).
        #[arg(long)]
        counts: PathBuf,
    },
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, String> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| format!("cannot read {}: {e}", common.config.display()))?;
    let mut config = RunConfig::parse(&text).map_err(|e| e.to_string())?;
    if let Some(m) = common.mode_c {
        config.mode_c = match m {
            CModeArg::Paper => CMode::Paper,
            CModeArg::Conservative => CMode::Conservative,
        };
    }
    if let Some(m) = common.mode_delta {
        config.mode_delta = match m {
            DeltaModeArg::Paper => DeltaMode::Paper,
            DeltaModeArg::Derived => DeltaMode::Derived,
        };
    }
    Ok(config)
}

fn single_loss(config: &RunConfig) -> Result<f64, String> {
    let points = config.loss_db.points().map_err(|e| e.to_string())?;
    if points.len() != 1 {
        return Err("this subcommand needs a single loss point, not a range".into());
    }
    Ok(points[0])
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn run() -> Result<(), (u8, String)> {
    let cli = Cli::parse();
    match cli.command {
        Command::Certify { common, save_cert } => {
            let config = load_config(&common).map_err(|e| (EXIT_CONFIG, e))?;
            let loss_db = single_loss(&config).map_err(|e| (EXIT_CONFIG, e))?;
            let (Some(mu), Some(p_sig)) = (config.mu.fixed(), config.p_sig.fixed()) else {
                return Err((
                    EXIT_CONFIG,
                    "certify needs fixed mu and p_sig; use `optimize` to search".into(),
                ));
            };
            let pp = PointParams::from_config(&config);
            let rec = certify_once(&pp, mu, p_sig, loss_db)
                .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
            println!("{}", rec.summary_line());
            if let Some(path) = save_cert {
                let point = sdiq_cli::pipeline::certify_point(&pp, mu, loss_db)
                    .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
                let text = certificate_text(&config, mu, &point)
                    .map_err(|e| (EXIT_NUMERICAL, e))?;
                fs::write(&path, text)
                    .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", path.display())))?;
                println!("certificate written to {}", path.display());
            }
            Ok(())
        }
        Command::Sweep { common, output } => {
            let config = load_config(&common).map_err(|e| (EXIT_CONFIG, e))?;
            let out_path = output
                .or_else(|| config.output.clone())
                .ok_or((EXIT_CONFIG, "no output path: set `output` or pass --output".to_string()))?;
            // Fail on an unwritable path before computing anything.
            fs::write(&out_path, "")
                .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", out_path.display())))?;
            let (records, any_failed) = sweep(&config);
            for rec in &records {
                match rec {
                    Ok(r) => println!("{}", r.summary_line()),
                    Err(e) => eprintln!("{e}"),
                }
            }
            let csv = sweep_csv(&records);
            fs::write(&out_path, csv)
                .map_err(|e| (EXIT_CONFIG, format!("cannot write {}: {e}", out_path.display())))?;
            println!("csv written to {}", out_path.display());
            if any_failed {
                return Err((EXIT_NUMERICAL, "one or more sweep points failed".into()));
            }
            Ok(())
        }
        Command::Optimize { common } => {
            let config = load_config(&common).map_err(|e| (EXIT_CONFIG, e))?;
            let loss_db = single_loss(&config).map_err(|e| (EXIT_CONFIG, e))?;
            let pp = PointParams::from_config(&config);
            let rec = optimize_point(&pp, config.mu.fixed(), config.p_sig.fixed(), loss_db)
                .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
            println!("optimum: mu = {}, p_sig = {}", rec.mu_used, rec.p_sig_used);
            println!("{}", rec.summary_line());
            Ok(())
        }
        Command::Apply { common, certificate, counts } => {
            let config = load_config(&common).map_err(|e| (EXIT_CONFIG, e))?;
            let cert_text = fs::read_to_string(&certificate).map_err(|e| {
                (EXIT_CONFIG, format!("cannot read {}: {e}", certificate.display()))
            })?;
            let counts_text = fs::read_to_string(&counts)
                .map_err(|e| (EXIT_CONFIG, format!("cannot read {}: {e}", counts.display())))?;
            let parsed =
                parse_certificate(&cert_text).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            if parsed.protocol() != config.protocol {
                return Err((
                    EXIT_CONFIG,
                    format!(
                        "certificate protocol {} does not match config protocol {}",
                        parsed.protocol(),
                        config.protocol
                    ),
                ));
            }
            let counts_file =
                CountsFile::parse(&counts_text).map_err(|e| (EXIT_CONFIG, e.to_string()))?;
            let fs_result = match config.protocol {
                Protocol::Si => {
                    let model =
                        si_povm(config.p_z).map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
                    apply_si(&model, &parsed, &counts_file)
                        .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?
                }
                Protocol::Mdi => {
                    let mu = config.mu.fixed().ok_or((
                        EXIT_CONFIG,
                        "apply needs a fixed mu to rebuild the MDI model".to_string(),
                    ))?;
                    let model = mdi_model(mu, config.p_s)
                        .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?;
                    apply_mdi(&model, &parsed, &counts_file)
                        .map_err(|e| (EXIT_NUMERICAL, e.to_string()))?
                }
            };
            println!(
                "delta {} n_guess_upper {} generation_rounds {} n_fin {} rate {}",
                fs_result.delta,
                fs_result.n_guess_upper,
                fs_result.generation_rounds,
                fs_result.n_fin,
                fs_result.per_round_rate
            );
            Ok(())
        }
    }
}

fn certificate_text(
    config: &RunConfig,
    mu: f64,
    point: &CertifiedPoint,
) -> Result<String, String> {
    match point {
        CertifiedPoint::Si { cert, .. } => {
            let model = si_povm(config.p_z).map_err(|e| e.to_string())?;
            Ok(si_certificate_text(&model, cert))
        }
        CertifiedPoint::Mdi { cert, .. } => {
            let model = mdi_model(mu, config.p_s).map_err(|e| e.to_string())?;
            Ok(mdi_certificate_text(&model, cert))
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
