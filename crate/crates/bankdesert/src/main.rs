//! Command-line front end: `run` analyzes CSV inputs, `synth` fabricates
//! a landscape to exercise the pipeline with.
//!
//! Failures print a single machine-readable JSON line to stderr and exit
//! 2 (bad input or configuration) or 3 (numeric degeneracy).

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use bankdesert::config::Settings;
use bankdesert::ingest::{parse_banks, parse_tracts};
use bankdesert::report::{analyze, run_fingerprint, sha256_hex, write_outputs, AnalysisData};
use bankdesert::synth::{banks_to_csv, generate, tracts_to_csv, LandscapeSpec};
use bankdesert::Result;

#[derive(Parser)]
#[command(
    name = "bankdesert",
    about = "Radial bank-branch density profiles and banking-desert analysis",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze bank and tract CSVs and write report files.
    Run {
        /// Bank branch CSV (id, latitude, longitude).
        #[arg(long)]
        banks: PathBuf,
        /// Census tract CSV (geoid, centroid, population, area, deprivation).
        #[arg(long)]
        tracts: PathBuf,
        /// Directory the report files are written into.
        #[arg(long)]
        out: PathBuf,
        /// TOML settings file; omitted keys fall back to defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the per-segment desert fraction.
        #[arg(long)]
        desert_fraction: Option<f64>,
        /// File of geoids, one per line, to tabulate subset quantiles for.
        #[arg(long)]
        subset: Option<PathBuf>,
        /// Compute and print the fingerprint, then stop without analyzing.
        #[arg(long)]
        fingerprint_only: bool,
    },
    /// Generate a synthetic landscape as banks.csv and tracts.csv.
    Synth {
        /// Directory the two CSVs are written into.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 400)]
        tracts: usize,
        #[arg(long, default_value_t = 12)]
        clusters: usize,
        /// Banks scattered uniformly outside any cluster.
        #[arg(long, default_value_t = 150)]
        background: usize,
    },
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(e) = real_main(cli) {
        eprintln!(
            "{}",
            serde_json::json!({ "error": e.kind(), "message": e.to_string() })
        );
        std::process::exit(e.exit_code());
    }
}

fn real_main(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            banks,
            tracts,
            out,
            config,
            desert_fraction,
            subset,
            fingerprint_only,
        } => {
            let mut settings = match &config {
                Some(path) => Settings::from_file(path)?,
                None => Settings::default(),
            };
            if let Some(f) = desert_fraction {
                settings.run.desert_fraction = f;
            }
            settings.run.validate()?;

            let bank_bytes = fs::read(&banks)?;
            let tract_bytes = fs::read(&tracts)?;
            let mut digests = vec![
                ("banks".to_string(), sha256_hex(&bank_bytes)),
                ("tracts".to_string(), sha256_hex(&tract_bytes)),
            ];

            let subset_geoids: Option<HashSet<String>> = match &subset {
                None => None,
                Some(path) => {
                    let text = fs::read_to_string(path)?;
                    digests.push(("subset".to_string(), sha256_hex(text.as_bytes())));
                    Some(
                        text.lines()
                            .map(str::trim)
                            .filter(|l| !l.is_empty())
                            .map(String::from)
                            .collect(),
                    )
                }
            };

            if fingerprint_only {
                println!("fingerprint {}", run_fingerprint(&settings, &digests));
                return Ok(());
            }

            let bank_label = banks.display().to_string();
            let tract_label = tracts.display().to_string();
            let parsed_banks =
                parse_banks(bank_bytes.as_slice(), &settings.bank_schema, &bank_label)?;
            let parsed_tracts =
                parse_tracts(tract_bytes.as_slice(), &settings.tract_schema, &tract_label)?;
            if parsed_banks.dropped > 0 {
                log::warn!("{}: dropped {} rows", bank_label, parsed_banks.dropped);
            }
            if parsed_tracts.dropped > 0 {
                log::warn!("{}: dropped {} rows", tract_label, parsed_tracts.dropped);
            }

            let bundle = analyze(
                &settings,
                AnalysisData {
                    banks: parsed_banks.records,
                    tracts: parsed_tracts.records,
                    dropped_banks: parsed_banks.dropped,
                    dropped_tracts: parsed_tracts.dropped,
                    digests,
                    subset_geoids,
                },
            )?;
            let written = write_outputs(&bundle, &out)?;
            println!("fingerprint {}", bundle.fingerprint);
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            tracts,
            clusters,
            background,
        } => {
            let spec = LandscapeSpec {
                seed,
                n_tracts: tracts,
                n_clusters: clusters,
                background_points: background,
                ..LandscapeSpec::default()
            };
            let landscape = generate(&spec)?;
            fs::create_dir_all(&out)?;
            let bank_path = out.join("banks.csv");
            let tract_path = out.join("tracts.csv");
            fs::write(&bank_path, banks_to_csv(&landscape.banks))?;
            fs::write(&tract_path, tracts_to_csv(&landscape.tracts))?;
            println!(
                "wrote {} banks to {}",
                landscape.banks.len(),
                bank_path.display()
            );
            println!(
                "wrote {} tracts to {}",
                landscape.tracts.len(),
                tract_path.display()
            );
            Ok(())
        }
    }
}
