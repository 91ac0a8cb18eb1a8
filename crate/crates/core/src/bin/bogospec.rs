//! Command-line front end for the pipeline.
//!
//! Every subcommand resolves a [`RunConfig`] from an optional config file
//! plus flag overrides, then delegates to the library. Stage subcommands
//! pull in their prerequisites automatically; `run` takes an explicit
//! stage list and refuses one with unsatisfied dependencies. Exit codes:
//! 0 ok, 2 usage, 3 validation, 4 numerical diagnostic.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bogospec::config::RunConfig;
use bogospec::error::{Error, Result};
use bogospec::io::load_oracle_fixtures;
use bogospec::pipeline::{
    emit_plot_data, parse_stages, run_pipeline, stage_oracle, PlotKind, RunManifest, Stage,
    DEPENDENCY_GRAPH,
};

#[derive(Parser)]
#[command(
    name = "bogospec",
    version,
    about = "Bogoliubov spectra and energy corrections for trapped Bose gases",
    after_help = DEPENDENCY_GRAPH
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every stage subcommand; each overrides the matching
/// config-file key.
#[derive(Args)]
struct Common {
    /// Run configuration file (defaults apply when omitted)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for every randomized component
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Resolvent shift for the correction energy
    #[arg(long, value_name = "F64")]
    kappa: Option<f64>,
    /// Excitation-level enumeration cutoff
    #[arg(long, value_name = "F64")]
    zeta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an explicit stage list in dependency order
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stages, or "all"
        #[arg(long, value_name = "LIST")]
        stages: String,
    },
    /// Zero-energy scattering solve and Neumann asymptotics
    Scatter {
        #[command(flatten)]
        common: Common,
    },
    /// Condensate minimization
    Gp {
        #[command(flatten)]
        common: Common,
    },
    /// Excitation spectrum and level enumeration
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
    /// Correlation kernels and renormalized-form comparison
    Kernels {
        #[command(flatten)]
        common: Common,
        /// Particle numbers (overrides the config list)
        #[arg(long = "N", value_name = "F64", value_delimiter = ',')]
        n_list: Vec<f64>,
        /// Correlation range exponent ratio
        #[arg(long, value_name = "F64")]
        ell: Option<f64>,
    },
    /// Correction energy by the resolvent and mollified routes
    Ebog {
        #[command(flatten)]
        common: Common,
        /// Mollifier widths, strictly decreasing
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        delta_list: Vec<f64>,
        /// Node count for the spectral integrals
        #[arg(long, value_name = "USIZE")]
        quad_nodes: Option<usize>,
    },
    /// Diagonalizer comparison against the truncated Fock oracle
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Fixture file (JSON array of {phi, gamma, n_max, seed})
        #[arg(long, value_name = "PATH")]
        fixtures: Option<PathBuf>,
    },
    /// Cross-module property suite
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Extract plot CSV from existing stage outputs
    Plot {
        /// dispersion | phi0-profile | neumann-asymptotics | ebog-terms
        #[arg(long, value_name = "KIND")]
        which: String,
        /// Directory holding the stage outputs
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
    },
}

/// Resolve the configuration from file and common-flag overrides.
fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(kappa) = common.kappa {
        cfg.kappa = kappa;
    }
    if let Some(zeta) = common.zeta {
        cfg.zeta = zeta;
    }
    Ok(cfg)
}

/// A stage together with every prerequisite it needs under this
/// configuration.
fn closure(cfg: &RunConfig, stage: Stage) -> BTreeSet<Stage> {
    let mut set = BTreeSet::from([stage]);
    let needs_scatter = cfg.a0_override.is_none();
    match stage {
        Stage::Gp | Stage::Spectrum | Stage::Ebog => {
            set.insert(Stage::Gp);
            if stage != Stage::Gp {
                set.insert(Stage::Spectrum);
            }
            if needs_scatter {
                set.insert(Stage::Scatter);
            }
        }
        Stage::Kernels => {
            set.insert(Stage::Scatter);
            set.insert(Stage::Gp);
        }
        Stage::Scatter | Stage::Oracle | Stage::Validate => {}
    }
    set
}

fn report_manifest(manifest: &RunManifest) {
    for rec in &manifest.stages {
        println!(
            "stage {:<8} {:>8.2}s  {}",
            rec.name,
            rec.seconds,
            rec.outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!(
        "manifest {} (config {})",
        manifest.out_dir.join("manifest.json").display(),
        &manifest.config_hash[..12]
    );
}

fn run_stage(common: &Common, stage: Stage, tweak: impl FnOnce(&mut RunConfig)) -> Result<()> {
    let mut cfg = resolve_config(common)?;
    tweak(&mut cfg);
    let manifest = run_pipeline(&cfg, &closure(&cfg, stage))?;
    report_manifest(&manifest);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { common, stages } => {
            let cfg = resolve_config(&common)?;
            let stages = parse_stages(&stages)?;
            let manifest = run_pipeline(&cfg, &stages)?;
            report_manifest(&manifest);
            Ok(())
        }
        Command::Scatter { common } => run_stage(&common, Stage::Scatter, |_| {}),
        Command::Gp { common } => run_stage(&common, Stage::Gp, |_| {}),
        Command::Spectrum { common } => {
            run_stage(&common, Stage::Spectrum, |_| {})?;
            let cfg = resolve_config(&common)?;
            let csv = emit_plot_data(&cfg.out_dir, PlotKind::Dispersion)?;
            println!("wrote {}", csv.display());
            Ok(())
        }
        Command::Kernels {
            common,
            n_list,
            ell,
        } => run_stage(&common, Stage::Kernels, |cfg| {
            if !n_list.is_empty() {
                cfg.n_list = n_list.clone();
            }
            if let Some(ell) = ell {
                cfg.ell = ell;
            }
        }),
        Command::Ebog {
            common,
            delta_list,
            quad_nodes,
        } => run_stage(&common, Stage::Ebog, |cfg| {
            if !delta_list.is_empty() {
                cfg.delta_list = delta_list.clone();
            }
            if let Some(nodes) = quad_nodes {
                cfg.quad_nodes = nodes;
            }
        }),
        Command::Oracle { common, fixtures } => {
            let cfg = resolve_config(&common)?;
            cfg.validate()?;
            let fixtures = match fixtures {
                Some(path) => Some(load_oracle_fixtures(&path)?),
                None => None,
            };
            let run = stage_oracle(&cfg, fixtures);
            // The report exists even when the stage fails; show the table
            // either way before propagating the error.
            print_oracle_table(&cfg.out_dir.join("oracle.json"));
            let outputs = run?;
            println!("wrote {}", outputs[0].display());
            Ok(())
        }
        Command::Validate { common } => run_stage(&common, Stage::Validate, |_| {}),
        Command::Plot { which, out } => {
            let path = emit_plot_data(&out, PlotKind::from_name(&which)?)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

/// Render the oracle report as a fixed-width table on stdout.
fn print_oracle_table(path: &std::path::Path) {
    let Ok(text) = std::fs::read_to_string(path) else {
        return;
    };
    let Ok(report) = serde_json::from_str::<serde_json::Value>(&text) else {
        return;
    };
    let Some(cases) = report["cases"].as_array() else {
        return;
    };
    println!(
        "{:>4} {:>5} {:>12} {:>14} {:>14} {:>6}",
        "case", "modes", "seed", "ground", "levels", ""
    );
    for c in cases {
        let idx = c["case"].as_i64().unwrap_or(-1);
        if let Some(err) = c["error"].as_str() {
            println!("{idx:>4} {err}");
            continue;
        }
        println!(
            "{:>4} {:>5} {:>12} {:>14.4e} {:>14.4e} {:>6}",
            idx,
            c["modes"].as_i64().unwrap_or(0),
            c["seed"].as_i64().unwrap_or(0),
            c["ground_residual"].as_f64().unwrap_or(f64::NAN),
            c["level_residual"].as_f64().unwrap_or(f64::NAN),
            if c["pass"].as_bool().unwrap_or(false) {
                "pass"
            } else {
                "FAIL"
            }
        );
    }
}

/// Apply the `BOGOSPEC_THREADS` cap before any parallel region starts.
fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("BOGOSPEC_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Usage(format!("BOGOSPEC_THREADS must be a positive integer, got '{raw}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Usage(format!("thread pool setup failed: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = configure_threads().and_then(|()| dispatch(cli));
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bogospec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
