use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bosegas_lab::config::ParitySpec;
use bosegas_lab::pipeline::CertifySource;
use bosegas_lab::{LabError, Result, Run, RunConfig, RunOptions, Stage};

/// Mean-field Bose gas excitation Hamiltonian: ground state, decay and bounds.
#[derive(Debug, Parser)]
#[command(name = "bosegas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// JSON run configuration.
    config: PathBuf,
    /// Overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every stage, skipping those whose stored inputs are unchanged.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        export_matrix: bool,
    },
    /// Solve for the condensate.
    Hartree {
        #[command(flatten)]
        common: Common,
    },
    /// Build the kernels, the Fock basis and the sparse Hamiltonian.
    Assemble {
        #[command(flatten)]
        common: Common,
        /// Also write the matrix as `row,col,value` triplets.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Lanczos ground state.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Sector profile, windows, fit and tail check.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        parity: Option<ParityArg>,
    },
    /// Exponential decay certificate; exits with status 4 when none exists.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "ground-state")]
        source: SourceArg,
    },
    /// Randomized checks of the kernel bounds.
    Lemmas {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of k1,k2,k3,k4,gap.
        #[arg(long, value_delimiter = ',')]
        which: Option<Vec<String>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Coulomb splitting table and the surrogate pair-creation bound.
    CoulombSplit {
        #[command(flatten)]
        common: Common,
        /// Comma-separated screening lengths, decreasing.
        #[arg(long, value_delimiter = ',')]
        kappa: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ParityArg {
    Even,
    Odd,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SourceArg {
    GroundState,
    Oracle,
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut config = RunConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("BOSEGAS_THREADS") else { return Ok(()) };
    let threads: usize =
        value.parse().map_err(|_| LabError::Config(format!("BOSEGAS_THREADS must be a count, got `{value}`")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    configure_threads()?;
    let manifest = match command {
        Command::Run { common, force, export_matrix } => {
            Run::new(load(&common)?, RunOptions { force, export_matrix })?.run_all()?
        }
        Command::Hartree { common } => Run::new(load(&common)?, RunOptions::default())?.run_single(Stage::Hartree)?,
        Command::Assemble { common, export_matrix } => {
            Run::new(load(&common)?, RunOptions { export_matrix, ..Default::default() })?.run_single(Stage::Assemble)?
        }
        Command::Solve { common } => Run::new(load(&common)?, RunOptions::default())?.run_single(Stage::Solve)?,
        Command::Decay { common, parity } => {
            let mut config = load(&common)?;
            if let Some(p) = parity {
                config.analyses.decay.parity = match p {
                    ParityArg::Even => ParitySpec::Even,
                    ParityArg::Odd => ParitySpec::Odd,
                    ParityArg::All => ParitySpec::All,
                };
            }
            Run::new(config, RunOptions::default())?.run_single(Stage::Decay)?
        }
        Command::Certify { common, source } => {
            let source = match source {
                SourceArg::GroundState => CertifySource::GroundState,
                SourceArg::Oracle => CertifySource::Oracle,
            };
            Run::new(load(&common)?, RunOptions::default())?.run_certify(source)?
        }
        Command::Lemmas { common, which, samples, seed } => {
            let mut config = load(&common)?;
            let l = &mut config.analyses.lemmas;
            if let Some(w) = which {
                l.which = w;
            }
            if let Some(s) = samples {
                l.samples = s;
            }
            if let Some(s) = seed {
                l.seed = s;
            }
            config.validate()?;
            Run::new(config, RunOptions::default())?.run_single(Stage::Lemmas)?
        }
        Command::CoulombSplit { common, kappa } => {
            let mut config = load(&common)?;
            if let Some(k) = kappa {
                match config.analyses.coulomb.as_mut() {
                    Some(c) => c.kappas = k,
                    None => return Err(LabError::Config("--kappa needs an analyses.coulomb section".into())),
                }
            }
            config.validate()?;
            Run::new(config, RunOptions::default())?.run_single(Stage::CoulombSplit)?
        }
    };
    for stage in &manifest.stages {
        println!("{:<14} {:<9} {:>9.3}s  {} files", stage.stage, stage.status, stage.wall_time_s, stage.files.len());
    }
    println!("status: {}", manifest.status);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
