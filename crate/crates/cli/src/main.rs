mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;

#[derive(Parser, Debug)]
#[command(name = "ising-lab", version, about = "Glauber dynamics of the Ising model on random regular graphs")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat key = value configuration file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; artefacts go to stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Hard cap on chain states or grid points.
    #[arg(long, global = true)]
    pub max_states: Option<usize>,
    /// Hard cap on state-steps (exact TV) or spin updates (simulation).
    #[arg(long, global = true)]
    pub max_work: Option<f64>,
    /// Wall-clock cap, checked before each grid point.
    #[arg(long, global = true)]
    pub max_seconds: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Model {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub field: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Grid {
    #[arg(long, value_delimiter = ',')]
    pub d: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub field: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Sim {
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub model: Model,
    /// plus | minus | random
    #[arg(long)]
    pub start: Option<String>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub record_stride: Option<u64>,
    /// Seed of the configuration-model graph; defaults to --seed.
    #[arg(long)]
    pub graph_seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// phi_hat and phi_hat' on a t-grid.
    Landscape {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Critical points, critical fields and barrier over a grid.
    CriticalFields {
        #[command(flatten)]
        grid: Grid,
    },
    /// Single-leaf influence on the tree against depth.
    TreeDecay {
        #[command(flatten)]
        model: Model,
        /// Field measured from B_c^G; overrides --field.
        #[arg(long, allow_hyphen_values = true)]
        field_offset: Option<f64>,
        #[arg(long)]
        depth_min: Option<usize>,
        #[arg(long)]
        depth_max: Option<usize>,
        /// plus | minus | free
        #[arg(long)]
        side: Option<String>,
    },
    /// Exact TV evolution of the annealed birth-death chain.
    MixExact {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        n: Option<usize>,
        /// extremes | all | a state index
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        tv_floor: Option<f64>,
    },
    /// Spectral gap, Chen bounds, mixing bounds and bottleneck ratio.
    MixBounds {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
    },
    /// Exact expected hitting times of the annealed chain.
    Hitting {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        from_frac: Option<f64>,
        #[arg(long)]
        to_frac: Option<f64>,
    },
    /// Heat-bath Glauber magnetization traces on a random regular graph.
    GlauberSim {
        #[command(flatten)]
        sim: Sim,
    },
    /// Monotone grand coupling coalescence times.
    Coupling {
        #[command(flatten)]
        sim: Sim,
    },
    /// Hitting times of the plus majority from all-minus.
    HittingSim {
        #[command(flatten)]
        sim: Sim,
        #[arg(long)]
        threshold: Option<usize>,
        /// Sample a new graph for every replica.
        #[arg(long)]
        fresh_graphs: bool,
    },
    /// Exact fixed-spin partition functions on sampled graphs.
    QuenchedExact {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Sample a random regular graph as an edge list.
    GraphGen {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        /// Reject pairings with loops or multi-edges.
        #[arg(long)]
        simple: bool,
        #[arg(long)]
        max_attempts: Option<usize>,
    },
    /// Regime classification over a (d, beta, B) grid.
    PhaseDiagram {
        #[command(flatten)]
        grid: Grid,
    },
    /// TV curves on the cut-off scale for several n.
    CutoffProfile {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Gap and hitting exponents against the barrier, plus the beta sweep.
    Metastability {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        lambda_beta: Option<Vec<f64>>,
        /// Graph sizes for the simulated quenched contrast; empty skips it.
        #[arg(long, value_delimiter = ',')]
        contrast_n: Option<Vec<usize>>,
        #[arg(long)]
        contrast_beta: Option<f64>,
        #[arg(long)]
        contrast_steps: Option<u64>,
        #[arg(long)]
        contrast_replicas: Option<usize>,
    },
    /// Run the acceptance criteria and report one verdict per line.
    Acceptance {
        /// Comma-separated criteria ids; an empty list runs nothing.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Added to the annealed critical field in A1.
        #[arg(long, allow_hyphen_values = true)]
        bc_perturbation: Option<f64>,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ISING_LAB_THREADS") {
        let threads: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("ISING_LAB_THREADS must be a positive integer"))?;
        if threads == 0 {
            anyhow::bail!("ISING_LAB_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(1);
    }
    match commands::run(&cli.common, cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Budget(msg)) => {
            eprintln!("refused: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Acceptance(ids)) => {
            eprintln!("acceptance failed: {}", ids.join(", "));
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
