mod artifacts;
mod commands;
mod config;
mod expr;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Exit 2: a precondition on the input failed. Exit 3: a numeric contract
/// failed.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Contract(String),
}

impl From<ruelle_lab::Error> for Failure {
    fn from(e: ruelle_lab::Error) -> Self {
        use ruelle_lab::Error as E;
        match e {
            E::NoConvergence { .. } | E::TooManyEscapes { .. } | E::TailEscape { .. } => Failure::Contract(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

#[derive(Parser, Serialize)]
#[command(name = "ruelle-lab", version, about = "Transfer operators on interval maps", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// key = value file merged beneath the command-line flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; RUELLE_LAB_OUT overrides the default and config
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for path sampling
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone, Serialize)]
pub struct MapArgs {
    /// doubling, uniform, gauss or two-component
    #[arg(long, default_value = "doubling")]
    pub map: String,
    /// Branch count for the uniform map
    #[arg(long, default_value_t = 2)]
    pub branches: usize,
    /// Gauss branches kept
    #[arg(long, default_value_t = 10_000)]
    pub kmax: usize,
}

#[derive(Args, Clone, Serialize)]
pub struct WeightArgs {
    /// half, uniform, cos2, fp, mu0 or custom
    #[arg(long, default_value = "half")]
    pub weight: String,
    /// Weight W(y) for --weight custom, e.g. "math::cos(pi*y)^2"
    #[arg(long)]
    pub weight_expr: Option<String>,
}

#[derive(Args, Clone, Serialize)]
pub struct MeasureArgs {
    /// lebesgue, mu0 or dirac
    #[arg(long, default_value = "lebesgue")]
    pub measure: String,
    /// Location of the dirac measure
    #[arg(long, default_value_t = 0.5)]
    pub at: f64,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Ulam invariant density of the map
    InvariantDensity {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        /// Sup tolerance against a known closed form
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
    },
    /// The four invariant-measure cells for the doubling map
    Table1 {
        #[arg(long, default_value_t = 2048)]
        n: usize,
    },
    /// Cellwise d(μR)/dμ
    RadonNikodym {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        weight: WeightArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Cylinder table of an IFS measure
    IfsMeasure {
        #[command(flatten)]
        map: MapArgs,
        /// Comma-separated probabilities, one per branch
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Grid for the invariance residual
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Chaos-game samples of an IFS measure
    ChaosGame {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
    },
    /// Recover p_k from an IFS measure
    ExtractPk {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        /// Build the IFS measure of this vector instead of --measure
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Use chaos-game samples of --p instead of a cylinder table
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        k: usize,
    },
    /// Decide whether a measure is an IFS measure up to a word depth
    IfsTest {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Moment identities of an IFS measure
    MomentTest {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        measure: MeasureArgs,
        /// Probabilities to test; default μ(J_k)
        #[arg(long)]
        p: Option<String>,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Wold decomposition of the grid Koopman isometry
    Wold {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Exactness scores ‖E_k f - mean f‖
    Exactness {
        #[command(flatten)]
        map: MapArgs,
        #[arg(long, default_value_t = 4096)]
        n: usize,
        #[arg(long, default_value_t = 12)]
        depth: usize,
        /// f(x)
        #[arg(long, default_value = "if(x < 0.5, 1.0, 0.0)")]
        f: String,
        /// Also compute shift-layer dimensions (dense, O(n³))
        #[arg(long)]
        layers: bool,
    },
    /// Sample paths of the Markov chain with kernel μ_x
    MarkovSample {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        weight: WeightArgs,
        /// A point, or lebesgue / mu0 for a start drawn from that measure
        #[arg(long, default_value = "0.6")]
        start: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Grid used to draw a start from a measure
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Conditional-mean and stationarity tests on sampled paths
    MarkovTest {
        #[command(flatten)]
        map: MapArgs,
        #[command(flatten)]
        weight: WeightArgs,
        #[arg(long, default_value = "lebesgue")]
        start: String,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 32)]
        bins: usize,
        /// f(y)
        #[arg(long, default_value = "y")]
        f: String,
        #[arg(long, default_value_t = 4.0)]
        z: f64,
        #[arg(long, default_value_t = 1024)]
        n: usize,
    },
    /// Coupling ↔ operator round trips on random finite instances
    CoupleRoundtrip {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long, default_value_t = 8)]
        max_size: usize,
        /// Run in exact rational arithmetic
        #[arg(long)]
        exact: bool,
    },
    /// Ŝ / R̂ algebra on atomic measures
    UhsDemo {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Every module's invariants at desk scale
    VerifyAll,
}

impl Command {
    pub fn name(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable");
        v["name"].as_str().unwrap_or("run").to_string()
    }
}

fn subcommand_names() -> Vec<String> {
    Cli::command().get_subcommands().map(|s| s.get_name().to_string()).collect()
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let names = subcommand_names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let merged = match config::merge(argv.clone(), &refs) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut cli = match Cli::try_parse_from(&merged) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if !config::has_flag(&argv, "--out") {
        if let Some(dir) = std::env::var_os("RUELLE_LAB_OUT") {
            cli.out = Some(PathBuf::from(dir));
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Contract(m)) => {
            eprintln!("contract failure: {m}");
            ExitCode::from(3)
        }
    }
}
