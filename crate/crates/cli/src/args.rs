use std::path::PathBuf;

use anomaly_walk::search::Engine;
use anomaly_walk::{Anomaly, Complex64, InitialStateKind, Phase};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "anomaly-walk", version, about = "Scattering quantum walks on star graphs with anomalies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the Hilbert dimension and verify unitarity of the step operator.
    Check {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write the operator as CSV triplets (dimension ≤ 5000).
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Evolve a state and record edge probabilities after every step.
    Evolve {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        kind: KindArg,
        #[arg(long)]
        steps: usize,
        /// Seed for the final spoke measurement.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the search and report the peak.
    Search {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        kind: KindArg,
        /// Defaults to half again the predicted hitting step, or 4√N.
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long, value_enum, default_value_t = EngineArg::Full)]
        engine: EngineArg,
        #[command(flatten)]
        out: OutArg,
        /// Per-step CSV; defaults to the JSON `--out` path with a `.csv` extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Eigenphases of the walk restricted to the initial state's invariant subspace.
    Spectrum {
        #[command(flatten)]
        graph: GraphArg,
        #[command(flatten)]
        kind: KindArg,
        #[command(flatten)]
        out: OutArg,
        /// Write the reduced matrix as CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Eigenphase shifts against the large-N limit, with power-law fits.
    Perturb {
        #[command(flatten)]
        template: TemplateArg,
        #[arg(long, value_parser = parse_n_list, default_value = "64,128,256,512,1024,2048,4096")]
        n_list: NList,
        #[arg(long, value_enum, default_value_t = LimitArg::Bulk)]
        limit: LimitArg,
        #[command(flatten)]
        out: OutArg,
        /// Fit CSV; defaults to `<out stem>.fit.csv` next to `--out`.
        #[arg(long)]
        fit_out: Option<PathBuf>,
    },
    /// Search peak step across several star sizes.
    Sweep {
        #[command(flatten)]
        template: TemplateArg,
        #[command(flatten)]
        kind: KindArg,
        #[arg(long, value_parser = parse_n_list, default_value = "64,128,256,512,1024,2048,4096")]
        n_list: NList,
        #[arg(long, value_enum, default_value_t = EngineArg::Reduced)]
        engine: EngineArg,
        #[command(flatten)]
        out: OutArg,
    },
    /// Classical adjacency-list search statistics.
    Baseline {
        #[command(flatten)]
        graph: GraphArg,
        #[arg(long, default_value_t = 10_000)]
        seeds: u64,
        /// First seed; runs use `seed..seed + seeds`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Debug, Args)]
pub struct GraphArg {
    /// Spec file, or the JSON spec itself.
    #[arg(long)]
    pub spec: String,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct TemplateArg {
    /// Spec file or inline JSON; its size is replaced by each entry of `--n-list`.
    #[arg(long)]
    pub spec: Option<String>,
    /// Anomaly type, placed at vertex 1 (and 2 for an extra edge).
    #[arg(long, value_enum)]
    pub anomaly: Option<AnomalyArg>,
    /// Phase as a multiple of π, `num/den`, for `--anomaly`.
    #[arg(long, value_parser = parse_phase, requires = "anomaly")]
    pub phase: Option<Phase>,
}

#[derive(Debug, Args)]
pub struct KindArg {
    /// minus, plus, loop_pi, loop_third, or inout:A,B with complex A, B
    /// (e.g. `inout:1,-1i`). Defaults to the natural state for the anomaly.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<InitialStateKind>,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Full,
    Reduced,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Full => Engine::Full,
            EngineArg::Reduced => Engine::Reduced,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LimitArg {
    /// Anomaly spokes reflect, the bulk keeps its coin.
    Bulk,
    /// Every spoke reflects.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum AnomalyArg {
    None,
    ExtraEdge,
    Loop,
    ExtendedEdge,
    MissingLoop,
}

impl AnomalyArg {
    pub fn anomaly(self, phase: Option<Phase>) -> Anomaly {
        let a = match self {
            AnomalyArg::None => Anomaly::none(),
            AnomalyArg::ExtraEdge => Anomaly::extra_edge(1, 2),
            AnomalyArg::Loop => Anomaly::loop_at(1),
            AnomalyArg::ExtendedEdge => Anomaly::extended_edge(1),
            AnomalyArg::MissingLoop => Anomaly::missing_loop(1, Phase::ZERO),
        };
        match phase {
            Some(p) => a.with_phase(p),
            None => a,
        }
    }
}

pub type NList = Vec<usize>;

fn parse_n_list(s: &str) -> Result<NList, String> {
    let list: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err("empty list".into());
    }
    Ok(list)
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let num: i64 = num.parse().map_err(|e| format!("numerator `{num}`: {e}"))?;
    let den: i64 = den.parse().map_err(|e| format!("denominator `{den}`: {e}"))?;
    Phase::pi_fraction(num, den).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<InitialStateKind, String> {
    match s {
        "minus" => Ok(InitialStateKind::Minus),
        "plus" => Ok(InitialStateKind::Plus),
        "loop_pi" => Ok(InitialStateKind::LoopPi),
        "loop_third" => Ok(InitialStateKind::LoopThird),
        _ => {
            let rest = s
                .strip_prefix("inout:")
                .ok_or_else(|| format!("unknown kind `{s}`"))?;
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| "inout needs two coefficients, `inout:A,B`".to_string())?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<Complex64>()
                    .map_err(|_| format!("`{x}` is not a complex number"))
            };
            Ok(InitialStateKind::InOut {
                a: parse(a)?,
                b: parse(b)?,
            })
        }
    }
}
