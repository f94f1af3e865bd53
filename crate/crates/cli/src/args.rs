use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hallar::instances::{
    parse_generator, GraphFormat, GraphSource, InstanceSpec, McInstanceSpec, PrInstanceSpec, SampleFormula,
};
use hallar::SolverConfig;

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "hallar", version, about = "Low-rank solver for trace-bounded semidefinite programs")]
pub struct Cli {
    /// Repeat for more log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an instance and solve it.
    Solve(SolveArgs),
    /// Write an instance spec file.
    Generate(GenerateArgs),
    /// Solve every instance listed in a sweep file.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Matcomp,
    Theta,
    Phaseret,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    EdgeList,
    MatrixMarket,
    Gset,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::EdgeList => GraphFormat::EdgeList,
            FormatArg::MatrixMarket => GraphFormat::MatrixMarket,
            FormatArg::Gset => GraphFormat::Gset,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Full,
    Dof,
}

#[derive(Args, Debug, Clone)]
pub struct ProblemArgs {
    /// Instance family.
    #[arg(long, value_enum, required_unless_present = "spec")]
    pub problem: Option<Family>,
    /// Read the instance from a spec file written by `generate`.
    #[arg(long, conflicts_with = "problem")]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    /// Hidden rank (matrix completion).
    #[arg(long)]
    pub r: Option<usize>,
    #[arg(long, value_enum, default_value = "full")]
    pub formula: FormulaArg,
    /// Trace bound as a multiple of the hidden optimum's trace.
    #[arg(long, default_value_t = 1.2)]
    pub tau_factor: f64,
    /// Graph file (theta).
    #[arg(long, conflicts_with = "generator")]
    pub graph: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "edge-list")]
    pub format: FormatArg,
    /// Built-in graph: cycle:N, hypercube:D, hamming:D:Q or petersen.
    #[arg(long)]
    pub generator: Option<String>,
    /// Signal length (phase retrieval).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of masks (phase retrieval).
    #[arg(long, default_value_t = 12)]
    pub masks: usize,
    /// Instance and solver seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn need<T: Copy>(v: Option<T>, flag: &str, family: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{flag} is required for --problem {family}")))
}

impl ProblemArgs {
    pub fn instance_spec(&self) -> Result<InstanceSpec, CliError> {
        if let Some(path) = &self.spec {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::NoInput(format!("cannot read {}: {e}", path.display())))?;
            return InstanceSpec::from_config(&text).map_err(CliError::from);
        }
        match self.problem.expect("clap enforces --problem or --spec") {
            Family::Matcomp => {
                let mut s = McInstanceSpec::new(
                    need(self.n1, "n1", "matcomp")?,
                    need(self.n2, "n2", "matcomp")?,
                    need(self.r, "r", "matcomp")?,
                    self.seed,
                );
                s.formula = match self.formula {
                    FormulaArg::Full => SampleFormula::Full,
                    FormulaArg::Dof => SampleFormula::DegreesOfFreedom,
                };
                s.tau_factor = self.tau_factor;
                s.validate()?;
                Ok(InstanceSpec::MatrixCompletion(s))
            }
            Family::Theta => {
                let src = match (&self.graph, &self.generator) {
                    (Some(path), None) => GraphSource::File { path: path.clone(), format: self.format.into() },
                    (None, Some(g)) => parse_generator(g)?,
                    _ => return Err(CliError::Usage("--problem theta needs --graph or --generator".into())),
                };
                Ok(InstanceSpec::Theta(src))
            }
            Family::Phaseret => {
                let s = PrInstanceSpec { n: need(self.n, "n", "phaseret")?, masks: self.masks, seed: self.seed };
                s.validate()?;
                Ok(InstanceSpec::PhaseRetrieval(s))
            }
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Relative tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fixed-order reductions for bitwise reproducible runs.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub beta0: Option<f64>,
    #[arg(long)]
    pub beta_growth: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub eps_decay: Option<f64>,
    #[arg(long)]
    pub eps_floor: Option<f64>,
}

impl SolverArgs {
    pub fn config(&self, seed: u64) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            eps: self.tol,
            time_limit: self.time_limit,
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            seed,
            deterministic: self.deterministic,
            beta0: self.beta0,
            beta_growth: self.beta_growth.unwrap_or(d.beta_growth),
            eps0: self.eps0,
            eps_decay: self.eps_decay.unwrap_or(d.eps_decay),
            eps_floor: self.eps_floor,
            ..d
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Spec file to write.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// One instance per line as `key=value` tokens, e.g. `family=theta generator=cycle:5`.
    #[arg(long)]
    pub sweep: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Write CSV here; otherwise CSV goes to stdout and the table to stderr.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write all run records as a JSON array.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Solve rows concurrently.
    #[arg(long)]
    pub parallel_rows: bool,
}
