use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use hsfusion::ingest::ColumnSpec;
use hsfusion::model::{McmcConfig, PriorConfig, PriorFamily};
use hsfusion::recovery::SigmaMode;
use hsfusion::simulate::SignalKind;

#[derive(Debug, Parser)]
#[command(name = "hsfusion", version, about = "Horseshoe fusion estimation of piecewise-constant signals")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Denoise a 1-D signal read from CSV.
    DenoiseChain(DenoiseChainArgs),
    /// Denoise a signal on the vertices of an undirected graph.
    DenoiseGraph(DenoiseGraphArgs),
    /// Monte-Carlo comparison on synthetic piecewise-constant signals.
    Simulate(SimulateArgs),
    /// Block-structure report for an estimate.
    Threshold(ThresholdArgs),
    /// Numeric checks of the Horseshoe prior-mass and thickness bounds.
    CheckLemmas(CheckLemmasArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

fn parse_family(s: &str) -> Result<PriorFamily, String> {
    PriorFamily::parse(s).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<SignalKind, String> {
    SignalKind::parse(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriorArgs {
    /// Prior on successive differences: hs, t or laplace.
    #[arg(long, default_value = "hs", value_parser = parse_family)]
    pub family: PriorFamily,
    #[arg(long, default_value_t = 0.5)]
    pub a_sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    pub b_sigma: f64,
    /// Prior scale of the first (or root) mean.
    #[arg(long, default_value_t = 5.0)]
    pub lambda_first: f64,
    /// Scale of η/σ for the t and Laplace families (default depends on n).
    #[arg(long)]
    pub family_scale: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub t_df: f64,
}

impl PriorArgs {
    pub fn config(&self) -> PriorConfig {
        self.config_for(self.family)
    }

    pub fn config_for(&self, family: PriorFamily) -> PriorConfig {
        PriorConfig {
            family,
            a_sigma: self.a_sigma,
            b_sigma: self.b_sigma,
            lambda_first: self.lambda_first,
            family_scale: self.family_scale,
            t_df: self.t_df,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct McmcArgs {
    #[arg(long, default_value_t = 5000)]
    pub n_iter: usize,
    #[arg(long, default_value_t = 500)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl McmcArgs {
    pub fn config(&self) -> McmcConfig {
        McmcConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            seed: self.seed,
            thin: self.thin,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SignalInputArgs {
    /// Signal CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Value column: 0-based position or header name.
    #[arg(long, default_value = "0")]
    pub column: String,
    /// Optional timestamp column used for interpolation.
    #[arg(long)]
    pub time_column: Option<String>,
    /// Fill missing values by linear interpolation.
    #[arg(long)]
    pub interpolate: bool,
    /// Fill leading/trailing missing values with the nearest present value.
    #[arg(long)]
    pub extend_ends: bool,
    /// Average consecutive blocks of this many values.
    #[arg(long)]
    pub window: Option<usize>,
    /// Allow a shorter trailing averaging window.
    #[arg(long)]
    pub allow_partial: bool,
    /// Take natural logs after interpolation and averaging.
    #[arg(long)]
    pub log: bool,
}

impl SignalInputArgs {
    pub fn value_column(&self) -> ColumnSpec {
        ColumnSpec::parse(&self.column)
    }

    pub fn time_column(&self) -> Option<ColumnSpec> {
        self.time_column.as_deref().map(ColumnSpec::parse)
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Main output file.
    #[arg(long)]
    pub output: PathBuf,
    /// Run manifest (default: output path with extension .manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl OutputArgs {
    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.output.with_extension("manifest.json"))
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DenoiseChainArgs {
    #[command(flatten)]
    pub signal: SignalInputArgs,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Credible level of the reported band.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also write every kept draw.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DenoiseGraphArgs {
    /// Edge list: one "i j" pair per line, 1-based ids.
    #[arg(long)]
    pub edges: PathBuf,
    /// Number of vertices (default: largest id in the edge list).
    #[arg(long)]
    pub n_vertices: Option<usize>,
    #[command(flatten)]
    pub signal: SignalInputArgs,
    /// Number of randomly chosen roots.
    #[arg(long, default_value_t = 3)]
    pub roots: usize,
    /// Explicit 1-based root vertices (overrides --roots).
    #[arg(long, value_delimiter = ',')]
    pub root_ids: Option<Vec<usize>>,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also write every pooled draw.
    #[arg(long)]
    pub draws: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// even, uneven or very_uneven.
    #[arg(long, default_value = "even", value_parser = parse_kind)]
    pub kind: SignalKind,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Multiplier of the default block levels 0, 1, 2, 3, 4, 0, ...
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Noise standard deviations.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5")]
    pub sigma: Vec<f64>,
    /// Prior families to compare.
    #[arg(long = "families", value_delimiter = ',', default_value = "hs", value_parser = parse_family)]
    pub families: Vec<PriorFamily>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[command(flatten)]
    pub prior: PriorArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaModeArg {
    PerDraw,
    PosteriorMean,
}

impl From<SigmaModeArg> for SigmaMode {
    fn from(m: SigmaModeArg) -> Self {
        match m {
            SigmaModeArg::PerDraw => SigmaMode::PerDraw,
            SigmaModeArg::PosteriorMean => SigmaMode::PosteriorMean,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ThresholdArgs {
    /// Estimate CSV with columns y and post_mean (as written by denoise-*).
    #[arg(long)]
    pub estimate: PathBuf,
    /// True signal CSV, enables W/B and false-positive counts.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value = "0")]
    pub truth_column: String,
    /// Posterior draws CSV (as written with --draws).
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Number of true jumps; enables the per-draw projection report.
    #[arg(long)]
    pub s0: Option<usize>,
    /// Proportionality constant of the projection threshold.
    #[arg(long, default_value_t = 1.0)]
    pub threshold_constant: f64,
    /// Bound multiplier K in #A <= K·s0.
    #[arg(long, default_value_t = 2.0)]
    pub k: f64,
    #[arg(long, value_enum, default_value = "per-draw")]
    pub sigma_mode: SigmaModeArg,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CheckLemmasArgs {
    /// Sample sizes for the prior-mass check.
    #[arg(long, value_delimiter = ',', default_value = "50,100,500")]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub s0: usize,
    /// Exponents b in τ = n^-(2+b).
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub b: Vec<f64>,
    /// Exponents b' in the target bound n^-b'.
    #[arg(long, value_delimiter = ',', default_value = "0.4")]
    pub b_prime: Vec<f64>,
    /// Use this τ instead of n^-(2+b).
    #[arg(long)]
    pub tau: Option<f64>,
    /// Sample sizes for the thickness check (L = n, τ = n^-3, σ = 1).
    #[arg(long, value_delimiter = ',', default_value = "100,1000,10000")]
    pub thickness_n: Vec<usize>,
    /// Largest accepted ratio of thickness to log n.
    #[arg(long, default_value_t = 10.0)]
    pub max_ratio: f64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Write outputs (same file names) into this directory instead.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn redirect(path: &mut PathBuf, dir: &Path) {
    if let Some(name) = path.file_name() {
        *path = dir.join(name);
    }
}

impl Command {
    /// Moves every output file into `dir`, keeping file names.
    pub fn redirect_outputs(&mut self, dir: &Path) {
        let (out, extra): (&mut OutputArgs, Option<&mut PathBuf>) = match self {
            Command::DenoiseChain(a) => (&mut a.out, a.draws.as_mut()),
            Command::DenoiseGraph(a) => (&mut a.out, a.draws.as_mut()),
            Command::Simulate(a) => (&mut a.out, None),
            Command::Threshold(a) => (&mut a.out, None),
            Command::CheckLemmas(a) => (&mut a.out, None),
            Command::Replay(_) => return,
        };
        if let Some(m) = out.manifest.as_mut() {
            redirect(m, dir);
        }
        redirect(&mut out.output, dir);
        if let Some(d) = extra {
            redirect(d, dir);
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Command::DenoiseChain(_) => "denoise-chain",
            Command::DenoiseGraph(_) => "denoise-graph",
            Command::Simulate(_) => "simulate",
            Command::Threshold(_) => "threshold",
            Command::CheckLemmas(_) => "check-lemmas",
            Command::Replay(_) => "replay",
        }
    }
}
