//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stacked_voter::voter::SpeedMode;
use stacked_voter::{Site, VerticalBc};

#[derive(Debug, Parser)]
#[command(
    name = "stacked-voter",
    version,
    about = "Biased voter model on stacked lattices"
)]
pub struct Cli {
    /// Base seed; replicate i always uses stream i.
    #[arg(long, global = true, env = "STACKED_VOTER_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Output directory (default: out/<subcommand>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Flat key=value config file or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fraction of single-cell clones reaching size M.
    Survival(SurvivalArgs),
    /// Front propagation speed of surviving clones.
    Speed(SpeedArgs),
    /// Periodic vs reflecting layer boundary speeds.
    BoundaryCompare(BoundaryArgs),
    /// Forward vs dual estimates of the duality relation.
    Duality(DualityArgs),
    /// Type-0/1/2 classification of dual branching events.
    BranchClassify(BranchArgs),
    /// Survival function of the first return time to the origin.
    ReturnTime(ReturnTimeArgs),
    /// Local CLT point-mass estimate, optionally against the exact law.
    Lclt(LcltArgs),
    /// Closed-form asymptotics over a parameter grid.
    Formulas(FormulaCmdArgs),
    /// Cancer initiation time samples and summary statistics.
    CancerInit(CancerArgs),
    /// Local field size histogram conditioned on the initiation time.
    FieldHist(FieldHistArgs),
    /// Shape of one surviving clone grown to a target size.
    ShapeSnapshot(ShapeArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Survival(_) => "survival",
            Command::Speed(_) => "speed",
            Command::BoundaryCompare(_) => "boundary-compare",
            Command::Duality(_) => "duality",
            Command::BranchClassify(_) => "branch-classify",
            Command::ReturnTime(_) => "return-time",
            Command::Lclt(_) => "lclt",
            Command::Formulas(_) => "formulas",
            Command::CancerInit(_) => "cancer-init",
            Command::FieldHist(_) => "field-hist",
            Command::ShapeSnapshot(_) => "shape-snapshot",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bc {
    Periodic,
    Reflecting,
}

impl From<Bc> for VerticalBc {
    fn from(b: Bc) -> Self {
        match b {
            Bc::Periodic => VerticalBc::Periodic,
            Bc::Reflecting => VerticalBc::Reflecting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Hitting,
    Regression,
}

impl From<Mode> for SpeedMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Hitting => SpeedMode::Hitting,
            Mode::Regression => SpeedMode::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerArg {
    Inversion,
    Thinning,
}

#[derive(Debug, Clone, Args)]
pub struct GeometryArgs {
    /// Number of stacked layers.
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    #[arg(long, value_enum, default_value_t = Bc::Periodic)]
    pub bc: Bc,
    /// Side of a planar torus window; omit for the unbounded plane.
    #[arg(long)]
    pub window: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct SurvivalArgs {
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Target clone size.
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SpeedArgs {
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Plane |x| = R whose first hit defines the speed.
    #[arg(long = "R", default_value_t = 100)]
    pub radius: i32,
    /// Surviving replicates to collect.
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = Mode::Hitting)]
    pub mode: Mode,
    /// Give up after this many attempts, extinct ones included.
    #[arg(long)]
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BoundaryArgs {
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 4)]
    pub w: u32,
    #[arg(long = "R", default_value_t = 100)]
    pub radius: i32,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
}

/// A set of sites written as `x,y,z;x,y,z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSet(pub Vec<Site>);

fn parse_site_set(s: &str) -> Result<SiteSet, String> {
    let v = parse_sites(s)?;
    if v.is_empty() {
        return Err("empty site set".into());
    }
    Ok(SiteSet(v))
}

fn parse_site(s: &str) -> Result<Site, String> {
    match parse_sites(s)?.as_slice() {
        [one] => Ok(*one),
        _ => Err(format!("expected one site x,y,z, got {s:?}")),
    }
}

fn parse_sites(s: &str) -> Result<Vec<Site>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<&str> = p.split(',').map(str::trim).collect();
            if v.len() != 3 {
                return Err(format!("site {p:?} must be x,y,z"));
            }
            let x = v[0].parse::<i32>().map_err(|e| e.to_string())?;
            let y = v[1].parse::<i32>().map_err(|e| e.to_string())?;
            let z = v[2].parse::<u32>().map_err(|e| e.to_string())?;
            Ok(Site::new(x, y, z))
        })
        .collect()
}

#[derive(Debug, Clone, Args)]
pub struct DualityArgs {
    /// Forward initial set as `x,y,z;x,y,z`; random instances when omitted.
    #[arg(long, value_parser = parse_site_set, requires = "b")]
    pub a: Option<SiteSet>,
    /// Target set for the forward process, initial set for the dual.
    #[arg(long, value_parser = parse_site_set, requires = "a")]
    pub b: Option<SiteSet>,
    #[arg(long, default_value_t = 3.0)]
    pub t: f64,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    /// Torus side.
    #[arg(long = "L", default_value_t = 15)]
    pub side: u32,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Random instances to draw when no sets are given.
    #[arg(long, default_value_t = 5)]
    pub instances: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BranchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.1, 0.01, 0.001])]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    /// Per-walker jump rate; the difference walk jumps at twice this.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ReturnTimeArgs {
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1e1, 1e2, 1e3, 1e4, 1e5])]
    pub t_grid: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    /// Cap on max(t_grid) * alpha * reps.
    #[arg(long, default_value_t = stacked_voter::walk::DEFAULT_EVENT_BUDGET)]
    pub budget: f64,
}

#[derive(Debug, Clone, Args)]
pub struct LcltArgs {
    #[arg(long, default_value_t = 2)]
    pub d: u32,
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 400.0)]
    pub t: f64,
    /// Target point `x,y,z` (y ignored when d = 1).
    #[arg(long, value_parser = parse_site, default_value = "0,0,0")]
    pub x: Site,
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    /// Also compute the exact law on a box of this radius.
    #[arg(long)]
    pub exact_radius: Option<i64>,
    /// Allow w = 1 (purely planar walk).
    #[arg(long)]
    pub allow_w1: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FormulaCmdArgs {
    /// Formula names; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub formula: Vec<String>,
    /// `lo:hi:log10[:per_decade]` or `lo:hi:lin:n`.
    #[arg(long, conflicts_with = "beta")]
    pub beta_grid: Option<String>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01])]
    pub beta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 3, 4, 5])]
    pub w: Vec<u32>,
    #[arg(long, default_value_t = 1e6)]
    pub n: f64,
    #[arg(long, default_value_t = 1e9)]
    pub v: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub u1: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub u2: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TwoStepArgs {
    /// Total cell count.
    #[arg(long, default_value_t = 1e6)]
    pub n: f64,
    #[arg(long, default_value_t = 3)]
    pub w: u32,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Type-2 fitness advantage (defaults to beta).
    #[arg(long)]
    pub beta2: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub u1: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub u2: f64,
    /// Regime threshold below which Gamma is called small.
    #[arg(long, default_value_t = 1.0)]
    pub gamma_small: f64,
    /// Regime threshold above which Gamma is called large.
    #[arg(long, default_value_t = 1e3)]
    pub gamma_large: f64,
}

#[derive(Debug, Clone, Args)]
pub struct CancerArgs {
    #[command(flatten)]
    pub params: TwoStepArgs,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = SamplerArg::Inversion)]
    pub sampler: SamplerArg,
}

#[derive(Debug, Clone, Args)]
pub struct FieldHistArgs {
    #[command(flatten)]
    pub params: TwoStepArgs,
    /// Conditioning time; defaults to the sample mean of sigma2.
    #[arg(long)]
    pub t: Option<f64>,
    /// Half-width of the window; defaults to 5% of t.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, default_value_t = 40_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 100)]
    pub min_accepted: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ShapeArgs {
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[arg(long, default_value_t = 50_000)]
    pub size: usize,
    #[arg(long, default_value_t = 100_000)]
    pub max_attempts: usize,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// 10x fewer replicates with widened bands.
    #[arg(long)]
    pub quick: bool,
    /// Run only these criterion ids.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}
