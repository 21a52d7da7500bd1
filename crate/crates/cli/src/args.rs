use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "vrrw-lab",
    version,
    about = "Vertex-reinforced random walk laboratory: localization indexes, simulation, couplings and campaigns",
    after_help = "Weights: linear:C, power:P, polylog:ALPHA, critical, table:PATH.\n\
                  Kinds: vrrw, reflected, tilde, hat[:EPS], hat-restricted:L[:EPS], breve:GAMMA, restricted:LO:HI.\n\
                  Exit codes: 0 success, 1 runtime failure, 2 invalid arguments (all problems listed).\n\
                  VRRW_LAB_THREADS bounds the campaign worker pool; other subcommands run on one thread."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Localization indexes i±, j± from a sweep of η around 1/2.
    Index(IndexArgs),
    /// One seeded walk: checkpoint series, final ledger and localization summary.
    Simulate(SimulateArgs),
    /// Paired walks under shared uniforms, checked for the order "left ≺ right".
    Couple(CoupleArgs),
    /// Local-time profile around the localization center against Ψ_{1/2,i}.
    Profile(ProfileArgs),
    /// Numerical self-checks for one weight.
    Verify(VerifyArgs),
    /// Multi-seed campaign from a TOML description.
    Campaign(CampaignArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    /// Weight function (see `vrrw-lab --help`).
    #[arg(long)]
    pub weight: String,
    /// η grid `START:END:COUNT`, evenly spaced and inclusive (dimensionless).
    #[arg(long, default_value = "0.45:0.55:11")]
    pub eta_sweep: String,
    /// Top of the W-coordinate grid (value of W).
    #[arg(long, default_value = "1e300")]
    pub w_hull: f64,
    /// Top of x-space grids (local time units).
    #[arg(long, default_value = "1e12")]
    pub x_hull: f64,
    /// Grid nodes per decade.
    #[arg(long, default_value_t = 32)]
    pub nodes_per_decade: usize,
    /// Deepest iterate examined before reporting an infinite index.
    #[arg(long, default_value_t = 8)]
    pub max_level: u32,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file of flag values, top level or under a table named after the
    /// subcommand; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Weight function (see `vrrw-lab --help`).
    #[arg(long)]
    pub weight: String,
    /// Walk kind (see `vrrw-lab --help`).
    #[arg(long, default_value = "vrrw")]
    pub kind: String,
    /// Number of moves.
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    /// Seed of the field of uniforms.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Ledger JSON file with the initial state; trivial when absent.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Sites recorded at each checkpoint, comma separated.
    #[arg(long, default_value = "-2,-1,0,1,2", allow_hyphen_values = true)]
    pub probes: String,
    /// Checkpoints per doubling of time.
    #[arg(long, default_value_t = 4)]
    pub per_octave: u32,
    /// Record the whole local-time profile at every checkpoint.
    #[arg(long)]
    pub snapshots: bool,
    /// Record I_n, S_n, K_n over sites 0..=4.
    #[arg(long)]
    pub five_site: bool,
    /// Format of the checkpoint series.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Directory receiving series.{csv,json}, ledger.json and summary.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// TOML file of flag values, top level or under a table named after the
    /// subcommand; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoupleArgs {
    /// Walk expected on the left.
    #[arg(long)]
    pub left: String,
    /// Walk expected on the right.
    #[arg(long)]
    pub right: String,
    /// Weight function (see `vrrw-lab --help`).
    #[arg(long)]
    pub weight: String,
    /// Seeds: `A..B` (inclusive), `A..=B`, single values, comma separated.
    #[arg(long, default_value = "1..100")]
    pub seeds: String,
    /// Moves per run.
    #[arg(long, default_value_t = 10_000)]
    pub steps: u64,
    /// Window bound L of the good event monitored on hat walks (sites).
    #[arg(long, default_value_t = 8)]
    pub hat_l: i64,
    /// Ledger JSON file with the common initial state; trivial when absent.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Re-derive one step `SEED:STEP` of both walks instead of coupling.
    #[arg(long)]
    pub replay: Option<String>,
    /// Directory receiving record_SEED.json for each run with violations.
    #[arg(long)]
    pub records_dir: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file of flag values, top level or under a table named after the
    /// subcommand; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// Weight function (see `vrrw-lab --help`).
    #[arg(long)]
    pub weight: String,
    /// Walk kind (see `vrrw-lab --help`).
    #[arg(long, default_value = "vrrw")]
    pub kind: String,
    /// Seed of the field of uniforms.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Moves; at least 10000.
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,
    /// Largest distance i from the center compared with Ψ_{1/2,i}.
    #[arg(long, default_value_t = 2)]
    pub i_max: u32,
    /// Checkpoints per doubling of time.
    #[arg(long, default_value_t = 4)]
    pub per_octave: u32,
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file of flag values, top level or under a table named after the
    /// subcommand; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Weight function (see `vrrw-lab --help`).
    #[arg(long)]
    pub weight: String,
    /// Comma list from operators, sandwich, f-eta, identity, enumeration.
    #[arg(long, default_value = "operators,sandwich,f-eta,identity,enumeration")]
    pub checks: String,
    /// η values of the Φ_{η,2} closed-form check, comma separated.
    #[arg(long, default_value = "0.4,0.5,0.6")]
    pub etas: String,
    /// Relative tolerance of the operator identities.
    #[arg(long, default_value = "1e-6")]
    pub rel_tol: f64,
    /// Iterate levels k of the growth sandwich (polylog weights only), comma separated.
    #[arg(long, default_value = "2")]
    pub sandwich_k: String,
    /// η of the growth sandwich.
    #[arg(long, default_value_t = 0.5)]
    pub sandwich_eta: f64,
    /// Relative tolerance of the fitted sandwich exponent.
    #[arg(long, default_value_t = 0.15)]
    pub sandwich_tol: f64,
    /// η of the f_η construction.
    #[arg(long, default_value_t = 0.54)]
    pub f_eta: f64,
    /// Hull of the f_η checks (local time units).
    #[arg(long, default_value = "1e50")]
    pub f_hull: f64,
    /// Seeds of the pathwise identity runs on the doubly reflected walk on ⟦0,4⟧.
    #[arg(long, default_value = "1..10")]
    pub seeds: String,
    /// Moves per identity run.
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    /// Largest accepted identity residual.
    #[arg(long, default_value = "1e-8")]
    pub identity_tol: f64,
    /// Walk kinds of the enumeration check, comma separated.
    #[arg(
        long,
        default_value = "vrrw,reflected,tilde,breve:0.25,restricted:-2:2"
    )]
    pub kinds: String,
    /// Path length of the enumeration check (at most 14).
    #[arg(long, default_value_t = 6)]
    pub enum_steps: u32,
    /// Monte Carlo runs of the enumeration check.
    #[arg(long, default_value_t = 20_000)]
    pub runs: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file of flag values, top level or under a table named after the
    /// subcommand; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CampaignArgs {
    /// Campaign TOML file.
    #[arg(long)]
    pub config: PathBuf,
    /// Directory receiving report.json, runs.csv and profile_*.dat.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads; VRRW_LAB_THREADS and the machine bound it from above.
    #[arg(long)]
    pub threads: Option<usize>,
}
