use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use regstop_core::asymptotics::Limit;

#[derive(Debug, Parser)]
#[command(
    name = "regstop",
    version,
    about = "Optimal stopping at Poisson arrivals for a two-regime switching GBM"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Report a violated `r > max(mu0, mu1)` as a warning instead of failing.
    #[arg(long, global = true)]
    pub permissive: bool,

    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output layout; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Monte Carlo path count.
    #[arg(long, global = true)]
    pub paths: Option<usize>,

    /// Grid as `LO:HI:N[:lin|log]`.
    #[arg(long, global = true, value_name = "SPEC")]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots, coefficients and threshold as a record.
    Solve { params: PathBuf },
    /// V_0, V_1, the payoff and derivatives over a grid.
    Eval { params: PathBuf },
    /// `x, v0, v1, pi` over a grid, with the threshold row included.
    PlotData { params: PathBuf },
    /// Boundary conditions and pasting gaps; `--grid` spans multiples of x*.
    Verify {
        params: PathBuf,
        /// Relative window around x* excluded from the strict inequalities.
        #[arg(long, default_value_t = regstop_core::verifier::DEFAULT_WINDOW)]
        window: f64,
    },
    /// Cartesian parameter sweep with a pass count.
    Sweep {
        /// Values for mu0 and mu1.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu_values: Option<Vec<f64>>,
        /// Values for sigma0, sigma1, lambda0, lambda1 and eta.
        #[arg(long, value_delimiter = ',')]
        other_values: Option<Vec<f64>>,
        /// Boundary-check grid points per set.
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Monte Carlo value of the threshold rule against the solver.
    Simulate {
        params: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        x0: f64,
        /// Initial regime, 0 or 1.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
        regime: u8,
        /// Stopping threshold; defaults to the solver's x*.
        #[arg(long)]
        threshold: Option<f64>,
        /// Truncation horizon; defaults to the discounting tail bound.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Closed-form threshold in a single-diffusion limit.
    Asymptote {
        /// Parameter file with mu0 = mu1 and sigma0 = sigma1; defaults to the
        /// built-in test set.
        params: Option<PathBuf>,
        #[arg(long, value_parser = parse_limit, default_value = "eta")]
        limit: Limit,
        #[arg(long, value_enum)]
        table: Option<TableKind>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// `[section]` blocks of `key = value` lines.
    Record,
    /// Comma-separated rows with a header.
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    /// General solver against the limit as the varied rate grows.
    Convergence,
    /// Limiting value functions over `--grid`.
    Values,
}

fn parse_limit(s: &str) -> Result<Limit, String> {
    s.parse().map_err(|e| format!("{e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub const PLOT: GridSpec = GridSpec {
        lo: 0.01,
        hi: 3.0,
        n: 300,
        spacing: Spacing::Lin,
    };

    pub fn points(&self) -> Vec<f64> {
        let last = (self.n - 1) as f64;
        (0..self.n)
            .map(|k| {
                let t = k as f64 / last;
                if k + 1 == self.n {
                    self.hi
                } else {
                    match self.spacing {
                        Spacing::Lin => self.lo + (self.hi - self.lo) * t,
                        Spacing::Log => self.lo * (self.hi / self.lo).powf(t),
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpecError(String);

impl fmt::Display for GridSpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid `{}`: expected LO:HI:N[:lin|log] with 0 < LO < HI and N >= 2",
            self.0
        )
    }
}

impl std::error::Error for GridSpecError {}

impl FromStr for GridSpec {
    type Err = GridSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || GridSpecError(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(err());
        }
        let lo: f64 = parts[0].trim().parse().map_err(|_| err())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| err())?;
        let n: usize = parts[2].trim().parse().map_err(|_| err())?;
        let spacing = match parts.get(3).map(|p| p.trim()) {
            None | Some("lin") => Spacing::Lin,
            Some("log") => Spacing::Log,
            Some(_) => return Err(err()),
        };
        if !(lo > 0.0 && hi > lo && hi.is_finite() && n >= 2) {
            return Err(err());
        }
        Ok(GridSpec { lo, hi, n, spacing })
    }
}
