//! Argument surface: global flags plus one `key=value` trailing list per
//! subcommand.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rmop_core::{Grid, Tolerances};

#[derive(Debug, Parser)]
#[command(
    name = "rmop",
    about = "Certificates for approximate Pareto solutions of robust interval-valued multiobjective problems",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Problem file (TOML).
    #[arg(long, global = true)]
    pub problem: Option<PathBuf>,

    /// Grid specification `lo,hi,steps` (one triple broadcast to every
    /// axis, or one triple per axis concatenated).
    #[arg(long, global = true)]
    pub grid: Option<String>,

    /// Inclusion tolerance added to the sqrt(theta) allowance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_incl: f64,

    /// Feasibility tolerance on worst-case constraint values.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_feas: f64,

    /// Active-branch and active-constraint detection tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_active: f64,

    /// Sign-classification tolerance on worst-case values.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_sign: f64,

    /// Strictness slack in dominance scans (0 = exact comparisons).
    #[arg(long, global = true, default_value_t = 0.0)]
    pub tol_strict: f64,

    /// Whether the dual feasible set caps multipliers at the anchor values.
    #[arg(long, global = true, value_enum, default_value_t = CapMode::On)]
    pub cap_mode: CapMode,

    /// Seed for every randomized element (multi-starts, suite draws).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CapMode {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Kv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a problem file, validate the precision vector, and sample
    /// objective validity over the grid when one is given.
    Validate {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Classify a candidate point against all solution concepts
    /// (`z=…` required).
    Classify {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Check a KKT pair up to the precision vector (`z=…`, `lambda=…`).
    Kkt {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Run the quadratic-penalty construction over the grid box
    /// (optional `r0=`, `shrink=`, `starts=`, `inner=`, `max-outer=`).
    SolvePenalty {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Certify a generalized-convexity notion at a point over grid samples
    /// (`notion=…`, `z=…`).
    Convexity {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Evaluate the dual objective (`y=…`, `lambda=…`).
    DualObjective {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Classify a dual point against generated dual samples
    /// (`anchor-z=…`, `anchor-lambda=…`, optional `y=`, `lambda=`,
    /// `lambda-max=`, `lambda-steps=`).
    DualClassify {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Verify the saddle-point conditions (`x=…`, `lambda=…`, optional
    /// `lambda-steps=`).
    Saddle {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
    /// Run the randomized theorem property suites
    /// (optional `instances=`, default 100).
    Harness {
        #[arg(value_name = "KEY=VALUE")]
        kv: Vec<String>,
    },
}

impl Common {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            tol_incl: self.tol_incl,
            tol_feas: self.tol_feas,
            tol_active: self.tol_active,
            tol_sign: self.tol_sign,
            tol_strict: self.tol_strict,
            ..Tolerances::default()
        }
    }

    /// Parses the `--grid` flag for a problem of dimension `dim`.
    pub fn parse_grid(&self, dim: usize) -> Result<Grid, String> {
        let spec = self
            .grid
            .as_ref()
            .ok_or_else(|| "--grid lo,hi,steps is required for this command".to_string())?;
        let parts: Vec<&str> = spec.split(',').collect();
        if parts.len() % 3 != 0 {
            return Err(format!(
                "--grid expects triples lo,hi,steps; got {} values",
                parts.len()
            ));
        }
        let triples = parts.len() / 3;
        if triples != 1 && triples != dim {
            return Err(format!(
                "--grid has {triples} triples but the problem has {dim} axes"
            ));
        }
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        let mut counts = Vec::with_capacity(dim);
        for k in 0..dim {
            let base = if triples == 1 { 0 } else { 3 * k };
            let l: f64 = parts[base]
                .trim()
                .parse()
                .map_err(|_| format!("--grid: bad number '{}'", parts[base]))?;
            let h: f64 = parts[base + 1]
                .trim()
                .parse()
                .map_err(|_| format!("--grid: bad number '{}'", parts[base + 1]))?;
            let c: usize = parts[base + 2]
                .trim()
                .parse()
                .map_err(|_| format!("--grid: bad count '{}'", parts[base + 2]))?;
            lo.push(l);
            hi.push(h);
            counts.push(c);
        }
        Grid::new(lo, hi, counts).map_err(|e| e.to_string())
    }
}

/// Parsed `key=value` arguments; keys are unique, later entries win.
pub struct KeyValues(BTreeMap<String, String>);

impl KeyValues {
    pub fn parse(items: &[String]) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("expected KEY=VALUE, got '{item}'"))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KeyValues(map))
    }

    pub fn vector(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => {
                let mut out = Vec::new();
                for part in raw.split(',') {
                    out.push(
                        part.trim()
                            .parse()
                            .map_err(|_| format!("{key}: bad number '{part}'"))?,
                    );
                }
                Ok(Some(out))
            }
        }
    }

    pub fn require_vector(&self, key: &str) -> Result<Vec<f64>, String> {
        self.vector(key)?
            .ok_or_else(|| format!("missing required argument {key}=…"))
    }

    pub fn scalar(&self, key: &str) -> Result<Option<f64>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| format!("{key}: bad number '{raw}'")),
        }
    }

    pub fn count(&self, key: &str) -> Result<Option<usize>, String> {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| format!("{key}: bad count '{raw}'")),
        }
    }

    pub fn string(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|s| s.as_str())
    }
}
