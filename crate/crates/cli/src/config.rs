//! TOML run configuration: one file with a section per subcommand plus a
//! shared `[model]` block, overridable by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use senbd::{EdgeSelection, Family, ModelSpec, Shape};

use crate::error::{CliError, CliResult};

/// Whole config file. Every section is optional; commands reject missing
/// sections they need.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    pub model: Option<ModelSection>,
    pub simulate: Option<SimulateSection>,
    pub synth: Option<SynthSection>,
    pub fit: Option<FitSection>,
    pub aic_table: Option<AicTableSection>,
    pub impact: Option<ImpactSection>,
    pub network: Option<NetworkSection>,
    pub corr: Option<CorrSection>,
    pub branching: Option<BranchingSection>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Master seed; mandatory for stochastic commands.
    pub seed: Option<u64>,
}

/// One directed interaction edge in reproduction-number form: `s` expected
/// events on `target` per event on `source` (0-based line indices).
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub target: usize,
    pub source: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    pub baseline_mean: Vec<f64>,
    /// Finite dispersion shapes; required for the NBD-kind families, ignored
    /// on Poisson lines, absent for the Hawkes families.
    pub dispersion_shape: Option<Vec<f64>>,
    /// For the hybrid family: 0-based indices of Poisson lines.
    #[serde(default)]
    pub hawkes_lines: Vec<usize>,
    pub decay: Vec<f64>,
    pub sector_names: Option<Vec<String>>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
}

impl ModelSection {
    /// Build the validated model spec.
    pub fn build(&self) -> CliResult<ModelSpec> {
        let dim = self.baseline_mean.len();
        let poisson_line = |i: usize| -> bool {
            match self.family {
                Family::Hawkes | Family::MdHawkes => true,
                Family::Hybrid => self.hawkes_lines.contains(&i),
                _ => false,
            }
        };
        if matches!(self.family, Family::Hybrid) {
            for &i in &self.hawkes_lines {
                if i >= dim {
                    return Err(CliError::config(format!(
                        "hawkes_lines index {i} out of range for dimension {dim}"
                    )));
                }
            }
        } else if !self.hawkes_lines.is_empty() {
            return Err(CliError::config(
                "hawkes_lines is only meaningful for the hybrid family",
            ));
        }
        let mut shapes = Vec::with_capacity(dim);
        for i in 0..dim {
            if poisson_line(i) {
                shapes.push(Shape::Infinite);
            } else {
                let values = self.dispersion_shape.as_ref().ok_or_else(|| {
                    CliError::config(format!(
                        "family {} needs dispersion_shape",
                        self.family
                    ))
                })?;
                if values.len() != dim {
                    return Err(CliError::config(format!(
                        "dispersion_shape has {} entries, expected {dim}",
                        values.len()
                    )));
                }
                shapes.push(Shape::Finite(values[i]));
            }
        }
        let mut reproduction = vec![vec![0.0; dim]; dim];
        for edge in &self.edges {
            if edge.target >= dim || edge.source >= dim {
                return Err(CliError::config(format!(
                    "edge ({}, {}) out of range for dimension {dim}",
                    edge.target, edge.source
                )));
            }
            if reproduction[edge.target][edge.source] != 0.0 {
                return Err(CliError::config(format!(
                    "duplicate edge (target {}, source {})",
                    edge.target, edge.source
                )));
            }
            reproduction[edge.target][edge.source] = edge.s;
        }
        let spec = ModelSpec::from_reproduction(
            self.family,
            self.baseline_mean.clone(),
            shapes,
            reproduction,
            self.decay.clone(),
        )?;
        if let Some(names) = &self.sector_names {
            if names.len() != dim {
                return Err(CliError::config(format!(
                    "sector_names has {} entries, expected {dim}",
                    names.len()
                )));
            }
        }
        Ok(spec)
    }

    pub fn names(&self) -> Vec<String> {
        match &self.sector_names {
            Some(names) => names.clone(),
            None => (1..=self.baseline_mean.len())
                .map(|i| format!("line_{i}"))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub horizon: usize,
    /// Optional CSV destination for the simulated panel.
    pub series_output: Option<PathBuf>,
    #[serde(default)]
    pub allow_nonstationary: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub horizon: usize,
    pub output: PathBuf,
    #[serde(default)]
    pub allow_nonstationary: bool,
}

/// Box constraints, `[lower, upper]` pairs.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub baseline: Option<[f64; 2]>,
    pub dispersion: Option<[f64; 2]>,
    pub decay: Option<[f64; 2]>,
    pub reproduction: Option<[f64; 2]>,
}

impl BoundsSection {
    pub fn apply(&self, bounds: &mut senbd::Bounds) {
        if let Some([lo, hi]) = self.baseline {
            bounds.baseline = Some((lo, hi));
        }
        if let Some([lo, hi]) = self.dispersion {
            bounds.dispersion = (lo, hi);
        }
        if let Some([lo, hi]) = self.decay {
            bounds.decay = (lo, hi);
        }
        if let Some([lo, hi]) = self.reproduction {
            bounds.reproduction = (lo, hi);
        }
    }
}

fn default_multistart() -> usize {
    16
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_max_iterations() -> usize {
    600
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub input: PathBuf,
    pub family: Family,
    #[serde(default = "default_edge_selection")]
    pub edge_selection: EdgeSelection,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub bounds: BoundsSection,
}

fn default_edge_selection() -> EdgeSelection {
    EdgeSelection::DiagonalOnly
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AicTableSection {
    pub input: PathBuf,
    /// Families to compare; defaults to all five.
    pub families: Option<Vec<Family>>,
    #[serde(default = "default_edge_selection")]
    pub edge_selection: EdgeSelection,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub bounds: BoundsSection,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactSection {
    /// 0-based source line; all lines when absent.
    pub source: Option<usize>,
    /// Horizon for cumulative trajectories; omitted means totals only.
    pub horizon: Option<usize>,
    pub output: Option<PathBuf>,
    pub trajectory_output: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    0.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub output: Option<PathBuf>,
}

/// Continuous-limit kernel parameters for the theoretical correlation
/// columns.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub amplitude: f64,
    pub rate: f64,
    #[serde(default)]
    pub overdispersion: f64,
    pub baseline: f64,
}

fn default_max_lag() -> usize {
    20
}

fn default_step() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CorrSection {
    /// Count panel for the empirical column.
    pub input: Option<PathBuf>,
    #[serde(default = "default_max_lag")]
    pub max_lag: usize,
    #[serde(default)]
    pub line_i: usize,
    #[serde(default)]
    pub line_j: usize,
    /// Integral-equation grid step (one period = lag 1).
    #[serde(default = "default_step")]
    pub step: f64,
    /// Solver horizon; defaults to twenty covariance decay times.
    pub t_max: Option<f64>,
    pub kernel: Option<KernelSection>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffspringKind {
    Poisson,
    Nbd,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingSection {
    pub kind: OffspringKind,
    pub mean: f64,
    /// NBD only: offspring shape.
    pub shape: Option<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// Monte-Carlo tree count for the simulated extinction fraction;
    /// zero skips the simulation.
    #[serde(default)]
    pub trees: usize,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::io(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> CliResult<&ModelSection> {
        self.model
            .as_ref()
            .ok_or_else(|| CliError::config("missing [model] section"))
    }

    pub fn seed(&self, flag: Option<u64>) -> CliResult<u64> {
        flag.or(self.run.seed).ok_or_else(|| {
            CliError::config("a seed is required: set [run].seed or pass --seed")
        })
    }
}
