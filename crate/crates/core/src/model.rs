//! Model families, parameter containers, and event-count series.
//!
//! A model is a `D`-line count process. Line `i` draws a count each period
//! from a conditional law with mean `M_t^(i)`; the mean (and, for
//! negative-binomial lines, the shape `K_t^(i)`) is excited by past counts on
//! all lines through the interaction scales `L0^(ij)` and the geometric decay
//! `r_i`:
//!
//! ```text
//! M_t^(i) = M0_i + (M0_i / L0_ij) * sum_s X_s^(j) * r_i^(t-s)
//! K_t^(i) = K0_i + (K0_i / L0_ij) * sum_s X_s^(j) * r_i^(t-s)
//! ```
//!
//! so the ratio `M_t/K_t = M0/K0` is constant along every path. A line with
//! infinite dispersion shape draws Poisson counts (zero-variance intensity);
//! a finite shape draws negative-binomial counts (gamma-distributed
//! intensity). Absent interaction edges are encoded as `L0 = +inf`, which
//! makes their reproduction number exactly zero without a separate mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The model families that can be simulated and fitted.
///
/// Multidimensional (`Md*`) families allow cross-line interaction; the
/// single-line families restrict the interaction matrix to its diagonal
/// (each line evolves independently); `Nbd` has no self-excitation at all.
/// `Hybrid` mixes negative-binomial and Poisson lines in one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MdSeNbd,
    MdHawkes,
    SeNbd,
    Hawkes,
    Nbd,
    Hybrid,
}

impl Family {
    /// The five fittable families, in conventional comparison order.
    pub const COMPARISON: [Family; 5] = [
        Family::MdSeNbd,
        Family::MdHawkes,
        Family::SeNbd,
        Family::Hawkes,
        Family::Nbd,
    ];

    /// Whether cross-line interaction edges are allowed.
    pub fn interacts(self) -> bool {
        matches!(self, Family::MdSeNbd | Family::MdHawkes | Family::Hybrid)
    }

    /// Whether lines self-excite (everything except plain NBD).
    pub fn self_excites(self) -> bool {
        !matches!(self, Family::Nbd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::MdSeNbd => "md-se-nbd",
            Family::MdHawkes => "md-hawkes",
            Family::SeNbd => "se-nbd",
            Family::Hawkes => "hawkes",
            Family::Nbd => "nbd",
            Family::Hybrid => "hybrid",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dispersion shape of one line: finite `K0` (negative binomial) or the
/// infinite marker (Poisson line).
///
/// The marker is an explicit variant rather than a large float so the Poisson
/// branch is exact and no `Gamma(K + k)` overflow can occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Finite(f64),
    Infinite,
}

impl Shape {
    pub fn is_finite(self) -> bool {
        matches!(self, Shape::Finite(_))
    }

    /// The finite value, if any.
    pub fn value(self) -> Option<f64> {
        match self {
            Shape::Finite(k) => Some(k),
            Shape::Infinite => None,
        }
    }
}

/// Full parameterization of one model: family, baselines `M0`, dispersion
/// shapes `K0`, interaction scales `L0` (entry `(i, j)` scales the influence
/// of line `j` on line `i`; `+inf` means no edge), and per-line decay `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    family: Family,
    baseline_mean: Vec<f64>,
    dispersion_shape: Vec<Shape>,
    interaction_scale: Vec<Vec<f64>>,
    decay: Vec<f64>,
}

impl ModelSpec {
    /// Validate and build a spec.
    ///
    /// Rejects parameters outside their domain and combinations that
    /// contradict the declared family (finite off-diagonal scales in a
    /// single-line family, finite dispersion in a Hawkes family, and so on).
    pub fn new(
        family: Family,
        baseline_mean: Vec<f64>,
        dispersion_shape: Vec<Shape>,
        interaction_scale: Vec<Vec<f64>>,
        decay: Vec<f64>,
    ) -> Result<Self> {
        let dim = baseline_mean.len();
        if dim == 0 {
            return Err(Error::Domain("model dimension must be at least 1".into()));
        }
        check_len("dispersion_shape", dim, dispersion_shape.len())?;
        check_len("decay", dim, decay.len())?;
        check_len("interaction_scale rows", dim, interaction_scale.len())?;
        for (i, row) in interaction_scale.iter().enumerate() {
            check_len("interaction_scale columns", dim, row.len())?;
            for (j, &l0) in row.iter().enumerate() {
                if l0.is_nan() || l0 <= 0.0 {
                    return Err(Error::Domain(format!(
                        "interaction_scale[{i}][{j}] must be positive or +inf, got {l0}"
                    )));
                }
            }
        }
        for (i, &m0) in baseline_mean.iter().enumerate() {
            if !m0.is_finite() || m0 < 0.0 {
                return Err(Error::Domain(format!(
                    "baseline_mean[{i}] must be finite and >= 0, got {m0}"
                )));
            }
        }
        for (i, &r) in decay.iter().enumerate() {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Domain(format!(
                    "decay[{i}] must lie in [0, 1), got {r}"
                )));
            }
        }
        for (i, &k0) in dispersion_shape.iter().enumerate() {
            if let Shape::Finite(k) = k0 {
                if !k.is_finite() || k <= 0.0 {
                    return Err(Error::Domain(format!(
                        "dispersion_shape[{i}] must be positive, got {k}"
                    )));
                }
            }
        }

        let all_dispersion_finite = dispersion_shape.iter().all(|k| k.is_finite());
        let all_dispersion_infinite = dispersion_shape.iter().all(|k| !k.is_finite());
        match family {
            Family::Nbd | Family::SeNbd | Family::MdSeNbd => {
                if !all_dispersion_finite {
                    return Err(Error::Domain(format!(
                        "family {family} requires finite dispersion on every line"
                    )));
                }
            }
            Family::Hawkes | Family::MdHawkes => {
                if !all_dispersion_infinite {
                    return Err(Error::Domain(format!(
                        "family {family} requires the infinite dispersion marker on every line"
                    )));
                }
            }
            Family::Hybrid => {}
        }
        match family {
            Family::Nbd => {
                for (i, row) in interaction_scale.iter().enumerate() {
                    for (j, &l0) in row.iter().enumerate() {
                        if l0.is_finite() {
                            return Err(Error::Domain(format!(
                                "family nbd has no self-excitation; interaction_scale[{i}][{j}] must be +inf"
                            )));
                        }
                    }
                }
            }
            Family::SeNbd | Family::Hawkes => {
                for (i, row) in interaction_scale.iter().enumerate() {
                    for (j, &l0) in row.iter().enumerate() {
                        if i != j && l0.is_finite() {
                            return Err(Error::Domain(format!(
                                "family {family} is single-line; off-diagonal interaction_scale[{i}][{j}] must be +inf"
                            )));
                        }
                    }
                }
            }
            Family::MdSeNbd | Family::MdHawkes | Family::Hybrid => {}
        }

        Ok(Self {
            family,
            baseline_mean,
            dispersion_shape,
            interaction_scale,
            decay,
        })
    }

    /// Build a spec from reproduction numbers `S_ij` instead of raw scales:
    /// `L0_ij = M0_i / (S_ij (1 - r_i))`, with `S_ij = 0` meaning no edge.
    ///
    /// A positive `S_ij` on a line with zero baseline is rejected: the
    /// excitation coefficient `M0_i / L0_ij` carries the baseline as a
    /// factor, so a zero-baseline line cannot receive excitation.
    pub fn from_reproduction(
        family: Family,
        baseline_mean: Vec<f64>,
        dispersion_shape: Vec<Shape>,
        reproduction: Vec<Vec<f64>>,
        decay: Vec<f64>,
    ) -> Result<Self> {
        let dim = baseline_mean.len();
        check_len("reproduction rows", dim, reproduction.len())?;
        let mut interaction_scale = vec![vec![f64::INFINITY; dim]; dim];
        for (i, row) in reproduction.iter().enumerate() {
            check_len("reproduction columns", dim, row.len())?;
            for (j, &s) in row.iter().enumerate() {
                if s.is_nan() || s < 0.0 || s.is_infinite() {
                    return Err(Error::Domain(format!(
                        "reproduction[{i}][{j}] must be finite and >= 0, got {s}"
                    )));
                }
                if s > 0.0 {
                    let m0 = baseline_mean[i];
                    if m0 == 0.0 {
                        return Err(Error::Domain(format!(
                            "reproduction[{i}][{j}] > 0 has no effect: baseline_mean[{i}] is zero"
                        )));
                    }
                    let r = *decay.get(i).ok_or(Error::Dimension {
                        context: "decay",
                        expected: dim,
                        got: decay.len(),
                    })?;
                    interaction_scale[i][j] = m0 / (s * (1.0 - r));
                }
            }
        }
        Self::new(family, baseline_mean, dispersion_shape, interaction_scale, decay)
    }

    /// Single SE-NBD line.
    pub fn single_se_nbd(m0: f64, k0: f64, l0: f64, r: f64) -> Result<Self> {
        Self::new(
            Family::SeNbd,
            vec![m0],
            vec![Shape::Finite(k0)],
            vec![vec![l0]],
            vec![r],
        )
    }

    /// Single Hawkes (Poisson) line.
    pub fn single_hawkes(m0: f64, l0: f64, r: f64) -> Result<Self> {
        Self::new(
            Family::Hawkes,
            vec![m0],
            vec![Shape::Infinite],
            vec![vec![l0]],
            vec![r],
        )
    }

    /// Independent NBD lines with no self-excitation.
    pub fn nbd(baseline_mean: Vec<f64>, k0: Vec<f64>) -> Result<Self> {
        let dim = baseline_mean.len();
        Self::new(
            Family::Nbd,
            baseline_mean,
            k0.into_iter().map(Shape::Finite).collect(),
            vec![vec![f64::INFINITY; dim]; dim],
            vec![0.0; dim],
        )
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dimension(&self) -> usize {
        self.baseline_mean.len()
    }

    pub fn baseline_mean(&self) -> &[f64] {
        &self.baseline_mean
    }

    pub fn dispersion_shape(&self) -> &[Shape] {
        &self.dispersion_shape
    }

    pub fn interaction_scale(&self) -> &[Vec<f64>] {
        &self.interaction_scale
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    /// Whether line `i` draws Poisson counts (infinite dispersion).
    pub fn is_poisson_line(&self, i: usize) -> bool {
        !self.dispersion_shape[i].is_finite()
    }

    /// Per-event excitation coefficient of line `j` on line `i`:
    /// `M0_i / L0_ij` (zero for absent edges).
    pub fn excitation_coeff(&self, i: usize, j: usize) -> f64 {
        self.baseline_mean[i] / self.interaction_scale[i][j]
    }

    /// Overdispersion ratio `M0_i / K0_i` of line `i` (zero for Poisson lines).
    pub fn overdispersion(&self, i: usize) -> f64 {
        match self.dispersion_shape[i] {
            Shape::Finite(k0) => self.baseline_mean[i] / k0,
            Shape::Infinite => 0.0,
        }
    }
}

fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}

/// Evolving state of a simulation or likelihood sweep.
///
/// The sufficient statistic per line is the normalized excitation
/// `e_t^(i) = sum_j sum_{s<=t} X_s^(j) r_i^(t-s) / L0_ij`; the conditional
/// mean and shape are `M_t = M0 (1 + e_t)` and `K_t = K0 (1 + e_t)`. Sharing
/// one accumulator between mean and shape keeps `M_t/K_t` pinned to `M0/K0`
/// and replaces the kernel convolution with an O(1) update per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessState {
    t: usize,
    excitation: Vec<f64>,
}

impl ProcessState {
    /// State at time zero: no history, `M_0 = M0`, `K_0 = K0`.
    pub fn initial(spec: &ModelSpec) -> Self {
        Self {
            t: 0,
            excitation: vec![0.0; spec.dimension()],
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn dimension(&self) -> usize {
        self.excitation.len()
    }

    pub fn excitation(&self) -> &[f64] {
        &self.excitation
    }

    /// Conditional mean `M_t^(i)`.
    pub fn mean(&self, spec: &ModelSpec, i: usize) -> f64 {
        spec.baseline_mean()[i] * (1.0 + self.excitation[i])
    }

    /// All conditional means `M_t`.
    pub fn means(&self, spec: &ModelSpec) -> Vec<f64> {
        (0..self.dimension()).map(|i| self.mean(spec, i)).collect()
    }

    /// Conditional shape `K_t^(i)` (`Infinite` on Poisson lines).
    pub fn shape(&self, spec: &ModelSpec, i: usize) -> Shape {
        match spec.dispersion_shape()[i] {
            Shape::Finite(k0) => Shape::Finite(k0 * (1.0 + self.excitation[i])),
            Shape::Infinite => Shape::Infinite,
        }
    }

    /// Fold one period of observed counts into the state.
    ///
    /// Errors if `counts` does not match the model dimension.
    pub fn advance(&self, spec: &ModelSpec, counts: &[u64]) -> Result<ProcessState> {
        let dim = self.dimension();
        check_len("counts", dim, counts.len())?;
        if spec.dimension() != dim {
            return Err(Error::Dimension {
                context: "spec",
                expected: dim,
                got: spec.dimension(),
            });
        }
        let mut excitation = Vec::with_capacity(dim);
        for i in 0..dim {
            let mut e = spec.decay()[i] * self.excitation[i];
            for (j, &x) in counts.iter().enumerate() {
                if x > 0 {
                    e += x as f64 / spec.interaction_scale()[i][j];
                }
            }
            excitation.push(e);
        }
        Ok(ProcessState {
            t: self.t + 1,
            excitation,
        })
    }

    /// Inject extra events into the current period's history, as if `count`
    /// additional events had just occurred on `line`. Used for shock and
    /// impact experiments.
    pub fn inject(&self, spec: &ModelSpec, line: usize, count: u64) -> Result<ProcessState> {
        let dim = self.dimension();
        if line >= dim {
            return Err(Error::Domain(format!(
                "line index {line} out of range for dimension {dim}"
            )));
        }
        let mut excitation = self.excitation.clone();
        for (i, e) in excitation.iter_mut().enumerate() {
            *e += count as f64 / spec.interaction_scale()[i][line];
        }
        Ok(ProcessState {
            t: self.t,
            excitation,
        })
    }
}

/// A `T x D` panel of nonnegative integer event counts with optional period
/// labels and per-line sector names.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSeries {
    dim: usize,
    counts: Vec<u64>,
    sector_names: Vec<String>,
    labels: Option<Vec<String>>,
}

impl EventSeries {
    /// Build a series from time-major rows. `sector_names` defaults to
    /// `line_1..line_D`.
    pub fn new(
        rows: Vec<Vec<u64>>,
        dim: usize,
        sector_names: Option<Vec<String>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let mut counts = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            check_len("series row", dim, row.len())?;
            counts.extend_from_slice(row);
        }
        let sector_names =
            sector_names.unwrap_or_else(|| (1..=dim).map(|i| format!("line_{i}")).collect());
        check_len("sector_names", dim, sector_names.len())?;
        if let Some(ref labels) = labels {
            check_len("labels", rows.len(), labels.len())?;
        }
        Ok(Self {
            dim,
            counts,
            sector_names,
            labels,
        })
    }

    /// Number of periods `T`.
    pub fn num_periods(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.counts.len() / self.dim
        }
    }

    /// Number of lines `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, t: usize, line: usize) -> u64 {
        self.counts[t * self.dim + line]
    }

    /// One period of counts across all lines.
    pub fn row(&self, t: usize) -> &[u64] {
        &self.counts[t * self.dim..(t + 1) * self.dim]
    }

    /// All counts of one line over time.
    pub fn column(&self, line: usize) -> impl Iterator<Item = u64> + '_ {
        self.counts[line..].iter().step_by(self.dim).copied()
    }

    pub fn sector_names(&self) -> &[String] {
        &self.sector_names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Largest observed count over the whole panel.
    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    /// Reorder lines by `perm`, where `perm[new_index] = old_index`.
    pub fn permute_lines(&self, perm: &[usize]) -> Result<EventSeries> {
        check_len("permutation", self.dim, perm.len())?;
        let t_len = self.num_periods();
        let mut rows = Vec::with_capacity(t_len);
        for t in 0..t_len {
            let old = self.row(t);
            rows.push(perm.iter().map(|&j| old[j]).collect());
        }
        let names = perm
            .iter()
            .map(|&j| self.sector_names[j].clone())
            .collect();
        EventSeries::new(rows, self.dim, Some(names), self.labels.clone())
    }
}
