//! Interaction network analysis: reproduction-number matrix, stationarity,
//! mean-field equilibria, and shock impact.
//!
//! The effective reproduction number of line `j` on line `i` is
//! `S_ij = (M0_i / L0_ij) / (1 - r_i)`: the expected number of events on
//! line `i` directly triggered by one event on line `j`, summed over the
//! whole decay tail. The process is steady iff the spectral radius of `S`
//! is below one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// Nonnegative `D x D` matrix of effective reproduction numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    s: DMatrix<f64>,
}

impl InteractionMatrix {
    /// Validate and wrap a row-major matrix; entries must be finite and `>= 0`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut s = DMatrix::zeros(dim, dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Dimension {
                    context: "interaction matrix row",
                    expected: dim,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Domain(format!(
                        "S[{i}][{j}] must be finite and >= 0, got {v}"
                    )));
                }
                s[(i, j)] = v;
            }
        }
        Ok(Self { s })
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }
}

/// Build `S` from a model spec. Absent edges (`L0 = inf`) map to exactly zero.
pub fn build_s_matrix(spec: &ModelSpec) -> Result<InteractionMatrix> {
    let dim = spec.dimension();
    let mut s = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let r = spec.decay()[i];
        if r >= 1.0 {
            return Err(Error::Domain(format!(
                "decay[{i}] = {r} >= 1: the decay tail diverges"
            )));
        }
        let tail = 1.0 / (1.0 - r);
        for j in 0..dim {
            s[(i, j)] = spec.excitation_coeff(i, j) * tail;
        }
    }
    Ok(InteractionMatrix { s })
}

/// Dominant eigenvalue modulus of a nonnegative matrix by power iteration.
///
/// Iterates on `S + I` from the all-ones vector (the shift makes the Perron
/// root strictly dominant even for periodic matrices) with tolerance `1e-10`
/// on the eigenvalue estimate and a cap of `1e5` iterations.
pub fn spectral_radius(s: &InteractionMatrix) -> Result<f64> {
    const TOL: f64 = 1e-10;
    const MAX_ITER: usize = 100_000;

    let dim = s.dim();
    if dim == 0 {
        return Ok(0.0);
    }
    let shifted = s.matrix() + DMatrix::<f64>::identity(dim, dim);
    let mut v = DVector::from_element(dim, 1.0);
    let mut estimate = 0.0f64;
    for iteration in 0..MAX_ITER {
        let w = &shifted * &v;
        let norm = w.amax();
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next = norm;
        v = w / norm;
        if iteration > 0 && (next - estimate).abs() < TOL {
            return Ok((next - 1.0).max(0.0));
        }
        estimate = next;
    }
    Err(Error::NoConvergence {
        method: "power iteration",
        iterations: MAX_ITER,
        last: (estimate - 1.0).max(0.0),
    })
}

/// Steady/non-steady classification of an interaction matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityReport {
    pub rho: f64,
    /// Strictly subcritical: `rho < 1`.
    pub steady: bool,
    /// Within `1e-9` of the transition; treat the classification as fragile.
    pub near_critical: bool,
}

/// Classify a matrix as steady (`rho < 1`, strict) or not, flagging
/// near-critical values.
pub fn classify_stationarity(s: &InteractionMatrix) -> Result<StationarityReport> {
    let rho = spectral_radius(s)?;
    Ok(StationarityReport {
        rho,
        steady: rho < 1.0,
        near_critical: (rho - 1.0).abs() <= 1e-9,
    })
}

pub(crate) fn solve_resolvent(s: &InteractionMatrix, b: DVector<f64>) -> Result<DVector<f64>> {
    let dim = s.dim();
    let system = DMatrix::<f64>::identity(dim, dim) - s.matrix();
    system
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Domain("singular system: E - S is not invertible".into()))
}

fn require_steady(s: &InteractionMatrix) -> Result<()> {
    let rho = spectral_radius(s)?;
    if rho >= 1.0 {
        return Err(Error::Nonstationary { rho });
    }
    Ok(())
}

/// Stationary mean vector `v = (E - S)^-1 M0`.
///
/// The equilibrium mean depends only on baselines and `S`, so it is the same
/// formula for negative-binomial, Poisson, and hybrid lines.
pub fn mean_field_equilibrium(spec: &ModelSpec) -> Result<Vec<f64>> {
    let s = build_s_matrix(spec)?;
    require_steady(&s)?;
    let m0 = DVector::from_column_slice(spec.baseline_mean());
    Ok(solve_resolvent(&s, m0)?.iter().copied().collect())
}

/// Expected extra events per line caused by one extra event on `source`,
/// accumulated over all future periods: `(E - S)^-1 S e_source`.
pub fn impact_infinite(spec: &ModelSpec, source: usize) -> Result<Vec<f64>> {
    let dim = spec.dimension();
    if source >= dim {
        return Err(Error::Domain(format!(
            "source line {source} out of range for dimension {dim}"
        )));
    }
    let s = build_s_matrix(spec)?;
    require_steady(&s)?;
    let se = s.matrix().column(source).clone_owned();
    Ok(solve_resolvent(&s, se)?.iter().copied().collect())
}

/// Cumulative impact of one extra event on `source` after `1..=horizon`
/// periods.
///
/// Each contagion wave applies the per-event excitation matrix
/// `Shat_ij = M0_i/L0_ij` once and then decays geometrically, so the wave at
/// lag `t` is `(That + Shat)^(t-1) Shat e_source` with `That = diag(r_i)`,
/// and the cumulative impact is the partial sum of the waves. The partial
/// sums increase to `impact_infinite` when `rho(S) < 1` and grow without
/// bound otherwise (the horizon is always computable).
pub fn impact_trajectory(spec: &ModelSpec, source: usize, horizon: usize) -> Result<Vec<Vec<f64>>> {
    let dim = spec.dimension();
    if source >= dim {
        return Err(Error::Domain(format!(
            "source line {source} out of range for dimension {dim}"
        )));
    }
    let mut shat = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            shat[(i, j)] = spec.excitation_coeff(i, j);
        }
    }
    let mut propagator = shat.clone();
    for i in 0..dim {
        propagator[(i, i)] += spec.decay()[i];
    }
    let mut wave = shat.column(source).clone_owned();
    let mut cumulative = DVector::zeros(dim);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        cumulative += &wave;
        out.push(cumulative.iter().copied().collect());
        wave = &propagator * wave;
    }
    Ok(out)
}

/// Impact of a unit shock on every line.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactResult {
    /// `per_source[i][k]`: expected extra events on line `k` from one extra
    /// event on line `i`, over all future periods.
    pub per_source: Vec<Vec<f64>>,
    /// Total extra events (summed over target lines) per source line.
    pub totals: Vec<f64>,
    /// Optional cumulative trajectories `[source][t][target]` up to a horizon.
    pub trajectories: Option<Vec<Vec<Vec<f64>>>>,
    /// Mean of `totals`: the expected system response to an average shock.
    pub average_total: f64,
}

/// Run [`impact_infinite`] for every source line, optionally with
/// finite-horizon trajectories.
pub fn impact_analysis(spec: &ModelSpec, horizon: Option<usize>) -> Result<ImpactResult> {
    let dim = spec.dimension();
    let mut per_source = Vec::with_capacity(dim);
    let mut totals = Vec::with_capacity(dim);
    for source in 0..dim {
        let v = impact_infinite(spec, source)?;
        totals.push(v.iter().sum());
        per_source.push(v);
    }
    let trajectories = match horizon {
        Some(h) => {
            let mut all = Vec::with_capacity(dim);
            for source in 0..dim {
                all.push(impact_trajectory(spec, source, h)?);
            }
            Some(all)
        }
        None => None,
    };
    let average_total = totals.iter().sum::<f64>() / dim as f64;
    Ok(ImpactResult {
        per_source,
        totals,
        trajectories,
        average_total,
    })
}

/// Source lines ordered by total impact, descending; ties keep index order.
/// The head of the list is the upstream end of the network.
pub fn rank_sectors(impact: &ImpactResult) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = impact.totals.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    ranked
}

/// One directed interaction edge, named for graph tooling.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Directed edge list of all `S_ij > threshold`, source-major. Edge
/// `(source j, target i)` carries weight `S_ij`.
pub fn export_network(
    s: &InteractionMatrix,
    names: &[String],
    threshold: f64,
) -> Result<Vec<NamedEdge>> {
    let dim = s.dim();
    if names.len() != dim {
        return Err(Error::Dimension {
            context: "sector names",
            expected: dim,
            got: names.len(),
        });
    }
    let mut edges = Vec::new();
    for j in 0..dim {
        for i in 0..dim {
            let weight = s.entry(i, j);
            if weight > threshold {
                edges.push(NamedEdge {
                    source: names[j].clone(),
                    target: names[i].clone(),
                    weight,
                });
            }
        }
    }
    Ok(edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Family, ModelSpec, Shape};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn s_matrix_from_single_line() {
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        let s = build_s_matrix(&spec).unwrap();
        assert!((s.entry(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn s_matrix_absent_edges_are_zero() {
        let spec = ModelSpec::nbd(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let s = build_s_matrix(&spec).unwrap();
        assert_eq!(s.matrix().amax(), 0.0);
    }

    #[test]
    fn spectral_radius_of_diagonal_and_zero() {
        let s = InteractionMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.3]]).unwrap();
        assert!((spectral_radius(&s).unwrap() - 0.5).abs() < 1e-9);
        let z = InteractionMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(spectral_radius(&z).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_matches_closed_form_2x2() {
        let s = InteractionMatrix::from_rows(&[vec![0.2, 0.1], vec![0.3, 0.2]]).unwrap();
        let expected = 0.2 + 0.03f64.sqrt();
        assert!((spectral_radius(&s).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn classification_is_strict_at_one() {
        let sub = InteractionMatrix::from_rows(&[vec![0.999_999]]).unwrap();
        assert!(classify_stationarity(&sub).unwrap().steady);
        let sup = InteractionMatrix::from_rows(&[vec![1.000_001]]).unwrap();
        assert!(!classify_stationarity(&sup).unwrap().steady);
        let near = InteractionMatrix::from_rows(&[vec![1.0 + 1e-12]]).unwrap();
        assert!(classify_stationarity(&near).unwrap().near_critical);
    }

    fn two_line_spec() -> ModelSpec {
        ModelSpec::from_reproduction(
            Family::MdSeNbd,
            vec![1.0, 1.0],
            vec![Shape::Finite(1.0), Shape::Finite(1.0)],
            vec![vec![0.2, 0.1], vec![0.3, 0.2]],
            vec![0.4, 0.6],
        )
        .unwrap()
    }

    #[test]
    fn mean_field_equilibrium_matches_hand_solve() {
        // S = 0 keeps the baseline.
        let spec = ModelSpec::nbd(vec![1.5, 0.5], vec![1.0, 1.0]).unwrap();
        assert_eq!(mean_field_equilibrium(&spec).unwrap(), vec![1.5, 0.5]);

        // D = 1: 1 / (1 - 0.5) = 2.
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        assert!((mean_field_equilibrium(&spec).unwrap()[0] - 2.0).abs() < 1e-12);

        // D = 2 with det(E - S) = 0.61.
        let v = mean_field_equilibrium(&two_line_spec()).unwrap();
        assert!((v[0] - 0.9 / 0.61).abs() < 1e-10);
        assert!((v[1] - 1.1 / 0.61).abs() < 1e-10);
    }

    #[test]
    fn mean_field_is_consistent_with_fixed_point() {
        let spec = two_line_spec();
        let s = build_s_matrix(&spec).unwrap();
        let v = mean_field_equilibrium(&spec).unwrap();
        for i in 0..2 {
            let rhs =
                spec.baseline_mean()[i] + s.entry(i, 0) * v[0] + s.entry(i, 1) * v[1];
            assert!((v[i] - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn impact_single_line_closed_form() {
        // M0/L0 = 0.25, r = 0.5: impact 0.25 / (1 - 0.5 - 0.25) = 1.
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        let v = impact_infinite(&spec, 0).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn impact_zero_matrix_is_zero() {
        let spec = ModelSpec::nbd(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(impact_infinite(&spec, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn impact_two_line_hand_solve() {
        // (E-S)^-1 S e_0 with det 0.61: (0.19, 0.30)/0.61.
        let v = impact_infinite(&two_line_spec(), 0).unwrap();
        assert!((v[0] - 0.19 / 0.61).abs() < 1e-10);
        assert!((v[1] - 0.30 / 0.61).abs() < 1e-10);
    }

    #[test]
    fn impact_diverges_at_the_transition() {
        // a = M0/L0 = (1-r)(1-eps) gives impact (1-eps)/eps.
        for eps in [0.1, 0.01] {
            let r = 0.5;
            let a = (1.0 - r) * (1.0 - eps);
            let spec = ModelSpec::single_se_nbd(1.0, 1.0, 1.0 / a, r).unwrap();
            let v = impact_infinite(&spec, 0).unwrap();
            let expected = (1.0 - eps) / eps;
            assert!(
                ((v[0] - expected) / expected).abs() < 1e-10,
                "eps={eps}: {} vs {expected}",
                v[0]
            );
        }
    }

    #[test]
    fn impact_is_family_independent() {
        // Dispersion does not enter the mean recursion, so SE-NBD and Hawkes
        // specs with the same (M0, L0, r) have identical impact.
        let senbd = ModelSpec::single_se_nbd(1.0, 0.3, 4.0, 0.5).unwrap();
        let hawkes = ModelSpec::single_hawkes(1.0, 4.0, 0.5).unwrap();
        assert_eq!(
            impact_infinite(&senbd, 0).unwrap(),
            impact_infinite(&hawkes, 0).unwrap()
        );
    }

    #[test]
    fn trajectory_first_wave_and_limit() {
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        let traj = impact_trajectory(&spec, 0, 10_000).unwrap();
        // First wave is the direct effect M0/L0.
        assert!((traj[0][0] - 0.25).abs() < 1e-12);
        // Waves accumulate monotonically to the closed form.
        for w in traj.windows(2) {
            assert!(w[1][0] >= w[0][0]);
        }
        let limit = impact_infinite(&spec, 0).unwrap()[0];
        assert!((traj.last().unwrap()[0] - limit).abs() < 1e-8);
    }

    #[test]
    fn trajectory_matches_appendix_style_partial_sums() {
        // Single line: cumulative after t waves is a (1 - (a+r)^t) / (1-r-a).
        let (a, r) = (0.25, 0.5);
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 1.0 / a, r).unwrap();
        let traj = impact_trajectory(&spec, 0, 50).unwrap();
        for (idx, v) in traj.iter().enumerate() {
            let t = (idx + 1) as f64;
            let expected = a * (1.0 - (a + r).powf(t)) / (1.0 - r - a);
            assert!((v[0] - expected).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn supercritical_trajectory_grows() {
        let spec = ModelSpec::single_se_nbd(1.2, 1.0, 2.0, 0.5).unwrap(); // S = 1.2
        let traj = impact_trajectory(&spec, 0, 100).unwrap();
        assert!(traj[99][0] / traj[49][0] > 1.0);
        // And the infinite-horizon impact refuses to evaluate.
        assert!(matches!(
            impact_infinite(&spec, 0),
            Err(Error::Nonstationary { .. })
        ));
    }

    #[test]
    fn ranking_orders_sources() {
        // Only line 0 causes downstream events, so it ranks first.
        let spec = ModelSpec::from_reproduction(
            Family::MdHawkes,
            vec![1.0, 1.0],
            vec![Shape::Infinite, Shape::Infinite],
            vec![vec![0.0, 0.0], vec![0.5, 0.0]],
            vec![0.0, 0.0],
        )
        .unwrap();
        let impact = impact_analysis(&spec, None).unwrap();
        let ranked = rank_sectors(&impact);
        assert_eq!(ranked[0].0, 0);
        assert!((ranked[0].1 - 0.5).abs() < 1e-12);
        assert_eq!(ranked[1], (1, 0.0));
    }

    #[test]
    fn ranking_is_stable_under_ties() {
        let spec = ModelSpec::nbd(vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let impact = impact_analysis(&spec, None).unwrap();
        let ranked = rank_sectors(&impact);
        assert_eq!(
            ranked.iter().map(|r| r.0).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn export_network_edges() {
        let z = InteractionMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert!(export_network(&z, &names(1), 0.0).unwrap().is_empty());

        let d = InteractionMatrix::from_rows(&[vec![0.5]]).unwrap();
        let edges = export_network(&d, &names(1), 0.0).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].source, "s0");
        assert_eq!(edges[0].target, "s0");
        assert!((edges[0].weight - 0.5).abs() < 1e-15);

        let s = InteractionMatrix::from_rows(&[vec![0.0, 0.1], vec![0.3, 0.0]]).unwrap();
        let edges = export_network(&s, &names(2), 0.0).unwrap();
        assert_eq!(edges.len(), 2);
        // Source-major order: (source 0 -> target 1, 0.3), (source 1 -> target 0, 0.1).
        assert_eq!((edges[0].source.as_str(), edges[0].target.as_str()), ("s0", "s1"));
        assert!((edges[0].weight - 0.3).abs() < 1e-15);
        assert_eq!((edges[1].source.as_str(), edges[1].target.as_str()), ("s1", "s0"));
        assert!((edges[1].weight - 0.1).abs() < 1e-15);
    }
}
