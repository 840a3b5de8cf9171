//! Probability mass functions and forward simulation.
//!
//! Negative-binomial counts are sampled through the mixture that defines
//! them: an intensity `lambda ~ Gamma(K_t, M0/K0)` followed by
//! `count ~ Poisson(lambda)`. Poisson lines skip the gamma stage (their
//! intensity is degenerate at `M_t`). The mixture form is the normative
//! sampler; distribution tests hold it to the closed-form pmf.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{EventSeries, ModelSpec, ProcessState, Shape};
use crate::network::{build_s_matrix, spectral_radius};
use crate::rng::substream;

/// Intensities beyond this are treated as a runaway explosion rather than
/// sampled; far past any stationary regime and near the resolution limit of
/// Poisson sampling in f64.
const MAX_INTENSITY: f64 = 1e12;

/// `ln Gamma(shape + k) - ln Gamma(shape)`, computed as a product for small
/// `k` to avoid the catastrophic cancellation of two large `ln Gamma` values
/// when `shape` is huge (near-Poisson lines).
pub(crate) fn ln_rising(shape: f64, k: u64) -> f64 {
    if k <= 64 {
        let mut acc = 0.0;
        for m in 0..k {
            acc += (shape + m as f64).ln();
        }
        acc
    } else {
        ln_gamma(shape + k as f64) - ln_gamma(shape)
    }
}

fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Log of the negative binomial pmf with shape `K` and scale `M/K` (success
/// parameter `M/(K+M)`):
///
/// ```text
/// P(k) = Gamma(K+k) / (k! Gamma(K)) * (1/(1+scale))^K * (scale/(1+scale))^k
/// ```
///
/// Mean `K*scale`, variance `K*scale*(1+scale)`.
pub fn ln_nbd_pmf(k: u64, shape: f64, scale: f64) -> Result<f64> {
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::Domain(format!(
            "nbd shape must be positive, got {shape}"
        )));
    }
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Domain(format!(
            "nbd scale must be positive, got {scale}"
        )));
    }
    // ln(1/(1+s)) = -ln_1p(s) and ln(s/(1+s)) = ln(s) - ln_1p(s); ln_1p keeps
    // the huge-shape/tiny-scale (near-Poisson) corner exact.
    Ok(ln_rising(shape, k) - ln_factorial(k) - shape * scale.ln_1p()
        + k as f64 * (scale.ln() - scale.ln_1p()))
}

/// Negative binomial pmf; see [`ln_nbd_pmf`].
pub fn nbd_pmf(k: u64, shape: f64, scale: f64) -> Result<f64> {
    Ok(ln_nbd_pmf(k, shape, scale)?.exp())
}

/// Log of the Poisson pmf. A zero mean is the degenerate law at zero, so
/// impossible events yield `-inf` rather than an error.
pub fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k)
}

/// Poisson pmf; see [`ln_poisson_pmf`].
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    ln_poisson_pmf(k, mean).exp()
}

fn sample_poisson<R: Rng>(rng: &mut R, mean: f64) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    if mean > MAX_INTENSITY {
        return Err(Error::Domain(format!(
            "intensity {mean:.3e} exceeds the sampling limit {MAX_INTENSITY:.0e}; the process has exploded"
        )));
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Domain(format!("poisson sampling with mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Draw one count for a line with conditional mean `mean` and shape `shape`.
pub(crate) fn sample_count<R: Rng>(rng: &mut R, mean: f64, shape: Shape) -> Result<u64> {
    match shape {
        Shape::Infinite => sample_poisson(rng, mean),
        Shape::Finite(k) => {
            if mean <= 0.0 {
                return Ok(0);
            }
            if mean > MAX_INTENSITY {
                return Err(Error::Domain(format!(
                    "intensity {mean:.3e} exceeds the sampling limit {MAX_INTENSITY:.0e}; the process has exploded"
                )));
            }
            let gamma = Gamma::new(k, mean / k)
                .map_err(|e| Error::Domain(format!("gamma sampling with shape {k}: {e}")))?;
            let lambda: f64 = gamma.sample(rng);
            sample_poisson(rng, lambda)
        }
    }
}

/// Draw one period of counts for every line and return the advanced state.
///
/// All lines draw from the same `rng` in line order; counts across lines in
/// one period are conditionally independent given the history.
pub fn step<R: Rng>(
    state: &ProcessState,
    spec: &ModelSpec,
    rng: &mut R,
) -> Result<(Vec<u64>, ProcessState)> {
    if state.dimension() != spec.dimension() {
        return Err(Error::Dimension {
            context: "state",
            expected: spec.dimension(),
            got: state.dimension(),
        });
    }
    let dim = spec.dimension();
    let mut counts = Vec::with_capacity(dim);
    for i in 0..dim {
        let mean = state.mean(spec, i);
        let shape = state.shape(spec, i);
        counts.push(sample_count(rng, mean, shape)?);
    }
    let next = state.advance(spec, &counts)?;
    Ok((counts, next))
}

/// Conditional one-step mean and variance per line:
/// `M_t` and `M_t (1 + M0/K0)` for negative-binomial lines, `M_t` for
/// Poisson lines.
pub fn conditional_moments(state: &ProcessState, spec: &ModelSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if state.dimension() != spec.dimension() {
        return Err(Error::Dimension {
            context: "state",
            expected: spec.dimension(),
            got: state.dimension(),
        });
    }
    let mut means = Vec::with_capacity(spec.dimension());
    let mut variances = Vec::with_capacity(spec.dimension());
    for i in 0..spec.dimension() {
        let m = state.mean(spec, i);
        means.push(m);
        variances.push(m * (1.0 + spec.overdispersion(i)));
    }
    Ok((means, variances))
}

/// Seeded forward simulator with one deterministic substream per
/// `(line, period)` coordinate.
///
/// Coordinate-keyed streams make paired runs (for example with and without an
/// injected shock) share common random numbers: a count change at one period
/// cannot shift the randomness consumed at any other coordinate.
#[derive(Debug, Clone)]
pub struct Simulator {
    spec: ModelSpec,
    seed: u64,
    state: ProcessState,
}

impl Simulator {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        let state = ProcessState::initial(&spec);
        Self { spec, seed, state }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn state(&self) -> &ProcessState {
        &self.state
    }

    /// Add `count` phantom events on `line` to the current period's history.
    pub fn inject(&mut self, line: usize, count: u64) -> Result<()> {
        self.state = self.state.inject(&self.spec, line, count)?;
        Ok(())
    }

    /// Draw the next period of counts.
    pub fn step(&mut self) -> Result<Vec<u64>> {
        let dim = self.spec.dimension();
        let t = self.state.t() as u64;
        let mut counts = Vec::with_capacity(dim);
        for i in 0..dim {
            let mean = self.state.mean(&self.spec, i);
            let shape = self.state.shape(&self.spec, i);
            let mut rng = substream(self.seed, i as u64, t);
            counts.push(sample_count(&mut rng, mean, shape)?);
        }
        self.state = self.state.advance(&self.spec, &counts)?;
        Ok(counts)
    }

    /// Run `horizon` periods and collect the rows.
    pub fn run(&mut self, horizon: usize) -> Result<Vec<Vec<u64>>> {
        let mut rows = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            rows.push(self.step()?);
        }
        Ok(rows)
    }
}

/// Simulate `horizon` periods; rejects nonstationary specs.
///
/// Deterministic given `(spec, horizon, seed)`.
pub fn simulate(spec: &ModelSpec, horizon: usize, seed: u64) -> Result<EventSeries> {
    simulate_with(spec, horizon, seed, false)
}

/// Simulate with an explicit opt-in for nonstationary regimes.
pub fn simulate_with(
    spec: &ModelSpec,
    horizon: usize,
    seed: u64,
    allow_nonstationary: bool,
) -> Result<EventSeries> {
    if !allow_nonstationary {
        let rho = spectral_radius(&build_s_matrix(spec)?)?;
        if rho >= 1.0 {
            return Err(Error::Nonstationary { rho });
        }
    }
    let mut sim = Simulator::new(spec.clone(), seed);
    let rows = sim.run(horizon)?;
    EventSeries::new(rows, spec.dimension(), None, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Family;

    #[test]
    fn nbd_pmf_geometric_values() {
        // shape 1, scale 1 is geometric with success 1/2.
        assert!((nbd_pmf(0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((nbd_pmf(2, 1.0, 1.0).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn nbd_pmf_matches_gamma_poisson_mixture() {
        // Independent oracle: Simpson quadrature of the mixture integral
        // P(k) = int Poisson(k | lam) Gamma(lam | shape, scale) dlam.
        let (k, shape, scale) = (3u64, 2.5, 0.8);
        let integrand = |lam: f64| -> f64 {
            if lam <= 0.0 {
                return 0.0;
            }
            let ln_pois = k as f64 * lam.ln() - lam - ln_gamma(k as f64 + 1.0);
            let ln_gam = (shape - 1.0) * lam.ln() - lam / scale
                - ln_gamma(shape)
                - shape * scale.ln();
            (ln_pois + ln_gam).exp()
        };
        let (lo, hi, n) = (0.0, 80.0, 200_000usize);
        let h = (hi - lo) / n as f64;
        let mut acc = integrand(lo) + integrand(hi);
        for m in 1..n {
            let x = lo + m as f64 * h;
            acc += if m % 2 == 1 { 4.0 } else { 2.0 } * integrand(x);
        }
        let oracle = acc * h / 3.0;
        let frozen = 0.132_538_026_406_023_2;
        assert!((oracle - frozen).abs() < 1e-9, "oracle={oracle}");
        assert!((nbd_pmf(k, shape, scale).unwrap() - frozen).abs() < 1e-10);
    }

    #[test]
    fn nbd_pmf_normalizes_with_stated_moments() {
        let (shape, scale) = (2.5, 0.8);
        let mut total = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        for k in 0..400 {
            let p = nbd_pmf(k, shape, scale).unwrap();
            total += p;
            mean += k as f64 * p;
            second += (k as f64) * (k as f64) * p;
        }
        assert!((total - 1.0).abs() < 1e-12);
        assert!((mean - shape * scale).abs() < 1e-10);
        let var = second - mean * mean;
        assert!((var - shape * scale * (1.0 + scale)).abs() < 1e-9);
    }

    #[test]
    fn nbd_pmf_rejects_bad_parameters() {
        assert!(nbd_pmf(0, 0.0, 1.0).is_err());
        assert!(nbd_pmf(0, -1.0, 1.0).is_err());
        assert!(nbd_pmf(0, 1.0, 0.0).is_err());
        assert!(nbd_pmf(0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn nbd_pmf_approaches_poisson_for_huge_shape() {
        // K = 1e9 at mean 2: pointwise within 1e-6 of the Poisson pmf.
        let (k0, mean) = (1e9, 2.0);
        let scale = mean / k0;
        let mut max_diff: f64 = 0.0;
        for k in 0..=30 {
            let diff = (nbd_pmf(k, k0, scale).unwrap() - poisson_pmf(k, mean)).abs();
            max_diff = max_diff.max(diff);
        }
        assert!(max_diff < 1e-6, "max diff {max_diff}");
    }

    #[test]
    fn poisson_pmf_zero_mean_is_degenerate() {
        assert_eq!(poisson_pmf(0, 0.0), 1.0);
        assert_eq!(poisson_pmf(3, 0.0), 0.0);
        assert_eq!(ln_poisson_pmf(3, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn hawkes_line_with_zero_baseline_stays_silent() {
        let spec = ModelSpec::single_hawkes(0.0, 4.0, 0.5).unwrap();
        let series = simulate(&spec, 100, 9).unwrap();
        assert!(series.column(0).all(|x| x == 0));
    }

    #[test]
    fn simulate_horizon_zero_is_empty() {
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        let series = simulate(&spec, 0, 1).unwrap();
        assert!(series.is_empty());
        assert_eq!(series.dim(), 1);
    }

    #[test]
    fn simulate_is_deterministic_in_the_seed() {
        let spec = ModelSpec::single_se_nbd(1.0, 2.0, 4.0, 0.5).unwrap();
        let a = simulate(&spec, 200, 42).unwrap();
        let b = simulate(&spec, 200, 42).unwrap();
        let c = simulate(&spec, 200, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_rejects_nonstationary_without_flag() {
        // S = (M0/L0)/(1-r) = 1.2.
        let spec = ModelSpec::single_se_nbd(1.2, 1.0, 2.0, 0.5).unwrap();
        match simulate(&spec, 10, 1) {
            Err(Error::Nonstationary { rho }) => assert!((rho - 1.2).abs() < 1e-9),
            other => panic!("expected nonstationary error, got {other:?}"),
        }
        assert!(simulate_with(&spec, 10, 1, true).is_ok());
    }

    #[test]
    fn conditional_moments_match_family_laws() {
        // Poisson line at mean 3: variance 3.
        let spec = ModelSpec::single_hawkes(3.0, f64::INFINITY, 0.5).unwrap();
        let state = ProcessState::initial(&spec);
        let (m, v) = conditional_moments(&state, &spec).unwrap();
        assert_eq!((m[0], v[0]), (3.0, 3.0));

        // NBD line with M/K = 1 at mean 3: variance 6.
        let spec = ModelSpec::single_se_nbd(3.0, 3.0, f64::INFINITY, 0.0).unwrap();
        let state = ProcessState::initial(&spec);
        let (m, v) = conditional_moments(&state, &spec).unwrap();
        assert_eq!((m[0], v[0]), (3.0, 6.0));

        // Near-Poisson limit: variance within 1e-6 relative of the mean.
        let spec = ModelSpec::single_se_nbd(2.0, 1e9, f64::INFINITY, 0.0).unwrap();
        let state = ProcessState::initial(&spec);
        let (m, v) = conditional_moments(&state, &spec).unwrap();
        assert!((v[0] - m[0]).abs() / m[0] < 1e-6);
    }

    #[test]
    fn nbd_family_marginal_mean_matches() {
        // Without self-excitation, counts are iid NBD(K0, M0/K0) with mean M0.
        let spec = ModelSpec::nbd(vec![1.0], vec![1.0]).unwrap();
        let n = 1_000_000usize;
        let series = simulate(&spec, n, 7).unwrap();
        let sum: u64 = series.column(0).sum();
        let mean = sum as f64 / n as f64;
        // Var = M0 (1 + M0/K0) = 2, so a 3-sigma band around 1.0.
        let band = 3.0 * (2.0f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < band, "mean {mean} outside {band}");
    }

    #[test]
    fn hybrid_mixes_poisson_and_nbd_lines() {
        let spec = ModelSpec::new(
            Family::Hybrid,
            vec![1.0, 0.5],
            vec![Shape::Finite(0.8), Shape::Infinite],
            vec![vec![8.0, 10.0], vec![12.0, 9.0]],
            vec![0.4, 0.3],
        )
        .unwrap();
        let series = simulate(&spec, 500, 3).unwrap();
        assert_eq!(series.num_periods(), 500);
        assert_eq!(series.dim(), 2);
    }
}
