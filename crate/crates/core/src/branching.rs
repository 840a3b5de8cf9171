//! Branching-process view of a single event cascade.
//!
//! With a one-period kernel (`r = 0`), the descendants of one event form a
//! Galton-Watson tree whose offspring law is `NBD(K0/L0, M0/K0)` for
//! negative-binomial lines and `Poisson(M0/L0)` for Poisson lines; both have
//! offspring mean `M0/L0`. Extinction probabilities come from the smallest
//! fixed point of the probability generating function, and the mean total
//! progeny reproduces the single-line impact closed form.

use crate::error::{Error, Result};
use crate::model::{ModelSpec, Shape};
use crate::process::sample_count;
use crate::rng::substream;

/// Offspring distribution of one event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffspringLaw {
    /// Mean `mean` children per event, zero-variance intensity.
    Poisson { mean: f64 },
    /// Negative binomial with the given shape and scale; mean `shape * scale`.
    Nbd { shape: f64, scale: f64 },
}

impl OffspringLaw {
    pub fn poisson(mean: f64) -> Result<Self> {
        if !mean.is_finite() || mean <= 0.0 {
            return Err(Error::Domain(format!(
                "offspring mean must be positive, got {mean}"
            )));
        }
        Ok(OffspringLaw::Poisson { mean })
    }

    pub fn nbd(shape: f64, scale: f64) -> Result<Self> {
        if !shape.is_finite() || shape <= 0.0 {
            return Err(Error::Domain(format!(
                "offspring shape must be positive, got {shape}"
            )));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Domain(format!(
                "offspring scale must be positive, got {scale}"
            )));
        }
        Ok(OffspringLaw::Nbd { shape, scale })
    }

    /// Offspring law of line `line` in a one-period-kernel model (`r = 0`).
    ///
    /// `NBD(K0/L0, M0/K0)` or `Poisson(M0/L0)`; the shape/scale split is
    /// fixed by requiring the mean to equal `M0/L0`.
    pub fn from_line(spec: &ModelSpec, line: usize) -> Result<Self> {
        let dim = spec.dimension();
        if line >= dim {
            return Err(Error::Domain(format!(
                "line index {line} out of range for dimension {dim}"
            )));
        }
        if spec.decay()[line] != 0.0 {
            return Err(Error::Domain(
                "branching decomposition needs a one-period kernel (decay = 0)".into(),
            ));
        }
        let l0 = spec.interaction_scale()[line][line];
        let m0 = spec.baseline_mean()[line];
        match spec.dispersion_shape()[line] {
            Shape::Infinite => Self::poisson(m0 / l0),
            Shape::Finite(k0) => Self::nbd(k0 / l0, m0 / k0),
        }
    }

    /// Mean number of children per event.
    pub fn mean(&self) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => mean,
            OffspringLaw::Nbd { shape, scale } => shape * scale,
        }
    }

    /// Probability generating function `f(x) = E[x^N]` on `[0, 1]`.
    pub fn pgf(&self, x: f64) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => (mean * (x - 1.0)).exp(),
            OffspringLaw::Nbd { shape, scale } => (1.0 + scale * (1.0 - x)).powf(-shape),
        }
    }

    /// Second derivative of the pgf at one, `E[N(N-1)]`.
    pub fn pgf_second_derivative_at_one(&self) -> f64 {
        match *self {
            OffspringLaw::Poisson { mean } => mean * mean,
            OffspringLaw::Nbd { shape, scale } => shape * (shape + 1.0) * scale * scale,
        }
    }

    /// Same family rescaled to a new mean (NBD keeps its shape).
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        match *self {
            OffspringLaw::Poisson { .. } => Self::poisson(mean),
            OffspringLaw::Nbd { shape, .. } => Self::nbd(shape, mean / shape),
        }
    }

    fn sampling_shape(&self) -> Shape {
        match *self {
            OffspringLaw::Poisson { .. } => Shape::Infinite,
            OffspringLaw::Nbd { shape, .. } => Shape::Finite(shape),
        }
    }
}

/// Probability that the cascade started by one event dies out.
///
/// Returns exactly one when the mean is subcritical or critical. Otherwise
/// iterates `x <- f(x)` from zero; `f` is monotone on `[0, 1]`, so the
/// iteration increases to the smallest fixed point. Stops at `|dx| < 1e-12`.
pub fn extinction_probability(law: &OffspringLaw) -> f64 {
    if law.mean() <= 1.0 {
        return 1.0;
    }
    let mut x = 0.0f64;
    // Near-critical fixed points converge slowly; the cap is generous and
    // each step is one exp/powf.
    for _ in 0..20_000_000usize {
        let next = law.pgf(x);
        let delta = (next - x).abs();
        x = next;
        if delta < 1e-12 {
            break;
        }
    }
    x
}

/// Survival probabilities `1 - extinction` with the law rescaled to mean
/// `1 + eps` for each entry of `epsilons`.
///
/// Near criticality the survival scales like `2 eps / f''(1)` (critical
/// exponent one).
pub fn survival_curve(law: &OffspringLaw, epsilons: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::Domain(format!(
                "survival curve epsilon must be >= 0, got {eps}"
            )));
        }
        let scaled = law.with_mean(1.0 + eps)?;
        out.push(1.0 - extinction_probability(&scaled));
    }
    Ok(out)
}

/// Mean total progeny of one event (the event itself excluded):
/// `mean / (1 - mean)` for subcritical laws.
pub fn total_progeny_mean(law: &OffspringLaw) -> Result<f64> {
    let mean = law.mean();
    if mean >= 1.0 {
        return Err(Error::Supercritical { mean });
    }
    Ok(mean / (1.0 - mean))
}

/// Generation caps for tree simulation.
const MAX_GENERATIONS: usize = 100_000;
/// Populations at or above this are declared surviving: the conditional
/// extinction probability `eps^pop` is zero to double precision for any
/// meaningfully supercritical law.
const SURVIVAL_POPULATION: u64 = 1_000_000;

/// Draw the next generation size given the current one.
///
/// Offspring counts are iid per individual and both families are closed
/// under convolution (Poisson means add; NBD shapes add at fixed scale), so
/// one draw covers the whole generation.
fn next_generation<R: rand::Rng>(rng: &mut R, law: &OffspringLaw, population: u64) -> Result<u64> {
    let mean = law.mean() * population as f64;
    let shape = match law.sampling_shape() {
        Shape::Infinite => Shape::Infinite,
        Shape::Finite(k) => Shape::Finite(k * population as f64),
    };
    sample_count(rng, mean, shape)
}

/// Fraction of `trees` that go extinct, by direct tree simulation.
pub fn simulate_extinction_fraction(law: &OffspringLaw, trees: usize, seed: u64) -> Result<f64> {
    let mut extinct = 0usize;
    for tree in 0..trees {
        let mut rng = substream(seed, tree as u64, 0);
        let mut population = 1u64;
        for _ in 0..MAX_GENERATIONS {
            if population == 0 || population >= SURVIVAL_POPULATION {
                break;
            }
            population = next_generation(&mut rng, law, population)?;
        }
        if population == 0 {
            extinct += 1;
        }
    }
    Ok(extinct as f64 / trees as f64)
}

/// Sample mean and standard error of the total progeny over `trees`
/// simulated cascades (subcritical laws only).
pub fn simulate_total_progeny(law: &OffspringLaw, trees: usize, seed: u64) -> Result<(f64, f64)> {
    if law.mean() >= 1.0 {
        return Err(Error::Supercritical { mean: law.mean() });
    }
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for tree in 0..trees {
        let mut rng = substream(seed, tree as u64, 1);
        let mut population = 1u64;
        let mut total = 0u64;
        for _ in 0..MAX_GENERATIONS {
            if population == 0 {
                break;
            }
            population = next_generation(&mut rng, law, population)?;
            total += population;
        }
        let x = total as f64;
        sum += x;
        sum_sq += x * x;
    }
    let n = trees as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}
