//! Bounded Nelder-Mead simplex minimization.
//!
//! Derivative-free local search over a box, used by the fitting code: the
//! likelihood involves gamma functions of the parameters, and a simplex
//! search is robust to the flat ridges that show up near parameter bounds.
//! Candidate points are projected onto the box by clamping.

/// Iteration and tolerance settings.
#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Cap on main-loop iterations.
    pub max_iterations: usize,
    /// Absolute convergence tolerance on the simplex value spread.
    pub f_tolerance: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 600,
            f_tolerance: 1e-8,
        }
    }
}

/// Result of one minimization.
#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Whether the value spread reached tolerance before the iteration cap.
    pub converged: bool,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Minimize `f` over the box `[lower, upper]` starting from `x0`.
///
/// NaN objective values are treated as `+inf`. The returned point always lies
/// inside the box.
pub fn minimize_bounded<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    options: &NelderMeadOptions,
) -> OptimOutcome {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], n: &mut usize| -> f64 {
        *n += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    // Initial simplex: the start plus one vertex per coordinate, stepped by a
    // fraction of the box width (flipped when the step would leave the box).
    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    let mut simplex = vec![start.clone()];
    for d in 0..dim {
        let mut p = start.clone();
        let step = 0.15 * (upper[d] - lower[d]);
        p[d] = if p[d] + step <= upper[d] {
            p[d] + step
        } else {
            p[d] - step
        };
        clamp(&mut p, lower, upper);
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evaluations)).collect();

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < options.max_iterations {
        iterations += 1;

        // Order vertices best..worst; ties resolve by index for determinism.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .partial_cmp(&values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = values[worst] - values[best];
        if spread.abs() < options.f_tolerance {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; dim];
        for &idx in order.iter().take(dim) {
            for (c, &v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v;
            }
        }
        for c in centroid.iter_mut() {
            *c /= dim as f64;
        }

        let blend = |from: &[f64], towards: &[f64], t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = from
                .iter()
                .zip(towards)
                .map(|(&a, &b)| a + t * (b - a))
                .collect();
            clamp(&mut p, lower, upper);
            p
        };

        // Reflection through the centroid.
        let reflected = blend(&simplex[worst], &centroid, 1.0 + ALPHA);
        let f_reflected = eval(&reflected, &mut evaluations);

        if f_reflected < values[best] {
            // Try to expand further along the same ray.
            let expanded = blend(&simplex[worst], &centroid, 1.0 + ALPHA * GAMMA);
            let f_expanded = eval(&expanded, &mut evaluations);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }

        // Contraction, outside or inside of the worst vertex.
        let (contracted, f_contracted) = if f_reflected < values[worst] {
            let p = blend(&simplex[worst], &centroid, 1.0 + ALPHA * RHO);
            let v = eval(&p, &mut evaluations);
            (p, v)
        } else {
            let p = blend(&simplex[worst], &centroid, RHO);
            let v = eval(&p, &mut evaluations);
            (p, v)
        };
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }

        // Shrink everything towards the best vertex.
        let anchor = simplex[best].clone();
        for &idx in order.iter().skip(1) {
            simplex[idx] = blend(&simplex[idx], &anchor, 1.0 - SIGMA);
            values[idx] = eval(&simplex[idx], &mut evaluations);
        }
    }

    let mut best_idx = 0;
    for idx in 1..=dim {
        if values[idx] < values[best_idx] {
            best_idx = idx;
        }
    }
    OptimOutcome {
        x: simplex[best_idx].clone(),
        f: values[best_idx],
        iterations,
        evaluations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic_bowl() {
        let target = [0.3, -0.7, 1.2];
        let f = |x: &[f64]| -> f64 {
            x.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let out = minimize_bounded(
            f,
            &[0.0, 0.0, 0.0],
            &[-2.0, -2.0, -2.0],
            &[2.0, 2.0, 2.0],
            &NelderMeadOptions {
                max_iterations: 2000,
                f_tolerance: 1e-12,
            },
        );
        assert!(out.converged);
        for (a, b) in out.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4, "{:?}", out.x);
        }
    }

    #[test]
    fn respects_bounds_when_the_minimum_is_outside() {
        let f = |x: &[f64]| (x[0] - 5.0) * (x[0] - 5.0);
        let out = minimize_bounded(
            f,
            &[0.5],
            &[0.0],
            &[1.0],
            &NelderMeadOptions::default(),
        );
        assert!(out.x[0] <= 1.0 && out.x[0] >= 0.0);
        assert!((out.x[0] - 1.0).abs() < 1e-6, "{}", out.x[0]);
    }

    #[test]
    fn rosenbrock_valley() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
        };
        let out = minimize_bounded(
            f,
            &[-1.2, 1.0],
            &[-5.0, -5.0],
            &[5.0, 5.0],
            &NelderMeadOptions {
                max_iterations: 5000,
                f_tolerance: 1e-12,
            },
        );
        assert!((out.x[0] - 1.0).abs() < 1e-3 && (out.x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn nan_objective_is_survivable() {
        let f = |x: &[f64]| {
            if x[0] < 0.1 {
                f64::NAN
            } else {
                (x[0] - 0.5) * (x[0] - 0.5)
            }
        };
        let out = minimize_bounded(
            f,
            &[0.9],
            &[0.0],
            &[1.0],
            &NelderMeadOptions {
                max_iterations: 2000,
                f_tolerance: 1e-14,
            },
        );
        assert!((out.x[0] - 0.5).abs() < 1e-5, "{}", out.x[0]);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |x: &[f64]| x[0].sin() * (37.0 * x[0]).cos();
        let out = minimize_bounded(
            f,
            &[2.0],
            &[0.0],
            &[10.0],
            &NelderMeadOptions {
                max_iterations: 2,
                f_tolerance: 1e-16,
            },
        );
        assert!(!out.converged);
        assert_eq!(out.iterations, 2);
    }
}
