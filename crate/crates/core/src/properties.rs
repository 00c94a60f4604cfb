//! Numerical checks of the eigenfunction properties: orthogonality under
//! the stationary law and the backward-generator eigenrelation.

use crate::processes::{ProcessKind, ProcessSpec};

/// Points spread over the bulk of the stationary law.
pub fn bulk_points(spec: &ProcessSpec, count: usize) -> Vec<f64> {
    let sd = spec.stationary_variance().sqrt();
    let (lower, upper) = spec.domain();
    (0..count)
        .map(|k| {
            let frac = (k as f64 + 0.5) / count as f64;
            match spec.kind {
                ProcessKind::Jacobi { .. } => lower + (upper - lower) * frac,
                ProcessKind::SquareRoot { .. } => lower + (spec.mu - lower + 3.0 * sd) * frac,
                ProcessKind::OrnsteinUhlenbeck { .. } => spec.mu + 3.0 * sd * (2.0 * frac - 1.0),
            }
        })
        .collect()
}

/// Largest normalized off-diagonal Gram entry
/// `|⟨f̄_i, f̄_j⟩| / √(⟨f̄_i, f̄_i⟩⟨f̄_j, f̄_j⟩)` for `i ≠ j ≤ n_max`; infinite
/// if a norm is not positive.
pub fn orthogonality_defect(spec: &ProcessSpec, n_max: usize) -> f64 {
    let mut gram = vec![vec![0.0; n_max + 1]; n_max + 1];
    for i in 0..=n_max {
        for j in 0..=i {
            let value = spec.stationary_expectation(|x| {
                let f = spec.eigenfunctions(n_max, x).expect("validated spec");
                f[i] * f[j]
            });
            gram[i][j] = value;
            gram[j][i] = value;
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..=n_max {
        if !(gram[i][i] > 0.0) {
            return f64::INFINITY;
        }
        for j in 0..i {
            worst = worst.max(gram[i][j].abs() / (gram[i][i] * gram[j][j]).sqrt());
        }
    }
    worst
}

/// Largest residual of `A f̄_n' + ½B f̄_n'' = −λ_n f̄_n` over `n ≤ n_max`
/// and the bulk points, relative to the size of the individual terms.
/// Derivatives are Richardson-extrapolated central differences.
pub fn eigenrelation_defect(spec: &ProcessSpec, n_max: usize, points: usize) -> f64 {
    let grid = bulk_points(spec, points);
    let (lower, upper) = spec.domain();
    let mut worst: f64 = 0.0;
    for n in 0..=n_max {
        let f = |x: f64| {
            spec.eigenfunction_backward(n, x)
                .expect("point inside the range")
        };
        // typical size of λ_n f̄_n, for points near a root
        let typical = grid
            .iter()
            .map(|&x| (spec.lambda(n) * f(x)).abs())
            .fold(0.0, f64::max);
        for &omega in &grid {
            let room = (omega - lower).min(upper - omega);
            let h = 1e-3 * spec.stationary_variance().sqrt().min(room);
            let f0 = f(omega);
            let diffs = |h: f64| {
                let (fp, fm) = (f(omega + h), f(omega - h));
                ((fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h))
            };
            let (coarse, fine) = (diffs(h), diffs(0.5 * h));
            let d1 = (4.0 * fine.0 - coarse.0) / 3.0;
            let d2 = (4.0 * fine.1 - coarse.1) / 3.0;
            let (drift, diffusion) = spec.sde_coefficients(omega);
            let lhs = drift * d1 + 0.5 * diffusion * d2;
            let rhs = -spec.lambda(n) * f0;
            let scale = (drift * d1).abs() + (0.5 * diffusion * d2).abs() + 1e-3 * typical + 1e-12;
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    worst
}
