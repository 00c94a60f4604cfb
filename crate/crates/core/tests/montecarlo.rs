use dheom_core::hierarchy::SolverConfig;
use dheom_core::montecarlo::{self, sde_path, sde_step, trajectory_rng, BoundaryMode, McConfig};
use dheom_core::processes::ProcessSpec;
use dheom_core::quantum::{
    self, evolve_exact, max_abs, pauli_x, pauli_z, ComplexMatrix, DensityMatrix,
};
use dheom_core::validation::random_problem;
use num_complex::Complex64;
use rayon::prelude::*;

fn fig1_processes() -> [ProcessSpec; 3] {
    [
        ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3),
        ProcessSpec::square_root(1.0, 1.5, 0.0, 1.0),
        ProcessSpec::jacobi(1.0, 1.5, 0.125, 8.0, 1.0),
    ]
}

fn plus() -> DensityMatrix {
    DensityMatrix::pure(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap()
}

fn mc(solver: SolverConfig, trajectories: usize, seed: u64) -> McConfig {
    let mut config = McConfig::new(solver, seed);
    config.trajectories = trajectories;
    config
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut gap) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        gap = gap.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    gap
}

#[test]
fn jacobi_reflection_never_leaves_the_interval() {
    let spec = ProcessSpec::jacobi(1.0, 1.5, 0.125, 8.0, 1.0);
    let mut rng = trajectory_rng(3, 0);
    let mut omega = 0.2;
    for _ in 0..1_000_000 {
        omega = sde_step(&spec, omega, 1e-4, BoundaryMode::Reflect, &mut rng);
        assert!((0.125..=8.0).contains(&omega), "{omega}");
    }
}

#[test]
fn square_root_paths_stay_nonnegative_in_both_modes() {
    let spec = ProcessSpec::square_root(0.3, 1.5, 0.0, 1.0);
    for mode in [BoundaryMode::Reflect, BoundaryMode::Clamp] {
        let mut rng = trajectory_rng(5, 1);
        let mut omega = 0.01;
        for _ in 0..200_000 {
            omega = sde_step(&spec, omega, 1e-3, mode, &mut rng);
            assert!(omega >= 0.0);
        }
    }
}

#[test]
fn stationary_law_is_preserved() {
    for spec in fig1_processes() {
        let t_end = 5.0 / spec.gamma;
        let count = 10_000u64;
        let evolved: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = trajectory_rng(17, k);
                let start = spec.sample_stationary(&mut rng);
                *sde_path(
                    &spec,
                    start,
                    &[0.0, t_end],
                    1e-4,
                    BoundaryMode::Reflect,
                    &mut rng,
                )
                .last()
                .unwrap()
            })
            .collect();
        let mut rng = trajectory_rng(18, 0);
        let fresh: Vec<f64> = (0..count)
            .map(|_| spec.sample_stationary(&mut rng))
            .collect();
        let gap = ks_statistic(evolved, fresh);
        assert!(gap <= 0.05, "{:?}: quantile gap {gap}", spec.kind);
    }
}

#[test]
fn mean_reverts_at_rate_gamma() {
    for spec in fig1_processes() {
        let start = spec.mu + 2.0 * spec.stationary_variance().sqrt();
        let grid: Vec<f64> = (0..7).map(|k| 0.25 * k as f64 / spec.gamma).collect();
        let count = 10_000u64;
        let paths: Vec<Vec<f64>> = (0..count)
            .into_par_iter()
            .map(|k| {
                let mut rng = trajectory_rng(29, k);
                sde_path(&spec, start, &grid, 1e-4, BoundaryMode::Reflect, &mut rng)
            })
            .collect();
        let logs: Vec<(f64, f64)> = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mean = paths.iter().map(|p| p[i]).sum::<f64>() / count as f64;
                (t, (mean - spec.mu).ln())
            })
            .collect();
        let n = logs.len() as f64;
        let (sx, sy) = logs
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / n, sy / n);
        let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / logs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        assert!(
            (slope + spec.gamma).abs() <= 0.1 * spec.gamma,
            "{:?}: slope {slope}",
            spec.kind
        );
    }
}

#[test]
fn decoupled_trajectories_are_exact_and_error_free() {
    for spec in fig1_processes() {
        let h0 = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.3, 0.0),
                Complex64::new(0.2, -0.4),
                Complex64::new(0.2, 0.4),
                Complex64::new(-0.7, 0.0),
            ],
        );
        let solver = SolverConfig::new(
            h0.clone(),
            ComplexMatrix::zeros(2, 2),
            spec,
            plus(),
            vec![0.0, 0.5, 1.0],
        );
        let config = mc(solver, 500, 1);
        let result = montecarlo::average(&config).unwrap();
        for (t, (mean, se)) in result
            .times
            .iter()
            .zip(result.mean.iter().zip(&result.standard_error))
        {
            let exact = evolve_exact(&h0, &plus(), *t).unwrap();
            assert!(max_abs(&(mean.matrix() - exact.matrix())) < 1e-12);
            assert!(se.iter().all(|z| z.re == 0.0 && z.im == 0.0), "{se}");
        }
        let single = montecarlo::run_trajectory(&config, 7).unwrap();
        let exact = evolve_exact(&h0, &plus(), 1.0).unwrap();
        assert!(max_abs(&(single[2].clone() - exact.matrix())) < 1e-12);
    }
}

#[test]
fn silent_noise_is_the_mean_hamiltonian() {
    let spec = ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 1e-14);
    let v = pauli_x() * Complex64::from(0.5);
    let h0 = pauli_z() * Complex64::from(0.8);
    let solver = SolverConfig::new(
        h0.clone(),
        v.clone(),
        spec,
        DensityMatrix::basis(2, 0),
        vec![0.0, 1.0],
    );
    let config = mc(solver, 4, 2);
    let exact = evolve_exact(&(h0 + v), &DensityMatrix::basis(2, 0), 1.0).unwrap();
    for k in 0..4 {
        let states = montecarlo::run_trajectory(&config, k).unwrap();
        assert!(max_abs(&(states[1].clone() - exact.matrix())) < 1e-6);
    }
}

#[test]
fn trajectories_are_reproducible_and_pure() {
    let spec = ProcessSpec::jacobi(1.0, 1.5, 0.125, 8.0, 1.0);
    let solver = random_problem(spec, 4);
    let config = mc(solver, 2, 99);
    let a = montecarlo::run_trajectory(&config, 12).unwrap();
    let b = montecarlo::run_trajectory(&config, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, montecarlo::run_trajectory(&config, 13).unwrap());
    for rho in &a {
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-10);
        assert!(quantum::hermiticity_error(rho) <= 1e-10);
        // purity tr ρ² = 1 for a unitarily evolved pure state
        assert!(((rho * rho).trace().re - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn averages_do_not_depend_on_thread_count() {
    let solver = random_problem(ProcessSpec::square_root(1.0, 1.5, 0.0, 1.0), 8);
    let config = mc(solver, 64, 5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| montecarlo::average(&config).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.mean, four.mean);
    assert_eq!(one.standard_error, four.standard_error);
}

#[test]
fn ou_dephasing_matches_the_kubo_formula() {
    let spec = ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3);
    let solver = SolverConfig::new(
        ComplexMatrix::zeros(2, 2),
        pauli_z(),
        spec,
        plus(),
        vec![0.0, 1.0],
    );
    let result = montecarlo::average(&mc(solver, 2000, 11)).unwrap();
    let (gamma, mu, s2) = (1.5f64, 1.0, 0.3 / 3.0);
    let t = 1.0;
    let kubo = 0.5
        * (Complex64::new(0.0, -2.0 * mu * t)
            - Complex64::from(4.0 * s2 * (gamma * t - 1.0 + (-gamma * t).exp()) / (gamma * gamma)))
        .exp();
    let mean = result.mean[1].matrix()[(0, 1)];
    let se = result.standard_error[1][(0, 1)];
    assert!(
        (mean.re - kubo.re).abs() <= 3.0 * se.re,
        "{mean} vs {kubo} (se {se})"
    );
    assert!(
        (mean.im - kubo.im).abs() <= 3.0 * se.im,
        "{mean} vs {kubo} (se {se})"
    );
}

#[test]
fn standard_error_shrinks_as_inverse_root_of_samples() {
    let solver = {
        let mut s = random_problem(ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3), 21);
        s.t_grid = (0..9).map(|k| 0.25 * k as f64).collect();
        s
    };
    let median = |m: usize| {
        let result = montecarlo::average(&mc(solver.clone(), m, 3)).unwrap();
        let mut values: Vec<f64> = result.standard_error[1..]
            .iter()
            .flat_map(|se| se.iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .filter(|v| *v > 0.0)
            .collect();
        values.sort_by(f64::total_cmp);
        values[values.len() / 2]
    };
    let ratio = median(500) / median(1000);
    assert!((ratio / 2f64.sqrt() - 1.0).abs() <= 0.15, "ratio {ratio}");
}

#[test]
fn rejects_invalid_sampling_settings() {
    let solver = random_problem(ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3), 1);
    let mut config = mc(solver, 1, 0);
    assert_eq!(
        montecarlo::average(&config).unwrap_err().code(),
        "TooFewTrajectories"
    );
    config.trajectories = 10;
    config.dt_sde = 1e-2;
    assert_eq!(
        montecarlo::average(&config).unwrap_err().code(),
        "InvalidSdeStep"
    );
}

#[test]
fn halving_the_sde_step_stays_within_sampling_error() {
    for spec in fig1_processes() {
        let solver = random_problem(spec, 31);
        let coarse = mc(solver.clone(), 1000, 6);
        let mut fine = coarse.clone();
        fine.dt_sde = 0.5 * coarse.dt_sde;
        let (a, b) = (
            montecarlo::average(&coarse).unwrap(),
            montecarlo::average(&fine).unwrap(),
        );
        let (mean_a, mean_b) = (
            a.mean.last().unwrap().matrix(),
            b.mean.last().unwrap().matrix(),
        );
        let (se_a, se_b) = (
            a.standard_error.last().unwrap(),
            b.standard_error.last().unwrap(),
        );
        for k in 0..4 {
            let diff = mean_a[k] - mean_b[k];
            // independent samples: the difference has error √(se_a² + se_b²)
            let re = (se_a[k].re.powi(2) + se_b[k].re.powi(2)).sqrt();
            let im = (se_a[k].im.powi(2) + se_b[k].im.powi(2)).sqrt();
            assert!(
                diff.re.abs() <= 3.0 * re + 1e-12,
                "{:?}: {diff} vs {re}",
                spec.kind
            );
            assert!(
                diff.im.abs() <= 3.0 * im + 1e-12,
                "{:?}: {diff} vs {im}",
                spec.kind
            );
        }
    }
}
