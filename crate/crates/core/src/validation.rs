//! Cross-check of the hierarchy against Monte Carlo on seeded random
//! two-level problems.

use std::time::Duration;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hierarchy::{self, DepthMode, Diagnostics, SolverConfig};
use crate::montecarlo::{self, McConfig, McError};
use crate::processes::ProcessSpec;
use crate::quantum::{max_abs, ComplexMatrix, DensityMatrix};
use crate::rydberg::NoiseKind;

/// Absolute floor of the elementwise allowance `max(3·SE, floor)`.
pub const ALLOWANCE_FLOOR: f64 = 1e-2;
/// Standard errors allowed between the two methods.
pub const SE_MULTIPLIER: f64 = 3.0;
pub const DEFAULT_TRAJECTORIES: usize = 2000;

/// Random Hermitian `d×d` matrix with entries of magnitude at most `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, scale: f64, rng: &mut R) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    for r in 0..d {
        m[(r, r)] = Complex64::new(scale * rng.random_range(-1.0..1.0), 0.0);
        for c in r + 1..d {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                * (scale / 2f64.sqrt());
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    m
}

/// Random pure state in `d` dimensions.
pub fn random_pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    loop {
        let psi: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        if let Ok(rho) = DensityMatrix::pure(&psi) {
            return rho;
        }
    }
}

/// Two-level problem for `process` drawn from `seed`: `H₀` with entries up
/// to 1, `V` with entries up to 1/2, a random pure initial state and the
/// grid `{0, 2/γ}`.
pub fn random_problem(process: ProcessSpec, seed: u64) -> SolverConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = random_hermitian(2, 1.0, &mut rng);
    let v = random_hermitian(2, 0.5, &mut rng);
    let rho0 = random_pure_state(2, &mut rng);
    SolverConfig::new(h0, v, process, rho0, vec![0.0, 2.0 / process.gamma])
}

/// Seeds of the `count` problems derived from a base seed.
pub fn suite_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64)
        .map(|k| base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k))
        .collect()
}

/// Processes of the cross-check suite: OU, square-root and Jacobi with the
/// Rydberg sweep defaults (`γ = 1.5`).
pub fn suite_processes() -> Vec<ProcessSpec> {
    [NoiseKind::Ou, NoiseKind::SquareRoot, NoiseKind::Jacobi]
        .iter()
        .filter_map(|k| k.fig1_process())
        .collect()
}

#[derive(Debug, Clone)]
pub struct CrossCheck {
    pub process: ProcessSpec,
    pub seed: u64,
    pub depth: usize,
    /// Largest `|ρ_DHEOM − ρ_MC|` over the real and imaginary parts of all
    /// entries at the final time.
    pub max_deviation: f64,
    /// Largest deviation divided by its allowance `max(3·SE, 10⁻²)`.
    pub worst_ratio: f64,
    /// Allowance of the entry attaining `worst_ratio`.
    pub allowance: f64,
    /// `max |apply_map(ℰ, ρ̂⁰) − ρ_DHEOM|` over the grid, with the map
    /// integrated at the same depth.
    pub propagator_deviation: f64,
    pub density_diagnostics: Diagnostics,
    pub propagator_diagnostics: Diagnostics,
    pub dheom_time: Duration,
    pub mc_time: Duration,
}

impl CrossCheck {
    pub fn passed(&self) -> bool {
        self.worst_ratio <= 1.0
    }
}

/// Runs the density hierarchy (auto depth), the propagator hierarchy at the
/// same depth and Monte Carlo with `trajectories` samples.
pub fn cross_check(
    config: &SolverConfig,
    seed: u64,
    trajectories: usize,
) -> Result<CrossCheck, McError> {
    let evolution = hierarchy::integrate(config)?;
    let depth = evolution.diagnostics.depth;
    let mut fixed = config.clone();
    fixed.truncation.mode = DepthMode::Fixed(depth);
    let maps = hierarchy::integrate_propagator(&fixed)?;
    let mut propagator_deviation: f64 = 0.0;
    for (map, state) in maps.maps.iter().zip(&evolution.states) {
        let mapped =
            hierarchy::apply_map(map, &config.rho0).map_err(hierarchy::SolverError::from)?;
        propagator_deviation =
            propagator_deviation.max(max_abs(&(mapped.matrix() - state.matrix())));
    }

    let mut mc = McConfig::new(config.clone(), seed);
    mc.trajectories = trajectories;
    let sampled = montecarlo::average(&mc)?;

    let rho = evolution.states.last().expect("non-empty grid").matrix();
    let mean = sampled.mean.last().expect("non-empty grid").matrix();
    let se = sampled.standard_error.last().expect("non-empty grid");
    let (mut max_deviation, mut worst_ratio, mut allowance) = (0.0f64, 0.0f64, ALLOWANCE_FLOOR);
    for ((x, y), s) in rho.iter().zip(mean.iter()).zip(se.iter()) {
        for (dev, err) in [((x.re - y.re).abs(), s.re), ((x.im - y.im).abs(), s.im)] {
            let allowed = (SE_MULTIPLIER * err).max(ALLOWANCE_FLOOR);
            max_deviation = max_deviation.max(dev);
            if dev / allowed > worst_ratio {
                worst_ratio = dev / allowed;
                allowance = allowed;
            }
        }
    }
    Ok(CrossCheck {
        process: config.process,
        seed,
        depth,
        max_deviation,
        worst_ratio,
        allowance,
        propagator_deviation,
        dheom_time: evolution.diagnostics.wall_time,
        density_diagnostics: evolution.diagnostics,
        propagator_diagnostics: maps.diagnostics,
        mc_time: sampled.wall_time,
    })
}
