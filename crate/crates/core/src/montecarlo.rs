//! Monte Carlo reference: sample noise paths from the Itô SDE, propagate
//! each conditioned von Neumann equation and average the resulting states.
//!
//! Trajectory `k` draws from the ChaCha8 stream `k` of the configured seed,
//! and the statistics are merged in a fixed binary tree over trajectory
//! indices, so results do not depend on the number of worker threads.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::hierarchy::{SolverConfig, SolverError};
use crate::processes::ProcessSpec;
use crate::quantum::{self, unitary_2x2, ComplexMatrix, DensityMatrix, ZERO};

/// Offset applied by [`BoundaryMode::Clamp`] to keep a value strictly inside
/// the domain.
pub const CLAMP_OFFSET: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("at least 2 trajectories are needed to estimate a standard error, got {0}")]
    TooFewTrajectories(usize),
    #[error("SDE step must be positive and no larger than the quantum step {dt}, got {dt_sde}")]
    InvalidSdeStep { dt_sde: f64, dt: f64 },
}

impl McError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Solver(e) => e.code(),
            Self::TooFewTrajectories(_) => "TooFewTrajectories",
            Self::InvalidSdeStep { .. } => "InvalidSdeStep",
        }
    }
}

/// What happens when an Euler–Maruyama step leaves the process range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Mirror the excursion back across the boundary.
    #[default]
    Reflect,
    /// Put the value just inside the boundary.
    Clamp,
}

#[derive(Debug, Clone)]
pub struct McConfig {
    /// System, noise, initial state, output grid and quantum step `dt`.
    pub solver: SolverConfig,
    pub trajectories: usize,
    pub dt_sde: f64,
    pub seed: u64,
    pub boundary_mode: BoundaryMode,
}

impl McConfig {
    pub const DEFAULT_TRAJECTORIES: usize = 500;
    pub const DEFAULT_DT_SDE: f64 = 1e-4;

    pub fn new(solver: SolverConfig, seed: u64) -> Self {
        Self {
            solver,
            trajectories: Self::DEFAULT_TRAJECTORIES,
            dt_sde: Self::DEFAULT_DT_SDE,
            seed,
            boundary_mode: BoundaryMode::Reflect,
        }
    }

    pub fn validate(&self) -> Result<usize, McError> {
        let d = self.solver.validate()?;
        if self.trajectories < 2 {
            return Err(McError::TooFewTrajectories(self.trajectories));
        }
        if !(self.dt_sde > 0.0 && self.dt_sde <= self.solver.dt) {
            return Err(McError::InvalidSdeStep {
                dt_sde: self.dt_sde,
                dt: self.solver.dt,
            });
        }
        Ok(d)
    }
}

/// One Euler–Maruyama step `Ω + A(Ω)dt + √(B(Ω)dt)·ξ` for a given
/// standard normal `ξ`, followed by the boundary treatment.
pub fn sde_step_with(spec: &ProcessSpec, omega: f64, dt: f64, xi: f64, mode: BoundaryMode) -> f64 {
    let (drift, diffusion) = spec.sde_coefficients(omega);
    let next = omega + drift * dt + (diffusion.max(0.0) * dt).sqrt() * xi;
    confine(spec, next, mode)
}

/// [`sde_step_with`] with `ξ` drawn from `rng`.
pub fn sde_step<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    omega: f64,
    dt: f64,
    mode: BoundaryMode,
    rng: &mut R,
) -> f64 {
    let xi: f64 = rng.sample(StandardNormal);
    sde_step_with(spec, omega, dt, xi, mode)
}

fn confine(spec: &ProcessSpec, omega: f64, mode: BoundaryMode) -> f64 {
    let (lower, upper) = spec.domain();
    if omega >= lower && omega <= upper {
        return omega;
    }
    match mode {
        BoundaryMode::Reflect => {
            let mut x = omega;
            // a single mirror suffices unless the step overshoots the whole interval
            for _ in 0..8 {
                if x < lower {
                    x = 2.0 * lower - x;
                } else if x > upper {
                    x = 2.0 * upper - x;
                } else {
                    return x;
                }
            }
            x.clamp(lower, upper)
        }
        BoundaryMode::Clamp => {
            if omega < lower {
                (lower + CLAMP_OFFSET).min(upper)
            } else {
                (upper - CLAMP_OFFSET).max(lower)
            }
        }
    }
}

/// Splits `[0, t_end]` of the grid into steps no longer than `max_step`.
fn substeps(span: f64, max_step: f64) -> (usize, f64) {
    let count = ((span / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (count, span / count as f64)
}

/// Noise values at the grid times, starting from `omega0` at `grid[0]`.
pub fn sde_path<R: Rng + ?Sized>(
    spec: &ProcessSpec,
    omega0: f64,
    grid: &[f64],
    dt_sde: f64,
    mode: BoundaryMode,
    rng: &mut R,
) -> Vec<f64> {
    let mut omega = omega0;
    let mut out = Vec::with_capacity(grid.len());
    out.push(omega);
    for w in grid.windows(2) {
        let (count, h) = substeps(w[1] - w[0], dt_sde);
        for _ in 0..count {
            omega = sde_step(spec, omega, h, mode, rng);
        }
        out.push(omega);
    }
    out
}

/// Random stream for trajectory `index`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Unitary step `ρ ↦ UρU†`, specialised for two-level systems.
enum Stepper {
    TwoLevel {
        h0: [[Complex64; 2]; 2],
        v: [[Complex64; 2]; 2],
    },
    General {
        h0: ComplexMatrix,
        v: ComplexMatrix,
    },
}

impl Stepper {
    fn new(h0: &ComplexMatrix, v: &ComplexMatrix) -> Self {
        if h0.nrows() == 2 {
            let arr = |m: &ComplexMatrix| [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]];
            Self::TwoLevel {
                h0: arr(h0),
                v: arr(v),
            }
        } else {
            Self::General {
                h0: h0.clone(),
                v: v.clone(),
            }
        }
    }

    fn step(&self, rho: &mut ComplexMatrix, omega: f64, dt: f64) {
        match self {
            Self::TwoLevel { h0, v } => {
                let mut h = [[ZERO; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        h[r][c] = h0[r][c] + v[r][c] * omega;
                    }
                }
                let u = unitary_2x2(h, dt);
                let mut ur = [[ZERO; 2]; 2];
                for r in 0..2 {
                    for c in 0..2 {
                        ur[r][c] = u[r][0] * rho[(0, c)] + u[r][1] * rho[(1, c)];
                    }
                }
                for r in 0..2 {
                    for c in 0..2 {
                        rho[(r, c)] = ur[r][0] * u[c][0].conj() + ur[r][1] * u[c][1].conj();
                    }
                }
            }
            Self::General { h0, v } => {
                let h = h0 + v * Complex64::from(omega);
                let u = quantum::unitary(&h, dt).expect("Hermitian by construction");
                *rho = &u * &*rho * u.adjoint();
            }
        }
    }
}

/// States of one trajectory at every grid time. The Hamiltonian is held
/// at `H₀ + Ω̄V` over each quantum step, `Ω̄` being the trapezoidal average
/// of the SDE values inside the step.
pub fn run_trajectory(config: &McConfig, index: u64) -> Result<Vec<ComplexMatrix>, McError> {
    config.validate()?;
    Ok(trajectory(
        config,
        &Stepper::new(&config.solver.h0, &config.solver.v),
        index,
    ))
}

fn trajectory(config: &McConfig, stepper: &Stepper, index: u64) -> Vec<ComplexMatrix> {
    let solver = &config.solver;
    let spec = &solver.process;
    let mut rng = trajectory_rng(config.seed, index);
    let mut omega = spec.sample_stationary(&mut rng);
    let mut rho = solver.rho0.matrix().clone();
    let mut out = Vec::with_capacity(solver.t_grid.len());
    out.push(rho.clone());
    for w in solver.t_grid.windows(2) {
        let (steps, h) = substeps(w[1] - w[0], solver.dt);
        let (subs, h_sde) = substeps(h, config.dt_sde);
        for _ in 0..steps {
            let mut sum = 0.5 * omega;
            for k in 0..subs {
                omega = sde_step(spec, omega, h_sde, config.boundary_mode, &mut rng);
                sum += if k + 1 == subs { 0.5 * omega } else { omega };
            }
            stepper.step(&mut rho, sum / subs as f64, h);
        }
        out.push(rho.clone());
    }
    out
}

/// Running mean and sum of squared deviations, per matrix entry and grid
/// time, with real and imaginary parts tracked separately.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<Complex64>,
    m2: Vec<Complex64>,
}

impl Moments {
    fn single(states: &[ComplexMatrix]) -> Self {
        let mean: Vec<Complex64> = states.iter().flat_map(|m| m.iter().copied()).collect();
        let m2 = vec![ZERO; mean.len()];
        Self {
            count: 1.0,
            mean,
            m2,
        }
    }

    /// Chan et al. pairwise combination.
    fn merge(mut self, other: Self) -> Self {
        let count = self.count + other.count;
        let weight = other.count / count;
        let cross = self.count * other.count / count;
        for ((mean, m2), (mean_b, m2_b)) in self
            .mean
            .iter_mut()
            .zip(self.m2.iter_mut())
            .zip(other.mean.iter().zip(other.m2.iter()))
        {
            let delta = mean_b - *mean;
            *mean += delta * weight;
            *m2 += m2_b + Complex64::new(delta.re * delta.re, delta.im * delta.im) * cross;
        }
        self.count = count;
        self
    }
}

fn accumulate(config: &McConfig, stepper: &Stepper, range: std::ops::Range<u64>) -> Moments {
    if range.end - range.start == 1 {
        return Moments::single(&trajectory(config, stepper, range.start));
    }
    let mid = range.start + (range.end - range.start) / 2;
    let (left, right) = rayon::join(
        || accumulate(config, stepper, range.start..mid),
        || accumulate(config, stepper, mid..range.end),
    );
    left.merge(right)
}

/// Sample mean and standard error over all trajectories.
#[derive(Debug, Clone)]
pub struct McResult {
    pub times: Vec<f64>,
    pub mean: Vec<DensityMatrix>,
    /// `sample std / √M` of the real parts (in `re`) and imaginary parts
    /// (in `im`) of every entry.
    pub standard_error: Vec<ComplexMatrix>,
    pub trajectories: usize,
    pub wall_time: Duration,
}

pub fn average(config: &McConfig) -> Result<McResult, McError> {
    let started = Instant::now();
    let d = config.validate()?;
    let stepper = Stepper::new(&config.solver.h0, &config.solver.v);
    let moments = accumulate(config, &stepper, 0..config.trajectories as u64);
    let m = config.trajectories as f64;
    let block = d * d;
    let sd_scale = 1.0 / ((m - 1.0) * m);
    let mut mean = Vec::with_capacity(config.solver.t_grid.len());
    let mut standard_error = Vec::with_capacity(config.solver.t_grid.len());
    for (mu, m2) in moments.mean.chunks(block).zip(moments.m2.chunks(block)) {
        mean.push(DensityMatrix::from_evolved(&DMatrix::from_column_slice(
            d, d, mu,
        )));
        let se: Vec<Complex64> = m2
            .iter()
            .map(|v| Complex64::new((v.re * sd_scale).sqrt(), (v.im * sd_scale).sqrt()))
            .collect();
        standard_error.push(DMatrix::from_column_slice(d, d, &se));
    }
    Ok(McResult {
        times: config.solver.t_grid.clone(),
        mean,
        standard_error,
        trajectories: config.trajectories,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silent_ou_stays_at_mean() {
        let spec = ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.0);
        assert_eq!(
            sde_step_with(&spec, 1.0, 1e-4, 0.7, BoundaryMode::Reflect),
            1.0
        );
    }

    #[test]
    fn ou_drift_step() {
        let spec = ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3);
        let next = sde_step_with(&spec, 2.0, 1e-4, 0.0, BoundaryMode::Reflect);
        assert!((next - (2.0 - 1.5e-4)).abs() < 1e-15);
    }

    #[test]
    fn boundary_modes() {
        let spec = ProcessSpec::jacobi(1.0, 1.5, 0.125, 8.0, 1.0);
        assert_eq!(confine(&spec, 0.1, BoundaryMode::Reflect), 0.15);
        assert_eq!(confine(&spec, 8.5, BoundaryMode::Reflect), 7.5);
        assert_eq!(
            confine(&spec, 0.1, BoundaryMode::Clamp),
            0.125 + CLAMP_OFFSET
        );
        assert_eq!(confine(&spec, 9.0, BoundaryMode::Clamp), 8.0 - CLAMP_OFFSET);
        let sr = ProcessSpec::square_root(1.0, 1.5, 0.0, 1.0);
        assert_eq!(confine(&sr, -0.25, BoundaryMode::Reflect), 0.25);
        assert_eq!(confine(&sr, 1e9, BoundaryMode::Reflect), 1e9);
    }

    #[test]
    fn substeps_cover_the_span() {
        assert_eq!(substeps(1e-3, 1e-4).0, 10);
        assert_eq!(substeps(0.25, 0.1).0, 3);
        let (n, h) = substeps(2.0 / 1.5, 1e-3);
        assert!((n as f64 * h - 2.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn moments_merge_matches_two_pass_statistics() {
        let values = [0.3, -1.2, 2.5, 0.7, 0.0];
        let leaves: Vec<Moments> = values
            .iter()
            .map(|&x| Moments::single(&[ComplexMatrix::from_element(1, 1, Complex64::new(x, -x))]))
            .collect();
        let merged = leaves.into_iter().reduce(Moments::merge).unwrap();
        let mean = values.iter().sum::<f64>() / 5.0;
        let m2: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
        assert!((merged.mean[0].re - mean).abs() < 1e-15);
        assert!((merged.m2[0].re - m2).abs() < 1e-14);
        assert!((merged.m2[0].im - m2).abs() < 1e-14);
    }
}
