//! Stark-tuned Förster transfer between two Rydberg atoms with a
//! fluctuating dipole-dipole coupling `J(t) = J₀Ω(t)`.
//!
//! The flip-flop interaction conserves the number of excitations, so the
//! dynamics starting from `|r₊¹r₋²⟩` stays in the span of
//! `|1⟩ = |r₊¹r₋²⟩` and `|2⟩ = |r₋¹r₊²⟩`. There `H₀ = Δ·diag(1, −1)` with
//! `Δ = ε₂ − ε₁` and `V = J₀σₓ`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::hierarchy::{self, SolverConfig, SolverError, TruncationPolicy};
use crate::montecarlo::{self, BoundaryMode, McConfig, McError};
use crate::processes::ProcessSpec;
use crate::quantum::{evolve_exact, ComplexMatrix, DensityMatrix, QuantumError, ZERO};

/// Largest excursion outside `[0, 1]` tolerated before clipping.
pub const CLIP_TOLERANCE: f64 = 1e-8;

pub const DEFAULT_J0: f64 = 0.5;
pub const DEFAULT_INTERACTION_TIME: f64 = 1.0;
pub const FIG1_GAMMA: f64 = 1.5;
pub const FIG1_MU: f64 = 1.0;

#[derive(Debug, Error)]
pub enum RydbergError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error("invalid Rydberg configuration: {0}")]
    InvalidConfig(String),
    #[error("transfer population {value} lies outside [0, 1] beyond the clip tolerance")]
    PopulationOutOfRange { value: f64 },
}

impl RydbergError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Solver(e) => e.code(),
            Self::MonteCarlo(e) => e.code(),
            Self::Quantum(_) => "InvalidOperator",
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::PopulationOutOfRange { .. } => "PopulationOutOfRange",
        }
    }
}

/// The noise models of the detuning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Ou,
    SquareRoot,
    Jacobi,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [Self::None, Self::Ou, Self::SquareRoot, Self::Jacobi];

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Ou => "ou",
            Self::SquareRoot => "sr",
            Self::Jacobi => "jacobi",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Default process with `γ = 1.5`, `μ = 1`: OU with `σ² = 0.3`,
    /// square-root on `[0, ∞)` with `c₁ = 1`, Jacobi on `(1/8, 8)` with `c = 1`.
    pub fn fig1_process(&self) -> Option<ProcessSpec> {
        match self {
            Self::None => None,
            Self::Ou => Some(ProcessSpec::ornstein_uhlenbeck(FIG1_MU, FIG1_GAMMA, 0.3)),
            Self::SquareRoot => Some(ProcessSpec::square_root(FIG1_MU, FIG1_GAMMA, 0.0, 1.0)),
            Self::Jacobi => Some(ProcessSpec::jacobi(FIG1_MU, FIG1_GAMMA, 0.125, 8.0, 1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dheom,
    MonteCarlo,
    Coherent,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Dheom => "dheom",
            Self::MonteCarlo => "mc",
            Self::Coherent => "coherent",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [Self::Dheom, Self::MonteCarlo, Self::Coherent]
            .into_iter()
            .find(|m| m.name() == name)
    }
}

#[derive(Debug, Clone)]
pub struct RydbergConfig {
    /// Base coupling in rad/μs.
    pub j0: f64,
    /// Interaction time in μs.
    pub interaction_time: f64,
    /// Stark detunings `Δ = ε₂ − ε₁` in rad/μs.
    pub detunings: Vec<f64>,
    /// `None` is the coherent baseline with `Ω ≡ coherent_mu`.
    pub noise: Option<ProcessSpec>,
    pub coherent_mu: f64,
    pub dt: f64,
    pub truncation: TruncationPolicy,
    pub trajectories: usize,
    pub dt_sde: f64,
    pub seed: u64,
    pub boundary_mode: BoundaryMode,
}

impl RydbergConfig {
    /// 121 evenly spaced detunings on `[−3, 3]`.
    pub fn default_detunings() -> Vec<f64> {
        (0..121).map(|k| -3.0 + 0.05 * k as f64).collect()
    }

    pub fn new(noise: NoiseKind) -> Self {
        Self {
            j0: DEFAULT_J0,
            interaction_time: DEFAULT_INTERACTION_TIME,
            detunings: Self::default_detunings(),
            noise: noise.fig1_process(),
            coherent_mu: FIG1_MU,
            dt: SolverConfig::DEFAULT_DT,
            truncation: TruncationPolicy::default(),
            trajectories: McConfig::DEFAULT_TRAJECTORIES,
            dt_sde: McConfig::DEFAULT_DT_SDE,
            seed: 0,
            boundary_mode: BoundaryMode::Reflect,
        }
    }

    /// Mean coupling multiplier used by the coherent method.
    pub fn mean_coupling(&self) -> f64 {
        self.noise.map_or(self.coherent_mu, |p| p.mu)
    }

    pub fn validate(&self) -> Result<(), RydbergError> {
        let invalid = |msg: String| Err(RydbergError::InvalidConfig(msg));
        if !(self.j0 > 0.0 && self.j0.is_finite()) {
            return invalid(format!("J0 must be positive, got {}", self.j0));
        }
        if !(self.interaction_time > 0.0 && self.interaction_time.is_finite()) {
            return invalid(format!(
                "interaction time must be positive, got {}",
                self.interaction_time
            ));
        }
        if self.detunings.is_empty() {
            return invalid("detuning list is empty".into());
        }
        if let Some(delta) = self.detunings.iter().find(|d| !d.is_finite()) {
            return invalid(format!("detuning {delta} is not finite"));
        }
        if !self.coherent_mu.is_finite() {
            return invalid(format!(
                "coherent mu must be finite, got {}",
                self.coherent_mu
            ));
        }
        if let Some(process) = &self.noise {
            process.validate().map_err(SolverError::from)?;
        }
        Ok(())
    }

    /// Solver configuration for one detuning, starting in `|1⟩`.
    pub fn solver_config(&self, delta: f64) -> Option<SolverConfig> {
        let process = self.noise?;
        let (h0, v) = build_hamiltonians(delta, self.j0);
        let mut config = SolverConfig::new(
            h0,
            v,
            process,
            DensityMatrix::basis(2, 0),
            vec![0.0, self.interaction_time],
        );
        config.dt = self.dt;
        config.truncation = self.truncation;
        Some(config)
    }
}

/// `(H₀, V)` in the single-excitation basis.
pub fn build_hamiltonians(delta: f64, j0: f64) -> (ComplexMatrix, ComplexMatrix) {
    let c = |x: f64| Complex64::new(x, 0.0);
    let h0 = ComplexMatrix::from_row_slice(2, 2, &[c(delta), ZERO, ZERO, c(-delta)]);
    let v = ComplexMatrix::from_row_slice(2, 2, &[ZERO, c(j0), c(j0), ZERO]);
    (h0, v)
}

/// `⟨2|ρ|2⟩` clipped to `[0, 1]`.
pub fn transfer_population(rho: &DensityMatrix) -> Result<f64, RydbergError> {
    let value = rho.population(1);
    if !(-CLIP_TOLERANCE..=1.0 + CLIP_TOLERANCE).contains(&value) {
        return Err(RydbergError::PopulationOutOfRange { value });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Two-level Rabi formula `J²/(J²+Δ²)·sin²(√(J²+Δ²)T)`.
pub fn rabi_population(delta: f64, coupling: f64, time: f64) -> f64 {
    let r2 = coupling * coupling + delta * delta;
    if r2 == 0.0 {
        return 0.0;
    }
    coupling * coupling / r2 * (r2.sqrt() * time).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub delta: f64,
    pub population: f64,
    /// Monte Carlo standard error of the population.
    pub standard_error: Option<f64>,
    /// Hierarchy depth used by the DHEOM method.
    pub depth: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub method: Method,
    pub rows: Vec<SweepRow>,
    pub wall_time: Duration,
}

/// One row per detuning, in input order. Without noise every method
/// reduces to the coherent evolution.
pub fn sweep(config: &RydbergConfig, method: Method) -> Result<Sweep, RydbergError> {
    let started = Instant::now();
    config.validate()?;
    let method_used = if config.noise.is_none() {
        Method::Coherent
    } else {
        method
    };
    let rows = config
        .detunings
        .par_iter()
        .map(|&delta| sweep_row(config, method_used, delta))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Sweep {
        method,
        rows,
        wall_time: started.elapsed(),
    })
}

fn sweep_row(config: &RydbergConfig, method: Method, delta: f64) -> Result<SweepRow, RydbergError> {
    let t = config.interaction_time;
    let mut row = SweepRow {
        delta,
        population: 0.0,
        standard_error: None,
        depth: None,
    };
    match (method, config.solver_config(delta)) {
        (Method::Dheom, Some(solver)) => {
            let evolution = hierarchy::integrate(&solver)?;
            row.population = transfer_population(evolution.states.last().expect("grid ends at T"))?;
            row.depth = Some(evolution.diagnostics.depth);
        }
        (Method::MonteCarlo, Some(solver)) => {
            let mc = McConfig {
                solver,
                trajectories: config.trajectories,
                dt_sde: config.dt_sde,
                seed: config.seed,
                boundary_mode: config.boundary_mode,
            };
            let result = montecarlo::average(&mc)?;
            row.population = transfer_population(result.mean.last().expect("grid ends at T"))?;
            row.standard_error =
                Some(result.standard_error.last().expect("grid ends at T")[(1, 1)].re);
        }
        _ => {
            let (h0, v) = build_hamiltonians(delta, config.j0);
            let h = h0 + v * Complex64::from(config.mean_coupling());
            row.population =
                transfer_population(&evolve_exact(&h, &DensityMatrix::basis(2, 0), t)?)?;
        }
    }
    Ok(row)
}

/// Total variation `Σ|P_{k+1} − P_k|` of the rows with `Δ ∈ [lo, hi]`.
pub fn total_variation(rows: &[SweepRow], lo: f64, hi: f64) -> f64 {
    let inside: Vec<f64> = rows
        .iter()
        .filter(|r| r.delta >= lo - 1e-12 && r.delta <= hi + 1e-12)
        .map(|r| r.population)
        .collect();
    inside.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}
