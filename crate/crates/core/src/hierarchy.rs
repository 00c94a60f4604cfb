//! Diffusive hierarchical equations of motion.
//!
//! The joint density `ρ̂(t, Ω)` is expanded in the forward eigenfunctions of
//! the noise generator, `ρ̂(t, Ω) = Σ ρ̄_n(t) f_n(Ω)`. Each auxiliary matrix
//! obeys
//!
//! ```text
//! dρ̄_n/dt = −i[H₀ + b_n V, ρ̄_n] − λ_n ρ̄_n − i a_{n+1}[V, ρ̄_{n+1}] − i c_{n−1}[V, ρ̄_{n−1}]
//! ```
//!
//! and the ladder is closed at depth `N` by replacing `ρ̄_{N+1}` with its
//! adiabatic estimate `−i (c_N/λ_{N+1}) [V, ρ̄_N]`. Level zero is the
//! noise-averaged state.
//!
//! The same ladder drives the vectorized dynamical map `ℰ(t)`, with the
//! commutators replaced by left multiplication with `1⊗H − Hᵀ⊗1`.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use thiserror::Error;

use crate::processes::{ProcessError, ProcessSpec};
use crate::quantum::{
    self, check_hermitian, commutator_add, ComplexMatrix, DensityMatrix, QuantumError, I, ONE, ZERO,
};

/// Upper bound on `dt·λ_N` for the explicit integrator.
pub const STABILITY_PRODUCT: f64 = 0.1;
/// Any auxiliary entry above this magnitude aborts the integration.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Depth increment between the two runs compared by the convergence scan.
pub const CONVERGENCE_STRIDE: usize = 4;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("time grid must be non-empty, start at 0 and be strictly increasing")]
    InvalidTimeGrid,
    #[error("integrator step must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },
    #[error("invalid truncation policy: {0}")]
    InvalidTruncation(String),
    #[error("no hierarchy depth up to {max_depth} meets the truncation criteria")]
    DepthCapExceeded { max_depth: usize },
    #[error("hierarchy diverged at level {level}, t = {time} (|entry| = {magnitude:e}); reduce dt or change the depth")]
    StabilityGuard {
        level: usize,
        time: f64,
        magnitude: f64,
    },
}

impl SolverError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Quantum(_) => "InvalidOperator",
            Self::Process(e) => e.code(),
            Self::InvalidTimeGrid => "InvalidTimeGrid",
            Self::InvalidStep { .. } => "InvalidStep",
            Self::InvalidTruncation(_) => "InvalidTruncation",
            Self::DepthCapExceeded { .. } => "DepthCapExceeded",
            Self::StabilityGuard { .. } => "StabilityGuard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthMode {
    Fixed(usize),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub mode: DepthMode,
    /// Required separation `λ_N / ‖H₀^× + b_N V^×‖₂`.
    pub kappa: f64,
    /// Max-norm tolerance between depths `N` and `N + 4`.
    pub convergence_tol: f64,
    pub max_depth: usize,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            mode: DepthMode::Auto,
            kappa: 10.0,
            convergence_tol: 1e-6,
            max_depth: 512,
        }
    }
}

impl TruncationPolicy {
    pub fn fixed(depth: usize) -> Self {
        Self {
            mode: DepthMode::Fixed(depth),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.kappa > 1.0) {
            return Err(SolverError::InvalidTruncation(format!(
                "kappa must exceed 1, got {}",
                self.kappa
            )));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(SolverError::InvalidTruncation(format!(
                "convergence tolerance must be positive, got {}",
                self.convergence_tol
            )));
        }
        if self.max_depth < 1 {
            return Err(SolverError::InvalidTruncation(
                "max_depth must be at least 1".into(),
            ));
        }
        if let DepthMode::Fixed(n) = self.mode {
            if n < 1 || n > self.max_depth {
                return Err(SolverError::InvalidTruncation(format!(
                    "fixed depth must lie in 1..={}, got {n}",
                    self.max_depth
                )));
            }
        }
        Ok(())
    }
}

/// Everything needed to integrate the hierarchy for `H(t) = H₀ + Ω(t)V`.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub h0: ComplexMatrix,
    pub v: ComplexMatrix,
    pub process: ProcessSpec,
    /// Initial state; ignored by [`integrate_propagator`].
    pub rho0: DensityMatrix,
    /// Output times in μs, starting at 0.
    pub t_grid: Vec<f64>,
    /// Maximum integrator step in μs.
    pub dt: f64,
    pub truncation: TruncationPolicy,
}

impl SolverConfig {
    pub const DEFAULT_DT: f64 = 1e-3;

    pub fn new(
        h0: ComplexMatrix,
        v: ComplexMatrix,
        process: ProcessSpec,
        rho0: DensityMatrix,
        t_grid: Vec<f64>,
    ) -> Self {
        Self {
            h0,
            v,
            process,
            rho0,
            t_grid,
            dt: Self::DEFAULT_DT,
            truncation: TruncationPolicy::default(),
        }
    }

    /// Checks all invariants and returns the Hilbert-space dimension.
    pub fn validate(&self) -> Result<usize, SolverError> {
        self.process.validate()?;
        self.truncation.validate()?;
        let d = check_hermitian(&self.h0, 1e-12)?;
        let dv = check_hermitian(&self.v, 1e-12)?;
        if dv != d || self.rho0.dim() != d {
            return Err(QuantumError::DimensionMismatch {
                expected: d,
                found: if dv != d { dv } else { self.rho0.dim() },
            }
            .into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::InvalidStep { dt: self.dt });
        }
        validate_grid(&self.t_grid)?;
        Ok(d)
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), SolverError> {
    let ok = grid.first() == Some(&0.0)
        && grid.iter().all(|t| t.is_finite())
        && grid.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(SolverError::InvalidTimeGrid)
    }
}

/// Per-level coefficients of a hierarchy truncated at `depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCoefficients {
    pub depth: usize,
    /// `b_n`, multiplying `V^×` on level `n`.
    pub diagonal: Vec<f64>,
    /// `λ_n`.
    pub decay: Vec<f64>,
    /// `a_{n+1}`, coupling level `n` to `n + 1` (`n < N`).
    pub up: Vec<f64>,
    /// `c_{n−1}`, coupling level `n` to `n − 1` (`n ≥ 1`; entry 0 unused).
    pub down: Vec<f64>,
    /// `a_{N+1} c_N / λ_{N+1}`, the weight of `V^×V^×` in the terminator.
    pub terminator: f64,
}

impl LevelCoefficients {
    pub fn new(process: &ProcessSpec, depth: usize) -> Result<Self, ProcessError> {
        let triples = (0..=depth + 1)
            .map(|n| process.recurrence(n))
            .collect::<Result<Vec<_>, _>>()?;
        let lambda_next = process.lambda(depth + 1);
        assert!(lambda_next > 0.0, "λ_(N+1) must be positive");
        Ok(Self {
            depth,
            diagonal: triples[..=depth].iter().map(|t| t.b).collect(),
            decay: (0..=depth).map(|n| process.lambda(n)).collect(),
            up: (0..depth).map(|n| triples[n + 1].a).collect(),
            down: (0..=depth)
                .map(|n| if n == 0 { 0.0 } else { triples[n - 1].c })
                .collect(),
            terminator: triples[depth + 1].a * triples[depth].c / lambda_next,
        })
    }
}

/// How `H^×` acts on one block of the hierarchy.
trait BlockAction {
    fn block_len(&self) -> usize;
    /// `out += scale · H₀^× x`
    fn add_h0(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]);
    /// `out += scale · V^× x`
    fn add_v(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]);
}

/// Density-matrix blocks: `H^× X = [H, X]`.
struct CommutatorAction<'a> {
    d: usize,
    h0: &'a [Complex64],
    v: &'a [Complex64],
}

impl BlockAction for CommutatorAction<'_> {
    fn block_len(&self) -> usize {
        self.d * self.d
    }

    fn add_h0(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        commutator_add(self.h0, x, self.d, scale, out);
    }

    fn add_v(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        commutator_add(self.v, x, self.d, scale, out);
    }
}

/// Propagator blocks: `𝓗 X` with `𝓗 = 1⊗H − Hᵀ⊗1`.
struct SuperoperatorAction {
    d2: usize,
    h0: ComplexMatrix,
    v: ComplexMatrix,
}

fn matmul_add(m: &[Complex64], x: &[Complex64], n: usize, scale: Complex64, out: &mut [Complex64]) {
    for j in 0..n {
        let column = &x[j * n..(j + 1) * n];
        let target = &mut out[j * n..(j + 1) * n];
        for (k, &xk) in column.iter().enumerate() {
            if xk == ZERO {
                continue;
            }
            let factor = scale * xk;
            for (t, &mik) in target.iter_mut().zip(&m[k * n..(k + 1) * n]) {
                *t += mik * factor;
            }
        }
    }
}

impl BlockAction for SuperoperatorAction {
    fn block_len(&self) -> usize {
        self.d2 * self.d2
    }

    fn add_h0(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        matmul_add(self.h0.as_slice(), x, self.d2, scale, out);
    }

    fn add_v(&self, x: &[Complex64], scale: Complex64, out: &mut [Complex64]) {
        matmul_add(self.v.as_slice(), x, self.d2, scale, out);
    }
}

/// Writes the full hierarchy derivative of `state` into `out`. Levels are
/// stored contiguously; level `n` only reads levels `n − 1`, `n`, `n + 1`.
fn hierarchy_derivative<A: BlockAction>(
    action: &A,
    coeffs: &LevelCoefficients,
    state: &[Complex64],
    out: &mut [Complex64],
    scratch: &mut [Complex64],
    vx: &mut [Complex64],
) {
    let m = action.block_len();
    let depth = coeffs.depth;
    let mi = -I;
    for n in 0..=depth {
        let x = &state[n * m..(n + 1) * m];
        let target = &mut out[n * m..(n + 1) * m];
        let decay = coeffs.decay[n];
        for (o, &xi) in target.iter_mut().zip(x) {
            *o = xi * (-decay);
        }
        action.add_h0(x, mi, target);

        // V^× is linear, so all V-couplings are folded into one application
        let b = coeffs.diagonal[n];
        for (s, &xi) in scratch.iter_mut().zip(x) {
            *s = xi * b;
        }
        if n > 0 {
            let c = coeffs.down[n];
            for (s, &xi) in scratch.iter_mut().zip(&state[(n - 1) * m..n * m]) {
                *s += xi * c;
            }
        }
        if n < depth {
            let a = coeffs.up[n];
            for (s, &xi) in scratch.iter_mut().zip(&state[(n + 1) * m..(n + 2) * m]) {
                *s += xi * a;
            }
        } else {
            // −i V^× (−i w V^× x) = −w V^× V^× x
            vx.iter_mut().for_each(|z| *z = ZERO);
            action.add_v(x, ONE, vx);
            let w = mi * coeffs.terminator;
            for (s, &z) in scratch.iter_mut().zip(vx.iter()) {
                *s += z * w;
            }
        }
        action.add_v(scratch, mi, target);
    }
}

/// Classical fourth-order Runge–Kutta with preallocated stage buffers.
struct Rk4 {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    stage: Vec<Complex64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            stage: vec![ZERO; len],
        }
    }

    fn step<F: FnMut(&[Complex64], &mut [Complex64])>(
        &mut self,
        y: &mut [Complex64],
        h: f64,
        mut rhs: F,
    ) {
        rhs(y, &mut self.k1);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k1) {
            *s = yi + k * (0.5 * h);
        }
        rhs(&self.stage, &mut self.k2);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k2) {
            *s = yi + k * (0.5 * h);
        }
        rhs(&self.stage, &mut self.k3);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y.iter()).zip(&self.k3) {
            *s = yi + k * h;
        }
        rhs(&self.stage, &mut self.k4);
        let sixth = h / 6.0;
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * sixth;
        }
    }
}

/// Conservation and cost diagnostics of one integration.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub depth: usize,
    /// Step actually used (≤ configured `dt`, with `dt·λ_N ≤ 0.1`).
    pub step: f64,
    pub steps: usize,
    /// `max_t |tr ρ̄₀(t) − tr ρ̂⁰|` over the grid.
    pub trace_drift: f64,
    /// `max_{t, n≥1} |tr ρ̄_n(t)|` over the grid.
    pub auxiliary_trace: f64,
    /// `max_{t, n} ‖ρ̄_n − ρ̄_n†‖_max` over the grid, before re-symmetrization.
    pub hermiticity_drift: f64,
    pub wall_time: Duration,
}

/// Raw level-zero blocks at every grid time.
struct RawRun {
    level0: Vec<Vec<Complex64>>,
    diagnostics: Diagnostics,
}

/// Per-block checks applied at grid times.
#[derive(Clone, Copy)]
enum BlockChecks {
    Density { d: usize },
    Map,
}

fn effective_step(dt: f64, lambda_max: f64) -> f64 {
    if lambda_max * dt > STABILITY_PRODUCT {
        STABILITY_PRODUCT / lambda_max
    } else {
        dt
    }
}

fn run_hierarchy<A: BlockAction>(
    action: &A,
    coeffs: &LevelCoefficients,
    initial: &[Complex64],
    grid: &[f64],
    dt: f64,
    checks: BlockChecks,
) -> Result<RawRun, SolverError> {
    let started = Instant::now();
    let m = action.block_len();
    let depth = coeffs.depth;
    let len = (depth + 1) * m;
    let mut state = vec![ZERO; len];
    state[..m].copy_from_slice(initial);
    let initial_trace = match checks {
        BlockChecks::Density { d } => (0..d).map(|i| initial[i * d + i]).sum(),
        BlockChecks::Map => ZERO,
    };

    let step = effective_step(dt, coeffs.decay[depth]);
    let mut rk4 = Rk4::new(len);
    let mut scratch = vec![ZERO; m];
    let mut vx = vec![ZERO; m];
    let mut diagnostics = Diagnostics {
        depth,
        step,
        steps: 0,
        trace_drift: 0.0,
        auxiliary_trace: 0.0,
        hermiticity_drift: 0.0,
        wall_time: Duration::ZERO,
    };
    let mut level0 = Vec::with_capacity(grid.len());
    let mut record = |state: &[Complex64], diagnostics: &mut Diagnostics| {
        if let BlockChecks::Density { d } = checks {
            for n in 0..=depth {
                let block = &state[n * m..(n + 1) * m];
                let trace: Complex64 = (0..d).map(|i| block[i * d + i]).sum();
                if n == 0 {
                    diagnostics.trace_drift =
                        diagnostics.trace_drift.max((trace - initial_trace).norm());
                } else {
                    diagnostics.auxiliary_trace = diagnostics.auxiliary_trace.max(trace.norm());
                }
                for j in 0..d {
                    for i in 0..=j {
                        let dev = (block[j * d + i] - block[i * d + j].conj()).norm();
                        diagnostics.hermiticity_drift = diagnostics.hermiticity_drift.max(dev);
                    }
                }
            }
        }
        level0.push(state[..m].to_vec());
    };
    record(&state, &mut diagnostics);

    let mut t = grid[0];
    for &target in &grid[1..] {
        let span = target - t;
        let substeps = ((span / step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / substeps as f64;
        for k in 0..substeps {
            rk4.step(&mut state, h, |y, dy| {
                hierarchy_derivative(action, coeffs, y, dy, &mut scratch, &mut vx)
            });
            diagnostics.steps += 1;
            if let Some((index, magnitude)) = first_divergent(&state) {
                return Err(SolverError::StabilityGuard {
                    level: index / m,
                    time: t + (k + 1) as f64 * h,
                    magnitude,
                });
            }
        }
        t = target;
        record(&state, &mut diagnostics);
    }
    diagnostics.wall_time = started.elapsed();
    Ok(RawRun {
        level0,
        diagnostics,
    })
}

fn first_divergent(state: &[Complex64]) -> Option<(usize, f64)> {
    state.iter().enumerate().find_map(|(i, z)| {
        let magnitude = z.re.abs().max(z.im.abs());
        (!(magnitude <= DIVERGENCE_LIMIT)).then_some((i, magnitude))
    })
}

fn max_deviation(a: &RawRun, b: &RawRun) -> f64 {
    a.level0
        .iter()
        .zip(&b.level0)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

/// Smallest depth satisfying `λ_N ≥ κ·(2‖H₀‖₂ + 2|b_N|·‖V‖₂)`, if any.
pub fn separation_depth(config: &SolverConfig) -> Result<Option<usize>, SolverError> {
    let h_norm = quantum::hermitian_norm(&config.h0);
    let v_norm = quantum::hermitian_norm(&config.v);
    let kappa = config.truncation.kappa;
    for n in 1..=config.truncation.max_depth {
        let b = config.process.recurrence(n)?.b;
        if config.process.lambda(n) >= kappa * (2.0 * h_norm + 2.0 * b.abs() * v_norm) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

/// Runs the depth-convergence scan, returning the selected depth and its run.
fn scan_depth<A: BlockAction>(
    config: &SolverConfig,
    action: &A,
    initial: &[Complex64],
    checks: BlockChecks,
) -> Result<(usize, RawRun), SolverError> {
    let policy = config.truncation;
    let run = |depth: usize| {
        let coeffs = LevelCoefficients::new(&config.process, depth)?;
        run_hierarchy(action, &coeffs, initial, &config.t_grid, config.dt, checks)
    };
    match policy.mode {
        DepthMode::Fixed(depth) => Ok((depth, run(depth)?)),
        DepthMode::Auto => {
            if quantum::max_abs(&config.v) == 0.0 {
                return Ok((1, run(1)?));
            }
            // When the separation condition cannot be met at any depth (the
            // square-root process, whose b_N grows linearly), the
            // convergence scan alone decides.
            let mut depth = separation_depth(config)?.unwrap_or(1);
            let cap = policy.max_depth;
            if depth + CONVERGENCE_STRIDE > cap {
                return Err(SolverError::DepthCapExceeded { max_depth: cap });
            }
            let mut current = run(depth)?;
            loop {
                let deeper = run(depth + CONVERGENCE_STRIDE)?;
                if max_deviation(&current, &deeper) <= policy.convergence_tol {
                    return Ok((depth, current));
                }
                depth += CONVERGENCE_STRIDE;
                if depth + CONVERGENCE_STRIDE > cap {
                    return Err(SolverError::DepthCapExceeded { max_depth: cap });
                }
                current = deeper;
            }
        }
    }
}

/// Hierarchy depth used by [`integrate`] for this configuration.
pub fn select_depth(config: &SolverConfig) -> Result<usize, SolverError> {
    let d = config.validate()?;
    if let DepthMode::Fixed(n) = config.truncation.mode {
        return Ok(n);
    }
    let action = CommutatorAction {
        d,
        h0: config.h0.as_slice(),
        v: config.v.as_slice(),
    };
    let (depth, _) = scan_depth(
        config,
        &action,
        config.rho0.matrix().as_slice(),
        BlockChecks::Density { d },
    )?;
    Ok(depth)
}

/// Hierarchy state: auxiliary matrices `ρ̄_0 … ρ̄_N` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyState {
    pub t: f64,
    pub aux: Vec<ComplexMatrix>,
}

impl HierarchyState {
    /// `ρ̄₀ = ρ̂⁰`, all other levels zero.
    pub fn initial(rho0: &DensityMatrix, depth: usize) -> Self {
        let d = rho0.dim();
        let mut aux = vec![ComplexMatrix::zeros(d, d); depth + 1];
        aux[0] = rho0.matrix().clone();
        Self { t: 0.0, aux }
    }

    pub fn depth(&self) -> usize {
        self.aux.len() - 1
    }

    fn flatten(&self) -> Vec<Complex64> {
        self.aux
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }
}

/// Time derivative of every level of `state` under `config`, with the
/// terminator closing the top level.
pub fn hierarchy_rhs(
    state: &HierarchyState,
    config: &SolverConfig,
) -> Result<HierarchyState, SolverError> {
    let d = config.validate()?;
    let depth = state.depth();
    if depth < 1 {
        return Err(SolverError::InvalidTruncation(
            "depth must be at least 1".into(),
        ));
    }
    if state.aux.iter().any(|m| m.nrows() != d || m.ncols() != d) {
        return Err(QuantumError::DimensionMismatch {
            expected: d,
            found: state.aux[0].nrows(),
        }
        .into());
    }
    let coeffs = LevelCoefficients::new(&config.process, depth)?;
    let action = CommutatorAction {
        d,
        h0: config.h0.as_slice(),
        v: config.v.as_slice(),
    };
    let flat = state.flatten();
    let mut out = vec![ZERO; flat.len()];
    let mut scratch = vec![ZERO; d * d];
    let mut vx = vec![ZERO; d * d];
    hierarchy_derivative(&action, &coeffs, &flat, &mut out, &mut scratch, &mut vx);
    Ok(HierarchyState {
        t: state.t,
        aux: out
            .chunks(d * d)
            .map(|c| ComplexMatrix::from_column_slice(d, d, c))
            .collect(),
    })
}

/// Time derivative of the top level `ρ̄_N` alone.
pub fn terminator_rhs(
    state: &HierarchyState,
    config: &SolverConfig,
) -> Result<ComplexMatrix, SolverError> {
    let mut derivative = hierarchy_rhs(state, config)?;
    Ok(derivative.aux.pop().expect("depth ≥ 1"))
}

/// Noise-averaged state `ρ̂(t_k) = ρ̄₀(t_k)` on the configured grid.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub times: Vec<f64>,
    /// Re-symmetrized `(M + M†)/2` outputs.
    pub states: Vec<DensityMatrix>,
    pub diagnostics: Diagnostics,
}

/// Integrates the density-matrix hierarchy from `ρ̄₀(0) = ρ̂⁰`,
/// `ρ̄_n(0) = 0`.
pub fn integrate(config: &SolverConfig) -> Result<Evolution, SolverError> {
    let started = Instant::now();
    let d = config.validate()?;
    let action = CommutatorAction {
        d,
        h0: config.h0.as_slice(),
        v: config.v.as_slice(),
    };
    let (_, run) = scan_depth(
        config,
        &action,
        config.rho0.matrix().as_slice(),
        BlockChecks::Density { d },
    )?;
    let states = run
        .level0
        .iter()
        .map(|block| DensityMatrix::from_evolved(&ComplexMatrix::from_column_slice(d, d, block)))
        .collect();
    let mut diagnostics = run.diagnostics;
    diagnostics.wall_time = started.elapsed();
    Ok(Evolution {
        times: config.t_grid.clone(),
        states,
        diagnostics,
    })
}

/// Averaged dynamical map `ℰ(t_k) = ℰ̄₀(t_k)` (`d²×d²`, column-stacking
/// convention) on the configured grid.
#[derive(Debug, Clone)]
pub struct MapEvolution {
    pub times: Vec<f64>,
    pub maps: Vec<ComplexMatrix>,
    pub diagnostics: Diagnostics,
}

/// Integrates the propagator hierarchy from `ℰ̄₀(0) = 1`, `ℰ̄_n(0) = 0`.
/// `config.rho0` only fixes the dimension.
pub fn integrate_propagator(config: &SolverConfig) -> Result<MapEvolution, SolverError> {
    let started = Instant::now();
    let d = config.validate()?;
    let d2 = d * d;
    let action = SuperoperatorAction {
        d2,
        h0: quantum::liouvillian_matrix(&config.h0),
        v: quantum::liouvillian_matrix(&config.v),
    };
    let identity = ComplexMatrix::identity(d2, d2);
    let (_, run) = scan_depth(config, &action, identity.as_slice(), BlockChecks::Map)?;
    let maps = run
        .level0
        .iter()
        .map(|block| ComplexMatrix::from_column_slice(d2, d2, block))
        .collect();
    let mut diagnostics = run.diagnostics;
    diagnostics.wall_time = started.elapsed();
    Ok(MapEvolution {
        times: config.t_grid.clone(),
        maps,
        diagnostics,
    })
}

/// `devec(ℰ · vec(ρ))`, re-symmetrized.
pub fn apply_map(map: &ComplexMatrix, rho: &DensityMatrix) -> Result<DensityMatrix, QuantumError> {
    let d = rho.dim();
    if map.nrows() != d * d || map.ncols() != d * d {
        return Err(QuantumError::DimensionMismatch {
            expected: d * d,
            found: map.nrows(),
        });
    }
    let image = map * quantum::vectorize(rho.matrix());
    Ok(DensityMatrix::from_evolved(&quantum::devectorize(&image)?))
}
