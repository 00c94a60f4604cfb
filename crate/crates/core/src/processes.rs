//! The three diffusion processes whose backward generators have orthogonal
//! polynomial eigenfunctions: Ornstein–Uhlenbeck (scaled Hermite),
//! square-root / Cox–Ingersoll–Ross (scaled generalized Laguerre) and Jacobi
//! (scaled Jacobi).
//!
//! All three share the drift `A(Ω) = −γ(Ω − μ)`; they differ in the
//! diffusion coefficient `B(Ω)`, the range of `Ω` and the stationary law.
//! The eigenfunctions are normalized so that `f̄₀ = 1` and the recurrence
//! coefficients stay simple; they are orthogonal but not orthonormal.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProcessError {
    #[error("mean-reversion rate gamma must be positive and finite, got {gamma}")]
    NonPositiveRate { gamma: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
    #[error("parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("interval bounds must satisfy omega1 < omega2, got ({omega1}, {omega2})")]
    InvalidInterval { omega1: f64, omega2: f64 },
    #[error("mean mu = {mu} lies outside the process range ({lower}, {upper})")]
    MeanOutOfDomain { mu: f64, lower: f64, upper: f64 },
    #[error("stationary exponent {name} = {value} must exceed -1")]
    NonNormalizable { name: &'static str, value: f64 },
    #[error(
        "square-root process with gamma = {gamma} <= 1: hierarchy truncation is only sound for gamma > 1 \
         (pass --allow-unsound-truncation to override)"
    )]
    TruncationUnsound { gamma: f64 },
    #[error("recurrence coefficients are degenerate at level {n}")]
    DegenerateRecurrence { n: usize },
    #[error("omega = {omega} lies outside the process range ({lower}, {upper})")]
    DomainError { omega: f64, lower: f64, upper: f64 },
}

impl ProcessError {
    /// Stable machine-readable name of the error variant.
    pub fn code(&self) -> &'static str {
        match self {
            Self::NonPositiveRate { .. } => "NonPositiveRate",
            Self::NonFiniteParameter { .. } => "NonFiniteParameter",
            Self::NonPositiveParameter { .. } => "NonPositiveParameter",
            Self::InvalidInterval { .. } => "InvalidInterval",
            Self::MeanOutOfDomain { .. } => "MeanOutOfDomain",
            Self::NonNormalizable { .. } => "NonNormalizable",
            Self::TruncationUnsound { .. } => "TruncationUnsound",
            Self::DegenerateRecurrence { .. } => "DegenerateRecurrence",
            Self::DomainError { .. } => "DomainError",
        }
    }
}

/// Kind-specific diffusion parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessKind {
    /// `B(Ω) = σ²`. Note that `σ²` is the diffusion coefficient; the
    /// stationary variance is `σ²/2γ`.
    OrnsteinUhlenbeck { sigma2: f64 },
    /// `B(Ω) = c₁Ω + c₀` on `(−c₀/c₁, ∞)`.
    SquareRoot { c0: f64, c1: f64 },
    /// `B(Ω) = −c(Ω − ω₁)(Ω − ω₂)` on `(ω₁, ω₂)`.
    Jacobi { omega1: f64, omega2: f64, c: f64 },
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OrnsteinUhlenbeck { .. } => "ou",
            Self::SquareRoot { .. } => "sr",
            Self::Jacobi { .. } => "jacobi",
        }
    }
}

/// A diffusion process `dΩ = −γ(Ω − μ)dt + √B(Ω) dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessSpec {
    pub mu: f64,
    pub gamma: f64,
    pub kind: ProcessKind,
    /// Accept square-root processes with `γ ≤ 1`, for which the hierarchy
    /// truncation is not guaranteed to be sound.
    pub allow_unsound_truncation: bool,
}

/// Coefficients of `Ω f_n = a_n f_{n−1} + b_n f_n + c_n f_{n+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecurrenceTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ProcessSpec {
    pub fn ornstein_uhlenbeck(mu: f64, gamma: f64, sigma2: f64) -> Self {
        Self::with_kind(mu, gamma, ProcessKind::OrnsteinUhlenbeck { sigma2 })
    }

    pub fn square_root(mu: f64, gamma: f64, c0: f64, c1: f64) -> Self {
        Self::with_kind(mu, gamma, ProcessKind::SquareRoot { c0, c1 })
    }

    pub fn jacobi(mu: f64, gamma: f64, omega1: f64, omega2: f64, c: f64) -> Self {
        Self::with_kind(mu, gamma, ProcessKind::Jacobi { omega1, omega2, c })
    }

    fn with_kind(mu: f64, gamma: f64, kind: ProcessKind) -> Self {
        Self {
            mu,
            gamma,
            kind,
            allow_unsound_truncation: false,
        }
    }

    pub fn allowing_unsound_truncation(mut self, allow: bool) -> Self {
        self.allow_unsound_truncation = allow;
        self
    }

    /// Checks every parameter constraint. Each violated constraint maps to
    /// its own error variant.
    pub fn validate(&self) -> Result<(), ProcessError> {
        let finite = |name: &'static str, value: f64| {
            if value.is_finite() {
                Ok(())
            } else {
                Err(ProcessError::NonFiniteParameter { name, value })
            }
        };
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 {
                Ok(())
            } else {
                Err(ProcessError::NonPositiveParameter { name, value })
            }
        };
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(ProcessError::NonPositiveRate { gamma: self.gamma });
        }
        finite("mu", self.mu)?;
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                finite("sigma2", sigma2)?;
                positive("sigma2", sigma2)?;
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                finite("c0", c0)?;
                finite("c1", c1)?;
                positive("c1", c1)?;
                let (lower, upper) = self.domain();
                if self.mu <= lower {
                    return Err(ProcessError::MeanOutOfDomain {
                        mu: self.mu,
                        lower,
                        upper,
                    });
                }
                let (alpha, _) = self.shape_exponents();
                if alpha <= -1.0 {
                    return Err(ProcessError::NonNormalizable {
                        name: "alpha",
                        value: alpha,
                    });
                }
                if self.gamma <= 1.0 && !self.allow_unsound_truncation {
                    return Err(ProcessError::TruncationUnsound { gamma: self.gamma });
                }
            }
            ProcessKind::Jacobi { omega1, omega2, c } => {
                finite("omega1", omega1)?;
                finite("omega2", omega2)?;
                finite("c", c)?;
                positive("c", c)?;
                if omega1 >= omega2 {
                    return Err(ProcessError::InvalidInterval { omega1, omega2 });
                }
                if !(self.mu > omega1 && self.mu < omega2) {
                    return Err(ProcessError::MeanOutOfDomain {
                        mu: self.mu,
                        lower: omega1,
                        upper: omega2,
                    });
                }
                let (alpha, beta) = self.shape_exponents();
                if alpha <= -1.0 {
                    return Err(ProcessError::NonNormalizable {
                        name: "alpha",
                        value: alpha,
                    });
                }
                if beta <= -1.0 {
                    return Err(ProcessError::NonNormalizable {
                        name: "beta",
                        value: beta,
                    });
                }
            }
        }
        Ok(())
    }

    /// Warning text for a square-root process accepted only through the
    /// override flag.
    pub fn truncation_warning(&self) -> Option<String> {
        match self.kind {
            ProcessKind::SquareRoot { .. } if self.gamma <= 1.0 => Some(format!(
                "square-root process with gamma = {} <= 1: hierarchy truncation is not guaranteed to converge",
                self.gamma
            )),
            _ => None,
        }
    }

    /// Open range `(lower, upper)` of the process.
    pub fn domain(&self) -> (f64, f64) {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ProcessKind::SquareRoot { c0, c1 } => (-c0 / c1, f64::INFINITY),
            ProcessKind::Jacobi { omega1, omega2, .. } => (omega1, omega2),
        }
    }

    /// Stationary-law exponents `(α, β)`. For the Ornstein–Uhlenbeck process
    /// both are zero; for the square-root process only `α` is meaningful.
    pub fn shape_exponents(&self) -> (f64, f64) {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { .. } => (0.0, 0.0),
            ProcessKind::SquareRoot { c0, c1 } => {
                (2.0 * self.gamma / c1 * (self.mu + c0 / c1) - 1.0, 0.0)
            }
            ProcessKind::Jacobi { omega1, omega2, c } => {
                let width = omega2 - omega1;
                let scale = 2.0 * self.gamma / c;
                (
                    scale * (omega2 - self.mu) / width - 1.0,
                    scale * (self.mu - omega1) / width - 1.0,
                )
            }
        }
    }

    /// Generator eigenvalue `λ_n`: `nγ` for the Ornstein–Uhlenbeck and
    /// square-root processes, `nγ + ½cn(n−1)` for the Jacobi process.
    pub fn lambda(&self, n: usize) -> f64 {
        let nf = n as f64;
        match self.kind {
            ProcessKind::Jacobi { c, .. } => nf * self.gamma + 0.5 * c * nf * (nf - 1.0),
            _ => nf * self.gamma,
        }
    }

    /// Three-term recurrence coefficients at level `n` (with `a₀ = 0`).
    pub fn recurrence(&self, n: usize) -> Result<RecurrenceTriple, ProcessError> {
        let nf = n as f64;
        let triple = match self.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                let s = (sigma2 / (2.0 * self.gamma)).sqrt();
                RecurrenceTriple {
                    a: if n == 0 { 0.0 } else { s },
                    b: self.mu,
                    c: (nf + 1.0) * s,
                }
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                let (alpha, _) = self.shape_exponents();
                let scale = c1 / (2.0 * self.gamma);
                RecurrenceTriple {
                    a: if n == 0 {
                        0.0
                    } else {
                        -scale * (alpha + nf) / nf
                    },
                    b: scale * (alpha + 2.0 * nf + 1.0) - c0 / c1,
                    c: -scale * (nf + 1.0) * (nf + 1.0),
                }
            }
            ProcessKind::Jacobi { omega1, omega2, c } => {
                let (alpha, beta) = self.shape_exponents();
                let width = omega2 - omega1;
                if n == 0 {
                    // Limits of the general expressions; the general form is
                    // 0/0 when α + β ∈ {−1, 0}.
                    RecurrenceTriple {
                        a: 0.0,
                        b: omega2 - width * (alpha + 1.0) / (alpha + beta + 2.0),
                        c: width * c / (2.0 * self.gamma),
                    }
                } else {
                    let eta = alpha + beta + 2.0 * nf;
                    RecurrenceTriple {
                        a: width * (alpha + nf) * (beta + nf) / (nf * eta * (eta + 1.0)),
                        b: omega2
                            - 0.5
                                * width
                                * ((alpha * alpha - beta * beta) / (eta * (eta + 2.0)) + 1.0),
                        c: width * (nf + 1.0) * (nf + 1.0) * (eta - nf + 1.0)
                            / ((eta + 1.0) * (eta + 2.0)),
                    }
                }
            }
        };
        let degenerate = !(triple.a.is_finite() && triple.b.is_finite() && triple.c.is_finite())
            || triple.c == 0.0
            || (n > 0 && triple.a == 0.0);
        if degenerate {
            return Err(ProcessError::DegenerateRecurrence { n });
        }
        Ok(triple)
    }

    /// Ratio `|c_n / a_n|` of up- to down-coupling in the recurrence. The
    /// terminator needs it to grow without bound; it grows like `n` for the
    /// Ornstein–Uhlenbeck and Jacobi processes and like `n²` for the
    /// square-root process.
    pub fn coupling_ratio(&self, n: usize) -> Result<f64, ProcessError> {
        let t = self.recurrence(n.max(1))?;
        Ok((t.c / t.a).abs())
    }

    fn check_in_closure(&self, omega: f64) -> Result<(), ProcessError> {
        let (lower, upper) = self.domain();
        if omega.is_nan() || omega < lower || omega > upper {
            return Err(ProcessError::DomainError {
                omega,
                lower,
                upper,
            });
        }
        Ok(())
    }

    /// Backward eigenfunctions `f̄_0(Ω), …, f̄_{n_max}(Ω)`, generated upward
    /// from `f̄₀ = 1` by the three-term recurrence.
    pub fn eigenfunctions(&self, n_max: usize, omega: f64) -> Result<Vec<f64>, ProcessError> {
        self.check_in_closure(omega)?;
        let mut values = Vec::with_capacity(n_max + 1);
        values.push(1.0);
        let mut previous = 0.0;
        for n in 0..n_max {
            let t = self.recurrence(n)?;
            let current = values[n];
            let next = ((omega - t.b) * current - t.a * previous) / t.c;
            previous = current;
            values.push(next);
        }
        Ok(values)
    }

    /// Single backward eigenfunction `f̄_n(Ω)`.
    pub fn eigenfunction_backward(&self, n: usize, omega: f64) -> Result<f64, ProcessError> {
        Ok(self.eigenfunctions(n, omega)?[n])
    }

    /// Stationary density `P⁰(Ω)`; zero outside the process range.
    pub fn stationary_pdf(&self, omega: f64) -> f64 {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                let d = omega - self.mu;
                (self.gamma / (std::f64::consts::PI * sigma2)).sqrt()
                    * (-self.gamma * d * d / sigma2).exp()
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                let shifted = omega + c0 / c1;
                if shifted <= 0.0 {
                    return 0.0;
                }
                self.square_root_pdf(shifted)
            }
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                if omega <= omega1 || omega >= omega2 {
                    return 0.0;
                }
                self.jacobi_pdf(omega - omega1, omega2 - omega)
            }
        }
    }

    /// Gamma density in terms of the distance `y = Ω + c₀/c₁` from the lower
    /// boundary.
    pub(crate) fn square_root_pdf(&self, y: f64) -> f64 {
        let ProcessKind::SquareRoot { c1, .. } = self.kind else {
            unreachable!("square_root_pdf on a non square-root process")
        };
        let (alpha, _) = self.shape_exponents();
        let rate = 2.0 * self.gamma / c1;
        ((alpha + 1.0) * rate.ln() - ln_gamma(alpha + 1.0) + alpha * y.ln() - rate * y).exp()
    }

    /// Beta density in terms of the distances to both interval ends.
    pub(crate) fn jacobi_pdf(&self, to_lower: f64, to_upper: f64) -> f64 {
        let ProcessKind::Jacobi { omega1, omega2, .. } = self.kind else {
            unreachable!("jacobi_pdf on a non Jacobi process")
        };
        let (alpha, beta) = self.shape_exponents();
        let width = omega2 - omega1;
        (beta * to_lower.ln() + alpha * to_upper.ln()
            - (alpha + beta + 1.0) * width.ln()
            - ln_beta(beta + 1.0, alpha + 1.0))
        .exp()
    }

    /// `E[f(Ω)]` under the stationary law, by double-exponential quadrature.
    pub fn stationary_expectation(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { .. } => quadrature::sinh_sinh(
                |x| self.stationary_pdf(x) * f(x),
                self.mu,
                self.stationary_variance().sqrt(),
            ),
            ProcessKind::SquareRoot { c0, c1 } => quadrature::exp_sinh(
                |x, y| self.square_root_pdf(y) * f(x),
                -c0 / c1,
                self.stationary_variance().sqrt(),
            ),
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                quadrature::tanh_sinh(|x, lo, hi| self.jacobi_pdf(lo, hi) * f(x), omega1, omega2)
            }
        }
    }

    /// Drift `A(Ω)` and diffusion `B(Ω)` of the Itô SDE.
    pub fn sde_coefficients(&self, omega: f64) -> (f64, f64) {
        let drift = -self.gamma * (omega - self.mu);
        let diffusion = match self.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => sigma2,
            ProcessKind::SquareRoot { c0, c1 } => c1 * omega + c0,
            ProcessKind::Jacobi { omega1, omega2, c } => -c * (omega - omega1) * (omega - omega2),
        };
        (drift, diffusion)
    }

    /// Mean of the stationary law (always `μ`).
    pub fn stationary_mean(&self) -> f64 {
        self.mu
    }

    /// Variance of the stationary law.
    pub fn stationary_variance(&self) -> f64 {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => sigma2 / (2.0 * self.gamma),
            ProcessKind::SquareRoot { c1, .. } => {
                let (alpha, _) = self.shape_exponents();
                let scale = c1 / (2.0 * self.gamma);
                (alpha + 1.0) * scale * scale
            }
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                let (alpha, beta) = self.shape_exponents();
                let (p, q) = (beta + 1.0, alpha + 1.0);
                let width = omega2 - omega1;
                width * width * p * q / ((p + q) * (p + q) * (p + q + 1.0))
            }
        }
    }

    /// Draws one value from the stationary law.
    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            ProcessKind::OrnsteinUhlenbeck { .. } => {
                Normal::new(self.mu, self.stationary_variance().sqrt())
                    .expect("validated variance")
                    .sample(rng)
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                let (alpha, _) = self.shape_exponents();
                let draw = Gamma::new(alpha + 1.0, c1 / (2.0 * self.gamma))
                    .expect("validated shape")
                    .sample(rng);
                draw - c0 / c1
            }
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                let (alpha, beta) = self.shape_exponents();
                let u = Beta::new(beta + 1.0, alpha + 1.0)
                    .expect("validated exponents")
                    .sample(rng);
                omega1 + (omega2 - omega1) * u
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::properties::{self, bulk_points};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1_ou() -> ProcessSpec {
        ProcessSpec::ornstein_uhlenbeck(1.0, 1.5, 0.3)
    }

    fn fig1_sr() -> ProcessSpec {
        ProcessSpec::square_root(1.0, 1.5, 0.0, 1.0)
    }

    fn fig1_jacobi() -> ProcessSpec {
        ProcessSpec::jacobi(1.0, 1.5, 0.125, 8.0, 1.0)
    }

    #[test]
    fn validate_accepts_fig1_specs() {
        assert!(fig1_ou().validate().is_ok());
        assert!(fig1_sr().validate().is_ok());
        let jacobi = fig1_jacobi();
        assert!(jacobi.validate().is_ok());
        let (alpha, beta) = jacobi.shape_exponents();
        assert!((alpha - 5.0 / 3.0).abs() < 1e-14);
        assert!((beta + 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn validate_rejects_slow_square_root() {
        let slow = ProcessSpec::square_root(1.0, 0.8, 0.0, 1.0);
        assert_eq!(
            slow.validate(),
            Err(ProcessError::TruncationUnsound { gamma: 0.8 })
        );
        assert!(slow.allowing_unsound_truncation(true).validate().is_ok());
        assert!(slow.truncation_warning().is_some());
    }

    #[test]
    fn validate_names_each_violation() {
        assert_eq!(
            ProcessSpec::ornstein_uhlenbeck(1.0, 0.0, 0.3)
                .validate()
                .unwrap_err()
                .code(),
            "NonPositiveRate"
        );
        assert_eq!(
            ProcessSpec::ornstein_uhlenbeck(1.0, 1.0, -0.3)
                .validate()
                .unwrap_err()
                .code(),
            "NonPositiveParameter"
        );
        assert_eq!(
            ProcessSpec::jacobi(9.0, 1.5, 0.125, 8.0, 1.0)
                .validate()
                .unwrap_err()
                .code(),
            "MeanOutOfDomain"
        );
        assert_eq!(
            ProcessSpec::jacobi(0.125, 1.5, 0.125, 8.0, 1.0)
                .validate()
                .unwrap_err()
                .code(),
            "MeanOutOfDomain"
        );
        assert_eq!(
            ProcessSpec::jacobi(1.0, 1.5, 8.0, 0.125, 1.0)
                .validate()
                .unwrap_err()
                .code(),
            "InvalidInterval"
        );
        assert_eq!(
            ProcessSpec::square_root(-1.0, 1.5, 0.0, 1.0)
                .validate()
                .unwrap_err()
                .code(),
            "MeanOutOfDomain"
        );
        assert_eq!(
            ProcessSpec::ornstein_uhlenbeck(f64::NAN, 1.5, 0.3)
                .validate()
                .unwrap_err()
                .code(),
            "NonFiniteParameter"
        );
    }

    #[test]
    fn eigenvalues_follow_generator_formula() {
        assert_eq!(fig1_ou().lambda(2), 3.0);
        assert_eq!(fig1_jacobi().lambda(3), 7.5);
        for spec in [fig1_ou(), fig1_sr(), fig1_jacobi()] {
            assert_eq!(spec.lambda(0), 0.0);
            for n in 0..50 {
                assert!(spec.lambda(n + 1) > spec.lambda(n));
            }
        }
        let jacobi = fig1_jacobi();
        let ratios: Vec<f64> = [10, 100, 1000]
            .iter()
            .map(|&n| jacobi.lambda(n) / n as f64)
            .collect();
        assert!(ratios[1] > 5.0 * ratios[0] && ratios[2] > 5.0 * ratios[1]);
    }

    #[test]
    fn ou_recurrence_values() {
        let t0 = fig1_ou().recurrence(0).unwrap();
        assert_eq!(t0.a, 0.0);
        assert_eq!(t0.b, 1.0);
        assert!((t0.c - 0.1_f64.sqrt()).abs() < 1e-15);
        assert_eq!(fig1_ou().recurrence(5).unwrap().b, 1.0);
    }

    #[test]
    fn square_root_recurrence_values() {
        let t1 = fig1_sr().recurrence(1).unwrap();
        assert!((t1.a + 1.0).abs() < 1e-14);
        assert!((t1.b - 5.0 / 3.0).abs() < 1e-14);
        assert!((t1.c + 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_level_zero_diagonal_is_mean() {
        // holds for α+β ∈ {−1, 0} too, where the general form is 0/0
        for (gamma, c) in [(1.5, 1.0), (0.5, 1.0), (1.0, 1.0), (0.25, 2.0)] {
            let spec = ProcessSpec::jacobi(0.3, gamma, -1.0, 2.0, c);
            if spec.validate().is_err() {
                continue;
            }
            let t0 = spec.recurrence(0).unwrap();
            assert!((t0.b - 0.3).abs() < 1e-13, "gamma={gamma} c={c}");
            assert!(t0.c.is_finite() && t0.c > 0.0);
            for n in 1..30 {
                assert!(spec.recurrence(n).is_ok());
            }
        }
    }

    #[test]
    fn coupling_ratio_grows() {
        for spec in [fig1_ou(), fig1_sr(), fig1_jacobi()] {
            let r10 = spec.coupling_ratio(10).unwrap();
            let r100 = spec.coupling_ratio(100).unwrap();
            assert!(r100 > 5.0 * r10, "{:?}: {r10} -> {r100}", spec.kind);
        }
    }

    #[test]
    fn eigenfunction_examples() {
        let ou = fig1_ou();
        assert_eq!(ou.eigenfunction_backward(0, 3.7).unwrap(), 1.0);
        assert!(ou.eigenfunction_backward(1, 1.0).unwrap().abs() < 1e-15);
        assert!((ou.eigenfunction_backward(2, 1.1).unwrap() + 0.45).abs() < 1e-13);
        assert!(matches!(
            fig1_jacobi().eigenfunction_backward(2, 9.0),
            Err(ProcessError::DomainError { .. })
        ));
        assert!(fig1_sr().eigenfunction_backward(2, -0.1).is_err());
    }

    /// Direct polynomial forms of the scaled Hermite, Laguerre and Jacobi
    /// families, evaluated by explicit sums.
    fn direct_polynomial(spec: &ProcessSpec, n: usize, omega: f64) -> f64 {
        let (alpha, beta) = spec.shape_exponents();
        let factorial = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        match spec.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                let x = (2.0 * spec.gamma / sigma2).sqrt() * (omega - spec.mu);
                (0..=n / 2)
                    .map(|m| {
                        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                        sign * x.powi((n - 2 * m) as i32)
                            / (factorial(m) * 2f64.powi(m as i32) * factorial(n - 2 * m))
                    })
                    .sum()
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                let y = 2.0 * spec.gamma / c1 * (omega + c0 / c1);
                // binom(n+α, n−m) via Gamma functions
                let binom = |m: usize| {
                    (ln_gamma(n as f64 + alpha + 1.0)
                        - ln_gamma((n - m) as f64 + 1.0)
                        - ln_gamma(m as f64 + alpha + 1.0))
                    .exp()
                };
                (0..=n)
                    .map(|m| binom(m) * (-y).powi(m as i32) / factorial(m))
                    .sum::<f64>()
                    / factorial(n)
            }
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                let z = (omega - omega2) / (omega2 - omega1);
                let nf = n as f64;
                // P_n^{(α,β)}(x) = Γ(α+n+1)/(n!Γ(α+β+n+1)) Σ C(n,m) Γ(α+β+n+m+1)/Γ(α+m+1) ((x−1)/2)^m
                let prefactor = (ln_gamma(alpha + nf + 1.0) - ln_gamma(alpha + beta + nf + 1.0))
                    .exp()
                    / factorial(n);
                let sum: f64 = (0..=n)
                    .map(|m| {
                        let binom = factorial(n) / (factorial(m) * factorial(n - m));
                        binom
                            * (ln_gamma(alpha + beta + nf + m as f64 + 1.0)
                                - ln_gamma(alpha + m as f64 + 1.0))
                            .exp()
                            * z.powi(m as i32)
                    })
                    .sum();
                prefactor * sum / factorial(n)
            }
        }
    }

    #[test]
    fn recurrence_matches_direct_polynomials() {
        let cases = [
            (fig1_ou(), vec![-0.5, 0.2, 1.0, 1.4, 2.3]),
            (fig1_sr(), vec![0.0, 0.3, 1.0, 2.5, 6.0]),
            (fig1_jacobi(), vec![0.2, 0.9, 3.0, 5.5, 7.9]),
        ];
        for (spec, points) in cases {
            for &omega in &points {
                let values = spec.eigenfunctions(30, omega).unwrap();
                for n in 0..=30 {
                    let direct = direct_polynomial(&spec, n, omega);
                    let scale = direct.abs().max(values[n].abs()).max(1e-300);
                    // alternating sums lose digits; the recurrence is the
                    // stable route, so compare at the sum's own accuracy
                    let sum_noise = 1e-13
                        * (0..=n)
                            .map(|m| direct_term_bound(&spec, n, m, omega))
                            .sum::<f64>();
                    assert!(
                        (values[n] - direct).abs() <= 1e-10 * scale + sum_noise,
                        "{:?} n={n} omega={omega}: {} vs {direct}",
                        spec.kind,
                        values[n]
                    );
                }
            }
        }
    }

    /// Magnitude of the largest summand in the direct sums, to bound
    /// their cancellation error.
    fn direct_term_bound(spec: &ProcessSpec, n: usize, m: usize, omega: f64) -> f64 {
        let (alpha, beta) = spec.shape_exponents();
        let nf = n as f64;
        let lf = |k: f64| ln_gamma(k + 1.0);
        match spec.kind {
            ProcessKind::OrnsteinUhlenbeck { sigma2 } => {
                if 2 * m > n {
                    return 0.0;
                }
                let x = ((2.0 * spec.gamma / sigma2).sqrt() * (omega - spec.mu)).abs();
                (((n - 2 * m) as f64) * x.max(1e-300).ln()
                    - lf(m as f64)
                    - m as f64 * 2f64.ln()
                    - lf((n - 2 * m) as f64))
                .exp()
            }
            ProcessKind::SquareRoot { c0, c1 } => {
                let y = (2.0 * spec.gamma / c1 * (omega + c0 / c1))
                    .abs()
                    .max(1e-300);
                (ln_gamma(nf + alpha + 1.0) - lf((n - m) as f64) - ln_gamma(m as f64 + alpha + 1.0)
                    + m as f64 * y.ln()
                    - lf(m as f64)
                    - lf(nf))
                .exp()
            }
            ProcessKind::Jacobi { omega1, omega2, .. } => {
                let z = ((omega - omega2) / (omega2 - omega1)).abs().max(1e-300);
                let mf = m as f64;
                (ln_gamma(alpha + nf + 1.0) - ln_gamma(alpha + beta + nf + 1.0) - 2.0 * lf(nf)
                    + lf(nf)
                    - lf(mf)
                    - lf(nf - mf)
                    + ln_gamma(alpha + beta + nf + mf + 1.0)
                    - ln_gamma(alpha + mf + 1.0)
                    + mf * z.ln())
                .exp()
            }
        }
    }

    #[test]
    fn stationary_density_values() {
        let ou = fig1_ou();
        assert!(
            (ou.stationary_pdf(1.0) - (1.5 / (std::f64::consts::PI * 0.3)).sqrt()).abs() < 1e-14
        );
        assert!((ou.stationary_pdf(1.0) - 1.26157).abs() < 1e-5);
        assert_eq!(fig1_jacobi().stationary_pdf(0.125 - 0.1), 0.0);
        assert_eq!(fig1_jacobi().stationary_pdf(8.5), 0.0);
        assert_eq!(fig1_sr().stationary_pdf(-0.5), 0.0);
    }

    #[test]
    fn stationary_density_is_normalized_with_mean_mu() {
        for spec in [fig1_ou(), fig1_sr(), fig1_jacobi()] {
            let mass = spec.stationary_expectation(|_| 1.0);
            let mean = spec.stationary_expectation(|x| x);
            let second = spec.stationary_expectation(|x| (x - spec.mu).powi(2));
            assert!((mass - 1.0).abs() < 1e-8, "{:?}: mass {mass}", spec.kind);
            assert!(
                (mean - spec.mu).abs() < 1e-8,
                "{:?}: mean {mean}",
                spec.kind
            );
            assert!(
                (second - spec.stationary_variance()).abs() < 1e-8,
                "{:?}: variance {second}",
                spec.kind
            );
        }
    }

    #[test]
    fn sde_coefficient_examples() {
        for spec in [fig1_ou(), fig1_sr(), fig1_jacobi()] {
            assert_eq!(spec.sde_coefficients(spec.mu).0, 0.0);
        }
        assert_eq!(fig1_jacobi().sde_coefficients(0.125).1, 0.0);
        assert_eq!(fig1_jacobi().sde_coefficients(8.0).1, 0.0);
        assert_eq!(fig1_ou().sde_coefficients(2.0).0, -1.5);
    }

    fn sample_mean(spec: &ProcessSpec, draws: usize, seed: u64) -> (f64, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..draws)
            .map(|_| spec.sample_stationary(&mut rng))
            .collect();
        (samples.iter().sum::<f64>() / draws as f64, samples)
    }

    #[test]
    fn stationary_sampling_moments() {
        let n = 100_000;
        for spec in [fig1_ou(), fig1_sr(), fig1_jacobi()] {
            let (mean, samples) = sample_mean(&spec, n, 11);
            let bound = 4.0 * spec.stationary_variance().sqrt() / (n as f64).sqrt();
            assert!((mean - spec.mu).abs() < bound, "{:?}: {mean}", spec.kind);
            let (lower, upper) = spec.domain();
            assert!(samples
                .iter()
                .all(|&x| x > lower && x < upper || (x == lower && lower.is_finite())));
        }
        let (_, jacobi) = sample_mean(&fig1_jacobi(), n, 3);
        assert!(jacobi.iter().all(|&x| x >= 0.125 && x <= 8.0));
    }

    fn random_spec() -> impl Strategy<Value = ProcessSpec> {
        prop_oneof![
            (-2.0..2.0f64, 0.3..3.0f64, 0.05..2.0f64)
                .prop_map(|(mu, gamma, s2)| ProcessSpec::ornstein_uhlenbeck(mu, gamma, s2)),
            (0.2..3.0f64, 1.05..3.0f64, -1.0..1.0f64, 0.3..2.0f64).prop_map(
                |(offset, gamma, c0, c1)| {
                    ProcessSpec::square_root(-c0 / c1 + offset, gamma, c0, c1)
                }
            ),
            (
                0.05..0.95f64,
                0.5..3.0f64,
                -2.0..0.0f64,
                0.5..4.0f64,
                0.3..2.0f64
            )
                .prop_map(|(frac, gamma, lo, width, c)| ProcessSpec::jacobi(
                    lo + frac * width,
                    gamma,
                    lo,
                    lo + width,
                    c
                )),
        ]
        .prop_filter("valid parameters", |s| s.validate().is_ok())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn recurrence_is_consistent(spec in random_spec()) {
            for omega in bulk_points(&spec, 50) {
                let values = spec.eigenfunctions(21, omega).unwrap();
                for n in 0..=20 {
                    let t = spec.recurrence(n).unwrap();
                    let previous = if n == 0 { 0.0 } else { values[n - 1] };
                    let rhs = t.a * previous + t.b * values[n] + t.c * values[n + 1];
                    let lhs = omega * values[n];
                    let scale = 1.0 + values[n + 1].abs() + (omega * values[n]).abs();
                    prop_assert!((lhs - rhs).abs() <= 1e-8 * scale, "n={} omega={}", n, omega);
                }
            }
        }

        #[test]
        fn eigenfunctions_solve_backward_generator(spec in random_spec()) {
            let defect = properties::eigenrelation_defect(&spec, 10, 12);
            prop_assert!(defect <= 1e-5, "{:?}: {}", spec.kind, defect);
        }

        #[test]
        fn eigenfunctions_are_orthogonal(spec in random_spec()) {
            let defect = properties::orthogonality_defect(&spec, 12);
            prop_assert!(defect <= 1e-8, "{:?}: {}", spec.kind, defect);
        }
    }
}
