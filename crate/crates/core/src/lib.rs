//! Averaged dynamics of quantum systems driven linearly by diffusive Markov
//! noise, `H(t) = H₀ + Ω(t)V`.
//!
//! * [`processes`]: the Ornstein–Uhlenbeck, square-root and Jacobi noise
//!   processes and their polynomial eigenfunctions.
//! * [`properties`]: numerical checks of orthogonality and of the generator
//!   eigenrelation.
//! * [`hierarchy`]: builds and integrates the hierarchical equations of
//!   motion for the averaged density matrix and for the averaged map.
//! * [`montecarlo`]: trajectory sampling and averaging, used as an
//!   independent oracle.
//! * [`rydberg`]: Stark-tuned Förster transfer between two Rydberg atoms.
//! * [`validation`]: hierarchy versus Monte Carlo on random problems.

pub mod hierarchy;
pub mod montecarlo;
pub mod processes;
pub mod properties;
pub mod quadrature;
pub mod quantum;
pub mod rydberg;
pub mod validation;
