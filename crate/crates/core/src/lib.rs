//! Mixing and dissipation times of noisy piecewise-affine Bernoulli maps on the torus.
//!
//! The chain is `X_{n+1} = φ(X_n) + ε ζ_{n+1}` on `T^d`. Densities evolve under
//! `T* = K_ε ∗ U*`, where `U*` is the pushforward by `φ`.

pub mod bounds;
pub mod bump;
pub mod density;
pub mod error;
pub mod exact;
pub mod io;
pub mod kernels;
pub mod maps;
pub mod metrics;
pub mod spectral;

pub use error::{Error, Result};
