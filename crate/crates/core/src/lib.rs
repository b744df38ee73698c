//! Numerical laboratory for the Bogoliubov-Frohlich polaron Hamiltonian at
//! fixed total momentum.
//!
//! The crate builds truncated Fock-space representations of
//! `H(P) = 1/2 (P - dGamma(k))^2 + dGamma(omega_kappa) + phi(v)` over finite
//! momentum grids, solves for ground states with a Lanczos iteration, and
//! evaluates the ultraviolet counterterms and comparison kernels of the
//! renormalized model by adaptive quadrature. The diagnostics module checks
//! the provable spectral inequalities (Gross ordering, convexity of the
//! mass shell, HVZ-type gaps, pull-through decay of phonon amplitudes) on
//! desk-scale configurations.
//!
//! Parallel execution uses rayon and is enabled by the default `parallel`
//! feature; without it every kernel falls back to an equivalent sequential
//! path that produces bit-identical results.

pub mod diagnostics;
pub mod error;
pub mod fock;
pub mod grid;
pub mod model;
pub mod quad;
pub mod renorm;
pub mod solver;
pub mod vec3;

pub use error::{CoreError, Result};

/// Size of the global rayon pool, best effort. With the `parallel` feature
/// disabled this is a no-op and `Err` is never returned.
pub fn set_thread_count(n: usize) -> std::result::Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}
