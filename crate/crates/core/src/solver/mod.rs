//! Ground-state eigensolvers.
//!
//! `lanczos_ground` is the production path: restarted Lanczos with full
//! reorthogonalization against all stored basis vectors, deterministic for
//! a fixed seed. `dense_ground_oracle` is an intentionally independent
//! reference (Householder tridiagonalization plus implicit-shift QL on a
//! dense copy) used by tests to validate the iterative path; the small
//! projected matrices inside Lanczos are diagonalized by cyclic Jacobi so
//! the two routes share no eigensolver code.

mod dense;
mod lanczos;

pub use dense::{dense_ground_oracle, DENSE_ORACLE_MAX_DIM};
pub use lanczos::{lanczos_ground, random_sparse, GroundState, LanczosOpts};
