//! Numerical checks of the provable ground-state properties at desk scale:
//! a perturbative energy oracle, the Gross/convexity/Lipschitz bounds on the
//! energy-momentum shell, the HVZ-type gap above the ground energy,
//! pull-through decay of the phonon amplitudes, cutoff and infrared
//! regularization scans, and the critical-momentum estimate.
//!
//! Every operation here drives the same pipeline (grid -> Fock basis ->
//! sparse Hamiltonian -> Lanczos) and reports plain data; checks that can
//! fail return a report with margins rather than panicking, so a violated
//! inequality is visible in the emitted tables.

mod bounds;
mod perturbation;
mod pstar;
mod pullthrough;
mod scans;

pub use bounds::{
    check_gross_convexity, hvz_gap, CheckMargin, GapReport, GrossConvexityReport, PairMargin,
};
pub use perturbation::pt2_energy;
pub use pstar::{
    default_eps_crit, estimate_pstar, pstar_bare_threshold, PstarReport, PstarRow, DEFAULT_Z_CRIT,
};
pub use pullthrough::{
    equicontinuity_check, pullthrough_envelope, EnvelopeReport, EquicontinuityReport, ModeEnvelope,
};
pub use scans::{
    richardson_extrapolate, scan_ir, scan_momentum, scan_uv, IrScanRow, ScanRow, ScanTable,
    UvScanRow, UvScanTable,
};

use crate::fock::{assemble, FockBasis};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::solver::{lanczos_ground, GroundState, LanczosOpts};
use crate::vec3::{self, Vec3};
use crate::Result;

/// One ground-state solve of `H(p)` on an already-built basis.
pub(crate) fn solve_at(
    grid: &Grid,
    basis: &FockBasis,
    params: &ModelParams,
    p: Vec3,
    opts: &LanczosOpts,
) -> Result<GroundState> {
    let m = params.with_momentum(p);
    let h = assemble(grid, basis, &m)?;
    lanczos_ground(&h, opts)
}

/// Quasiparticle residue `Z = |<vacuum, psi>|^2`; the vacuum is basis
/// index 0.
pub fn vacuum_weight(psi: &[f64]) -> f64 {
    psi.first().map_or(0.0, |a| a * a)
}

/// `<psi, N psi>` on the truncated basis.
pub fn mean_phonons(basis: &FockBasis, psi: &[f64]) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(i, a)| a * a * basis.state(i).phonons() as f64)
        .sum()
}

/// `<psi, dGamma(p_hat)_z psi>`; diagonal in the occupation basis.
pub fn mean_momentum_z(basis: &FockBasis, grid: &Grid, psi: &[f64]) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(i, a)| {
            let mut kz = 0.0;
            for &j in basis.state(i).modes() {
                kz += grid.modes[j as usize].k[2];
            }
            a * a * kz
        })
        .sum()
}

/// Indices of grid modes usable as single-phonon threshold samples:
/// `0 < |k_j| <= radius`. The interior restriction keeps boundary modes,
/// whose discretization error is worst, out of threshold minima.
pub(crate) fn threshold_samples(grid: &Grid, radius: f64) -> Vec<usize> {
    grid.modes
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let r = vec3::norm(m.k);
            r > 0.0 && r <= radius
        })
        .map(|(j, _)| j)
        .collect()
}
