//! Second-order perturbative energy on the discrete mode set. Independent
//! of the Fock/Lanczos pipeline, so it serves as an oracle for the weak
//! coupling regime: the exact truncated ground energy must approach this
//! value like the fourth power of the coupling.

use crate::error::CoreError;
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::vec3::{self, Vec3};
use crate::Result;

/// Excitation denominators closer to zero than this are rejected rather
/// than summed; the perturbative series is meaningless at the continuum.
const MIN_GAP: f64 = 1e-10;

/// Rayleigh-Schroedinger energy through second order at total momentum `p`:
/// `|p|^2/2` lowered by every one-phonon virtual excitation,
/// `sum_j g_j^2 / (|p - k_j|^2/2 + omega_kappa(k_j) - |p|^2/2)`.
///
/// Fails if any denominator is nonpositive (momentum at or beyond the
/// one-phonon continuum), naming the offending mode.
pub fn pt2_energy(grid: &Grid, params: &ModelParams, p: Vec3) -> Result<f64> {
    let e0 = 0.5 * vec3::norm2(p);
    let mut shift = 0.0;
    for (j, mode) in grid.modes.iter().enumerate() {
        if mode.coupling == 0.0 {
            continue;
        }
        let denom = 0.5 * vec3::norm2(vec3::sub(p, mode.k)) + params.omega(mode.k) - e0;
        if denom <= MIN_GAP {
            return Err(CoreError::InvalidParams(format!(
                "pt2 denominator {:.3e} at mode {} (k = [{}, {}, {}]): momentum \
                 [{}, {}, {}] reaches the one-phonon continuum",
                denom, j, mode.k[0], mode.k[1], mode.k[2], p[0], p[1], p[2]
            )));
        }
        shift += mode.coupling * mode.coupling / denom;
    }
    Ok(e0 - shift)
}
