//! Estimate of the critical momentum: the first schedule point where the
//! one-phonon emission margin closes (or the vacuum weight collapses).
//! Momentum runs along +z, so emission thresholds are sampled over the
//! on-axis modes; the minimizing phonon for a z-schedule is aligned with
//! the momentum, and on-axis arguments keep every auxiliary solve on the
//! z-axis where they can be shared across the schedule.

use std::collections::HashMap;

use crate::error::CoreError;
use crate::fock::{enumerate_basis, FockBasis};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::solver::LanczosOpts;
use crate::vec3;
use crate::Result;

use super::{solve_at, vacuum_weight};

/// Default vacuum-weight criterion.
pub const DEFAULT_Z_CRIT: f64 = 0.1;

/// Default margin criterion, `1e-3 c^2`.
pub fn default_eps_crit(c: f64) -> f64 {
    1e-3 * c * c
}

#[derive(Debug, Clone)]
pub struct PstarRow {
    pub p: f64,
    pub energy: f64,
    pub z: f64,
    /// `min_j [E(P - k_j) + omega_kappa(k_j)] - E(P)` over on-axis modes.
    pub delta: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PstarReport {
    pub curve: Vec<PstarRow>,
    /// First schedule momentum with `delta <= eps_crit`; `None` means the
    /// criterion never fired, i.e. the estimate is "> max P".
    pub p_star_delta: Option<f64>,
    /// First schedule momentum with `z < z_crit`.
    pub p_star_z: Option<f64>,
    pub eps_crit: f64,
    pub z_crit: f64,
    pub c: f64,
}

impl PstarReport {
    /// Effective mass from the margin criterion, `P_*/c`.
    pub fn mass_delta(&self) -> Option<f64> {
        self.p_star_delta.map(|p| p / self.c)
    }

    pub fn mass_z(&self) -> Option<f64> {
        self.p_star_z.map(|p| p / self.c)
    }
}

/// Closed-form momentum where the free-particle margin
/// `min_j [k_j^2/2 + omega_kappa(k_j) - P k_jz]` drops to `eps`, over all
/// modes with positive `k_jz`. At `g = 0` this is where `estimate_pstar`'s
/// delta criterion fires, so it quantifies the grid's offset from the
/// continuum value `c`. `None` if no mode has momentum along +z.
pub fn pstar_bare_threshold(grid: &Grid, params: &ModelParams, eps: f64) -> Option<f64> {
    grid.modes
        .iter()
        .filter(|m| m.k[2] > 1e-12)
        .map(|m| (0.5 * vec3::norm2(m.k) + params.omega(m.k) - eps) / m.k[2])
        .min_by(f64::total_cmp)
}

/// Walk an ascending momentum schedule, tracking the dressed one-phonon
/// margin and the vacuum weight, and report the first crossing of each
/// criterion. Needs a grid with on-axis modes (odd cartesian `n`); shifted
/// energies are memoized since on-axis shifts of on-axis momenta recur
/// across the schedule.
pub fn estimate_pstar(
    grid: &Grid,
    params: &ModelParams,
    p_list: &[f64],
    n_max: usize,
    eps_crit: f64,
    z_crit: f64,
    opts: &LanczosOpts,
) -> Result<PstarReport> {
    if p_list.is_empty() {
        return Err(CoreError::EmptyInput("momentum schedule".into()));
    }
    for w in p_list.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::InvalidParams(format!(
                "momentum schedule must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(eps_crit >= 0.0) || !eps_crit.is_finite() {
        return Err(CoreError::InvalidParams(format!(
            "eps_crit must be nonnegative and finite, got {eps_crit}"
        )));
    }
    if !(z_crit > 0.0 && z_crit < 1.0) {
        return Err(CoreError::InvalidParams(format!(
            "z_crit must lie in (0, 1), got {z_crit}"
        )));
    }
    let shifts: Vec<f64> = grid
        .modes
        .iter()
        .filter(|m| m.k[0].abs() <= 1e-12 && m.k[1].abs() <= 1e-12 && m.k[2] > 1e-12)
        .map(|m| m.k[2])
        .collect();
    if shifts.is_empty() {
        return Err(CoreError::EmptyInput(
            "grid has no modes on the +z axis (odd cartesian n required)".into(),
        ));
    }
    let basis = enumerate_basis(grid.len(), n_max, crate::fock::DEFAULT_STATE_BUDGET)?;

    let mut memo: HashMap<u64, (f64, f64, bool)> = HashMap::new();
    let mut solve_axis = |x: f64| -> Result<(f64, f64, bool)> {
        solve_axis_memoized(&mut memo, grid, &basis, params, x, opts)
    };

    let mut curve = Vec::with_capacity(p_list.len());
    let mut p_star_delta = None;
    let mut p_star_z = None;
    for &p in p_list {
        let (energy, z, mut converged) = solve_axis(p)?;
        let mut delta = f64::INFINITY;
        for &kz in &shifts {
            let (shifted, _, conv) = solve_axis(p - kz)?;
            converged &= conv;
            let cand = shifted + params.omega([0.0, 0.0, kz]) - energy;
            if cand < delta {
                delta = cand;
            }
        }
        if p_star_delta.is_none() && delta <= eps_crit {
            p_star_delta = Some(p);
        }
        if p_star_z.is_none() && z < z_crit {
            p_star_z = Some(p);
        }
        curve.push(PstarRow {
            p,
            energy,
            z,
            delta,
            converged,
        });
    }
    Ok(PstarReport {
        curve,
        p_star_delta,
        p_star_z,
        eps_crit,
        z_crit,
        c: params.c,
    })
}

fn solve_axis_memoized(
    memo: &mut HashMap<u64, (f64, f64, bool)>,
    grid: &Grid,
    basis: &FockBasis,
    params: &ModelParams,
    x: f64,
    opts: &LanczosOpts,
) -> Result<(f64, f64, bool)> {
    if let Some(&hit) = memo.get(&x.to_bits()) {
        return Ok(hit);
    }
    let gs = solve_at(grid, basis, params, [0.0, 0.0, x], opts)?;
    let entry = (gs.energy, vacuum_weight(&gs.vector), gs.converged);
    memo.insert(x.to_bits(), entry);
    Ok(entry)
}
