//! Inequalities the ground-state energy provably satisfies: the Gross
//! momentum-shell bounds with convexity of `|P|^2/2 - E(P)`, and the
//! HVZ-type gap between `E(P)` and the one-phonon emission threshold.
//! Checks return reports with worst-case margins instead of panicking, so
//! violations surface in emitted tables.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::CoreError;
use crate::fock::{enumerate_basis, DEFAULT_STATE_BUDGET};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::solver::LanczosOpts;
use crate::vec3::{self, Vec3};
use crate::Result;

use super::{solve_at, threshold_samples, ScanTable};

/// Worst slack of one inequality over a schedule; negative means violated
/// by that amount before tolerances.
#[derive(Debug, Clone, Copy)]
pub struct CheckMargin {
    pub worst: f64,
    /// Schedule momentum where the worst slack occurs.
    pub at: f64,
    pub pass: bool,
}

/// Like `CheckMargin` for inequalities over ordered row pairs.
#[derive(Debug, Clone, Copy)]
pub struct PairMargin {
    pub worst: f64,
    pub at: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct GrossConvexityReport {
    /// `E(P) - E(0) >= -2 tol`: the energy attains its minimum at rest.
    pub lower: CheckMargin,
    /// `E(P) - E(0) <= |P|^2/2 + 2 tol`, the Gross trial-state bound.
    pub upper: CheckMargin,
    /// Discrete second differences of `|P|^2/2 - E(P)` stay above `-4 tol`
    /// (the function is concave in no direction).
    pub convexity: CheckMargin,
    /// `E(P') - E(P) >= -|P - P'| |P| - 2 tol` for every ordered row pair.
    pub lipschitz: PairMargin,
    pub tol: f64,
}

impl GrossConvexityReport {
    pub fn pass(&self) -> bool {
        self.lower.pass && self.upper.pass && self.convexity.pass && self.lipschitz.pass
    }
}

/// Evaluate the three Gross inequalities on a momentum scan. Uses only the
/// converged rows and requires a `P = 0` row among them; the scan momenta
/// may be signed, the bounds use `|P|`.
pub fn check_gross_convexity(table: &ScanTable, tol: f64) -> Result<GrossConvexityReport> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(CoreError::InvalidParams(format!(
            "tolerance must be nonnegative and finite, got {tol}"
        )));
    }
    let rows: Vec<_> = table.rows.iter().filter(|r| r.converged).collect();
    if rows.len() < 3 {
        return Err(CoreError::InvalidParams(format!(
            "convexity check needs at least 3 converged rows, got {}",
            rows.len()
        )));
    }
    let e0 = rows
        .iter()
        .find(|r| r.p.abs() < 1e-12)
        .ok_or_else(|| CoreError::InvalidParams("scan has no converged P = 0 row".into()))?
        .energy;

    let mut lower = (f64::INFINITY, 0.0);
    let mut upper = (f64::INFINITY, 0.0);
    for r in &rows {
        let d = r.energy - e0;
        if d < lower.0 {
            lower = (d, r.p);
        }
        let u = 0.5 * r.p * r.p - d;
        if u < upper.0 {
            upper = (u, r.p);
        }
    }

    // Slope differences of f = P^2/2 - E, rescaled by the smallest spacing
    // so that on a uniform schedule the quantity is exactly the plain
    // second difference f(P+h) - 2 f(P) + f(P-h).
    let f: Vec<f64> = rows.iter().map(|r| 0.5 * r.p * r.p - r.energy).collect();
    let hmin = rows
        .windows(2)
        .map(|w| w[1].p - w[0].p)
        .fold(f64::INFINITY, f64::min);
    let mut convexity = (f64::INFINITY, rows[1].p);
    for i in 1..rows.len() - 1 {
        let hp = rows[i + 1].p - rows[i].p;
        let hm = rows[i].p - rows[i - 1].p;
        let d = ((f[i + 1] - f[i]) / hp - (f[i] - f[i - 1]) / hm) * hmin;
        if d < convexity.0 {
            convexity = (d, rows[i].p);
        }
    }

    let mut lipschitz = (f64::INFINITY, (0.0, 0.0));
    for a in &rows {
        for b in &rows {
            if a.p == b.p {
                continue;
            }
            let m = b.energy - a.energy + (a.p - b.p).abs() * a.p.abs();
            if m < lipschitz.0 {
                lipschitz = (m, (a.p, b.p));
            }
        }
    }

    Ok(GrossConvexityReport {
        lower: CheckMargin {
            worst: lower.0,
            at: lower.1,
            pass: lower.0 >= -2.0 * tol,
        },
        upper: CheckMargin {
            worst: upper.0,
            at: upper.1,
            pass: upper.0 >= -2.0 * tol,
        },
        convexity: CheckMargin {
            worst: convexity.0,
            at: convexity.1,
            pass: convexity.0 >= -4.0 * tol,
        },
        lipschitz: PairMargin {
            worst: lipschitz.0,
            at: lipschitz.1,
            pass: lipschitz.0 >= -2.0 * tol,
        },
        tol,
    })
}

/// Gap between `E(P)` and the sampled one-phonon emission threshold.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub p: Vec3,
    pub energy: f64,
    /// `min_j E(P - k_j) + omega(k_j) + kappa` over the sample set.
    pub threshold: f64,
    pub gap: f64,
    /// Sample mode attaining the threshold.
    pub threshold_mode: Vec3,
    pub samples: usize,
    pub converged: bool,
}

impl GapReport {
    /// The provable bound: the gap never falls below the phonon mass.
    pub fn meets(&self, kappa: f64, tol: f64) -> bool {
        self.converged && self.gap >= kappa - 4.0 * tol
    }
}

/// Solve `E(P)` and the one-phonon thresholds `E(P - k_j) + omega(k_j) +
/// kappa` over the sample modes with `0 < |k_j| <= sample_radius`. All
/// solves share the grid and basis, so threshold and energy carry the same
/// discretization error. One-phonon sampling suffices because the
/// threshold is subadditive in the emitted set.
pub fn hvz_gap(
    grid: &Grid,
    params: &ModelParams,
    p: Vec3,
    n_max: usize,
    sample_radius: f64,
    opts: &LanczosOpts,
) -> Result<GapReport> {
    if !(params.kappa > 0.0) {
        return Err(CoreError::InvalidParams(format!(
            "gap check needs a positive phonon mass, kappa = {}",
            params.kappa
        )));
    }
    if vec3::norm(p) > params.c + 1e-12 {
        return Err(CoreError::InvalidParams(format!(
            "gap check needs |P| <= c, got |P| = {} with c = {}",
            vec3::norm(p),
            params.c
        )));
    }
    let samples = threshold_samples(grid, sample_radius);
    if samples.is_empty() {
        return Err(CoreError::EmptyInput(format!(
            "no grid modes inside the sample radius {sample_radius}"
        )));
    }
    let basis = enumerate_basis(grid.len(), n_max, DEFAULT_STATE_BUDGET)?;
    let gs = solve_at(grid, &basis, params, p, opts)?;
    let eval = |&j: &usize| -> Result<(f64, Vec3, bool)> {
        let k = grid.modes[j].k;
        let shifted = solve_at(grid, &basis, params, vec3::sub(p, k), opts)?;
        // omega here is the kappa-shifted dispersion: bare omega plus the
        // explicit +kappa of the one-phonon threshold
        Ok((shifted.energy + params.omega(k), k, shifted.converged))
    };
    #[cfg(feature = "parallel")]
    let cands: Result<Vec<(f64, Vec3, bool)>> = samples.par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    let cands: Result<Vec<(f64, Vec3, bool)>> = samples.iter().map(eval).collect();
    let cands = cands?;
    let mut best = cands[0];
    for c in &cands[1..] {
        if c.0 < best.0 {
            best = *c;
        }
    }
    Ok(GapReport {
        p,
        energy: gs.energy,
        threshold: best.0,
        gap: best.0 - gs.energy,
        threshold_mode: best.1,
        samples: cands.len(),
        converged: gs.converged && cands.iter().all(|c| c.2),
    })
}
