//! Parameter scans over the solve pipeline: ground energy along a momentum
//! schedule, cutoff growth with counterterm subtraction, and infrared
//! behaviour as the phonon mass is lowered.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::CoreError;
use crate::fock::{enumerate_basis, FockBasis, DEFAULT_STATE_BUDGET};
use crate::grid::{build_grid, Grid, GridSpec};
use crate::model::ModelParams;
use crate::quad::QuadOpts;
use crate::renorm;
use crate::solver::LanczosOpts;
use crate::vec3::{self, Vec3};
use crate::Result;

use super::{mean_momentum_z, mean_phonons, solve_at, vacuum_weight};

/// Ground-state data at one total momentum `P = p zhat`.
#[derive(Debug, Clone)]
pub struct ScanRow {
    /// Signed z-component of the total momentum.
    pub p: f64,
    pub energy: f64,
    pub residual: f64,
    /// Vacuum weight `|<0, psi>|^2`.
    pub z: f64,
    pub n_mean: f64,
    /// `<dGamma(k)_z>`, the phonon share of the momentum.
    pub dgamma_p_z: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ScanTable {
    pub rows: Vec<ScanRow>,
    pub n_max: usize,
}

/// One cutoff point of a UV scan. `sigma1_disc` is the discrete sum
/// `-sum_j g_j^2 / (|k_j|^2/2 + omega(|k_j|))` over the coupled modes with
/// the bare dispersion, the grid counterpart of the first counterterm;
/// `sigma2` is the continuum second-order constant at the same cutoff.
#[derive(Debug, Clone)]
pub struct UvScanRow {
    pub lambda: f64,
    pub energy: f64,
    pub sigma1_disc: f64,
    pub sigma2: f64,
    /// `energy - sigma1_disc`.
    pub subtracted1: f64,
    /// `energy - sigma1_disc - sigma2`.
    pub subtracted2: f64,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct UvScanTable {
    pub rows: Vec<UvScanRow>,
    pub n_max: usize,
}

#[derive(Debug, Clone)]
pub struct IrScanRow {
    pub kappa: f64,
    pub energy: f64,
    pub n_mean: f64,
    pub z: f64,
    pub residual: f64,
    pub converged: bool,
}

fn require_strictly_ascending(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        return Err(CoreError::EmptyInput(format!("{what} schedule")));
    }
    for w in xs.windows(2) {
        if !(w[1] > w[0]) {
            return Err(CoreError::InvalidParams(format!(
                "{what} schedule must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::InvalidParams(format!(
            "{what} schedule contains a non-finite value"
        )));
    }
    Ok(())
}

fn scan_row(
    grid: &Grid,
    basis: &FockBasis,
    params: &ModelParams,
    p: f64,
    opts: &LanczosOpts,
) -> Result<ScanRow> {
    let gs = solve_at(grid, basis, params, [0.0, 0.0, p], opts)?;
    Ok(ScanRow {
        p,
        energy: gs.energy,
        residual: gs.residual,
        z: vacuum_weight(&gs.vector),
        n_mean: mean_phonons(basis, &gs.vector),
        dgamma_p_z: mean_momentum_z(basis, grid, &gs.vector),
        converged: gs.converged,
    })
}

/// Ground state along a momentum schedule on the z-axis. The schedule must
/// be strictly ascending; entries may be signed. Rows with an unconverged
/// solve are kept and flagged rather than dropped.
pub fn scan_momentum(
    grid: &Grid,
    params: &ModelParams,
    p_list: &[f64],
    n_max: usize,
    opts: &LanczosOpts,
) -> Result<ScanTable> {
    require_strictly_ascending(p_list, "momentum")?;
    let basis = enumerate_basis(grid.len(), n_max, DEFAULT_STATE_BUDGET)?;
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<ScanRow>> = p_list
        .par_iter()
        .map(|&p| scan_row(grid, &basis, params, p, opts))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<ScanRow>> = p_list
        .iter()
        .map(|&p| scan_row(grid, &basis, params, p, opts))
        .collect();
    Ok(ScanTable { rows: rows?, n_max })
}

/// Ground energy against the coupling cutoff, with the first and second
/// counterterms subtracted. The grid is rebuilt for every cutoff so the
/// baked-in couplings track it; the spec's box must contain the largest
/// cutoff sphere.
pub fn scan_uv(
    spec: &GridSpec,
    params: &ModelParams,
    p: Vec3,
    lambdas: &[f64],
    n_max: usize,
    sopts: &LanczosOpts,
    qopts: &QuadOpts,
) -> Result<UvScanTable> {
    require_strictly_ascending(lambdas, "cutoff")?;
    if lambdas[0] <= 0.0 {
        return Err(CoreError::InvalidParams(format!(
            "cutoffs must be positive, got {}",
            lambdas[0]
        )));
    }
    let lmax = *lambdas.last().unwrap();
    if spec.kmax < lmax {
        return Err(CoreError::InvalidParams(format!(
            "grid box kmax = {} does not contain the largest cutoff {}",
            spec.kmax, lmax
        )));
    }
    let mut basis: Option<FockBasis> = None;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let m = params.with_lambda(lambda);
        let grid = build_grid(spec, &m)?;
        if basis.is_none() {
            basis = Some(enumerate_basis(grid.len(), n_max, DEFAULT_STATE_BUDGET)?);
        }
        let basis = basis.as_ref().unwrap();
        let gs = solve_at(&grid, basis, &m, p, sopts)?;
        let sigma1_disc: f64 = -grid
            .modes
            .iter()
            .map(|md| {
                let r = vec3::norm(md.k);
                md.coupling * md.coupling / (0.5 * r * r + m.omega_bare_r(r))
            })
            .sum::<f64>();
        let sigma2 = renorm::sigma2(&m, lambda, qopts)?.total().value;
        rows.push(UvScanRow {
            lambda,
            energy: gs.energy,
            sigma1_disc,
            sigma2,
            subtracted1: gs.energy - sigma1_disc,
            subtracted2: gs.energy - sigma1_disc - sigma2,
            residual: gs.residual,
            converged: gs.converged,
        });
    }
    Ok(UvScanTable { rows, n_max })
}

/// Ground state along a descending schedule of phonon masses at fixed
/// momentum. The grid couplings do not depend on the mass, so one grid and
/// one basis serve the whole scan.
pub fn scan_ir(
    grid: &Grid,
    params: &ModelParams,
    p: Vec3,
    kappas: &[f64],
    n_max: usize,
    opts: &LanczosOpts,
) -> Result<Vec<IrScanRow>> {
    if kappas.is_empty() {
        return Err(CoreError::EmptyInput("mass schedule".into()));
    }
    for w in kappas.windows(2) {
        if !(w[1] < w[0]) {
            return Err(CoreError::InvalidParams(format!(
                "mass schedule must be strictly descending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if kappas.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(CoreError::InvalidParams(
            "mass schedule entries must be positive and finite".into(),
        ));
    }
    let basis = enumerate_basis(grid.len(), n_max, DEFAULT_STATE_BUDGET)?;
    let solve = |&kappa: &f64| -> Result<IrScanRow> {
        let m = params.with_kappa(kappa);
        let gs = solve_at(grid, &basis, &m, p, opts)?;
        Ok(IrScanRow {
            kappa,
            energy: gs.energy,
            n_mean: mean_phonons(&basis, &gs.vector),
            z: vacuum_weight(&gs.vector),
            residual: gs.residual,
            converged: gs.converged,
        })
    };
    #[cfg(feature = "parallel")]
    let rows: Result<Vec<IrScanRow>> = kappas.par_iter().map(solve).collect();
    #[cfg(not(feature = "parallel"))]
    let rows: Result<Vec<IrScanRow>> = kappas.iter().map(solve).collect();
    rows
}

/// Extrapolate `(x, y)` samples to `x = 0` through the three smallest
/// abscissae (Neville). The returned error estimate is the gap to the
/// linear extrapolation through the two smallest, so it vanishes when the
/// data is essentially linear.
pub fn richardson_extrapolate(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 3 {
        return Err(CoreError::InvalidParams(format!(
            "extrapolation needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    if pts
        .iter()
        .any(|&(x, y)| !x.is_finite() || !y.is_finite() || x <= 0.0)
    {
        return Err(CoreError::InvalidParams(
            "extrapolation abscissae must be positive and finite".into(),
        ));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(3);
    let (x0, y0) = pts[0];
    let (x1, y1) = pts[1];
    let (x2, y2) = pts[2];
    if x0 == x1 || x1 == x2 {
        return Err(CoreError::InvalidParams(
            "extrapolation abscissae must be distinct".into(),
        ));
    }
    // Neville tableau evaluated at x = 0.
    let p01 = (x1 * y0 - x0 * y1) / (x1 - x0);
    let p12 = (x2 * y1 - x1 * y2) / (x2 - x1);
    let p012 = (x2 * p01 - x0 * p12) / (x2 - x0);
    Ok((p012, (p012 - p01).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::model::ModelParams;

    fn small_grid(params: &ModelParams) -> Grid {
        build_grid(&GridSpec::cartesian(2.0, 3), params).unwrap()
    }

    /// Ground energy of the one-phonon truncation by bisection on the
    /// secular function `f(E) = E - |p|^2/2 + sum_j g_j^2 / (D_j - E)`,
    /// strictly increasing below the smallest excited diagonal `D_j`. An
    /// oracle for the matrix pipeline at `n_max = 1` sharing no solver
    /// code.
    fn secular_energy_nmax1(grid: &Grid, params: &ModelParams, p: Vec3) -> f64 {
        let a = 0.5 * vec3::norm2(p);
        let terms: Vec<(f64, f64)> = grid
            .modes
            .iter()
            .filter(|m| m.coupling != 0.0)
            .map(|m| {
                (
                    0.5 * vec3::norm2(vec3::sub(p, m.k)) + params.omega(m.k),
                    m.coupling * m.coupling,
                )
            })
            .collect();
        if terms.is_empty() {
            return a;
        }
        let dmin = terms.iter().map(|t| t.0).fold(f64::INFINITY, f64::min);
        let f = |e: f64| -> f64 { e - a + terms.iter().map(|&(d, g2)| g2 / (d - e)).sum::<f64>() };
        let scale = 1.0 + a.abs() + dmin.abs();
        // walk toward the pole until the secular function turns positive
        let mut hi = dmin - 1e-3 * scale;
        let mut step = 1e-3 * scale;
        while f(hi) <= 0.0 && step > f64::EPSILON * scale * 1e-3 {
            step *= 0.5;
            hi = dmin - step;
        }
        let mut lo = a.min(dmin) - scale;
        let mut grow = scale;
        while f(lo) >= 0.0 {
            grow *= 2.0;
            lo -= grow;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn free_scan_reproduces_quadratic_dispersion() {
        let params = ModelParams {
            g: 0.0,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let table = scan_momentum(&grid, &params, &[0.0, 0.25, 0.5], 2, &opts).unwrap();
        for row in &table.rows {
            assert!(row.converged);
            assert!((row.energy - 0.5 * row.p * row.p).abs() < 1e-9, "row {:?}", row);
            assert!((row.z - 1.0).abs() < 1e-8);
            assert!(row.n_mean.abs() < 1e-8);
        }
    }

    #[test]
    fn momentum_schedule_must_ascend() {
        let params = ModelParams::default();
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        assert!(scan_momentum(&grid, &params, &[], 1, &opts).is_err());
        assert!(scan_momentum(&grid, &params, &[0.5, 0.5], 1, &opts).is_err());
    }

    #[test]
    fn zero_momentum_carries_no_phonon_momentum() {
        let params = ModelParams {
            g: 0.2,
            kappa: 0.1,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let table = scan_momentum(&grid, &params, &[0.0], 2, &opts).unwrap();
        let row = &table.rows[0];
        assert!(row.converged);
        assert!(row.dgamma_p_z.abs() < 1e-7, "dgamma_p_z = {}", row.dgamma_p_z);
        assert!(row.z > 0.9 && row.z < 1.0);
    }

    #[test]
    fn energy_is_even_in_momentum() {
        let params = ModelParams {
            g: 0.25,
            kappa: 0.1,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let table = scan_momentum(&grid, &params, &[-0.4, 0.0, 0.4], 2, &opts).unwrap();
        let e_minus = table.rows[0].energy;
        let e_plus = table.rows[2].energy;
        assert!(
            (e_minus - e_plus).abs() < 5e-9,
            "E(-P) = {e_minus}, E(P) = {e_plus}"
        );
    }

    #[test]
    fn enlarging_the_truncation_lowers_the_energy() {
        let params = ModelParams {
            g: 0.35,
            kappa: 0.1,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let e1 = scan_momentum(&grid, &params, &[0.3], 1, &opts).unwrap().rows[0].energy;
        let e2 = scan_momentum(&grid, &params, &[0.3], 2, &opts).unwrap().rows[0].energy;
        assert!(e2 <= e1 + 1e-10, "n_max 2 gave {e2}, n_max 1 gave {e1}");
    }

    #[test]
    fn ir_scan_is_flat_without_coupling() {
        let params = ModelParams {
            g: 0.0,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let rows = scan_ir(&grid, &params, [0.0, 0.0, 0.3], &[0.2, 0.1, 0.05], 2, &opts).unwrap();
        for row in &rows {
            assert!((row.energy - 0.045).abs() < 1e-10);
            assert!((row.z - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn ir_energies_decrease_with_the_mass() {
        // H(kappa) = H(0) + kappa N with N >= 0, so the ground energy is
        // nondecreasing in kappa.
        let params = ModelParams {
            g: 0.2,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let rows = scan_ir(&grid, &params, [0.0, 0.0, 0.3], &[0.4, 0.2, 0.1, 0.05], 2, &opts)
            .unwrap();
        for w in rows.windows(2) {
            assert!(
                w[1].energy <= w[0].energy + 2e-9,
                "kappa {} -> {}: energy rose {} -> {}",
                w[0].kappa,
                w[1].kappa,
                w[0].energy,
                w[1].energy
            );
        }
        assert!(rows.iter().all(|r| r.converged));
    }

    #[test]
    fn ir_schedule_must_descend_and_stay_positive() {
        let params = ModelParams::default();
        let grid = small_grid(&params);
        let opts = LanczosOpts::default();
        let p = [0.0, 0.0, 0.1];
        assert!(scan_ir(&grid, &params, p, &[0.1, 0.2], 1, &opts).is_err());
        assert!(scan_ir(&grid, &params, p, &[0.1, 0.0], 1, &opts).is_err());
        assert!(scan_ir(&grid, &params, p, &[], 1, &opts).is_err());
    }

    #[test]
    fn richardson_recovers_a_quadratic_exactly() {
        let f = |x: f64| 3.0 - 2.0 * x + 5.0 * x * x;
        let pts: Vec<(f64, f64)> = [0.4, 0.2, 0.1].iter().map(|&x| (x, f(x))).collect();
        let (value, err) = richardson_extrapolate(&pts).unwrap();
        assert!((value - 3.0).abs() < 1e-12, "value = {value}");
        // linear through the two smallest misses by b x0 x1 = 5 * 0.1 * 0.2
        assert!((err - 0.1).abs() < 1e-12, "err = {err}");
    }

    #[test]
    fn richardson_rejects_degenerate_input() {
        assert!(richardson_extrapolate(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(richardson_extrapolate(&[(0.1, 1.0), (0.1, 2.0), (0.2, 0.0)]).is_err());
        assert!(richardson_extrapolate(&[(-0.1, 1.0), (0.1, 2.0), (0.2, 0.0)]).is_err());
    }

    #[test]
    fn uv_scan_matches_the_secular_oracle_at_nmax_one() {
        let params = ModelParams {
            g: 0.3,
            kappa: 0.1,
            ..ModelParams::default()
        };
        let spec = GridSpec::cartesian(2.0, 4);
        let p = [0.0, 0.0, 0.2];
        let sopts = LanczosOpts::default();
        let qopts = QuadOpts::with_rel_tol(1e-6);
        let table = scan_uv(&spec, &params, p, &[1.0, 1.5, 2.0], 1, &sopts, &qopts).unwrap();
        assert_eq!(table.rows.len(), 3);
        for row in &table.rows {
            let grid = build_grid(&spec, &params.with_lambda(row.lambda)).unwrap();
            let oracle = secular_energy_nmax1(&grid, &params.with_lambda(row.lambda), p);
            assert!(
                (row.energy - oracle).abs() < 1e-8,
                "lambda {}: lanczos {} vs secular {}",
                row.lambda,
                row.energy,
                oracle
            );
            assert!((row.subtracted1 - (row.energy - row.sigma1_disc)).abs() < 1e-12);
            assert!(
                (row.subtracted2 - (row.energy - row.sigma1_disc - row.sigma2)).abs() < 1e-12
            );
        }
        // widening the cutoff couples more modes and can only help an
        // arrowhead variational problem
        for w in table.rows.windows(2) {
            assert!(w[1].energy < w[0].energy + 1e-12);
        }
    }

    #[test]
    fn uv_scan_requires_the_box_to_contain_the_cutoffs() {
        let params = ModelParams::default();
        let spec = GridSpec::cartesian(2.0, 4);
        let sopts = LanczosOpts::default();
        let qopts = QuadOpts::default();
        let err = scan_uv(
            &spec,
            &params,
            [0.0; 3],
            &[1.0, 4.0],
            1,
            &sopts,
            &qopts,
        )
        .unwrap_err();
        assert!(err.to_string().contains("does not contain"));
    }

    #[test]
    fn secular_oracle_handles_the_uncoupled_case() {
        let params = ModelParams {
            g: 0.0,
            ..ModelParams::default()
        };
        let grid = small_grid(&params);
        let e = secular_energy_nmax1(&grid, &params, [0.0, 0.0, 0.6]);
        assert_eq!(e, 0.18);
    }
}
