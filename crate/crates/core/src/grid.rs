//! Finite momentum grids for the phonon field.
//!
//! Two families are supported. `Cartesian` places modes at the cell centers
//! of a uniform n^3 partition of the box `[-kmax, kmax]^3`; cells all carry
//! the same weight `(2 kmax / n)^3` and the set is symmetric under
//! `k -> -k`, which the reflection-based diagnostics rely on. For odd `n`
//! the center cell sits exactly at the origin and is dropped by default
//! (the zero mode carries no coupling and only inflates the basis).
//!
//! `SphericalM0` restricts to zero azimuthal angular momentum: tensor
//! Gauss-Legendre nodes in `(|k|, cos theta)` on `[0, kmax] x [-1, 1]` with
//! the azimuthal integral folded into the weight. Each node is assigned the
//! representative vector `(r sin theta, 0, r cos theta)`; with the total
//! momentum along +z this is exact for single-phonon amplitudes and an
//! approximation from two phonons up.
//!
//! Mode couplings are `g_j = v_lambda(k_j) sqrt(w_j)`.

use crate::error::{CoreError, Result};
use crate::model::ModelParams;
use crate::vec3::{self, Vec3};

/// Hard ceiling on the number of modes a spec may request.
pub const DEFAULT_MODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    Cartesian { n: usize },
    SphericalM0 { n_radial: usize, n_angular: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub kind: GridKind,
    pub kmax: f64,
    pub exclude_origin: bool,
}

impl GridSpec {
    /// Cartesian spec with the default origin rule: the exact zero mode
    /// (present only for odd `n`) is excluded.
    pub fn cartesian(kmax: f64, n: usize) -> Self {
        GridSpec {
            kind: GridKind::Cartesian { n },
            kmax,
            exclude_origin: n % 2 == 1,
        }
    }

    pub fn spherical_m0(kmax: f64, n_radial: usize, n_angular: usize) -> Self {
        GridSpec {
            kind: GridKind::SphericalM0 { n_radial, n_angular },
            kmax,
            exclude_origin: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.kmax > 0.0) || !self.kmax.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "kmax must be positive and finite, got {}",
                self.kmax
            )));
        }
        match self.kind {
            GridKind::Cartesian { n } => {
                if n == 0 {
                    return Err(CoreError::InvalidParams("cartesian grid needs n >= 1".into()));
                }
                let total = (n as u64).pow(3);
                if total > DEFAULT_MODE_BUDGET as u64 {
                    return Err(CoreError::ResourceBudget {
                        what: format!("cartesian grid n={n}"),
                        needed: total,
                        budget: DEFAULT_MODE_BUDGET as u64,
                    });
                }
            }
            GridKind::SphericalM0 { n_radial, n_angular } => {
                // A single radial node cannot integrate r^2 exactly, which
                // would break the volume identity the weights must satisfy.
                if n_radial < 2 {
                    return Err(CoreError::InvalidParams(
                        "spherical grid needs n_radial >= 2".into(),
                    ));
                }
                if n_angular == 0 {
                    return Err(CoreError::InvalidParams(
                        "spherical grid needs n_angular >= 1".into(),
                    ));
                }
                let total = (n_radial as u64) * (n_angular as u64);
                if total > DEFAULT_MODE_BUDGET as u64 {
                    return Err(CoreError::ResourceBudget {
                        what: format!("spherical grid {n_radial}x{n_angular}"),
                        needed: total,
                        budget: DEFAULT_MODE_BUDGET as u64,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub k: Vec3,
    pub weight: f64,
    pub coupling: f64,
}

#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub modes: Vec<Mode>,
}

pub fn build_grid(spec: &GridSpec, params: &ModelParams) -> Result<Grid> {
    spec.validate()?;
    params.validate()?;
    let mut modes = Vec::new();
    match spec.kind {
        GridKind::Cartesian { n } => {
            let h = 2.0 * spec.kmax / n as f64;
            let w = h * h * h;
            let coord = |i: usize| -spec.kmax + (i as f64 + 0.5) * h;
            for ix in 0..n {
                for iy in 0..n {
                    for iz in 0..n {
                        let k = [coord(ix), coord(iy), coord(iz)];
                        if spec.exclude_origin && vec3::norm2(k) < 1e-24 * h * h {
                            continue;
                        }
                        modes.push(Mode {
                            k,
                            weight: w,
                            coupling: params.form_factor(k) * w.sqrt(),
                        });
                    }
                }
            }
        }
        GridKind::SphericalM0 { n_radial, n_angular } => {
            let (rn, rw) = gauss_legendre(n_radial, 0.0, spec.kmax);
            let (un, uw) = gauss_legendre(n_angular, -1.0, 1.0);
            for (r, wr) in rn.iter().zip(&rw) {
                for (u, wu) in un.iter().zip(&uw) {
                    let s = (1.0 - u * u).max(0.0).sqrt();
                    let k = [r * s, 0.0, r * u];
                    let w = 2.0 * std::f64::consts::PI * r * r * wr * wu;
                    modes.push(Mode {
                        k,
                        weight: w,
                        coupling: params.form_factor(k) * w.sqrt(),
                    });
                }
            }
        }
    }
    Ok(Grid { spec: spec.clone(), modes })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Smallest |k_j| over all modes. Zero if an origin mode is present.
    pub fn min_mode_norm(&self) -> f64 {
        self.modes
            .iter()
            .map(|m| vec3::norm(m.k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_weight(&self) -> f64 {
        self.modes.iter().map(|m| m.weight).sum()
    }

    /// FNV-1a over the little-endian bytes of every mode; stable across
    /// platforms for identical specs and model parameters.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |x: f64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for m in &self.modes {
            eat(m.k[0]);
            eat(m.k[1]);
            eat(m.k[2]);
            eat(m.weight);
            eat(m.coupling);
        }
        format!("{h:016x}")
    }

    /// CSV table of the mode set: index, momentum, weight, coupling.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,kx,ky,kz,w,coupling\n");
        for (j, m) in self.modes.iter().enumerate() {
            out.push_str(&format!(
                "{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                m.k[0], m.k[1], m.k[2], m.weight, m.coupling
            ));
        }
        out
    }
}

/// Gauss-Legendre nodes and weights on `[a, b]`, by Newton iteration on the
/// Legendre recurrence. Exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn gauss_legendre_low_orders() {
        let (n2, w2) = gauss_legendre(2, -1.0, 1.0);
        assert_relative_eq!(n2[1], 1.0 / 3.0_f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(w2[0], 1.0, max_relative = 1e-14);
        let (n3, w3) = gauss_legendre(3, -1.0, 1.0);
        assert_relative_eq!(n3[2], (3.0_f64 / 5.0).sqrt(), max_relative = 1e-14);
        assert_eq!(n3[1], 0.0);
        assert_relative_eq!(w3[1], 8.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(w3[0], 5.0 / 9.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_legendre_polynomial_exactness() {
        // degree 2n-1 exact: n = 5 integrates x^9 and below on [0, 2]
        let (x, w) = gauss_legendre(5, 0.0, 2.0);
        for deg in 0..=9u32 {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
            let exact = 2.0_f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert_relative_eq!(got, exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn single_cell_grid() {
        let spec = GridSpec {
            kind: GridKind::Cartesian { n: 1 },
            kmax: 1.0,
            exclude_origin: false,
        };
        let g = build_grid(&spec, &unit()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.modes[0].k, [0.0, 0.0, 0.0]);
        assert_relative_eq!(g.modes[0].weight, 8.0, max_relative = 1e-15);
        assert_eq!(g.modes[0].coupling, 0.0, "origin mode never couples");
        assert_eq!(g.min_mode_norm(), 0.0);
    }

    #[test]
    fn eight_cell_grid_geometry() {
        let g = build_grid(&GridSpec::cartesian(1.0, 2), &unit()).unwrap();
        assert_eq!(g.len(), 8);
        for m in &g.modes {
            assert_relative_eq!(vec3::norm(m.k), 3.0_f64.sqrt() / 2.0, max_relative = 1e-15);
            assert_relative_eq!(m.weight, 1.0, max_relative = 1e-15);
        }
        assert_relative_eq!(g.min_mode_norm(), 3.0_f64.sqrt() / 2.0, max_relative = 1e-15);
        assert_relative_eq!(g.total_weight(), 8.0, max_relative = 1e-14);
    }

    #[test]
    fn odd_grid_drops_origin_by_default() {
        let spec = GridSpec::cartesian(1.5, 3);
        assert!(spec.exclude_origin);
        let g = build_grid(&spec, &unit()).unwrap();
        assert_eq!(g.len(), 26);
        let w_cell = (3.0 / 3.0_f64).powi(3);
        assert_relative_eq!(g.total_weight(), 27.0 * w_cell - w_cell, max_relative = 1e-13);
        assert!(g.min_mode_norm() > 0.9);

        let keep = GridSpec { exclude_origin: false, ..spec };
        let g2 = build_grid(&keep, &unit()).unwrap();
        assert_eq!(g2.len(), 27);
        assert_relative_eq!(g2.total_weight(), 27.0 * w_cell, max_relative = 1e-13);
    }

    #[test]
    fn cartesian_weight_sum_matches_box_volume() {
        for n in [2usize, 4, 5, 6] {
            let spec = GridSpec::cartesian(2.0, n);
            let g = build_grid(&spec, &unit()).unwrap();
            let mut vol = 64.0;
            if spec.exclude_origin && n % 2 == 1 {
                vol -= (4.0 / n as f64).powi(3);
            }
            assert_relative_eq!(g.total_weight(), vol, max_relative = 1e-12);
        }
    }

    #[test]
    fn cartesian_reflection_symmetry() {
        for n in [2usize, 3, 4, 5] {
            let g = build_grid(&GridSpec::cartesian(1.7, n), &unit()).unwrap();
            for m in &g.modes {
                let neg = vec3::scale(m.k, -1.0);
                let found = g
                    .modes
                    .iter()
                    .any(|o| vec3::norm(vec3::sub(o.k, neg)) < 1e-12);
                assert!(found, "missing partner of {:?} at n={n}", m.k);
            }
        }
    }

    #[test]
    fn coupling_bound_and_cutoff() {
        let params = ModelParams { g: 0.8, lambda: 1.0, ..unit() };
        let g = build_grid(&GridSpec::cartesian(2.0, 4), &params).unwrap();
        let mut seen_zero = false;
        let mut seen_nonzero = false;
        for m in &g.modes {
            assert!(m.coupling <= params.g * m.weight.sqrt() * (1.0 + 1e-12));
            if vec3::norm(m.k) >= 1.0 {
                assert_eq!(m.coupling, 0.0);
                seen_zero = true;
            } else {
                assert!(m.coupling > 0.0);
                seen_nonzero = true;
            }
        }
        assert!(seen_zero && seen_nonzero);
    }

    #[test]
    fn spherical_volume_and_min_norm() {
        let spec = GridSpec::spherical_m0(2.0, 6, 4);
        let g = build_grid(&spec, &unit()).unwrap();
        assert_eq!(g.len(), 24);
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 8.0;
        assert_relative_eq!(g.total_weight(), ball, max_relative = 1e-12);
        // smallest Gauss-Legendre radial node on [0, 2]
        let (rn, _) = gauss_legendre(6, 0.0, 2.0);
        assert_relative_eq!(g.min_mode_norm(), rn[0], max_relative = 1e-13);
        // representative vectors preserve |k| = r
        for m in &g.modes {
            let r = vec3::norm(m.k);
            assert!(rn.iter().any(|x| (x - r).abs() < 1e-12));
        }
    }

    #[test]
    fn spherical_two_node_radial_positions() {
        let g = build_grid(&GridSpec::spherical_m0(1.0, 2, 1), &unit()).unwrap();
        let lo = 0.5 * (1.0 - 1.0 / 3.0_f64.sqrt());
        assert_relative_eq!(g.min_mode_norm(), lo, max_relative = 1e-13);
    }

    #[test]
    fn rejects_invalid_specs() {
        let p = unit();
        assert!(build_grid(&GridSpec::cartesian(0.0, 2), &p).is_err());
        assert!(build_grid(&GridSpec::cartesian(-1.0, 2), &p).is_err());
        assert!(build_grid(
            &GridSpec { kind: GridKind::Cartesian { n: 0 }, kmax: 1.0, exclude_origin: false },
            &p
        )
        .is_err());
        assert!(build_grid(&GridSpec::spherical_m0(1.0, 1, 1), &p).is_err());
        match build_grid(&GridSpec::cartesian(1.0, 200), &p) {
            Err(CoreError::ResourceBudget { needed, .. }) => assert_eq!(needed, 8_000_000),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_hash_and_csv_roundtrip() {
        let p = ModelParams { g: 0.3, lambda: 2.0, ..unit() };
        let a = build_grid(&GridSpec::cartesian(2.0, 3), &p).unwrap();
        let b = build_grid(&GridSpec::cartesian(2.0, 3), &p).unwrap();
        assert_eq!(a.hash_hex(), b.hash_hex());
        let c = build_grid(&GridSpec::cartesian(2.0, 4), &p).unwrap();
        assert_ne!(a.hash_hex(), c.hash_hex());

        let csv = a.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "j,kx,ky,kz,w,coupling");
        for (j, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').collect();
            assert_eq!(f.len(), 6);
            assert_eq!(f[0].parse::<usize>().unwrap(), j);
            let kx: f64 = f[1].parse().unwrap();
            assert_eq!(kx, a.modes[j].k[0], "17 significant digits round-trip");
            let cpl: f64 = f[5].parse().unwrap();
            assert_eq!(cpl, a.modes[j].coupling);
        }
    }
}
