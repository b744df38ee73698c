//! Counterterm integrals of the ultraviolet renormalization and the kernel
//! functions entering the dressed comparison operators.
//!
//! All integrals are reduced to low-dimensional quadrature before being
//! handed to the adaptive engine: the first counterterm is radial (Jacobian
//! 4 pi k^2), the one-excitation kernel theta10 is a (|k|, cos) integral
//! with the axis along P - p (Jacobian 2 pi k^2), and the second counterterm
//! lives on (|k|, |l|, cos angle(k,l)) (Jacobian 8 pi^2 k^2 l^2). Infinite
//! cutoffs are admitted where the subtraction structure makes the tail
//! integrable, via the substitution k = t/(1-t) on [0,1).
//!
//! kappa >= 0 enters every energy denominator through the shifted
//! dispersion, while the form factor keeps the bare one. Each kernel also
//! carries the free parameter mu > 0 of the dressing construction.

use std::f64::consts::PI;

use crate::model::ModelParams;
use crate::quad::{adaptive, QuadOpts, QuadResult};
use crate::vec3::{self, Vec3};
use crate::{CoreError, Result};

/// Asymptotic form fitted against cutoff samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitForm {
    LinearInL,
    LogInL,
}

/// Least-squares fit of counterterm samples against `offset + e * x` with
/// `x = L` or `x = log L`.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceFit {
    pub form: FitForm,
    /// Fitted slope (the divergence rate e1 or e2).
    pub e: f64,
    pub offset: f64,
    /// Root-mean-square misfit of the samples.
    pub residual: f64,
}

/// Both terms of the second counterterm, kept separate so a budget failure
/// identifies the sub-integral that caused it.
#[derive(Debug, Clone, Copy)]
pub struct Sigma2Result {
    pub term_a: QuadResult,
    pub term_b: QuadResult,
}

impl Sigma2Result {
    /// The counterterm itself, term A minus term B, with combined error.
    pub fn total(&self) -> QuadResult {
        self.term_a.combined(self.term_b.scaled(-1.0))
    }
}

/// Maps the quadrature coordinate to a radius: identity on a finite
/// domain, `k = t/(1-t)` on `[0,1)` when the cutoff is infinite.
#[derive(Clone, Copy)]
struct RadialMap {
    infinite: bool,
    hi: f64,
}

impl RadialMap {
    fn new(l: f64) -> Self {
        if l.is_finite() {
            RadialMap { infinite: false, hi: l }
        } else {
            RadialMap { infinite: true, hi: 1.0 }
        }
    }

    /// Radius and d(radius)/d(coordinate) at coordinate `x`.
    #[inline]
    fn k_jac(&self, x: f64) -> (f64, f64) {
        if self.infinite {
            let om = 1.0 - x;
            (x / om, 1.0 / (om * om))
        } else {
            (x, 1.0)
        }
    }
}

fn check_kernel_args(params: &ModelParams, eta: f64, mu: f64, l: f64) -> Result<()> {
    params.validate()?;
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(CoreError::InvalidParams(format!("eta must be finite and >= 0, got {eta}")));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(CoreError::InvalidParams(format!("mu must be finite and >= 0, got {mu}")));
    }
    if !(l > 0.0) {
        return Err(CoreError::InvalidParams(format!("cutoff must be positive, got {l}")));
    }
    Ok(())
}

/// First counterterm at cutoff `l`,
/// `sigma1 = -4 pi int_0^l k^2 v(k)^2 / (k^2/2 + omega_kappa(k)) dk`.
///
/// Strictly decreasing in `l`, divergent linearly as `l -> inf`, so the
/// cutoff must be finite.
pub fn sigma1(params: &ModelParams, l: f64, opts: &QuadOpts) -> Result<QuadResult> {
    params.validate()?;
    if !l.is_finite() || l <= 0.0 {
        return Err(CoreError::InvalidParams(format!(
            "sigma1 requires a finite positive cutoff, got {l}"
        )));
    }
    let m = params.with_lambda(l);
    if m.g == 0.0 {
        return Ok(QuadResult::exact(0.0));
    }
    let f = |x: &[f64]| -> f64 {
        let k = x[0];
        let v2 = m.form_factor_sq_r(k);
        if v2 == 0.0 {
            return 0.0;
        }
        -4.0 * PI * k * k * v2 / (0.5 * k * k + m.omega_r(k))
    };
    Ok(adaptive(&f, &[0.0], &[l], opts))
}

/// One-excitation multiplication kernel
/// `theta10(p, eta) = -int_{|k|<l} [v^2/((P-p-k)^2/2 + eta + omega_kappa + mu)
///                                  - v^2/(k^2/2 + omega_kappa)] dk`,
/// reduced to 2-D over (|k|, cos) with the axis along `P - p`. The
/// subtraction makes the tail integrable, so `l` may be infinite.
pub fn theta10(
    p: Vec3,
    eta: f64,
    mu: f64,
    l: f64,
    params: &ModelParams,
    opts: &QuadOpts,
) -> Result<QuadResult> {
    check_kernel_args(params, eta, mu, l)?;
    let m = params.with_lambda(l);
    let q = vec3::norm(vec3::sub(params.p_total, p));
    Ok(theta10_impl(&m, q, eta, mu, l, opts))
}

/// Core theta10 quadrature with the integration domain decoupled from the
/// form-factor cutoff `m.lambda` (the saturation tests shrink the latter).
pub(crate) fn theta10_impl(
    m: &ModelParams,
    q: f64,
    eta: f64,
    mu: f64,
    domain: f64,
    opts: &QuadOpts,
) -> QuadResult {
    if m.g == 0.0 {
        return QuadResult::exact(0.0);
    }
    let map = RadialMap::new(domain);
    let f = move |x: &[f64]| -> f64 {
        let (k, jac) = map.k_jac(x[0]);
        if !k.is_finite() {
            return 0.0;
        }
        let v2 = m.form_factor_sq_r(k);
        if v2 == 0.0 {
            return 0.0;
        }
        let u = x[1];
        let d0 = 0.5 * k * k + m.omega_r(k);
        let shift = 0.5 * q * q + eta + mu;
        let a = d0 + shift;
        let b = q * k;
        // even part (in u) of 1/(a - b u) is a/(a^2 - b^2 u^2); the odd
        // part integrates to zero over u in [-1, 1] but would grow
        // pointwise with k and spoil the tail transform. Folding the bare
        // subtraction into the same fraction makes the integrand vanish
        // identically when all shifts are zero.
        let num = b * b * u * u - a * shift;
        let den = (a * a - b * b * u * u) * d0;
        -2.0 * PI * k * k * v2 * (num / den) * jac
    };
    adaptive(&f, &[0.0, -1.0], &[map.hi, 1.0], opts)
}

/// Second counterterm at cutoff `l`, the value of the theta20 integrals at
/// `P = p = eta = mu = 0`:
///
/// term A = `int v^2(k) theta10(k, omega_kappa(k)) / (k^2/2 + omega_kappa(k))^2 dk`,
/// term B = `int int v^2(k) v^2(l) / (D_k D_m D_l) dk dl`,
/// sigma2 = A - B. Term A is evaluated by expanding its theta10 factor into
/// the same (|k|, |l|, cos) frame as term B; a test checks the expansion
/// against the nested 1-D x theta10 composition.
pub fn sigma2(params: &ModelParams, l: f64, opts: &QuadOpts) -> Result<Sigma2Result> {
    params.validate()?;
    if !l.is_finite() || l <= 0.0 {
        return Err(CoreError::InvalidParams(format!(
            "sigma2 requires a finite positive cutoff, got {l}"
        )));
    }
    let m = params.with_lambda(l);
    if m.g == 0.0 {
        let z = QuadResult::exact(0.0);
        return Ok(Sigma2Result { term_a: z, term_b: z });
    }
    let fa = |x: &[f64]| -> f64 {
        let (k, lv, u) = (x[0], x[1], x[2]);
        let v2k = m.form_factor_sq_r(k);
        if v2k == 0.0 {
            return 0.0;
        }
        let v2l = m.form_factor_sq_r(lv);
        if v2l == 0.0 {
            return 0.0;
        }
        let dk = 0.5 * k * k + m.omega_r(k);
        let dl = 0.5 * lv * lv + m.omega_r(lv);
        let dm = 0.5 * (k * k + 2.0 * k * lv * u + lv * lv) + m.omega_r(k) + m.omega_r(lv);
        // dm - dl = k^2/2 + k l u + omega_kappa(k), the theta10 numerator
        let s = dm - dl;
        8.0 * PI * PI * k * k * lv * lv * v2k * v2l * s / (dm * dl * dk * dk)
    };
    let fb = |x: &[f64]| -> f64 {
        let (k, lv, u) = (x[0], x[1], x[2]);
        let v2k = m.form_factor_sq_r(k);
        if v2k == 0.0 {
            return 0.0;
        }
        let v2l = m.form_factor_sq_r(lv);
        if v2l == 0.0 {
            return 0.0;
        }
        let dk = 0.5 * k * k + m.omega_r(k);
        let dl = 0.5 * lv * lv + m.omega_r(lv);
        let dm = 0.5 * (k * k + 2.0 * k * lv * u + lv * lv) + m.omega_r(k) + m.omega_r(lv);
        8.0 * PI * PI * k * k * lv * lv * v2k * v2l / (dk * dm * dl)
    };
    let lo = [0.0, 0.0, -1.0];
    let hi = [l, l, 1.0];
    let term_a = adaptive(&fa, &lo, &hi, opts);
    let term_b = adaptive(&fb, &lo, &hi, opts);
    Ok(Sigma2Result { term_a, term_b })
}

/// Two-excitation multiplication kernel: the theta20 integrals at general
/// `(p, eta, mu)` minus `sigma2` at the same cutoff, combined into a single
/// integrand so the difference stays integrable for `l = inf`. Identically
/// zero at `P = p = eta = mu = 0`.
pub fn theta20(
    p: Vec3,
    eta: f64,
    mu: f64,
    l: f64,
    params: &ModelParams,
    opts: &QuadOpts,
) -> Result<QuadResult> {
    check_kernel_args(params, eta, mu, l)?;
    let m = params.with_lambda(l);
    if m.g == 0.0 {
        return Ok(QuadResult::exact(0.0));
    }
    let qv = vec3::sub(params.p_total, p);
    let q = vec3::norm(qv);
    let map = RadialMap::new(l);

    // shared combination of the four resolvent products, grouped so each
    // shifted term sits next to its bare counterpart and cancels exactly
    // when the denominators coincide
    let phi = |ek: f64, el: f64, mm: f64, dk: f64, dl: f64, dm: f64| -> f64 {
        ((1.0 / dm - 1.0 / dl) / (dk * dk) - (1.0 / mm - 1.0 / dl) / (ek * ek))
            + (1.0 / (dk * dm * dl) - 1.0 / (ek * mm * el))
    };

    if q == 0.0 {
        // p = P: every angle collapses onto cos angle(k, l)
        let f = |x: &[f64]| -> f64 {
            let (k, jk) = map.k_jac(x[0]);
            let (lv, jl) = map.k_jac(x[1]);
            if !k.is_finite() || !lv.is_finite() {
                return 0.0;
            }
            let v2k = m.form_factor_sq_r(k);
            if v2k == 0.0 {
                return 0.0;
            }
            let v2l = m.form_factor_sq_r(lv);
            if v2l == 0.0 {
                return 0.0;
            }
            let um = x[2];
            let wk = m.omega_r(k);
            let wl = m.omega_r(lv);
            let dk = 0.5 * k * k + wk;
            let dl = 0.5 * lv * lv + wl;
            let ek = 0.5 * k * k + eta + wk + mu;
            let el = 0.5 * lv * lv + eta + wl + mu;
            let at = |um: f64| -> f64 {
                let kl2 = 0.5 * (k * k + 2.0 * k * lv * um + lv * lv);
                phi(ek, el, kl2 + eta + wk + wl + mu, dk, dl, kl2 + wk + wl)
            };
            // even part in the relative angle; the odd part integrates to
            // zero but decays one power slower, which breaks l = inf
            let sym = 0.5 * (at(um) + at(-um));
            8.0 * PI * PI * k * k * lv * lv * v2k * v2l * sym * jk * jl
        };
        return Ok(adaptive(&f, &[0.0, 0.0, -1.0], &[map.hi, map.hi, 1.0], opts));
    }

    // general p: polar angles of k and l against the P - p axis plus their
    // relative azimuth, measure 4 pi k^2 l^2 over (uk, ul, azimuth in [0, pi])
    let f = |x: &[f64]| -> f64 {
        let (k, jk) = map.k_jac(x[0]);
        let (lv, jl) = map.k_jac(x[1]);
        if !k.is_finite() || !lv.is_finite() {
            return 0.0;
        }
        let v2k = m.form_factor_sq_r(k);
        if v2k == 0.0 {
            return 0.0;
        }
        let v2l = m.form_factor_sq_r(lv);
        if v2l == 0.0 {
            return 0.0;
        }
        let (uk, ul, az) = (x[2], x[3], x[4]);
        let sk = (1.0 - uk * uk).max(0.0).sqrt();
        let sl = (1.0 - ul * ul).max(0.0).sqrt();
        let ca = az.cos();
        let wk = m.omega_r(k);
        let wl = m.omega_r(lv);
        let dk = 0.5 * k * k + wk;
        let dl = 0.5 * lv * lv + wl;
        let at = |uk: f64, ul: f64, ca: f64| -> f64 {
            let um = uk * ul + sk * sl * ca;
            let dm = 0.5 * (k * k + 2.0 * k * lv * um + lv * lv) + wk + wl;
            let ek = 0.5 * (q * q - 2.0 * q * k * uk + k * k) + eta + wk + mu;
            let el = 0.5 * (q * q - 2.0 * q * lv * ul + lv * lv) + eta + wl + mu;
            let mm = 0.5
                * (q * q + k * k + lv * lv - 2.0 * q * k * uk - 2.0 * q * lv * ul
                    + 2.0 * k * lv * um)
                + eta
                + wk
                + wl
                + mu;
            phi(ek, el, mm, dk, dl, dm)
        };
        // average over the four polar reflections (each maps the box onto
        // itself with unit Jacobian) so the terms odd in either polar
        // angle cancel pointwise instead of only after integration; they
        // dominate the large-momentum tail otherwise
        let sym = 0.25 * (at(uk, ul, ca) + at(-uk, ul, -ca) + at(uk, -ul, -ca) + at(-uk, -ul, ca));
        4.0 * PI * k * k * lv * lv * v2k * v2l * sym * jk * jl
    };
    Ok(adaptive(
        &f,
        &[0.0, 0.0, -1.0, -1.0, 0.0],
        &[map.hi, map.hi, 1.0, 1.0, PI],
        opts,
    ))
}

/// One-excitation integral kernel: closed term
/// `v(k) v(l) theta10(p+k+l, eta+omega_kappa(k)+omega_kappa(l)) / (E_k E_l)`
/// plus the quadrature over a fresh 3-vector xi of
/// `v^2(xi) theta11(p+xi, eta+omega_kappa(xi), k, l) / E_xi^2`.
pub fn theta21(
    p: Vec3,
    eta: f64,
    k: Vec3,
    ell: Vec3,
    mu: f64,
    l: f64,
    params: &ModelParams,
    opts: &QuadOpts,
) -> Result<QuadResult> {
    let (closed, quad_term) = theta21_split(p, eta, k, ell, mu, l, params, opts)?;
    Ok(closed.combined(quad_term))
}

/// Both theta21 pieces, exposed for the composition tests.
#[allow(clippy::too_many_arguments)]
pub(crate) fn theta21_split(
    p: Vec3,
    eta: f64,
    k: Vec3,
    ell: Vec3,
    mu: f64,
    l: f64,
    params: &ModelParams,
    opts: &QuadOpts,
) -> Result<(QuadResult, QuadResult)> {
    check_kernel_args(params, eta, mu, l)?;
    let m = params.with_lambda(l);
    let vk = m.form_factor(k);
    let vl = m.form_factor(ell);
    let vkl = vk * vl;
    if vkl == 0.0 {
        return Ok((QuadResult::exact(0.0), QuadResult::exact(0.0)));
    }
    let wk = m.omega(k);
    let wl = m.omega(ell);
    let a = vec3::sub(m.p_total, p);
    let b = vec3::sub(vec3::sub(a, k), ell);
    let ek = 0.5 * vec3::norm2(vec3::sub(a, k)) + eta + wk + mu;
    let el = 0.5 * vec3::norm2(vec3::sub(a, ell)) + eta + wl + mu;

    let inner = theta10_impl(&m, vec3::norm(b), eta + wk + wl, mu, l, opts);
    let closed = inner.scaled(vkl / (ek * el));

    // two-axis frame for the xi integral: a along z, b in the xz plane;
    // the reflection symmetry halves the azimuth to [0, pi]
    let an = vec3::norm(a);
    let (bz, bx) = if an > 0.0 {
        let bz = vec3::dot(a, b) / an;
        (bz, (vec3::norm2(b) - bz * bz).max(0.0).sqrt())
    } else {
        (vec3::norm(b), 0.0)
    };
    let a2 = vec3::norm2(a);
    let b2 = vec3::norm2(b);
    let map = RadialMap::new(l);
    let f = move |x: &[f64]| -> f64 {
        let (r, jac) = map.k_jac(x[0]);
        if !r.is_finite() {
            return 0.0;
        }
        let v2 = m.form_factor_sq_r(r);
        if v2 == 0.0 {
            return 0.0;
        }
        let (u, az) = (x[1], x[2]);
        let s = (1.0 - u * u).max(0.0).sqrt();
        let wxi = m.omega_r(r);
        // (a - xi)^2 and (b - xi)^2 from the two axis projections
        let ea = 0.5 * (a2 - 2.0 * r * an * u + r * r) + eta + wxi + mu;
        let proj_b = bz * u + bx * s * az.cos();
        let mden = 0.5 * (b2 - 2.0 * r * proj_b + r * r) + eta + wxi + wk + wl + mu;
        2.0 * r * r * v2 * (-vkl / mden) / (ea * ea) * jac
    };
    let quad_term = adaptive(&f, &[0.0, -1.0, 0.0], &[map.hi, 1.0, PI], opts);
    Ok((closed, quad_term))
}

/// Least squares of counterterm samples against `offset + e * x`.
pub fn fit_divergence(samples: &[(f64, f64)], form: FitForm) -> Result<DivergenceFit> {
    if samples.len() < 4 {
        return Err(CoreError::InvalidParams(format!(
            "divergence fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let mut xs = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for &(l, value) in samples {
        if !(l > 0.0) || !l.is_finite() || !value.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "fit sample (L = {l}, value = {value}) out of domain"
            )));
        }
        xs.push(match form {
            FitForm::LinearInL => l,
            FitForm::LogInL => l.ln(),
        });
        ys.push(value);
    }
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let scale = xs.iter().map(|x| x * x).sum::<f64>().max(1.0);
    if sxx <= scale * 1e-24 {
        return Err(CoreError::DegenerateFit(
            "cutoff samples do not span the fit direction".into(),
        ));
    }
    let e = sxy / sxx;
    let offset = ybar - e * xbar;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (offset + e * x);
            r * r
        })
        .sum();
    Ok(DivergenceFit { form, e, offset, residual: (ss / n).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::quad;
    use approx::assert_relative_eq;

    fn opts(rel: f64) -> QuadOpts {
        QuadOpts { rel_tol: rel, abs_tol: 1e-13, max_regions: 300_000 }
    }

    /// xorshift grid sampler, same pattern as the model tests
    fn rng_stream(mut state: u64) -> impl FnMut() -> f64 {
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn jacobian_unit_integrands_reproduce_ball_volumes() {
        let o = opts(1e-9);
        let ball = |r: f64| 4.0 * PI * r * r * r / 3.0;
        // radial, 4 pi k^2
        let r1 = quad(&|x: &[f64]| 4.0 * PI * x[0] * x[0], &[0.0], &[2.0], &o);
        assert_relative_eq!(r1.value, ball(2.0), max_relative = 1e-10);
        // (|k|, cos), 2 pi k^2
        let r2 = quad(&|x: &[f64]| 2.0 * PI * x[0] * x[0], &[0.0, -1.0], &[2.0, 1.0], &o);
        assert_relative_eq!(r2.value, ball(2.0), max_relative = 1e-10);
        // (|k|, |l|, cos), 8 pi^2 k^2 l^2
        let r3 = quad(
            &|x: &[f64]| 8.0 * PI * PI * x[0] * x[0] * x[1] * x[1],
            &[0.0, 0.0, -1.0],
            &[2.0, 1.5, 1.0],
            &o,
        );
        assert_relative_eq!(r3.value, ball(2.0) * ball(1.5), max_relative = 1e-10);
        // (|k|, |l|, uk, ul, azimuth), 4 pi k^2 l^2
        let r5 = adaptive(
            &|x: &[f64]| 4.0 * PI * x[0] * x[0] * x[1] * x[1],
            &[0.0, 0.0, -1.0, -1.0, 0.0],
            &[2.0, 1.5, 1.0, 1.0, PI],
            &o,
        );
        assert_relative_eq!(r5.value, ball(2.0) * ball(1.5), max_relative = 1e-10);
        // two-axis frame (r, cos, azimuth), 2 r^2
        let rt = quad(
            &|x: &[f64]| 2.0 * x[0] * x[0],
            &[0.0, -1.0, 0.0],
            &[2.0, 1.0, PI],
            &o,
        );
        assert_relative_eq!(rt.value, ball(2.0), max_relative = 1e-10);
    }

    #[test]
    fn sigma1_vanishes_without_coupling() {
        let m = ModelParams { g: 0.0, ..Default::default() };
        let r = sigma1(&m, 5.0, &opts(1e-8)).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn sigma1_small_cutoff_law() {
        // integrand -> -4 pi g^2 k^2 / c^2 near the origin
        for m in [
            ModelParams::default(),
            ModelParams { c: 2.0, xi: 0.5, g: 1.3, ..Default::default() },
        ] {
            let l = 1e-3 * m.c / m.xi;
            let r = sigma1(&m, l, &opts(1e-10)).unwrap();
            let law = -4.0 * PI * m.g * m.g * l * l * l / (3.0 * m.c * m.c);
            assert!(r.converged);
            assert!(
                (r.value / law - 1.0).abs() < 0.01,
                "small-L ratio {} at c={}, xi={}",
                r.value / law,
                m.c,
                m.xi
            );
        }
    }

    #[test]
    fn sigma1_slope_law_large_cutoff() {
        for m in [
            ModelParams::default(),
            ModelParams { c: 1.1, xi: 0.8, g: 1.2, ..Default::default() },
        ] {
            let l = 1e3 * m.c / m.xi;
            let o = opts(1e-10);
            let s1 = sigma1(&m, l, &o).unwrap();
            let s2 = sigma1(&m, 2.0 * l, &o).unwrap();
            let slope = (s2.value - s1.value) / l;
            let law = -4.0 * PI * m.g * m.g / (m.xi * (0.5 + m.xi));
            assert!(
                (slope / law - 1.0).abs() < 0.01,
                "slope ratio {} at xi={}",
                slope / law,
                m.xi
            );
        }
    }

    #[test]
    fn sigma1_negative_and_monotone_decreasing() {
        let m = ModelParams::default();
        let o = opts(1e-9);
        let mut prev = 0.0;
        for l in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = sigma1(&m, l, &o).unwrap().value;
            assert!(v < prev, "sigma1({l}) = {v} not below {prev}");
            prev = v;
        }
    }

    #[test]
    fn sigma1_rejects_infinite_cutoff() {
        let m = ModelParams::default();
        assert!(matches!(
            sigma1(&m, f64::INFINITY, &opts(1e-6)),
            Err(CoreError::InvalidParams(_))
        ));
    }

    #[test]
    fn theta10_trivial_zero_when_all_shifts_vanish() {
        // eta = mu = 0 and p = P make the two fractions coincide
        let m = ModelParams::default();
        let r = theta10(vec3::ZERO, 0.0, 0.0, 4.0, &m, &opts(1e-8)).unwrap();
        assert_eq!(r.value, 0.0);
        let z = theta10(vec3::ZERO, 0.0, 1.0, 4.0, &ModelParams { g: 0.0, ..Default::default() }, &opts(1e-8))
            .unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn theta10_infinite_cutoff_matches_radial_oracle() {
        // at p = P the integrand is spherically symmetric:
        // theta10 = mu * 4 pi int k^2 v^2 / (D (D + mu)) dk > 0
        let m = ModelParams::default();
        let r = theta10(vec3::ZERO, 0.0, 1.0, f64::INFINITY, &m, &opts(1e-9)).unwrap();
        assert!(r.converged);
        assert!(r.value > 0.0, "kernel at positive mu must be positive, got {}", r.value);
        let oracle = quad(
            &|x: &[f64]| {
                let t = x[0];
                let om = 1.0 - t;
                let k = t / om;
                if !k.is_finite() {
                    return 0.0;
                }
                let v2 = m.form_factor_sq_r(k);
                let d = 0.5 * k * k + m.omega_r(k);
                4.0 * PI * k * k * v2 / (d * (d + 1.0)) / (om * om)
            },
            &[0.0],
            &[1.0],
            &opts(1e-11),
        );
        assert!(oracle.converged);
        assert_relative_eq!(r.value, oracle.value, max_relative = 1e-6);
    }

    #[test]
    fn theta10_monotone_in_eta_and_mu() {
        let m = ModelParams::default().with_momentum([0.0, 0.0, 0.4]);
        let o = opts(1e-7);
        let mut next = rng_stream(0x9e3779b97f4a7c15);
        for trial in 0..100 {
            let p = [next() - 0.5, next() - 0.5, next() - 0.5];
            let eta = 2.0 * next();
            let mu = 0.2 + 2.0 * next();
            let bump = 0.3 + next();
            let lo = theta10(p, eta, mu, 4.0, &m, &o).unwrap();
            let hi = if trial % 2 == 0 {
                theta10(p, eta + bump, mu, 4.0, &m, &o).unwrap()
            } else {
                theta10(p, eta, mu + bump, 4.0, &m, &o).unwrap()
            };
            assert!(
                hi.value >= lo.value - (hi.error + lo.error),
                "kernel not monotone at trial {trial}: {} vs {}",
                lo.value,
                hi.value
            );
        }
    }

    #[test]
    fn theta10_rotation_invariance() {
        // rotating P and p together must leave the value unchanged
        let rot = |v: Vec3| -> Vec3 {
            // Rodrigues rotation about (1,2,2)/3 by 0.7 rad
            let ax = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
            let (st, ct) = (0.7_f64.sin(), 0.7_f64.cos());
            let cross = [
                ax[1] * v[2] - ax[2] * v[1],
                ax[2] * v[0] - ax[0] * v[2],
                ax[0] * v[1] - ax[1] * v[0],
            ];
            let d = vec3::dot(ax, v) * (1.0 - ct);
            [
                v[0] * ct + cross[0] * st + ax[0] * d,
                v[1] * ct + cross[1] * st + ax[1] * d,
                v[2] * ct + cross[2] * st + ax[2] * d,
            ]
        };
        let o = opts(1e-8);
        let p_tot = [0.0, 0.0, 0.6];
        let p = [0.2, -0.1, 0.3];
        let m1 = ModelParams::default().with_momentum(p_tot);
        let m2 = ModelParams::default().with_momentum(rot(p_tot));
        let r1 = theta10(p, 0.3, 1.0, 6.0, &m1, &o).unwrap();
        let r2 = theta10(rot(p), 0.3, 1.0, 6.0, &m2, &o).unwrap();
        assert!((r1.value - r2.value).abs() <= r1.error + r2.error + 1e-12);
    }

    #[test]
    fn theta10_cutoff_saturation_with_compact_form_factor() {
        // form factor supported in |k| < 2: enlarging the integration
        // domain beyond the support cannot change the value
        let m = ModelParams::default().with_lambda(2.0);
        let o = opts(1e-9);
        let narrow = theta10_impl(&m, 0.4, 0.3, 1.0, 5.0, &o);
        let wide = theta10_impl(&m, 0.4, 0.3, 1.0, 9.0, &o);
        assert!(narrow.converged && wide.converged);
        assert!(
            (narrow.value - wide.value).abs() <= narrow.error + wide.error + 1e-12,
            "saturation violated: {} vs {}",
            narrow.value,
            wide.value
        );
    }

    #[test]
    fn theta10_stable_under_tolerance_halving() {
        let m = ModelParams::default().with_momentum([0.0, 0.0, 0.5]);
        let a = theta10([0.1, 0.0, 0.0], 0.2, 1.0, f64::INFINITY, &m, &opts(1e-6)).unwrap();
        let b = theta10([0.1, 0.0, 0.0], 0.2, 1.0, f64::INFINITY, &m, &opts(5e-7)).unwrap();
        assert!((a.value - b.value).abs() <= a.error + b.error);
    }

    #[test]
    fn sigma2_vanishes_without_coupling() {
        let m = ModelParams { g: 0.0, ..Default::default() };
        let r = sigma2(&m, 10.0, &opts(1e-6)).unwrap();
        assert_eq!(r.total().value, 0.0);
    }

    #[test]
    fn sigma2_scales_as_fourth_power_of_coupling() {
        // uniform scaling preserves every subdivision decision, so the
        // quartic homogeneity is exact to the bit
        let o = QuadOpts { rel_tol: 1e-5, abs_tol: 0.0, max_regions: 300_000 };
        let m1 = ModelParams::default();
        let m2 = ModelParams { g: 2.0, ..Default::default() };
        let r1 = sigma2(&m1, 6.0, &o).unwrap();
        let r2 = sigma2(&m2, 6.0, &o).unwrap();
        assert_eq!((16.0 * r1.total().value).to_bits(), r2.total().value.to_bits());
        assert_eq!((16.0 * r1.term_a.value).to_bits(), r2.term_a.value.to_bits());
    }

    #[test]
    fn sigma2_term_a_matches_nested_composition() {
        // outer radial quadrature over theta10(k, omega_kappa(k)) at
        // P = mu = 0 reproduces the expanded 3-D term A
        let m = ModelParams::default();
        let l = 3.0;
        let direct = sigma2(&m, l, &opts(1e-7)).unwrap().term_a;
        let inner_opts = opts(1e-9);
        let nested = quad(
            &|x: &[f64]| {
                let k = x[0];
                let v2 = m.form_factor_sq_r(k);
                if v2 == 0.0 {
                    return 0.0;
                }
                let dk = 0.5 * k * k + m.omega_r(k);
                let th = theta10_impl(&m, k, m.omega_r(k), 0.0, l, &inner_opts);
                4.0 * PI * k * k * v2 * th.value / (dk * dk)
            },
            &[0.0],
            &[l],
            &opts(1e-6),
        );
        assert!(direct.converged);
        assert_relative_eq!(direct.value, nested.value, max_relative = 1e-4);
    }

    #[test]
    fn sigma2_budget_failure_identifies_term() {
        let m = ModelParams::default();
        let r = sigma2(&m, 50.0, &QuadOpts { rel_tol: 1e-12, abs_tol: 0.0, max_regions: 40 }).unwrap();
        assert!(!r.term_a.converged || !r.term_b.converged);
        assert!(!r.total().converged);
        assert!(r.total().value.is_finite());
    }

    #[test]
    fn sigma2_deterministic_across_runs() {
        let m = ModelParams::default();
        let o = opts(1e-4);
        let a = sigma2(&m, 8.0, &o).unwrap();
        let b = sigma2(&m, 8.0, &o).unwrap();
        assert_eq!(a.total().value.to_bits(), b.total().value.to_bits());
        assert_eq!(a.term_b.error.to_bits(), b.term_b.error.to_bits());
    }

    #[test]
    fn theta20_zero_at_reference_point() {
        // sigma2 is defined as the value of the theta20 integrals at
        // P = p = eta = mu = 0, so the combined integrand vanishes pointwise
        let m = ModelParams::default();
        let r = theta20(vec3::ZERO, 0.0, 0.0, 8.0, &m, &opts(1e-8)).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
        let z = theta20([0.1, 0.0, 0.0], 0.5, 1.0, 8.0, &ModelParams { g: 0.0, ..Default::default() }, &opts(1e-8))
            .unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn theta20_axis_paths_agree_for_small_momentum_transfer() {
        // q -> 0 limit of the 5-D frame must meet the dedicated q = 0 path;
        // the 5-D quadrature is much more expensive, so it runs at a looser
        // tolerance (a frame bug would show up as an O(1) disagreement)
        let m = ModelParams::default();
        let on_axis = theta20(vec3::ZERO, 0.4, 1.0, 4.0, &m, &opts(1e-6)).unwrap();
        let near_axis = theta20([0.0, 0.0, 1e-7], 0.4, 1.0, 4.0, &m, &opts(1e-5)).unwrap();
        assert!(on_axis.converged && near_axis.converged);
        assert!(
            (on_axis.value - near_axis.value).abs()
                <= on_axis.error + near_axis.error + 1e-5 * on_axis.value.abs().max(1.0),
            "paths disagree: {} vs {}",
            on_axis.value,
            near_axis.value
        );
    }

    #[test]
    fn theta20_finite_at_infinite_cutoff() {
        let m = ModelParams::default().with_momentum([0.0, 0.0, 0.3]);
        let r = theta20(vec3::ZERO, 0.2, 1.0, f64::INFINITY, &m, &QuadOpts {
            rel_tol: 1e-3,
            abs_tol: 1e-10,
            max_regions: 300_000,
        })
        .unwrap();
        assert!(r.value.is_finite());
        assert!(r.converged, "combined subtraction should keep the tail integrable");
    }

    #[test]
    fn theta21_vanishes_outside_cutoff() {
        let m = ModelParams::default();
        let r = theta21(
            vec3::ZERO,
            0.3,
            [0.0, 0.0, 6.0],
            [0.1, 0.0, 0.0],
            1.0,
            5.0,
            &m,
            &opts(1e-6),
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn theta21_closed_term_composition() {
        // closed term = v(k) v(l) theta10(p+k+l, eta+w(k)+w(l)) / (E_k E_l)
        let m = ModelParams::default().with_momentum([0.0, 0.0, 0.4]);
        let o = opts(1e-7);
        let p = [0.1, 0.0, 0.2];
        let k = [0.3, 0.0, 0.1];
        let ell = [0.0, 0.2, -0.1];
        let (eta, mu, l) = (0.4, 1.0, 5.0);
        let (closed, quad_term) = theta21_split(p, eta, k, ell, mu, l, &m, &o).unwrap();

        let wk = m.omega(k);
        let wl = m.omega(ell);
        let a = vec3::sub(m.p_total, p);
        let ek = 0.5 * vec3::norm2(vec3::sub(a, k)) + eta + wk + mu;
        let el = 0.5 * vec3::norm2(vec3::sub(a, ell)) + eta + wl + mu;
        let th = theta10(vec3::add(p, vec3::add(k, ell)), eta + wk + wl, mu, l, &m, &o).unwrap();
        let expect = m.form_factor(k) * m.form_factor(ell) * th.value / (ek * el);
        assert_relative_eq!(closed.value, expect, max_relative = 1e-12);

        // quadrature term integrates v^2 theta11 / E^2 with theta11 < 0
        assert!(quad_term.value < 0.0);
        let total = theta21(p, eta, k, ell, mu, l, &m, &o).unwrap();
        assert_relative_eq!(total.value, closed.value + quad_term.value, max_relative = 1e-12);
    }

    #[test]
    fn theta21_quad_term_against_pointwise_kernel() {
        // spot-check the xi integrand against the model theta11 at a
        // frame-independent sample direction
        let m = ModelParams::default().with_momentum([0.0, 0.0, 0.4]);
        let o = opts(1e-6);
        let p = vec3::ZERO;
        let k = [0.0, 0.0, 0.5];
        let ell = [0.0, 0.0, -0.2];
        let (_, quad_term) = theta21_split(p, 0.1, k, ell, 1.0, f64::INFINITY, &m, &o).unwrap();
        assert!(quad_term.converged);
        assert!(quad_term.value < 0.0);
        // oracle: with all vectors on the z axis the xi integral is
        // azimuth-free, so a 2-D reduction with Jacobian 2 pi r^2 suffices
        let a = vec3::sub(m.p_total, p);
        let b = vec3::sub(vec3::sub(a, k), ell);
        let (wk, wl) = (m.omega(k), m.omega(ell));
        let vkl = m.form_factor(k) * m.form_factor(ell);
        let oracle = quad(
            &|x: &[f64]| {
                let t = x[0];
                let om = 1.0 - t;
                let r = t / om;
                if !r.is_finite() {
                    return 0.0;
                }
                let v2 = m.form_factor_sq_r(r);
                if v2 == 0.0 {
                    return 0.0;
                }
                let u = x[1];
                let wxi = m.omega_r(r);
                let ea = 0.5 * (vec3::norm2(a) - 2.0 * r * a[2] * u + r * r) + 0.1 + wxi + 1.0;
                let mden =
                    0.5 * (vec3::norm2(b) - 2.0 * r * b[2] * u + r * r) + 0.1 + wxi + wk + wl + 1.0;
                2.0 * PI * r * r * v2 * (-vkl / mden) / (ea * ea) / (om * om)
            },
            &[0.0, -1.0],
            &[1.0, 1.0],
            &opts(1e-8),
        );
        assert_relative_eq!(quad_term.value, oracle.value, max_relative = 1e-4);
    }

    #[test]
    fn fit_divergence_recovers_exact_forms() {
        let line: Vec<(f64, f64)> = [1.0, 2.0, 5.0, 9.0, 12.0]
            .iter()
            .map(|&l| (l, 3.0 * l - 7.0))
            .collect();
        let f = fit_divergence(&line, FitForm::LinearInL).unwrap();
        assert_relative_eq!(f.e, 3.0, max_relative = 1e-12);
        assert_relative_eq!(f.offset, -7.0, max_relative = 1e-12);
        assert!(f.residual < 1e-10);

        let logs: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&l| (l, 2.0 * f64::ln(l) + 1.0))
            .collect();
        let g = fit_divergence(&logs, FitForm::LogInL).unwrap();
        assert_relative_eq!(g.e, 2.0, max_relative = 1e-12);
        assert_relative_eq!(g.offset, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn fit_divergence_rejects_bad_input() {
        assert!(matches!(
            fit_divergence(&[(1.0, 0.0), (2.0, 1.0), (3.0, 2.0)], FitForm::LinearInL),
            Err(CoreError::InvalidParams(_))
        ));
        let flat = [(5.0, 1.0), (5.0, 1.1), (5.0, 0.9), (5.0, 1.0)];
        assert!(matches!(
            fit_divergence(&flat, FitForm::LinearInL),
            Err(CoreError::DegenerateFit(_))
        ));
    }

    #[test]
    fn fit_divergence_sigma1_slope_matches_asymptote() {
        let m = ModelParams::default();
        let o = opts(1e-9);
        let samples: Vec<(f64, f64)> = [200.0, 400.0, 800.0, 1600.0]
            .iter()
            .map(|&l| (l, sigma1(&m, l, &o).unwrap().value))
            .collect();
        let fit = fit_divergence(&samples, FitForm::LinearInL).unwrap();
        let e1 = -8.0 * PI / 3.0;
        assert!(
            (fit.e / e1 - 1.0).abs() < 0.02,
            "fitted slope {} vs asymptote {e1}",
            fit.e
        );
    }
}
