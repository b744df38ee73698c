//! Model parameters and pointwise kernels.
//!
//! The phonon dispersion is `omega(k) = sqrt(c^2 |k|^2 + xi^2 |k|^4)`, linear
//! with slope `c` near the origin and quadratic with coefficient `xi` at
//! large `|k|`. An infrared mass `kappa >= 0` shifts it to
//! `omega_kappa = omega + kappa`; the coupling function keeps the massless
//! dispersion, so adding `kappa` changes the Hamiltonian by exactly
//! `kappa * N`. The form factor is
//! `v_L(k) = g * 1_{|k| < L} * sqrt(|k|^2 / omega(k))` with `v(0) = 0`;
//! the cutoff `L = +inf` is admitted.

use crate::error::{CoreError, Result};
use crate::vec3::{self, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Sound velocity, slope of the dispersion at the origin.
    pub c: f64,
    /// Coefficient of the quadratic large-momentum branch.
    pub xi: f64,
    /// Coupling strength.
    pub g: f64,
    /// Infrared mass shift, `omega_kappa = omega + kappa`.
    pub kappa: f64,
    /// Ultraviolet cutoff of the form factor; `f64::INFINITY` disables it.
    pub lambda: f64,
    /// Total conserved momentum, by convention rotated onto +z.
    pub p_total: Vec3,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            c: 1.0,
            xi: 1.0,
            g: 1.0,
            kappa: 0.0,
            lambda: f64::INFINITY,
            p_total: vec3::ZERO,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(CoreError::InvalidParams(format!("c must be positive, got {}", self.c)));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(CoreError::InvalidParams(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.g >= 0.0) || !self.g.is_finite() {
            return Err(CoreError::InvalidParams(format!("g must be >= 0, got {}", self.g)));
        }
        if !(self.kappa >= 0.0) || !self.kappa.is_finite() {
            return Err(CoreError::InvalidParams(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(CoreError::InvalidParams(format!(
                "lambda must be positive (may be inf), got {}",
                self.lambda
            )));
        }
        if self.p_total.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::InvalidParams("p_total must be finite".into()));
        }
        Ok(())
    }

    pub fn with_momentum(mut self, p: Vec3) -> Self {
        self.p_total = p;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Massless dispersion at radius `r = |k|`, written as
    /// `r * sqrt(c^2 + xi^2 r^2)` to stay exact near the origin.
    #[inline]
    pub fn omega_bare_r(&self, r: f64) -> f64 {
        r * (self.c * self.c + self.xi * self.xi * r * r).sqrt()
    }

    /// Shifted dispersion `omega(k) + kappa` at radius `r`.
    #[inline]
    pub fn omega_r(&self, r: f64) -> f64 {
        self.omega_bare_r(r) + self.kappa
    }

    #[inline]
    pub fn omega(&self, k: Vec3) -> f64 {
        self.omega_r(vec3::norm(k))
    }

    /// Squared form factor `v_L(k)^2 = g^2 r / sqrt(c^2 + xi^2 r^2)` inside
    /// the cutoff. Cheaper and smoother than `form_factor` squared; the
    /// quadrature integrands use it directly.
    #[inline]
    pub fn form_factor_sq_r(&self, r: f64) -> f64 {
        if r <= 0.0 || r >= self.lambda {
            return 0.0;
        }
        self.g * self.g * r / (self.c * self.c + self.xi * self.xi * r * r).sqrt()
    }

    #[inline]
    pub fn form_factor_r(&self, r: f64) -> f64 {
        self.form_factor_sq_r(r).sqrt()
    }

    #[inline]
    pub fn form_factor(&self, k: Vec3) -> f64 {
        self.form_factor_r(vec3::norm(k))
    }

    /// One-pair comparison kernel
    /// `theta11(p, eta, k, l) = -v(k) v(l) / (1/2 (P-p-k-l)^2 + eta + omega_kappa(k) + omega_kappa(l) + mu)`.
    ///
    /// The denominator must be positive; `eta >= 0` and `mu > 0` guarantee it.
    pub fn theta11(&self, p: Vec3, eta: f64, k: Vec3, l: Vec3, mu: f64) -> f64 {
        let num = self.form_factor(k) * self.form_factor(l);
        if num == 0.0 {
            return 0.0;
        }
        let q = vec3::sub(vec3::sub(vec3::sub(self.p_total, p), k), l);
        let den = 0.5 * vec3::norm2(q) + eta + self.omega(k) + self.omega(l) + mu;
        debug_assert!(den > 0.0, "theta11 denominator must be positive");
        -num / den
    }

    /// Two-pair comparison kernel built by composition:
    /// `theta22 = v(k1) v(l1) * theta11(p+k1+l1, eta+omega(k1)+omega(l1), k2, l2)`
    /// divided by the two shifted single-excitation resolvents at `k1` and `l1`.
    #[allow(clippy::too_many_arguments)]
    pub fn theta22(
        &self,
        p: Vec3,
        eta: f64,
        k1: Vec3,
        k2: Vec3,
        l1: Vec3,
        l2: Vec3,
        mu: f64,
    ) -> f64 {
        let num = self.form_factor(k1) * self.form_factor(l1);
        if num == 0.0 {
            return 0.0;
        }
        let wk1 = self.omega(k1);
        let wl1 = self.omega(l1);
        let inner = self.theta11(
            vec3::add(vec3::add(p, k1), l1),
            eta + wk1 + wl1,
            k2,
            l2,
            mu,
        );
        let dk = vec3::sub(vec3::sub(self.p_total, p), k1);
        let dl = vec3::sub(vec3::sub(self.p_total, p), l1);
        let den_k = 0.5 * vec3::norm2(dk) + eta + wk1 + mu;
        let den_l = 0.5 * vec3::norm2(dl) + eta + wl1 + mu;
        debug_assert!(den_k > 0.0 && den_l > 0.0);
        num * inner / (den_k * den_l)
    }
}
