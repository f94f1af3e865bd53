//! Adaptive accelerated composite gradient method for
//! `min_{||u||_F <= r} psi(u)` with a doubling curvature line search and an
//! explicit failure exit when `psi` does not behave like a `mu`-strongly
//! convex function.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sdp::project_in_place;

/// A differentiable function on `n x s` matrices.
pub trait SmoothFunction {
    fn value(&self, u: &DMatrix<f64>) -> f64;
    fn value_and_gradient(&self, u: &DMatrix<f64>) -> (f64, DMatrix<f64>);
}

impl<F: SmoothFunction + ?Sized> SmoothFunction for &F {
    fn value(&self, u: &DMatrix<f64>) -> f64 {
        (**self).value(u)
    }

    fn value_and_gradient(&self, u: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        (**self).value_and_gradient(u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FistaParams {
    /// Success threshold, in `(0, 1/2)`.
    pub sigma: f64,
    /// Line-search slack, in `(0, 1)`.
    pub chi: f64,
    /// Strong-convexity estimate.
    pub mu: f64,
    /// Initial curvature estimate, `> mu`.
    pub l0: f64,
    /// Radius of the Frobenius ball.
    pub radius: f64,
    /// Iteration cap multiplier: the cap is
    /// `cap_factor * sqrt(L/mu) * max(1, ln(L/mu)) + 100`, re-evaluated as `L` grows.
    pub cap_factor: f64,
}

impl Default for FistaParams {
    fn default() -> Self {
        Self {
            sigma: 0.3,
            chi: 0.5,
            mu: 0.5,
            l0: 1.0,
            radius: 1.0,
            cap_factor: 10.0,
        }
    }
}

impl FistaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(Error::Input(format!("sigma must lie in (0, 1/2), got {}", self.sigma)));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(Error::Input(format!("chi must lie in (0, 1), got {}", self.chi)));
        }
        if !(self.mu > 0.0 && self.l0 > self.mu && self.l0.is_finite()) {
            return Err(Error::Input(format!("need L0 > mu > 0, got L0 = {}, mu = {}", self.l0, self.mu)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Input(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.cap_factor > 0.0) {
            return Err(Error::Input("cap factor must be positive".into()));
        }
        Ok(())
    }

    fn cap(&self, l: f64) -> usize {
        let ratio = l / self.mu;
        (self.cap_factor * ratio.sqrt() * ratio.ln().max(1.0) + 100.0).min(1e7) as usize
    }
}

/// Why a run stopped without success.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FistaFailure {
    /// The convexity-witnessing test failed.
    Convexity,
    /// The iteration cap was hit.
    Cap,
    /// The objective returned a non-finite value.
    NonFinite,
}

#[derive(Debug, Clone)]
pub enum FistaOutcome {
    Success {
        y: DMatrix<f64>,
        v: DMatrix<f64>,
        l: f64,
        iters: usize,
    },
    Failure {
        reason: FistaFailure,
        l: f64,
        iters: usize,
    },
}

impl FistaOutcome {
    pub fn iters(&self) -> usize {
        match self {
            FistaOutcome::Success { iters, .. } | FistaOutcome::Failure { iters, .. } => *iters,
        }
    }

    pub fn is_success(&self) -> bool {
        matches!(self, FistaOutcome::Success { .. })
    }
}

const ROUNDOFF: f64 = 64.0 * f64::EPSILON;

fn dist_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Runs the method from `x0` (which must lie in the ball).
pub fn fista_run<F: SmoothFunction>(psi: &F, x0: &DMatrix<f64>, params: &FistaParams) -> Result<FistaOutcome> {
    params.validate()?;
    if !finite(x0) {
        return Err(Error::Input("starting point has non-finite entries".into()));
    }
    let x0_norm = par::norm_sq(x0.as_slice()).sqrt();
    if x0_norm > params.radius * (1.0 + 1e-12) {
        return Err(Error::Input(format!(
            "starting point outside the ball: ||x0|| = {x0_norm}, radius = {}",
            params.radius
        )));
    }
    let (mu, chi, sigma) = (params.mu, params.chi, params.sigma);

    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut a_sum = 0.0_f64;
    let mut tau = 1.0_f64;
    let mut l = params.l0;
    let mut iters = 0usize;

    loop {
        if iters >= params.cap(l) {
            return Ok(FistaOutcome::Failure { reason: FistaFailure::Cap, l, iters });
        }
        // Step 2 with the doubling line search on L.
        let (a, x_tilde, psi_xt, grad_xt, y_next, psi_y) = loop {
            let lm = l - mu;
            let a = (tau + (tau * tau + 4.0 * tau * a_sum * lm).sqrt()) / (2.0 * lm);
            let x_tilde = (&y * a_sum + &x * a) / (a_sum + a);
            let (psi_xt, grad_xt) = psi.value_and_gradient(&x_tilde);
            if !psi_xt.is_finite() || !finite(&grad_xt) {
                return Ok(FistaOutcome::Failure { reason: FistaFailure::NonFinite, l, iters });
            }
            let mut y_next = &x_tilde - &grad_xt / l;
            project_in_place(&mut y_next, params.radius);
            let psi_y = psi.value(&y_next);
            if !psi_y.is_finite() {
                return Ok(FistaOutcome::Failure { reason: FistaFailure::NonFinite, l, iters });
            }
            let step = &y_next - &x_tilde;
            let linear = psi_xt + par::dot(grad_xt.as_slice(), step.as_slice());
            let d2 = par::norm_sq(step.as_slice());
            // Values agreeing to rounding are accepted; otherwise a step that
            // barely moves (e.g. pinned to the sphere) can drive L to overflow.
            let slack = ROUNDOFF * psi_xt.abs().max(psi_y.abs());
            if linear + 0.25 * (1.0 - chi) * l * d2 + slack >= psi_y {
                break (a, x_tilde, psi_xt, grad_xt, y_next, psi_y);
            }
            l *= 2.0;
            if !l.is_finite() {
                return Ok(FistaOutcome::Failure { reason: FistaFailure::NonFinite, l, iters });
            }
        };
        let _ = (psi_xt, psi_y);
        iters += 1;

        // Step 3.
        let tau_prev = tau;
        a_sum += a;
        tau += a * mu;
        let s = (&x_tilde - &y_next) * (l - mu);
        x = (&y_next * (mu * a) + &x * tau_prev - s * a) / tau;

        // Step 4: convexity witness.
        let d_start = dist_sq(&y_next, x0);
        let d_step = dist_sq(&y_next, &x_tilde);
        if d_start < chi * a_sum * l * d_step {
            return Ok(FistaOutcome::Failure { reason: FistaFailure::Convexity, l, iters });
        }

        // Step 5.
        let (_, grad_y) = psi.value_and_gradient(&y_next);
        if !finite(&grad_y) {
            return Ok(FistaOutcome::Failure { reason: FistaFailure::NonFinite, l, iters });
        }
        let v = &grad_y - &grad_xt + (&x_tilde - &y_next) * l;
        if par::norm_sq(v.as_slice()).sqrt() <= sigma * d_start.sqrt() {
            return Ok(FistaOutcome::Success { y: y_next, v, l, iters });
        }
        y = y_next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    /// `c * ||u - center||^2 / 2` style quadratic.
    struct Quad {
        curvature: f64,
        center: DMatrix<f64>,
        anchor_weight: f64,
        anchor: DMatrix<f64>,
    }

    impl SmoothFunction for Quad {
        fn value(&self, u: &DMatrix<f64>) -> f64 {
            0.5 * self.curvature * (u - &self.center).norm_squared()
                + 0.5 * self.anchor_weight * (u - &self.anchor).norm_squared()
        }

        fn value_and_gradient(&self, u: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
            let g = (u - &self.center) * self.curvature + (u - &self.anchor) * self.anchor_weight;
            (self.value(u), g)
        }
    }

    #[test]
    fn one_dimensional_interior_minimizer() {
        // psi(u) = (u - 0.3)^2
        let psi = Quad {
            curvature: 2.0,
            center: dmatrix![0.3],
            anchor_weight: 0.0,
            anchor: dmatrix![0.0],
        };
        let params = FistaParams::default();
        match fista_run(&psi, &dmatrix![0.0], &params).unwrap() {
            FistaOutcome::Success { y, v, .. } => {
                let y = y[(0, 0)];
                assert!(v.norm() <= params.sigma * y.abs() + 1e-15);
                // |psi'(y)| <= |v| + small, so y is close to 0.3.
                assert!((y - 0.3).abs() <= params.sigma * y.abs());
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn prox_of_zero_returns_start() {
        let x0 = dmatrix![0.2, -0.1; 0.3, 0.05];
        let psi = Quad {
            curvature: 0.0,
            center: x0.clone(),
            anchor_weight: 1.0,
            anchor: x0.clone(),
        };
        match fista_run(&psi, &x0, &FistaParams::default()).unwrap() {
            FistaOutcome::Success { y, v, iters, .. } => {
                assert_eq!(iters, 1);
                assert_eq!(y, x0);
                assert_eq!(v.norm(), 0.0);
            }
            other => panic!("expected success, got {other:?}"),
        }
    }

    #[test]
    fn concave_direction_fails() {
        // psi(u) = lambda * (-u^2) + (u - x0)^2 / 2 with lambda = 50
        let x0 = dmatrix![0.1];
        let psi = Quad {
            curvature: -100.0,
            center: dmatrix![0.0],
            anchor_weight: 1.0,
            anchor: x0.clone(),
        };
        let params = FistaParams { radius: 1e6, ..FistaParams::default() };
        match fista_run(&psi, &x0, &params).unwrap() {
            FistaOutcome::Failure { reason, .. } => assert_eq!(reason, FistaFailure::Convexity),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn rejects_start_outside_ball() {
        let psi = Quad {
            curvature: 1.0,
            center: dmatrix![0.0],
            anchor_weight: 0.0,
            anchor: dmatrix![0.0],
        };
        assert!(fista_run(&psi, &dmatrix![2.0], &FistaParams::default()).is_err());
    }

    #[test]
    fn rejects_bad_params() {
        let bad = FistaParams { sigma: 0.5, ..FistaParams::default() };
        assert!(bad.validate().is_err());
        let bad = FistaParams { l0: 0.4, ..FistaParams::default() };
        assert!(bad.validate().is_err());
    }
}
