//! Adaptive inexact proximal point method for approximate stationary points
//! of a smooth nonconvex `g` over a Frobenius ball.
//!
//! Each outer step approximately solves `min lambda g(u) + ||u - W||^2/2`
//! with [`fista_run`]. When the inner solver fails, or its output does not
//! certify enough descent, the prox stepsize is halved and the subproblem is
//! retried from the same center.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::fista::{fista_run, FistaFailure, FistaOutcome, FistaParams, SmoothFunction};
use crate::par;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AippParams {
    /// Initial prox stepsize.
    pub lambda0: f64,
    /// Stationarity tolerance on `||R||_F`.
    pub rho: f64,
    pub fista: FistaParams,
    /// Cap on accepted plus rejected prox steps.
    pub max_outer: usize,
}

impl Default for AippParams {
    fn default() -> Self {
        Self {
            lambda0: 10.0,
            rho: 1e-6,
            fista: FistaParams::default(),
            max_outer: 20_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AippOutcome {
    pub w: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Prox stepsize of the last accepted step (`lambda0` if none was needed).
    pub lambda: f64,
    /// Curvature estimate carried between prox steps.
    pub m_bar: f64,
    pub accepted: usize,
    pub halvings: usize,
    pub fista_iters: usize,
    /// `g` at the start followed by `g` at each accepted iterate.
    pub trace: Vec<f64>,
}

impl AippOutcome {
    pub fn residual_norm(&self) -> f64 {
        self.r.norm()
    }
}

#[derive(Debug, Error)]
pub enum AippError {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("prox step cap reached with ||R|| = {residual:.3e}")]
    NotConverged { best: Box<AippOutcome>, residual: f64 },
    #[error("prox stepsize underflow (lambda = {lambda:.3e})")]
    LambdaUnderflow { best: Box<AippOutcome>, lambda: f64 },
    #[error("objective produced non-finite values")]
    NonFinite,
}

/// `lambda g(u) + ||u - center||^2 / 2`.
struct ProxObjective<'a, G> {
    g: &'a G,
    lambda: f64,
    center: &'a DMatrix<f64>,
}

impl<G: SmoothFunction> SmoothFunction for ProxObjective<'_, G> {
    fn value(&self, u: &DMatrix<f64>) -> f64 {
        let d = u - self.center;
        self.lambda * self.g.value(u) + 0.5 * par::norm_sq(d.as_slice())
    }

    fn value_and_gradient(&self, u: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (gv, mut grad) = self.g.value_and_gradient(u);
        let d = u - self.center;
        let value = self.lambda * gv + 0.5 * par::norm_sq(d.as_slice());
        grad *= self.lambda;
        grad += d;
        (value, grad)
    }
}

/// Runs the method from `w_init`. On success `||R||_F <= rho`,
/// `R in grad g(W) + N(W)` and `g(W) <= g(w_init)`.
pub fn aipp_run<G: SmoothFunction>(g: &G, w_init: &DMatrix<f64>, params: &AippParams) -> Result<AippOutcome, AippError> {
    params.fista.validate()?;
    if !(params.lambda0 > 0.0 && params.lambda0.is_finite()) {
        return Err(Error::Input(format!("lambda0 must be positive, got {}", params.lambda0)).into());
    }
    if !(params.rho > 0.0) {
        return Err(Error::Input(format!("rho must be positive, got {}", params.rho)).into());
    }

    let mut w_prev = w_init.clone();
    let mut g_prev = g.value(&w_prev);
    if !g_prev.is_finite() {
        return Err(AippError::NonFinite);
    }
    let mut lambda = params.lambda0;
    let mut m_bar = 1.0_f64;
    let mut out = AippOutcome {
        w: w_prev.clone(),
        r: DMatrix::zeros(w_prev.nrows(), w_prev.ncols()),
        lambda,
        m_bar,
        accepted: 0,
        halvings: 0,
        fista_iters: 0,
        trace: vec![g_prev],
    };
    let mut best_residual = f64::INFINITY;
    let mut best: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
    let lambda_floor = 1e-12 * params.lambda0;

    let snapshot = |out: &AippOutcome, best: &Option<(DMatrix<f64>, DMatrix<f64>)>| {
        let mut b = out.clone();
        if let Some((w, r)) = best {
            b.w = w.clone();
            b.r = r.clone();
        }
        Box::new(b)
    };

    for _ in 0..params.max_outer {
        let m_low = (m_bar / 2.0).max(1.0);
        let fista = FistaParams { l0: m_low, ..params.fista.clone() };
        let psi = ProxObjective { g, lambda, center: &w_prev };
        let outcome = fista_run(&psi, &w_prev, &fista)?;
        out.fista_iters += outcome.iters();
        log::trace!(
            "aipp: lambda {lambda:.3e} m_low {m_low:.3e} fista {} iters, success {}",
            outcome.iters(),
            outcome.is_success()
        );

        let accepted = match outcome {
            FistaOutcome::Success { y, v, l, .. } => {
                let g_new = g.value(&y);
                if !g_new.is_finite() {
                    return Err(AippError::NonFinite);
                }
                let step = &w_prev - &y;
                let lhs = lambda * g_prev - (lambda * g_new + 0.5 * par::norm_sq(step.as_slice()));
                let rhs = par::dot(v.as_slice(), step.as_slice());
                let slack = 64.0 * f64::EPSILON * lambda * g_prev.abs().max(g_new.abs());
                if lhs + slack >= rhs {
                    Some((y, v, l, g_new))
                } else {
                    None
                }
            }
            FistaOutcome::Failure { reason: FistaFailure::NonFinite, .. } => return Err(AippError::NonFinite),
            FistaOutcome::Failure { .. } => None,
        };

        match accepted {
            None => {
                lambda /= 2.0;
                out.halvings += 1;
                if lambda < lambda_floor {
                    return Err(AippError::LambdaUnderflow { best: snapshot(&out, &best), lambda });
                }
            }
            Some((w, v, l, g_new)) => {
                let mut r = v;
                r += &w_prev;
                r -= &w;
                r /= lambda;
                let rn = par::norm_sq(r.as_slice()).sqrt();
                log::trace!("aipp: accepted, ||R|| {rn:.3e} (rho {:.3e}), L {l:.3e}", params.rho);
                m_bar = l;
                out.accepted += 1;
                out.lambda = lambda;
                out.m_bar = m_bar;
                out.trace.push(g_new);
                out.w = w.clone();
                out.r = r.clone();
                if rn < best_residual {
                    best_residual = rn;
                    best = Some((w.clone(), r));
                }
                if rn <= params.rho {
                    return Ok(out);
                }
                w_prev = w;
                g_prev = g_new;
            }
        }
    }
    Err(AippError::NotConverged { best: snapshot(&out, &best), residual: best_residual })
}
