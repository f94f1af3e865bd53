//! Augmented Lagrangian in factored form.
//!
//! `g(U) = L_beta(UU^T; p) = C.UU^T + p^T(A(UU^T) - b) + beta/2 ||A(UU^T) - b||^2`
//! and its gradient `2 (C + A*(q)) U` with `q = p + beta (A(UU^T) - b)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::eig::SymmetricOperator;
use crate::error::{check_dim, check_finite, Error, Result};
use crate::fista::SmoothFunction;
use crate::par;
use crate::sdp::{Factor, SdpInstance, SdpOperator};

fn check_args(inst: &SdpInstance, u: &DMatrix<f64>, p: &DVector<f64>, beta: f64) -> Result<()> {
    check_dim("factor rows", inst.n(), u.nrows())?;
    check_dim("multiplier length", inst.m(), p.len())?;
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Input(format!("penalty must be positive, got {beta}")));
    }
    Ok(())
}

/// `A(UU^T) - b`.
pub fn primal_residual(inst: &SdpInstance, u: &DMatrix<f64>) -> Result<DVector<f64>> {
    let mut r = inst.apply_map(u)?;
    r -= inst.b();
    Ok(r)
}

/// `q = p + beta r`.
fn shifted_multiplier(p: &DVector<f64>, beta: f64, r: &DVector<f64>) -> DVector<f64> {
    let mut q = p.clone();
    q.axpy(beta, r, 1.0);
    q
}

fn value_from_parts(cu: &DMatrix<f64>, u: &DMatrix<f64>, p: &DVector<f64>, r: &DVector<f64>, beta: f64) -> f64 {
    par::dot(cu.as_slice(), u.as_slice())
        + par::dot(p.as_slice(), r.as_slice())
        + 0.5 * beta * par::norm_sq(r.as_slice())
}

/// Augmented Lagrangian value at `X = UU^T`, computed without forming `X`.
pub fn al_value(inst: &SdpInstance, u: &Factor, p: &DVector<f64>, beta: f64) -> Result<f64> {
    let u = u.matrix();
    check_args(inst, u, p, beta)?;
    let r = primal_residual(inst, u)?;
    let cu = inst.apply_c(u)?;
    check_finite("augmented Lagrangian value", value_from_parts(&cu, u, p, &r, beta))
}

/// Gradient of `U -> L_beta(UU^T; p)`: one pass for `A(UU^T)`, one fused
/// pass for `CU + (A*q)U`.
pub fn al_gradient(inst: &SdpInstance, u: &Factor, p: &DVector<f64>, beta: f64) -> Result<DMatrix<f64>> {
    let u = u.matrix();
    check_args(inst, u, p, beta)?;
    let r = primal_residual(inst, u)?;
    let q = shifted_multiplier(p, beta, &r);
    let mut grad = inst.apply_c_plus_adjoint(&q, u)?;
    grad *= 2.0;
    if grad.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("augmented Lagrangian gradient"));
    }
    Ok(grad)
}

/// Matrix-free handle for `G = C + A*(q)`, the X-space gradient of the
/// augmented Lagrangian at `UU^T`.
#[derive(Clone)]
pub struct GradientOperator {
    op: Arc<dyn SdpOperator>,
    q: DVector<f64>,
}

impl GradientOperator {
    /// Handle for `C + A*(q)` with an explicit multiplier.
    pub fn from_multiplier(inst: &SdpInstance, q: DVector<f64>) -> Result<Self> {
        check_dim("multiplier length", inst.m(), q.len())?;
        Ok(Self { op: Arc::clone(inst.operator()), q })
    }

    pub fn multiplier(&self) -> &DVector<f64> {
        &self.q
    }

    /// `G Y` for an `n x s` block.
    pub fn apply_block(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        self.op.apply_c_plus_adjoint(&self.q, y)
    }
}

impl SymmetricOperator for GradientOperator {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        let y = self.op.apply_c_plus_adjoint(&self.q, &m);
        DVector::from_vec(y.data.into())
    }
}

/// `G = C + A*(p + beta (A(UU^T) - b))` as a matrix-free operator.
pub fn gradient_operator(inst: &SdpInstance, u: &Factor, p: &DVector<f64>, beta: f64) -> Result<GradientOperator> {
    check_args(inst, u.matrix(), p, beta)?;
    let r = primal_residual(inst, u.matrix())?;
    GradientOperator::from_multiplier(inst, shifted_multiplier(p, beta, &r))
}

/// `g(U) = L_beta(UU^T; p)` packaged for the nonconvex subsolvers.
pub struct AlFunction<'a> {
    inst: &'a SdpInstance,
    p: &'a DVector<f64>,
    beta: f64,
}

impl<'a> AlFunction<'a> {
    pub fn new(inst: &'a SdpInstance, p: &'a DVector<f64>, beta: f64) -> Result<Self> {
        check_dim("multiplier length", inst.m(), p.len())?;
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Input(format!("penalty must be positive, got {beta}")));
        }
        Ok(Self { inst, p, beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn residual(&self, u: &DMatrix<f64>) -> DVector<f64> {
        let op = self.inst.operator();
        let mut r = op.apply_map(u);
        r -= self.inst.b();
        r
    }
}

impl SmoothFunction for AlFunction<'_> {
    fn value(&self, u: &DMatrix<f64>) -> f64 {
        let r = self.residual(u);
        let cu = self.inst.operator().apply_c(u);
        value_from_parts(&cu, u, self.p, &r, self.beta)
    }

    fn value_and_gradient(&self, u: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let op = self.inst.operator();
        let r = self.residual(u);
        let q = shifted_multiplier(self.p, self.beta, &r);
        let mut grad = op.apply_c(u);
        let value = value_from_parts(&grad, u, self.p, &r, self.beta);
        grad += op.apply_adjoint(&q, u);
        grad *= 2.0;
        (value, grad)
    }
}
