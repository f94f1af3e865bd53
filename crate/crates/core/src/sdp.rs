//! Operator-form SDP instances and the factored primal representation.
//!
//! An instance never stores `C` or the constraint matrices `A_i`. It only
//! knows how to evaluate `CU`, `(A*p)U` and `A(UU^T)` for an `n x s` factor
//! `U`, which is all the solver ever needs.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::par;

/// The three kernels that define an SDP in operator form.
///
/// Implementations must be pure and thread-safe. `apply_map` must depend on
/// `U` only through `UU^T`, and `apply_adjoint` must be its adjoint:
/// `<A(UU^T), p> = <(A*p)U, U>_F`.
pub trait SdpOperator: Send + Sync {
    /// Matrix side `n`.
    fn dim(&self) -> usize;
    /// Constraint count `m`.
    fn num_constraints(&self) -> usize;
    /// `CU`.
    fn apply_c(&self, u: &DMatrix<f64>) -> DMatrix<f64>;
    /// `(A*p)U`.
    fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64>;
    /// `A(UU^T)`.
    fn apply_map(&self, u: &DMatrix<f64>) -> DVector<f64>;

    /// `CU + (A*p)U`. Implementations with a cheap fused kernel override this.
    fn apply_c_plus_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.apply_c(u);
        out += self.apply_adjoint(p, u);
        out
    }
}

/// Whether an instance encodes a real SDP or a Hermitian one through the
/// real embedding `C^n -> R^{2n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Real,
    ComplexEmbedded,
}

/// An SDP `min C.X  s.t.  A(X) = b, tr(X) <= tau, X psd` in operator form.
#[derive(Clone)]
pub struct SdpInstance {
    op: Arc<dyn SdpOperator>,
    b: DVector<f64>,
    tau: f64,
    norm_b1: f64,
    norm_c1: f64,
    field: FieldKind,
    /// Index of a constraint row with `A_k = I`, if the instance has one.
    trace_row: Option<usize>,
    /// `c` when `C = cI`.
    identity_objective: Option<f64>,
    /// Trace bound of the instance this one was derived from by scaling.
    scale: f64,
}

impl fmt::Debug for SdpInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdpInstance")
            .field("n", &self.n())
            .field("m", &self.m())
            .field("tau", &self.tau)
            .field("norm_b1", &self.norm_b1)
            .field("norm_c1", &self.norm_c1)
            .field("field", &self.field)
            .field("scale", &self.scale)
            .finish()
    }
}

impl SdpInstance {
    /// Builds an instance. `norm_c1` is the entrywise 1-norm of `C`, supplied
    /// analytically by the caller.
    pub fn new(op: Arc<dyn SdpOperator>, b: DVector<f64>, tau: f64, norm_c1: f64) -> Result<Self> {
        check_dim("rhs length", op.num_constraints(), b.len())?;
        if op.dim() == 0 {
            return Err(Error::Input("instance dimension must be positive".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Input(format!("trace bound must be positive, got {tau}")));
        }
        if !(norm_c1.is_finite() && norm_c1 > 0.0) {
            return Err(Error::Input(format!("norm of C must be positive, got {norm_c1}")));
        }
        if b.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("rhs has non-finite entries".into()));
        }
        let norm_b1 = b.iter().map(|x| x.abs()).sum::<f64>();
        Ok(Self {
            op,
            b,
            tau,
            norm_b1,
            norm_c1,
            field: FieldKind::Real,
            trace_row: None,
            identity_objective: None,
            scale: 1.0,
        })
    }

    pub fn with_field(mut self, field: FieldKind) -> Self {
        self.field = field;
        self
    }

    /// Declares that constraint `k` is `tr(X) = b_k`.
    pub fn with_trace_row(mut self, k: usize) -> Result<Self> {
        if k >= self.m() {
            return Err(Error::Input(format!("trace row {k} out of range")));
        }
        self.trace_row = Some(k);
        Ok(self)
    }

    /// Declares that `C = cI`.
    pub fn with_identity_objective(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Input(format!("identity objective weight must be positive, got {c}")));
        }
        self.identity_objective = Some(c);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.op.dim()
    }

    pub fn m(&self) -> usize {
        self.op.num_constraints()
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `||b||_1` of the original (unscaled) right-hand side.
    pub fn norm_b1(&self) -> f64 {
        self.norm_b1
    }

    pub fn norm_c1(&self) -> f64 {
        self.norm_c1
    }

    pub fn field(&self) -> FieldKind {
        self.field
    }

    pub fn trace_row(&self) -> Option<usize> {
        self.trace_row
    }

    pub fn identity_objective(&self) -> Option<f64> {
        self.identity_objective
    }

    /// Factor by which primal matrices of this instance must be multiplied
    /// to recover the original units (1 for an unscaled instance).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn operator(&self) -> &Arc<dyn SdpOperator> {
        &self.op
    }

    fn check_factor(&self, u: &DMatrix<f64>) -> Result<()> {
        check_dim("factor rows", self.n(), u.nrows())
    }

    fn check_multiplier(&self, p: &DVector<f64>) -> Result<()> {
        check_dim("multiplier length", self.m(), p.len())
    }

    pub fn apply_c(&self, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_factor(u)?;
        Ok(self.op.apply_c(u))
    }

    pub fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_factor(u)?;
        self.check_multiplier(p)?;
        Ok(self.op.apply_adjoint(p, u))
    }

    pub fn apply_map(&self, u: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_factor(u)?;
        Ok(self.op.apply_map(u))
    }

    pub fn apply_c_plus_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_factor(u)?;
        self.check_multiplier(p)?;
        Ok(self.op.apply_c_plus_adjoint(p, u))
    }

    /// `C . UU^T = <CU, U>_F`.
    pub fn objective(&self, u: &DMatrix<f64>) -> Result<f64> {
        let cu = self.apply_c(u)?;
        Ok(par::dot(cu.as_slice(), u.as_slice()))
    }

    /// Rescales to the unit spectraplex: `X <- X/tau`, `b <- b/tau`.
    ///
    /// Operators are shared. The original `tau` is accumulated into
    /// [`scale`](Self::scale) so values can be reported in original units.
    pub fn scaled(&self) -> SdpInstance {
        if self.tau == 1.0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.b = &self.b / self.tau;
        out.scale = self.scale * self.tau;
        out.tau = 1.0;
        out
    }
}

/// `scale_instance` as a free function.
pub fn scale_instance(inst: &SdpInstance) -> SdpInstance {
    inst.scaled()
}

/// The low-rank factor `U` with `X = UU^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor(DMatrix<f64>);

impl Factor {
    /// Wraps a matrix without projecting. Fails on empty or non-finite input.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::Input("factor must have at least one row and column".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("factor has non-finite entries".into()));
        }
        Ok(Self(data))
    }

    pub fn zeros(n: usize, s: usize) -> Self {
        Self(DMatrix::zeros(n, s.max(1)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// Current rank bound `s` (column count).
    pub fn s(&self) -> usize {
        self.0.ncols()
    }

    /// Number of eigenvalues of `UU^T` at or above `rel_tol * tr(UU^T)`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let gram = self.0.transpose() * &self.0;
        let eig = gram.symmetric_eigenvalues();
        let trace: f64 = eig.iter().map(|v| v.max(0.0)).sum();
        if trace == 0.0 {
            return 0;
        }
        eig.iter().filter(|&&v| v >= rel_tol * trace).count()
    }

    pub fn norm(&self) -> f64 {
        par::norm_sq(self.0.as_slice()).sqrt()
    }
}

/// Euclidean projection onto the unit Frobenius ball.
pub fn project_ball(u: DMatrix<f64>) -> Result<Factor> {
    project_ball_radius(u, 1.0)
}

/// Euclidean projection onto the Frobenius ball of radius `r`.
pub fn project_ball_radius(mut u: DMatrix<f64>, r: f64) -> Result<Factor> {
    let nrm = par::norm_sq(u.as_slice()).sqrt();
    if !nrm.is_finite() {
        return Err(Error::Input("cannot project a non-finite matrix".into()));
    }
    if nrm > r {
        u *= r / nrm;
    }
    Factor::new(u)
}

/// In-place projection used on hot paths where finiteness is checked elsewhere.
pub(crate) fn project_in_place(u: &mut DMatrix<f64>, r: f64) {
    let nrm = par::norm_sq(u.as_slice()).sqrt();
    if nrm > r {
        *u *= r / nrm;
    }
}
