//! Low-rank solver for trace-bounded SDPs
//!
//! ```text
//! min C.X  s.t.  A(X) = b,  tr(X) <= tau,  X psd
//! ```
//!
//! given in operator form (see [`SdpOperator`]). The solver runs an augmented
//! Lagrangian outer loop whose subproblems are solved over factors `X = UU^T`
//! by an inexact proximal point method, with minimum-eigenvector Frank-Wolfe
//! steps that certify optimality of a factor or grow its rank.
//!
//! ```
//! use hallar::instances::{build_theta_instance, Graph};
//! use hallar::{solve, SolverConfig, Status};
//!
//! let inst = build_theta_instance(&Graph::cycle(5).unwrap()).unwrap();
//! let sol = solve(&inst, &SolverConfig { eps: 1e-6, ..SolverConfig::default() }).unwrap();
//! assert_eq!(sol.report.status, Status::Optimal);
//! assert!((sol.report.pval + 5f64.sqrt()).abs() < 1e-4);
//! ```

pub mod aipp;
pub mod al;
pub mod eig;
pub mod error;
pub mod fista;
pub mod hlr;
pub mod instances;
pub mod par;
pub mod sdp;
pub mod solver;

pub use aipp::{aipp_run, AippError, AippOutcome, AippParams};
pub use al::{al_gradient, al_value, gradient_operator, primal_residual, AlFunction, GradientOperator};
pub use eig::{min_eigenpair, min_eigenpair_from, EigError, EigPair, EigSettings, SymmetricOperator};
pub use error::{Error, Result};
pub use fista::{fista_run, FistaFailure, FistaOutcome, FistaParams, SmoothFunction};
pub use hlr::{fw_gap, fw_stepsize, hlr_solve, rank_update, HlrConfig, HlrError, HlrOutcome};
pub use sdp::{project_ball, project_ball_radius, scale_instance, Factor, FieldKind, SdpInstance, SdpOperator};
pub use solver::{
    canonical_dual, check_termination, multiplier_update, solve, solve_from, Solution, SolveReport, SolverConfig,
    Status, TerminationCheck,
};

/// Dense reference implementations used as test oracles.
#[doc(hidden)]
pub mod testing {
    use std::sync::Arc;

    use nalgebra::{DMatrix, DVector};

    use crate::sdp::{SdpInstance, SdpOperator};

    /// An operator that stores `C` and every `A_i` explicitly.
    #[derive(Debug, Clone)]
    pub struct DenseSdp {
        pub c: DMatrix<f64>,
        pub a: Vec<DMatrix<f64>>,
    }

    impl DenseSdp {
        /// Symmetrizes the inputs.
        pub fn new(c: DMatrix<f64>, a: Vec<DMatrix<f64>>) -> Self {
            let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
            Self { c: sym(c), a: a.into_iter().map(sym).collect() }
        }

        pub fn adjoint_matrix(&self, p: &DVector<f64>) -> DMatrix<f64> {
            let n = self.c.nrows();
            self.a.iter().zip(p.iter()).fold(DMatrix::zeros(n, n), |acc, (a, &pi)| acc + a * pi)
        }

        pub fn map_matrix(&self, x: &DMatrix<f64>) -> DVector<f64> {
            DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.dot(x)))
        }

        pub fn instance(self, b: DVector<f64>, tau: f64) -> SdpInstance {
            let norm_c1 = self.c.iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
            SdpInstance::new(Arc::new(self), b, tau, norm_c1).expect("valid dense instance")
        }
    }

    impl SdpOperator for DenseSdp {
        fn dim(&self) -> usize {
            self.c.nrows()
        }

        fn num_constraints(&self) -> usize {
            self.a.len()
        }

        fn apply_c(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
            &self.c * u
        }

        fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
            self.adjoint_matrix(p) * u
        }

        fn apply_map(&self, u: &DMatrix<f64>) -> DVector<f64> {
            self.map_matrix(&(u * u.transpose()))
        }
    }
}
