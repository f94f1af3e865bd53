//! Lovasz theta SDP of a graph in minimization form:
//! `min -ee^T . X  s.t.  X_ij = 0 (ij in E), tr(X) = 1, X psd`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::graph::Graph;
use super::pairs::PairMap;
use crate::error::{Error, Result};
use crate::sdp::{SdpInstance, SdpOperator};

/// Edge constraints first, then the trace row.
#[derive(Debug, Clone)]
pub struct ThetaOperator {
    n: usize,
    pairs: PairMap,
}

impl ThetaOperator {
    pub fn new(g: &Graph) -> Self {
        Self { n: g.n(), pairs: PairMap::new(g.n(), g.edges().to_vec()) }
    }

    fn trace_row(&self) -> usize {
        self.pairs.len()
    }
}

impl SdpOperator for ThetaOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_constraints(&self) -> usize {
        self.pairs.len() + 1
    }

    fn apply_c(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        let sums = u.row_sum();
        let mut out = DMatrix::zeros(u.nrows(), u.ncols());
        for (mut col, s) in out.column_iter_mut().zip(sums.iter()) {
            col.fill(-s);
        }
        out
    }

    fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = u * p[self.trace_row()];
        self.pairs.adjoint_add(p.as_slice(), u, &mut out);
        out
    }

    fn apply_map(&self, u: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.num_constraints());
        let k = self.trace_row();
        self.pairs.map_into(u, &mut out.as_mut_slice()[..k]);
        out[k] = u.norm_squared();
        out
    }

    fn apply_c_plus_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = u * p[self.trace_row()];
        for (mut col, s) in out.column_iter_mut().zip(u.row_sum().iter()) {
            col.add_scalar_mut(-s);
        }
        self.pairs.adjoint_add(p.as_slice(), u, &mut out);
        out
    }
}

/// Builds the theta instance. The optimal value is `-theta(G)`.
pub fn build_theta_instance(g: &Graph) -> Result<SdpInstance> {
    if g.num_edges() == 0 {
        return Err(Error::Input("theta instance needs a graph with edges".into()));
    }
    let op = ThetaOperator::new(g);
    let m = op.num_constraints();
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    let n = g.n() as f64;
    SdpInstance::new(Arc::new(op), b, 1.0, n * n)?.with_trace_row(m - 1)
}
