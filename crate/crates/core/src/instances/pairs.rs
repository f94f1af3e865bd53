//! Constraints of the form `A_k . X = X_{i_k j_k}` (off-diagonal entries),
//! shared by the matrix completion and stable set families.
//!
//! Under `X = UU^T` the map is a row dot product, and the adjoint
//! `A*p = sum_k p_k (E_ij + E_ji)/2` is applied as a gather over a
//! per-vertex adjacency list so every output row is written by one task.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::par::PAR_THRESHOLD;

#[derive(Debug, Clone)]
pub(crate) struct PairMap {
    n: usize,
    pairs: Vec<(u32, u32)>,
    /// CSR over vertices: `(neighbor, constraint index)`.
    adj_ptr: Vec<usize>,
    adj: Vec<(u32, u32)>,
}

impl PairMap {
    pub(crate) fn new(n: usize, pairs: Vec<(u32, u32)>) -> Self {
        let mut deg = vec![0usize; n + 1];
        for &(i, j) in &pairs {
            deg[i as usize + 1] += 1;
            deg[j as usize + 1] += 1;
        }
        for v in 0..n {
            deg[v + 1] += deg[v];
        }
        let adj_ptr = deg.clone();
        let mut fill = deg;
        let mut adj = vec![(0u32, 0u32); 2 * pairs.len()];
        for (k, &(i, j)) in pairs.iter().enumerate() {
            adj[fill[i as usize]] = (j, k as u32);
            fill[i as usize] += 1;
            adj[fill[j as usize]] = (i, k as u32);
            fill[j as usize] += 1;
        }
        Self { n, pairs, adj_ptr, adj }
    }

    pub(crate) fn len(&self) -> usize {
        self.pairs.len()
    }

    /// `out[k] = U_{i_k,:} . U_{j_k,:}`.
    pub(crate) fn map_into(&self, u: &DMatrix<f64>, out: &mut [f64]) {
        let n = self.n;
        let s = u.ncols();
        let data = u.as_slice();
        let entry = |&(i, j): &(u32, u32)| -> f64 {
            let (i, j) = (i as usize, j as usize);
            (0..s).map(|c| data[i + c * n] * data[j + c * n]).sum()
        };
        if self.pairs.len() * s < PAR_THRESHOLD {
            out.iter_mut().zip(&self.pairs).for_each(|(o, pr)| *o = entry(pr));
        } else {
            out.par_iter_mut().zip(self.pairs.par_iter()).for_each(|(o, pr)| *o = entry(pr));
        }
    }

    /// `out += (A*p) U` restricted to the pair constraints.
    pub(crate) fn adjoint_add(&self, p: &[f64], u: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        const ROWS: usize = 1024;
        let n = self.n;
        let parallel = self.adj.len() * u.ncols() >= PAR_THRESHOLD;
        for (src, dst) in u.as_slice().chunks(n).zip(out.as_mut_slice().chunks_mut(n)) {
            let block = |(b, rows): (usize, &mut [f64])| {
                for (off, o) in rows.iter_mut().enumerate() {
                    let v = b * ROWS + off;
                    let mut acc = 0.0;
                    for &(w, k) in &self.adj[self.adj_ptr[v]..self.adj_ptr[v + 1]] {
                        acc += p[k as usize] * src[w as usize];
                    }
                    *o += 0.5 * acc;
                }
            };
            if parallel {
                dst.par_chunks_mut(ROWS).enumerate().for_each(block);
            } else {
                dst.chunks_mut(ROWS).enumerate().for_each(block);
            }
        }
    }
}
