//! Nuclear-norm matrix completion as an SDP on `X = [W1 Y; Y^T W2]`:
//! `min tr(X)/2  s.t.  Y_ij = M_ij ((i, j) in Omega), X psd`.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::pairs::PairMap;
use crate::error::{Error, Result};
use crate::sdp::{SdpInstance, SdpOperator};

/// How the sample count is derived from `(n1, n2, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SampleFormula {
    /// `ceil(gamma r (n1 + n2))`.
    #[default]
    Full,
    /// `ceil(gamma r (n1 + n2 - r))`.
    DegreesOfFreedom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McInstanceSpec {
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub seed: u64,
    pub formula: SampleFormula,
    /// The trace bound is `tau_factor` times the trace of the hidden optimum.
    pub tau_factor: f64,
}

impl McInstanceSpec {
    pub fn new(n1: usize, n2: usize, r: usize, seed: u64) -> Self {
        Self { n1, n2, r, seed, formula: SampleFormula::Full, tau_factor: 1.2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n1 >= 1 && self.n2 >= self.n1) {
            return Err(Error::Input(format!("need n2 >= n1 >= 1, got n1 = {}, n2 = {}", self.n1, self.n2)));
        }
        if !(self.r >= 1 && self.r <= self.n1) {
            return Err(Error::Input(format!("need 1 <= r <= n1, got r = {}", self.r)));
        }
        if !(self.tau_factor >= 1.0 && self.tau_factor.is_finite()) {
            return Err(Error::Input(format!("tau factor must be >= 1, got {}", self.tau_factor)));
        }
        Ok(())
    }

    /// Oversampling ratio `r ln(n1 + n2)`.
    pub fn gamma(&self) -> f64 {
        self.r as f64 * ((self.n1 + self.n2) as f64).ln()
    }

    pub fn num_samples(&self) -> usize {
        let r = self.r as f64;
        let width = match self.formula {
            SampleFormula::Full => (self.n1 + self.n2) as f64,
            SampleFormula::DegreesOfFreedom => (self.n1 + self.n2 - self.r) as f64,
        };
        (self.gamma() * r * width).ceil() as usize
    }
}

/// The planted low-rank matrix `M = U V^T`.
#[derive(Debug, Clone)]
pub struct McHidden {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Singular values of `M`, descending.
    pub singular_values: Vec<f64>,
    /// `Z = [P; Q]` with `ZZ^T` the minimum-trace completion (`tr = 2 ||M||_*`).
    pub optimal_factor: DMatrix<f64>,
}

impl McHidden {
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.u * self.v.transpose()
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.singular_values.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct MatCompOperator {
    n: usize,
    pairs: PairMap,
}

impl SdpOperator for MatCompOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn num_constraints(&self) -> usize {
        self.pairs.len()
    }

    fn apply_c(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u * 0.5
    }

    fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(u.nrows(), u.ncols());
        self.pairs.adjoint_add(p.as_slice(), u, &mut out);
        out
    }

    fn apply_map(&self, u: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.pairs.len());
        self.pairs.map_into(u, out.as_mut_slice());
        out
    }

    fn apply_c_plus_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = u * 0.5;
        self.pairs.adjoint_add(p.as_slice(), u, &mut out);
        out
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Distinct sorted row-major indices into an `n1 x n2` grid.
fn sample_entries(n1: usize, n2: usize, m: usize, rng: &mut ChaCha8Rng) -> Vec<(u32, u32)> {
    let total = n1 as u64 * n2 as u64;
    let mut seen = HashSet::with_capacity(m);
    while seen.len() < m {
        seen.insert(rng.random_range(0..total));
    }
    let mut idx: Vec<u64> = seen.into_iter().collect();
    idx.sort_unstable();
    idx.into_iter().map(|k| ((k / n2 as u64) as u32, (k % n2 as u64) as u32)).collect()
}

/// Factors `M = U V^T` through thin QR plus an `r x r` SVD.
fn hidden_from_factors(u: DMatrix<f64>, v: DMatrix<f64>) -> McHidden {
    let qu = u.clone().qr();
    let qv = v.clone().qr();
    let core = qu.r() * qv.r().transpose();
    let svd = core.svd(true, true);
    let (pu, sigma, pvt) = (svd.u.unwrap(), svd.singular_values, svd.v_t.unwrap());
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let r = sigma.len();
    let left = qu.q() * pu;
    let right = qv.q() * pvt.transpose();
    let (n1, n2) = (left.nrows(), right.nrows());
    let mut z = DMatrix::zeros(n1 + n2, r);
    for (c, &k) in order.iter().enumerate() {
        let s = sigma[k].sqrt();
        z.view_mut((0, c), (n1, 1)).copy_from(&(left.column(k) * s));
        z.view_mut((n1, c), (n2, 1)).copy_from(&(right.column(k) * s));
    }
    McHidden {
        u,
        v,
        singular_values: order.iter().map(|&k| sigma[k]).collect(),
        optimal_factor: z,
    }
}

pub fn gen_matrix_completion(spec: &McInstanceSpec) -> Result<(SdpInstance, McHidden)> {
    spec.validate()?;
    let (n1, n2) = (spec.n1, spec.n2);
    let m = spec.num_samples();
    if m as u64 > n1 as u64 * n2 as u64 {
        return Err(Error::Input(format!("{m} samples requested from a {n1} x {n2} matrix")));
    }
    if m > u32::MAX as usize {
        return Err(Error::Input(format!("too many samples: {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u = gaussian(n1, spec.r, &mut rng);
    let v = gaussian(n2, spec.r, &mut rng);
    let omega = sample_entries(n1, n2, m, &mut rng);
    let b = DVector::from_iterator(
        m,
        omega.iter().map(|&(i, j)| u.row(i as usize).dot(&v.row(j as usize))),
    );
    let hidden = hidden_from_factors(u, v);
    let tau = spec.tau_factor * 2.0 * hidden.nuclear_norm();
    let pairs = omega.into_iter().map(|(i, j)| (i, n1 as u32 + j)).collect();
    let n = n1 + n2;
    let op = MatCompOperator { n, pairs: PairMap::new(n, pairs) };
    let inst = SdpInstance::new(Arc::new(op), b, tau, 0.5 * n as f64)?.with_identity_objective(0.5)?;
    Ok((inst, hidden))
}

/// The `n1 x n2` off-diagonal block of `UU^T`.
pub fn completed_block(u: &DMatrix<f64>, n1: usize) -> DMatrix<f64> {
    let n2 = u.nrows() - n1;
    u.rows(0, n1) * u.rows(n1, n2).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_counts() {
        assert_eq!(McInstanceSpec::new(3000, 7000, 3, 0).num_samples(), 828_931);
        assert_eq!(McInstanceSpec::new(3000, 7000, 5, 0).num_samples(), 2_302_586);
        assert_eq!(McInstanceSpec::new(30, 70, 2, 0).num_samples(), 1843);
    }

    #[test]
    fn hidden_solution_is_feasible_and_optimal_trace() {
        let spec = McInstanceSpec::new(30, 70, 2, 3);
        let (inst, hidden) = gen_matrix_completion(&spec).unwrap();
        let z = &hidden.optimal_factor;
        let res = inst.apply_map(z).unwrap() - inst.b();
        assert!(res.norm() < 1e-10 * (1.0 + inst.b().norm()));
        assert!((z.norm_squared() - 2.0 * hidden.nuclear_norm()).abs() < 1e-9);
        assert!((completed_block(z, 30) - hidden.matrix()).norm() < 1e-10);
        assert!((inst.objective(z).unwrap() - hidden.nuclear_norm()).abs() < 1e-9);
        let expected: f64 = hidden.matrix().svd(false, false).singular_values.iter().sum();
        assert!((hidden.nuclear_norm() - expected).abs() < 1e-9);
    }

    #[test]
    fn oversampling_is_rejected() {
        let spec = McInstanceSpec::new(3, 4, 3, 0);
        assert!(spec.num_samples() > 12);
        assert!(gen_matrix_completion(&spec).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = McInstanceSpec::new(20, 30, 1, 9);
        let (a, _) = gen_matrix_completion(&spec).unwrap();
        let (b, _) = gen_matrix_completion(&spec).unwrap();
        assert_eq!(a.b(), b.b());
    }
}
