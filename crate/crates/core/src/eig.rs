//! Minimum eigenpair of an implicit symmetric operator.
//!
//! Thick-restart Lanczos with full reorthogonalization. The basis holds at
//! most `block_restart` vectors; on restart the smallest Ritz vectors are
//! kept and the projected matrix becomes an arrowhead that the next
//! Gram-Schmidt sweep fills back in.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;

/// A symmetric linear map `R^n -> R^n` available only through products.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl SymmetricOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        self * x
    }
}

/// Eigensolver settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigSettings {
    /// Relative residual tolerance: `||Av - lv|| <= tol * max(1, |l|)`.
    pub tol: f64,
    /// Cap on operator products.
    pub max_iters: usize,
    /// Krylov dimension before a restart.
    pub block_restart: usize,
    pub seed: u64,
}

impl Default for EigSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            block_restart: 30,
            seed: 0,
        }
    }
}

impl EigSettings {
    pub fn validate(&self) -> Result<(), EigError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(EigError::Settings(format!("tol must be positive, got {}", self.tol)));
        }
        if self.block_restart < 2 || self.max_iters < self.block_restart {
            return Err(EigError::Settings(format!(
                "need max_iters >= block_restart >= 2, got {} and {}",
                self.max_iters, self.block_restart
            )));
        }
        Ok(())
    }

    pub fn with_tol(&self, tol: f64) -> Self {
        Self { tol, ..self.clone() }
    }
}

/// An approximate eigenpair with its achieved residual.
#[derive(Debug, Clone)]
pub struct EigPair {
    /// Rayleigh quotient of `vector`.
    pub value: f64,
    /// Unit-norm eigenvector estimate.
    pub vector: DVector<f64>,
    /// `||A v - value v||`.
    pub residual: f64,
    /// Operator products spent.
    pub products: usize,
}

#[derive(Debug, Error)]
pub enum EigError {
    #[error("invalid eigensolver settings: {0}")]
    Settings(String),
    #[error("eigensolver did not converge (residual {:.3e} after {} products)", best.residual, best.products)]
    NotConverged { best: EigPair },
    #[error("operator produced non-finite values")]
    NonFinite,
}

impl EigError {
    /// Best pair available from a soft failure.
    pub fn best(&self) -> Option<&EigPair> {
        match self {
            EigError::NotConverged { best } => Some(best),
            _ => None,
        }
    }
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let nrm = v.norm();
    v /= nrm;
    v
}

/// Orthogonalizes `w` against `basis` twice (CGS2) and returns the
/// accumulated coefficients.
fn orthogonalize(basis: &[DVector<f64>], w: &mut DVector<f64>) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (c, v) in coeffs.iter_mut().zip(basis) {
            let h = par::dot(v.as_slice(), w.as_slice());
            par::axpy(-h, v.as_slice(), w.as_mut_slice());
            *c += h;
        }
    }
    coeffs
}

fn finish(op: &dyn SymmetricOperator, mut x: DVector<f64>, products: usize) -> Result<EigPair, EigError> {
    let nrm = x.norm();
    x /= nrm;
    let ax = op.apply(&x);
    let value = par::dot(x.as_slice(), ax.as_slice());
    let mut r = ax;
    par::axpy(-value, x.as_slice(), r.as_mut_slice());
    let residual = par::norm_sq(r.as_slice()).sqrt();
    if !(value.is_finite() && residual.is_finite()) {
        return Err(EigError::NonFinite);
    }
    Ok(EigPair {
        value,
        vector: x,
        residual,
        products: products + 1,
    })
}

/// Smallest eigenpair of `op`, started from a seeded Gaussian vector.
pub fn min_eigenpair(op: &dyn SymmetricOperator, cfg: &EigSettings) -> Result<EigPair, EigError> {
    min_eigenpair_from(op, None, cfg)
}

/// Smallest eigenpair of `op`, optionally warm-started from `start`.
pub fn min_eigenpair_from(
    op: &dyn SymmetricOperator,
    start: Option<&DVector<f64>>,
    cfg: &EigSettings,
) -> Result<EigPair, EigError> {
    cfg.validate()?;
    let n = op.dim();
    if n == 0 {
        return Err(EigError::Settings("operator has dimension 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if n == 1 {
        return finish(op, DVector::from_element(1, 1.0), 0);
    }
    let k = cfg.block_restart.min(n);
    let keep = (k / 3).max(1).min(k - 1);

    let v0 = match start {
        Some(s) if s.len() == n && s.iter().all(|x| x.is_finite()) && s.norm() > 0.0 => s / s.norm(),
        _ => random_unit(n, &mut rng),
    };

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(k);
    basis.push(v0);
    let mut h = DMatrix::<f64>::zeros(k, k);
    let mut products = 0usize;
    let mut best: Option<(f64, DVector<f64>, f64)> = None;

    loop {
        let mut j = basis.len() - 1;
        let mut tail = 0.0;
        let mut tail_vec: Option<DVector<f64>> = None;
        loop {
            let mut w = op.apply(&basis[j]);
            products += 1;
            if w.iter().any(|x| !x.is_finite()) {
                return Err(EigError::NonFinite);
            }
            let coeffs = orthogonalize(&basis, &mut w);
            for (i, c) in coeffs.iter().enumerate() {
                h[(i, j)] = *c;
                h[(j, i)] = *c;
            }
            let beta = par::norm_sq(w.as_slice()).sqrt();
            let scale = h.view((0, 0), (j + 1, j + 1)).amax().max(1.0);
            let breakdown = beta <= 1e-13 * scale;
            if j + 1 == k || products >= cfg.max_iters {
                tail = if breakdown { 0.0 } else { beta };
                if !breakdown {
                    w /= beta;
                    tail_vec = Some(w);
                }
                break;
            }
            if breakdown {
                // Invariant subspace: continue in a fresh orthogonal direction.
                let mut r = random_unit(n, &mut rng);
                orthogonalize(&basis, &mut r);
                let nrm = r.norm();
                if nrm <= 1e-12 {
                    break;
                }
                r /= nrm;
                basis.push(r);
            } else {
                w /= beta;
                basis.push(w);
            }
            j += 1;
        }

        let dim = basis.len();
        let eig = SymmetricEigen::new(h.view((0, 0), (dim, dim)).into_owned());
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let i0 = order[0];
        let theta = eig.eigenvalues[i0];
        let est = tail * eig.eigenvectors[(dim - 1, i0)].abs();
        let ritz = |i: usize| -> DVector<f64> {
            let mut x = DVector::zeros(n);
            for (c, v) in eig.eigenvectors.column(i).iter().zip(&basis) {
                par::axpy(*c, v.as_slice(), x.as_mut_slice());
            }
            x
        };
        let x = ritz(i0);
        if best.as_ref().map_or(true, |(_, _, r)| est < *r) {
            best = Some((theta, x.clone(), est));
        }

        let exhausted = tail == 0.0 && dim == n;
        if est <= cfg.tol * theta.abs().max(1.0) || exhausted {
            let pair = finish(op, x, products)?;
            if pair.residual <= cfg.tol * pair.value.abs().max(1.0) || exhausted {
                return Ok(pair);
            }
            products = pair.products;
        }
        if products >= cfg.max_iters {
            let (_, x, _) = best.expect("at least one Ritz pair");
            let pair = finish(op, x, products)?;
            return Err(EigError::NotConverged { best: pair });
        }

        // Restart: keep the smallest Ritz vectors, continue from the residual
        // direction (or a fresh random direction after a breakdown).
        let p = keep.min(dim);
        let mut new_basis: Vec<DVector<f64>> = order[..p].iter().map(|&i| ritz(i)).collect();
        h.fill(0.0);
        for (a, &i) in order[..p].iter().enumerate() {
            h[(a, a)] = eig.eigenvalues[i];
        }
        let mut next = match tail_vec {
            Some(f) => f,
            None => random_unit(n, &mut rng),
        };
        orthogonalize(&new_basis, &mut next);
        let nrm = next.norm();
        if nrm <= 1e-12 {
            next = random_unit(n, &mut rng);
            orthogonalize(&new_basis, &mut next);
        }
        let nrm = next.norm();
        next /= nrm;
        new_basis.push(next);
        basis = new_basis;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn cfg() -> EigSettings {
        EigSettings { tol: 1e-10, ..EigSettings::default() }
    }

    #[test]
    fn diagonal_two_by_two() {
        let a = dmatrix![1.0, 0.0; 0.0, -2.0];
        let pair = min_eigenpair(&a, &cfg()).unwrap();
        assert!((pair.value + 2.0).abs() < 1e-10);
        assert!((pair.vector[1].abs() - 1.0).abs() < 1e-10);
        assert!((pair.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_matrix() {
        let a = dmatrix![0.0, 1.0; 1.0, 0.0];
        let pair = min_eigenpair(&a, &cfg()).unwrap();
        assert!((pair.value + 1.0).abs() < 1e-10);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((pair.vector[0] * pair.vector[1] + 0.5).abs() < 1e-10);
        assert!((pair.vector[0].abs() - s).abs() < 1e-8);
    }

    #[test]
    fn one_by_one() {
        let a = dmatrix![3.5];
        let pair = min_eigenpair(&a, &cfg()).unwrap();
        assert_eq!(pair.value, 3.5);
        assert_eq!(pair.residual, 0.0);
    }

    #[test]
    fn rejects_bad_settings() {
        let a = dmatrix![1.0];
        let bad = EigSettings { block_restart: 1, ..EigSettings::default() };
        assert!(matches!(min_eigenpair(&a, &bad), Err(EigError::Settings(_))));
    }

    #[test]
    fn product_cap_is_a_soft_failure() {
        let n = 400;
        let a = DMatrix::from_fn(n, n, |i, j| if i == j { (i as f64).sqrt() } else { 0.0 });
        let tight = EigSettings { tol: 1e-14, max_iters: 40, block_restart: 20, seed: 1 };
        match min_eigenpair(&a, &tight) {
            Err(EigError::NotConverged { best }) => {
                assert!(best.value >= -1e-12);
                assert!((best.vector.norm() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected soft failure, got {other:?}"),
        }
    }
}
