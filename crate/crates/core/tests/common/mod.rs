#![allow(dead_code)]

use hallar::testing::DenseSdp;
use hallar::SdpInstance;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

pub fn symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = gaussian(n, n, rng);
    (&g + g.transpose()) * 0.5
}

/// A point of the unit Frobenius ball with norm drawn uniformly in `(0, 1)`.
pub fn ball_point(n: usize, s: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut u = gaussian(n, s, rng);
    let r: f64 = rng.random_range(0.05..0.95);
    u *= r / u.norm();
    u
}

pub fn random_dense(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DenseSdp {
    let c = symmetric(n, rng);
    let a = (0..m).map(|_| symmetric(n, rng)).collect();
    DenseSdp::new(c, a)
}

/// Random instance with `tau = 1` and a rhs attained by some point of the
/// spectraplex.
pub fn random_instance(n: usize, m: usize, rng: &mut ChaCha8Rng) -> (DenseSdp, SdpInstance) {
    let dense = random_dense(n, m, rng);
    let u = ball_point(n, 2, rng);
    let b = dense.map_matrix(&(&u * u.transpose()));
    let inst = dense.clone().instance(b, 1.0);
    (dense, inst)
}

/// Dense augmented Lagrangian at `X`.
pub fn dense_al(d: &DenseSdp, b: &DVector<f64>, x: &DMatrix<f64>, p: &DVector<f64>, beta: f64) -> f64 {
    let r = d.map_matrix(x) - b;
    d.c.dot(x) + p.dot(&r) + 0.5 * beta * r.norm_squared()
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}
