//! Reduction helpers shared by the kernels.
//!
//! Per-entry outputs (rows of `(A*p)U`, entries of `A(UU^T)`) are always
//! computed by a single task in a fixed order, so they are reproducible
//! regardless of thread count. Long reductions are the only place where
//! floating-point summation order can vary; in deterministic mode they are
//! summed over fixed-size chunks in index order.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;

static DETERMINISTIC: AtomicBool = AtomicBool::new(false);

/// Below this length reductions run sequentially.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;
const CHUNK: usize = 1 << 12;

pub fn set_deterministic(on: bool) {
    DETERMINISTIC.store(on, Ordering::SeqCst);
}

pub fn deterministic() -> bool {
    DETERMINISTIC.load(Ordering::Relaxed)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < PAR_THRESHOLD {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    if deterministic() {
        let partial: Vec<f64> = a
            .par_chunks(CHUNK)
            .zip(b.par_chunks(CHUNK))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .collect();
        partial.iter().sum()
    } else {
        a.par_iter().zip(b.par_iter()).map(|(x, y)| x * y).sum()
    }
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn sum(a: &[f64]) -> f64 {
    if a.len() < PAR_THRESHOLD {
        return a.iter().sum();
    }
    if deterministic() {
        let partial: Vec<f64> = a.par_chunks(CHUNK).map(|x| x.iter().sum::<f64>()).collect();
        partial.iter().sum()
    } else {
        a.par_iter().sum()
    }
}

pub fn abs_sum(a: &[f64]) -> f64 {
    if a.len() < PAR_THRESHOLD {
        return a.iter().map(|x| x.abs()).sum();
    }
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .map(|x| x.iter().map(|v| v.abs()).sum::<f64>())
        .collect();
    partial.iter().sum()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    if y.len() < PAR_THRESHOLD {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    } else {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
    }
}
