//! Phase retrieval from coded diffraction patterns as a trace-minimization SDP.
//!
//! The Hermitian problem `min tr(X)  s.t.  |DFT(d_l o x)_k|^2 = b_(l,k)` is
//! carried over the reals: a factor column `[re; im]` of length `2n` stands
//! for `z = re + i im`, and `A(UU^T)_(l,k) = sum_c |DFT(d_l o z_c)_k|^2`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::PAR_THRESHOLD;
use crate::sdp::{FieldKind, SdpInstance, SdpOperator};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrInstanceSpec {
    /// Signal length, a power of two.
    pub n: usize,
    /// Number of masks.
    pub masks: usize,
    pub seed: u64,
}

impl PrInstanceSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() {
            return Err(Error::Input(format!("signal length must be a power of two, got {}", self.n)));
        }
        if self.masks == 0 {
            return Err(Error::Input("need at least one mask".into()));
        }
        Ok(())
    }

    pub fn num_measurements(&self) -> usize {
        self.n * self.masks
    }
}

#[derive(Debug, Clone)]
pub struct PrHidden {
    pub x: Vec<Complex64>,
    pub masks: Vec<Vec<Complex64>>,
}

impl PrHidden {
    pub fn norm_sq(&self) -> f64 {
        self.x.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `|<z, x>|^2 / (||z||^2 ||x||^2)` for a real-embedded vector `[re; im]`.
    pub fn correlation(&self, embedded: &[f64]) -> f64 {
        let z = to_complex(embedded);
        let inner: Complex64 = z.iter().zip(&self.x).map(|(a, b)| a.conj() * b).sum();
        let nz: f64 = z.iter().map(|a| a.norm_sqr()).sum();
        inner.norm_sqr() / (nz * self.norm_sq())
    }

    /// `[Re x; Im x]`.
    pub fn embedded(&self) -> DVector<f64> {
        let n = self.x.len();
        DVector::from_fn(2 * n, |i, _| if i < n { self.x[i].re } else { self.x[i - n].im })
    }
}

fn to_complex(col: &[f64]) -> Vec<Complex64> {
    let n = col.len() / 2;
    (0..n).map(|j| Complex64::new(col[j], col[n + j])).collect()
}

fn store(col: &mut [f64], z: &[Complex64]) {
    let n = z.len();
    for (j, v) in z.iter().enumerate() {
        col[j] = v.re;
        col[n + j] = v.im;
    }
}

#[derive(Clone)]
pub struct PhaseOperator {
    n: usize,
    masks: Vec<Vec<Complex64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PhaseOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaseOperator").field("n", &self.n).field("masks", &self.masks.len()).finish()
    }
}

impl PhaseOperator {
    pub fn new(masks: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = masks.first().map_or(0, Vec::len);
        if n == 0 || masks.iter().any(|d| d.len() != n) {
            return Err(Error::Input("masks must be nonempty and of equal length".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n, fwd: planner.plan_fft_forward(n), inv: planner.plan_fft_inverse(n), masks })
    }

    pub fn masks(&self) -> &[Vec<Complex64>] {
        &self.masks
    }

    /// `DFT(d_l o z)`, unnormalized.
    fn coded(&self, l: usize, z: &[Complex64]) -> Vec<Complex64> {
        let mut w: Vec<Complex64> = self.masks[l].iter().zip(z).map(|(d, v)| d * v).collect();
        self.fwd.process(&mut w);
        w
    }

    /// `conj(d_l) o IDFT(p_l o DFT(d_l o z))` with the unnormalized inverse.
    fn back(&self, l: usize, p: &[f64], z: &[Complex64]) -> Vec<Complex64> {
        let mut w = self.coded(l, z);
        for (v, &pk) in w.iter_mut().zip(p) {
            *v *= pk;
        }
        self.inv.process(&mut w);
        for (v, d) in w.iter_mut().zip(&self.masks[l]) {
            *v *= d.conj();
        }
        w
    }

    fn parallel(&self, s: usize) -> bool {
        self.n * self.masks.len() * s >= PAR_THRESHOLD
    }
}

impl SdpOperator for PhaseOperator {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn num_constraints(&self) -> usize {
        self.n * self.masks.len()
    }

    fn apply_c(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        u.clone()
    }

    fn apply_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.n;
        let cols: Vec<Vec<Complex64>> = u.column_iter().map(|c| to_complex(c.as_slice())).collect();
        let column = |z: &Vec<Complex64>| {
            let mut acc = vec![Complex64::new(0.0, 0.0); n];
            for (l, pl) in p.as_slice().chunks(n).enumerate() {
                for (a, v) in acc.iter_mut().zip(self.back(l, pl, z)) {
                    *a += v;
                }
            }
            acc
        };
        let parts: Vec<Vec<Complex64>> = if self.parallel(u.ncols()) {
            cols.par_iter().map(column).collect()
        } else {
            cols.iter().map(column).collect()
        };
        let mut out = DMatrix::zeros(2 * n, u.ncols());
        for (mut col, h) in out.column_iter_mut().zip(&parts) {
            store(col.as_mut_slice(), h);
        }
        out
    }

    fn apply_map(&self, u: &DMatrix<f64>) -> DVector<f64> {
        let n = self.n;
        let cols: Vec<Vec<Complex64>> = u.column_iter().map(|c| to_complex(c.as_slice())).collect();
        let mut out = DVector::zeros(self.num_constraints());
        let fill = |(l, chunk): (usize, &mut [f64])| {
            for z in &cols {
                for (o, w) in chunk.iter_mut().zip(self.coded(l, z)) {
                    *o += w.norm_sqr();
                }
            }
        };
        if self.parallel(u.ncols()) {
            out.as_mut_slice().par_chunks_mut(n).enumerate().for_each(fill);
        } else {
            out.as_mut_slice().chunks_mut(n).enumerate().for_each(fill);
        }
        out
    }

    fn apply_c_plus_adjoint(&self, p: &DVector<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = self.apply_adjoint(p, u);
        out += u;
        out
    }
}

fn octanary_mask(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let units = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
        Complex64::new(0.0, -1.0),
    ];
    (0..n)
        .map(|_| {
            let unit = units[rng.random_range(0..4)];
            let amp = if rng.random_bool(0.8) { 0.5_f64.sqrt() } else { 3.0_f64.sqrt() };
            unit * amp
        })
        .collect()
}

/// Builds the instance for a given signal and masks. The trace bound is
/// `||x||^2` (1 when `x = 0`).
pub fn phase_instance(x: &[Complex64], masks: Vec<Vec<Complex64>>) -> Result<SdpInstance> {
    let op = PhaseOperator::new(masks)?;
    if x.len() != op.n {
        return Err(Error::Dimension { what: "signal length", expected: op.n, got: x.len() });
    }
    let mut col = vec![0.0; 2 * op.n];
    store(&mut col, x);
    let b = op.apply_map(&DMatrix::from_column_slice(2 * op.n, 1, &col));
    let tau = x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let tau = if tau > 0.0 { tau } else { 1.0 };
    let norm_c1 = (2 * op.n) as f64;
    Ok(SdpInstance::new(Arc::new(op), b, tau, norm_c1)?
        .with_field(FieldKind::ComplexEmbedded)
        .with_identity_objective(1.0)?)
}

pub fn gen_phase_retrieval(spec: &PrInstanceSpec) -> Result<(SdpInstance, PrHidden)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = 0.5_f64.sqrt();
    let x: Vec<Complex64> = (0..spec.n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * scale
        })
        .collect();
    let masks: Vec<Vec<Complex64>> = (0..spec.masks).map(|_| octanary_mask(spec.n, &mut rng)).collect();
    let inst = phase_instance(&x, masks.clone())?;
    Ok((inst, PrHidden { x, masks }))
}
