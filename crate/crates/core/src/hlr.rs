//! Hybrid low-rank method for one augmented Lagrangian subproblem
//! `min { L_beta(X; p) : X in spectraplex }`.
//!
//! Stationary points of the factored problem are computed with
//! [`aipp_run`]; a minimum eigenpair of the X-space gradient then either
//! certifies the point through the Frank-Wolfe gap or supplies a rank-one
//! direction for a Frank-Wolfe step, which usually grows the factor by one
//! column.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aipp::{aipp_run, AippError, AippParams};
use crate::al::{primal_residual, AlFunction, GradientOperator};
use crate::eig::{min_eigenpair_from, EigError, EigPair, EigSettings, SymmetricOperator};
use crate::error::{check_dim, Error};
use crate::fista::SmoothFunction;
use crate::par;
use crate::sdp::{Factor, SdpInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlrConfig {
    pub aipp: AippParams,
    pub eig: EigSettings,
    /// Eigensolver tolerance as a multiple of the subproblem tolerance.
    pub eig_tol_factor: f64,
    /// Frank-Wolfe steps allowed per subproblem.
    pub max_fw_steps: usize,
}

impl Default for HlrConfig {
    fn default() -> Self {
        Self {
            aipp: AippParams::default(),
            eig: EigSettings::default(),
            eig_tol_factor: 0.1,
            max_fw_steps: 500,
        }
    }
}

/// Result of one subproblem solve.
#[derive(Debug, Clone)]
pub struct HlrOutcome {
    pub u: Factor,
    pub theta: f64,
    /// Final rank bound (column count of `u`).
    pub s: usize,
    pub gap: f64,
    /// Minimum eigenpair of the gradient at `u`.
    pub eig: EigPair,
    pub aipp_calls: usize,
    pub aipp_steps: usize,
    pub aipp_failures: usize,
    pub fista_iters: usize,
    pub eig_products: usize,
    pub eig_soft_failures: usize,
    pub fw_steps: usize,
    /// Objective after every AIPP call and every Frank-Wolfe step.
    pub trace: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum HlrError {
    #[error(transparent)]
    Input(#[from] Error),
    #[error("Frank-Wolfe step cap reached with gap {:.3e}", best.gap)]
    Cap { best: Box<HlrOutcome> },
    #[error("non-finite values in the subproblem")]
    NonFinite,
    #[error(transparent)]
    Eig(EigError),
}

/// Frank-Wolfe gap `(GY).Y + theta` of `min G.X` over the spectraplex at `X = YY^T`.
pub fn fw_gap(g_op: &GradientOperator, y: &Factor, theta: f64) -> f64 {
    let gy = g_op.apply_block(y.matrix());
    par::dot(gy.as_slice(), y.matrix().as_slice()) + theta
}

/// `theta = max(-lambda_min(G), 0)` and the escape direction (`v_min` when
/// `theta > 0`, zero otherwise).
#[derive(Debug, Clone)]
pub struct Escape {
    pub theta: f64,
    pub direction: DVector<f64>,
    pub pair: EigPair,
    /// False when the eigensolver hit its product cap.
    pub converged: bool,
}

pub fn escape_direction(g_op: &dyn SymmetricOperator, cfg: &EigSettings) -> Result<Escape, EigError> {
    escape_direction_from(g_op, None, cfg)
}

pub fn escape_direction_from(
    g_op: &dyn SymmetricOperator,
    start: Option<&DVector<f64>>,
    cfg: &EigSettings,
) -> Result<Escape, EigError> {
    let (pair, converged) = match min_eigenpair_from(g_op, start, cfg) {
        Ok(p) => (p, true),
        Err(EigError::NotConverged { best }) => (best, false),
        Err(e) => return Err(e),
    };
    Ok(escape_from_pair(pair, converged))
}

pub(crate) fn escape_from_pair(pair: EigPair, converged: bool) -> Escape {
    let theta = (-pair.value).max(0.0);
    let direction = if theta > 0.0 {
        pair.vector.clone()
    } else {
        DVector::zeros(pair.vector.len())
    };
    Escape { theta, direction, pair, converged }
}

/// Exact minimizer over `[0, 1]` of the quadratic
/// `a -> L_beta(a yy^T + (1 - a) YY^T; p)`, given its slope magnitude
/// `numerator = (GY).Y - y^T G y` at `a = 0` and the penalty part of its
/// curvature.
pub(crate) fn fw_alpha(numerator: f64, curvature: f64) -> f64 {
    if curvature <= 1e-14 {
        return if numerator > 0.0 { 1.0 } else { 0.0 };
    }
    (numerator / curvature).clamp(0.0, 1.0)
}

/// Frank-Wolfe stepsize toward the unit-trace vertex `yy^T`.
pub fn fw_stepsize(
    inst: &SdpInstance,
    y_factor: &Factor,
    y: &DVector<f64>,
    theta: f64,
    p: &DVector<f64>,
    beta: f64,
) -> Result<f64, Error> {
    check_dim("direction length", inst.n(), y.len())?;
    let big = y_factor.matrix();
    let g_op = crate::al::gradient_operator(inst, y_factor, p, beta)?;
    let numerator = fw_gap(&g_op, y_factor, theta);
    let map_big = inst.apply_map(big)?;
    let map_small = inst.apply_map(&DMatrix::from_column_slice(y.len(), 1, y.as_slice()))?;
    let d = map_big - map_small;
    Ok(fw_alpha(numerator, beta * par::norm_sq(d.as_slice())))
}

/// `alpha = 1 -> (y, 1)`, otherwise `[sqrt(1 - alpha) Y, sqrt(alpha) y]`.
pub fn rank_update(y_factor: &Factor, y: &DVector<f64>, alpha: f64) -> Factor {
    let big = y_factor.matrix();
    if alpha >= 1.0 {
        return Factor::new(DMatrix::from_column_slice(y.len(), 1, y.as_slice())).expect("finite direction");
    }
    let (n, s) = big.shape();
    let mut out = DMatrix::zeros(n, s + 1);
    let a = (1.0 - alpha).sqrt();
    out.view_mut((0, 0), (n, s)).copy_from(&(big * a));
    out.set_column(s, &(y * alpha.sqrt()));
    Factor::new(out).expect("finite factor")
}

/// Solves the subproblem over the unit spectraplex to Frank-Wolfe gap `eps_t`.
pub fn hlr_solve(
    inst: &SdpInstance,
    u_init: &Factor,
    p: &DVector<f64>,
    beta: f64,
    eps_t: f64,
    cfg: &HlrConfig,
) -> Result<HlrOutcome, HlrError> {
    hlr_solve_in_ball(inst, 1.0, u_init, p, beta, eps_t, None, cfg)
}

/// Subproblem over `{tr X <= radius^2}`. `eps_t` is expressed for the unit
/// ball; the gap and stationarity targets are rescaled by `radius^2` and
/// `radius`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn hlr_solve_in_ball(
    inst: &SdpInstance,
    radius: f64,
    u_init: &Factor,
    p: &DVector<f64>,
    beta: f64,
    eps_t: f64,
    eig_start: Option<&DVector<f64>>,
    cfg: &HlrConfig,
) -> Result<HlrOutcome, HlrError> {
    check_dim("factor rows", inst.n(), u_init.n())?;
    if !(eps_t > 0.0) {
        return Err(Error::Input(format!("subproblem tolerance must be positive, got {eps_t}")).into());
    }
    let g = AlFunction::new(inst, p, beta)?;
    let gap_tol = eps_t * radius * radius;
    let aipp_params = AippParams {
        rho: eps_t * radius,
        fista: crate::fista::FistaParams { radius, ..cfg.aipp.fista.clone() },
        ..cfg.aipp.clone()
    };
    let eig_cfg = cfg.eig.with_tol(cfg.eig_tol_factor * eps_t);

    let mut start = u_init.matrix().clone();
    let mut warm: Option<DVector<f64>> = eig_start.cloned();
    let mut stats = HlrOutcome {
        u: u_init.clone(),
        theta: 0.0,
        s: u_init.s(),
        gap: f64::INFINITY,
        eig: EigPair {
            value: f64::NAN,
            vector: DVector::zeros(inst.n()),
            residual: f64::INFINITY,
            products: 0,
        },
        aipp_calls: 0,
        aipp_steps: 0,
        aipp_failures: 0,
        fista_iters: 0,
        eig_products: 0,
        eig_soft_failures: 0,
        fw_steps: 0,
        trace: Vec::new(),
    };

    loop {
        stats.aipp_calls += 1;
        let w = match aipp_run(&g, &start, &aipp_params) {
            Ok(out) => {
                stats.aipp_steps += out.accepted;
                stats.fista_iters += out.fista_iters;
                out.w
            }
            Err(AippError::NotConverged { best, residual }) | Err(AippError::LambdaUnderflow { best, lambda: residual }) => {
                warn!("stationary-point solve stopped early ({residual:.3e}); continuing with best iterate");
                stats.aipp_failures += 1;
                stats.aipp_steps += best.accepted;
                stats.fista_iters += best.fista_iters;
                best.w
            }
            Err(AippError::NonFinite) => return Err(HlrError::NonFinite),
            Err(AippError::Input(e)) => return Err(e.into()),
        };
        let y_factor = Factor::new(w).map_err(|_| HlrError::NonFinite)?;
        let g_y = g.value(y_factor.matrix());
        stats.trace.push(g_y);

        let residual = primal_residual(inst, y_factor.matrix())?;
        let mut q = p.clone();
        q.axpy(beta, &residual, 1.0);
        let g_op = GradientOperator::from_multiplier(inst, q)?;
        let esc = escape_direction_from(&g_op, warm.as_ref(), &eig_cfg).map_err(HlrError::Eig)?;
        stats.eig_products += esc.pair.products;
        if !esc.converged {
            stats.eig_soft_failures += 1;
        }
        warm = Some(esc.pair.vector.clone());

        let gy = g_op.apply_block(y_factor.matrix());
        let inner = par::dot(gy.as_slice(), y_factor.matrix().as_slice());
        let gap = inner + esc.theta * radius * radius;
        if !gap.is_finite() {
            return Err(HlrError::NonFinite);
        }
        debug!(
            "hlr: gap {:.3e} theta {:.3e} rank {} L {:.6e} fw {}",
            gap,
            esc.theta,
            y_factor.s(),
            g_y,
            stats.fw_steps
        );
        stats.theta = esc.theta;
        stats.s = y_factor.s();
        stats.gap = gap;
        stats.eig = esc.pair.clone();
        stats.u = y_factor.clone();
        if gap <= gap_tol {
            return Ok(stats);
        }
        if stats.fw_steps >= cfg.max_fw_steps {
            return Err(HlrError::Cap { best: Box::new(stats) });
        }

        // Frank-Wolfe step toward the vertex radius^2 * yy^T.
        let vertex = &esc.direction * radius;
        let map_vertex = inst.apply_map(&DMatrix::from_column_slice(vertex.len(), 1, vertex.as_slice()))?;
        let map_y = &residual + inst.b();
        let d = map_y - map_vertex;
        let alpha = fw_alpha(gap, beta * par::norm_sq(d.as_slice()));
        let next = rank_update(&y_factor, &vertex, alpha);
        stats.fw_steps += 1;
        stats.trace.push(g.value(next.matrix()));
        start = next.into_matrix();
    }
}
