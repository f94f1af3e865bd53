//! Outer augmented Lagrangian loop.
//!
//! Each outer iteration solves one subproblem with the hybrid low-rank
//! method, updates the multiplier, and checks the relative termination
//! measure in the instance's original units.

use std::time::Instant;

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aipp::AippParams;
use crate::al::{primal_residual, GradientOperator};
use crate::eig::{min_eigenpair_from, EigError, EigSettings};
use crate::error::{check_dim, Error, Result};
use crate::hlr::{hlr_solve_in_ball, HlrConfig, HlrError, HlrOutcome};
use crate::par;
use crate::sdp::{Factor, SdpInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative tolerance of the termination measure.
    pub eps: f64,
    /// Initial penalty; `None` selects `10 max(1, 1/||b||_2)` on the scaled rhs.
    pub beta0: Option<f64>,
    pub beta_growth: f64,
    /// Penalty grows when the relative infeasibility shrinks by less than
    /// this factor over an outer iteration.
    pub beta_stall: f64,
    /// Initial subproblem tolerance; `None` selects `1e-2 (1 + ||b||_1)`, or
    /// the floor when warm-started.
    pub eps0: Option<f64>,
    pub eps_decay: f64,
    /// Smallest subproblem tolerance; `None` selects `eps (1 + ||b||_1) / 10`.
    pub eps_floor: Option<f64>,
    pub max_outer: usize,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub seed: u64,
    pub eig: EigSettings,
    pub aipp: AippParams,
    pub max_fw_steps: usize,
    /// Eigensolver tolerance inside subproblems, relative to their tolerance.
    pub eig_tol_factor: f64,
    pub deterministic: bool,
    /// Solve the trace-normalized instance (`true`) or work directly in the
    /// ball of radius `sqrt(tau)` (`false`). Both follow the same trajectory.
    pub rescale: bool,
    /// Eigenvalues of `X` below `rank_tol * tr(X)` do not count towards the
    /// reported rank; `None` uses `eps`.
    pub rank_tol: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            beta0: None,
            beta_growth: 2.0,
            beta_stall: 0.9,
            eps0: None,
            eps_decay: 0.5,
            eps_floor: None,
            max_outer: 500,
            time_limit: None,
            seed: 0,
            eig: EigSettings::default(),
            aipp: AippParams::default(),
            max_fw_steps: 500,
            eig_tol_factor: 0.1,
            deterministic: false,
            rescale: true,
            rank_tol: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Input(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.beta_growth >= 1.0) {
            return Err(Error::Input("beta growth must be >= 1".into()));
        }
        if !(self.eps_decay > 0.0 && self.eps_decay <= 1.0) {
            return Err(Error::Input("eps decay must lie in (0, 1]".into()));
        }
        if let Some(b) = self.beta0 {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Input("beta0 must be positive".into()));
            }
        }
        for (name, v) in [("eps0", self.eps0), ("eps_floor", self.eps_floor)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Input(format!("{name} must be positive")));
                }
            }
        }
        if let Some(t) = self.rank_tol {
            if !(0.0..1.0).contains(&t) {
                return Err(Error::Input(format!("rank tolerance must lie in [0, 1), got {t}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::Input("max_outer must be positive".into()));
        }
        self.eig.validate().map_err(|e| Error::Input(e.to_string()))?;
        self.aipp.fista.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    IterationLimit,
    TimeLimit,
    NumericalFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::IterationLimit => "iteration_limit",
            Status::TimeLimit => "time_limit",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

/// Summary of a solve, in the instance's original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub pval: f64,
    /// `-b^T p - tau theta`.
    pub dval: f64,
    /// `-b^T p`.
    pub dval_no_theta: f64,
    pub rel_pfeas: f64,
    pub rel_gap: f64,
    /// Gap computed against `dval_no_theta`.
    pub rel_gap_no_theta: f64,
    pub rel_dfeas: f64,
    pub theta: f64,
    /// `lambda_min(C + A*p + theta I)` at exit.
    pub dual_slack_min: f64,
    /// Smallest `lambda_min(C + A*p_t + theta_t I)` over all outer iterations.
    pub worst_dual_slack: f64,
    /// Numerical rank of the returned `X`.
    pub rank: usize,
    /// Column count of the returned factor.
    pub factor_columns: usize,
    pub outer_iters: usize,
    pub fw_steps: usize,
    pub aipp_iters: usize,
    pub fista_iters: usize,
    pub eig_products: usize,
    pub final_beta: f64,
    pub wall_seconds: f64,
    /// Set when the two gap conventions disagree beyond `eps`.
    pub gap_forms_disagree: bool,
    pub message: Option<String>,
}

/// Report plus the primal factor and dual certificate (original units).
#[derive(Debug, Clone)]
pub struct Solution {
    pub report: SolveReport,
    pub factor: Factor,
    pub multiplier: DVector<f64>,
    pub theta: f64,
}

impl Solution {
    /// Dense `X = UU^T`, for small instances and tests.
    pub fn primal_matrix(&self) -> DMatrix<f64> {
        let u = self.factor.matrix();
        u * u.transpose()
    }
}

/// Components of the relative termination measure.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationCheck {
    pub done: bool,
    pub pval: f64,
    pub dval: f64,
    pub dval_no_theta: f64,
    pub rel_pfeas: f64,
    pub rel_gap: f64,
    pub rel_gap_no_theta: f64,
    pub rel_dfeas: f64,
    /// `lambda_min(C + A*p)`.
    pub lambda_min: f64,
    pub eig_residual: f64,
    /// False when the dual eigensolve did not converge (then `done` is false).
    pub eig_converged: bool,
    pub eig_vector: DVector<f64>,
    pub eig_products: usize,
}

impl TerminationCheck {
    fn undefined(n: usize) -> Self {
        Self {
            done: false,
            pval: f64::NAN,
            dval: f64::NAN,
            dval_no_theta: f64::NAN,
            rel_pfeas: f64::NAN,
            rel_gap: f64::NAN,
            rel_gap_no_theta: f64::NAN,
            rel_dfeas: f64::NAN,
            lambda_min: f64::NAN,
            eig_residual: f64::NAN,
            eig_converged: false,
            eig_vector: DVector::zeros(n),
            eig_products: 0,
        }
    }

    pub fn max_ratio(&self) -> f64 {
        self.rel_pfeas.max(self.rel_gap).max(self.rel_dfeas)
    }
}

/// `p + beta r`.
pub fn multiplier_update(p: &DVector<f64>, beta: f64, primal_residual: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("residual length", p.len(), primal_residual.len())?;
    let mut out = p.clone();
    out.axpy(beta, primal_residual, 1.0);
    Ok(out)
}

/// Evaluates the three relative residuals for `(UU^T, p, theta)` on `inst`
/// (original units: the trace bound is `inst.tau()`).
pub fn check_termination(
    inst: &SdpInstance,
    u: &Factor,
    p: &DVector<f64>,
    theta: f64,
    eps: f64,
    eig: &EigSettings,
) -> Result<TerminationCheck> {
    check_termination_from(inst, u, p, theta, eps, eig, None)
}

pub(crate) fn check_termination_from(
    inst: &SdpInstance,
    u: &Factor,
    p: &DVector<f64>,
    theta: f64,
    eps: f64,
    eig: &EigSettings,
    start: Option<&DVector<f64>>,
) -> Result<TerminationCheck> {
    check_dim("multiplier length", inst.m(), p.len())?;
    let r = primal_residual(inst, u.matrix())?;
    let rel_pfeas = par::norm_sq(r.as_slice()).sqrt() / (1.0 + inst.norm_b1());
    let pval = inst.objective(u.matrix())?;
    let btp = par::dot(inst.b().as_slice(), p.as_slice());
    let dval_no_theta = -btp;
    let dval = -btp - inst.tau() * theta;
    let rel = |d: f64| (pval - d).abs() / (1.0 + pval.abs() + d.abs());
    let rel_gap = rel(dval);
    let rel_gap_no_theta = rel(dval_no_theta);

    let op = GradientOperator::from_multiplier(inst, p.clone())?;
    let (pair, converged) = match min_eigenpair_from(&op, start, eig) {
        Ok(pair) => (pair, true),
        Err(EigError::NotConverged { best }) => (best, false),
        Err(e) => return Err(Error::Input(e.to_string())),
    };
    let rel_dfeas = (-pair.value).max(0.0) / (1.0 + inst.norm_c1());
    for (name, v) in [("pval", pval), ("dval", dval), ("lambda_min", pair.value)] {
        if !v.is_finite() {
            warn!("non-finite {name} in termination check");
            return Err(Error::NonFinite("termination check"));
        }
    }
    let done = converged && rel_pfeas <= eps && rel_gap <= eps && rel_dfeas <= eps;
    Ok(TerminationCheck {
        done,
        pval,
        dval,
        dval_no_theta,
        rel_pfeas,
        rel_gap,
        rel_gap_no_theta,
        rel_dfeas,
        lambda_min: pair.value,
        eig_residual: pair.residual,
        eig_converged: converged,
        eig_vector: pair.vector,
        eig_products: pair.products,
    })
}

/// Rewrites `(p, theta)` as a dual point with `theta = 0` when the instance
/// allows it:
///
/// - with a trace-equality row whose right-hand side is the trace bound,
///   `theta` moves into that row's multiplier (slack and dual value unchanged);
/// - with `C = cI`, `p` is scaled by `c / (c + theta)`, which scales the
///   slack `C + A*p + theta I` by the same positive factor.
pub fn canonical_dual(inst: &SdpInstance, p: &DVector<f64>, theta: f64) -> (DVector<f64>, f64) {
    if theta <= 0.0 {
        return (p.clone(), theta);
    }
    if let Some(k) = inst.trace_row() {
        let bk = inst.b()[k];
        if (bk - inst.tau()).abs() <= 1e-12 * inst.tau() {
            let mut out = p.clone();
            out[k] += theta;
            return (out, 0.0);
        }
    }
    if let Some(c) = inst.identity_objective() {
        return (p * (c / (c + theta)), 0.0);
    }
    (p.clone(), theta)
}

/// Seeded Gaussian `n x 1` start scaled to norm `radius`.
pub fn initial_factor(n: usize, radius: f64, seed: u64) -> Factor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut u = DMatrix::from_fn(n, 1, |_, _| StandardNormal.sample(&mut rng));
    let nrm = u.norm();
    u *= radius / nrm;
    Factor::new(u).expect("finite start")
}

struct Counters {
    fw_steps: usize,
    aipp_iters: usize,
    fista_iters: usize,
    eig_products: usize,
}

impl Counters {
    fn absorb(&mut self, h: &HlrOutcome) {
        self.fw_steps += h.fw_steps;
        self.aipp_iters += h.aipp_steps;
        self.fista_iters += h.fista_iters;
        self.eig_products += h.eig_products;
    }
}

/// Solves `inst` from the default start (`p = 0`, random unit column).
pub fn solve(inst: &SdpInstance, cfg: &SolverConfig) -> Result<Solution> {
    solve_from(inst, cfg, None)
}

/// Solves `inst`, optionally warm-started from a factor and multiplier in
/// original units.
pub fn solve_from(inst: &SdpInstance, cfg: &SolverConfig, warm: Option<(&Factor, &DVector<f64>)>) -> Result<Solution> {
    cfg.validate()?;
    par::set_deterministic(cfg.deterministic);
    let clock = Instant::now();
    let tau = inst.tau();
    let sqrt_tau = tau.sqrt();

    // Working instance and ball radius. Schedules are defined on the
    // trace-normalized problem and mapped into working units.
    let (work, radius) = if cfg.rescale {
        (inst.scaled(), 1.0)
    } else {
        (inst.clone(), sqrt_tau)
    };
    let b_scaled = inst.b() / tau;
    let b2 = b_scaled.norm();
    let b1 = b_scaled.iter().map(|x| x.abs()).sum::<f64>();
    let mut beta = cfg.beta0.unwrap_or(10.0 * if b2 > 0.0 { (1.0 / b2).max(1.0) } else { 1.0 });
    let eps_floor = cfg.eps_floor.unwrap_or(cfg.eps * (1.0 + b1) / 10.0);
    // A warm start is presumed accurate; a loose first subproblem would undo it.
    let eps0 = cfg.eps0.unwrap_or(if warm.is_some() { eps_floor } else { 1e-2 * (1.0 + b1) });
    let to_work_beta = 1.0 / (radius * radius);
    let to_original = sqrt_tau / radius;

    let (mut u, mut p) = match warm {
        Some((f, q)) => {
            check_dim("warm-start factor rows", inst.n(), f.n())?;
            check_dim("warm-start multiplier length", inst.m(), q.len())?;
            let mut m = f.matrix() / to_original;
            crate::sdp::project_in_place(&mut m, radius);
            (Factor::new(m)?, q.clone())
        }
        None => (initial_factor(inst.n(), radius, cfg.seed), DVector::zeros(inst.m())),
    };

    let hcfg = HlrConfig {
        aipp: cfg.aipp.clone(),
        eig: cfg.eig.clone(),
        eig_tol_factor: cfg.eig_tol_factor,
        max_fw_steps: cfg.max_fw_steps,
    };
    let dual_eig = cfg.eig.with_tol(0.1 * cfg.eps);

    let mut counters = Counters { fw_steps: 0, aipp_iters: 0, fista_iters: 0, eig_products: 0 };
    let mut theta = 0.0;
    let mut eig_start: Option<DVector<f64>> = None;
    let mut prev_pfeas = f64::INFINITY;
    let mut worst_slack = f64::INFINITY;
    let mut last: Option<TerminationCheck> = None;
    let mut status = Status::IterationLimit;
    let mut message = None;
    let mut outer = 0;

    let finish = |status: Status,
                  message: Option<String>,
                  u: &Factor,
                  p: &DVector<f64>,
                  theta: f64,
                  check: Option<TerminationCheck>,
                  counters: &Counters,
                  outer: usize,
                  beta: f64,
                  worst_slack: f64|
     -> Result<Solution> {
        let factor = Factor::new(u.matrix() * to_original)?;
        let (pc, tc) = canonical_dual(inst, p, theta);
        let check = match check {
            Some(c) => c,
            None => check_termination(inst, &factor, &pc, tc, cfg.eps, &dual_eig).unwrap_or_else(|e| {
                warn!("final residual check failed: {e}");
                TerminationCheck::undefined(inst.n())
            }),
        };
        let slack = check.lambda_min + tc;
        if slack < -10.0 * dual_eig.tol * check.lambda_min.abs().max(1.0) {
            warn!("dual slack certificate violated: lambda_min(C + A*p + theta I) = {slack:.3e}");
        }
        let report = SolveReport {
            status,
            pval: check.pval,
            dval: check.dval,
            dval_no_theta: check.dval_no_theta,
            rel_pfeas: check.rel_pfeas,
            rel_gap: check.rel_gap,
            rel_gap_no_theta: check.rel_gap_no_theta,
            rel_dfeas: check.rel_dfeas,
            theta: tc,
            dual_slack_min: slack,
            worst_dual_slack: worst_slack.min(slack),
            rank: factor.numerical_rank(cfg.rank_tol.unwrap_or(cfg.eps)),
            factor_columns: factor.s(),
            outer_iters: outer,
            fw_steps: counters.fw_steps,
            aipp_iters: counters.aipp_iters,
            fista_iters: counters.fista_iters,
            eig_products: counters.eig_products + check.eig_products,
            final_beta: beta,
            wall_seconds: clock.elapsed().as_secs_f64(),
            gap_forms_disagree: (check.rel_gap - check.rel_gap_no_theta).abs() > cfg.eps,
            message,
        };
        Ok(Solution { report, factor, multiplier: pc, theta: tc })
    };

    while outer < cfg.max_outer {
        if let Some(limit) = cfg.time_limit {
            if clock.elapsed().as_secs_f64() >= limit {
                status = Status::TimeLimit;
                break;
            }
        }
        outer += 1;
        let eps_t = (eps0 * cfg.eps_decay.powi(outer as i32 - 1)).max(eps_floor);
        let beta_work = beta * to_work_beta;
        let hlr = match hlr_solve_in_ball(&work, radius, &u, &p, beta_work, eps_t, eig_start.as_ref(), &hcfg) {
            Ok(h) => h,
            Err(HlrError::Cap { best }) => {
                warn!("subproblem hit the Frank-Wolfe cap (gap {:.3e})", best.gap);
                *best
            }
            Err(HlrError::NonFinite) => {
                status = Status::NumericalFailure;
                message = Some("non-finite values in subproblem".into());
                break;
            }
            Err(HlrError::Eig(e)) => {
                status = Status::NumericalFailure;
                message = Some(e.to_string());
                break;
            }
            Err(HlrError::Input(e)) => return Err(e),
        };
        counters.absorb(&hlr);
        u = hlr.u.clone();
        theta = hlr.theta;
        eig_start = Some(hlr.eig.vector.clone());
        let r = primal_residual(&work, u.matrix())?;
        p = multiplier_update(&p, beta_work, &r)?;
        if p.iter().any(|x| !x.is_finite()) {
            status = Status::NumericalFailure;
            message = Some("multiplier became non-finite".into());
            break;
        }

        let factor = Factor::new(u.matrix() * to_original)?;
        let (pc, tc) = canonical_dual(inst, &p, theta);
        let check = match check_termination_from(inst, &factor, &pc, tc, cfg.eps, &dual_eig, eig_start.as_ref()) {
            Ok(c) => c,
            Err(e) => {
                status = Status::NumericalFailure;
                message = Some(e.to_string());
                break;
            }
        };
        counters.eig_products += check.eig_products;
        worst_slack = worst_slack.min(check.lambda_min + tc);
        info!(
            "outer {outer}: beta {:.3e} eps_t {:.3e} gap {:.3e} rank {} pfeas {:.3e} dgap {:.3e} dfeas {:.3e} pval {:.8e}",
            beta, eps_t, hlr.gap, u.s(), check.rel_pfeas, check.rel_gap, check.rel_dfeas, check.pval
        );
        if check.done {
            status = Status::Optimal;
            last = Some(check);
            break;
        }
        if check.rel_pfeas > cfg.beta_stall * prev_pfeas {
            beta *= cfg.beta_growth;
        }
        prev_pfeas = check.rel_pfeas;
        last = Some(check);
    }
    let check = if status == Status::NumericalFailure { None } else { last };
    finish(status, message, &u, &p, theta, check, &counters, outer, beta, worst_slack)
}
