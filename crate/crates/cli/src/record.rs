//! Run records: one solve plus everything needed to reproduce and audit it.

use hallar::instances::{completed_block, BuiltInstance, Hidden, InstanceSpec};
use hallar::{check_termination, solve, EigSettings, SdpInstance, Solution, SolveReport, SolverConfig};
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InstanceInfo {
    pub family: String,
    pub dims: String,
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub tau: f64,
    /// SHA-256 of the right-hand side as little-endian f64 bytes.
    pub b_sha256: String,
    pub spec: String,
}

/// Residuals recomputed from the returned factor and multiplier.
#[derive(Debug, Clone, Serialize)]
pub struct Posthoc {
    pub rel_pfeas: f64,
    pub rel_gap: f64,
    pub rel_dfeas: f64,
    /// `lambda_min(C + A*p + theta I)`.
    pub dual_slack_min: f64,
    pub eig_converged: bool,
    /// Largest absolute difference from the solver's own residuals.
    pub max_abs_difference: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Validation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nuclear_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pval_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correlation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edges: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub threads: usize,
    pub deterministic: bool,
    pub version: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub instance: InstanceInfo,
    pub config_hash: String,
    pub report: SolveReport,
    pub posthoc: Posthoc,
    pub validation: Validation,
    pub environment: Environment,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn b_hash(inst: &SdpInstance) -> String {
    let bytes: Vec<u8> = inst.b().iter().flat_map(|v| v.to_le_bytes()).collect();
    sha256_hex(&bytes)
}

/// Hash of the instance spec and solver settings; independent of thread count.
pub fn config_hash(spec: &InstanceSpec, cfg: &SolverConfig) -> String {
    let cfg_json = serde_json::to_string(cfg).expect("config serializes");
    sha256_hex(format!("{}\n{cfg_json}", spec.to_config()).as_bytes())
}

pub fn instance_info(spec: &InstanceSpec, inst: &SdpInstance) -> InstanceInfo {
    InstanceInfo {
        family: spec.family().into(),
        dims: spec.dims(),
        seed: spec.seed(),
        n: inst.n(),
        m: inst.m(),
        tau: inst.tau(),
        b_sha256: b_hash(inst),
        spec: spec.to_config(),
    }
}

fn posthoc(inst: &SdpInstance, sol: &Solution, cfg: &SolverConfig) -> Posthoc {
    let eig = EigSettings { tol: 0.01 * cfg.eps, ..cfg.eig.clone() };
    match check_termination(inst, &sol.factor, &sol.multiplier, sol.theta, cfg.eps, &eig) {
        Ok(t) => {
            let r = &sol.report;
            let diff = [
                (t.rel_pfeas - r.rel_pfeas).abs(),
                (t.rel_gap - r.rel_gap).abs(),
                (t.rel_dfeas - r.rel_dfeas).abs(),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            Posthoc {
                rel_pfeas: t.rel_pfeas,
                rel_gap: t.rel_gap,
                rel_dfeas: t.rel_dfeas,
                dual_slack_min: t.lambda_min + sol.theta,
                eig_converged: t.eig_converged,
                max_abs_difference: diff,
            }
        }
        Err(e) => {
            log::warn!("post-hoc residual check failed: {e}");
            Posthoc {
                rel_pfeas: f64::NAN,
                rel_gap: f64::NAN,
                rel_dfeas: f64::NAN,
                dual_slack_min: f64::NAN,
                eig_converged: false,
                max_abs_difference: f64::NAN,
            }
        }
    }
}

/// Unit leading left singular vector of `u`.
pub fn top_direction(u: &DMatrix<f64>) -> Vec<f64> {
    let svd = u.clone().svd(true, false);
    let k = svd.singular_values.imax();
    svd.u.expect("requested").column(k).iter().copied().collect()
}

fn validation(hidden: &Hidden, sol: &Solution) -> Validation {
    let u = sol.factor.matrix();
    match hidden {
        Hidden::MatrixCompletion(h) => {
            let m = h.matrix();
            let y = completed_block(u, m.nrows());
            let nuc = h.nuclear_norm();
            Validation {
                recovery_rel_error: Some((y - &m).norm() / m.norm()),
                nuclear_norm: Some(nuc),
                pval_rel_error: Some((sol.report.pval - nuc).abs() / nuc),
                ..Validation::default()
            }
        }
        Hidden::Theta(g) => Validation {
            edges: Some(g.num_edges()),
            theta: Some(-sol.report.pval),
            ..Validation::default()
        },
        Hidden::PhaseRetrieval(h) => Validation {
            correlation: Some(h.correlation(&top_direction(u))),
            ..Validation::default()
        },
    }
}

pub fn run(spec: &InstanceSpec, built: &BuiltInstance, cfg: &SolverConfig) -> hallar::Result<(RunRecord, Solution)> {
    let sol = solve(&built.instance, cfg)?;
    let record = RunRecord {
        instance: instance_info(spec, &built.instance),
        config_hash: config_hash(spec, cfg),
        report: sol.report.clone(),
        posthoc: posthoc(&built.instance, &sol, cfg),
        validation: validation(&built.hidden, &sol),
        environment: Environment {
            threads: rayon::current_num_threads(),
            deterministic: cfg.deterministic,
            version: env!("CARGO_PKG_VERSION").into(),
        },
    };
    Ok((record, sol))
}
