//! Sweep files and benchmark tables.

use std::collections::BTreeMap;
use std::io::Write;

use hallar::instances::InstanceSpec;
use hallar::SolverConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::record::{run, RunRecord};
use crate::{exit_code, CliError};

/// One sweep line: an instance plus per-row solver overrides.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub spec: InstanceSpec,
    pub tol: Option<f64>,
    pub time_limit: Option<f64>,
    pub max_outer: Option<usize>,
}

fn parse_num<T: std::str::FromStr>(kv: &mut BTreeMap<String, String>, key: &str, line: usize) -> Result<Option<T>, CliError> {
    match kv.remove(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("sweep line {line}: bad {key} '{v}'"))),
    }
}

pub fn parse_sweep(text: &str) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut kv = BTreeMap::new();
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("sweep line {line}: expected key=value, got '{tok}'")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        if let Some(path) = kv.remove("spec") {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::NoInput(format!("sweep line {line}: cannot read {path}: {e}")))?;
            let base = InstanceSpec::from_config(&text)?;
            for l in base.to_config().lines() {
                if let Some((k, v)) = l.split_once('=') {
                    kv.entry(k.trim().to_string()).or_insert_with(|| v.trim().to_string());
                }
            }
        }
        let tol = parse_num(&mut kv, "tol", line)?;
        let time_limit = parse_num(&mut kv, "time_limit", line)?;
        let max_outer = parse_num(&mut kv, "max_outer", line)?;
        let spec = InstanceSpec::from_map(&kv).map_err(|e| CliError::Usage(format!("sweep line {line}: {e}")))?;
        rows.push(Row { line, spec, tol, time_limit, max_outer });
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    family: &'a str,
    dims: &'a str,
    m: Option<usize>,
    tol: f64,
    status: &'a str,
    pval: Option<f64>,
    dval: Option<f64>,
    rel_pfeas: Option<f64>,
    rel_gap: Option<f64>,
    rel_dfeas: Option<f64>,
    rank: Option<usize>,
    outer_iters: Option<usize>,
    fw_steps: Option<usize>,
    seconds: Option<f64>,
}

pub struct Outcome {
    pub row: Row,
    pub tol: f64,
    pub result: Result<RunRecord, CliError>,
}

impl Outcome {
    fn csv(&self) -> CsvRow<'_> {
        let family = self.row.spec.family();
        match &self.result {
            Ok(r) => {
                let rep = &r.report;
                CsvRow {
                    family,
                    dims: &r.instance.dims,
                    m: Some(r.instance.m),
                    tol: self.tol,
                    status: rep.status.as_str(),
                    pval: Some(rep.pval),
                    dval: Some(rep.dval),
                    rel_pfeas: Some(rep.rel_pfeas),
                    rel_gap: Some(rep.rel_gap),
                    rel_dfeas: Some(rep.rel_dfeas),
                    rank: Some(rep.rank),
                    outer_iters: Some(rep.outer_iters),
                    fw_steps: Some(rep.fw_steps),
                    seconds: Some(rep.wall_seconds),
                }
            }
            Err(_) => CsvRow {
                family,
                dims: "",
                m: None,
                tol: self.tol,
                status: "error",
                pval: None,
                dval: None,
                rel_pfeas: None,
                rel_gap: None,
                rel_dfeas: None,
                rank: None,
                outer_iters: None,
                fw_steps: None,
                seconds: None,
            },
        }
    }

    pub fn code(&self) -> i32 {
        match &self.result {
            Ok(r) => exit_code(r.report.status),
            Err(e) => e.code(),
        }
    }
}

pub fn run_rows(rows: Vec<Row>, base: &SolverConfig, parallel: bool) -> Vec<Outcome> {
    let one = |row: Row| {
        let cfg = SolverConfig {
            eps: row.tol.unwrap_or(base.eps),
            time_limit: row.time_limit.or(base.time_limit),
            max_outer: row.max_outer.unwrap_or(base.max_outer),
            seed: row.spec.seed().unwrap_or(base.seed),
            ..base.clone()
        };
        let result = row
            .spec
            .build()
            .map_err(CliError::from)
            .and_then(|built| run(&row.spec, &built, &cfg).map(|(rec, _)| rec).map_err(CliError::from));
        if let Err(e) = &result {
            log::error!("sweep line {}: {e}", row.line);
        }
        Outcome { row, tol: cfg.eps, result }
    };
    if parallel {
        rows.into_par_iter().map(one).collect()
    } else {
        rows.into_iter().map(one).collect()
    }
}

pub fn write_csv<W: Write>(out: W, outcomes: &[Outcome]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for o in outcomes {
        w.serialize(o.csv())?;
    }
    w.flush()?;
    Ok(())
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.prec$e}"))
}

pub fn write_table<W: Write>(mut out: W, outcomes: &[Outcome], total_seconds: f64) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<9} {:<16} {:>8} {:<17} {:>14} {:>9} {:>9} {:>9} {:>5} {:>6} {:>9}",
        "family", "dims", "m", "status", "pval", "pfeas", "gap", "dfeas", "rank", "outer", "seconds"
    )?;
    for o in outcomes {
        let r = o.csv();
        writeln!(
            out,
            "{:<9} {:<16} {:>8} {:<17} {:>14} {:>9} {:>9} {:>9} {:>5} {:>6} {:>9}",
            r.family,
            r.dims,
            r.m.map_or("-".into(), |m| m.to_string()),
            r.status,
            r.pval.map_or("-".into(), |v| format!("{v:.7}")),
            cell(r.rel_pfeas, 1),
            cell(r.rel_gap, 1),
            cell(r.rel_dfeas, 1),
            r.rank.map_or("-".into(), |v| v.to_string()),
            r.outer_iters.map_or("-".into(), |v| v.to_string()),
            r.seconds.map_or("-".into(), |v| format!("{v:.3}")),
        )?;
    }
    writeln!(out, "{} rows, {total_seconds:.3} s total", outcomes.len())
}
