//! Instance families: matrix completion, Lovasz theta and phase retrieval.
//!
//! An [`InstanceSpec`] is everything needed to regenerate an instance. It
//! serializes to a flat `key = value` text config.

mod graph;
mod matcomp;
mod pairs;
mod phase;
mod theta;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

pub use graph::{Graph, GraphFormat};
pub use matcomp::{completed_block, gen_matrix_completion, MatCompOperator, McHidden, McInstanceSpec, SampleFormula};
pub use phase::{gen_phase_retrieval, phase_instance, PhaseOperator, PrHidden, PrInstanceSpec};
pub use theta::{build_theta_instance, ThetaOperator};

use crate::error::{Error, Result};
use crate::sdp::SdpInstance;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    File { path: PathBuf, format: GraphFormat },
    Cycle(usize),
    Hamming { d: u32, q: usize },
    Petersen,
}

impl GraphSource {
    pub fn load(&self) -> Result<Graph> {
        match self {
            GraphSource::File { path, format } => Graph::load(path, *format),
            GraphSource::Cycle(n) => Graph::cycle(*n),
            GraphSource::Hamming { d, q } => Graph::hamming(*d, *q),
            GraphSource::Petersen => Ok(Graph::petersen()),
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::File { path, format } => write!(f, "{} ({})", path.display(), format.as_str()),
            GraphSource::Cycle(n) => write!(f, "C{n}"),
            GraphSource::Hamming { d, q: 2 } => write!(f, "Q{d}"),
            GraphSource::Hamming { d, q } => write!(f, "H({d},{q})"),
            GraphSource::Petersen => write!(f, "petersen"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceSpec {
    MatrixCompletion(McInstanceSpec),
    Theta(GraphSource),
    PhaseRetrieval(PrInstanceSpec),
}

/// Validation data kept alongside a generated instance.
#[derive(Debug, Clone)]
pub enum Hidden {
    MatrixCompletion(McHidden),
    Theta(Graph),
    PhaseRetrieval(PrHidden),
}

#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub instance: SdpInstance,
    pub hidden: Hidden,
}

impl InstanceSpec {
    pub fn family(&self) -> &'static str {
        match self {
            InstanceSpec::MatrixCompletion(_) => "matcomp",
            InstanceSpec::Theta(_) => "theta",
            InstanceSpec::PhaseRetrieval(_) => "phaseret",
        }
    }

    /// Human-readable dimensions, e.g. `30x70 r=2` or `C5`.
    pub fn dims(&self) -> String {
        match self {
            InstanceSpec::MatrixCompletion(s) => format!("{}x{} r={}", s.n1, s.n2, s.r),
            InstanceSpec::Theta(g) => g.to_string(),
            InstanceSpec::PhaseRetrieval(s) => format!("n={} L={}", s.n, s.masks),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InstanceSpec::MatrixCompletion(s) => Some(s.seed),
            InstanceSpec::Theta(_) => None,
            InstanceSpec::PhaseRetrieval(s) => Some(s.seed),
        }
    }

    pub fn build(&self) -> Result<BuiltInstance> {
        match self {
            InstanceSpec::MatrixCompletion(s) => {
                let (instance, h) = gen_matrix_completion(s)?;
                Ok(BuiltInstance { instance, hidden: Hidden::MatrixCompletion(h) })
            }
            InstanceSpec::Theta(src) => {
                let g = src.load()?;
                let instance = build_theta_instance(&g)?;
                Ok(BuiltInstance { instance, hidden: Hidden::Theta(g) })
            }
            InstanceSpec::PhaseRetrieval(s) => {
                let (instance, h) = gen_phase_retrieval(s)?;
                Ok(BuiltInstance { instance, hidden: Hidden::PhaseRetrieval(h) })
            }
        }
    }

    pub fn to_config(&self) -> String {
        let mut kv: Vec<(&str, String)> = vec![("family", self.family().into())];
        match self {
            InstanceSpec::MatrixCompletion(s) => {
                kv.push(("n1", s.n1.to_string()));
                kv.push(("n2", s.n2.to_string()));
                kv.push(("r", s.r.to_string()));
                kv.push(("seed", s.seed.to_string()));
                let formula = match s.formula {
                    SampleFormula::Full => "full",
                    SampleFormula::DegreesOfFreedom => "dof",
                };
                kv.push(("formula", formula.into()));
                kv.push(("tau_factor", s.tau_factor.to_string()));
            }
            InstanceSpec::Theta(src) => match src {
                GraphSource::File { path, format } => {
                    kv.push(("graph", path.display().to_string()));
                    kv.push(("format", format.as_str().into()));
                }
                GraphSource::Cycle(n) => kv.push(("generator", format!("cycle:{n}"))),
                GraphSource::Hamming { d, q } => kv.push(("generator", format!("hamming:{d}:{q}"))),
                GraphSource::Petersen => kv.push(("generator", "petersen".into())),
            },
            InstanceSpec::PhaseRetrieval(s) => {
                kv.push(("n", s.n.to_string()));
                kv.push(("masks", s.masks.to_string()));
                kv.push(("seed", s.seed.to_string()));
            }
        }
        kv.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parses the output of [`to_config`](Self::to_config). `#` starts a comment.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected 'key = value', got '{line}'") })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        Self::from_map(&kv)
    }

    pub fn from_map(kv: &BTreeMap<String, String>) -> Result<Self> {
        fn get<'a>(kv: &'a BTreeMap<String, String>, k: &str) -> Result<&'a str> {
            kv.get(k).map(String::as_str).ok_or_else(|| Error::Input(format!("missing key '{k}'")))
        }
        fn num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, k: &str) -> Result<T> {
            let v = get(kv, k)?;
            v.parse().map_err(|_| Error::Input(format!("bad value for '{k}': '{v}'")))
        }
        match get(kv, "family")? {
            "matcomp" => {
                let mut s = McInstanceSpec::new(num(kv, "n1")?, num(kv, "n2")?, num(kv, "r")?, num(kv, "seed")?);
                if let Some(f) = kv.get("formula") {
                    s.formula = match f.as_str() {
                        "full" => SampleFormula::Full,
                        "dof" => SampleFormula::DegreesOfFreedom,
                        other => return Err(Error::Input(format!("unknown sample formula '{other}'"))),
                    };
                }
                if kv.contains_key("tau_factor") {
                    s.tau_factor = num(kv, "tau_factor")?;
                }
                s.validate()?;
                Ok(InstanceSpec::MatrixCompletion(s))
            }
            "theta" => {
                if let Some(path) = kv.get("graph") {
                    let format = get(kv, "format")?.parse()?;
                    return Ok(InstanceSpec::Theta(GraphSource::File { path: path.into(), format }));
                }
                let gen = get(kv, "generator")?;
                Ok(InstanceSpec::Theta(parse_generator(gen)?))
            }
            "phaseret" => {
                let s = PrInstanceSpec { n: num(kv, "n")?, masks: num(kv, "masks")?, seed: num(kv, "seed")? };
                s.validate()?;
                Ok(InstanceSpec::PhaseRetrieval(s))
            }
            other => Err(Error::Input(format!("unknown family '{other}'"))),
        }
    }
}

/// `cycle:N`, `hypercube:D`, `hamming:D:Q` or `petersen`.
pub fn parse_generator(s: &str) -> Result<GraphSource> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Input(format!("bad graph generator '{s}'"));
    let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
    match parts.as_slice() {
        ["petersen"] => Ok(GraphSource::Petersen),
        ["cycle", n] => Ok(GraphSource::Cycle(int(n)?)),
        ["hypercube", d] => Ok(GraphSource::Hamming { d: int(d)? as u32, q: 2 }),
        ["hamming", d, q] => Ok(GraphSource::Hamming { d: int(d)? as u32, q: int(q)? }),
        _ => Err(bad()),
    }
}
