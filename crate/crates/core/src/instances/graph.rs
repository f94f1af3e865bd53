//! Simple undirected graphs: file ingestion and a few generators.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    /// `u v` per line, 1-based, `#` comments.
    EdgeList,
    /// Matrix Market `coordinate pattern symmetric`.
    MatrixMarket,
    /// Header `n m`, then `u v w` lines. Weights are ignored.
    Gset,
}

impl GraphFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            GraphFormat::EdgeList => "edge-list",
            GraphFormat::MatrixMarket => "matrix-market",
            GraphFormat::Gset => "gset",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-list" | "edgelist" => Ok(GraphFormat::EdgeList),
            "matrix-market" | "mtx" | "matrix-market-pattern" => Ok(GraphFormat::MatrixMarket),
            "gset" => Ok(GraphFormat::Gset),
            other => Err(Error::Input(format!("unknown graph format '{other}'"))),
        }
    }
}

/// A simple graph on vertices `0..n` with sorted, deduplicated edges `(i, j)`, `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    /// Self-loops discarded during construction.
    dropped_loops: usize,
}

impl Graph {
    /// Builds a graph from 0-based pairs. Self-loops are dropped and counted,
    /// duplicates and orientation are normalized away.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("graph has no vertices".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::Input(format!("too many vertices: {n}")));
        }
        let mut set = BTreeSet::new();
        let mut dropped_loops = 0;
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::Input(format!("edge ({i}, {j}) out of range for n = {n}")));
            }
            if i == j {
                dropped_loops += 1;
                continue;
            }
            set.insert((i.min(j) as u32, i.max(j) as u32));
        }
        Ok(Self { n, edges: set.into_iter().collect(), dropped_loops })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn dropped_loops(&self) -> usize {
        self.dropped_loops
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Input(format!("cycle needs at least 3 vertices, got {n}")));
        }
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Hamming graph `H(d, q)`: words of length `d` over `q` symbols, adjacent
    /// when they differ in exactly one position.
    pub fn hamming(d: u32, q: usize) -> Result<Self> {
        if d == 0 || q < 2 {
            return Err(Error::Input(format!("hamming graph needs d >= 1 and q >= 2, got d = {d}, q = {q}")));
        }
        let n = q
            .checked_pow(d)
            .filter(|&n| n <= 1 << 26)
            .ok_or_else(|| Error::Input(format!("hamming graph H({d}, {q}) is too large")))?;
        let mut edges = Vec::with_capacity(n * d as usize * (q - 1) / 2);
        for v in 0..n {
            let mut place = 1;
            for _ in 0..d {
                let digit = (v / place) % q;
                for other in digit + 1..q {
                    edges.push((v, v + (other - digit) * place));
                }
                place *= q;
            }
        }
        Self::from_edges(n, edges)
    }

    /// Hypercube `Q_d = H(d, 2)`.
    pub fn hypercube(d: u32) -> Result<Self> {
        Self::hamming(d, 2)
    }

    pub fn petersen() -> Self {
        let outer = (0..5).map(|i| (i, (i + 1) % 5));
        let spokes = (0..5).map(|i| (i, i + 5));
        let inner = (0..5).map(|i| (5 + i, 5 + (i + 2) % 5));
        Self::from_edges(10, outer.chain(spokes).chain(inner).collect::<Vec<_>>()).expect("static graph")
    }

    pub fn load(path: &Path, format: GraphFormat) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::parse(&text, format)
    }

    pub fn parse(text: &str, format: GraphFormat) -> Result<Self> {
        let g = match format {
            GraphFormat::EdgeList => parse_edge_list(text)?,
            GraphFormat::MatrixMarket => parse_matrix_market(text)?,
            GraphFormat::Gset => parse_gset(text)?,
        };
        if g.num_edges() == 0 {
            return Err(Error::Input("graph has no edges".into()));
        }
        if g.dropped_loops > 0 {
            log::warn!("dropped {} self-loop(s)", g.dropped_loops);
        }
        Ok(g)
    }

    /// Writes the graph as a 1-based edge list.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("# n = {}\n", self.n);
        for &(i, j) in &self.edges {
            s.push_str(&format!("{} {}\n", i + 1, j + 1));
        }
        s
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn field<T: FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| parse_err(line, format!("bad {what} '{tok}'")))
}

fn vertex(tok: Option<&str>, line: usize) -> Result<usize> {
    let v: usize = field(tok, line, "vertex")?;
    if v == 0 {
        return Err(parse_err(line, "vertices are 1-based"));
    }
    Ok(v - 1)
}

/// Lines that are neither blank nor comments, with 1-based line numbers.
fn content_lines<'a>(text: &'a str, comment: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(move |(_, l)| !l.is_empty() && !l.starts_with(comment))
}

fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (ln, line) in content_lines(text, "#") {
        let mut toks = line.split_whitespace();
        let i = vertex(toks.next(), ln)?;
        let j = vertex(toks.next(), ln)?;
        n = n.max(i + 1).max(j + 1);
        edges.push((i, j));
    }
    if n == 0 {
        return Err(Error::Input("graph has no edges".into()));
    }
    Graph::from_edges(n, edges)
}

fn parse_matrix_market(text: &str) -> Result<Graph> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, banner) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let banner = banner.to_ascii_lowercase();
    let words: Vec<&str> = banner.split_whitespace().collect();
    if words.len() < 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" || words[2] != "coordinate" {
        return Err(parse_err(ln, "expected '%%MatrixMarket matrix coordinate ...' banner"));
    }
    if words[4] != "symmetric" {
        return Err(parse_err(ln, format!("expected symmetric storage, got '{}'", words[4])));
    }
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (ln, size) = body.next().ok_or_else(|| parse_err(ln, "missing size line"))?;
    let mut toks = size.split_whitespace();
    let rows: usize = field(toks.next(), ln, "row count")?;
    let cols: usize = field(toks.next(), ln, "column count")?;
    let nnz: usize = field(toks.next(), ln, "entry count")?;
    if rows != cols {
        return Err(parse_err(ln, format!("adjacency matrix must be square, got {rows} x {cols}")));
    }
    let mut edges = Vec::with_capacity(nnz);
    for (ln, line) in body {
        let mut toks = line.split_whitespace();
        let i = vertex(toks.next(), ln)?;
        let j = vertex(toks.next(), ln)?;
        if i >= rows || j >= rows {
            return Err(parse_err(ln, format!("entry ({}, {}) outside {rows} x {rows}", i + 1, j + 1)));
        }
        edges.push((i, j));
    }
    if edges.len() != nnz {
        log::warn!("matrix market header announced {nnz} entries, found {}", edges.len());
    }
    Graph::from_edges(rows, edges)
}

fn parse_gset(text: &str) -> Result<Graph> {
    let mut lines = content_lines(text, "#");
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "missing 'n m' header"))?;
    let mut toks = header.split_whitespace();
    let n: usize = field(toks.next(), ln, "vertex count")?;
    let m: usize = field(toks.next(), ln, "edge count")?;
    let mut edges = Vec::with_capacity(m);
    for (ln, line) in lines {
        let mut toks = line.split_whitespace();
        let i = vertex(toks.next(), ln)?;
        let j = vertex(toks.next(), ln)?;
        if i >= n || j >= n {
            return Err(parse_err(ln, format!("vertex out of range 1..={n}")));
        }
        edges.push((i, j));
    }
    if edges.len() != m {
        log::warn!("gset header announced {m} edges, found {}", edges.len());
    }
    Graph::from_edges(n, edges)
}
