//! Instance, decomposition and flow file formats.
//!
//! Instances are JSON documents
//! `{"vertices": n, "edges": [[u, v, cap], ..], "node_caps": [[v, cap], ..], "pairs": [[s, t], ..], "mode": "edp"}`
//! with 0-based ids, or DIMACS-like text with 1-based ids:
//!
//! ```text
//! c comment
//! p <n> <m> <k>
//! e <u> <v> <cap>
//! n <v> <cap>
//! d <s> <t>
//! ```
//!
//! Decompositions use the PACE `.td` format with 1-based vertex ids; node 1
//! is the root.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::decomp::RootedDecomposition;
use crate::error::{Error, Result};
use crate::flow::PathFlow;
use crate::graph::{CapGraph, Instance, Mode, Vertex, VertexSet};
use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub vertices: usize,
    pub edges: Vec<(Vertex, Vertex, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_caps: Option<Vec<(Vertex, u64)>>,
    pub pairs: Vec<(Vertex, Vertex)>,
    pub mode: Mode,
}

impl InstanceFile {
    /// Builds the instance; parallel edges are summed and missing node
    /// capacities default to 1 in node-capacitated mode.
    pub fn to_instance(&self) -> Result<Instance> {
        let mut g = CapGraph::new(self.vertices);
        for &(u, v, cap) in &self.edges {
            g.add_edge(u, v, cap)?;
        }
        if self.mode == Mode::Ndp || self.node_caps.is_some() {
            g.ensure_node_caps(1);
        }
        for &(v, cap) in self.node_caps.iter().flatten() {
            g.set_node_cap(v, cap)?;
        }
        Instance::new(g, self.pairs.clone(), self.mode)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let g = &inst.graph;
        InstanceFile {
            vertices: g.id_bound(),
            edges: g.edges().collect(),
            node_caps: g
                .has_node_caps()
                .then(|| g.vertices().map(|v| (v, g.node_cap(v).unwrap_or(1))).collect()),
            pairs: inst.pairs.0.clone(),
            mode: inst.mode,
        }
    }
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("serializable")
}

pub fn parse_instance_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    file.to_instance()
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn numbers(line: usize, fields: &[&str], want: usize) -> Result<Vec<u64>> {
    if fields.len() != want {
        return Err(parse_err(line, format!("expected {want} numbers, found {}", fields.len())));
    }
    fields
        .iter()
        .map(|s| s.parse::<u64>().map_err(|_| parse_err(line, format!("bad number {s:?}"))))
        .collect()
}

fn vertex(line: usize, v: u64, n: usize) -> Result<Vertex> {
    if v == 0 || v as usize > n {
        return Err(parse_err(line, format!("vertex {v} outside 1..={n}")));
    }
    Ok(v as usize - 1)
}

/// Parses the DIMACS-like format. The mode is node-capacitated when any
/// `n` line is present unless `mode` says otherwise.
pub fn parse_dimacs(text: &str, mode: Option<Mode>) -> Result<Instance> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut edges = Vec::new();
    let mut caps = Vec::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        let Some((&tag, rest)) = fields.split_first() else {
            continue;
        };
        if tag == "c" {
            continue;
        }
        if tag == "p" {
            let nums = numbers(line, rest, 3)?;
            header = Some((nums[0] as usize, nums[1] as usize, nums[2] as usize));
            continue;
        }
        let (n, _, _) = header.ok_or_else(|| parse_err(line, "data before the `p` line"))?;
        match tag {
            "e" => {
                let v = numbers(line, rest, 3)?;
                edges.push((vertex(line, v[0], n)?, vertex(line, v[1], n)?, v[2]));
            }
            "n" => {
                let v = numbers(line, rest, 2)?;
                caps.push((vertex(line, v[0], n)?, v[1]));
            }
            "d" => {
                let v = numbers(line, rest, 2)?;
                pairs.push((vertex(line, v[0], n)?, vertex(line, v[1], n)?));
            }
            _ => return Err(parse_err(line, format!("unknown line type {tag:?}"))),
        }
    }
    let (n, m, k) = header.ok_or_else(|| parse_err(0, "missing `p` line"))?;
    if edges.len() != m || pairs.len() != k {
        return Err(parse_err(
            0,
            format!("header announces {m} edges and {k} pairs, found {} and {}", edges.len(), pairs.len()),
        ));
    }
    let mode = mode.unwrap_or(if caps.is_empty() { Mode::Edp } else { Mode::Ndp });
    InstanceFile {
        vertices: n,
        edges,
        node_caps: (!caps.is_empty()).then_some(caps),
        pairs,
        mode,
    }
    .to_instance()
}

pub fn instance_to_dimacs(inst: &Instance) -> String {
    let g = &inst.graph;
    let mut out = String::new();
    let _ = writeln!(out, "p {} {} {}", g.id_bound(), g.num_edges(), inst.k());
    for (u, v, cap) in g.edges() {
        let _ = writeln!(out, "e {} {} {cap}", u + 1, v + 1);
    }
    if inst.mode == Mode::Ndp {
        for v in g.vertices() {
            let _ = writeln!(out, "n {} {}", v + 1, g.node_cap(v).unwrap_or(1));
        }
    }
    for (_, (s, t)) in inst.pairs.iter() {
        let _ = writeln!(out, "d {} {}", s + 1, t + 1);
    }
    out
}

/// JSON if the text starts with `{`, DIMACS-like otherwise.
pub fn parse_instance(text: &str) -> Result<Instance> {
    if text.trim_start().starts_with('{') {
        parse_instance_json(text)
    } else {
        parse_dimacs(text, None)
    }
}

/// A PACE `.td` file as written, with 1-based bag and vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TdFile {
    pub num_vertices: usize,
    /// Bag `i + 1` lists its vertices in file order.
    pub bags: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

impl TdFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, usize)> = None;
        let mut bags: Vec<Option<Vec<usize>>> = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let fields: Vec<&str> = raw.split_whitespace().collect();
            match fields.first().copied() {
                None | Some("c") => continue,
                Some("s") => {
                    if fields.get(1) != Some(&"td") {
                        return Err(parse_err(line, "expected `s td`"));
                    }
                    let v = numbers(line, &fields[2..], 3)?;
                    header = Some((v[0] as usize, v[1] as usize, v[2] as usize));
                    bags = vec![None; v[0] as usize];
                }
                Some("b") => {
                    let (nb, _, nv) = header.ok_or_else(|| parse_err(line, "bag before header"))?;
                    let v = numbers(line, &fields[1..], fields.len() - 1)?;
                    let id = *v.first().ok_or_else(|| parse_err(line, "bag without id"))? as usize;
                    if id == 0 || id > nb {
                        return Err(parse_err(line, format!("bag id {id} outside 1..={nb}")));
                    }
                    if bags[id - 1].is_some() {
                        return Err(parse_err(line, format!("bag {id} given twice")));
                    }
                    let members: Vec<usize> = v[1..].iter().map(|&x| x as usize).collect();
                    if let Some(&bad) = members.iter().find(|&&x| x == 0 || x > nv) {
                        return Err(parse_err(line, format!("vertex {bad} outside 1..={nv}")));
                    }
                    bags[id - 1] = Some(members);
                }
                Some(_) => {
                    let (nb, _, _) = header.ok_or_else(|| parse_err(line, "edge before header"))?;
                    let v = numbers(line, &fields, 2)?;
                    let (a, b) = (v[0] as usize, v[1] as usize);
                    if a == 0 || b == 0 || a > nb || b > nb || a == b {
                        return Err(parse_err(line, format!("bad tree edge {a} {b}")));
                    }
                    edges.push((a, b));
                }
            }
        }
        let (nb, max_bag, nv) = header.ok_or_else(|| parse_err(0, "missing `s td` line"))?;
        let bags: Vec<Vec<usize>> = bags
            .into_iter()
            .enumerate()
            .map(|(i, b)| b.ok_or_else(|| parse_err(0, format!("bag {} missing", i + 1))))
            .collect::<Result<_>>()?;
        let largest = bags.iter().map(Vec::len).max().unwrap_or(0);
        if largest != max_bag {
            return Err(parse_err(0, format!("header says max bag size {max_bag}, found {largest}")));
        }
        if nb > 0 && edges.len() != nb - 1 {
            return Err(parse_err(0, format!("{} tree edges for {nb} bags", edges.len())));
        }
        Ok(TdFile {
            num_vertices: nv,
            bags,
            edges,
        })
    }

    pub fn emit(&self) -> String {
        let max_bag = self.bags.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = format!("s td {} {} {}\n", self.bags.len(), max_bag, self.num_vertices);
        for (i, bag) in self.bags.iter().enumerate() {
            let _ = write!(out, "b {}", i + 1);
            for v in bag {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Roots the tree at bag 1; node labels are the bag ids.
    pub fn to_decomposition(&self) -> Result<RootedDecomposition> {
        let nb = self.bags.len();
        let mut adj = vec![Vec::new(); nb];
        for &(a, b) in &self.edges {
            adj[a - 1].push(b - 1);
            adj[b - 1].push(a - 1);
        }
        let mut parent = vec![None; nb];
        let mut seen = vec![false; nb];
        let mut stack = vec![0];
        if nb > 0 {
            seen[0] = true;
        }
        while let Some(t) = stack.pop() {
            for &c in &adj[t] {
                if !seen[c] {
                    seen[c] = true;
                    parent[c] = Some(t);
                    stack.push(c);
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::BadDecomposition("tree edges do not connect all bags".into()));
        }
        let bags = self
            .bags
            .iter()
            .map(|b| b.iter().map(|&v| v - 1).collect::<VertexSet>())
            .collect();
        RootedDecomposition::with_labels(bags, parent, (1..=nb).collect())
    }

    /// Bags in node order with their labels as ids; vertex ids shifted to 1-based.
    pub fn from_decomposition(d: &RootedDecomposition, num_vertices: usize) -> Self {
        let order = d.preorder();
        let mut index = vec![0; d.len()];
        for (i, &t) in order.iter().enumerate() {
            index[t] = i + 1;
        }
        TdFile {
            num_vertices,
            bags: order.iter().map(|&t| d.bag(t).iter().map(|v| v + 1).collect()).collect(),
            edges: order
                .iter()
                .filter_map(|&t| d.parent(t).map(|p| (index[p], index[t])))
                .collect(),
        }
    }
}

pub fn parse_td(text: &str) -> Result<RootedDecomposition> {
    TdFile::parse(text)?.to_decomposition()
}

pub fn emit_td(d: &RootedDecomposition, num_vertices: usize) -> String {
    TdFile::from_decomposition(d, num_vertices).emit()
}

#[derive(Serialize, Deserialize)]
struct FlowEntry {
    pair: usize,
    path: Vec<Vertex>,
    weight: String,
}

/// Path flows as JSON with exact weights written as strings such as `"3/4"`.
pub fn flow_to_json(f: &PathFlow<Rational>) -> String {
    let entries: Vec<FlowEntry> = f
        .entries()
        .iter()
        .map(|e| FlowEntry {
            pair: e.pair,
            path: e.path.clone(),
            weight: e.weight.to_string(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("serializable")
}

pub fn flow_from_json(text: &str) -> Result<PathFlow<Rational>> {
    let entries: Vec<FlowEntry> = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        msg: e.to_string(),
    })?;
    let mut f = PathFlow::new();
    for e in entries {
        let w: Rational = e.weight.parse().map_err(|_| parse_err(0, format!("bad weight {:?}", e.weight)))?;
        f.push(e.pair, e.path, w);
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    const TD: &str = "s td 3 2 4\nb 1 1 2\nb 2 2 3\nb 3 3 4\n1 2\n2 3\n";

    #[test]
    fn td_round_trip_and_rooting() {
        let file = TdFile::parse(TD).unwrap();
        assert_eq!(file.emit(), TD);
        let d = file.to_decomposition().unwrap();
        assert_eq!(d.bag(d.root()), &[0, 1].into());
        assert!(d.is_path());
        assert_eq!(parse_td(&emit_td(&d, 4)).unwrap(), d);
        assert!(TdFile::parse("s td 2 1 2\nb 1 1\nb 2 2\n").is_err());
    }

    #[test]
    fn json_and_dimacs_agree() {
        let json = r#"{"vertices": 3, "edges": [[0,1,2],[1,2,1],[0,1,1]], "pairs": [[0,2]], "mode": "ndp"}"#;
        let a = parse_instance(json).unwrap();
        assert_eq!(a.graph.edge_cap(0, 1), Some(3));
        assert_eq!(a.graph.node_cap(1), Some(1));
        let b = parse_instance(&instance_to_dimacs(&a)).unwrap();
        assert_eq!(a, b);
        assert_eq!(parse_instance(&instance_to_json(&a)).unwrap(), a);
        assert!(matches!(parse_dimacs("p 2 1 0\ne 1 3 1\n", None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn flow_round_trip() {
        let mut f = PathFlow::new();
        f.push(0, vec![0, 1, 2], q(3, 4));
        assert!(flow_to_json(&f).contains("\"3/4\""));
        assert_eq!(flow_from_json(&flow_to_json(&f)).unwrap(), f);
    }
}
