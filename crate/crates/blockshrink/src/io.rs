//! Edge-list and label files.
//!
//! Edge lists hold one edge per line as two whitespace-separated node
//! tokens. Lines starting with `#` are comments, except that a leading
//! `# nodes: N` line declares the tokens `0..N` up front so isolated nodes
//! survive a round trip. Self-loops and repeated edges are dropped and
//! counted; directed input is symmetrized. Label files hold one
//! `node label` pair per line with the same token rules.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use blockshrink_core::graph::{Graph, Partition};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NODES_DIRECTIVE: &str = "# nodes:";

/// Node tokens in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tokens `"0"`, `"1"`, …, `"n-1"` mapped to themselves.
    pub fn sequential(n: usize) -> Self {
        let mut idx = Self::new();
        for i in 0..n {
            idx.intern(&i.to_string());
        }
        idx
    }

    pub fn intern(&mut self, token: &str) -> usize {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.names.len();
        self.names.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Counts reported while reading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    /// Edge lines read, before any filtering.
    pub edge_lines: usize,
    pub self_loops: usize,
    /// Repeated pairs, including the reverse copy of a directed edge.
    pub duplicates: usize,
    pub nodes: usize,
    pub edges: usize,
    pub labels: usize,
}

/// A graph with its node names and an optional annotation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub nodes: NodeIndex,
    pub annotation: Option<Partition>,
    /// Label tokens in label-id order.
    pub label_names: Vec<String>,
    pub stats: IngestStats,
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn two_tokens<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = line.split_whitespace();
    match (it.next(), it.next()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(parse_err(
            path,
            line_no,
            format!("expected two tokens, got {line:?}"),
        )),
    }
}

/// Raw pairs of an edge list, interned into `nodes`.
pub fn parse_edges<R: BufRead>(
    reader: R,
    path: &Path,
    nodes: &mut NodeIndex,
) -> Result<(Vec<(usize, usize)>, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut pairs = Vec::new();
    let mut seen_edge = false;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(NODES_DIRECTIVE) {
            if !seen_edge {
                let n: usize = rest.trim().parse().map_err(|_| {
                    parse_err(path, line_no, format!("bad node count {:?}", rest.trim()))
                })?;
                for v in 0..n {
                    nodes.intern(&v.to_string());
                }
            }
            continue;
        }
        if trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        seen_edge = true;
        let (a, b) = two_tokens(path, line_no, trimmed)?;
        stats.edge_lines += 1;
        let (u, v) = (nodes.intern(a), nodes.intern(b));
        if u == v {
            stats.self_loops += 1;
            continue;
        }
        pairs.push((u.min(v), u.max(v)));
    }
    Ok((pairs, stats))
}

/// `(node, label)` token pairs of a label file, nodes interned into `nodes`.
/// Label tokens get ids in first-seen order.
pub fn parse_labels<R: BufRead>(
    reader: R,
    path: &Path,
    nodes: &mut NodeIndex,
) -> Result<(Vec<(usize, usize)>, NodeIndex)> {
    let mut labels = NodeIndex::new();
    let mut out = Vec::new();
    let mut assigned: HashMap<usize, (usize, usize)> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let (node, label) = two_tokens(path, line_no, trimmed)?;
        let (v, l) = (nodes.intern(node), labels.intern(label));
        match assigned.get(&v) {
            Some(&(prev, _)) if prev == l => continue,
            Some(&(_, first_line)) => {
                return Err(parse_err(
                    path,
                    line_no,
                    format!("node {node:?} already labeled on line {first_line}"),
                ))
            }
            None => {
                assigned.insert(v, (l, line_no));
                out.push((v, l));
            }
        }
    }
    Ok((out, labels))
}

fn build_graph(n: usize, mut pairs: Vec<(usize, usize)>, stats: &mut IngestStats) -> Result<Graph> {
    let raw = pairs.len();
    pairs.sort_unstable();
    pairs.dedup();
    stats.duplicates = raw - pairs.len();
    stats.nodes = n;
    stats.edges = pairs.len();
    Ok(Graph::from_edges(n, pairs)?)
}

/// Reads an edge list and, when given, a label file covering every node.
/// Nodes that appear only in the label file are kept as isolated nodes.
pub fn read_dataset(edges: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let mut nodes = NodeIndex::new();
    let (pairs, mut stats) = parse_edges(open(edges)?, edges, &mut nodes)?;
    let (annotation, label_names) = match labels {
        None => (None, Vec::new()),
        Some(path) => {
            let (assigned, label_ids) = parse_labels(open(path)?, path, &mut nodes)?;
            if assigned.len() != nodes.len() {
                let missing = (0..nodes.len())
                    .find(|v| !assigned.iter().any(|&(u, _)| u == *v))
                    .map(|v| nodes.names()[v].clone())
                    .unwrap_or_default();
                return Err(Error::Data(format!(
                    "{}: {} of {} nodes have no label (first: {missing:?})",
                    path.display(),
                    nodes.len() - assigned.len(),
                    nodes.len()
                )));
            }
            let mut z = vec![0; nodes.len()];
            for (v, l) in assigned {
                z[v] = l;
            }
            stats.labels = label_ids.len();
            (
                Some(Partition::new(z, label_ids.len())?),
                label_ids.names().to_vec(),
            )
        }
    };
    let graph = build_graph(nodes.len(), pairs, &mut stats)?;
    Ok(Dataset {
        graph,
        nodes,
        annotation,
        label_names,
        stats,
    })
}

/// Reads an edge list written with integer node ids (as by [`write_edge_list`]).
pub fn read_graph(path: &Path) -> Result<Graph> {
    Ok(read_dataset(path, None)?.graph)
}

/// Reads a partition over the integer node ids `0..n`.
pub fn read_partition(path: &Path, n: usize) -> Result<Partition> {
    let mut nodes = NodeIndex::sequential(n);
    let (assigned, labels) = parse_labels(open(path)?, path, &mut nodes)?;
    if nodes.len() != n || assigned.len() != n {
        return Err(Error::Data(format!(
            "{}: expected labels for nodes 0..{n}, found {} labeled of {} nodes",
            path.display(),
            assigned.len(),
            nodes.len()
        )));
    }
    // label tokens that are integers keep their numeric order
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&l| {
        let name = &labels.names()[l];
        (name.parse::<u64>().unwrap_or(u64::MAX), name.clone())
    });
    let mut rank = vec![0; labels.len()];
    for (r, &l) in order.iter().enumerate() {
        rank[l] = r;
    }
    let mut z = vec![0; n];
    for (v, l) in assigned {
        z[v] = rank[l];
    }
    Ok(Partition::new(z, labels.len())?)
}

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Edge list with integer ids and a node-count header.
pub fn edge_list_bytes(graph: &Graph) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 * graph.edge_count() + 32);
    writeln!(out, "{NODES_DIRECTIVE} {}", graph.n()).expect("write to Vec");
    for &(i, j) in graph.edges() {
        writeln!(out, "{i} {j}").expect("write to Vec");
    }
    out
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<()> {
    write_atomic(path, &edge_list_bytes(graph))
}

/// `node label` lines for integer node ids.
pub fn labels_bytes(labels: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * labels.len());
    for (v, l) in labels.iter().enumerate() {
        writeln!(out, "{v} {l}").expect("write to Vec");
    }
    out
}

pub fn write_partition(path: &Path, partition: &Partition) -> Result<()> {
    write_atomic(path, &labels_bytes(partition.labels()))
}

/// One value per line, `node value`.
pub fn write_latents(path: &Path, latents: &[f64]) -> Result<()> {
    let mut out = Vec::new();
    for (v, u) in latents.iter().enumerate() {
        writeln!(out, "{v} {u:?}").expect("write to Vec");
    }
    write_atomic(path, &out)
}
