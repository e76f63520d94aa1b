//! Directed diffusion networks and the graph-TSV format.
//!
//! ```text
//! <node_count> <edge_count>
//! <src> <dst> <dist_name> <param_1> [<param_2> ...]
//! ```
//!
//! `dist_name` is one of `exp`, `rayleigh`, `weibull` or `kernelhazard`; the
//! latter takes a kernel-spec path, resolved relative to the graph file.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::transmission::{KernelHazard, TransmissionModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(i as u32)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdgeRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub model: TransmissionModel,
}

impl EdgeRecord {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, model: TransmissionModel) -> Self {
        EdgeRecord {
            src: src.into(),
            dst: dst.into(),
            model,
        }
    }
}

/// Compressed adjacency: `targets[offsets[v]..offsets[v + 1]]` are the edge
/// indices incident to `v`, in edge-list order.
#[derive(Clone, Debug, Default)]
struct Csr {
    offsets: Vec<usize>,
    edges: Vec<u32>,
}

impl Csr {
    fn build(node_count: usize, keys: impl Iterator<Item = usize> + Clone) -> Csr {
        let mut offsets = vec![0usize; node_count + 1];
        for k in keys.clone() {
            offsets[k + 1] += 1;
        }
        for v in 0..node_count {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut edges = vec![0u32; offsets[node_count]];
        for (e, k) in keys.enumerate() {
            edges[fill[k]] = e as u32;
            fill[k] += 1;
        }
        Csr { offsets, edges }
    }

    #[inline]
    fn row(&self, v: usize) -> &[u32] {
        &self.edges[self.offsets[v]..self.offsets[v + 1]]
    }
}

/// Immutable directed network with one transmission model per edge.
#[derive(Clone, Debug)]
pub struct DiffusionNetwork {
    node_count: usize,
    edges: Vec<EdgeRecord>,
    out_adj: Csr,
    in_adj: Csr,
}

impl PartialEq for DiffusionNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.node_count == other.node_count && self.edges == other.edges
    }
}

impl DiffusionNetwork {
    /// Validates endpoints, self-loops and duplicates, then indexes both
    /// orientations.
    pub fn new(node_count: usize, edges: Vec<EdgeRecord>) -> Result<Self> {
        if node_count > u32::MAX as usize {
            return Err(Error::Validation(format!("node count {node_count} too large")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if e.src.index() >= node_count || e.dst.index() >= node_count {
                return Err(Error::Validation(format!(
                    "edge {i} ({} -> {}) references a node >= node count {node_count}",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                return Err(Error::Validation(format!("edge {i} is a self-loop on node {}", e.src)));
            }
            if !seen.insert((e.src, e.dst)) {
                return Err(Error::Validation(format!(
                    "duplicate edge {} -> {} (edge {i})",
                    e.src, e.dst
                )));
            }
        }
        let out_adj = Csr::build(node_count, edges.iter().map(|e| e.src.index()));
        let in_adj = Csr::build(node_count, edges.iter().map(|e| e.dst.index()));
        Ok(DiffusionNetwork {
            node_count,
            edges,
            out_adj,
            in_adj,
        })
    }

    pub fn edgeless(node_count: usize) -> Self {
        Self::new(node_count, Vec::new()).expect("edgeless network is valid")
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    #[inline]
    pub fn edge(&self, e: usize) -> &EdgeRecord {
        &self.edges[e]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.node_count as u32).map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.node_count
    }

    /// Indices of edges leaving `v`.
    #[inline]
    pub fn out_edges(&self, v: NodeId) -> &[u32] {
        self.out_adj.row(v.index())
    }

    /// Indices of edges entering `v`.
    #[inline]
    pub fn in_edges(&self, v: NodeId) -> &[u32] {
        self.in_adj.row(v.index())
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.out_edges(v).len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_edges(v).len()
    }

    /// Node with the largest out-degree, lowest id on ties.
    pub fn max_out_degree_node(&self) -> Option<NodeId> {
        self.nodes()
            .max_by(|a, b| self.out_degree(*a).cmp(&self.out_degree(*b)).then(b.cmp(a)))
    }

    /// Same network with every edge flipped. Edge `k` of the result is edge
    /// `k` of `self` reversed, with its model unchanged.
    pub fn reverse_view(&self) -> DiffusionNetwork {
        let edges = self
            .edges
            .iter()
            .map(|e| EdgeRecord {
                src: e.dst,
                dst: e.src,
                model: e.model.clone(),
            })
            .collect();
        DiffusionNetwork {
            node_count: self.node_count,
            edges,
            out_adj: self.in_adj.clone(),
            in_adj: self.out_adj.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        Self::parse(&text, path, base)
    }

    /// Parses graph-TSV text. `path` is used for error messages and `base`
    /// to resolve kernel-spec paths.
    pub fn parse(text: &str, path: &Path, base: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let (node_count, edge_count) = match header.split_whitespace().collect::<Vec<_>>()[..] {
            [n, m] => (
                n.parse::<usize>()
                    .map_err(|_| err(hline, format!("bad node count `{n}`")))?,
                m.parse::<usize>()
                    .map_err(|_| err(hline, format!("bad edge count `{m}`")))?,
            ),
            _ => return Err(err(hline, format!("expected `<node_count> <edge_count>`, got `{header}`"))),
        };

        let mut kernels: HashMap<PathBuf, Arc<KernelHazard>> = HashMap::new();
        let mut edges = Vec::with_capacity(edge_count);
        for (lineno, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 4 {
                return Err(err(lineno, format!("expected `<src> <dst> <dist> <params..>`, got `{line}`")));
            }
            let node = |tok: &str| -> Result<NodeId> {
                let v: u32 = tok
                    .parse()
                    .map_err(|_| err(lineno, format!("bad node id `{tok}`")))?;
                if v as usize >= node_count {
                    return Err(Error::Validation(format!(
                        "line {lineno}: node id {v} >= declared node count {node_count}"
                    )));
                }
                Ok(NodeId(v))
            };
            let src = node(toks[0])?;
            let dst = node(toks[1])?;
            let params = &toks[3..];
            let num = |i: usize| -> Result<f64> {
                params[i]
                    .parse::<f64>()
                    .map_err(|_| err(lineno, format!("bad parameter `{}`", params[i])))
            };
            let arity = |n: usize| -> Result<()> {
                if params.len() == n {
                    Ok(())
                } else {
                    Err(err(
                        lineno,
                        format!("`{}` takes {n} parameter(s), got {}", toks[2], params.len()),
                    ))
                }
            };
            let model = match toks[2] {
                "exp" => {
                    arity(1)?;
                    TransmissionModel::exponential(num(0)?)
                }
                "rayleigh" => {
                    arity(1)?;
                    TransmissionModel::rayleigh(num(0)?)
                }
                "weibull" => {
                    arity(2)?;
                    TransmissionModel::weibull(num(0)?, num(1)?)
                }
                "kernelhazard" => {
                    arity(1)?;
                    let kpath = base.join(params[0]);
                    let k = match kernels.get(&kpath) {
                        Some(k) => k.clone(),
                        None => {
                            let k = Arc::new(KernelHazard::load(&kpath)?);
                            kernels.insert(kpath, k.clone());
                            k
                        }
                    };
                    Ok(TransmissionModel::KernelHazard(k))
                }
                other => return Err(err(lineno, format!("unknown distribution `{other}`"))),
            }
            .map_err(|e| err(lineno, e.to_string()))?;
            edges.push(EdgeRecord { src, dst, model });
        }
        if edges.len() != edge_count {
            return Err(Error::Validation(format!(
                "header declares {edge_count} edges, found {}",
                edges.len()
            )));
        }
        Self::new(node_count, edges)
    }

    /// Writes graph-TSV. Kernel models are written to sidecar files named
    /// `<file_name>.kernel<k>` next to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file_name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "graph".into());
        let dir = path.parent().unwrap_or_else(|| Path::new(""));

        let mut kernel_names: HashMap<*const KernelHazard, String> = HashMap::new();
        let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "{}\t{}", self.node_count, self.edges.len()).map_err(io)?;
        for e in &self.edges {
            match &e.model {
                TransmissionModel::KernelHazard(k) => {
                    let key = Arc::as_ptr(k);
                    let name = match kernel_names.get(&key) {
                        Some(n) => n.clone(),
                        None => {
                            let n = format!("{file_name}.kernel{}", kernel_names.len());
                            let kp = dir.join(&n);
                            fs::write(&kp, k.to_spec_string()).map_err(|e| Error::io(&kp, e))?;
                            kernel_names.insert(key, n.clone());
                            n
                        }
                    };
                    writeln!(w, "{}\t{}\tkernelhazard\t{name}", e.src, e.dst).map_err(io)?;
                }
                m => writeln!(w, "{}\t{}\t{m}", e.src, e.dst).map_err(io)?,
            }
        }
        w.flush().map_err(io)
    }
}

/// Dense id to external name mapping, one `<id>\t<name>` per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeDictionary {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl NodeDictionary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (id, name) = line.split_once('\t').ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "expected `<id>\\t<name>`".into(),
            })?;
            let id: usize = id.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("bad id `{id}`"),
            })?;
            pairs.push((id, name.to_string()));
        }
        pairs.sort();
        let mut dict = NodeDictionary::default();
        for (expected, (id, name)) in pairs.into_iter().enumerate() {
            if id != expected {
                return Err(Error::Validation(format!(
                    "{}: ids must be dense from 0, missing {expected}",
                    path.display()
                )));
            }
            dict.insert(name)?;
        }
        Ok(dict)
    }

    /// Appends a name and returns its id.
    pub fn insert(&mut self, name: String) -> Result<NodeId> {
        if self.index.contains_key(&name) {
            return Err(Error::Validation(format!("duplicate node name `{name}`")));
        }
        let id = NodeId::from(self.names.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> Option<&str> {
        self.names.get(id.index()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}
