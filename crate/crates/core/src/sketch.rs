//! Least-label lists and neighborhood-size estimation.
//!
//! Every node gets an independent unit-exponential label. The smallest label
//! in a set of `k` nodes is exponential with rate `k`, so from `m` independent
//! labelings the set size is estimated as `(m - 1) / sum(least labels)`.
//!
//! A least-label list for node `s` stores `(distance, label)` pairs with
//! strictly decreasing distance and strictly increasing label; the smallest
//! label within distance `T` of `s` is the first entry whose distance is at
//! most `T`. Lists for all nodes come out of one pass that runs a pruned
//! reverse Dijkstra from every node in ascending-label order.

use std::collections::BinaryHeap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DiffusionNetwork, NodeId};
use crate::oracle::{HeapEntry, TransmissionSample};

/// One unit-exponential label per node.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelAssignment {
    pub r: Vec<f64>,
}

impl LabelAssignment {
    pub fn draw<R: Rng + ?Sized>(node_count: usize, rng: &mut R) -> Self {
        let r = (0..node_count)
            .map(|_| {
                let u: f64 = rng.random();
                // -ln(1 - u) is in [0, inf); a zero label has probability 2^-53
                (-(-u).ln_1p()).max(f64::MIN_POSITIVE)
            })
            .collect();
        LabelAssignment { r }
    }

    pub fn from_labels(r: Vec<f64>) -> Self {
        LabelAssignment { r }
    }

    /// Node ids in ascending label order, ties by id.
    pub fn ascending(&self) -> Vec<u32> {
        let mut order: Vec<u32> = (0..self.r.len() as u32).collect();
        order.sort_by(|a, b| {
            self.r[*a as usize]
                .total_cmp(&self.r[*b as usize])
                .then(a.cmp(b))
        });
        order
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ListEntry {
    pub dist: f64,
    pub label: f64,
}

/// Borrowed least-label list of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeastLabelList<'a>(&'a [ListEntry]);

impl<'a> LeastLabelList<'a> {
    pub fn new(entries: &'a [ListEntry]) -> Self {
        LeastLabelList(entries)
    }

    pub fn entries(&self) -> &'a [ListEntry] {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Smallest label within distance `window`: the first entry with
    /// `dist <= window`. Infinite when there is none (negative window).
    #[inline]
    pub fn query(&self, window: f64) -> f64 {
        let idx = self.0.partition_point(|e| e.dist > window);
        self.0.get(idx).map_or(f64::INFINITY, |e| e.label)
    }

    /// Strictly decreasing distances ending at zero, strictly increasing labels.
    pub fn is_well_formed(&self) -> bool {
        let ordered = self
            .0
            .windows(2)
            .all(|w| w[0].dist > w[1].dist && w[0].label < w[1].label);
        ordered && self.0.last().is_some_and(|e| e.dist == 0.0)
    }
}

pub fn query_least_label(list: LeastLabelList<'_>, window: f64) -> f64 {
    list.query(window)
}

/// Least-label lists of every node for one (delay sample, labeling) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SketchSet {
    offsets: Vec<u32>,
    entries: Vec<ListEntry>,
}

impl SketchSet {
    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn list(&self, node: NodeId) -> LeastLabelList<'_> {
        let v = node.index();
        LeastLabelList(&self.entries[self.offsets[v] as usize..self.offsets[v + 1] as usize])
    }

    pub fn total_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn mean_list_len(&self) -> f64 {
        self.entries.len() as f64 / self.node_count().max(1) as f64
    }
}

/// Reusable buffers for [`build_lists`].
#[derive(Default)]
pub struct SketchBuilder {
    best: Vec<f64>,
    heap: BinaryHeap<HeapEntry>,
    appended: Vec<(u32, ListEntry)>,
}

impl SketchBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn build(
        &mut self,
        net: &DiffusionNetwork,
        sample: &TransmissionSample,
        labels: &LabelAssignment,
    ) -> SketchSet {
        let n = net.node_count();
        assert_eq!(labels.r.len(), n, "one label per node");
        assert_eq!(sample.tau.len(), net.edge_count(), "one delay per edge");
        self.best.clear();
        self.best.resize(n, f64::INFINITY);
        self.appended.clear();

        for origin in labels.ascending() {
            let label = labels.r[origin as usize];
            self.heap.clear();
            self.heap.push(HeapEntry { dist: 0.0, node: origin });
            while let Some(HeapEntry { dist, node }) = self.heap.pop() {
                // strict: ties keep the earlier, smaller label
                if dist >= self.best[node as usize] {
                    continue;
                }
                self.best[node as usize] = dist;
                self.appended.push((node, ListEntry { dist, label }));
                // walk edges backwards: whoever reaches `node` also reaches `origin`
                for &e in net.in_edges(NodeId(node)) {
                    let tau = sample.delay(e as usize);
                    if tau.is_infinite() {
                        continue;
                    }
                    let pred = net.edge(e as usize).src.0;
                    let nd = dist + tau;
                    if nd < self.best[pred as usize] {
                        self.heap.push(HeapEntry { dist: nd, node: pred });
                    }
                }
            }
        }

        // stable counting sort by node keeps each list in append order
        let mut offsets = vec![0u32; n + 1];
        for (node, _) in &self.appended {
            offsets[*node as usize + 1] += 1;
        }
        for v in 0..n {
            offsets[v + 1] += offsets[v];
        }
        let mut fill = offsets.clone();
        let mut entries = vec![ListEntry { dist: 0.0, label: 0.0 }; self.appended.len()];
        for (node, entry) in &self.appended {
            entries[fill[*node as usize] as usize] = *entry;
            fill[*node as usize] += 1;
        }
        SketchSet { offsets, entries }
    }
}

/// Least-label lists for every node under one delay sample and labeling.
pub fn build_lists(
    net: &DiffusionNetwork,
    sample: &TransmissionSample,
    labels: &LabelAssignment,
) -> SketchSet {
    SketchBuilder::new().build(net, sample, labels)
}

/// Smallest label within `window` of any source.
pub fn multi_source_least_label(sketch: &SketchSet, sources: &[NodeId], window: f64) -> Result<f64> {
    if sources.is_empty() {
        return Err(Error::Config("source set is empty".into()));
    }
    Ok(sources
        .iter()
        .map(|s| sketch.list(*s).query(window))
        .fold(f64::INFINITY, f64::min))
}

/// `(m - 1) / sum(least_labels)`, unbiased for the neighborhood size.
pub fn estimate_size(least_labels: &[f64]) -> Result<f64> {
    let m = least_labels.len();
    if m < 3 {
        return Err(Error::Config(format!(
            "size estimation needs m >= 3 label sets, got {m}"
        )));
    }
    if let Some(r) = least_labels.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::Config(format!("least labels must be positive, got {r}")));
    }
    Ok(size_from_sum(m, least_labels.iter().sum()))
}

#[inline]
pub(crate) fn size_from_sum(m: usize, sum: f64) -> f64 {
    (m as f64 - 1.0) / sum
}

const CACHE_MAGIC: &[u8; 4] = b"CTLL";
const CACHE_VERSION: u32 = 1;

/// Writes one sketch set in the versioned little-endian cache format:
/// magic, version, sample index, label-set index, node count, then per node
/// an entry count followed by `(dist, label)` pairs.
pub fn write_sketch<W: Write>(
    mut w: W,
    sample: u64,
    label_set: u64,
    sketch: &SketchSet,
) -> std::io::Result<()> {
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LittleEndian>(CACHE_VERSION)?;
    w.write_u64::<LittleEndian>(sample)?;
    w.write_u64::<LittleEndian>(label_set)?;
    w.write_u64::<LittleEndian>(sketch.node_count() as u64)?;
    for v in 0..sketch.node_count() {
        let list = sketch.list(NodeId::from(v));
        w.write_u32::<LittleEndian>(list.len() as u32)?;
        for e in list.entries() {
            w.write_f64::<LittleEndian>(e.dist)?;
            w.write_f64::<LittleEndian>(e.label)?;
        }
    }
    Ok(())
}

/// Reads a sketch written by [`write_sketch`], returning
/// `(sample, label_set, sketch)`.
pub fn read_sketch<R: Read>(mut r: R) -> Result<(u64, u64, SketchSet)> {
    let io = |e: std::io::Error| Error::Cache(e.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Cache("bad magic number".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(io)?;
    if version != CACHE_VERSION {
        return Err(Error::Cache(format!("unsupported version {version}")));
    }
    let sample = r.read_u64::<LittleEndian>().map_err(io)?;
    let label_set = r.read_u64::<LittleEndian>().map_err(io)?;
    let n = r.read_u64::<LittleEndian>().map_err(io)? as usize;
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0u32);
    let mut entries = Vec::new();
    for _ in 0..n {
        let len = r.read_u32::<LittleEndian>().map_err(io)?;
        for _ in 0..len {
            let dist = r.read_f64::<LittleEndian>().map_err(io)?;
            let label = r.read_f64::<LittleEndian>().map_err(io)?;
            entries.push(ListEntry { dist, label });
        }
        offsets.push(entries.len() as u32);
    }
    Ok((sample, label_set, SketchSet { offsets, entries }))
}
