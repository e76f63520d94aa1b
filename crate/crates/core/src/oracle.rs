//! Exact infection times for one delay sample, and the naive sampling
//! estimator built on them.
//!
//! For fixed edge delays a node's infection time is its shortest-path distance
//! from the source set, so a multi-source Dijkstra answers every per-sample
//! question exactly. Averaging neighborhood counts over many samples gives the
//! ground-truth influence the sketch estimator is checked against.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DiffusionNetwork, NodeId};
use crate::rng::tau_stream;

/// One realization of every edge delay, indexed like the network's edges.
/// `f64::INFINITY` marks an edge that never transmits.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionSample {
    pub tau: Vec<f64>,
}

impl TransmissionSample {
    pub fn new(tau: Vec<f64>) -> Self {
        TransmissionSample { tau }
    }

    #[inline]
    pub fn delay(&self, edge: usize) -> f64 {
        self.tau[edge]
    }
}

/// Draws every edge delay from its own model, in edge order, one uniform each.
pub fn draw_sample<R: Rng + ?Sized>(net: &DiffusionNetwork, rng: &mut R) -> TransmissionSample {
    TransmissionSample {
        tau: net.edges().iter().map(|e| e.model.sample(rng)).collect(),
    }
}

/// Min-heap entry keyed on distance, ties broken by node id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct HeapEntry {
    pub dist: f64,
    pub node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfectionTimes {
    /// Per-node infection time, `f64::INFINITY` when unreachable.
    pub t: Vec<f64>,
    pub sources: Vec<NodeId>,
}

impl InfectionTimes {
    /// `|{i : t_i <= window}|`.
    pub fn infected_by(&self, window: f64) -> usize {
        self.t.iter().filter(|t| **t <= window).count()
    }
}

pub(crate) fn check_sources(net: &DiffusionNetwork, sources: &[NodeId]) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::Config("source set is empty".into()));
    }
    if let Some(s) = sources.iter().find(|s| !net.contains(**s)) {
        return Err(Error::Config(format!(
            "source {s} is not a node of the {}-node network",
            net.node_count()
        )));
    }
    Ok(())
}

/// Multi-source Dijkstra with every source seeded at distance zero.
pub fn shortest_infection_times(
    net: &DiffusionNetwork,
    sample: &TransmissionSample,
    sources: &[NodeId],
) -> Result<InfectionTimes> {
    check_sources(net, sources)?;
    let mut t = vec![f64::INFINITY; net.node_count()];
    let mut heap = BinaryHeap::new();
    for s in sources {
        if t[s.index()] > 0.0 {
            t[s.index()] = 0.0;
            heap.push(HeapEntry { dist: 0.0, node: s.0 });
        }
    }
    while let Some(HeapEntry { dist, node }) = heap.pop() {
        if dist > t[node as usize] {
            continue;
        }
        for &e in net.out_edges(NodeId(node)) {
            let tau = sample.delay(e as usize);
            if tau.is_infinite() {
                continue;
            }
            let dst = net.edge(e as usize).dst;
            let nd = dist + tau;
            if nd < t[dst.index()] {
                t[dst.index()] = nd;
                heap.push(HeapEntry { dist: nd, node: dst.0 });
            }
        }
    }
    let mut sources = sources.to_vec();
    sources.sort();
    sources.dedup();
    Ok(InfectionTimes { t, sources })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NaiveEstimate {
    pub value: f64,
    /// Infected-node count of each sample.
    pub counts: Vec<usize>,
}

impl NaiveEstimate {
    pub fn std_error(&self) -> f64 {
        let n = self.counts.len() as f64;
        if self.counts.len() < 2 {
            return 0.0;
        }
        let var = self
            .counts
            .iter()
            .map(|c| (*c as f64 - self.value).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Mean infected count within `window` over `samples` delay samples.
/// Sample `l` uses the delay stream `(master_seed, tau, l)`.
pub fn naive_influence(
    net: &DiffusionNetwork,
    sources: &[NodeId],
    window: f64,
    samples: usize,
    master_seed: u64,
) -> Result<NaiveEstimate> {
    let curve = naive_influence_curve(net, sources, &[window], samples, master_seed)?;
    Ok(curve.into_iter().next().expect("one window"))
}

/// [`naive_influence`] for several windows on the same delay samples.
pub fn naive_influence_curve(
    net: &DiffusionNetwork,
    sources: &[NodeId],
    windows: &[f64],
    samples: usize,
    master_seed: u64,
) -> Result<Vec<NaiveEstimate>> {
    check_sources(net, sources)?;
    if samples == 0 {
        return Err(Error::Config("naive sampling needs at least one sample".into()));
    }
    if let Some(w) = windows.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::Config(format!("time window must be >= 0, got {w}")));
    }
    let per_sample: Vec<Vec<usize>> = (0..samples)
        .into_par_iter()
        .map(|l| {
            let sample = draw_sample(net, &mut tau_stream(master_seed, l));
            let times = shortest_infection_times(net, &sample, sources).expect("sources checked");
            windows.iter().map(|w| times.infected_by(*w)).collect()
        })
        .collect();
    Ok((0..windows.len())
        .map(|k| {
            let counts: Vec<usize> = per_sample.iter().map(|row| row[k]).collect();
            let value = counts.iter().sum::<usize>() as f64 / samples as f64;
            NaiveEstimate { value, counts }
        })
        .collect())
}
