//! Greedy source selection.
//!
//! Sketches for all `n` samples and `m` labelings are built once. For a fixed
//! window only each node's least label per (sample, labeling) matters, so the
//! [`LabelBank`] keeps exactly that, node-major. The least label of a source
//! set is the minimum over its members, which makes every marginal gain a
//! single pass over one node's `n * m` labels.
//!
//! Lazy evaluation keeps stale gains in a max-heap and only re-evaluates the
//! top; a re-evaluated entry that stays on top is selected. Ties go to the
//! lowest node id in both modes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{mean_in_order, visit_sketches, EstimatorConfig};
use crate::graph::{DiffusionNetwork, NodeId};
use crate::sketch::{size_from_sum, SketchBuilder};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyConfig {
    /// Number of sources to select, `C`.
    pub budget: usize,
    pub estimator: EstimatorConfig,
    pub lazy: bool,
}

impl GreedyConfig {
    pub fn new(budget: usize, estimator: EstimatorConfig) -> Self {
        GreedyConfig {
            budget,
            estimator,
            lazy: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyResult {
    pub selected: Vec<NodeId>,
    /// Marginal gain of each selection.
    pub gain_trace: Vec<f64>,
    /// Influence estimate of each prefix of `selected`.
    pub prefix_estimates: Vec<f64>,
    /// Standard error of each prefix estimate.
    pub prefix_std_errors: Vec<f64>,
    /// Marginal-gain evaluations performed.
    pub evaluations: usize,
}

/// Per-node least labels at one window for every (sample, labeling).
#[derive(Clone, Debug)]
pub struct LabelBank {
    node_count: usize,
    samples: usize,
    label_sets: usize,
    window: f64,
    // labels[v * n * m + l * m + u]
    labels: Vec<f64>,
}

/// Least labels of a growing source set.
#[derive(Clone, Debug)]
pub struct CoverState {
    members: Vec<NodeId>,
    least: Vec<f64>,
    value: f64,
}

impl CoverState {
    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    /// Current influence estimate; zero for the empty set.
    pub fn value(&self) -> f64 {
        self.value
    }
}

impl LabelBank {
    /// Builds every sketch set once, using the estimator's stream layout.
    pub fn build(net: &DiffusionNetwork, cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let (n, m, nodes) = (cfg.samples, cfg.label_sets, net.node_count());
        let per_sample: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(SketchBuilder::new, |builder, l| {
                let mut row = vec![0.0; nodes * m];
                visit_sketches(net, cfg, l, builder, |u, sketch| {
                    for v in 0..nodes {
                        row[v * m + u] = sketch.list(NodeId::from(v)).query(cfg.window);
                    }
                });
                row
            })
            .collect();

        let mut labels = vec![0.0; nodes * n * m];
        for (l, row) in per_sample.iter().enumerate() {
            for v in 0..nodes {
                let dst = v * n * m + l * m;
                labels[dst..dst + m].copy_from_slice(&row[v * m..(v + 1) * m]);
            }
        }
        Ok(LabelBank {
            node_count: nodes,
            samples: n,
            label_sets: m,
            window: cfg.window,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    #[inline]
    fn node_labels(&self, v: NodeId) -> &[f64] {
        let stride = self.samples * self.label_sets;
        &self.labels[v.index() * stride..(v.index() + 1) * stride]
    }

    fn per_sample<'a>(&'a self, least: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        least
            .chunks_exact(self.label_sets)
            .map(move |c| size_from_sum(self.label_sets, c.iter().fold(0.0, |a, r| a + r)))
    }

    fn value_of(&self, least: &[f64]) -> f64 {
        mean_in_order(self.per_sample(least), self.samples)
    }

    pub fn empty_state(&self) -> CoverState {
        CoverState {
            members: Vec::new(),
            least: vec![f64::INFINITY; self.samples * self.label_sets],
            value: 0.0,
        }
    }

    /// Per-sample size estimates of a source set.
    pub fn per_sample_estimates(&self, sources: &[NodeId]) -> Vec<f64> {
        let least = self.union_labels(sources);
        self.per_sample(&least).collect()
    }

    fn union_labels(&self, sources: &[NodeId]) -> Vec<f64> {
        let mut least = vec![f64::INFINITY; self.samples * self.label_sets];
        for s in sources {
            for (cur, r) in least.iter_mut().zip(self.node_labels(*s)) {
                *cur = cur.min(*r);
            }
        }
        least
    }

    /// Influence estimate of `sources` from the stored labels.
    pub fn estimate(&self, sources: &[NodeId]) -> f64 {
        if sources.is_empty() {
            return 0.0;
        }
        self.value_of(&self.union_labels(sources))
    }

    /// `sigma(A + candidate) - sigma(A)` under the shared samples and labels.
    pub fn marginal_gain(&self, state: &CoverState, candidate: NodeId) -> Result<f64> {
        if candidate.index() >= self.node_count {
            return Err(Error::Config(format!("candidate {candidate} is not a node")));
        }
        if state.members.contains(&candidate) {
            return Err(Error::Config(format!("candidate {candidate} is already selected")));
        }
        Ok(self.gain_unchecked(state, candidate))
    }

    fn gain_unchecked(&self, state: &CoverState, candidate: NodeId) -> f64 {
        let m = self.label_sets;
        let cand = self.node_labels(candidate);
        let per_sample = state
            .least
            .chunks_exact(m)
            .zip(cand.chunks_exact(m))
            .map(|(cur, c)| {
                let sum = cur.iter().zip(c).fold(0.0, |a, (x, y)| a + x.min(*y));
                size_from_sum(m, sum)
            });
        mean_in_order(per_sample, self.samples) - state.value
    }

    pub fn add(&self, state: &mut CoverState, node: NodeId) {
        for (cur, r) in state.least.iter_mut().zip(self.node_labels(node)) {
            *cur = cur.min(*r);
        }
        state.members.push(node);
        state.value = self.value_of(&state.least);
    }

    fn std_error(&self, state: &CoverState) -> f64 {
        let vals: Vec<f64> = self.per_sample(&state.least).collect();
        crate::estimator::variance_of(&vals).map_or(0.0, |r| r.std_error)
    }
}

/// Marginal gain of `candidate` given the current source set.
pub fn marginal_gain(bank: &LabelBank, state: &CoverState, candidate: NodeId) -> Result<f64> {
    bank.marginal_gain(state, candidate)
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    gain: f64,
    node: u32,
    round: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl Ord for Candidate {
    /// Larger gain first, then lower node id.
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn greedy_select(net: &DiffusionNetwork, cfg: &GreedyConfig) -> Result<GreedyResult> {
    if cfg.budget == 0 || cfg.budget > net.node_count() {
        return Err(Error::Config(format!(
            "budget must be in 1..={}, got {}",
            net.node_count(),
            cfg.budget
        )));
    }
    let bank = LabelBank::build(net, &cfg.estimator)?;
    Ok(greedy_on_bank(&bank, cfg.budget, cfg.lazy))
}

/// Greedy selection over prebuilt labels.
pub fn greedy_on_bank(bank: &LabelBank, budget: usize, lazy: bool) -> GreedyResult {
    let budget = budget.min(bank.node_count);
    let mut state = bank.empty_state();
    let mut result = GreedyResult {
        selected: Vec::with_capacity(budget),
        gain_trace: Vec::with_capacity(budget),
        prefix_estimates: Vec::with_capacity(budget),
        prefix_std_errors: Vec::with_capacity(budget),
        evaluations: 0,
    };
    let record = |state: &CoverState, node: NodeId, gain: f64, result: &mut GreedyResult| {
        result.selected.push(node);
        result.gain_trace.push(gain);
        result.prefix_estimates.push(state.value);
        result.prefix_std_errors.push(bank.std_error(state));
    };

    if lazy {
        let initial: Vec<Candidate> = (0..bank.node_count as u32)
            .into_par_iter()
            .map(|v| Candidate {
                gain: bank.gain_unchecked(&state, NodeId(v)),
                node: v,
                round: 0,
            })
            .collect();
        result.evaluations += initial.len();
        let mut heap = BinaryHeap::from(initial);
        for round in 0..budget {
            while let Some(top) = heap.pop() {
                if top.round == round {
                    bank.add(&mut state, NodeId(top.node));
                    record(&state, NodeId(top.node), top.gain, &mut result);
                    break;
                }
                result.evaluations += 1;
                heap.push(Candidate {
                    gain: bank.gain_unchecked(&state, NodeId(top.node)),
                    round,
                    ..top
                });
            }
        }
    } else {
        let mut chosen = vec![false; bank.node_count];
        for _ in 0..budget {
            let gains: Vec<(u32, f64)> = (0..bank.node_count as u32)
                .into_par_iter()
                .filter(|v| !chosen[*v as usize])
                .map(|v| (v, bank.gain_unchecked(&state, NodeId(v))))
                .collect();
            result.evaluations += gains.len();
            let (best, gain) = gains
                .into_iter()
                .fold(None::<(u32, f64)>, |acc, (v, g)| match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((v, g)),
                })
                .expect("budget <= node count");
            chosen[best as usize] = true;
            bank.add(&mut state, NodeId(best));
            record(&state, NodeId(best), gain, &mut result);
        }
    }
    result
}
