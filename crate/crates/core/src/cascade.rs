//! Observed cascades and empirical influence.
//!
//! One cascade per line: `<source>;<node>:<time>,<node>:<time>,...`, with the
//! source listed at time 0. The empirical influence of `u` within `T` is the
//! number of distinct nodes infected by time `T` across all cascades started
//! by `u`; the source itself counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::rng::{stream, StreamTag};

#[derive(Clone, Debug, PartialEq)]
pub struct Cascade {
    pub source: NodeId,
    /// Infection events in file order; the source appears at time 0.
    pub events: Vec<(NodeId, f64)>,
}

impl Cascade {
    pub fn new(source: NodeId, events: Vec<(NodeId, f64)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (node, t) in &events {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(Error::Cascade(format!("node {node} has invalid time {t}")));
            }
            if !seen.insert(*node) {
                return Err(Error::Cascade(format!("node {node} appears twice in one cascade")));
            }
        }
        match events.iter().find(|(n, _)| *n == source) {
            Some((_, t)) if *t == 0.0 => {}
            Some((_, t)) => {
                return Err(Error::Cascade(format!("source {source} has time {t}, expected 0")));
            }
            None => return Err(Error::Cascade(format!("source {source} missing from its cascade"))),
        }
        Ok(Cascade { source, events })
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CascadeSet {
    pub cascades: Vec<Cascade>,
}

impl CascadeSet {
    /// Loads a cascade file. With `node_count`, node ids at or above it are
    /// rejected.
    pub fn load(path: impl AsRef<Path>, node_count: Option<usize>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, node_count)
    }

    pub fn parse(text: &str, path: &Path, node_count: Option<usize>) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let node = |line: usize, tok: &str| -> Result<NodeId> {
            let v: u32 = tok
                .trim()
                .parse()
                .map_err(|_| err(line, format!("bad node id `{tok}`")))?;
            if node_count.is_some_and(|n| v as usize >= n) {
                return Err(err(line, format!("unknown node id {v}")));
            }
            Ok(NodeId(v))
        };
        let mut cascades = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (src, rest) = line
                .split_once(';')
                .ok_or_else(|| err(lineno, "expected `<source>;<node>:<time>,...`".into()))?;
            let source = node(lineno, src)?;
            let mut events = Vec::new();
            for ev in rest.split(',').filter(|e| !e.trim().is_empty()) {
                let (n, t) = ev
                    .split_once(':')
                    .ok_or_else(|| err(lineno, format!("expected `<node>:<time>`, got `{ev}`")))?;
                let t: f64 = t
                    .trim()
                    .parse()
                    .map_err(|_| err(lineno, format!("bad time `{t}`")))?;
                events.push((node(lineno, n)?, t));
            }
            cascades.push(Cascade::new(source, events).map_err(|e| err(lineno, e.to_string()))?);
        }
        Ok(CascadeSet { cascades })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cascades {
            let _ = write!(out, "{};", c.source);
            for (i, (n, t)) in c.events.iter().enumerate() {
                let sep = if i == 0 { "" } else { "," };
                let _ = write!(out, "{sep}{n}:{t}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.cascades.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cascades.is_empty()
    }

    /// Distinct source nodes, ascending.
    pub fn sources(&self) -> Vec<NodeId> {
        let set: BTreeSet<NodeId> = self.cascades.iter().map(|c| c.source).collect();
        set.into_iter().collect()
    }

    /// Random split of whole cascades into `(train, test)`, with
    /// `round(train_fraction * len)` cascades in the training part.
    pub fn split(&self, train_fraction: f64, seed: u64, repeat: u64) -> Result<(CascadeSet, CascadeSet)> {
        if !(0.0..=1.0).contains(&train_fraction) {
            return Err(Error::Config(format!(
                "train fraction must be in [0, 1], got {train_fraction}"
            )));
        }
        let mut idx: Vec<usize> = (0..self.cascades.len()).collect();
        idx.shuffle(&mut stream(seed, StreamTag::Split, repeat, 0));
        let cut = (train_fraction * idx.len() as f64).round() as usize;
        let pick = |ids: &[usize]| CascadeSet {
            cascades: ids.iter().map(|i| self.cascades[*i].clone()).collect(),
        };
        Ok((pick(&idx[..cut]), pick(&idx[cut..])))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmpiricalInfluence {
    pub count: usize,
    /// False when `u` started no cascade, so `count` carries no information.
    pub has_data: bool,
}

pub fn empirical_influence(cs: &CascadeSet, u: NodeId, window: f64) -> EmpiricalInfluence {
    let mut infected = BTreeSet::new();
    let mut has_data = false;
    for c in cs.cascades.iter().filter(|c| c.source == u) {
        has_data = true;
        infected.extend(c.events.iter().filter(|(_, t)| *t <= window).map(|(n, _)| *n));
    }
    EmpiricalInfluence {
        count: infected.len(),
        has_data,
    }
}

/// Empirical influence of every source with data.
pub fn empirical_influence_all(cs: &CascadeSet, window: f64) -> BTreeMap<NodeId, f64> {
    cs.sources()
        .into_iter()
        .map(|u| (u, empirical_influence(cs, u, window).count as f64))
        .collect()
}

/// Mean absolute error over the nodes in `truths`. Every truth node needs an
/// estimate.
pub fn mae(estimates: &BTreeMap<NodeId, f64>, truths: &BTreeMap<NodeId, f64>) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::Config("no data-bearing nodes to score".into()));
    }
    let shared = truths.keys().filter(|k| estimates.contains_key(k)).count();
    if shared == 0 {
        return Err(Error::Config("estimates and truths share no nodes".into()));
    }
    let mut total = 0.0;
    for (node, truth) in truths {
        let est = estimates
            .get(node)
            .ok_or_else(|| Error::Config(format!("no estimate for node {node}")))?;
        total += (est - truth).abs();
    }
    Ok(total / truths.len() as f64)
}
