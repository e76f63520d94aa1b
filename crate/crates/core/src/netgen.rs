//! Stochastic Kronecker networks with random Weibull edge delays.
//!
//! Edges are placed by ball dropping: each edge descends `power` levels of the
//! Kronecker hierarchy, picking a quadrant at each level with probability
//! proportional to the seed-matrix entry. Self-loops and duplicates are
//! rejected and redrawn, so the output has exactly `ceil(density * 2^power)`
//! edges.

use std::collections::HashSet;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{DiffusionNetwork, EdgeRecord, NodeId};
use crate::rng::{stream, StreamTag};
use crate::transmission::TransmissionModel;

/// Attempts allowed per target edge before giving up.
pub const MAX_ATTEMPTS_PER_EDGE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    CorePeriphery,
    Random,
    Hierarchical,
}

impl Preset {
    pub fn matrix(self) -> [[f64; 2]; 2] {
        match self {
            Preset::CorePeriphery => [[0.9, 0.5], [0.5, 0.3]],
            Preset::Random => [[0.5, 0.5], [0.5, 0.5]],
            Preset::Hierarchical => [[0.9, 0.1], [0.1, 0.9]],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::CorePeriphery => "core-periphery",
            Preset::Random => "random",
            Preset::Hierarchical => "hierarchical",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "core-periphery" => Ok(Preset::CorePeriphery),
            "random" => Ok(Preset::Random),
            "hierarchical" => Ok(Preset::Hierarchical),
            other => Err(Error::Config(format!(
                "unknown preset `{other}` (expected core-periphery, random or hierarchical)"
            ))),
        }
    }
}

/// Seed matrix for a preset name.
pub fn preset(name: &str) -> Result<[[f64; 2]; 2]> {
    name.parse::<Preset>().map(Preset::matrix)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KroneckerSpec {
    pub seed_matrix: [[f64; 2]; 2],
    pub power: u32,
    /// Edges per node.
    pub density: f64,
    /// Range for both Weibull scale and shape. Zero is excluded.
    pub param_range: (f64, f64),
    pub rng_seed: u64,
}

impl KroneckerSpec {
    pub fn new(preset: Preset, power: u32, density: f64, rng_seed: u64) -> Self {
        KroneckerSpec {
            seed_matrix: preset.matrix(),
            power,
            density,
            param_range: (0.0, 10.0),
            rng_seed,
        }
    }

    pub fn node_count(&self) -> usize {
        1usize << self.power
    }

    pub fn target_edges(&self) -> usize {
        (self.density * self.node_count() as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.power == 0 || self.power > 30 {
            return Err(Error::Config(format!("power must be in 1..=30, got {}", self.power)));
        }
        let flat = self.seed_matrix.iter().flatten();
        if flat.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("seed matrix entries must lie in [0, 1]".into()));
        }
        if flat.sum::<f64>() <= 0.0 {
            return Err(Error::Config("seed matrix has no mass".into()));
        }
        if !(self.density.is_finite() && self.density > 0.0) {
            return Err(Error::Config(format!("density must be positive, got {}", self.density)));
        }
        let n = self.node_count();
        if self.target_edges() > n * (n - 1) {
            return Err(Error::Config(format!(
                "density {} needs {} edges but only {} are possible on {n} nodes",
                self.density,
                self.target_edges(),
                n * (n - 1)
            )));
        }
        let (lo, hi) = self.param_range;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("bad parameter range ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Draws a value in `(lo, hi)`, excluding zero.
fn positive_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    loop {
        let x = rng.random_range(lo..hi);
        if x > 0.0 {
            return x;
        }
    }
}

pub fn generate(spec: &KroneckerSpec) -> Result<DiffusionNetwork> {
    spec.validate()?;
    let n = spec.node_count();
    let target = spec.target_edges();
    let mut rng = stream(spec.rng_seed, StreamTag::Generate, 0, 0);

    let total: f64 = spec.seed_matrix.iter().flatten().sum();
    let cum = {
        let m = &spec.seed_matrix;
        let w = [m[0][0], m[0][1], m[1][0], m[1][1]];
        let mut c = [0.0; 4];
        let mut acc = 0.0;
        for (slot, x) in c.iter_mut().zip(w) {
            acc += x / total;
            *slot = acc;
        }
        c
    };

    let mut present = HashSet::with_capacity(target);
    let mut pairs = Vec::with_capacity(target);
    let max_attempts = MAX_ATTEMPTS_PER_EDGE * target;
    let mut attempts = 0;
    while pairs.len() < target {
        if attempts == max_attempts {
            return Err(Error::Generation(format!(
                "placed {} of {target} edges after {max_attempts} attempts; \
                 the seed matrix cannot reach this density",
                pairs.len()
            )));
        }
        attempts += 1;
        let (mut row, mut col) = (0usize, 0usize);
        for _ in 0..spec.power {
            let u: f64 = rng.random();
            let q = cum.iter().position(|c| u < *c).unwrap_or(3);
            row = (row << 1) | (q >> 1);
            col = (col << 1) | (q & 1);
        }
        if row == col || !present.insert((row, col)) {
            continue;
        }
        pairs.push((row, col));
    }

    let (lo, hi) = spec.param_range;
    let edges = pairs
        .into_iter()
        .map(|(s, d)| {
            let scale = positive_uniform(&mut rng, lo, hi);
            let shape = positive_uniform(&mut rng, lo, hi);
            let model = TransmissionModel::weibull(scale, shape)?;
            Ok(EdgeRecord {
                src: NodeId::from(s),
                dst: NodeId::from(d),
                model,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    DiffusionNetwork::new(n, edges)
}

/// Uniformly random simple digraph with `edge_count` edges and exponential
/// delays whose rates are drawn uniformly from `rate_range`.
pub fn random_exponential(
    node_count: usize,
    edge_count: usize,
    rate_range: (f64, f64),
    seed: u64,
) -> Result<DiffusionNetwork> {
    if node_count < 2 || edge_count > node_count * (node_count - 1) {
        return Err(Error::Config(format!(
            "{edge_count} edges do not fit a simple digraph on {node_count} nodes"
        )));
    }
    let (lo, hi) = rate_range;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Config(format!("bad rate range ({lo}, {hi})")));
    }
    let mut rng = stream(seed, StreamTag::Generate, 1, 0);
    let mut present = HashSet::with_capacity(edge_count);
    let mut edges = Vec::with_capacity(edge_count);
    while edges.len() < edge_count {
        let s = rng.random_range(0..node_count);
        let d = rng.random_range(0..node_count);
        if s == d || !present.insert((s, d)) {
            continue;
        }
        let rate = positive_uniform(&mut rng, lo, hi);
        edges.push(EdgeRecord::new(s, d, TransmissionModel::exponential(rate)?));
    }
    DiffusionNetwork::new(node_count, edges)
}
