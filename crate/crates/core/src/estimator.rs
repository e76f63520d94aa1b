//! Two-loop influence estimator.
//!
//! The outer loop draws `n` delay samples; for each, the inner loop draws `m`
//! labelings, builds least-label lists and reads off the least label reachable
//! from the source set within the window. Each sample contributes
//! `(m - 1) / sum(least labels)` and the influence estimate is their mean.
//!
//! Sample `l` uses the delay stream `(seed, tau, l)` and labeling `u` of that
//! sample uses `(seed, label, l, u)`, so estimates are identical for any
//! thread count and runs with a common seed share their randomness.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{DiffusionNetwork, NodeId};
use crate::oracle::{check_sources, draw_sample};
use crate::rng::{label_stream, tau_stream};
use crate::sketch::{size_from_sum, LabelAssignment, SketchBuilder, SketchSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Delay samples, `n`.
    pub samples: usize,
    /// Labelings per sample, `m`.
    pub label_sets: usize,
    /// Time window `T`.
    pub window: f64,
    pub master_seed: u64,
}

impl EstimatorConfig {
    pub fn new(samples: usize, label_sets: usize, window: f64, master_seed: u64) -> Self {
        EstimatorConfig {
            samples,
            label_sets,
            window,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::Config("need at least one sample (n >= 1)".into()));
        }
        if self.label_sets < 3 {
            return Err(Error::Config(format!(
                "need m >= 3 label sets for the size estimator, got m = {}",
                self.label_sets
            )));
        }
        if !(self.window >= 0.0) {
            return Err(Error::Config(format!("time window must be >= 0, got {}", self.window)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfluenceEstimate {
    /// Mean of `per_sample`.
    pub value: f64,
    /// Per-sample size estimates in sample order.
    pub per_sample: Vec<f64>,
    pub sources: Vec<NodeId>,
    pub config: EstimatorConfig,
    pub node_count: usize,
}

impl InfluenceEstimate {
    /// True when estimator noise pushed the value outside `[|A|, |V|]`.
    pub fn out_of_range(&self) -> bool {
        self.value < self.sources.len() as f64 || self.value > self.node_count as f64
    }

    /// Per-sample estimates above the node count.
    pub fn clamped_samples(&self) -> usize {
        let cap = self.node_count as f64;
        self.per_sample.iter().filter(|x| **x > cap).count()
    }

    /// Mean with every per-sample estimate capped at the node count. Bounded
    /// by `|V|` but biased low, noticeably so on small networks.
    pub fn clamped_value(&self) -> f64 {
        let cap = self.node_count as f64;
        mean_in_order(self.per_sample.iter().map(|x| x.min(cap)), self.per_sample.len())
    }
}

/// Mean with a fixed left-to-right summation order.
pub(crate) fn mean_in_order(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    values.fold(0.0, |acc, x| acc + x) / count as f64
}

/// Builds the `m` sketch sets of sample `l` and hands each to `visit`.
pub(crate) fn visit_sketches(
    net: &DiffusionNetwork,
    cfg: &EstimatorConfig,
    sample_index: usize,
    builder: &mut SketchBuilder,
    mut visit: impl FnMut(usize, &SketchSet),
) {
    let sample = draw_sample(net, &mut tau_stream(cfg.master_seed, sample_index));
    for u in 0..cfg.label_sets {
        let labels = LabelAssignment::draw(
            net.node_count(),
            &mut label_stream(cfg.master_seed, sample_index, u),
        );
        let sketch = builder.build(net, &sample, &labels);
        visit(u, &sketch);
    }
}

pub fn estimate_influence(
    net: &DiffusionNetwork,
    sources: &[NodeId],
    cfg: &EstimatorConfig,
) -> Result<InfluenceEstimate> {
    let mut curve = estimate_influence_curve(net, sources, &[cfg.window], cfg)?;
    Ok(curve.pop().expect("one window"))
}

/// Estimates for several windows from the same samples and labelings;
/// `cfg.window` is ignored in favor of `windows`.
pub fn estimate_influence_curve(
    net: &DiffusionNetwork,
    sources: &[NodeId],
    windows: &[f64],
    cfg: &EstimatorConfig,
) -> Result<Vec<InfluenceEstimate>> {
    cfg.validate()?;
    check_sources(net, sources)?;
    for w in windows {
        EstimatorConfig { window: *w, ..*cfg }.validate()?;
    }
    let m = cfg.label_sets;

    // rows[l][k] = per-sample estimate for window k
    let rows: Vec<Vec<f64>> = (0..cfg.samples)
        .into_par_iter()
        .map_init(SketchBuilder::new, |builder, l| {
            let mut sums = vec![0.0; windows.len()];
            visit_sketches(net, cfg, l, builder, |_, sketch| {
                for (sum, w) in sums.iter_mut().zip(windows) {
                    let least = sources
                        .iter()
                        .map(|s| sketch.list(*s).query(*w))
                        .fold(f64::INFINITY, f64::min);
                    *sum += least;
                }
            });
            sums.into_iter().map(|s| size_from_sum(m, s)).collect()
        })
        .collect();

    let mut sorted_sources = sources.to_vec();
    sorted_sources.sort();
    sorted_sources.dedup();
    Ok(windows
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let per_sample: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            InfluenceEstimate {
                value: mean_in_order(per_sample.iter().copied(), per_sample.len()),
                per_sample,
                sources: sorted_sources.clone(),
                config: EstimatorConfig { window: *w, ..*cfg },
                node_count: net.node_count(),
            }
        })
        .collect())
}

/// Least label of the source set for every sample (rows) and labeling
/// (columns). Estimates for any `n' <= n` and `m' <= m` follow from prefixes
/// of this table, since prefixes use the same streams as smaller configs.
pub fn least_label_table(
    net: &DiffusionNetwork,
    sources: &[NodeId],
    cfg: &EstimatorConfig,
) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    check_sources(net, sources)?;
    Ok((0..cfg.samples)
        .into_par_iter()
        .map_init(SketchBuilder::new, |builder, l| {
            let mut row = vec![f64::INFINITY; cfg.label_sets];
            visit_sketches(net, cfg, l, builder, |u, sketch| {
                row[u] = sources
                    .iter()
                    .map(|s| sketch.list(*s).query(cfg.window))
                    .fold(f64::INFINITY, f64::min);
            });
            row
        })
        .collect())
}

/// Estimate from the first `samples` rows and `label_sets` columns of a
/// [`least_label_table`].
pub fn estimate_from_table(table: &[Vec<f64>], samples: usize, label_sets: usize) -> Result<f64> {
    if samples == 0 || samples > table.len() {
        return Err(Error::Config(format!(
            "table has {} samples, asked for {samples}",
            table.len()
        )));
    }
    if label_sets < 3 || table[..samples].iter().any(|r| r.len() < label_sets) {
        return Err(Error::Config(format!("need 3 <= m <= table width, got m = {label_sets}")));
    }
    let per_sample = table[..samples]
        .iter()
        .map(|row| size_from_sum(label_sets, row[..label_sets].iter().fold(0.0, |a, r| a + r)));
    Ok(mean_in_order(per_sample, samples))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceReport {
    /// Unbiased sample variance of the per-sample estimates.
    pub variance: f64,
    /// `sqrt(variance / n)`.
    pub std_error: f64,
}

pub fn variance_report(estimate: &InfluenceEstimate) -> Result<VarianceReport> {
    variance_of(&estimate.per_sample)
}

pub(crate) fn variance_of(values: &[f64]) -> Result<VarianceReport> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(format!("variance needs at least 2 samples, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    Ok(VarianceReport {
        variance,
        std_error: (variance / n as f64).sqrt(),
    })
}

/// Delay samples sufficient for error `epsilon` with probability `1 - delta`
/// uniformly over source sets of size at most `max_sources`:
/// `ceil((C * lambda / epsilon^2) * ln(2 |V| / delta))`. `lambda` bounds the
/// per-sample variance term and must be supplied by the caller.
pub fn sample_bound(
    epsilon: f64,
    delta: f64,
    max_sources: f64,
    lambda: f64,
    node_count: usize,
) -> Result<u64> {
    let positive = [epsilon, delta, max_sources, lambda, node_count as f64];
    if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Config(format!(
            "sample bound arguments must be positive: epsilon={epsilon} delta={delta} \
             C={max_sources} lambda={lambda} |V|={node_count}"
        )));
    }
    if delta >= 1.0 {
        return Err(Error::Config(format!("delta must be < 1, got {delta}")));
    }
    let n = max_sources * lambda / (epsilon * epsilon) * (2.0 * node_count as f64 / delta).ln();
    Ok(n.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeRecord;
    use crate::transmission::TransmissionModel;

    fn two_node_chain() -> DiffusionNetwork {
        DiffusionNetwork::new(
            2,
            vec![EdgeRecord::new(0usize, 1usize, TransmissionModel::exponential(1.0).unwrap())],
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(10, 2, 1.0, 0).validate().is_err());
        assert!(EstimatorConfig::new(0, 5, 1.0, 0).validate().is_err());
        assert!(EstimatorConfig::new(10, 5, -1.0, 0).validate().is_err());
        let net = DiffusionNetwork::edgeless(3);
        let err = estimate_influence(&net, &[NodeId(0)], &EstimatorConfig::new(10, 2, 1.0, 0))
            .unwrap_err();
        assert!(err.to_string().contains("m >= 3"));
    }

    #[test]
    fn edgeless_network_estimates_one() {
        let net = DiffusionNetwork::edgeless(5);
        let mut means = Vec::new();
        for seed in 0..20 {
            let cfg = EstimatorConfig::new(500, 5, 3.0, seed);
            means.push(estimate_influence(&net, &[NodeId(2)], &cfg).unwrap().value);
        }
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn two_node_chain_matches_closed_form() {
        let est = estimate_influence(
            &two_node_chain(),
            &[NodeId(0)],
            &EstimatorConfig::new(10_000, 5, 1.0, 77),
        )
        .unwrap();
        let expected = 2.0 - (-1.0f64).exp();
        assert!((est.value - expected).abs() < 0.05, "{}", est.value);
    }

    #[test]
    fn value_is_raw_mean_and_clamping_is_reported() {
        let est = estimate_influence(
            &two_node_chain(),
            &[NodeId(0)],
            &EstimatorConfig::new(200, 3, 1.0, 5),
        )
        .unwrap();
        assert!(est.clamped_samples() > 0, "m=3 should overshoot |V|=2 sometimes");
        let raw = est.per_sample.iter().fold(0.0, |a, x| a + x) / 200.0;
        assert_eq!(est.value, raw);
        let capped = est.per_sample.iter().fold(0.0, |a, x| a + x.min(2.0)) / 200.0;
        assert_eq!(est.clamped_value(), capped);
        assert!(est.clamped_value() < est.value);
    }

    #[test]
    fn curve_is_monotone_in_window_per_sample() {
        let net = two_node_chain();
        let cfg = EstimatorConfig::new(300, 5, 0.0, 9);
        let curve = estimate_influence_curve(&net, &[NodeId(0)], &[0.1, 0.5, 2.0], &cfg).unwrap();
        for pair in curve.windows(2) {
            for (a, b) in pair[0].per_sample.iter().zip(&pair[1].per_sample) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn table_prefixes_reproduce_smaller_configs() {
        let net = two_node_chain();
        let big = EstimatorConfig::new(50, 8, 1.0, 21);
        let table = least_label_table(&net, &[NodeId(0)], &big).unwrap();
        for (n, m) in [(50, 8), (20, 5), (7, 3)] {
            let direct = estimate_influence(&net, &[NodeId(0)], &EstimatorConfig::new(n, m, 1.0, 21))
                .unwrap()
                .value;
            assert_eq!(estimate_from_table(&table, n, m).unwrap(), direct);
        }
        assert!(estimate_from_table(&table, 51, 5).is_err());
        assert!(estimate_from_table(&table, 10, 9).is_err());
    }

    #[test]
    fn variance_report_arithmetic() {
        let r = variance_of(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.variance - 1.0).abs() < 1e-15);
        assert!((r.std_error - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(variance_of(&[4.0, 4.0, 4.0]).unwrap().variance, 0.0);
        assert!(variance_of(&[4.0]).is_err());
    }

    #[test]
    fn sample_bound_values() {
        // 1000 * ln(40960) = 10620.35..., 250 * ln(40960) = 2655.09...
        assert_eq!(sample_bound(0.1, 0.05, 1.0, 10.0, 1024).unwrap(), 10621);
        assert_eq!(sample_bound(0.2, 0.05, 1.0, 10.0, 1024).unwrap(), 2656);
        let mut prev = u64::MAX;
        for delta in [0.01, 0.1, 0.5, 0.9, 0.999] {
            let b = sample_bound(0.1, delta, 1.0, 10.0, 1024).unwrap();
            assert!(b <= prev);
            prev = b;
        }
        assert!(prev >= (1000.0 * 2048f64.ln()).ceil() as u64);
        assert!(sample_bound(0.0, 0.05, 1.0, 10.0, 1024).is_err());
        assert!(sample_bound(0.1, 1.0, 1.0, 10.0, 1024).is_err());
    }
}
