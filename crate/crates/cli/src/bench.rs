//! Benchmark suites.
//!
//! Every suite writes one CSV with columns `series, x, y, stderr, wall_ms`.
//! Rows of the `runtime_*` series carry wall-clock seconds in `y` and so vary
//! between runs; every other row is a pure function of the arguments.

use std::time::{Duration, Instant};

use continest::estimator::{
    estimate_from_table, estimate_influence, estimate_influence_curve, least_label_table,
    EstimatorConfig,
};
use continest::graph::{DiffusionNetwork, NodeId};
use continest::maximize::{greedy_on_bank, LabelBank};
use continest::netgen::{generate, KroneckerSpec, Preset};
use continest::oracle::{naive_influence, naive_influence_curve};

use crate::args::{BenchmarkArgs, Suite};
use crate::commands::log;
use crate::error::{invalid, CliResult};
use crate::manifest::RunManifest;
use crate::output::{fmt_f64, CsvOut};

/// Environment variable capping the node count of benchmark networks.
pub const MAX_NODES_VAR: &str = "CONTINEST_MAX_NODES";
pub const DEFAULT_MAX_NODES: usize = 1 << 16;

/// Seconds per (node + edge) for one least-label build; measured on one core.
const SKETCH_COST: f64 = 2.0e-7;
/// Seconds per (node + edge) for one naive shortest-path sample.
const NAIVE_COST: f64 = 1.0e-7;

/// Offset applied to the master seed for ground-truth runs, so the oracle
/// never shares delay samples with the estimate it scores.
pub const TRUTH_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub stderr: Option<f64>,
    pub wall_ms: Option<f64>,
}

impl Row {
    fn new(series: &str, x: f64, y: f64) -> Self {
        Row {
            series: series.to_string(),
            x,
            y,
            stderr: None,
            wall_ms: None,
        }
    }

    fn stderr(mut self, se: f64) -> Self {
        self.stderr = Some(se);
        self
    }

    fn wall(mut self, d: Duration) -> Self {
        self.wall_ms = Some(d.as_secs_f64() * 1e3);
        self
    }

    pub fn is_timing(&self) -> bool {
        self.series.starts_with("runtime_")
    }
}

/// Resolved suite parameters with defaults filled in.
#[derive(Clone, Debug)]
pub struct SuiteParams {
    pub preset: Preset,
    pub power: u32,
    pub powers: Vec<u32>,
    pub density: f64,
    pub densities: Vec<f64>,
    pub samples: Vec<usize>,
    pub labels: Vec<usize>,
    pub windows: Vec<f64>,
    pub window: f64,
    pub n: usize,
    pub m: usize,
    pub truth_samples: usize,
    pub replicates: usize,
    pub max_budget: usize,
    pub reps: usize,
    pub gen_seed: u64,
    pub seed: u64,
    pub max_seconds: f64,
    pub max_nodes: usize,
}

impl SuiteParams {
    pub fn from_args(a: &BenchmarkArgs) -> CliResult<Self> {
        let max_nodes = match std::env::var(MAX_NODES_VAR) {
            Ok(v) => v
                .parse()
                .map_err(|_| invalid(format!("{MAX_NODES_VAR} must be an integer, got `{v}`")))?,
            Err(_) => DEFAULT_MAX_NODES,
        };
        let (power, density) = match a.suite {
            Suite::Sources => (7, 2.5),
            Suite::ScalingSize => (10, 1.5),
            _ => (10, 2.0),
        };
        let p = SuiteParams {
            preset: a.preset.as_deref().unwrap_or("core-periphery").parse()?,
            power: a.power.unwrap_or(power),
            powers: a.powers.clone().unwrap_or_else(|| vec![7, 10, 13]),
            density: a.density.unwrap_or(density),
            densities: a.densities.clone().unwrap_or_else(|| vec![1.0, 1.5, 2.0, 2.5, 3.0]),
            samples: a.samples.clone().unwrap_or_else(|| vec![100, 1_000, 10_000]),
            labels: a.labels.clone().unwrap_or_else(|| vec![3, 5, 10]),
            windows: a
                .windows
                .clone()
                .unwrap_or_else(|| (1..=10).map(f64::from).collect()),
            window: a.window.unwrap_or(10.0),
            n: a.n.unwrap_or(match a.suite {
                Suite::Accuracy => 10_000,
                _ => 1_000,
            }),
            m: a.m.unwrap_or(5),
            truth_samples: a.truth_samples.unwrap_or(100_000),
            replicates: a.replicates.unwrap_or(1),
            max_budget: a.max_budget.unwrap_or(10),
            reps: a.reps.unwrap_or(3),
            gen_seed: a.gen_seed,
            seed: a.seed,
            max_seconds: a.max_seconds,
            max_nodes,
        };
        p.validate(a.suite)?;
        Ok(p)
    }

    fn validate(&self, suite: Suite) -> CliResult<()> {
        if self.samples.contains(&0) || self.samples.is_empty() {
            return Err(invalid("--samples must be non-empty and positive"));
        }
        if self.labels.iter().any(|m| *m < 3) || self.labels.is_empty() {
            return Err(invalid("--labels must be non-empty with every m >= 3"));
        }
        if self.m < 3 {
            return Err(invalid(format!("m >= 3 is required, got m = {}", self.m)));
        }
        if self.n == 0 || self.truth_samples == 0 || self.replicates == 0 || self.reps == 0 {
            return Err(invalid("--n, --truth-samples, --replicates and --reps must be positive"));
        }
        if self.windows.is_empty() || self.windows.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("--windows must be non-empty and non-negative"));
        }
        if !(self.window >= 0.0) {
            return Err(invalid("--T must be non-negative"));
        }
        if self.max_budget == 0 {
            return Err(invalid("--max-budget must be positive"));
        }
        let powers: Vec<u32> = match suite {
            Suite::ScalingSize => self.powers.clone(),
            _ => vec![self.power],
        };
        for p in powers {
            let nodes = 1usize.checked_shl(p).filter(|_| p < 31).unwrap_or(usize::MAX);
            if nodes > self.max_nodes {
                return Err(invalid(format!(
                    "power {p} gives {nodes} nodes, above the {} allowed by {MAX_NODES_VAR}",
                    self.max_nodes
                )));
            }
        }
        Ok(())
    }

    fn network(&self, power: u32, density: f64) -> CliResult<DiffusionNetwork> {
        Ok(generate(&KroneckerSpec::new(self.preset, power, density, self.gen_seed))?)
    }

    /// Rough single-core seconds for the suite, from the cost constants above.
    pub fn estimated_seconds(&self, suite: Suite) -> f64 {
        let size = |power: u32, density: f64| (1u64 << power) as f64 * (1.0 + density);
        let threads = rayon::current_num_threads().max(1) as f64;
        let secs = match suite {
            Suite::Accuracy => {
                let s = size(self.power, self.density);
                let n_max = self.samples.iter().copied().max().unwrap_or(0).max(self.n) as f64;
                let m_max = self.labels.iter().copied().max().unwrap_or(0).max(self.m) as f64;
                let table = self.replicates as f64 * n_max * m_max;
                let curve = (self.n * self.m) as f64;
                s * ((table + curve) * SKETCH_COST + self.truth_samples as f64 * NAIVE_COST)
            }
            Suite::ScalingSize => self
                .powers
                .iter()
                .map(|p| size(*p, self.density) * (self.reps * self.n * self.m) as f64 * SKETCH_COST)
                .sum(),
            Suite::ScalingDensity => self
                .densities
                .iter()
                .map(|d| size(self.power, *d) * (self.reps * self.n * self.m) as f64 * SKETCH_COST)
                .sum(),
            Suite::Sources => {
                let v = (1u64 << self.power) as f64;
                let build = size(self.power, self.density) * (self.n * self.m) as f64 * SKETCH_COST;
                // greedy rounds touch every candidate's labels at worst
                let greedy = self.max_budget as f64 * v * (self.n * self.m) as f64 * 2e-9;
                build + greedy * self.max_budget as f64 / 2.0
            }
        };
        secs / threads
    }
}

fn highest_degree_source(net: &DiffusionNetwork) -> CliResult<NodeId> {
    net.max_out_degree_node()
        .ok_or_else(|| invalid("benchmark network has no nodes"))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>();
    let sxx = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    sxy / sxx
}

/// Estimated influence and oracle influence against the window, plus relative
/// error against sample count and label-set count.
pub fn accuracy(p: &SuiteParams) -> CliResult<Vec<Row>> {
    let net = p.network(p.power, p.density)?;
    let source = [highest_degree_source(&net)?];
    let mut rows = Vec::new();

    let mut windows = p.windows.clone();
    if !windows.contains(&p.window) {
        windows.push(p.window);
    }
    let cfg = EstimatorConfig::new(p.n, p.m, p.window, p.seed);
    let start = Instant::now();
    let curve = estimate_influence_curve(&net, &source, &p.windows, &cfg)?;
    let wall = start.elapsed();
    for est in &curve {
        let se = continest::estimator::variance_report(est).map(|r| r.std_error).ok();
        let mut row = Row::new("influence_vs_T", est.config.window, est.value);
        row.stderr = se;
        rows.push(row.wall(wall));
    }
    let truth_seed = p.seed.wrapping_add(TRUTH_SEED_OFFSET);
    let start = Instant::now();
    let truth_curve = naive_influence_curve(&net, &source, &windows, p.truth_samples, truth_seed)?;
    let wall = start.elapsed();
    for (w, t) in windows.iter().zip(&truth_curve).take(p.windows.len()) {
        rows.push(Row::new("naive_vs_T", *w, t.value).stderr(t.std_error()).wall(wall));
    }
    let at = windows.iter().position(|w| *w == p.window).expect("window was added");
    let truth = truth_curve[at].value;
    rows.push(Row::new("truth_at_T", p.window, truth));

    let n_max = p.samples.iter().copied().max().unwrap_or(0).max(p.n);
    let m_max = p.labels.iter().copied().max().unwrap_or(0).max(p.m);
    let mut by_samples = vec![Vec::new(); p.samples.len()];
    let mut by_labels = vec![Vec::new(); p.labels.len()];
    for r in 0..p.replicates {
        let cfg = EstimatorConfig::new(n_max, m_max, p.window, p.seed.wrapping_add(r as u64));
        let table = least_label_table(&net, &source, &cfg)?;
        for (i, n) in p.samples.iter().enumerate() {
            let est = estimate_from_table(&table, *n, p.m)?;
            by_samples[i].push((est - truth).abs() / truth);
        }
        for (i, m) in p.labels.iter().enumerate() {
            let est = estimate_from_table(&table, p.n, *m)?;
            by_labels[i].push((est - truth).abs() / truth);
        }
        log::info(format_args!("accuracy: replicate {} of {} done", r + 1, p.replicates));
    }
    for (n, errs) in p.samples.iter().zip(&by_samples) {
        let (mean, se) = mean_and_stderr(errs);
        let mut row = Row::new("relerr_vs_samples", *n as f64, mean);
        row.stderr = se;
        rows.push(row);
    }
    for (m, errs) in p.labels.iter().zip(&by_labels) {
        let (mean, se) = mean_and_stderr(errs);
        let mut row = Row::new("relerr_vs_labels", *m as f64, mean);
        row.stderr = se;
        rows.push(row);
    }
    Ok(rows)
}

/// Fastest of `reps` timed runs of `f`, with the value of the last run.
fn time_min<T>(reps: usize, mut f: impl FnMut() -> CliResult<T>) -> CliResult<(Duration, T)> {
    let mut best = Duration::MAX;
    let mut value = None;
    for _ in 0..reps {
        let start = Instant::now();
        let v = f()?;
        best = best.min(start.elapsed());
        value = Some(v);
    }
    Ok((best, value.expect("reps >= 1")))
}

fn timed_estimate(
    p: &SuiteParams,
    net: &DiffusionNetwork,
    x: f64,
    rows: &mut Vec<Row>,
    name: &str,
) -> CliResult<f64> {
    let source = [highest_degree_source(net)?];
    let cfg = EstimatorConfig::new(p.n, p.m, p.window, p.seed);
    let (wall, est) = time_min(p.reps, || Ok(estimate_influence(net, &source, &cfg)?))?;
    let se = continest::estimator::variance_report(&est).map(|r| r.std_error).ok();
    rows.push(Row::new(&format!("runtime_vs_{name}"), x, wall.as_secs_f64()).wall(wall));
    let mut row = Row::new(&format!("influence_vs_{name}"), x, est.value);
    row.stderr = se;
    rows.push(row);
    Ok(wall.as_secs_f64())
}

/// Estimation time against node count at fixed density.
pub fn scaling_size(p: &SuiteParams) -> CliResult<Vec<Row>> {
    let mut rows = Vec::new();
    let mut points = Vec::new();
    for power in &p.powers {
        let net = p.network(*power, p.density)?;
        let x = net.node_count() as f64;
        let secs = timed_estimate(p, &net, x, &mut rows, "nodes")?;
        rows.push(Row::new("edges_vs_nodes", x, net.edge_count() as f64));
        points.push((x, secs));
        log::info(format_args!("scaling-size: {} nodes took {secs:.3} s", net.node_count()));
    }
    if points.len() >= 2 {
        rows.push(Row::new("runtime_loglog_slope", f64::NAN, loglog_slope(&points)));
    }
    Ok(rows)
}

/// Estimation time against edge density at fixed node count.
pub fn scaling_density(p: &SuiteParams) -> CliResult<Vec<Row>> {
    let mut rows = Vec::new();
    for d in &p.densities {
        let net = p.network(p.power, *d)?;
        let secs = timed_estimate(p, &net, *d, &mut rows, "density")?;
        rows.push(Row::new("edges_vs_density", *d, net.edge_count() as f64));
        log::info(format_args!(
            "scaling-density: {} edges took {secs:.3} s",
            net.edge_count()
        ));
    }
    Ok(rows)
}

/// Maximization time and selected-set influence against the budget.
pub fn sources(p: &SuiteParams) -> CliResult<Vec<Row>> {
    let net = p.network(p.power, p.density)?;
    if p.max_budget > net.node_count() {
        return Err(invalid(format!(
            "--max-budget {} exceeds the {} nodes of the network",
            p.max_budget,
            net.node_count()
        )));
    }
    let cfg = EstimatorConfig::new(p.n, p.m, p.window, p.seed);
    let start = Instant::now();
    let bank = LabelBank::build(&net, &cfg)?;
    let build = start.elapsed();
    let mut rows = Vec::new();
    for budget in 1..=p.max_budget {
        let (wall, res) = time_min(p.reps, || Ok(greedy_on_bank(&bank, budget, true)))?;
        let total = build + wall;
        rows.push(Row::new("runtime_vs_budget", budget as f64, total.as_secs_f64()).wall(total));
        let k = budget - 1;
        rows.push(
            Row::new("influence_vs_budget", budget as f64, res.prefix_estimates[k])
                .stderr(res.prefix_std_errors[k]),
        );
    }
    // sanity: the oracle value of the final selection
    let res = greedy_on_bank(&bank, p.max_budget, true);
    let truth = naive_influence(
        &net,
        &res.selected,
        p.window,
        p.truth_samples.min(10_000),
        p.seed.wrapping_add(TRUTH_SEED_OFFSET),
    )?;
    rows.push(
        Row::new("naive_at_max_budget", p.max_budget as f64, truth.value).stderr(truth.std_error()),
    );
    Ok(rows)
}

pub fn run_suite(suite: Suite, p: &SuiteParams) -> CliResult<Vec<Row>> {
    match suite {
        Suite::Accuracy => accuracy(p),
        Suite::ScalingSize => scaling_size(p),
        Suite::ScalingDensity => scaling_density(p),
        Suite::Sources => sources(p),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn cmd_benchmark(a: &BenchmarkArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let p = SuiteParams::from_args(a)?;
    let estimate = p.estimated_seconds(a.suite);
    if estimate > p.max_seconds {
        return Err(invalid(format!(
            "estimated run time {estimate:.0} s exceeds --max-seconds {}; \
             shrink the network or sample counts, or raise the limit",
            p.max_seconds
        )));
    }
    log::info(format_args!("benchmark: estimated {estimate:.1} s"));
    let start = Instant::now();
    let rows = run_suite(a.suite, &p)?;
    manifest.timing("suite", start.elapsed());
    manifest.seed = Some(a.seed);
    manifest.config("gen_seed", a.gen_seed);
    manifest.config("estimated_seconds", format!("{estimate:.1}"));

    let mut out = CsvOut::create(&a.out)?;
    out.row(&["series", "x", "y", "stderr", "wall_ms"])?;
    for r in &rows {
        // wall_ms is only filled on request, except where timing is the measurement
        let wall = if a.record_timing || r.is_timing() {
            r.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default()
        } else {
            String::new()
        };
        let x = if r.x.is_nan() { String::new() } else { fmt_f64(r.x) };
        out.row(&[r.series.clone(), x, fmt_f64(r.y), fmt_opt(r.stderr), wall])?;
    }
    out.finish()?;
    crate::commands::finish(manifest, &a.out)
}
