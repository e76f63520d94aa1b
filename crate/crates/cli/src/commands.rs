use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use continest::cascade::{empirical_influence, mae, CascadeSet};
use continest::estimator::{estimate_influence, variance_report, EstimatorConfig};
use continest::graph::{DiffusionNetwork, NodeId};
use continest::maximize::{greedy_on_bank, LabelBank};
use continest::netgen::{generate, KroneckerSpec, Preset};
use continest::oracle::naive_influence;

use crate::args::{
    Cli, Command, EstimateArgs, EvalCascadesArgs, GenerateArgs, MaximizeArgs,
    Method, ReplayArgs,
};
use crate::bench;
use crate::error::{invalid, CliResult};
use crate::manifest::RunManifest;
use crate::output::{fmt_f64, CsvOut};

/// Flags whose values are paths, made absolute before they go into a manifest.
const PATH_FLAGS: &[&str] = &["--graph", "--cascades", "--out", "--sources"];

/// Largest label bank, in bytes, that `maximize` and `eval-cascades` build.
pub const MAX_BANK_BYTES: usize = 2 << 30;

/// Argument vector for the manifest: no program name, no `--threads`, and
/// absolute paths so the run can be replayed from anywhere.
pub fn manifest_args(argv: &[String], cwd: &Path) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut iter = argv.iter().skip(1).peekable();
    let absolutize = |flag: &str, v: &str| -> String {
        let p = Path::new(v);
        let is_path = flag != "--sources" || p.exists();
        if is_path && p.is_relative() {
            cwd.join(p).display().to_string()
        } else {
            v.to_string()
        }
    };
    while let Some(a) = iter.next() {
        if a == "--threads" {
            iter.next();
            continue;
        }
        if a.starts_with("--threads=") {
            continue;
        }
        if let Some((flag, v)) = a.split_once('=') {
            if PATH_FLAGS.contains(&flag) {
                out.push(format!("{flag}={}", absolutize(flag, v)));
                continue;
            }
        }
        out.push(a.clone());
        if PATH_FLAGS.contains(&a.as_str()) {
            if let Some(v) = iter.next() {
                out.push(absolutize(a, v));
            }
        }
    }
    out
}

/// Parses `argv` (program name first) and runs it.
pub fn run_from_args(argv: &[String]) -> CliResult<()> {
    let cli = Cli::try_parse_from(argv).map_err(|e| invalid(e.to_string()))?;
    run(cli, argv)
}

pub fn run(cli: Cli, argv: &[String]) -> CliResult<()> {
    if cli.threads == Some(0) {
        return Err(invalid("--threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building thread pool")?;
    let cwd = std::env::current_dir().context("reading working directory")?;
    let mut manifest = RunManifest::new(cli.command.name(), manifest_args(argv, &cwd));
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(a, &mut manifest),
        Command::Estimate(a) => cmd_estimate(a, &mut manifest),
        Command::Maximize(a) => cmd_maximize(a, &mut manifest),
        Command::EvalCascades(a) => cmd_eval_cascades(a, &mut manifest),
        Command::Benchmark(a) => bench::cmd_benchmark(a, &mut manifest),
        Command::Replay(a) => cmd_replay(a, cli.threads),
    })
}

fn load_graph(path: &Path) -> CliResult<DiffusionNetwork> {
    Ok(DiffusionNetwork::load(path)?)
}

/// `--sources` is either a comma-separated id list or a file of ids.
pub fn parse_sources(spec: &str, net: &DiffusionNetwork) -> CliResult<Vec<NodeId>> {
    let text = if Path::new(spec).is_file() {
        fs::read_to_string(spec).with_context(|| format!("reading {spec}"))?
    } else {
        spec.to_string()
    };
    let ids = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<u32>()
                .map(NodeId)
                .map_err(|_| invalid(format!("bad source id `{t}`")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if ids.is_empty() {
        return Err(invalid("no source ids given"));
    }
    if let Some(bad) = ids.iter().find(|v| !net.contains(**v)) {
        return Err(invalid(format!(
            "source {bad} is not a node of the {}-node network",
            net.node_count()
        )));
    }
    Ok(ids)
}

fn check_bank_size(nodes: usize, n: usize, m: usize) -> CliResult<()> {
    let bytes = nodes.saturating_mul(n).saturating_mul(m).saturating_mul(8);
    if bytes > MAX_BANK_BYTES {
        return Err(invalid(format!(
            "{nodes} nodes x n={n} x m={m} needs {:.1} GiB of least labels (limit {:.1} GiB); \
             lower n or m",
            bytes as f64 / (1u64 << 30) as f64,
            MAX_BANK_BYTES as f64 / (1u64 << 30) as f64
        )));
    }
    Ok(())
}

pub(crate) fn finish(manifest: &RunManifest, out: &Path) -> CliResult<()> {
    manifest.write_for(out)?;
    Ok(())
}

pub fn cmd_generate(a: &GenerateArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let preset: Preset = a.preset.parse()?;
    let spec = KroneckerSpec {
        param_range: (a.param_low, a.param_high),
        ..KroneckerSpec::new(preset, a.power, a.density, a.seed)
    };
    let start = Instant::now();
    let net = generate(&spec)?;
    manifest.timing("generate", start.elapsed());
    net.save(&a.out)?;
    manifest.seed = Some(a.seed);
    manifest.config("preset", &a.preset);
    manifest.config("nodes", net.node_count());
    manifest.config("edges", net.edge_count());
    log::info(format_args!(
        "wrote {} ({} nodes, {} edges)",
        a.out.display(),
        net.node_count(),
        net.edge_count()
    ));
    finish(manifest, &a.out)
}

pub fn cmd_estimate(a: &EstimateArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let net = load_graph(&a.graph)?;
    let sources = parse_sources(&a.sources, &net)?;
    let cfg = EstimatorConfig::new(a.n, a.m, a.window, a.seed);
    let start = Instant::now();
    let (value, stderr, m_col) = match a.method {
        Method::Continest => {
            cfg.validate()?;
            let est = estimate_influence(&net, &sources, &cfg)?;
            let se = if a.n >= 2 {
                fmt_f64(variance_report(&est)?.std_error)
            } else {
                String::new()
            };
            if est.out_of_range() {
                log::info(format_args!(
                    "estimate {} lies outside [|A|, |V|] = [{}, {}] through estimator noise",
                    est.value,
                    est.sources.len(),
                    net.node_count()
                ));
            }
            (est.value, se, a.m.to_string())
        }
        Method::Naive => {
            let est = naive_influence(&net, &sources, a.window, a.n, a.seed)?;
            (est.value, fmt_f64(est.std_error()), String::new())
        }
    };
    let elapsed = start.elapsed();
    manifest.timing("estimate", elapsed);
    manifest.seed = Some(a.seed);
    manifest.config("method", format!("{:?}", a.method).to_lowercase());
    manifest.config("nodes", net.node_count());
    manifest.config("edges", net.edge_count());

    let source_set = sources
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let wall = if a.record_timing {
        format!("{:.3}", elapsed.as_secs_f64() * 1e3)
    } else {
        String::new()
    };
    let mut out = CsvOut::create(&a.out)?;
    out.row(&["source_set", "T", "n", "m", "estimate", "stderr", "wall_ms"])?;
    out.row(&[
        &source_set,
        &fmt_f64(a.window),
        &a.n.to_string(),
        &m_col,
        &fmt_f64(value),
        &stderr,
        &wall,
    ])?;
    out.finish()?;
    log::info(format_args!("estimate {value} written to {}", a.out.display()));
    finish(manifest, &a.out)
}

pub fn cmd_maximize(a: &MaximizeArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let net = load_graph(&a.graph)?;
    if a.budget == 0 || a.budget > net.node_count() {
        return Err(invalid(format!(
            "budget must be in 1..={}, got {}",
            net.node_count(),
            a.budget
        )));
    }
    let cfg = EstimatorConfig::new(a.n, a.m, a.window, a.seed);
    cfg.validate()?;
    check_bank_size(net.node_count(), a.n, a.m)?;
    let start = Instant::now();
    let bank = LabelBank::build(&net, &cfg)?;
    manifest.timing("sketches", start.elapsed());
    let start = Instant::now();
    let res = greedy_on_bank(&bank, a.budget, !a.eager);
    manifest.timing("greedy", start.elapsed());
    manifest.seed = Some(a.seed);
    manifest.config("lazy", !a.eager);
    manifest.config("evaluations", res.evaluations);

    let mut out = CsvOut::create(&a.out)?;
    out.row(&["rank", "node", "marginal_gain", "cumulative_estimate"])?;
    for (i, node) in res.selected.iter().enumerate() {
        out.row(&[
            &(i + 1).to_string(),
            &node.to_string(),
            &fmt_f64(res.gain_trace[i]),
            &fmt_f64(res.prefix_estimates[i]),
        ])?;
    }
    out.finish()?;
    finish(manifest, &a.out)
}

pub fn cmd_eval_cascades(a: &EvalCascadesArgs, manifest: &mut RunManifest) -> CliResult<()> {
    let net = load_graph(&a.graph)?;
    let cascades = CascadeSet::load(&a.cascades, Some(net.node_count()))?;
    let cfg = EstimatorConfig::new(a.n, a.m, a.window, a.seed);
    cfg.validate()?;
    check_bank_size(net.node_count(), a.n, a.m)?;

    let splits: Vec<(u64, CascadeSet)> = match a.train_fraction {
        Some(f) => (0..a.repeats)
            .map(|r| cascades.split(f, a.seed, r).map(|(_, test)| (r, test)))
            .collect::<continest::Result<_>>()?,
        None => vec![(0, cascades)],
    };
    let start = Instant::now();
    let bank = LabelBank::build(&net, &cfg)?;
    manifest.timing("sketches", start.elapsed());
    manifest.seed = Some(a.seed);

    let mut out = CsvOut::create(&a.out)?;
    out.row(&["repeat", "node", "truth", "estimate", "abs_error"])?;
    for (repeat, test) in &splits {
        let mut truths = std::collections::BTreeMap::new();
        let mut estimates = std::collections::BTreeMap::new();
        for u in test.sources() {
            let truth = empirical_influence(test, u, a.window);
            if !truth.has_data {
                continue;
            }
            let est = bank.estimate(&[u]);
            truths.insert(u, truth.count as f64);
            estimates.insert(u, est);
            out.row(&[
                &repeat.to_string(),
                &u.to_string(),
                &truth.count.to_string(),
                &fmt_f64(est),
                &fmt_f64((est - truth.count as f64).abs()),
            ])?;
        }
        if truths.is_empty() {
            log::info(format_args!("repeat {repeat}: no cascades in the test split"));
            continue;
        }
        let score = mae(&estimates, &truths)?;
        manifest.config(&format!("mae.repeat{repeat}"), fmt_f64(score));
        log::info(format_args!("repeat {repeat}: MAE {score} over {} sources", truths.len()));
    }
    out.finish()?;
    finish(manifest, &a.out)
}

/// Replaces the value of `--out` in a recorded argument vector.
fn override_out(args: &mut [String], out: &Path) {
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--out" && i + 1 < args.len() {
            args[i + 1] = out.display().to_string();
            i += 1;
        } else if args[i].starts_with("--out=") {
            args[i] = format!("--out={}", out.display());
        }
        i += 1;
    }
}

pub fn cmd_replay(a: &ReplayArgs, threads: Option<usize>) -> CliResult<()> {
    let recorded = RunManifest::load(&a.manifest).map_err(|e| invalid(format!("{e:#}")))?;
    if recorded.command == "replay" {
        return Err(invalid("cannot replay a replay manifest"));
    }
    let mut args = recorded.args.clone();
    if let Some(out) = &a.out {
        let out = if out.is_relative() {
            std::env::current_dir()?.join(out)
        } else {
            out.clone()
        };
        override_out(&mut args, &out);
    }
    let mut argv = vec!["continest".to_string()];
    if let Some(t) = threads {
        argv.push(format!("--threads={t}"));
    }
    argv.extend(args);
    let cli = Cli::try_parse_from(&argv).map_err(|e| invalid(e.to_string()))?;
    if let Command::Replay(_) = cli.command {
        return Err(invalid("cannot replay a replay manifest"));
    }
    run(cli, &argv)
}

pub(crate) mod log {
    use std::fmt::Arguments;

    /// Line-oriented progress on stderr.
    pub fn info(args: Arguments<'_>) {
        eprintln!("continest: {args}");
    }
}
