use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hsfusion::diagnostics::convergence_report;
use hsfusion::distributions::{derive_seed, hs_thickness, prior_mass_outside, HsBoundConfig};
use hsfusion::graph::{choose_roots, read_edge_list, root_seed, run_graph_fusion};
use hsfusion::ingest::{
    interpolate_missing, log_transform, read_draws_csv, read_estimate_csv, read_signal_csv,
    window_average, write_draws_csv, write_estimate_csv, ColumnSpec,
};
use hsfusion::model::{posterior_summary, ChainData, PriorConfig, SampleMeta};
use hsfusion::recovery::{false_positives_per_draw, practical_threshold, wb_metrics};
use hsfusion::sampler::run_chain;
use hsfusion::simulate::{default_levels, monte_carlo, SignalSpec};
use hsfusion::FusionError;

use super::args::{
    CheckLemmasArgs, Command, DenoiseChainArgs, DenoiseGraphArgs, SignalInputArgs, SimulateArgs,
    ThresholdArgs,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Advisory split-R̂ threshold reported in manifests.
const RHAT_THRESHOLD: f64 = 1.1;
/// Seed stream for random root selection.
const ROOT_STREAM: u64 = 0x726f_6f74;

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: Command,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
    pub details: Value,
}

struct Outcome {
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
    details: Value,
}

pub fn execute(command: &Command) -> anyhow::Result<()> {
    if let Command::Replay(r) = command {
        let text = std::fs::read_to_string(&r.manifest)
            .map_err(|e| FusionError::Io { path: r.manifest.clone(), source: e })?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| FusionError::Config(format!("{}: {e}", r.manifest.display())))?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(FusionError::Config(format!(
                "manifest schema {} is not supported (expected {SCHEMA_VERSION})",
                manifest.schema_version
            ))
            .into());
        }
        let mut inner = manifest.command;
        if matches!(inner, Command::Replay(_)) {
            bail!(FusionError::Config("a manifest cannot record a replay".into()));
        }
        if let Some(dir) = &r.out_dir {
            inner.redirect_outputs(dir);
        }
        return execute(&inner);
    }

    let start = Instant::now();
    info!("running {}", command.label());
    let command = with_absolute_paths(command)?;
    let outcome = match &command {
        Command::DenoiseChain(a) => denoise_chain(a)?,
        Command::DenoiseGraph(a) => denoise_graph(a)?,
        Command::Simulate(a) => simulate(a)?,
        Command::Threshold(a) => threshold(a)?,
        Command::CheckLemmas(a) => check_lemmas(a)?,
        Command::Replay(_) => unreachable!("handled above"),
    };
    let manifest_path = output_args(&command).manifest_path();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        seed: outcome.seed,
        outputs: outcome.outputs,
        wall_time_secs: start.elapsed().as_secs_f64(),
        details: outcome.details,
    };
    write_json(&manifest_path, &manifest)?;
    info!("manifest written to {}", manifest_path.display());
    Ok(())
}

fn output_args(command: &Command) -> &super::args::OutputArgs {
    match command {
        Command::DenoiseChain(a) => &a.out,
        Command::DenoiseGraph(a) => &a.out,
        Command::Simulate(a) => &a.out,
        Command::Threshold(a) => &a.out,
        Command::CheckLemmas(a) => &a.out,
        Command::Replay(_) => unreachable!("replay has no outputs of its own"),
    }
}

fn canonical(path: &mut PathBuf) -> Result<(), FusionError> {
    *path = std::fs::canonicalize(&*path).map_err(|e| FusionError::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(())
}

/// Output locations must be writable before any work starts.
fn absolute_output(path: &mut PathBuf) -> Result<(), FusionError> {
    let abs = std::path::absolute(&*path).map_err(|e| FusionError::Io {
        path: path.clone(),
        source: e,
    })?;
    let parent = abs.parent().unwrap_or(Path::new("/"));
    if !parent.is_dir() {
        return Err(FusionError::Io {
            path: abs,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
        });
    }
    *path = abs;
    Ok(())
}

/// Copy of the command with inputs canonicalised and outputs made absolute,
/// so that the manifest replays from any working directory.
fn with_absolute_paths(command: &Command) -> Result<Command, FusionError> {
    let mut c = command.clone();
    let (out, draws) = match &mut c {
        Command::DenoiseChain(a) => {
            canonical(&mut a.signal.input)?;
            (&mut a.out, a.draws.as_mut())
        }
        Command::DenoiseGraph(a) => {
            canonical(&mut a.signal.input)?;
            canonical(&mut a.edges)?;
            (&mut a.out, a.draws.as_mut())
        }
        Command::Simulate(a) => (&mut a.out, None),
        Command::Threshold(a) => {
            canonical(&mut a.estimate)?;
            if let Some(t) = a.truth.as_mut() {
                canonical(t)?;
            }
            if let Some(d) = a.draws.as_mut() {
                canonical(d)?;
            }
            (&mut a.out, None)
        }
        Command::CheckLemmas(a) => (&mut a.out, None),
        Command::Replay(_) => return Ok(c),
    };
    absolute_output(&mut out.output)?;
    let mut manifest = out.manifest_path();
    absolute_output(&mut manifest)?;
    out.manifest = Some(manifest);
    if let Some(d) = draws {
        absolute_output(d)?;
    }
    Ok(c)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let file = File::create(path).map_err(|e| FusionError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| FusionError::Io { path: path.to_path_buf(), source: e.into() })?;
    std::io::Write::write_all(&mut w, b"\n")
        .and_then(|_| std::io::Write::flush(&mut w))
        .map_err(|e| FusionError::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

fn load_signal(a: &SignalInputArgs) -> Result<Vec<f64>, FusionError> {
    let mut ts = read_signal_csv(&a.input, &a.value_column(), a.time_column().as_ref())?;
    let missing = ts.missing_count();
    if missing > 0 && !a.interpolate {
        return Err(FusionError::Config(format!(
            "{} has {missing} missing values; pass --interpolate to fill them",
            a.input.display()
        )));
    }
    if a.interpolate {
        ts = interpolate_missing(&ts, a.extend_ends)?;
    }
    if let Some(w) = a.window {
        ts = window_average(&ts, w, a.allow_partial)?;
    }
    if a.log {
        ts = log_transform(&ts)?;
    }
    ts.complete_values()
}

fn check_level(level: f64) -> Result<(), FusionError> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(FusionError::Config(format!("--level must lie in (0, 1), got {level}")))
    }
}

fn resolved_prior(prior: &PriorConfig, n: usize) -> Value {
    json!({
        "family": prior.family,
        "family_scale": prior.resolved_family_scale(n),
        "a_sigma": prior.a_sigma,
        "b_sigma": prior.b_sigma,
        "lambda_first": prior.lambda_first,
        "t_df": prior.t_df,
    })
}

fn denoise_chain(a: &DenoiseChainArgs) -> anyhow::Result<Outcome> {
    let prior = a.prior.config();
    let mcmc = a.mcmc.config();
    prior.validate()?;
    mcmc.validate()?;
    check_level(a.level)?;
    let y = load_signal(&a.signal)?;
    let data = ChainData::new(y)?;

    let samples = run_chain(&data, &prior, &mcmc).context("chain sampler failed")?;
    let summary = posterior_summary(&samples, a.level)?;

    let mut outputs = vec![a.out.output.clone()];
    write_estimate_csv(&a.out.output, &data.y, &summary)?;
    if let Some(d) = &a.draws {
        write_draws_csv(d, &samples)?;
        outputs.push(d.clone());
    }
    Ok(Outcome {
        seed: Some(mcmc.seed),
        outputs,
        details: json!({
            "n": data.len(),
            "kept_rows": samples.rows(),
            "prior": resolved_prior(&prior, data.len()),
            "convergence": convergence_report(&samples, RHAT_THRESHOLD),
        }),
    })
}

fn denoise_graph(a: &DenoiseGraphArgs) -> anyhow::Result<Outcome> {
    let prior = a.prior.config();
    let mcmc = a.mcmc.config();
    prior.validate()?;
    mcmc.validate()?;
    check_level(a.level)?;
    let graph = read_edge_list(&a.edges, a.n_vertices)?;
    let y = load_signal(&a.signal)?;
    let n = graph.n_vertices();
    if y.len() != n {
        return Err(FusionError::Config(format!(
            "signal has {} values but the graph has {n} vertices",
            y.len()
        ))
        .into());
    }
    let roots = match &a.root_ids {
        Some(ids) => ids
            .iter()
            .map(|&r| {
                if r == 0 || r > n {
                    Err(FusionError::Config(format!("root {r} is not a vertex in 1..={n}")))
                } else {
                    Ok(r - 1)
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => choose_roots(n, a.roots, derive_seed(mcmc.seed, ROOT_STREAM))?,
    };
    let post = run_graph_fusion(&graph, &y, &roots, &prior, &mcmc).context("graph sampler failed")?;
    let summary = posterior_summary(&post.pooled, a.level)?;

    let mut outputs = vec![a.out.output.clone()];
    write_estimate_csv(&a.out.output, &y, &summary)?;
    if let Some(d) = &a.draws {
        write_draws_csv(d, &post.pooled)?;
        outputs.push(d.clone());
    }
    let per_root: Vec<Value> = post
        .per_root
        .iter()
        .enumerate()
        .map(|(i, s)| {
            json!({
                "root": roots[i] + 1,
                "seed": root_seed(mcmc.seed, i),
                "kept_rows": s.rows(),
                "convergence": convergence_report(s, RHAT_THRESHOLD),
            })
        })
        .collect();
    Ok(Outcome {
        seed: Some(mcmc.seed),
        outputs,
        details: json!({
            "n": n,
            "edges": graph.n_edges(),
            "roots": roots.iter().map(|r| r + 1).collect::<Vec<_>>(),
            "pooled_rows": post.pooled.rows(),
            "prior": resolved_prior(&prior, n),
            "per_root": per_root,
        }),
    })
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<Outcome> {
    let mcmc = a.mcmc.config();
    if !(a.amplitude > 0.0 && a.amplitude.is_finite()) {
        bail!(FusionError::Config(format!("--amplitude must be positive, got {}", a.amplitude)));
    }
    let spec = SignalSpec {
        kind: a.kind,
        n: a.n,
        levels: default_levels(a.amplitude),
        seed: mcmc.seed,
    };
    spec.block_lengths()?;
    let families: Vec<PriorConfig> = a.families.iter().map(|&f| a.prior.config_for(f)).collect();
    let table = monte_carlo(&spec, &a.sigma, &families, a.reps, &mcmc)?;

    let file = File::create(&a.out.output).map_err(|e| FusionError::Io {
        path: a.out.output.clone(),
        source: e,
    })?;
    table
        .write_csv(BufWriter::new(file))
        .map_err(|e| FusionError::Io { path: a.out.output.clone(), source: e })?;
    Ok(Outcome {
        seed: Some(mcmc.seed),
        outputs: vec![a.out.output.clone()],
        details: json!({
            "block_lengths": spec.block_lengths()?,
            "levels": spec.levels,
            "scenarios": table.scenarios.len(),
        }),
    })
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn threshold(a: &ThresholdArgs) -> anyhow::Result<Outcome> {
    if a.s0.is_some() && (a.draws.is_none() || a.truth.is_none()) {
        bail!(FusionError::Config("--s0 needs both --draws and --truth".into()));
    }
    if !(a.threshold_constant > 0.0) || !(a.k > 0.0) {
        bail!(FusionError::Config("--threshold-constant and --k must be positive".into()));
    }
    let (y, est) = read_estimate_csv(&a.estimate)?;
    let truth = match &a.truth {
        Some(p) => {
            let t = read_signal_csv(p, &ColumnSpec::parse(&a.truth_column), None)?.complete_values()?;
            if t.len() != est.len() {
                bail!(FusionError::Config(format!(
                    "truth has {} values but the estimate has {}",
                    t.len(),
                    est.len()
                )));
            }
            Some(t)
        }
        None => None,
    };
    let draws = match &a.draws {
        Some(p) => {
            let meta = SampleMeta {
                seed: 0,
                prior: PriorConfig::default(),
                mcmc: Default::default(),
                root: None,
            };
            let d = read_draws_csv(p, meta)?;
            if d.n() != est.len() {
                bail!(FusionError::Config(format!(
                    "draws have {} components but the estimate has {}",
                    d.n(),
                    est.len()
                )));
            }
            Some(d)
        }
        None => None,
    };

    let pairs = practical_threshold(&est, &y)?;
    let n = est.len();
    let segments: Vec<[usize; 2]> = pairs
        .adjacent_segments()
        .into_iter()
        .map(|r| [r.start + 1, r.end])
        .collect();
    let mut report = json!({
        "n": n,
        "fused_pairs": pairs.fused_pair_count(),
        "total_pairs": n * (n - 1) / 2,
        "segments": segments,
    });
    if let Some(t) = &truth {
        let wb = wb_metrics(&est, t)?;
        report["w"] = json!(wb.w);
        report["b"] = finite_or_null(wb.b);
        report["w_below_b"] = json!(wb.w < wb.b);
    }
    if let (Some(s0), Some(d), Some(t)) = (a.s0, &draws, &truth) {
        let counts = false_positives_per_draw(d, t, s0, a.threshold_constant, a.sigma_mode.into())?;
        let bound = a.k * s0 as f64;
        let within = counts.iter().filter(|&&c| c as f64 <= bound).count();
        report["false_positives"] = json!({
            "s0": s0,
            "k": a.k,
            "draws": counts.len(),
            "mean": counts.iter().sum::<usize>() as f64 / counts.len() as f64,
            "max": counts.iter().max(),
            "fraction_within_bound": within as f64 / counts.len() as f64,
        });
    }
    write_json(&a.out.output, &report)?;
    Ok(Outcome {
        seed: None,
        outputs: vec![a.out.output.clone()],
        details: Value::Null,
    })
}

fn check_lemmas(a: &CheckLemmasArgs) -> anyhow::Result<Outcome> {
    if a.n.iter().chain(&a.thickness_n).any(|&n| n < 2) {
        bail!(FusionError::Config("every n must be at least 2".into()));
    }
    if a.s0 == 0 {
        bail!(FusionError::Config("--s0 must be positive".into()));
    }
    let mut mass = Vec::new();
    for &n in &a.n {
        let nf = n as f64;
        let a_n = HsBoundConfig::window(n, a.s0);
        for &b in &a.b {
            let tau = a.tau.unwrap_or_else(|| nf.powf(-(2.0 + b)));
            let bound = prior_mass_outside(a_n, tau)?;
            for &bp in &a.b_prime {
                let limit = nf.powf(-bp);
                let pass = bound <= limit;
                report(format_args!(
                    "prior-mass n={n} b={b} b'={bp}: bound {bound:.4e} vs n^-b' {limit:.4e} {}",
                    if pass { "PASS" } else { "FAIL" }
                ));
                mass.push(json!({
                    "n": n, "b": b, "b_prime": bp, "tau": tau, "a_n": a_n,
                    "bound": bound, "limit": limit, "pass": pass,
                }));
            }
        }
    }
    let mut thick = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &n in &a.thickness_n {
        let nf = n as f64;
        let value = hs_thickness(nf, nf.powi(-3), 1.0)?;
        let ratio = value / nf.ln();
        let pass = ratio <= a.max_ratio;
        report(format_args!(
            "thickness n={n}: value {value:.4} ratio to log n {ratio:.4} {}",
            if pass { "PASS" } else { "FAIL" }
        ));
        xs.push(nf.ln());
        ys.push(value);
        thick.push(json!({ "n": n, "value": value, "ratio": ratio, "pass": pass }));
    }
    let slope = if xs.len() >= 2 {
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        finite_or_null(sxy / sxx)
    } else {
        Value::Null
    };
    let report = json!({
        "prior_mass": mass,
        "thickness": thick,
        "thickness_slope_on_log_n": slope,
    });
    write_json(&a.out.output, &report)?;
    Ok(Outcome {
        seed: None,
        outputs: vec![a.out.output.clone()],
        details: Value::Null,
    })
}

// A closed pipe (e.g. `| head`) should not abort the command before its report is written.
fn report(line: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}
