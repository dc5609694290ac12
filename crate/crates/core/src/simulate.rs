//! Synthetic piecewise-constant signals and the Monte-Carlo harness.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::distributions::{derive_seed, sample_standard_normal, seeded_rng};
use crate::error::{FusionError, Result};
use crate::graph::UGraph;
use crate::model::{adj_mse, mse, ChainData, McmcConfig, PriorConfig, PriorFamily};
use crate::recovery::wb_metrics;
use crate::sampler::run_chain;

/// Number of blocks in every built-in layout.
pub const N_BLOCKS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Even,
    Uneven,
    VeryUneven,
}

impl SignalKind {
    pub fn label(&self) -> &'static str {
        match self {
            SignalKind::Even => "even",
            SignalKind::Uneven => "uneven",
            SignalKind::VeryUneven => "very_uneven",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "even" => Ok(SignalKind::Even),
            "uneven" => Ok(SignalKind::Uneven),
            "very_uneven" => Ok(SignalKind::VeryUneven),
            other => Err(FusionError::Config(format!("unknown signal kind '{other}'"))),
        }
    }

    /// Short-block length as a fraction of n (5 and 2 at n = 100).
    fn short_fraction(&self) -> Option<f64> {
        match self {
            SignalKind::Even => None,
            SignalKind::Uneven => Some(0.05),
            SignalKind::VeryUneven => Some(0.02),
        }
    }
}

impl std::fmt::Display for SignalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Spreads `total` over `count` slots as evenly as possible, larger slots first.
fn split_evenly(total: usize, count: usize) -> Vec<usize> {
    let base = total / count;
    let extra = total % count;
    (0..count).map(|i| base + usize::from(i < extra)).collect()
}

/// Block lengths of a layout. Uneven layouts alternate long and short
/// blocks, starting with a long one.
pub fn block_lengths(kind: SignalKind, n: usize) -> Result<Vec<usize>> {
    if n < N_BLOCKS {
        return Err(FusionError::Config(format!(
            "n = {n} is too small for {N_BLOCKS} blocks"
        )));
    }
    let Some(frac) = kind.short_fraction() else {
        return Ok(split_evenly(n, N_BLOCKS));
    };
    let half = N_BLOCKS / 2;
    let short = ((frac * n as f64).round() as usize).max(1);
    let long_total = n
        .checked_sub(half * short)
        .filter(|&t| t >= half * short)
        .ok_or_else(|| FusionError::Config(format!("n = {n} is too small for a {kind} layout")))?;
    let longs = split_evenly(long_total, half);
    Ok(longs.into_iter().flat_map(|l| [l, short]).collect())
}

/// Default levels: block b sits at amplitude · (b mod 5).
pub fn default_levels(amplitude: f64) -> Vec<f64> {
    (0..N_BLOCKS).map(|b| amplitude * (b % 5) as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub n: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
}

impl SignalSpec {
    pub fn new(kind: SignalKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            levels: default_levels(1.0),
            seed,
        }
    }

    pub fn block_lengths(&self) -> Result<Vec<usize>> {
        block_lengths(self.kind, self.n)
    }

    /// Number of true jumps.
    pub fn s0(&self) -> usize {
        self.levels.len().saturating_sub(1)
    }
}

/// Concatenates `levels[b]` repeated `lengths[b]` times.
pub fn piecewise_constant(lengths: &[usize], levels: &[f64], n: usize) -> Result<Vec<f64>> {
    if lengths.len() != levels.len() {
        return Err(FusionError::Config(format!(
            "{} block lengths but {} levels",
            lengths.len(),
            levels.len()
        )));
    }
    let total: usize = lengths.iter().sum();
    if total != n {
        return Err(FusionError::Config(format!(
            "block lengths sum to {total}, expected {n}"
        )));
    }
    if lengths.contains(&0) {
        return Err(FusionError::Config("block lengths must be positive".into()));
    }
    if levels.windows(2).any(|w| w[0] == w[1]) {
        return Err(FusionError::Config("adjacent blocks must have distinct levels".into()));
    }
    Ok(lengths
        .iter()
        .zip(levels)
        .flat_map(|(&len, &level)| std::iter::repeat_n(level, len))
        .collect())
}

pub fn make_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    piecewise_constant(&spec.block_lengths()?, &spec.levels, spec.n)
}

/// y = θ₀ + N(0, σ²) noise, deterministic in `seed`.
pub fn add_noise(theta0: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(FusionError::domain(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut rng = seeded_rng(seed);
    Ok(theta0
        .iter()
        .map(|t| t + sigma * sample_standard_normal(&mut rng))
        .collect())
}

/// Metrics of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepMetrics {
    pub mse: f64,
    pub adj_mse: f64,
    pub w: f64,
    pub b: f64,
}

/// All replications of one (σ, family) scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub kind: SignalKind,
    pub sigma: f64,
    pub family: PriorFamily,
    pub reps: Vec<RepMetrics>,
}

/// One line of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub kind: SignalKind,
    pub sigma: f64,
    pub family: PriorFamily,
    pub metric: &'static str,
    pub mean: f64,
    /// `None` with a single replication.
    pub se: Option<f64>,
}

fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, Some((var / k).sqrt()))
}

impl ScenarioResult {
    pub fn summary(&self) -> Vec<SummaryRow> {
        let metrics: [(&'static str, fn(&RepMetrics) -> f64); 4] = [
            ("mse", |m| m.mse),
            ("adj_mse", |m| m.adj_mse),
            ("w", |m| m.w),
            ("b", |m| m.b),
        ];
        metrics
            .iter()
            .map(|(name, get)| {
                let values: Vec<f64> = self.reps.iter().map(get).collect();
                let (mean, se) = mean_se(&values);
                SummaryRow {
                    kind: self.kind,
                    sigma: self.sigma,
                    family: self.family,
                    metric: name,
                    mean,
                    se,
                }
            })
            .collect()
    }

    pub fn metric_mean(&self, metric: &str) -> Option<f64> {
        self.summary().into_iter().find(|r| r.metric == metric).map(|r| r.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub scenarios: Vec<ScenarioResult>,
}

impl SummaryTable {
    pub fn rows(&self) -> Vec<SummaryRow> {
        self.scenarios.iter().flat_map(|s| s.summary()).collect()
    }

    pub fn find(&self, sigma: f64, family: PriorFamily) -> Option<&ScenarioResult> {
        self.scenarios
            .iter()
            .find(|s| s.sigma == sigma && s.family == family)
    }

    /// CSV with columns kind, sigma, family, metric, mean, se ("NA" when undefined).
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["kind", "sigma", "family", "metric", "mean", "se"])?;
        for r in self.rows() {
            w.write_record([
                r.kind.label().to_string(),
                r.sigma.to_string(),
                r.family.label().to_string(),
                r.metric.to_string(),
                r.mean.to_string(),
                r.se.map_or_else(|| "NA".to_string(), |s| s.to_string()),
            ])?;
        }
        w.flush()
    }
}

/// Seed of the noise draw for replication `rep` of sigma index `s`.
pub fn noise_seed(master: u64, sigma_index: usize, reps: usize, rep: usize) -> u64 {
    derive_seed(master, 1 + (sigma_index * reps + rep) as u64)
}

/// Seed of the chain run for a family given the replication's noise seed.
pub fn chain_seed(noise_seed: u64, family_index: usize) -> u64 {
    derive_seed(noise_seed, 1 + family_index as u64)
}

fn run_replication(
    truth: &[f64],
    sigma: f64,
    noise: u64,
    prior: &PriorConfig,
    mcmc: &McmcConfig,
) -> Result<RepMetrics> {
    let y = add_noise(truth, sigma, noise)?;
    let data = ChainData::new(y)?;
    let samples = run_chain(&data, prior, mcmc)?;
    let est = samples.posterior_mean()?;
    let wb = wb_metrics(&est, truth)?;
    Ok(RepMetrics {
        mse: mse(&est, truth)?,
        adj_mse: adj_mse(&est, truth)?,
        w: wb.w,
        b: wb.b,
    })
}

/// Runs every (σ, family) scenario for `reps` replications. Every family in
/// a replication sees the same noisy data. `spec.seed` is the master seed;
/// `mcmc.seed` is ignored in favour of derived per-run seeds.
pub fn monte_carlo(
    spec: &SignalSpec,
    sigmas: &[f64],
    families: &[PriorConfig],
    reps: usize,
    mcmc: &McmcConfig,
) -> Result<SummaryTable> {
    if reps == 0 {
        return Err(FusionError::Config("reps must be positive".into()));
    }
    if sigmas.is_empty() || families.is_empty() {
        return Err(FusionError::Config("need at least one sigma and one family".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(FusionError::Config(format!("sigma must be positive, got {s}")));
    }
    families.iter().try_for_each(PriorConfig::validate)?;
    mcmc.validate()?;
    let truth = make_signal(spec)?;

    let jobs: Vec<(usize, usize, usize)> = (0..sigmas.len())
        .flat_map(|s| (0..families.len()).flat_map(move |f| (0..reps).map(move |r| (s, f, r))))
        .collect();
    let results: Vec<RepMetrics> = jobs
        .par_iter()
        .map(|&(s, f, r)| {
            let noise = noise_seed(spec.seed, s, reps, r);
            let run = McmcConfig {
                seed: chain_seed(noise, f),
                ..*mcmc
            };
            run_replication(&truth, sigmas[s], noise, &families[f], &run).map_err(|e| {
                FusionError::Replication {
                    replication: r,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<_>>()?;

    let scenarios = results
        .chunks(reps)
        .enumerate()
        .map(|(idx, chunk)| {
            let (s, f) = (idx / families.len(), idx % families.len());
            ScenarioResult {
                kind: spec.kind,
                sigma: sigmas[s],
                family: families[f].family,
                reps: chunk.to_vec(),
            }
        })
        .collect();
    Ok(SummaryTable { scenarios })
}

/// Graph with planted communities and a community-constant signal.
#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: UGraph,
    /// Community of each vertex, 0-based.
    pub community: Vec<usize>,
    /// Level k + 1 on community k.
    pub truth: Vec<f64>,
}

/// Each community is a random recursive tree plus `intra_extra` extra
/// edges spread over communities; communities are joined by a random tree
/// and then by further cross edges up to `inter_edges` in total. Vertex ids
/// are randomly permuted so that ids carry no community information.
pub fn planted_community_graph(
    sizes: &[usize],
    intra_extra: usize,
    inter_edges: usize,
    seed: u64,
) -> Result<PlantedGraph> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(FusionError::Config("community sizes must be positive".into()));
    }
    if inter_edges + 1 < sizes.len() {
        return Err(FusionError::Config(format!(
            "{} communities need at least {} inter-community edges",
            sizes.len(),
            sizes.len() - 1
        )));
    }
    let n: usize = sizes.iter().sum();
    let mut rng = seeded_rng(seed);
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(&mut rng);
    let mut members = Vec::with_capacity(sizes.len());
    let mut community = vec![0; n];
    let mut start = 0;
    for (c, &size) in sizes.iter().enumerate() {
        let m: Vec<usize> = label[start..start + size].to_vec();
        m.iter().for_each(|&v| community[v] = c);
        members.push(m);
        start += size;
    }

    let mut seen = std::collections::BTreeSet::new();
    let mut edges = Vec::new();
    let mut add = |a: usize, b: usize, edges: &mut Vec<(usize, usize)>| {
        a != b && seen.insert((a.min(b), a.max(b))) && {
            edges.push((a, b));
            true
        }
    };
    for m in &members {
        for i in 1..m.len() {
            let j = rng.random_range(0..i);
            add(m[i], m[j], &mut edges);
        }
    }
    let capacity: usize = sizes.iter().map(|s| s * (s - 1) / 2 - (s - 1)).sum();
    let mut added = 0;
    while added < intra_extra.min(capacity) {
        let v = rng.random_range(0..n);
        let m = &members[community[v]];
        let u = m[rng.random_range(0..m.len())];
        if add(u, v, &mut edges) {
            added += 1;
        }
    }
    let pick = |c: usize, rng: &mut crate::distributions::FusionRng| {
        members[c][rng.random_range(0..members[c].len())]
    };
    for c in 1..sizes.len() {
        let other = rng.random_range(0..c);
        let (a, b) = (pick(c, &mut rng), pick(other, &mut rng));
        add(a, b, &mut edges);
    }
    let mut inter = sizes.len() - 1;
    let max_inter = (n * n - sizes.iter().map(|s| s * s).sum::<usize>()) / 2;
    while inter < inter_edges.min(max_inter) && sizes.len() > 1 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if community[a] != community[b] && add(a, b, &mut edges) {
            inter += 1;
        }
    }
    let truth = community.iter().map(|&c| (c + 1) as f64).collect();
    Ok(PlantedGraph {
        graph: UGraph::new(n, &edges)?,
        community,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_layout_jumps() {
        let theta = make_signal(&SignalSpec::new(SignalKind::Even, 100, 0)).unwrap();
        let jumps: Vec<usize> = (1..100).filter(|&j| theta[j] != theta[j - 1]).collect();
        // 0-based j is the 1-based index j + 1
        assert_eq!(jumps, (1..10).map(|b| 10 * b).collect::<Vec<_>>());
    }

    #[test]
    fn uneven_layouts() {
        let u = block_lengths(SignalKind::Uneven, 100).unwrap();
        assert_eq!(u.len(), 10);
        assert_eq!(*u.iter().min().unwrap(), 5);
        assert_eq!(u.iter().sum::<usize>(), 100);
        let v = block_lengths(SignalKind::VeryUneven, 100).unwrap();
        assert_eq!(v, vec![18, 2, 18, 2, 18, 2, 18, 2, 18, 2]);
    }

    #[test]
    fn layouts_cover_n() {
        for n in [10, 37, 100, 1000] {
            for kind in [SignalKind::Even, SignalKind::Uneven, SignalKind::VeryUneven] {
                let l = block_lengths(kind, n).unwrap();
                assert_eq!(l.iter().sum::<usize>(), n, "{kind} n={n}");
                assert!(l.iter().all(|&x| x > 0));
            }
        }
        assert!(block_lengths(SignalKind::Even, 9).is_err());
    }

    #[test]
    fn piecewise_constant_checks_lengths() {
        assert!(piecewise_constant(&[2, 2], &[0.0, 1.0], 5).is_err());
        assert!(piecewise_constant(&[2, 3], &[1.0, 1.0], 5).is_err());
        assert_eq!(
            piecewise_constant(&[2, 1], &[0.0, 3.0], 3).unwrap(),
            vec![0.0, 0.0, 3.0]
        );
    }

    #[test]
    fn zero_noise_returns_truth() {
        let t = vec![1.0, 2.0, 3.0];
        assert_eq!(add_noise(&t, 0.0, 4).unwrap(), t);
    }

    #[test]
    fn noise_sd_matches() {
        let t = vec![0.0; 100_000];
        let y = add_noise(&t, 0.3, 11).unwrap();
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (y.len() - 1) as f64).sqrt();
        assert!((sd / 0.3 - 1.0).abs() < 0.01, "sd {sd}");
    }

    #[test]
    fn different_seeds_different_noise() {
        let t = vec![0.0; 10];
        assert_ne!(add_noise(&t, 1.0, 1).unwrap(), add_noise(&t, 1.0, 2).unwrap());
        assert_eq!(add_noise(&t, 1.0, 1).unwrap(), add_noise(&t, 1.0, 1).unwrap());
    }

    #[test]
    fn mean_se_single_value() {
        assert_eq!(mean_se(&[2.0]), (2.0, None));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_graph_shape() {
        let pg = planted_community_graph(&[5, 7, 3], 4, 5, 1).unwrap();
        let g = &pg.graph;
        assert_eq!(g.n_vertices(), 15);
        assert_eq!(g.n_edges(), 12 + 4 + 5);
        assert!(g.is_connected());
        let cross = g
            .edges()
            .iter()
            .filter(|&&(a, b)| pg.community[a] != pg.community[b])
            .count();
        assert_eq!(cross, 5);
        assert_eq!(pg.truth.iter().filter(|&&t| t == 2.0).count(), 7);
    }

    #[test]
    fn kind_parse_roundtrip() {
        for k in [SignalKind::Even, SignalKind::Uneven, SignalKind::VeryUneven] {
            assert_eq!(SignalKind::parse(k.label()).unwrap(), k);
        }
        assert_eq!(SignalKind::parse("very-uneven").unwrap(), SignalKind::VeryUneven);
        assert!(SignalKind::parse("odd").is_err());
    }
}
