//! Advisory convergence diagnostics.

use serde::Serialize;

use crate::model::PosteriorSamples;

/// Split-chain potential scale reduction of one trace; `None` when the trace
/// is too short or both halves are constant.
pub fn split_rhat(trace: &[f64]) -> Option<f64> {
    let half = trace.len() / 2;
    if half < 2 {
        return None;
    }
    let halves = [&trace[..half], &trace[trace.len() - half..]];
    let m = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / m).collect();
    let vars: Vec<f64> = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (m - 1.0))
        .collect();
    let w = (vars[0] + vars[1]) / 2.0;
    let grand = (means[0] + means[1]) / 2.0;
    let b = m * ((means[0] - grand).powi(2) + (means[1] - grand).powi(2));
    if !(w > 0.0) {
        return None;
    }
    let var_plus = (m - 1.0) / m * w + b / m;
    Some((var_plus / w).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhatEntry {
    pub parameter: String,
    pub rhat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub threshold: f64,
    pub entries: Vec<RhatEntry>,
    /// Every defined R̂ is below the threshold.
    pub acceptable: bool,
}

/// Split-R̂ on σ² and on θ at positions n/4, n/2 and 3n/4 (1-based labels).
pub fn convergence_report(samples: &PosteriorSamples, threshold: f64) -> ConvergenceReport {
    let n = samples.n();
    let mut entries = vec![RhatEntry {
        parameter: "sigma_sq".into(),
        rhat: split_rhat(&samples.sigma_draws),
    }];
    let mut picks = vec![n / 4, n / 2, (3 * n) / 4];
    picks.dedup();
    for j in picks.into_iter().filter(|&j| j < n) {
        entries.push(RhatEntry {
            parameter: format!("theta[{}]", j + 1),
            rhat: split_rhat(&samples.column(j)),
        });
    }
    let acceptable = entries.iter().all(|e| e.rhat.is_none_or(|r| r < threshold));
    ConvergenceReport {
        threshold,
        entries,
        acceptable,
    }
}
