//! WAIC, simulation evaluation metrics, and MCMC convergence summaries.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcmc::PosteriorDraws;

/// WAIC decomposition: `waic = -2 (lppd - p_waic)`.
#[derive(Debug, Clone, Serialize)]
pub struct WaicResult {
    pub waic: f64,
    pub lppd: f64,
    /// Effective number of parameters.
    pub p_waic: f64,
    #[serde(skip)]
    pub pointwise: Vec<PointContribution>,
}

/// Per-point contribution to the WAIC decomposition.
#[derive(Debug, Clone, Copy)]
pub struct PointContribution {
    pub lppd: f64,
    pub p_waic: f64,
}

/// WAIC from a draws-by-points pointwise log-likelihood matrix (row-major).
///
/// `lppd_j = log mean_s exp(l_sj)` is evaluated by log-sum-exp;
/// `p_waic_j = var_s(l_sj)` uses the S-1 divisor.
pub fn waic(draws: usize, points: usize, loglik: &[f64]) -> Result<WaicResult> {
    if draws < 2 {
        return Err(Error::InvalidArgument(
            "WAIC needs at least 2 draws (pointwise variance is undefined)".into(),
        ));
    }
    if points == 0 {
        return Err(Error::InvalidArgument("WAIC needs at least 1 point".into()));
    }
    if loglik.len() != draws * points {
        return Err(Error::LengthMismatch {
            expected: draws * points,
            got: loglik.len(),
        });
    }
    if loglik.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite pointwise log-likelihood".into(),
        ));
    }
    let mut pointwise = Vec::with_capacity(points);
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for j in 0..points {
        let col = || (0..draws).map(|s| loglik[s * points + j]);
        let max = col().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = col().map(|l| (l - max).exp()).sum();
        let lppd_j = max + (sum_exp / draws as f64).ln();
        let mean: f64 = col().sum::<f64>() / draws as f64;
        let var: f64 = col().map(|l| (l - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        pointwise.push(PointContribution {
            lppd: lppd_j,
            p_waic: var,
        });
        lppd += lppd_j;
        p_waic += var;
    }
    Ok(WaicResult {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
        pointwise,
    })
}

/// Joint-model WAIC over both proportion groups: the two groups' pointwise
/// contributions are summed, giving 2n points per fitted ICE model.
pub fn waic_joint(group1: &PosteriorDraws, group2: &PosteriorDraws) -> Result<WaicResult> {
    if group1.retained != group2.retained {
        return Err(Error::DrawMismatch(format!(
            "retained draws {} vs {}",
            group1.retained, group2.retained
        )));
    }
    let a = waic(group1.retained, group1.n_units, &group1.loglik)?;
    let b = waic(group2.retained, group2.n_units, &group2.loglik)?;
    let mut pointwise = a.pointwise;
    pointwise.extend(b.pointwise);
    let lppd = a.lppd + b.lppd;
    let p_waic = a.p_waic + b.p_waic;
    Ok(WaicResult {
        waic: -2.0 * (lppd - p_waic),
        lppd,
        p_waic,
        pointwise,
    })
}

/// One simulation replicate's per-county estimates, intervals, and truths.
#[derive(Debug, Clone)]
pub struct ReplicateEval {
    pub estimates: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub truths: Vec<f64>,
}

/// Pooled accuracy and interval-adequacy metrics over replicates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvalSummary {
    pub rmse: f64,
    /// Fraction of (replicate, county) pairs whose interval covers the truth.
    pub coverage: f64,
    pub mean_width: f64,
}

/// Evaluation metrics keyed the way the simulation tables are laid out.
#[derive(Debug, Clone, Serialize)]
pub struct EvalMetrics {
    pub scenario: u8,
    pub model: String,
    pub population: u64,
    #[serde(flatten)]
    pub summary: EvalSummary,
}

/// Pool replicates into RMSE, coverage, and mean interval width:
/// `rmse = sqrt(mean (estimate - truth)^2)` over every (replicate, county)
/// pair; coverage counts `truth in [lower, upper]` inclusively.
pub fn evaluate_replicates(replicates: &[ReplicateEval]) -> Result<EvalSummary> {
    if replicates.is_empty() {
        return Err(Error::InvalidArgument("no replicates to evaluate".into()));
    }
    let counties = replicates[0].estimates.len();
    if counties == 0 {
        return Err(Error::InvalidArgument("replicates are empty".into()));
    }
    let mut sq = 0.0;
    let mut covered = 0usize;
    let mut width = 0.0;
    for rep in replicates {
        for field in [&rep.lower, &rep.upper, &rep.truths, &rep.estimates] {
            if field.len() != counties {
                return Err(Error::LengthMismatch {
                    expected: counties,
                    got: field.len(),
                });
            }
        }
        for i in 0..counties {
            sq += (rep.estimates[i] - rep.truths[i]).powi(2);
            if rep.truths[i] >= rep.lower[i] && rep.truths[i] <= rep.upper[i] {
                covered += 1;
            }
            width += rep.upper[i] - rep.lower[i];
        }
    }
    let total = (replicates.len() * counties) as f64;
    Ok(EvalSummary {
        rmse: (sq / total).sqrt(),
        coverage: covered as f64 / total,
        mean_width: width / total,
    })
}

/// Effective sample size from the autocorrelation time, estimated with
/// Geyer's initial monotone positive sequence.
pub fn ess(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean: f64 = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return n as f64;
    }
    let autocorr = |t: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - t {
            s += (x[i] - mean) * (x[i + t] - mean);
        }
        s / n as f64 / c0
    };
    let mut sum_pairs = 0.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let pair = autocorr(t) + autocorr(t + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum_pairs += pair;
        prev = pair;
        t += 2;
    }
    let tau = (2.0 * sum_pairs - 1.0).max(1e-8);
    n as f64 / tau
}

/// Split-R-hat over one or more chains: each chain is halved, then the
/// standard between/within variance ratio is evaluated across the halves.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(chains.len() * 2);
    let len = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if len < 2 {
        return f64::NAN;
    }
    for chain in chains {
        halves.push(&chain[..len]);
        halves.push(&chain[chain.len() - len..]);
    }
    let m = halves.len() as f64;
    let n = len as f64;
    let chain_means: Vec<f64> = halves
        .iter()
        .map(|h| h.iter().sum::<f64>() / n)
        .collect();
    let grand = chain_means.iter().sum::<f64>() / m;
    let b = n / (m - 1.0)
        * chain_means
            .iter()
            .map(|cm| (cm - grand).powi(2))
            .sum::<f64>();
    let w = halves
        .iter()
        .zip(&chain_means)
        .map(|(h, cm)| h.iter().map(|v| (v - cm).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

/// Convergence diagnostics for one scalar parameter.
#[derive(Debug, Clone, Serialize)]
pub struct ParamDiagnostic {
    pub parameter: String,
    pub ess: f64,
    pub split_rhat: f64,
}

/// Advisory per-parameter ESS and split-R-hat over one or more chains of the
/// same model. Requires at least 100 retained draws per chain.
pub fn convergence_summary(draws: &[PosteriorDraws]) -> Result<Vec<ParamDiagnostic>> {
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no chains supplied".into()));
    }
    if let Some(short) = draws.iter().find(|d| d.retained < 100) {
        return Err(Error::InvalidArgument(format!(
            "need >= 100 retained draws per chain, got {}",
            short.retained
        )));
    }
    let mut out = Vec::new();
    let mut push = |name: String, traces: Vec<Vec<f64>>| {
        let total_ess: f64 = traces.iter().map(|t| ess(t)).sum();
        let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
        out.push(ParamDiagnostic {
            parameter: name,
            ess: total_ess,
            split_rhat: split_rhat(&refs),
        });
    };
    let first = &draws[0];
    for j in 0..first.q {
        push(
            format!("beta[{j}]"),
            draws.iter().map(|d| d.beta_trace(j)).collect(),
        );
    }
    push(
        "sigma2_v".into(),
        draws.iter().map(|d| d.sigma2_v.clone()).collect(),
    );
    if first.sigma2_u.is_some() {
        push(
            "sigma2_u".into(),
            draws
                .iter()
                .map(|d| d.sigma2_u.clone().unwrap_or_default())
                .collect(),
        );
    }
    if first.rho.is_some() {
        push(
            "rho".into(),
            draws
                .iter()
                .map(|d| d.rho.clone().unwrap_or_default())
                .collect(),
        );
    }
    Ok(out)
}
