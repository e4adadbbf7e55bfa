//! Observed-data model, prior specification, and likelihood primitives
//! shared by every estimation approach.
//!
//! Each county carries two disjoint counts over one denominator: the
//! high-income White count and the low-income Black count among the
//! `n_total` residents with known income. All Bayesian approaches model each
//! group as `Y_i ~ Binomial(N_i, p_i)` with a logit link.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

/// Per-county counts: the two extreme groups share one denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountyObservation {
    /// External identifier (e.g. FIPS code).
    pub unit_id: String,
    /// Human-readable name; may be empty.
    pub name: String,
    /// High-income White count (the privileged extreme).
    pub y_group1: u64,
    /// Low-income Black count (the deprived extreme).
    pub y_group2: u64,
    /// Residents with known income.
    pub n_total: u64,
}

impl CountyObservation {
    pub fn new(
        unit_id: impl Into<String>,
        name: impl Into<String>,
        y_group1: u64,
        y_group2: u64,
        n_total: u64,
    ) -> Result<Self> {
        let obs = CountyObservation {
            unit_id: unit_id.into(),
            name: name.into(),
            y_group1,
            y_group2,
            n_total,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Error::InvalidObservation {
            unit: self.unit_id.clone(),
            reason,
        };
        if self.n_total == 0 {
            return Err(fail("n_total must be >= 1".into()));
        }
        if self.y_group1 > self.n_total {
            return Err(fail(format!(
                "y_group1 = {} exceeds n_total = {}",
                self.y_group1, self.n_total
            )));
        }
        if self.y_group2 > self.n_total {
            return Err(fail(format!(
                "y_group2 = {} exceeds n_total = {}",
                self.y_group2, self.n_total
            )));
        }
        // The groups are disjoint subsets of one population; anything else
        // would push the ICE outside [-1, 1].
        if self.y_group1 + self.y_group2 > self.n_total {
            return Err(fail(format!(
                "y_group1 + y_group2 = {} exceeds n_total = {}",
                self.y_group1 + self.y_group2,
                self.n_total
            )));
        }
        Ok(())
    }
}

/// Read observations from a CSV with header
/// `fips,name,n_total,y_white_high,y_black_low`.
pub fn read_observations_csv(path: impl AsRef<Path>) -> Result<Vec<CountyObservation>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: display.clone(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| parse_err(1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let expected = ["fips", "name", "n_total", "y_white_high", "y_black_low"];
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(parse_err(
            1,
            format!("expected header `{}`, got `{}`", expected.join(","), got.join(",")),
        ));
    }
    let mut out = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        if record.len() != 5 {
            return Err(parse_err(line, format!("expected 5 fields, got {}", record.len())));
        }
        let count = |field: usize, name: &str| -> Result<u64> {
            record[field]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not a count", &record[field])))
        };
        let obs = CountyObservation {
            unit_id: record[0].trim().to_string(),
            name: record[1].trim().to_string(),
            n_total: count(2, "n_total")?,
            y_group1: count(3, "y_white_high")?,
            y_group2: count(4, "y_black_low")?,
        };
        obs.validate().map_err(|e| parse_err(line, e.to_string()))?;
        out.push(obs);
    }
    if out.is_empty() {
        return Err(parse_err(2, "no observation rows".into()));
    }
    Ok(out)
}

/// Write observations in the canonical CSV layout.
pub fn write_observations_csv(path: impl AsRef<Path>, obs: &[CountyObservation]) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    })?;
    let io_err = |e: csv::Error| Error::Parse {
        path: display.clone(),
        line: 0,
        msg: e.to_string(),
    };
    w.write_record(["fips", "name", "n_total", "y_white_high", "y_black_low"])
        .map_err(io_err)?;
    for o in obs {
        w.write_record([
            o.unit_id.as_str(),
            o.name.as_str(),
            &o.n_total.to_string(),
            &o.y_group1.to_string(),
            &o.y_group2.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Estimation approach (M1-M6 when paired with a cluster count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Bootstrap,
    Icar,
    Bym,
    Leroux,
    Local,
}

impl Approach {
    pub fn is_bayesian(&self) -> bool {
        !matches!(self, Approach::Bootstrap)
    }

    /// Whether the linear predictor carries an unstructured effect `u`.
    pub fn has_unstructured(&self) -> bool {
        matches!(self, Approach::Bym | Approach::Local)
    }

    /// Whether the structured effect uses the intrinsic CAR conditional
    /// (as opposed to the Leroux conditional).
    pub fn uses_icar_structure(&self) -> bool {
        matches!(self, Approach::Icar | Approach::Bym | Approach::Local)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Approach::Bootstrap => "bootstrap",
            Approach::Icar => "icar",
            Approach::Bym => "bym",
            Approach::Leroux => "leroux",
            Approach::Local => "local",
        }
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(Approach::Bootstrap),
            "icar" => Ok(Approach::Icar),
            "bym" => Ok(Approach::Bym),
            "leroux" => Ok(Approach::Leroux),
            "local" => Ok(Approach::Local),
            other => Err(Error::InvalidSpec(format!("unknown approach `{other}`"))),
        }
    }
}

/// MCMC run settings. The seed is mandatory; there is no wall-clock default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            iterations: 50_000,
            burn_in: 20_000,
            thin: 1,
            seed: 0,
        }
    }
}

/// Full estimation specification for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub approach: Approach,
    /// Cluster count `q` for the locally smooth model; 1 reduces to a
    /// global intercept.
    pub clusters: usize,
    /// Inverse-Gamma shape `a` shared by every variance prior.
    pub prior_shape: f64,
    /// Inverse-Gamma rate `b` shared by every variance prior.
    pub prior_rate: f64,
    pub mcmc: McmcSettings,
    /// Bootstrap replicate count `B`.
    pub bootstrap_replicates: usize,
    /// Hold `sigma2_v` fixed at this value instead of Gibbs-sampling it.
    #[serde(default)]
    pub clamp_sigma2_v: Option<f64>,
    /// Hold `sigma2_u` fixed at this value instead of Gibbs-sampling it.
    #[serde(default)]
    pub clamp_sigma2_u: Option<f64>,
    /// Robbins-Monro proposal adaptation (frozen at burn-in end).
    #[serde(default = "default_true")]
    pub adapt: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            approach: Approach::Bym,
            clusters: 1,
            prior_shape: 1.0,
            prior_rate: 0.01,
            mcmc: McmcSettings::default(),
            bootstrap_replicates: 10_000,
            clamp_sigma2_v: None,
            clamp_sigma2_u: None,
            adapt: true,
        }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.mcmc.iterations <= self.mcmc.burn_in {
            return fail(format!(
                "iterations ({}) must exceed burn_in ({})",
                self.mcmc.iterations, self.mcmc.burn_in
            ));
        }
        if self.mcmc.thin == 0 {
            return fail("thin must be >= 1".into());
        }
        if self.bootstrap_replicates == 0 {
            return fail("bootstrap replicate count B must be >= 1".into());
        }
        if self.clusters == 0 {
            return fail("cluster count q must be >= 1".into());
        }
        if !(self.prior_shape > 0.0) || !(self.prior_rate > 0.0) {
            return fail(format!(
                "inverse-gamma prior requires a > 0 and b > 0, got ({}, {})",
                self.prior_shape, self.prior_rate
            ));
        }
        for clamp in [self.clamp_sigma2_v, self.clamp_sigma2_u].into_iter().flatten() {
            if !(clamp > 0.0) {
                return fail(format!("clamped variance must be > 0, got {clamp}"));
            }
        }
        Ok(())
    }

    /// Retained draw count implied by the MCMC settings.
    pub fn retained(&self) -> usize {
        (self.mcmc.iterations - self.mcmc.burn_in) / self.mcmc.thin
    }

    /// Effective cluster count: 1 for global models, `clusters` for local.
    pub fn effective_clusters(&self) -> usize {
        if self.approach == Approach::Local {
            self.clusters
        } else {
            1
        }
    }
}

/// Parameter state for one proportion group's chain.
///
/// `beta` holds the ordered intercepts (a single entry for global models),
/// `z` the 0-based cluster indicator per unit (all zero for global models),
/// `v` the structured spatial effect, and `u` the unstructured effect where
/// the model carries one.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupState {
    pub beta: Vec<f64>,
    pub z: Vec<usize>,
    pub v: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub sigma2_v: f64,
    pub sigma2_u: Option<f64>,
    pub rho: Option<f64>,
}

impl GroupState {
    pub fn n_units(&self) -> usize {
        self.v.len()
    }

    /// Check the structural invariants: strictly increasing `beta`,
    /// indicator range, positive variances, `rho` in [0, 1].
    pub fn check(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(msg));
        if self.beta.is_empty() {
            return fail("beta must have at least one entry".into());
        }
        if self.beta.windows(2).any(|w| w[0] >= w[1]) {
            return fail("beta must be strictly increasing".into());
        }
        if self.z.len() != self.v.len() {
            return fail("z and v lengths differ".into());
        }
        if self.z.iter().any(|&z| z >= self.beta.len()) {
            return fail("cluster indicator out of range".into());
        }
        if let Some(u) = &self.u {
            if u.len() != self.v.len() {
                return fail("u and v lengths differ".into());
            }
        }
        if !(self.sigma2_v > 0.0) {
            return fail(format!("sigma2_v must be > 0, got {}", self.sigma2_v));
        }
        if let Some(s) = self.sigma2_u {
            if !(s > 0.0) {
                return fail(format!("sigma2_u must be > 0, got {s}"));
            }
        }
        if let Some(r) = self.rho {
            if !(0.0..=1.0).contains(&r) {
                return fail(format!("rho must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }
}

/// Log-odds of `p`; requires `p` strictly inside (0, 1).
pub fn logit(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "logit requires p in (0, 1), got {p}"
        )));
    }
    Ok(p.ln() - (-p).ln_1p())
}

/// Inverse logit, stable across the full f64 range.
pub fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln C(n, y)` via log-gamma.
pub fn ln_choose(n: u64, y: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(y as f64 + 1.0) - ln_gamma((n - y) as f64 + 1.0)
}

/// Binomial log-likelihood on the logit scale, without the binomial
/// coefficient: `y eta - n ln(1 + e^eta)`. Finite for every finite `eta`,
/// including data at the y = 0 and y = n boundaries.
#[inline]
pub fn binomial_loglik_eta(y: f64, n: f64, eta: f64) -> f64 {
    y * eta - n * log1p_exp(eta)
}

/// Pointwise binomial log-likelihood including the binomial coefficient, so
/// downstream WAIC values are absolute:
/// `ln C(n_i, y_i) + y_i ln p_i + (n_i - y_i) ln(1 - p_i)`.
pub fn binomial_loglik_pointwise(y: &[u64], n: &[u64], p: &[f64]) -> Result<Vec<f64>> {
    if y.len() != n.len() || y.len() != p.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            got: n.len().min(p.len()),
        });
    }
    let mut out = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        if y[i] > n[i] {
            return Err(Error::InvalidArgument(format!(
                "y = {} exceeds n = {} at index {i}",
                y[i], n[i]
            )));
        }
        if !(p[i] > 0.0 && p[i] < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "p must lie in (0, 1), got {} at index {i}",
                p[i]
            )));
        }
        // ln(1 - p) via log1p keeps y = 0 and y = n rows stable.
        out.push(
            ln_choose(n[i], y[i])
                + y[i] as f64 * p[i].ln()
                + (n[i] - y[i]) as f64 * (-p[i]).ln_1p(),
        );
    }
    Ok(out)
}

/// Per-unit linear predictor `eta_i = beta[z_i] + v_i (+ u_i)`.
pub fn linear_predictor(state: &GroupState, graph: &AdjacencyGraph) -> Result<Vec<f64>> {
    if state.v.len() != graph.n() {
        return Err(Error::LengthMismatch {
            expected: graph.n(),
            got: state.v.len(),
        });
    }
    state.check()?;
    let mut eta = Vec::with_capacity(graph.n());
    for i in 0..graph.n() {
        let mut e = state.beta[state.z[i]] + state.v[i];
        if let Some(u) = &state.u {
            e += u[i];
        }
        eta.push(e);
    }
    Ok(eta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn logit_domain_and_symmetry() {
        assert!(logit(0.0).is_err());
        assert!(logit(1.0).is_err());
        assert_abs_diff_eq!(inv_logit(0.0), 0.5);
        // -1.72 and -0.4 are the simulation means; their inverse logits round
        // to the nominal 0.15 and 0.4 proportions.
        assert!((inv_logit(-1.72) - 0.15).abs() < 0.005);
        assert!((inv_logit(-0.4) - 0.40).abs() < 0.005);
        assert_abs_diff_eq!(inv_logit(-0.4), 0.40131, epsilon = 1e-5);
    }

    #[test]
    fn roundtrip_on_log_spaced_grid_respects_conditioning_bound() {
        // Beyond |x| ~ 11 the roundtrip error is dominated by representing p
        // next to the boundary: |dx| <= eps/2 / min(p, 1 - p).
        for k in 0..60 {
            let magnitude = 1e-12f64 * (30.0f64 / 1e-12).powf(k as f64 / 59.0);
            for x in [magnitude, -magnitude] {
                let back = logit(inv_logit(x)).unwrap();
                let bound = 1e-12f64.max(3.0 * f64::EPSILON * (1.0 + x.abs().exp()) / 2.0);
                assert!(
                    (back - x).abs() <= bound,
                    "x = {x}: roundtrip {back}, bound {bound}"
                );
            }
        }
    }

    #[test]
    fn inv_logit_is_stable_for_large_arguments() {
        for x in [-700.0, -50.0, 50.0, 700.0] {
            let p = inv_logit(x);
            assert!(p.is_finite());
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(inv_logit(-700.0) > 0.0);
    }

    proptest! {
        #[test]
        fn logit_inv_logit_roundtrip(x in -11.0f64..11.0) {
            let p = inv_logit(x);
            let back = logit(p).unwrap();
            prop_assert!((back - x).abs() < 1e-12 * x.abs().max(1.0));
        }

        #[test]
        fn inv_logit_logit_roundtrip(p in 1e-14f64..1.0) {
            prop_assume!(p < 1.0 - 1e-14);
            let back = inv_logit(logit(p).unwrap());
            prop_assert!((back - p).abs() < 1e-12 * p);
        }

        #[test]
        fn observation_validation_matches_invariants(
            y1 in 0u64..2000,
            y2 in 0u64..2000,
            n in 0u64..2000,
        ) {
            let ok = n >= 1 && y1 <= n && y2 <= n && y1 + y2 <= n;
            let built = CountyObservation::new("x", "", y1, y2, n);
            prop_assert_eq!(built.is_ok(), ok);
        }
    }

    #[test]
    fn loglik_small_cases() {
        let l = binomial_loglik_pointwise(&[0], &[1], &[0.5]).unwrap();
        assert_abs_diff_eq!(l[0], 0.5f64.ln(), epsilon = 1e-14);
        let l = binomial_loglik_pointwise(&[1], &[2], &[0.5]).unwrap();
        assert_abs_diff_eq!(l[0], 0.5f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn loglik_matches_exact_factorial_oracle() {
        // ln C(100, 30) summed term by term, plus exact powers.
        let mut ln_c = 0.0f64;
        for k in 1..=30u64 {
            ln_c += ((100 - 30 + k) as f64).ln() - (k as f64).ln();
        }
        let want = ln_c + 30.0 * 0.3f64.ln() + 70.0 * 0.7f64.ln();
        let got = binomial_loglik_pointwise(&[30], &[100], &[0.3]).unwrap()[0];
        assert_abs_diff_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn loglik_rejects_bad_input() {
        assert!(binomial_loglik_pointwise(&[3], &[2], &[0.5]).is_err());
        assert!(binomial_loglik_pointwise(&[1], &[2], &[0.0]).is_err());
        assert!(binomial_loglik_pointwise(&[1], &[2], &[1.0]).is_err());
    }

    #[test]
    fn loglik_eta_handles_boundary_counts() {
        for eta in [-40.0, 0.0, 40.0] {
            assert!(binomial_loglik_eta(0.0, 10.0, eta).is_finite());
            assert!(binomial_loglik_eta(10.0, 10.0, eta).is_finite());
        }
    }

    fn toy_graph(n: usize) -> AdjacencyGraph {
        let ids: Vec<String> = (0..n).map(|i| format!("g{i}")).collect();
        let edges: Vec<(String, String)> = (0..n - 1)
            .map(|i| (format!("g{i}"), format!("g{}", i + 1)))
            .collect();
        AdjacencyGraph::build(&edges, &ids).unwrap()
    }

    #[test]
    fn predictor_zero_state_gives_half_probabilities() {
        let g = toy_graph(3);
        let state = GroupState {
            beta: vec![0.0],
            z: vec![0; 3],
            v: vec![0.0; 3],
            u: Some(vec![0.0; 3]),
            sigma2_v: 1.0,
            sigma2_u: Some(1.0),
            rho: None,
        };
        let eta = linear_predictor(&state, &g).unwrap();
        assert!(eta.iter().all(|&e| e == 0.0));
        assert!(eta.iter().all(|&e| inv_logit(e) == 0.5));
    }

    #[test]
    fn predictor_selects_cluster_intercepts() {
        let g = toy_graph(2);
        let state = GroupState {
            beta: vec![-1.0, 1.0],
            z: vec![0, 1],
            v: vec![0.0; 2],
            u: Some(vec![0.0; 2]),
            sigma2_v: 1.0,
            sigma2_u: Some(1.0),
            rho: None,
        };
        assert_eq!(linear_predictor(&state, &g).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn predictor_matches_independent_formula_and_is_linear_in_shifts() {
        let g = toy_graph(7);
        let mut rng = crate::seeds::rng(9);
        let q = 3;
        let beta: Vec<f64> = vec![-1.4, -0.2, 0.9];
        let z: Vec<usize> = (0..7).map(|_| rng.gen_range(0..q)).collect();
        let v: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let state = GroupState {
            beta: beta.clone(),
            z: z.clone(),
            v: v.clone(),
            u: Some(u.clone()),
            sigma2_v: 0.5,
            sigma2_u: Some(0.5),
            rho: None,
        };
        let eta = linear_predictor(&state, &g).unwrap();
        // Duplicate arithmetic, written independently of the implementation.
        for i in 0..7 {
            let by_hand = beta[z[i]] + v[i] + u[i];
            assert_abs_diff_eq!(eta[i], by_hand, epsilon = 0.0);
        }
        let delta = 0.37;
        let mut shifted = state.clone();
        for vi in &mut shifted.v {
            *vi += delta;
        }
        let eta2 = linear_predictor(&shifted, &g).unwrap();
        for i in 0..7 {
            assert_abs_diff_eq!(eta2[i] - eta[i], delta, epsilon = 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = ModelSpec::default();
        assert!(spec.validate().is_ok());
        assert_eq!(spec.mcmc.iterations, 50_000);
        assert_eq!(spec.mcmc.burn_in, 20_000);
        assert_eq!(spec.bootstrap_replicates, 10_000);
        assert_eq!((spec.prior_shape, spec.prior_rate), (1.0, 0.01));
        spec.mcmc.burn_in = spec.mcmc.iterations;
        assert!(spec.validate().is_err());
        spec = ModelSpec::default();
        spec.mcmc.thin = 0;
        assert!(spec.validate().is_err());
        spec = ModelSpec::default();
        spec.clusters = 0;
        assert!(spec.validate().is_err());
        spec = ModelSpec::default();
        spec.prior_rate = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn observations_csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        let obs = vec![
            CountyObservation::new("13001", "Appling", 120, 80, 1000).unwrap(),
            CountyObservation::new("13003", "Atkinson", 0, 0, 1).unwrap(),
        ];
        write_observations_csv(&path, &obs).unwrap();
        let back = read_observations_csv(&path).unwrap();
        assert_eq!(back, obs);

        let bad = dir.path().join("bad.csv");
        std::fs::write(
            &bad,
            "fips,name,n_total,y_white_high,y_black_low\n13001,Appling,100,90,20\n",
        )
        .unwrap();
        let err = read_observations_csv(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") || msg.contains(":2"), "{msg}");
        assert!(msg.contains("13001"), "{msg}");
    }
}
