//! Metropolis-within-Gibbs fits for the binomial-logit spatial models.
//!
//! One sweep updates, in order: (a) each structured effect `v_i` by adaptive
//! random-walk Metropolis against its binomial likelihood times CAR full
//! conditional; (b) each unstructured effect `u_i` likewise; (c) the
//! variances by conjugate inverse-gamma Gibbs draws; (d) for the Leroux
//! model, `rho` by Metropolis on the logit scale including the half
//! log-determinant term; (e) the intercept(s) by random-walk Metropolis,
//! ordered for the locally smooth model; (f) for the locally smooth model,
//! each cluster indicator `z_i` by an exact categorical Gibbs draw; (g) for
//! ICAR-structured models, re-centering of `v` to mean zero per connected
//! component with the shift absorbed into the intercepts.
//!
//! Proposal scales adapt by Robbins-Monro toward 0.44 site-wise acceptance
//! and freeze when burn-in ends. All randomness flows from the caller's RNG,
//! so a (data, spec, seed) triple reproduces draws bit for bit.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::car::StructureEigen;
use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;
use crate::model::{
    binomial_loglik_eta, inv_logit, ln_choose, Approach, CountyObservation, GroupState, ModelSpec,
};
use crate::seeds;

/// Acceptance bookkeeping for one proposal block.
#[derive(Debug, Clone, serde::Serialize)]
pub struct BlockAcceptance {
    pub block: String,
    pub accepted: u64,
    pub proposed: u64,
}

impl BlockAcceptance {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Retained posterior sample for one proportion group, stored columnar.
///
/// Matrix-shaped fields are row-major over `retained x n_units` (or
/// `retained x q` for `beta`).
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub seed: u64,
    pub unit_ids: Vec<String>,
    pub n_units: usize,
    pub retained: usize,
    pub q: usize,
    pub beta: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Option<Vec<f64>>,
    pub z: Option<Vec<u16>>,
    pub sigma2_v: Vec<f64>,
    pub sigma2_u: Option<Vec<f64>>,
    pub rho: Option<Vec<f64>>,
    /// Fitted probabilities, `retained x n_units`.
    pub p: Vec<f64>,
    /// Pointwise log-likelihood (binomial coefficient included).
    pub loglik: Vec<f64>,
    pub acceptance: Vec<BlockAcceptance>,
}

impl PosteriorDraws {
    pub fn p_row(&self, s: usize) -> &[f64] {
        &self.p[s * self.n_units..(s + 1) * self.n_units]
    }

    pub fn loglik_row(&self, s: usize) -> &[f64] {
        &self.loglik[s * self.n_units..(s + 1) * self.n_units]
    }

    pub fn beta_trace(&self, j: usize) -> Vec<f64> {
        (0..self.retained).map(|s| self.beta[s * self.q + j]).collect()
    }

    pub fn v_at(&self, s: usize, i: usize) -> f64 {
        self.v[s * self.n_units + i]
    }
}

/// Draw from Inverse-Gamma(shape, rate) via the reciprocal of a Gamma draw.
///
/// Tail guards keep a pathological draw from propagating infinities through
/// the chain; they sit far outside any plausible posterior mass.
pub fn draw_inverse_gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0)
        .expect("shape > 0")
        .sample(rng);
    (rate / g).clamp(1e-12, 1e12)
}

/// Redraw each cluster indicator from its exact categorical full
/// conditional, proportional to the unit's binomial likelihood under each
/// ordered intercept (the uniform 1/q prior cancels). Other fields are
/// untouched.
pub fn update_cluster_indicators<R: Rng>(
    state: &mut GroupState,
    y: &[u64],
    n: &[u64],
    q: usize,
    rng: &mut R,
) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidSpec("cluster count q must be >= 1".into()));
    }
    if state.beta.len() != q {
        return Err(Error::InvalidSpec(format!(
            "state has {} intercepts but q = {q}",
            state.beta.len()
        )));
    }
    state.check()?;
    let units = state.n_units();
    if y.len() != units || n.len() != units {
        return Err(Error::LengthMismatch {
            expected: units,
            got: y.len().min(n.len()),
        });
    }
    let mut logw = vec![0.0; q];
    for i in 0..units {
        let phi = state.v[i] + state.u.as_ref().map_or(0.0, |u| u[i]);
        let mut max = f64::NEG_INFINITY;
        for (k, b) in state.beta.iter().enumerate() {
            let l = binomial_loglik_eta(y[i] as f64, n[i] as f64, b + phi);
            logw[k] = l;
            if l > max {
                max = l;
            }
        }
        let mut total = 0.0;
        for w in logw.iter_mut() {
            *w = (*w - max).exp();
            total += *w;
        }
        let mut t = rng.gen::<f64>() * total;
        let mut pick = q - 1;
        for (k, w) in logw.iter().enumerate() {
            if t < *w {
                pick = k;
                break;
            }
            t -= *w;
        }
        state.z[i] = pick;
    }
    Ok(())
}

/// One random-walk Metropolis pass over the ordered intercepts under the
/// flat prior constrained to `(beta_{j-1}, beta_{j+1})`; proposals that break
/// the ordering are rejected outright. With q = 1 this is the unconstrained
/// global-intercept update. Returns the per-intercept acceptance flags.
pub fn update_ordered_intercepts<R: Rng>(
    state: &mut GroupState,
    y: &[u64],
    n: &[u64],
    steps: &[f64],
    rng: &mut R,
) -> Result<Vec<bool>> {
    state.check()?;
    let q = state.beta.len();
    if steps.len() != q {
        return Err(Error::LengthMismatch {
            expected: q,
            got: steps.len(),
        });
    }
    let units = state.n_units();
    if y.len() != units || n.len() != units {
        return Err(Error::LengthMismatch {
            expected: units,
            got: y.len().min(n.len()),
        });
    }
    let mut accepted = vec![false; q];
    for j in 0..q {
        let lower = if j == 0 { f64::NEG_INFINITY } else { state.beta[j - 1] };
        let upper = if j + 1 == q { f64::INFINITY } else { state.beta[j + 1] };
        let eps: f64 = rng.sample(StandardNormal);
        let proposal = state.beta[j] + steps[j] * eps;
        // Draw the comparison uniform unconditionally so the RNG stream does
        // not depend on the rejection path.
        let uniform: f64 = rng.gen();
        if proposal <= lower || proposal >= upper {
            continue;
        }
        let mut delta = 0.0;
        for i in 0..units {
            if state.z[i] != j {
                continue;
            }
            let phi = state.v[i] + state.u.as_ref().map_or(0.0, |u| u[i]);
            let (yf, nf) = (y[i] as f64, n[i] as f64);
            delta += binomial_loglik_eta(yf, nf, proposal + phi)
                - binomial_loglik_eta(yf, nf, state.beta[j] + phi);
        }
        if uniform.ln() < delta {
            state.beta[j] = proposal;
            accepted[j] = true;
        }
    }
    Ok(accepted)
}

// ---------------------------------------------------------------------------
// Chain internals
// ---------------------------------------------------------------------------

/// Robbins-Monro adaptation toward 0.44 site-wise acceptance.
struct AdaptiveScales {
    log_step: Vec<f64>,
    updates: Vec<u64>,
    accepted: u64,
    proposed: u64,
    frozen: bool,
}

impl AdaptiveScales {
    fn new(sites: usize, initial: f64) -> Self {
        AdaptiveScales {
            log_step: vec![initial.ln(); sites],
            updates: vec![0; sites],
            accepted: 0,
            proposed: 0,
            frozen: false,
        }
    }

    fn step(&self, site: usize) -> f64 {
        self.log_step[site].exp()
    }

    fn record(&mut self, site: usize, alpha: f64, accepted: bool) {
        self.proposed += 1;
        if accepted {
            self.accepted += 1;
        }
        if self.frozen {
            return;
        }
        self.updates[site] += 1;
        let gamma = ((self.updates[site] + 10) as f64).powf(-0.6);
        self.log_step[site] = (self.log_step[site] + gamma * (alpha - 0.44)).clamp(-12.0, 4.0);
    }

    fn summary(&self, block: &str) -> BlockAcceptance {
        BlockAcceptance {
            block: block.to_string(),
            accepted: self.accepted,
            proposed: self.proposed,
        }
    }
}

struct Chain<'a> {
    y: Vec<f64>,
    n: Vec<f64>,
    y_u: &'a [u64],
    n_u: &'a [u64],
    graph: &'a AdjacencyGraph,
    spec: &'a ModelSpec,
    q: usize,
    state: GroupState,
    components: Vec<usize>,
    component_count: usize,
    icar_rank: usize,
    eigen: Option<StructureEigen>,
    ln_choose: Vec<f64>,
    v_scales: AdaptiveScales,
    u_scales: Option<AdaptiveScales>,
    beta_scales: AdaptiveScales,
    rho_scale: Option<AdaptiveScales>,
}

impl<'a> Chain<'a> {
    fn eta(&self, i: usize) -> f64 {
        self.state.beta[self.state.z[i]]
            + self.state.v[i]
            + self.state.u.as_ref().map_or(0.0, |u| u[i])
    }

    /// Full conditional mean and precision weight of `v_i` given its
    /// neighbors: intrinsic CAR for ICAR/BYM/local, Leroux otherwise.
    fn car_conditional(&self, i: usize) -> (f64, f64) {
        let neigh_sum: f64 = self
            .graph
            .neighbors(i)
            .iter()
            .map(|&j| self.state.v[j])
            .sum();
        let d = self.graph.degree(i) as f64;
        match self.spec.approach {
            Approach::Leroux => {
                let rho = self.state.rho.expect("leroux state has rho");
                let kappa = rho * d + (1.0 - rho);
                (rho * neigh_sum / kappa, kappa)
            }
            _ => (neigh_sum / d, d),
        }
    }

    fn update_v<R: Rng>(&mut self, rng: &mut R) {
        let sigma2 = self.state.sigma2_v;
        for i in 0..self.graph.n() {
            if self.spec.approach.uses_icar_structure() && self.graph.degree(i) == 0 {
                // Singleton component: centering pins v_i at zero.
                continue;
            }
            let (mean, kappa) = self.car_conditional(i);
            let step = self.v_scales.step(i);
            let eps: f64 = rng.sample(StandardNormal);
            let current = self.state.v[i];
            let proposal = current + step * eps;
            let eta = self.eta(i);
            let delta = binomial_loglik_eta(self.y[i], self.n[i], eta + (proposal - current))
                - binomial_loglik_eta(self.y[i], self.n[i], eta)
                - kappa * ((proposal - mean).powi(2) - (current - mean).powi(2)) / (2.0 * sigma2);
            let uniform: f64 = rng.gen();
            let accept = uniform.ln() < delta;
            if accept {
                self.state.v[i] = proposal;
            }
            self.v_scales.record(i, delta.exp().min(1.0), accept);
        }
    }

    fn update_u<R: Rng>(&mut self, rng: &mut R) {
        let Some(scales) = self.u_scales.as_mut() else {
            return;
        };
        let sigma2 = self.state.sigma2_u.expect("model with u has sigma2_u");
        let u = self.state.u.as_mut().expect("model with u");
        for i in 0..self.y.len() {
            let base = self.state.beta[self.state.z[i]] + self.state.v[i];
            let step = scales.step(i);
            let eps: f64 = rng.sample(StandardNormal);
            let current = u[i];
            let proposal = current + step * eps;
            let delta = binomial_loglik_eta(self.y[i], self.n[i], base + proposal)
                - binomial_loglik_eta(self.y[i], self.n[i], base + current)
                - (proposal * proposal - current * current) / (2.0 * sigma2);
            let uniform: f64 = rng.gen();
            let accept = uniform.ln() < delta;
            if accept {
                u[i] = proposal;
            }
            scales.record(i, delta.exp().min(1.0), accept);
        }
    }

    /// `v' Q v` for the structure matrix the variance prior pairs with.
    fn structure_quadratic_form(&self) -> f64 {
        let pair: f64 = self
            .graph
            .edges()
            .map(|(i, j)| (self.state.v[i] - self.state.v[j]).powi(2))
            .sum();
        match self.spec.approach {
            Approach::Leroux => {
                let rho = self.state.rho.expect("leroux state has rho");
                let sq: f64 = self.state.v.iter().map(|v| v * v).sum();
                rho * pair + (1.0 - rho) * sq
            }
            _ => pair,
        }
    }

    fn structure_rank(&self) -> usize {
        match self.spec.approach {
            Approach::Leroux => self.graph.n(),
            _ => self.icar_rank,
        }
    }

    fn update_variances<R: Rng>(&mut self, rng: &mut R) {
        let (a, b) = (self.spec.prior_shape, self.spec.prior_rate);
        if self.spec.clamp_sigma2_v.is_none() {
            let shape = a + self.structure_rank() as f64 / 2.0;
            let rate = b + self.structure_quadratic_form() / 2.0;
            self.state.sigma2_v = draw_inverse_gamma(shape, rate, rng);
        }
        if let Some(u) = &self.state.u {
            if self.spec.clamp_sigma2_u.is_none() {
                let shape = a + u.len() as f64 / 2.0;
                let rate = b + u.iter().map(|x| x * x).sum::<f64>() / 2.0;
                self.state.sigma2_u = Some(draw_inverse_gamma(shape, rate, rng));
            }
        }
    }

    fn update_rho<R: Rng>(&mut self, rng: &mut R) {
        let Some(scale) = self.rho_scale.as_mut() else {
            return;
        };
        let eigen = self.eigen.as_ref().expect("leroux chain has eigenvalues");
        let rho = self.state.rho.expect("leroux state has rho");
        let sigma2 = self.state.sigma2_v;
        let pair: f64 = self
            .graph
            .edges()
            .map(|(i, j)| (self.state.v[i] - self.state.v[j]).powi(2))
            .sum();
        let sq: f64 = self.state.v.iter().map(|v| v * v).sum();
        let qf = |r: f64| r * pair + (1.0 - r) * sq;
        let theta = (rho / (1.0 - rho)).ln();
        let eps: f64 = rng.sample(StandardNormal);
        let theta_new = theta + scale.step(0) * eps;
        let rho_new = inv_logit(theta_new);
        // Uniform(0,1) prior on rho; the Jacobian of the logit transform
        // contributes ln(rho (1 - rho)).
        let delta = 0.5 * (eigen.log_det_leroux(rho_new) - eigen.log_det_leroux(rho))
            - (qf(rho_new) - qf(rho)) / (2.0 * sigma2)
            + (rho_new.ln() + (-rho_new).ln_1p())
            - (rho.ln() + (-rho).ln_1p());
        let uniform: f64 = rng.gen();
        let accept = uniform.ln() < delta;
        if accept {
            self.state.rho = Some(rho_new);
        }
        scale.record(0, delta.exp().min(1.0), accept);
    }

    fn update_intercepts<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        let steps: Vec<f64> = (0..self.q).map(|j| self.beta_scales.step(j)).collect();
        let accepted =
            update_ordered_intercepts(&mut self.state, self.y_u, self.n_u, &steps, rng)?;
        for (j, acc) in accepted.iter().enumerate() {
            // The ordered-constraint rejection path gives no acceptance
            // probability; feed the indicator instead.
            self.beta_scales.record(j, if *acc { 1.0 } else { 0.0 }, *acc);
        }
        Ok(())
    }

    /// Re-center `v` to mean zero per connected component and absorb the
    /// population-weighted shift into every intercept (exact on a connected
    /// graph, where there is a single shift).
    fn center_v(&mut self) {
        let n = self.graph.n();
        let mut sums = vec![0.0; self.component_count];
        let mut sizes = vec![0usize; self.component_count];
        for i in 0..n {
            sums[self.components[i]] += self.state.v[i];
            sizes[self.components[i]] += 1;
        }
        let mut overall = 0.0;
        for c in 0..self.component_count {
            overall += sums[c];
            sums[c] /= sizes[c] as f64;
        }
        overall /= n as f64;
        for i in 0..n {
            self.state.v[i] -= sums[self.components[i]];
        }
        for b in &mut self.state.beta {
            *b += overall;
        }
    }

    fn sweep<R: Rng>(&mut self, rng: &mut R) -> Result<()> {
        self.update_v(rng);
        self.update_u(rng);
        self.update_variances(rng);
        self.update_rho(rng);
        self.update_intercepts(rng)?;
        if self.spec.approach == Approach::Local {
            update_cluster_indicators(&mut self.state, self.y_u, self.n_u, self.q, rng)?;
        }
        if self.spec.approach.uses_icar_structure() {
            self.center_v();
        }
        Ok(())
    }

    fn freeze_adaptation(&mut self) {
        self.v_scales.frozen = true;
        if let Some(s) = self.u_scales.as_mut() {
            s.frozen = true;
        }
        self.beta_scales.frozen = true;
        if let Some(s) = self.rho_scale.as_mut() {
            s.frozen = true;
        }
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn initial_state(y: &[u64], n: &[u64], spec: &ModelSpec, q: usize) -> GroupState {
    let logits: Vec<f64> = y
        .iter()
        .zip(n)
        .map(|(&yi, &ni)| ((yi as f64 + 0.5) / (ni as f64 - yi as f64 + 0.5)).ln())
        .collect();
    let mut sorted = logits.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut beta: Vec<f64> = (0..q)
        .map(|j| quantile_sorted(&sorted, (j + 1) as f64 / (q + 1) as f64))
        .collect();
    for j in 1..q {
        if beta[j] <= beta[j - 1] {
            beta[j] = beta[j - 1] + 1e-6;
        }
    }
    let z: Vec<usize> = logits
        .iter()
        .map(|l| {
            let mut best = 0;
            let mut dist = f64::INFINITY;
            for (k, b) in beta.iter().enumerate() {
                if (l - b).abs() < dist {
                    dist = (l - b).abs();
                    best = k;
                }
            }
            best
        })
        .collect();
    let units = y.len();
    GroupState {
        beta,
        z,
        v: vec![0.0; units],
        u: spec
            .approach
            .has_unstructured()
            .then(|| vec![0.0; units]),
        sigma2_v: spec.clamp_sigma2_v.unwrap_or(0.1),
        sigma2_u: spec
            .approach
            .has_unstructured()
            .then(|| spec.clamp_sigma2_u.unwrap_or(0.1)),
        rho: (spec.approach == Approach::Leroux).then_some(0.5),
    }
}

/// Fit one proportion group by Metropolis-within-Gibbs.
///
/// Runs `spec.mcmc.iterations` sweeps, discards burn-in, thins, and returns
/// the retained draws together with fitted probabilities, pointwise
/// log-likelihoods, and acceptance summaries.
pub fn fit_group(
    y: &[u64],
    n: &[u64],
    graph: &AdjacencyGraph,
    spec: &ModelSpec,
    rng: &mut ChaCha8Rng,
) -> Result<PosteriorDraws> {
    spec.validate()?;
    if !spec.approach.is_bayesian() {
        return Err(Error::InvalidSpec(
            "fit_group requires a Bayesian approach; use bootstrap_ice for the bootstrap".into(),
        ));
    }
    let units = graph.n();
    if y.len() != units || n.len() != units {
        return Err(Error::LengthMismatch {
            expected: units,
            got: y.len().min(n.len()),
        });
    }
    for i in 0..units {
        if n[i] == 0 || y[i] > n[i] {
            return Err(Error::InvalidObservation {
                unit: graph.unit_ids()[i].clone(),
                reason: format!("y = {}, n = {}", y[i], n[i]),
            });
        }
    }
    if spec.approach == Approach::Icar {
        if let Some(unit) = (0..units).find(|&i| graph.degree(i) == 0) {
            return Err(Error::IsolatedUnit {
                unit,
                context: "intrinsic CAR model requires every unit to have a neighbor",
            });
        }
    }
    if !y.iter().zip(n).any(|(&yi, &ni)| yi > 0 && yi < ni) {
        log::warn!("every unit sits at a count boundary (y = 0 or y = n); the flat intercept prior relies on at least one interior count");
    }

    let q = spec.effective_clusters();
    let components = graph.components();
    let component_count = components.iter().max().map_or(0, |m| m + 1);
    let ln_choose_terms: Vec<f64> = y.iter().zip(n).map(|(&yi, &ni)| ln_choose(ni, yi)).collect();
    let mut chain = Chain {
        y: y.iter().map(|&v| v as f64).collect(),
        n: n.iter().map(|&v| v as f64).collect(),
        y_u: y,
        n_u: n,
        graph,
        spec,
        q,
        state: initial_state(y, n, spec, q),
        components,
        component_count,
        icar_rank: units - component_count,
        eigen: (spec.approach == Approach::Leroux).then(|| StructureEigen::new(graph)),
        ln_choose: ln_choose_terms,
        v_scales: AdaptiveScales::new(units, 0.5),
        u_scales: spec
            .approach
            .has_unstructured()
            .then(|| AdaptiveScales::new(units, 0.5)),
        beta_scales: AdaptiveScales::new(q, 0.2),
        rho_scale: (spec.approach == Approach::Leroux).then(|| AdaptiveScales::new(1, 0.5)),
    };
    if !spec.adapt {
        chain.freeze_adaptation();
    }

    let retained = spec.retained();
    let mut draws = PosteriorDraws {
        spec: spec.clone(),
        seed: spec.mcmc.seed,
        unit_ids: graph.unit_ids().to_vec(),
        n_units: units,
        retained,
        q,
        beta: Vec::with_capacity(retained * q),
        v: Vec::with_capacity(retained * units),
        u: spec
            .approach
            .has_unstructured()
            .then(|| Vec::with_capacity(retained * units)),
        z: (spec.approach == Approach::Local).then(|| Vec::with_capacity(retained * units)),
        sigma2_v: Vec::with_capacity(retained),
        sigma2_u: spec
            .approach
            .has_unstructured()
            .then(|| Vec::with_capacity(retained)),
        rho: (spec.approach == Approach::Leroux).then(|| Vec::with_capacity(retained)),
        p: Vec::with_capacity(retained * units),
        loglik: Vec::with_capacity(retained * units),
        acceptance: Vec::new(),
    };

    for t in 1..=spec.mcmc.iterations {
        chain.sweep(rng)?;
        if t == spec.mcmc.burn_in {
            chain.freeze_adaptation();
        }

        let mut total = 0.0;
        for i in 0..units {
            total += chain.eta(i);
        }
        if !total.is_finite() {
            return Err(Error::NumericalFailure {
                sweep: t,
                detail: "non-finite linear predictor".into(),
            });
        }

        if t > spec.mcmc.burn_in && (t - spec.mcmc.burn_in) % spec.mcmc.thin == 0 {
            let mut loglik_total = 0.0;
            for i in 0..units {
                let eta = chain.eta(i);
                let p = inv_logit(eta);
                let ll = chain.ln_choose[i] + binomial_loglik_eta(chain.y[i], chain.n[i], eta);
                loglik_total += ll;
                draws.p.push(p);
                draws.loglik.push(ll);
                draws.v.push(chain.state.v[i]);
                if let (Some(store), Some(u)) = (draws.u.as_mut(), chain.state.u.as_ref()) {
                    store.push(u[i]);
                }
                if let Some(store) = draws.z.as_mut() {
                    store.push(chain.state.z[i] as u16);
                }
            }
            if !loglik_total.is_finite() {
                return Err(Error::NumericalFailure {
                    sweep: t,
                    detail: "non-finite log-likelihood".into(),
                });
            }
            draws.beta.extend_from_slice(&chain.state.beta);
            draws.sigma2_v.push(chain.state.sigma2_v);
            if let (Some(store), Some(s)) = (draws.sigma2_u.as_mut(), chain.state.sigma2_u) {
                store.push(s);
            }
            if let (Some(store), Some(r)) = (draws.rho.as_mut(), chain.state.rho) {
                store.push(r);
            }
        }
    }

    draws.acceptance.push(chain.v_scales.summary("v"));
    if let Some(s) = &chain.u_scales {
        draws.acceptance.push(s.summary("u"));
    }
    draws.acceptance.push(chain.beta_scales.summary("beta"));
    if let Some(s) = &chain.rho_scale {
        draws.acceptance.push(s.summary("rho"));
    }
    for block in &draws.acceptance {
        log::debug!(
            "{} acceptance {:.3} ({}/{})",
            block.block,
            block.rate(),
            block.accepted,
            block.proposed
        );
    }
    Ok(draws)
}

/// Align observations to the graph's unit order by id.
pub fn align_observations<'a>(
    data: &'a [CountyObservation],
    graph: &AdjacencyGraph,
) -> Result<Vec<&'a CountyObservation>> {
    if data.len() != graph.n() {
        return Err(Error::CountyMismatch(format!(
            "{} observations for {} graph units",
            data.len(),
            graph.n()
        )));
    }
    let mut by_id = std::collections::HashMap::with_capacity(data.len());
    for obs in data {
        if by_id.insert(obs.unit_id.as_str(), obs).is_some() {
            return Err(Error::DuplicateUnit(obs.unit_id.clone()));
        }
    }
    graph
        .unit_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::CountyMismatch(format!("no observation for unit `{id}`")))
        })
        .collect()
}

/// Fit both proportion groups independently with RNG streams derived from
/// `spec.mcmc.seed`, so draw indices align across groups for ICE
/// combination.
pub fn fit_ice_model(
    data: &[CountyObservation],
    graph: &AdjacencyGraph,
    spec: &ModelSpec,
) -> Result<(PosteriorDraws, PosteriorDraws)> {
    let aligned = align_observations(data, graph)?;
    for obs in &aligned {
        obs.validate()?;
    }
    let n: Vec<u64> = aligned.iter().map(|o| o.n_total).collect();
    let y1: Vec<u64> = aligned.iter().map(|o| o.y_group1).collect();
    let y2: Vec<u64> = aligned.iter().map(|o| o.y_group2).collect();
    let (r1, r2) = rayon::join(
        || {
            let mut rng = seeds::stream(spec.mcmc.seed, 1);
            fit_group(&y1, &n, graph, spec, &mut rng)
        },
        || {
            let mut rng = seeds::stream(spec.mcmc.seed, 2);
            fit_group(&y2, &n, graph, spec, &mut rng)
        },
    );
    Ok((r1?, r2?))
}
