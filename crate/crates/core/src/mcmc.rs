//! Metropolis-within-Gibbs sampling of the anchored posterior.
//!
//! Each iteration updates α by a Gaussian random walk, then every latent
//! position except the fixed anchor `i1` in turn. Free nodes and `i3` move
//! with a symmetric kernel on the manifold (a hyperbolic Normal or a vMF
//! centred at the current point); `i2` moves along its axis. Distances are
//! cached so a node update costs `O(N)`.

use crate::distributions::{
    gaussian_log_density, sample_hyp_normal_one, sample_vmf_one, DistributionError, GaussianParams,
    HyperbolicNormalParams, VmfParams,
};
use crate::geometry::{distance, Geometry, LatentPoint, MAX_RADIUS};
use crate::identifiability::{
    axis_coordinate, axis_point, check_anchor_constraints, second_coordinate, AnchorRole, AnchorSpec,
    IdentifiabilityError,
};
use crate::init::canonical_start;
use crate::model::{
    default_theta_spread, dyad_log_likelihood, log_likelihood_from_distances, log_posterior, LatentConfiguration,
    ModelError, Network, PriorSpec, ThetaZ,
};
use crate::par::{compensated_sum, map_range, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Largest tolerated gap between the incrementally tracked and the
/// recomputed log-likelihood.
pub const DRIFT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McmcError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Identifiability(#[from] IdentifiabilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub thin: usize,
    pub seed: u64,
    /// Standard deviation of the α random walk.
    pub alpha_step: f64,
    /// Latent proposal dispersion: σ of the hyperbolic Normal kernel, or
    /// `κ = 1/latent_step²` for the vMF kernel. Also the standard deviation
    /// of the `i2` walk (logit radius or polar angle).
    pub latent_step: f64,
    pub priors: PriorSpec,
    /// Dispersion of the fixed latent distribution: σ on the disk, κ on the sphere.
    pub theta_spread: f64,
    /// Sample `(m, s)` of the α prior under `m ~ N(0, 10)`, `s ~ |N(0, 10)|`.
    pub update_prior_params: bool,
    /// Sample θ_z under its hyperprior instead of holding it fixed.
    pub update_theta_z: bool,
    /// Override the degree-based anchor choice.
    pub anchors: Option<AnchorSpec>,
    /// Drop the likelihood from the target, leaving the prior. Diagnostic.
    pub prior_only: bool,
}

impl McmcConfig {
    pub fn default_for(geometry: Geometry) -> Self {
        McmcConfig {
            iterations: 20_000,
            thin: 10,
            seed: 0,
            alpha_step: 0.3,
            latent_step: 0.5,
            priors: PriorSpec::default_for(geometry),
            theta_spread: default_theta_spread(geometry),
            update_prior_params: false,
            update_theta_z: false,
            anchors: None,
            prior_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), McmcError> {
        let bad = |m: &str| Err(McmcError::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if !(self.alpha_step > 0.0 && self.alpha_step.is_finite()) {
            return bad("alpha_step must be positive");
        }
        if !(self.latent_step > 0.0 && self.latent_step.is_finite()) {
            return bad("latent_step must be positive");
        }
        if !(self.theta_spread >= 0.0 && self.theta_spread.is_finite()) {
            return bad("theta_spread must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub alpha: f64,
    pub latent: f64,
    pub theta_z: Option<f64>,
    pub prior_params: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcTrace {
    pub geometry: Geometry,
    pub anchors: AnchorSpec,
    /// Iteration number (1-based) of each stored sample.
    pub iterations: Vec<usize>,
    pub alpha_samples: Vec<f64>,
    pub z_samples: Vec<Vec<LatentPoint>>,
    pub loglik_samples: Vec<f64>,
    pub log_posterior_samples: Vec<f64>,
    pub theta_samples: Vec<ThetaZ>,
    pub alpha_prior_samples: Vec<GaussianParams>,
    pub acceptance_rates: AcceptanceRates,
    /// Starting state after initialization and canonicalization.
    pub initial: LatentConfiguration,
    pub initial_stress: f64,
    /// Largest gap seen between tracked and recomputed log-likelihood.
    pub max_loglik_drift: f64,
}

impl McmcTrace {
    pub fn len(&self) -> usize {
        self.alpha_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_samples.is_empty()
    }

    /// Index of the first stored sample after `burnin` iterations.
    pub fn first_after(&self, burnin: usize) -> usize {
        self.iterations.partition_point(|&it| it <= burnin)
    }

    /// Posterior mean of α over stored samples after `burnin` iterations.
    pub fn alpha_mean(&self, burnin: usize) -> f64 {
        let s = &self.alpha_samples[self.first_after(burnin)..];
        compensated_sum(s.iter().copied()) / s.len() as f64
    }

    pub fn configuration(&self, k: usize) -> LatentConfiguration {
        LatentConfiguration {
            geometry: self.geometry,
            z: self.z_samples[k].clone(),
            alpha: self.alpha_samples[k],
            theta_z: self.theta_samples[k],
        }
    }
}

// ---------------------------------------------------------------------------
// Sampler state
// ---------------------------------------------------------------------------

/// Current point of the chain with a cached distance matrix and
/// log-likelihood.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub cfg: LatentConfiguration,
    pub anchors: AnchorSpec,
    pub alpha_prior: GaussianParams,
    dist: Vec<f64>,
    loglik: f64,
}

impl ChainState {
    pub fn new(y: &Network, cfg: LatentConfiguration, anchors: AnchorSpec, alpha_prior: GaussianParams) -> Self {
        let dist = cfg.distance_matrix();
        let loglik = log_likelihood_from_distances(y, &dist, cfg.alpha);
        ChainState { cfg, anchors, alpha_prior, dist, loglik }
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    fn n(&self) -> usize {
        self.cfg.z.len()
    }

    /// Replaces the tracked log-likelihood by a fresh evaluation and returns
    /// the absolute discrepancy.
    pub fn resync(&mut self, y: &Network) -> f64 {
        let fresh = log_likelihood_from_distances(y, &self.cfg.distance_matrix(), self.cfg.alpha);
        let gap = (fresh - self.loglik).abs();
        self.dist = self.cfg.distance_matrix();
        self.loglik = fresh;
        gap
    }
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

/// Random-walk update of α. The likelihood is evaluated from the cached
/// distances; the θ_z hyperprior cancels from the ratio.
pub fn mh_update_alpha<R: Rng + ?Sized>(state: &mut ChainState, y: &Network, cfg: &McmcConfig, rng: &mut R) -> bool {
    let current = state.cfg.alpha;
    let proposal = current + cfg.alpha_step * standard_normal(rng);
    let ll_new = if cfg.prior_only { 0.0 } else { log_likelihood_from_distances(y, &state.dist, proposal) };
    let ll_old = if cfg.prior_only { 0.0 } else { state.loglik };
    let log_ratio = ll_new - ll_old + gaussian_log_density(proposal, &state.alpha_prior)
        - gaussian_log_density(current, &state.alpha_prior);
    if accept(log_ratio, rng) {
        state.cfg.alpha = proposal;
        state.loglik = if cfg.prior_only { log_likelihood_from_distances(y, &state.dist, proposal) } else { ll_new };
        true
    } else {
        false
    }
}

/// `ln(dr/dℓ)` for the disk axis coordinate: `r = 2 artanh a` is the arc
/// length and `ℓ = logit a` the walked coordinate.
fn axis_log_jacobian(a: f64) -> f64 {
    (2.0 * a / (1.0 + a)).ln()
}

/// Draws a proposal for node `i`, or `None` if it falls outside the node's
/// constrained domain. The second value is the log Jacobian correction.
fn propose_latent<R: Rng + ?Sized>(
    current: &LatentPoint,
    role: AnchorRole,
    step: f64,
    rng: &mut R,
) -> Result<Option<(LatentPoint, f64)>, DistributionError> {
    if step == 0.0 {
        return Ok(Some((*current, 0.0)));
    }
    match role {
        AnchorRole::Origin => Ok(None),
        AnchorRole::Axis => match current {
            LatentPoint::Disk(_) => {
                let a = axis_coordinate(current);
                let logit = (a / (1.0 - a)).ln() + step * standard_normal(rng);
                let a_new = 1.0 / (1.0 + (-logit).exp());
                if !(a_new > 0.0 && a_new < MAX_RADIUS) {
                    return Ok(None);
                }
                let jac = axis_log_jacobian(a_new) - axis_log_jacobian(a);
                Ok(Some((axis_point(Geometry::Hyperbolic, a_new), jac)))
            }
            LatentPoint::Sphere(_) => {
                let omega = axis_coordinate(current) + step * standard_normal(rng);
                if !(omega > 0.0 && omega < PI) {
                    return Ok(None);
                }
                Ok(Some((axis_point(Geometry::Spherical, omega), 0.0)))
            }
        },
        AnchorRole::HalfSpace | AnchorRole::Free => {
            let proposal = match current {
                LatentPoint::Disk(z) => {
                    LatentPoint::Disk(sample_hyp_normal_one(&HyperbolicNormalParams::new(*z, step)?, rng)?.0)
                }
                LatentPoint::Sphere(u) => {
                    LatentPoint::Sphere(sample_vmf_one(&VmfParams::new(*u, 1.0 / (step * step))?, rng))
                }
            };
            if role == AnchorRole::HalfSpace && second_coordinate(&proposal) <= 0.0 {
                return Ok(None);
            }
            Ok(Some((proposal, 0.0)))
        }
    }
}

/// Metropolis update of node `i` against the likelihood times
/// `p(z_i | θ_z)`. Returns whether the proposal was accepted.
///
/// # Panics
/// If `i` is the fixed anchor `i1`.
pub fn mh_update_latent<R: Rng + ?Sized>(
    state: &mut ChainState,
    i: usize,
    y: &Network,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<bool, McmcError> {
    let role = state.anchors.role(i);
    assert!(role != AnchorRole::Origin, "the anchor i1 is never updated");
    let current = state.cfg.z[i];
    let Some((proposal, log_jac)) = propose_latent(&current, role, cfg.latent_step, rng)? else {
        return Ok(false);
    };
    let n = state.n();
    let alpha = state.cfg.alpha;
    let mut new_row = vec![0.0; n];
    let mut delta = 0.0;
    for j in (0..n).filter(|&j| j != i) {
        let d = distance(&proposal, &state.cfg.z[j]);
        new_row[j] = d;
        let e = y.has_edge(i, j);
        delta += dyad_log_likelihood(e, alpha, d) - dyad_log_likelihood(e, alpha, state.dist[i * n + j]);
    }
    let theta = &state.cfg.theta_z;
    let prior_delta = theta.log_density(&proposal) - theta.log_density(&current);
    let data_delta = if cfg.prior_only { 0.0 } else { delta };
    if accept(data_delta + prior_delta + log_jac, rng) {
        state.cfg.z[i] = proposal;
        for (j, &d) in new_row.iter().enumerate().filter(|&(j, _)| j != i) {
            state.dist[i * n + j] = d;
            state.dist[j * n + i] = d;
        }
        state.loglik += delta;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Random-walk update of θ_z: the mean moves with the latent kernel, the
/// dispersion by a Gaussian step rejected outside its support.
fn mh_update_theta<R: Rng + ?Sized>(state: &mut ChainState, cfg: &McmcConfig, rng: &mut R) -> Result<bool, McmcError> {
    let current = state.cfg.theta_z;
    let step = cfg.latent_step;
    let proposal = match current {
        ThetaZ::HyperbolicNormal(p) => {
            let mu = sample_hyp_normal_one(&HyperbolicNormalParams::new(p.mu, step)?, rng)?.0;
            let sigma = p.sigma + step * standard_normal(rng);
            if sigma <= 0.0 {
                return Ok(false);
            }
            ThetaZ::HyperbolicNormal(HyperbolicNormalParams { mu, sigma })
        }
        ThetaZ::VonMisesFisher(p) => {
            let mu = sample_vmf_one(&VmfParams::new(p.mu, 1.0 / (step * step))?, rng);
            let kappa = p.kappa + step * standard_normal(rng);
            if kappa <= 0.0 {
                return Ok(false);
            }
            ThetaZ::VonMisesFisher(VmfParams { mu, kappa })
        }
    };
    let score = |t: &ThetaZ| {
        cfg.priors.theta_prior.log_density(t) + compensated_sum(state.cfg.z.iter().map(|z| t.log_density(z)))
    };
    let log_ratio = score(&proposal) - score(&current);
    if log_ratio.is_finite() && accept(log_ratio, rng) {
        state.cfg.theta_z = proposal;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Random-walk update of the α prior `(m, s)` under `m ~ N(0, 10)`,
/// `s ~ |N(0, 10)|`.
fn mh_update_prior_params<R: Rng + ?Sized>(state: &mut ChainState, cfg: &McmcConfig, rng: &mut R) -> bool {
    let hyper = GaussianParams { m: 0.0, s: 10.0 };
    let current = state.alpha_prior;
    let proposal = GaussianParams {
        m: current.m + cfg.alpha_step * standard_normal(rng),
        s: current.s + cfg.alpha_step * standard_normal(rng),
    };
    if proposal.s <= 0.0 {
        return false;
    }
    let score = |p: &GaussianParams| {
        gaussian_log_density(state.cfg.alpha, p) + gaussian_log_density(p.m, &hyper) + gaussian_log_density(p.s, &hyper)
    };
    if accept(score(&proposal) - score(&current), rng) {
        state.alpha_prior = proposal;
        true
    } else {
        false
    }
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// Initial state: stress MDS on graph distances, canonicalization onto the
/// anchors, the α grid search, and θ_z centred at the canonical origin.
pub fn initial_state<R: Rng + ?Sized>(
    y: &Network,
    geometry: Geometry,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<(ChainState, f64), McmcError> {
    let theta_z = ThetaZ::centred(geometry, cfg.theta_spread)?;
    let start = canonical_start(y, theta_z, cfg.anchors, rng, Execution::Sequential)?;
    Ok((ChainState::new(y, start.config, start.anchors, cfg.priors.alpha_prior), start.stress))
}

/// Runs one chain from the default initialization.
pub fn run_mcmc(y: &Network, geometry: Geometry, cfg: &McmcConfig) -> Result<McmcTrace, McmcError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (state, stress) = initial_state(y, geometry, cfg, &mut rng)?;
    run_from_state(y, state, stress, cfg, &mut rng)
}

/// Runs one chain from a given canonical state.
pub fn run_mcmc_from(
    y: &Network,
    start: LatentConfiguration,
    anchors: AnchorSpec,
    cfg: &McmcConfig,
) -> Result<McmcTrace, McmcError> {
    cfg.validate()?;
    check_anchor_constraints(&start.z, &anchors)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state = ChainState::new(y, start, anchors, cfg.priors.alpha_prior);
    run_from_state(y, state, f64::NAN, cfg, &mut rng)
}

fn run_from_state<R: Rng + ?Sized>(
    y: &Network,
    mut state: ChainState,
    initial_stress: f64,
    cfg: &McmcConfig,
    rng: &mut R,
) -> Result<McmcTrace, McmcError> {
    let n = state.n();
    let keep = cfg.iterations / cfg.thin;
    let mut trace = McmcTrace {
        geometry: state.cfg.geometry,
        anchors: state.anchors,
        iterations: Vec::with_capacity(keep),
        alpha_samples: Vec::with_capacity(keep),
        z_samples: Vec::with_capacity(keep),
        loglik_samples: Vec::with_capacity(keep),
        log_posterior_samples: Vec::with_capacity(keep),
        theta_samples: Vec::with_capacity(keep),
        alpha_prior_samples: Vec::with_capacity(keep),
        acceptance_rates: AcceptanceRates::default(),
        initial: state.cfg.clone(),
        initial_stress,
        max_loglik_drift: 0.0,
    };
    let (mut acc_alpha, mut acc_latent, mut acc_theta, mut acc_prior) = (0usize, 0usize, 0usize, 0usize);
    let order: Vec<usize> = (0..n).filter(|&i| i != state.anchors.i1).collect();
    for it in 1..=cfg.iterations {
        if cfg.update_prior_params && mh_update_prior_params(&mut state, cfg, rng) {
            acc_prior += 1;
        }
        if cfg.update_theta_z && mh_update_theta(&mut state, cfg, rng)? {
            acc_theta += 1;
        }
        if mh_update_alpha(&mut state, y, cfg, rng) {
            acc_alpha += 1;
        }
        for &i in &order {
            if mh_update_latent(&mut state, i, y, cfg, rng)? {
                acc_latent += 1;
            }
        }
        debug_assert!(check_anchor_constraints(&state.cfg.z, &state.anchors).is_ok());
        if it % cfg.thin == 0 {
            trace.max_loglik_drift = trace.max_loglik_drift.max(state.resync(y));
            let priors = PriorSpec { alpha_prior: state.alpha_prior, ..cfg.priors };
            trace.iterations.push(it);
            trace.alpha_samples.push(state.cfg.alpha);
            trace.z_samples.push(state.cfg.z.clone());
            trace.loglik_samples.push(state.loglik);
            trace.log_posterior_samples.push(log_posterior(y, &state.cfg, &priors)?);
            trace.theta_samples.push(state.cfg.theta_z);
            trace.alpha_prior_samples.push(state.alpha_prior);
        }
    }
    let total = cfg.iterations as f64;
    trace.acceptance_rates = AcceptanceRates {
        alpha: acc_alpha as f64 / total,
        latent: acc_latent as f64 / (total * order.len() as f64),
        theta_z: cfg.update_theta_z.then(|| acc_theta as f64 / total),
        prior_params: cfg.update_prior_params.then(|| acc_prior as f64 / total),
    };
    Ok(trace)
}

/// Independent chains with seeds `cfg.seed, cfg.seed + 1, …`, run
/// concurrently when the execution mode allows.
pub fn run_chains(
    y: &Network,
    geometry: Geometry,
    cfg: &McmcConfig,
    chains: usize,
    exec: Execution,
) -> Result<Vec<McmcTrace>, McmcError> {
    map_range(exec, chains, |k| {
        let chain_cfg = McmcConfig { seed: cfg.seed.wrapping_add(k as u64), ..cfg.clone() };
        run_mcmc(y, geometry, &chain_cfg)
    })
    .into_iter()
    .collect()
}

/// Upper bound of the log-likelihood over all configurations on the
/// sphere: linked pairs at distance 0, unlinked pairs antipodal.
pub fn spherical_loglik_upper_bound(y: &Network, alpha: f64) -> f64 {
    let n = y.node_count();
    compensated_sum((0..n).flat_map(|i| {
        (i + 1..n).map(move |j| {
            if y.has_edge(i, j) {
                dyad_log_likelihood(true, alpha, 0.0)
            } else {
                dyad_log_likelihood(false, alpha, PI)
            }
        })
    }))
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Effective sample size by Geyer's initial positive sequence: the sum of
/// autocorrelation pairs `ρ_{2k} + ρ_{2k+1}` is truncated at the first
/// non-positive pair. Never below 1.
pub fn effective_sample_size(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return n as f64;
    }
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    let centred: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        compensated_sum(centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b)) / n as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut sum_pairs = 0.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        sum_pairs += pair;
        k += 1;
    }
    // τ = −1 + 2 Σ_k (ρ_{2k} + ρ_{2k+1})
    let tau = (2.0 * sum_pairs - 1.0).max(1.0 / n as f64);
    (n as f64 / tau).clamp(1.0, n as f64)
}
