//! Black-box variational inference with score-function gradients.
//!
//! The variational family is mean field: `α ~ N(m̃, σ̃)` and one factor per
//! node. Free nodes and `i3` get a hyperbolic Normal `(z̃_i, s̃_i)` on the
//! disk or a vMF `(z̃_i, κ̃_i)` on the sphere, with the location in polar
//! coordinates. `i1` is a point mass at the canonical origin. `i2` gets a
//! logit-Normal on its axis coordinate, so its location has a single free
//! parameter. Every iteration draws `S` joint samples, forms the
//! control-variate score-function gradient for each parameter block and
//! takes an rmsprop step.

use crate::distributions::{
    gaussian_log_density, hyp_normal_log_density, sample_hyp_normal_one, sample_vmf_one, vmf_log_density,
    DistributionError, GaussianParams, HyperbolicNormalParams, VmfParams,
};
use crate::geometry::{hyperbolic_distance, DiskPoint, Geometry, LatentPoint, SpherePoint};
use crate::identifiability::{
    axis_coordinate, axis_point, check_anchor_constraints, second_coordinate, AnchorRole, AnchorSpec,
    IdentifiabilityError,
};
use crate::init::canonical_start;
use crate::model::{
    default_theta_spread, log_likelihood_with, LatentConfiguration, ModelError, Network, PriorSpec, ThetaZ,
};
use crate::par::{compensated_sum, map_slice, Execution};
use crate::special::erf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};
use thiserror::Error;

/// Optimization aborts once the ELBO estimate falls this far below its
/// initial value.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;

/// Below this geodesic distance the direction term of the disk location
/// gradient is set to zero.
const DIRECTION_GUARD: f64 = 1e-10;

const INITIAL_SCALE: f64 = 0.5;
const INITIAL_KAPPA: f64 = 10.0;
const INITIAL_SIGMA: f64 = 0.5;
const MIN_INITIAL_RADIUS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BbviError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("optimization diverged at iteration {iteration}: ELBO {elbo} against initial {initial}")]
    Diverged { iteration: usize, elbo: f64, initial: f64 },
    #[error(transparent)]
    Identifiability(#[from] IdentifiabilityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbviConfig {
    pub iterations: usize,
    /// Joint samples per gradient estimate.
    pub samples: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_epsilon: f64,
    pub priors: PriorSpec,
    /// Dispersion of the fixed latent distribution: σ on the disk, κ on the sphere.
    pub theta_spread: f64,
    pub anchors: Option<AnchorSpec>,
    /// Stop early once no parameter moves by more than this in an iteration.
    pub tolerance: Option<f64>,
}

impl BbviConfig {
    pub fn default_for(geometry: Geometry) -> Self {
        BbviConfig {
            iterations: 1000,
            samples: 20,
            seed: 0,
            learning_rate: 0.05,
            rmsprop_decay: 0.9,
            rmsprop_epsilon: 1e-8,
            priors: PriorSpec::default_for(geometry),
            theta_spread: default_theta_spread(geometry),
            anchors: None,
            tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<(), BbviError> {
        let bad = |m: &str| Err(BbviError::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if self.samples < 2 {
            return bad("at least two samples are needed per gradient estimate");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return bad("rmsprop_decay must lie in (0, 1)");
        }
        if !(self.rmsprop_epsilon > 0.0) {
            return bad("rmsprop_epsilon must be positive");
        }
        if !(self.theta_spread >= 0.0 && self.theta_spread.is_finite()) {
            return bad("theta_spread must be non-negative");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Variational factors
// ---------------------------------------------------------------------------

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// One node's factor of `q`. Unconstrained parameters are stored; angles
/// are reduced modulo 2π only when reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeFactor {
    /// Point mass (the anchor `i1`).
    Fixed { point: LatentPoint },
    /// Disk axis point `(a, 0)` with `logit a ~ N(u, e^{log_scale})`.
    DiskAxis { u: f64, log_scale: f64 },
    /// Sphere axis point at polar angle `ω = π·sigmoid(v)` with
    /// `v ~ N(u, e^{log_scale})`.
    SphereAxis { u: f64, log_scale: f64 },
    /// Hyperbolic Normal with location `sigmoid(r*)·(cos φ̃, sin φ̃)` and
    /// scale `e^{log_s}`.
    Disk { r_star: f64, phi: f64, log_s: f64 },
    /// vMF with location at polar angle ω̃ and azimuth φ̃ and concentration
    /// `e^{log_kappa}`.
    Sphere { omega: f64, phi: f64, log_kappa: f64 },
}

/// `ln(dℓ/dv)` for the axis coordinate walked on the logit scale, with ℓ
/// the arc length from the origin. Densities on the axis are taken with
/// respect to arc length.
fn disk_axis_log_jacobian(a: f64) -> f64 {
    (2.0 * a / (1.0 + a)).ln()
}

fn sphere_axis_log_jacobian(s: f64) -> f64 {
    (PI * s * (1.0 - s)).ln()
}

impl NodeFactor {
    /// Factor for a node of a canonical configuration.
    pub fn initial(point: &LatentPoint, role: AnchorRole) -> Self {
        match (role, point) {
            (AnchorRole::Origin, p) => NodeFactor::Fixed { point: *p },
            (AnchorRole::Axis, LatentPoint::Disk(_)) => {
                NodeFactor::DiskAxis { u: logit(axis_coordinate(point)), log_scale: INITIAL_SCALE.ln() }
            }
            (AnchorRole::Axis, LatentPoint::Sphere(_)) => {
                NodeFactor::SphereAxis { u: logit(axis_coordinate(point) / PI), log_scale: INITIAL_SCALE.ln() }
            }
            (_, LatentPoint::Disk(z)) => NodeFactor::Disk {
                r_star: logit(z.norm().max(MIN_INITIAL_RADIUS)),
                phi: z.y().atan2(z.x()),
                log_s: INITIAL_SCALE.ln(),
            },
            (_, LatentPoint::Sphere(u)) => {
                let [x, y, z] = u.coords();
                NodeFactor::Sphere { omega: z.clamp(-1.0, 1.0).acos(), phi: y.atan2(x), log_kappa: INITIAL_KAPPA.ln() }
            }
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            NodeFactor::Fixed { .. } => Vec::new(),
            NodeFactor::DiskAxis { u, log_scale } | NodeFactor::SphereAxis { u, log_scale } => vec![u, log_scale],
            NodeFactor::Disk { r_star, phi, log_s } => vec![r_star, phi, log_s],
            NodeFactor::Sphere { omega, phi, log_kappa } => vec![omega, phi, log_kappa],
        }
    }

    /// Same variant with new parameters.
    ///
    /// # Panics
    /// If the length does not match [`NodeFactor::params`].
    pub fn with_params(&self, p: &[f64]) -> Self {
        assert_eq!(p.len(), self.params().len(), "parameter count");
        match self {
            NodeFactor::Fixed { point } => NodeFactor::Fixed { point: *point },
            NodeFactor::DiskAxis { .. } => NodeFactor::DiskAxis { u: p[0], log_scale: p[1] },
            NodeFactor::SphereAxis { .. } => NodeFactor::SphereAxis { u: p[0], log_scale: p[1] },
            NodeFactor::Disk { .. } => NodeFactor::Disk { r_star: p[0], phi: p[1], log_s: p[2] },
            NodeFactor::Sphere { .. } => NodeFactor::Sphere { omega: p[0], phi: p[1], log_kappa: p[2] },
        }
    }

    /// Variational location `z̃`.
    pub fn location(&self) -> LatentPoint {
        match *self {
            NodeFactor::Fixed { point } => point,
            NodeFactor::DiskAxis { u, .. } => axis_point(Geometry::Hyperbolic, sigmoid(u)),
            NodeFactor::SphereAxis { u, .. } => axis_point(Geometry::Spherical, PI * sigmoid(u)),
            NodeFactor::Disk { r_star, phi, .. } => LatentPoint::Disk(DiskPoint::from_polar(sigmoid(r_star), phi)),
            NodeFactor::Sphere { omega, phi, .. } => LatentPoint::Sphere(SpherePoint::from_angles(omega, phi)),
        }
    }

    /// Dispersion: logit-scale sd on an axis, `s̃` on the disk, `κ̃` on the sphere.
    pub fn spread(&self) -> f64 {
        match *self {
            NodeFactor::Fixed { .. } => 0.0,
            NodeFactor::DiskAxis { log_scale, .. } | NodeFactor::SphereAxis { log_scale, .. } => log_scale.exp(),
            NodeFactor::Disk { log_s, .. } => log_s.exp(),
            NodeFactor::Sphere { log_kappa, .. } => log_kappa.exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LatentPoint, DistributionError> {
        Ok(match *self {
            NodeFactor::Fixed { point } => point,
            NodeFactor::DiskAxis { u, log_scale } => {
                axis_point(Geometry::Hyperbolic, sigmoid(u + log_scale.exp() * standard_normal(rng)))
            }
            NodeFactor::SphereAxis { u, log_scale } => {
                axis_point(Geometry::Spherical, PI * sigmoid(u + log_scale.exp() * standard_normal(rng)))
            }
            NodeFactor::Disk { log_s, .. } => {
                let mu = *self.location().as_disk().expect("disk factor");
                LatentPoint::Disk(sample_hyp_normal_one(&HyperbolicNormalParams::new(mu, log_s.exp())?, rng)?.0)
            }
            NodeFactor::Sphere { log_kappa, .. } => {
                let mu = *self.location().as_sphere().expect("sphere factor");
                LatentPoint::Sphere(sample_vmf_one(&VmfParams::new(mu, log_kappa.exp())?, rng))
            }
        })
    }

    /// Logit-scale coordinate of an axis point.
    fn axis_logit(&self, z: &LatentPoint) -> f64 {
        match self {
            NodeFactor::DiskAxis { .. } => logit(axis_coordinate(z)),
            _ => logit(axis_coordinate(z) / PI),
        }
    }

    /// `log q(z)`; zero for the point mass.
    pub fn log_q(&self, z: &LatentPoint) -> f64 {
        match *self {
            NodeFactor::Fixed { .. } => 0.0,
            NodeFactor::DiskAxis { u, log_scale } => {
                let v = self.axis_logit(z);
                gaussian_log_density(v, &GaussianParams { m: u, s: log_scale.exp() })
                    - disk_axis_log_jacobian(sigmoid(v))
            }
            NodeFactor::SphereAxis { u, log_scale } => {
                let v = self.axis_logit(z);
                gaussian_log_density(v, &GaussianParams { m: u, s: log_scale.exp() })
                    - sphere_axis_log_jacobian(sigmoid(v))
            }
            NodeFactor::Disk { log_s, .. } => {
                let mu = *self.location().as_disk().expect("disk factor");
                hyp_normal_log_density(
                    z.as_disk().expect("disk sample"),
                    &HyperbolicNormalParams { mu, sigma: log_s.exp() },
                )
            }
            NodeFactor::Sphere { log_kappa, .. } => {
                let mu = *self.location().as_sphere().expect("sphere factor");
                vmf_log_density(z.as_sphere().expect("sphere sample"), &VmfParams { mu, kappa: log_kappa.exp() })
            }
        }
    }

    /// `∇ log q(z)` with respect to [`NodeFactor::params`].
    pub fn grad_log_q(&self, z: &LatentPoint) -> Vec<f64> {
        match *self {
            NodeFactor::Fixed { .. } => Vec::new(),
            NodeFactor::DiskAxis { u, log_scale } | NodeFactor::SphereAxis { u, log_scale } => {
                grad_log_q_alpha(self.axis_logit(z), u, log_scale.exp()).to_vec()
            }
            NodeFactor::Disk { r_star, phi, log_s } => {
                grad_log_q_hyperbolic(z.as_disk().expect("disk sample"), r_star, phi, log_s).to_vec()
            }
            NodeFactor::Sphere { omega, phi, log_kappa } => {
                grad_log_q_spherical(z.as_sphere().expect("sphere sample"), omega, phi, log_kappa).to_vec()
            }
        }
    }
}

/// `∂ log N(α; m̃, σ̃)` with respect to `(m̃, ln σ̃)`.
pub fn grad_log_q_alpha(alpha: f64, m_tilde: f64, sigma_tilde: f64) -> [f64; 2] {
    let r = (alpha - m_tilde) / sigma_tilde;
    [r / sigma_tilde, r * r - 1.0]
}

/// Hyperbolic distance and its gradient in the second argument.
fn hyperbolic_distance_grad(z: &DiskPoint, mu: &DiskPoint) -> (f64, [f64; 2]) {
    let (dx, dy) = (mu.x() - z.x(), mu.y() - z.y());
    let a = 1.0 - z.norm_sq();
    let b = 1.0 - mu.norm_sq();
    let delta = 2.0 * (dx * dx + dy * dy) / (a * b);
    let d = hyperbolic_distance(z, mu);
    if d < DIRECTION_GUARD {
        return (d, [0.0, 0.0]);
    }
    // δ = 2‖z − μ‖²/(ab), d = acosh(1 + δ)
    let scale = 1.0 / (delta * (delta + 2.0)).sqrt();
    let g = |dc: f64, mc: f64| scale * (4.0 * dc / (a * b) + delta * 2.0 * mc / b);
    (d, [g(dx, mu.x()), g(dy, mu.y())])
}

/// `∂ log ln Z(σ)/∂σ` for the hyperbolic Normal normalizer.
fn hyp_log_z_derivative(sigma: f64) -> f64 {
    1.0 / sigma + sigma + FRAC_2_PI.sqrt() * (-0.5 * sigma * sigma).exp() / erf(sigma / SQRT_2)
}

/// `∂ log q(z)` for the disk factor with respect to `(r*, φ̃, ln s̃)`.
pub fn grad_log_q_hyperbolic(z: &DiskPoint, r_star: f64, phi: f64, log_s: f64) -> [f64; 3] {
    let r = sigmoid(r_star);
    let s = log_s.exp();
    let (sp, cp) = phi.sin_cos();
    let mu = DiskPoint::from_polar(r, phi);
    let (d, grad_d) = hyperbolic_distance_grad(z, &mu);
    // log q = −ln Z(s) − d²/(2s²)
    let gx = -d / (s * s) * grad_d[0];
    let gy = -d / (s * s) * grad_d[1];
    let d_r = gx * cp + gy * sp;
    let d_phi = r * (-gx * sp + gy * cp);
    let d_s = -hyp_log_z_derivative(s) + d * d / (s * s * s);
    [d_r * r * (1.0 - r), d_phi, d_s * s]
}

/// `∂ log q(z)` for the sphere factor with respect to `(ω̃, φ̃, ln κ̃)`.
pub fn grad_log_q_spherical(z: &SpherePoint, omega: f64, phi: f64, log_kappa: f64) -> [f64; 3] {
    let kappa = log_kappa.exp();
    let (so, co) = omega.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let [x, y, w] = z.coords();
    let mu_dot = so * cp * x + so * sp * y + co * w;
    let d_omega = kappa * (co * cp * x + co * sp * y - so * w);
    let d_phi = kappa * (-so * sp * x + so * cp * y);
    // 2e^{−2κ}/(1 − e^{−2κ}) = 2/expm1(2κ)
    let d_kappa = 1.0 / kappa + (mu_dot - 1.0) - 2.0 / (2.0 * kappa).exp_m1();
    [d_omega, d_phi, d_kappa * kappa]
}

// ---------------------------------------------------------------------------
// Variational state
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    pub geometry: Geometry,
    pub anchors: AnchorSpec,
    /// Held fixed during optimization.
    pub theta_z: ThetaZ,
    pub m_tilde: f64,
    pub log_sigma_tilde: f64,
    pub nodes: Vec<NodeFactor>,
}

impl VariationalState {
    /// Factors centred on a canonical configuration: `m̃ = α`, `σ̃ = 0.5`,
    /// `s̃_i = 0.5` or `κ̃_i = 10`.
    pub fn from_configuration(cfg: &LatentConfiguration, anchors: AnchorSpec) -> Result<Self, BbviError> {
        check_anchor_constraints(&cfg.z, &anchors)?;
        let nodes = cfg.z.iter().enumerate().map(|(i, p)| NodeFactor::initial(p, anchors.role(i))).collect();
        Ok(VariationalState {
            geometry: cfg.geometry,
            anchors,
            theta_z: cfg.theta_z,
            m_tilde: cfg.alpha,
            log_sigma_tilde: INITIAL_SIGMA.ln(),
            nodes,
        })
    }

    pub fn sigma_tilde(&self) -> f64 {
        self.log_sigma_tilde.exp()
    }

    pub fn locations(&self) -> Vec<LatentPoint> {
        self.nodes.iter().map(NodeFactor::location).collect()
    }

    /// Configuration at the variational locations with `α = m̃`.
    pub fn mode_configuration(&self) -> LatentConfiguration {
        LatentConfiguration { geometry: self.geometry, z: self.locations(), alpha: self.m_tilde, theta_z: self.theta_z }
    }

    /// One joint draw `(α, Z)` from `q`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, Vec<LatentPoint>), DistributionError> {
        let alpha = self.m_tilde + self.sigma_tilde() * standard_normal(rng);
        let z = self.nodes.iter().map(|f| f.sample(rng)).collect::<Result<_, _>>()?;
        Ok((alpha, z))
    }

    pub fn log_q(&self, alpha: f64, z: &[LatentPoint]) -> f64 {
        let a = gaussian_log_density(alpha, &GaussianParams { m: self.m_tilde, s: self.sigma_tilde() });
        a + compensated_sum(self.nodes.iter().zip(z).map(|(f, p)| f.log_q(p)))
    }

    fn block_params(&self, b: usize) -> Vec<f64> {
        if b == 0 {
            vec![self.m_tilde, self.log_sigma_tilde]
        } else {
            self.nodes[b - 1].params()
        }
    }

    fn block_grad(&self, b: usize, alpha: f64, z: &[LatentPoint]) -> Vec<f64> {
        if b == 0 {
            grad_log_q_alpha(alpha, self.m_tilde, self.sigma_tilde()).to_vec()
        } else {
            self.nodes[b - 1].grad_log_q(&z[b - 1])
        }
    }

    /// Sets a block, refusing (and returning false) when the update would
    /// move `i3` off its half-plane.
    fn set_block(&mut self, b: usize, p: &[f64]) -> bool {
        if b == 0 {
            self.m_tilde = p[0];
            self.log_sigma_tilde = p[1];
            return true;
        }
        let i = b - 1;
        let proposal = self.nodes[i].with_params(p);
        if i == self.anchors.i3 && second_coordinate(&proposal.location()) <= 0.0 {
            return false;
        }
        self.nodes[i] = proposal;
        true
    }
}

/// `log p(Y, Z, α)` under fixed θ_z.
pub fn log_joint(y: &Network, alpha: f64, z: &[LatentPoint], theta_z: &ThetaZ, priors: &PriorSpec) -> f64 {
    let ll = log_likelihood_with(y, z, alpha, Execution::Sequential).expect("sample matches the network");
    ll + gaussian_log_density(alpha, &priors.alpha_prior) + compensated_sum(z.iter().map(|p| theta_z.log_density(p)))
}

// ---------------------------------------------------------------------------
// Estimators and optimizer
// ---------------------------------------------------------------------------

/// `Σ_d Ĉov(f_d, h_d) / Σ_d V̂ar(h_d)` over `S` rows; zero when `h` has no
/// variance.
pub fn control_variate_coeff(f: &[Vec<f64>], h: &[Vec<f64>]) -> f64 {
    let s = f.len();
    assert!(s >= 2 && h.len() == s, "need at least two paired rows");
    let dims = h[0].len();
    let mut cov = 0.0;
    let mut var = 0.0;
    for d in 0..dims {
        let mf = compensated_sum(f.iter().map(|r| r[d])) / s as f64;
        let mh = compensated_sum(h.iter().map(|r| r[d])) / s as f64;
        cov += compensated_sum(f.iter().zip(h).map(|(a, b)| (a[d] - mf) * (b[d] - mh))) / (s - 1) as f64;
        var += compensated_sum(h.iter().map(|b| (b[d] - mh).powi(2))) / (s - 1) as f64;
    }
    if var < 1e-300 {
        0.0
    } else {
        cov / var
    }
}

/// One rmsprop step: returns `(step, accumulator)`.
pub fn rmsprop_step(grad: f64, accumulator: f64, cfg: &BbviConfig) -> (f64, f64) {
    let acc = cfg.rmsprop_decay * accumulator + (1.0 - cfg.rmsprop_decay) * grad * grad;
    (cfg.learning_rate * grad / (acc + cfg.rmsprop_epsilon).sqrt(), acc)
}

#[derive(Debug, Clone)]
struct Draw {
    alpha: f64,
    z: Vec<LatentPoint>,
    loglik: f64,
    weight: f64,
}

fn draw_batch(
    y: &Network,
    state: &VariationalState,
    priors: &PriorSpec,
    samples: usize,
    rng: &mut impl Rng,
    exec: Execution,
) -> Result<Vec<Draw>, BbviError> {
    let seeds: Vec<u64> = (0..samples).map(|_| rng.random()).collect();
    map_slice(exec, &seeds, |&seed| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (alpha, z) = state.sample(&mut r)?;
        let loglik = log_likelihood_with(y, &z, alpha, Execution::Sequential)?;
        let lp = log_joint(y, alpha, &z, &state.theta_z, priors);
        Ok(Draw { weight: lp - state.log_q(alpha, &z), alpha, z, loglik })
    })
    .into_iter()
    .collect()
}

/// Monte Carlo ELBO estimate and its standard error from `samples` fresh draws.
pub fn elbo_estimate<R: Rng>(
    y: &Network,
    state: &VariationalState,
    priors: &PriorSpec,
    samples: usize,
    rng: &mut R,
    exec: Execution,
) -> Result<(f64, f64), BbviError> {
    let draws = draw_batch(y, state, priors, samples, rng, exec)?;
    let n = draws.len() as f64;
    let mean = compensated_sum(draws.iter().map(|d| d.weight)) / n;
    let var = compensated_sum(draws.iter().map(|d| (d.weight - mean).powi(2))) / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbviResult {
    pub state: VariationalState,
    /// ELBO estimate from each iteration's samples.
    pub elbo_trace: Vec<f64>,
    /// Mean log-likelihood of each iteration's samples.
    pub loglik_trace: Vec<f64>,
    /// `(m̃, σ̃)` after each iteration.
    pub alpha_trace: Vec<(f64, f64)>,
    pub iterations_run: usize,
    /// Updates of `i3` refused for leaving the half-plane.
    pub held_steps: usize,
    pub initial_stress: f64,
}

/// Runs the optimizer from the default initialization.
pub fn run_bbvi(y: &Network, geometry: Geometry, cfg: &BbviConfig) -> Result<BbviResult, BbviError> {
    run_bbvi_with(y, geometry, cfg, Execution::default())
}

pub fn run_bbvi_with(
    y: &Network,
    geometry: Geometry,
    cfg: &BbviConfig,
    exec: Execution,
) -> Result<BbviResult, BbviError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let theta_z = ThetaZ::centred(geometry, cfg.theta_spread)?;
    let start = canonical_start(y, theta_z, cfg.anchors, &mut rng, exec)?;
    let state = VariationalState::from_configuration(&start.config, start.anchors)?;
    optimize(y, state, start.stress, cfg, &mut rng, exec)
}

/// Runs the optimizer from a given variational state.
pub fn run_bbvi_from(
    y: &Network,
    state: VariationalState,
    cfg: &BbviConfig,
    exec: Execution,
) -> Result<BbviResult, BbviError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    optimize(y, state, f64::NAN, cfg, &mut rng, exec)
}

fn optimize(
    y: &Network,
    mut state: VariationalState,
    initial_stress: f64,
    cfg: &BbviConfig,
    rng: &mut ChaCha8Rng,
    exec: Execution,
) -> Result<BbviResult, BbviError> {
    let blocks = 1 + state.nodes.len();
    let mut accumulators: Vec<Vec<f64>> = (0..blocks).map(|b| vec![0.0; state.block_params(b).len()]).collect();
    let mut result = BbviResult {
        state: state.clone(),
        elbo_trace: Vec::with_capacity(cfg.iterations),
        loglik_trace: Vec::with_capacity(cfg.iterations),
        alpha_trace: Vec::with_capacity(cfg.iterations),
        iterations_run: 0,
        held_steps: 0,
        initial_stress,
    };
    let mut initial_elbo = None;
    for it in 1..=cfg.iterations {
        let draws = draw_batch(y, &state, &cfg.priors, cfg.samples, rng, exec)?;
        let s = draws.len() as f64;
        let elbo = compensated_sum(draws.iter().map(|d| d.weight)) / s;
        let initial = *initial_elbo.get_or_insert(elbo);
        if !elbo.is_finite() || elbo < initial - DIVERGENCE_THRESHOLD {
            return Err(BbviError::Diverged { iteration: it, elbo, initial });
        }
        result.elbo_trace.push(elbo);
        result.loglik_trace.push(compensated_sum(draws.iter().map(|d| d.loglik)) / s);

        let current = state.clone();
        let mut largest_move: f64 = 0.0;
        for (b, acc) in accumulators.iter_mut().enumerate() {
            if acc.is_empty() {
                continue;
            }
            let h: Vec<Vec<f64>> = draws.iter().map(|d| current.block_grad(b, d.alpha, &d.z)).collect();
            let f: Vec<Vec<f64>> =
                h.iter().zip(&draws).map(|(row, d)| row.iter().map(|g| g * d.weight).collect()).collect();
            let a = control_variate_coeff(&f, &h);
            let mut params = current.block_params(b);
            for (k, (p, ak)) in params.iter_mut().zip(acc.iter_mut()).enumerate() {
                let g = compensated_sum(f.iter().zip(&h).map(|(fr, hr)| fr[k] - a * hr[k])) / s;
                let (step, new_acc) = rmsprop_step(g, *ak, cfg);
                *ak = new_acc;
                *p += step;
                largest_move = largest_move.max(step.abs());
            }
            if !state.set_block(b, &params) {
                result.held_steps += 1;
            }
        }
        debug_assert!(check_anchor_constraints(&state.locations(), &state.anchors).is_ok());
        result.alpha_trace.push((state.m_tilde, state.sigma_tilde()));
        result.iterations_run = it;
        if cfg.tolerance.is_some_and(|t| largest_move < t) {
            break;
        }
    }
    result.state = state;
    Ok(result)
}
