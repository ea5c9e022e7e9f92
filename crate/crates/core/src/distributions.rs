//! Densities and samplers: the maximum-entropy hyperbolic Normal on the
//! disk, the von Mises–Fisher distribution on S², and the scalar Gaussian.

use crate::geometry::{disk_exp_map, hyperbolic_distance, DiskPoint, SpherePoint};
use crate::special::{erf, ln_erf};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// Proposal budget for the hyperbolic Normal rejection sampler.
pub const MAX_PROPOSALS: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("hyperbolic normal sampler exhausted {proposals} proposals at sigma = {sigma}")]
    SamplerExhausted { sigma: f64, proposals: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicNormalParams {
    pub mu: DiskPoint,
    pub sigma: f64,
}

impl HyperbolicNormalParams {
    pub fn new(mu: DiskPoint, sigma: f64) -> Result<Self, DistributionError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(DistributionError::InvalidParameter { name: "sigma", value: sigma });
        }
        Ok(HyperbolicNormalParams { mu, sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VmfParams {
    pub mu: SpherePoint,
    pub kappa: f64,
}

impl VmfParams {
    pub fn new(mu: SpherePoint, kappa: f64) -> Result<Self, DistributionError> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(DistributionError::InvalidParameter { name: "kappa", value: kappa });
        }
        Ok(VmfParams { mu, kappa })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub m: f64,
    pub s: f64,
}

impl GaussianParams {
    pub fn new(m: f64, s: f64) -> Result<Self, DistributionError> {
        if !m.is_finite() {
            return Err(DistributionError::InvalidParameter { name: "m", value: m });
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(DistributionError::InvalidParameter { name: "s", value: s });
        }
        Ok(GaussianParams { m, s })
    }
}

// ---------------------------------------------------------------------------
// Hyperbolic Normal
// ---------------------------------------------------------------------------

/// Normalizing constant `Z(σ) = 2π √(π/2) σ e^{σ²/2} erf(σ/√2)` on the disk.
pub fn hyp_normal_z(sigma: f64) -> f64 {
    2.0 * PI * (PI / 2.0).sqrt() * sigma * (0.5 * sigma * sigma).exp() * erf(sigma / SQRT_2)
}

/// `ln Z(σ)`, stable for large σ.
pub fn hyp_normal_log_z(sigma: f64) -> f64 {
    (2.0 * PI * (PI / 2.0).sqrt()).ln() + sigma.ln() + 0.5 * sigma * sigma + ln_erf(sigma / SQRT_2)
}

/// Log density with respect to the hyperbolic area element.
pub fn hyp_normal_log_density(z: &DiskPoint, p: &HyperbolicNormalParams) -> f64 {
    let d = hyperbolic_distance(&p.mu, z);
    -hyp_normal_log_z(p.sigma) - d * d / (2.0 * p.sigma * p.sigma)
}

/// Acceptance probability of a proposed geodesic radius `r` drawn from
/// `Gamma(2, σ)`: target radial density `∝ e^{−r²/2σ²} sinh r` over the
/// envelope `M · r e^{−r/σ} / σ²` with `M = σ² e^{(σ+1)²/2} / Z(σ)`.
pub fn hyp_normal_acceptance_ratio(r: f64, sigma: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    // ln sinh r − ln r, stable for small and large r
    let ln_sinh_over_r =
        if r < 1e-4 { r * r / 6.0 } else { r + (-(-2.0 * r).exp()).ln_1p() - std::f64::consts::LN_2 - r.ln() };
    let log_ratio = -r * r / (2.0 * sigma * sigma) + ln_sinh_over_r + r / sigma - 0.5 * (sigma + 1.0).powi(2);
    log_ratio.exp()
}

/// One draw from the hyperbolic Normal via the Gamma-envelope rejection
/// sampler. Returns the draw and the number of proposals consumed.
pub fn sample_hyp_normal_one<R: Rng + ?Sized>(
    p: &HyperbolicNormalParams,
    rng: &mut R,
) -> Result<(DiskPoint, u64), DistributionError> {
    let gamma =
        Gamma::new(2.0, p.sigma).map_err(|_| DistributionError::InvalidParameter { name: "sigma", value: p.sigma })?;
    let lambda = p.mu.conformal_factor();
    for proposals in 1..=MAX_PROPOSALS {
        // Location drawn uniformly in the unit disk; only its direction
        // enters the sample, the radius of the tangent step is r/λ.
        let u: f64 = rng.random();
        let zeta: f64 = rng.random::<f64>() * 2.0 * PI;
        let a = [u.sqrt() * zeta.cos(), u.sqrt() * zeta.sin()];
        let r = gamma.sample(rng);
        let accept: f64 = rng.random();
        if accept < hyp_normal_acceptance_ratio(r, p.sigma) {
            let na = (a[0] * a[0] + a[1] * a[1]).sqrt();
            let dir = if na > 0.0 { [a[0] / na, a[1] / na] } else { [zeta.cos(), zeta.sin()] };
            let v = [r / lambda * dir[0], r / lambda * dir[1]];
            return Ok((disk_exp_map(&p.mu, v), proposals));
        }
    }
    Err(DistributionError::SamplerExhausted { sigma: p.sigma, proposals: MAX_PROPOSALS })
}

pub fn sample_hyp_normal<R: Rng + ?Sized>(
    p: &HyperbolicNormalParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<DiskPoint>, DistributionError> {
    (0..n).map(|_| sample_hyp_normal_one(p, rng).map(|(z, _)| z)).collect()
}

// ---------------------------------------------------------------------------
// von Mises–Fisher on S²
// ---------------------------------------------------------------------------

/// `ln(κ / (2π(e^κ − e^{−κ}))) + κ μᵀz` in the overflow-free form
/// `ln κ − ln 2π − ln(1 − e^{−2κ}) + κ(μᵀz − 1)`.
pub fn vmf_log_density(z: &SpherePoint, p: &VmfParams) -> f64 {
    if p.kappa == 0.0 {
        return -(4.0 * PI).ln();
    }
    vmf_log_normalizer(p.kappa) + p.kappa * (p.mu.dot(z) - 1.0)
}

/// `ln κ − ln 2π − ln(1 − e^{−2κ})`; the κ → 0 limit is `−ln 4π`.
pub fn vmf_log_normalizer(kappa: f64) -> f64 {
    if kappa == 0.0 {
        return -(4.0 * PI).ln();
    }
    kappa.ln() - (2.0 * PI).ln() - (-(-2.0 * kappa).exp_m1()).ln()
}

/// Mean resultant length `coth κ − 1/κ` of the vMF on S².
pub fn vmf_mean_resultant_length(kappa: f64) -> f64 {
    if kappa < 1e-6 {
        return kappa / 3.0;
    }
    1.0 / kappa.tanh() - 1.0 / kappa
}

/// Wood's rejection sampler, specialised to S² (ambient dimension 3).
pub fn sample_vmf_one<R: Rng + ?Sized>(p: &VmfParams, rng: &mut R) -> SpherePoint {
    let w = if p.kappa == 0.0 {
        rng.random_range(-1.0..=1.0)
    } else {
        let kappa = p.kappa;
        // b = (−2κ + √(4κ² + 4)) / 2, written without cancellation
        let b = 2.0 / (2.0 * kappa + (4.0 * kappa * kappa + 4.0).sqrt());
        let x0 = (1.0 - b) / (1.0 + b);
        let c = kappa * x0 + 2.0 * (1.0 - x0 * x0).ln();
        loop {
            // Beta(1, 1) on S², i.e. Uniform(0, 1)
            let zb: f64 = rng.random();
            let w = (1.0 - (1.0 + b) * zb) / (1.0 - (1.0 - b) * zb);
            let u: f64 = rng.random();
            if kappa * w + 2.0 * (1.0 - x0 * w).ln() - c >= u.ln() {
                break w;
            }
        }
    };
    let theta: f64 = rng.random::<f64>() * 2.0 * PI;
    let s = (1.0 - w * w).max(0.0).sqrt();
    let local = [s * theta.cos(), s * theta.sin(), w];
    rotate_from_pole(&p.mu, local)
}

pub fn sample_vmf<R: Rng + ?Sized>(p: &VmfParams, n: usize, rng: &mut R) -> Vec<SpherePoint> {
    (0..n).map(|_| sample_vmf_one(p, rng)).collect()
}

/// Householder reflection taking the north pole to `mu`, applied to `v`.
fn rotate_from_pole(mu: &SpherePoint, v: [f64; 3]) -> SpherePoint {
    let m = mu.coords();
    let w = [-m[0], -m[1], 1.0 - m[2]];
    let ww = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
    if ww < 1e-24 {
        return SpherePoint::renormalized(v);
    }
    let k = 2.0 * (w[0] * v[0] + w[1] * v[1] + w[2] * v[2]) / ww;
    SpherePoint::renormalized([v[0] - k * w[0], v[1] - k * w[1], v[2] - k * w[2]])
}

// ---------------------------------------------------------------------------
// Scalar Gaussian
// ---------------------------------------------------------------------------

pub fn gaussian_log_density(x: f64, p: &GaussianParams) -> f64 {
    let t = (x - p.m) / p.s;
    -0.5 * (2.0 * PI).ln() - p.s.ln() - 0.5 * t * t
}
