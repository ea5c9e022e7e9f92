//! Manifold primitives for the Poincaré disk and the unit sphere.
//!
//! Disk points are stored in Cartesian coordinates and double as complex
//! numbers `x + iy` wherever Möbius maps need complex arithmetic. Sphere
//! points are unit 3-vectors. Tangent vectors are expressed in ambient
//! coordinates: `[f64; 2]` on the disk and `[f64; 3]` on the sphere.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Points with `‖z‖ ≥ 1 − BOUNDARY_GUARD` are rejected.
pub const BOUNDARY_GUARD: f64 = 1e-12;

/// Largest radius produced by maps that may numerically saturate.
pub const MAX_RADIUS: f64 = 1.0 - 2.0 * BOUNDARY_GUARD;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point ({x}, {y}) is not strictly inside the unit disk")]
    OutsideDisk { x: f64, y: f64 },
    #[error("vector {0:?} cannot be normalized onto the unit sphere")]
    DegenerateVector([f64; 3]),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("geometry mismatch: expected {expected:?}")]
    GeometryMismatch { expected: Geometry },
    #[error("empty point set")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Hyperbolic,
    Spherical,
}

impl Geometry {
    pub fn name(self) -> &'static str {
        match self {
            Geometry::Hyperbolic => "hyperbolic",
            Geometry::Spherical => "spherical",
        }
    }

    /// Number of coordinates written per point in CSV output.
    pub fn coordinate_count(self) -> usize {
        match self {
            Geometry::Hyperbolic => 2,
            Geometry::Spherical => 3,
        }
    }
}

impl std::str::FromStr for Geometry {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "hyperbolic" | "poincare" | "disk" => Ok(Geometry::Hyperbolic),
            "spherical" | "sphere" => Ok(Geometry::Spherical),
            other => Err(format!("unknown geometry '{other}' (expected hyperbolic or spherical)")),
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// ---------------------------------------------------------------------------
// Disk points and complex helpers
// ---------------------------------------------------------------------------

/// A point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct DiskPoint {
    x: f64,
    y: f64,
}

impl TryFrom<[f64; 2]> for DiskPoint {
    type Error = GeometryError;

    fn try_from(v: [f64; 2]) -> Result<Self, Self::Error> {
        DiskPoint::new(v[0], v[1])
    }
}

impl From<DiskPoint> for [f64; 2] {
    fn from(p: DiskPoint) -> Self {
        [p.x, p.y]
    }
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Result<Self, GeometryError> {
        if !x.is_finite() || !y.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if (x * x + y * y).sqrt() >= 1.0 - BOUNDARY_GUARD {
            return Err(GeometryError::OutsideDisk { x, y });
        }
        Ok(DiskPoint { x, y })
    }

    /// Builds a point from polar coordinates, clamping the radius inside the guard.
    pub fn from_polar(radius: f64, angle: f64) -> Self {
        let r = radius.abs().min(MAX_RADIUS);
        DiskPoint { x: r * angle.cos(), y: r * angle.sin() }
    }

    /// Pulls a numerically saturated point back inside the guard band.
    pub(crate) fn clamped(x: f64, y: f64) -> Self {
        let n = (x * x + y * y).sqrt();
        if n >= MAX_RADIUS {
            let s = MAX_RADIUS / n;
            DiskPoint { x: x * s, y: y * s }
        } else {
            DiskPoint { x, y }
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn coords(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn norm_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn conj(&self) -> DiskPoint {
        DiskPoint { x: self.x, y: -self.y }
    }

    pub fn neg(&self) -> DiskPoint {
        DiskPoint { x: -self.x, y: -self.y }
    }

    /// Conformal factor `2 / (1 − ‖z‖²)` of the Poincaré metric.
    pub fn conformal_factor(&self) -> f64 {
        2.0 / (1.0 - self.norm_sq())
    }
}

#[inline]
fn cmul(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0]]
}

#[inline]
fn cdiv(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = b[0] * b[0] + b[1] * b[1];
    [(a[0] * b[0] + a[1] * b[1]) / d, (a[1] * b[0] - a[0] * b[1]) / d]
}

/// `ln(y + √((y−1)(y+1)))` written in terms of `δ = y − 1` so that small
/// distances keep full precision.
#[inline]
pub(crate) fn acosh_1p(delta: f64) -> f64 {
    (delta + (delta * (delta + 2.0)).sqrt()).ln_1p()
}

/// Poincaré-disk distance.
pub fn hyperbolic_distance(a: &DiskPoint, b: &DiskPoint) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let num = 2.0 * (dx * dx + dy * dy);
    let den = (1.0 - a.norm_sq()) * (1.0 - b.norm_sq());
    acosh_1p(num / den)
}

/// Möbius addition `x ⊕ y`.
pub fn mobius_add(a: &DiskPoint, b: &DiskPoint) -> DiskPoint {
    let xy = a.x * b.x + a.y * b.y;
    let x2 = a.norm_sq();
    let y2 = b.norm_sq();
    let ca = 1.0 + 2.0 * xy + y2;
    let cb = 1.0 - x2;
    let den = 1.0 + 2.0 * xy + x2 * y2;
    DiskPoint::clamped((ca * a.x + cb * b.x) / den, (ca * a.y + cb * b.y) / den)
}

fn mobius_add_raw(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let xy = a[0] * b[0] + a[1] * b[1];
    let x2 = a[0] * a[0] + a[1] * a[1];
    let y2 = b[0] * b[0] + b[1] * b[1];
    let ca = 1.0 + 2.0 * xy + y2;
    let cb = 1.0 - x2;
    let den = 1.0 + 2.0 * xy + x2 * y2;
    [(ca * a[0] + cb * b[0]) / den, (ca * a[1] + cb * b[1]) / den]
}

/// Exponential map on the disk: `μ ⊕ (tanh(λ_μ‖v‖/2) v/‖v‖)`.
pub fn disk_exp_map(mu: &DiskPoint, v: [f64; 2]) -> DiskPoint {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if n == 0.0 {
        return *mu;
    }
    let t = (0.5 * mu.conformal_factor() * n).tanh() / n;
    let step = DiskPoint::clamped(t * v[0], t * v[1]);
    mobius_add(mu, &step)
}

/// Logarithm map on the disk, inverse of [`disk_exp_map`].
pub fn disk_log_map(mu: &DiskPoint, z: &DiskPoint) -> [f64; 2] {
    let w = mobius_add_raw([-mu.x, -mu.y], [z.x, z.y]);
    let n = (w[0] * w[0] + w[1] * w[1]).sqrt();
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let s = 2.0 / mu.conformal_factor() * n.min(MAX_RADIUS).atanh() / n;
    [s * w[0], s * w[1]]
}

/// Riemannian length of a tangent vector at `mu`.
pub fn disk_tangent_norm(mu: &DiskPoint, v: [f64; 2]) -> f64 {
    mu.conformal_factor() * (v[0] * v[0] + v[1] * v[1]).sqrt()
}

// ---------------------------------------------------------------------------
// Sphere points
// ---------------------------------------------------------------------------

/// A unit vector in R³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct SpherePoint {
    v: [f64; 3],
}

impl TryFrom<[f64; 3]> for SpherePoint {
    type Error = GeometryError;

    fn try_from(v: [f64; 3]) -> Result<Self, Self::Error> {
        SpherePoint::new(v)
    }
}

impl From<SpherePoint> for [f64; 3] {
    fn from(p: SpherePoint) -> Self {
        p.v
    }
}

impl SpherePoint {
    pub const NORTH_POLE: SpherePoint = SpherePoint { v: [0.0, 0.0, 1.0] };

    /// Normalizes `v` onto the sphere.
    pub fn new(v: [f64; 3]) -> Result<Self, GeometryError> {
        if v.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let n = norm3(v);
        if n < 1e-300 {
            return Err(GeometryError::DegenerateVector(v));
        }
        Ok(SpherePoint { v: [v[0] / n, v[1] / n, v[2] / n] })
    }

    /// Point with polar angle `omega` from the north pole and azimuth `phi`.
    pub fn from_angles(omega: f64, phi: f64) -> Self {
        let (so, co) = omega.sin_cos();
        let (sp, cp) = phi.sin_cos();
        SpherePoint { v: [cp * so, sp * so, co] }
    }

    pub(crate) fn renormalized(v: [f64; 3]) -> Self {
        let n = norm3(v);
        SpherePoint { v: [v[0] / n, v[1] / n, v[2] / n] }
    }

    pub fn coords(&self) -> [f64; 3] {
        self.v
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        dot3(self.v, other.v)
    }

    pub fn neg(&self) -> SpherePoint {
        SpherePoint { v: [-self.v[0], -self.v[1], -self.v[2]] }
    }
}

#[inline]
pub(crate) fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Great-circle distance in `[0, π]`.
///
/// Evaluated as `atan2(‖u × v‖, u·v)`, which equals `arccos(u·v)` but stays
/// accurate for nearly coincident or antipodal points and cannot produce NaN.
pub fn spherical_distance(u: &SpherePoint, v: &SpherePoint) -> f64 {
    norm3(cross3(u.v, v.v)).atan2(dot3(u.v, v.v))
}

/// Exponential map on the sphere. The tangent vector is projected onto the
/// tangent plane at `u` first.
pub fn sphere_exp_map(u: &SpherePoint, v: [f64; 3]) -> SpherePoint {
    let t = project_tangent(u, v);
    let n = norm3(t);
    if n == 0.0 {
        return *u;
    }
    let (s, c) = n.sin_cos();
    SpherePoint::renormalized([c * u.v[0] + s * t[0] / n, c * u.v[1] + s * t[1] / n, c * u.v[2] + s * t[2] / n])
}

/// Logarithm map on the sphere; returns zero for coincident points and an
/// arbitrary-free zero vector for exact antipodes.
pub fn sphere_log_map(u: &SpherePoint, p: &SpherePoint) -> [f64; 3] {
    let c = dot3(u.v, p.v);
    let w = [p.v[0] - c * u.v[0], p.v[1] - c * u.v[1], p.v[2] - c * u.v[2]];
    let n = norm3(w);
    if n < 1e-300 {
        return [0.0; 3];
    }
    let theta = spherical_distance(u, p);
    [theta * w[0] / n, theta * w[1] / n, theta * w[2] / n]
}

pub(crate) fn project_tangent(u: &SpherePoint, v: [f64; 3]) -> [f64; 3] {
    let c = dot3(u.v, v);
    [v[0] - c * u.v[0], v[1] - c * u.v[1], v[2] - c * u.v[2]]
}

// ---------------------------------------------------------------------------
// Isometries
// ---------------------------------------------------------------------------

/// Disk isometry `z ↦ β(z − z0)/(1 − conj(z0) z)`, optionally followed by
/// complex conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoebiusIsometry {
    beta: [f64; 2],
    z0: DiskPoint,
    reflect: bool,
}

impl MoebiusIsometry {
    pub const IDENTITY: MoebiusIsometry = MoebiusIsometry { beta: [1.0, 0.0], z0: DiskPoint::ORIGIN, reflect: false };

    /// `beta` is normalized to unit modulus.
    pub fn new(beta: [f64; 2], z0: DiskPoint, reflect: bool) -> Result<Self, GeometryError> {
        let n = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(GeometryError::NonFinite);
        }
        Ok(MoebiusIsometry { beta: [beta[0] / n, beta[1] / n], z0, reflect })
    }

    pub fn from_rotation(angle: f64, z0: DiskPoint, reflect: bool) -> Self {
        MoebiusIsometry { beta: [angle.cos(), angle.sin()], z0, reflect }
    }

    pub fn beta(&self) -> [f64; 2] {
        self.beta
    }

    pub fn z0(&self) -> DiskPoint {
        self.z0
    }

    pub fn reflect(&self) -> bool {
        self.reflect
    }

    pub fn apply(&self, z: &DiskPoint) -> DiskPoint {
        apply_moebius(self, z)
    }
}

pub fn apply_moebius(iso: &MoebiusIsometry, z: &DiskPoint) -> DiskPoint {
    let num = [z.x - iso.z0.x, z.y - iso.z0.y];
    let cz = cmul([iso.z0.x, -iso.z0.y], [z.x, z.y]);
    let den = [1.0 - cz[0], -cz[1]];
    let w = cmul(iso.beta, cdiv(num, den));
    if iso.reflect {
        DiskPoint::clamped(w[0], -w[1])
    } else {
        DiskPoint::clamped(w[0], w[1])
    }
}

/// Sphere isometry `Ref · R_{z3,θ3} R_{z2,θ2} R_{z1,θ1}` with the optional
/// reflection `diag(1, −1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereIsometry {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub reflect: bool,
}

pub type Mat3 = [[f64; 3]; 3];

fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub(crate) fn matvec3(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

pub(crate) fn rot_z1(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub(crate) fn rot_z2(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub(crate) fn rot_z3(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

impl SphereIsometry {
    pub const IDENTITY: SphereIsometry = SphereIsometry { theta1: 0.0, theta2: 0.0, theta3: 0.0, reflect: false };

    pub fn matrix(&self) -> Mat3 {
        let mut m = matmul3(&rot_z3(self.theta3), &matmul3(&rot_z2(self.theta2), &rot_z1(self.theta1)));
        if self.reflect {
            m[1] = [-m[1][0], -m[1][1], -m[1][2]];
        }
        m
    }

    pub fn apply(&self, u: &SpherePoint) -> SpherePoint {
        apply_sphere_isometry(self, u)
    }
}

pub fn apply_sphere_isometry(iso: &SphereIsometry, u: &SpherePoint) -> SpherePoint {
    SpherePoint::renormalized(matvec3(&iso.matrix(), u.v))
}

// ---------------------------------------------------------------------------
// Geometry-tagged points
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LatentPoint {
    Disk(DiskPoint),
    Sphere(SpherePoint),
}

impl LatentPoint {
    pub fn geometry(&self) -> Geometry {
        match self {
            LatentPoint::Disk(_) => Geometry::Hyperbolic,
            LatentPoint::Sphere(_) => Geometry::Spherical,
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        match self {
            LatentPoint::Disk(p) => p.coords().to_vec(),
            LatentPoint::Sphere(p) => p.coords().to_vec(),
        }
    }

    pub fn as_disk(&self) -> Option<&DiskPoint> {
        match self {
            LatentPoint::Disk(p) => Some(p),
            LatentPoint::Sphere(_) => None,
        }
    }

    pub fn as_sphere(&self) -> Option<&SpherePoint> {
        match self {
            LatentPoint::Sphere(p) => Some(p),
            LatentPoint::Disk(_) => None,
        }
    }

    /// Canonical base point of the geometry: the disk origin or the north pole.
    pub fn canonical_origin(geometry: Geometry) -> LatentPoint {
        match geometry {
            Geometry::Hyperbolic => LatentPoint::Disk(DiskPoint::ORIGIN),
            Geometry::Spherical => LatentPoint::Sphere(SpherePoint::NORTH_POLE),
        }
    }
}

impl From<DiskPoint> for LatentPoint {
    fn from(p: DiskPoint) -> Self {
        LatentPoint::Disk(p)
    }
}

impl From<SpherePoint> for LatentPoint {
    fn from(p: SpherePoint) -> Self {
        LatentPoint::Sphere(p)
    }
}

/// Geodesic distance between two points of the same geometry.
///
/// # Panics
/// If the points belong to different geometries.
#[inline]
pub fn distance(a: &LatentPoint, b: &LatentPoint) -> f64 {
    match (a, b) {
        (LatentPoint::Disk(p), LatentPoint::Disk(q)) => hyperbolic_distance(p, q),
        (LatentPoint::Sphere(p), LatentPoint::Sphere(q)) => spherical_distance(p, q),
        _ => panic!("distance between points of different geometries"),
    }
}

// ---------------------------------------------------------------------------
// Fréchet means
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetMean {
    pub point: LatentPoint,
    /// Σ d(m, z_i)² at the returned point.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

const FRECHET_TOL: f64 = 1e-8;
const FRECHET_MAX_ITER: usize = 500;

/// Fréchet (Karcher) mean by Riemannian gradient descent with unit step on
/// the averaged log-map, halving the step whenever the objective increases.
pub fn frechet_mean(points: &[LatentPoint]) -> Result<FrechetMean, GeometryError> {
    let first = points.first().ok_or(GeometryError::Empty)?;
    match first {
        LatentPoint::Disk(_) => {
            let pts = points
                .iter()
                .map(|p| p.as_disk().copied().ok_or(GeometryError::GeometryMismatch { expected: Geometry::Hyperbolic }))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(frechet_mean_disk(&pts))
        }
        LatentPoint::Sphere(_) => {
            let pts = points
                .iter()
                .map(|p| {
                    p.as_sphere().copied().ok_or(GeometryError::GeometryMismatch { expected: Geometry::Spherical })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(frechet_mean_sphere(&pts))
        }
    }
}

fn disk_objective(m: &DiskPoint, pts: &[DiskPoint]) -> f64 {
    pts.iter().map(|p| hyperbolic_distance(m, p).powi(2)).sum()
}

fn sphere_objective(m: &SpherePoint, pts: &[SpherePoint]) -> f64 {
    pts.iter().map(|p| spherical_distance(m, p).powi(2)).sum()
}

pub fn frechet_mean_disk(pts: &[DiskPoint]) -> FrechetMean {
    assert!(!pts.is_empty(), "frechet_mean_disk on empty input");
    let n = pts.len() as f64;
    let ex = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let ey = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mut m = DiskPoint::clamped(ex, ey);
    let mut f = disk_objective(&m, pts);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FRECHET_MAX_ITER {
        iterations += 1;
        let mut g = [0.0, 0.0];
        for p in pts {
            let l = disk_log_map(&m, p);
            g[0] += l[0] / n;
            g[1] += l[1] / n;
        }
        if disk_tangent_norm(&m, g) < FRECHET_TOL {
            converged = true;
            break;
        }
        loop {
            let v = [step * g[0], step * g[1]];
            let cand = disk_exp_map(&m, v);
            let fc = disk_objective(&cand, pts);
            if fc <= f {
                let moved = disk_tangent_norm(&m, v);
                m = cand;
                f = fc;
                if moved < FRECHET_TOL {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
    }
    FrechetMean { point: LatentPoint::Disk(m), objective: f, iterations, converged }
}

pub fn frechet_mean_sphere(pts: &[SpherePoint]) -> FrechetMean {
    assert!(!pts.is_empty(), "frechet_mean_sphere on empty input");
    let n = pts.len() as f64;
    let mut s = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            s[k] += p.v[k];
        }
    }
    let mut m = if norm3(s) > 1e-8 * n { SpherePoint::renormalized(s) } else { pts[0] };
    let mut f = sphere_objective(&m, pts);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < FRECHET_MAX_ITER {
        iterations += 1;
        let mut g = [0.0; 3];
        for p in pts {
            let l = sphere_log_map(&m, p);
            for k in 0..3 {
                g[k] += l[k] / n;
            }
        }
        if norm3(g) < FRECHET_TOL {
            converged = true;
            break;
        }
        loop {
            let v = [step * g[0], step * g[1], step * g[2]];
            let cand = sphere_exp_map(&m, v);
            let fc = sphere_objective(&cand, pts);
            if fc <= f {
                let moved = norm3(v);
                m = cand;
                f = fc;
                if moved < FRECHET_TOL {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                converged = true;
                break;
            }
        }
        if converged {
            break;
        }
    }
    FrechetMean { point: LatentPoint::Sphere(m), objective: f, iterations, converged }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}
