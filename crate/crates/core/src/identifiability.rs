//! Anchor coordinates: removing the isometry non-identifiability of the
//! likelihood by pinning three latent positions.
//!
//! Node `i1` sits at the canonical origin (the disk centre or the north
//! pole), node `i2` on a one-parameter curve through it (the positive real
//! axis, or the x–z great circle with positive x), and node `i3` in the
//! half-space with positive second coordinate.

use crate::geometry::{
    hyperbolic_distance, DiskPoint, Geometry, LatentPoint, MoebiusIsometry, SphereIsometry, SpherePoint,
};
use crate::model::{LatentConfiguration, Network, ThetaZ};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Anchors closer than this are treated as coincident.
pub const ANCHOR_SEPARATION_TOL: f64 = 1e-10;
/// Images of `i3` with `|second coordinate|` below this are treated as lying
/// on the anchor geodesic.
pub const HALF_SPACE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentifiabilityError {
    #[error("degenerate anchors: {0}")]
    DegenerateAnchors(String),
    #[error("anchor coordinates need at least 3 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid anchors ({i1}, {i2}, {i3}) for {n} nodes")]
    InvalidAnchors { i1: usize, i2: usize, i3: usize, n: usize },
    #[error("anchor constraint violated at node {node}: {reason}")]
    ConstraintViolated { node: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub i1: usize,
    pub i2: usize,
    pub i3: usize,
}

/// How a node is constrained under a given [`AnchorSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorRole {
    /// `i1`: fixed at the canonical origin.
    Origin,
    /// `i2`: one free coordinate along the canonical axis.
    Axis,
    /// `i3`: second coordinate strictly positive.
    HalfSpace,
    Free,
}

impl AnchorSpec {
    pub fn new(i1: usize, i2: usize, i3: usize, n: usize) -> Result<Self, IdentifiabilityError> {
        if i1 == i2 || i1 == i3 || i2 == i3 || i1 >= n || i2 >= n || i3 >= n {
            return Err(IdentifiabilityError::InvalidAnchors { i1, i2, i3, n });
        }
        Ok(AnchorSpec { i1, i2, i3 })
    }

    pub fn role(&self, node: usize) -> AnchorRole {
        if node == self.i1 {
            AnchorRole::Origin
        } else if node == self.i2 {
            AnchorRole::Axis
        } else if node == self.i3 {
            AnchorRole::HalfSpace
        } else {
            AnchorRole::Free
        }
    }

    pub fn indices(&self) -> [usize; 3] {
        [self.i1, self.i2, self.i3]
    }
}

/// Domain of a node's free coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintDomain {
    Fixed,
    /// Open interval of the single free coordinate: the radius `a` on the
    /// disk, the polar angle on the sphere.
    Interval {
        lo: f64,
        hi: f64,
    },
    /// Full manifold restricted to a positive second coordinate.
    UpperHalf,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parameterization {
    pub dimension: usize,
    pub domain: ConstraintDomain,
}

pub fn constrained_degrees_of_freedom(geometry: Geometry, role: AnchorRole) -> Parameterization {
    match role {
        AnchorRole::Origin => Parameterization { dimension: 0, domain: ConstraintDomain::Fixed },
        AnchorRole::Axis => {
            let hi = match geometry {
                Geometry::Hyperbolic => 1.0,
                Geometry::Spherical => PI,
            };
            Parameterization { dimension: 1, domain: ConstraintDomain::Interval { lo: 0.0, hi } }
        }
        AnchorRole::HalfSpace => Parameterization { dimension: 2, domain: ConstraintDomain::UpperHalf },
        AnchorRole::Free => Parameterization { dimension: 2, domain: ConstraintDomain::Unconstrained },
    }
}

// ---------------------------------------------------------------------------
// Isometry solves
// ---------------------------------------------------------------------------

/// Either kind of isometry, applicable to [`LatentPoint`]s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "geometry", rename_all = "lowercase")]
pub enum Isometry {
    Hyperbolic(MoebiusIsometry),
    Spherical(SphereIsometry),
}

impl Isometry {
    pub fn apply(&self, p: &LatentPoint) -> LatentPoint {
        match (self, p) {
            (Isometry::Hyperbolic(m), LatentPoint::Disk(z)) => LatentPoint::Disk(m.apply(z)),
            (Isometry::Spherical(r), LatentPoint::Sphere(u)) => LatentPoint::Sphere(r.apply(u)),
            _ => panic!("isometry and point belong to different geometries"),
        }
    }
}

/// Möbius map `h(z) = β(z − z1)/(1 − conj(z1) z)` sending `z1` to 0 and `z2`
/// to `a = tanh(d(z1, z2)/2) > 0`, with `β = a(1 − conj(z1) z2)/(z2 − z1)`.
/// The conjugation is added when `h(z3)` lands in the lower half.
pub fn solve_hyperbolic_isometry(
    z1: &DiskPoint,
    z2: &DiskPoint,
    z3: &DiskPoint,
) -> Result<MoebiusIsometry, IdentifiabilityError> {
    let d = hyperbolic_distance(z1, z2);
    if d < ANCHOR_SEPARATION_TOL {
        return Err(IdentifiabilityError::DegenerateAnchors(format!("d(z_i1, z_i2) = {d:e}")));
    }
    // w = (z2 − z1)/(1 − conj(z1) z2) has modulus a, so β = conj(w)/|w|
    let w = MoebiusIsometry::from_rotation(0.0, *z1, false).apply(z2);
    let beta = [w.x(), -w.y()];
    let rotate =
        MoebiusIsometry::new(beta, *z1, false).map_err(|e| IdentifiabilityError::DegenerateAnchors(e.to_string()))?;
    let im3 = rotate.apply(z3).y();
    if im3.abs() < HALF_SPACE_TOL {
        return Err(IdentifiabilityError::DegenerateAnchors(format!("Im h(z_i3) = {im3:e}")));
    }
    MoebiusIsometry::new(beta, *z1, im3 < 0.0).map_err(|e| IdentifiabilityError::DegenerateAnchors(e.to_string()))
}

/// Rotation `R3 R2 R1` sending `u1` to the north pole and `u2` to
/// `(a, 0, b)` with `a > 0`, followed by `diag(1, −1, 1)` when the image of
/// `u3` has negative second coordinate.
pub fn solve_sphere_isometry(
    u1: &SpherePoint,
    u2: &SpherePoint,
    u3: &SpherePoint,
) -> Result<SphereIsometry, IdentifiabilityError> {
    let [x1, y1, z1] = u1.coords();
    let theta1 = y1.atan2(z1);
    let (s1, c1) = theta1.sin_cos();
    let theta2 = (-x1).atan2(y1 * s1 + z1 * c1);
    let partial = SphereIsometry { theta1, theta2, theta3: 0.0, reflect: false };
    let v = partial.apply(u2).coords();
    let horizontal = v[0].hypot(v[1]);
    if horizontal < ANCHOR_SEPARATION_TOL {
        return Err(IdentifiabilityError::DegenerateAnchors(format!(
            "z_i1 and z_i2 coincide or are antipodal (sin d = {horizontal:e})"
        )));
    }
    let theta3 = (-v[1]).atan2(v[0]);
    let rotation = SphereIsometry { theta3, ..partial };
    let y3 = rotation.apply(u3).coords()[1];
    if y3.abs() < HALF_SPACE_TOL {
        return Err(IdentifiabilityError::DegenerateAnchors(format!("second coordinate of z_i3 image = {y3:e}")));
    }
    Ok(SphereIsometry { reflect: y3 < 0.0, ..rotation })
}

pub fn solve_isometry(z: &[LatentPoint], anchors: &AnchorSpec) -> Result<Isometry, IdentifiabilityError> {
    let n = z.len();
    AnchorSpec::new(anchors.i1, anchors.i2, anchors.i3, n)?;
    match (&z[anchors.i1], &z[anchors.i2], &z[anchors.i3]) {
        (LatentPoint::Disk(a), LatentPoint::Disk(b), LatentPoint::Disk(c)) => {
            Ok(Isometry::Hyperbolic(solve_hyperbolic_isometry(a, b, c)?))
        }
        (LatentPoint::Sphere(a), LatentPoint::Sphere(b), LatentPoint::Sphere(c)) => {
            Ok(Isometry::Spherical(solve_sphere_isometry(a, b, c)?))
        }
        _ => panic!("anchor points belong to different geometries"),
    }
}

// ---------------------------------------------------------------------------
// Canonical form
// ---------------------------------------------------------------------------

/// Applies the anchor isometry to every point and to the mean of θ_z. The
/// anchor `i1` is set to the canonical origin exactly and `i2` is projected
/// onto its axis to remove rounding residue.
pub fn canonicalize(
    cfg: &LatentConfiguration,
    anchors: &AnchorSpec,
) -> Result<LatentConfiguration, IdentifiabilityError> {
    let iso = solve_isometry(&cfg.z, anchors)?;
    let mut z: Vec<LatentPoint> = cfg.z.iter().map(|p| iso.apply(p)).collect();
    z[anchors.i1] = LatentPoint::canonical_origin(cfg.geometry);
    z[anchors.i2] = snap_to_axis(&z[anchors.i2]);
    let theta_z = match cfg.theta_z {
        ThetaZ::HyperbolicNormal(mut p) => {
            p.mu = *iso.apply(&LatentPoint::Disk(p.mu)).as_disk().expect("disk isometry");
            ThetaZ::HyperbolicNormal(p)
        }
        ThetaZ::VonMisesFisher(mut p) => {
            p.mu = *iso.apply(&LatentPoint::Sphere(p.mu)).as_sphere().expect("sphere isometry");
            ThetaZ::VonMisesFisher(p)
        }
    };
    Ok(LatentConfiguration { geometry: cfg.geometry, z, alpha: cfg.alpha, theta_z })
}

fn snap_to_axis(p: &LatentPoint) -> LatentPoint {
    match p {
        LatentPoint::Disk(d) => LatentPoint::Disk(DiskPoint::from_polar(d.norm(), 0.0)),
        LatentPoint::Sphere(s) => {
            let [x, y, z] = s.coords();
            LatentPoint::Sphere(SpherePoint::from_angles(x.hypot(y).atan2(z), 0.0))
        }
    }
}

/// Point on the canonical axis with free coordinate `t`: `(t, 0)` on the
/// disk, polar angle `t` in the x–z plane on the sphere.
pub fn axis_point(geometry: Geometry, t: f64) -> LatentPoint {
    match geometry {
        Geometry::Hyperbolic => LatentPoint::Disk(DiskPoint::from_polar(t, 0.0)),
        Geometry::Spherical => LatentPoint::Sphere(SpherePoint::from_angles(t, 0.0)),
    }
}

/// Free coordinate of a point on the canonical axis (inverse of [`axis_point`]).
pub fn axis_coordinate(p: &LatentPoint) -> f64 {
    match p {
        LatentPoint::Disk(d) => d.x(),
        LatentPoint::Sphere(s) => {
            let [x, _, z] = s.coords();
            x.atan2(z)
        }
    }
}

/// Second coordinate, the one constrained positive for `i3`.
pub fn second_coordinate(p: &LatentPoint) -> f64 {
    match p {
        LatentPoint::Disk(d) => d.y(),
        LatentPoint::Sphere(s) => s.coords()[1],
    }
}

/// Verifies the canonical-form postconditions: `i1` exactly at the origin,
/// `i2` on its axis with positive free coordinate (within 1e-12), `i3` with
/// strictly positive second coordinate.
pub fn check_anchor_constraints(z: &[LatentPoint], anchors: &AnchorSpec) -> Result<(), IdentifiabilityError> {
    let geometry = z[anchors.i1].geometry();
    if z[anchors.i1] != LatentPoint::canonical_origin(geometry) {
        return Err(IdentifiabilityError::ConstraintViolated {
            node: anchors.i1,
            reason: format!("{:?} is not the canonical origin", z[anchors.i1].coords()),
        });
    }
    let p2 = &z[anchors.i2];
    if second_coordinate(p2).abs() > 1e-12 || p2.coords()[0] <= 0.0 {
        return Err(IdentifiabilityError::ConstraintViolated {
            node: anchors.i2,
            reason: format!("{:?} is off the positive axis", p2.coords()),
        });
    }
    if second_coordinate(&z[anchors.i3]) <= 0.0 {
        return Err(IdentifiabilityError::ConstraintViolated {
            node: anchors.i3,
            reason: format!("{:?} is not in the upper half", z[anchors.i3].coords()),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Anchor selection
// ---------------------------------------------------------------------------

/// Nodes by decreasing degree, ties by increasing index.
fn degree_order(y: &Network) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.node_count()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(y.degree(i)), i));
    order
}

/// `i1` is the highest-degree node, `i2` the highest-degree node at graph
/// distance at least 2 from `i1` (falling back to the next-highest degree),
/// and `i3` the highest-degree node remaining. Ties go to the lower index.
pub fn select_anchors(y: &Network) -> Result<AnchorSpec, IdentifiabilityError> {
    anchor_candidates(y).map(|mut c| c.next().expect("at least one candidate for n ≥ 3"))
}

/// Anchor triples in fallback order: the [`select_anchors`] choice first,
/// then alternatives for `i3`, then for `i2`, each in degree order.
pub fn anchor_candidates(y: &Network) -> Result<impl Iterator<Item = AnchorSpec> + '_, IdentifiabilityError> {
    let n = y.node_count();
    if n < 3 {
        return Err(IdentifiabilityError::TooFewNodes(n));
    }
    let order = degree_order(y);
    let i1 = order[0];
    let hops = y.bfs_distances(i1);
    let far = order[1..].iter().copied().find(|&j| hops[j].is_none_or(|h| h >= 2));
    let first_i2 = far.unwrap_or(order[1]);
    let mut i2_order = vec![first_i2];
    i2_order.extend(order[1..].iter().copied().filter(|&j| j != first_i2));
    Ok(i2_order.into_iter().flat_map(move |i2| {
        order.clone().into_iter().filter(move |&j| j != i1 && j != i2).map(move |i3| AnchorSpec { i1, i2, i3 })
    }))
}

/// Canonicalizes with the first non-degenerate anchor triple in
/// [`anchor_candidates`] order.
pub fn canonicalize_with_fallback(
    cfg: &LatentConfiguration,
    y: &Network,
) -> Result<(AnchorSpec, LatentConfiguration), IdentifiabilityError> {
    let mut last = None;
    for anchors in anchor_candidates(y)? {
        match canonicalize(cfg, &anchors) {
            Ok(c) => return Ok((anchors, c)),
            Err(e @ IdentifiabilityError::DegenerateAnchors(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(IdentifiabilityError::TooFewNodes(y.node_count())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{HyperbolicNormalParams, VmfParams};
    use crate::geometry::{distance, spherical_distance};
    use crate::model::distance_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_disk(rng: &mut ChaCha8Rng) -> DiskPoint {
        DiskPoint::from_polar(rng.random::<f64>().sqrt() * 0.95, rng.random_range(0.0..2.0 * PI))
    }

    fn random_sphere(rng: &mut ChaCha8Rng) -> SpherePoint {
        SpherePoint::from_angles(rng.random::<f64>().mul_add(2.0, -1.0).acos(), rng.random_range(0.0..2.0 * PI))
    }

    fn random_moebius(rng: &mut ChaCha8Rng) -> MoebiusIsometry {
        MoebiusIsometry::from_rotation(rng.random_range(0.0..2.0 * PI), random_disk(rng), rng.random())
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> SphereIsometry {
        SphereIsometry {
            theta1: rng.random_range(-PI..PI),
            theta2: rng.random_range(-PI..PI),
            theta3: rng.random_range(-PI..PI),
            reflect: rng.random(),
        }
    }

    fn hyp_config(rng: &mut ChaCha8Rng, n: usize) -> LatentConfiguration {
        let z = (0..n).map(|_| LatentPoint::Disk(random_disk(rng))).collect();
        let theta = ThetaZ::HyperbolicNormal(HyperbolicNormalParams::new(random_disk(rng), 1.0).unwrap());
        LatentConfiguration::new(Geometry::Hyperbolic, z, 0.3, theta).unwrap()
    }

    fn sphere_config(rng: &mut ChaCha8Rng, n: usize) -> LatentConfiguration {
        let z = (0..n).map(|_| LatentPoint::Sphere(random_sphere(rng))).collect();
        let theta = ThetaZ::VonMisesFisher(VmfParams::new(random_sphere(rng), 2.0).unwrap());
        LatentConfiguration::new(Geometry::Spherical, z, 0.3, theta).unwrap()
    }

    const ANCHORS: AnchorSpec = AnchorSpec { i1: 0, i2: 1, i3: 2 };

    #[test]
    fn hyperbolic_already_canonical_is_identity() {
        let iso = solve_hyperbolic_isometry(
            &DiskPoint::ORIGIN,
            &DiskPoint::new(0.5, 0.0).unwrap(),
            &DiskPoint::new(0.1, 0.3).unwrap(),
        )
        .unwrap();
        assert_eq!(iso.beta(), [1.0, 0.0]);
        assert_eq!(iso.z0(), DiskPoint::ORIGIN);
        assert!(!iso.reflect());
    }

    #[test]
    fn hyperbolic_axis_radius_from_distance() {
        // d = ln 3 gives cosh d = 5/3 and a = √((2/3)/(8/3)) = 1/2
        let d = 3f64.ln();
        let a = ((d.cosh() - 1.0) / (d.cosh() + 1.0)).sqrt();
        assert!((a - 0.5).abs() < 1e-15);
        let z1 = DiskPoint::new(-0.2, 0.1).unwrap();
        let iso0 = MoebiusIsometry::from_rotation(0.7, DiskPoint::new(0.3, -0.4).unwrap(), false);
        // place z2 at distance ln 3 from z1 by mapping (0.5, 0) back through a known isometry
        let inv_origin = iso0.apply(&DiskPoint::ORIGIN);
        let inv_half = iso0.apply(&DiskPoint::new(0.5, 0.0).unwrap());
        assert!((hyperbolic_distance(&inv_origin, &inv_half) - d).abs() < 1e-12);
        let iso = solve_hyperbolic_isometry(&inv_origin, &inv_half, &z1).unwrap();
        let img = iso.apply(&inv_half);
        assert!((img.x() - 0.5).abs() < 1e-12 && img.y().abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_postconditions_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let (a, b, c) = (random_disk(&mut rng), random_disk(&mut rng), random_disk(&mut rng));
            let iso = solve_hyperbolic_isometry(&a, &b, &c).unwrap();
            let (ha, hb, hc) = (iso.apply(&a), iso.apply(&b), iso.apply(&c));
            assert!(ha.norm() < 1e-12);
            assert!(hb.y().abs() < 1e-12 && hb.x() > 0.0);
            assert!(hc.y() > 0.0);
            let a_want = (hyperbolic_distance(&a, &b) / 2.0).tanh();
            assert!((hb.x() - a_want).abs() < 1e-10);
        }
    }

    #[test]
    fn sphere_trivial_and_pole_cases() {
        let (s, c) = 0.8f64.sin_cos();
        let iso = solve_sphere_isometry(
            &SpherePoint::NORTH_POLE,
            &SpherePoint::new([s, 0.0, c]).unwrap(),
            &SpherePoint::new([0.1, 0.5, 0.3]).unwrap(),
        )
        .unwrap();
        assert_eq!(iso, SphereIsometry::IDENTITY);

        let e1 = SpherePoint::new([1.0, 0.0, 0.0]).unwrap();
        let other = SpherePoint::new([0.3, 0.4, 0.5]).unwrap();
        let third = SpherePoint::new([-0.2, 0.1, 0.9]).unwrap();
        let iso = solve_sphere_isometry(&e1, &other, &third).unwrap();
        let img = iso.apply(&e1).coords();
        assert!(img[0].abs() < 1e-10 && img[1].abs() < 1e-10 && (img[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_orthogonal_anchors_map_to_e1() {
        let u1 = SpherePoint::new([0.0, 1.0, 0.0]).unwrap();
        let u2 = SpherePoint::new([0.0, 0.0, 1.0]).unwrap();
        let u3 = SpherePoint::new([1.0, 0.2, 0.3]).unwrap();
        let iso = solve_sphere_isometry(&u1, &u2, &u3).unwrap();
        let b = iso.apply(&u2).coords();
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12 && b[2].abs() < 1e-12);
    }

    #[test]
    fn sphere_postconditions_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..1000 {
            let (a, b, c) = (random_sphere(&mut rng), random_sphere(&mut rng), random_sphere(&mut rng));
            let iso = solve_sphere_isometry(&a, &b, &c).unwrap();
            let (ia, ib, ic) = (iso.apply(&a).coords(), iso.apply(&b).coords(), iso.apply(&c).coords());
            assert!(ia[0].abs() < 1e-12 && ia[1].abs() < 1e-12 && (ia[2] - 1.0).abs() < 1e-12);
            assert!(ib[1].abs() < 1e-12 && ib[0] > 0.0);
            assert!((ib[2] - spherical_distance(&a, &b).cos()).abs() < 1e-10);
            assert!(ic[1] > 0.0);
        }
    }

    #[test]
    fn degenerate_anchor_detection() {
        let p = DiskPoint::new(0.2, 0.1).unwrap();
        let q = DiskPoint::new(0.4, 0.0).unwrap();
        assert!(matches!(solve_hyperbolic_isometry(&p, &p, &q), Err(IdentifiabilityError::DegenerateAnchors(_))));
        // z3 on the geodesic through 0 and (0.5, 0)
        assert!(matches!(
            solve_hyperbolic_isometry(
                &DiskPoint::ORIGIN,
                &DiskPoint::new(0.5, 0.0).unwrap(),
                &DiskPoint::new(-0.3, 0.0).unwrap()
            ),
            Err(IdentifiabilityError::DegenerateAnchors(_))
        ));
        let n = SpherePoint::NORTH_POLE;
        let e = SpherePoint::new([1.0, 0.0, 0.0]).unwrap();
        assert!(solve_sphere_isometry(&n, &n.neg(), &e).is_err());
        assert!(solve_sphere_isometry(&n, &n, &e).is_err());
        assert!(solve_sphere_isometry(&n, &e, &SpherePoint::new([-1.0, 0.0, 0.5]).unwrap()).is_err());
    }

    #[test]
    fn canonicalize_preserves_distances_and_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for geometry in [Geometry::Hyperbolic, Geometry::Spherical] {
            for _ in 0..50 {
                let cfg = match geometry {
                    Geometry::Hyperbolic => hyp_config(&mut rng, 15),
                    Geometry::Spherical => sphere_config(&mut rng, 15),
                };
                let c1 = canonicalize(&cfg, &ANCHORS).unwrap();
                check_anchor_constraints(&c1.z, &ANCHORS).unwrap();
                for (a, b) in distance_matrix(&cfg.z).iter().zip(distance_matrix(&c1.z)) {
                    assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
                }
                let mu_d = distance(&cfg.theta_z.mean(), &cfg.z[3]);
                let mu_d1 = distance(&c1.theta_z.mean(), &c1.z[3]);
                assert!((mu_d - mu_d1).abs() < 1e-9);
                let c2 = canonicalize(&c1, &ANCHORS).unwrap();
                for (p, q) in c1.z.iter().zip(&c2.z) {
                    for (x, y) in p.coords().iter().zip(q.coords()) {
                        assert!((x - y).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn isometric_configurations_share_a_canonical_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..100 {
            let cfg = hyp_config(&mut rng, 12);
            let iso = random_moebius(&mut rng);
            let moved = LatentConfiguration {
                z: cfg.z.iter().map(|p| LatentPoint::Disk(iso.apply(p.as_disk().unwrap()))).collect(),
                ..cfg.clone()
            };
            let a = canonicalize(&cfg, &ANCHORS).unwrap();
            let b = canonicalize(&moved, &ANCHORS).unwrap();
            for (p, q) in a.z.iter().zip(&b.z) {
                assert!(distance(p, q) < 1e-8, "{p:?} vs {q:?}");
            }

            let cfg = sphere_config(&mut rng, 12);
            let rot = random_rotation(&mut rng);
            let moved = LatentConfiguration {
                z: cfg.z.iter().map(|p| LatentPoint::Sphere(rot.apply(p.as_sphere().unwrap()))).collect(),
                ..cfg.clone()
            };
            let a = canonicalize(&cfg, &ANCHORS).unwrap();
            let b = canonicalize(&moved, &ANCHORS).unwrap();
            for (p, q) in a.z.iter().zip(&b.z) {
                assert!(distance(p, q) < 1e-8);
            }
        }
    }

    #[test]
    fn anchor_selection_rules() {
        let star = Network::from_edges(5, &[(2, 0), (2, 1), (2, 3), (2, 4)]).unwrap();
        let a = select_anchors(&star).unwrap();
        assert_eq!(a.i1, 2);
        // every leaf is at distance 1, so i2 falls back to degree order
        assert_eq!((a.i2, a.i3), (0, 1));

        let path = Network::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let a = select_anchors(&path).unwrap();
        assert_eq!(a, AnchorSpec { i1: 1, i2: 3, i3: 2 });

        assert_eq!(select_anchors(&Network::empty(2)), Err(IdentifiabilityError::TooFewNodes(2)));

        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let mut y = Network::empty(9);
            for i in 0..9 {
                for j in i + 1..9 {
                    if rng.random::<f64>() < 0.3 {
                        y.set_edge(i, j, true);
                    }
                }
            }
            let a = select_anchors(&y).unwrap();
            assert!(a.i1 != a.i2 && a.i1 != a.i3 && a.i2 != a.i3);
            assert_eq!(a, select_anchors(&y).unwrap());
            let all: Vec<_> = anchor_candidates(&y).unwrap().collect();
            assert_eq!(all.len(), 8 * 7);
            assert_eq!(all[0], a);
        }
    }

    #[test]
    fn fallback_skips_degenerate_triples() {
        let y = Network::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2)]).unwrap();
        let anchors = select_anchors(&y).unwrap();
        let mut z = vec![LatentPoint::Disk(DiskPoint::ORIGIN); 4];
        z[anchors.i2] = LatentPoint::Disk(DiskPoint::new(0.4, 0.0).unwrap());
        // first-choice i3 sits on the axis geodesic
        z[anchors.i3] = LatentPoint::Disk(DiskPoint::new(-0.4, 0.0).unwrap());
        let spare = (0..4).find(|i| !anchors.indices().contains(i)).unwrap();
        z[spare] = LatentPoint::Disk(DiskPoint::new(0.1, -0.3).unwrap());
        let cfg =
            LatentConfiguration::new(Geometry::Hyperbolic, z, 0.0, ThetaZ::centred(Geometry::Hyperbolic, 1.0).unwrap())
                .unwrap();
        assert!(canonicalize(&cfg, &anchors).is_err());
        let (chosen, canon) = canonicalize_with_fallback(&cfg, &y).unwrap();
        assert_eq!(chosen.i3, spare);
        check_anchor_constraints(&canon.z, &chosen).unwrap();
    }

    #[test]
    fn degrees_of_freedom() {
        for g in [Geometry::Hyperbolic, Geometry::Spherical] {
            assert_eq!(constrained_degrees_of_freedom(g, AnchorRole::Origin).dimension, 0);
            assert_eq!(constrained_degrees_of_freedom(g, AnchorRole::Axis).dimension, 1);
            assert_eq!(constrained_degrees_of_freedom(g, AnchorRole::HalfSpace).domain, ConstraintDomain::UpperHalf);
            assert_eq!(constrained_degrees_of_freedom(g, AnchorRole::Free).dimension, 2);
        }
        assert_eq!(
            constrained_degrees_of_freedom(Geometry::Hyperbolic, AnchorRole::Axis).domain,
            ConstraintDomain::Interval { lo: 0.0, hi: 1.0 }
        );
        assert_eq!(
            constrained_degrees_of_freedom(Geometry::Spherical, AnchorRole::Axis).domain,
            ConstraintDomain::Interval { lo: 0.0, hi: PI }
        );
        let p = axis_point(Geometry::Spherical, 0.9);
        assert!((axis_coordinate(&p) - 0.9).abs() < 1e-15);
        assert!(second_coordinate(&p).abs() < 1e-15);
    }
}
