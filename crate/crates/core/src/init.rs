//! Starting values for inference: graph distances, stress-minimizing
//! multidimensional scaling on the disk or the sphere, and a grid search
//! for α.

use crate::geometry::{
    disk_exp_map, disk_log_map, distance, sphere_log_map, DiskPoint, Geometry, LatentPoint, SpherePoint,
};
use crate::identifiability::{canonicalize, canonicalize_with_fallback, AnchorSpec, IdentifiabilityError};
use crate::model::{log_likelihood_from_distances, LatentConfiguration, Network, ThetaZ};
use crate::par::{compensated_sum, map_range, map_slice, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const MDS_RESTARTS: usize = 5;
pub const MDS_MAX_ITERATIONS: usize = 2000;
pub const MDS_INITIAL_STEP: f64 = 0.1;
pub const MDS_RELATIVE_TOL: f64 = 1e-8;
const MAX_HALVINGS: usize = 40;

/// Grid `−10, −9.9, …, 10` for the α search.
pub fn alpha_grid() -> Vec<f64> {
    (0..=200).map(|k| (k as f64 - 100.0) / 10.0).collect()
}

/// All-pairs hop counts as a row-major `n × n` matrix. Unreachable pairs
/// get one more than the largest finite distance.
pub fn graph_distances(y: &Network) -> Vec<f64> {
    let n = y.node_count();
    let rows: Vec<Vec<Option<usize>>> = map_range(Execution::default(), n, |i| y.bfs_distances(i));
    let max_finite = rows.iter().flatten().filter_map(|d| *d).max().unwrap_or(0);
    rows.into_iter().flatten().map(|d| d.unwrap_or(max_finite + 1) as f64).collect()
}

/// Raw stress `Σ_{i<j} (d(z_i, z_j) − D_ij)²`.
pub fn mds_stress(target: &[f64], z: &[LatentPoint]) -> f64 {
    let n = z.len();
    compensated_sum((0..n).flat_map(|i| {
        (i + 1..n).map(move |j| {
            let r = distance(&z[i], &z[j]) - target[i * n + j];
            r * r
        })
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    pub points: Vec<LatentPoint>,
    pub stress: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that produced `points`.
    pub restart: usize,
}

/// Minimizes raw stress by Riemannian gradient descent from
/// [`MDS_RESTARTS`] random starts and keeps the lowest-stress result (ties
/// go to the lower restart index). Each iteration tries step
/// [`MDS_INITIAL_STEP`] and halves it until the stress decreases.
pub fn embed_mds<R: Rng + ?Sized>(target: &[f64], geometry: Geometry, rng: &mut R, exec: Execution) -> MdsResult {
    let n = (target.len() as f64).sqrt().round() as usize;
    assert_eq!(n * n, target.len(), "target must be a square matrix");
    let seeds: Vec<u64> = (0..MDS_RESTARTS).map(|_| rng.random()).collect();
    let runs = map_slice(exec, &seeds, |&seed| {
        let mut local = ChaCha8Rng::seed_from_u64(seed);
        let start = random_start(n, geometry, &mut local);
        descend(target, start)
    });
    runs.into_iter()
        .enumerate()
        .map(|(restart, r)| MdsResult { restart, ..r })
        .min_by(|a, b| a.stress.total_cmp(&b.stress).then(a.restart.cmp(&b.restart)))
        .expect("at least one restart")
}

fn random_start<R: Rng + ?Sized>(n: usize, geometry: Geometry, rng: &mut R) -> Vec<LatentPoint> {
    (0..n)
        .map(|_| match geometry {
            Geometry::Hyperbolic => LatentPoint::Disk(DiskPoint::from_polar(
                0.8 * rng.random::<f64>().sqrt(),
                rng.random_range(0.0..2.0 * PI),
            )),
            Geometry::Spherical => {
                let cos_omega: f64 = rng.random_range(-1.0..1.0);
                LatentPoint::Sphere(SpherePoint::from_angles(cos_omega.acos(), rng.random_range(0.0..2.0 * PI)))
            }
        })
        .collect()
}

/// Riemannian gradient of the stress at every point, using
/// `grad_{z_i} d(z_i, z_j) = −log_{z_i}(z_j) / d(z_i, z_j)`.
fn stress_gradient(target: &[f64], z: &[LatentPoint]) -> Vec<[f64; 3]> {
    let n = z.len();
    (0..n)
        .map(|i| {
            let mut g = [0.0; 3];
            for j in (0..n).filter(|&j| j != i) {
                let d = distance(&z[i], &z[j]);
                if d < 1e-12 {
                    continue;
                }
                let v = match (&z[i], &z[j]) {
                    (LatentPoint::Disk(a), LatentPoint::Disk(b)) => {
                        let l = disk_log_map(a, b);
                        [l[0], l[1], 0.0]
                    }
                    (LatentPoint::Sphere(a), LatentPoint::Sphere(b)) => sphere_log_map(a, b),
                    _ => unreachable!("mixed geometries"),
                };
                let w = -2.0 * (d - target[i * n + j]) / d;
                for k in 0..3 {
                    g[k] += w * v[k];
                }
            }
            g
        })
        .collect()
}

fn take_step(z: &[LatentPoint], grad: &[[f64; 3]], step: f64) -> Vec<LatentPoint> {
    z.iter()
        .zip(grad)
        .map(|(p, g)| match p {
            LatentPoint::Disk(a) => LatentPoint::Disk(disk_exp_map(a, [-step * g[0], -step * g[1]])),
            LatentPoint::Sphere(u) => {
                let c = u.coords();
                let moved = [c[0] - step * g[0], c[1] - step * g[1], c[2] - step * g[2]];
                LatentPoint::Sphere(SpherePoint::new(moved).unwrap_or(*u))
            }
        })
        .collect()
}

fn descend(target: &[f64], mut z: Vec<LatentPoint>) -> MdsResult {
    let mut stress = mds_stress(target, &z);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MDS_MAX_ITERATIONS {
        iterations += 1;
        let grad = stress_gradient(target, &z);
        let mut step = MDS_INITIAL_STEP;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = take_step(&z, &grad, step);
            let s = mds_stress(target, &cand);
            if s < stress {
                accepted = Some((cand, s));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, s)) = accepted else {
            converged = true;
            break;
        };
        let rel = (stress - s) / stress.max(f64::MIN_POSITIVE);
        z = cand;
        stress = s;
        if rel < MDS_RELATIVE_TOL || stress == 0.0 {
            converged = true;
            break;
        }
    }
    MdsResult { points: z, stress, iterations, converged, restart: 0 }
}

/// Maximizer of `ln p(Y | Z, α)` over [`alpha_grid`]. Among equal values
/// the grid point closest to zero wins.
pub fn grid_search_alpha(y: &Network, z: &[LatentPoint], exec: Execution) -> f64 {
    let dist = crate::model::distance_matrix(z);
    let grid = alpha_grid();
    let values = map_slice(exec, &grid, |&a| log_likelihood_from_distances(y, &dist, a));
    let mut best = (grid[0], values[0]);
    for (&a, &v) in grid.iter().zip(&values).skip(1) {
        if v > best.1 || (v == best.1 && a.abs() < best.0.abs()) {
            best = (a, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initialization {
    pub points: Vec<LatentPoint>,
    pub alpha: f64,
    pub stress: f64,
}

/// Graph-distance MDS followed by the α grid search.
pub fn initialize<R: Rng + ?Sized>(y: &Network, geometry: Geometry, rng: &mut R, exec: Execution) -> Initialization {
    let target = graph_distances(y);
    let mds = embed_mds(&target, geometry, rng, exec);
    let alpha = grid_search_alpha(y, &mds.points, exec);
    Initialization { points: mds.points, alpha, stress: mds.stress }
}

/// Initialization moved onto the anchors, with θ_z attached.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalStart {
    pub anchors: AnchorSpec,
    pub config: LatentConfiguration,
    pub stress: f64,
}

/// [`initialize`], then canonicalization onto `anchors` or, when `None`,
/// onto the first non-degenerate degree-ranked anchor triple.
pub fn canonical_start<R: Rng + ?Sized>(
    y: &Network,
    theta_z: ThetaZ,
    anchors: Option<AnchorSpec>,
    rng: &mut R,
    exec: Execution,
) -> Result<CanonicalStart, IdentifiabilityError> {
    let n = y.node_count();
    if n < 3 {
        return Err(IdentifiabilityError::TooFewNodes(n));
    }
    let geometry = theta_z.geometry();
    let init = initialize(y, geometry, rng, exec);
    let raw = LatentConfiguration::new(geometry, init.points, init.alpha, theta_z)
        .expect("embedding matches the network and geometry");
    let (anchors, config) = match anchors {
        Some(a) => (a, canonicalize(&raw, &a)?),
        None => canonicalize_with_fallback(&raw, y)?,
    };
    Ok(CanonicalStart { anchors, config: LatentConfiguration { theta_z, ..config }, stress: init.stress })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::karate;
    use crate::model::{distance_matrix, sample_network, ThetaZ};

    #[test]
    fn graph_distance_examples() {
        let d = graph_distances(&Network::complete(5));
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(d[i * 5 + j], if i == j { 0.0 } else { 1.0 });
            }
        }
        let path = Network::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(graph_distances(&path)[2], 2.0);
        let split = Network::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        let d = graph_distances(&split);
        assert_eq!(d[3], 3.0);
        assert_eq!(d[3 * 4], 3.0);
    }

    /// Floyd–Warshall, independent of the BFS code path.
    fn floyd(y: &Network) -> Vec<f64> {
        let n = y.node_count();
        let mut d = vec![f64::INFINITY; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
            for j in y.neighbors(i) {
                d[i * n + j] = 1.0;
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                    }
                }
            }
        }
        d
    }

    #[test]
    fn karate_distances_match_floyd_warshall() {
        let k = karate();
        let d = graph_distances(&k);
        assert_eq!(d, floyd(&k));
        // members 1 and 34 are not linked but share neighbours
        assert_eq!(d[33], 2.0);
    }

    #[test]
    fn mds_recovers_planted_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for geometry in [Geometry::Hyperbolic, Geometry::Spherical] {
            let truth = random_start(4, geometry, &mut rng);
            let target = distance_matrix(&truth);
            let fit = embed_mds(&target, geometry, &mut rng, Execution::default());
            assert!(fit.stress < 1e-6, "{geometry}: {}", fit.stress);
            let got = distance_matrix(&fit.points);
            for (a, b) in got.iter().zip(&target) {
                assert!((a - b).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn mds_equal_distances_give_equilateral_sphere_triangle() {
        let target = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let fit = embed_mds(&target, Geometry::Spherical, &mut rng, Execution::default());
        let d = distance_matrix(&fit.points);
        assert!((d[1] - d[2]).abs() < 1e-6 && (d[1] - d[5]).abs() < 1e-6);
    }

    #[test]
    fn descent_never_increases_stress() {
        let target = graph_distances(&karate());
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for geometry in [Geometry::Hyperbolic, Geometry::Spherical] {
            let mut z = random_start(34, geometry, &mut rng);
            let mut s = mds_stress(&target, &z);
            for _ in 0..20 {
                let r = descend(&target, z.clone());
                assert!(r.stress <= s);
                z = take_step(&r.points, &stress_gradient(&target, &r.points), 1e-3);
                s = mds_stress(&target, &z);
            }
        }
    }

    #[test]
    fn mds_is_seed_deterministic_across_modes() {
        let target = graph_distances(&karate());
        let a = embed_mds(&target, Geometry::Hyperbolic, &mut ChaCha8Rng::seed_from_u64(5), Execution::Sequential);
        let b = embed_mds(&target, Geometry::Hyperbolic, &mut ChaCha8Rng::seed_from_u64(5), Execution::Parallel);
        assert_eq!(a, b);
        assert!(a.stress.is_finite() && a.stress >= 0.0);
    }

    #[test]
    fn grid_search_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let z = random_start(6, Geometry::Hyperbolic, &mut rng);
        assert_eq!(grid_search_alpha(&Network::empty(6), &z, Execution::default()), -10.0);
        let near = vec![LatentPoint::Disk(DiskPoint::new(1e-9, 0.0).unwrap()); 6];
        assert_eq!(grid_search_alpha(&Network::complete(6), &near, Execution::default()), 10.0);
    }

    #[test]
    fn grid_search_is_exhaustive_maximum() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let theta = ThetaZ::centred(Geometry::Spherical, 1.0).unwrap();
        let (y, cfg) = sample_network(0.4, &theta, 20, &mut rng).unwrap();
        let a = grid_search_alpha(&y, &cfg.z, Execution::default());
        let grid = alpha_grid();
        assert!(grid.contains(&a));
        let d = distance_matrix(&cfg.z);
        let best = log_likelihood_from_distances(&y, &d, a);
        assert!(grid.iter().all(|&g| log_likelihood_from_distances(&y, &d, g) <= best));
    }

    #[test]
    fn grid_search_recovers_planted_alpha() {
        let theta = ThetaZ::centred(Geometry::Hyperbolic, 1.0).unwrap();
        let mut total = 0.0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let (y, cfg) = sample_network(1.0, &theta, 30, &mut rng).unwrap();
            total += grid_search_alpha(&y, &cfg.z, Execution::default());
        }
        assert!((total / 10.0 - 1.0).abs() < 1.0, "mean α̂ = {}", total / 10.0);
    }
}
