use nalgebra::{Matrix2, Vector2, Vector3};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DomainSampleSet, TriangleMesh};
use crate::error::{Error, Result};
use crate::points::PointSet;

/// Rejection sampling gives up after this many proposals...
pub const MAX_DENSITY_PROPOSALS: u64 = 10_000_000;
/// ...if the acceptance rate is still below this.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-4;

/// Area-weighted uniform samples on the mesh surface, with face normals.
pub fn sample_surface_uniform(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<DomainSampleSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let faces = WeightedIndex::new(&areas)
        .map_err(|_| Error::DegenerateDomain("mesh has zero surface area".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(3 * count);
    let mut normals = Vec::with_capacity(count);
    for _ in 0..count {
        let f = faces.sample(&mut rng);
        let [a, b, c] = mesh.corners(f);
        let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let p = a + (b - a) * u + (c - a) * v;
        coords.extend_from_slice(p.as_slice());
        // Faces drawn with positive probability have positive area.
        normals.push(mesh.face_normal(f).expect("sampled face has positive area"));
    }
    DomainSampleSet::with_normals(PointSet::euclidean(3, coords)?, normals)
}

/// `max_d max(0, n . d)` over the unit-normalized `directions`.
pub fn normal_alignment_scores(normals: &[Vector3<f64>], directions: &[Vector3<f64>]) -> Vec<f64> {
    let dirs: Vec<Vector3<f64>> = directions.iter().map(|d| d.normalize()).collect();
    normals
        .iter()
        .map(|n| dirs.iter().map(|d| n.dot(d).max(0.0)).fold(0.0, f64::max).min(1.0))
        .collect()
}

/// Resamples `count` points with replacement, proportionally to `scores`.
///
/// The output carries uniform weights, so the metric's equal-weight sum over
/// samples applies to it unchanged.
pub fn importance_filter(
    samples: &DomainSampleSet,
    scores: &[f64],
    count: usize,
    seed: u64,
) -> Result<DomainSampleSet> {
    if scores.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            found: scores.len(),
        });
    }
    if count == 0 {
        return Err(Error::invalid("importance filter output count must be at least 1"));
    }
    if let Some(bad) = scores.iter().position(|s| !(0.0..=1.0).contains(s)) {
        return Err(Error::invalid(format!(
            "importance score {bad} = {} is outside [0, 1]",
            scores[bad]
        )));
    }
    let dist = WeightedIndex::new(scores)
        .map_err(|_| Error::DegenerateDomain("all importance scores are zero".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks: Vec<usize> = (0..count).map(|_| dist.sample(&mut rng)).collect();
    Ok(DomainSampleSet {
        points: samples.points.select(&picks),
        normals: samples
            .normals
            .as_ref()
            .map(|n| picks.iter().map(|&i| n[i]).collect()),
        weights: None,
    })
}

/// Moves every point `buffer` meters along its normal.
pub fn offset_along_normals(samples: &DomainSampleSet, buffer: f64) -> Result<DomainSampleSet> {
    let normals = samples
        .normals
        .as_ref()
        .ok_or_else(|| Error::invalid("offset along normals requires normals"))?;
    if !buffer.is_finite() {
        return Err(Error::invalid("buffer must be finite"));
    }
    let points = match &samples.points {
        PointSet::Euclidean { dim: 3, coords } => {
            let mut out = coords.clone();
            for (p, n) in out.chunks_mut(3).zip(normals) {
                for k in 0..3 {
                    p[k] += buffer * n[k];
                }
            }
            PointSet::Euclidean { dim: 3, coords: out }
        }
        PointSet::Poses(poses) => PointSet::Poses(
            poses
                .iter()
                .zip(normals)
                .map(|(p, n)| {
                    let mut q = *p;
                    q.translation += n * buffer;
                    q
                })
                .collect(),
        ),
        _ => return Err(Error::invalid("normal offsets need 3D points or poses")),
    };
    Ok(DomainSampleSet {
        points,
        normals: samples.normals.clone(),
        weights: samples.weights.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 2],
    /// Row-major covariance.
    pub cov: [[f64; 2]; 2],
}

/// Planar utility density. An empty mixture means the uniform density.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    #[serde(default)]
    pub components: Vec<GaussianComponent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds2 {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Bounds2 {
    pub fn unit() -> Self {
        Self {
            lo: [0.0, 0.0],
            hi: [1.0, 1.0],
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        (0..2).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }
}

struct PreparedComponent {
    weight: f64,
    mean: Vector2<f64>,
    precision: Matrix2<f64>,
    norm: f64,
}

impl GaussianMixture {
    fn prepare(&self) -> Result<Vec<PreparedComponent>> {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        self.components
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if !(c.weight > 0.0 && c.weight.is_finite()) {
                    return Err(Error::invalid(format!("mixture component {i} has non-positive weight")));
                }
                let cov = Matrix2::new(c.cov[0][0], c.cov[0][1], c.cov[1][0], c.cov[1][1]);
                if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 || cov.cholesky().is_none() {
                    return Err(Error::invalid(format!(
                        "mixture component {i} covariance is not symmetric positive definite"
                    )));
                }
                let det = cov.determinant();
                Ok(PreparedComponent {
                    weight: c.weight / total,
                    mean: Vector2::new(c.mean[0], c.mean[1]),
                    precision: cov.try_inverse().expect("positive definite"),
                    norm: 1.0 / (2.0 * std::f64::consts::PI * det.sqrt()),
                })
            })
            .collect()
    }

    /// Normalized mixture density (the uniform fallback returns 1).
    pub fn density(&self, p: [f64; 2]) -> Result<f64> {
        let comps = self.prepare()?;
        Ok(eval_prepared(&comps, Vector2::new(p[0], p[1])))
    }
}

fn eval_prepared(comps: &[PreparedComponent], x: Vector2<f64>) -> f64 {
    if comps.is_empty() {
        return 1.0;
    }
    comps
        .iter()
        .map(|c| {
            let d = x - c.mean;
            c.weight * c.norm * (-0.5 * d.dot(&(c.precision * d))).exp()
        })
        .sum()
}

/// Rejection sampling of the mixture restricted to `bounds`, with uniform proposals.
pub fn sample_density_2d(
    density: &GaussianMixture,
    bounds: Bounds2,
    count: usize,
    seed: u64,
) -> Result<DomainSampleSet> {
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if (0..2).any(|k| !(bounds.hi[k] > bounds.lo[k]) || !bounds.lo[k].is_finite() || !bounds.hi[k].is_finite()) {
        return Err(Error::invalid("density bounds are degenerate"));
    }
    let comps = density.prepare()?;
    let ceiling: f64 = if comps.is_empty() {
        1.0
    } else {
        comps.iter().map(|c| c.weight * c.norm).sum()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::with_capacity(2 * count);
    let mut proposals: u64 = 0;
    let mut accepted: u64 = 0;
    while (accepted as usize) < count {
        let x = rng.random_range(bounds.lo[0]..bounds.hi[0]);
        let y = rng.random_range(bounds.lo[1]..bounds.hi[1]);
        let u: f64 = rng.random();
        proposals += 1;
        if u * ceiling < eval_prepared(&comps, Vector2::new(x, y)) {
            coords.push(x);
            coords.push(y);
            accepted += 1;
        }
        if proposals >= MAX_DENSITY_PROPOSALS {
            let rate = accepted as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE_RATE {
                return Err(Error::PathologicalDensity { rate, proposals });
            }
        }
    }
    DomainSampleSet::new(PointSet::euclidean(2, coords)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::parse_obj;

    fn cube() -> TriangleMesh {
        let text = "\
v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1
f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
        parse_obj(text, "cube.obj").unwrap()
    }

    #[test]
    fn single_triangle_samples_lie_on_plane() {
        let mesh = parse_obj("v 0 0 1\nv 2 0 0\nv 0 3 0\nf 1 2 3\n", "t.obj").unwrap();
        let s = sample_surface_uniform(&mesh, 100, 4).unwrap();
        let n = mesh.face_normal(0).unwrap();
        let a = mesh.vertices[0];
        for i in 0..100 {
            assert!((s.points.position(i) - a).dot(&n).abs() < 1e-9);
        }
        let one = sample_surface_uniform(&mesh, 1, 0).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one.normals.unwrap()[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn faces_are_chosen_by_area() {
        // Areas 1 and 3: right triangles with legs (1, 2) and (2, 3).
        let text = "v 0 0 0\nv 1 0 0\nv 0 2 0\nv 10 0 0\nv 12 0 0\nv 10 3 0\nf 1 2 3\nf 4 5 6\n";
        let mesh = parse_obj(text, "two.obj").unwrap();
        assert_eq!(mesh.face_area(0), 1.0);
        assert_eq!(mesh.face_area(1), 3.0);
        let s = sample_surface_uniform(&mesh, 10_000, 1).unwrap();
        let large = (0..s.len()).filter(|&i| s.points.position(i).x >= 10.0).count();
        let frac = large as f64 / 10_000.0;
        assert!((frac - 0.75).abs() < 0.02, "fraction {frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = cube();
        assert_eq!(sample_surface_uniform(&m, 50, 9).unwrap(), sample_surface_uniform(&m, 50, 9).unwrap());
        assert_ne!(sample_surface_uniform(&m, 50, 9).unwrap(), sample_surface_uniform(&m, 50, 10).unwrap());
    }

    #[test]
    fn importance_with_equal_scores_is_uniform() {
        let pts: Vec<[f64; 1]> = (0..10).map(|i| [i as f64]).collect();
        let s = DomainSampleSet::new(PointSet::from_rows(&pts).unwrap()).unwrap();
        let out = importance_filter(&s, &[0.5; 10], 10_000, 3).unwrap();
        let mut counts = [0usize; 10];
        for p in out.points.iter() {
            counts[p.position().x as usize] += 1;
        }
        let expected = 1000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99.9% quantile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 27.877, "chi2 {chi2}");
    }

    #[test]
    fn importance_keeps_only_positive_scores() {
        let s = DomainSampleSet::new(PointSet::from_rows(&[[1.0], [2.0], [3.0]]).unwrap()).unwrap();
        let out = importance_filter(&s, &[1.0, 0.0, 0.0], 100, 0).unwrap();
        assert!(out.points.iter().all(|p| p.position().x == 1.0));
        assert!(importance_filter(&s, &[0.0; 3], 10, 0).is_err());
        assert!(importance_filter(&s, &[1.5, 0.0, 0.0], 10, 0).is_err());
    }

    #[test]
    fn normal_alignment_isolates_top_face() {
        let s = sample_surface_uniform(&cube(), 2000, 2).unwrap();
        let scores = normal_alignment_scores(s.normals.as_ref().unwrap(), &[Vector3::z()]);
        let top = importance_filter(&s, &scores, 500, 5).unwrap();
        for (i, n) in top.normals.as_ref().unwrap().iter().enumerate() {
            assert_eq!(*n, Vector3::z());
            assert!((top.points.position(i).z - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn offsets() {
        let pts = PointSet::from_rows(&[[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]]).unwrap();
        let s = DomainSampleSet::with_normals(pts, vec![Vector3::z(); 2]).unwrap();
        assert_eq!(offset_along_normals(&s, 0.0).unwrap(), s);
        let up = offset_along_normals(&s, 0.1).unwrap();
        for i in 0..2 {
            assert_eq!(up.points.position(i).z, s.points.position(i).z + 0.1);
        }
        let cube_samples = sample_surface_uniform(&cube(), 200, 1).unwrap();
        let back = offset_along_normals(&offset_along_normals(&cube_samples, 0.37).unwrap(), -0.37).unwrap();
        for i in 0..200 {
            assert!((back.points.position(i) - cube_samples.points.position(i)).abs().max() < 1e-12);
        }
        let bare = DomainSampleSet::new(PointSet::from_rows(&[[0.0, 0.0, 0.0]]).unwrap()).unwrap();
        assert!(offset_along_normals(&bare, 0.1).is_err());
    }

    #[test]
    fn gaussian_mean_within_clt_bound() {
        let sd = 0.1;
        let mix = GaussianMixture {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: [0.5, 0.5],
                cov: [[sd * sd, 0.0], [0.0, sd * sd]],
            }],
        };
        let m = 10_000;
        let s = sample_density_2d(&mix, Bounds2::unit(), m, 11).unwrap();
        let c = s.centroid();
        let bound = 3.0 * sd / (m as f64).sqrt();
        assert!((c.x - 0.5).abs() < bound && (c.y - 0.5).abs() < bound, "{c:?}");
    }

    #[test]
    fn uniform_fallback_passes_ks() {
        let m = 5000;
        let b = Bounds2 {
            lo: [-1.0, 2.0],
            hi: [3.0, 2.5],
        };
        let s = sample_density_2d(&GaussianMixture::default(), b, m, 2).unwrap();
        for k in 0..2 {
            let mut v: Vec<f64> = (0..m)
                .map(|i| (s.points.position(i)[k] - b.lo[k]) / (b.hi[k] - b.lo[k]))
                .collect();
            v.sort_by(f64::total_cmp);
            let d = v
                .iter()
                .enumerate()
                .map(|(i, x)| ((i + 1) as f64 / m as f64 - x).max(x - i as f64 / m as f64))
                .fold(0.0, f64::max);
            assert!(d < 1.63 / (m as f64).sqrt(), "axis {k}: D = {d}");
        }
        let one = sample_density_2d(&GaussianMixture::default(), b, 1, 0).unwrap();
        assert!(b.contains(&[one.points.position(0).x, one.points.position(0).y]));
    }

    #[test]
    fn density_errors() {
        let bad = GaussianMixture {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: [0.0, 0.0],
                cov: [[1.0, 2.0], [2.0, 1.0]],
            }],
        };
        assert!(sample_density_2d(&bad, Bounds2::unit(), 10, 0).is_err());
        let degenerate = Bounds2 {
            lo: [0.0, 0.0],
            hi: [0.0, 1.0],
        };
        assert!(sample_density_2d(&GaussianMixture::default(), degenerate, 10, 0).is_err());
        // A narrow bump far outside the box leaves essentially no mass inside it.
        let far = GaussianMixture {
            components: vec![GaussianComponent {
                weight: 1.0,
                mean: [50.0, 50.0],
                cov: [[1e-2, 0.0], [0.0, 1e-2]],
            }],
        };
        assert!(matches!(
            sample_density_2d(&far, Bounds2::unit(), 1, 0),
            Err(Error::PathologicalDensity { .. })
        ));
    }
}
