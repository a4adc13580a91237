//! The ergodic MMD metric and the empirical MMD it is derived from.
//!
//! With `k` a bounded positive-definite kernel, trajectory points `g(x_t)` and
//! domain samples `w_j`,
//!
//! ```text
//! E(x) = 1/T^2 sum_{t,t'} k(g(x_t), g(x_t')) - 2/(T M) sum_{t,j} k(g(x_t), w_j)
//! ```
//!
//! Adding the sample-only term `1/M^2 sum_{j,j'} k(w_j, w_j')` gives the biased
//! (V-statistic) squared MMD, which is nonnegative. When a sample set carries
//! weights, `1/M` is replaced by the per-sample weight.

mod projection;

use rayon::prelude::*;

pub use projection::{Codomain, FkOutput, ProjectionMap};

use crate::domain::DomainSampleSet;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::points::PointSet;
use crate::trajectory::Trajectory;

/// Per-state contributions; `grad` lives in the codomain tangent space.
struct Row {
    self_sum: f64,
    cross_mean: f64,
    grad: Vec<f64>,
}

fn row(
    spec: &KernelSpec,
    pts: &PointSet,
    samples: &PointSet,
    weights: Option<&[f64]>,
    t: usize,
    want_grad: bool,
) -> Result<Row> {
    let big_t = pts.len() as f64;
    let m = samples.len() as f64;
    match (spec.family, pts, samples) {
        (
            KernelFamily::RbfEuclidean,
            PointSet::Euclidean { dim, coords },
            PointSet::Euclidean { coords: scoords, .. },
        ) => {
            let d = *dim;
            let a = &coords[t * d..(t + 1) * d];
            let inv_s2 = 1.0 / (spec.bandwidth * spec.bandwidth);
            let half = 0.5 * inv_s2;
            let mut gs = vec![0.0; if want_grad { d } else { 0 }];
            let mut gc = gs.clone();
            let mut self_sum = 0.0;
            for b in coords.chunks_exact(d) {
                let k = rbf(a, b, half);
                self_sum += k;
                if want_grad {
                    for i in 0..d {
                        gs[i] += k * (b[i] - a[i]);
                    }
                }
            }
            let mut cross = 0.0;
            for (j, b) in scoords.chunks_exact(d).enumerate() {
                let k = rbf(a, b, half) * weights.map_or(1.0, |w| w[j]);
                cross += k;
                if want_grad {
                    for i in 0..d {
                        gc[i] += k * (b[i] - a[i]);
                    }
                }
            }
            let cross_scale = if weights.is_some() { 1.0 } else { 1.0 / m };
            let grad = gs
                .iter()
                .zip(&gc)
                .map(|(s, c)| inv_s2 * (2.0 / (big_t * big_t) * s - 2.0 / big_t * cross_scale * c))
                .collect();
            Ok(Row {
                self_sum,
                cross_mean: cross * cross_scale,
                grad,
            })
        }
        _ => {
            let a = pts.get(t);
            let tdim = match pts {
                PointSet::Euclidean { dim, .. } => *dim,
                PointSet::Poses(_) => 6,
            };
            let mut gs = vec![0.0; if want_grad { tdim } else { 0 }];
            let mut gc = gs.clone();
            let mut self_sum = 0.0;
            for (u, b) in pts.iter().enumerate() {
                self_sum += spec.eval(a, b)?;
                if want_grad && u != t {
                    for (g, v) in gs.iter_mut().zip(spec.grad_first(a, b)?) {
                        *g += v;
                    }
                }
            }
            let mut cross = 0.0;
            for (j, b) in samples.iter().enumerate() {
                let w = weights.map_or(1.0, |w| w[j]);
                cross += w * spec.eval(a, b)?;
                if want_grad {
                    for (g, v) in gc.iter_mut().zip(spec.grad_first(a, b)?) {
                        *g += w * v;
                    }
                }
            }
            let cross_scale = if weights.is_some() { 1.0 } else { 1.0 / m };
            let grad = gs
                .iter()
                .zip(&gc)
                .map(|(s, c)| 2.0 / (big_t * big_t) * s - 2.0 / big_t * cross_scale * c)
                .collect();
            Ok(Row {
                self_sum,
                cross_mean: cross * cross_scale,
                grad,
            })
        }
    }
}

#[inline]
fn rbf(a: &[f64], b: &[f64], half_inv_s2: f64) -> f64 {
    let mut r2 = 0.0;
    for (x, y) in a.iter().zip(b) {
        r2 += (x - y) * (x - y);
    }
    (-r2 * half_inv_s2).exp()
}

fn check_inputs(points: &PointSet, samples: &PointSet, spec: &KernelSpec) -> Result<()> {
    if points.is_empty() || samples.is_empty() {
        return Err(Error::invalid("metric needs at least one trajectory point and one sample"));
    }
    spec.check_points(points)?;
    spec.check_points(samples)?;
    points.check_compatible(samples)
}

fn rows(
    points: &PointSet,
    samples: &PointSet,
    weights: Option<&[f64]>,
    spec: &KernelSpec,
    want_grad: bool,
) -> Result<Vec<Row>> {
    check_inputs(points, samples, spec)?;
    (0..points.len())
        .into_par_iter()
        .map(|t| row(spec, points, samples, weights, t, want_grad))
        .collect()
}

fn combine(rows: &[Row]) -> f64 {
    let big_t = rows.len() as f64;
    let self_total: f64 = rows.iter().map(|r| r.self_sum).sum();
    let cross_total: f64 = rows.iter().map(|r| r.cross_mean).sum();
    self_total / (big_t * big_t) - 2.0 * cross_total / big_t
}

/// E-MMD of already-projected trajectory points.
pub fn emmd_points(points: &PointSet, samples: &DomainSampleSet, spec: &KernelSpec) -> Result<f64> {
    Ok(combine(&rows(points, &samples.points, samples.weights.as_deref(), spec, false)?))
}

/// E-MMD of row-major `states` under the projection `g`.
pub fn emmd_states(
    states: &[f64],
    state_dim: usize,
    samples: &DomainSampleSet,
    spec: &KernelSpec,
    g: &ProjectionMap,
) -> Result<f64> {
    emmd_points(&g.project_all(states, state_dim)?, samples, spec)
}

/// E-MMD value and its gradient with respect to the row-major `states`.
pub fn emmd_states_with_gradient(
    states: &[f64],
    state_dim: usize,
    samples: &DomainSampleSet,
    spec: &KernelSpec,
    g: &ProjectionMap,
) -> Result<(f64, Vec<f64>)> {
    let points = g.project_all(states, state_dim)?;
    let rows = rows(&points, &samples.points, samples.weights.as_deref(), spec, true)?;
    let value = combine(&rows);
    let grads: Vec<Vec<f64>> = rows
        .par_iter()
        .zip(states.par_chunks_exact(state_dim))
        .map(|(r, x)| {
            let mut out = vec![0.0; state_dim];
            g.pullback_acc(x, &r.grad, &mut out)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok((value, grads.concat()))
}

pub fn emmd(traj: &Trajectory, samples: &DomainSampleSet, spec: &KernelSpec, g: &ProjectionMap) -> Result<f64> {
    emmd_states(&traj.states, traj.state_dim, samples, spec, g)
}

/// Gradient of [`emmd`] with respect to the states, row-major like `traj.states`.
pub fn emmd_gradient(
    traj: &Trajectory,
    samples: &DomainSampleSet,
    spec: &KernelSpec,
    g: &ProjectionMap,
) -> Result<Vec<f64>> {
    Ok(emmd_states_with_gradient(&traj.states, traj.state_dim, samples, spec, g)?.1)
}

/// `1/M^2 sum_{j,j'} k(w_j, w_j')`, or its weighted form.
pub fn sample_constant_term(samples: &DomainSampleSet, spec: &KernelSpec) -> Result<f64> {
    let pts = &samples.points;
    spec.check_points(pts)?;
    if pts.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let w = samples.weights.as_deref();
    let row_sums: Vec<f64> = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let r = row(spec, pts, pts, w, i, false)?;
            Ok(r.cross_mean * w.map_or(1.0, |w| w[i]))
        })
        .collect::<Result<_>>()?;
    let total: f64 = row_sums.iter().sum();
    Ok(if w.is_some() { total } else { total / pts.len() as f64 })
}

/// Biased (V-statistic) squared MMD between two unweighted point sets.
pub fn mmd_empirical(xs: &PointSet, ys: &PointSet, spec: &KernelSpec) -> Result<f64> {
    let ys = DomainSampleSet {
        points: ys.clone(),
        normals: None,
        weights: None,
    };
    Ok(emmd_points(xs, &ys, spec)? + sample_constant_term(&ys, spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{se3_exp, Pose, TangentWeight, Twist};
    use crate::systems::{RevoluteJoint, SerialChain};
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn samples(rows: &[Vec<f64>]) -> DomainSampleSet {
        DomainSampleSet::new(PointSet::from_rows(rows).unwrap()).unwrap()
    }

    fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect()
    }

    fn traj_from_rows(rows: &[Vec<f64>]) -> Trajectory {
        let d = rows[0].len();
        Trajectory::new(d, d, 0.1, rows.concat(), vec![0.0; rows.len() * d]).unwrap()
    }

    fn brute_k(a: &[f64], b: &[f64], s: f64) -> f64 {
        let mut r2 = 0.0;
        for i in 0..a.len() {
            r2 += (a[i] - b[i]).powi(2);
        }
        (-r2 / (2.0 * s * s)).exp()
    }

    fn brute_emmd(x: &[Vec<f64>], w: &[Vec<f64>], s: f64) -> f64 {
        let (t, m) = (x.len() as f64, w.len() as f64);
        let mut a = 0.0;
        for p in x {
            for q in x {
                a += brute_k(p, q, s);
            }
        }
        let mut b = 0.0;
        for p in x {
            for q in w {
                b += brute_k(p, q, s);
            }
        }
        a / (t * t) - 2.0 * b / (t * m)
    }

    #[test]
    fn trivial_values() {
        let spec = KernelSpec::rbf(0.3).unwrap();
        let s = samples(&[vec![0.2, 0.4]]);
        let tr = traj_from_rows(&[vec![0.2, 0.4]]);
        let g = ProjectionMap::Identity;
        assert_eq!(emmd(&tr, &s, &spec, &g).unwrap(), -1.0);
        assert_eq!(emmd_gradient(&tr, &s, &spec, &g).unwrap(), vec![0.0, 0.0]);

        let wide = KernelSpec::rbf(1e9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = traj_from_rows(&random_rows(&mut rng, 7, 2));
        let s = samples(&random_rows(&mut rng, 9, 2));
        assert!((emmd(&tr, &s, &wide, &g).unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_rows(&mut rng, 3, 2);
        let w = random_rows(&mut rng, 4, 2);
        let spec = KernelSpec::rbf(0.7).unwrap();
        let v = emmd(&traj_from_rows(&x), &samples(&w), &spec, &ProjectionMap::Identity).unwrap();
        assert!((v - brute_emmd(&x, &w, 0.7)).abs() < 1e-12);
    }

    #[test]
    fn constant_term() {
        let spec = KernelSpec::rbf(0.5).unwrap();
        assert_eq!(sample_constant_term(&samples(&[vec![1.0]]), &spec).unwrap(), 1.0);
        assert_eq!(sample_constant_term(&samples(&[vec![1.0, 2.0], vec![1.0, 2.0]]), &spec).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_rows(&mut rng, 5, 3);
        let mut brute = 0.0;
        for p in &w {
            for q in &w {
                brute += brute_k(p, q, 0.5);
            }
        }
        let v = sample_constant_term(&samples(&w), &spec).unwrap();
        assert!((v - brute / 25.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_samples_reduce_to_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_rows(&mut rng, 6, 2);
        let x = random_rows(&mut rng, 4, 2);
        let spec = KernelSpec::rbf(0.4).unwrap();
        let plain = samples(&w);
        let mut weighted = plain.clone();
        weighted.weights = Some(vec![1.0 / 6.0; 6]);
        let tr = traj_from_rows(&x);
        let g = ProjectionMap::Identity;
        let a = emmd(&tr, &plain, &spec, &g).unwrap();
        let b = emmd(&tr, &weighted, &spec, &g).unwrap();
        assert!((a - b).abs() < 1e-14);
        let a = sample_constant_term(&plain, &spec).unwrap();
        let b = sample_constant_term(&weighted, &spec).unwrap();
        assert!((a - b).abs() < 1e-14);
        // Duplicating a sample is the same as doubling its weight.
        let mut dup = w.clone();
        dup.push(w[0].clone());
        let mut ww = vec![1.0 / 7.0; 6];
        ww[0] = 2.0 / 7.0;
        let mut weighted = samples(&w);
        weighted.weights = Some(ww);
        let a = emmd(&tr, &samples(&dup), &spec, &g).unwrap() + sample_constant_term(&samples(&dup), &spec).unwrap();
        let b = emmd(&tr, &weighted, &spec, &g).unwrap() + sample_constant_term(&weighted, &spec).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn mmd_examples() {
        let spec = KernelSpec::rbf(0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs = PointSet::from_rows(&random_rows(&mut rng, 5, 2)).unwrap();
        assert!(mmd_empirical(&xs, &xs, &spec).unwrap().abs() < 1e-12);
        let a = PointSet::from_rows(&[[0.0]]).unwrap();
        let b = PointSet::from_rows(&[[20.0]]).unwrap();
        assert!((mmd_empirical(&a, &b, &spec).unwrap() - 2.0).abs() < 1e-9);

        let x = random_rows(&mut rng, 3, 2);
        let y = random_rows(&mut rng, 4, 2);
        let full = mmd_empirical(
            &PointSet::from_rows(&x).unwrap(),
            &PointSet::from_rows(&y).unwrap(),
            &spec,
        )
        .unwrap();
        let parts = emmd(&traj_from_rows(&x), &samples(&y), &spec, &ProjectionMap::Identity).unwrap()
            + sample_constant_term(&samples(&y), &spec).unwrap();
        assert!((full - parts).abs() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_codomain() {
        let spec = KernelSpec::rbf(0.2).unwrap();
        let tr = traj_from_rows(&[vec![0.0, 0.0, 0.0]]);
        let s = samples(&[vec![0.0, 0.0]]);
        assert!(emmd(&tr, &s, &spec, &ProjectionMap::Identity).is_err());
        let se3 = KernelSpec::se3(TangentWeight::identity(), 1.0).unwrap();
        assert!(emmd(&traj_from_rows(&[vec![0.0, 0.0]]), &s, &se3, &ProjectionMap::Identity).is_err());
    }

    fn fd_gradient(
        states: &[f64],
        n: usize,
        s: &DomainSampleSet,
        spec: &KernelSpec,
        g: &ProjectionMap,
        h: f64,
    ) -> Vec<f64> {
        let mut x = states.to_vec();
        (0..x.len())
            .map(|i| {
                let orig = x[i];
                x[i] = orig + h;
                let fp = emmd_states(&x, n, s, spec, g).unwrap();
                x[i] = orig - h;
                let fm = emmd_states(&x, n, s, spec, g).unwrap();
                x[i] = orig;
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
        num / den.max(1e-300)
    }

    #[test]
    fn gradient_matches_finite_differences_rbf() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let x = random_rows(&mut rng, 5, 2);
            let s = samples(&random_rows(&mut rng, 8, 2));
            let spec = KernelSpec::rbf(rng.random_range(0.1..0.6)).unwrap();
            let g = ProjectionMap::Identity;
            let (_, grad) = emmd_states_with_gradient(&x.concat(), 2, &s, &spec, &g).unwrap();
            let fd = fd_gradient(&x.concat(), 2, &s, &spec, &g, 1e-6);
            assert!(rel_err(&grad, &fd) < 1e-5);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_chain_and_chart() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let chain = SerialChain::new(
            vec![
                RevoluteJoint::new([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], -3.0, 3.0, 1.0),
                RevoluteJoint::new([0.0, 1.0, 0.0], [0.0, 0.0, 0.3], -2.0, 2.0, 1.0),
                RevoluteJoint::new([1.0, 0.0, 0.0], [0.4, 0.0, 0.3], -2.0, 2.0, 1.0),
            ],
            Pose::from_translation(Vector3::new(0.7, 0.0, 0.3)),
        )
        .unwrap();
        let q: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let pos = ProjectionMap::SerialChainFk {
            chain: chain.clone(),
            output: FkOutput::Position,
        };
        let s = samples(&(0..6).map(|_| (0..3).map(|_| rng.random_range(-0.6..0.6)).collect()).collect::<Vec<_>>());
        let spec = KernelSpec::rbf(0.3).unwrap();
        let (_, grad) = emmd_states_with_gradient(&q, 3, &s, &spec, &pos).unwrap();
        assert!(rel_err(&grad, &fd_gradient(&q, 3, &s, &spec, &pos, 1e-6)) < 1e-5);

        let se3 = KernelSpec::se3(TangentWeight::diagonal([0.5, 0.5, 0.5, 2.0, 2.0, 2.0]).unwrap(), 1.0).unwrap();
        let poses: Vec<Pose> = (0..5)
            .map(|_| {
                let v: Vec<f64> = (0..6).map(|_| rng.random_range(-0.5..0.5)).collect();
                se3_exp(&Twist::from_slice(&v).unwrap()).unwrap()
            })
            .collect();
        let ps = DomainSampleSet::new(PointSet::Poses(poses)).unwrap();
        let fk_pose = ProjectionMap::SerialChainFk {
            chain,
            output: FkOutput::Pose,
        };
        let q: Vec<f64> = (0..9).map(|_| rng.random_range(-0.5..0.5)).collect();
        let (_, grad) = emmd_states_with_gradient(&q, 3, &ps, &se3, &fk_pose).unwrap();
        assert!(rel_err(&grad, &fd_gradient(&q, 3, &ps, &se3, &fk_pose, 1e-5)) < 1e-5);

        let chart = ProjectionMap::Se3ExpChart {
            frame: se3_exp(&Twist::from_slice(&[0.0, 0.1, 0.0, 0.2, 0.0, 0.0]).unwrap()).unwrap(),
        };
        let xi: Vec<f64> = (0..24).map(|_| rng.random_range(-0.4..0.4)).collect();
        let (_, grad) = emmd_states_with_gradient(&xi, 6, &ps, &se3, &chart).unwrap();
        assert!(rel_err(&grad, &fd_gradient(&xi, 6, &ps, &se3, &chart, 1e-5)) < 1e-5);
    }

    #[test]
    fn gradient_translation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_rows(&mut rng, 6, 2);
        let w = random_rows(&mut rng, 9, 2);
        let shift = [0.37, -1.21];
        let moved = |r: &[Vec<f64>]| -> Vec<Vec<f64>> { r.iter().map(|p| vec![p[0] + shift[0], p[1] + shift[1]]).collect() };
        let spec = KernelSpec::rbf(0.25).unwrap();
        let g = ProjectionMap::Identity;
        let a = emmd_gradient(&traj_from_rows(&x), &samples(&w), &spec, &g).unwrap();
        let b = emmd_gradient(&traj_from_rows(&moved(&x)), &samples(&moved(&w)), &spec, &g).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    fn halton(mut i: usize, base: usize) -> f64 {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }

    #[test]
    fn halton_sequences_converge_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = samples(&random_rows(&mut rng, 2000, 2));
        let spec = KernelSpec::rbf(0.1).unwrap();
        let c = sample_constant_term(&s, &spec).unwrap();
        let mut prev = f64::INFINITY;
        for t in [16, 64, 256, 1024] {
            let pts: Vec<Vec<f64>> = (1..=t).map(|i| vec![halton(i, 2), halton(i, 3)]).collect();
            let v = emmd(&traj_from_rows(&pts), &s, &spec, &ProjectionMap::Identity).unwrap() + c;
            assert!(v < prev, "T={t}: {v} >= {prev}");
            prev = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn identity_and_nonnegativity(seed in 0u64..10_000, t in 1usize..20, m in 1usize..30, d in 1usize..4, sigma in 0.05f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_rows(&mut rng, t, d);
            let w = random_rows(&mut rng, m, d);
            let spec = KernelSpec::rbf(sigma).unwrap();
            let e = emmd(&traj_from_rows(&x), &samples(&w), &spec, &ProjectionMap::Identity).unwrap();
            let c = sample_constant_term(&samples(&w), &spec).unwrap();
            let full = mmd_empirical(&PointSet::from_rows(&x).unwrap(), &PointSet::from_rows(&w).unwrap(), &spec).unwrap();
            prop_assert!((e + c - full).abs() < 1e-12);
            prop_assert!(e + c >= -1e-12);
            let swapped = mmd_empirical(&PointSet::from_rows(&w).unwrap(), &PointSet::from_rows(&x).unwrap(), &spec).unwrap();
            prop_assert!((full - swapped).abs() < 1e-12);
        }

        #[test]
        fn permutation_invariant(seed in 0u64..10_000, t in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_rows(&mut rng, t, 2);
            let w = random_rows(&mut rng, 10, 2);
            let mut y = x.clone();
            y.reverse();
            y.rotate_left(seed as usize % t);
            let spec = KernelSpec::rbf(0.3).unwrap();
            let a = emmd(&traj_from_rows(&x), &samples(&w), &spec, &ProjectionMap::Identity).unwrap();
            let b = emmd(&traj_from_rows(&y), &samples(&w), &spec, &ProjectionMap::Identity).unwrap();
            prop_assert!((a - b).abs() < 1e-14);
        }
    }
}
