use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::optimizer::ProblemSpec;
use crate::points::{PointRef, PointSet};
use crate::systems::Inequality;
use crate::trajectory::Trajectory;

/// Greedy nearest-neighbor path over all samples, starting at `start`.
///
/// Distances use positions; ties go to the lowest index.
pub fn tsp_nearest_neighbor(samples: &PointSet, start: usize) -> Result<Vec<usize>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid("a tour needs at least two samples"));
    }
    if start >= n {
        return Err(Error::invalid(format!("start index {start} is out of range for {n} samples")));
    }
    let pos = samples.positions();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    order.push(cur);
    for _ in 1..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for (j, p) in pos.iter().enumerate() {
            if visited[j] {
                continue;
            }
            let d = (p - pos[cur]).norm_squared();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        visited[best] = true;
        order.push(best);
        cur = best;
    }
    Ok(order)
}

/// Open-path length of `samples` visited in `order`.
pub fn tour_length(samples: &PointSet, order: &[usize]) -> f64 {
    order
        .windows(2)
        .map(|w| (samples.position(w[1]) - samples.position(w[0])).norm())
        .sum()
}

/// Per-axis control levels tried by the greedy controller.
pub const GREEDY_LEVELS: usize = 7;

/// Candidate controls: a full grid of [`GREEDY_LEVELS`] levels per axis for up
/// to three control dimensions, otherwise zero plus `+-limit` on each axis.
fn candidate_controls(limits: &[f64]) -> Vec<Vec<f64>> {
    let m = limits.len();
    if m <= 3 {
        let levels: Vec<f64> = (0..GREEDY_LEVELS)
            .map(|i| -1.0 + 2.0 * i as f64 / (GREEDY_LEVELS - 1) as f64)
            .collect();
        let mut out = vec![vec![]];
        for lim in limits {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<f64>| {
                    levels.iter().map(move |l| {
                        let mut v = prefix.clone();
                        v.push(l * lim);
                        v
                    })
                })
                .collect();
        }
        out
    } else {
        let mut out = vec![vec![0.0; m]];
        for (i, lim) in limits.iter().enumerate() {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; m];
                u[i] = s * lim;
                out.push(u);
            }
        }
        out
    }
}

fn kernel(spec: &KernelSpec, a: PointRef<'_>, b: PointRef<'_>) -> Result<f64> {
    spec.eval(a, b)
}

/// Myopic controller: each step picks the candidate control whose successor
/// state minimizes the E-MMD of the trajectory extended by that state.
///
/// Needs a control box in the problem's constraints. Candidates whose
/// successor violates a state box are skipped; if none remain the state is held.
pub fn greedy_mmd_controller(problem: &ProblemSpec, x0: &[f64], horizon: usize) -> Result<Trajectory> {
    problem.validate()?;
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    let n = problem.state_dim();
    let m = problem.control_dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: x0.len() });
    }
    let mut limits: Option<Vec<f64>> = None;
    let mut boxes = Vec::new();
    for ineq in &problem.constraints.inequalities {
        match ineq {
            Inequality::ControlBox(l) => {
                limits = Some(match limits {
                    None => l.clone(),
                    Some(prev) => prev.iter().zip(l).map(|(a, b)| a.min(*b)).collect(),
                })
            }
            Inequality::StateBox { lower, upper, margin } => boxes.push((lower, upper, *margin)),
        }
    }
    let limits = limits.ok_or_else(|| Error::invalid("the greedy controller needs control limits"))?;
    let candidates = candidate_controls(&limits);
    let admissible = |x: &[f64]| {
        boxes.iter().all(|(lo, hi, margin)| {
            x.iter()
                .zip(lo.iter())
                .zip(hi.iter())
                .all(|((v, l), h)| *v >= l + margin && *v <= h - margin)
        })
    };

    let spec = &problem.kernel;
    let g = &problem.projection;
    let samples = &problem.samples;
    let m_inv = 1.0 / samples.len() as f64;
    let cross = |p: &PointSet| -> Result<f64> {
        let a = p.get(0);
        let mut c = 0.0;
        for (j, b) in samples.points.iter().enumerate() {
            let w = samples.weights.as_ref().map_or(m_inv, |w| w[j]);
            c += w * kernel(spec, a, b)?;
        }
        Ok(c)
    };

    let mut states = x0.to_vec();
    let mut controls = vec![0.0; m * horizon];
    let mut projected: Vec<PointSet> = vec![g.project_all(x0, n)?];
    let mut self_sum = kernel(spec, projected[0].get(0), projected[0].get(0))?;
    let mut cross_sum = cross(&projected[0])?;
    let mut next = vec![0.0; n];
    for t in 0..horizon - 1 {
        let x = states[t * n..(t + 1) * n].to_vec();
        let len = (t + 2) as f64;
        let mut best: Option<(f64, usize, PointSet, f64, f64)> = None;
        for (ci, u) in candidates.iter().enumerate() {
            problem.dynamics.step_into(&x, u, &mut next);
            if !admissible(&next) {
                continue;
            }
            let p = g.project_all(&next, n)?;
            let mut pair = 0.0;
            for q in &projected {
                pair += kernel(spec, p.get(0), q.get(0))?;
            }
            let s = self_sum + 2.0 * pair + kernel(spec, p.get(0), p.get(0))?;
            let c = cross_sum + cross(&p)?;
            let value = s / (len * len) - 2.0 * c / len;
            if best.as_ref().is_none_or(|b| value < b.0) {
                best = Some((value, ci, p, s, c));
            }
        }
        let (choice, p, s, c) = match best {
            Some((_, ci, p, s, c)) => (candidates[ci].clone(), p, s, c),
            None => {
                let u = vec![0.0; m];
                problem.dynamics.step_into(&x, &u, &mut next);
                let p = g.project_all(&next, n)?;
                let mut pair = 0.0;
                for q in &projected {
                    pair += kernel(spec, p.get(0), q.get(0))?;
                }
                let s = self_sum + 2.0 * pair + kernel(spec, p.get(0), p.get(0))?;
                let c = cross_sum + cross(&p)?;
                (u, p, s, c)
            }
        };
        problem.dynamics.step_into(&x, &choice, &mut next);
        states.extend_from_slice(&next);
        controls[t * m..(t + 1) * m].copy_from_slice(&choice);
        projected.push(p);
        self_sum = s;
        cross_sum = c;
    }
    Trajectory::new(n, m, problem.dynamics.dt, states, controls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSampleSet;
    use crate::metric::ProjectionMap;
    use crate::systems::{DynamicsKind, DynamicsModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tsp_examples() {
        let line = PointSet::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        assert_eq!(tsp_nearest_neighbor(&line, 0).unwrap(), vec![0, 1, 2, 3]);
        let two = PointSet::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let order = tsp_nearest_neighbor(&two, 1).unwrap();
        assert_eq!(order, vec![1, 0]);
        assert_eq!(tour_length(&two, &order), 5.0);
        assert!(tsp_nearest_neighbor(&PointSet::from_rows(&[[0.0]]).unwrap(), 0).is_err());
        // Equidistant neighbors: lowest index wins.
        let tie = PointSet::from_rows(&[[0.0], [1.0], [-1.0]]).unwrap();
        assert_eq!(tsp_nearest_neighbor(&tie, 0).unwrap(), vec![0, 1, 2]);
    }

    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut p in permutations(rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn nearest_neighbor_is_never_shorter_than_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let rows: Vec<[f64; 2]> = (0..8).map(|_| [rng.random(), rng.random()]).collect();
            let pts = PointSet::from_rows(&rows).unwrap();
            let order = tsp_nearest_neighbor(&pts, 0).unwrap();
            let mut sorted = order.clone();
            sorted.sort();
            assert_eq!(sorted, (0..8).collect::<Vec<_>>());
            let optimal = permutations((1..8).collect())
                .into_iter()
                .map(|mut p| {
                    p.insert(0, 0);
                    tour_length(&pts, &p)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(tour_length(&pts, &order) >= optimal - 1e-12);
        }
    }

    fn single_sample_problem(limit: f64) -> ProblemSpec {
        ProblemSpec::new(
            DynamicsModel::new(DynamicsKind::SingleIntegrator, 2, 0.1).unwrap(),
            ProjectionMap::Identity,
            DomainSampleSet::new(PointSet::from_rows(&[[0.8, 0.6]]).unwrap()).unwrap(),
            KernelSpec::rbf(0.2).unwrap(),
            vec![0.0, 0.0],
            30,
        )
        .unwrap()
        .with_control_limits(vec![limit, limit])
    }

    #[test]
    fn greedy_approaches_a_single_sample() {
        let p = single_sample_problem(1.0);
        let traj = greedy_mmd_controller(&p, &[0.0, 0.0], 30).unwrap();
        let dist: Vec<f64> = (0..30)
            .map(|t| {
                let s = traj.state(t);
                ((s[0] - 0.8).powi(2) + (s[1] - 0.6).powi(2)).sqrt()
            })
            .collect();
        // Monotone approach until the sample is reached.
        let arrival = dist.iter().position(|d| *d < 1e-9).expect("sample reached");
        assert!(dist[..=arrival].windows(2).all(|w| w[1] <= w[0]), "{dist:?}");
        // Afterwards the repulsion from earlier path points moves it by at
        // most the finest control step.
        let finest = 0.1 * 2.0 / (GREEDY_LEVELS - 1) as f64;
        assert!(dist[arrival..].iter().all(|d| *d <= finest + 1e-12), "{dist:?}");
    }

    #[test]
    fn greedy_trivial_cases() {
        let p = single_sample_problem(0.0);
        let traj = greedy_mmd_controller(&p, &[0.3, 0.3], 10).unwrap();
        assert_eq!(traj.states, [0.3, 0.3].repeat(10));
        let p = single_sample_problem(1.0);
        let traj = greedy_mmd_controller(&p, &[0.3, 0.3], 1).unwrap();
        assert_eq!(traj.states, vec![0.3, 0.3]);
        let mut free = p.clone();
        free.constraints.inequalities.clear();
        assert!(greedy_mmd_controller(&free, &[0.0, 0.0], 5).is_err());
    }

    #[test]
    fn greedy_respects_state_limits() {
        let p = single_sample_problem(1.0).with_state_limits(vec![-1.0, -1.0], vec![0.5, 0.5], 0.0);
        let traj = greedy_mmd_controller(&p, &[0.0, 0.0], 30).unwrap();
        assert!(traj.states.iter().all(|v| *v <= 0.5 + 1e-12));
    }

    #[test]
    fn candidate_sets() {
        assert_eq!(candidate_controls(&[1.0, 2.0]).len(), 49);
        assert!(candidate_controls(&[1.0]).contains(&vec![0.0]));
        let big = candidate_controls(&[1.0; 7]);
        assert_eq!(big.len(), 15);
        assert_eq!(big[0], vec![0.0; 7]);
    }
}
