//! Sampling, problem assembly, optimization and artifact emission.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ergmmd::domain::{
    importance_filter, load_mesh, normal_alignment_scores, offset_along_normals, read_samples_csv,
    sample_density_2d, sample_surface_uniform, write_samples_csv, DomainSampleSet, GaussianMixture,
};
use ergmmd::evaluation::{coverage_report, CoverageReport, COVERAGE_RADIUS_FACTOR};
use ergmmd::metric::{Codomain, FkOutput, ProjectionMap};
use ergmmd::optimizer::{initialize_trajectory, solve, OuterRecord, ProblemSpec, SolveStatus};
use ergmmd::systems::{DynamicsKind, DynamicsModel, SerialChain};
use ergmmd::{bandwidth_median_heuristic, KernelFamily, KernelSpec, PointSet, Pose, TangentWeight, Trajectory};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::{Bandwidth, ProjectionConfig, ScenarioConfig};
use crate::plot::render_svg;

/// Stream offsets so the seeded stages draw independent numbers.
const IMPORTANCE_STREAM: u64 = 1;
const MEDIAN_STREAM: u64 = 2;

/// Header columns after the state and control columns.
const POSITION_COLUMNS: [&str; 3] = ["gx", "gy", "gz"];

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    #[serde(flatten)]
    pub coverage: CoverageReport,
    pub converged: bool,
    pub status: SolveStatus,
    pub objective: f64,
    pub violation: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub bandwidth: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub history: Vec<OuterRecord>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub trajectory: Trajectory,
    pub out_dir: PathBuf,
}

/// A scenario with its samples drawn and its problem assembled.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub problem: ProblemSpec,
    pub chain: Option<SerialChain>,
}

pub fn load_chain(path: &Path) -> Result<SerialChain> {
    let text = fs::read_to_string(path).with_context(|| format!("system.chain: cannot read {}", path.display()))?;
    let chain: SerialChain =
        toml::from_str(&text).with_context(|| format!("system.chain: invalid chain {}", path.display()))?;
    chain.validate().with_context(|| format!("system.chain: {}", path.display()))?;
    Ok(chain)
}

/// Draws the domain samples: source, importance filter, then normal offset.
pub fn build_samples(cfg: &ScenarioConfig) -> Result<DomainSampleSet> {
    let d = &cfg.domain;
    let seed = cfg.seed;
    let count = d.count;
    let raw_count = |count: usize| d.importance.as_ref().map_or(count, |imp| imp.candidates.unwrap_or(8 * count));
    let raw = if let Some(mesh) = &d.mesh {
        let mesh = load_mesh(mesh).context("domain.mesh")?;
        let count = count.expect("validated");
        sample_surface_uniform(&mesh, raw_count(count), seed).context("domain.mesh")?
    } else if let Some(mix) = &d.mixture {
        let density = GaussianMixture {
            components: mix.components.clone(),
        };
        sample_density_2d(&density, mix.bounds, count.expect("validated"), seed).context("domain.mixture")?
    } else {
        let path = d.csv.as_ref().expect("validated");
        read_samples_csv(path).with_context(|| format!("domain.csv: {}", path.display()))?
    };
    let filtered = match &d.importance {
        Some(imp) => {
            let normals = raw
                .normals
                .as_ref()
                .context("domain.importance: the sample source has no normals")?;
            let dirs: Vec<Vector3<f64>> = imp.directions.iter().map(|v| Vector3::from(*v)).collect();
            if dirs.iter().any(|v| !(v.norm() > 0.0)) {
                bail!("domain.importance.directions: directions must be non-zero");
            }
            let scores = normal_alignment_scores(normals, &dirs);
            importance_filter(&raw, &scores, count.unwrap_or(raw.len()), seed.wrapping_add(IMPORTANCE_STREAM))
                .context("domain.importance")?
        }
        None => {
            if d.csv.is_some() && count.is_some_and(|c| c != raw.len()) {
                bail!("domain.count: the CSV has {} rows but count is {}", raw.len(), count.unwrap_or(0));
            }
            raw
        }
    };
    if d.buffer != 0.0 {
        return offset_along_normals(&filtered, d.buffer).context("domain.buffer");
    }
    Ok(filtered)
}

fn dimension(cfg: &ScenarioConfig, chain: Option<&SerialChain>) -> Result<usize> {
    let s = &cfg.system;
    let implied = match (s.dynamics, chain) {
        (DynamicsKind::JointVelocityChain, Some(c)) => Some(c.dof()),
        (DynamicsKind::Se3TwistIntegrator, _) => Some(6),
        _ => None,
    };
    match (s.dim, implied) {
        (Some(d), Some(i)) if d != i => bail!("system.dim: {d} conflicts with the implied dimension {i}"),
        (Some(d), _) | (None, Some(d)) => Ok(d),
        (None, None) => bail!("system.dim: required for this dynamics kind"),
    }
}

fn projection(cfg: &ScenarioConfig, dynamics: &DynamicsModel, chain: Option<&SerialChain>) -> Result<ProjectionMap> {
    let need_chain = || chain.cloned().context("system.projection: forward kinematics needs `system.chain`");
    Ok(match &cfg.system.projection {
        ProjectionConfig::Auto => match dynamics.kind {
            DynamicsKind::JointVelocityChain if chain.is_some() => ProjectionMap::SerialChainFk {
                chain: need_chain()?,
                output: FkOutput::Position,
            },
            DynamicsKind::Se3TwistIntegrator => ProjectionMap::Se3ExpChart { frame: Pose::identity() },
            DynamicsKind::DoubleIntegrator => ProjectionMap::SelectCoordinates(dynamics.position_indices()),
            _ => ProjectionMap::Identity,
        },
        ProjectionConfig::Identity => ProjectionMap::Identity,
        ProjectionConfig::Select { indices } => ProjectionMap::SelectCoordinates(indices.clone()),
        ProjectionConfig::FkPosition => ProjectionMap::SerialChainFk {
            chain: need_chain()?,
            output: FkOutput::Position,
        },
        ProjectionConfig::FkPose => ProjectionMap::SerialChainFk {
            chain: need_chain()?,
            output: FkOutput::Pose,
        },
        ProjectionConfig::Se3Chart { translation, rotation } => {
            let r = Matrix3::from_fn(|i, j| rotation[i][j]);
            let frame = Pose::new(r, Vector3::from(*translation));
            if !frame.is_valid(1e-9) {
                bail!("system.projection.rotation: not a rotation matrix");
            }
            ProjectionMap::Se3ExpChart { frame }
        }
    })
}

/// Matches the sample representation to the projection's codomain.
fn adapt_samples(samples: DomainSampleSet, codomain: Codomain) -> Result<DomainSampleSet> {
    match (codomain, &samples.points) {
        (Codomain::Euclidean(d), PointSet::Euclidean { dim, .. }) if d < *dim => {
            samples.truncate_dims(d).context("domain")
        }
        (Codomain::Euclidean(d), PointSet::Euclidean { dim, .. }) if d > *dim => {
            bail!("domain: samples have {dim} coordinates but the projection produces {d}")
        }
        (Codomain::Pose, PointSet::Euclidean { .. }) => samples
            .to_facing_poses()
            .context("domain: pose projections need samples with normals"),
        _ => Ok(samples),
    }
}

fn kernel(cfg: &ScenarioConfig, samples: &DomainSampleSet) -> Result<KernelSpec> {
    let k = &cfg.kernel;
    let sigma = match k.bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Auto(_) => bandwidth_median_heuristic(&samples.points, cfg.seed.wrapping_add(MEDIAN_STREAM))
            .context("kernel.bandwidth")?,
    };
    match k.family {
        KernelFamily::RbfEuclidean => {
            if k.tangent_weight.is_some() {
                bail!("kernel.tangent_weight: only used by the se3_logmap family");
            }
            KernelSpec::rbf(sigma).context("kernel.bandwidth")
        }
        KernelFamily::Se3Logmap => {
            let w = match &k.tangent_weight {
                Some(v) => TangentWeight::try_from(v.clone()).context("kernel.tangent_weight")?,
                None => TangentWeight::diagonal([1.0 / (2.0 * sigma * sigma); 6]).context("kernel.bandwidth")?,
            };
            KernelSpec::se3(w, sigma).context("kernel")
        }
    }
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let s = &config.system;
        let chain = s.chain.as_deref().map(load_chain).transpose()?;
        let dim = dimension(&config, chain.as_ref())?;
        let dynamics = DynamicsModel::new(s.dynamics, dim, s.dt).context("system")?;
        let g = projection(&config, &dynamics, chain.as_ref())?;
        g.validate(dynamics.state_dim()).context("system.projection")?;
        let samples = adapt_samples(build_samples(&config)?, g.codomain(dynamics.state_dim()))?;
        let spec = kernel(&config, &samples)?;
        if s.x0.len() != dynamics.state_dim() {
            bail!("system.x0: expected {} entries, got {}", dynamics.state_dim(), s.x0.len());
        }
        let mut problem =
            ProblemSpec::new(dynamics, g, samples, spec, s.x0.clone(), s.horizon).context("system")?;
        let mut controls = s.control_limits.clone();
        let mut lower = s.state_lower.clone();
        let mut upper = s.state_upper.clone();
        if s.joint_limits {
            let c = chain.as_ref().expect("validated");
            if dynamics.kind != DynamicsKind::JointVelocityChain {
                bail!("system.joint_limits: needs joint_velocity_chain dynamics");
            }
            controls.get_or_insert_with(|| c.velocity_limits());
            lower.get_or_insert_with(|| c.lower_limits());
            upper.get_or_insert_with(|| c.upper_limits());
        }
        if let Some(l) = controls {
            problem = problem.with_control_limits(l);
        }
        match (lower, upper) {
            (None, None) => {}
            (lo, hi) => {
                let n = dynamics.state_dim();
                problem = problem.with_state_limits(
                    lo.unwrap_or_else(|| vec![f64::NEG_INFINITY; n]),
                    hi.unwrap_or_else(|| vec![f64::INFINITY; n]),
                    s.state_margin,
                );
            }
        }
        if let Some(xf) = &s.final_state {
            problem = problem.with_final_state(xf.clone());
        }
        problem = problem.with_running_cost(config.objective);
        problem.validate().context("system")?;
        Ok(Self { config, problem, chain })
    }

    pub fn coverage_radius(&self) -> f64 {
        self.config
            .output
            .coverage_radius
            .unwrap_or(COVERAGE_RADIUS_FACTOR * self.problem.kernel.bandwidth)
    }

    /// Optimizes and writes `trajectory.csv`, `report.json` and optionally `plot.svg`.
    pub fn run(&self, out_dir: &Path) -> Result<RunOutcome> {
        let start = Instant::now();
        let p = &self.problem;
        let init = initialize_trajectory(p, self.config.system.init, self.config.seed).context("system.init")?;
        let mut opts = self.config.solver;
        opts.seed = self.config.seed;
        let result = solve(p, &init, &opts).context("solver")?;
        let wall = start.elapsed().as_secs_f64();
        let coverage = coverage_report(p, &init, &result.trajectory, self.coverage_radius(), wall)?;
        let report = RunReport {
            coverage,
            converged: result.converged,
            status: result.status,
            objective: result.objective,
            violation: result.violation,
            grad_norm: result.grad_norm,
            iterations: result.iterations,
            bandwidth: p.kernel.bandwidth,
            num_samples: p.samples.len(),
            seed: self.config.seed,
            config: self.config.clone(),
            history: result.history,
        };
        fs::create_dir_all(out_dir).with_context(|| format!("output.directory: cannot create {}", out_dir.display()))?;
        write_trajectory_csv(&out_dir.join("trajectory.csv"), &result.trajectory, &p.projection)?;
        let json = serde_json::to_string_pretty(&report)?;
        let report_path = out_dir.join("report.json");
        fs::write(&report_path, json + "\n").with_context(|| format!("cannot write {}", report_path.display()))?;
        if self.config.output.plot {
            let path = p.projection.project_all(&result.trajectory.states, result.trajectory.state_dim)?;
            let svg = render_svg(&p.samples.points.positions(), &path.positions());
            let plot_path = out_dir.join("plot.svg");
            fs::write(&plot_path, svg).with_context(|| format!("cannot write {}", plot_path.display()))?;
        }
        log::info!(
            "coverage {:.1}% at radius {:.3}, emmd {:.4e} -> {:.4e}, status {:?}",
            report.coverage.coverage_percent,
            report.coverage.coverage_radius,
            report.coverage.emmd_initial,
            report.coverage.emmd_final,
            report.status
        );
        Ok(RunOutcome {
            report,
            trajectory: result.trajectory,
            out_dir: out_dir.to_path_buf(),
        })
    }
}

/// Writes `t,x_0..,u_0..,gx,gy,gz`, one row per time step. The last row's
/// controls are zero; `t` is the step index.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, g: &ProjectionMap) -> Result<()> {
    let positions = g.project_all(&traj.states, traj.state_dim)?.positions();
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut header = vec!["t".to_string()];
    header.extend((0..traj.state_dim).map(|i| format!("x_{i}")));
    header.extend((0..traj.control_dim).map(|i| format!("u_{i}")));
    header.extend(POSITION_COLUMNS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for t in 0..traj.horizon() {
        let mut row = vec![t.to_string()];
        row.extend(traj.state(t).iter().map(|v| v.to_string()));
        row.extend(traj.control(t).iter().map(|v| v.to_string()));
        row.extend(positions[t].iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Applies the seed override and resolves the output directory.
pub fn prepare(config_path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Loads, runs and writes a scenario. `out` overrides `output.directory`.
pub fn run_scenario(config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunOutcome> {
    let cfg = prepare(config_path, seed)?;
    let out_dir = out.map_or_else(|| cfg.output.directory.clone(), Path::to_path_buf);
    Scenario::build(cfg)?.run(&out_dir)
}

/// Writes the exact sample set the optimizer would consume.
pub fn export_samples(config_path: &Path, seed: Option<u64>, out: &Path) -> Result<DomainSampleSet> {
    let scenario = Scenario::build(prepare(config_path, seed)?)?;
    let samples = scenario.problem.samples.clone();
    write_samples_csv(out, &samples).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(samples)
}
