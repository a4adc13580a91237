//! Scenario configuration: one TOML file per scenario.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ergmmd::domain::{Bounds2, GaussianComponent};
use ergmmd::optimizer::{InitStrategy, SolverOptions};
use ergmmd::systems::{DynamicsKind, RunningCost};
use ergmmd::KernelFamily;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub system: SystemConfig,
    #[serde(default)]
    pub objective: RunningCost,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `mesh`, `mixture` or `csv` names the sample source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixture: Option<MixtureConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Number of samples handed to the optimizer. Required for mesh and
    /// mixture sources; a CSV source defaults to all of its rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceConfig>,
    /// Offset along normals (meters).
    #[serde(default)]
    pub buffer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    #[serde(default = "Bounds2::unit")]
    pub bounds: Bounds2,
    /// No components means a uniform density over `bounds`.
    #[serde(default)]
    pub components: Vec<GaussianComponent>,
}

/// Resampling by normal alignment with any of `directions`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportanceConfig {
    pub directions: Vec<[f64; 3]>,
    /// Candidates drawn before filtering; defaults to eight times `count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AutoMedian {
    #[serde(rename = "auto-median")]
    AutoMedian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Auto(AutoMedian),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
    /// SE(3) weight: 6 diagonal or 36 row-major entries. Defaults to
    /// `I / (2 bandwidth^2)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangent_weight: Option<Vec<f64>>,
}

fn default_family() -> KernelFamily {
    KernelFamily::RbfEuclidean
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProjectionConfig {
    /// Forward kinematics for chains, the exponential chart for twists,
    /// positions for double integrators, identity otherwise.
    #[default]
    Auto,
    Identity,
    Select {
        indices: Vec<usize>,
    },
    FkPosition,
    FkPose,
    Se3Chart {
        #[serde(default)]
        translation: [f64; 3],
        #[serde(default = "identity_rows")]
        rotation: [[f64; 3]; 3],
    },
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dynamics: DynamicsKind,
    /// Control dimension; defaults to the chain's joint count or 6 for twists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub dt: f64,
    pub horizon: usize,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub projection: ProjectionConfig,
    /// Serial chain description (TOML).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<PathBuf>,
    /// Use the chain's joint and speed limits as state and control boxes.
    #[serde(default)]
    pub joint_limits: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_limits: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub state_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<Vec<f64>>,
    #[serde(default)]
    pub init: InitStrategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the config file.
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_plot")]
    pub plot: bool,
    /// Defaults to twice the kernel bandwidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage_radius: Option<f64>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_plot() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            plot: default_plot(),
            coverage_radius: None,
        }
    }
}

impl ScenarioConfig {
    /// Reads a TOML scenario and resolves its paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: ScenarioConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        let base = std::path::absolute(base).with_context(|| format!("cannot resolve {}", base.display()))?;
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).context("invalid config")?;
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.domain.mesh.as_mut().map(fix);
        self.domain.csv.as_mut().map(fix);
        self.system.chain.as_mut().map(fix);
        fix(&mut self.output.directory);
    }

    /// Structural checks that need no file contents beyond existence.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        let sources = [d.mesh.is_some(), d.mixture.is_some(), d.csv.is_some()];
        if sources.iter().filter(|s| **s).count() != 1 {
            bail!("domain: exactly one of `mesh`, `mixture`, `csv` must be set");
        }
        for (key, p) in [("domain.mesh", &d.mesh), ("domain.csv", &d.csv), ("system.chain", &self.system.chain)] {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("{key}: file not found: {}", p.display());
                }
            }
        }
        if d.csv.is_none() && d.count.is_none() {
            bail!("domain.count: required for mesh and mixture sources");
        }
        if d.count == Some(0) {
            bail!("domain.count: must be at least 1");
        }
        if let Some(imp) = &d.importance {
            if imp.directions.is_empty() {
                bail!("domain.importance.directions: at least one direction is required");
            }
            if d.mixture.is_some() {
                bail!("domain.importance: mixture samples carry no normals");
            }
        }
        if !d.buffer.is_finite() {
            bail!("domain.buffer: must be finite");
        }
        if let Bandwidth::Fixed(s) = self.kernel.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                bail!("kernel.bandwidth: must be positive, got {s}");
            }
        }
        let s = &self.system;
        if s.horizon == 0 {
            bail!("system.horizon: must be at least 1");
        }
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            bail!("system.dt: must be positive, got {}", s.dt);
        }
        if s.joint_limits && s.chain.is_none() {
            bail!("system.joint_limits: needs `system.chain`");
        }
        if let Some(r) = self.output.coverage_radius {
            if !(r > 0.0) {
                bail!("output.coverage_radius: must be positive, got {r}");
            }
        }
        self.solver.validate().context("solver")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 4
        [domain]
        mixture = {}
        count = 50
        [kernel]
        bandwidth = 0.2
        [system]
        dynamics = "single_integrator"
        dim = 2
        dt = 0.1
        horizon = 16
        x0 = [0.5, 0.5]
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ScenarioConfig::from_toml_str(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.domain.mixture.as_ref().unwrap().bounds, Bounds2::unit());
        assert_eq!(cfg.system.projection, ProjectionConfig::Auto);
        assert_eq!(cfg.output.directory, PathBuf::from("/tmp/out"));
        assert_eq!(cfg.solver, SolverOptions::default());
    }

    #[test]
    fn auto_bandwidth_and_echo_round_trip() {
        let text = MINIMAL.replace("bandwidth = 0.2", "bandwidth = \"auto-median\"");
        let cfg = ScenarioConfig::from_toml_str(&text, Path::new("/tmp")).unwrap();
        assert_eq!(cfg.kernel.bandwidth, Bandwidth::Auto(AutoMedian::AutoMedian));
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string().unwrap(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&json).unwrap(), cfg);
    }

    fn err(text: &str) -> String {
        format!("{:#}", ScenarioConfig::from_toml_str(text, Path::new("/tmp")).unwrap_err())
    }

    #[test]
    fn errors_name_the_key() {
        assert!(err(&MINIMAL.replace("horizon = 16", "horizon = 0")).contains("system.horizon"));
        assert!(err(&MINIMAL.replace("count = 50", "")).contains("domain.count"));
        assert!(err(&MINIMAL.replace("dt = 0.1", "dt = 0.1\nspeed = 2")).contains("speed"));
        assert!(err(&MINIMAL.replace("mixture = {}", "mixture = {}\nmesh = \"cube.obj\"")).contains("domain"));
        let missing = err(&MINIMAL.replace("mixture = {}", "mesh = \"nowhere/cube.obj\""));
        assert!(missing.contains("domain.mesh") && missing.contains("/tmp/nowhere/cube.obj"), "{missing}");
        assert!(err(&MINIMAL.replace("bandwidth = 0.2", "bandwidth = -1.0")).contains("kernel.bandwidth"));
        assert!(err(&format!("{MINIMAL}\n[solver]\npenalty_growth = 0.5\n")).contains("solver"));
    }
}
