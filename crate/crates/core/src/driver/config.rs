//! Run configuration: TOML sections `problem`, `angular`, `discretization`,
//! `solver`, `mesh`, `mmpde`, `output`, with `section.key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DriverError;
use crate::dg::SolverOptions;
use crate::mesh::SimplicialMesh;
use crate::mmpde::MmpdeOptions;
use crate::problems::{catalog, ProblemSpec, UserProblemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshMode {
    Fixed,
    Moving,
}

impl MeshMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MeshMode::Fixed => "fixed",
            MeshMode::Moving => "moving",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub name: String,
    /// User-defined problem; `name` is then only a label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user: Option<UserProblemConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AngularSection {
    pub order_1d: usize,
    pub n_polar: usize,
    pub n_azimuthal: usize,
}

impl Default for AngularSection {
    fn default() -> Self {
        AngularSection {
            order_1d: 8,
            n_polar: 8,
            n_azimuthal: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSection {
    pub degree: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        DiscretizationSection {
            degree: 2,
            dt: 1e-3,
            t_final: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    /// Subdivisions per axis (`n` intervals in 1D, `2 n^2` triangles in 2D).
    pub n: Option<usize>,
    /// Target element count `N`; used when `n` is not given.
    pub elements: Option<usize>,
    pub mode: MeshMode,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection {
            n: None,
            elements: None,
            mode: MeshMode::Fixed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MmpdeSection {
    pub tau: Option<f64>,
    pub initial_substeps: usize,
    pub max_substeps: usize,
    pub min_area_ratio: f64,
    pub energy_tol: f64,
    pub implicit: Option<bool>,
    pub max_displacement: f64,
    pub metric_smoothing: usize,
    /// Metric/MMPDE cycles on the initial condition before the first step
    /// (default 5 in moving mode).
    pub init_adapt: Option<usize>,
}

impl Default for MmpdeSection {
    fn default() -> Self {
        let o = MmpdeOptions::default();
        MmpdeSection {
            tau: None,
            initial_substeps: o.initial_substeps,
            max_substeps: o.max_substeps,
            min_area_ratio: o.min_area_ratio,
            energy_tol: o.energy_tol,
            implicit: o.implicit,
            max_displacement: o.max_displacement,
            metric_smoothing: 2,
            init_adapt: None,
        }
    }
}

impl MmpdeSection {
    pub fn options(&self) -> MmpdeOptions {
        MmpdeOptions {
            tau: self.tau,
            initial_substeps: self.initial_substeps,
            max_substeps: self.max_substeps,
            min_area_ratio: self.min_area_ratio,
            energy_tol: self.energy_tol,
            implicit: self.implicit,
            max_displacement: self.max_displacement,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Checkpoint every this many steps, plus the final step (0: final only).
    pub checkpoint_every: usize,
    /// Directions exported in snapshots besides the angular mean.
    pub directions: Vec<usize>,
    pub vtk: bool,
    /// Per-step vertex positions (`t,x_1,...` in 1D, `step,vertex_id,x,y` in 2D).
    pub trajectory: bool,
    pub dump_metric: bool,
    pub trace_energy: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            checkpoint_every: 20,
            directions: vec![0],
            vtk: true,
            trajectory: false,
            dump_metric: false,
            trace_energy: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub angular: AngularSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub mesh: MeshSection,
    #[serde(default)]
    pub mmpde: MmpdeSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Defaults for a catalog problem.
    pub fn for_problem(name: &str) -> Self {
        RunConfig {
            problem: ProblemSection {
                name: name.to_string(),
                user: None,
            },
            angular: AngularSection::default(),
            discretization: DiscretizationSection::default(),
            solver: SolverOptions::default(),
            mesh: MeshSection::default(),
            mmpde: MmpdeSection::default(),
            output: OutputSection::default(),
            seed: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, DriverError> {
        toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))
    }

    /// Read `path` and apply `key=value` overrides (`section.key`, value
    /// parsed as a TOML value, falling back to a string).
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| DriverError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let d = &self.discretization;
        if !(1..=2).contains(&d.degree) {
            return Err(DriverError::Config(format!(
                "degree must be 1 or 2, got {}",
                d.degree
            )));
        }
        if !(d.dt > 0.0 && d.t_final > 0.0) {
            return Err(DriverError::Config(
                "dt and t_final must be positive".into(),
            ));
        }
        if self.mesh.n.is_none() && self.mesh.elements.is_none() {
            return Err(DriverError::Config(
                "mesh.n or mesh.elements is required".into(),
            ));
        }
        if self.mesh.n == Some(0) || self.mesh.elements == Some(0) {
            return Err(DriverError::Config(
                "mesh needs at least one element".into(),
            ));
        }
        if self.mmpde.tau.is_some_and(|t| !(t > 0.0)) {
            return Err(DriverError::Config("mmpde.tau must be positive".into()));
        }
        Ok(())
    }

    /// Problem named in the config; relative CSV paths of user problems
    /// resolve against `base`.
    pub fn problem_spec(&self, base: &Path) -> Result<ProblemSpec, DriverError> {
        Ok(match &self.problem.user {
            Some(u) => u.build(&self.problem.name, base)?,
            None => catalog(&self.problem.name)?,
        })
    }

    pub fn subdivisions(&self, dim: usize) -> usize {
        self.mesh.n.unwrap_or_else(|| {
            SimplicialMesh::subdivisions_for(dim, self.mesh.elements.unwrap_or(1))
        })
    }

    pub fn n_steps(&self) -> usize {
        (self.discretization.t_final / self.discretization.dt - 1e-9).ceil() as usize
    }

    pub fn init_adapt(&self) -> usize {
        match self.mesh.mode {
            MeshMode::Fixed => 0,
            MeshMode::Moving => self.mmpde.init_adapt.unwrap_or(5),
        }
    }
}

pub fn apply_override(table: &mut toml::Table, kv: &str) -> Result<(), DriverError> {
    let (key, raw) = kv
        .split_once('=')
        .ok_or_else(|| DriverError::Config(format!("override '{kv}' is not key=value")))?;
    let value: toml::Value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts
        .split_last()
        .ok_or_else(|| DriverError::Config(format!("empty key in '{kv}'")))?;
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| DriverError::Config(format!("'{p}' in '{key}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// A convergence ladder: a base run plus the grid to sweep.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    #[serde(flatten)]
    pub base: LadderBase,
    pub ladder: LadderSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LadderBase {
    pub problem: ProblemSection,
    #[serde(default)]
    pub angular: AngularSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub mmpde: MmpdeSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub degrees: Vec<usize>,
    /// Element counts `N`.
    pub elements: Vec<usize>,
    pub modes: Vec<MeshMode>,
}

impl LadderConfig {
    pub fn load(path: &Path) -> Result<Self, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg: LadderConfig =
            toml::from_str(&text).map_err(|e| DriverError::Config(e.to_string()))?;
        if cfg.ladder.degrees.is_empty()
            || cfg.ladder.elements.is_empty()
            || cfg.ladder.modes.is_empty()
        {
            return Err(DriverError::Config("ladder is empty".into()));
        }
        Ok(cfg)
    }

    /// The runs of the ladder, grouped by (degree, mode) in ascending `N`.
    pub fn runs(&self) -> Vec<RunConfig> {
        let b = &self.base;
        let mut out = Vec::new();
        for &degree in &self.ladder.degrees {
            for &mode in &self.ladder.modes {
                for &n in &self.ladder.elements {
                    let mut cfg = RunConfig {
                        problem: b.problem.clone(),
                        angular: b.angular.clone(),
                        discretization: b.discretization.clone(),
                        solver: b.solver.clone(),
                        mesh: MeshSection {
                            n: None,
                            elements: Some(n),
                            mode,
                        },
                        mmpde: b.mmpde.clone(),
                        output: b.output.clone(),
                        seed: b.seed,
                    };
                    cfg.discretization.degree = degree;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_stated_parameters() {
        let c =
            RunConfig::from_toml("[problem]\nname = \"ex7-1d\"\n[mesh]\nelements = 80\n").unwrap();
        assert_eq!(c.discretization.dt, 1e-3);
        assert_eq!(c.discretization.t_final, 0.1);
        assert_eq!(c.n_steps(), 100);
        assert_eq!(
            (c.angular.order_1d, c.angular.n_polar, c.angular.n_azimuthal),
            (8, 8, 8)
        );
        assert_eq!(c.solver.tol, 1e-12);
        assert_eq!(c.mmpde.metric_smoothing, 2);
        assert_eq!(c.mesh.mode, MeshMode::Fixed);
        assert_eq!(c.init_adapt(), 0);
        assert_eq!(c.output.checkpoint_every, 20);
    }

    #[test]
    fn overrides_apply() {
        let mut t: toml::Table = "[problem]\nname = \"ex1-1d\"\n[mesh]\nn = 10\n"
            .parse()
            .unwrap();
        apply_override(&mut t, "mesh.mode=moving").unwrap();
        apply_override(&mut t, "discretization.degree=1").unwrap();
        apply_override(&mut t, "solver.sweep=\"topological\"").unwrap();
        let c: RunConfig = t.try_into().unwrap();
        assert_eq!(c.mesh.mode, MeshMode::Moving);
        assert_eq!(c.discretization.degree, 1);
        assert_eq!(c.solver.sweep, crate::dg::SweepKind::Topological);
        assert_eq!(c.init_adapt(), 5);
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(
            RunConfig::from_toml("[problem]\nname = \"ex1-1d\"\n[mesh]\nn = 4\nbogus = 1\n")
                .is_err()
        );
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::for_problem("ex2-2d");
        c.mesh.elements = Some(200);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn ladder_expands() {
        let text = "[problem]\nname = \"ex1-1d\"\n[ladder]\ndegrees = [1, 2]\nelements = [10, 20]\nmodes = [\"fixed\"]\n";
        let l: LadderConfig = toml::from_str(text).unwrap();
        let runs = l.runs();
        assert_eq!(runs.len(), 4);
        assert_eq!(runs[1].mesh.elements, Some(20));
        assert_eq!(runs[2].discretization.degree, 2);
    }
}
