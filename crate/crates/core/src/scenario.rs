//! Scenario files: problem, network, engine and diagnostics settings in one
//! TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsOptions;
use crate::engine::{EngineConfig, StallConfig, StepSize};
use crate::error::{Assumption, DadsError, Result};
use crate::function::ScalarFunction;
use crate::graph::{
    directed_ring_schedule, load_schedule_file, pairwise_gossip_schedule, WeightMatrix, WeightSchedule,
};
use crate::local_solver::{DualBlock, SolverResolution};
use crate::par::Parallelism;
use crate::problem::{BoxSet, ProblemSpec};

const BUNDLED: &[(&str, &str)] = &[
    ("paper_example", include_str!("../scenarios/paper_example.toml")),
    ("constrained_line", include_str!("../scenarios/constrained_line.toml")),
    ("planar_pair", include_str!("../scenarios/planar_pair.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_override: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_point: Option<Vec<f64>>,
    /// One candidate per agent; max-consensus picks the common point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_proposals: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub constraints: Vec<ScalarFunction>,
    pub domain: BoxSet,
    pub objectives: Vec<ScalarFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkSection {
    /// Seeded pairwise gossip along a random Hamiltonian path.
    Gossip {
        seed: u64,
        #[serde(default = "half")]
        alpha_min: f64,
    },
    /// Fixed directed ring with self weight one half.
    Ring,
    /// Explicit cyclic list of matrices.
    Matrices {
        period: usize,
        alpha_min: f64,
        matrices: Vec<Vec<Vec<f64>>>,
    },
    /// Matrices read from a block file, path relative to the scenario.
    File {
        period: usize,
        alpha_min: f64,
        path: PathBuf,
    },
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub rounds: usize,
    pub step: StepSize,
    pub stall: StallConfig,
    /// Grid density for the constraint-norm bound.
    pub bounds_grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_primal: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_dual: Option<Vec<DualBlock>>,
}

impl Default for EngineSection {
    fn default() -> Self {
        let d = EngineConfig::default();
        Self {
            rounds: d.rounds,
            step: d.step,
            stall: d.stall,
            bounds_grid: d.bounds_grid,
            threads: None,
            initial_primal: None,
            initial_dual: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub problem: ProblemSection,
    pub network: NetworkSection,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub solver: SolverResolution,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
}

impl Scenario {
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DadsError::Parse {
            source_name: source_name.to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DadsError::invalid(format!("cannot serialize scenario: {e}")))
    }

    pub fn spec(&self) -> ProblemSpec {
        let p = &self.problem;
        ProblemSpec {
            objectives: p.objectives.clone(),
            constraints: p.constraints.clone(),
            domain: p.domain.clone(),
            delta: p.delta,
            epsilon: p.epsilon,
            theta: p.theta,
            slater_point: p.slater_point.clone(),
            gamma_override: p.gamma_override,
        }
    }

    /// Gossip seed, or zero for deterministic networks.
    pub fn seed(&self) -> u64 {
        match self.network {
            NetworkSection::Gossip { seed, .. } => seed,
            _ => 0,
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        if let NetworkSection::Gossip { seed, .. } = &mut self.network {
            *seed = new_seed;
        }
    }

    pub fn schedule(&self, base_dir: Option<&Path>) -> Result<WeightSchedule> {
        let n = self.problem.objectives.len();
        match &self.network {
            NetworkSection::Gossip { seed, alpha_min } => pairwise_gossip_schedule(n, *seed, *alpha_min),
            NetworkSection::Ring => directed_ring_schedule(n),
            NetworkSection::Matrices {
                period,
                alpha_min,
                matrices,
            } => {
                let ms = matrices
                    .iter()
                    .map(|rows| WeightMatrix::from_rows(rows.clone()))
                    .collect::<Result<Vec<_>>>()?;
                WeightSchedule::new(ms, *period, *alpha_min)
            }
            NetworkSection::File {
                period,
                alpha_min,
                path,
            } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                load_schedule_file(&full, *period, *alpha_min)
            }
        }
    }

    pub fn engine_config(&self, parallelism: Parallelism) -> EngineConfig {
        let e = &self.engine;
        let mut resolution = self.solver.clone();
        resolution.parallelism = parallelism;
        EngineConfig {
            rounds: e.rounds,
            step: e.step,
            stall: e.stall.clone(),
            resolution,
            parallelism,
            bounds_grid: e.bounds_grid,
            initial_primal: e.initial_primal.clone(),
            initial_dual: e.initial_dual.clone(),
            slater_proposals: self.problem.slater_proposals.clone(),
        }
    }
}

/// A scenario with its problem and network built and every standing
/// assumption checked.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub spec: ProblemSpec,
    pub schedule: WeightSchedule,
}

impl LoadedScenario {
    pub fn from_scenario(scenario: Scenario, base_dir: Option<&Path>) -> Result<Self> {
        let spec = scenario.spec();
        spec.validate()?;
        if spec.n_agents() < 2 {
            return Err(DadsError::invalid("a scenario needs at least two agents"));
        }
        check_slater(&scenario, &spec)?;
        scenario.engine.step.validate()?;
        let schedule = scenario.schedule(base_dir)?;
        if schedule.n_agents() != spec.n_agents() {
            return Err(DadsError::invalid(format!(
                "network has {} agents, problem has {}",
                schedule.n_agents(),
                spec.n_agents()
            )));
        }
        let horizon = scenario.engine.rounds.max(schedule.period_hint()) + schedule.matrices().len();
        schedule.validate(horizon)?;
        Ok(Self {
            scenario,
            spec,
            schedule,
        })
    }

    /// Re-seeds the gossip network and rebuilds the schedule.
    pub fn with_seed(self, seed: u64, base_dir: Option<&Path>) -> Result<Self> {
        let mut scenario = self.scenario;
        scenario.set_seed(seed);
        Self::from_scenario(scenario, base_dir)
    }
}

fn check_slater(scenario: &Scenario, spec: &ProblemSpec) -> Result<()> {
    match (&spec.slater_point, &scenario.problem.slater_proposals) {
        (Some(z), _) if !spec.is_slater(z) => Err(DadsError::Assumption {
            which: Assumption::Slater,
            detail: format!("{z:?} is not strictly feasible inside the box"),
        }),
        (Some(_), _) => Ok(()),
        (None, Some(props)) => {
            if props.len() != spec.n_agents() {
                return Err(DadsError::invalid(format!(
                    "{} Slater proposals for {} agents",
                    props.len(),
                    spec.n_agents()
                )));
            }
            match props.iter().position(|z| !spec.is_slater(z)) {
                Some(i) => Err(DadsError::Assumption {
                    which: Assumption::Slater,
                    detail: format!("agent {} proposes {:?}, not strictly feasible", i + 1, props[i]),
                }),
                None => Ok(()),
            }
        }
        (None, None) => Err(DadsError::Assumption {
            which: Assumption::Slater,
            detail: "neither slater_point nor slater_proposals given".into(),
        }),
    }
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)?;
    let scenario = Scenario::from_toml_str(&text, &path.display().to_string())?;
    LoadedScenario::from_scenario(scenario, path.parent())
}

pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled(name: &str) -> Result<Scenario> {
    let text = bundled_source(name).ok_or_else(|| DadsError::invalid(format!("no bundled scenario named {name:?}")))?;
    Scenario::from_toml_str(text, name)
}

/// A bundled scenario name, or else a path to a scenario file.
pub fn resolve(name_or_path: &str) -> Result<LoadedScenario> {
    if bundled_source(name_or_path).is_some() {
        LoadedScenario::from_scenario(bundled(name_or_path)?, None)
    } else {
        load_scenario(Path::new(name_or_path))
    }
}

/// The four-agent line example with `γ` pinned to 2.65.
pub fn paper_example_problem() -> ProblemSpec {
    ProblemSpec {
        objectives: vec![
            ScalarFunction::piecewise_linear(&[(1.0, 0.0), (2.0, 1.0)]),
            ScalarFunction::piecewise_linear(&[(2.0, 1.0), (3.0, 2.0)]),
            ScalarFunction::quadratic_1d(1.0, -0.25, 0.0),
            ScalarFunction::quadratic_1d(1.0, 0.5, 0.0),
        ],
        constraints: vec![],
        domain: BoxSet {
            lower: vec![0.0],
            upper: vec![10.0],
        },
        delta: 1.0,
        epsilon: 0.1,
        theta: 0.35,
        slater_point: Some(vec![0.5]),
        gamma_override: Some(2.65),
    }
}
