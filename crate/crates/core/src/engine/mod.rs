//! The distributed approximate dual subgradient iteration.
//!
//! Each round `k` every agent mixes its neighbors' `λ`/`w` estimates with
//! the weights of `A(k)`, runs primal recovery against the mixed dual (from
//! `k = 1` on), and takes a projected supgradient step onto `M_i`, the
//! nonnegative orthant intersected with the ball of radius `γ + θ`.

mod trace;

pub use trace::{AgentRoundRecord, InitRecord, RoundRecord, RunMeta, RunTrace};

use serde::{Deserialize, Serialize};

use crate::consensus::{disagreement, max_consensus};
use crate::error::{Assumption, DadsError, Result};
use crate::graph::{make_cycle, CyclicGraph, WeightMatrix, WeightSchedule};
use crate::linalg;
use crate::local_solver::{local_lagrangian, solve_local, DualBlock, SolverResolution};
use crate::par::{self, Parallelism};
use crate::problem::{compute_bounds, gamma_components, DerivedBounds, ProblemSpec};

/// Diminishing step size `a / (k + 1)^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSize {
    Harmonic { a: f64 },
    Power { a: f64, p: f64 },
}

impl Default for StepSize {
    fn default() -> Self {
        StepSize::Harmonic { a: 1.0 }
    }
}

impl StepSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSize::Harmonic { a } if a > 0.0 && a.is_finite() => Ok(()),
            StepSize::Power { a, p } if a > 0.0 && a.is_finite() && p > 0.5 && p <= 1.0 => Ok(()),
            other => Err(DadsError::invalid(format!(
                "step size {other:?}: need a > 0 and p in (0.5, 1]"
            ))),
        }
    }

    pub fn at(&self, k: usize) -> f64 {
        let t = (k + 1) as f64;
        match *self {
            StepSize::Harmonic { a } => a / t,
            StepSize::Power { a, p } => a / t.powf(p),
        }
    }
}

/// Early stop once primals are frozen and duals barely move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StallConfig {
    pub enabled: bool,
    /// Never stop before this many rounds.
    pub min_rounds: usize,
    /// Consecutive quiet rounds required.
    pub window: usize,
    /// Largest `‖ξ_i(k+1) − ξ_i(k)‖` that counts as quiet.
    pub dual_tol: f64,
}

impl Default for StallConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            min_rounds: 150,
            window: 25,
            dual_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub rounds: usize,
    pub step: StepSize,
    pub stall: StallConfig,
    pub resolution: SolverResolution,
    pub parallelism: Parallelism,
    /// Grid density for the constraint-norm bound.
    pub bounds_grid: usize,
    pub initial_primal: Option<Vec<Vec<f64>>>,
    pub initial_dual: Option<Vec<DualBlock>>,
    /// Per-agent Slater proposals, used when the problem pins no Slater point.
    pub slater_proposals: Option<Vec<Vec<f64>>>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            rounds: 150,
            step: StepSize::default(),
            stall: StallConfig::default(),
            resolution: SolverResolution::default(),
            parallelism: Parallelism::Sequential,
            bounds_grid: 201,
            initial_primal: None,
            initial_dual: None,
            slater_proposals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub primal: Vec<f64>,
    pub dual: DualBlock,
    /// Last round at which the primal estimate switched.
    pub last_settle_round: Option<usize>,
}

/// `v_i(k)`: the agent's own `μ_i` with `λ` and `w` mixed over in-neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDual {
    mu: Vec<f64>,
    v_lambda: Vec<f64>,
    v_w: Vec<f64>,
}

impl MixedDual {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn v_lambda(&self) -> &[f64] {
        &self.v_lambda
    }

    pub fn v_w(&self) -> &[f64] {
        &self.v_w
    }

    pub fn as_dual(&self) -> DualBlock {
        DualBlock {
            mu: self.mu.clone(),
            lambda: self.v_lambda.clone(),
            w: self.v_w.clone(),
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.as_dual().stacked()
    }
}

pub fn mix_duals(states: &[AgentState], a: &WeightMatrix) -> Result<Vec<MixedDual>> {
    if states.len() != a.n_agents() {
        return Err(DadsError::invalid(format!(
            "{} agent states for a {}-agent weight matrix",
            states.len(),
            a.n_agents()
        )));
    }
    let lambdas: Vec<&[f64]> = states.iter().map(|s| s.dual.lambda.as_slice()).collect();
    let ws: Vec<&[f64]> = states.iter().map(|s| s.dual.w.as_slice()).collect();
    let v_lambda = a.mix(&lambdas);
    let v_w = a.mix(&ws);
    Ok(states
        .iter()
        .zip(v_lambda.into_iter().zip(v_w))
        .map(|(s, (v_lambda, v_w))| MixedDual {
            mu: s.dual.mu.clone(),
            v_lambda,
            v_w,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalStep {
    pub primal: Vec<f64>,
    /// `Q_i(v_i(k))`
    pub q_value: f64,
    pub changed: bool,
    pub certified_gap: f64,
}

/// Primal recovery: keep the previous estimate while it stays in the
/// ε-approximate marginal set, otherwise jump to a fresh minimizer.
pub fn primal_step(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    agent: usize,
    mixed: &MixedDual,
    previous_primal: &[f64],
    eps: f64,
    resolution: &SolverResolution,
) -> Result<PrimalStep> {
    let dual = mixed.as_dual();
    let sol = solve_local(spec, cycle, agent, &dual, resolution)?;
    let keep = local_lagrangian(spec, cycle, agent, previous_primal, &dual)? <= sol.value + eps;
    Ok(if keep {
        PrimalStep {
            primal: previous_primal.to_vec(),
            q_value: sol.value,
            changed: false,
            certified_gap: sol.certified_gap,
        }
    } else {
        PrimalStep {
            primal: sol.minimizer,
            q_value: sol.value,
            changed: true,
            certified_gap: sol.certified_gap,
        }
    })
}

/// Stacked supgradient `(g(x_i), D_λ, D_w)` of `Q_i` at the mixed dual.
pub fn build_supgradient(spec: &ProblemSpec, cycle: &CyclicGraph, agent: usize, primal: &[f64]) -> Result<Vec<f64>> {
    let n = spec.dim();
    if primal.len() != n {
        return Err(DadsError::dims("supgradient primal", n, primal.len()));
    }
    let m = spec.constraint_dim();
    let nn = n * spec.n_agents();
    let up = cycle.up(agent);
    let mut d = vec![0.0; m + 2 * nn];
    for (slot, g) in d.iter_mut().zip(&spec.constraints) {
        *slot = g.eval(primal);
    }
    let (lam, w) = d[m..].split_at_mut(nn);
    for k in 0..n {
        let x = primal[k];
        lam[agent * n + k] = -spec.delta - x;
        lam[up * n + k] += x;
        w[agent * n + k] = -spec.delta + x;
        w[up * n + k] += -x;
    }
    Ok(d)
}

/// Euclidean projection onto `{ξ ≥ 0, ‖ξ‖ ≤ radius}`: clamp, then rescale.
pub fn project_to_m(v_plus: &[f64], radius: f64) -> Vec<f64> {
    let mut out: Vec<f64> = v_plus.iter().map(|v| v.max(0.0)).collect();
    let nrm = linalg::norm(&out);
    if nrm > radius {
        let s = radius / nrm;
        for v in &mut out {
            *v *= s;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualStep {
    pub dual: DualBlock,
    /// `e_i(k) = ξ_i(k+1) − v_i(k)`
    pub displacement: Vec<f64>,
}

pub fn dual_step(mixed: &MixedDual, supgradient: &[f64], alpha: f64, radius: f64) -> Result<DualStep> {
    let v = mixed.stacked();
    if supgradient.len() != v.len() {
        return Err(DadsError::dims("supgradient", v.len(), supgradient.len()));
    }
    let projected = project_to_m(&linalg::axpy(&v, alpha, supgradient), radius);
    let displacement = linalg::sub(&projected, &v);
    Ok(DualStep {
        dual: DualBlock::from_stacked(mixed.mu.len(), &projected)?,
        displacement,
    })
}

/// Everything fixed before round 0.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub spec: ProblemSpec,
    pub cycle: CyclicGraph,
    pub agents: Vec<AgentState>,
    pub bounds: DerivedBounds,
    pub gamma: f64,
    pub radius: f64,
    pub slater_point: Vec<f64>,
    pub slater_rounds: Option<usize>,
    pub gamma_rounds: Option<usize>,
}

/// Agrees on a Slater point and on `γ`, then seeds agent states.
pub fn initialize(
    spec: &ProblemSpec,
    schedule: &WeightSchedule,
    cycle: &CyclicGraph,
    config: &EngineConfig,
) -> Result<EngineState> {
    spec.validate()?;
    let n_agents = spec.n_agents();
    if n_agents < 2 {
        return Err(DadsError::invalid("at least two agents are required"));
    }
    if cycle.n_agents() != n_agents || schedule.n_agents() != n_agents {
        return Err(DadsError::invalid(format!(
            "problem has {n_agents} agents, cycle {}, schedule {}",
            cycle.n_agents(),
            schedule.n_agents()
        )));
    }
    if spec.delta.is_nan() || spec.delta <= 0.0 {
        return Err(DadsError::Precondition("delta must be positive".into()));
    }
    let consensus_budget = (n_agents - 1) * schedule.period_hint();

    let (slater_point, slater_rounds) = match (&spec.slater_point, &config.slater_proposals) {
        (Some(z), _) => (z.clone(), None),
        (None, Some(props)) => {
            if props.len() != n_agents {
                return Err(DadsError::invalid(format!(
                    "{} Slater proposals for {n_agents} agents",
                    props.len()
                )));
            }
            if let Some(i) = props.iter().position(|z| !spec.is_slater(z)) {
                return Err(DadsError::Assumption {
                    which: Assumption::Slater,
                    detail: format!("agent {} proposes {:?}, not strictly feasible", i + 1, props[i]),
                });
            }
            let (z, r) = max_consensus(props, schedule, consensus_budget)?;
            (z, Some(r))
        }
        (None, None) => {
            return Err(DadsError::Assumption {
                which: Assumption::Slater,
                detail: "no Slater point or per-agent proposals given".into(),
            })
        }
    };
    if !spec.is_slater(&slater_point) {
        return Err(DadsError::Assumption {
            which: Assumption::Slater,
            detail: format!("{slater_point:?} is not strictly feasible inside the box"),
        });
    }
    let mut spec = spec.clone();
    spec.slater_point = Some(slater_point.clone());

    let bounds = compute_bounds(&spec, cycle, config.bounds_grid, &config.resolution)?;
    let (gamma, gamma_rounds) = match spec.gamma_override {
        Some(g) => (g, None),
        None => {
            let gi = gamma_components(&spec, &slater_point, &bounds.objective_infima);
            let scalars: Vec<Vec<f64>> = gi.iter().map(|g| vec![*g]).collect();
            let (top, r) = max_consensus(&scalars, schedule, consensus_budget)?;
            (n_agents as f64 * top[0], Some(r))
        }
    };
    let radius = gamma + spec.theta;

    let primals = match &config.initial_primal {
        Some(p) => p.clone(),
        None => vec![spec.domain.lower.clone(); n_agents],
    };
    if primals.len() != n_agents {
        return Err(DadsError::invalid(format!(
            "{} initial primals for {n_agents} agents",
            primals.len()
        )));
    }
    if let Some(i) = primals.iter().position(|x| !spec.domain.contains(x)) {
        return Err(DadsError::Precondition(format!(
            "initial primal of agent {} lies outside X",
            i + 1
        )));
    }
    let duals = match &config.initial_dual {
        Some(d) => d.clone(),
        None => vec![DualBlock::zeros(&spec); n_agents],
    };
    if duals.len() != n_agents {
        return Err(DadsError::invalid(format!(
            "{} initial duals for {n_agents} agents",
            duals.len()
        )));
    }
    let zero = DualBlock::zeros(&spec);
    for (i, d) in duals.iter().enumerate() {
        if d.mu.len() != zero.mu.len() || d.lambda.len() != zero.lambda.len() || d.w.len() != zero.w.len() {
            return Err(DadsError::invalid(format!(
                "initial dual of agent {} has wrong dimensions",
                i + 1
            )));
        }
        if !d.is_nonnegative() {
            return Err(DadsError::Precondition(format!(
                "initial dual of agent {} is not nonnegative",
                i + 1
            )));
        }
    }
    let agents = primals
        .into_iter()
        .zip(duals)
        .map(|(primal, dual)| AgentState {
            primal,
            dual,
            last_settle_round: None,
        })
        .collect();

    Ok(EngineState {
        spec,
        cycle: cycle.clone(),
        agents,
        bounds,
        gamma,
        radius,
        slater_point,
        slater_rounds,
        gamma_rounds,
    })
}

impl EngineState {
    /// Runs round `k` and returns its record.
    pub fn step(&mut self, k: usize, schedule: &WeightSchedule, config: &EngineConfig) -> Result<RoundRecord> {
        let mixed = mix_duals(&self.agents, schedule.at(k))?;
        let alpha = config.step.at(k);
        let mut resolution = config.resolution.clone();
        resolution.parallelism = config.parallelism;
        let spec = &self.spec;
        let cycle = &self.cycle;
        let agents = &self.agents;
        let radius = self.radius;

        let outcomes = par::map_indexed(config.parallelism, agents.len(), |i| -> Result<AgentRoundRecord> {
            let prev = &agents[i];
            let step = if k >= 1 {
                primal_step(spec, cycle, i, &mixed[i], &prev.primal, spec.epsilon, &resolution)?
            } else {
                let sol = solve_local(spec, cycle, i, &mixed[i].as_dual(), &resolution)?;
                PrimalStep {
                    primal: prev.primal.clone(),
                    q_value: sol.value,
                    changed: false,
                    certified_gap: sol.certified_gap,
                }
            };
            let sup = build_supgradient(spec, cycle, i, &step.primal)?;
            let ds = dual_step(&mixed[i], &sup, alpha, radius)?;
            Ok(AgentRoundRecord {
                agent: i,
                objective_term: spec.objectives[i].eval(&step.primal),
                primal: step.primal,
                dual_before: prev.dual.clone(),
                mixed: mixed[i].as_dual(),
                q_value: step.q_value,
                certified_gap: step.certified_gap,
                changed: step.changed,
                displacement_norm: linalg::norm(&ds.displacement),
                supgradient: sup,
                dual_after: ds.dual,
            })
        });
        let records = outcomes.into_iter().collect::<Result<Vec<_>>>()?;

        for (state, rec) in self.agents.iter_mut().zip(&records) {
            state.primal = rec.primal.clone();
            state.dual = rec.dual_after.clone();
            if rec.changed {
                state.last_settle_round = Some(k);
            }
        }
        let lambdas: Vec<Vec<f64>> = self.agents.iter().map(|s| s.dual.lambda.clone()).collect();
        let ws: Vec<Vec<f64>> = self.agents.iter().map(|s| s.dual.w.clone()).collect();
        let x_stack: Vec<Vec<f64>> = records.iter().map(|r| r.primal.clone()).collect();
        let feas = crate::diagnostics::feasibility_report(&self.spec, &self.cycle, &x_stack)?;
        Ok(RoundRecord {
            round: k,
            alpha,
            objective: records.iter().map(|r| r.objective_term).sum(),
            lambda_disagreement: disagreement(&lambdas),
            w_disagreement: disagreement(&ws),
            feasibility_violation: feas.max_violation,
            agents: records,
        })
    }
}

/// Validates the network, initializes, and iterates for `config.rounds`
/// rounds or until the stall detector fires.
pub fn run(spec: &ProblemSpec, schedule: &WeightSchedule, config: &EngineConfig) -> Result<RunTrace> {
    config.step.validate()?;
    let horizon = config.rounds.max(schedule.period_hint()) + schedule.matrices().len();
    schedule.validate(horizon)?;
    let cycle = make_cycle(spec.n_agents())?;
    par::install(config.parallelism, || {
        let mut state = initialize(spec, schedule, &cycle, config)?;
        let init = InitRecord::from_state(&state);
        let mut rounds = Vec::with_capacity(config.rounds);
        let mut quiet = 0usize;
        let mut stopped_early = None;
        for k in 0..config.rounds {
            let rec = state.step(k, schedule, config)?;
            let moved = rec
                .agents
                .iter()
                .map(|a| linalg::dist(&a.dual_after.stacked(), &a.dual_before.stacked()))
                .fold(0.0, f64::max);
            let still = !rec.agents.iter().any(|a| a.changed) && moved < config.stall.dual_tol;
            rounds.push(rec);
            quiet = if still { quiet + 1 } else { 0 };
            if config.stall.enabled && k + 1 >= config.stall.min_rounds && quiet >= config.stall.window {
                stopped_early = Some(k + 1);
                break;
            }
        }
        Ok(RunTrace {
            meta: RunMeta::default(),
            init,
            settle_rounds: state.agents.iter().map(|a| a.last_settle_round).collect(),
            rounds,
            stopped_early,
        })
    })
}
