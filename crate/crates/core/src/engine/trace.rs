use serde::Serialize;

use super::EngineState;
use crate::local_solver::DualBlock;

/// Provenance attached by the harness.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunMeta {
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitAgent {
    pub primal: Vec<f64>,
    pub dual: DualBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitRecord {
    pub slater_point: Vec<f64>,
    pub slater_rounds: Option<usize>,
    pub gamma_i: Vec<f64>,
    pub gamma: f64,
    pub gamma_rounds: Option<usize>,
    pub radius: f64,
    pub g_bound: f64,
    pub h_bound: f64,
    pub beta: f64,
    pub agents: Vec<InitAgent>,
}

impl InitRecord {
    pub(super) fn from_state(state: &EngineState) -> Self {
        Self {
            slater_point: state.slater_point.clone(),
            slater_rounds: state.slater_rounds,
            gamma_i: state.bounds.gamma_i.clone(),
            gamma: state.gamma,
            gamma_rounds: state.gamma_rounds,
            radius: state.radius,
            g_bound: state.bounds.g_bound,
            h_bound: state.bounds.h_bound,
            beta: state.bounds.beta,
            agents: state
                .agents
                .iter()
                .map(|a| InitAgent {
                    primal: a.primal.clone(),
                    dual: a.dual.clone(),
                })
                .collect(),
        }
    }
}

/// What agent `i` did in round `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRoundRecord {
    pub agent: usize,
    /// `x_i(k)`
    pub primal: Vec<f64>,
    /// `ξ_i(k)`
    pub dual_before: DualBlock,
    /// `v_i(k)`
    pub mixed: DualBlock,
    /// `Q_i(v_i(k))`
    pub q_value: f64,
    pub certified_gap: f64,
    pub objective_term: f64,
    pub changed: bool,
    /// `D_i(k)`
    pub supgradient: Vec<f64>,
    /// `‖e_i(k)‖`
    pub displacement_norm: f64,
    /// `ξ_i(k+1)`
    pub dual_after: DualBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub alpha: f64,
    pub objective: f64,
    /// `max_{i,j} ‖λ^i(k+1) − λ^j(k+1)‖`
    pub lambda_disagreement: f64,
    pub w_disagreement: f64,
    pub feasibility_violation: f64,
    pub agents: Vec<AgentRoundRecord>,
}

/// Append-only record of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub init: InitRecord,
    pub rounds: Vec<RoundRecord>,
    /// Last round each agent's primal switched, if ever.
    pub settle_rounds: Vec<Option<usize>>,
    pub stopped_early: Option<usize>,
}

impl RunTrace {
    /// Latest primal estimates (initial ones when no round ran).
    pub fn final_primal(&self) -> Vec<Vec<f64>> {
        match self.rounds.last() {
            Some(r) => r.agents.iter().map(|a| a.primal.clone()).collect(),
            None => self.init.agents.iter().map(|a| a.primal.clone()).collect(),
        }
    }

    /// Latest dual estimates `ξ_i(K)`.
    pub fn final_duals(&self) -> Vec<DualBlock> {
        match self.rounds.last() {
            Some(r) => r.agents.iter().map(|a| a.dual_after.clone()).collect(),
            None => self.init.agents.iter().map(|a| a.dual.clone()).collect(),
        }
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.objective)
    }
}
