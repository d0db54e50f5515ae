//! The primal problem and its consensus-band approximation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DadsError, Result};
use crate::function::ScalarFunction;
use crate::graph::CyclicGraph;
use crate::local_solver::{solve_local, DualBlock, SolverResolution};

/// Compact box `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(DadsError::invalid("box bounds must be non-empty and of equal length"));
        }
        for (k, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(DadsError::invalid(format!(
                    "box coordinate {k}: need finite lower <= upper"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.lower)
                .zip(&self.upper)
                .all(|((v, l), u)| *l <= *v && *v <= *u)
    }

    /// Largest coordinate-wise distance outside the box (0 when inside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.lower)
            .zip(&self.upper)
            .map(|((v, l), u)| (l - v).max(v - u).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// `sup ‖x‖` over the box.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (l * l).max(u * u))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinate `k` of grid point `idx` out of `points` per dimension.
    pub fn grid_coord(&self, k: usize, idx: usize, points: usize) -> f64 {
        if points <= 1 {
            return self.lower[k];
        }
        let (l, u) = (self.lower[k], self.upper[k]);
        if idx + 1 == points {
            u
        } else {
            l + (u - l) * idx as f64 / (points - 1) as f64
        }
    }

    pub fn grid_step(&self, k: usize, points: usize) -> f64 {
        if points <= 1 {
            self.upper[k] - self.lower[k]
        } else {
            (self.upper[k] - self.lower[k]) / (points - 1) as f64
        }
    }

    /// Decodes a flat lexicographic grid index (first coordinate most significant).
    pub fn grid_point(&self, mut flat: usize, points: usize) -> Vec<f64> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            x[k] = self.grid_coord(k, flat % points, points);
            flat /= points;
        }
        x
    }
}

/// The primal problem: `min Σ f_i(z)` s.t. `g(z) ≤ 0`, `z ∈ X`, together with
/// the band width `delta`, the recovery tolerance `epsilon`, and the dual-ball
/// margin `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub objectives: Vec<ScalarFunction>,
    pub constraints: Vec<ScalarFunction>,
    pub domain: BoxSet,
    pub delta: f64,
    pub epsilon: f64,
    pub theta: f64,
    pub slater_point: Option<Vec<f64>>,
    pub gamma_override: Option<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let n = self.dim();
        if self.objectives.is_empty() {
            return Err(DadsError::invalid("at least one agent objective is required"));
        }
        for (i, f) in self.objectives.iter().enumerate() {
            f.validate(n)
                .map_err(|e| DadsError::invalid(format!("objective of agent {}: {e}", i + 1)))?;
        }
        for (l, g) in self.constraints.iter().enumerate() {
            g.validate(n)
                .map_err(|e| DadsError::invalid(format!("constraint {}: {e}", l + 1)))?;
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(DadsError::invalid("delta must be finite and nonnegative"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(DadsError::invalid("epsilon must be positive"));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(DadsError::invalid("theta must be positive"));
        }
        if let Some(g) = self.gamma_override {
            if !(g > 0.0 && g.is_finite()) {
                return Err(DadsError::invalid("gamma_override must be positive"));
            }
        }
        if let Some(z) = &self.slater_point {
            if z.len() != n {
                return Err(DadsError::dims("slater point", n, z.len()));
            }
        }
        Ok(())
    }

    pub fn n_agents(&self) -> usize {
        self.objectives.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn constraint_dim(&self) -> usize {
        self.constraints.len()
    }

    /// `Δ = δ·1 ∈ R^n`
    pub fn band(&self) -> Vec<f64> {
        vec![self.delta; self.dim()]
    }

    /// Length of a stacked dual block `(μ_i, λ, w)`.
    pub fn dual_len(&self) -> usize {
        self.constraint_dim() + 2 * self.dim() * self.n_agents()
    }

    /// Strictly feasible point of `g` inside the box.
    pub fn is_slater(&self, z: &[f64]) -> bool {
        self.domain.contains(z) && self.constraints.iter().all(|g| g.eval(z) < 0.0)
    }
}

pub fn eval_objective(spec: &ProblemSpec, agent: usize, x: &[f64]) -> Result<f64> {
    let f = spec
        .objectives
        .get(agent)
        .ok_or_else(|| DadsError::invalid(format!("agent index {agent} out of range")))?;
    if x.len() != spec.dim() {
        return Err(DadsError::dims("objective argument", spec.dim(), x.len()));
    }
    Ok(f.eval(x))
}

pub fn eval_constraint(spec: &ProblemSpec, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != spec.dim() {
        return Err(DadsError::dims("constraint argument", spec.dim(), x.len()));
    }
    Ok(spec.constraints.iter().map(|g| g.eval(x)).collect())
}

/// Constants derived from the problem data and a Slater point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedBounds {
    /// Upper bound on `sup_X ‖g(x)‖`.
    pub g_bound: f64,
    /// `sup_X ‖x‖`.
    pub h_bound: f64,
    pub beta: f64,
    pub gamma_i: Vec<f64>,
    /// `N · max_i gamma_i`, or the override.
    pub gamma: f64,
    /// `inf_X f_i`, one per agent.
    pub objective_infima: Vec<f64>,
}

/// `β(z̄) = min(min_ℓ −g_ℓ(z̄), δ)`; the inner min over an empty set is +∞.
pub fn slater_beta(spec: &ProblemSpec, z: &[f64]) -> f64 {
    spec.constraints.iter().map(|g| -g.eval(z)).fold(spec.delta, f64::min)
}

/// Per-agent `γ_i(z̄) = (f_i(z̄) − inf_X f_i + ε) / β(z̄)`.
pub fn gamma_components(spec: &ProblemSpec, z: &[f64], infima: &[f64]) -> Vec<f64> {
    let beta = slater_beta(spec, z);
    spec.objectives
        .iter()
        .zip(infima)
        .map(|(f, inf)| (f.eval(z) - inf + spec.epsilon) / beta)
        .collect()
}

/// `inf_X f_i` for every agent via the local solver at zero multipliers.
pub fn objective_infima(spec: &ProblemSpec, cycle: &CyclicGraph, resolution: &SolverResolution) -> Result<Vec<f64>> {
    let zero = DualBlock::zeros(spec);
    (0..spec.n_agents())
        .map(|i| solve_local(spec, cycle, i, &zero, resolution).map(|s| s.value))
        .collect()
}

/// Computes `G`, `H`, `β`, `γ_i`, and `γ`. Needs a strictly feasible Slater point.
pub fn compute_bounds(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    grid_points_per_dim: usize,
    resolution: &SolverResolution,
) -> Result<DerivedBounds> {
    let z = spec
        .slater_point
        .as_deref()
        .ok_or_else(|| DadsError::Precondition("no Slater point set".into()))?;
    if !spec.is_slater(z) {
        return Err(DadsError::Precondition(format!(
            "Slater point {z:?} is not strictly feasible inside the box"
        )));
    }
    if spec.delta.is_nan() || spec.delta <= 0.0 {
        return Err(DadsError::Precondition(
            "delta must be positive for the dual bound".into(),
        ));
    }
    let g_bound = constraint_norm_bound(spec, grid_points_per_dim);
    let h_bound = spec.domain.max_norm();
    let beta = slater_beta(spec, z);
    let infima = objective_infima(spec, cycle, resolution)?;
    let gamma_i = gamma_components(spec, z, &infima);
    let gamma = spec
        .gamma_override
        .unwrap_or_else(|| spec.n_agents() as f64 * gamma_i.iter().copied().fold(f64::MIN, f64::max));
    Ok(DerivedBounds {
        g_bound,
        h_bound,
        beta,
        gamma_i,
        gamma,
        objective_infima: infima,
    })
}

/// `sqrt(Σ_ℓ (sup |g_ℓ|)²)`, exact per component where possible, otherwise a
/// grid maximum padded by the Lipschitz bound times the covering radius.
fn constraint_norm_bound(spec: &ProblemSpec, points: usize) -> f64 {
    let dom = &spec.domain;
    let points = points.max(2);
    spec.constraints
        .iter()
        .map(|g| {
            let sup = g.abs_max_on(dom).unwrap_or_else(|| {
                let total = points.pow(dom.dim() as u32);
                let grid_max = (0..total)
                    .map(|flat| g.eval(&dom.grid_point(flat, points)).abs())
                    .fold(0.0, f64::max);
                let radius = (0..dom.dim())
                    .map(|k| dom.grid_step(k, points).powi(2))
                    .sum::<f64>()
                    .sqrt()
                    / 2.0;
                grid_max + g.lipschitz_on(dom) * radius
            });
            sup * sup
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSide {
    /// `−x_i + x_{i_D} − Δ ≤ 0`, multiplier `λ_i`.
    Lower,
    /// `x_i − x_{i_D} − Δ ≤ 0`, multiplier `w_i`.
    Upper,
}

/// One vector inequality of the approximate problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandConstraint {
    pub agent: usize,
    pub neighbor: usize,
    pub side: BandSide,
    pub delta: f64,
}

impl BandConstraint {
    /// Left-hand side per coordinate; feasible iff every entry is ≤ 0.
    pub fn lhs(&self, x_stack: &[Vec<f64>]) -> Vec<f64> {
        let (xi, xd) = (&x_stack[self.agent], &x_stack[self.neighbor]);
        xi.iter()
            .zip(xd)
            .map(|(a, b)| match self.side {
                BandSide::Lower => -a + b - self.delta,
                BandSide::Upper => a - b - self.delta,
            })
            .collect()
    }
}

impl fmt::Display for BandConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = (self.agent + 1, self.neighbor + 1);
        match self.side {
            BandSide::Lower => write!(f, "x{b} - x{a} <= {}", self.delta),
            BandSide::Upper => write!(f, "x{a} - x{b} <= {}", self.delta),
        }
    }
}

/// The `2N` band constraints coupling each agent to its cycle successor.
pub fn approximate_problem_constraints(spec: &ProblemSpec, cycle: &CyclicGraph) -> Result<Vec<BandConstraint>> {
    if cycle.n_agents() != spec.n_agents() {
        return Err(DadsError::invalid(format!(
            "cycle has {} agents, problem has {}",
            cycle.n_agents(),
            spec.n_agents()
        )));
    }
    Ok((0..spec.n_agents())
        .flat_map(|i| {
            [BandSide::Lower, BandSide::Upper].map(|side| BandConstraint {
                agent: i,
                neighbor: cycle.down(i),
                side,
                delta: spec.delta,
            })
        })
        .collect())
}
