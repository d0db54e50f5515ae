//! Local Lagrangian evaluation and its global minimization over the box.
//!
//! Agent `i`'s Lagrangian is
//! `L_i(x, ξ_i) = f_i(x) + ⟨μ_i, g(x)⟩ + ⟨−λ_i + λ_{i_U} + w_i − w_{i_U}, x⟩ − ⟨λ_i + w_i, Δ⟩`,
//! and `Q_i(ξ_i) = min_{x ∈ X} L_i(x, ξ_i)`. One-dimensional piecewise
//! quadratic Lagrangians and separable quadratic ones are minimized exactly;
//! everything else falls back to an exhaustive grid plus coordinate
//! golden-section refinement with an explicit certified gap.

use serde::{Deserialize, Serialize};

use crate::error::{DadsError, Result};
use crate::function::ScalarFunction;
use crate::graph::CyclicGraph;
use crate::linalg;
use crate::par::{self, Parallelism};
use crate::problem::ProblemSpec;

/// One agent's dual estimate `ξ_i = (μ_i, λ^i, w^i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualBlock {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub w: Vec<f64>,
}

impl DualBlock {
    pub fn zeros(spec: &ProblemSpec) -> Self {
        let nn = spec.dim() * spec.n_agents();
        Self {
            mu: vec![0.0; spec.constraint_dim()],
            lambda: vec![0.0; nn],
            w: vec![0.0; nn],
        }
    }

    /// Splits a stacked `(μ, λ, w)` vector.
    pub fn from_stacked(m: usize, stacked: &[f64]) -> Result<Self> {
        if stacked.len() < m || !(stacked.len() - m).is_multiple_of(2) {
            return Err(DadsError::invalid(format!(
                "stacked dual of length {} does not split as m + 2nN with m = {m}",
                stacked.len()
            )));
        }
        let nn = (stacked.len() - m) / 2;
        Ok(Self {
            mu: stacked[..m].to_vec(),
            lambda: stacked[m..m + nn].to_vec(),
            w: stacked[m + nn..].to_vec(),
        })
    }

    pub fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.mu);
        v.extend_from_slice(&self.lambda);
        v.extend_from_slice(&self.w);
        v
    }

    pub fn len(&self) -> usize {
        self.mu.len() + self.lambda.len() + self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.stacked())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.mu.iter().chain(&self.lambda).chain(&self.w).all(|v| *v >= 0.0)
    }

    pub fn lambda_block(&self, agent: usize, n: usize) -> &[f64] {
        &self.lambda[agent * n..(agent + 1) * n]
    }

    pub fn w_block(&self, agent: usize, n: usize) -> &[f64] {
        &self.w[agent * n..(agent + 1) * n]
    }

    fn check_dims(&self, spec: &ProblemSpec) -> Result<()> {
        let nn = spec.dim() * spec.n_agents();
        if self.mu.len() != spec.constraint_dim() {
            return Err(DadsError::dims("dual mu", spec.constraint_dim(), self.mu.len()));
        }
        if self.lambda.len() != nn {
            return Err(DadsError::dims("dual lambda", nn, self.lambda.len()));
        }
        if self.w.len() != nn {
            return Err(DadsError::dims("dual w", nn, self.w.len()));
        }
        Ok(())
    }
}

/// Grid and refinement settings for the non-exact path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverResolution {
    /// Points per dimension; `None` picks by dimension.
    pub grid_points: Option<usize>,
    /// Coordinate refinement sweeps after the grid scan.
    pub refine_iters: usize,
    pub refine_tol: f64,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for SolverResolution {
    fn default() -> Self {
        Self {
            grid_points: None,
            refine_iters: 4,
            refine_tol: 1e-10,
            parallelism: Parallelism::Sequential,
        }
    }
}

impl SolverResolution {
    pub fn points_for_dim(&self, n: usize) -> usize {
        self.grid_points.unwrap_or(match n {
            0..=2 => 4097,
            3 => 129,
            _ => 33,
        })
    }
}

/// Maximum dimension the exhaustive grid handles.
pub const MAX_GRID_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalSolution {
    pub minimizer: Vec<f64>,
    /// `Q_i` at the queried dual point, equal to `L_i(minimizer)`.
    pub value: f64,
    /// Upper bound on `value − Q_i`; zero on the exact paths.
    pub certified_gap: f64,
}

/// `L_i(·, ξ_i)` with the dual data folded into a linear term and a constant.
pub(crate) struct LocalObjective<'a> {
    objective: &'a ScalarFunction,
    weighted_constraints: Vec<(f64, &'a ScalarFunction)>,
    linear: Vec<f64>,
    constant: f64,
}

impl<'a> LocalObjective<'a> {
    pub(crate) fn new(spec: &'a ProblemSpec, cycle: &CyclicGraph, agent: usize, dual: &DualBlock) -> Result<Self> {
        if agent >= spec.n_agents() {
            return Err(DadsError::invalid(format!("agent index {agent} out of range")));
        }
        if cycle.n_agents() != spec.n_agents() {
            return Err(DadsError::invalid("cycle and problem disagree on agent count"));
        }
        dual.check_dims(spec)?;
        let n = spec.dim();
        let up = cycle.up(agent);
        let (lam_i, lam_u) = (dual.lambda_block(agent, n), dual.lambda_block(up, n));
        let (w_i, w_u) = (dual.w_block(agent, n), dual.w_block(up, n));
        let linear = (0..n).map(|k| -lam_i[k] + lam_u[k] + w_i[k] - w_u[k]).collect();
        let constant = -spec.delta * (lam_i.iter().sum::<f64>() + w_i.iter().sum::<f64>());
        let weighted_constraints = dual
            .mu
            .iter()
            .zip(&spec.constraints)
            .filter(|(m, _)| **m != 0.0)
            .map(|(m, g)| (*m, g))
            .collect();
        Ok(Self {
            objective: &spec.objectives[agent],
            weighted_constraints,
            linear,
            constant,
        })
    }

    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut v = self.objective.eval(x);
        for (m, g) in &self.weighted_constraints {
            v += m * g.eval(x);
        }
        v + linalg::dot(&self.linear, x) + self.constant
    }

    fn terms(&self) -> impl Iterator<Item = (f64, &ScalarFunction)> {
        std::iter::once((1.0, self.objective)).chain(self.weighted_constraints.iter().copied())
    }

    fn lipschitz_on(&self, spec: &ProblemSpec) -> f64 {
        self.terms().map(|(m, f)| m * f.lipschitz_on(&spec.domain)).sum::<f64>() + linalg::norm(&self.linear)
    }
}

pub fn local_lagrangian(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    agent: usize,
    x: &[f64],
    dual: &DualBlock,
) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(DadsError::dims("lagrangian argument", spec.dim(), x.len()));
    }
    Ok(LocalObjective::new(spec, cycle, agent, dual)?.eval(x))
}

/// Global minimizer of `L_i(·, ξ_i)` over the box; ties go to the
/// lexicographically smallest point.
pub fn solve_local(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    agent: usize,
    dual: &DualBlock,
    resolution: &SolverResolution,
) -> Result<LocalSolution> {
    let obj = LocalObjective::new(spec, cycle, agent, dual)?;
    if let Some(sol) = solve_exact_1d(spec, &obj) {
        return Ok(sol);
    }
    if let Some(sol) = solve_exact_separable(spec, &obj) {
        return Ok(sol);
    }
    solve_grid(spec, &obj, resolution)
}

/// `L_i(x, ξ_i) ≤ q_value + eps`, with `q_value` from [`solve_local`].
pub fn in_approx_marginal(
    spec: &ProblemSpec,
    cycle: &CyclicGraph,
    agent: usize,
    x: &[f64],
    dual: &DualBlock,
    eps: f64,
    q_value: f64,
) -> Result<bool> {
    Ok(local_lagrangian(spec, cycle, agent, x, dual)? <= q_value + eps)
}

fn finish(obj: &LocalObjective, minimizer: Vec<f64>, certified_gap: f64) -> LocalSolution {
    let value = obj.eval(&minimizer);
    LocalSolution {
        minimizer,
        value,
        certified_gap,
    }
}

/// Picks the lowest value among ascending candidates; earliest wins ties.
fn best_of(candidates: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut best = (candidates[0], f(candidates[0]));
    for &c in &candidates[1..] {
        let v = f(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    best.0
}

fn solve_exact_1d(spec: &ProblemSpec, obj: &LocalObjective) -> Option<LocalSolution> {
    if spec.dim() != 1 {
        return None;
    }
    let (l, u) = (spec.domain.lower[0], spec.domain.upper[0]);
    let mut knots = vec![l, u];
    for (_, f) in obj.terms() {
        knots.extend(f.breakpoints_within(l, u));
    }
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let mut candidates = knots.clone();
    for seg in knots.windows(2) {
        let (s, t) = (seg[0], seg[1]);
        let mid = 0.5 * (s + t);
        let (mut a, mut b) = (0.0, obj.linear[0]);
        for (m, f) in obj.terms() {
            let (fa, fb) = f.local_quadratic_1d(mid)?;
            a += m * fa;
            b += m * fb;
        }
        if a > 0.0 {
            let stat = -b / (2.0 * a);
            if stat > s && stat < t {
                candidates.push(stat);
            }
        }
    }
    // knots alone cover the degenerate box, but the kinds must still qualify
    for (_, f) in obj.terms() {
        f.local_quadratic_1d(l)?;
    }
    candidates.sort_by(f64::total_cmp);
    let z = best_of(&candidates, |z| obj.eval(&[z]));
    Some(finish(obj, vec![z], 0.0))
}

fn solve_exact_separable(spec: &ProblemSpec, obj: &LocalObjective) -> Option<LocalSolution> {
    let n = spec.dim();
    let mut coeffs: Vec<(f64, f64)> = obj.linear.iter().map(|c| (0.0, *c)).collect();
    for (m, f) in obj.terms() {
        for (slot, (a, b)) in coeffs.iter_mut().zip(f.separable_quadratic()?) {
            slot.0 += m * a;
            slot.1 += m * b;
        }
    }
    let x = (0..n)
        .map(|k| {
            let (a, b) = coeffs[k];
            let (l, u) = (spec.domain.lower[k], spec.domain.upper[k]);
            let mut cands = vec![l];
            if a > 0.0 {
                let stat = -b / (2.0 * a);
                if stat > l && stat < u {
                    cands.push(stat);
                }
            }
            cands.push(u);
            best_of(&cands, |t| a * t * t + b * t)
        })
        .collect();
    Some(finish(obj, x, 0.0))
}

fn solve_grid(spec: &ProblemSpec, obj: &LocalObjective, res: &SolverResolution) -> Result<LocalSolution> {
    let n = spec.dim();
    if n > MAX_GRID_DIM {
        return Err(DadsError::Capability(format!(
            "exhaustive grid supports n <= {MAX_GRID_DIM}, problem has n = {n}"
        )));
    }
    let dom = &spec.domain;
    let points = res.points_for_dim(n).max(2);
    let total = points
        .checked_pow(n as u32)
        .ok_or_else(|| DadsError::Capability("grid size overflows".into()))?;
    let (flat, grid_min) = par::argmin_indexed(res.parallelism, total, |idx| {
        Some(obj.eval(&dom.grid_point(idx, points)))
    })
    .ok_or_else(|| DadsError::Capability("empty grid".into()))?;

    let mut x = dom.grid_point(flat, points);
    let mut value = grid_min;
    let steps: Vec<f64> = (0..n).map(|k| dom.grid_step(k, points)).collect();
    for _ in 0..res.refine_iters {
        let before = value;
        for k in 0..n {
            let lo = (x[k] - steps[k]).max(dom.lower[k]);
            let hi = (x[k] + steps[k]).min(dom.upper[k]);
            let mut probe = x.clone();
            let t = golden_section(lo, hi, res.refine_tol, |t| {
                probe[k] = t;
                obj.eval(&probe)
            });
            let mut cand = x.clone();
            cand[k] = t;
            let v = obj.eval(&cand);
            if v < value {
                value = v;
                x = cand;
            }
        }
        if before - value <= res.refine_tol {
            break;
        }
    }
    let radius = 0.5 * steps.iter().map(|h| h * h).sum::<f64>().sqrt();
    let gap = (obj.lipschitz_on(spec) * radius - (grid_min - value)).max(0.0);
    Ok(finish(obj, x, gap))
}

fn golden_section(mut a: f64, mut b: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        c
    } else {
        d
    }
}
