//! Switching communication topologies and the fixed cyclic constraint graph.
//!
//! A [`WeightMatrix`] stores `a^i_j`, the weight agent `i` puts on the value
//! received from in-neighbor `j` (row `i`, column `j`). A [`WeightSchedule`]
//! is a finite list of matrices cycled by round index.

use std::path::Path;

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Assumption, DadsError, Result};

/// Row and column sums must hit 1 within this tolerance.
pub const BALANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(DadsError::invalid("weight matrix must have at least one row"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(DadsError::invalid(format!(
                    "weight matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DadsError::invalid(format!("weight matrix row {i} is not finite")));
            }
            entries.extend(row);
        }
        Ok(Self { n, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    /// `a^i_j`: weight agent `i` assigns to in-neighbor `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[j * n + i] = self.entries[i * n + j];
            }
        }
        Self { n, entries }
    }

    /// In-neighbors of `i`: `j ≠ i` with `a^i_j > 0`.
    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter(move |&(j, &a)| j != i && a > 0.0)
            .map(|(j, _)| j)
    }

    /// Edge set `{(j, i) : a^i_j > 0, i ≠ j}`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| self.in_neighbors(i).map(move |j| (j, i)))
    }

    /// `out_i = Σ_j a^i_j · values_j` for equal-length vectors.
    pub fn mix(&self, values: &[&[f64]]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let dim = values[i].len();
                let mut acc = vec![0.0; dim];
                for (j, &a) in self.row(i).iter().enumerate() {
                    if a != 0.0 {
                        for (slot, v) in acc.iter_mut().zip(values[j]) {
                            *slot += a * v;
                        }
                    }
                }
                acc
            })
            .collect()
    }
}

/// Diagonal at least `alpha_min`; off-diagonal entries either 0 or in `[alpha_min, 1]`.
pub fn validate_nondegeneracy(a: &WeightMatrix, alpha_min: f64) -> Result<bool> {
    if !(alpha_min > 0.0 && alpha_min <= 1.0) {
        return Err(DadsError::invalid(format!("alpha_min {alpha_min} outside (0, 1]")));
    }
    for i in 0..a.n {
        for j in 0..a.n {
            let v = a.get(i, j);
            let ok = if i == j {
                v >= alpha_min
            } else {
                v == 0.0 || (alpha_min..=1.0).contains(&v)
            };
            if !ok {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Doubly stochastic within [`BALANCE_TOL`].
pub fn validate_balanced(a: &WeightMatrix) -> bool {
    let n = a.n;
    if a.entries.iter().any(|&v| v < 0.0) {
        return false;
    }
    (0..n).all(|i| {
        let row: f64 = a.row(i).iter().sum();
        let col: f64 = (0..n).map(|r| a.get(r, i)).sum();
        (row - 1.0).abs() <= BALANCE_TOL && (col - 1.0).abs() <= BALANCE_TOL
    })
}

/// Time-varying topology: `at(k)` returns the matrix used at round `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    matrices: Vec<WeightMatrix>,
    period_hint: usize,
    alpha_min: f64,
}

impl WeightSchedule {
    pub fn new(matrices: Vec<WeightMatrix>, period_hint: usize, alpha_min: f64) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| DadsError::invalid("schedule needs at least one matrix"))?;
        let n = first.n_agents();
        if let Some(bad) = matrices.iter().position(|m| m.n_agents() != n) {
            return Err(DadsError::invalid(format!(
                "schedule matrix {bad} has {} agents, expected {n}",
                matrices[bad].n_agents()
            )));
        }
        if period_hint == 0 {
            return Err(DadsError::invalid("period hint B must be positive"));
        }
        if !(alpha_min > 0.0 && alpha_min <= 1.0) {
            return Err(DadsError::invalid(format!("alpha_min {alpha_min} outside (0, 1]")));
        }
        Ok(Self {
            matrices,
            period_hint,
            alpha_min,
        })
    }

    pub fn at(&self, k: usize) -> &WeightMatrix {
        &self.matrices[k % self.matrices.len()]
    }

    pub fn n_agents(&self) -> usize {
        self.matrices[0].n_agents()
    }

    pub fn period_hint(&self) -> usize {
        self.period_hint
    }

    pub fn alpha_min(&self) -> f64 {
        self.alpha_min
    }

    pub fn matrices(&self) -> &[WeightMatrix] {
        &self.matrices
    }

    /// Checks all three network assumptions over `horizon` rounds and names
    /// the first one that fails.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        for (k, m) in self.matrices.iter().enumerate() {
            if !validate_nondegeneracy(m, self.alpha_min)? {
                return Err(DadsError::Assumption {
                    which: Assumption::NonDegeneracy,
                    detail: format!("matrix {k} has a weight below alpha_min = {}", self.alpha_min),
                });
            }
            if !validate_balanced(m) {
                return Err(DadsError::Assumption {
                    which: Assumption::Balanced,
                    detail: format!("matrix {k} is not doubly stochastic"),
                });
            }
        }
        let b = self.period_hint;
        let horizon = horizon.max(b).max(self.matrices.len() + b - 1);
        if !validate_periodic_connectivity(self, b, horizon)? {
            return Err(DadsError::Assumption {
                which: Assumption::PeriodicConnectivity,
                detail: format!("some window of B = {b} rounds is not strongly connected"),
            });
        }
        Ok(())
    }
}

/// Every window of `b` consecutive rounds starting in `0..=horizon-b` must
/// union to a strongly connected digraph.
pub fn validate_periodic_connectivity(schedule: &WeightSchedule, b: usize, horizon: usize) -> Result<bool> {
    if b == 0 || horizon < b {
        return Err(DadsError::invalid(format!(
            "need B >= 1 and horizon >= B (B = {b}, horizon = {horizon})"
        )));
    }
    let n = schedule.n_agents();
    // windows repeat once k0 passes the schedule length
    let last_start = (horizon - b).min(schedule.matrices.len().saturating_sub(1));
    for k0 in 0..=last_start {
        let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for k in k0..k0 + b {
            for (j, i) in schedule.at(k).edges() {
                g.update_edge(nodes[j], nodes[i], ());
            }
        }
        if kosaraju_scc(&g).len() != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Seeded pairwise gossip: each round one symmetric exchange with weight 0.5
/// along the edges of a random Hamiltonian path, visited in a random order.
/// Any `n - 1` consecutive rounds cover the whole path.
pub fn pairwise_gossip_schedule(n_agents: usize, seed: u64, alpha_min: f64) -> Result<WeightSchedule> {
    if n_agents < 2 {
        return Err(DadsError::invalid("gossip schedule needs at least 2 agents"));
    }
    if !(alpha_min > 0.0 && alpha_min <= 0.5) {
        return Err(DadsError::invalid(format!(
            "gossip weights are 0.5; alpha_min {alpha_min} must lie in (0, 0.5]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n_agents).collect();
    order.shuffle(&mut rng);
    let mut edges: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    edges.shuffle(&mut rng);

    let matrices = edges
        .into_iter()
        .map(|(p, q)| {
            let mut rows = WeightMatrix::identity(n_agents).rows();
            rows[p][p] = 0.5;
            rows[q][q] = 0.5;
            rows[p][q] = 0.5;
            rows[q][p] = 0.5;
            WeightMatrix::from_rows(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    WeightSchedule::new(matrices, n_agents - 1, alpha_min)
}

/// Static directed ring: agent `i` keeps half and takes half from `i - 1`.
pub fn directed_ring_schedule(n_agents: usize) -> Result<WeightSchedule> {
    if n_agents < 2 {
        return Err(DadsError::invalid("ring schedule needs at least 2 agents"));
    }
    let mut rows = vec![vec![0.0; n_agents]; n_agents];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] += 0.5;
        row[(i + n_agents - 1) % n_agents] += 0.5;
    }
    WeightSchedule::new(vec![WeightMatrix::from_rows(rows)?], 1, 0.5)
}

/// Parses one or more matrix blocks: a line holding `N`, then `N` rows of
/// whitespace-separated weights. Blocks are separated by blank lines.
pub fn parse_matrix_blocks(text: &str, source_name: &str) -> Result<Vec<WeightMatrix>> {
    let perr = |line: usize, msg: String| DadsError::Parse {
        source_name: source_name.to_string(),
        message: format!("line {line}: {msg}"),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.starts_with('#'))
        .peekable();
    let mut out = Vec::new();
    loop {
        while lines.peek().is_some_and(|(_, l)| l.is_empty()) {
            lines.next();
        }
        let Some((ln, header)) = lines.next() else { break };
        let n: usize = header
            .parse()
            .map_err(|_| perr(ln, format!("expected agent count, found {header:?}")))?;
        if n == 0 {
            return Err(perr(ln, "agent count must be positive".into()));
        }
        let mut rows = Vec::with_capacity(n);
        for r in 0..n {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| perr(ln, format!("block ends after {r} of {n} rows")))?;
            if row.is_empty() {
                return Err(perr(ln, format!("blank line inside block, expected row {}", r + 1)));
            }
            let vals = row
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| perr(ln, format!("bad number {t:?}"))))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != n {
                return Err(perr(ln, format!("row has {} entries, expected {n}", vals.len())));
            }
            rows.push(vals);
        }
        out.push(WeightMatrix::from_rows(rows)?);
    }
    if out.is_empty() {
        return Err(perr(1, "no matrix blocks found".into()));
    }
    Ok(out)
}

pub fn load_schedule_file(path: &Path, period_hint: usize, alpha_min: f64) -> Result<WeightSchedule> {
    let text = std::fs::read_to_string(path)?;
    let blocks = parse_matrix_blocks(&text, &path.display().to_string())?;
    WeightSchedule::new(blocks, period_hint, alpha_min)
}

pub fn format_matrix_blocks(schedule: &WeightSchedule) -> String {
    schedule
        .matrices
        .iter()
        .map(|m| {
            let mut s = format!("{}\n", m.n);
            for i in 0..m.n {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Directed cycle over the agents: `down(i)` is the out-neighbor `i_D`,
/// `up(i)` the in-neighbor `i_U`. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CyclicGraph {
    down: Vec<usize>,
    up: Vec<usize>,
}

pub fn make_cycle(n_agents: usize) -> Result<CyclicGraph> {
    if n_agents < 2 {
        return Err(DadsError::invalid("cyclic constraint graph needs at least 2 agents"));
    }
    let down = (0..n_agents).map(|i| (i + 1) % n_agents).collect();
    let up = (0..n_agents).map(|i| (i + n_agents - 1) % n_agents).collect();
    Ok(CyclicGraph { down, up })
}

impl CyclicGraph {
    pub fn n_agents(&self) -> usize {
        self.down.len()
    }

    pub fn down(&self, i: usize) -> usize {
        self.down[i]
    }

    pub fn up(&self, i: usize) -> usize {
        self.up[i]
    }
}
