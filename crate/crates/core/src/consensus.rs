//! Max-consensus for initialization and first-order dynamic average consensus.

use std::cmp::Ordering;

use crate::error::{DadsError, Result};
use crate::graph::{WeightMatrix, WeightSchedule};
use crate::linalg::lex_cmp;

/// Lexicographically larger of `a` and `b`; the first differing coordinate decides.
pub fn lex_max(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(DadsError::dims("lex_max operand", a.len(), b.len()));
    }
    Ok(if lex_cmp(a, b) == Ordering::Less {
        b.to_vec()
    } else {
        a.to_vec()
    })
}

/// One synchronous max-consensus round: each agent keeps the lexicographic
/// maximum over itself and its in-neighbors at this round.
pub fn max_consensus_step(states: &[Vec<f64>], a: &WeightMatrix) -> Vec<Vec<f64>> {
    (0..states.len())
        .map(|i| {
            a.in_neighbors(i)
                .fold(&states[i], |best, j| {
                    if lex_cmp(best, &states[j]) == Ordering::Less {
                        &states[j]
                    } else {
                        best
                    }
                })
                .clone()
        })
        .collect()
}

fn all_agree(states: &[Vec<f64>]) -> bool {
    states.windows(2).all(|w| w[0] == w[1])
}

/// Runs max-consensus from `initials` until every agent holds the same
/// vector. Returns that vector and the number of rounds taken.
pub fn max_consensus(initials: &[Vec<f64>], schedule: &WeightSchedule, max_rounds: usize) -> Result<(Vec<f64>, usize)> {
    let dim = initials
        .first()
        .ok_or_else(|| DadsError::invalid("max-consensus needs at least one agent"))?
        .len();
    if let Some(bad) = initials.iter().find(|v| v.len() != dim) {
        return Err(DadsError::dims("max-consensus initial value", dim, bad.len()));
    }
    if initials.len() != schedule.n_agents() {
        return Err(DadsError::invalid(format!(
            "{} initial values for a {}-agent schedule",
            initials.len(),
            schedule.n_agents()
        )));
    }
    let mut states = initials.to_vec();
    if all_agree(&states) {
        return Ok((states.swap_remove(0), 0));
    }
    for k in 0..max_rounds {
        states = max_consensus_step(&states, schedule.at(k));
        if all_agree(&states) {
            return Ok((states.swap_remove(0), k + 1));
        }
    }
    Err(DadsError::ConvergenceFailure { rounds: max_rounds })
}

/// One update of `x^i(k+1) = Σ_j a^i_j(k) x^j(k) + η^i(k)`.
pub fn dynamic_average_step(states: &[Vec<f64>], inputs: &[Vec<f64>], a: &WeightMatrix) -> Result<Vec<Vec<f64>>> {
    let n = a.n_agents();
    if states.len() != n || inputs.len() != n {
        return Err(DadsError::invalid(format!(
            "expected {n} states and inputs, got {} and {}",
            states.len(),
            inputs.len()
        )));
    }
    let dim = states[0].len();
    if let Some(bad) = states.iter().chain(inputs).find(|v| v.len() != dim) {
        return Err(DadsError::dims("consensus vector", dim, bad.len()));
    }
    let refs: Vec<&[f64]> = states.iter().map(|v| v.as_slice()).collect();
    let mut mixed = a.mix(&refs);
    for (m, eta) in mixed.iter_mut().zip(inputs) {
        for (v, e) in m.iter_mut().zip(eta) {
            *v += e;
        }
    }
    Ok(mixed)
}

/// `max_{i,j} ‖x^i − x^j‖`
pub fn disagreement(states: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in states.iter().enumerate() {
        for b in &states[i + 1..] {
            worst = worst.max(crate::linalg::dist(a, b));
        }
    }
    worst
}
