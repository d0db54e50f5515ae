//! Parametric scalar functions used for agent objectives and constraint
//! components. The set of kinds is closed so the local solver can exploit
//! their structure.

use serde::{Deserialize, Serialize};

use crate::error::{DadsError, Result};
use crate::problem::BoxSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFunction {
    /// `Σ_k curvature_k · (x_k − center_k)² + offset`
    Quadratic {
        curvature: Vec<f64>,
        center: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
    /// One-dimensional; linear between breakpoints, constant outside them.
    PiecewiseLinear { breakpoints: Vec<f64>, values: Vec<f64> },
    /// One-dimensional; `Σ_k coefficients_k · x^k`.
    Polynomial { coefficients: Vec<f64> },
    /// `⟨weights, x⟩ + offset`
    Affine {
        weights: Vec<f64>,
        #[serde(default)]
        offset: f64,
    },
}

impl ScalarFunction {
    pub fn quadratic_1d(curvature: f64, center: f64, offset: f64) -> Self {
        ScalarFunction::Quadratic {
            curvature: vec![curvature],
            center: vec![center],
            offset,
        }
    }

    pub fn piecewise_linear(points: &[(f64, f64)]) -> Self {
        ScalarFunction::PiecewiseLinear {
            breakpoints: points.iter().map(|p| p.0).collect(),
            values: points.iter().map(|p| p.1).collect(),
        }
    }

    pub fn affine(weights: Vec<f64>, offset: f64) -> Self {
        ScalarFunction::Affine { weights, offset }
    }

    /// Checks parameters for an `n`-dimensional argument.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ScalarFunction::Quadratic {
                curvature,
                center,
                offset,
            } => {
                if curvature.len() != dim || center.len() != dim {
                    return Err(DadsError::invalid(format!(
                        "quadratic needs {dim} curvature and center entries, got {} and {}",
                        curvature.len(),
                        center.len()
                    )));
                }
                if !finite(curvature) || !finite(center) || !offset.is_finite() {
                    return Err(DadsError::invalid("quadratic parameters must be finite"));
                }
            }
            ScalarFunction::PiecewiseLinear { breakpoints, values } => {
                if dim != 1 {
                    return Err(DadsError::invalid("piecewise_linear is one-dimensional"));
                }
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(DadsError::invalid(
                        "piecewise_linear needs matching non-empty breakpoints and values",
                    ));
                }
                if !finite(breakpoints) || !finite(values) {
                    return Err(DadsError::invalid("piecewise_linear parameters must be finite"));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(DadsError::invalid(
                        "piecewise_linear breakpoints must be strictly increasing",
                    ));
                }
            }
            ScalarFunction::Polynomial { coefficients } => {
                if dim != 1 {
                    return Err(DadsError::invalid("polynomial is one-dimensional"));
                }
                if !finite(coefficients) {
                    return Err(DadsError::invalid("polynomial coefficients must be finite"));
                }
            }
            ScalarFunction::Affine { weights, offset } => {
                if weights.len() != dim {
                    return Err(DadsError::dims("affine weights", dim, weights.len()));
                }
                if !finite(weights) || !offset.is_finite() {
                    return Err(DadsError::invalid("affine parameters must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarFunction::Quadratic {
                curvature,
                center,
                offset,
            } => {
                let mut acc = 0.0;
                for ((a, c), xk) in curvature.iter().zip(center).zip(x) {
                    let d = xk - c;
                    acc += a * d * d;
                }
                acc + offset
            }
            ScalarFunction::PiecewiseLinear { breakpoints, values } => pwl_eval(breakpoints, values, x[0]),
            ScalarFunction::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * x[0] + c),
            ScalarFunction::Affine { weights, offset } => {
                weights.iter().zip(x).map(|(w, xk)| w * xk).sum::<f64>() + offset
            }
        }
    }

    /// Upper bound on the gradient norm over `domain`.
    pub fn lipschitz_on(&self, domain: &BoxSet) -> f64 {
        match self {
            ScalarFunction::Quadratic { curvature, center, .. } => curvature
                .iter()
                .zip(center)
                .enumerate()
                .map(|(k, (a, c))| {
                    let reach = (domain.lower[k] - c).abs().max((domain.upper[k] - c).abs());
                    let g = 2.0 * a.abs() * reach;
                    g * g
                })
                .sum::<f64>()
                .sqrt(),
            ScalarFunction::PiecewiseLinear { breakpoints, values } => breakpoints
                .windows(2)
                .zip(values.windows(2))
                .map(|(b, v)| ((v[1] - v[0]) / (b[1] - b[0])).abs())
                .fold(0.0, f64::max),
            ScalarFunction::Polynomial { coefficients } => {
                let r = domain.lower[0].abs().max(domain.upper[0].abs());
                coefficients
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c.abs() * r.powi(k as i32 - 1))
                    .sum()
            }
            ScalarFunction::Affine { weights, .. } => crate::linalg::norm(weights),
        }
    }

    /// Exact `sup |f|` over `domain` where the kind allows a closed form.
    pub fn abs_max_on(&self, domain: &BoxSet) -> Option<f64> {
        match self {
            ScalarFunction::Quadratic {
                curvature,
                center,
                offset,
            } => {
                let (mut lo, mut hi) = (*offset, *offset);
                for (k, (a, c)) in curvature.iter().zip(center).enumerate() {
                    let (l, u) = (domain.lower[k], domain.upper[k]);
                    let far = (l - c).powi(2).max((u - c).powi(2));
                    let near = if (l..=u).contains(c) {
                        0.0
                    } else {
                        (l - c).powi(2).min((u - c).powi(2))
                    };
                    let (t_lo, t_hi) = if *a >= 0.0 {
                        (a * near, a * far)
                    } else {
                        (a * far, a * near)
                    };
                    lo += t_lo;
                    hi += t_hi;
                }
                Some(lo.abs().max(hi.abs()))
            }
            ScalarFunction::PiecewiseLinear { breakpoints, .. } => {
                let (l, u) = (domain.lower[0], domain.upper[0]);
                let mut m = self.eval(&[l]).abs().max(self.eval(&[u]).abs());
                for &b in breakpoints.iter().filter(|b| (l..=u).contains(*b)) {
                    m = m.max(self.eval(&[b]).abs());
                }
                Some(m)
            }
            ScalarFunction::Polynomial { .. } => None,
            ScalarFunction::Affine { weights, offset } => {
                let (mut lo, mut hi) = (*offset, *offset);
                for (k, w) in weights.iter().enumerate() {
                    let (a, b) = (w * domain.lower[k], w * domain.upper[k]);
                    lo += a.min(b);
                    hi += a.max(b);
                }
                Some(lo.abs().max(hi.abs()))
            }
        }
    }

    /// Coefficients `(A, B)` of `A·x² + B·x + const` describing the function
    /// on an interval containing `at` (one-dimensional only). `None` when the
    /// function is not piecewise quadratic there.
    pub(crate) fn local_quadratic_1d(&self, at: f64) -> Option<(f64, f64)> {
        match self {
            ScalarFunction::Quadratic { curvature, center, .. } => {
                let (a, c) = (curvature[0], center[0]);
                Some((a, -2.0 * a * c))
            }
            ScalarFunction::PiecewiseLinear { breakpoints, values } => {
                let slope = match breakpoints.iter().position(|&b| at < b) {
                    Some(0) | None => 0.0,
                    Some(j) => (values[j] - values[j - 1]) / (breakpoints[j] - breakpoints[j - 1]),
                };
                Some((0.0, slope))
            }
            ScalarFunction::Polynomial { coefficients } => {
                if coefficients.iter().skip(3).any(|c| *c != 0.0) {
                    return None;
                }
                let c = |k: usize| coefficients.get(k).copied().unwrap_or(0.0);
                Some((c(2), c(1)))
            }
            ScalarFunction::Affine { weights, .. } => Some((0.0, weights[0])),
        }
    }

    /// Per-coordinate `(A_k, B_k)` for separable quadratic/affine kinds.
    pub(crate) fn separable_quadratic(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ScalarFunction::Quadratic { curvature, center, .. } => {
                Some(curvature.iter().zip(center).map(|(a, c)| (*a, -2.0 * a * c)).collect())
            }
            ScalarFunction::Affine { weights, .. } => Some(weights.iter().map(|w| (0.0, *w)).collect()),
            _ => None,
        }
    }

    /// Kinks strictly inside `(lo, hi)`.
    pub(crate) fn breakpoints_within(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            ScalarFunction::PiecewiseLinear { breakpoints, .. } => {
                breakpoints.iter().copied().filter(|b| *b > lo && *b < hi).collect()
            }
            _ => Vec::new(),
        }
    }
}

fn pwl_eval(breakpoints: &[f64], values: &[f64], z: f64) -> f64 {
    let last = breakpoints.len() - 1;
    if z <= breakpoints[0] {
        return values[0];
    }
    if z >= breakpoints[last] {
        return values[last];
    }
    // first breakpoint strictly greater than z; exists because z < last
    let j = breakpoints.partition_point(|&b| b <= z);
    let (b0, b1) = (breakpoints[j - 1], breakpoints[j]);
    let t = (z - b0) / (b1 - b0);
    values[j - 1] + t * (values[j] - values[j - 1])
}
