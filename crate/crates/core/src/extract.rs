//! Reading a trained network back as a linear inequality, and scoring
//! inequalities against data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{Dataset, Direction, LinearConstraint, COEFF_EPS};
use crate::network::{EqlNetwork, NetworkError, Primitive};
use crate::par::Backend;

#[derive(Debug, Error, PartialEq)]
pub enum ExtractError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("all coefficients are below {COEFF_EPS:e}")]
    DegenerateConstraint,
    #[error("constraint has {constraint} coefficients, data has {data} features")]
    Shape { constraint: usize, data: usize },
    #[error("violation rate of an empty dataset is undefined")]
    EmptyDataset,
    #[error("prune threshold must lie in [0, 1), got {0}")]
    Threshold(f64),
    #[error("non-finite coefficient")]
    NonFinite,
}

/// Collapses the network to `(a, c)` with `forward(x) = a·x + c`.
pub fn affine_form(net: &EqlNetwork) -> Result<(Vec<f64>, f64), ExtractError> {
    let mut a = vec![0.0; net.n_features()];
    let mut c = net.b_out;
    for ((row, prim), wo) in net.w_in.iter().zip(&net.primitives).zip(&net.w_out) {
        match prim {
            Primitive::Identity => {
                for (ai, w) in a.iter_mut().zip(row) {
                    *ai += wo * w;
                }
            }
            Primitive::Constant => c += wo,
            other => return Err(NetworkError::Unsupported(*other).into()),
        }
    }
    Ok((a, c))
}

/// Brings `coeffs·x (relation) bound` into canonical form: everything is
/// divided by the highest-indexed coefficient with magnitude at least
/// [`COEFF_EPS`], and the relation flips when that divisor is negative.
/// Coefficients after the divisor are below the threshold and become 0.
pub fn canonicalize(
    mut coeffs: Vec<f64>,
    bound: f64,
    relation: Direction,
) -> Result<LinearConstraint, ExtractError> {
    if !bound.is_finite() || coeffs.iter().any(|v| !v.is_finite()) {
        return Err(ExtractError::NonFinite);
    }
    let pivot = coeffs
        .iter()
        .rposition(|v| v.abs() >= COEFF_EPS)
        .ok_or(ExtractError::DegenerateConstraint)?;
    let d = coeffs[pivot];
    for v in &mut coeffs[..pivot] {
        *v /= d;
    }
    coeffs[pivot] = 1.0;
    for v in &mut coeffs[pivot + 1..] {
        *v = 0.0;
    }
    let relation = if d < 0.0 {
        relation.flipped()
    } else {
        relation
    };
    let bound = bound / d;
    if coeffs.iter().any(|v| !v.is_finite()) || !bound.is_finite() {
        return Err(ExtractError::NonFinite);
    }
    Ok(LinearConstraint::new(coeffs, bound, relation).expect("canonical by construction"))
}

/// The inequality `0 <= f(x)` (lower) or `f(x) <= 0` (upper) carried by the
/// trained network, in canonical form. The reported relation may differ from
/// `direction` when normalization divides by a negative coefficient.
pub fn extract_constraint(
    net: &EqlNetwork,
    direction: Direction,
) -> Result<LinearConstraint, ExtractError> {
    let (a, c) = affine_form(net)?;
    canonicalize(a, -c, direction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub constraint: LinearConstraint,
    pub n: usize,
    pub violations: usize,
    pub rate_percent: f64,
}

/// Percentage of points in `data` that do not satisfy `c`.
pub fn violation_rate(
    c: &LinearConstraint,
    data: &Dataset,
) -> Result<ViolationReport, ExtractError> {
    violation_rate_with(c, data, Backend::default())
}

pub fn violation_rate_with(
    c: &LinearConstraint,
    data: &Dataset,
    backend: Backend,
) -> Result<ViolationReport, ExtractError> {
    if c.n_features() != data.n_features() {
        return Err(ExtractError::Shape {
            constraint: c.n_features(),
            data: data.n_features(),
        });
    }
    if data.is_empty() {
        return Err(ExtractError::EmptyDataset);
    }
    let violations = backend.count(data.len(), |i| !c.is_satisfied(data.row(i)));
    Ok(ViolationReport {
        constraint: c.clone(),
        n: data.len(),
        violations,
        rate_percent: 100.0 * violations as f64 / data.len() as f64,
    })
}

/// Drops coefficients smaller than `rel_threshold` times the largest one and
/// re-normalizes.
pub fn prune(c: &LinearConstraint, rel_threshold: f64) -> Result<LinearConstraint, ExtractError> {
    if !(0.0..1.0).contains(&rel_threshold) {
        return Err(ExtractError::Threshold(rel_threshold));
    }
    let max = c.coeffs().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = rel_threshold * max;
    let coeffs = c
        .coeffs()
        .iter()
        .map(|&v| if v.abs() < cut { 0.0 } else { v })
        .collect();
    canonicalize(coeffs, c.bound(), c.relation())
}
