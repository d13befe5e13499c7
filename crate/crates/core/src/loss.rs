//! The directional constraint-learning loss.
//!
//! ```text
//! z = α1/N · Σ e_i  +  α2/N · Σ_{i∈P} (y_i − f(x_i))²  +  α3 · |max_i e_i|  +  reg
//! ```
//!
//! where `e_i = y_i − f(x_i)` for a lower bound (`A <= f(x)`) and
//! `f(x_i) − y_i` for an upper bound, `P` holds the γ percent of points with
//! the largest `e`, and `reg = l1·Σ|w_out| + l2·Σ w_out²`.
//!
//! Minimizing the mean directional error pushes the surface past the data;
//! the anchor term and the percentile term pull the points nearest the
//! boundary back towards zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{Direction, LossConfig, PercentileSide};

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("empty batch")]
    Empty,
    #[error("{targets} targets but {preds} predictions")]
    Length { targets: usize, preds: usize },
}

/// Value of each weighted term at one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub z: f64,
    pub term_e: f64,
    pub term_p: f64,
    pub term_anchor: f64,
    pub term_reg: f64,
    /// Members of the percentile subset, ascending.
    pub p_gamma_indices: Vec<usize>,
    /// Index of the largest directional error (lowest index on ties).
    pub anchor_index: usize,
}

pub fn directional_errors(y: &[f64], preds: &[f64], d: Direction) -> Vec<f64> {
    debug_assert_eq!(y.len(), preds.len());
    y.iter()
        .zip(preds)
        .map(|(t, p)| match d {
            Direction::LowerBound => t - p,
            Direction::UpperBound => p - t,
        })
        .collect()
}

/// `(α1/N)·Σ e_i`; zero for an empty slice.
pub fn term_e(e: &[f64], alpha1: f64) -> f64 {
    if e.is_empty() {
        return 0.0;
    }
    alpha1 * e.iter().sum::<f64>() / e.len() as f64
}

/// Size of the percentile subset: `max(1, ceil(γ·N/100))`, capped at N.
pub fn subset_size(n: usize, gamma: f64) -> usize {
    let k = (gamma * n as f64 / 100.0).ceil();
    (k.max(1.0) as usize).min(n)
}

/// Indices of the `k` largest errors (see [`subset_size`]), ties broken by
/// lower index. Returned in ascending index order.
pub fn p_gamma_subset(e: &[f64], gamma: f64) -> Vec<usize> {
    p_gamma_subset_side(e, gamma, PercentileSide::Largest)
}

pub fn p_gamma_subset_side(e: &[f64], gamma: f64, side: PercentileSide) -> Vec<usize> {
    if e.is_empty() {
        return Vec::new();
    }
    let k = subset_size(e.len(), gamma);
    let mut order: Vec<usize> = (0..e.len()).collect();
    let cmp = |a: &usize, b: &usize| {
        let by_value = match side {
            PercentileSide::Largest => e[*b].total_cmp(&e[*a]),
            PercentileSide::Smallest => e[*a].total_cmp(&e[*b]),
        };
        by_value.then(a.cmp(b))
    };
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable();
    order
}

/// `(α2/N)·Σ_{i∈indices} (y_i − preds_i)²`.
pub fn term_p(y: &[f64], preds: &[f64], indices: &[usize], alpha2: f64) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let sq: f64 = indices.iter().map(|&i| (y[i] - preds[i]).powi(2)).sum();
    alpha2 * sq / y.len() as f64
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(e: &[f64]) -> Option<usize> {
    e.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

/// `α3·|max_i e_i|`: the signed maximum, then its magnitude.
pub fn term_anchor(e: &[f64], alpha3: f64) -> f64 {
    match argmax(e) {
        Some(i) => alpha3 * e[i].abs(),
        None => 0.0,
    }
}

/// L1 and L2 penalties on the output-layer weights.
pub fn term_reg(w_out: &[f64], l1: f64, l2: f64) -> f64 {
    let abs: f64 = w_out.iter().map(|w| w.abs()).sum();
    let sq: f64 = w_out.iter().map(|w| w * w).sum();
    l1 * abs + l2 * sq
}

/// Evaluates every term of the loss for targets `y` and predictions `preds`,
/// with `w_out` the output-layer weights being regularized.
pub fn loss_total(
    y: &[f64],
    preds: &[f64],
    w_out: &[f64],
    cfg: &LossConfig,
) -> Result<LossBreakdown, LossError> {
    if y.len() != preds.len() {
        return Err(LossError::Length {
            targets: y.len(),
            preds: preds.len(),
        });
    }
    if y.is_empty() {
        return Err(LossError::Empty);
    }
    let e = directional_errors(y, preds, cfg.direction);
    let p_gamma_indices = p_gamma_subset_side(&e, cfg.gamma, cfg.percentile_side);
    let anchor_index = argmax(&e).expect("non-empty");

    let term_e = term_e(&e, cfg.alpha1);
    let term_p = term_p(y, preds, &p_gamma_indices, cfg.alpha2);
    let term_anchor = cfg.alpha3 * e[anchor_index].abs();
    let term_reg = term_reg(w_out, cfg.l1, cfg.l2);
    Ok(LossBreakdown {
        z: term_e + term_p + term_anchor + term_reg,
        term_e,
        term_p,
        term_anchor,
        term_reg,
        p_gamma_indices,
        anchor_index,
    })
}
