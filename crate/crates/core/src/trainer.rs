//! Analytic gradients of the loss through the network, and the full-batch
//! gradient-descent loop.
//!
//! The percentile subset and the anchor argmax are fixed at the current
//! parameters for each gradient evaluation, so the gradient is exact away
//! from membership ties and a subgradient at them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{
    DataError, Dataset, Direction, EpochRecord, LossConfig, TrainConfig, TrainReport,
};
use crate::extract::{extract_constraint, violation_rate};
use crate::loss::{loss_total, LossBreakdown, LossError};
use crate::network::{EqlNetwork, NetworkError};
use crate::par::Backend;

/// Learning rate for plain full-batch gradient descent at the reference
/// datasets' scale (coordinates in the tens), picked by the sweep in
/// `examples/lr_grid.rs` on the high-granularity square. The 1e-8 shipped in
/// [`TrainConfig::default`] barely moves the weights in 400 epochs of plain
/// gradient descent.
pub const TUNED_LEARNING_RATE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] DataError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("dataset has {data} features, network has {net}")]
    Shape { data: usize, net: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}: non-finite value in {what}")]
    Diverged { epoch: usize, what: &'static str },
}

/// Partial derivatives of the loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub d_w_in: Vec<Vec<f64>>,
    pub d_w_out: Vec<f64>,
    pub d_b_out: f64,
}

impl Gradients {
    fn zeros(h: usize, f: usize) -> Self {
        Gradients {
            d_w_in: vec![vec![0.0; f]; h],
            d_w_out: vec![0.0; h],
            d_b_out: 0.0,
        }
    }

    fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self
            .d_w_in
            .iter_mut()
            .flatten()
            .zip(other.d_w_in.iter().flatten())
        {
            *a += b;
        }
        for (a, b) in self.d_w_out.iter_mut().zip(&other.d_w_out) {
            *a += b;
        }
        self.d_b_out += other.d_b_out;
    }

    fn is_finite(&self) -> bool {
        self.d_b_out.is_finite()
            && self.d_w_out.iter().all(|v| v.is_finite())
            && self.d_w_in.iter().flatten().all(|v| v.is_finite())
    }
}

/// Derivative of `z` with respect to each prediction.
fn prediction_sensitivities(
    y: &[f64],
    preds: &[f64],
    b: &LossBreakdown,
    cfg: &LossConfig,
) -> Vec<f64> {
    let n = y.len() as f64;
    // de/dpred
    let s = match cfg.direction {
        Direction::LowerBound => -1.0,
        Direction::UpperBound => 1.0,
    };
    let mut g = vec![cfg.alpha1 * s / n; y.len()];
    for &i in &b.p_gamma_indices {
        g[i] += 2.0 * cfg.alpha2 / n * (preds[i] - y[i]);
    }
    let m = b.anchor_index;
    let e_max = s * (preds[m] - y[m]);
    g[m] += cfg.alpha3 * signum0(e_max) * s;
    g
}

fn signum0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Loss breakdown and exact gradient at the current parameters.
pub fn gradients(
    net: &EqlNetwork,
    data: &Dataset,
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Gradients), TrainError> {
    gradients_with(net, data, cfg, Backend::default())
}

pub fn gradients_with(
    net: &EqlNetwork,
    data: &Dataset,
    cfg: &LossConfig,
    backend: Backend,
) -> Result<(LossBreakdown, Gradients), TrainError> {
    if data.n_features() != net.n_features() {
        return Err(TrainError::Shape {
            data: data.n_features(),
            net: net.n_features(),
        });
    }
    let y = data.targets();
    let preds = net.forward_dataset_with(data, backend)?;
    let breakdown = loss_total(y, &preds, &net.w_out, cfg)?;
    for (name, v) in [
        ("term_e", breakdown.term_e),
        ("term_p", breakdown.term_p),
        ("term_anchor", breakdown.term_anchor),
        ("term_reg", breakdown.term_reg),
    ] {
        if !v.is_finite() {
            return Err(TrainError::NonFinite(name));
        }
    }
    let sens = prediction_sensitivities(y, &preds, &breakdown, cfg);

    let h = net.n_hidden();
    let f = net.n_features();
    let partials = backend.map_chunks(data.len(), |range| {
        let mut acc = Gradients::zeros(h, f);
        for i in range {
            let x = data.row(i);
            let gi = sens[i];
            if gi == 0.0 {
                continue;
            }
            acc.d_b_out += gi;
            let u = net.hidden_inputs(x);
            #[allow(clippy::needless_range_loop)]
            for k in 0..h {
                let prim = net.primitives[k];
                acc.d_w_out[k] += gi * prim.apply(u[k])?;
                let back = gi * net.w_out[k] * prim.derivative(u[k])?;
                if back != 0.0 {
                    for (d, xv) in acc.d_w_in[k].iter_mut().zip(x) {
                        *d += back * xv;
                    }
                }
            }
        }
        Ok::<_, NetworkError>(acc)
    });
    let mut grads = Gradients::zeros(h, f);
    for part in partials {
        grads.add_assign(&part?);
    }

    for (d, w) in grads.d_w_out.iter_mut().zip(&net.w_out) {
        *d += cfg.l1 * signum0(*w) + 2.0 * cfg.l2 * w;
    }
    for (drow, mrow) in grads.d_w_in.iter_mut().zip(&net.mask_in) {
        for (d, m) in drow.iter_mut().zip(mrow) {
            if *m {
                *d = 0.0;
            }
        }
    }
    for (d, m) in grads.d_w_out.iter_mut().zip(&net.mask_out) {
        if *m {
            *d = 0.0;
        }
    }
    if !grads.is_finite() {
        return Err(TrainError::NonFinite("gradient"));
    }
    Ok((breakdown, grads))
}

/// One plain gradient-descent update.
pub fn step(net: &mut EqlNetwork, grads: &Gradients, learning_rate: f64) {
    for (row, drow) in net.w_in.iter_mut().zip(&grads.d_w_in) {
        for (w, d) in row.iter_mut().zip(drow) {
            *w -= learning_rate * d;
        }
    }
    for (w, d) in net.w_out.iter_mut().zip(&grads.d_w_out) {
        *w -= learning_rate * d;
    }
    net.b_out -= learning_rate * grads.d_b_out;
}

/// Trains from the seeded initialization for `train_cfg.epochs` epochs.
pub fn train(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
) -> Result<(EqlNetwork, TrainReport), TrainError> {
    train_with(data, loss_cfg, train_cfg, Backend::default())
}

pub fn train_with(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    backend: Backend,
) -> Result<(EqlNetwork, TrainReport), TrainError> {
    let net = EqlNetwork::initialize(&train_cfg.primitives, data, train_cfg.seed)?;
    train_from(net, data, loss_cfg, train_cfg, backend)
}

/// Runs the training loop starting from `net` instead of a fresh
/// initialization. `train_cfg.seed` is only recorded in the report.
pub fn train_from(
    mut net: EqlNetwork,
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    backend: Backend,
) -> Result<(EqlNetwork, TrainReport), TrainError> {
    loss_cfg.validate()?;
    train_cfg.validate()?;
    if data.is_empty() {
        return Err(DataError::EmptyDataset.into());
    }
    net.validate()?;

    let mut history = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        let (b, grads) = gradients_with(&net, data, loss_cfg, backend).map_err(|e| match e {
            TrainError::NonFinite(what) => TrainError::Diverged { epoch, what },
            other => other,
        })?;
        if !b.z.is_finite() {
            return Err(TrainError::Diverged { epoch, what: "z" });
        }
        history.push(EpochRecord {
            epoch,
            z: b.z,
            term_e: b.term_e,
            term_p: b.term_p,
            term_anchor: b.term_anchor,
            term_reg: b.term_reg,
        });
        step(&mut net, &grads, train_cfg.learning_rate);
        if let Some(t) = train_cfg.mask_threshold {
            net.apply_mask(t);
        }
        if net.validate().is_err() {
            return Err(TrainError::Diverged {
                epoch,
                what: "parameters",
            });
        }
    }

    let constraint = extract_constraint(&net, loss_cfg.direction).ok();
    let violation_rate = constraint.as_ref().map(|c| {
        violation_rate(c, data)
            .expect("non-empty, shapes agree")
            .rate_percent
    });
    let report = TrainReport {
        seed: train_cfg.seed,
        history,
        constraint,
        violation_rate,
    };
    Ok((net, report))
}

/// Outcome of every run, in seed order, without aborting on failures.
pub fn train_runs(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
) -> Vec<Result<(EqlNetwork, TrainReport), TrainError>> {
    train_runs_with(data, loss_cfg, train_cfg, Backend::default())
}

pub fn train_runs_with(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    backend: Backend,
) -> Vec<Result<(EqlNetwork, TrainReport), TrainError>> {
    // Each run is sequential inside; parallelism is across runs.
    backend.map_range(train_cfg.runs, |r| {
        let cfg = TrainConfig {
            seed: train_cfg.seed.wrapping_add(r as u64),
            ..train_cfg.clone()
        };
        train_with(data, loss_cfg, &cfg, Backend::Sequential)
    })
}

/// `train_cfg.runs` independent runs seeded `seed, seed+1, ...`, sorted by
/// violation rate (runs without a constraint last, ties in seed order).
/// The first failing run, in seed order, aborts the whole batch.
pub fn train_multi(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<(EqlNetwork, TrainReport)>, TrainError> {
    train_multi_with(data, loss_cfg, train_cfg, Backend::default())
}

pub fn train_multi_with(
    data: &Dataset,
    loss_cfg: &LossConfig,
    train_cfg: &TrainConfig,
    backend: Backend,
) -> Result<Vec<(EqlNetwork, TrainReport)>, TrainError> {
    train_cfg.validate()?;
    let mut runs = train_runs_with(data, loss_cfg, train_cfg, backend)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by(|(_, a), (_, b)| {
        let key = |r: &TrainReport| r.violation_rate.unwrap_or(f64::INFINITY);
        key(a).total_cmp(&key(b))
    });
    Ok(runs)
}
