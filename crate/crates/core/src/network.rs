//! Equation-Learner network: input layer, one symbolic layer of primitive
//! activations (no bias), and a linear output unit with bias.
//!
//! ```text
//! f(x) = b_out + Σ_h w_out[h] · g_h( Σ_f w_in[h][f] · x[f] )
//! ```
//!
//! Xavier bounds for the symbolic layer use `fan_in = F` and `fan_out = H`;
//! the output layer uses `fan_in = H` and `fan_out = 1`.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::Dataset;
use crate::par::Backend;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("primitive {0:?} is not implemented")]
    Unsupported(Primitive),
    #[error("input has {found} features, network expects {expected}")]
    Shape { expected: usize, found: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
}

/// Activation of one symbolic unit.
///
/// Only `Identity` and `Constant` are evaluated; the remaining variants name
/// the usual symbolic-regression catalog so configurations can refer to them,
/// and report [`NetworkError::Unsupported`] when used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Identity,
    /// Emits 1 regardless of input; the output weight carries the value.
    Constant,
    Sin,
    Exp,
    Sigmoid,
    Log,
    Reciprocal,
    Sqrt,
}

impl Primitive {
    pub fn is_implemented(self) -> bool {
        matches!(self, Primitive::Identity | Primitive::Constant)
    }

    pub fn apply(self, s: f64) -> Result<f64, NetworkError> {
        match self {
            Primitive::Identity => Ok(s),
            Primitive::Constant => Ok(1.0),
            other => Err(NetworkError::Unsupported(other)),
        }
    }

    pub fn derivative(self, _s: f64) -> Result<f64, NetworkError> {
        match self {
            Primitive::Identity => Ok(1.0),
            Primitive::Constant => Ok(0.0),
            other => Err(NetworkError::Unsupported(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqlNetwork {
    /// H rows of F input weights.
    pub w_in: Vec<Vec<f64>>,
    pub primitives: Vec<Primitive>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    /// `true` marks a weight frozen at zero.
    pub mask_in: Vec<Vec<bool>>,
    pub mask_out: Vec<bool>,
}

impl EqlNetwork {
    /// Network with all weights and the bias at zero and nothing masked.
    pub fn zeros(n_features: usize, primitives: Vec<Primitive>) -> Self {
        let h = primitives.len();
        EqlNetwork {
            w_in: vec![vec![0.0; n_features]; h],
            primitives,
            w_out: vec![0.0; h],
            b_out: 0.0,
            mask_in: vec![vec![false; n_features]; h],
            mask_out: vec![false; h],
        }
    }

    pub fn n_features(&self) -> usize {
        self.w_in.first().map_or(0, Vec::len)
    }

    pub fn n_hidden(&self) -> usize {
        self.primitives.len()
    }

    /// Checks shapes, finiteness and the mask invariant.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::Architecture(m.to_owned()));
        let h = self.primitives.len();
        let f = self.n_features();
        if h == 0 || f == 0 {
            return bad("need at least one hidden unit and one feature");
        }
        if self.w_in.len() != h
            || self.w_out.len() != h
            || self.mask_in.len() != h
            || self.mask_out.len() != h
            || self.w_in.iter().any(|r| r.len() != f)
            || self.mask_in.iter().any(|r| r.len() != f)
        {
            return bad("inconsistent layer shapes");
        }
        let finite = self.b_out.is_finite()
            && self.w_out.iter().all(|w| w.is_finite())
            && self.w_in.iter().flatten().all(|w| w.is_finite());
        if !finite {
            return bad("non-finite parameter");
        }
        let masked_nonzero = self
            .w_in
            .iter()
            .flatten()
            .zip(self.mask_in.iter().flatten())
            .chain(self.w_out.iter().zip(&self.mask_out))
            .any(|(w, m)| *m && *w != 0.0);
        if masked_nonzero {
            return bad("masked weight is not zero");
        }
        Ok(())
    }

    /// Pre-activation of each hidden unit.
    pub(crate) fn hidden_inputs(&self, x: &[f64]) -> Vec<f64> {
        self.w_in
            .iter()
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, NetworkError> {
        if x.len() != self.n_features() {
            return Err(NetworkError::Shape {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut out = self.b_out;
        for ((row, g), wo) in self.w_in.iter().zip(&self.primitives).zip(&self.w_out) {
            let s: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out += wo * g.apply(s)?;
        }
        Ok(out)
    }

    pub fn forward_batch<'a, I>(&self, points: I) -> Result<Vec<f64>, NetworkError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        points.into_iter().map(|x| self.forward(x)).collect()
    }

    /// Predictions for every row of `data`.
    pub fn forward_dataset(&self, data: &Dataset) -> Result<Vec<f64>, NetworkError> {
        self.forward_dataset_with(data, Backend::default())
    }

    pub fn forward_dataset_with(
        &self,
        data: &Dataset,
        backend: Backend,
    ) -> Result<Vec<f64>, NetworkError> {
        backend
            .map_range(data.len(), |i| self.forward(data.row(i)))
            .into_iter()
            .collect()
    }

    /// Xavier-uniform weights and a bias uniform on
    /// `[0.5·min, 0.5·max]` of the feature values in `data`. Deterministic in
    /// `seed`; weights are drawn row-major for `w_in`, then `w_out`, then the
    /// bias.
    pub fn initialize(
        primitives: &[Primitive],
        data: &Dataset,
        seed: u64,
    ) -> Result<Self, NetworkError> {
        let f = data.n_features();
        let h = primitives.len();
        if h == 0 {
            return Err(NetworkError::Architecture("no hidden units".into()));
        }
        if let Some(p) = primitives.iter().find(|p| !p.is_implemented()) {
            return Err(NetworkError::Unsupported(*p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = EqlNetwork::zeros(f, primitives.to_vec());

        let in_limit = xavier_limit(f, h);
        let in_dist = Uniform::new_inclusive(-in_limit, in_limit);
        for row in &mut net.w_in {
            for w in row.iter_mut() {
                *w = in_dist.sample(&mut rng);
            }
        }
        let out_limit = xavier_limit(h, 1);
        let out_dist = Uniform::new_inclusive(-out_limit, out_limit);
        for w in &mut net.w_out {
            *w = out_dist.sample(&mut rng);
        }

        let (lo, hi) = data.value_range().unwrap_or((0.0, 0.0));
        net.b_out = if lo < hi {
            Uniform::new_inclusive(0.5 * lo, 0.5 * hi).sample(&mut rng)
        } else {
            log::warn!(
                "degenerate data range [{lo}, {hi}]; output bias set to {}",
                0.5 * lo
            );
            0.5 * lo
        };
        Ok(net)
    }

    /// Zeroes and freezes every weight with `|w| < threshold`, and every
    /// weight that is exactly zero. The output bias is never masked. Masks
    /// only ever grow.
    pub fn apply_mask(&mut self, threshold: f64) {
        for (row, mrow) in self.w_in.iter_mut().zip(&mut self.mask_in) {
            for (w, m) in row.iter_mut().zip(mrow.iter_mut()) {
                freeze_if_small(w, m, threshold);
            }
        }
        for (w, m) in self.w_out.iter_mut().zip(&mut self.mask_out) {
            freeze_if_small(w, m, threshold);
        }
    }

    pub fn masked(mut self, threshold: f64) -> Self {
        self.apply_mask(threshold);
        self
    }

    pub fn masked_count(&self) -> usize {
        self.mask_in
            .iter()
            .flatten()
            .chain(&self.mask_out)
            .filter(|m| **m)
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn freeze_if_small(w: &mut f64, m: &mut bool, threshold: f64) {
    if *m || *w == 0.0 || w.abs() < threshold {
        *w = 0.0;
        *m = true;
    }
}

pub fn xavier_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
