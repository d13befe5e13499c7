//! Seeded rejection samplers for feasible regions.
//!
//! A region is an axis-aligned box intersected with any number of linear
//! cuts and an optional ball. Points are drawn uniformly from the box and
//! kept when they satisfy every cut, which gives i.i.d. uniform samples on
//! the feasible region.

use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Dataset, Direction};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid region: {0}")]
    InvalidSpec(String),
    #[error("rejection budget exceeded after {rejections} consecutive rejections ({accepted} of {requested} points accepted)")]
    RejectionBudgetExceeded {
        rejections: u64,
        accepted: usize,
        requested: usize,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// `bound < coeffs·x` (lower) or `coeffs·x < bound` (upper); non-strict
/// when `strict` is false.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCut {
    pub coeffs: Vec<f64>,
    pub bound: f64,
    pub direction: Direction,
    #[serde(default)]
    pub strict: bool,
}

impl LinearCut {
    pub fn contains(&self, x: &[f64]) -> bool {
        let v: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match (self.direction, self.strict) {
            (Direction::LowerBound, true) => self.bound < v,
            (Direction::LowerBound, false) => self.bound <= v,
            (Direction::UpperBound, true) => v < self.bound,
            (Direction::UpperBound, false) => v <= self.bound,
        }
    }
}

/// Closed ball `|x − center|² <= radius²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn contains(&self, x: &[f64]) -> bool {
        let d2: f64 = self
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| (v - c).powi(2))
            .sum();
        d2 <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Per-feature `[lo, hi]`, inclusive.
    #[serde(rename = "box")]
    pub bounds: Vec<(f64, f64)>,
    #[serde(default)]
    pub linear_cuts: Vec<LinearCut>,
    #[serde(default)]
    pub quadratic_cap: Option<Ball>,
}

impl RegionSpec {
    pub fn n_features(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidSpec(m));
        let f = self.bounds.len();
        if f == 0 {
            return bad("no features".into());
        }
        for (i, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!(
                    "feature {i}: need finite lo < hi, got [{lo}, {hi}]"
                ));
            }
        }
        for (i, cut) in self.linear_cuts.iter().enumerate() {
            if cut.coeffs.len() != f || !cut.bound.is_finite() {
                return bad(format!("cut {i}: expected {f} finite coefficients"));
            }
        }
        if let Some(ball) = &self.quadratic_cap {
            if ball.center.len() != f || !ball.radius.is_finite() || ball.radius < 0.0 {
                return bad(format!(
                    "ball: expected {f}-dimensional center and finite radius >= 0"
                ));
            }
        }
        Ok(())
    }

    /// Whether `x` satisfies the box and every cut.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|((lo, hi), v)| lo <= v && v <= hi)
            && self.linear_cuts.iter().all(|c| c.contains(x))
            && self.quadratic_cap.as_ref().is_none_or(|b| b.contains(x))
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// `n` uniform samples from the feasible region of `spec`.
///
/// Fails once 10,000·n consecutive candidates have been rejected.
pub fn generate(spec: &RegionSpec, n: usize, seed: u64) -> Result<Dataset, GenError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes: Vec<Uniform<f64>> = spec
        .bounds
        .iter()
        .map(|&(lo, hi)| Uniform::new_inclusive(lo, hi))
        .collect();
    let budget = 10_000u64.saturating_mul(n as u64);
    let mut rows = Vec::with_capacity(n);
    let mut candidate = vec![0.0; spec.n_features()];
    let mut streak = 0u64;
    while rows.len() < n {
        for (v, axis) in candidate.iter_mut().zip(&axes) {
            *v = axis.sample(&mut rng);
        }
        if spec.contains(&candidate) {
            rows.push(candidate.clone());
            streak = 0;
        } else {
            streak += 1;
            if streak >= budget {
                return Err(GenError::RejectionBudgetExceeded {
                    rejections: streak,
                    accepted: rows.len(),
                    requested: n,
                });
            }
        }
    }
    Ok(Dataset::new(rows, spec.n_features())?)
}

/// The four reference datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    /// 600 points in `[-5, 25]²` with `4 < X0 + 2·X1`.
    SquareHigh,
    /// 250 points in the disc of radius √200.
    Circle,
    /// 100 points in the `SquareHigh` region.
    SquareLow,
    /// 2000 points in `[-5, 25]³` with `4 < X0 + 2·X1 − 3·X2`.
    Cube,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::SquareHigh,
        Preset::Circle,
        Preset::SquareLow,
        Preset::Cube,
    ];

    pub fn n_points(self) -> usize {
        match self {
            Preset::SquareHigh => 600,
            Preset::Circle => 250,
            Preset::SquareLow => 100,
            Preset::Cube => 2000,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::SquareHigh => "square-high",
            Preset::Circle => "circle",
            Preset::SquareLow => "square-low",
            Preset::Cube => "cube",
        }
    }

    pub fn spec(self) -> RegionSpec {
        let cut = |coeffs: Vec<f64>| LinearCut {
            coeffs,
            bound: 4.0,
            direction: Direction::LowerBound,
            strict: true,
        };
        match self {
            Preset::SquareHigh | Preset::SquareLow => RegionSpec {
                bounds: vec![(-5.0, 25.0); 2],
                linear_cuts: vec![cut(vec![1.0, 2.0])],
                quadratic_cap: None,
            },
            Preset::Circle => {
                let r = 200f64.sqrt();
                RegionSpec {
                    bounds: vec![(-r, r); 2],
                    linear_cuts: vec![],
                    quadratic_cap: Some(Ball {
                        center: vec![0.0, 0.0],
                        radius: r,
                    }),
                }
            }
            Preset::Cube => RegionSpec {
                bounds: vec![(-5.0, 25.0); 3],
                linear_cuts: vec![cut(vec![1.0, 2.0, -3.0])],
                quadratic_cap: None,
            },
        }
    }
}

impl FromStr for Preset {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| GenError::InvalidSpec(format!("unknown preset {s:?}")))
    }
}

pub fn paper_dataset(which: Preset, seed: u64) -> Dataset {
    generate(&which.spec(), which.n_points(), seed).expect("preset regions are feasible")
}
