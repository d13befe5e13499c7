//! Learning-rate sweep on the high-granularity square.
//!
//! For each candidate rate, trains 10 seeded runs on 16 independently sampled
//! datasets and reports how many runs end at or below 5% violations. Runs that
//! diverge count as failures.
//!
//! ```text
//! cargo run --release --example lr_grid [preset]
//! ```

use eqlcon::{paper_dataset, train_runs, LossConfig, Preset, TrainConfig};

fn main() {
    let preset: Preset = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("preset name"))
        .unwrap_or(Preset::SquareHigh);
    let gamma = if preset == Preset::SquareLow {
        2.5
    } else {
        5.0
    };
    println!(
        "{:>8}  {:>8}  {:>4}  {:>8}",
        "lr", "mean_ok", "min", "diverged"
    );
    for lr in [1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1] {
        let mut oks = Vec::new();
        let mut diverged = 0;
        for dataset_seed in 0..16u64 {
            let data = paper_dataset(preset, dataset_seed);
            let loss = LossConfig {
                gamma,
                ..LossConfig::default()
            };
            let train = TrainConfig {
                learning_rate: lr,
                seed: 0,
                runs: 10,
                ..TrainConfig::default()
            };
            let results = train_runs(&data, &loss, &train);
            diverged += results.iter().filter(|r| r.is_err()).count();
            oks.push(
                results
                    .iter()
                    .filter(|r| matches!(r, Ok((_, rep)) if rep.violation_rate.is_some_and(|v| v <= 5.0)))
                    .count(),
            );
        }
        let mean = oks.iter().sum::<usize>() as f64 / oks.len() as f64;
        println!(
            "{lr:>8.0e}  {mean:>8.2}  {:>4}  {diverged:>8}",
            oks.iter().min().unwrap()
        );
    }
}
