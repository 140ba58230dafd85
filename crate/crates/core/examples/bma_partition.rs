//! Sum over all rooted forests by the matrix tree theorem, then Bayesian
//! averaged predictive probability over every selectively conditioned
//! forest.
//!
//! cargo run --example bma_partition

use scf::bma::{bma_log_predictive, forest_partition, LogWeightMatrix};
use scf::data::{synth_weak_features, WeakFeatureSpec};
use scf::scf::{learn_cmap_scf, ScfConstraints};
use scf::scoring::{ScoreConfig, Scorer};

fn main() -> scf::Result<()> {
    // All weights one: 3 forests on two vertices, 16 on three, (n+1)^(n-1)
    // in general.
    for n in 2..=5 {
        let w = LogWeightMatrix::from_fn(n, |_| 0.0, |i, j| if i == j { f64::NEG_INFINITY } else { 0.0 });
        let z = forest_partition(&w)?.log_partition.exp();
        println!("n={n}: {z:.1} forests (expected {})", (n + 1).pow(n as u32 - 1));
    }

    let spec = WeakFeatureSpec {
        n_relevant: 3,
        n_noise: 1,
        agreement: 0.75,
        n_rows: 60,
        n_classes: 2,
    };
    let (data, class) = synth_weak_features(&spec, 11)?;
    let train = data.select_rows(&(0..50).collect::<Vec<_>>());
    let query = data.select_rows(&(50..60).collect::<Vec<_>>());
    let targets: Vec<usize> = (0..data.n_vars()).filter(|&v| v != class).collect();
    let config = ScoreConfig::new(10.0, 0.0, 1)?;

    let scorer = Scorer::new(&train, config.ess);
    let bma = bma_log_predictive(&scorer, &targets, &[class], &query, &config)?;
    let map = learn_cmap_scf(&scorer, &targets, &[class], &config, ScfConstraints::forest())?;
    let map_pred: f64 = targets
        .iter()
        .zip(&map.parents)
        .map(|(&c, ps)| scorer.predictive(c, ps, &query))
        .sum::<scf::Result<f64>>()?;
    println!("log P(query | train): averaged {bma:.4}, MAP structure {map_pred:.4}");
    Ok(())
}
