//! Cross-validated accuracy of all five classifiers before and after
//! appending irrelevant features.
//!
//! cargo run --release --example classify_noise -- [noise] [seeds]

use scf::classify::{crossval_accuracy, Variant};
use scf::data::{add_noise_features, synth_weak_features, MixedTable, WeakFeatureSpec};
use scf::scoring::ScoreConfig;

fn main() -> scf::Result<()> {
    let mut args = std::env::args().skip(1);
    let noise: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seeds: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let spec = WeakFeatureSpec {
        n_relevant: 4,
        n_noise: 0,
        agreement: 0.6,
        n_rows: 150,
        n_classes: 4,
    };
    let config = ScoreConfig::classification(0.0);

    println!("{:<6} {:>8} {:>8} {:>8}", "", "clean", "noisy", "drop");
    for variant in Variant::ALL {
        let (mut clean, mut noisy) = (0.0, 0.0);
        for seed in 0..seeds {
            let (data, class) = synth_weak_features(&spec, seed)?;
            let with_noise = add_noise_features(&data, noise, seed + 7777);
            clean += crossval_accuracy(&MixedTable::from(&data), class, variant, 10, seed, &config)?.mean;
            noisy += crossval_accuracy(&MixedTable::from(&with_noise), class, variant, 10, seed, &config)?.mean;
        }
        let (clean, noisy) = (clean / seeds as f64, noisy / seeds as f64);
        println!("{:<6} {:>8.4} {:>8.4} {:>8.4}", variant.to_string(), clean, noisy, clean - noisy);
    }
    Ok(())
}
