//! Held-out log probability of every temporal model class on sequences from
//! a random generating model.
//!
//! cargo run --release --example dbn_compare -- [seed]

use scf::data::{synth_dbn_sequences, GroundTruthDbn};
use scf::dbn::compare_model_classes;
use scf::scoring::ScoreConfig;

fn main() -> scf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let truth = GroundTruthDbn::random_scf(8, 3, 1, 0.8, 5.0, seed)?;
    let train = synth_dbn_sequences(&truth, 501, 2 * seed + 1000)?;
    let test = synth_dbn_sequences(&truth, 1001, 2 * seed + 1001)?;

    let rows = compare_model_classes(&train, &test, &[1, 2], &ScoreConfig::dbn(1))?;
    println!("{:<12} {:>14} {:>8} {:>14}", "class", "avg logprob", "count", "train score");
    for r in rows {
        let train_score = r.train_score.map_or("-".to_string(), |s| format!("{s:.2}"));
        println!(
            "{:<12} {:>14.5} {:>8} {:>14}",
            r.class.to_string(),
            r.report.average,
            r.report.count,
            train_score
        );
    }
    Ok(())
}
