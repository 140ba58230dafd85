//! SFAN test accuracy against the exclusion penalty on fresh weak-feature
//! train/test pairs.
//!
//! cargo run --release --example penalty_sweep -- [repeats] [ess]

use scf::classify::{penalty_sweep, SweepProtocol};
use scf::scoring::ScoreConfig;

fn main() -> scf::Result<()> {
    let mut args = std::env::args().skip(1);
    let repeats: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(100);
    let ess: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(10.0);
    let protocol = SweepProtocol {
        repeats,
        ..SweepProtocol::default()
    };
    let grid: Vec<f64> = (0..=12).map(|i| i as f64 * 0.5).collect();
    let config = ScoreConfig::new(ess, 0.0, 1)?;

    println!("{:>6} {:>8} {:>8}", "alpha", "mean", "se");
    for p in penalty_sweep(&protocol, &grid, &config)? {
        println!("{:>6.1} {:>8.4} {:>8.4}", p.alpha, p.mean, p.se);
    }
    Ok(())
}
