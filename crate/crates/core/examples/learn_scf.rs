//! Exact MAP structure over a condition set and a target set: each target
//! takes at most one target parent and up to k condition parents.
//!
//! cargo run --example learn_scf -- [k] [seed]

use scf::data::{synth_dbn_sequences, to_transitions, GroundTruthDbn};
use scf::scf::{join_slices, learn_cmap_scf, ScfConstraints};
use scf::scoring::{ScoreConfig, Scorer};

fn main() -> scf::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(3);

    // Previous-slice columns form the condition set, next-slice columns the
    // targets.
    let truth = GroundTruthDbn::random_scf(6, 3, 1, 0.8, 5.0, seed)?;
    let (prev, next) = to_transitions(&synth_dbn_sequences(&truth, 801, seed + 1)?)?;
    let joined = join_slices(&prev, &next)?;
    let m = prev.n_vars();
    let cond: Vec<usize> = (0..m).collect();
    let targets: Vec<usize> = (m..2 * m).collect();

    let config = ScoreConfig::dbn(k);
    let scorer = Scorer::new(&joined, config.ess);
    let s = learn_cmap_scf(&scorer, &targets, &cond, &config, ScfConstraints::forest())?;

    println!("generating model");
    for (v, node) in truth.transition.iter().enumerate() {
        println!("  x{v} <- intra {:?} inter {:?}", node.intra_parent, node.inter_parents);
    }
    println!("learned, score {:.3}", s.score);
    for (&c, ps) in s.targets.iter().zip(&s.parents) {
        let name = |id: usize| joined.variable(id).name.clone();
        let parents: Vec<String> = ps.ids().into_iter().map(name).collect();
        println!("  {} <- {}", name(c), parents.join(", "));
    }
    Ok(())
}
