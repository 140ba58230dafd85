//! Maximum directed spanning forest on a small random graph, checked
//! against exhaustive enumeration.
//!
//! cargo run --example mdsf -- [n] [seed]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scf::mdsf::{brute_force_msf, max_directed_spanning_forest, RootedDigraph};

fn main() -> scf::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..0.0)).collect();
    let edges: Vec<f64> = (0..n * n).map(|_| rng.random_range(-3.0..0.0)).collect();
    let g = RootedDigraph::from_fn(n, |v| roots[v], |p, c| if p == c { f64::NEG_INFINITY } else { edges[p * n + c] });

    let forest = max_directed_spanning_forest(&g)?;
    for (v, p) in forest.parents().iter().enumerate() {
        match p {
            Some(p) => println!("{v} <- {p}"),
            None => println!("{v} root"),
        }
    }
    println!("score {:.6} with {} roots", forest.score(), forest.n_roots());
    if n <= 7 {
        let best = brute_force_msf(&g)?;
        println!("enumeration {:.6}", best.score());
    }
    Ok(())
}
