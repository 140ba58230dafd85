//! Supervised entropy/MDL discretization of a continuous column, then a
//! classifier on the discretized table.
//!
//! cargo run --example discretize

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scf::classify::{crossval_accuracy, Variant};
use scf::data::{discretize_entropy_mdl, RawTable};
use scf::scoring::ScoreConfig;

fn main() -> scf::Result<()> {
    // Two classes whose first feature is shifted and whose second is noise.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let shifted = [Normal::new(0.0, 1.0).unwrap(), Normal::new(2.0, 1.0).unwrap()];
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut text = String::from("x,z,class\n");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for _ in 0..300 {
        let y: usize = rng.random_range(0..2);
        let x = shifted[y].sample(&mut rng);
        text.push_str(&format!("{x:.4},{:.4},{}\n", noise.sample(&mut rng), ["a", "b"][y]));
        xs.push(x);
        ys.push(y);
    }

    println!("cuts on x: {:?}", discretize_entropy_mdl(&xs, &ys));
    let table = RawTable::from_reader(text.as_bytes())?.into_table(&Default::default())?;
    let class = table.id_of("class").expect("class column");
    let all: Vec<usize> = (0..table.n_rows()).collect();
    let data = table.discretize(class, &all)?.apply(&table, &all)?;
    for v in data.variables() {
        println!("{}: {:?}", v.name, v.categories);
    }

    let report = crossval_accuracy(&table, class, Variant::Sfan, 10, 0, &ScoreConfig::classification(2.0))?;
    println!("10-fold sfan accuracy {:.4} (sd {:.4})", report.mean, report.sd);
    Ok(())
}
