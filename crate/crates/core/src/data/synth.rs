use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{CategoricalDataset, SequenceDataset, Variable};
use crate::error::{Error, Result};

/// Parameters of the weak-feature classification generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakFeatureSpec {
    pub n_relevant: usize,
    pub n_noise: usize,
    /// Probability that a relevant feature equals the class.
    pub agreement: f64,
    pub n_rows: usize,
    /// Class cardinality, shared by the relevant features.
    pub n_classes: usize,
}

impl Default for WeakFeatureSpec {
    fn default() -> Self {
        WeakFeatureSpec {
            n_relevant: 10,
            n_noise: 20,
            agreement: 0.6,
            n_rows: 100,
            n_classes: 2,
        }
    }
}

/// Uniform class (column 0) followed by `n_relevant` features `f*` that copy
/// the class with probability `agreement` and otherwise take one of the other
/// class values uniformly, then `n_noise` independent uniform binary features
/// `noise_*`. Returns the dataset and the class column id.
pub fn synth_weak_features(spec: &WeakFeatureSpec, seed: u64) -> Result<(CategoricalDataset, usize)> {
    if !(0.0..=1.0).contains(&spec.agreement) {
        return Err(Error::InvalidParameter(format!(
            "agreement probability {} outside [0, 1]",
            spec.agreement
        )));
    }
    let c = spec.n_classes;
    if c < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 classes, got {c}")));
    }
    let mut variables = vec![Variable::new("class", c)];
    variables.extend((0..spec.n_relevant).map(|i| Variable::new(format!("f{i}"), c)));
    variables.extend((0..spec.n_noise).map(|i| Variable::new(format!("noise_{i}"), 2)));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..spec.n_rows)
        .map(|_| {
            let class = rng.random_range(0..c);
            let mut row = Vec::with_capacity(variables.len());
            row.push(class);
            for _ in 0..spec.n_relevant {
                row.push(if rng.random_bool(spec.agreement) {
                    class
                } else {
                    (class + rng.random_range(1..c)) % c
                });
            }
            for _ in 0..spec.n_noise {
                row.push(rng.random_range(0..2usize));
            }
            row
        })
        .collect();
    Ok((CategoricalDataset::new(variables, rows)?, 0))
}

/// Appends `count` uniform binary columns named `noise_<i>`, skipping names
/// already in use.
pub fn add_noise_features(data: &CategoricalDataset, count: usize, seed: u64) -> CategoricalDataset {
    if count == 0 {
        return data.clone();
    }
    let mut variables = data.variables().to_vec();
    let mut next = 0;
    for _ in 0..count {
        while data.id_of(&format!("noise_{next}")).is_some() {
            next += 1;
        }
        variables.push(Variable::new(format!("noise_{next}"), 2));
        next += 1;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = data
        .rows()
        .iter()
        .map(|r| {
            let mut row = r.clone();
            row.extend((0..count).map(|_| rng.random_range(0..2usize)));
            row
        })
        .collect();
    CategoricalDataset::from_parts_unchecked(variables, rows)
}

/// One variable's conditional distribution in a generating model.
///
/// `cpt` rows are indexed by the mixed-radix parent configuration over
/// `inter_parents` (previous slice, listed order, most significant first)
/// followed by `intra_parent` (same slice).
#[derive(Debug, Clone, PartialEq)]
pub struct CptNode {
    pub intra_parent: Option<usize>,
    pub inter_parents: Vec<usize>,
    pub cpt: Vec<Vec<f64>>,
}

/// Generating two-slice model: an initial slice and a repeated transition.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthDbn {
    pub variables: Vec<Variable>,
    pub initial: Vec<CptNode>,
    pub transition: Vec<CptNode>,
}

impl GroundTruthDbn {
    /// Random transition model from the SCF class: a random intra-slice
    /// forest (each non-first node in a random order attaches to an earlier
    /// one with probability `edge_prob`), exactly `k` distinct inter parents
    /// per node, and CPT rows drawn from a symmetric Dirichlet with the given
    /// concentration. The initial slice shares the intra forest.
    pub fn random_scf(
        n_vars: usize,
        cardinality: usize,
        k: usize,
        edge_prob: f64,
        concentration: f64,
        seed: u64,
    ) -> Result<Self> {
        if k > n_vars {
            return Err(Error::InvalidParameter(format!(
                "k = {k} exceeds the {n_vars} previous-slice variables"
            )));
        }
        if cardinality == 0 || concentration <= 0.0 {
            return Err(Error::InvalidParameter(
                "cardinality and concentration must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let variables: Vec<Variable> = (0..n_vars)
            .map(|i| Variable::new(format!("x{i}"), cardinality))
            .collect();

        let mut order: Vec<usize> = (0..n_vars).collect();
        order.shuffle(&mut rng);
        let mut intra = vec![None; n_vars];
        for p in 1..n_vars {
            if rng.random_bool(edge_prob) {
                intra[order[p]] = Some(order[rng.random_range(0..p)]);
            }
        }
        let gamma = Gamma::new(concentration, 1.0)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let dirichlet_rows = |rows: usize, rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..rows)
                .map(|_| {
                    let mut row: Vec<f64> =
                        (0..cardinality).map(|_| gamma.sample(rng).max(1e-300)).collect();
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|x| *x /= s);
                    row
                })
                .collect()
        };

        let mut initial = Vec::with_capacity(n_vars);
        let mut transition = Vec::with_capacity(n_vars);
        for &parent in &intra {
            let q0 = if parent.is_some() { cardinality } else { 1 };
            initial.push(CptNode {
                intra_parent: parent,
                inter_parents: Vec::new(),
                cpt: dirichlet_rows(q0, &mut rng),
            });
            let mut pool: Vec<usize> = (0..n_vars).collect();
            pool.shuffle(&mut rng);
            let mut inter: Vec<usize> = pool[..k].to_vec();
            inter.sort();
            let q = q0 * cardinality.pow(k as u32);
            transition.push(CptNode {
                intra_parent: parent,
                inter_parents: inter,
                cpt: dirichlet_rows(q, &mut rng),
            });
        }
        let model = GroundTruthDbn {
            variables,
            initial,
            transition,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.variables.len();
        for (slice, nodes) in [("initial", &self.initial), ("transition", &self.transition)] {
            if nodes.len() != m {
                return Err(Error::InvalidModel(format!(
                    "{slice} slice has {} nodes for {m} variables",
                    nodes.len()
                )));
            }
            for (i, node) in nodes.iter().enumerate() {
                if slice == "initial" && !node.inter_parents.is_empty() {
                    return Err(Error::InvalidModel(
                        "initial slice cannot have previous-slice parents".into(),
                    ));
                }
                let mut q = 1;
                for &p in &node.inter_parents {
                    if p >= m {
                        return Err(Error::InvalidModel(format!("parent {p} out of range")));
                    }
                    q *= self.variables[p].cardinality;
                }
                if let Some(p) = node.intra_parent {
                    if p >= m || p == i {
                        return Err(Error::InvalidModel(format!("bad intra parent {p} of {i}")));
                    }
                    q *= self.variables[p].cardinality;
                }
                if node.cpt.len() != q {
                    return Err(Error::InvalidModel(format!(
                        "{slice} node {i}: {} CPT rows, expected {q}",
                        node.cpt.len()
                    )));
                }
                for row in &node.cpt {
                    let s: f64 = row.iter().sum();
                    if row.len() != self.variables[i].cardinality
                        || row.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan())
                        || (s - 1.0).abs() > 1e-9
                    {
                        return Err(Error::InvalidModel(format!(
                            "{slice} node {i}: CPT row {row:?} is not a distribution"
                        )));
                    }
                }
            }
            self.topological_order(nodes)?;
        }
        Ok(())
    }

    fn topological_order(&self, nodes: &[CptNode]) -> Result<Vec<usize>> {
        let m = nodes.len();
        let mut order = Vec::with_capacity(m);
        let mut placed = vec![false; m];
        while order.len() < m {
            let before = order.len();
            for i in 0..m {
                if !placed[i] && nodes[i].intra_parent.is_none_or(|p| placed[p]) {
                    placed[i] = true;
                    order.push(i);
                }
            }
            if order.len() == before {
                return Err(Error::InvalidModel("intra-slice parents form a cycle".into()));
            }
        }
        Ok(order)
    }

    fn sample_slice(
        &self,
        nodes: &[CptNode],
        order: &[usize],
        prev: Option<&[usize]>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<usize> {
        let mut row = vec![0; nodes.len()];
        for &i in order {
            let node = &nodes[i];
            let mut config = 0;
            if let Some(prev) = prev {
                for &p in &node.inter_parents {
                    config = config * self.variables[p].cardinality + prev[p];
                }
            }
            if let Some(p) = node.intra_parent {
                config = config * self.variables[p].cardinality + row[p];
            }
            row[i] = sample_categorical(&node.cpt[config], rng);
        }
        row
    }
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // rounding left u above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Ancestral sampling of one sequence of `n_timesteps` slices.
pub fn synth_dbn_sequences(model: &GroundTruthDbn, n_timesteps: usize, seed: u64) -> Result<SequenceDataset> {
    synth_dbn_multi(model, &[n_timesteps], seed)
}

/// Ancestral sampling of several independent sequences.
pub fn synth_dbn_multi(model: &GroundTruthDbn, lengths: &[usize], seed: u64) -> Result<SequenceDataset> {
    model.validate()?;
    let init_order = model.topological_order(&model.initial)?;
    let trans_order = model.topological_order(&model.transition)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sequences = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut seq: Vec<Vec<usize>> = Vec::with_capacity(len);
        for t in 0..len {
            let row = if t == 0 {
                model.sample_slice(&model.initial, &init_order, None, &mut rng)
            } else {
                let prev = seq[t - 1].clone();
                model.sample_slice(&model.transition, &trans_order, Some(&prev), &mut rng)
            };
            seq.push(row);
        }
        sequences.push(seq);
    }
    SequenceDataset::new(model.variables.clone(), sequences)
}
