//! Augmented naive Bayes classifiers as selectively conditioned forests:
//! the features are the target set and the class is the single condition
//! variable, so each feature has at most one feature parent and optionally
//! the class.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bma::BmaPosterior;
use crate::data::{kfold_split, synth_weak_features, CategoricalDataset, MixedTable, Variable, WeakFeatureSpec};
use crate::error::{Error, Result};
use crate::scf::{learn_cmap_scf, IntraShape, ParentSet, ScfConstraints, ScfStructure};
use crate::scoring::{count_stats, ScoreConfig, Scorer, SufficientStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Class parent on every feature, no feature edges.
    Nb,
    /// Class parent on every feature, feature edges form one spanning tree.
    Tan,
    /// Class parent on every feature, feature edges form a forest.
    Fan,
    /// Optional class parent, one spanning tree.
    Stan,
    /// Optional class parent, a forest.
    Sfan,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Nb, Variant::Tan, Variant::Fan, Variant::Stan, Variant::Sfan];

    pub fn forces_class(&self) -> bool {
        matches!(self, Variant::Nb | Variant::Tan | Variant::Fan)
    }

    pub fn shape(&self) -> IntraShape {
        match self {
            Variant::Nb => IntraShape::Empty,
            Variant::Tan | Variant::Stan => IntraShape::Tree,
            Variant::Fan | Variant::Sfan => IntraShape::Forest,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Nb => "nb",
            Variant::Tan => "tan",
            Variant::Fan => "fan",
            Variant::Stan => "stan",
            Variant::Sfan => "sfan",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidParameter(format!("unknown variant {s:?}; expected one of nb, tan, fan, stan, sfan"))
            })
    }
}

/// Infinite penalties are written as the string `"inf"`.
mod alpha_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(alpha: &f64, s: S) -> Result<S::Ok, S::Error> {
        if alpha.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*alpha)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("bad penalty {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub variant: Variant,
    /// Penalty actually used; infinite for variants that force the class.
    #[serde(with = "alpha_serde")]
    pub alpha: f64,
    pub ess: f64,
    /// Full dataset schema, class included.
    pub variables: Vec<Variable>,
    pub class: usize,
    /// Feature ids, aligned with `structure.targets`.
    pub features: Vec<usize>,
    pub structure: ScfStructure,
    pub class_counts: Vec<u64>,
    /// Aligned with `features`; parent order as in [`ParentSet::ids`].
    pub counts: Vec<SufficientStats>,
}

/// Class distribution for one row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    /// Most probable class; ties go to the lowest index.
    pub label: usize,
    /// True when averaging failed and the MAP classifier answered instead.
    pub fallback: bool,
}

impl Prediction {
    fn from_log(log_probs: &[f64], fallback: bool) -> Self {
        let m = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = log_probs.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        let mut label = 0;
        for (y, &p) in probs.iter().enumerate() {
            if p > probs[label] {
                label = y;
            }
        }
        Prediction { probs, label, fallback }
    }
}

fn check_class(data: &CategoricalDataset, class: usize) -> Result<()> {
    if class >= data.n_vars() {
        return Err(Error::InvalidParameter(format!("class id {class} out of range")));
    }
    if data.cardinality(class) < 2 {
        return Err(Error::InvalidParameter(format!(
            "class variable {} has fewer than 2 values",
            data.variable(class).name
        )));
    }
    Ok(())
}

fn class_log_prior(counts: &[u64], ess: f64) -> Vec<f64> {
    let n: u64 = counts.iter().sum();
    let r = counts.len() as f64;
    counts
        .iter()
        .map(|&c| ((c as f64 + ess / r) / (n as f64 + ess)).ln())
        .collect()
}

fn class_counts(data: &CategoricalDataset, class: usize) -> Vec<u64> {
    let mut counts = vec![0u64; data.cardinality(class)];
    for y in data.column(class) {
        counts[y] += 1;
    }
    counts
}

/// Learns a classifier. `config.alpha` is the exclusion penalty (ignored by
/// variants that force the class parent); `config.k` is taken as 1.
pub fn learn_classifier(
    train: &CategoricalDataset,
    class: usize,
    variant: Variant,
    config: &ScoreConfig,
) -> Result<ClassifierModel> {
    config.validate()?;
    check_class(train, class)?;
    let alpha = if variant.forces_class() {
        f64::INFINITY
    } else {
        config.alpha
    };
    let config = ScoreConfig { alpha, k: 1, ..*config };
    let features: Vec<usize> = (0..train.n_vars()).filter(|&v| v != class).collect();
    let scorer = Scorer::new(train, config.ess);
    let structure = if variant == Variant::Nb {
        let mut s = ScfStructure {
            targets: features.clone(),
            condition: vec![class],
            parents: vec![ParentSet::new(None, vec![class]); features.len()],
            score: 0.0,
        };
        s.score = s.rescore(&scorer, &config)?;
        s
    } else if features.is_empty() {
        ScfStructure::empty(&scorer, &features, &[class], &config)?
    } else {
        learn_cmap_scf(
            &scorer,
            &features,
            &[class],
            &config,
            ScfConstraints {
                intra: variant.shape(),
                require_condition: variant.forces_class(),
            },
        )?
    };
    let counts = features
        .iter()
        .zip(&structure.parents)
        .map(|(&f, ps)| count_stats(train, f, &ps.ids()))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassifierModel {
        variant,
        alpha,
        ess: config.ess,
        variables: train.variables().to_vec(),
        class,
        features,
        structure,
        class_counts: class_counts(train, class),
        counts,
    })
}

fn check_row(variables: &[Variable], class: usize, row: &[usize]) -> Result<()> {
    if row.len() != variables.len() {
        return Err(Error::SchemaMismatch(format!(
            "row has {} values, schema has {}",
            row.len(),
            variables.len()
        )));
    }
    for (v, (&x, var)) in row.iter().zip(variables).enumerate() {
        if v != class && x >= var.cardinality {
            return Err(Error::SchemaMismatch(format!(
                "value {x} out of range for {}",
                var.name
            )));
        }
    }
    Ok(())
}

impl ClassifierModel {
    pub fn n_classes(&self) -> usize {
        self.variables[self.class].cardinality
    }

    /// Features whose parent set includes the class.
    pub fn class_edges(&self) -> usize {
        self.structure.parents.iter().filter(|p| !p.inter().is_empty()).count()
    }

    /// Class distribution for a full-schema row; the class entry is ignored.
    pub fn predict(&self, row: &[usize]) -> Result<Prediction> {
        check_row(&self.variables, self.class, row)?;
        let mut log_probs = class_log_prior(&self.class_counts, self.ess);
        let mut clamped = row.to_vec();
        for (y, lp) in log_probs.iter_mut().enumerate() {
            clamped[self.class] = y;
            for ((&f, ps), stats) in self.features.iter().zip(&self.structure.parents).zip(&self.counts) {
                let j = ps
                    .ids()
                    .iter()
                    .fold(0, |acc, &p| acc * self.variables[p].cardinality + clamped[p]);
                *lp += stats.posterior_mean(j, clamped[f], self.ess).ln();
            }
        }
        Ok(Prediction::from_log(&log_probs, false))
    }

    /// Fraction of rows whose predicted label equals the class column.
    pub fn accuracy(&self, test: &CategoricalDataset) -> Result<f64> {
        if test.variables() != self.variables.as_slice() {
            return Err(Error::SchemaMismatch("test schema differs from the model".into()));
        }
        let correct = test
            .rows()
            .par_iter()
            .map(|r| self.predict(r).map(|p| usize::from(p.label == r[self.class])))
            .collect::<Result<Vec<_>>>()?;
        Ok(correct.iter().sum::<usize>() as f64 / test.n_rows().max(1) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        if self.class >= n || self.variables[self.class].cardinality < 2 {
            return Err(Error::InvalidModel("bad class variable".into()));
        }
        let features: Vec<usize> = (0..n).filter(|&v| v != self.class).collect();
        if self.features != features || self.structure.targets != features {
            return Err(Error::InvalidModel("feature list does not match the schema".into()));
        }
        if self.structure.condition != [self.class] {
            return Err(Error::InvalidModel("condition set must be the class".into()));
        }
        self.structure.validate(1)?;
        let with_class = self.class_edges();
        let roots = self.structure.n_roots();
        let ok = match self.variant {
            Variant::Nb => with_class == features.len() && roots == features.len(),
            Variant::Tan => with_class == features.len() && roots == 1.min(features.len()),
            Variant::Fan => with_class == features.len(),
            Variant::Stan => roots == 1.min(features.len()),
            Variant::Sfan => true,
        };
        if !ok {
            return Err(Error::InvalidModel(format!("structure violates the {} shape", self.variant)));
        }
        if self.class_counts.len() != self.n_classes() || self.counts.len() != features.len() {
            return Err(Error::InvalidModel("count tables do not match the schema".into()));
        }
        for ((&f, ps), stats) in features.iter().zip(&self.structure.parents).zip(&self.counts) {
            let q: usize = ps.ids().iter().map(|&p| self.variables[p].cardinality).product();
            if stats.child_cardinality() != self.variables[f].cardinality || stats.n_configs() != q {
                return Err(Error::InvalidModel(format!("count table of feature {f} has the wrong shape")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: ClassifierModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }
}

/// Model-averaged predictions over every SFAN structure with exclusion
/// penalty `config.alpha`, one per row of `queries`. A failed average falls
/// back to the MAP SFAN prediction with `fallback` set.
pub fn bma_predict_rows(
    train: &CategoricalDataset,
    class: usize,
    queries: &[Vec<usize>],
    config: &ScoreConfig,
) -> Result<Vec<Prediction>> {
    config.validate()?;
    check_class(train, class)?;
    let config = ScoreConfig { k: 1, ..*config };
    let features: Vec<usize> = (0..train.n_vars()).filter(|&v| v != class).collect();
    let prior = class_log_prior(&class_counts(train, class), config.ess);
    let scorer = Scorer::new(train, config.ess);
    let mut posterior = match BmaPosterior::new(&scorer, &features, &[class], &config) {
        Ok(p) => Some(p),
        Err(Error::Singular { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut map_model: Option<ClassifierModel> = None;
    let mut out = Vec::with_capacity(queries.len());
    for row in queries {
        check_row(train.variables(), class, row)?;
        let mut log_probs = prior.clone();
        let mut failed = posterior.is_none();
        if let Some(post) = posterior.as_mut() {
            let mut clamped = row.clone();
            for (y, lp) in log_probs.iter_mut().enumerate() {
                clamped[class] = y;
                match post.log_predictive_row(&clamped) {
                    Ok(v) => *lp += v,
                    Err(Error::Singular { .. }) => {
                        failed = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        if failed {
            if map_model.is_none() {
                map_model = Some(learn_classifier(train, class, Variant::Sfan, &config)?);
            }
            let mut p = map_model.as_ref().expect("just set").predict(row)?;
            p.fallback = true;
            out.push(p);
        } else {
            out.push(Prediction::from_log(&log_probs, false));
        }
    }
    Ok(out)
}

pub fn bma_predict(
    train: &CategoricalDataset,
    class: usize,
    row: &[usize],
    config: &ScoreConfig,
) -> Result<Prediction> {
    Ok(bma_predict_rows(train, class, &[row.to_vec()], config)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Absent for degenerate folds.
    pub accuracy: Option<f64>,
    /// Training rows held a single class value; the fold is excluded.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub variant: Variant,
    #[serde(with = "alpha_serde")]
    pub alpha: f64,
    pub folds: Vec<FoldResult>,
    /// Mean over non-degenerate folds.
    pub mean: f64,
    /// Sample standard deviation over non-degenerate folds.
    pub sd: f64,
    /// `confusion[true][predicted]`, summed over non-degenerate folds.
    pub confusion: Vec<Vec<u64>>,
    pub degenerate_folds: Vec<usize>,
}

pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Stratification-free `folds`-fold cross-validation. Continuous columns are
/// discretized per fold using training rows only.
pub fn crossval_accuracy(
    table: &MixedTable,
    class: usize,
    variant: Variant,
    folds: usize,
    seed: u64,
    config: &ScoreConfig,
) -> Result<AccuracyReport> {
    config.validate()?;
    let n_classes = match table.columns().get(class) {
        Some(crate::data::Column::Categorical { categories, .. }) => categories.len(),
        Some(_) => return Err(Error::InvalidParameter("class column must be categorical".into())),
        None => return Err(Error::InvalidParameter(format!("class id {class} out of range"))),
    };
    if n_classes < 2 {
        return Err(Error::InvalidParameter("class variable has fewer than 2 values".into()));
    }
    let split = kfold_split(table.n_rows(), folds, seed)?;
    let results = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train_rows = split.train_indices(f);
            let test_rows = split.test_indices(f);
            let disc = table.discretize(class, &train_rows)?;
            let train = disc.apply(table, &train_rows)?;
            let test = disc.apply(table, &test_rows)?;
            let present = class_counts(&train, class).iter().filter(|&&c| c > 0).count();
            let mut confusion = vec![vec![0u64; n_classes]; n_classes];
            let result = FoldResult {
                fold: f,
                n_train: train_rows.len(),
                n_test: test_rows.len(),
                accuracy: None,
                degenerate: present < 2,
            };
            if result.degenerate {
                return Ok((result, confusion));
            }
            let model = learn_classifier(&train, class, variant, config)?;
            let mut correct = 0;
            for row in test.rows() {
                let p = model.predict(row)?;
                confusion[row[class]][p.label] += 1;
                correct += usize::from(p.label == row[class]);
            }
            let accuracy = Some(correct as f64 / test.n_rows() as f64);
            Ok((FoldResult { accuracy, ..result }, confusion))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    let mut accs = Vec::new();
    let mut fold_results = Vec::with_capacity(folds);
    let mut degenerate_folds = Vec::new();
    for (r, c) in results {
        if r.degenerate {
            degenerate_folds.push(r.fold);
        }
        if let Some(a) = r.accuracy {
            accs.push(a);
        }
        for (row, add) in confusion.iter_mut().zip(c) {
            row.iter_mut().zip(add).for_each(|(x, y)| *x += y);
        }
        fold_results.push(r);
    }
    let (mean, sd) = mean_sd(&accs);
    Ok(AccuracyReport {
        variant,
        alpha: if variant.forces_class() { f64::INFINITY } else { config.alpha },
        folds: fold_results,
        mean,
        sd,
        confusion,
        degenerate_folds,
    })
}

/// Fresh synthetic train/test pairs for a penalty sweep. Every penalty sees
/// the same pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepProtocol {
    pub n_relevant: usize,
    pub n_noise: usize,
    pub agreement: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SweepProtocol {
    fn default() -> Self {
        SweepProtocol {
            n_relevant: 10,
            n_noise: 20,
            agreement: 0.6,
            n_train: 100,
            n_test: 100,
            repeats: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub mean: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub n: usize,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("penalty grid is empty".into()));
    }
    if grid.iter().any(|a| a.is_nan() || *a < 0.0) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("penalty grid must be sorted and non-negative".into()));
    }
    Ok(())
}

fn curve(grid: &[f64], per_alpha: Vec<Vec<f64>>) -> Vec<SweepPoint> {
    grid.iter()
        .zip(per_alpha)
        .map(|(&alpha, xs)| {
            let (mean, sd) = mean_sd(&xs);
            SweepPoint {
                alpha,
                mean,
                sd,
                se: sd / (xs.len() as f64).sqrt(),
                n: xs.len(),
            }
        })
        .collect()
}

/// SFAN test accuracy against the exclusion penalty on the weak-feature
/// generator, averaged over repeats.
pub fn penalty_sweep(protocol: &SweepProtocol, grid: &[f64], config: &ScoreConfig) -> Result<Vec<SweepPoint>> {
    check_grid(grid)?;
    config.validate()?;
    let spec = |n_rows| WeakFeatureSpec {
        n_relevant: protocol.n_relevant,
        n_noise: protocol.n_noise,
        agreement: protocol.agreement,
        n_rows,
        n_classes: 2,
    };
    let per_repeat = (0..protocol.repeats)
        .into_par_iter()
        .map(|r| {
            let base = protocol.seed.wrapping_add(2 * r as u64);
            let (train, class) = synth_weak_features(&spec(protocol.n_train), base)?;
            let (test, _) = synth_weak_features(&spec(protocol.n_test), base.wrapping_add(1))?;
            grid.iter()
                .map(|&alpha| {
                    let cfg = ScoreConfig { alpha, ..*config };
                    learn_classifier(&train, class, Variant::Sfan, &cfg)?.accuracy(&test)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let per_alpha = (0..grid.len()).map(|a| per_repeat.iter().map(|r| r[a]).collect()).collect();
    Ok(curve(grid, per_alpha))
}

/// SFAN cross-validated accuracy against the exclusion penalty on a given
/// table; each point's spread is over folds.
pub fn penalty_sweep_crossval(
    table: &MixedTable,
    class: usize,
    grid: &[f64],
    folds: usize,
    seed: u64,
    config: &ScoreConfig,
) -> Result<Vec<SweepPoint>> {
    check_grid(grid)?;
    let per_alpha = grid
        .iter()
        .map(|&alpha| {
            let cfg = ScoreConfig { alpha, ..*config };
            let report = crossval_accuracy(table, class, Variant::Sfan, folds, seed, &cfg)?;
            Ok(report.folds.iter().filter_map(|f| f.accuracy).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(curve(grid, per_alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::add_noise_features;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weak(n_relevant: usize, n_noise: usize, n_rows: usize, seed: u64) -> CategoricalDataset {
        let spec = WeakFeatureSpec {
            n_relevant,
            n_noise,
            agreement: 0.7,
            n_rows,
            n_classes: 2,
        };
        synth_weak_features(&spec, seed).unwrap().0
    }

    fn cfg(alpha: f64) -> ScoreConfig {
        ScoreConfig::classification(alpha)
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        let err = "bayes".parse::<Variant>().unwrap_err().to_string();
        assert!(err.contains("nb, tan, fan, stan, sfan"));
    }

    #[test]
    fn every_variant_respects_its_shape() {
        for seed in 0..5 {
            let d = weak(4, 2, 80, seed);
            for v in Variant::ALL {
                let m = learn_classifier(&d, 0, v, &cfg(1.0)).unwrap();
                m.validate().unwrap();
            }
        }
    }

    #[test]
    fn infinite_penalty_sfan_is_fan() {
        for seed in 0..5 {
            let d = weak(4, 3, 60, seed);
            let fan = learn_classifier(&d, 0, Variant::Fan, &cfg(0.0)).unwrap();
            let sfan = learn_classifier(&d, 0, Variant::Sfan, &cfg(f64::INFINITY)).unwrap();
            assert_eq!(fan.structure.parents, sfan.structure.parents);
        }
    }

    #[test]
    fn training_objective_nesting() {
        for seed in 0..10 {
            let d = weak(3, 3, 50, seed);
            let score = |v, a| learn_classifier(&d, 0, v, &cfg(a)).unwrap().structure.score;
            let (sfan, fan, tan, stan) = (
                score(Variant::Sfan, 0.0),
                score(Variant::Fan, 0.0),
                score(Variant::Tan, 0.0),
                score(Variant::Stan, 0.0),
            );
            assert!(sfan >= fan && fan >= tan && sfan >= stan);
        }
    }

    #[test]
    fn class_edges_grow_with_penalty() {
        let grid = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0];
        for seed in 0..20 {
            let d = weak(3, 4, 60, seed);
            let edges: Vec<usize> = grid
                .iter()
                .map(|&a| learn_classifier(&d, 0, Variant::Sfan, &cfg(a)).unwrap().class_edges())
                .collect();
            assert!(edges.windows(2).all(|w| w[0] <= w[1]), "{edges:?}");
        }
    }

    #[test]
    fn copy_feature_gives_perfect_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let vars = vec![Variable::new("y", 2), Variable::new("copy", 2), Variable::new("u", 2)];
        let rows = (0..100)
            .map(|_| {
                let y = rng.random_range(0..2);
                vec![y, y, rng.random_range(0..2)]
            })
            .collect();
        let d = CategoricalDataset::new(vars, rows).unwrap();
        let m = learn_classifier(&d, 0, Variant::Nb, &cfg(0.0)).unwrap();
        assert_eq!(m.accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn detached_features_predict_the_prior() {
        let d = weak(0, 3, 40, 2);
        let mut m = learn_classifier(&d, 0, Variant::Sfan, &cfg(0.0)).unwrap();
        // force the class-free structure and refit counts
        m.structure.parents = vec![ParentSet::empty(); 3];
        m.counts = m.features.iter().map(|&f| count_stats(&d, f, &[]).unwrap()).collect();
        let prior: Vec<f64> = class_log_prior(&m.class_counts, m.ess).iter().map(|l| l.exp()).collect();
        for row in d.rows() {
            let p = m.predict(row).unwrap();
            for (a, b) in p.probs.iter().zip(&prior) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predictions_are_distributions() {
        let d = weak(3, 3, 60, 3);
        for v in Variant::ALL {
            let m = learn_classifier(&d, 0, v, &cfg(2.0)).unwrap();
            for row in d.rows() {
                let s: f64 = m.predict(row).unwrap().probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn column_order_does_not_change_predictions() {
        let d = weak(3, 2, 70, 4);
        let perm = [0, 3, 5, 1, 4, 2];
        let p = d.select_columns(&perm);
        for v in Variant::ALL {
            let a = learn_classifier(&d, 0, v, &cfg(1.5)).unwrap();
            let b = learn_classifier(&p, 0, v, &cfg(1.5)).unwrap();
            for (r, rp) in d.rows().iter().zip(p.rows()) {
                let (x, y) = (a.predict(r).unwrap(), b.predict(rp).unwrap());
                assert_eq!(x.label, y.label);
                for (u, w) in x.probs.iter().zip(&y.probs) {
                    assert!((u - w).abs() < 1e-9, "{v}");
                }
            }
        }
    }

    #[test]
    fn pure_noise_drops_class_edges() {
        let mut clean = 0;
        for seed in 0..10 {
            let d = weak(0, 1, 500, seed);
            let m = learn_classifier(&d, 0, Variant::Sfan, &cfg(0.0)).unwrap();
            let scorer = Scorer::new(&d, 10.0);
            let lone = scorer.local_score(1, &ParentSet::empty()).unwrap();
            let with = scorer.local_score(1, &ParentSet::new(None, vec![0])).unwrap();
            assert_eq!(m.class_edges() == 1, with > lone);
            clean += usize::from(m.class_edges() == 0);
        }
        assert!(clean >= 9, "{clean}");
    }

    #[test]
    fn bma_without_features_is_the_prior() {
        let d = weak(0, 0, 30, 5);
        let p = bma_predict(&d, 0, &[0], &cfg(0.0)).unwrap();
        let prior: Vec<f64> = class_log_prior(&class_counts(&d, 0), 10.0).iter().map(|l| l.exp()).collect();
        for (a, b) in p.probs.iter().zip(&prior) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(!p.fallback);
    }

    #[test]
    fn bma_single_feature_matches_two_structures() {
        let d = weak(1, 0, 30, 6);
        let config = cfg(1.0);
        let scorer = Scorer::new(&d, 10.0);
        for x in 0..2 {
            let p = bma_predict(&d, 0, &[0, x], &config).unwrap();
            let prior = class_log_prior(&class_counts(&d, 0), 10.0);
            let mut logs = Vec::new();
            for (y, prior_y) in prior.iter().enumerate() {
                let row = vec![y, x];
                let q = d.with_row(row).unwrap();
                // two structures: feature alone (penalized) or with the class
                let lone = scorer.local_score(1, &ParentSet::empty()).unwrap() - 1.0;
                let with = scorer.local_score(1, &ParentSet::new(None, vec![0])).unwrap();
                let lone_q = lone + scorer.predictive(1, &ParentSet::empty(), &q).unwrap();
                let with_q = with + scorer.predictive(1, &ParentSet::new(None, vec![0]), &q).unwrap();
                let z = crate::bma::log_sum_exp([lone, with]);
                logs.push(prior_y + crate::bma::log_sum_exp([lone_q, with_q]) - z);
            }
            let want = Prediction::from_log(&logs, false);
            for (a, b) in p.probs.iter().zip(&want.probs) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn crossval_copy_feature_is_perfect_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let vars = vec![Variable::new("y", 2), Variable::new("copy", 2)];
        let rows = (0..60)
            .map(|_| {
                let y = rng.random_range(0..2);
                vec![y, y]
            })
            .collect();
        let table = MixedTable::from(&CategoricalDataset::new(vars, rows).unwrap());
        for v in Variant::ALL {
            let r = crossval_accuracy(&table, 0, v, 5, 3, &cfg(0.0)).unwrap();
            assert_eq!(r.mean, 1.0);
            assert_eq!(r, crossval_accuracy(&table, 0, v, 5, 3, &cfg(0.0)).unwrap());
            let per_class: Vec<u64> = r.confusion.iter().map(|row| row.iter().sum()).collect();
            let truth = class_counts(&table.to_categorical().unwrap(), 0);
            assert_eq!(per_class, truth);
        }
    }

    #[test]
    fn degenerate_folds_are_reported() {
        // the fold holding the single minority row trains on one class
        let vars = vec![Variable::new("y", 2), Variable::new("x", 2)];
        let rows = vec![vec![0, 0], vec![0, 1], vec![1, 1]];
        let table = MixedTable::from(&CategoricalDataset::new(vars, rows).unwrap());
        let r = crossval_accuracy(&table, 0, Variant::Nb, 3, 0, &cfg(0.0)).unwrap();
        assert_eq!(r.degenerate_folds.len(), 1);
        assert!(r.folds[r.degenerate_folds[0]].accuracy.is_none());
        assert_eq!(r.folds.iter().filter(|f| f.accuracy.is_some()).count(), 2);
    }

    #[test]
    fn sweep_single_point_and_validation() {
        let protocol = SweepProtocol {
            repeats: 3,
            ..SweepProtocol::default()
        };
        let c = penalty_sweep(&protocol, &[2.0], &cfg(0.0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].n, 3);
        assert!(penalty_sweep(&protocol, &[], &cfg(0.0)).is_err());
        assert!(penalty_sweep(&protocol, &[3.0, 1.0], &cfg(0.0)).is_err());
    }

    #[test]
    fn json_round_trip_keeps_infinite_penalty() {
        let d = add_noise_features(&weak(3, 0, 40, 8), 2, 1);
        for v in Variant::ALL {
            let m = learn_classifier(&d, 0, v, &cfg(3.0)).unwrap();
            let text = m.to_json().unwrap();
            let back = ClassifierModel::from_json(&text).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }
}
