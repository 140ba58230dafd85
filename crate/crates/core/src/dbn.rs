//! Two-slice dynamic Bayesian networks built from selectively conditioned
//! forests: the next slice is the target set and the previous slice is the
//! condition set.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bma::BmaPosterior;
use crate::data::{to_transitions, CategoricalDataset, SequenceDataset, Variable};
use crate::error::{Error, Result};
use crate::scf::{join_slices, learn_cmap_scf, IntraShape, ScfConstraints, ScfStructure};
use crate::scoring::{count_stats, posterior_predictive_score, ScoreConfig, Scorer, SufficientStats};

/// Structure class used for the transition model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelClass {
    /// Every variable independent of everything.
    None,
    /// Intra-slice forest only.
    Intra,
    /// Up to `k` previous-slice parents, no intra-slice edges.
    Inter(usize),
    /// Intra-slice forest plus up to `k` previous-slice parents.
    Scf(usize),
    /// Average over the whole `Scf(k)` class.
    BmaScf(usize),
}

impl ModelClass {
    /// Condition-parent budget of the class.
    pub fn k(&self) -> usize {
        match *self {
            ModelClass::None | ModelClass::Intra => 0,
            ModelClass::Inter(k) | ModelClass::Scf(k) | ModelClass::BmaScf(k) => k,
        }
    }

    pub fn is_bma(&self) -> bool {
        matches!(self, ModelClass::BmaScf(_))
    }
}

impl fmt::Display for ModelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelClass::None => write!(f, "none"),
            ModelClass::Intra => write!(f, "intra"),
            ModelClass::Inter(k) => write!(f, "inter({k})"),
            ModelClass::Scf(k) => write!(f, "scf({k})"),
            ModelClass::BmaScf(k) => write!(f, "bma-scf({k})"),
        }
    }
}

impl FromStr for ModelClass {
    type Err = Error;

    /// Accepts `none`, `intra`, `inter(k)`, `scf(k)`, `bma-scf(k)`; the
    /// parenthesized forms also parse as `inter:k` etc.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "none" => return Ok(ModelClass::None),
            "intra" => return Ok(ModelClass::Intra),
            _ => {}
        }
        let bad = || Error::InvalidParameter(format!("unknown model class {s:?}"));
        let (name, arg) = if let Some(open) = s.find('(') {
            let arg = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
            (&s[..open], arg)
        } else {
            s.split_once(':').ok_or_else(bad)?
        };
        let k: usize = arg.trim().parse().map_err(|_| bad())?;
        match name.trim() {
            "inter" => Ok(ModelClass::Inter(k)),
            "scf" => Ok(ModelClass::Scf(k)),
            "bma-scf" | "bma_scf" | "bmascf" => Ok(ModelClass::BmaScf(k)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for ModelClass {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelClass> for String {
    fn from(c: ModelClass) -> String {
        c.to_string()
    }
}

/// A learned two-slice model.
///
/// Column ids of the initial structure index the slice schema. Column ids of
/// the transition structure index the joined pair (previous slice `0..m`,
/// next slice `m..2m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnModel {
    pub class: ModelClass,
    pub variables: Vec<Variable>,
    pub ess: f64,
    pub initial: ScfStructure,
    pub initial_counts: Vec<SufficientStats>,
    /// For averaged models this is the MAP structure of the same class, kept
    /// for inspection; prediction averages over all structures.
    pub transition: ScfStructure,
    pub transition_counts: Vec<SufficientStats>,
    /// Joined training transitions, kept by averaged models only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<CategoricalDataset>,
}

fn joined_schema(variables: &[Variable]) -> Vec<Variable> {
    variables
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.name.push_str("@prev");
            v
        })
        .chain(variables.iter().cloned())
        .collect()
}

fn config_index(schema: &[Variable], parents: &[usize], row: &[usize]) -> usize {
    parents.iter().fold(0, |acc, &p| acc * schema[p].cardinality + row[p])
}

fn structure_for(
    scorer: &Scorer<'_>,
    class: ModelClass,
    targets: &[usize],
    cond: &[usize],
    config: &ScoreConfig,
) -> Result<ScfStructure> {
    let config = ScoreConfig { k: class.k(), ..*config };
    let shape = match class {
        ModelClass::None => return ScfStructure::empty(scorer, targets, cond, &config),
        ModelClass::Inter(_) => IntraShape::Empty,
        _ => IntraShape::Forest,
    };
    learn_cmap_scf(
        scorer,
        targets,
        cond,
        &config,
        ScfConstraints {
            intra: shape,
            require_condition: false,
        },
    )
}

fn counts_for(data: &CategoricalDataset, s: &ScfStructure) -> Result<Vec<SufficientStats>> {
    s.targets
        .iter()
        .zip(&s.parents)
        .map(|(&c, ps)| count_stats(data, c, &ps.ids()))
        .collect()
}

/// Learns the initial structure from the first step of every sequence and
/// the transition structure from all transitions. `config.k` is replaced by
/// the class budget.
pub fn learn_dbn(train: &SequenceDataset, class: ModelClass, config: &ScoreConfig) -> Result<DbnModel> {
    config.validate()?;
    let (prev, next) = to_transitions(train)?;
    let m = train.n_vars();
    let variables = train.variables().to_vec();

    let first_rows: Vec<Vec<usize>> = train.sequences().iter().map(|s| s[0].clone()).collect();
    let first = CategoricalDataset::new(variables.clone(), first_rows)?;
    let first_scorer = Scorer::new(&first, config.ess);
    let slice_ids: Vec<usize> = (0..m).collect();
    let initial_class = if class == ModelClass::None {
        ModelClass::None
    } else {
        ModelClass::Intra
    };
    let initial = structure_for(&first_scorer, initial_class, &slice_ids, &[], config)?;
    let initial_counts = counts_for(&first, &initial)?;

    let joined = join_slices(&prev, &next)?;
    let scorer = Scorer::new(&joined, config.ess);
    let next_ids: Vec<usize> = (m..2 * m).collect();
    let map_class = match class {
        ModelClass::BmaScf(k) => ModelClass::Scf(k),
        c => c,
    };
    let transition = structure_for(&scorer, map_class, &next_ids, &slice_ids, config)?;
    let transition_counts = counts_for(&joined, &transition)?;

    Ok(DbnModel {
        class,
        variables,
        ess: config.ess,
        initial,
        initial_counts,
        transition,
        transition_counts,
        training: class.is_bma().then_some(joined),
    })
}

/// How structural models score test transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// Posterior-mean CPTs fixed after training.
    #[default]
    PosteriorMean,
    /// Posterior updated with each scored test transition, in order.
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// `total / count`.
    pub average: f64,
    pub total: f64,
    pub count: usize,
    /// Summed log probability per next-slice variable; absent for averaged
    /// models, whose score does not split by variable.
    pub per_variable: Option<Vec<f64>>,
}

impl EvalReport {
    fn new(model: String, total: f64, count: usize, per_variable: Option<Vec<f64>>) -> Self {
        EvalReport {
            model,
            average: total / count as f64,
            total,
            count,
            per_variable,
        }
    }
}

impl DbnModel {
    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    /// Structural consistency checks, used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let m = self.variables.len();
        let joined = joined_schema(&self.variables);
        let check = |s: &ScfStructure, counts: &[SufficientStats], schema: &[Variable], targets: Vec<usize>, what: &str| {
            if s.targets != targets {
                return Err(Error::InvalidModel(format!("{what} targets do not match the schema")));
            }
            s.validate(usize::MAX)?;
            if counts.len() != targets.len() {
                return Err(Error::InvalidModel(format!("{what} has {} count tables", counts.len())));
            }
            for ((&c, ps), stats) in targets.iter().zip(&s.parents).zip(counts) {
                let q: usize = ps.ids().iter().map(|&p| schema[p].cardinality).product();
                if stats.child_cardinality() != schema[c].cardinality || stats.n_configs() != q {
                    return Err(Error::InvalidModel(format!("{what} count table of {c} has the wrong shape")));
                }
            }
            Ok(())
        };
        if !(self.ess > 0.0 && self.ess.is_finite()) {
            return Err(Error::InvalidModel(format!("ess {} must be positive", self.ess)));
        }
        check(&self.initial, &self.initial_counts, &self.variables, (0..m).collect(), "initial slice")?;
        if !self.initial.condition.is_empty() {
            return Err(Error::InvalidModel("initial slice cannot have a condition set".into()));
        }
        check(&self.transition, &self.transition_counts, &joined, (m..2 * m).collect(), "transition")?;
        if self.transition.parents.iter().any(|p| p.inter().iter().any(|&x| x >= m)) {
            return Err(Error::InvalidModel("condition parents must lie in the previous slice".into()));
        }
        if self.class.is_bma() != self.training.is_some() {
            return Err(Error::InvalidModel("training data is kept exactly for averaged models".into()));
        }
        if let Some(t) = &self.training {
            if t.variables() != joined.as_slice() {
                return Err(Error::InvalidModel("stored training schema does not match".into()));
            }
        }
        Ok(())
    }

    /// Per-variable log probabilities of one transition under the
    /// posterior-mean transition CPTs. `joined_row` is previous then next.
    pub fn transition_log_probs(&self, joined_row: &[usize]) -> Vec<f64> {
        let schema = joined_schema(&self.variables);
        self.transition
            .targets
            .iter()
            .zip(&self.transition.parents)
            .zip(&self.transition_counts)
            .map(|((&c, ps), stats)| {
                let j = config_index(&schema, &ps.ids(), joined_row);
                stats.posterior_mean(j, joined_row[c], self.ess).ln()
            })
            .collect()
    }

    /// Average held-out `log P(x_t | x_{t-1})` per transition.
    pub fn evaluate(&self, test: &SequenceDataset, mode: EvalMode) -> Result<EvalReport> {
        if test.variables() != self.variables.as_slice() {
            return Err(Error::SchemaMismatch("test schema differs from the model".into()));
        }
        let (prev, next) = to_transitions(test)?;
        let joined = join_slices(&prev, &next)?;
        let count = joined.n_rows();
        let m = self.n_vars();
        let name = self.class.to_string();

        if let Some(train) = &self.training {
            let scorer = Scorer::new(train, self.ess);
            let config = ScoreConfig::new(self.ess, 0.0, self.class.k())?;
            let slice_ids: Vec<usize> = (0..m).collect();
            let next_ids: Vec<usize> = (m..2 * m).collect();
            let mut post = BmaPosterior::new(&scorer, &next_ids, &slice_ids, &config)?;
            let mut total = 0.0;
            for row in joined.rows() {
                total += post.log_predictive_row(row)?;
            }
            return Ok(EvalReport::new(name, total, count, None));
        }

        let per_variable = match mode {
            EvalMode::PosteriorMean => {
                let per_row: Vec<Vec<f64>> = joined
                    .rows()
                    .par_iter()
                    .map(|r| self.transition_log_probs(r))
                    .collect();
                (0..m)
                    .map(|i| per_row.iter().map(|r| r[i]).sum::<f64>())
                    .collect::<Vec<f64>>()
            }
            EvalMode::Sequential => {
                let schema = joined_schema(&self.variables);
                let mut sums = vec![0.0; m];
                for (i, ((&c, ps), stats)) in self
                    .transition
                    .targets
                    .iter()
                    .zip(&self.transition.parents)
                    .zip(&self.transition_counts)
                    .enumerate()
                {
                    let mut stats = stats.clone();
                    let ids = ps.ids();
                    for row in joined.rows() {
                        let j = config_index(&schema, &ids, row);
                        sums[i] += stats.posterior_mean(j, row[c], self.ess).ln();
                        stats.increment(j, row[c]);
                    }
                }
                sums
            }
        };
        let total = per_variable.iter().sum();
        Ok(EvalReport::new(name, total, count, Some(per_variable)))
    }

    /// Batch posterior predictive score of all test transitions under the
    /// training posterior; equals the sequential evaluation total.
    pub fn batch_predictive(&self, test: &SequenceDataset) -> Result<f64> {
        let (prev, next) = to_transitions(test)?;
        let joined = join_slices(&prev, &next)?;
        let mut total = 0.0;
        for ((&c, ps), stats) in self.transition.targets.iter().zip(&self.transition.parents).zip(&self.transition_counts) {
            let t = count_stats(&joined, c, &ps.ids())?;
            total += posterior_predictive_score(stats, &t, self.ess)?;
        }
        Ok(total)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: DbnModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }
}

/// Evaluates `model` on `test` in the default posterior-mean mode.
pub fn eval_log_predictive(model: &DbnModel, test: &SequenceDataset) -> Result<EvalReport> {
    model.evaluate(test, EvalMode::PosteriorMean)
}

/// One row of a model-class comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub class: ModelClass,
    /// MAP training objective of the transition structure; absent for
    /// averaged models.
    pub train_score: Option<f64>,
    pub report: EvalReport,
}

/// The classes compared for a list of condition budgets, in table order.
pub fn comparison_classes(ks: &[usize]) -> Vec<ModelClass> {
    let mut classes = vec![ModelClass::None, ModelClass::Intra];
    classes.extend(ks.iter().map(|&k| ModelClass::Inter(k)));
    classes.extend(ks.iter().map(|&k| ModelClass::Scf(k)));
    classes.extend(ks.iter().map(|&k| ModelClass::BmaScf(k)));
    classes
}

/// Learns and evaluates every class of [`comparison_classes`].
pub fn compare_model_classes(
    train: &SequenceDataset,
    test: &SequenceDataset,
    ks: &[usize],
    config: &ScoreConfig,
) -> Result<Vec<ComparisonRow>> {
    comparison_classes(ks)
        .into_iter()
        .map(|class| {
            let model = learn_dbn(train, class, config)?;
            let report = eval_log_predictive(&model, test)?;
            Ok(ComparisonRow {
                class,
                train_score: (!class.is_bma()).then_some(model.transition.score),
                report,
            })
        })
        .collect()
}
