//! Exact MAP learning of selectively conditioned forests.
//!
//! Variables are split into a condition set and a target set. Each target
//! may take at most one parent from the target set (so intra-set edges form
//! a forest) and at most `k` parents from the condition set. Because only
//! intra-set edges can close a cycle, the best condition parents for every
//! (child, intra parent) pair can be chosen independently; the remaining
//! choice of intra parents is a maximum directed spanning forest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::mdsf::{self, RootedDigraph};
use crate::scoring::{structure_log_prior, ScoreConfig, Scorer};

/// Parents of one target variable, by dataset column id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ParentSet {
    intra: Option<usize>,
    inter: Vec<usize>,
}

impl ParentSet {
    /// `inter` is sorted and deduplicated.
    pub fn new(intra: Option<usize>, mut inter: Vec<usize>) -> Self {
        inter.sort_unstable();
        inter.dedup();
        ParentSet { intra, inter }
    }

    pub fn empty() -> Self {
        ParentSet::default()
    }

    pub fn intra(&self) -> Option<usize> {
        self.intra
    }

    pub fn inter(&self) -> &[usize] {
        &self.inter
    }

    /// Intra parent first, then condition parents ascending. This is the
    /// order used for count tables.
    pub fn ids(&self) -> Vec<usize> {
        self.intra.iter().chain(&self.inter).copied().collect()
    }

    pub fn len(&self) -> usize {
        self.inter.len() + usize::from(self.intra.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Allowed shape of the intra-set edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntraShape {
    #[default]
    Forest,
    /// A single spanning tree (exactly one root).
    Tree,
    /// No intra-set edges at all.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScfConstraints {
    pub intra: IntraShape,
    /// Every target must include all condition variables (infinite exclusion
    /// penalty).
    pub require_condition: bool,
}

impl ScfConstraints {
    pub fn forest() -> Self {
        ScfConstraints::default()
    }

    pub fn no_intra() -> Self {
        ScfConstraints {
            intra: IntraShape::Empty,
            require_condition: false,
        }
    }
}

/// Best condition-parent completion of one (child, intra parent) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub inter: Vec<usize>,
    /// Local score plus log structure prior; `-inf` when no completion is
    /// allowed.
    pub score: f64,
}

/// Step-one table: for each target child and each possible intra parent
/// (or none), the best condition-parent completion and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTable {
    targets: Vec<usize>,
    /// `cells[i][0]` is "no intra parent"; `cells[i][j + 1]` has target `j`
    /// as intra parent. The diagonal holds `-inf`.
    cells: Vec<Vec<Candidate>>,
}

impl CandidateTable {
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Positions index into `targets`.
    pub fn get(&self, child: usize, intra: Option<usize>) -> &Candidate {
        &self.cells[child][intra.map_or(0, |j| j + 1)]
    }
}

/// Every subset of `cond` of size at most `k`, ordered by size and then
/// lexicographically.
pub fn inter_subsets(cond: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut sorted = cond.to_vec();
    sorted.sort_unstable();
    let mut out = vec![Vec::new()];
    for size in 1..=k.min(sorted.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| sorted[i]).collect());
            let Some(pos) = (0..size).rev().find(|&p| idx[p] < sorted.len() - size + p) else {
                break;
            };
            idx[pos] += 1;
            for q in pos + 1..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

fn check_sets(data: &CategoricalDataset, targets: &[usize], cond: &[usize]) -> Result<()> {
    let n = data.n_vars();
    for (name, set) in [("target", targets), ("condition", cond)] {
        for (i, &v) in set.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidParameter(format!("{name} id {v} out of range")));
            }
            if set[..i].contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} id {v} repeated")));
            }
        }
    }
    if let Some(v) = targets.iter().find(|t| cond.contains(t)) {
        return Err(Error::InvalidParameter(format!(
            "variable {v} is in both the target and condition sets"
        )));
    }
    Ok(())
}

fn check_config(scorer: &Scorer<'_>, config: &ScoreConfig) -> Result<()> {
    config.validate()?;
    if scorer.ess() != config.ess {
        return Err(Error::InvalidParameter(format!(
            "scorer ess {} differs from config ess {}",
            scorer.ess(),
            config.ess
        )));
    }
    Ok(())
}

/// Builds the candidate table. With `with_intra` false only the
/// "no intra parent" column is evaluated; the others are left at `-inf`.
pub fn build_candidate_table(
    scorer: &Scorer<'_>,
    targets: &[usize],
    cond: &[usize],
    config: &ScoreConfig,
) -> Result<CandidateTable> {
    candidate_table(scorer, targets, cond, config, true)
}

fn candidate_table(
    scorer: &Scorer<'_>,
    targets: &[usize],
    cond: &[usize],
    config: &ScoreConfig,
    with_intra: bool,
) -> Result<CandidateTable> {
    check_config(scorer, config)?;
    check_sets(scorer.data(), targets, cond)?;
    let subsets = inter_subsets(cond, config.k);
    let n = targets.len();
    let cells = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..=n)
                .map(|col| {
                    let intra = col.checked_sub(1);
                    if intra == Some(i) || (!with_intra && intra.is_some()) {
                        return Ok(Candidate {
                            inter: Vec::new(),
                            score: f64::NEG_INFINITY,
                        });
                    }
                    best_completion(scorer, targets[i], intra.map(|j| targets[j]), cond, &subsets, config)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CandidateTable {
        targets: targets.to_vec(),
        cells,
    })
}

/// Ties keep the earliest subset in [`inter_subsets`] order (fewest parents,
/// then lexicographically smallest).
fn best_completion(
    scorer: &Scorer<'_>,
    child: usize,
    intra: Option<usize>,
    cond: &[usize],
    subsets: &[Vec<usize>],
    config: &ScoreConfig,
) -> Result<Candidate> {
    let mut best = Candidate {
        inter: Vec::new(),
        score: f64::NEG_INFINITY,
    };
    for s in subsets {
        let ps = ParentSet::new(intra, s.clone());
        let prior = structure_log_prior(&ps, cond, config)?;
        if prior == f64::NEG_INFINITY {
            continue;
        }
        let score = scorer.local_score(child, &ps)? + prior;
        if score > best.score {
            best = Candidate {
                inter: s.clone(),
                score,
            };
        }
    }
    Ok(best)
}

/// A learned structure over a target set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScfStructure {
    pub targets: Vec<usize>,
    pub condition: Vec<usize>,
    /// Aligned with `targets`.
    pub parents: Vec<ParentSet>,
    /// Sum over targets of local score plus log structure prior.
    pub score: f64,
}

impl ScfStructure {
    /// Every target parentless.
    pub fn empty(
        scorer: &Scorer<'_>,
        targets: &[usize],
        cond: &[usize],
        config: &ScoreConfig,
    ) -> Result<Self> {
        let mut s = ScfStructure {
            targets: targets.to_vec(),
            condition: cond.to_vec(),
            parents: vec![ParentSet::empty(); targets.len()],
            score: 0.0,
        };
        s.score = s.rescore(scorer, config)?;
        Ok(s)
    }

    pub fn parents_of(&self, var: usize) -> Option<&ParentSet> {
        self.targets
            .iter()
            .position(|&t| t == var)
            .map(|i| &self.parents[i])
    }

    /// `(parent, child)` column-id pairs of the intra-set edges.
    pub fn intra_edges(&self) -> Vec<(usize, usize)> {
        self.targets
            .iter()
            .zip(&self.parents)
            .filter_map(|(&c, ps)| ps.intra().map(|p| (p, c)))
            .collect()
    }

    pub fn n_roots(&self) -> usize {
        self.parents.iter().filter(|p| p.intra().is_none()).count()
    }

    /// Checks the SCF shape: intra parents are targets and acyclic, condition
    /// parents come from the condition set, at most `k` of them.
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.parents.len() != self.targets.len() {
            return Err(Error::InvalidModel("parent list length differs from targets".into()));
        }
        let mut pointer = Vec::with_capacity(self.targets.len());
        for (&child, ps) in self.targets.iter().zip(&self.parents) {
            if ps.inter().len() > k {
                return Err(Error::InvalidParentSet {
                    child,
                    reason: format!("{} condition parents exceed k = {k}", ps.inter().len()),
                });
            }
            if let Some(p) = ps.inter().iter().find(|p| !self.condition.contains(p)) {
                return Err(Error::InvalidParentSet {
                    child,
                    reason: format!("{p} is not in the condition set"),
                });
            }
            pointer.push(match ps.intra() {
                None => None,
                Some(p) if p == child => {
                    return Err(Error::InvalidParentSet {
                        child,
                        reason: "self edge".into(),
                    })
                }
                Some(p) => Some(self.targets.iter().position(|&t| t == p).ok_or_else(|| {
                    Error::InvalidParentSet {
                        child,
                        reason: format!("intra parent {p} is not a target"),
                    }
                })?),
            });
        }
        let g = RootedDigraph::from_fn(pointer.len(), |_| 0.0, |_, _| 0.0);
        mdsf::Forest::evaluate(&g, pointer)
            .map_err(|_| Error::InvalidModel("intra-set edges contain a cycle".into()))?;
        Ok(())
    }

    /// Independently recomputes the total score from the parent sets.
    pub fn rescore(&self, scorer: &Scorer<'_>, config: &ScoreConfig) -> Result<f64> {
        let mut total = 0.0;
        for (&child, ps) in self.targets.iter().zip(&self.parents) {
            total += scorer.local_score(child, ps)? + structure_log_prior(ps, &self.condition, config)?;
        }
        Ok(total)
    }
}

/// Conditional MAP structure of `targets` given `cond`.
pub fn learn_cmap_scf(
    scorer: &Scorer<'_>,
    targets: &[usize],
    cond: &[usize],
    config: &ScoreConfig,
    constraints: ScfConstraints,
) -> Result<ScfStructure> {
    let mut config = *config;
    if constraints.require_condition {
        config.alpha = f64::INFINITY;
    }
    let with_intra = constraints.intra != IntraShape::Empty;
    let table = candidate_table(scorer, targets, cond, &config, with_intra)?;
    let n = targets.len();
    let graph = RootedDigraph::from_fn(
        n,
        |i| table.get(i, None).score,
        |j, i| {
            if with_intra {
                table.get(i, Some(j)).score
            } else {
                f64::NEG_INFINITY
            }
        },
    );
    let forest = match constraints.intra {
        IntraShape::Tree => mdsf::max_spanning_tree(&graph),
        _ => mdsf::max_directed_spanning_forest(&graph),
    }
    .map_err(|e| match e {
        Error::Infeasible { vertex } if vertex < n => Error::Infeasible {
            vertex: targets[vertex],
        },
        e => e,
    })?;

    let parents = forest
        .parents()
        .iter()
        .enumerate()
        .map(|(i, p)| ParentSet::new(p.map(|j| targets[j]), table.get(i, *p).inter.clone()))
        .collect();
    Ok(ScfStructure {
        targets: targets.to_vec(),
        condition: cond.to_vec(),
        parents,
        score: forest.score(),
    })
}

/// Joins two slices column-wise; previous-slice columns come first and get
/// the suffix `@prev`.
pub fn join_slices(prev: &CategoricalDataset, next: &CategoricalDataset) -> Result<CategoricalDataset> {
    let vars = prev
        .variables()
        .iter()
        .map(|v| {
            let mut v = v.clone();
            v.name.push_str("@prev");
            v
        })
        .collect();
    let renamed = CategoricalDataset::new(vars, prev.rows().to_vec())?;
    renamed.concat_columns(next)
}

/// MAP structure over a pair of slices: a plain MAP forest over the previous
/// slice and the conditional MAP of the next slice given the previous one.
/// Column ids refer to [`join_slices`] of the pair (previous slice `0..m`,
/// next slice `m..2m`).
pub fn learn_map_scf_pair(
    prev: &CategoricalDataset,
    next: &CategoricalDataset,
    config: &ScoreConfig,
) -> Result<(ScfStructure, ScfStructure)> {
    if !prev.same_schema(next) {
        return Err(Error::SchemaMismatch("slices use different variables".into()));
    }
    let joined = join_slices(prev, next)?;
    let scorer = Scorer::new(&joined, config.ess);
    let m = prev.n_vars();
    let prev_ids: Vec<usize> = (0..m).collect();
    let next_ids: Vec<usize> = (m..2 * m).collect();
    let g_prev = learn_cmap_scf(&scorer, &prev_ids, &[], config, ScfConstraints::forest())?;
    let g_next = learn_cmap_scf(&scorer, &next_ids, &prev_ids, config, ScfConstraints::forest())?;
    Ok((g_prev, g_next))
}

/// Calls `visit` with every structure in the constrained SCF class, as
/// parent sets aligned with `targets`.
pub fn enumerate_structures(
    targets: &[usize],
    cond: &[usize],
    k: usize,
    shape: IntraShape,
    mut visit: impl FnMut(&[ParentSet]),
) -> Result<()> {
    let subsets = inter_subsets(cond, k);
    let n = targets.len();
    let mut current = vec![ParentSet::empty(); n];
    mdsf::enumerate_forests(n, |forest| {
        let roots = forest.iter().filter(|p| p.is_none()).count();
        let allowed = match shape {
            IntraShape::Forest => true,
            IntraShape::Tree => roots == 1,
            IntraShape::Empty => roots == n,
        };
        if !allowed {
            return;
        }
        // odometer over one subset choice per target
        let mut choice = vec![0usize; n];
        loop {
            for i in 0..n {
                current[i] = ParentSet::new(forest[i].map(|j| targets[j]), subsets[choice[i]].clone());
            }
            visit(&current);
            let mut i = n;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                choice[i] += 1;
                if choice[i] < subsets.len() {
                    break;
                }
                choice[i] = 0;
            }
        }
    })
}
