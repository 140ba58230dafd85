//! Bayesian model averaging over selectively conditioned forests.
//!
//! Summing over condition-parent subsets collapses each (child, intra parent)
//! pair into one edge weight. The sum over intra forests of the product of
//! edge and root weights is then the determinant of a reduced Laplacian
//! (matrix tree theorem with an extra root vertex), so marginal likelihoods
//! averaged over the whole class cost one determinant each.

use rayon::prelude::*;

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::scf::{inter_subsets, learn_cmap_scf, ParentSet, ScfConstraints, ScfStructure};
use crate::scoring::{structure_log_prior, ScoreConfig, Scorer};

/// Pivots below this magnitude (after column scaling) count as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Log weights whose directions differ by less than this are treated as a
/// symmetric pair by [`resolve_direction_conditioning`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Log-domain edge and root weights over `n` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightMatrix {
    n: usize,
    /// `log_w[i * n + j]`: target `i` as intra parent of target `j`.
    log_w: Vec<f64>,
    log_root: Vec<f64>,
}

impl LogWeightMatrix {
    /// All weights zero (`-inf`).
    pub fn new(n: usize) -> Self {
        LogWeightMatrix {
            n,
            log_w: vec![f64::NEG_INFINITY; n * n],
            log_root: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn from_fn(n: usize, root: impl Fn(usize) -> f64, edge: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = LogWeightMatrix::new(n);
        for j in 0..n {
            m.log_root[j] = root(j);
            for i in (0..n).filter(|&i| i != j) {
                m.log_w[i * n + j] = edge(i, j);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn log_w(&self, i: usize, j: usize) -> f64 {
        if i == j {
            f64::NEG_INFINITY
        } else {
            self.log_w[i * self.n + j]
        }
    }

    pub fn log_root(&self, j: usize) -> f64 {
        self.log_root[j]
    }

    pub fn set_log_w(&mut self, i: usize, j: usize, v: f64) {
        assert_ne!(i, j, "self edge");
        self.log_w[i * self.n + j] = v;
    }

    pub fn set_log_root(&mut self, j: usize, v: f64) {
        self.log_root[j] = v;
    }

    /// Largest log weight entering column `j`.
    pub fn column_scale(&self, j: usize) -> f64 {
        (0..self.n)
            .map(|i| self.log_w(i, j))
            .fold(self.log_root[j], f64::max)
    }

    /// Adds `c` to every weight entering column `j`.
    pub fn shift_column(&mut self, j: usize, c: f64) {
        self.log_root[j] += c;
        for i in (0..self.n).filter(|&i| i != j) {
            self.log_w[i * self.n + j] += c;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmaResult {
    /// Log of the summed weight over every forest.
    pub log_partition: f64,
    pub log_predictive: Option<f64>,
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Weight terms of one (child, intra option) pair before summation.
#[derive(Debug, Clone)]
struct Cell {
    parents: Vec<ParentSet>,
    /// Training local score plus log prior, aligned with `parents`.
    base: Vec<f64>,
}

/// Per-cell subset terms for a fixed training set. Building weight matrices
/// for many queries reuses the training scores.
#[derive(Debug)]
pub struct WeightTerms<'s, 'a> {
    scorer: &'s Scorer<'a>,
    targets: Vec<usize>,
    cond: Vec<usize>,
    config: ScoreConfig,
    /// `cells[j][0]` no intra parent, `cells[j][i + 1]` parent target `i`.
    cells: Vec<Vec<Cell>>,
}

impl<'s, 'a> WeightTerms<'s, 'a> {
    pub fn new(scorer: &'s Scorer<'a>, targets: &[usize], cond: &[usize], config: &ScoreConfig) -> Result<Self> {
        config.validate()?;
        if scorer.ess() != config.ess {
            return Err(Error::InvalidParameter(format!(
                "scorer ess {} differs from config ess {}",
                scorer.ess(),
                config.ess
            )));
        }
        let n_vars = scorer.data().n_vars();
        if let Some(&v) = targets.iter().chain(cond).find(|&&v| v >= n_vars) {
            return Err(Error::InvalidParameter(format!("variable id {v} out of range")));
        }
        if let Some(v) = targets.iter().find(|t| cond.contains(t)) {
            return Err(Error::InvalidParameter(format!(
                "variable {v} is in both the target and condition sets"
            )));
        }
        let subsets = inter_subsets(cond, config.k);
        let n = targets.len();
        let cells = (0..n)
            .into_par_iter()
            .map(|j| {
                (0..=n)
                    .map(|col| {
                        let intra = col.checked_sub(1);
                        if intra == Some(j) {
                            return Ok(Cell {
                                parents: Vec::new(),
                                base: Vec::new(),
                            });
                        }
                        let mut parents = Vec::with_capacity(subsets.len());
                        let mut base = Vec::with_capacity(subsets.len());
                        for s in &subsets {
                            let ps = ParentSet::new(intra.map(|i| targets[i]), s.clone());
                            let prior = structure_log_prior(&ps, cond, config)?;
                            if prior == f64::NEG_INFINITY {
                                continue;
                            }
                            base.push(scorer.local_score(targets[j], &ps)? + prior);
                            parents.push(ps);
                        }
                        Ok(Cell { parents, base })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(WeightTerms {
            scorer,
            targets: targets.to_vec(),
            cond: cond.to_vec(),
            config: *config,
            cells,
        })
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    fn assemble(&self, delta: impl Fn(usize, &ParentSet) -> Result<f64> + Sync) -> Result<LogWeightMatrix> {
        let n = self.targets.len();
        let columns = (0..n)
            .into_par_iter()
            .map(|j| {
                self.cells[j]
                    .iter()
                    .map(|cell| {
                        let terms = cell
                            .parents
                            .iter()
                            .zip(&cell.base)
                            .map(|(ps, b)| Ok(b + delta(self.targets[j], ps)?))
                            .collect::<Result<Vec<f64>>>()?;
                        Ok(log_sum_exp(terms))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LogWeightMatrix::from_fn(n, |j| columns[j][0], |i, j| columns[j][i + 1]))
    }

    /// Weights from the training data alone.
    pub fn train_matrix(&self) -> Result<LogWeightMatrix> {
        self.assemble(|_, _| Ok(0.0))
    }

    /// Weights from training plus query data.
    pub fn query_matrix(&self, query: &CategoricalDataset) -> Result<LogWeightMatrix> {
        if !self.scorer.data().same_schema(query) {
            return Err(Error::SchemaMismatch("query schema differs from training data".into()));
        }
        self.assemble(|child, ps| self.scorer.predictive(child, ps, query))
    }

    /// Weights from training data plus one extra row.
    pub fn row_matrix(&self, row: &[usize]) -> Result<LogWeightMatrix> {
        let data = self.scorer.data();
        if row.len() != data.n_vars() || row.iter().enumerate().any(|(v, &x)| x >= data.cardinality(v)) {
            return Err(Error::SchemaMismatch(format!("query row {row:?} does not fit the schema")));
        }
        self.assemble(|child, ps| self.scorer.predictive_row(child, ps, row))
    }

    /// MAP structure for the same sets, used to break symmetric weights.
    pub fn map_structure(&self) -> Result<ScfStructure> {
        learn_cmap_scf(self.scorer, &self.targets, &self.cond, &self.config, ScfConstraints::forest())
    }
}

/// Weight matrix over `targets` given `cond`, from `train` alone or from
/// `train` plus `query`.
pub fn build_weight_matrix(
    scorer: &Scorer<'_>,
    targets: &[usize],
    cond: &[usize],
    query: Option<&CategoricalDataset>,
    config: &ScoreConfig,
) -> Result<LogWeightMatrix> {
    let terms = WeightTerms::new(scorer, targets, cond, config)?;
    match query {
        None => terms.train_matrix(),
        Some(q) => terms.query_matrix(q),
    }
}

/// Log of the sum over all rooted forests of the product of chosen weights.
pub fn forest_partition(w: &LogWeightMatrix) -> Result<BmaResult> {
    let n = w.n;
    let mut scale = Vec::with_capacity(n);
    for j in 0..n {
        let m = w.column_scale(j);
        if m == f64::NEG_INFINITY {
            return Err(Error::Infeasible { vertex: j });
        }
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!("non-finite weight in column {j}")));
        }
        scale.push(m);
    }
    // column j divided by exp(scale[j]); edge[i * n + j] is the off-diagonal
    // magnitude of the reduced Laplacian and excess[j] its column sum
    let mut edge = vec![0.0; n * n];
    let mut excess = vec![0.0; n];
    for j in 0..n {
        excess[j] = (w.log_root[j] - scale[j]).exp();
        for i in (0..n).filter(|&i| i != j) {
            edge[i * n + j] = (w.log_w(i, j) - scale[j]).exp();
        }
    }
    let log_det = log_det_laplacian(&mut edge, &mut excess, n)?;
    Ok(BmaResult {
        log_partition: log_det + scale.iter().sum::<f64>(),
        log_predictive: None,
    })
}

/// Log determinant of the reduced Laplacian `diag(excess + in-weight) - edge`
/// by symmetric Gaussian elimination. Diagonals are rebuilt from the
/// nonnegative off-diagonal weights and column excess at every step, so no
/// subtraction ever occurs; this keeps full relative accuracy when root
/// weights are tiny next to edge weights. Remaining columns are rescaled to
/// a largest entry of 1 before each step, so a pivot only falls below the
/// threshold when its column has vanished. The largest remaining diagonal is
/// eliminated first.
fn log_det_laplacian(edge: &mut [f64], excess: &mut [f64], n: usize) -> Result<f64> {
    let mut active: Vec<usize> = (0..n).collect();
    let mut log_det = 0.0;
    while !active.is_empty() {
        for &j in &active {
            let m = active
                .iter()
                .filter(|&&i| i != j)
                .map(|&i| edge[i * n + j])
                .fold(excess[j], f64::max);
            if m > 0.0 && m != 1.0 {
                excess[j] /= m;
                for &i in active.iter().filter(|&&i| i != j) {
                    edge[i * n + j] /= m;
                }
                log_det += m.ln();
            }
        }
        let diag = |k: usize, edge: &[f64]| {
            excess[k] + active.iter().filter(|&&i| i != k).map(|&i| edge[i * n + k]).sum::<f64>()
        };
        let mut best = 0;
        let mut pivot = diag(active[0], edge);
        for (pos, &k) in active.iter().enumerate().skip(1) {
            let d = diag(k, edge);
            if d > pivot {
                best = pos;
                pivot = d;
            }
        }
        let k = active.remove(best);
        if pivot.is_nan() || pivot < SINGULAR_THRESHOLD || pivot.is_infinite() {
            return Err(Error::Singular {
                column: k,
                pivot,
                threshold: SINGULAR_THRESHOLD,
            });
        }
        log_det += pivot.ln();
        for &j in &active {
            let f = edge[k * n + j] / pivot;
            if f == 0.0 {
                continue;
            }
            excess[j] += excess[k] * f;
            for &i in &active {
                if i != j {
                    edge[i * n + j] += edge[i * n + k] * f;
                }
            }
        }
    }
    Ok(log_det)
}

/// For every pair whose two directions carry (nearly) equal log weight,
/// removes the direction the MAP structure does not use. Pairs the MAP
/// structure leaves unconnected keep the lower-to-higher direction.
/// `map` must describe the same targets as `w`, in the same order.
pub fn resolve_direction_conditioning(w: &LogWeightMatrix, map: &ScfStructure) -> LogWeightMatrix {
    let n = w.n;
    let pos = |id: usize| map.targets.iter().position(|&t| t == id);
    let mut map_edge = vec![false; n * n];
    for (p, c) in map.intra_edges() {
        if let (Some(p), Some(c)) = (pos(p), pos(c)) {
            map_edge[p * n + c] = true;
        }
    }
    let mut out = w.clone();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (w.log_w(i, j), w.log_w(j, i));
            if !(a.is_finite() && b.is_finite()) || (a - b).abs() >= SYMMETRY_TOLERANCE {
                continue;
            }
            if map_edge[j * n + i] {
                out.set_log_w(i, j, f64::NEG_INFINITY);
            } else {
                out.set_log_w(j, i, f64::NEG_INFINITY);
            }
        }
    }
    out
}

/// Averaged predictive state for a fixed training set.
#[derive(Debug)]
pub struct BmaPosterior<'s, 'a> {
    terms: WeightTerms<'s, 'a>,
    train: LogWeightMatrix,
    log_z: f64,
    /// Set once the training matrix needed the direction heuristic.
    map: Option<ScfStructure>,
}

impl<'s, 'a> BmaPosterior<'s, 'a> {
    pub fn new(scorer: &'s Scorer<'a>, targets: &[usize], cond: &[usize], config: &ScoreConfig) -> Result<Self> {
        let terms = WeightTerms::new(scorer, targets, cond, config)?;
        let train = terms.train_matrix()?;
        let (log_z, map) = match forest_partition(&train) {
            Ok(r) => (r.log_partition, None),
            Err(Error::Singular { .. }) => {
                let map = terms.map_structure()?;
                let fixed = resolve_direction_conditioning(&train, &map);
                (forest_partition(&fixed)?.log_partition, Some(map))
            }
            Err(e) => return Err(e),
        };
        Ok(BmaPosterior { terms, train, log_z, map })
    }

    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// True once the direction heuristic replaced the exact computation.
    pub fn used_direction_heuristic(&self) -> bool {
        self.map.is_some()
    }

    fn ratio(&mut self, joint: LogWeightMatrix) -> Result<f64> {
        if let Some(map) = &self.map {
            let fixed = resolve_direction_conditioning(&joint, map);
            return Ok(forest_partition(&fixed)?.log_partition - self.log_z);
        }
        match forest_partition(&joint) {
            Ok(r) => Ok(r.log_partition - self.log_z),
            Err(Error::Singular { .. }) => {
                let map = self.terms.map_structure()?;
                self.log_z = forest_partition(&resolve_direction_conditioning(&self.train, &map))?.log_partition;
                let fixed = resolve_direction_conditioning(&joint, &map);
                self.map = Some(map);
                Ok(forest_partition(&fixed)?.log_partition - self.log_z)
            }
            Err(e) => Err(e),
        }
    }

    /// Log predictive probability of all query rows jointly.
    pub fn log_predictive(&mut self, query: &CategoricalDataset) -> Result<f64> {
        if query.is_empty() {
            return Ok(0.0);
        }
        let joint = self.terms.query_matrix(query)?;
        self.ratio(joint)
    }

    /// Log predictive probability of one row's target values given its
    /// condition values.
    pub fn log_predictive_row(&mut self, row: &[usize]) -> Result<f64> {
        let joint = self.terms.row_matrix(row)?;
        self.ratio(joint)
    }
}

/// `log P(query targets | query conditions, train)` averaged over every SCF
/// structure.
pub fn bma_log_predictive(
    scorer: &Scorer<'_>,
    targets: &[usize],
    cond: &[usize],
    query: &CategoricalDataset,
    config: &ScoreConfig,
) -> Result<f64> {
    if !scorer.data().same_schema(query) {
        return Err(Error::SchemaMismatch("query schema differs from training data".into()));
    }
    BmaPosterior::new(scorer, targets, cond, config)?.log_predictive(query)
}
