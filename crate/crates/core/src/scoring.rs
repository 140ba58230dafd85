//! Dirichlet-multinomial family scores.
//!
//! A family is one child together with its parent set. Its score is the log
//! marginal likelihood of the child's column given the parent columns under
//! a BDeu parameter prior, plus a log structure prior that is zero except for
//! the optional penalty on parent sets that leave out designated condition
//! variables.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::CategoricalDataset;
use crate::error::{Error, Result};
use crate::scf::ParentSet;

/// Counts `N[j][k]` of child value `k` under parent configuration `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficientStats {
    r: usize,
    q: usize,
    counts: Vec<u64>,
    row_sums: Vec<u64>,
}

impl SufficientStats {
    pub fn zeros(r: usize, q: usize) -> Self {
        SufficientStats {
            r,
            q,
            counts: vec![0; r * q],
            row_sums: vec![0; q],
        }
    }

    /// Builds from an explicit `q x r` table.
    pub fn from_table(table: &[Vec<u64>]) -> Result<Self> {
        let q = table.len();
        let r = table.first().map_or(0, Vec::len);
        if q == 0 || r == 0 || table.iter().any(|row| row.len() != r) {
            return Err(Error::InvalidParameter("count table must be a non-empty rectangle".into()));
        }
        let counts: Vec<u64> = table.iter().flatten().copied().collect();
        let row_sums = table.iter().map(|row| row.iter().sum()).collect();
        Ok(SufficientStats {
            r,
            q,
            counts,
            row_sums,
        })
    }

    pub fn child_cardinality(&self) -> usize {
        self.r
    }

    pub fn n_configs(&self) -> usize {
        self.q
    }

    pub fn count(&self, config: usize, value: usize) -> u64 {
        self.counts[config * self.r + value]
    }

    pub fn config_total(&self, config: usize) -> u64 {
        self.row_sums[config]
    }

    pub fn total(&self) -> u64 {
        self.row_sums.iter().sum()
    }

    pub fn table(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.r).map(<[u64]>::to_vec).collect()
    }

    pub fn increment(&mut self, config: usize, value: usize) {
        self.counts[config * self.r + value] += 1;
        self.row_sums[config] += 1;
    }

    fn check_shape(&self, other: &SufficientStats) -> Result<()> {
        if self.r != other.r || self.q != other.q {
            return Err(Error::SchemaMismatch(format!(
                "count tables differ in shape ({}x{} vs {}x{})",
                self.q, self.r, other.q, other.r
            )));
        }
        Ok(())
    }

    pub fn combined(&self, other: &SufficientStats) -> Result<SufficientStats> {
        self.check_shape(other)?;
        Ok(SufficientStats {
            r: self.r,
            q: self.q,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
            row_sums: self.row_sums.iter().zip(&other.row_sums).map(|(a, b)| a + b).collect(),
        })
    }

    /// Posterior-mean probability of `value` under configuration `config`.
    pub fn posterior_mean(&self, config: usize, value: usize, ess: f64) -> f64 {
        let a_jk = ess / (self.q * self.r) as f64;
        let a_j = ess / self.q as f64;
        (self.count(config, value) as f64 + a_jk) / (self.config_total(config) as f64 + a_j)
    }
}

/// Mixed-radix configuration index of `row` over `parents` (first parent
/// most significant).
pub fn parent_config(data: &CategoricalDataset, parents: &[usize], row: &[usize]) -> usize {
    parents
        .iter()
        .fold(0, |acc, &p| acc * data.cardinality(p) + row[p])
}

/// Tallies the child column against the parent configurations.
pub fn count_stats(data: &CategoricalDataset, child: usize, parents: &[usize]) -> Result<SufficientStats> {
    let n = data.n_vars();
    if child >= n {
        return Err(Error::InvalidParameter(format!("child id {child} out of range")));
    }
    for (i, &p) in parents.iter().enumerate() {
        if p >= n {
            return Err(Error::InvalidParentSet {
                child,
                reason: format!("parent id {p} out of range"),
            });
        }
        if p == child {
            return Err(Error::InvalidParentSet {
                child,
                reason: "variable listed as its own parent".into(),
            });
        }
        if parents[..i].contains(&p) {
            return Err(Error::InvalidParentSet {
                child,
                reason: format!("parent {p} listed twice"),
            });
        }
    }
    let q = parents.iter().map(|&p| data.cardinality(p)).product();
    let mut stats = SufficientStats::zeros(data.cardinality(child), q);
    for row in data.rows() {
        stats.increment(parent_config(data, parents, row), row[child]);
    }
    Ok(stats)
}

/// BDeu log marginal likelihood of the counted data.
///
/// `sum_j [lnG(a_j) - lnG(a_j + N_j) + sum_k (lnG(a_jk + N_jk) - lnG(a_jk))]`
/// with `a_jk = ess / (q r)` and `a_j = ess / q`.
pub fn local_score_bdeu(stats: &SufficientStats, ess: f64) -> f64 {
    let a_j = ess / stats.q as f64;
    let a_jk = a_j / stats.r as f64;
    let ln_a_j = ln_gamma(a_j);
    let ln_a_jk = ln_gamma(a_jk);
    let mut score = 0.0;
    for j in 0..stats.q {
        let n_j = stats.row_sums[j];
        if n_j == 0 {
            continue;
        }
        score += ln_a_j - ln_gamma(a_j + n_j as f64);
        for &n_jk in &stats.counts[j * stats.r..(j + 1) * stats.r] {
            if n_jk > 0 {
                score += ln_gamma(a_jk + n_jk as f64) - ln_a_jk;
            }
        }
    }
    score
}

/// Log probability of the `test` counts under the Dirichlet posterior given
/// the `train` counts: `LS(train + test) - LS(train)`. Configurations absent
/// from `test` cancel and are skipped.
pub fn posterior_predictive_score(
    train: &SufficientStats,
    test: &SufficientStats,
    ess: f64,
) -> Result<f64> {
    train.check_shape(test)?;
    let a_j = ess / train.q as f64;
    let a_jk = a_j / train.r as f64;
    let mut score = 0.0;
    for j in 0..train.q {
        let t_j = test.row_sums[j];
        if t_j == 0 {
            continue;
        }
        let base_j = a_j + train.row_sums[j] as f64;
        score += ln_gamma(base_j) - ln_gamma(base_j + t_j as f64);
        for k in 0..train.r {
            let t_jk = test.count(j, k);
            if t_jk > 0 {
                let base_jk = a_jk + train.count(j, k) as f64;
                score += ln_gamma(base_jk + t_jk as f64) - ln_gamma(base_jk);
            }
        }
    }
    Ok(score)
}

/// Hyperparameters shared by structure learning and averaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// BDeu equivalent sample size.
    pub ess: f64,
    /// Log-prior penalty for a parent set that omits a designated condition
    /// variable. `f64::INFINITY` forbids such sets.
    pub alpha: f64,
    /// Maximum number of condition-set parents per child.
    pub k: usize,
}

impl ScoreConfig {
    pub fn new(ess: f64, alpha: f64, k: usize) -> Result<Self> {
        let cfg = ScoreConfig { ess, alpha, k };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for temporal models: ess 20, no penalty.
    pub fn dbn(k: usize) -> Self {
        ScoreConfig {
            ess: 20.0,
            alpha: 0.0,
            k,
        }
    }

    /// Defaults for classifiers: ess 10, one condition parent (the class).
    pub fn classification(alpha: f64) -> Self {
        ScoreConfig {
            ess: 10.0,
            alpha,
            k: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ess > 0.0 && self.ess.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "equivalent sample size must be positive and finite, got {}",
                self.ess
            )));
        }
        if self.alpha.is_nan() || self.alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "exclusion penalty must be non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Log structure prior of one parent set.
///
/// The base prior is uniform and left unnormalized (0). When `alpha > 0`, a
/// parent set missing any of the `designated` variables is charged `-alpha`
/// (`-inf` for an infinite penalty).
pub fn structure_log_prior(parents: &ParentSet, designated: &[usize], config: &ScoreConfig) -> Result<f64> {
    if parents.inter().len() > config.k {
        return Err(Error::InvalidParameter(format!(
            "parent set has {} condition parents, limit is {}",
            parents.inter().len(),
            config.k
        )));
    }
    if config.alpha == 0.0 || designated.is_empty() {
        return Ok(0.0);
    }
    let excluded = designated.iter().any(|d| !parents.inter().contains(d));
    Ok(if excluded { -config.alpha } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct FamilyKey {
    child: usize,
    intra: Option<usize>,
    inter: Vec<usize>,
}

/// Counts and BDeu score of one family on a fixed dataset.
#[derive(Debug, Clone)]
pub struct Family {
    pub parents: Vec<usize>,
    pub stats: SufficientStats,
    pub score: f64,
}

/// Concurrent memo table of family statistics, keyed by child and canonical
/// parent set.
#[derive(Debug, Default)]
pub struct ScoreCache {
    map: RwLock<HashMap<FamilyKey, Arc<Family>>>,
}

impl ScoreCache {
    pub fn len(&self) -> usize {
        self.map.read().expect("score cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Family scorer bound to one dataset and equivalent sample size.
#[derive(Debug)]
pub struct Scorer<'a> {
    data: &'a CategoricalDataset,
    ess: f64,
    cache: ScoreCache,
}

impl<'a> Scorer<'a> {
    pub fn new(data: &'a CategoricalDataset, ess: f64) -> Self {
        Scorer {
            data,
            ess,
            cache: ScoreCache::default(),
        }
    }

    pub fn data(&self) -> &'a CategoricalDataset {
        self.data
    }

    pub fn ess(&self) -> f64 {
        self.ess
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    pub fn family(&self, child: usize, parents: &ParentSet) -> Result<Arc<Family>> {
        let key = FamilyKey {
            child,
            intra: parents.intra(),
            inter: parents.inter().to_vec(),
        };
        if let Some(f) = self.cache.map.read().expect("score cache poisoned").get(&key) {
            return Ok(Arc::clone(f));
        }
        let ids = parents.ids();
        let stats = count_stats(self.data, child, &ids)?;
        let score = local_score_bdeu(&stats, self.ess);
        let family = Arc::new(Family {
            parents: ids,
            stats,
            score,
        });
        let mut map = self.cache.map.write().expect("score cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(family)))
    }

    pub fn local_score(&self, child: usize, parents: &ParentSet) -> Result<f64> {
        Ok(self.family(child, parents)?.score)
    }

    /// `LS(train + query) - LS(train)` for one family; `query` must share the
    /// scorer's schema.
    pub fn predictive(&self, child: usize, parents: &ParentSet, query: &CategoricalDataset) -> Result<f64> {
        if !self.data.same_schema(query) {
            return Err(Error::SchemaMismatch("query schema differs from training data".into()));
        }
        let family = self.family(child, parents)?;
        let test = count_stats(query, child, &family.parents)?;
        posterior_predictive_score(&family.stats, &test, self.ess)
    }

    /// Predictive log probability of a single row, using the posterior-mean
    /// shortcut `ln((N_jk + a_jk) / (N_j + a_j))`.
    pub fn predictive_row(&self, child: usize, parents: &ParentSet, row: &[usize]) -> Result<f64> {
        let family = self.family(child, parents)?;
        let config = parent_config(self.data, &family.parents, row);
        Ok(family.stats.posterior_mean(config, row[child], self.ess).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Variable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(cards: &[usize], rows: Vec<Vec<usize>>) -> CategoricalDataset {
        let vars = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| Variable::new(format!("v{i}"), c))
            .collect();
        CategoricalDataset::new(vars, rows).unwrap()
    }

    /// Sequential Polya-urn predictive product, one observation at a time.
    fn polya_oracle(data: &CategoricalDataset, child: usize, parents: &[usize], ess: f64) -> f64 {
        let r = data.cardinality(child);
        let q: usize = parents.iter().map(|&p| data.cardinality(p)).product();
        let a_jk = ess / (q * r) as f64;
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        let mut seen_j: HashMap<usize, f64> = HashMap::new();
        let mut logp = 0.0;
        for row in data.rows() {
            let mut j = 0;
            for &p in parents {
                j = j * data.cardinality(p) + row[p];
            }
            let k = row[child];
            let njk = seen.get(&(j, k)).copied().unwrap_or(0.0);
            let nj = seen_j.get(&j).copied().unwrap_or(0.0);
            logp += ((njk + a_jk) / (nj + a_jk * r as f64)).ln();
            *seen.entry((j, k)).or_default() += 1.0;
            *seen_j.entry(j).or_default() += 1.0;
        }
        logp
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n_vars: usize, max_rows: usize) -> CategoricalDataset {
        let cards: Vec<usize> = (0..n_vars).map(|_| rng.random_range(1..=3)).collect();
        let n = rng.random_range(0..=max_rows);
        let rows = (0..n)
            .map(|_| cards.iter().map(|&c| rng.random_range(0..c)).collect())
            .collect();
        dataset(&cards, rows)
    }

    #[test]
    fn count_stats_mixed_radix() {
        let d = dataset(&[2, 2], vec![vec![0, 1], vec![1, 1], vec![0, 0]]);
        let s = count_stats(&d, 0, &[1]).unwrap();
        assert_eq!(s.table(), vec![vec![1, 0], vec![1, 1]]);

        let marg = count_stats(&d, 0, &[]).unwrap();
        assert_eq!(marg.n_configs(), 1);
        assert_eq!(marg.table(), vec![vec![2, 1]]);

        let e = dataset(&[2, 3], vec![]);
        assert_eq!(count_stats(&e, 0, &[1]).unwrap().total(), 0);
    }

    #[test]
    fn count_stats_rejects_bad_parents() {
        let d = dataset(&[2, 2, 2], vec![vec![0, 1, 0]]);
        assert!(count_stats(&d, 0, &[0]).is_err());
        assert!(count_stats(&d, 0, &[1, 1]).is_err());
        assert!(count_stats(&d, 0, &[5]).is_err());
    }

    #[test]
    fn bdeu_empty_data_is_zero() {
        let d = dataset(&[3, 2], vec![]);
        let s = count_stats(&d, 0, &[1]).unwrap();
        assert_eq!(local_score_bdeu(&s, 7.0), 0.0);
    }

    #[test]
    fn bdeu_three_observation_fixture() {
        let d = dataset(&[2], vec![vec![1], vec![1], vec![0]]);
        let s = count_stats(&d, 0, &[]).unwrap();
        // (0.5/1)(1.5/2)(0.5/3) = 1/16
        assert!((local_score_bdeu(&s, 1.0) - (1.0f64 / 16.0).ln()).abs() < 1e-10);
        assert!((polya_oracle(&d, 0, &[], 1.0) - (1.0f64 / 16.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn bdeu_matches_polya_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let d = random_dataset(&mut rng, 3, 25);
            let ess = rng.random_range(0.1..20.0);
            let parents: Vec<usize> = match rng.random_range(0..3) {
                0 => vec![],
                1 => vec![1],
                _ => vec![2, 1],
            };
            let s = count_stats(&d, 0, &parents).unwrap();
            let got = local_score_bdeu(&s, ess);
            let want = polya_oracle(&d, 0, &parents, ess);
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn predictive_identity_and_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let train = random_dataset(&mut rng, 3, 20);
            let rows: Vec<Vec<usize>> = (0..rng.random_range(0..8))
                .map(|_| {
                    (0..3)
                        .map(|v| rng.random_range(0..train.cardinality(v)))
                        .collect()
                })
                .collect();
            let test = CategoricalDataset::new(train.variables().to_vec(), rows).unwrap();
            let ess = 2.5;
            let tr = count_stats(&train, 0, &[1, 2]).unwrap();
            let te = count_stats(&test, 0, &[1, 2]).unwrap();
            let combined = count_stats(&train.concat_rows(&test).unwrap(), 0, &[1, 2]).unwrap();
            let lhs = posterior_predictive_score(&tr, &te, ess).unwrap();
            let rhs = local_score_bdeu(&combined, ess) - local_score_bdeu(&tr, ess);
            assert!((lhs - rhs).abs() < 1e-10);

            let empty = SufficientStats::zeros(tr.child_cardinality(), tr.n_configs());
            assert_eq!(posterior_predictive_score(&tr, &empty, ess).unwrap(), 0.0);
            let from_prior = posterior_predictive_score(&empty, &te, ess).unwrap();
            assert!((from_prior - local_score_bdeu(&te, ess)).abs() < 1e-10);
        }
        let a = SufficientStats::zeros(2, 1);
        let b = SufficientStats::zeros(3, 1);
        assert!(posterior_predictive_score(&a, &b, 1.0).is_err());
    }

    #[test]
    fn predictive_chain_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..30 {
            let all = random_dataset(&mut rng, 2, 30);
            if all.n_rows() < 3 {
                continue;
            }
            let n = all.n_rows();
            let a = n / 3;
            let b = 2 * n / 3;
            let idx = |r: std::ops::Range<usize>| all.select_rows(&r.collect::<Vec<_>>());
            let (train, t1, t2) = (idx(0..a), idx(a..b), idx(b..n));
            let st = |d: &CategoricalDataset| count_stats(d, 0, &[1]).unwrap();
            let ess = 4.0;
            let joint = posterior_predictive_score(&st(&train), &st(&t1).combined(&st(&t2)).unwrap(), ess).unwrap();
            let first = posterior_predictive_score(&st(&train), &st(&t1), ess).unwrap();
            let second = posterior_predictive_score(&st(&train).combined(&st(&t1)).unwrap(), &st(&t2), ess).unwrap();
            assert!((joint - first - second).abs() < 1e-10);
        }
    }

    #[test]
    fn vacuous_parent_and_row_order_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut d = random_dataset(&mut rng, 2, 30);
            // append a cardinality-1 column
            let mut vars = d.variables().to_vec();
            vars.push(Variable::new("unit", 1));
            let rows = d.rows().iter().map(|r| {
                let mut r = r.clone();
                r.push(0);
                r
            });
            d = CategoricalDataset::new(vars, rows.collect()).unwrap();
            let base = local_score_bdeu(&count_stats(&d, 0, &[1]).unwrap(), 3.0);
            let vac = local_score_bdeu(&count_stats(&d, 0, &[1, 2]).unwrap(), 3.0);
            assert!((base - vac).abs() < 1e-12);

            let mut order: Vec<usize> = (0..d.n_rows()).collect();
            order.reverse();
            let rev = d.select_rows(&order);
            let s = local_score_bdeu(&count_stats(&rev, 0, &[1]).unwrap(), 3.0);
            assert_eq!(s, base);
        }
    }

    #[test]
    fn exclusion_penalty() {
        let with_class = ParentSet::new(None, vec![9]);
        let without = ParentSet::new(Some(2), vec![]);
        let cfg = |alpha| ScoreConfig { ess: 1.0, alpha, k: 1 };
        assert_eq!(structure_log_prior(&without, &[9], &cfg(0.0)).unwrap(), 0.0);
        assert_eq!(structure_log_prior(&without, &[9], &cfg(3.0)).unwrap(), -3.0);
        assert_eq!(structure_log_prior(&with_class, &[9], &cfg(3.0)).unwrap(), 0.0);
        assert_eq!(
            structure_log_prior(&without, &[9], &cfg(f64::INFINITY)).unwrap(),
            f64::NEG_INFINITY
        );
        let too_many = ParentSet::new(None, vec![7, 9]);
        assert!(structure_log_prior(&too_many, &[9], &cfg(0.0)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ScoreConfig::new(0.0, 0.0, 1).is_err());
        assert!(ScoreConfig::new(1.0, -1.0, 1).is_err());
        assert!(ScoreConfig::new(1.0, f64::INFINITY, 1).is_ok());
    }

    #[test]
    fn cached_scores_are_bit_identical_across_threads() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = random_dataset(&mut rng, 4, 40);
        let scorer = Scorer::new(&d, 5.0);
        let ps = ParentSet::new(Some(1), vec![2, 3]);
        let fresh = local_score_bdeu(&count_stats(&d, 0, &ps.ids()).unwrap(), 5.0);
        let values: Vec<f64> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..8)
                .map(|_| s.spawn(|| scorer.local_score(0, &ps).unwrap()))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        assert!(values.iter().all(|v| v.to_bits() == fresh.to_bits()));
        assert_eq!(scorer.cache().len(), 1);
    }

    #[test]
    fn single_row_predictive_matches_general_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_dataset(&mut rng, 3, 30);
        let scorer = Scorer::new(&d, 2.0);
        let ps = ParentSet::new(Some(2), vec![1]);
        let row: Vec<usize> = (0..3).map(|v| rng.random_range(0..d.cardinality(v))).collect();
        let q = d.with_row(row.clone()).unwrap();
        let a = scorer.predictive(0, &ps, &q).unwrap();
        let b = scorer.predictive_row(0, &ps, &row).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
