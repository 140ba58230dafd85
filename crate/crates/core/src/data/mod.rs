//! Discrete datasets and everything needed to get data into one: CSV
//! ingestion, missing-value filtering, supervised discretization, fold
//! assignment, temporal pairing and synthetic generators.

mod csv;
mod discretize;
mod synth;

pub use self::csv::{
    load_csv, load_sequence_csv, write_csv, write_sequence_csv, Column, ColumnKind, CsvOptions,
    MixedTable, RawTable,
};
pub use self::discretize::{apply_cuts, discretize_entropy_mdl};
pub use self::synth::{
    add_noise_features, synth_dbn_multi, synth_dbn_sequences, synth_weak_features, CptNode, GroundTruthDbn,
    WeakFeatureSpec,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named discrete variable.
///
/// `categories` carries the original category labels when the variable came
/// from text; it is either empty or has exactly `cardinality` entries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            categories: Vec::new(),
        }
    }

    pub fn with_categories(name: impl Into<String>, categories: Vec<String>) -> Self {
        Variable {
            name: name.into(),
            cardinality: categories.len(),
            categories,
        }
    }

    /// Label for category `index`, falling back to the index itself.
    pub fn label(&self, index: usize) -> String {
        self.categories
            .get(index)
            .cloned()
            .unwrap_or_else(|| index.to_string())
    }

    /// Inverse of [`Variable::label`].
    pub fn index_of(&self, label: &str) -> Option<usize> {
        if self.categories.is_empty() {
            label.parse::<usize>().ok().filter(|&i| i < self.cardinality)
        } else {
            self.categories.iter().position(|c| c == label)
        }
    }
}

/// Complete rows of category indices over an ordered variable schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalDataset {
    variables: Vec<Variable>,
    rows: Vec<Vec<usize>>,
}

impl CategoricalDataset {
    pub fn new(variables: Vec<Variable>, rows: Vec<Vec<usize>>) -> Result<Self> {
        validate_schema(&variables)?;
        for (r, row) in rows.iter().enumerate() {
            validate_row(&variables, row).map_err(|m| {
                Error::InvalidDataset(format!("row {r}: {m}"))
            })?;
        }
        Ok(CategoricalDataset { variables, rows })
    }

    pub fn empty(variables: Vec<Variable>) -> Result<Self> {
        Self::new(variables, Vec::new())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: usize) -> &Variable {
        &self.variables[id]
    }

    pub fn cardinality(&self, id: usize) -> usize {
        self.variables[id].cardinality
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn column(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(move |r| r[id])
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn same_schema(&self, other: &CategoricalDataset) -> bool {
        self.variables.len() == other.variables.len()
            && self
                .variables
                .iter()
                .zip(&other.variables)
                .all(|(a, b)| a.name == b.name && a.cardinality == b.cardinality)
    }

    pub fn select_rows(&self, indices: &[usize]) -> CategoricalDataset {
        CategoricalDataset {
            variables: self.variables.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, ids: &[usize]) -> CategoricalDataset {
        CategoricalDataset {
            variables: ids.iter().map(|&i| self.variables[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| ids.iter().map(|&i| r[i]).collect())
                .collect(),
        }
    }

    /// Row-wise concatenation; schemas must match.
    pub fn concat_rows(&self, other: &CategoricalDataset) -> Result<CategoricalDataset> {
        if !self.same_schema(other) {
            return Err(Error::SchemaMismatch(
                "cannot stack datasets with different variables".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(CategoricalDataset {
            variables: self.variables.clone(),
            rows,
        })
    }

    /// Column-wise concatenation; row counts must match.
    pub fn concat_columns(&self, other: &CategoricalDataset) -> Result<CategoricalDataset> {
        if self.n_rows() != other.n_rows() {
            return Err(Error::SchemaMismatch(format!(
                "row counts differ ({} vs {})",
                self.n_rows(),
                other.n_rows()
            )));
        }
        let mut variables = self.variables.clone();
        variables.extend(other.variables.iter().cloned());
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Ok(CategoricalDataset { variables, rows })
    }

    /// Each row repeated `times` times, in block order.
    pub fn replicate(&self, times: usize) -> CategoricalDataset {
        let mut rows = Vec::with_capacity(self.rows.len() * times);
        for _ in 0..times {
            rows.extend(self.rows.iter().cloned());
        }
        CategoricalDataset {
            variables: self.variables.clone(),
            rows,
        }
    }

    pub fn with_row(&self, row: Vec<usize>) -> Result<CategoricalDataset> {
        validate_row(&self.variables, &row).map_err(Error::InvalidDataset)?;
        Ok(CategoricalDataset {
            variables: self.variables.clone(),
            rows: vec![row],
        })
    }

    pub(crate) fn from_parts_unchecked(variables: Vec<Variable>, rows: Vec<Vec<usize>>) -> Self {
        debug_assert!(CategoricalDataset::new(variables.clone(), rows.clone()).is_ok());
        CategoricalDataset { variables, rows }
    }
}

fn validate_schema(variables: &[Variable]) -> Result<()> {
    for v in variables {
        if v.cardinality == 0 {
            return Err(Error::InvalidDataset(format!(
                "variable {} has cardinality 0",
                v.name
            )));
        }
        if !v.categories.is_empty() && v.categories.len() != v.cardinality {
            return Err(Error::InvalidDataset(format!(
                "variable {} lists {} categories for cardinality {}",
                v.name,
                v.categories.len(),
                v.cardinality
            )));
        }
    }
    Ok(())
}

fn validate_row(variables: &[Variable], row: &[usize]) -> std::result::Result<(), String> {
    if row.len() != variables.len() {
        return Err(format!(
            "expected {} entries, found {}",
            variables.len(),
            row.len()
        ));
    }
    for (v, &x) in variables.iter().zip(row) {
        if x >= v.cardinality {
            return Err(format!(
                "value {x} out of range for {} (cardinality {})",
                v.name, v.cardinality
            ));
        }
    }
    Ok(())
}

/// Ordered observations of one variable schema, split into independent
/// sequences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceDataset {
    variables: Vec<Variable>,
    sequences: Vec<Vec<Vec<usize>>>,
}

impl SequenceDataset {
    /// Sequences of any length are accepted here; [`to_transitions`]
    /// rejects the ones too short to contain a transition.
    pub fn new(variables: Vec<Variable>, sequences: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        validate_schema(&variables)?;
        for (s, seq) in sequences.iter().enumerate() {
            for (t, row) in seq.iter().enumerate() {
                validate_row(&variables, row).map_err(|m| {
                    Error::InvalidDataset(format!("sequence {s}, step {t}: {m}"))
                })?;
            }
        }
        Ok(SequenceDataset {
            variables,
            sequences,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn sequences(&self) -> &[Vec<Vec<usize>>] {
        &self.sequences
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.sequences
            .iter()
            .map(|s| s.len().saturating_sub(1))
            .sum()
    }

    pub fn same_schema(&self, other: &SequenceDataset) -> bool {
        self.variables.len() == other.variables.len()
            && self
                .variables
                .iter()
                .zip(&other.variables)
                .all(|(a, b)| a.name == b.name && a.cardinality == b.cardinality)
    }
}

/// Pairs consecutive observations within each sequence.
///
/// Returns `(previous slice, next slice)` with row `r` of each describing the
/// same transition. A sequence of length `L` contributes `L - 1` rows.
pub fn to_transitions(seqs: &SequenceDataset) -> Result<(CategoricalDataset, CategoricalDataset)> {
    if seqs.sequences.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut prev = Vec::new();
    let mut next = Vec::new();
    for (s, seq) in seqs.sequences.iter().enumerate() {
        if seq.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "sequence {s} has length {}; at least 2 steps are needed",
                seq.len()
            )));
        }
        for pair in seq.windows(2) {
            prev.push(pair[0].clone());
            next.push(pair[1].clone());
        }
    }
    Ok((
        CategoricalDataset::from_parts_unchecked(seqs.variables.clone(), prev),
        CategoricalDataset::from_parts_unchecked(seqs.variables.clone(), next),
    ))
}

/// Per-row fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    folds: usize,
    assignment: Vec<usize>,
}

impl FoldSplit {
    pub fn n_folds(&self) -> usize {
        self.folds
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Seeded shuffle followed by round-robin fold assignment.
pub fn kfold_split(n_rows: usize, folds: usize, seed: u64) -> Result<FoldSplit> {
    if folds < 2 {
        return Err(Error::InvalidParameter(format!(
            "fold count must be at least 2, got {folds}"
        )));
    }
    if folds > n_rows {
        return Err(Error::InvalidParameter(format!(
            "fold count {folds} exceeds row count {n_rows}"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; n_rows];
    for (pos, &row) in order.iter().enumerate() {
        assignment[row] = pos % folds;
    }
    Ok(FoldSplit { folds, assignment })
}
