use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::data::discretize::{apply_cuts, discretize_entropy_mdl};
use crate::data::{CategoricalDataset, SequenceDataset, Variable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Cell value marking a missing observation.
    pub sentinel: String,
    /// Per-column type overrides, keyed by header name.
    pub overrides: BTreeMap<String, ColumnKind>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            sentinel: "?".to_string(),
            overrides: BTreeMap::new(),
        }
    }
}

/// Untyped CSV contents: a header plus rectangular string records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl RawTable {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(csv_error)?
            .iter()
            .map(str::to_string)
            .collect();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyDataset);
        }
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            if rec.len() != header.len() {
                let line = rec.position().map_or(0, |p| p.line());
                return Err(Error::Parse {
                    line,
                    message: format!(
                        "row has {} fields but the header has {}",
                        rec.len(),
                        header.len()
                    ),
                });
            }
            records.push(rec.iter().map(str::to_string).collect());
        }
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(RawTable { header, records })
    }

    /// Removes every record containing `sentinel` in any cell and reports how
    /// many were removed.
    pub fn drop_missing(&self, sentinel: &str) -> Result<(RawTable, usize)> {
        let records: Vec<Vec<String>> = self
            .records
            .iter()
            .filter(|r| !r.iter().any(|c| c == sentinel))
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let removed = self.records.len() - records.len();
        Ok((
            RawTable {
                header: self.header.clone(),
                records,
            },
            removed,
        ))
    }

    /// Types each column. A column whose every cell parses as a finite
    /// number is continuous unless overridden; everything else is
    /// categorical with lexicographically sorted categories.
    pub fn into_table(self, overrides: &BTreeMap<String, ColumnKind>) -> Result<MixedTable> {
        let mut columns = Vec::with_capacity(self.header.len());
        for (c, name) in self.header.iter().enumerate() {
            let cells: Vec<&str> = self.records.iter().map(|r| r[c].as_str()).collect();
            let numeric: Option<Vec<f64>> = cells
                .iter()
                .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect();
            let kind = overrides.get(name).copied().unwrap_or(if numeric.is_some() {
                ColumnKind::Continuous
            } else {
                ColumnKind::Categorical
            });
            let column = match kind {
                ColumnKind::Continuous => match numeric {
                    Some(values) => Column::Continuous(values),
                    None => {
                        return Err(Error::InvalidDataset(format!(
                            "column {name} was declared continuous but has non-numeric cells"
                        )))
                    }
                },
                ColumnKind::Categorical => categorical_column(&cells).0,
            };
            columns.push(column);
        }
        Ok(MixedTable {
            names: self.header,
            columns,
        })
    }
}

fn categorical_column(cells: &[&str]) -> (Column, Vec<String>) {
    let categories: Vec<String> = cells
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();
    let index: HashMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let codes = cells.iter().map(|c| index[c]).collect();
    (
        Column::Categorical {
            categories: categories.clone(),
            codes,
        },
        categories,
    )
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Categorical {
        categories: Vec<String>,
        codes: Vec<usize>,
    },
    /// Awaiting discretization.
    Continuous(Vec<f64>),
}

impl Column {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Column::Categorical { .. } => ColumnKind::Categorical,
            Column::Continuous(_) => ColumnKind::Continuous,
        }
    }

    fn len(&self) -> usize {
        match self {
            Column::Categorical { codes, .. } => codes.len(),
            Column::Continuous(v) => v.len(),
        }
    }
}

/// Typed columns, some of which may still be continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedTable {
    names: Vec<String>,
    columns: Vec<Column>,
}

impl MixedTable {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::InvalidDataset("name/column count mismatch".into()));
        }
        let n = columns.first().map_or(0, Column::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidDataset("columns differ in length".into()));
        }
        Ok(MixedTable { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn has_continuous(&self) -> bool {
        self.columns
            .iter()
            .any(|c| c.kind() == ColumnKind::Continuous)
    }

    /// Converts a table with no continuous columns.
    pub fn to_categorical(&self) -> Result<CategoricalDataset> {
        if let Some(c) = self
            .columns
            .iter()
            .position(|c| c.kind() == ColumnKind::Continuous)
        {
            return Err(Error::InvalidDataset(format!(
                "column {} is continuous and must be discretized first",
                self.names[c]
            )));
        }
        let rows: Vec<usize> = (0..self.n_rows()).collect();
        self.discretize(usize::MAX, &rows).map(|d| d.apply(self, &rows))?
    }

    /// Fits entropy/MDL cut points for every continuous column using only
    /// `fit_rows`, with `class` as the supervising label column.
    pub fn discretize(&self, class: usize, fit_rows: &[usize]) -> Result<Discretization> {
        let mut cuts = Vec::with_capacity(self.columns.len());
        let labels: Option<&[usize]> = match self.columns.get(class) {
            Some(Column::Categorical { codes, .. }) => Some(codes),
            Some(Column::Continuous(_)) => {
                return Err(Error::InvalidDataset(format!(
                    "class column {} must be categorical",
                    self.names[class]
                )))
            }
            None => None,
        };
        for column in &self.columns {
            cuts.push(match column {
                Column::Categorical { .. } => None,
                Column::Continuous(values) => {
                    let labels = labels.ok_or_else(|| {
                        Error::InvalidDataset("continuous columns need a class column".into())
                    })?;
                    let v: Vec<f64> = fit_rows.iter().map(|&r| values[r]).collect();
                    let l: Vec<usize> = fit_rows.iter().map(|&r| labels[r]).collect();
                    Some(discretize_entropy_mdl(&v, &l))
                }
            });
        }
        Ok(Discretization { cuts })
    }

    pub fn select_rows(&self, rows: &[usize]) -> MixedTable {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Categorical { categories, codes } => Column::Categorical {
                    categories: categories.clone(),
                    codes: rows.iter().map(|&r| codes[r]).collect(),
                },
                Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
            })
            .collect();
        MixedTable {
            names: self.names.clone(),
            columns,
        }
    }

    /// Appends categorical columns taken from `extra` (row counts must
    /// match).
    pub fn with_categorical_columns(&self, extra: &CategoricalDataset) -> Result<MixedTable> {
        if extra.n_rows() != self.n_rows() {
            return Err(Error::SchemaMismatch("row counts differ".into()));
        }
        let mut out = self.clone();
        for (id, var) in extra.variables().iter().enumerate() {
            out.names.push(var.name.clone());
            out.columns.push(Column::Categorical {
                categories: (0..var.cardinality).map(|i| var.label(i)).collect(),
                codes: extra.column(id).collect(),
            });
        }
        Ok(out)
    }
}

impl From<&CategoricalDataset> for MixedTable {
    fn from(d: &CategoricalDataset) -> Self {
        let columns = d
            .variables()
            .iter()
            .enumerate()
            .map(|(id, v)| Column::Categorical {
                categories: (0..v.cardinality).map(|i| v.label(i)).collect(),
                codes: d.column(id).collect(),
            })
            .collect();
        MixedTable {
            names: d.variables().iter().map(|v| v.name.clone()).collect(),
            columns,
        }
    }
}

/// Cut points fitted on some rows, reusable on any rows of the same table.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    /// `None` for categorical columns.
    pub cuts: Vec<Option<Vec<f64>>>,
}

impl Discretization {
    pub fn apply(&self, table: &MixedTable, rows: &[usize]) -> Result<CategoricalDataset> {
        let mut variables = Vec::with_capacity(table.columns.len());
        let mut columns: Vec<Vec<usize>> = Vec::with_capacity(table.columns.len());
        for ((name, column), cuts) in table.names.iter().zip(&table.columns).zip(&self.cuts) {
            match (column, cuts) {
                (Column::Categorical { categories, codes }, _) => {
                    variables.push(Variable::with_categories(name.clone(), categories.clone()));
                    columns.push(rows.iter().map(|&r| codes[r]).collect());
                }
                (Column::Continuous(values), Some(cuts)) => {
                    variables.push(Variable::with_categories(name.clone(), bin_labels(cuts)));
                    columns.push(rows.iter().map(|&r| apply_cuts(cuts, values[r])).collect());
                }
                (Column::Continuous(_), None) => {
                    return Err(Error::InvalidDataset(format!(
                        "no cut points fitted for column {name}"
                    )))
                }
            }
        }
        let rows = (0..rows.len())
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        CategoricalDataset::new(variables, rows)
    }
}

fn bin_labels(cuts: &[f64]) -> Vec<String> {
    let mut labels = Vec::with_capacity(cuts.len() + 1);
    let mut lower = "-inf".to_string();
    for c in cuts {
        labels.push(format!("({lower},{c}]"));
        lower = c.to_string();
    }
    labels.push(format!("({lower},inf)"));
    labels
}

/// Reads a CSV into typed columns. Missing-value rows are not dropped here;
/// see [`RawTable::drop_missing`].
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<MixedTable> {
    RawTable::from_path(path)?.into_table(&options.overrides)
}

/// Reads sequences from a CSV whose first column is a sequence id. All other
/// columns are categorical. With `schema` given, labels are mapped through
/// it and unknown labels are a schema mismatch; otherwise categories are
/// collected from the file and sorted.
pub fn load_sequence_csv(
    path: impl AsRef<Path>,
    schema: Option<&[Variable]>,
) -> Result<SequenceDataset> {
    sequences_from_raw(RawTable::from_path(path)?, schema)
}

pub(crate) fn sequences_from_raw(
    raw: RawTable,
    schema: Option<&[Variable]>,
) -> Result<SequenceDataset> {
    if raw.header.len() < 2 {
        return Err(Error::InvalidDataset(
            "sequence csv needs a seq_id column and at least one variable".into(),
        ));
    }
    let names = &raw.header[1..];
    let variables: Vec<Variable> = match schema {
        Some(schema) => {
            if schema.len() != names.len() || schema.iter().zip(names).any(|(v, n)| &v.name != n)
            {
                return Err(Error::SchemaMismatch(format!(
                    "expected columns {:?}, found {:?}",
                    schema.iter().map(|v| &v.name).collect::<Vec<_>>(),
                    names
                )));
            }
            schema.to_vec()
        }
        None => (0..names.len())
            .map(|c| {
                let cells: Vec<&str> = raw.records.iter().map(|r| r[c + 1].as_str()).collect();
                Variable::with_categories(names[c].clone(), categorical_column(&cells).1)
            })
            .collect(),
    };

    let mut order: Vec<String> = Vec::new();
    let mut by_id: HashMap<String, Vec<Vec<usize>>> = HashMap::new();
    for rec in &raw.records {
        let mut row = Vec::with_capacity(variables.len());
        for (v, cell) in variables.iter().zip(&rec[1..]) {
            row.push(v.index_of(cell).ok_or_else(|| {
                Error::SchemaMismatch(format!("unknown category {cell:?} for {}", v.name))
            })?);
        }
        by_id
            .entry(rec[0].clone())
            .or_insert_with(|| {
                order.push(rec[0].clone());
                Vec::new()
            })
            .push(row);
    }
    let sequences = order
        .into_iter()
        .map(|id| by_id.remove(&id).unwrap_or_default())
        .collect();
    SequenceDataset::new(variables, sequences)
}

pub fn write_csv<W: Write>(data: &CategoricalDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(data.variables().iter().map(|v| v.name.as_str()))
        .map_err(csv_error)?;
    for row in data.rows() {
        w.write_record(
            row.iter()
                .zip(data.variables())
                .map(|(&x, v)| v.label(x)),
        )
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| csv_error(e.into()))?;
    Ok(())
}

pub fn write_sequence_csv<W: Write>(data: &SequenceDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["seq_id".to_string()];
    header.extend(data.variables().iter().map(|v| v.name.clone()));
    w.write_record(&header).map_err(csv_error)?;
    for (s, seq) in data.sequences().iter().enumerate() {
        for row in seq {
            let mut rec = vec![s.to_string()];
            rec.extend(row.iter().zip(data.variables()).map(|(&x, v)| v.label(x)));
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    w.flush().map_err(|e| csv_error(e.into()))?;
    Ok(())
}
