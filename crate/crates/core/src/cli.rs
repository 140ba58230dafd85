//! Command-line front end. Every subcommand validates its numeric flags
//! before touching data, writes outputs through a temporary file renamed on
//! success, and reports failures as one line on stderr.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 data or model error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classify::{
    crossval_accuracy, learn_classifier, penalty_sweep, penalty_sweep_crossval, ClassifierModel, SweepProtocol,
    Variant,
};
use crate::data::{
    add_noise_features, load_sequence_csv, synth_dbn_multi, synth_weak_features, write_csv,
    write_sequence_csv, CategoricalDataset, ColumnKind, GroundTruthDbn, MixedTable, RawTable, Variable,
    WeakFeatureSpec,
};
use crate::dbn::{compare_model_classes, learn_dbn, DbnModel, EvalMode, ModelClass};
use crate::error::Error;
use crate::scoring::ScoreConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Environment variable that, when set, replaces `--seed`.
pub const SEED_ENV: &str = "SCF_SEED";

#[derive(Debug, Parser)]
#[command(name = "scf", version, about = "Selectively conditioned forests for temporal models and classifiers")]
pub struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every random choice. SCF_SEED overrides it when set.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a two-slice temporal model from a sequence CSV.
    LearnDbn(LearnDbnArgs),
    /// Score test sequences under a model, or compare model classes.
    EvalDbn(EvalDbnArgs),
    /// Cross-validate a classifier or sweep the exclusion penalty.
    Classify(ClassifyArgs),
    /// Learn a classifier on a whole CSV and save it.
    LearnClassifier(LearnClassifierArgs),
    /// Render a saved model as a DOT graph.
    ExportDot(ExportDotArgs),
    /// Sample sequences from a random selectively conditioned forest model.
    SynthDbn(SynthDbnArgs),
    /// Sample a weak-feature classification dataset.
    SynthWeak(SynthWeakArgs),
}

#[derive(Debug, Args)]
pub struct LearnDbnArgs {
    /// Sequence CSV whose first column is the sequence id.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Model class: none, intra, inter, scf, bma-scf (or a full form such as scf(2)).
    #[arg(long, default_value = "scf")]
    pub class: String,
    /// Previous-slice parent budget for inter, scf and bma-scf.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// BDeu equivalent sample size.
    #[arg(long, default_value_t = 20.0)]
    pub ess: f64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalDbnArgs {
    /// Model file from learn-dbn (not used with --compare).
    #[arg(long, required_unless_present = "compare")]
    pub model: Option<PathBuf>,
    /// Test sequence CSV.
    #[arg(long)]
    pub test: PathBuf,
    /// Learn and score every model class on --train and --test.
    #[arg(long, requires = "train")]
    pub compare: bool,
    /// Training sequence CSV for --compare.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Comma-separated parent budgets compared with --compare.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub ks: Vec<usize>,
    /// BDeu equivalent sample size for --compare.
    #[arg(long, default_value_t = 20.0)]
    pub ess: f64,
    /// Scoring of structural models: posterior-mean or sequential.
    #[arg(long, default_value = "posterior-mean")]
    pub mode: String,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Input CSV (required unless --synth-weak).
    #[arg(long = "in", required_unless_present = "synth_weak")]
    pub input: Option<PathBuf>,
    /// Name of the class column (default: `class` if present, else the last column).
    #[arg(long)]
    pub class_column: Option<String>,
    /// Classifier: nb, tan, fan, stan, sfan.
    #[arg(long, default_value = "sfan")]
    pub variant: String,
    /// Exclusion penalty for stan and sfan; accepts inf.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// BDeu equivalent sample size.
    #[arg(long, default_value_t = 10.0)]
    pub ess: f64,
    /// Irrelevant binary features to append. With --synth-weak this sets the
    /// generator's noise count instead (default 20).
    #[arg(long)]
    pub noise: Option<usize>,
    /// Sweep sfan over penalties start:end:step instead of one run.
    #[arg(long)]
    pub sweep_alpha: Option<String>,
    /// Use the weak-feature generator instead of an input file.
    #[arg(long)]
    pub synth_weak: bool,
    /// Relevant features for --synth-weak.
    #[arg(long, default_value_t = 10)]
    pub relevant: usize,
    /// Probability that a relevant feature agrees with the class.
    #[arg(long, default_value_t = 0.6)]
    pub agreement: f64,
    /// Rows for --synth-weak (training rows per repeat when sweeping).
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// Test rows per repeat for a synthetic sweep.
    #[arg(long, default_value_t = 100)]
    pub test_rows: usize,
    /// Repeats for a synthetic sweep.
    #[arg(long, default_value_t = 100)]
    pub repeats: usize,
    /// Treat every column as categorical, including numeric codes.
    #[arg(long)]
    pub categorical: bool,
    /// Missing-value marker; rows containing it are dropped.
    #[arg(long, default_value = "?")]
    pub missing: String,
    /// Report file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LearnClassifierArgs {
    /// Input CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Name of the class column (default: `class` if present, else the last column).
    #[arg(long)]
    pub class_column: Option<String>,
    /// Classifier: nb, tan, fan, stan, sfan.
    #[arg(long, default_value = "sfan")]
    pub variant: String,
    /// Exclusion penalty for stan and sfan; accepts inf.
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    /// BDeu equivalent sample size.
    #[arg(long, default_value_t = 10.0)]
    pub ess: f64,
    /// Treat every column as categorical, including numeric codes.
    #[arg(long)]
    pub categorical: bool,
    /// Missing-value marker; rows containing it are dropped.
    #[arg(long, default_value = "?")]
    pub missing: String,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportDotArgs {
    /// Model file from learn-dbn or learn-classifier.
    #[arg(long)]
    pub model: PathBuf,
    /// DOT file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthDbnArgs {
    /// Variables per slice.
    #[arg(long, default_value_t = 8)]
    pub vars: usize,
    /// Categories per variable.
    #[arg(long, default_value_t = 3)]
    pub card: usize,
    /// Previous-slice parents per variable.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Probability that a variable gets an intra-slice parent.
    #[arg(long, default_value_t = 0.8)]
    pub edge_prob: f64,
    /// Dirichlet concentration of the conditional distributions.
    #[arg(long, default_value_t = 5.0)]
    pub concentration: f64,
    /// Time steps per sequence.
    #[arg(long, default_value_t = 501)]
    pub length: usize,
    /// Number of sequences.
    #[arg(long, default_value_t = 1)]
    pub sequences: usize,
    /// Sequence CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthWeakArgs {
    /// Features that agree with the class with probability --agreement.
    #[arg(long, default_value_t = 10)]
    pub relevant: usize,
    /// Uniform binary features independent of the class.
    #[arg(long, default_value_t = 20)]
    pub noise: usize,
    /// Probability that a relevant feature agrees with the class.
    #[arg(long, default_value_t = 0.6)]
    pub agreement: f64,
    /// Rows to sample.
    #[arg(long, default_value_t = 100)]
    pub rows: usize,
    /// Class values; relevant features share this cardinality.
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(Error::Io { .. } | Error::EmptyDataset | Error::InvalidParameter(_)) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_DATA,
        }
    }

    fn message(&self) -> String {
        let msg = match self {
            CliError::Usage(m) => m.clone(),
            CliError::Lib(e) => e.to_string(),
        };
        msg.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Saved model, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "kebab-case")]
pub enum ModelFile {
    Dbn(DbnModel),
    Classifier(ClassifierModel),
}

impl ModelFile {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and structurally validates a model file.
    pub fn from_json(s: &str) -> crate::Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        match &file {
            ModelFile::Dbn(m) => m.validate()?,
            ModelFile::Classifier(m) => m.validate()?,
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}

pub fn execute(mut cli: Cli) -> CliResult<()> {
    if let Ok(s) = std::env::var(SEED_ENV) {
        cli.seed = s
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV} must be a non-negative integer, got {s:?}")))?;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // A global pool may already exist when called twice in one process;
        // the first setting then stays in force.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let seed = cli.seed;
    match cli.command {
        Command::LearnDbn(a) => cmd_learn_dbn(&a),
        Command::EvalDbn(a) => cmd_eval_dbn(&a),
        Command::Classify(a) => cmd_classify(&a, seed),
        Command::LearnClassifier(a) => cmd_learn_classifier(&a),
        Command::ExportDot(a) => cmd_export_dot(&a),
        Command::SynthDbn(a) => cmd_synth_dbn(&a, seed),
        Command::SynthWeak(a) => cmd_synth_weak(&a, seed),
    }
}

/// Writes `bytes` to `path` via a sibling temporary file, or to stdout when
/// no path is given.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let io_err = |path: &Path, source| CliError::Lib(Error::Io {
        path: path.to_path_buf(),
        source,
    });
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| io_err(Path::new("<stdout>"), e))?;
        return Ok(());
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).and_then(|_| tmp.flush()).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn json_bytes(value: &serde_json::Value) -> CliResult<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn check_ess(ess: f64) -> CliResult<()> {
    if ess > 0.0 && ess.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--ess must be positive and finite, got {ess}")))
    }
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha >= 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--alpha must be non-negative, got {alpha}")))
    }
}

fn check_probability(name: &str, p: f64) -> CliResult<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(usage(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Combines a class tag with `--k`. Full forms such as `scf(2)` must agree
/// with `--k` only when they carry a budget.
pub fn parse_class(tag: &str, k: usize) -> CliResult<ModelClass> {
    let t = tag.trim().to_ascii_lowercase();
    let class = match t.as_str() {
        "none" => ModelClass::None,
        "intra" => ModelClass::Intra,
        "inter" => ModelClass::Inter(k),
        "scf" => ModelClass::Scf(k),
        "bma-scf" => ModelClass::BmaScf(k),
        _ => t.parse().map_err(|_| {
            usage(format!("unknown model class {tag:?}; expected one of none, intra, inter, scf, bma-scf"))
        })?,
    };
    Ok(class)
}

fn parse_variant(tag: &str) -> CliResult<Variant> {
    tag.parse().map_err(|e: Error| usage(e.to_string().trim_start_matches("invalid parameter: ").to_string()))
}

fn parse_mode(tag: &str) -> CliResult<EvalMode> {
    match tag.trim() {
        "posterior-mean" => Ok(EvalMode::PosteriorMean),
        "sequential" => Ok(EvalMode::Sequential),
        _ => Err(usage(format!("unknown mode {tag:?}; expected posterior-mean or sequential"))),
    }
}

/// Parses `start:end:step` into the grid `start, start+step, ...` up to
/// `end` inclusive.
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = || usage(format!("--sweep-alpha expects start:end:step, got {spec:?}"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    let [start, end, step] = parts[..] else {
        return Err(bad());
    };
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || start < 0.0 || end < start || step <= 0.0 {
        return Err(usage(format!(
            "--sweep-alpha needs 0 <= start <= end and step > 0, got {spec:?}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    if n > 100_000 {
        return Err(usage("--sweep-alpha grid has too many points"));
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

fn load_sequences_checked(path: &Path, schema: Option<&[Variable]>) -> CliResult<crate::data::SequenceDataset> {
    let data = load_sequence_csv(path, schema)?;
    if data.n_transitions() == 0 {
        return Err(CliError::Lib(Error::EmptyDataset));
    }
    Ok(data)
}

fn describe_parents(names: &[String], ids: &[usize]) -> String {
    if ids.is_empty() {
        "-".to_string()
    } else {
        ids.iter().map(|&p| names[p].as_str()).collect::<Vec<_>>().join(", ")
    }
}

fn joined_names(variables: &[Variable]) -> Vec<String> {
    variables
        .iter()
        .map(|v| format!("{}@prev", v.name))
        .chain(variables.iter().map(|v| v.name.clone()))
        .collect()
}

fn cmd_learn_dbn(a: &LearnDbnArgs) -> CliResult<()> {
    let class = parse_class(&a.class, a.k)?;
    check_ess(a.ess)?;
    let config = ScoreConfig::new(a.ess, 0.0, class.k())?;
    let train = load_sequences_checked(&a.input, None)?;
    if class.k() > train.n_vars() {
        return Err(usage(format!(
            "--k {} exceeds the {} variables per slice",
            class.k(),
            train.n_vars()
        )));
    }
    let model = learn_dbn(&train, class, &config)?;
    let file = ModelFile::Dbn(model);
    let mut text = file.to_json()?;
    text.push('\n');
    write_output(Some(&a.out), text.as_bytes())?;

    let ModelFile::Dbn(model) = &file else { unreachable!() };
    let names = joined_names(&model.variables);
    let mut summary = format!("class {}\n", model.class);
    for (&c, ps) in model.transition.targets.iter().zip(&model.transition.parents) {
        let _ = writeln!(summary, "{} <- {}", names[c], describe_parents(&names, &ps.ids()));
    }
    let _ = writeln!(summary, "training score {}", model.transition.score);
    print!("{summary}");
    Ok(())
}

fn cmd_eval_dbn(a: &EvalDbnArgs) -> CliResult<()> {
    let mode = parse_mode(&a.mode)?;
    check_ess(a.ess)?;
    let report = if a.compare {
        let train_path = a.train.as_deref().ok_or_else(|| usage("--compare needs --train"))?;
        let config = ScoreConfig::new(a.ess, 0.0, 0)?;
        let train = load_sequences_checked(train_path, None)?;
        if let Some(&k) = a.ks.iter().find(|&&k| k > train.n_vars()) {
            return Err(usage(format!("--ks entry {k} exceeds the {} variables per slice", train.n_vars())));
        }
        let test = load_sequences_checked(&a.test, Some(train.variables()))?;
        let rows = compare_model_classes(&train, &test, &a.ks, &config)?;
        json!({
            "kind": "dbn-comparison",
            "ess": a.ess,
            "rows": rows.iter().map(|r| json!({
                "class": r.class.to_string(),
                "avg_logprob": r.report.average,
                "count": r.report.count,
                "total_logprob": r.report.total,
                "train_score": r.train_score,
            })).collect::<Vec<_>>(),
        })
    } else {
        let model_path = a.model.as_deref().ok_or_else(|| usage("--model is required without --compare"))?;
        let ModelFile::Dbn(model) = ModelFile::load(model_path)? else {
            return Err(CliError::Lib(Error::InvalidModel(format!(
                "{} is not a temporal model",
                model_path.display()
            ))));
        };
        let test = load_sequences_checked(&a.test, Some(&model.variables))?;
        let r = model.evaluate(&test, mode)?;
        json!({
            "kind": "dbn-eval",
            "class": r.model,
            "avg_logprob": r.average,
            "count": r.count,
            "total_logprob": r.total,
            "per_variable": r.per_variable,
        })
    };
    write_output(a.out.as_deref(), &json_bytes(&report)?)
}

/// Reads a CSV, drops rows with the missing marker and resolves the class
/// column: the named one, else a column called `class`, else the last. The
/// class column is always categorical; with `all_categorical` so is every
/// other column.
fn load_table(
    path: &Path,
    missing: &str,
    class_column: Option<&str>,
    all_categorical: bool,
) -> CliResult<(MixedTable, usize)> {
    let raw = RawTable::from_path(path)?;
    let (raw, _) = raw.drop_missing(missing)?;
    let class_name = match class_column {
        Some(name) => {
            if !raw.header.iter().any(|h| h == name) {
                return Err(CliError::Lib(Error::SchemaMismatch(format!("no column named {name:?}"))));
            }
            name.to_string()
        }
        None if raw.header.iter().any(|h| h == "class") => "class".to_string(),
        None => raw.header[raw.header.len() - 1].clone(),
    };
    let overrides: BTreeMap<String, ColumnKind> = raw
        .header
        .iter()
        .filter(|h| all_categorical || **h == class_name)
        .map(|h| (h.clone(), ColumnKind::Categorical))
        .collect();
    let table = raw.into_table(&overrides)?;
    let class = table.id_of(&class_name).expect("class column present");
    Ok((table, class))
}

/// Appends `count` uniform binary columns to a table.
fn append_noise(table: &MixedTable, count: usize, seed: u64) -> CliResult<MixedTable> {
    if count == 0 {
        return Ok(table.clone());
    }
    let mut names = table.names().to_vec();
    let base = CategoricalDataset::new(vec![Variable::new("base", 1)], vec![vec![0]; table.n_rows()])?;
    let noisy = add_noise_features(&base, count, seed);
    let ids: Vec<usize> = (1..=count).collect();
    let mut noise = noisy.select_columns(&ids);
    let mut vars = noise.variables().to_vec();
    for v in &mut vars {
        while names.contains(&v.name) {
            v.name.push('_');
        }
        names.push(v.name.clone());
    }
    noise = CategoricalDataset::new(vars, noise.rows().to_vec())?;
    Ok(table.with_categorical_columns(&noise)?)
}

fn weak_spec(a: &ClassifyArgs, n_rows: usize) -> WeakFeatureSpec {
    WeakFeatureSpec {
        n_relevant: a.relevant,
        n_noise: a.noise.unwrap_or(20),
        agreement: a.agreement,
        n_rows,
        n_classes: 2,
    }
}

fn cmd_classify(a: &ClassifyArgs, seed: u64) -> CliResult<()> {
    let variant = parse_variant(&a.variant)?;
    check_ess(a.ess)?;
    check_alpha(a.alpha)?;
    check_probability("--agreement", a.agreement)?;
    let grid = a.sweep_alpha.as_deref().map(parse_grid).transpose()?;
    if a.folds < 2 {
        return Err(usage(format!("--folds must be at least 2, got {}", a.folds)));
    }
    if grid.is_some() && variant != Variant::Sfan {
        return Err(usage("--sweep-alpha sweeps sfan; drop --variant or set it to sfan"));
    }
    if a.synth_weak && (a.relevant == 0 || a.rows == 0) {
        return Err(usage("--relevant and --rows must be positive"));
    }
    let config = ScoreConfig::new(a.ess, a.alpha, 1)?;

    let report = match (&grid, a.synth_weak) {
        (Some(grid), true) => {
            if a.test_rows == 0 || a.repeats == 0 {
                return Err(usage("--test-rows and --repeats must be positive"));
            }
            let protocol = SweepProtocol {
                n_relevant: a.relevant,
                n_noise: a.noise.unwrap_or(20),
                agreement: a.agreement,
                n_train: a.rows,
                n_test: a.test_rows,
                repeats: a.repeats,
                seed,
            };
            let points = penalty_sweep(&protocol, grid, &config)?;
            json!({ "kind": "penalty-sweep", "source": "synthetic", "ess": a.ess, "repeats": a.repeats, "points": points })
        }
        (grid, synth) => {
            let (table, class) = if synth {
                let (d, class) = synth_weak_features(&weak_spec(a, a.rows), seed)?;
                (MixedTable::from(&d), class)
            } else {
                let path = a.input.as_deref().ok_or_else(|| usage("--in is required without --synth-weak"))?;
                let (table, class) = load_table(path, &a.missing, a.class_column.as_deref(), a.categorical)?;
                let table = append_noise(&table, a.noise.unwrap_or(0), seed.wrapping_add(0x9e37))?;
                (table, class)
            };
            if a.folds > table.n_rows() {
                return Err(usage(format!("--folds {} exceeds the {} rows", a.folds, table.n_rows())));
            }
            match grid {
                Some(grid) => {
                    let points = penalty_sweep_crossval(&table, class, grid, a.folds, seed, &config)?;
                    json!({ "kind": "penalty-sweep", "source": "crossval", "ess": a.ess, "folds": a.folds, "points": points })
                }
                None => {
                    let r = crossval_accuracy(&table, class, variant, a.folds, seed, &config)?;
                    let mut v = serde_json::to_value(&r).map_err(Error::from)?;
                    v["kind"] = json!("accuracy");
                    v["ess"] = json!(a.ess);
                    v
                }
            }
        }
    };
    write_output(a.out.as_deref(), &json_bytes(&report)?)
}

fn cmd_learn_classifier(a: &LearnClassifierArgs) -> CliResult<()> {
    let variant = parse_variant(&a.variant)?;
    check_ess(a.ess)?;
    check_alpha(a.alpha)?;
    let config = ScoreConfig::new(a.ess, a.alpha, 1)?;
    let (table, class) = load_table(&a.input, &a.missing, a.class_column.as_deref(), a.categorical)?;
    let all: Vec<usize> = (0..table.n_rows()).collect();
    let data = table.discretize(class, &all)?.apply(&table, &all)?;
    let model = learn_classifier(&data, class, variant, &config)?;
    let mut text = ModelFile::Classifier(model.clone()).to_json()?;
    text.push('\n');
    write_output(Some(&a.out), text.as_bytes())?;

    let names: Vec<String> = model.variables.iter().map(|v| v.name.clone()).collect();
    let mut summary = format!("variant {} alpha {}\n", model.variant, model.alpha);
    for (&f, ps) in model.features.iter().zip(&model.structure.parents) {
        let _ = writeln!(summary, "{} <- {}", names[f], describe_parents(&names, &ps.ids()));
    }
    let _ = writeln!(summary, "training score {}", model.structure.score);
    print!("{summary}");
    Ok(())
}

fn dot_id(name: &str) -> String {
    format!("\"{}\"", name.replace('\\', "\\\\").replace('"', "\\\""))
}

/// DOT rendering of a model. Temporal models show the transition structure
/// with the previous and next slices on two ranks.
pub fn model_to_dot(file: &ModelFile) -> String {
    let mut out = String::new();
    match file {
        ModelFile::Dbn(m) => {
            let names = joined_names(&m.variables);
            let n = m.variables.len();
            let _ = writeln!(out, "digraph dbn {{\n  rankdir=LR;");
            for (rank, ids) in [("prev", 0..n), ("next", n..2 * n)] {
                let _ = writeln!(out, "  subgraph {rank} {{\n    rank=same;");
                for id in ids {
                    let _ = writeln!(out, "    {};", dot_id(&names[id]));
                }
                let _ = writeln!(out, "  }}");
            }
            for (&c, ps) in m.transition.targets.iter().zip(&m.transition.parents) {
                for p in ps.ids() {
                    let _ = writeln!(out, "  {} -> {};", dot_id(&names[p]), dot_id(&names[c]));
                }
            }
        }
        ModelFile::Classifier(m) => {
            let _ = writeln!(out, "digraph classifier {{");
            for v in &m.variables {
                let _ = writeln!(out, "  {};", dot_id(&v.name));
            }
            for (&f, ps) in m.features.iter().zip(&m.structure.parents) {
                for p in ps.ids() {
                    let _ = writeln!(
                        out,
                        "  {} -> {};",
                        dot_id(&m.variables[p].name),
                        dot_id(&m.variables[f].name)
                    );
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

fn cmd_export_dot(a: &ExportDotArgs) -> CliResult<()> {
    let file = ModelFile::load(&a.model)?;
    write_output(a.out.as_deref(), model_to_dot(&file).as_bytes())
}

fn cmd_synth_dbn(a: &SynthDbnArgs, seed: u64) -> CliResult<()> {
    if a.vars == 0 || a.card < 2 {
        return Err(usage("--vars must be positive and --card at least 2"));
    }
    if a.k > a.vars {
        return Err(usage(format!("--k {} exceeds --vars {}", a.k, a.vars)));
    }
    check_probability("--edge-prob", a.edge_prob)?;
    if !(a.concentration > 0.0 && a.concentration.is_finite()) {
        return Err(usage("--concentration must be positive and finite"));
    }
    if a.length < 2 || a.sequences == 0 {
        return Err(usage("--length must be at least 2 and --sequences positive"));
    }
    let gt = GroundTruthDbn::random_scf(a.vars, a.card, a.k, a.edge_prob, a.concentration, seed)?;
    let data = synth_dbn_multi(&gt, &vec![a.length; a.sequences], seed.wrapping_add(1))?;
    let mut buf = Vec::new();
    write_sequence_csv(&data, &mut buf)?;
    write_output(Some(&a.out), &buf)
}

fn cmd_synth_weak(a: &SynthWeakArgs, seed: u64) -> CliResult<()> {
    check_probability("--agreement", a.agreement)?;
    if a.rows == 0 || a.relevant + a.noise == 0 || a.classes < 2 {
        return Err(usage("--rows and the feature count must be positive, --classes at least 2"));
    }
    let spec = WeakFeatureSpec {
        n_relevant: a.relevant,
        n_noise: a.noise,
        agreement: a.agreement,
        n_rows: a.rows,
        n_classes: a.classes,
    };
    let (data, _) = synth_weak_features(&spec, seed)?;
    let mut buf = Vec::new();
    write_csv(&data, &mut buf)?;
    write_output(Some(&a.out), &buf)
}
