//! Command-line surface and its JSON config-file form.
//!
//! A config file is one JSON object: scalar top-level keys are global flags,
//! and an object under a subcommand's name holds that subcommand's flags, e.g.
//! `{"seed": 7, "train": {"model-type": "gbdt", "trees": 200}}`. File values
//! are spliced into the argument list ahead of the user's own flags, so flags
//! given on the command line win.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use qseg_core::embeddings::Architecture;
use qseg_core::{FeatureMode, ScoreWeight};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Parser, Clone, Debug, PartialEq)]
#[command(name = "qseg", version, about = "Query segmentation from token embeddings")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// JSON file with default flag values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GlobalArgs {
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Maximum worker threads; 1 makes every step deterministic
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,

    /// How the two token vectors at a boundary are combined (training only;
    /// trained models remember theirs)
    #[arg(long, global = true, default_value_t = FeatureMode::Concat)]
    pub feature_mode: FeatureMode,

    /// Break probability at or above which a boundary is a segment break
    #[arg(long, global = true, default_value_t = 0.5)]
    pub threshold: f64,
}

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Aggregate annotations and split into train/validation/test files
    Prepare(PrepareArgs),
    /// Train skip-gram or CBOW vectors on a raw query log
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Count n-grams of a raw query log
    CountNgrams(CountNgramsArgs),
    /// Train a boundary classifier
    Train(TrainArgs),
    /// Segment queries read from standard input
    Segment(SegmentArgs),
    /// Score a segmenter on a labeled test file
    Evaluate(EvaluateArgs),
    /// Generate a synthetic annotated corpus
    Synth(SynthArgs),
    /// Grid search over GBDT depth, tree count and learning rate
    GridSearch(TrainArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Prepare(_) => "prepare",
            Command::TrainEmbeddings(_) => "train-embeddings",
            Command::CountNgrams(_) => "count-ngrams",
            Command::Train(_) => "train",
            Command::Segment(_) => "segment",
            Command::Evaluate(_) => "evaluate",
            Command::Synth(_) => "synth",
            Command::GridSearch(_) => "grid-search",
        }
    }
}

pub const SUBCOMMANDS: [&str; 8] = [
    "prepare",
    "train-embeddings",
    "count-ngrams",
    "train",
    "segment",
    "evaluate",
    "synth",
    "grid-search",
];

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PrepareArgs {
    /// Annotated file (pipe format, one TAB-separated column per annotator)
    #[arg(long)]
    pub input: PathBuf,

    /// Raw query log for embedding training; defaults to the train+val queries.
    /// Test queries are removed either way.
    #[arg(long)]
    pub raw_log: Option<PathBuf>,

    #[arg(long)]
    pub out_dir: PathBuf,

    /// train/val/test fractions
    #[arg(long, default_value = "0.6/0.2/0.2")]
    pub split: String,

    /// Annotators that must agree verbatim; default is a strict majority
    #[arg(long)]
    pub min_agree: Option<usize>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainEmbeddingsArgs {
    /// Raw query log
    #[arg(long)]
    pub input: PathBuf,

    /// Vector file to write (a `.json` sidecar is written next to it)
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = Architecture::Cbow)]
    pub architecture: Architecture,

    #[arg(long, default_value_t = 300)]
    pub dim: usize,

    #[arg(long, default_value_t = 3)]
    pub window: usize,

    /// Negative samples per positive pair
    #[arg(long, default_value_t = 5)]
    pub negative: usize,

    #[arg(long, default_value_t = 5)]
    pub epochs: usize,

    /// Initial learning rate (default 0.05 for cbow, 0.025 for skip-gram)
    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long, default_value_t = 5)]
    pub min_count: u64,

    /// Frequent-token downsampling threshold; 0 disables it
    #[arg(long, default_value_t = 1e-3)]
    pub subsample: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CountNgramsArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = qseg_core::ngram::DEFAULT_MAX_N)]
    pub max_n: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelType {
    Logistic,
    Gbdt,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// Gold-labeled training queries
    #[arg(long)]
    pub train: PathBuf,

    /// Gold-labeled validation queries (required for grid search)
    #[arg(long)]
    pub val: Option<PathBuf>,

    #[arg(long)]
    pub vectors: PathBuf,

    #[arg(long, value_enum, default_value_t = ModelType::Gbdt)]
    pub model_type: ModelType,

    /// Model file to write
    #[arg(long)]
    pub output: PathBuf,

    /// JSON report path; defaults to `<output>.report.json`
    #[arg(long)]
    pub report: Option<PathBuf>,

    /// Select GBDT hyperparameters on the validation set
    #[arg(long)]
    pub grid: bool,

    /// CSV with every grid cell
    #[arg(long)]
    pub grid_csv: Option<PathBuf>,

    #[arg(long, value_delimiter = ',', default_values_t = [4, 6])]
    pub grid_depths: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [500, 800])]
    pub grid_trees: Vec<usize>,

    #[arg(long, value_delimiter = ',', default_values_t = [0.1])]
    pub grid_shrinkage: Vec<f64>,

    #[arg(long, default_value_t = 500)]
    pub trees: usize,

    #[arg(long, default_value_t = 4)]
    pub depth: usize,

    /// GBDT learning rate
    #[arg(long, default_value_t = 0.1)]
    pub shrinkage: f64,

    #[arg(long, default_value_t = 1.0)]
    pub leaf_l2: f64,

    #[arg(long, default_value_t = 1)]
    pub min_samples_leaf: usize,

    #[arg(long, default_value_t = 255)]
    pub max_bins: usize,

    /// Logistic-regression learning rate
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,

    #[arg(long, default_value_t = 1e-4)]
    pub l2: f64,

    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,

    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SegmentArgs {
    /// Boundary model (needs --vectors)
    #[arg(long, conflicts_with = "ngrams", required_unless_present = "ngrams")]
    pub model: Option<PathBuf>,

    #[arg(long, requires = "model")]
    pub vectors: Option<PathBuf>,

    /// N-gram table for the frequency baseline
    #[arg(long)]
    pub ngrams: Option<PathBuf>,

    #[arg(long, default_value_t = ScoreWeight::Pow)]
    pub weight: ScoreWeight,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    AllBreak,
    NoBreak,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
#[command(group(ArgGroup::new("method").required(true).args(["model", "ngrams", "baseline"])))]
pub struct EvaluateArgs {
    /// Gold-labeled test queries
    #[arg(long)]
    pub test: PathBuf,

    #[arg(long, requires = "vectors")]
    pub model: Option<PathBuf>,

    #[arg(long, requires = "model")]
    pub vectors: Option<PathBuf>,

    #[arg(long)]
    pub ngrams: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,

    #[arg(long, default_value_t = ScoreWeight::Pow)]
    pub weight: ScoreWeight,

    /// Method name in the report
    #[arg(long)]
    pub name: Option<String>,

    /// Write the JSON report here
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Print the JSON report instead of the table
    #[arg(long)]
    pub json: bool,

    /// Also report per-query averaged segmentation accuracy
    #[arg(long = "macro")]
    #[serde(rename = "macro")]
    pub macro_average: bool,

    /// Include every query's gold and predicted segmentation
    #[arg(long)]
    pub detail: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,

    #[arg(long, default_value_t = 2000)]
    pub vocab_size: usize,

    #[arg(long, default_value_t = 200)]
    pub phrase_count: usize,

    #[arg(long, default_value_t = 2)]
    pub phrase_min_len: usize,

    #[arg(long, default_value_t = 4)]
    pub phrase_max_len: usize,

    #[arg(long, default_value_t = 1)]
    pub min_segments: usize,

    #[arg(long, default_value_t = 3)]
    pub max_segments: usize,

    #[arg(long, default_value_t = 50_000)]
    pub queries: usize,

    #[arg(long, default_value_t = 1.0)]
    pub zipf: f64,

    /// Fraction of queries with one gold boundary flipped
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,

    /// Probability that a segment is a multi-token phrase
    #[arg(long, default_value_t = 0.3)]
    pub phrase_probability: f64,

    /// Probability that a phrase occurs with shuffled word order
    #[arg(long, default_value_t = 0.1)]
    pub reorder_rate: f64,

    #[arg(long, default_value_t = 2)]
    pub max_phrases_per_token: usize,
}

/// The effective configuration as a config-file document.
pub fn config_document(cli: &Cli) -> Value {
    let mut doc = match serde_json::to_value(&cli.global) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    if let Ok(Value::Object(cmd)) = serde_json::to_value(&cli.command) {
        doc.extend(cmd);
    }
    Value::Object(doc)
}

fn flag_args(section: &Map<String, Value>) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (key, value) in section {
        let text = match value {
            Value::Null | Value::Bool(false) => continue,
            Value::Bool(true) => {
                out.push(format!("--{key}").into());
                continue;
            }
            Value::Number(n) => n.to_string(),
            Value::String(s) => s.clone(),
            Value::Array(items) => {
                let parts: Result<Vec<String>, String> = items
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) => Ok(n.to_string()),
                        Value::String(s) => Ok(s.clone()),
                        _ => Err(format!("config key {key:?}: list items must be numbers or strings")),
                    })
                    .collect();
                parts?.join(",")
            }
            Value::Object(_) => return Err(format!("config key {key:?}: unexpected object")),
        };
        out.push(format!("--{key}={text}").into());
    }
    Ok(out)
}

/// Index of the subcommand name in `argv` (skipping flag values).
fn subcommand_index(argv: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if SUBCOMMANDS.contains(&a.as_ref()) {
            return Some(i);
        }
        if a.starts_with("--") && !a.contains('=') && !matches!(a.as_ref(), "--help" | "--version") {
            i += 1;
        }
        i += 1;
    }
    None
}

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut found = None;
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            found = it.next().map(PathBuf::from);
        } else if let Some(p) = s.strip_prefix("--config=") {
            found = Some(PathBuf::from(p));
        }
    }
    found
}

/// Splices the config document's flags into `argv`: global keys right after
/// the program name, the subcommand's section right after the subcommand.
pub fn merge_config(argv: Vec<OsString>, doc: &Value) -> Result<Vec<OsString>, String> {
    let doc = doc.as_object().ok_or("config file must hold a JSON object")?;
    let Some(sub) = subcommand_index(&argv) else {
        return Ok(argv);
    };
    let name = argv[sub].to_string_lossy().into_owned();
    let globals: Map<String, Value> = doc
        .iter()
        .filter(|(k, v)| !v.is_object() && !SUBCOMMANDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    for (k, v) in doc {
        if v.is_object() && !SUBCOMMANDS.contains(&k.as_str()) {
            return Err(format!("config section {k:?} is not a subcommand"));
        }
    }
    let section = match doc.get(&name) {
        Some(Value::Object(m)) => flag_args(m)?,
        Some(_) => return Err(format!("config key {name:?} must be an object")),
        None => Vec::new(),
    };
    let mut out = vec![argv[0].clone()];
    out.extend(flag_args(&globals)?);
    out.extend(argv[1..=sub].iter().cloned());
    out.extend(section);
    out.extend(argv[sub + 1..].iter().cloned());
    Ok(out)
}

/// Error raised while reading the config file.
#[derive(Debug)]
pub enum ConfigError {
    Read(PathBuf, std::io::Error),
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Read(p, e) => write!(f, "cannot read config {}: {e}", p.display()),
            ConfigError::Invalid(m) => write!(f, "config: {m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// `argv` with the `--config` file's values merged in (unchanged without one).
pub fn expand_argv(argv: Vec<OsString>) -> Result<Vec<OsString>, ConfigError> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| ConfigError::Read(path.clone(), e))?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    merge_config(argv, &doc).map_err(ConfigError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<OsString> {
        s.split_whitespace().map(OsString::from).collect()
    }

    fn parse(s: &str) -> Cli {
        Cli::try_parse_from(argv(s)).unwrap()
    }

    #[test]
    fn config_document_round_trips() {
        for line in [
            "qseg --seed 9 --workers 3 train --train a --vectors v --output m --grid --grid-depths 2,3 --grid-shrinkage 0.3,0.05",
            "qseg --threshold 0.25 evaluate --test t --model m --vectors v --macro --name x",
            "qseg segment --ngrams n --weight freq-only",
            "qseg synth --out-dir d --noise 0.1 --queries 10",
            "qseg --feature-mode average train-embeddings --input i --output o --architecture skip-gram --learning-rate 0.0125",
            "qseg prepare --input a --out-dir d --min-agree 2 --split 0.64/0.16/0.2",
            "qseg count-ngrams --input i --output o --max-n 3",
            "qseg grid-search --train a --val b --vectors v --output m",
        ] {
            let cli = parse(line);
            let doc = config_document(&cli);
            let back = Cli::try_parse_from(merge_config(argv(&format!("qseg {}", cli.command.name())), &doc).unwrap()).unwrap();
            assert_eq!(back, cli, "{line}");
            assert_eq!(config_document(&back), doc);
        }
    }

    #[test]
    fn flags_override_file() {
        let doc = serde_json::json!({"seed": 5, "workers": 2, "count-ngrams": {"max-n": 2, "input": "x"}});
        let merged = merge_config(argv("qseg --seed 7 count-ngrams --output o --max-n 4"), &doc).unwrap();
        let cli = Cli::try_parse_from(merged).unwrap();
        assert_eq!(cli.global.seed, 7);
        assert_eq!(cli.global.workers, 2);
        match cli.command {
            Command::CountNgrams(a) => {
                assert_eq!(a.max_n, 4);
                assert_eq!(a.input, PathBuf::from("x"));
            }
            c => panic!("{c:?}"),
        }
    }

    #[test]
    fn other_sections_are_ignored_and_unknown_keys_rejected() {
        let doc = serde_json::json!({"synth": {"queries": 3}, "count-ngrams": {"max-n": 2}});
        let merged = merge_config(argv("qseg count-ngrams --input i --output o"), &doc).unwrap();
        assert!(Cli::try_parse_from(merged).is_ok());
        let doc = serde_json::json!({"count-ngrams": {"bogus": 2}});
        let merged = merge_config(argv("qseg count-ngrams --input i --output o"), &doc).unwrap();
        assert!(Cli::try_parse_from(merged).is_err());
        assert!(merge_config(argv("qseg segment"), &serde_json::json!({"nope": {}})).is_err());
    }

    #[test]
    fn subcommand_detection_skips_flag_values() {
        assert_eq!(
            subcommand_index(&argv("qseg --config train segment --ngrams n")),
            Some(3)
        );
        assert_eq!(subcommand_index(&argv("qseg --seed=3 synth")), Some(2));
        assert_eq!(subcommand_index(&argv("qseg --help")), None);
    }
}
