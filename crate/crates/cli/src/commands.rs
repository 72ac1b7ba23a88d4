use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use qseg_core::corpus::{
    aggregate_corpus, agreement_histogram, exclude_queries, format_pipe, read_annotated, read_raw_log, split_corpus,
    tokenize, write_gold, write_raw_log,
};
use qseg_core::embeddings::{load_vectors, train_embeddings, EmbedTrainConfig};
use qseg_core::eval::{evaluate, render_table, AllBreak, EvalOptions, NoBreak};
use qseg_core::ngram::{count_ngrams_parallel, NaiveSegmenter};
use qseg_core::segmenter::{
    check_threshold, grid_search, load_model, save_model, train_gbdt, train_logistic, write_grid_csv, BoundaryModel,
    Dataset, EmbeddingSegmenter, GbdtConfig, GridSearchSpec, LogisticConfig, ModelFile,
};
use qseg_core::synth::{generate_corpus, SynthConfig};
use qseg_core::{AnnotatedQuery, EmbeddingTable64, EvalReport, NGramTable, Segmenter, SplitSpec};
use serde_json::{json, Value};

use crate::args::{
    Baseline, Cli, Command, CountNgramsArgs, EvaluateArgs, GlobalArgs, ModelType, PrepareArgs, SegmentArgs, SynthArgs,
    TrainArgs, TrainEmbeddingsArgs,
};
use crate::UsageError;

pub fn run(cli: &Cli) -> Result<()> {
    let doc = crate::args::config_document(cli);
    let g = &cli.global;
    if g.workers == 0 {
        return Err(UsageError("--workers must be at least 1".into()).into());
    }
    check_threshold(g.threshold)?;
    match &cli.command {
        Command::Prepare(a) => prepare(g, a, &doc),
        Command::TrainEmbeddings(a) => train_embeddings_cmd(g, a),
        Command::CountNgrams(a) => count_ngrams_cmd(g, a, &doc),
        Command::Train(a) => train(g, a, a.grid, &doc),
        Command::GridSearch(a) => train(g, a, true, &doc),
        Command::Segment(a) => segment(g, a),
        Command::Evaluate(a) => evaluate_cmd(g, a, &doc),
        Command::Synth(a) => synth(g, a, &doc),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(UsageError(format!("cannot read {}: not a file", path.display())).into())
    }
}

fn require_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(UsageError(format!(
            "cannot write {}: directory {} does not exist",
            path.display(),
            dir.display()
        ))
        .into()),
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Reads a single-column gold file.
fn read_gold(path: &Path) -> Result<Vec<AnnotatedQuery>> {
    let queries = read_annotated(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if let Some(i) = queries.iter().position(|q| q.gold.is_none()) {
        bail!(qseg_core::Error::ConfigInvalid(format!(
            "{}: query {} has several annotation columns; run `prepare` first",
            path.display(),
            i + 1
        )));
    }
    Ok(queries)
}

fn prepare(g: &GlobalArgs, a: &PrepareArgs, doc: &Value) -> Result<()> {
    require_file(&a.input)?;
    if let Some(raw) = &a.raw_log {
        require_file(raw)?;
    }
    let mut spec: SplitSpec = a.split.parse()?;
    spec.seed = g.seed;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;

    let queries = read_annotated(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    if queries.is_empty() {
        return Err(
            anyhow::Error::new(qseg_core::Error::EmptyQuery).context(format!("{} holds no queries", a.input.display()))
        );
    }
    let histogram = agreement_histogram(&queries)?;
    let annotators = queries[0].annotations.len();
    let min_agree = a.min_agree.unwrap_or(annotators / 2 + 1);
    let n_input = queries.len();
    let kept = aggregate_corpus(queries, min_agree)?;
    let split = split_corpus(&kept, &spec)?;

    let dir = &a.out_dir;
    for (name, part) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        let mut w = create(&dir.join(format!("{name}.txt")))?;
        write_gold(&mut w, part)?;
        w.flush()?;
    }
    let test_queries: Vec<_> = split.test.iter().map(|q| q.query.clone()).collect();
    // Test queries never reach embedding training, even when they repeat
    // elsewhere in the log.
    let log = match &a.raw_log {
        Some(raw) => read_raw_log(open(raw)?).with_context(|| format!("reading {}", raw.display()))?,
        None => split.train.iter().chain(&split.val).map(|q| q.query.clone()).collect(),
    };
    let embed_log = exclude_queries(log, &test_queries);
    let mut w = create(&dir.join("embed.txt"))?;
    write_raw_log(&mut w, &embed_log)?;
    w.flush()?;

    write_json(
        &dir.join("prepare.json"),
        &json!({
            "config": doc,
            "seed": g.seed,
            "split": spec,
            "annotators": annotators,
            "min_agree": min_agree,
            "agreement_histogram": histogram,
            "input_queries": n_input,
            "kept_queries": kept.len(),
            "train": split.train.len(),
            "val": split.val.len(),
            "test": split.test.len(),
            "embedding_queries": embed_log.len(),
        }),
    )?;
    eprintln!(
        "kept {} of {n_input} queries (min agree {min_agree}); train {} / val {} / test {}; {} embedding queries",
        kept.len(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        embed_log.len()
    );
    Ok(())
}

fn train_embeddings_cmd(g: &GlobalArgs, a: &TrainEmbeddingsArgs) -> Result<()> {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    let mut cfg = EmbedTrainConfig::new(a.architecture);
    cfg.dimension = a.dim;
    cfg.window = a.window;
    cfg.negative_samples = a.negative;
    cfg.epochs = a.epochs;
    if let Some(lr) = a.learning_rate {
        cfg.initial_learning_rate = lr;
    }
    cfg.min_count = a.min_count;
    cfg.subsample_threshold = a.subsample;
    cfg.seed = g.seed;
    cfg.workers = g.workers;
    cfg.validate()?;

    let log = read_raw_log(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    let trained = train_embeddings::<f64>(&log, &cfg)?;
    for (epoch, loss) in trained.epoch_losses.iter().enumerate() {
        eprintln!("epoch {}: loss {loss:.4}", epoch + 1);
    }
    let mut table = trained.table;
    table.drop_output();
    table.save(&a.output, Some(&cfg))?;
    eprintln!("{} vectors of dimension {}", table.len(), table.dimension());
    Ok(())
}

fn count_ngrams_cmd(g: &GlobalArgs, a: &CountNgramsArgs, doc: &Value) -> Result<()> {
    require_file(&a.input)?;
    require_parent(&a.output)?;
    let log = read_raw_log(open(&a.input)?).with_context(|| format!("reading {}", a.input.display()))?;
    let table = count_ngrams_parallel(&log, a.max_n, g.workers)?;
    let mut w = create(&a.output)?;
    table.write_tsv(&mut w, &format!("config={}", Value::to_string(doc)))?;
    w.flush()?;
    eprintln!("{} distinct n-grams from {} queries", table.len(), log.len());
    Ok(())
}

fn report_for(
    name: &str,
    queries: &[AnnotatedQuery],
    table: &EmbeddingTable64,
    model: &BoundaryModel<f64>,
    g: &GlobalArgs,
) -> Result<EvalReport> {
    let seg = EmbeddingSegmenter::new(table, model, g.feature_mode, g.threshold)?;
    Ok(evaluate(name, &seg, queries, EvalOptions::default())?)
}

fn train(g: &GlobalArgs, a: &TrainArgs, grid: bool, doc: &Value) -> Result<()> {
    require_file(&a.train)?;
    require_file(&a.vectors)?;
    if let Some(val) = &a.val {
        require_file(val)?;
    }
    require_parent(&a.output)?;
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&a.output, ".report.json"));
    require_parent(&report_path)?;
    if grid && a.model_type != ModelType::Gbdt {
        return Err(UsageError("grid search only applies to --model-type gbdt".into()).into());
    }
    if grid && a.val.is_none() {
        return Err(UsageError("grid search needs --val".into()).into());
    }

    let table: EmbeddingTable64 =
        load_vectors(&a.vectors).with_context(|| format!("loading {}", a.vectors.display()))?;
    let train_q = read_gold(&a.train)?;
    let val_q = a.val.as_deref().map(read_gold).transpose()?;
    let ds_train = Dataset::from_queries(&train_q, &table, g.feature_mode)?;
    ds_train.require_both_classes()?;

    let base = GbdtConfig {
        n_estimators: a.trees,
        max_depth: a.depth,
        shrinkage: a.shrinkage,
        leaf_l2: a.leaf_l2,
        min_samples_leaf: a.min_samples_leaf,
        max_bins: a.max_bins,
        seed: g.seed,
        workers: g.workers,
    };
    let mut grid_best = Value::Null;
    let model = if grid {
        let val_q = val_q.as_deref().expect("checked above");
        let ds_val = Dataset::from_queries(val_q, &table, g.feature_mode)?;
        let spec = GridSearchSpec {
            depth_candidates: a.grid_depths.clone(),
            estimator_candidates: a.grid_trees.clone(),
            lr_candidates: a.grid_shrinkage.clone(),
        };
        let result = grid_search(&spec, &base, &ds_train, &ds_val, g.workers)?;
        let csv = a
            .grid_csv
            .clone()
            .unwrap_or_else(|| with_suffix(&a.output, ".grid.csv"));
        let mut w = create(&csv)?;
        write_grid_csv(&mut w, &result.cells)?;
        w.flush()?;
        eprintln!(
            "best: depth {} trees {} shrinkage {} (val segmentation accuracy {:.4})",
            result.best.max_depth,
            result.best.n_estimators,
            result.best.shrinkage,
            result.best.val_segmentation_accuracy
        );
        grid_best = serde_json::to_value(&result.best)?;
        BoundaryModel::Gbdt(result.model)
    } else {
        match a.model_type {
            ModelType::Gbdt => {
                base.validate()?;
                BoundaryModel::Gbdt(train_gbdt(&ds_train, &base)?)
            }
            ModelType::Logistic => {
                let cfg = LogisticConfig {
                    learning_rate: a.learning_rate,
                    l2: a.l2,
                    batch_size: a.batch_size,
                    epochs: a.epochs,
                    seed: g.seed,
                };
                cfg.validate()?;
                BoundaryModel::Logistic(train_logistic(&ds_train, &cfg)?)
            }
        }
    };

    let name = model.kind();
    let train_report = report_for(name, &train_q, &table, &model, g)?;
    let val_report = val_q
        .as_deref()
        .map(|v| report_for(name, v, &table, &model, g))
        .transpose()?;
    let report = json!({
        "config": doc,
        "seed": g.seed,
        "model": name,
        "train": train_report,
        "val": val_report,
        "grid_best": grid_best,
    });
    let file = ModelFile {
        model,
        feature_mode: g.feature_mode,
        embedding_dimension: table.dimension(),
        metadata: report.clone(),
    };
    save_model(&a.output, &file)?;
    write_json(&report_path, &report)?;
    let mut reports = vec![train_report];
    reports.extend(val_report);
    for (r, split) in reports.iter_mut().zip(["train", "val"]) {
        r.method = format!("{name} ({split})");
    }
    eprint!("{}", render_table(&reports));
    Ok(())
}

struct LoadedModel {
    table: EmbeddingTable64,
    file: ModelFile<f64>,
}

fn load_embedding_model(model: &Path, vectors: Option<&Path>) -> Result<LoadedModel> {
    require_file(model)?;
    let vectors = vectors.ok_or_else(|| UsageError("--model needs --vectors".into()))?;
    require_file(vectors)?;
    let file: ModelFile<f64> = load_model(model).with_context(|| format!("loading {}", model.display()))?;
    let table: EmbeddingTable64 = load_vectors(vectors).with_context(|| format!("loading {}", vectors.display()))?;
    if table.dimension() != file.embedding_dimension {
        bail!(qseg_core::Error::DimensionMismatch {
            line: 1,
            expected: file.embedding_dimension,
            found: table.dimension(),
        });
    }
    Ok(LoadedModel { table, file })
}

fn load_ngrams(path: &Path) -> Result<NGramTable> {
    require_file(path)?;
    NGramTable::read_tsv(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn segment(g: &GlobalArgs, a: &SegmentArgs) -> Result<()> {
    let loaded;
    let ngrams;
    let segmenter: Box<dyn Segmenter> = match (&a.model, &a.ngrams) {
        (Some(model), _) => {
            loaded = load_embedding_model(model, a.vectors.as_deref())?;
            let m = &loaded.file;
            Box::new(EmbeddingSegmenter::new(
                &loaded.table,
                &m.model,
                m.feature_mode,
                g.threshold,
            )?)
        }
        (None, Some(path)) => {
            ngrams = load_ngrams(path)?;
            Box::new(NaiveSegmenter {
                table: &ngrams,
                weight: a.weight,
            })
        }
        (None, None) => return Err(UsageError("need --model or --ngrams".into()).into()),
    };

    let stdin = io::stdin().lock();
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, line) in stdin.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            writeln!(out, "{line}")?;
            continue;
        }
        let q = tokenize(&line)?;
        let seg = segmenter.segment(&q).with_context(|| format!("input line {}", i + 1))?;
        writeln!(out, "{}", format_pipe(&q, &seg)?)?;
    }
    out.flush()?;
    Ok(())
}

fn evaluate_cmd(g: &GlobalArgs, a: &EvaluateArgs, doc: &Value) -> Result<()> {
    require_file(&a.test)?;
    if let Some(out) = &a.output {
        require_parent(out)?;
    }
    let options = EvalOptions {
        macro_average: a.macro_average,
        per_query_detail: a.detail,
    };
    let test = read_gold(&a.test)?;
    let report = if let Some(model) = &a.model {
        let loaded = load_embedding_model(model, a.vectors.as_deref())?;
        let m = &loaded.file;
        let seg = EmbeddingSegmenter::new(&loaded.table, &m.model, m.feature_mode, g.threshold)?;
        let name = a
            .name
            .clone()
            .unwrap_or_else(|| format!("embedding + {}", m.model.kind()));
        evaluate(&name, &seg, &test, options)?
    } else if let Some(path) = &a.ngrams {
        let table = load_ngrams(path)?;
        let seg = NaiveSegmenter {
            table: &table,
            weight: a.weight,
        };
        let name = a.name.clone().unwrap_or_else(|| "naive n-gram".to_string());
        evaluate(&name, &seg, &test, options)?
    } else {
        let (seg, default): (&dyn Segmenter, &str) = match a.baseline {
            Some(Baseline::AllBreak) => (&AllBreak, "all-break"),
            Some(Baseline::NoBreak) => (&NoBreak, "no-break"),
            None => return Err(UsageError("need --model, --ngrams or --baseline".into()).into()),
        };
        evaluate(a.name.as_deref().unwrap_or(default), seg, &test, options)?
    };

    let doc = json!({ "config": doc, "seed": g.seed, "report": report });
    if let Some(out) = &a.output {
        write_json(out, &doc)?;
    }
    let mut stdout = io::stdout().lock();
    if a.json {
        serde_json::to_writer_pretty(&mut stdout, &doc)?;
        writeln!(stdout)?;
    } else {
        write!(stdout, "{}", render_table(std::slice::from_ref(&report)))?;
    }
    Ok(())
}

fn synth(g: &GlobalArgs, a: &SynthArgs, doc: &Value) -> Result<()> {
    let cfg = SynthConfig {
        vocab_size: a.vocab_size,
        phrase_count: a.phrase_count,
        phrase_length_range: (a.phrase_min_len, a.phrase_max_len),
        segments_per_query_range: (a.min_segments, a.max_segments),
        query_count: a.queries,
        zipf_exponent: a.zipf,
        noise_rate: a.noise,
        phrase_probability: a.phrase_probability,
        reorder_rate: a.reorder_rate,
        max_phrases_per_token: a.max_phrases_per_token,
        seed: g.seed,
    };
    cfg.validate()?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let corpus = generate_corpus(&cfg)?;

    let mut w = create(&a.out_dir.join("corpus.txt"))?;
    write_gold(&mut w, &corpus.queries)?;
    w.flush()?;
    let mut w = create(&a.out_dir.join("raw.txt"))?;
    write_raw_log(&mut w, corpus.raw_queries())?;
    w.flush()?;
    let phrases: Vec<String> = corpus.phrases.iter().map(|p| p.join(" ")).collect();
    write_json(
        &a.out_dir.join("synth.json"),
        &json!({
            "config": doc,
            "seed": g.seed,
            "synth": cfg,
            "queries": corpus.queries.len(),
            "phrases": phrases,
        }),
    )?;
    eprintln!("{} queries written to {}", corpus.queries.len(), a.out_dir.display());
    Ok(())
}
