use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use polar_core::analysis::{
    compare_gov_opp, confound_ols, emotion_trends, read_emotion_lexicon, session_averages, trend_table,
    write_emotion_ratios, write_sessions, ComparisonConfig, CONFOUND_OUTCOMES,
};
use polar_core::bws::{
    aggregate_and_normalize, generate_tuples, pairwise_agreement, read_annotations, read_tuples, score_bws_by_annotator,
    write_scores, write_tuples,
};
use polar_core::corpus::{
    canonical_sort, committee_counts, order_protocols, parse_corpus, select_committees, write_corpus,
    write_protocol_order, write_rejects, AliasMap, SentenceRecord,
};
use polar_core::embeddings::{ids_path, matrix_path, BaselineEmbedder, EmbeddingMatrix};
use polar_core::glm::FittedGlm;
use polar_core::lexicon::{load_labeled, LabeledText, VadLexicon};
use polar_core::metrics::{
    compute_metrics, extreme_sentences, read_metrics, threshold_summary, write_extremes, write_metrics,
    write_threshold_summary, ProtocolMetrics,
};
use polar_core::train::{evaluate_models, score_records, train_models, write_eval, EvalConfig, FeatureSource, Featurizer, TrainConfig};
use polar_core::Dimension;

use crate::config::RunConfig;
use crate::manifest::{sha256_hex, Run};

/// Inputs shared by `train` and `eval`.
#[derive(Debug, Clone, Args)]
pub struct TrainingInputs {
    /// VAD lexicon (`source_term, form, kind, v, a, d`)
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Labeled texts filtered to clearly polar ones before training
    #[arg(long)]
    pub auxiliary: Option<PathBuf>,
    /// Annotated in-domain texts; all of them train, and they alone are evaluated
    #[arg(long)]
    pub annotated: Option<PathBuf>,
}

const MODEL_FILES: [&str; 3] = ["valence.model", "arousal.model", "dominance.model"];
const FEATURES_FILE: &str = "features.json";

/// How model features were built, so `score` can rebuild them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum FeatureSpec {
    Baseline { dim: usize, seed: u64, lexicon_sha256: Option<String> },
    Precomputed { width: usize },
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> polar_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn start(command: &'static str, cfg: &RunConfig) -> Result<Run> {
    Run::start(command, &cfg.out)
}

fn load_corpus(run: &mut Run, cfg: &RunConfig, path: &Path) -> Result<(Vec<SentenceRecord>, Vec<polar_core::corpus::Reject>)> {
    let aliases = match &cfg.alias_map {
        Some(p) => Some(AliasMap::from_reader(run.read("alias_map", p)?.as_slice())?),
        None => None,
    };
    let bytes = run.read("corpus", path)?;
    let parsed = parse_corpus(bytes.as_slice(), aliases.as_ref())?;
    Ok((parsed.records, parsed.rejects))
}

/// Corpus for the analysis commands; malformed lines are reported and skipped.
fn load_records(run: &mut Run, cfg: &RunConfig, path: &Path) -> Result<Vec<SentenceRecord>> {
    let (records, rejects) = load_corpus(run, cfg, path)?;
    if !rejects.is_empty() {
        eprintln!(
            "warning: skipped {} malformed corpus lines (first at line {}: {})",
            rejects.len(),
            rejects[0].line_no,
            rejects[0].reason
        );
    }
    Ok(records)
}

fn load_metrics(run: &mut Run, path: &Path) -> Result<Vec<ProtocolMetrics>> {
    let bytes = run.read("metrics", path)?;
    read_metrics(bytes.as_slice()).with_context(|| format!("parsing metrics table {}", path.display()))
}

fn load_lexicon(run: &mut Run, path: &Path) -> Result<(VadLexicon, String)> {
    let bytes = run.read("lexicon", path)?;
    let load = VadLexicon::load(bytes.as_slice())?;
    if !load.rejects.is_empty() {
        eprintln!("warning: {} lexicon rows rejected (first at line {})", load.rejects.len(), load.rejects[0].line_no);
    }
    Ok((load.lexicon, sha256_hex(&bytes)))
}

fn load_labeled_file(run: &mut Run, role: &str, path: &Path) -> Result<Vec<LabeledText>> {
    let load = load_labeled(run.read(role, path)?.as_slice())?;
    if !load.rejects.is_empty() {
        eprintln!("warning: {} {role} rows rejected (first at line {})", load.rejects.len(), load.rejects[0].line_no);
    }
    Ok(load.texts)
}

fn load_embeddings(run: &mut Run, base: &Path) -> Result<EmbeddingMatrix> {
    let data = run.read("embeddings", &matrix_path(base))?;
    let ids_bytes = run.read("embedding_ids", &ids_path(base))?;
    let ids: Vec<String> = String::from_utf8(ids_bytes)
        .context("embedding ids are not UTF-8")?
        .lines()
        .map(str::to_string)
        .collect();
    Ok(EmbeddingMatrix::from_bytes(&data, ids)?)
}

pub fn ingest(cfg: &RunConfig, corpus: &Path) -> Result<()> {
    let mut run = start("ingest", cfg)?;
    run.arg("corpus", corpus);
    let (records, rejects) = load_corpus(&mut run, cfg, corpus)?;
    let counts = committee_counts(&records);
    let selected = select_committees(&records, cfg.min_committee_sentences);
    let mut kept: Vec<SentenceRecord> = records.into_iter().filter(|r| selected.contains(&r.committee)).collect();
    let order = order_protocols(&kept)?;
    canonical_sort(&mut kept, &order);

    let mut report = String::from("committee\tsentences\tselected\n");
    for (committee, n) in &counts {
        let mark = if selected.contains(committee) { "yes" } else { "no" };
        report.push_str(&format!("{committee}\t{n}\t{mark}\n"));
    }
    run.write("committees.tsv", report.as_bytes())?;
    run.write("rejects.tsv", &render(|w| write_rejects(w, &rejects))?)?;
    run.write("protocols.tsv", &render(|w| write_protocol_order(w, &order))?)?;
    run.write("corpus.jsonl", &render(|w| write_corpus(w, &kept))?)?;
    if selected.is_empty() {
        eprintln!("warning: no committee has at least {} sentences", cfg.min_committee_sentences);
    }
    eprintln!(
        "ingest: {} sentences kept in {} of {} committees, {} lines rejected",
        kept.len(),
        selected.len(),
        counts.len(),
        rejects.len()
    );
    run.finish(cfg)
}

struct TrainingData {
    lexicon: Option<(VadLexicon, String)>,
    auxiliary: Vec<LabeledText>,
    annotated: Vec<LabeledText>,
    matrix: Option<EmbeddingMatrix>,
}

fn load_training(run: &mut Run, cfg: &RunConfig, inputs: &TrainingInputs) -> Result<TrainingData> {
    for (key, value) in [("lexicon", &inputs.lexicon), ("auxiliary", &inputs.auxiliary), ("annotated", &inputs.annotated)] {
        run.arg(key, value);
    }
    let lexicon = inputs.lexicon.as_deref().map(|p| load_lexicon(run, p)).transpose()?;
    let auxiliary = match &inputs.auxiliary {
        Some(p) => load_labeled_file(run, "auxiliary", p)?,
        None => Vec::new(),
    };
    let annotated = match &inputs.annotated {
        Some(p) => load_labeled_file(run, "annotated", p)?,
        None => Vec::new(),
    };
    let matrix = cfg.embeddings.as_deref().map(|b| load_embeddings(run, b)).transpose()?;
    Ok(TrainingData { lexicon, auxiliary, annotated, matrix })
}

impl TrainingData {
    fn featurizer(&self, cfg: &RunConfig) -> Result<(Featurizer<'_>, FeatureSpec)> {
        Ok(match &self.matrix {
            Some(m) => (Featurizer::new(FeatureSource::Precomputed(m)), FeatureSpec::Precomputed { width: m.dim() }),
            None => {
                let lex = self.lexicon.as_ref().map(|(l, _)| l);
                let embedder = BaselineEmbedder::new(cfg.embed_dim, cfg.seed, lex)?;
                let spec = FeatureSpec::Baseline {
                    dim: cfg.embed_dim,
                    seed: cfg.seed,
                    lexicon_sha256: self.lexicon.as_ref().map(|(_, h)| h.clone()),
                };
                (Featurizer::new(FeatureSource::Baseline(embedder)), spec)
            }
        })
    }

    fn lexicon(&self) -> Option<&VadLexicon> {
        self.lexicon.as_ref().map(|(l, _)| l)
    }
}

pub fn train(cfg: &RunConfig, inputs: &TrainingInputs) -> Result<()> {
    let mut run = start("train", cfg)?;
    let data = load_training(&mut run, cfg, inputs)?;
    let (featurizer, spec) = data.featurizer(cfg)?;
    let config = TrainConfig { filter: cfg.labeled_filter(), glm: cfg.glm() };
    let models = train_models(&featurizer, data.lexicon(), &data.auxiliary, &data.annotated, &config)?;
    for (model, name) in models.iter().zip(MODEL_FILES) {
        if !model.converged {
            eprintln!("warning: {name} did not converge in {} iterations", model.iterations);
        }
        let mut bytes = Vec::new();
        model.write_to(&mut bytes)?;
        run.write(name, &bytes)?;
    }
    let mut spec_json = serde_json::to_string_pretty(&spec)?;
    spec_json.push('\n');
    run.write(FEATURES_FILE, spec_json.as_bytes())?;
    eprintln!("train: 3 models with {} features each", featurizer.width());
    run.finish(cfg)
}

pub fn eval(cfg: &RunConfig, inputs: &TrainingInputs) -> Result<()> {
    let mut run = start("eval", cfg)?;
    let data = load_training(&mut run, cfg, inputs)?;
    if data.annotated.is_empty() {
        bail!("eval needs --annotated texts to split");
    }
    let (featurizer, _) = data.featurizer(cfg)?;
    let config = TrainConfig { filter: cfg.labeled_filter(), glm: cfg.glm() };
    let eval_config = EvalConfig { train_fraction: cfg.train_fraction, folds: cfg.folds, seed: cfg.seed };
    let results = evaluate_models(&featurizer, data.lexicon(), &data.auxiliary, &data.annotated, &config, &eval_config)?;
    for r in &results {
        let show = |x: Option<f64>| x.map_or("NA".to_string(), |v| format!("{v:.3}"));
        eprintln!("eval: {} train/test r = {}, k-fold mean r = {}", r.dimension, show(r.holdout.r), show(r.crossval.mean_r));
    }
    run.write("eval.tsv", &render(|w| write_eval(w, &results))?)?;
    run.finish(cfg)
}

pub fn score(cfg: &RunConfig, corpus: &Path, models_dir: &Path, lexicon: Option<&Path>) -> Result<()> {
    let mut run = start("score", cfg)?;
    run.arg("corpus", corpus);
    run.arg("models", models_dir);
    run.arg("lexicon", lexicon);
    let spec: FeatureSpec = serde_json::from_slice(&run.read("features", &models_dir.join(FEATURES_FILE))?)
        .context("parsing the feature description written by train")?;
    let mut models = Vec::with_capacity(3);
    for name in MODEL_FILES {
        let bytes = run.read("model", &models_dir.join(name))?;
        models.push(FittedGlm::read_from(bytes.as_slice()).with_context(|| format!("loading {name}"))?);
    }
    let models: [FittedGlm; 3] = models.try_into().expect("three models");

    let lex = lexicon.map(|p| load_lexicon(&mut run, p)).transpose()?;
    let matrix = cfg.embeddings.as_deref().map(|b| load_embeddings(&mut run, b)).transpose()?;
    let featurizer = match (&spec, &matrix) {
        (FeatureSpec::Precomputed { width }, Some(m)) => {
            if m.dim() != *width {
                bail!("embeddings have {} columns but the models were trained on {width}", m.dim());
            }
            Featurizer::new(FeatureSource::Precomputed(m))
        }
        (FeatureSpec::Precomputed { .. }, None) => bail!("the models use precomputed embeddings; pass --embeddings"),
        (FeatureSpec::Baseline { dim, seed, lexicon_sha256 }, _) => {
            let lexicon = match (lexicon_sha256, &lex) {
                (None, _) => None,
                (Some(_), None) => bail!("the models use lexicon features; pass the training --lexicon"),
                (Some(want), Some((l, got))) => {
                    if want != got {
                        bail!("lexicon differs from the one used in training (sha256 {got}, expected {want})");
                    }
                    Some(l)
                }
            };
            Featurizer::new(FeatureSource::Baseline(BaselineEmbedder::new(*dim, *seed, lexicon)?))
        }
    };

    let mut records = load_records(&mut run, cfg, corpus)?;
    score_records(&mut records, &models, &featurizer)?;
    run.write("scored.jsonl", &render(|w| write_corpus(w, &records))?)?;
    eprintln!("score: {} sentences scored", records.len());
    run.finish(cfg)
}

pub fn bws_tuples(cfg: &RunConfig, items: &Path, n_tuples: Option<usize>) -> Result<()> {
    let mut run = start("bws-tuples", cfg)?;
    run.arg("items", items);
    run.arg("n_tuples", n_tuples);
    let text = String::from_utf8(run.read("items", items)?).context("item file is not UTF-8")?;
    let ids: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect();
    let n = n_tuples.unwrap_or(2 * ids.len());
    let tuples = generate_tuples(&ids, n, cfg.tuple_size, cfg.seed)?;
    run.write("tuples.tsv", &render(|w| write_tuples(w, &tuples))?)?;
    eprintln!("bws-tuples: {} tuples over {} items", tuples.len(), ids.len());
    run.finish(cfg)
}

pub fn bws_score(cfg: &RunConfig, tuples_path: &Path, annotations_path: &Path) -> Result<()> {
    let mut run = start("bws-score", cfg)?;
    run.arg("tuples", tuples_path);
    run.arg("annotations", annotations_path);
    let tuples = read_tuples(run.read("tuples", tuples_path)?.as_slice())?;
    let annotations = read_annotations(run.read("annotations", annotations_path)?.as_slice())?;
    let mut scores = Vec::new();
    let mut agreement = String::from("dimension\tannotators\tpairs\tmean_r\n");
    for dim in Dimension::ALL {
        if !annotations.iter().any(|a| a.dimension == dim) {
            continue;
        }
        let per_annotator: Vec<_> = score_bws_by_annotator(&tuples, &annotations, dim)?.into_values().collect();
        scores.push((dim, aggregate_and_normalize(&per_annotator)?));
        if per_annotator.len() >= 2 {
            let a = pairwise_agreement(&per_annotator)?;
            for w in &a.warnings {
                eprintln!("warning: {dim}: {w}");
            }
            let mean = a.mean_r.map_or("NA".to_string(), |r| r.to_string());
            agreement.push_str(&format!("{dim}\t{}\t{}\t{mean}\n", per_annotator.len(), a.pairs.len()));
        } else {
            agreement.push_str(&format!("{dim}\t{}\t0\tNA\n", per_annotator.len()));
        }
    }
    if scores.is_empty() {
        bail!("no annotations found");
    }
    run.write("bws_scores.tsv", &render(|w| write_scores(w, &scores))?)?;
    run.write("bws_agreement.tsv", agreement.as_bytes())?;
    run.finish(cfg)
}

pub fn metrics(cfg: &RunConfig, corpus: &Path) -> Result<()> {
    let mut run = start("metrics", cfg)?;
    run.arg("corpus", corpus);
    let records = load_records(&mut run, cfg, corpus)?;
    let unscored = records.iter().filter(|r| r.vad.is_none()).count();
    if unscored > 0 {
        eprintln!("warning: {unscored} sentences carry no VAD scores and are ignored");
    }
    let order = order_protocols(&records)?;
    let rows = compute_metrics(&records, &order, &cfg.metrics()?);
    run.write("metrics.tsv", &render(|w| write_metrics(w, &rows))?)?;
    let summary = threshold_summary(&records, &cfg.thresholds()?);
    run.write("thresholds.tsv", &render(|w| write_threshold_summary(w, &summary))?)?;
    eprintln!("metrics: {} records from {} protocols", rows.len(), order.committees().map(|(_, k)| k.len()).sum::<usize>());
    run.finish(cfg)
}

pub fn extremes(cfg: &RunConfig, corpus: &Path) -> Result<()> {
    let mut run = start("extremes", cfg)?;
    run.arg("corpus", corpus);
    let records = load_records(&mut run, cfg, corpus)?;
    let mut by_committee: BTreeMap<&str, Vec<&SentenceRecord>> = BTreeMap::new();
    for r in &records {
        by_committee.entry(r.committee.as_str()).or_default().push(r);
    }
    let mut lists = Vec::new();
    for (committee, sentences) in &by_committee {
        for dim in Dimension::ALL {
            let e = extreme_sentences(committee, sentences, dim, cfg.extremes_k);
            if e.short {
                eprintln!("warning: {committee} has fewer than {} scored sentences; {dim} lists overlap", 2 * cfg.extremes_k);
            }
            lists.push(e);
        }
    }
    run.write("extremes.tsv", &render(|w| write_extremes(w, &lists))?)?;
    run.finish(cfg)
}

pub fn compare(cfg: &RunConfig, metrics_path: &Path) -> Result<()> {
    let mut run = start("compare", cfg)?;
    run.arg("metrics", metrics_path);
    let rows = load_metrics(&mut run, metrics_path)?;
    let grid = compare_gov_opp(&rows, &ComparisonConfig { alpha: cfg.alpha, variant: cfg.ttest_variant() })?;
    run.write("compare.tsv", &render(|w| grid.write_labels(w))?)?;
    run.write("compare.pvals.tsv", &render(|w| grid.write_pvals(w))?)?;
    run.finish(cfg)
}

pub fn trends(cfg: &RunConfig, metrics_path: &Path) -> Result<()> {
    let mut run = start("trends", cfg)?;
    run.arg("metrics", metrics_path);
    let rows = load_metrics(&mut run, metrics_path)?;
    let grid = trend_table(&rows, cfg.trend_group(), cfg.alpha)?;
    run.write("trends.tsv", &render(|w| grid.write_labels(w))?)?;
    run.write("trends.pvals.tsv", &render(|w| grid.write_pvals(w))?)?;
    run.finish(cfg)
}

pub fn ols(cfg: &RunConfig, metrics_path: &Path) -> Result<()> {
    let mut run = start("ols", cfg)?;
    run.arg("metrics", metrics_path);
    let rows = load_metrics(&mut run, metrics_path)?;
    for outcome in CONFOUND_OUTCOMES {
        let report = confound_ols(&rows, outcome, cfg.variance_mode())
            .with_context(|| format!("fitting the {} regression", outcome.name()))?;
        run.write(&format!("ols_{}.tsv", outcome.name()), &render(|w| report.write(w))?)?;
        eprintln!("ols: {} r-squared {:.4} over {} protocols", outcome.name(), report.fit.r_squared, report.fit.n);
    }
    run.finish(cfg)
}

pub fn sessions(cfg: &RunConfig, corpus: &Path) -> Result<()> {
    let mut run = start("sessions", cfg)?;
    run.arg("corpus", corpus);
    let records = load_records(&mut run, cfg, corpus)?;
    let order = order_protocols(&records)?;
    let rows = session_averages(&records, &order, &cfg.metrics()?, cfg.session_range()?);
    run.write("sessions.tsv", &render(|w| write_sessions(w, &rows))?)?;
    run.finish(cfg)
}

pub fn emotions(cfg: &RunConfig, corpus: &Path, lexicon_path: &Path) -> Result<()> {
    let mut run = start("emotions", cfg)?;
    run.arg("corpus", corpus);
    run.arg("emotion_lexicon", lexicon_path);
    let lexicon = read_emotion_lexicon(run.read("emotion_lexicon", lexicon_path)?.as_slice())?;
    if lexicon.is_empty() {
        bail!("emotion lexicon {} has no entries", lexicon_path.display());
    }
    let records = load_records(&mut run, cfg, corpus)?;
    let order = order_protocols(&records)?;
    let (ratios, grid) = emotion_trends(&records, &order, &lexicon, cfg.alpha)?;
    run.write("emotion_ratios.tsv", &render(|w| write_emotion_ratios(w, &ratios))?)?;
    run.write("emotion_trends.tsv", &render(|w| grid.write_labels(w))?)?;
    run.write("emotion_trends.pvals.tsv", &render(|w| grid.write_pvals(w))?)?;
    run.finish(cfg)
}
