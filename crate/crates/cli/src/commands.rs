use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::{info, warn};
use serde::Deserialize;
use v2c_core::checkpoint::{load_checkpoint, save_checkpoint};
use v2c_core::config::RunConfig;
use v2c_core::corpus::{
    annotate_caption, load_corpus, make_synthetic_corpus, read_jsonl, write_jsonl, ActivityFilter, Jaccard,
    KeyedText, KnowledgeEvent, Scorer, SyntheticConfig, TfIdfIndex, TokenOverlap, V2CRecord, VideoFeatures,
};
use v2c_core::generation::{DecodeMode, DecodeOptions, GenerationRecord, Generator};
use v2c_core::metrics::evaluate_keyed;
use v2c_core::qa::{
    generate_questions, load_qa_checkpoint, save_qa_checkpoint, train_qa, AnswerPool,
    AnswerVocabulary, Miner, QaCheckpoint, QaExample, QaHeadConfig, QaModel, QaReport, QaSample, QaTrainConfig,
    QuestionVocabulary,
};
use v2c_core::rater::{summarize, RatingSet};
use v2c_core::training::{train, write_loss_csv};
use v2c_core::vocab::CommonsenseType;

use crate::args::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] v2c_core::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::BuildCorpus(a) => build_corpus(a),
        Command::Train(a) => train_cmd(a),
        Command::Complete(a) => decode(a, true),
        Command::Generate(a) => decode(a, false),
        Command::EvalNlg(a) => eval_nlg(a),
        Command::QaGen(a) => qa_gen(a),
        Command::QaTrain(a) => qa_train(a),
        Command::QaEval(a) => qa_eval(a),
        Command::RaterStats(a) => rater_stats(a),
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn build_corpus(a: BuildCorpus) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let Some(captions) = a.captions else {
        let cfg = SyntheticConfig {
            seed: a.seed,
            n_videos: a.videos,
            n_frames: a.frames,
            dim: a.dim,
            noise: a.noise,
            captions_per_video: a.captions_per_video,
            strings_per_type: a.strings_per_type,
            stories: a.stories,
        };
        let corpus = make_synthetic_corpus(&cfg)?;
        corpus.write_to_dir(&a.out)?;
        info!("wrote {} synthetic records to {}", corpus.records.len(), a.out.display());
        return Ok(());
    };
    let knowledge_path = a.knowledge.expect("clap enforces --knowledge");
    let table: Vec<KnowledgeEvent> = read_jsonl(&knowledge_path)?;
    if table.is_empty() {
        return Err(v2c_core::Error::EmptyCorpus.into());
    }
    let scorer: Box<dyn Scorer> = match a.scorer.as_str() {
        "overlap" => Box::new(TokenOverlap),
        "jaccard" => Box::new(Jaccard),
        other => return Err(CliError::Usage(format!("unknown scorer {other:?}; use overlap or jaccard"))),
    };
    let filter = match &a.verbs {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            ActivityFilter::with_verbs(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from))
        }
        None => ActivityFilter::default(),
    };
    let index = TfIdfIndex::new(&table.iter().map(|e| e.event.as_str()).collect::<Vec<_>>());
    let records: Vec<V2CRecord> = read_jsonl(&captions)?;
    let mut out = Vec::new();
    let mut rejected = 0;
    for mut r in records {
        let before = r.captions.len();
        r.captions.retain(|c| filter.accepts(c));
        rejected += before - r.captions.len();
        if r.captions.is_empty() {
            continue;
        }
        let mut cs = v2c_core::corpus::Commonsense::default();
        for c in &r.captions {
            let ranked = annotate_caption(c, &table, &index, scorer.as_ref());
            for ty in CommonsenseType::ALL {
                for s in ranked.get(ty) {
                    if !cs.get(ty).contains(s) {
                        cs.get_mut(ty).push(s.clone());
                    }
                }
            }
        }
        r.commonsense = cs;
        out.push(r);
    }
    info!("kept {} records, filtered {rejected} non-activity captions", out.len());
    write_jsonl(a.out.join("records.jsonl"), &out)?;
    Ok(())
}

fn train_cmd(a: Train) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {o:?}")))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(n) = a.steps {
        cfg.train.max_steps = n;
    }
    let corpus = load_corpus(&a.corpus)?;
    let out = train(&corpus, &cfg.model, &cfg.train)?;
    if out.skipped > 0 {
        warn!("{} records skipped for missing annotations", out.skipped);
    }
    save_checkpoint(&a.out, &out.model, &out.caption_vocab, &out.commonsense_vocab)?;
    let csv_path = a.loss_csv.unwrap_or_else(|| a.out.join("loss.csv"));
    let mut w = BufWriter::new(File::create(&csv_path)?);
    write_loss_csv(&mut w, &out.history)?;
    w.flush()?;
    info!("checkpoint in {}, losses in {}", a.out.display(), csv_path.display());
    Ok(())
}

fn decode(a: Decode, complete: bool) -> Result<()> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let types = if a.types.is_empty() {
        CommonsenseType::ALL.to_vec()
    } else {
        a.types
            .iter()
            .map(|t| CommonsenseType::parse(t).ok_or_else(|| CliError::Usage(format!("unknown type {t:?}"))))
            .collect::<Result<_>>()?
    };
    let opts = DecodeOptions {
        mode: a.beam.map_or(DecodeMode::Greedy, DecodeMode::Beam),
        max_len: a.max_len.unwrap_or(ck.model.config().max_len),
        types,
    };
    let corpus = load_corpus(&a.corpus)?;
    let gen = Generator::new(&ck.model, &ck.caption_vocab, &ck.commonsense_vocab);
    let mut w = output(a.out.as_deref())?;
    for (r, f) in &corpus {
        let result = if complete {
            let caption = r.captions.first().ok_or(v2c_core::Error::EmptyCaption)?;
            gen.complete(f, caption, &opts)?
        } else {
            gen.generate(f, &opts)?
        };
        if result.caption_degenerate {
            warn!("{}: empty caption decoded", r.video_id);
        }
        serde_json::to_writer(&mut w, &result.to_record())?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads keyed lines or generation output, one JSON object per line.
fn read_predictions(path: &Path) -> Result<Vec<KeyedText>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|source| v2c_core::Error::Json { line: i + 1, source })?;
        if v.get("type").is_some() {
            out.push(serde_json::from_value(v).map_err(|source| v2c_core::Error::Json { line: i + 1, source })?);
        } else {
            let r: GenerationRecord =
                serde_json::from_value(v).map_err(|source| v2c_core::Error::Json { line: i + 1, source })?;
            out.extend(r.to_keyed());
        }
    }
    Ok(out)
}

fn eval_nlg(a: EvalNlg) -> Result<()> {
    let preds = read_predictions(&a.predictions)?;
    let refs: Vec<KeyedText> = read_jsonl(&a.references)?;
    let report = evaluate_keyed(&preds, &refs);
    if report.missing_references > 0 {
        warn!("{} predictions have no reference", report.missing_references);
    }
    print!("{}", report.table());
    if let Some(p) = &a.json {
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

fn qa_gen(a: QaGen) -> Result<()> {
    let records: Vec<V2CRecord> = read_jsonl(&a.corpus)?;
    let mut miner = Miner::new(AnswerPool::from_records(&records));
    miner.k = a.distractors;
    let mut samples = Vec::new();
    let (mut exhausted, mut dropped) = (0, 0);
    for r in &records {
        let g = generate_questions(r, &miner);
        exhausted += g.exhausted;
        dropped += g.dropped;
        samples.extend(g.samples);
    }
    write_jsonl(&a.out, &samples)?;
    info!("{} questions, {exhausted} with short distractor lists, {dropped} dropped", samples.len());
    Ok(())
}

fn features_by_id(corpus: Vec<(V2CRecord, VideoFeatures)>) -> HashMap<String, VideoFeatures> {
    corpus.into_iter().map(|(r, f)| (r.video_id, f)).collect()
}

fn examples(
    samples: &[QaSample],
    features: &HashMap<String, VideoFeatures>,
    answers: &AnswerVocabulary,
    questions: &QuestionVocabulary,
) -> Result<Vec<QaExample>> {
    samples
        .iter()
        .map(|s| {
            let f = features
                .get(&s.video_id)
                .ok_or_else(|| v2c_core::Error::InvalidArgument(format!("no features for video {}", s.video_id)))?;
            Ok(QaExample {
                features: f.clone(),
                question: questions.encode(&s.question),
                qtype: s.qtype,
                answers: answers.ids(&s.answers),
                negatives: answers.ids(&s.negatives),
            })
        })
        .collect()
}

fn qa_train(a: QaTrain) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let samples: Vec<QaSample> = read_jsonl(&a.qa)?;
    if samples.is_empty() {
        return Err(v2c_core::Error::EmptyCorpus.into());
    }
    let feature_dim = corpus[0].1.dim();
    let features = features_by_id(corpus);
    let answers = AnswerVocabulary::build(&samples);
    let questions = QuestionVocabulary::build(&samples);
    let init = a.init_from.as_ref().map(load_checkpoint).transpose()?;
    let cfg = QaHeadConfig {
        feature_dim,
        d_model: init.as_ref().map_or(a.d_model, |c| c.model.config().d_model),
        hidden: a.hidden,
        answer_vocab: answers.len(),
        question_vocab: questions.len(),
        weights: (1.0, 0.5, 0.5),
        margin: 0.2,
    };
    let mut model = QaModel::new(cfg, a.seed)?;
    if let Some(c) = &init {
        let n = model.init_encoder_from(&c.model.params)?;
        info!("copied {n} encoder tensors from {}", a.init_from.as_ref().unwrap().display());
    }
    let data = examples(&samples, &features, &answers, &questions)?;
    let tc = QaTrainConfig {
        lr: a.lr,
        warmup_steps: (a.steps / 10).max(1),
        batch_size: a.batch,
        max_steps: a.steps,
        seed: a.seed,
    };
    train_qa(&mut model, &data, &tc, |_, step, loss| {
        if step % 100 == 0 {
            info!("step {step} loss {loss:.4}");
        }
        true
    })?;
    save_qa_checkpoint(&a.out, &QaCheckpoint { model, answers, questions })?;
    Ok(())
}

fn qa_eval(a: QaEval) -> Result<()> {
    let ck = load_qa_checkpoint(&a.checkpoint)?;
    let features = features_by_id(load_corpus(&a.corpus)?);
    let samples: Vec<QaSample> = read_jsonl(&a.qa)?;
    let data = examples(&samples, &features, &ck.answers, &ck.questions)?;
    let mut scored = Vec::with_capacity(data.len());
    for ex in &data {
        let (scores, _) = ck.model.predict(&ex.features, &ex.question)?;
        scored.push((ex.qtype, scores, ex.answers.clone()));
    }
    let report = QaReport::compute(scored.iter().map(|(q, s, t)| (*q, s.as_slice(), t.as_slice())));
    if report.excluded > 0 {
        warn!("{} questions have no known answer and were excluded", report.excluded);
    }
    print!("{}", report.table());
    if let Some(p) = &a.json {
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, &report)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct RatingRow {
    sample_id: String,
    #[allow(dead_code)]
    rater_id: String,
    rating: u8,
}

fn rater_stats(a: RaterStats) -> Result<()> {
    let mut rows = Vec::new();
    for row in csv::Reader::from_path(&a.ratings)?.deserialize() {
        let row: RatingRow = row?;
        rows.push((row.sample_id, row.rating));
    }
    let set = RatingSet::from_rows(rows)?;
    let summary = summarize(&set)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &summary)?;
    writeln!(out)?;
    Ok(())
}
