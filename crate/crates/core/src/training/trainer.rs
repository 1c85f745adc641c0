use std::collections::HashMap;
use std::io::Write;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use v2c_tensor::Graph;

use super::adam::Adam;
use super::loss::joint_loss;
use super::schedule::lr_schedule;
use crate::config::{ModelConfig, TargetMode, TrainConfig};
use crate::corpus::{V2CRecord, VideoFeatures};
use crate::error::{Error, Result};
use crate::model::{V2CModel, VideoEncoding};
use crate::vocab::{CommonsenseType, Stream, Vocabulary, BOS, EOS};

/// A record reduced to token ids, ready for teacher forcing.
#[derive(Debug, Clone)]
pub struct PreparedRecord {
    pub video_id: String,
    pub features: VideoFeatures,
    /// Caption word ids without markers.
    pub captions: Vec<Vec<usize>>,
    /// Commonsense word ids without markers, tagged by type.
    pub targets: Vec<(CommonsenseType, Vec<usize>)>,
}

/// Outcome of [`prepare`]: usable records and how many were dropped.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub records: Vec<PreparedRecord>,
    pub skipped: usize,
    pub truncated: usize,
}

/// Tokenises captions and targets, clipping each to `max_len - 1` words so
/// the marker-prefixed input fits. Records without captions or targets are
/// skipped; an all-skipped corpus is an error.
pub fn prepare(
    corpus: &[(V2CRecord, VideoFeatures)],
    caption_vocab: &Vocabulary,
    cms_vocab: &Vocabulary,
    max_len: usize,
    mode: TargetMode,
) -> Result<Prepared> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let limit = max_len.saturating_sub(1);
    let mut truncated = 0;
    let mut clip = |mut ids: Vec<usize>| {
        if ids.len() > limit {
            ids.truncate(limit);
            truncated += 1;
        }
        ids
    };
    let mut out = Prepared {
        records: Vec::new(),
        skipped: 0,
        truncated: 0,
    };
    for (rec, feats) in corpus {
        let captions: Vec<Vec<usize>> = rec
            .captions
            .iter()
            .map(|c| clip(caption_vocab.encode(c)))
            .filter(|c| !c.is_empty())
            .collect();
        let targets: Vec<(CommonsenseType, Vec<usize>)> = match mode {
            TargetMode::Commonsense => CommonsenseType::ALL
                .iter()
                .flat_map(|&ty| rec.commonsense.get(ty).iter().map(move |s| (ty, s)))
                .map(|(ty, s)| (ty, clip(cms_vocab.encode(s))))
                .collect(),
            TargetMode::Story => rec
                .stories
                .iter()
                .flatten()
                .map(|s| (CommonsenseType::Intention, clip(cms_vocab.encode(s))))
                .collect(),
        };
        if captions.is_empty() || targets.is_empty() {
            out.skipped += 1;
            continue;
        }
        out.records.push(PreparedRecord {
            video_id: rec.video_id.clone(),
            features: feats.clone(),
            captions,
            targets,
        });
    }
    out.truncated = truncated;
    if out.skipped > 0 {
        warn!("skipped {} records missing a caption or target stream", out.skipped);
    }
    if out.records.is_empty() {
        return Err(Error::AllRecordsSkipped(out.skipped));
    }
    Ok(out)
}

/// One training pair: a caption and one target string of the same record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainItem {
    pub record: usize,
    pub caption: usize,
    pub target: usize,
}

pub fn expand_items(records: &[PreparedRecord]) -> Vec<TrainItem> {
    let mut items = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        for c in 0..rec.captions.len() {
            for t in 0..rec.targets.len() {
                items.push(TrainItem {
                    record: r,
                    caption: c,
                    target: t,
                });
            }
        }
    }
    items
}

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub step: usize,
    pub loss_cap: f64,
    pub loss_cms: f64,
    pub lr: f64,
}

pub fn write_loss_csv<W: Write>(w: &mut W, rows: &[LossRow]) -> Result<()> {
    writeln!(w, "step,loss_cap,loss_cms,lr")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.step, r.loss_cap, r.loss_cms, r.lr)?;
    }
    Ok(())
}

/// Teacher-forced inputs and targets for one sequence.
pub fn teacher_forcing(marker: usize, words: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut input = Vec::with_capacity(words.len() + 1);
    input.push(marker);
    input.extend_from_slice(words);
    let mut target = words.to_vec();
    target.push(EOS);
    (input, target)
}

fn step_seed(seed: u64, step: usize) -> u64 {
    seed ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Stateful training loop over a prepared corpus.
#[derive(Debug)]
pub struct Trainer {
    model: V2CModel,
    adam: Adam,
    cfg: TrainConfig,
    records: Vec<PreparedRecord>,
    items: Vec<TrainItem>,
    order: Vec<usize>,
    cursor: usize,
    shuffle_rng: ChaCha8Rng,
    step: usize,
    history: Vec<LossRow>,
}

impl Trainer {
    pub fn new(model: V2CModel, records: Vec<PreparedRecord>, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let items = expand_items(&records);
        if items.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let adam = Adam::new(&model.params, cfg.beta1, cfg.beta2, cfg.adam_eps);
        Ok(Self {
            model,
            adam,
            shuffle_rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)),
            cfg,
            records,
            order: Vec::new(),
            cursor: 0,
            items,
            step: 0,
            history: Vec::new(),
        })
    }

    pub fn model(&self) -> &V2CModel {
        &self.model
    }

    pub fn into_model(self) -> V2CModel {
        self.model
    }

    pub fn history(&self) -> &[LossRow] {
        &self.history
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn items(&self) -> &[TrainItem] {
        &self.items
    }

    fn next_batch(&mut self) -> Vec<TrainItem> {
        let n = self.cfg.batch_size.min(self.items.len());
        let mut batch = Vec::with_capacity(n);
        while batch.len() < n {
            if self.cursor == self.order.len() {
                self.order = (0..self.items.len()).collect();
                self.order.shuffle(&mut self.shuffle_rng);
                self.cursor = 0;
            }
            batch.push(self.items[self.order[self.cursor]]);
            self.cursor += 1;
        }
        batch
    }

    /// Runs one optimisation step and returns its loss row.
    pub fn step(&mut self) -> Result<LossRow> {
        self.step += 1;
        let batch = self.next_batch();
        let mut g = Graph::new(step_seed(self.cfg.seed, self.step));
        let bound = self.model.bind(&mut g);
        let model = &self.model;

        let mut encodings: HashMap<usize, VideoEncoding> = HashMap::new();
        let mut caption_states = HashMap::new();
        let (mut cap_logits, mut cap_targets) = (Vec::new(), Vec::new());
        let (mut cms_logits, mut cms_targets) = (Vec::new(), Vec::new());
        for item in &batch {
            let rec = &self.records[item.record];
            let v = match encodings.get(&item.record) {
                Some(v) => *v,
                None => {
                    let v = model.encode(&mut g, &bound, &rec.features)?;
                    encodings.insert(item.record, v);
                    v
                }
            };
            let hidden = match caption_states.get(&(item.record, item.caption)) {
                Some(h) => *h,
                None => {
                    let (input, target) = teacher_forcing(BOS, &rec.captions[item.caption]);
                    let out = model.caption_forward(&mut g, &bound, &v, &input)?;
                    cap_logits.push(out.logits);
                    cap_targets.extend(target);
                    caption_states.insert((item.record, item.caption), out.hidden);
                    out.hidden
                }
            };
            let (ty, words) = &rec.targets[item.target];
            let (input, target) = teacher_forcing(ty.begin_marker(), words);
            let out = model.commonsense_forward(&mut g, &bound, &v, hidden, &input, *ty)?;
            cms_logits.push(out.logits);
            cms_targets.extend(target);
        }
        let cap = g.concat(&cap_logits, 0)?;
        let cms = g.concat(&cms_logits, 0)?;
        let loss = joint_loss(&mut g, cap, &cap_targets, cms, &cms_targets)?;
        let row = LossRow {
            step: self.step,
            loss_cap: g.value(loss.caption).data()[0],
            loss_cms: g.value(loss.commonsense).data()[0],
            lr: lr_schedule(self.step, self.cfg.lr, self.cfg.warmup_steps),
        };
        if !(row.loss_cap.is_finite() && row.loss_cms.is_finite()) {
            return Err(v2c_tensor::TensorError::NonFinite("training loss").into());
        }
        let grads = g.backward(loss.total)?;
        self.model.params.accumulate_grads(&bound, &grads)?;
        self.adam.step(&mut self.model.params, row.lr, self.cfg.max_grad_norm);
        self.history.push(row);
        Ok(row)
    }

    /// Runs until `max_steps` total steps, logging every `log_every` steps.
    pub fn run(&mut self, log_every: usize) -> Result<()> {
        while self.step < self.cfg.max_steps {
            let row = self.step()?;
            if log_every > 0 && row.step % log_every == 0 {
                info!(
                    "step {} loss_cap {:.4} loss_cms {:.4} lr {:.2e}",
                    row.step, row.loss_cap, row.loss_cms, row.lr
                );
            }
        }
        Ok(())
    }
}

/// Everything a training run produces.
#[derive(Debug)]
pub struct TrainOutput {
    pub model: V2CModel,
    pub caption_vocab: Vocabulary,
    pub commonsense_vocab: Vocabulary,
    pub history: Vec<LossRow>,
    pub skipped: usize,
}

/// Builds vocabularies, initialises a model and trains it for
/// `train_cfg.max_steps` steps.
pub fn train(
    corpus: &[(V2CRecord, VideoFeatures)],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutput> {
    let records: Vec<V2CRecord> = corpus.iter().map(|(r, _)| r.clone()).collect();
    let caption_vocab = Vocabulary::build(&records, Stream::Caption, train_cfg.min_freq)?;
    let commonsense_vocab = Vocabulary::build(&records, Stream::Commonsense, train_cfg.min_freq)?;
    let mut cfg = model_cfg.clone();
    cfg.feature_dim = corpus[0].1.dim();
    cfg.caption_vocab = caption_vocab.len();
    cfg.commonsense_vocab = commonsense_vocab.len();
    let prepared = prepare(corpus, &caption_vocab, &commonsense_vocab, cfg.max_len, train_cfg.target)?;
    let model = V2CModel::new(cfg, train_cfg.seed)?;
    let mut trainer = Trainer::new(model, prepared.records, train_cfg.clone())?;
    trainer.run(100)?;
    let history = trainer.history().to_vec();
    Ok(TrainOutput {
        model: trainer.into_model(),
        caption_vocab,
        commonsense_vocab,
        history,
        skipped: prepared.skipped,
    })
}
