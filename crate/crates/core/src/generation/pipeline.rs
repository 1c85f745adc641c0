use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use v2c_tensor::{Bound, Graph, Var};

use super::beam::{beam_search, greedy, Decoded};
use crate::corpus::{KeyedText, VideoFeatures};
use crate::error::{Error, Result};
use crate::model::{V2CModel, VideoEncoding};
use crate::vocab::{CommonsenseType, Vocabulary, BOS, EOS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Greedy,
    Beam(usize),
}

/// Decoding options shared by completion and generation.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOptions {
    pub mode: DecodeMode,
    /// Maximum emitted tokens per sequence, end marker included.
    pub max_len: usize,
    pub types: Vec<CommonsenseType>,
}

impl DecodeOptions {
    pub fn greedy(max_len: usize) -> Self {
        Self {
            mode: DecodeMode::Greedy,
            max_len,
            types: CommonsenseType::ALL.to_vec(),
        }
    }
}

/// One decoded commonsense string.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonsenseOutput {
    pub ty: CommonsenseType,
    pub text: String,
    pub tokens: Vec<usize>,
    pub logprobs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub video_id: String,
    pub caption: String,
    /// Present when the caption was decoded rather than given.
    pub caption_logprobs: Option<Vec<f64>>,
    /// The decoded caption was empty.
    pub caption_degenerate: bool,
    pub commonsense: Vec<CommonsenseOutput>,
}

/// JSON line written for each generated video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub video_id: String,
    pub caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intention: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    pub logprobs: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub caption_degenerate: bool,
}

impl GenerationRecord {
    /// One keyed line per non-empty field, for metric evaluation.
    pub fn to_keyed(&self) -> Vec<KeyedText> {
        let mut out = vec![KeyedText {
            video_id: self.video_id.clone(),
            kind: "caption".into(),
            text: self.caption.clone(),
        }];
        for (ty, text) in [
            (CommonsenseType::Intention, &self.intention),
            (CommonsenseType::Effect, &self.effect),
            (CommonsenseType::Attribute, &self.attribute),
        ] {
            if let Some(t) = text {
                out.push(KeyedText {
                    video_id: self.video_id.clone(),
                    kind: ty.as_str().into(),
                    text: t.clone(),
                });
            }
        }
        out
    }
}

impl GenerationResult {
    pub fn get(&self, ty: CommonsenseType) -> Option<&CommonsenseOutput> {
        self.commonsense.iter().find(|c| c.ty == ty)
    }

    pub fn to_record(&self) -> GenerationRecord {
        let text = |ty| self.get(ty).map(|c| c.text.clone());
        let mut logprobs = BTreeMap::new();
        if let Some(lp) = &self.caption_logprobs {
            logprobs.insert("caption".to_string(), lp.clone());
        }
        for c in &self.commonsense {
            logprobs.insert(c.ty.as_str().to_string(), c.logprobs.clone());
        }
        GenerationRecord {
            video_id: self.video_id.clone(),
            caption: self.caption.clone(),
            intention: text(CommonsenseType::Intention),
            effect: text(CommonsenseType::Effect),
            attribute: text(CommonsenseType::Attribute),
            logprobs,
            caption_degenerate: self.caption_degenerate,
        }
    }
}

fn log_softmax_last_row(g: &Graph, logits: Var, banned: &[usize]) -> Vec<f64> {
    let t = g.value(logits);
    let row = t.row(t.rows() - 1);
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    let mut out: Vec<f64> = row.iter().map(|x| x - lse).collect();
    for &b in banned {
        out[b] = f64::NEG_INFINITY;
    }
    out
}

fn run_decode<F>(mode: DecodeMode, step: F, max_len: usize) -> Result<Decoded>
where
    F: FnMut(&[usize]) -> Result<Vec<f64>>,
{
    match mode {
        DecodeMode::Greedy => greedy(step, max_len, EOS),
        DecodeMode::Beam(k) => beam_search(step, k, max_len, EOS),
    }
}

/// Eval-mode inference over a trained model and its vocabularies.
#[derive(Debug, Clone, Copy)]
pub struct Generator<'a> {
    pub model: &'a V2CModel,
    pub caption_vocab: &'a Vocabulary,
    pub commonsense_vocab: &'a Vocabulary,
}

impl<'a> Generator<'a> {
    pub fn new(model: &'a V2CModel, caption_vocab: &'a Vocabulary, commonsense_vocab: &'a Vocabulary) -> Self {
        Self {
            model,
            caption_vocab,
            commonsense_vocab,
        }
    }

    fn graph(&self) -> (Graph, Bound) {
        let mut g = Graph::new(0);
        g.set_train(false);
        let b = g.bind_frozen(&self.model.params);
        (g, b)
    }

    fn check(&self, opts: &DecodeOptions) -> Result<()> {
        let max = self.model.config().max_len;
        if opts.max_len == 0 || opts.max_len > max {
            return Err(Error::InvalidArgument(format!(
                "decode length {} must be within 1..={max}",
                opts.max_len
            )));
        }
        if opts.mode == DecodeMode::Beam(0) {
            return Err(Error::InvalidArgument("beam width must be at least 1".into()));
        }
        Ok(())
    }

    /// Final-block caption states for teacher-forced `[<bos>, words...]`.
    fn caption_hidden(&self, g: &mut Graph, b: &Bound, v: &VideoEncoding, words: &[usize]) -> Result<Var> {
        let mut input = vec![BOS];
        input.extend_from_slice(words);
        Ok(self.model.caption_forward(g, b, v, &input)?.hidden)
    }

    fn decode_commonsense(
        &self,
        g: &mut Graph,
        b: &Bound,
        v: &VideoEncoding,
        hidden: Var,
        opts: &DecodeOptions,
    ) -> Result<Vec<CommonsenseOutput>> {
        let banned = self.commonsense_vocab.banned_in_output();
        let mut out = Vec::with_capacity(opts.types.len());
        for &ty in &opts.types {
            let decoded = run_decode(
                opts.mode,
                |prefix: &[usize]| {
                    let mark = g.len();
                    let mut input = vec![ty.begin_marker()];
                    input.extend_from_slice(prefix);
                    let o = self.model.commonsense_forward(g, b, v, hidden, &input, ty)?;
                    let lp = log_softmax_last_row(g, o.logits, &banned);
                    g.truncate(mark);
                    Ok(lp)
                },
                opts.max_len,
            )?;
            out.push(CommonsenseOutput {
                ty,
                text: self.commonsense_vocab.decode(decoded.words(EOS)),
                tokens: decoded.words(EOS).to_vec(),
                logprobs: decoded.logprobs,
            });
        }
        Ok(out)
    }

    /// Decodes commonsense given the ground-truth caption.
    pub fn complete(&self, features: &VideoFeatures, caption: &str, opts: &DecodeOptions) -> Result<GenerationResult> {
        self.check(opts)?;
        let mut words = self.caption_vocab.encode(caption);
        if words.is_empty() {
            return Err(Error::EmptyCaption);
        }
        words.truncate(self.model.config().max_len - 1);
        let (mut g, b) = self.graph();
        let v = self.model.encode(&mut g, &b, features)?;
        let hidden = self.caption_hidden(&mut g, &b, &v, &words)?;
        let commonsense = self.decode_commonsense(&mut g, &b, &v, hidden, opts)?;
        Ok(GenerationResult {
            video_id: features.video_id.clone(),
            caption: caption.to_string(),
            caption_logprobs: None,
            caption_degenerate: false,
            commonsense,
        })
    }

    /// Decodes a caption first, re-encodes it, then decodes commonsense.
    pub fn generate(&self, features: &VideoFeatures, opts: &DecodeOptions) -> Result<GenerationResult> {
        self.check(opts)?;
        let (mut g, b) = self.graph();
        let v = self.model.encode(&mut g, &b, features)?;
        let caption = self.decode_caption_with(&mut g, &b, &v, opts)?;
        let words: Vec<usize> = caption.words(EOS).iter().copied().take(self.model.config().max_len - 1).collect();
        let hidden = self.caption_hidden(&mut g, &b, &v, &words)?;
        let commonsense = self.decode_commonsense(&mut g, &b, &v, hidden, opts)?;
        Ok(GenerationResult {
            video_id: features.video_id.clone(),
            caption: self.caption_vocab.decode(&words),
            caption_logprobs: Some(caption.logprobs),
            caption_degenerate: words.is_empty(),
            commonsense,
        })
    }

    /// Caption decoding alone.
    pub fn decode_caption(&self, features: &VideoFeatures, opts: &DecodeOptions) -> Result<Decoded> {
        self.check(opts)?;
        let (mut g, b) = self.graph();
        let v = self.model.encode(&mut g, &b, features)?;
        self.decode_caption_with(&mut g, &b, &v, opts)
    }

    fn decode_caption_with(&self, g: &mut Graph, b: &Bound, v: &VideoEncoding, opts: &DecodeOptions) -> Result<Decoded> {
        let banned = self.caption_vocab.banned_in_output();
        run_decode(
            opts.mode,
            |prefix: &[usize]| {
                let mark = g.len();
                let mut input = vec![BOS];
                input.extend_from_slice(prefix);
                let o = self.model.caption_forward(g, b, v, &input)?;
                let lp = log_softmax_last_row(g, o.logits, &banned);
                g.truncate(mark);
                Ok(lp)
            },
            opts.max_len,
        )
    }
}
