//! Video encoder, caption decoder and commonsense decoder.

mod attention;
mod decoder;
mod encoder;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use v2c_tensor::{Bound, Graph, ParamId, ParamStore, Tensor, Var};

pub use attention::{causal_mask, multi_head_attention, positional_encoding, AttentionParams, Attended};
pub use decoder::{decoder_forward, BlockParams, DecoderOutput, DecoderParams, LayerNormParams};
pub use encoder::{encode_video, EncoderParams, VideoEncoding};

use crate::config::ModelConfig;
use crate::corpus::VideoFeatures;
use crate::error::{Error, Result};
use crate::vocab::{CommonsenseType, BOS};

/// Seeded scaled-uniform initialiser: weights in `±gain/sqrt(fan_in)`.
pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub(crate) fn linear(&mut self, s: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, gain: f64) -> Result<ParamId> {
        Ok(s.add_uniform(name, &[fan_in, fan_out], gain / (fan_in as f64).sqrt(), &mut self.rng)?)
    }

    pub(crate) fn embedding(&mut self, s: &mut ParamStore, name: &str, vocab: usize, d: usize) -> Result<ParamId> {
        Ok(s.add_uniform(name, &[vocab, d], 1.0 / (d as f64).sqrt(), &mut self.rng)?)
    }

    pub(crate) fn zeros(&mut self, s: &mut ParamStore, name: &str, shape: &[usize]) -> Result<ParamId> {
        Ok(s.add(name, Tensor::zeros(shape))?)
    }

    pub(crate) fn ones(&mut self, s: &mut ParamStore, name: &str, shape: &[usize]) -> Result<ParamId> {
        Ok(s.add(name, Tensor::ones(shape))?)
    }
}

/// The full two-stage captioning and commonsense model.
#[derive(Debug, Clone)]
pub struct V2CModel {
    cfg: ModelConfig,
    pub params: ParamStore,
    encoder: EncoderParams,
    caption: DecoderParams,
    commonsense: DecoderParams,
    pe: Tensor,
}

impl V2CModel {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let mut init = Init::new(seed);
        let encoder = EncoderParams::register(&mut params, cfg.feature_dim, cfg.d_model, &mut init)?;
        let caption = DecoderParams::register(&mut params, "cap", cfg.caption_vocab, &cfg, &mut init)?;
        let commonsense = DecoderParams::register(&mut params, "cms", cfg.commonsense_vocab, &cfg, &mut init)?;
        let pe = positional_encoding(cfg.max_len, cfg.d_model);
        Ok(Self {
            cfg,
            params,
            encoder,
            caption,
            commonsense,
            pe,
        })
    }

    /// Builds the layout for `cfg` and loads `entries` into it by name.
    pub fn from_named(cfg: ModelConfig, entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut m = Self::new(cfg, 0)?;
        m.params.load_named(entries)?;
        Ok(m)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn encoder_params(&self) -> &EncoderParams {
        &self.encoder
    }

    pub fn bind(&self, g: &mut Graph) -> Bound {
        g.bind(&self.params)
    }

    pub fn encode(&self, g: &mut Graph, bound: &Bound, features: &VideoFeatures) -> Result<VideoEncoding> {
        if features.dim() != self.cfg.feature_dim {
            return Err(Error::Dimension {
                what: "video features",
                expected: self.cfg.feature_dim,
                found: features.dim(),
            });
        }
        let x = g.constant(features.to_tensor());
        encode_video(g, bound, &self.encoder, x)
    }

    /// Caption decoder over `tokens`, which must start with `<bos>`.
    pub fn caption_forward(&self, g: &mut Graph, bound: &Bound, v: &VideoEncoding, tokens: &[usize]) -> Result<DecoderOutput> {
        if tokens.first() != Some(&BOS) {
            return Err(Error::MissingBeginMarker {
                what: "caption",
                expected: BOS,
                found: tokens.first().copied(),
            });
        }
        decoder_forward(g, bound, &self.caption, &self.cfg, &self.pe, tokens, v.memory)
    }

    /// Commonsense decoder attending over the video memory followed by the
    /// caption encoding. `tokens` must start with the marker of `ty`.
    pub fn commonsense_forward(
        &self,
        g: &mut Graph,
        bound: &Bound,
        v: &VideoEncoding,
        caption_hidden: Var,
        tokens: &[usize],
        ty: CommonsenseType,
    ) -> Result<DecoderOutput> {
        let marker = ty.begin_marker();
        if tokens.first() != Some(&marker) {
            return Err(Error::MissingBeginMarker {
                what: "commonsense",
                expected: marker,
                found: tokens.first().copied(),
            });
        }
        let width = g.shape(caption_hidden).get(1).copied().unwrap_or(0);
        if width != self.cfg.d_model {
            return Err(Error::Dimension {
                what: "caption encoding",
                expected: self.cfg.d_model,
                found: width,
            });
        }
        let memory = g.concat(&[v.memory, caption_hidden], 0)?;
        decoder_forward(g, bound, &self.commonsense, &self.cfg, &self.pe, tokens, memory)
    }
}
