use v2c_tensor::{Bound, Graph, ParamId, ParamStore, Tensor, Var};

use super::attention::{causal_mask, multi_head_attention, AttentionParams};
use super::Init;
use crate::config::ModelConfig;
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNormParams {
    fn register(store: &mut ParamStore, prefix: &str, d: usize, init: &mut Init) -> Result<Self> {
        Ok(Self {
            gamma: init.ones(store, &format!("{prefix}.gamma"), &[d])?,
            beta: init.zeros(store, &format!("{prefix}.beta"), &[d])?,
        })
    }

    fn apply(&self, g: &mut Graph, bound: &Bound, x: Var) -> Result<Var> {
        Ok(g.layer_norm(x, bound[self.gamma], bound[self.beta], LN_EPS)?)
    }
}

/// One post-norm decoder block: masked self-attention, cross-attention,
/// then a GELU feed-forward layer.
#[derive(Debug, Clone, Copy)]
pub struct BlockParams {
    pub self_attn: AttentionParams,
    pub ln1: LayerNormParams,
    pub cross_attn: AttentionParams,
    pub ln2: LayerNormParams,
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub ln3: LayerNormParams,
}

#[derive(Debug, Clone)]
pub struct DecoderParams {
    pub embedding: ParamId,
    pub blocks: Vec<BlockParams>,
    pub out_w: ParamId,
    pub out_b: ParamId,
}

impl DecoderParams {
    pub(crate) fn register(
        store: &mut ParamStore,
        prefix: &str,
        vocab: usize,
        cfg: &ModelConfig,
        init: &mut Init,
    ) -> Result<Self> {
        let d = cfg.d_model;
        let embedding = init.embedding(store, &format!("{prefix}.emb"), vocab, d)?;
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for i in 0..cfg.n_blocks {
            let p = format!("{prefix}.block{i}");
            blocks.push(BlockParams {
                self_attn: AttentionParams::register(store, &format!("{p}.self"), d, init)?,
                ln1: LayerNormParams::register(store, &format!("{p}.ln1"), d, init)?,
                cross_attn: AttentionParams::register(store, &format!("{p}.cross"), d, init)?,
                ln2: LayerNormParams::register(store, &format!("{p}.ln2"), d, init)?,
                w1: init.linear(store, &format!("{p}.ffn.w1"), d, cfg.d_ff, 1.0)?,
                b1: init.zeros(store, &format!("{p}.ffn.b1"), &[cfg.d_ff])?,
                w2: init.linear(store, &format!("{p}.ffn.w2"), cfg.d_ff, d, 1.0)?,
                b2: init.zeros(store, &format!("{p}.ffn.b2"), &[d])?,
                ln3: LayerNormParams::register(store, &format!("{p}.ln3"), d, init)?,
            });
        }
        Ok(Self {
            embedding,
            blocks,
            out_w: init.linear(store, &format!("{prefix}.out.w"), d, vocab, cfg.output_gain)?,
            out_b: init.zeros(store, &format!("{prefix}.out.b"), &[vocab])?,
        })
    }
}

/// Per-position logits and final-block hidden states.
#[derive(Debug, Clone, Copy)]
pub struct DecoderOutput {
    pub logits: Var,
    pub hidden: Var,
}

/// Embeds `tokens`, adds positional encodings and runs every block with
/// cross-attention over `memory`.
pub fn decoder_forward(
    g: &mut Graph,
    bound: &Bound,
    p: &DecoderParams,
    cfg: &ModelConfig,
    pe: &Tensor,
    tokens: &[usize],
    memory: Var,
) -> Result<DecoderOutput> {
    let len = tokens.len();
    if len > cfg.max_len {
        return Err(Error::Overlength { len, max: cfg.max_len });
    }
    let d = cfg.d_model;
    let emb = g.embedding(bound[p.embedding], tokens)?;
    let emb = g.scale(emb, (d as f64).sqrt());
    let pos = g.constant(Tensor::new(vec![len, d], pe.data()[..len * d].to_vec())?);
    let x = g.add(emb, pos)?;
    let mut x = g.dropout(x, cfg.dropout)?;
    let mask = causal_mask(len);
    for b in &p.blocks {
        let a = multi_head_attention(g, bound, &b.self_attn, cfg.n_heads, x, x, x, Some(&mask))?;
        let a = g.dropout(a.output, cfg.dropout)?;
        let r = g.add(x, a)?;
        x = b.ln1.apply(g, bound, r)?;

        let c = multi_head_attention(g, bound, &b.cross_attn, cfg.n_heads, x, memory, memory, None)?;
        let c = g.dropout(c.output, cfg.dropout)?;
        let r = g.add(x, c)?;
        x = b.ln2.apply(g, bound, r)?;

        let h = g.matmul(x, bound[b.w1])?;
        let h = g.add(h, bound[b.b1])?;
        let h = g.gelu(h);
        let f = g.matmul(h, bound[b.w2])?;
        let f = g.add(f, bound[b.b2])?;
        let f = g.dropout(f, cfg.dropout)?;
        let r = g.add(x, f)?;
        x = b.ln3.apply(g, bound, r)?;
    }
    let logits = g.matmul(x, bound[p.out_w])?;
    let logits = g.add(logits, bound[p.out_b])?;
    Ok(DecoderOutput { logits, hidden: x })
}
