use v2c_tensor::{Bound, Graph, ParamId, ParamStore, Tensor, Var};

use crate::error::{Error, Result};

/// Projection weights of one multi-head attention layer.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub bo: ParamId,
}

impl AttentionParams {
    pub(crate) fn register(store: &mut ParamStore, prefix: &str, d: usize, init: &mut super::Init) -> Result<Self> {
        Ok(Self {
            wq: init.linear(store, &format!("{prefix}.wq"), d, d, 1.0)?,
            wk: init.linear(store, &format!("{prefix}.wk"), d, d, 1.0)?,
            wv: init.linear(store, &format!("{prefix}.wv"), d, d, 1.0)?,
            wo: init.linear(store, &format!("{prefix}.wo"), d, d, 1.0)?,
            bo: init.zeros(store, &format!("{prefix}.bo"), &[d])?,
        })
    }
}

/// Output of [`multi_head_attention`].
#[derive(Debug, Clone)]
pub struct Attended {
    pub output: Var,
    /// Per-head `[queries, keys]` attention weights.
    pub weights: Vec<Var>,
}

/// Row-major `[len, len]` keep-mask allowing each position to see itself
/// and earlier positions.
pub fn causal_mask(len: usize) -> Vec<bool> {
    (0..len * len).map(|i| i % len <= i / len).collect()
}

/// Scaled dot-product attention over `n_heads` column slices of the
/// projected queries, keys and values, followed by the output projection.
/// `mask`, when given, is a `[queries, keys]` keep-mask.
#[allow(clippy::too_many_arguments)]
pub fn multi_head_attention(
    g: &mut Graph,
    bound: &Bound,
    p: &AttentionParams,
    n_heads: usize,
    queries: Var,
    keys: Var,
    values: Var,
    mask: Option<&[bool]>,
) -> Result<Attended> {
    let lq = g.shape(queries)[0];
    let lk = g.shape(keys)[0];
    let lv = g.shape(values)[0];
    if lk != lv {
        return Err(Error::LengthMismatch {
            what: "attention keys and values",
            left: lk,
            right: lv,
        });
    }
    if let Some(m) = mask {
        if m.len() != lq * lk {
            return Err(Error::LengthMismatch {
                what: "attention mask",
                left: m.len(),
                right: lq * lk,
            });
        }
    }
    let d = g.shape(queries)[1];
    if n_heads == 0 || !d.is_multiple_of(n_heads) {
        return Err(Error::Config(format!("width {d} not divisible into {n_heads} heads")));
    }
    let dk = d / n_heads;
    let q = g.matmul(queries, bound[p.wq])?;
    let k = g.matmul(keys, bound[p.wk])?;
    let v = g.matmul(values, bound[p.wv])?;
    let scale = 1.0 / (dk as f64).sqrt();
    let mut heads = Vec::with_capacity(n_heads);
    let mut weights = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (lo, hi) = (h * dk, (h + 1) * dk);
        let qh = g.slice(q, 1, lo, hi)?;
        let kh = g.slice(k, 1, lo, hi)?;
        let vh = g.slice(v, 1, lo, hi)?;
        let kt = g.transpose(kh)?;
        let s = g.matmul(qh, kt)?;
        let s = g.scale(s, scale);
        let w = match mask {
            Some(m) => g.masked_softmax(s, m)?,
            None => g.softmax(s, 1)?,
        };
        heads.push(g.matmul(w, vh)?);
        weights.push(w);
    }
    let cat = if heads.len() == 1 { heads[0] } else { g.concat(&heads, 1)? };
    let out = g.matmul(cat, bound[p.wo])?;
    let output = g.add(out, bound[p.bo])?;
    Ok(Attended { output, weights })
}

/// Sinusoidal table: `PE[p, 2i] = sin(p / 10000^(2i/d))`, `PE[p, 2i+1] = cos(...)`.
/// Both arguments must be positive.
pub fn positional_encoding(max_len: usize, d_model: usize) -> Tensor {
    let mut data = vec![0.0; max_len * d_model];
    for p in 0..max_len {
        for j in 0..d_model {
            let i2 = (j - j % 2) as f64;
            let angle = p as f64 / 10000f64.powf(i2 / d_model as f64);
            data[p * d_model + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(vec![max_len, d_model], data).expect("positive table dimensions")
}
