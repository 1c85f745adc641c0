use v2c_tensor::{Bound, Graph, ParamId, ParamStore, Var};

use super::Init;
use crate::error::{Error, Result};

/// Weights of the single-layer gated recurrent video encoder. Gate columns
/// are ordered input, forget, candidate, output.
#[derive(Debug, Clone, Copy)]
pub struct EncoderParams {
    pub w_in: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub feature_dim: usize,
    pub d_model: usize,
}

impl EncoderParams {
    pub(crate) fn register(store: &mut ParamStore, feature_dim: usize, d: usize, init: &mut Init) -> Result<Self> {
        Ok(Self {
            w_in: init.linear(store, "enc.w_in", feature_dim, 4 * d, 1.0)?,
            w_hh: init.linear(store, "enc.w_hh", d, 4 * d, 1.0)?,
            b: init.zeros(store, "enc.b", &[4 * d])?,
            feature_dim,
            d_model: d,
        })
    }
}

/// Hidden states of the encoder: one row per frame plus the last one.
#[derive(Debug, Clone, Copy)]
pub struct VideoEncoding {
    pub memory: Var,
    pub final_state: Var,
}

/// Runs the recurrence over `[n_frames, feature_dim]` input from a zero state.
pub fn encode_video(g: &mut Graph, bound: &Bound, p: &EncoderParams, frames: Var) -> Result<VideoEncoding> {
    let shape = g.shape(frames).to_vec();
    if shape.len() != 2 || shape[1] != p.feature_dim {
        return Err(Error::Dimension {
            what: "video features",
            expected: p.feature_dim,
            found: shape.last().copied().unwrap_or(0),
        });
    }
    let d = p.d_model;
    let projected = g.matmul(frames, bound[p.w_in])?;
    let projected = g.add(projected, bound[p.b])?;
    let mut states = Vec::with_capacity(shape[0]);
    let mut h: Option<Var> = None;
    let mut c: Option<Var> = None;
    for t in 0..shape[0] {
        let mut z = g.slice(projected, 0, t, t + 1)?;
        if let Some(h) = h {
            let rec = g.matmul(h, bound[p.w_hh])?;
            z = g.add(z, rec)?;
        }
        let zi = g.slice(z, 1, 0, d)?;
        let zf = g.slice(z, 1, d, 2 * d)?;
        let zg = g.slice(z, 1, 2 * d, 3 * d)?;
        let zo = g.slice(z, 1, 3 * d, 4 * d)?;
        let i = g.sigmoid(zi);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);
        let ic = g.mul(i, cand)?;
        let c_new = match c {
            Some(c_prev) => {
                let f = g.sigmoid(zf);
                let kept = g.mul(f, c_prev)?;
                g.add(kept, ic)?
            }
            None => ic,
        };
        let tc = g.tanh(c_new);
        let h_new = g.mul(o, tc)?;
        states.push(h_new);
        h = Some(h_new);
        c = Some(c_new);
    }
    let memory = if states.len() == 1 { states[0] } else { g.concat(&states, 0)? };
    Ok(VideoEncoding {
        memory,
        final_state: *states.last().expect("at least one frame"),
    })
}
