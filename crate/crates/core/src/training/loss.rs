use v2c_tensor::{Graph, Reduction, Var};

use crate::error::{Error, Result};
use crate::vocab::PAD;

/// The joint objective and its two parts.
#[derive(Debug, Clone, Copy)]
pub struct JointLoss {
    pub total: Var,
    pub caption: Var,
    pub commonsense: Var,
}

/// Mean per-token negative log-likelihood of `targets` under `[n, vocab]`
/// logits, skipping `<pad>` targets.
pub fn stream_loss(g: &mut Graph, logits: Var, targets: &[usize]) -> Result<Var> {
    let rows = g.shape(logits)[0];
    if rows != targets.len() {
        return Err(Error::LengthMismatch {
            what: "logits and targets",
            left: rows,
            right: targets.len(),
        });
    }
    let logp = g.log_softmax(logits)?;
    Ok(g.nll_loss(logp, targets, Some(PAD), Reduction::Mean)?)
}

/// Caption loss plus commonsense loss, each a per-token mean.
pub fn joint_loss(
    g: &mut Graph,
    caption_logits: Var,
    caption_target: &[usize],
    cms_logits: Var,
    cms_target: &[usize],
) -> Result<JointLoss> {
    let caption = stream_loss(g, caption_logits, caption_target)?;
    let commonsense = stream_loss(g, cms_logits, cms_target)?;
    let total = g.add(caption, commonsense)?;
    Ok(JointLoss {
        total,
        caption,
        commonsense,
    })
}
