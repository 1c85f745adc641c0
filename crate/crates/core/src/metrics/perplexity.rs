use v2c_tensor::{Graph, Reduction};

use crate::error::{Error, Result};
use crate::model::V2CModel;
use crate::training::{teacher_forcing, PreparedRecord};
use crate::vocab::{BOS, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerplexityStream {
    Caption,
    /// Every target under every caption, as in training.
    Commonsense,
}

/// `exp` of the mean per-token negative log-likelihood under teacher forcing,
/// with `<pad>` targets excluded.
pub fn perplexity(model: &V2CModel, records: &[PreparedRecord], stream: PerplexityStream) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for rec in records {
        let mut g = Graph::new(0);
        g.set_train(false);
        let b = g.bind_frozen(&model.params);
        let v = model.encode(&mut g, &b, &rec.features)?;
        for caption in &rec.captions {
            let (input, target) = teacher_forcing(BOS, caption);
            let out = model.caption_forward(&mut g, &b, &v, &input)?;
            let mut add = |g: &mut Graph, logits, target: &[usize]| -> Result<()> {
                let logp = g.log_softmax(logits)?;
                let nll = g.nll_loss(logp, target, Some(PAD), Reduction::Sum)?;
                total += g.value(nll).data()[0];
                count += target.iter().filter(|&&t| t != PAD).count();
                Ok(())
            };
            match stream {
                PerplexityStream::Caption => add(&mut g, out.logits, &target)?,
                PerplexityStream::Commonsense => {
                    for (ty, words) in &rec.targets {
                        let (input, target) = teacher_forcing(ty.begin_marker(), words);
                        let o = model.commonsense_forward(&mut g, &b, &v, out.hidden, &input, *ty)?;
                        add(&mut g, o.logits, &target)?;
                    }
                }
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok((total / count as f64).exp())
}
