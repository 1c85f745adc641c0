//! Checkpoint directories: weights, model config and both vocabularies.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use v2c_tensor::read_snapshot;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::V2CModel;
use crate::vocab::Vocabulary;

pub const WEIGHTS_FILE: &str = "model.v2ct";
pub const CONFIG_FILE: &str = "model.cfg";
pub const CAPTION_VOCAB_FILE: &str = "caption.vocab";
pub const COMMONSENSE_VOCAB_FILE: &str = "commonsense.vocab";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: V2CModel,
    pub caption_vocab: Vocabulary,
    pub commonsense_vocab: Vocabulary,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::file(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).map_err(|e| Error::file(path, e))?))
}

pub fn save_checkpoint(
    dir: impl AsRef<Path>,
    model: &V2CModel,
    caption_vocab: &Vocabulary,
    commonsense_vocab: &Vocabulary,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut w = create(&dir.join(WEIGHTS_FILE))?;
    model.params.write_snapshot(&mut w)?;
    w.flush()?;
    let cfg_path = dir.join(CONFIG_FILE);
    fs::write(&cfg_path, model.config().to_text()).map_err(|e| Error::file(&cfg_path, e))?;
    for (name, vocab) in [(CAPTION_VOCAB_FILE, caption_vocab), (COMMONSENSE_VOCAB_FILE, commonsense_vocab)] {
        let mut w = create(&dir.join(name))?;
        vocab.write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn load_checkpoint(dir: impl AsRef<Path>) -> Result<Checkpoint> {
    let dir = dir.as_ref();
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::file(&cfg_path, e))?;
    let cfg = ModelConfig::from_text(&text)?;
    let entries = read_snapshot(&mut open(&dir.join(WEIGHTS_FILE))?)?;
    let model = V2CModel::from_named(cfg, entries)?;
    let caption_vocab = Vocabulary::read(open(&dir.join(CAPTION_VOCAB_FILE))?)?;
    let commonsense_vocab = Vocabulary::read(open(&dir.join(COMMONSENSE_VOCAB_FILE))?)?;
    if caption_vocab.len() != model.config().caption_vocab || commonsense_vocab.len() != model.config().commonsense_vocab {
        return Err(Error::Vocab("vocabulary sizes do not match the model config".into()));
    }
    Ok(Checkpoint {
        model,
        caption_vocab,
        commonsense_vocab,
    })
}
