use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::features::VideoFeatures;
use crate::error::{Error, Result};
use crate::vocab::CommonsenseType;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commonsense {
    #[serde(default)]
    pub intentions: Vec<String>,
    #[serde(default)]
    pub effects: Vec<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl Commonsense {
    pub fn get(&self, ty: CommonsenseType) -> &[String] {
        match ty {
            CommonsenseType::Intention => &self.intentions,
            CommonsenseType::Effect => &self.effects,
            CommonsenseType::Attribute => &self.attributes,
        }
    }

    pub fn get_mut(&mut self, ty: CommonsenseType) -> &mut Vec<String> {
        match ty {
            CommonsenseType::Intention => &mut self.intentions,
            CommonsenseType::Effect => &mut self.effects,
            CommonsenseType::Attribute => &mut self.attributes,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.intentions.iter().chain(&self.effects).chain(&self.attributes)
    }

    pub fn is_complete(&self) -> bool {
        CommonsenseType::ALL.iter().all(|&t| !self.get(t).is_empty())
    }

    pub fn len(&self) -> usize {
        self.intentions.len() + self.effects.len() + self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One video's captions and commonsense annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct V2CRecord {
    pub video_id: String,
    pub features_path: String,
    pub captions: Vec<String>,
    #[serde(default)]
    pub commonsense: Commonsense,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stories: Option<Vec<String>>,
}

impl V2CRecord {
    /// Resolves `features_path` against `base` when it is relative.
    pub fn resolve_features(&self, base: &Path) -> PathBuf {
        let p = Path::new(&self.features_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn load_features(&self, base: &Path) -> Result<VideoFeatures> {
        Ok(VideoFeatures::load(self.resolve_features(base), self.video_id.clone())?)
    }
}

/// An if-then knowledge entry: an event and what tends to surround it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEvent {
    pub event: String,
    #[serde(default)]
    pub intentions: Vec<String>,
    #[serde(default)]
    pub effects: Vec<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl KnowledgeEvent {
    pub fn get(&self, ty: CommonsenseType) -> &[String] {
        match ty {
            CommonsenseType::Intention => &self.intentions,
            CommonsenseType::Effect => &self.effects,
            CommonsenseType::Attribute => &self.attributes,
        }
    }
}

/// A text line keyed by video and stream, used for references and predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyedText {
    pub video_id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub text: String,
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_jsonl(BufReader::new(f))
}

pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| Error::Json { line: i + 1, source })?);
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: impl AsRef<Path>,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|source| Error::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Records plus their loaded features, in file order.
pub fn load_corpus(records_path: impl AsRef<Path>) -> Result<Vec<(V2CRecord, VideoFeatures)>> {
    let records_path = records_path.as_ref();
    let base = records_path.parent().unwrap_or(Path::new("."));
    let records: Vec<V2CRecord> = read_jsonl(records_path)?;
    if records.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    records
        .into_iter()
        .map(|r| {
            let f = r.load_features(base)?;
            Ok((r, f))
        })
        .collect()
}
