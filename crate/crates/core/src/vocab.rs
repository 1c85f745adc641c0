//! Token vocabularies for the caption and commonsense streams.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::V2CRecord;
use crate::error::{Error, Result};
use crate::text::{detokenize, tokenize};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const BOI: usize = 4;
pub const BOE: usize = 5;
pub const BOA: usize = 6;

const BASE_SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];
const TYPE_MARKERS: [&str; 3] = ["<boi>", "<boe>", "<boa>"];

/// The three commonsense relation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommonsenseType {
    Intention,
    Effect,
    Attribute,
}

impl CommonsenseType {
    pub const ALL: [CommonsenseType; 3] = [Self::Intention, Self::Effect, Self::Attribute];

    /// Begin-of-sequence marker id in the commonsense vocabulary.
    pub fn begin_marker(self) -> usize {
        match self {
            Self::Intention => BOI,
            Self::Effect => BOE,
            Self::Attribute => BOA,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Intention => "intention",
            Self::Effect => "effect",
            Self::Attribute => "attribute",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl std::fmt::Display for CommonsenseType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Caption,
    Commonsense,
}

impl Stream {
    fn specials(self) -> Vec<&'static str> {
        let mut s = BASE_SPECIALS.to_vec();
        if self == Stream::Commonsense {
            s.extend(TYPE_MARKERS);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    stream: Stream,
    n_special: usize,
    min_frequency: usize,
}

impl Vocabulary {
    /// Builds a vocabulary over one stream of the corpus. Tokens seen fewer
    /// than `min_freq` times map to `<unk>`; the rest are ordered by
    /// descending frequency, then lexicographically.
    pub fn build(corpus: &[V2CRecord], stream: Stream, min_freq: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let texts: Vec<&str> = match stream {
            Stream::Caption => corpus.iter().flat_map(|r| r.captions.iter()).map(String::as_str).collect(),
            Stream::Commonsense => corpus
                .iter()
                .flat_map(|r| {
                    r.commonsense.all().chain(r.stories.iter().flatten())
                })
                .map(String::as_str)
                .collect(),
        };
        Ok(Self::from_texts(texts, stream, min_freq))
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, stream: Stream, min_freq: usize) -> Self {
        let specials = stream.specials();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_freq.max(1) && !specials.contains(&t.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens: Vec<String> = specials
            .iter()
            .map(|s| s.to_string())
            .chain(kept.into_iter().map(|(t, _)| t))
            .collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            index,
            stream,
            n_special: specials.len(),
            min_frequency: min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn stream(&self) -> Stream {
        self.stream
    }

    pub fn min_frequency(&self) -> usize {
        self.min_frequency
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn is_special(&self, id: usize) -> bool {
        id < self.n_special
    }

    /// Ids that decoding must never emit: every special except `<eos>`.
    pub fn banned_in_output(&self) -> Vec<usize> {
        (0..self.n_special).filter(|&i| i != EOS).collect()
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(UNK))
            .collect()
    }

    /// Joins the non-special tokens of `ids` with single spaces.
    pub fn decode(&self, ids: &[usize]) -> String {
        let toks: Vec<&str> = ids
            .iter()
            .filter(|&&i| !self.is_special(i))
            .filter_map(|&i| self.token(i))
            .collect();
        detokenize(&toks)
    }

    /// Writes `token<TAB>id` lines.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{t}\t{i}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (tok, id) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Vocab(format!("line {}: missing tab", n + 1)))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::Vocab(format!("line {}: bad id {id:?}", n + 1)))?;
            if id != tokens.len() {
                return Err(Error::Vocab(format!("line {}: id {id} is not dense", n + 1)));
            }
            tokens.push(tok.to_string());
        }
        let stream = if tokens.len() >= 7 && tokens[4..7] == TYPE_MARKERS.map(String::from) {
            Stream::Commonsense
        } else {
            Stream::Caption
        };
        let specials = stream.specials();
        if tokens.len() < specials.len() || tokens[..specials.len()] != specials.iter().map(|s| s.to_string()).collect::<Vec<_>>()[..] {
            return Err(Error::Vocab("special tokens missing or out of order".into()));
        }
        let mut index = HashMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Vocab(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            index,
            stream,
            n_special: specials.len(),
            min_frequency: 1,
        })
    }
}
