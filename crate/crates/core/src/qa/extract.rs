//! Rule-based subject and action extraction from captions.

use crate::text::tokenize;

/// Verb lemmas recognised as actions.
pub const VERB_LEXICON: &[&str] = &[
    "bake", "bike", "blow", "bounce", "box", "build", "carry", "catch", "chase", "chat", "cheer",
    "clap", "clean", "climb", "cook", "cry", "cut", "dance", "dive", "do", "draw", "drink", "drive",
    "drum", "eat", "explain", "fight", "fix", "fly", "fold", "get", "give", "hit", "hold", "hug",
    "jog", "juggle", "jump", "kick", "kiss", "knit", "laugh", "lift", "listen", "make", "mix",
    "paint", "perform", "pet", "pitch", "plant", "play", "pour", "practice", "present", "punch",
    "put", "race", "read", "repair", "ride", "run", "sew", "shoot", "shop", "show", "sing", "sit",
    "skate", "ski", "sleep", "slice", "smile", "speak", "spin", "stand", "stir", "surf", "swim",
    "swing", "talk", "teach", "tell", "throw", "type", "walk", "wash", "watch", "wave", "win",
    "wrestle", "write", "yell",
];

/// Lemmas whose final consonant doubles before `-ing`/`-ed`.
const DOUBLING: &[&str] = &[
    "chat", "clap", "cut", "drum", "get", "hit", "jog", "pet", "put", "run", "shop", "sit", "spin",
    "swim", "win",
];

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "two", "three", "four", "five", "some", "several", "many", "one", "this",
    "that", "these", "those", "his", "her", "their", "another", "group",
];

const AUXILIARIES: &[&str] = &["is", "are", "was", "were", "be", "being", "been", "am", "has", "have", "gets"];

pub fn is_verb(lemma: &str) -> bool {
    VERB_LEXICON.binary_search(&lemma).is_ok()
}

/// Maps an inflected form onto a lexicon lemma, if any suffix rule lands on one.
pub fn lemmatize_verb(token: &str) -> Option<&'static str> {
    let mut candidates = vec![token.to_string()];
    for (suffix, repl) in [("ing", ""), ("ing", "e"), ("ies", "y"), ("ied", "y"), ("es", ""), ("s", ""), ("ed", ""), ("ed", "e"), ("d", "")] {
        if let Some(base) = token.strip_suffix(suffix) {
            if base.len() >= 2 {
                candidates.push(format!("{base}{repl}"));
                let b = base.as_bytes();
                if repl.is_empty() && b.len() >= 3 && b[b.len() - 1] == b[b.len() - 2] {
                    candidates.push(base[..base.len() - 1].to_string());
                }
            }
        }
    }
    candidates
        .into_iter()
        .find_map(|c| VERB_LEXICON.binary_search(&c.as_str()).ok().map(|i| VERB_LEXICON[i]))
}

/// `sing` -> `singing`, `dance` -> `dancing`, `run` -> `running`.
pub fn present_participle(lemma: &str) -> String {
    if let Some(stem) = lemma.strip_suffix("ie") {
        return format!("{stem}ying");
    }
    if DOUBLING.contains(&lemma) {
        let last = &lemma[lemma.len() - 1..];
        return format!("{lemma}{last}ing");
    }
    match lemma.strip_suffix('e') {
        Some(stem) if !lemma.ends_with("ee") && stem.len() >= 2 => format!("{stem}ing"),
        _ => format!("{lemma}ing"),
    }
}

/// Turns a caption into `(subject phrase, action lemma)`.
pub trait Extractor {
    fn extract(&self, caption: &str) -> (String, String);
}

/// Determiner/noun rules plus the bundled verb lexicon.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleExtractor;

impl Extractor for RuleExtractor {
    fn extract(&self, caption: &str) -> (String, String) {
        extract_subject_action(&tokenize(caption))
    }
}

/// `["a","man","is","singing"]` -> `("a man", "sing")`. Falls back to
/// `("person", "do")` when no lexicon verb is found.
pub fn extract_subject_action<S: AsRef<str>>(tokens: &[S]) -> (String, String) {
    let toks: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    let verb_at = toks.iter().position(|t| !AUXILIARIES.contains(t) && lemmatize_verb(t).is_some() && !DETERMINERS.contains(t));
    let Some(v) = verb_at else {
        return ("person".into(), "do".into());
    };
    let action = lemmatize_verb(toks[v]).expect("found above").to_string();
    let end = toks[..v].iter().position(|t| AUXILIARIES.contains(t)).unwrap_or(v);
    let phrase: Vec<&str> = toks[..end]
        .iter()
        .copied()
        .filter(|t| t.chars().any(char::is_alphanumeric))
        .collect();
    let subject = if phrase.is_empty() || (phrase.len() == 1 && DETERMINERS.contains(&phrase[0])) {
        "person".to_string()
    } else {
        phrase.join(" ")
    };
    (subject, action)
}
