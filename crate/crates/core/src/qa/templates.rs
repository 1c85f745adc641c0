use log::warn;
use serde::{Deserialize, Serialize};

use super::extract::{present_participle, Extractor, RuleExtractor};
use super::negatives::Miner;
use crate::corpus::V2CRecord;
use crate::vocab::CommonsenseType;

pub const N_QTYPES: usize = 21;
pub const PER_GROUP: usize = 7;
pub const YES: &str = "yes";
pub const NO: &str = "no";

/// Where a template's answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    /// All true annotations of the group's type.
    Truth,
    /// Mined distractors; the true annotations become the negatives.
    Distractor,
    Yes,
    No,
    /// "yes" to a negated question about a mined distractor.
    YesNotDistractor,
}

#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub id: usize,
    pub group: CommonsenseType,
    pub pattern: &'static str,
    pub answer: AnswerKind,
}

use AnswerKind::*;
use CommonsenseType::{Attribute as A, Effect as E, Intention as I};

/// Slots: `{subject}`, `{action}`, `{action_ing}`, `{intention}`,
/// `{effect}`, `{attribute}`, `{distractor}`.
pub const TEMPLATES: [Template; N_QTYPES] = [
    Template { id: 0, group: I, pattern: "What might be the goal of the person?", answer: Truth },
    Template { id: 1, group: I, pattern: "What could the person not want to achieve?", answer: Distractor },
    Template { id: 2, group: I, pattern: "What prompts the person to {action}?", answer: Truth },
    Template { id: 3, group: I, pattern: "What did not lead the person to {action}?", answer: Distractor },
    Template { id: 4, group: I, pattern: "Why might the person be {action_ing}?", answer: Truth },
    Template { id: 5, group: I, pattern: "Does the person wish to {intention}?", answer: Yes },
    Template { id: 6, group: I, pattern: "Does the person want to not {intention}?", answer: No },
    Template { id: 7, group: E, pattern: "What will the person do after this?", answer: Truth },
    Template { id: 8, group: E, pattern: "What does not happen as a result?", answer: Distractor },
    Template { id: 9, group: E, pattern: "What does the {action_ing} end up in?", answer: Truth },
    Template { id: 10, group: E, pattern: "What will not happen due to the {action_ing}?", answer: Distractor },
    Template { id: 11, group: E, pattern: "How does the person feel after {action_ing}?", answer: Truth },
    Template { id: 12, group: E, pattern: "Could the person {effect} as a result?", answer: Yes },
    Template { id: 13, group: E, pattern: "Will the person not {effect}?", answer: No },
    Template { id: 14, group: A, pattern: "What trait does {subject} possess?", answer: Truth },
    Template { id: 15, group: A, pattern: "What attribute does not match with the person?", answer: Distractor },
    Template { id: 16, group: A, pattern: "How can the person be described?", answer: Truth },
    Template { id: 17, group: A, pattern: "How can the {action_ing} person be characterized?", answer: Truth },
    Template { id: 18, group: A, pattern: "Is the person who is {action_ing} {attribute}?", answer: Yes },
    Template { id: 19, group: A, pattern: "Is the person {attribute}?", answer: Yes },
    Template { id: 20, group: A, pattern: "Is the person not {distractor}?", answer: YesNotDistractor },
];

pub fn qtype_group(qtype: usize) -> CommonsenseType {
    CommonsenseType::ALL[qtype / PER_GROUP]
}

/// One generated question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaSample {
    pub video_id: String,
    pub qtype: usize,
    pub question: String,
    pub answers: Vec<String>,
    pub negatives: Vec<String>,
}

/// Third-person verb phrase to base form: `gets applause` -> `get applause`.
pub fn base_verb_phrase(phrase: &str) -> String {
    let mut words: Vec<&str> = phrase.split_whitespace().collect();
    if words.len() > 1 && words[0].eq_ignore_ascii_case("the") && words[1].eq_ignore_ascii_case("person") {
        words.drain(..2);
    }
    let Some(first) = words.first() else {
        return String::new();
    };
    let base = if let Some(stem) = first.strip_suffix("ies") {
        format!("{stem}y")
    } else if ["sses", "shes", "ches", "xes", "zes"].iter().any(|s| first.ends_with(s)) {
        first[..first.len() - 2].to_string()
    } else if first.ends_with('s') && !first.ends_with("ss") && first.len() > 2 {
        first[..first.len() - 1].to_string()
    } else {
        first.to_string()
    };
    std::iter::once(base.as_str())
        .chain(words[1..].iter().copied())
        .collect::<Vec<_>>()
        .join(" ")
}

fn strip_to(intention: &str) -> &str {
    intention.strip_prefix("to ").unwrap_or(intention).trim()
}

/// Questions generated from one record plus bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QaGeneration {
    pub samples: Vec<QaSample>,
    /// Types with no annotations; their seven templates were skipped.
    pub skipped_types: Vec<CommonsenseType>,
    /// Questions whose distractor list came up short.
    pub exhausted: usize,
    /// Questions dropped because no distractor existed at all.
    pub dropped: usize,
}

/// Builds 21 questions for each caption of `record`. The `k`-th caption uses
/// the `k mod n`-th annotation of each type to fill its slots.
pub fn generate_questions(record: &V2CRecord, miner: &Miner) -> QaGeneration {
    generate_questions_with(record, miner, &RuleExtractor)
}

pub fn generate_questions_with(record: &V2CRecord, miner: &Miner, extractor: &dyn Extractor) -> QaGeneration {
    let mut out = QaGeneration::default();
    for ty in CommonsenseType::ALL {
        if record.commonsense.get(ty).is_empty() {
            warn!("{}: no {ty} annotations, skipping its templates", record.video_id);
            out.skipped_types.push(ty);
        }
    }
    for (k, caption) in record.captions.iter().enumerate() {
        let (subject, action) = extractor.extract(caption);
        let action_ing = present_participle(&action);
        let slot = |ty: CommonsenseType| {
            let list = record.commonsense.get(ty);
            list.get(k % list.len().max(1)).cloned().unwrap_or_default()
        };
        let intention = slot(CommonsenseType::Intention);
        let effect = slot(CommonsenseType::Effect);
        let attribute = slot(CommonsenseType::Attribute);
        for t in &TEMPLATES {
            if out.skipped_types.contains(&t.group) {
                continue;
            }
            let truths = record.commonsense.get(t.group);
            let context = format!("{caption} {}", slot(t.group));
            let needs_mining = matches!(t.answer, Distractor | YesNotDistractor);
            let mined = needs_mining.then(|| miner.mine(t.group, &context, truths));
            if let Some(m) = &mined {
                if m.distractors.is_empty() {
                    out.dropped += 1;
                    continue;
                }
                if m.exhausted {
                    out.exhausted += 1;
                }
            }
            let distractor = mined.as_ref().and_then(|m| m.distractors.first()).cloned().unwrap_or_default();
            let question = t
                .pattern
                .replace("{subject}", &subject)
                .replace("{action_ing}", &action_ing)
                .replace("{action}", &action)
                .replace("{intention}", strip_to(&intention))
                .replace("{effect}", &base_verb_phrase(&effect))
                .replace("{attribute}", &attribute)
                .replace("{distractor}", &distractor);
            let (answers, negatives) = match t.answer {
                Truth => (
                    truths.to_vec(),
                    miner.mine(t.group, &context, truths).distractors,
                ),
                Distractor => (mined.expect("mined above").distractors, truths.to_vec()),
                Yes | YesNotDistractor => (vec![YES.into()], vec![NO.into()]),
                No => (vec![NO.into()], vec![YES.into()]),
            };
            out.samples.push(QaSample {
                video_id: record.video_id.clone(),
                qtype: t.id,
                question,
                answers,
                negatives,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Commonsense;
    use crate::qa::negatives::AnswerPool;

    fn record(attrs: Vec<String>) -> V2CRecord {
        V2CRecord {
            video_id: "v".into(),
            features_path: "f".into(),
            captions: vec!["a woman is dancing at a party".into()],
            commonsense: Commonsense {
                intentions: vec!["to get recognition".into()],
                effects: vec!["gets noticed".into()],
                attributes: attrs,
            },
            stories: None,
        }
    }

    fn miner() -> Miner {
        let other = V2CRecord {
            commonsense: Commonsense {
                intentions: vec!["to bake a cake".into()],
                effects: vec!["feels sad".into()],
                attributes: vec!["tense".into()],
            },
            ..record(vec![])
        };
        Miner::new(AnswerPool::from_records([&record(vec!["graceful".into()]), &other]))
    }

    #[test]
    fn table_layout() {
        for (i, t) in TEMPLATES.iter().enumerate() {
            assert_eq!(t.id, i);
            assert_eq!(qtype_group(i), t.group);
        }
    }

    #[test]
    fn full_record_gives_21() {
        let g = generate_questions(&record(vec!["graceful".into()]), &miner());
        assert_eq!(g.samples.len(), 21);
        let ids: Vec<usize> = g.samples.iter().map(|s| s.qtype).collect();
        assert_eq!(ids, (0..21).collect::<Vec<_>>());
        let neg = &g.samples[6];
        assert_eq!(neg.question, "Does the person want to not get recognition?");
        assert_eq!(neg.answers, ["no"]);
        assert_eq!(g.samples[12].question, "Could the person get noticed as a result?");
        assert_eq!(g.samples[20].question, "Is the person not tense?");
        assert_eq!(g.samples[20].answers, ["yes"]);
        assert_eq!(g.samples[14].question, "What trait does a woman possess?");
        assert_eq!(g.samples[1].answers, ["to bake a cake"]);
        assert_eq!(g.samples[1].negatives, ["to get recognition"]);
        for s in &g.samples {
            assert!(s.answers.iter().all(|a| !s.negatives.contains(a)));
        }
    }

    #[test]
    fn missing_type_skips_seven() {
        let g = generate_questions(&record(vec![]), &miner());
        assert_eq!(g.samples.len(), 14);
        assert_eq!(g.skipped_types, [CommonsenseType::Attribute]);
    }

    #[test]
    fn base_forms() {
        assert_eq!(base_verb_phrase("gets applause"), "get applause");
        assert_eq!(base_verb_phrase("the person gets sad"), "get sad");
        assert_eq!(base_verb_phrase("catches the ball"), "catch the ball");
        assert_eq!(base_verb_phrase("cries"), "cry");
        assert_eq!(base_verb_phrase("learn a new dance"), "learn a new dance");
    }
}
