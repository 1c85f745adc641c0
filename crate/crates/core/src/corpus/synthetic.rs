//! Deterministic desk-scale corpus whose features genuinely predict its text.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::features::VideoFeatures;
use super::record::{write_jsonl, Commonsense, KeyedText, KnowledgeEvent, V2CRecord};
use crate::error::{Error, Result};
use crate::vocab::CommonsenseType;

struct Template {
    verb: &'static str,
    participle: &'static str,
    objects: [&'static str; 3],
    intentions: [&'static str; 3],
    effects: [&'static str; 3],
    attributes: [&'static str; 3],
}

const TEMPLATES: &[Template] = &[
    Template {
        verb: "sings",
        participle: "singing",
        objects: ["a song", "on a stage", "into a microphone"],
        intentions: ["to entertain the crowd", "to perform music", "to record a music video"],
        effects: ["gets applause from the audience", "earns some money", "becomes famous"],
        attributes: ["musical", "talented", "confident"],
    },
    Template {
        verb: "cooks",
        participle: "cooking",
        objects: ["a meal", "some pasta", "in the kitchen"],
        intentions: ["to feed the family", "to make dinner", "to eat something tasty"],
        effects: ["gets full", "cleans the kitchen", "shares the food"],
        attributes: ["hungry", "skilled", "caring"],
    },
    Template {
        verb: "wrestles",
        participle: "wrestling",
        objects: ["with a friend", "on a mat", "in a ring"],
        intentions: ["to win the match", "to get stronger", "to win the medal"],
        effects: ["gets tired", "feels sore", "wins a trophy"],
        attributes: ["strong", "competitive", "athletic"],
    },
    Template {
        verb: "plays",
        participle: "playing",
        objects: ["a guitar", "the piano", "the drums"],
        intentions: ["to practice music", "to relax", "to impress friends"],
        effects: ["improves skills", "feels relaxed", "gets praised"],
        attributes: ["creative", "patient", "artistic"],
    },
    Template {
        verb: "runs",
        participle: "running",
        objects: ["on a track", "in a park", "down the street"],
        intentions: ["to stay fit", "to win the race", "to lose weight"],
        effects: ["gets sweaty", "feels exhausted", "breathes heavily"],
        attributes: ["energetic", "healthy", "determined"],
    },
    Template {
        verb: "dances",
        participle: "dancing",
        objects: ["to music", "with a partner", "at a party"],
        intentions: ["to have fun", "to show off moves", "to get recognition"],
        effects: ["feels happy", "makes new friends", "gets noticed"],
        attributes: ["graceful", "outgoing", "joyful"],
    },
];

const SUBJECTS: &[&str] = &["a man", "a woman", "a boy", "a girl", "a person"];

pub const N_TEMPLATES: usize = 6;
const N_VARIANTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_videos: usize,
    pub n_frames: usize,
    pub dim: usize,
    /// Standard deviation of per-frame noise around the video's mean.
    pub noise: f64,
    pub captions_per_video: usize,
    pub strings_per_type: usize,
    pub stories: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_videos: 30,
            n_frames: 40,
            dim: 64,
            noise: 0.3,
            captions_per_video: 1,
            strings_per_type: 1,
            stories: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub records: Vec<V2CRecord>,
    pub features: Vec<VideoFeatures>,
    pub knowledge: Vec<KnowledgeEvent>,
    /// Activity template index of each record.
    pub templates: Vec<usize>,
}

fn caption_forms(subject: &str, t: &Template, object: &str) -> [String; 4] {
    [
        format!("{subject} is {} {object}", t.participle),
        format!("{subject} {} {object}", t.verb),
        format!("there is {subject} {} {object}", t.participle),
        format!("we see {subject} {} {object}", t.participle),
    ]
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    let d = Normal::new(0.0, std).expect("finite std");
    (0..n).map(|_| d.sample(rng)).collect()
}

pub fn make_synthetic_corpus(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.n_videos == 0 || cfg.n_frames == 0 || cfg.dim == 0 {
        return Err(Error::InvalidArgument("synthetic corpus needs videos, frames and dims".into()));
    }
    if !(cfg.noise >= 0.0 && cfg.noise.is_finite()) {
        return Err(Error::InvalidArgument(format!("bad noise level {}", cfg.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let centers: Vec<Vec<f64>> = (0..N_TEMPLATES).map(|_| gaussian(&mut rng, cfg.dim, 1.0)).collect();
    let subject_offsets: Vec<Vec<f64>> = SUBJECTS.iter().map(|_| gaussian(&mut rng, cfg.dim, 0.5)).collect();
    let variant_offsets: Vec<Vec<f64>> = (0..N_TEMPLATES * N_VARIANTS)
        .map(|_| gaussian(&mut rng, cfg.dim, 0.5))
        .collect();

    let n_caps = cfg.captions_per_video.clamp(1, 4);
    let n_strings = cfg.strings_per_type.clamp(1, N_VARIANTS);
    let mut out = SyntheticCorpus {
        records: Vec::with_capacity(cfg.n_videos),
        features: Vec::with_capacity(cfg.n_videos),
        knowledge: Vec::new(),
        templates: Vec::with_capacity(cfg.n_videos),
    };
    for i in 0..cfg.n_videos {
        let ti = i % N_TEMPLATES;
        let si = (i / N_TEMPLATES) % SUBJECTS.len();
        let vi = rng.random_range(0..N_VARIANTS);
        let t = &TEMPLATES[ti];
        let video_id = format!("video{i:04}");

        let mean: Vec<f64> = (0..cfg.dim)
            .map(|d| centers[ti][d] + subject_offsets[si][d] + variant_offsets[ti * N_VARIANTS + vi][d])
            .collect();
        let noise = Normal::new(0.0, cfg.noise).expect("validated noise");
        let data: Vec<f32> = (0..cfg.n_frames)
            .flat_map(|_| mean.iter().map(|m| (m + noise.sample(&mut rng)) as f32).collect::<Vec<_>>())
            .collect();
        let features = VideoFeatures::new(video_id.clone(), cfg.n_frames, cfg.dim, data)?;

        let captions: Vec<String> = caption_forms(SUBJECTS[si], t, t.objects[vi])[..n_caps].to_vec();
        let pick = |pool: &[&str; 3]| -> Vec<String> {
            (0..n_strings).map(|j| pool[(vi + j) % N_VARIANTS].to_string()).collect()
        };
        let commonsense = Commonsense {
            intentions: pick(&t.intentions),
            effects: pick(&t.effects),
            attributes: pick(&t.attributes),
        };
        let stories = cfg.stories.then(|| {
            vec![format!(
                "{} because they want {} , so the person {} and is {} .",
                captions[0], commonsense.intentions[0], commonsense.effects[0], commonsense.attributes[0]
            )]
        });
        out.records.push(V2CRecord {
            video_id: video_id.clone(),
            features_path: format!("features/{video_id}.v2cf"),
            captions,
            commonsense,
            stories,
        });
        out.features.push(features);
        out.templates.push(ti);
    }
    out.knowledge = TEMPLATES
        .iter()
        .flat_map(|t| {
            t.objects.iter().map(move |o| KnowledgeEvent {
                event: format!("PersonX {} {o}", t.verb),
                intentions: t.intentions.iter().map(|s| s.to_string()).collect(),
                effects: t.effects.iter().map(|s| s.to_string()).collect(),
                attributes: t.attributes.iter().map(|s| s.to_string()).collect(),
            })
        })
        .collect();
    Ok(out)
}

impl SyntheticCorpus {
    /// Every caption and commonsense string as keyed reference lines.
    pub fn references(&self) -> Vec<KeyedText> {
        let mut out = Vec::new();
        for r in &self.records {
            for c in &r.captions {
                out.push(KeyedText {
                    video_id: r.video_id.clone(),
                    kind: "caption".into(),
                    text: c.clone(),
                });
            }
            for ty in CommonsenseType::ALL {
                for c in r.commonsense.get(ty) {
                    out.push(KeyedText {
                        video_id: r.video_id.clone(),
                        kind: ty.as_str().into(),
                        text: c.clone(),
                    });
                }
            }
        }
        out
    }

    /// Writes `records.jsonl`, `features/*.v2cf`, `knowledge.jsonl` and
    /// `references.jsonl` under `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let feat_dir = dir.join("features");
        fs::create_dir_all(&feat_dir).map_err(|e| Error::file(&feat_dir, e))?;
        for (r, f) in self.records.iter().zip(&self.features) {
            f.save(dir.join(&r.features_path))?;
        }
        write_jsonl(dir.join("records.jsonl"), &self.records)?;
        write_jsonl(dir.join("knowledge.jsonl"), &self.knowledge)?;
        write_jsonl(dir.join("references.jsonl"), &self.references())?;
        Ok(())
    }
}
