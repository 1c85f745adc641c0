//! Template question generation, distractor mining and the answering head.

mod eval;
pub mod extract;
mod head;
mod negatives;
mod templates;

pub use eval::{top_k, topk_precision_recall, PrecisionRecall, QaReport, EVAL_KS};
pub use extract::{extract_subject_action, Extractor, RuleExtractor};
pub use head::{
    load_qa_checkpoint, qa_loss, save_qa_checkpoint, train_qa, AnswerVocabulary, QaCheckpoint, QaExample, QaHeadConfig, QaLoss, QaModel, QaOutput, QaTrainConfig,
    QuestionVocabulary,
};
pub use negatives::{mine_negatives, token_overlap, AnswerPool, Mined, Miner, EXCLUSION_OVERLAP};
pub use templates::{
    base_verb_phrase, generate_questions, generate_questions_with, qtype_group, AnswerKind, QaGeneration,
    QaSample, Template, NO, N_QTYPES, PER_GROUP, TEMPLATES, YES,
};
