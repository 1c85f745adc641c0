mod common;

use common::*;

#[test]
fn feature_files() {
    for seed in 0..20 {
        assert!(features_round_trip(seed), "seed {seed}");
    }
}

#[test]
fn vocab_files() {
    for seed in 0..20 {
        assert!(vocab_round_trip(seed), "seed {seed}");
    }
}

#[test]
fn checkpoints() {
    for seed in 0..20 {
        assert!(checkpoint_round_trip(seed), "seed {seed}");
    }
}

#[test]
fn loaded_checkpoint_generates_identically() {
    use v2c_core::checkpoint::{load_checkpoint, save_checkpoint};
    use v2c_core::corpus::SyntheticConfig;
    use v2c_core::generation::{DecodeOptions, Generator};
    use v2c_core::model::V2CModel;
    let f = fixture(&SyntheticConfig { n_videos: 3, n_frames: 5, dim: 8, ..Default::default() }, 8);
    let model = V2CModel::new(small_model_config(&f, 8, 1, 8), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_checkpoint(dir.path(), &model, &f.caption_vocab, &f.commonsense_vocab).unwrap();
    let ck = load_checkpoint(dir.path()).unwrap();
    let opts = DecodeOptions::greedy(6);
    for feats in &f.synthetic.features {
        let a = Generator::new(&model, &f.caption_vocab, &f.commonsense_vocab).generate(feats, &opts).unwrap();
        let b = Generator::new(&ck.model, &ck.caption_vocab, &ck.commonsense_vocab).generate(feats, &opts).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn corrupt_files_are_rejected() {
    use v2c_core::corpus::VideoFeatures;
    let f = VideoFeatures::new("v", 2, 3, vec![0.5; 6]).unwrap();
    let mut bytes = Vec::new();
    f.write(&mut bytes).unwrap();
    assert!(VideoFeatures::read(&mut &bytes[..bytes.len() - 1], "v").is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(VideoFeatures::read(&mut bad.as_slice(), "v").is_err());
    bytes.push(0);
    assert!(VideoFeatures::read(&mut bytes.as_slice(), "v").is_err());
}
