use flowstyle_core::stylizer::{encode, meta_smooth, EncoderSpec, StylizerConfig, StylizerParams};
use flowstyle_core::synth::{pair_dataset, smooth_texture, stripe_texture};
use flowstyle_core::tensor::{rescale, Tensor3};
use flowstyle_core::trainer::{
    loss, perceptual_distance, train, write_loss_csv, AdamState, TrainConfig,
};

fn mean_sq(a: &Tensor3, b: &Tensor3) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.data().iter().zip(b.data()) {
        s += (x - y).powi(2);
    }
    s / a.data().len() as f64
}

#[test]
fn perceptual_distance_matches_two_terms() {
    let enc = EncoderSpec::from_seed(2);
    let a = smooth_texture(1, 8, 8);
    let b = stripe_texture(2, 8, 8);
    let oracle = mean_sq(&encode(&a, &enc).unwrap(), &encode(&b, &enc).unwrap()) + mean_sq(&a, &b);
    let d = perceptual_distance(&a, &b, &enc).unwrap();
    assert!((d - oracle).abs() < 1e-12);
    assert_eq!(d, perceptual_distance(&b, &a, &enc).unwrap());
    assert_eq!(perceptual_distance(&a, &a, &enc).unwrap(), 0.0);
    assert!(perceptual_distance(&a, &smooth_texture(1, 8, 9), &enc).is_err());
}

#[test]
fn loss_matches_term_by_term() {
    let enc = EncoderSpec::from_seed(0);
    let c = smooth_texture(3, 8, 8);
    let s = stripe_texture(4, 8, 8);
    let params = StylizerParams::init(5, enc.feature_channels());
    let out = meta_smooth(&c, 2.0, &params).unwrap();
    let content = perceptual_distance(&rescale(&c, 2.0).unwrap(), &out, &enc).unwrap();
    let style = perceptual_distance(&rescale(&s, 2.0).unwrap(), &out, &enc).unwrap();
    let l = loss(&c, &s, &out, 2.0, 1.0, &enc).unwrap();
    assert!((l.total - (content + style)).abs() < 1e-12);
    assert!((l.content - content).abs() < 1e-12 && (l.style - style).abs() < 1e-12);
    let l0 = loss(&c, &s, &out, 2.0, 0.0, &enc).unwrap();
    assert_eq!(l0.total, l0.content);
    assert_eq!(loss(&c, &c, &c, 1.0, 1.0, &enc).unwrap().total, 0.0);
}

fn tiny_cfg(steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        seed: 3,
        stylizer: StylizerConfig::square(8),
        ..TrainConfig::default()
    }
}

#[test]
fn zero_learning_rate_keeps_params() {
    let enc = EncoderSpec::from_seed(0);
    let params = StylizerParams::init(1, enc.feature_channels());
    let data = pair_dataset(2, 4, 8, 8);
    let cfg = TrainConfig {
        lr: 0.0,
        ..tiny_cfg(5)
    };
    let out = train(&data, &cfg, params.clone(), &enc).unwrap();
    assert_eq!(out.params, params);
    assert_eq!(out.trace.len(), 5);
    assert_eq!(out.adam.t, 5);
}

#[test]
fn trace_is_bit_reproducible_and_encoder_frozen() {
    let enc = EncoderSpec::from_seed(4);
    let before = enc.clone();
    let params = StylizerParams::init(1, enc.feature_channels());
    let data = pair_dataset(9, 4, 8, 8);
    let a = train(&data, &tiny_cfg(6), params.clone(), &enc).unwrap();
    let b = train(&data, &tiny_cfg(6), params.clone(), &enc).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, params);
    assert_eq!(enc, before);
    assert!(a.trace.iter().all(|r| r.content >= 0.0 && r.style >= 0.0 && r.total >= 0.0));
}

#[test]
fn single_adam_step_on_square() {
    // f(w) = w², w0 = 1: g = 2, m̂ = 2, v̂ = 4
    let cfg = TrainConfig::default();
    let mut w = [1.0];
    let mut adam = AdamState::new(1);
    adam.step(&mut w, &[2.0], &cfg).unwrap();
    let expected = 1.0 - cfg.lr * 2.0 / (2.0 + cfg.adam_epsilon);
    assert!((w[0] - expected).abs() < 1e-15);
    assert_eq!(adam.t, 1);
}

#[test]
fn empty_dataset_and_bad_config_are_rejected() {
    let enc = EncoderSpec::from_seed(0);
    let params = StylizerParams::init(1, enc.feature_channels());
    assert!(train(&[], &tiny_cfg(1), params.clone(), &enc).is_err());
    let data = pair_dataset(2, 2, 8, 8);
    let bad = TrainConfig {
        beta1: 1.0,
        ..tiny_cfg(1)
    };
    assert!(train(&data, &bad, params, &enc).is_err());
}

#[test]
fn loss_csv_has_header_and_rows() {
    let enc = EncoderSpec::from_seed(0);
    let params = StylizerParams::init(1, enc.feature_channels());
    let data = pair_dataset(2, 2, 8, 8);
    let out = train(&data, &tiny_cfg(3), params, &enc).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("loss.csv");
    write_loss_csv(&p, &out.trace).unwrap();
    let text = std::fs::read_to_string(p).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "step,total,content,style");
    assert_eq!(lines.len(), 4);
}
