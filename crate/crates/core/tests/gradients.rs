use flowstyle_core::stylizer::{ColorizeMode, EncoderSpec, StylizerConfig, StylizerParams};
use flowstyle_core::synth::pair_dataset;
use flowstyle_core::tensor::Kernel;
use flowstyle_core::trainer::{backward, gradient_check, Difference, GradCheckConfig, TrainConfig};

fn cfg(mode: ColorizeMode) -> TrainConfig {
    TrainConfig {
        stylizer: StylizerConfig {
            colorize: mode,
            ..StylizerConfig::square(16)
        },
        ..TrainConfig::default()
    }
}

#[test]
fn normalized_gradients_match_finite_differences() {
    let cfg = cfg(ColorizeMode::Normalized);
    for seed in 0..2 {
        let enc = EncoderSpec::from_seed(seed);
        let params = StylizerParams::init(seed + 100, enc.feature_channels());
        let batch = pair_dataset(seed, 2, 16, 16);
        for r in [1.0, 2.0] {
            let report = gradient_check(&batch, r, &params, &enc, &cfg, &GradCheckConfig::default()).unwrap();
            let expected: usize = params.kernels().map(|k| k.weights().len().min(20)).sum();
            assert_eq!(report.coords.len(), expected);
            assert_eq!(report.unresolved(), 0);
            let bad = report.failures(1e-4);
            assert!(bad.is_empty(), "seed {seed} r {r}: {bad:?}");
        }
    }
}

/// This instance has an activation within 1e-6 of zero for several sampled
/// coordinates, so the central stencil never stays on one piece.
#[test]
fn kinks_next_to_the_base_point_use_one_sided_differences() {
    let cfg = cfg(ColorizeMode::Normalized);
    let enc = EncoderSpec::from_seed(6);
    let params = StylizerParams::init(1006, enc.feature_channels());
    let batch = pair_dataset(6, 2, 16, 16);
    let check = GradCheckConfig::default();
    let report = gradient_check(&batch, 1.0, &params, &enc, &cfg, &check).unwrap();
    let one_sided: Vec<_> = report
        .coords
        .iter()
        .filter(|c| c.difference != Difference::Central)
        .collect();
    assert!(!one_sided.is_empty());
    assert!(one_sided.iter().all(|c| c.smooth && c.eps == 1e-6));
    assert_eq!(report.unresolved(), 0);
    let bad = report.failures(1e-4);
    assert!(bad.is_empty(), "{bad:?}");
}

/// The literal colorization feeds `HW`-scaled features into the decoder, so
/// the truncation error of a 1e-4 step is visible; a smaller step agrees.
#[test]
fn literal_gradients_match_small_step_differences() {
    let cfg = cfg(ColorizeMode::Literal);
    let enc = EncoderSpec::from_seed(3);
    let params = StylizerParams::init(4, enc.feature_channels());
    let batch = pair_dataset(5, 2, 16, 16);
    let check = GradCheckConfig {
        eps: 1e-6,
        fallback_eps: vec![1e-7],
        ..GradCheckConfig::default()
    };
    for r in [1.0, 2.0] {
        let report = gradient_check(&batch, r, &params, &enc, &cfg, &check).unwrap();
        let bad = report.failures(1e-4);
        assert!(bad.is_empty(), "r {r}: {bad:?}");
    }
}

#[test]
fn style_gradient_is_linear_in_lambda() {
    let enc = EncoderSpec::from_seed(1);
    let params = StylizerParams::init(2, enc.feature_channels());
    let batch = pair_dataset(3, 2, 12, 12);
    let grad = |lambda: f64| {
        let cfg = TrainConfig {
            lambda,
            stylizer: StylizerConfig::square(12),
            ..TrainConfig::default()
        };
        backward(&batch, 1.0, &params, &enc, &cfg).unwrap().1.flatten()
    };
    let (g0, g1, g3) = (grad(0.0), grad(1.0), grad(3.0));
    for i in 0..g0.len() {
        let predicted = g0[i] + 3.0 * (g1[i] - g0[i]);
        assert!((g3[i] - predicted).abs() <= 1e-9 * g3[i].abs().max(1.0), "coordinate {i}");
    }
}

#[test]
fn zero_projection_blocks_upstream_gradients() {
    let enc = EncoderSpec::from_seed(0);
    let mut params = StylizerParams::init(9, enc.feature_channels());
    params.projection = Kernel::zeros(3, 1, 1, 1);
    let batch = pair_dataset(1, 2, 12, 12);
    let cfg = TrainConfig {
        stylizer: StylizerConfig::square(12),
        ..TrainConfig::default()
    };
    let (_, g) = backward(&batch, 2.0, &params, &enc, &cfg).unwrap();
    assert!(g.smooth.weights().iter().all(|&v| v == 0.0));
    assert!(g.meta.weights().iter().all(|&v| v == 0.0));
    assert!(g.decoder.iter().all(|k| k.weights().iter().all(|&v| v == 0.0)));
    assert!(g.projection.weights().iter().any(|&v| v != 0.0));
}

#[test]
fn empty_batch_is_rejected() {
    let enc = EncoderSpec::from_seed(0);
    let params = StylizerParams::init(0, enc.feature_channels());
    assert!(backward(&[], 1.0, &params, &enc, &TrainConfig::default()).is_err());
}
