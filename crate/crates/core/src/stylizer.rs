//! Forward stylization: frozen encoder → colorization → decoder →
//! meta-smoothing (strided deconvolution with an `r`-scaled meta kernel,
//! then a smoothing convolution and a `1×1` channel projection).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{
    conv2d, conv2d_backward, deconv2d, deconv2d_backward, resize, resize_backward, scaled_dims,
    FeatureMap, Frame, Kernel, Padding, Tensor3,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = self.apply(pre);
                s * (1.0 - s)
            }
        }
    }
}

/// Seeded `N(0, 1) / √fan_in` initializer.
pub(crate) fn init_kernel(rng: &mut ChaCha8Rng, out: usize, inp: usize, kh: usize, kw: usize) -> Kernel {
    let scale = 1.0 / ((inp * kh * kw) as f64).sqrt();
    Kernel::from_fn(out, inp, kh, kw, |_, _, _, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * scale
    })
}

/// Intermediate values of a chain of same-padded conv layers, kept for the
/// backward pass.
#[derive(Clone, Debug)]
pub(crate) struct StackCache {
    inputs: Vec<Tensor3>,
    preacts: Vec<Tensor3>,
    acts: Vec<Activation>,
}

impl StackCache {
    /// Sign of every ReLU pre-activation.
    pub(crate) fn push_pattern(&self, out: &mut Vec<bool>) {
        for (pre, act) in self.preacts.iter().zip(&self.acts) {
            if *act == Activation::Relu {
                out.extend(pre.data().iter().map(|&p| p > 0.0));
            }
        }
    }
}

pub(crate) fn stack_forward(
    layers: &[(&Kernel, Activation)],
    input: &Tensor3,
) -> Result<(Tensor3, StackCache)> {
    let mut cache = StackCache {
        inputs: Vec::with_capacity(layers.len()),
        preacts: Vec::with_capacity(layers.len()),
        acts: layers.iter().map(|&(_, a)| a).collect(),
    };
    let mut x = input.clone();
    for &(k, act) in layers {
        let pre = conv2d(&x, k, Padding::Same)?;
        let next = pre.map(|v| act.apply(v));
        cache.inputs.push(x);
        cache.preacts.push(pre);
        x = next;
    }
    Ok((x, cache))
}

/// Returns the input gradient and, when `weight_grads` is set, one kernel
/// gradient per layer.
pub(crate) fn stack_backward(
    layers: &[(&Kernel, Activation)],
    cache: &StackCache,
    grad_out: &Tensor3,
    weight_grads: bool,
) -> Result<(Tensor3, Vec<Kernel>)> {
    let mut g = grad_out.clone();
    let mut grads = Vec::with_capacity(layers.len());
    for (l, &(k, act)) in layers.iter().enumerate().rev() {
        let pre = &cache.preacts[l];
        let mut gpre = g;
        for (gv, &p) in gpre.data_mut().iter_mut().zip(pre.data()) {
            *gv *= act.derivative(p);
        }
        let (gin, gk) = conv2d_backward(&cache.inputs[l], k, Padding::Same, &gpre)?;
        if weight_grads {
            grads.push(gk);
        }
        g = gin;
    }
    grads.reverse();
    Ok((g, grads))
}

/// Architecture of the frozen encoder; the weights are a pure function of it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderDescriptor {
    pub seed: u64,
    pub hidden_channels: usize,
    pub feature_channels: usize,
    pub kernel_size: usize,
}

impl Default for EncoderDescriptor {
    fn default() -> Self {
        Self {
            seed: 0,
            hidden_channels: 8,
            feature_channels: 15,
            kernel_size: 3,
        }
    }
}

/// Frozen two-layer convolutional feature extractor (`3 → hidden → C`,
/// ReLU, no bias) standing in for a pretrained VGG.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderSpec {
    descriptor: EncoderDescriptor,
    layers: Vec<Kernel>,
}

impl EncoderSpec {
    pub fn new(descriptor: EncoderDescriptor) -> Result<Self> {
        let d = descriptor;
        if d.kernel_size % 2 == 0 || d.kernel_size == 0 {
            return Err(Error::Config(format!(
                "encoder kernel size must be odd, got {}",
                d.kernel_size
            )));
        }
        if d.hidden_channels == 0 || d.feature_channels == 0 {
            return Err(Error::Config("encoder channel counts must be >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
        let k = d.kernel_size;
        let layers = vec![
            init_kernel(&mut rng, d.hidden_channels, 3, k, k),
            init_kernel(&mut rng, d.feature_channels, d.hidden_channels, k, k),
        ];
        Ok(Self {
            descriptor: d,
            layers,
        })
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(EncoderDescriptor {
            seed,
            ..EncoderDescriptor::default()
        })
        .expect("default encoder descriptor is valid")
    }

    pub fn descriptor(&self) -> &EncoderDescriptor {
        &self.descriptor
    }

    pub fn layers(&self) -> &[Kernel] {
        &self.layers
    }

    pub fn feature_channels(&self) -> usize {
        self.descriptor.feature_channels
    }

    fn stack(&self) -> Vec<(&Kernel, Activation)> {
        self.layers.iter().map(|k| (k, Activation::Relu)).collect()
    }

    pub(crate) fn forward(&self, img: &Frame) -> Result<(FeatureMap, StackCache)> {
        if img.channels() != 3 {
            return Err(Error::Dimension(format!(
                "encoder expects 3 channels, got {}",
                img.channels()
            )));
        }
        stack_forward(&self.stack(), img)
    }

    /// Gradient with respect to the encoder input. The encoder weights
    /// never receive a gradient.
    pub(crate) fn backward_input(&self, cache: &StackCache, grad: &FeatureMap) -> Result<Tensor3> {
        Ok(stack_backward(&self.stack(), cache, grad, false)?.0)
    }
}

/// Runs the frozen encoder; output keeps the input's spatial size.
pub fn encode(img: &Frame, enc: &EncoderSpec) -> Result<FeatureMap> {
    Ok(enc.forward(img)?.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorizeMode {
    /// `z^k = Σ_m (y^m − x^k) = S_y − HW·x^k`
    #[default]
    Literal,
    /// The literal sum divided by `HW`: `mean(y) − x^k`.
    Normalized,
}

/// Merges style statistics into content features, channel by channel:
/// every output vector is the sum over all style positions of
/// `(style − content_at_this_position)`.
pub fn colorize(content: &FeatureMap, style: &FeatureMap, mode: ColorizeMode) -> Result<FeatureMap> {
    content.check_same_dims(style, "colorize")?;
    let (h, w, c) = content.dims();
    let hw = (h * w) as f64;
    let mut style_sum = vec![0.0; c];
    for px in style.data().chunks_exact(c) {
        for (s, v) in style_sum.iter_mut().zip(px) {
            *s += v;
        }
    }
    let mut out = content.clone();
    for px in out.data_mut().chunks_exact_mut(c) {
        for (z, s) in px.iter_mut().zip(&style_sum) {
            *z = match mode {
                ColorizeMode::Literal => s - hw * *z,
                ColorizeMode::Normalized => s / hw - *z,
            };
        }
    }
    Ok(out)
}

/// Learnable weights: decoder convolutions, meta kernel `W_u¹`, smoothing
/// kernel `W_s`, and the `1×1` projection from the smoothed channels back
/// to image channels.
#[derive(Clone, Debug, PartialEq)]
pub struct StylizerParams {
    pub decoder: Vec<Kernel>,
    pub meta: Kernel,
    pub smooth: Kernel,
    pub projection: Kernel,
}

/// Meta/smoothing kernel side length.
pub const META_KERNEL_SIZE: usize = 5;
/// Channels produced by the meta deconvolution.
pub const META_CHANNELS: usize = 15;
/// Channels produced by the smoothing convolution.
pub const SMOOTH_CHANNELS: usize = 1;

impl StylizerParams {
    /// Seeded initialization: decoder `C → 8 → 3` (3×3), meta `3 → 15`
    /// (5×5), smoothing `15 → 1` (5×5), projection `1 → 3` set to ones.
    pub fn init(seed: u64, feature_channels: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decoder = vec![
            init_kernel(&mut rng, 8, feature_channels, 3, 3),
            init_kernel(&mut rng, 3, 8, 3, 3),
        ];
        let m = META_KERNEL_SIZE;
        let meta = init_kernel(&mut rng, META_CHANNELS, 3, m, m);
        let smooth = init_kernel(&mut rng, SMOOTH_CHANNELS, META_CHANNELS, m, m);
        let projection = Kernel::from_fn(3, SMOOTH_CHANNELS, 1, 1, |_, _, _, _| 1.0);
        Self {
            decoder,
            meta,
            smooth,
            projection,
        }
    }

    /// Checks that consecutive kernels agree on channel counts and that
    /// the same-padded kernels are odd.
    pub fn validate(&self) -> Result<()> {
        if self.decoder.is_empty() {
            return Err(Error::Config("decoder needs at least one layer".into()));
        }
        let mut chain: Vec<(&str, &Kernel)> = self.decoder.iter().map(|k| ("decoder", k)).collect();
        chain.push(("meta", &self.meta));
        chain.push(("smooth", &self.smooth));
        chain.push(("projection", &self.projection));
        for (name, k) in &chain {
            if k.kh() % 2 == 0 || k.kw() % 2 == 0 {
                return Err(Error::Config(format!(
                    "{name} kernel must be odd-sized, got {}x{}",
                    k.kh(),
                    k.kw()
                )));
            }
        }
        for pair in chain.windows(2) {
            let ((a_name, a), (b_name, b)) = (pair[0], pair[1]);
            if a.out_channels() != b.in_channels() {
                return Err(Error::Dimension(format!(
                    "{a_name} emits {} channels but {b_name} expects {}",
                    a.out_channels(),
                    b.in_channels()
                )));
            }
        }
        Ok(())
    }

    pub fn kernels(&self) -> impl Iterator<Item = &Kernel> {
        self.decoder
            .iter()
            .chain([&self.meta, &self.smooth, &self.projection])
    }

    pub fn kernels_mut(&mut self) -> impl Iterator<Item = &mut Kernel> {
        self.decoder
            .iter_mut()
            .chain([&mut self.meta, &mut self.smooth, &mut self.projection])
    }

    pub fn num_parameters(&self) -> usize {
        self.kernels().map(|k| k.weights().len()).sum()
    }

    /// All weights concatenated in [`kernels`](Self::kernels) order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_parameters());
        for k in self.kernels() {
            v.extend_from_slice(k.weights());
        }
        v
    }

    /// Overwrites all weights from a vector produced by [`flatten`](Self::flatten)
    /// on params of the same shape.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_parameters() {
            return Err(Error::Dimension(format!(
                "flat parameter vector has {} entries, model has {}",
                flat.len(),
                self.num_parameters()
            )));
        }
        let mut offset = 0;
        for k in self.kernels_mut() {
            let n = k.weights().len();
            k.weights_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Same shapes, all weights zero.
    pub fn zeros_like(&self) -> Self {
        let z = |k: &Kernel| {
            let (o, i, kh, kw) = k.dims();
            Kernel::zeros(o, i, kh, kw)
        };
        Self {
            decoder: self.decoder.iter().map(z).collect(),
            meta: z(&self.meta),
            smooth: z(&self.smooth),
            projection: z(&self.projection),
        }
    }

    fn decoder_stack(&self) -> Vec<(&Kernel, Activation)> {
        let n = self.decoder.len();
        self.decoder
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let act = if i + 1 == n {
                    Activation::Sigmoid
                } else {
                    Activation::Relu
                };
                (k, act)
            })
            .collect()
    }
}

/// Decoder: same-padded convolutions, ReLU between layers, sigmoid on the
/// last so the image lands in `(0, 1)`.
pub fn decode(features: &FeatureMap, params: &StylizerParams) -> Result<Frame> {
    Ok(decode_forward(features, params)?.0)
}

pub(crate) fn decode_forward(features: &FeatureMap, params: &StylizerParams) -> Result<(Frame, StackCache)> {
    let first = params
        .decoder
        .first()
        .ok_or_else(|| Error::Config("decoder needs at least one layer".into()))?;
    if first.in_channels() != features.channels() {
        return Err(Error::Dimension(format!(
            "decoder expects {} channels, features have {}",
            first.in_channels(),
            features.channels()
        )));
    }
    stack_forward(&params.decoder_stack(), features)
}

pub(crate) fn decode_backward(
    params: &StylizerParams,
    cache: &StackCache,
    grad: &Frame,
) -> Result<Vec<Kernel>> {
    Ok(stack_backward(&params.decoder_stack(), cache, grad, true)?.1)
}

fn check_scale(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("upscaling factor must be > 0, got {r}")))
    }
}

/// `W_u^r`: the meta kernel itself for `r = 1`, otherwise the meta kernel
/// convolved with a `1×1` matrix filled with `r`, i.e. every weight times `r`.
pub fn build_upscale_kernel(r: f64, meta: &Kernel) -> Result<Kernel> {
    check_scale(r)?;
    if r == 1.0 {
        Ok(meta.clone())
    } else {
        Ok(meta.scaled(r))
    }
}

/// Integer stride used by the deconvolution for factor `r`.
pub fn deconv_stride(r: f64) -> usize {
    (r.ceil() as usize).max(1)
}

#[derive(Clone, Debug)]
pub(crate) struct MetaCache {
    input: Frame,
    stride: usize,
    upscale_kernel: Kernel,
    deconv: Tensor3,
    resized: Tensor3,
    smoothed: Tensor3,
    projected: Tensor3,
}

impl MetaCache {
    /// Which side of the output clamp every projected value falls on.
    pub(crate) fn push_pattern(&self, out: &mut Vec<bool>) {
        for &p in self.projected.data() {
            out.push(p < 0.0);
            out.push(p > 1.0);
        }
    }
}

pub(crate) fn meta_smooth_forward(
    input: &Frame,
    r: f64,
    params: &StylizerParams,
) -> Result<(Frame, MetaCache)> {
    let upscale_kernel = build_upscale_kernel(r, &params.meta)?;
    let (th, tw) = scaled_dims(input.height(), input.width(), r)?;
    let stride = deconv_stride(r);
    let deconv = deconv2d(input, &upscale_kernel, stride)?;
    let resized = resize(&deconv, th, tw)?;
    let smoothed = conv2d(&resized, &params.smooth, Padding::Same)?;
    let projected = conv2d(&smoothed, &params.projection, Padding::Same)?;
    let out = projected.clamp01();
    Ok((
        out,
        MetaCache {
            input: input.clone(),
            stride,
            upscale_kernel,
            deconv,
            resized,
            smoothed,
            projected,
        },
    ))
}

pub(crate) struct MetaGrads {
    pub input: Frame,
    pub meta: Kernel,
    pub smooth: Kernel,
    pub projection: Kernel,
}

pub(crate) fn meta_smooth_backward(
    cache: &MetaCache,
    r: f64,
    params: &StylizerParams,
    grad_out: &Frame,
) -> Result<MetaGrads> {
    let mut g = grad_out.clone();
    for (gv, &p) in g.data_mut().iter_mut().zip(cache.projected.data()) {
        if !(0.0..=1.0).contains(&p) {
            *gv = 0.0;
        }
    }
    let (g_smoothed, g_proj) = conv2d_backward(&cache.smoothed, &params.projection, Padding::Same, &g)?;
    let (g_resized, g_smooth) = conv2d_backward(&cache.resized, &params.smooth, Padding::Same, &g_smoothed)?;
    let g_deconv = resize_backward(&g_resized, cache.deconv.height(), cache.deconv.width())?;
    let (g_input, g_upscale) =
        deconv2d_backward(&cache.input, &cache.upscale_kernel, cache.stride, &g_deconv)?;
    let g_meta = if r == 1.0 { g_upscale } else { g_upscale.scaled(r) };
    Ok(MetaGrads {
        input: g_input,
        meta: g_meta,
        smooth: g_smooth,
        projection: g_proj,
    })
}

/// Upscales the decoder output by `r` and smooths it:
/// `clamp(proj * (P(I, W_u^r) * W_s))`. Integer `r` uses a stride-`r`
/// deconvolution directly; other factors deconvolve at stride `⌈r⌉` and
/// resample to `round(r·H) × round(r·W)`.
pub fn meta_smooth(input: &Frame, r: f64, params: &StylizerParams) -> Result<Frame> {
    Ok(meta_smooth_forward(input, r, params)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StylizerConfig {
    /// Height content and style are resampled to before encoding.
    pub working_height: usize,
    pub working_width: usize,
    pub colorize: ColorizeMode,
}

impl Default for StylizerConfig {
    fn default() -> Self {
        Self {
            working_height: 64,
            working_width: 64,
            colorize: ColorizeMode::Literal,
        }
    }
}

impl StylizerConfig {
    pub fn square(size: usize) -> Self {
        Self {
            working_height: size,
            working_width: size,
            ..Self::default()
        }
    }

    pub fn with_working(mut self, height: usize, width: usize) -> Self {
        self.working_height = height;
        self.working_width = width;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StylizedOutput {
    /// Upscaled, smoothed result `I_cs^r`.
    pub image: Frame,
    /// Decoder output `I_cs` at the working size.
    pub intermediate: Frame,
    pub scale: f64,
}

/// Content and style resampled to the working size.
pub(crate) fn working_inputs(content: &Frame, style: &Frame, cfg: &StylizerConfig) -> Result<(Frame, Frame)> {
    let (h, w) = (cfg.working_height, cfg.working_width);
    Ok((resize(content, h, w)?, resize(style, h, w)?))
}

/// Features fed to the decoder for a working-size pair.
pub(crate) fn colorized_features(
    content: &Frame,
    style: &Frame,
    enc: &EncoderSpec,
    mode: ColorizeMode,
) -> Result<FeatureMap> {
    let fc = encode(content, enc)?;
    let fs = encode(style, enc)?;
    colorize(&fc, &fs, mode)
}

/// Full stylization of `content` towards `style` at upscaling factor `r`.
pub fn stylize(
    content: &Frame,
    style: &Frame,
    r: f64,
    enc: &EncoderSpec,
    params: &StylizerParams,
    cfg: &StylizerConfig,
) -> Result<StylizedOutput> {
    check_scale(r)?;
    let (c, s) = working_inputs(content, style, cfg)?;
    let features = colorized_features(&c, &s, enc, cfg.colorize)?;
    let intermediate = decode(&features, params)?;
    let image = meta_smooth(&intermediate, r, params)?;
    Ok(StylizedOutput {
        image,
        intermediate,
        scale: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn rand_frame(seed: u64, h: usize, w: usize, c: usize) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor3::from_fn(h, w, c, |_, _, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn encoder_shapes_and_determinism() {
        let enc = EncoderSpec::from_seed(1);
        let img = rand_frame(2, 8, 8, 3);
        let a = encode(&img, &enc).unwrap();
        assert_eq!(a.dims(), (8, 8, 15));
        assert_eq!(a, encode(&img, &EncoderSpec::from_seed(1)).unwrap());
        let zero = encode(&Tensor3::zeros(8, 8, 3), &enc).unwrap();
        assert!(zero.data().iter().all(|&v| v == 0.0));
        assert!(matches!(encode(&Tensor3::zeros(8, 8, 1), &enc), Err(Error::Dimension(_))));
    }

    #[test]
    fn colorize_constant_cancels() {
        let f = Tensor3::filled(3, 4, 2, 0.7);
        let z = colorize(&f, &f, ColorizeMode::Literal).unwrap();
        assert!(z.data().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn colorize_two_positions() {
        let x = Tensor3::new(1, 2, 1, vec![1.0, 2.0]).unwrap();
        let y = Tensor3::new(1, 2, 1, vec![3.0, 5.0]).unwrap();
        let z = colorize(&x, &y, ColorizeMode::Literal).unwrap();
        assert_eq!(z.data(), &[6.0, 4.0]);
        let n = colorize(&x, &y, ColorizeMode::Normalized).unwrap();
        assert_eq!(n.data(), &[3.0, 2.0]);
        assert!(colorize(&x, &Tensor3::zeros(2, 1, 1), ColorizeMode::Literal).is_err());
    }

    #[test]
    fn colorize_matches_double_loop() {
        let x = rand_frame(5, 4, 4, 3);
        let y = rand_frame(6, 4, 4, 3);
        let z = colorize(&x, &y, ColorizeMode::Literal).unwrap();
        for k in 0..16 {
            for c in 0..3 {
                let mut s = 0.0;
                for m in 0..16 {
                    s += y.data()[m * 3 + c] - x.data()[k * 3 + c];
                }
                assert!((z.data()[k * 3 + c] - s).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn decode_shapes() {
        let params = StylizerParams::init(3, 15);
        let out = decode(&rand_frame(1, 8, 8, 15), &params).unwrap();
        assert_eq!(out.dims(), (8, 8, 3));
        assert!(matches!(decode(&rand_frame(1, 8, 8, 4), &params), Err(Error::Dimension(_))));

        let zero = params.zeros_like();
        let out = decode(&Tensor3::zeros(4, 4, 15), &zero).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn upscale_kernel_rules() {
        let meta = Kernel::from_fn(2, 1, 3, 3, |o, _, y, x| (o + y * 3 + x) as f64 * 0.1);
        assert_eq!(build_upscale_kernel(1.0, &meta).unwrap(), meta);
        let half = Kernel::from_fn(1, 1, 2, 2, |_, _, _, _| 0.5);
        assert!(build_upscale_kernel(2.0, &half)
            .unwrap()
            .weights()
            .iter()
            .all(|&w| w == 1.0));
        let s = build_upscale_kernel(0.5, &meta).unwrap();
        for (a, b) in s.weights().iter().zip(meta.weights()) {
            assert_eq!(*a, 0.5 * b);
        }
        assert!(matches!(build_upscale_kernel(0.0, &meta), Err(Error::Domain(_))));
        assert!(matches!(build_upscale_kernel(-1.0, &meta), Err(Error::Domain(_))));
    }

    #[test]
    fn meta_smooth_identity_at_unit_scale() {
        let one = Kernel::new(1, 1, 1, 1, vec![1.0]).unwrap();
        let params = StylizerParams {
            decoder: vec![Kernel::identity(1)],
            meta: one.clone(),
            smooth: one.clone(),
            projection: one,
        };
        let img = rand_frame(8, 6, 5, 1);
        assert_eq!(meta_smooth(&img, 1.0, &params).unwrap(), img);
    }

    #[test]
    fn meta_smooth_shapes_and_errors() {
        let params = StylizerParams::init(4, 15);
        let img = rand_frame(3, 4, 4, 3);
        let out = meta_smooth(&img, 2.0, &params).unwrap();
        assert_eq!(out.dims(), (8, 8, 3));
        assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(matches!(meta_smooth(&img, 0.0, &params), Err(Error::Domain(_))));
    }

    #[test]
    fn params_flatten_roundtrip() {
        let p = StylizerParams::init(9, 15);
        p.validate().unwrap();
        let mut q = p.zeros_like();
        q.assign_flat(&p.flatten()).unwrap();
        assert_eq!(p, q);
        assert!(q.assign_flat(&[0.0]).is_err());
    }
}
