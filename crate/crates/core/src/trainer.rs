//! Loss, reverse-mode gradients and Adam training of [`StylizerParams`].
//!
//! The loss for one content/style pair at scale `r` is
//! `D(R_r(I_c), I_cs^r) + λ·D(R_r(I_s), I_cs^r)`, where `D` is the mean
//! squared difference of frozen-encoder features plus the mean squared
//! pixel difference, and `R_r` is bilinear rescaling by `r`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stylizer::{
    colorized_features, decode_backward, decode_forward, encode, meta_smooth_backward,
    meta_smooth_forward, working_inputs, EncoderSpec, StylizerConfig, StylizerParams,
};
use crate::tensor::{rescale, Frame, Tensor3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the style term.
    pub lambda: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch: usize,
    pub steps: usize,
    pub seed: u64,
    /// Upscaling factor used by step `t` is `scale_schedule[t % len]`.
    pub scale_schedule: Vec<f64>,
    pub stylizer: StylizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch: 2,
            steps: 200,
            seed: 0,
            scale_schedule: vec![1.0, 2.0],
            stylizer: StylizerConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr >= 0.0) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if self.batch == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.scale_schedule.is_empty() || self.scale_schedule.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config(format!(
                "scale schedule must be non-empty with positive factors, got {:?}",
                self.scale_schedule
            )));
        }
        Ok(())
    }

    pub fn scale_at(&self, step: usize) -> f64 {
        self.scale_schedule[step % self.scale_schedule.len()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub content: f64,
    pub style: f64,
}

impl LossBreakdown {
    fn accumulate(&mut self, other: &LossBreakdown, weight: f64) {
        self.total += weight * other.total;
        self.content += weight * other.content;
        self.style += weight * other.style;
    }
}

fn mse(a: &Tensor3, b: &Tensor3) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64
}

/// Mean squared encoder-feature difference plus mean squared pixel difference.
pub fn perceptual_distance(a: &Frame, b: &Frame, enc: &EncoderSpec) -> Result<f64> {
    a.check_same_dims(b, "perceptual distance")?;
    let fa = encode(a, enc)?;
    let fb = encode(b, enc)?;
    Ok(mse(&fa, &fb) + mse(a, b))
}

/// Content and style terms for a stylized output. `content` and `style`
/// are the working-size inputs; both are rescaled by `r` to match `output`.
pub fn loss(
    content: &Frame,
    style: &Frame,
    output: &Frame,
    r: f64,
    lambda: f64,
    enc: &EncoderSpec,
) -> Result<LossBreakdown> {
    let tc = rescale(content, r)?;
    let ts = rescale(style, r)?;
    let c = perceptual_distance(&tc, output, enc)?;
    let s = perceptual_distance(&ts, output, enc)?;
    Ok(LossBreakdown {
        total: c + lambda * s,
        content: c,
        style: s,
    })
}

/// Forward pass for one pair, returning the loss only.
fn sample_loss(
    content: &Frame,
    style: &Frame,
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let (c, s) = working_inputs(content, style, &cfg.stylizer)?;
    let features = colorized_features(&c, &s, enc, cfg.stylizer.colorize)?;
    let (ics, _) = decode_forward(&features, params)?;
    let (out, _) = meta_smooth_forward(&ics, r, params)?;
    loss(&c, &s, &out, r, cfg.lambda, enc)
}

fn sample_gradient(
    content: &Frame,
    style: &Frame,
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, StylizerParams)> {
    let lambda = cfg.lambda;
    let (c, s) = working_inputs(content, style, &cfg.stylizer)?;
    let features = colorized_features(&c, &s, enc, cfg.stylizer.colorize)?;
    let (ics, dcache) = decode_forward(&features, params)?;
    let (out, mcache) = meta_smooth_forward(&ics, r, params)?;

    let tc = rescale(&c, r)?;
    let ts = rescale(&s, r)?;
    out.check_same_dims(&tc, "rescaled content vs output")?;
    let (fo, ocache) = enc.forward(&out)?;
    let fc = encode(&tc, enc)?;
    let fs = encode(&ts, enc)?;

    let content_term = mse(&fo, &fc) + mse(&out, &tc);
    let style_term = mse(&fo, &fs) + mse(&out, &ts);
    let breakdown = LossBreakdown {
        total: content_term + lambda * style_term,
        content: content_term,
        style: style_term,
    };

    let np = out.data().len() as f64;
    let nf = fo.data().len() as f64;
    let mut g_feat = fo.clone();
    for ((g, c), s) in g_feat.data_mut().iter_mut().zip(fc.data()).zip(fs.data()) {
        let o = *g;
        *g = 2.0 / nf * (o - c) + lambda * 2.0 / nf * (o - s);
    }
    let mut g_out = enc.backward_input(&ocache, &g_feat)?;
    for (((g, o), c), s) in g_out
        .data_mut()
        .iter_mut()
        .zip(out.data())
        .zip(tc.data())
        .zip(ts.data())
    {
        *g += 2.0 / np * (o - c) + lambda * 2.0 / np * (o - s);
    }

    let mg = meta_smooth_backward(&mcache, r, params, &g_out)?;
    let decoder = decode_backward(params, &dcache, &mg.input)?;
    Ok((
        breakdown,
        StylizerParams {
            decoder,
            meta: mg.meta,
            smooth: mg.smooth,
            projection: mg.projection,
        },
    ))
}

/// Which side of every ReLU and of the output clamp the forward pass lands
/// on, over the whole batch. Parameter vectors with equal patterns lie in
/// the same smooth piece of the loss, so a finite-difference step whose
/// endpoints share the pattern of the base point does not straddle a kink.
pub fn activation_pattern(
    batch: &[(Frame, Frame)],
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<Vec<bool>> {
    let mut pattern = Vec::new();
    for (content, style) in batch {
        let (c, s) = working_inputs(content, style, &cfg.stylizer)?;
        let features = colorized_features(&c, &s, enc, cfg.stylizer.colorize)?;
        let (ics, dcache) = decode_forward(&features, params)?;
        let (out, mcache) = meta_smooth_forward(&ics, r, params)?;
        let (_, ocache) = enc.forward(&out)?;
        dcache.push_pattern(&mut pattern);
        mcache.push_pattern(&mut pattern);
        ocache.push_pattern(&mut pattern);
    }
    Ok(pattern)
}

/// Mean loss over a batch at scale `r` (forward only).
pub fn batch_loss(
    batch: &[(Frame, Frame)],
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::Input("batch is empty".into()));
    }
    let parts = batch
        .par_iter()
        .map(|(c, s)| sample_loss(c, s, r, params, enc, cfg))
        .collect::<Result<Vec<_>>>()?;
    let w = 1.0 / batch.len() as f64;
    let mut acc = LossBreakdown::default();
    for p in &parts {
        acc.accumulate(p, w);
    }
    Ok(acc)
}

/// Mean batch loss and its gradient with respect to every learnable kernel.
/// The encoder is frozen and receives nothing.
pub fn backward(
    batch: &[(Frame, Frame)],
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<(LossBreakdown, StylizerParams)> {
    if batch.is_empty() {
        return Err(Error::Input("batch is empty".into()));
    }
    params.validate()?;
    let parts = batch
        .par_iter()
        .map(|(c, s)| sample_gradient(c, s, r, params, enc, cfg))
        .collect::<Result<Vec<_>>>()?;
    let w = 1.0 / batch.len() as f64;
    let mut loss = LossBreakdown::default();
    let mut grad = vec![0.0; params.num_parameters()];
    // summed in batch order for reproducibility
    for (l, g) in &parts {
        loss.accumulate(l, w);
        for (acc, v) in grad.iter_mut().zip(g.flatten()) {
            *acc += w * v;
        }
    }
    let mut grads = params.zeros_like();
    grads.assign_flat(&grad)?;
    Ok((loss, grads))
}

/// Mean loss over a whole dataset, averaged over the distinct factors in
/// the configured scale schedule.
pub fn evaluate(
    dataset: &[(Frame, Frame)],
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<LossBreakdown> {
    let mut scales: Vec<f64> = Vec::new();
    for &r in &cfg.scale_schedule {
        if !scales.contains(&r) {
            scales.push(r);
        }
    }
    let mut acc = LossBreakdown::default();
    for &r in &scales {
        let l = batch_loss(dataset, r, params, enc, cfg)?;
        acc.accumulate(&l, 1.0 / scales.len() as f64);
    }
    Ok(acc)
}

/// First/second moment estimates over the flattened parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(num_parameters: usize) -> Self {
        Self {
            m: vec![0.0; num_parameters],
            v: vec![0.0; num_parameters],
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `weights` in place.
    pub fn step(&mut self, weights: &mut [f64], grads: &[f64], cfg: &TrainConfig) -> Result<()> {
        if weights.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam state has {} entries, got {} weights and {} gradients",
                self.m.len(),
                weights.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..weights.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            weights[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    pub content: f64,
    pub style: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: StylizerParams,
    pub adam: AdamState,
    /// Batch loss measured before each update.
    pub trace: Vec<LossRecord>,
}

/// Deterministic batch order: a fresh seeded permutation per epoch,
/// consumed `batch` samples at a time.
struct BatchSampler {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    fn new(len: usize, seed: u64) -> Self {
        let mut s = Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: (0..len).collect(),
            cursor: len,
        };
        s.refill();
        s
    }

    fn refill(&mut self) {
        self.order.sort_unstable();
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        (0..size)
            .map(|_| {
                if self.cursor == self.order.len() {
                    self.refill();
                }
                self.cursor += 1;
                self.order[self.cursor - 1]
            })
            .collect()
    }
}

/// Trains `params` with Adam from a fresh optimizer state.
pub fn train(
    dataset: &[(Frame, Frame)],
    cfg: &TrainConfig,
    params: StylizerParams,
    enc: &EncoderSpec,
) -> Result<TrainOutcome> {
    let adam = AdamState::new(params.num_parameters());
    train_from(dataset, cfg, params, adam, enc)
}

/// Continues training from an existing optimizer state.
pub fn train_from(
    dataset: &[(Frame, Frame)],
    cfg: &TrainConfig,
    mut params: StylizerParams,
    mut adam: AdamState,
    enc: &EncoderSpec,
) -> Result<TrainOutcome> {
    if dataset.is_empty() {
        return Err(Error::Input("training dataset is empty".into()));
    }
    cfg.validate()?;
    params.validate()?;
    let mut sampler = BatchSampler::new(dataset.len(), cfg.seed);
    let mut trace = Vec::with_capacity(cfg.steps);
    let mut flat = params.flatten();
    for step in 0..cfg.steps {
        let batch: Vec<(Frame, Frame)> = sampler
            .next_batch(cfg.batch)
            .into_iter()
            .map(|i| dataset[i].clone())
            .collect();
        let r = cfg.scale_at(step);
        let (l, grads) = backward(&batch, r, &params, enc, cfg)?;
        trace.push(LossRecord {
            step,
            total: l.total,
            content: l.content,
            style: l.style,
        });
        adam.step(&mut flat, &grads.flatten(), cfg)?;
        params.assign_flat(&flat)?;
        log::debug!("step {step} r={r} loss={:.6}", l.total);
    }
    Ok(TrainOutcome {
        params,
        adam,
        trace,
    })
}

/// `step,total,content,style` CSV.
pub fn write_loss_csv(path: impl AsRef<Path>, trace: &[LossRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for rec in trace {
        w.serialize(rec)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub eps: f64,
    /// Smaller steps tried, in order, when `eps` straddles a kink.
    pub fallback_eps: Vec<f64>,
    pub coords_per_kernel: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator.
    pub denom_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            fallback_eps: vec![1e-5, 1e-6],
            coords_per_kernel: 20,
            seed: 0,
            denom_floor: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordCheck {
    /// Position in [`StylizerParams::kernels`] order.
    pub kernel: usize,
    /// Index into that kernel's weights.
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    /// Step actually used.
    pub eps: f64,
    pub difference: Difference,
    /// Whether every probe point used shares the base activation pattern.
    pub smooth: bool,
    pub rel_error: f64,
}

/// Finite-difference stencil behind a [`CoordCheck`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difference {
    Central,
    /// Only `θ + ε` stayed on the base point's smooth piece.
    Forward,
    /// Only `θ − ε` stayed on the base point's smooth piece.
    Backward,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coords: Vec<CoordCheck>,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.coords.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }

    /// Coordinates that needed a fallback step.
    pub fn fallbacks(&self, primary_eps: f64) -> usize {
        self.coords.iter().filter(|c| c.eps != primary_eps).count()
    }

    /// Coordinates checked with a one-sided difference.
    pub fn one_sided(&self) -> usize {
        self.coords.iter().filter(|c| c.difference != Difference::Central).count()
    }

    /// Coordinates where no tried step avoided a kink on either side.
    pub fn unresolved(&self) -> usize {
        self.coords.iter().filter(|c| !c.smooth).count()
    }

    pub fn failures(&self, tol: f64) -> Vec<&CoordCheck> {
        self.coords.iter().filter(|c| !(c.rel_error < tol)).collect()
    }
}

fn probe(
    batch: &[(Frame, Frame)],
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
) -> Result<(f64, Vec<bool>)> {
    Ok((
        batch_loss(batch, r, params, enc, cfg)?.total,
        activation_pattern(batch, r, params, enc, cfg)?,
    ))
}

/// Compares [`backward`] against central finite differences of
/// [`batch_loss`] on randomly chosen coordinates of every kernel. A step
/// whose endpoints leave the base point's smooth piece (see
/// [`activation_pattern`]) is retried with the fallback steps. When even the
/// smallest step crosses a kink on one side only, the one-sided difference
/// from the other side is used; a coordinate whose both sides cross is
/// reported as not smooth.
pub fn gradient_check(
    batch: &[(Frame, Frame)],
    r: f64,
    params: &StylizerParams,
    enc: &EncoderSpec,
    cfg: &TrainConfig,
    check: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let (_, grads) = backward(batch, r, params, enc, cfg)?;
    let analytic = grads.flatten();
    let base_flat = params.flatten();
    let (base_loss, base_pattern) = probe(batch, r, params, enc, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);

    let mut jobs = Vec::new();
    let mut offset = 0;
    for (k, kernel) in params.kernels().enumerate() {
        let n = kernel.weights().len();
        let mut picked = rand::seq::index::sample(&mut rng, n, check.coords_per_kernel.min(n)).into_vec();
        picked.sort_unstable();
        jobs.extend(picked.into_iter().map(|j| (k, j, offset + j)));
        offset += n;
    }

    let at = |i: usize, e: f64| -> Result<StylizerParams> {
        let mut flat = base_flat.clone();
        flat[i] += e;
        let mut p = params.clone();
        p.assign_flat(&flat)?;
        Ok(p)
    };

    let coords = jobs
        .into_par_iter()
        .map(|(kernel, index, i)| {
            let steps = std::iter::once(check.eps).chain(check.fallback_eps.iter().copied());
            let check_with = |numeric: f64, eps: f64, difference: Difference, smooth: bool| {
                let denom = numeric.abs().max(analytic[i].abs()).max(check.denom_floor);
                CoordCheck {
                    kernel,
                    index,
                    analytic: analytic[i],
                    numeric,
                    eps,
                    difference,
                    smooth,
                    rel_error: (numeric - analytic[i]).abs() / denom,
                }
            };
            let mut last = None;
            for e in steps {
                let (lp, pp) = probe(batch, r, &at(i, e)?, enc, cfg)?;
                let (lm, pm) = probe(batch, r, &at(i, -e)?, enc, cfg)?;
                let (plus, minus) = (pp == base_pattern, pm == base_pattern);
                if plus && minus {
                    return Ok(check_with((lp - lm) / (2.0 * e), e, Difference::Central, true));
                }
                // a kink lies within e of the base point; remember the side that
                // stayed on its piece in case no smaller step clears it
                last = Some(if plus || minus {
                    let (sign, near, difference) = if plus {
                        (1.0, lp, Difference::Forward)
                    } else {
                        (-1.0, lm, Difference::Backward)
                    };
                    // second-order stencil when θ ± 2e is still on the piece
                    let (far, far_pattern) = probe(batch, r, &at(i, 2.0 * sign * e)?, enc, cfg)?;
                    let numeric = if far_pattern == base_pattern {
                        sign * (4.0 * near - 3.0 * base_loss - far) / (2.0 * e)
                    } else {
                        sign * (near - base_loss) / e
                    };
                    check_with(numeric, e, difference, true)
                } else {
                    check_with((lp - lm) / (2.0 * e), e, Difference::Central, false)
                });
            }
            Ok(last.expect("at least one step is tried"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport { coords })
}
