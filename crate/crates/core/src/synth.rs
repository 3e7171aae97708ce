//! Seeded synthetic frames: smooth analytic textures, translating clips and
//! content/style training pairs.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::{Frame, Tensor3};

#[derive(Clone, Debug)]
struct Wave {
    channel: usize,
    amp: f64,
    fx: f64,
    fy: f64,
    phase: f64,
}

/// Sum of low-frequency sinusoids per channel, defined on the continuous
/// plane so it can be rendered at sub-pixel offsets.
#[derive(Clone, Debug)]
pub struct SmoothTexture {
    channels: usize,
    base: Vec<f64>,
    waves: Vec<Wave>,
}

impl SmoothTexture {
    /// `max_freq` is in cycles per pixel; values near 0.1 keep the texture
    /// smooth enough for small-window flow estimation.
    pub fn new(seed: u64, channels: usize, waves_per_channel: usize, max_freq: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = (0..channels).map(|_| rng.random_range(0.35..0.65)).collect();
        let amp_budget = 0.3 / waves_per_channel.max(1) as f64;
        let mut waves = Vec::with_capacity(channels * waves_per_channel);
        for channel in 0..channels {
            for _ in 0..waves_per_channel {
                let freq = rng.random_range(0.3 * max_freq..max_freq);
                let angle: f64 = rng.random_range(0.0..TAU);
                waves.push(Wave {
                    channel,
                    amp: rng.random_range(0.5..1.0) * amp_budget,
                    fx: TAU * freq * angle.cos(),
                    fy: TAU * freq * angle.sin(),
                    phase: rng.random_range(0.0..TAU),
                });
            }
        }
        Self {
            channels,
            base,
            waves,
        }
    }

    pub fn sample(&self, x: f64, y: f64, c: usize) -> f64 {
        let mut v = self.base[c];
        for w in self.waves.iter().filter(|w| w.channel == c) {
            v += w.amp * (w.fx * x + w.fy * y + w.phase).sin();
        }
        v
    }

    /// Frame whose pixel `(x, y)` shows the texture at `(x − ox, y − oy)`,
    /// i.e. content moved by `(ox, oy)`.
    pub fn render(&self, height: usize, width: usize, ox: f64, oy: f64) -> Frame {
        Tensor3::from_fn(height, width, self.channels, |y, x, c| {
            self.sample(x as f64 - ox, y as f64 - oy, c)
        })
    }
}

/// Three-channel smooth texture frame.
pub fn smooth_texture(seed: u64, height: usize, width: usize) -> Frame {
    SmoothTexture::new(seed, 3, 4, 0.08).render(height, width, 0.0, 0.0)
}

/// `n` frames of one texture translating by `(vx, vy)` pixels per frame.
pub fn translating_sequence(
    seed: u64,
    height: usize,
    width: usize,
    n: usize,
    vx: f64,
    vy: f64,
) -> Vec<Frame> {
    let tex = SmoothTexture::new(seed, 3, 4, 0.08);
    (0..n)
        .map(|t| tex.render(height, width, t as f64 * vx, t as f64 * vy))
        .collect()
}

/// Gaussian-blurred white noise on a periodic square canvas, stretched to
/// `[0.1, 0.9]`. Gray, replicated over three channels. Integer translations
/// are exact because rendering only re-indexes the canvas.
#[derive(Clone, Debug)]
pub struct NoiseTexture {
    size: usize,
    canvas: Vec<f64>,
}

impl NoiseTexture {
    pub fn new(seed: u64, size: usize, sigma: f64) -> Self {
        assert!(size > 0, "canvas size must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..size * size).map(|_| rng.random()).collect();
        let radius = (3.0 * sigma).ceil() as isize;
        let taps: Vec<f64> = (-radius..=radius)
            .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma).max(f64::MIN_POSITIVE)).exp())
            .collect();
        let wrap = |v: isize| v.rem_euclid(size as isize) as usize;
        let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
            (0..size * size)
                .map(|i| {
                    let (y, x) = ((i / size) as isize, (i % size) as isize);
                    taps.iter()
                        .zip(-radius..)
                        .map(|(t, d)| {
                            let j = if horizontal {
                                y as usize * size + wrap(x + d)
                            } else {
                                wrap(y + d) * size + x as usize
                            };
                            t * src[j]
                        })
                        .sum()
                })
                .collect()
        };
        let blurred = pass(&pass(&raw, true), false);
        let (lo, hi) = blurred
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let canvas = blurred.iter().map(|v| 0.1 + 0.8 * (v - lo) / span).collect();
        Self { size, canvas }
    }

    /// Frame whose pixel `(x, y)` shows the canvas at `(x − ox, y − oy)`.
    pub fn render(&self, height: usize, width: usize, ox: i64, oy: i64) -> Frame {
        let n = self.size as i64;
        Tensor3::from_fn(height, width, 3, |y, x, _| {
            let cy = (y as i64 - oy).rem_euclid(n) as usize;
            let cx = (x as i64 - ox).rem_euclid(n) as usize;
            self.canvas[cy * self.size + cx]
        })
    }
}

/// Uniform noise in `[0, 1)`.
pub fn noise_frame(seed: u64, height: usize, width: usize, channels: usize) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * channels)
        .map(|_| rng.random::<f64>())
        .collect();
    Tensor3::new(height, width, channels, data).expect("dims are non-zero")
}

/// Higher-frequency striped texture, used as the style side of a pair.
pub fn stripe_texture(seed: u64, height: usize, width: usize) -> Frame {
    SmoothTexture::new(seed, 3, 2, 0.25).render(height, width, 0.0, 0.0)
}

/// `n` content/style pairs with independent seeds derived from `seed`.
pub fn pair_dataset(seed: u64, n: usize, height: usize, width: usize) -> Vec<(Frame, Frame)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c = rng.random::<u64>();
            let s = rng.random::<u64>();
            (smooth_texture(c, height, width), stripe_texture(s, height, width))
        })
        .collect()
}
