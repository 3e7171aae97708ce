//! Frame similarity (MS-SSIM) and the analytic key-frame speedup model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Frame, Tensor3};

/// Per-scale exponents for five-scale MS-SSIM.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 1.0;

/// How multi-channel frames are reduced to one plane before comparison.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelReduction {
    #[default]
    Luminance,
    RgbMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MsSsimConfig {
    /// Upper bound on the number of scales; fewer are used when the frame
    /// is too small.
    pub max_scales: usize,
    pub reduction: ChannelReduction,
}

impl Default for MsSsimConfig {
    fn default() -> Self {
        Self {
            max_scales: 5,
            reduction: ChannelReduction::Luminance,
        }
    }
}

/// Largest `s <= max` with `min_dim >= 2^(s-1)·11`.
pub fn scale_count(min_dim: usize, max: usize) -> usize {
    (1..=max.min(MS_SSIM_WEIGHTS.len()))
        .rev()
        .find(|&s| min_dim >= (1 << (s - 1)) * WINDOW)
        .unwrap_or(0)
}

fn gaussian_window() -> Vec<f64> {
    let r = (WINDOW / 2) as f64;
    let g: Vec<f64> = (0..WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering with the normalized Gaussian window.
fn filter_valid(plane: &[f64], h: usize, w: usize, win: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = win.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..n).map(|k| win[k] * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..n).map(|k| win[k] * tmp[(y + k) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean SSIM and mean contrast-structure term at one scale.
fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize, win: &[f64]) -> (f64, f64) {
    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mu_a, oh, ow) = filter_valid(a, h, w, win);
    let (mu_b, _, _) = filter_valid(b, h, w, win);
    let (e_aa, _, _) = filter_valid(&aa, h, w, win);
    let (e_bb, _, _) = filter_valid(&bb, h, w, win);
    let (e_ab, _, _) = filter_valid(&ab, h, w, win);
    let n = (oh * ow) as f64;
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += cs;
        ssim_sum += l * cs;
    }
    (ssim_sum / n, cs_sum / n)
}

/// 2×2 block average, dropping an odd trailing row/column.
fn downsample(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out[y * ow + x] = 0.25 * (plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]);
        }
    }
    (out, oh, ow)
}

fn reduce(frame: &Frame, reduction: ChannelReduction) -> Tensor3 {
    match reduction {
        ChannelReduction::Luminance => frame.luminance(),
        ChannelReduction::RgbMean => frame.channel_mean(),
    }
}

/// Multi-scale SSIM with the default configuration.
pub fn ms_ssim(a: &Frame, b: &Frame) -> Result<f64> {
    ms_ssim_with(a, b, &MsSsimConfig::default())
}

/// Multi-scale SSIM (Gaussian 11×11 window, σ = 1.5, K1 = 0.01, K2 = 0.03,
/// dynamic range 1). Contrast-structure terms are taken at every scale but
/// the coarsest, full SSIM at the coarsest; per-scale weights are the
/// standard five renormalized to the number of scales that fit. Negative
/// per-scale terms are floored at zero.
pub fn ms_ssim_with(a: &Frame, b: &Frame, cfg: &MsSsimConfig) -> Result<f64> {
    a.check_same_dims(b, "ms-ssim")?;
    let min_dim = a.height().min(a.width());
    let scales = scale_count(min_dim, cfg.max_scales);
    if scales == 0 {
        return Err(Error::Dimension(format!(
            "ms-ssim needs frames of at least {WINDOW}x{WINDOW}, got {}x{}",
            a.height(),
            a.width()
        )));
    }
    let weights = &MS_SSIM_WEIGHTS[..scales];
    let wsum: f64 = weights.iter().sum();
    let win = gaussian_window();

    let ra = reduce(a, cfg.reduction);
    let rb = reduce(b, cfg.reduction);
    let (mut pa, mut pb) = (ra.data().to_vec(), rb.data().to_vec());
    let (mut h, mut w) = (a.height(), a.width());
    let mut result = 1.0;
    for (s, &weight) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_terms(&pa, &pb, h, w, &win);
        let term = if s + 1 == scales { ssim } else { cs };
        result *= term.max(0.0).powf(weight / wsum);
        if s + 1 < scales {
            let (na, nh, nw) = downsample(&pa, h, w);
            let (nb, _, _) = downsample(&pb, h, w);
            pa = na;
            pb = nb;
            h = nh;
            w = nw;
        }
    }
    Ok(result)
}

/// Inputs of the key-frame speedup model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupInputs {
    pub total_frames: usize,
    pub key_frames: usize,
    /// DNN stylization time per frame, seconds.
    pub t_d: f64,
    /// Interpolation time per frame, seconds.
    pub t_i: f64,
}

impl SpeedupInputs {
    pub fn validate(&self) -> Result<()> {
        if self.key_frames == 0 || self.key_frames > self.total_frames {
            return Err(Error::Domain(format!(
                "need 1 <= key frames <= total frames, got {} of {}",
                self.key_frames, self.total_frames
            )));
        }
        if !(self.t_d > 0.0) || !(self.t_i >= 0.0) {
            return Err(Error::Domain(format!(
                "per-frame times must be positive, got t_d={} t_i={}",
                self.t_d, self.t_i
            )));
        }
        Ok(())
    }
}

/// `n·t_d / (keys·t_d + (n − keys)·t_i)`
pub fn speedup_exact(s: &SpeedupInputs) -> Result<f64> {
    s.validate()?;
    let n = s.total_frames as f64;
    let k = s.key_frames as f64;
    Ok(n * s.t_d / (k * s.t_d + (n - k) * s.t_i))
}

/// `n / keys`
pub fn speedup_approx(s: &SpeedupInputs) -> Result<f64> {
    s.validate()?;
    Ok(s.total_frames as f64 / s.key_frames as f64)
}

/// Per-frame speedup of interpolation over stylization, `t_d / t_i`.
pub fn per_frame_speedup(t_d: f64, t_i: f64) -> Result<f64> {
    if !(t_d > 0.0) || !(t_i > 0.0) {
        return Err(Error::Domain(format!(
            "per-frame times must be positive, got t_d={t_d} t_i={t_i}"
        )));
    }
    Ok(t_d / t_i)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub interval: usize,
    pub key_frames: usize,
    pub exact: f64,
    pub approx: f64,
}

/// Speedup for each key-frame interval; `keys = ⌈n / interval⌉`.
pub fn speedup_curve(n: usize, intervals: &[usize], t_d: f64, t_i: f64) -> Result<Vec<SpeedupRow>> {
    if n == 0 {
        return Err(Error::Domain("clip must contain at least one frame".into()));
    }
    intervals
        .iter()
        .map(|&interval| {
            if interval == 0 {
                return Err(Error::Domain("key frame interval must be >= 1".into()));
            }
            let inputs = SpeedupInputs {
                total_frames: n,
                key_frames: n.div_ceil(interval),
                t_d,
                t_i,
            };
            Ok(SpeedupRow {
                interval,
                key_frames: inputs.key_frames,
                exact: speedup_exact(&inputs)?,
                approx: speedup_approx(&inputs)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn texture(seed: u64, h: usize, w: usize) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fx: f64 = rng.random_range(0.2..0.5);
        let fy: f64 = rng.random_range(0.2..0.5);
        Tensor3::from_fn(h, w, 3, |y, x, c| {
            0.5 + 0.4 * ((fx * x as f64 + c as f64).sin() * (fy * y as f64).cos())
        })
    }

    #[test]
    fn self_similarity_is_one() {
        let t = texture(1, 64, 48);
        assert!((ms_ssim(&t, &t).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inversion_scores_low() {
        let t = texture(2, 64, 64);
        let inv = t.map(|v| 1.0 - v);
        assert!(ms_ssim(&t, &inv).unwrap() < 0.5);
    }

    #[test]
    fn symmetric() {
        let a = texture(3, 40, 40);
        let b = texture(4, 40, 40);
        assert_eq!(ms_ssim(&a, &b).unwrap(), ms_ssim(&b, &a).unwrap());
    }

    #[test]
    fn scale_counts() {
        assert_eq!(scale_count(64, 5), 3);
        assert_eq!(scale_count(176, 5), 5);
        assert_eq!(scale_count(175, 5), 4);
        assert_eq!(scale_count(11, 5), 1);
        assert_eq!(scale_count(10, 5), 0);
        assert!(ms_ssim(&Tensor3::zeros(8, 8, 1), &Tensor3::zeros(8, 8, 1)).is_err());
        assert!(ms_ssim(&Tensor3::zeros(16, 16, 1), &Tensor3::zeros(16, 17, 1)).is_err());
    }

    #[test]
    fn speedup_examples() {
        let all_keys = SpeedupInputs {
            total_frames: 300,
            key_frames: 300,
            t_d: 0.52,
            t_i: 0.0006,
        };
        assert_eq!(speedup_exact(&all_keys).unwrap(), 1.0);
        assert_eq!(speedup_approx(&all_keys).unwrap(), 1.0);

        let s = SpeedupInputs {
            total_frames: 300,
            key_frames: 10,
            t_d: 0.52,
            t_i: 0.0006,
        };
        // 300·0.52 / (10·0.52 + 290·0.0006) = 156 / 5.374
        assert!((speedup_exact(&s).unwrap() - 156.0 / 5.374).abs() < 1e-9);
        assert_eq!(speedup_approx(&s).unwrap(), 30.0);
        assert!((per_frame_speedup(1.51, 0.02).unwrap() - 75.5).abs() < 1e-9);

        let no_interp = SpeedupInputs { t_i: 0.0, ..s };
        assert_eq!(speedup_exact(&no_interp).unwrap(), speedup_approx(&no_interp).unwrap());
        assert!(speedup_exact(&SpeedupInputs { key_frames: 0, ..s }).is_err());
    }

    #[test]
    fn curve_is_monotone() {
        let rows = speedup_curve(300, &[1, 5, 10, 30, 60], 0.52, 0.0006).unwrap();
        assert_eq!(rows[0].exact, 1.0);
        for pair in rows.windows(2) {
            assert!(pair[1].exact > pair[0].exact);
        }
        assert!(speedup_curve(300, &[0], 1.0, 0.1).is_err());
    }
}
