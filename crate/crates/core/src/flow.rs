//! Dense single-level Lucas–Kanade flow.
//!
//! Flow follows the backward-warp convention used by the interpolator:
//! `intermediate(x, y) = key(x + dx, y + dy)`, i.e. the vector at an
//! intermediate pixel points to where that pixel's content sits in the key
//! frame. Warping a stylized key with this field needs no negation.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Frame, Tensor3};

/// Per-pixel displacement field.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Dimension(format!(
                "flow dimensions must be >= 1, got {height}x{width}"
            )));
        }
        if dx.len() != height * width || dy.len() != height * width {
            return Err(Error::Dimension(format!(
                "flow components ({}, {}) do not match {height}x{width}",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::Domain("flow contains non-finite values".into()));
        }
        Ok(Self {
            height,
            width,
            dx,
            dy,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, 0.0, 0.0)
    }

    pub fn constant(height: usize, width: usize, dx: f64, dy: f64) -> Self {
        assert!(height > 0 && width > 0, "flow dimensions must be >= 1");
        Self {
            height,
            width,
            dx: vec![dx; height * width],
            dy: vec![dy; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    /// `(dx, dy)` at row `y`, column `x`.
    #[inline]
    pub fn at(&self, y: usize, x: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.dx[i], self.dy[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Side of the square aggregation window; odd, >= 3.
    pub window: usize,
    /// Tikhonov term added to the diagonal of the structure tensor.
    pub epsilon: f64,
    /// Gaussian pre-smoothing; 0 disables it.
    pub sigma: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            window: 5,
            epsilon: 1e-4,
            sigma: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "flow window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "flow regularization must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "flow smoothing sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Separable Gaussian blur of a single-channel plane with clamped borders.
fn gaussian_blur(plane: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return plane.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= norm);

    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            *out = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * plane[y * w + clamp(x as isize + k as isize - radius, w)])
                .sum();
        }
    });
    let mut out = vec![0.0; h * w];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, o) in row.iter_mut().enumerate() {
            *o = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[clamp(y as isize + k as isize - radius, h) * w + x])
                .sum();
        }
    });
    out
}

/// Central-difference gradients, one-sided at the borders.
fn gradients(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            // one-sided at the borders; zero on a 1-pixel axis
            gx[y * w + x] = (plane[y * w + xr] - plane[y * w + xl]) / (xr - xl).max(1) as f64;
            gy[y * w + x] = (plane[yd * w + x] - plane[yu * w + x]) / (yd - yu).max(1) as f64;
        }
    }
    (gx, gy)
}

/// Sum over the in-bounds part of a `window × window` box centred on each
/// pixel.
fn box_sum(plane: &[f64], h: usize, w: usize, window: usize) -> Vec<f64> {
    let r = window / 2;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r).min(w - 1);
            rows[y * w + x] = plane[y * w + lo..=y * w + hi].iter().sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).map(|yy| rows[yy * w + x]).sum();
        }
    }
    out
}

/// Estimates the flow `f` with `intermediate(x,y) ≈ key(x+f.dx, y+f.dy)`.
///
/// Both frames are reduced to luminance and blurred; spatial gradients are
/// the average of the two frames' central differences. Each pixel solves
/// `(A + εI) d = b` with `A = Σ ∇I ∇Iᵀ`, `b = Σ ∇I (intermediate − key)`
/// over its window.
pub fn estimate_flow(intermediate: &Frame, key: &Frame, cfg: &FlowConfig) -> Result<FlowField> {
    cfg.validate()?;
    intermediate.check_same_dims(key, "flow frames")?;
    let (h, w) = (key.height(), key.width());

    let prep = |f: &Tensor3| gaussian_blur(f.luminance().data(), h, w, cfg.sigma);
    let (inter, base) = rayon::join(|| prep(intermediate), || prep(key));

    let (gxi, gyi) = gradients(&inter, h, w);
    let (gxk, gyk) = gradients(&base, h, w);
    let n = h * w;
    let mut gxx = vec![0.0; n];
    let mut gxy = vec![0.0; n];
    let mut gyy = vec![0.0; n];
    let mut gxt = vec![0.0; n];
    let mut gyt = vec![0.0; n];
    for i in 0..n {
        let gx = 0.5 * (gxi[i] + gxk[i]);
        let gy = 0.5 * (gyi[i] + gyk[i]);
        let it = inter[i] - base[i];
        gxx[i] = gx * gx;
        gxy[i] = gx * gy;
        gyy[i] = gy * gy;
        gxt[i] = gx * it;
        gyt[i] = gy * it;
    }

    let [sxx, sxy, syy, sxt, syt] =
        [&gxx, &gxy, &gyy, &gxt, &gyt].map(|p| box_sum(p, h, w, cfg.window));

    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; n];
    dx.par_iter_mut()
        .zip(dy.par_iter_mut())
        .enumerate()
        .for_each(|(i, (u, v))| {
            let a = sxx[i] + cfg.epsilon;
            let b = sxy[i];
            let d = syy[i] + cfg.epsilon;
            let det = a * d - b * b;
            *u = (d * sxt[i] - b * syt[i]) / det;
            *v = (a * syt[i] - b * sxt[i]) / det;
        });
    FlowField::new(h, w, dx, dy)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowStats {
    pub mean: f64,
    pub max: f64,
}

/// Mean and maximum endpoint magnitude `√(dx² + dy²)`.
pub fn flow_magnitude_stats(f: &FlowField) -> FlowStats {
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (u, v) in f.dx.iter().zip(&f.dy) {
        let m = u.hypot(*v);
        sum += m;
        max = max.max(m);
    }
    FlowStats {
        mean: sum / f.dx.len() as f64,
        max,
    }
}

/// Middlebury `.flo` tag: the bytes `PIEH`, i.e. `202021.25f32` little-endian.
const FLO_MAGIC: f32 = 202021.25;

/// Writes Middlebury `.flo`: magic, width, height (little-endian), then
/// row-major interleaved `(dx, dy)` as `f32`.
pub fn write_flo(path: impl AsRef<Path>, f: &FlowField) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut buf = Vec::with_capacity(12 + 8 * f.dx.len());
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&(f.width as i32).to_le_bytes());
    buf.extend_from_slice(&(f.height as i32).to_le_bytes());
    for (u, v) in f.dx.iter().zip(&f.dy) {
        buf.extend_from_slice(&(*u as f32).to_le_bytes());
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::format(path, "truncated header"));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(Error::format(path, "bad magic, expected PIEH"));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::format(path, format!("bad size {width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let n = width * height;
    if bytes.len() != 12 + 8 * n {
        return Err(Error::format(
            path,
            format!("expected {} bytes for {width}x{height}, got {}", 12 + 8 * n, bytes.len()),
        ));
    }
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for k in 0..n {
        dx.push(f32::from_le_bytes(word(12 + 8 * k)) as f64);
        dy.push(f32::from_le_bytes(word(16 + 8 * k)) as f64);
    }
    FlowField::new(height, width, dx, dy).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = Tensor3::from_fn(24, 20, 3, |y, x, c| {
            (0.3 * x as f64 + 0.2 * y as f64 + c as f64).sin() * 0.5 + 0.5
        });
        let flow = estimate_flow(&f, &f, &FlowConfig::default()).unwrap();
        assert!(flow.dx().iter().chain(flow.dy()).all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn flat_frames_give_zero_flow() {
        let a = Tensor3::filled(10, 10, 1, 0.4);
        let b = Tensor3::filled(10, 10, 1, 0.7);
        let flow = estimate_flow(&a, &b, &FlowConfig::default()).unwrap();
        assert!(flow.dx().iter().chain(flow.dy()).all(|v| *v == 0.0));
    }

    #[test]
    fn dimension_and_config_errors() {
        let a = Tensor3::zeros(8, 8, 1);
        let b = Tensor3::zeros(8, 9, 1);
        assert!(matches!(
            estimate_flow(&a, &b, &FlowConfig::default()),
            Err(Error::Dimension(_))
        ));
        let bad = FlowConfig {
            window: 4,
            ..FlowConfig::default()
        };
        assert!(matches!(estimate_flow(&a, &a, &bad), Err(Error::Config(_))));
        let bad = FlowConfig {
            epsilon: 0.0,
            ..FlowConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn magnitude_stats() {
        let z = flow_magnitude_stats(&FlowField::zeros(3, 4));
        assert_eq!((z.mean, z.max), (0.0, 0.0));
        let c = flow_magnitude_stats(&FlowField::constant(3, 4, 3.0, 4.0));
        assert_eq!((c.mean, c.max), (5.0, 5.0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let dx: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
        let dy: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = FlowField::new(5, 6, dx.clone(), dy.clone()).unwrap();
        let mut mags = Vec::new();
        for i in 0..30 {
            mags.push((dx[i] * dx[i] + dy[i] * dy[i]).sqrt());
        }
        let s = flow_magnitude_stats(&f);
        let mean = mags.iter().sum::<f64>() / 30.0;
        let max = mags.iter().cloned().fold(f64::MIN, f64::max);
        assert!((s.mean - mean).abs() < 1e-12);
        assert!((s.max - max).abs() < 1e-12);
    }

    #[test]
    fn flo_roundtrip_and_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.flo");
        let f = FlowField::new(2, 3, vec![0.5, -1.0, 2.0, 0.0, 0.25, 3.0], vec![1.0; 6]).unwrap();
        write_flo(&path, &f).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], b"PIEH");
        assert_eq!(i32::from_le_bytes(bytes[4..8].try_into().unwrap()), 3);
        assert_eq!(i32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 12 + 2 * 3 * 8);
        assert_eq!(read_flo(&path).unwrap(), f);

        std::fs::write(&path, b"nope").unwrap();
        assert!(matches!(read_flo(&path), Err(Error::Format { .. })));
    }
}
