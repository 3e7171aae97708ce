//! Dense `H×W×C` tensors and the handful of operators the stylizer needs:
//! same/explicit-padded 2D convolution, strided transposed convolution,
//! clamp-to-edge bilinear sampling and bilinear rescaling.
//!
//! Data is stored row-major in HWC order, so one pixel's channels are
//! contiguous. Kernels are stored as `[out][in][ky][kx]`. Every learnable
//! operator has a matching `*_backward` returning the vector-Jacobian
//! products for its input and (where applicable) its weights.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// An `H×W×C` block of finite `f64` values.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

/// An image: a [`Tensor3`] whose values live in `[0, 1]`.
pub type Frame = Tensor3;

/// Encoder activations (`F_c`, `F_s`, `F_cs`).
pub type FeatureMap = Tensor3;

impl Tensor3 {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Dimension(format!(
                "tensor dimensions must be >= 1, got {height}x{width}x{channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("tensor value {bad} is not finite")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Self {
        assert!(
            height > 0 && width > 0 && channels > 0,
            "tensor dimensions must be >= 1"
        );
        Self {
            height,
            width,
            channels,
            data: vec![value; height * width * channels],
        }
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self::filled(height, width, channels, 0.0)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(height, width, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    t.data[(y * width + x) * channels + c] = f(y, x, c);
                }
            }
        }
        t
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width, channels)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, value: f64) {
        let i = self.index(y, x, c);
        self.data[i] = value;
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let start = (y * self.width + x) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn same_dims(&self, other: &Tensor3) -> bool {
        self.dims() == other.dims()
    }

    pub(crate) fn check_same_dims(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.same_dims(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }

    pub fn clamp01(&self) -> Self {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    /// Elementwise `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Tensor3) -> Result<Self> {
        self.check_same_dims(other, "axpy")?;
        Ok(Self {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + alpha * b)
                .collect(),
            ..*self
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        assert!(self.same_dims(other), "max_abs_diff on mismatched tensors");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Single channel copy of channel `c`.
    pub fn channel(&self, c: usize) -> Self {
        Self::from_fn(self.height, self.width, 1, |y, x, _| self.get(y, x, c))
    }

    /// Luminance plane. RGB uses BT.601 weights, one channel is passed
    /// through, anything else is averaged.
    pub fn luminance(&self) -> Self {
        match self.channels {
            1 => self.clone(),
            3 => Self::from_fn(self.height, self.width, 1, |y, x, _| {
                let p = self.pixel(y, x);
                0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
            }),
            _ => self.channel_mean(),
        }
    }

    pub fn channel_mean(&self) -> Self {
        Self::from_fn(self.height, self.width, 1, |y, x, _| {
            self.pixel(y, x).iter().sum::<f64>() / self.channels as f64
        })
    }
}

/// A bank of `out_channels` filters over `in_channels`, each `kh×kw`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    out_channels: usize,
    in_channels: usize,
    kh: usize,
    kw: usize,
    weights: Vec<f64>,
}

impl Kernel {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 || kh == 0 || kw == 0 {
            return Err(Error::Dimension(format!(
                "kernel dimensions must be >= 1, got {out_channels}x{in_channels}x{kh}x{kw}"
            )));
        }
        if weights.len() != out_channels * in_channels * kh * kw {
            return Err(Error::Dimension(format!(
                "kernel weight length {} does not match {out_channels}x{in_channels}x{kh}x{kw}",
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("kernel weight {bad} is not finite")));
        }
        Ok(Self {
            out_channels,
            in_channels,
            kh,
            kw,
            weights,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize, kh: usize, kw: usize) -> Self {
        Self::new(
            out_channels,
            in_channels,
            kh,
            kw,
            vec![0.0; out_channels * in_channels * kh * kw],
        )
        .expect("kernel dimensions must be >= 1")
    }

    pub fn from_fn(
        out_channels: usize,
        in_channels: usize,
        kh: usize,
        kw: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut k = Self::zeros(out_channels, in_channels, kh, kw);
        for o in 0..out_channels {
            for i in 0..in_channels {
                for ky in 0..kh {
                    for kx in 0..kw {
                        let idx = k.index(o, i, ky, kx);
                        k.weights[idx] = f(o, i, ky, kx);
                    }
                }
            }
        }
        k
    }

    /// A `1×1` kernel copying input channel `c` to output channel `c`.
    pub fn identity(channels: usize) -> Self {
        Self::from_fn(channels, channels, 1, 1, |o, i, _, _| {
            if o == i {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    /// `(out, in, kh, kw)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.out_channels, self.in_channels, self.kh, self.kw)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    #[inline]
    pub fn index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kh + ky) * self.kw + kx
    }

    #[inline]
    pub fn get(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[self.index(o, i, ky, kx)]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..*self
        }
    }

    /// Weights repacked as `[ky][kx][in][out]` so the innermost loop of the
    /// convolution walks contiguous memory.
    fn packed(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.weights.len()];
        for o in 0..self.out_channels {
            for i in 0..self.in_channels {
                for ky in 0..self.kh {
                    for kx in 0..self.kw {
                        let dst = ((ky * self.kw + kx) * self.in_channels + i) * self.out_channels + o;
                        p[dst] = self.get(o, i, ky, kx);
                    }
                }
            }
        }
        p
    }

    fn from_packed(out_channels: usize, in_channels: usize, kh: usize, kw: usize, p: &[f64]) -> Self {
        Self::from_fn(out_channels, in_channels, kh, kw, |o, i, ky, kx| {
            p[((ky * kw + kx) * in_channels + i) * out_channels + o]
        })
    }
}

/// Zero padding applied around the input of [`conv2d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Padding {
    /// `(k-1)/2` on each side; output keeps the input's spatial size.
    /// Only defined for odd kernels.
    Same,
    Explicit(usize),
}

impl From<usize> for Padding {
    fn from(p: usize) -> Self {
        Padding::Explicit(p)
    }
}

fn resolve_padding(k: &Kernel, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Explicit(p) => Ok((p, p)),
        Padding::Same => {
            if k.kh % 2 == 0 || k.kw % 2 == 0 {
                Err(Error::Config(format!(
                    "same padding needs an odd kernel, got {}x{}",
                    k.kh, k.kw
                )))
            } else {
                Ok(((k.kh - 1) / 2, (k.kw - 1) / 2))
            }
        }
    }
}

struct ConvGeometry {
    pad_y: usize,
    pad_x: usize,
    out_h: usize,
    out_w: usize,
}

fn conv_geometry(input: &Tensor3, k: &Kernel, padding: Padding) -> Result<ConvGeometry> {
    if k.in_channels != input.channels {
        return Err(Error::Dimension(format!(
            "kernel expects {} input channels, tensor has {}",
            k.in_channels, input.channels
        )));
    }
    let (pad_y, pad_x) = resolve_padding(k, padding)?;
    let span_h = input.height + 2 * pad_y;
    let span_w = input.width + 2 * pad_x;
    if span_h < k.kh || span_w < k.kw {
        return Err(Error::Dimension(format!(
            "kernel {}x{} larger than padded input {span_h}x{span_w}",
            k.kh, k.kw
        )));
    }
    Ok(ConvGeometry {
        pad_y,
        pad_x,
        out_h: span_h - k.kh + 1,
        out_w: span_w - k.kw + 1,
    })
}

/// 2D cross-correlation with zero padding:
/// `out(y,x,o) = Σ_{i,ky,kx} in(y+ky-pad, x+kx-pad, i) · k(o,i,ky,kx)`.
pub fn conv2d(input: &Tensor3, k: &Kernel, padding: impl Into<Padding>) -> Result<Tensor3> {
    let g = conv_geometry(input, k, padding.into())?;
    let packed = k.packed();
    let (ic, oc) = (k.in_channels, k.out_channels);
    let mut out = Tensor3::zeros(g.out_h, g.out_w, oc);
    out.data
        .par_chunks_mut(g.out_w * oc)
        .enumerate()
        .for_each(|(y, row)| {
            for ky in 0..k.kh {
                let iy = y + ky;
                if iy < g.pad_y || iy - g.pad_y >= input.height {
                    continue;
                }
                let iy = iy - g.pad_y;
                for x in 0..g.out_w {
                    let acc = &mut row[x * oc..(x + 1) * oc];
                    for kx in 0..k.kw {
                        let ix = x + kx;
                        if ix < g.pad_x || ix - g.pad_x >= input.width {
                            continue;
                        }
                        let pix = input.pixel(iy, ix - g.pad_x);
                        let wbase = (ky * k.kw + kx) * ic * oc;
                        for (i, &v) in pix.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let w = &packed[wbase + i * oc..wbase + (i + 1) * oc];
                            for (a, &wv) in acc.iter_mut().zip(w) {
                                *a += v * wv;
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Vector-Jacobian products of [`conv2d`]: returns `(∂L/∂input, ∂L/∂kernel)`
/// given `∂L/∂output`.
pub fn conv2d_backward(
    input: &Tensor3,
    k: &Kernel,
    padding: impl Into<Padding>,
    grad_out: &Tensor3,
) -> Result<(Tensor3, Kernel)> {
    let g = conv_geometry(input, k, padding.into())?;
    if grad_out.dims() != (g.out_h, g.out_w, k.out_channels) {
        return Err(Error::Dimension(format!(
            "output gradient {:?} does not match conv output {:?}",
            grad_out.dims(),
            (g.out_h, g.out_w, k.out_channels)
        )));
    }
    let packed = k.packed();
    let (ic, oc) = (k.in_channels, k.out_channels);

    // Input gradient: gather over the output rows each input row feeds.
    let mut grad_in = Tensor3::zeros(input.height, input.width, ic);
    grad_in
        .data
        .par_chunks_mut(input.width * ic)
        .enumerate()
        .for_each(|(iy, row)| {
            for ky in 0..k.kh {
                // y + ky - pad_y == iy
                let Some(y) = (iy + g.pad_y).checked_sub(ky) else {
                    continue;
                };
                if y >= g.out_h {
                    continue;
                }
                for ix in 0..input.width {
                    let acc = &mut row[ix * ic..(ix + 1) * ic];
                    for kx in 0..k.kw {
                        let Some(x) = (ix + g.pad_x).checked_sub(kx) else {
                            continue;
                        };
                        if x >= g.out_w {
                            continue;
                        }
                        let go = grad_out.pixel(y, x);
                        let wbase = (ky * k.kw + kx) * ic * oc;
                        for (i, a) in acc.iter_mut().enumerate() {
                            let w = &packed[wbase + i * oc..wbase + (i + 1) * oc];
                            *a += w.iter().zip(go).map(|(wv, gv)| wv * gv).sum::<f64>();
                        }
                    }
                }
            }
        });

    // Weight gradient: one partial sum per output row, reduced in row order
    // so the result does not depend on the thread count.
    let partials: Vec<Vec<f64>> = (0..g.out_h)
        .into_par_iter()
        .map(|y| {
            let mut part = vec![0.0; packed.len()];
            for ky in 0..k.kh {
                let iy = y + ky;
                if iy < g.pad_y || iy - g.pad_y >= input.height {
                    continue;
                }
                let iy = iy - g.pad_y;
                for x in 0..g.out_w {
                    let go = grad_out.pixel(y, x);
                    for kx in 0..k.kw {
                        let ix = x + kx;
                        if ix < g.pad_x || ix - g.pad_x >= input.width {
                            continue;
                        }
                        let pix = input.pixel(iy, ix - g.pad_x);
                        let wbase = (ky * k.kw + kx) * ic * oc;
                        for (i, &v) in pix.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let dst = &mut part[wbase + i * oc..wbase + (i + 1) * oc];
                            for (d, &gv) in dst.iter_mut().zip(go) {
                                *d += v * gv;
                            }
                        }
                    }
                }
            }
            part
        })
        .collect();
    let mut gw = vec![0.0; packed.len()];
    for part in &partials {
        for (a, b) in gw.iter_mut().zip(part) {
            *a += b;
        }
    }
    let grad_k = Kernel::from_packed(oc, ic, k.kh, k.kw, &gw);
    Ok((grad_in, grad_k))
}

/// Places `input(y,x)` at `(stride·y, stride·x)` of an otherwise zero
/// `stride·H × stride·W` tensor.
pub fn zero_insert(input: &Tensor3, stride: usize) -> Tensor3 {
    if stride == 1 {
        return input.clone();
    }
    let mut up = Tensor3::zeros(input.height * stride, input.width * stride, input.channels);
    for y in 0..input.height {
        for x in 0..input.width {
            let src = input.index(y, x, 0);
            let dst = up.index(y * stride, x * stride, 0);
            up.data[dst..dst + input.channels].copy_from_slice(&input.data[src..src + input.channels]);
        }
    }
    up
}

/// Adjoint of [`zero_insert`]: keeps every `stride`-th pixel.
pub fn subsample(input: &Tensor3, stride: usize) -> Tensor3 {
    if stride == 1 {
        return input.clone();
    }
    let (h, w) = (input.height / stride, input.width / stride);
    Tensor3::from_fn(h, w, input.channels, |y, x, c| input.get(y * stride, x * stride, c))
}

fn check_stride(stride: usize) -> Result<()> {
    if stride == 0 {
        Err(Error::Domain("deconvolution stride must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Transposed convolution with integer stride: zero insertion followed by a
/// same-padded convolution, so the output is exactly `stride·H × stride·W`.
/// With `stride == 1` this is [`conv2d`] with [`Padding::Same`].
pub fn deconv2d(input: &Tensor3, k: &Kernel, stride: usize) -> Result<Tensor3> {
    check_stride(stride)?;
    if k.in_channels != input.channels {
        return Err(Error::Dimension(format!(
            "kernel expects {} input channels, tensor has {}",
            k.in_channels, input.channels
        )));
    }
    conv2d(&zero_insert(input, stride), k, Padding::Same)
}

pub fn deconv2d_backward(
    input: &Tensor3,
    k: &Kernel,
    stride: usize,
    grad_out: &Tensor3,
) -> Result<(Tensor3, Kernel)> {
    check_stride(stride)?;
    let up = zero_insert(input, stride);
    let (grad_up, grad_k) = conv2d_backward(&up, k, Padding::Same, grad_out)?;
    Ok((subsample(&grad_up, stride), grad_k))
}

/// Corner indices and fractional offsets for a clamped bilinear lookup.
#[derive(Clone, Copy, Debug)]
struct BilinearTap {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
    fx: f64,
    fy: f64,
}

#[inline]
fn bilinear_tap(height: usize, width: usize, x: f64, y: f64) -> BilinearTap {
    let cx = x.clamp(0.0, (width - 1) as f64);
    let cy = y.clamp(0.0, (height - 1) as f64);
    let x0 = cx.floor() as usize;
    let y0 = cy.floor() as usize;
    BilinearTap {
        x0,
        y0,
        x1: (x0 + 1).min(width - 1),
        y1: (y0 + 1).min(height - 1),
        fx: cx - x0 as f64,
        fy: cy - y0 as f64,
    }
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    // exact at t == 0 and for a == b
    a + t * (b - a)
}

/// Writes the bilinear sample of every channel at `(x, y)` into `out`.
/// Coordinates outside the image are clamped to the border.
#[inline]
pub fn bilinear_sample_into(input: &Tensor3, x: f64, y: f64, out: &mut [f64]) {
    let t = bilinear_tap(input.height, input.width, x, y);
    let p00 = input.pixel(t.y0, t.x0);
    let p01 = input.pixel(t.y0, t.x1);
    let p10 = input.pixel(t.y1, t.x0);
    let p11 = input.pixel(t.y1, t.x1);
    for c in 0..input.channels {
        let top = lerp(p00[c], p01[c], t.fx);
        let bottom = lerp(p10[c], p11[c], t.fx);
        out[c] = lerp(top, bottom, t.fy);
    }
}

/// Bilinear sample of all channels at continuous coordinates `(x, y)`
/// (x = column, y = row), with clamp-to-edge borders.
pub fn bilinear_sample(input: &Tensor3, x: f64, y: f64) -> Vec<f64> {
    let mut out = vec![0.0; input.channels];
    bilinear_sample_into(input, x, y, &mut out);
    out
}

fn check_size(h: usize, w: usize) -> Result<()> {
    if h == 0 || w == 0 {
        Err(Error::Domain(format!("resize target {h}x{w} is degenerate")))
    } else {
        Ok(())
    }
}

#[inline]
fn source_coord(dst: usize, in_len: usize, out_len: usize) -> f64 {
    (dst as f64 + 0.5) * (in_len as f64 / out_len as f64) - 0.5
}

/// Bilinear resize to `out_h × out_w` using pixel-centre alignment.
pub fn resize(input: &Tensor3, out_h: usize, out_w: usize) -> Result<Tensor3> {
    check_size(out_h, out_w)?;
    if (out_h, out_w) == (input.height, input.width) {
        return Ok(input.clone());
    }
    let c = input.channels;
    let mut out = Tensor3::zeros(out_h, out_w, c);
    out.data
        .par_chunks_mut(out_w * c)
        .enumerate()
        .for_each(|(y, row)| {
            let sy = source_coord(y, input.height, out_h);
            for x in 0..out_w {
                let sx = source_coord(x, input.width, out_w);
                bilinear_sample_into(input, sx, sy, &mut row[x * c..(x + 1) * c]);
            }
        });
    Ok(out)
}

/// Adjoint of [`resize`]: scatters `grad_out` back onto an `in_h × in_w` grid.
pub fn resize_backward(grad_out: &Tensor3, in_h: usize, in_w: usize) -> Result<Tensor3> {
    check_size(in_h, in_w)?;
    if (grad_out.height, grad_out.width) == (in_h, in_w) {
        return Ok(grad_out.clone());
    }
    let c = grad_out.channels;
    let mut g = Tensor3::zeros(in_h, in_w, c);
    for y in 0..grad_out.height {
        let sy = source_coord(y, in_h, grad_out.height);
        for x in 0..grad_out.width {
            let sx = source_coord(x, in_w, grad_out.width);
            let t = bilinear_tap(in_h, in_w, sx, sy);
            let taps = [
                (t.y0, t.x0, (1.0 - t.fy) * (1.0 - t.fx)),
                (t.y0, t.x1, (1.0 - t.fy) * t.fx),
                (t.y1, t.x0, t.fy * (1.0 - t.fx)),
                (t.y1, t.x1, t.fy * t.fx),
            ];
            for ch in 0..c {
                let go = grad_out.get(y, x, ch);
                for &(ty, tx, w) in &taps {
                    let i = g.index(ty, tx, ch);
                    g.data[i] += w * go;
                }
            }
        }
    }
    Ok(g)
}

/// `round(r·H) × round(r·W)`, or a domain error when `r <= 0` or either
/// side rounds to zero.
pub fn scaled_dims(height: usize, width: usize, r: f64) -> Result<(usize, usize)> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("scale factor must be > 0, got {r}")));
    }
    let h = (r * height as f64).round() as usize;
    let w = (r * width as f64).round() as usize;
    if h == 0 || w == 0 {
        return Err(Error::Domain(format!(
            "scale {r} maps {height}x{width} to degenerate {h}x{w}"
        )));
    }
    Ok((h, w))
}

/// Bilinear rescale by factor `r` to `round(r·H) × round(r·W)`.
pub fn rescale(input: &Tensor3, r: f64) -> Result<Tensor3> {
    let (h, w) = scaled_dims(input.height, input.width, r)?;
    resize(input, h, w)
}
