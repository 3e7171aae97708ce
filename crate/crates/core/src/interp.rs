//! Backward warping of stylized key frames and the key/intermediate
//! scheduler that decides which key each intermediate frame is warped from.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::tensor::{bilinear_sample_into, Frame};

/// `out(x,y,c) = key(x + dx, y + dy, c)`, bilinear with clamped borders,
/// then clamped to `[0, 1]`.
pub fn warp(flow: &FlowField, stylized_key: &Frame) -> Result<Frame> {
    if (flow.height(), flow.width()) != (stylized_key.height(), stylized_key.width()) {
        return Err(Error::Dimension(format!(
            "flow {}x{} vs frame {}x{}",
            flow.height(),
            flow.width(),
            stylized_key.height(),
            stylized_key.width()
        )));
    }
    let (h, w, c) = stylized_key.dims();
    let mut out = Frame::zeros(h, w, c);
    out.data_mut()
        .par_chunks_mut(w * c)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let (dx, dy) = flow.at(y, x);
                let px = &mut row[x * c..(x + 1) * c];
                bilinear_sample_into(stylized_key, x as f64 + dx, y as f64 + dy, px);
                for v in px.iter_mut() {
                    *v = v.clamp(0.0, 1.0);
                }
            }
        });
    Ok(out)
}

/// Which of `len` frames are keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyLayout {
    len: usize,
    key_indices: Vec<usize>,
}

impl KeyLayout {
    /// Keys must be strictly increasing and `< len`. A layout whose first key
    /// is not frame 0 is representable here; [`FrameSequence`] rejects it.
    pub fn new(len: usize, key_indices: Vec<usize>) -> Result<Self> {
        if key_indices.is_empty() {
            return Err(Error::Input("at least one key frame is required".into()));
        }
        if key_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!(
                "key indices must be strictly increasing: {key_indices:?}"
            )));
        }
        if let Some(&last) = key_indices.last() {
            if last >= len {
                return Err(Error::Input(format!(
                    "key index {last} out of range for {len} frames"
                )));
            }
        }
        Ok(Self { len, key_indices })
    }

    /// Frame 0 and every `interval`-th frame after it.
    pub fn fixed_interval(len: usize, interval: usize) -> Result<Self> {
        if interval == 0 {
            return Err(Error::Input("key interval must be >= 1".into()));
        }
        if len == 0 {
            return Err(Error::Input("sequence is empty".into()));
        }
        Self::new(len, (0..len).step_by(interval).collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn key_indices(&self) -> &[usize] {
        &self.key_indices
    }

    pub fn is_key(&self, index: usize) -> bool {
        self.key_indices.binary_search(&index).is_ok()
    }

    pub fn intermediate_indices(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| !self.is_key(i)).collect()
    }

    /// Position `q` (into the key list) of the key governing frame `p`:
    /// the last key strictly before `p`. `None` if no key precedes `p`.
    pub fn governing_key(&self, p: usize) -> Option<usize> {
        match self.key_indices.partition_point(|&k| k < p) {
            0 => None,
            n => Some(n - 1),
        }
    }
}

/// Frames of a clip together with its key layout. Frame 0 is always a key.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    layout: KeyLayout,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, key_indices: Vec<usize>) -> Result<Self> {
        let layout = KeyLayout::new(frames.len(), key_indices)?;
        if layout.key_indices[0] != 0 {
            return Err(Error::Input("frame 0 must be a key frame".into()));
        }
        if let Some(first) = frames.first() {
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_dims(first)) {
                return Err(Error::Input(format!(
                    "frame {i} has dims {:?}, frame 0 has {:?}",
                    f.dims(),
                    first.dims()
                )));
            }
        }
        Ok(Self { frames, layout })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn layout(&self) -> &KeyLayout {
        &self.layout
    }

    pub fn key_frames(&self) -> Vec<&Frame> {
        self.layout.key_indices.iter().map(|&i| &self.frames[i]).collect()
    }
}

/// A flow tagged with the global index of the intermediate frame it belongs to.
#[derive(Clone, Debug)]
pub struct IndexedFlow {
    pub index: usize,
    pub flow: FlowField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexedFrame {
    pub index: usize,
    /// Global index of the key this frame was warped from.
    pub source_key: usize,
    pub frame: Frame,
}

/// Produces every intermediate frame by warping the stylized key that
/// governs it. Output is in ascending frame order.
pub fn interpolate_sequence(
    keys_stylized: &[Frame],
    flows: &[IndexedFlow],
    layout: &KeyLayout,
) -> Result<Vec<IndexedFrame>> {
    if keys_stylized.len() != layout.key_indices.len() {
        return Err(Error::Input(format!(
            "{} stylized keys for {} key indices",
            keys_stylized.len(),
            layout.key_indices.len()
        )));
    }
    let mut by_index = BTreeMap::new();
    for f in flows {
        if f.index >= layout.len || layout.is_key(f.index) {
            return Err(Error::Input(format!(
                "flow for frame {} which is not an intermediate frame",
                f.index
            )));
        }
        if by_index.insert(f.index, &f.flow).is_some() {
            return Err(Error::Input(format!("duplicate flow for frame {}", f.index)));
        }
    }

    let mut jobs = Vec::new();
    for p in layout.intermediate_indices() {
        let q = layout.governing_key(p).ok_or_else(|| {
            Error::Input(format!("intermediate frame {p} precedes the first key frame"))
        })?;
        let flow = by_index
            .get(&p)
            .ok_or_else(|| Error::Input(format!("missing flow for intermediate frame {p}")))?;
        jobs.push((p, q, *flow));
    }

    jobs.into_par_iter()
        .map(|(p, q, flow)| {
            Ok(IndexedFrame {
                index: p,
                source_key: layout.key_indices[q],
                frame: warp(flow, &keys_stylized[q])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor3;

    #[test]
    fn zero_flow_is_identity() {
        let key = Tensor3::from_fn(5, 6, 3, |y, x, c| ((y * 7 + x * 3 + c) % 10) as f64 / 9.0);
        let out = warp(&FlowField::zeros(5, 6), &key).unwrap();
        assert_eq!(out, key);
    }

    #[test]
    fn unit_shift_takes_right_neighbour() {
        let key = Tensor3::from_fn(3, 5, 1, |_, x, _| x as f64 / 4.0);
        let out = warp(&FlowField::constant(3, 5, 1.0, 0.0), &key).unwrap();
        for y in 0..3 {
            for x in 0..5 {
                let src = (x + 1).min(4);
                assert_eq!(out.get(y, x, 0), key.get(y, src, 0));
            }
        }
    }

    #[test]
    fn half_shift_blends_pair() {
        let key = Tensor3::new(1, 2, 1, vec![0.0, 1.0]).unwrap();
        let out = warp(&FlowField::constant(1, 2, 0.5, 0.0), &key).unwrap();
        assert_eq!(out.get(0, 0, 0), 0.5);
    }

    #[test]
    fn warp_dimension_mismatch() {
        let key = Tensor3::zeros(4, 4, 3);
        assert!(matches!(
            warp(&FlowField::zeros(4, 5), &key),
            Err(Error::Dimension(_))
        ));
    }

    fn stamp(v: f64) -> Frame {
        Tensor3::filled(2, 2, 3, v)
    }

    #[test]
    fn five_frames_two_keys() {
        let layout = KeyLayout::new(5, vec![0, 4]).unwrap();
        let flows: Vec<_> = (1..4)
            .map(|i| IndexedFlow {
                index: i,
                flow: FlowField::zeros(2, 2),
            })
            .collect();
        let out = interpolate_sequence(&[stamp(0.1), stamp(0.9)], &flows, &layout).unwrap();
        assert_eq!(out.iter().map(|f| f.index).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(out.iter().all(|f| f.source_key == 0 && f.frame == stamp(0.1)));
    }

    #[test]
    fn all_keys_means_no_output() {
        let layout = KeyLayout::new(3, vec![0, 1, 2]).unwrap();
        let out = interpolate_sequence(&[stamp(0.0), stamp(0.5), stamp(1.0)], &[], &layout).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn seven_frames_zero_flow_copies_governing_key() {
        let layout = KeyLayout::new(7, vec![0, 3, 6]).unwrap();
        let keys = [stamp(0.2), stamp(0.5), stamp(0.8)];
        let flows: Vec<_> = layout
            .intermediate_indices()
            .into_iter()
            .map(|i| IndexedFlow {
                index: i,
                flow: FlowField::zeros(2, 2),
            })
            .collect();
        let out = interpolate_sequence(&keys, &flows, &layout).unwrap();
        let expect = [(1, 0.2), (2, 0.2), (4, 0.5), (5, 0.5)];
        assert_eq!(out.len(), expect.len());
        for (f, (idx, v)) in out.iter().zip(expect) {
            assert_eq!(f.index, idx);
            assert_eq!(f.frame, stamp(v));
        }
    }

    #[test]
    fn trailing_frames_use_last_key() {
        let layout = KeyLayout::new(6, vec![0, 3]).unwrap();
        assert_eq!(layout.governing_key(4), Some(1));
        assert_eq!(layout.governing_key(5), Some(1));
        assert_eq!(layout.governing_key(0), None);
    }

    #[test]
    fn scheduler_errors() {
        let layout = KeyLayout::new(4, vec![0, 2]).unwrap();
        let keys = [stamp(0.0), stamp(1.0)];
        let only_one = [IndexedFlow {
            index: 1,
            flow: FlowField::zeros(2, 2),
        }];
        assert!(matches!(
            interpolate_sequence(&keys, &only_one, &layout),
            Err(Error::Input(_))
        ));

        let late = KeyLayout::new(4, vec![2]).unwrap();
        let flows: Vec<_> = [0, 1, 3]
            .into_iter()
            .map(|i| IndexedFlow {
                index: i,
                flow: FlowField::zeros(2, 2),
            })
            .collect();
        let err = interpolate_sequence(&[stamp(0.0)], &flows, &late).unwrap_err();
        assert!(err.to_string().contains("precedes"));

        assert!(KeyLayout::new(4, vec![0, 0]).is_err());
        assert!(KeyLayout::new(4, vec![0, 4]).is_err());
        assert!(KeyLayout::fixed_interval(4, 0).is_err());
        assert!(FrameSequence::new(vec![stamp(0.0); 3], vec![1]).is_err());
    }
}
