//! Frame files on disk: PNG/PPM reading and writing, numbered frame
//! directories and key-index lists.

use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::tensor::{Frame, Tensor3};

const EXTENSIONS: [&str; 2] = ["png", "ppm"];

fn format_for(path: &Path) -> Result<ImageFormat> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .as_deref()
    {
        Some("png") => Ok(ImageFormat::Png),
        Some("ppm") => Ok(ImageFormat::Pnm),
        _ => Err(Error::format(path, "expected a .png or .ppm file")),
    }
}

/// Loads an image as a 3-channel frame with values in `[0, 1]`.
pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let path = path.as_ref();
    let format = format_for(path)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, format)
        .map_err(|e| Error::format(path, e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Tensor3::new(h as usize, w as usize, 3, data)
}

/// Writes a 3-channel frame, clamping to `[0, 1]` and quantizing to 8 bits.
/// The format follows the file extension.
pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    let path = path.as_ref();
    let format = format_for(path)?;
    if frame.channels() != 3 {
        return Err(Error::Dimension(format!(
            "only 3-channel frames can be saved, got {}",
            frame.channels()
        )));
    }
    let bytes: Vec<u8> = frame
        .data()
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = RgbImage::from_raw(frame.width() as u32, frame.height() as u32, bytes)
        .ok_or_else(|| Error::Dimension("frame buffer size mismatch".into()))?;
    img.save_with_format(path, format)?;
    Ok(())
}

/// A numbered frame file inside a sequence directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameFile {
    pub index: usize,
    pub path: PathBuf,
}

impl FrameFile {
    pub fn stem(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

/// Lists `NNNN.png` / `NNNN.ppm` files in numeric order. Names must be
/// zero-padded decimals of one common width and the numbers must be
/// contiguous; anything else is reported instead of guessed at. Files with
/// other extensions are ignored.
pub fn list_frames(dir: impl AsRef<Path>) -> Result<Vec<FrameFile>> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut width = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase());
        if !ext.is_some_and(|e| EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if stem.is_empty() || !stem.bytes().all(|b| b.is_ascii_digit()) {
            return Err(Error::Input(format!(
                "frame file {} is not named with a zero-padded number",
                path.display()
            )));
        }
        match width {
            None => width = Some(stem.len()),
            Some(w) if w != stem.len() => {
                return Err(Error::Input(format!(
                    "inconsistent zero padding: {} vs width {w}",
                    path.display()
                )))
            }
            _ => {}
        }
        let index = stem
            .parse()
            .map_err(|_| Error::Input(format!("frame number too large: {}", path.display())))?;
        files.push(FrameFile { index, path });
    }
    if files.is_empty() {
        return Err(Error::Input(format!("no frames found in {}", dir.display())));
    }
    files.sort_by_key(|f| f.index);
    for pair in files.windows(2) {
        if pair[0].index == pair[1].index {
            return Err(Error::Input(format!(
                "frame number {} appears twice",
                pair[0].index
            )));
        }
        if pair[1].index != pair[0].index + 1 {
            return Err(Error::Input(format!(
                "frame numbers jump from {} to {}",
                pair[0].index, pair[1].index
            )));
        }
    }
    Ok(files)
}

/// Reads a whole numbered sequence; every frame must have the same size.
pub fn read_sequence(dir: impl AsRef<Path>) -> Result<(Vec<FrameFile>, Vec<Frame>)> {
    let files = list_frames(dir)?;
    let frames = files
        .iter()
        .map(|f| read_frame(&f.path))
        .collect::<Result<Vec<_>>>()?;
    if let Some((i, f)) = frames
        .iter()
        .enumerate()
        .find(|(_, f)| !f.same_dims(&frames[0]))
    {
        return Err(Error::Input(format!(
            "{} is {}x{}, expected {}x{}",
            files[i].path.display(),
            f.width(),
            f.height(),
            frames[0].width(),
            frames[0].height()
        )));
    }
    Ok((files, frames))
}

/// Zero-padded file name for frame `index` of a clip with `count` frames.
pub fn frame_name(index: usize, count: usize, ext: &str) -> String {
    let digits = count.saturating_sub(1).to_string().len().max(4);
    format!("{index:0digits$}.{ext}")
}

/// Writes `frames` as `0000.png`, `0001.png`, ... into `dir`.
pub fn write_sequence(dir: impl AsRef<Path>, frames: &[Frame]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let path = dir.join(frame_name(i, frames.len(), "png"));
            write_frame(&path, f)?;
            Ok(path)
        })
        .collect()
}

/// Parses a key-index list: integers separated by whitespace or commas,
/// `#` starting a comment.
pub fn parse_key_list(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Input(format!("bad key index '{t}'")))
        })
        .collect()
}

pub fn read_key_list(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_key_list(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::smooth_texture;

    #[test]
    fn png_and_ppm_roundtrip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let f = smooth_texture(1, 9, 13);
        for name in ["a.png", "a.ppm"] {
            let p = dir.path().join(name);
            write_frame(&p, &f).unwrap();
            let back = read_frame(&p).unwrap();
            assert_eq!(back.dims(), (9, 13, 3));
            assert!(back.max_abs_diff(&f) <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn listing_rules() {
        let dir = tempfile::tempdir().unwrap();
        let f = Tensor3::zeros(2, 2, 3);
        for i in [2, 0, 1] {
            write_frame(dir.path().join(format!("{i:03}.png")), &f).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let files = list_frames(dir.path()).unwrap();
        assert_eq!(files.iter().map(|f| f.index).collect::<Vec<_>>(), vec![0, 1, 2]);

        write_frame(dir.path().join("0003.png"), &f).unwrap();
        assert!(list_frames(dir.path()).unwrap_err().to_string().contains("padding"));
    }

    #[test]
    fn gaps_and_names_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = Tensor3::zeros(2, 2, 3);
        write_frame(dir.path().join("00.png"), &f).unwrap();
        write_frame(dir.path().join("02.png"), &f).unwrap();
        assert!(list_frames(dir.path()).is_err());

        let other = tempfile::tempdir().unwrap();
        write_frame(other.path().join("frame1.png"), &f).unwrap();
        assert!(matches!(list_frames(other.path()), Err(Error::Input(_))));

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(list_frames(empty.path()), Err(Error::Input(_))));
    }

    #[test]
    fn mixed_sizes_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_frame(dir.path().join("0.png"), &Tensor3::zeros(2, 2, 3)).unwrap();
        write_frame(dir.path().join("1.png"), &Tensor3::zeros(3, 2, 3)).unwrap();
        assert!(matches!(read_sequence(dir.path()), Err(Error::Input(_))));
    }

    #[test]
    fn names_and_key_lists() {
        assert_eq!(frame_name(7, 30, "png"), "0007.png");
        assert_eq!(frame_name(7, 20000, "png"), "00007.png");
        assert_eq!(parse_key_list("0, 10\n20 # tail\n").unwrap(), vec![0, 10, 20]);
        assert!(parse_key_list("0 x").is_err());
    }
}
