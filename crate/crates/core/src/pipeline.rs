//! End-to-end clip processing: key frames go through the stylizer, every
//! other frame is warped from its governing stylized key. Also the
//! stylize-vs-warp benchmark and directory comparison reports.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::load_params;
use crate::error::{Error, Result};
use crate::flow::{estimate_flow, flow_magnitude_stats, write_flo, FlowConfig};
use crate::frames::{frame_name, list_frames, read_frame, read_key_list, read_sequence, write_frame};
use crate::interp::{interpolate_sequence, warp, FrameSequence, IndexedFlow, KeyLayout};
use crate::latency::{parse_resolution, resolution_key, Destination, LatencyTable, LinkLatency};
use crate::metrics::{ms_ssim_with, speedup_approx, speedup_exact, MsSsimConfig, SpeedupInputs};
use crate::stylizer::{
    stylize, ColorizeMode, EncoderDescriptor, EncoderSpec, StylizerConfig, StylizerParams,
};
use crate::synth::{stripe_texture, translating_sequence};
use crate::tensor::{resize, scaled_dims, Frame};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    pub key_interval: usize,
    /// Explicit key indices; overrides `key_interval` when set.
    pub key_indices: Option<Vec<usize>>,
    /// File with key indices; overrides `key_interval` when set.
    pub key_file: Option<PathBuf>,
    pub scale: f64,
    /// Working size for the stylizer. When unset it is the frame size
    /// divided by `scale`, so the stylized keys come out at frame size.
    pub working_height: Option<usize>,
    pub working_width: Option<usize>,
    pub colorize: ColorizeMode,
    pub flow: FlowConfig,
    /// Trained parameters; freshly initialized from `seed` when unset.
    pub params: Option<PathBuf>,
    /// Style image; a synthetic stripe texture from `seed` when unset.
    pub style: Option<PathBuf>,
    pub encoder: EncoderDescriptor,
    pub latency: LatencyTable,
    pub destination: Destination,
    /// Latency table row to charge; defaults to the frame resolution.
    pub latency_resolution: Option<String>,
    pub save_flows: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: PathBuf::new(),
            output_dir: PathBuf::new(),
            key_interval: 10,
            key_indices: None,
            key_file: None,
            scale: 1.0,
            working_height: None,
            working_width: None,
            colorize: ColorizeMode::Literal,
            flow: FlowConfig::default(),
            params: None,
            style: None,
            encoder: EncoderDescriptor::default(),
            latency: LatencyTable::reference(),
            destination: Destination::Edge,
            latency_resolution: None,
            save_flows: false,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.key_interval == 0 {
            return Err(Error::Config("key interval must be >= 1".into()));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!("scale must be > 0, got {}", self.scale)));
        }
        if self.working_height == Some(0) || self.working_width == Some(0) {
            return Err(Error::Config("working size must be >= 1".into()));
        }
        if let Some(res) = &self.latency_resolution {
            parse_resolution(res)?;
        }
        self.flow.validate()?;
        self.latency.validate()
    }

    fn layout(&self, len: usize) -> Result<KeyLayout> {
        if let Some(keys) = &self.key_indices {
            return KeyLayout::new(len, keys.clone());
        }
        if let Some(path) = &self.key_file {
            return KeyLayout::new(len, read_key_list(path)?);
        }
        KeyLayout::fixed_interval(len, self.key_interval)
    }

    /// Stylizer settings for frames of `height × width`.
    pub fn stylizer_config(&self, height: usize, width: usize) -> Result<StylizerConfig> {
        let (dh, dw) = scaled_dims(height, width, 1.0 / self.scale)?;
        Ok(StylizerConfig {
            working_height: self.working_height.unwrap_or(dh),
            working_width: self.working_width.unwrap_or(dw),
            colorize: self.colorize,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    StylizedKey,
    Interpolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub file: String,
    pub kind: FrameKind,
    /// The key this frame was produced from (itself for keys).
    pub source_key: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// False until every listed frame has been written.
    pub complete: bool,
    pub frames: Vec<ManifestEntry>,
}

/// Wall-clock seconds per stage. Not deterministic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub load_s: f64,
    pub stylize_s: f64,
    pub flow_s: f64,
    pub warp_s: f64,
    pub write_s: f64,
    pub total_s: f64,
}

/// Mean wall-clock seconds per frame. Not deterministic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerFrameTiming {
    /// Stylization time per key frame (`t_d`).
    pub stylize_s: f64,
    /// Flow estimation time per intermediate frame.
    pub flow_s: f64,
    /// Warping time per intermediate frame (`t_i`).
    pub warp_s: f64,
}

/// Simulated network cost of shipping key frames; arithmetic only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub resolution: String,
    pub destination: Destination,
    pub per_key_frame: LinkLatency,
    pub per_key_frame_round_trip_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub exact: f64,
    pub approx: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub scale: f64,
    pub working_height: usize,
    pub working_width: usize,
    pub key_frames: Vec<usize>,
    pub interpolated: usize,
    pub mean_flow_magnitude: f64,
    pub timing: StageTiming,
    pub per_frame: PerFrameTiming,
    /// Absent when the latency table has no row for the resolution.
    pub latency: Option<LatencyReport>,
    /// From measured `t_d` and `t_i`.
    pub speedup: SpeedupReport,
}

/// Latency of `keys` key frames at `resolution`, or `None` if the table
/// has no such entry.
pub fn latency_report(
    table: &LatencyTable,
    resolution: &str,
    destination: Destination,
    keys: usize,
) -> Option<LatencyReport> {
    let l = table.get(resolution, destination)?;
    Some(LatencyReport {
        resolution: resolution.to_string(),
        destination,
        per_key_frame: l,
        per_key_frame_round_trip_s: l.round_trip(),
        total_s: keys as f64 * l.round_trip(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Everything the stylizer needs, loaded once.
pub struct StylizerSetup {
    pub encoder: EncoderSpec,
    pub params: StylizerParams,
    pub style: Frame,
}

impl StylizerSetup {
    pub fn load(cfg: &PipelineConfig, stylizer: &StylizerConfig) -> Result<Self> {
        let encoder = EncoderSpec::new(cfg.encoder)?;
        let params = match &cfg.params {
            Some(p) => load_params(p)?,
            None => StylizerParams::init(cfg.seed, encoder.feature_channels()),
        };
        params.validate()?;
        let style = match &cfg.style {
            Some(p) => read_frame(p)?,
            None => stripe_texture(cfg.seed, stylizer.working_height, stylizer.working_width),
        };
        Ok(Self {
            encoder,
            params,
            style,
        })
    }

    /// Stylizes one frame and brings the result back to the frame's size.
    pub fn stylize_frame(&self, frame: &Frame, r: f64, cfg: &StylizerConfig) -> Result<Frame> {
        let out = stylize(frame, &self.style, r, &self.encoder, &self.params, cfg)?.image;
        if (out.height(), out.width()) == (frame.height(), frame.width()) {
            Ok(out)
        } else {
            resize(&out, frame.height(), frame.width())
        }
    }
}

/// Stylizes the keys of `input_dir`, interpolates the rest and writes the
/// frames, `manifest.json` and `report.json` to `output_dir`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let t_start = Instant::now();
    let (files, frames) = read_sequence(&cfg.input_dir)?;
    let (h, w) = (frames[0].height(), frames[0].width());
    let layout = cfg.layout(frames.len())?;
    let seq = FrameSequence::new(frames, layout.key_indices().to_vec())?;
    let frames = seq.frames();
    let stylizer_cfg = cfg.stylizer_config(h, w)?;
    let setup = StylizerSetup::load(cfg, &stylizer_cfg)?;
    let load_s = t_start.elapsed().as_secs_f64();

    let out_dir = &cfg.output_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let names: Vec<String> = files
        .iter()
        .map(|f| format!("{}.png", f.stem()))
        .collect();
    let mut manifest = Manifest {
        complete: false,
        frames: (0..frames.len())
            .map(|i| {
                let (kind, source_key) = if layout.is_key(i) {
                    (FrameKind::StylizedKey, i)
                } else {
                    let q = layout.governing_key(i).expect("frame 0 is a key");
                    (FrameKind::Interpolated, layout.key_indices()[q])
                };
                ManifestEntry {
                    index: i,
                    file: names[i].clone(),
                    kind,
                    source_key,
                }
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;

    let t = Instant::now();
    let keys: Vec<Frame> = layout
        .key_indices()
        .par_iter()
        .map(|&k| setup.stylize_frame(&frames[k], cfg.scale, &stylizer_cfg))
        .collect::<Result<_>>()?;
    let stylize_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let intermediates = layout.intermediate_indices();
    let flows: Vec<IndexedFlow> = intermediates
        .par_iter()
        .map(|&p| {
            let q = layout.key_indices()[layout.governing_key(p).expect("frame 0 is a key")];
            Ok(IndexedFlow {
                index: p,
                flow: estimate_flow(&frames[p], &frames[q], &cfg.flow)?,
            })
        })
        .collect::<Result<_>>()?;
    let flow_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let warped = interpolate_sequence(&keys, &flows, &layout)?;
    let warp_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    for (&k, frame) in layout.key_indices().iter().zip(&keys) {
        write_frame(out_dir.join(&names[k]), frame)?;
    }
    for f in &warped {
        write_frame(out_dir.join(&names[f.index]), &f.frame)?;
    }
    if cfg.save_flows {
        let dir = out_dir.join("flows");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for f in &flows {
            write_flo(dir.join(frame_name(f.index, frames.len(), "flo")), &f.flow)?;
        }
    }
    let write_s = t.elapsed().as_secs_f64();

    let n_keys = layout.key_indices().len();
    let n_inter = intermediates.len();
    let per_frame = PerFrameTiming {
        stylize_s: stylize_s / n_keys as f64,
        flow_s: if n_inter > 0 { flow_s / n_inter as f64 } else { 0.0 },
        warp_s: if n_inter > 0 { warp_s / n_inter as f64 } else { 0.0 },
    };
    let inputs = SpeedupInputs {
        total_frames: frames.len(),
        key_frames: n_keys,
        t_d: per_frame.stylize_s.max(f64::MIN_POSITIVE),
        t_i: per_frame.warp_s,
    };
    let resolution = cfg
        .latency_resolution
        .clone()
        .unwrap_or_else(|| resolution_key(w, h));
    let latency = latency_report(&cfg.latency, &resolution, cfg.destination, n_keys);
    if latency.is_none() {
        log::warn!("no latency entry for {resolution}/{}", cfg.destination);
    }
    let mean_flow_magnitude = if flows.is_empty() {
        0.0
    } else {
        flows.iter().map(|f| flow_magnitude_stats(&f.flow).mean).sum::<f64>() / flows.len() as f64
    };

    let report = PipelineReport {
        frames: frames.len(),
        width: w,
        height: h,
        scale: cfg.scale,
        working_height: stylizer_cfg.working_height,
        working_width: stylizer_cfg.working_width,
        key_frames: layout.key_indices().to_vec(),
        interpolated: warped.len(),
        mean_flow_magnitude,
        timing: StageTiming {
            load_s,
            stylize_s,
            flow_s,
            warp_s,
            write_s,
            total_s: t_start.elapsed().as_secs_f64(),
        },
        per_frame,
        latency,
        speedup: SpeedupReport {
            exact: speedup_exact(&inputs)?,
            approx: speedup_approx(&inputs)?,
        },
    };
    write_json(&out_dir.join("report.json"), &report)?;
    manifest.complete = true;
    write_json(&manifest_path, &manifest)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// `"WxH"` strings.
    pub resolutions: Vec<String>,
    pub trials: usize,
    pub scale: f64,
    pub colorize: ColorizeMode,
    pub seed: u64,
    /// Clip length and key interval used for the speedup prediction.
    pub total_frames: usize,
    pub key_interval: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            resolutions: vec!["128x128".into(), "256x256".into()],
            trials: 10,
            scale: 2.0,
            colorize: ColorizeMode::Literal,
            seed: 0,
            total_frames: 300,
            key_interval: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub resolution: String,
    pub trials: usize,
    /// Mean full stylization time per frame (`t_d`).
    pub stylize_s: f64,
    pub flow_s: f64,
    /// Mean warp time per frame (`t_i`).
    pub warp_s: f64,
    /// `t_d / t_i` from this run.
    pub ratio: f64,
    pub speedup_exact: f64,
    pub speedup_approx: f64,
}

/// Times stylization and warping on synthetic frames at each resolution.
pub fn bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.trials == 0 {
        return Err(Error::Config("bench needs at least one trial".into()));
    }
    if cfg.key_interval == 0 || cfg.total_frames == 0 {
        return Err(Error::Config("clip length and key interval must be >= 1".into()));
    }
    let pipeline = PipelineConfig {
        scale: cfg.scale,
        colorize: cfg.colorize,
        seed: cfg.seed,
        ..PipelineConfig::default()
    };
    pipeline.validate()?;
    cfg.resolutions
        .iter()
        .map(|res| {
            let (w, h) = parse_resolution(res)?;
            let stylizer_cfg = pipeline.stylizer_config(h, w)?;
            let setup = StylizerSetup::load(&pipeline, &stylizer_cfg)?;
            let pair = translating_sequence(cfg.seed, h, w, 2, 1.0, 0.0);
            let (mut td, mut tf, mut ti) = (0.0, 0.0, 0.0);
            for _ in 0..cfg.trials {
                let t = Instant::now();
                let key = setup.stylize_frame(&pair[0], cfg.scale, &stylizer_cfg)?;
                td += t.elapsed().as_secs_f64();

                let t = Instant::now();
                let flow = estimate_flow(&pair[1], &pair[0], &pipeline.flow)?;
                tf += t.elapsed().as_secs_f64();

                let t = Instant::now();
                std::hint::black_box(warp(&flow, &key)?);
                ti += t.elapsed().as_secs_f64();
            }
            let n = cfg.trials as f64;
            let (td, tf, ti) = (td / n, tf / n, ti / n);
            let inputs = SpeedupInputs {
                total_frames: cfg.total_frames,
                key_frames: cfg.total_frames.div_ceil(cfg.key_interval),
                t_d: td,
                t_i: ti,
            };
            Ok(BenchRow {
                resolution: res.clone(),
                trials: cfg.trials,
                stylize_s: td,
                flow_s: tf,
                warp_s: ti,
                ratio: td / ti,
                speedup_exact: speedup_exact(&inputs)?,
                speedup_approx: speedup_approx(&inputs)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub frame_id: String,
    pub ms_ssim: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub mean: f64,
}

/// MS-SSIM between same-numbered frames of two sequence directories.
pub fn compare_dirs(a: impl AsRef<Path>, b: impl AsRef<Path>, cfg: &MsSsimConfig) -> Result<CompareReport> {
    let fa = list_frames(a.as_ref())?;
    let fb = list_frames(b.as_ref())?;
    let ia: Vec<usize> = fa.iter().map(|f| f.index).collect();
    let ib: Vec<usize> = fb.iter().map(|f| f.index).collect();
    if ia != ib {
        return Err(Error::Input(format!(
            "frame sets differ: {} has {:?}, {} has {:?}",
            a.as_ref().display(),
            ia,
            b.as_ref().display(),
            ib
        )));
    }
    let rows = fa
        .par_iter()
        .zip(fb.par_iter())
        .map(|(x, y)| {
            Ok(CompareRow {
                frame_id: x.stem(),
                ms_ssim: ms_ssim_with(&read_frame(&x.path)?, &read_frame(&y.path)?, cfg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = rows.iter().map(|r| r.ms_ssim).sum::<f64>() / rows.len() as f64;
    Ok(CompareReport { rows, mean })
}

/// Header plus one serialized row per line.
pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a synthetic translating clip as numbered PNGs.
pub fn write_synthetic_clip(
    dir: impl AsRef<Path>,
    seed: u64,
    height: usize,
    width: usize,
    frames: usize,
    velocity: (f64, f64),
) -> Result<Vec<PathBuf>> {
    let seq = translating_sequence(seed, height, width, frames, velocity.0, velocity.1);
    crate::frames::write_sequence(dir, &seq)
}
