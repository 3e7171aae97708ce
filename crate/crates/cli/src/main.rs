//! `flowstyle`: key-frame video stylization from the command line.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use flowstyle_core::checkpoint::{load_params, save_checkpoint};
use flowstyle_core::fedsim::{run_simulation, write_curve_csv, write_event_log, SimConfig};
use flowstyle_core::flow::{estimate_flow, flow_magnitude_stats, read_flo, write_flo};
use flowstyle_core::frames::{read_frame, read_sequence, write_frame};
use flowstyle_core::interp::warp;
use flowstyle_core::metrics::{per_frame_speedup, speedup_curve, ChannelReduction, MsSsimConfig};
use flowstyle_core::pipeline::{
    bench, compare_dirs, run_pipeline, write_csv, write_synthetic_clip, BenchConfig,
    PipelineConfig, StylizerSetup,
};
use flowstyle_core::stylizer::{EncoderSpec, StylizerParams};
use flowstyle_core::synth::pair_dataset;
use flowstyle_core::trainer::{evaluate, train, write_loss_csv, TrainConfig};

#[derive(Parser)]
#[command(name = "flowstyle", version, about = "Key-frame video style transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stylize a single image.
    Stylize(StylizeArgs),
    /// Estimate the flow from a key frame to an intermediate frame.
    Flow(FlowArgs),
    /// Warp a stylized key frame along a `.flo` field.
    Interp(InterpArgs),
    /// Stylize keys and interpolate the rest of a frame directory.
    Run(RunArgs),
    /// Train stylizer parameters.
    Train(TrainArgs),
    /// Simulate federated retraining across edge servers.
    Fedsim(FedsimArgs),
    /// Time stylization against warping on synthetic frames.
    Bench(BenchArgs),
    /// MS-SSIM between same-numbered frames of two directories.
    Compare(CompareArgs),
    /// Speedup of interpolation over stylization.
    Speedup(SpeedupArgs),
    /// Write a synthetic translating clip.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

#[derive(Args)]
struct StylizeArgs {
    #[command(flatten)]
    common: Common,
    /// Content image (PNG or PPM).
    content: PathBuf,
    /// Style image; a synthetic texture when omitted.
    #[arg(long)]
    style: Option<PathBuf>,
    /// Trained parameter file.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    /// Output image path.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_stylize(a: StylizeArgs) -> Result<()> {
    let mut cfg: PipelineConfig = load_config(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.scale {
        cfg.scale = r;
    }
    cfg.style = a.style.or(cfg.style);
    cfg.params = a.params.or(cfg.params);
    cfg.validate()?;
    let content = read_frame(&a.content)?;
    let stylizer_cfg = cfg.stylizer_config(content.height(), content.width())?;
    let setup = StylizerSetup::load(&cfg, &stylizer_cfg)?;
    let out = setup.stylize_frame(&content, cfg.scale, &stylizer_cfg)?;
    write_frame(&a.out, &out)?;
    println!("wrote {} ({}x{})", a.out.display(), out.width(), out.height());
    Ok(())
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    common: Common,
    /// Intermediate frame.
    intermediate: PathBuf,
    /// Key frame the intermediate is warped from.
    key: PathBuf,
    /// Output `.flo` file.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_flow(a: FlowArgs) -> Result<()> {
    let cfg: PipelineConfig = load_config(a.common.config.as_deref())?;
    let flow = estimate_flow(&read_frame(&a.intermediate)?, &read_frame(&a.key)?, &cfg.flow)?;
    write_flo(&a.out, &flow)?;
    let s = flow_magnitude_stats(&flow);
    println!("mean |flow| {:.4} px, max {:.4} px", s.mean, s.max);
    Ok(())
}

#[derive(Args)]
struct InterpArgs {
    /// Stylized key frame.
    key: PathBuf,
    /// Flow from the key to the intermediate frame.
    flow: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_interp(a: InterpArgs) -> Result<()> {
    let out = warp(&read_flo(&a.flow)?, &read_frame(&a.key)?)?;
    write_frame(&a.out, &out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Directory of zero-padded numbered frames.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    key_interval: Option<usize>,
    /// File listing key frame indices; overrides the interval.
    #[arg(long)]
    keys: Option<PathBuf>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    style: Option<PathBuf>,
    /// Also write the estimated flows as `.flo` files.
    #[arg(long)]
    save_flows: bool,
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let mut cfg: PipelineConfig = load_config(a.common.config.as_deref())?;
    if let Some(v) = a.input {
        cfg.input_dir = v;
    }
    if let Some(v) = a.out {
        cfg.output_dir = v;
    }
    if let Some(v) = a.key_interval {
        cfg.key_interval = v;
    }
    if let Some(v) = a.keys {
        cfg.key_file = Some(v);
    }
    if let Some(v) = a.scale {
        cfg.scale = v;
    }
    if let Some(v) = a.common.seed {
        cfg.seed = v;
    }
    cfg.params = a.params.or(cfg.params);
    cfg.style = a.style.or(cfg.style);
    cfg.save_flows |= a.save_flows;
    if cfg.input_dir.as_os_str().is_empty() || cfg.output_dir.as_os_str().is_empty() {
        bail!("both --input and --out (or input_dir/output_dir in the config) are required");
    }
    let report = run_pipeline(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Frame directory used as content images; synthetic pairs when omitted.
    #[arg(long)]
    content: Option<PathBuf>,
    /// Style image paired with every content frame.
    #[arg(long, requires = "content")]
    style: Option<PathBuf>,
    /// Number of synthetic pairs.
    #[arg(long, default_value_t = 8)]
    pairs: usize,
    #[arg(long)]
    steps: Option<usize>,
    /// Parameters to start from.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Output directory for `checkpoint.bin` and `loss.csv`.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = load_config(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    let (h, w) = (cfg.stylizer.working_height, cfg.stylizer.working_width);
    let dataset = match a.content {
        Some(dir) => {
            let style_path = a.style.context("--style is required with --content")?;
            let style = read_frame(&style_path)?;
            let (_, frames) = read_sequence(&dir)?;
            frames.into_iter().map(|f| (f, style.clone())).collect()
        }
        None => pair_dataset(cfg.seed, a.pairs, h, w),
    };
    let enc = EncoderSpec::from_seed(0);
    let params = match &a.params {
        Some(p) => load_params(p)?,
        None => StylizerParams::init(cfg.seed, enc.feature_channels()),
    };
    let before = evaluate(&dataset, &params, &enc, &cfg)?;
    let out = train(&dataset, &cfg, params, &enc)?;
    let after = evaluate(&dataset, &out.params, &enc, &cfg)?;
    std::fs::create_dir_all(&a.out)?;
    save_checkpoint(a.out.join("checkpoint.bin"), &out.params, &out.adam)?;
    write_loss_csv(a.out.join("loss.csv"), &out.trace)?;
    println!(
        "loss {:.6} -> {:.6} after {} steps; wrote {}",
        before.total,
        after.total,
        cfg.steps,
        a.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct FedsimArgs {
    #[command(flatten)]
    common: Common,
    /// Edge counts to simulate, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4])]
    participants: Vec<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    images_per_round: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_fedsim(a: FedsimArgs) -> Result<()> {
    let mut cfg: SimConfig = load_config(a.common.config.as_deref())?;
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    if let Some(r) = a.rounds {
        cfg.rounds = r;
    }
    if let Some(n) = a.images_per_round {
        cfg.policy.images_per_round = n;
    }
    std::fs::create_dir_all(&a.out)?;
    let enc = EncoderSpec::from_seed(0);
    for &n in &a.participants {
        cfg.policy.participants = n;
        let out = run_simulation(&cfg, &enc)?;
        write_curve_csv(a.out.join(format!("curve_n{n}.csv")), &out.curve)?;
        write_event_log(a.out.join(format!("events_n{n}.jsonl")), &out.events)?;
        let last = out.curve.last().expect("at least one round");
        println!("N={n}: held-out loss {:.6} after {} rounds", last.total, cfg.rounds);
    }
    Ok(())
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Resolutions as WxH, comma separated.
    #[arg(long, value_delimiter = ',')]
    resolutions: Option<Vec<String>>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    scale: Option<f64>,
    /// Output CSV file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut cfg: BenchConfig = load_config(a.common.config.as_deref())?;
    if let Some(r) = a.resolutions {
        cfg.resolutions = r;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(r) = a.scale {
        cfg.scale = r;
    }
    if let Some(s) = a.common.seed {
        cfg.seed = s;
    }
    let rows = bench(&cfg)?;
    println!("resolution,stylize_s,flow_s,warp_s,ratio,speedup_exact,speedup_approx");
    for r in &rows {
        println!(
            "{},{:.6},{:.6},{:.6},{:.1},{:.3},{:.3}",
            r.resolution, r.stylize_s, r.flow_s, r.warp_s, r.ratio, r.speedup_exact, r.speedup_approx
        );
    }
    if let Some(out) = a.out {
        write_csv(out, &rows)?;
    }
    Ok(())
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Average RGB channels instead of using luminance.
    #[arg(long)]
    rgb_mean: bool,
    /// Output CSV file (frame_id,ms_ssim).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let cfg = MsSsimConfig {
        reduction: if a.rgb_mean {
            ChannelReduction::RgbMean
        } else {
            ChannelReduction::Luminance
        },
        ..MsSsimConfig::default()
    };
    let report = compare_dirs(&a.a, &a.b, &cfg)?;
    if let Some(out) = a.out {
        write_csv(out, &report.rows)?;
    }
    println!("frames {} mean ms-ssim {:.6}", report.rows.len(), report.mean);
    Ok(())
}

#[derive(Args)]
struct SpeedupArgs {
    /// Stylization seconds per frame; comma separated for several rows.
    #[arg(long, value_delimiter = ',', required = true)]
    td: Vec<f64>,
    /// Interpolation seconds per frame, one per `--td`.
    #[arg(long, value_delimiter = ',', required = true)]
    ti: Vec<f64>,
    /// Clip length for the interval curve.
    #[arg(long, default_value_t = 300)]
    frames: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 5, 10, 30, 60])]
    intervals: Vec<usize>,
    /// Directory for `per_frame.csv` and `curve.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(serde::Serialize)]
struct PerFrameRow {
    t_d: f64,
    t_i: f64,
    per_frame_speedup: f64,
}

#[derive(serde::Serialize)]
struct CurveRow {
    t_d: f64,
    t_i: f64,
    interval: usize,
    key_frames: usize,
    exact: f64,
    approx: f64,
}

fn cmd_speedup(a: SpeedupArgs) -> Result<()> {
    if a.td.len() != a.ti.len() {
        bail!("--td has {} values but --ti has {}", a.td.len(), a.ti.len());
    }
    let mut per_frame = Vec::new();
    let mut curve = Vec::new();
    for (&td, &ti) in a.td.iter().zip(&a.ti) {
        per_frame.push(PerFrameRow {
            t_d: td,
            t_i: ti,
            per_frame_speedup: per_frame_speedup(td, ti)?,
        });
        for row in speedup_curve(a.frames, &a.intervals, td, ti)? {
            curve.push(CurveRow {
                t_d: td,
                t_i: ti,
                interval: row.interval,
                key_frames: row.key_frames,
                exact: row.exact,
                approx: row.approx,
            });
        }
    }
    println!("t_d,t_i,per_frame_speedup");
    for r in &per_frame {
        println!("{},{},{}", r.t_d, r.t_i, r.per_frame_speedup);
    }
    if let Some(dir) = a.out {
        std::fs::create_dir_all(&dir)?;
        write_csv(dir.join("per_frame.csv"), &per_frame)?;
        write_csv(dir.join("curve.csv"), &curve)?;
    }
    Ok(())
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Horizontal motion in pixels per frame.
    #[arg(long, default_value_t = 0.2)]
    vx: f64,
    /// Vertical motion in pixels per frame.
    #[arg(long, default_value_t = 0.1)]
    vy: f64,
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.frames == 0 || a.width == 0 || a.height == 0 {
        bail!("frames, width and height must be >= 1");
    }
    let paths = write_synthetic_clip(&a.out, a.seed, a.height, a.width, a.frames, (a.vx, a.vy))?;
    println!("wrote {} frames to {}", paths.len(), a.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Stylize(a) => cmd_stylize(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Interp(a) => cmd_interp(a),
        Command::Run(a) => cmd_run(a),
        Command::Train(a) => cmd_train(a),
        Command::Fedsim(a) => cmd_fedsim(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Speedup(a) => cmd_speedup(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
