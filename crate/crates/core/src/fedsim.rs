//! Federated retraining across edge servers: local rounds, cloud averaging,
//! redistribution and crash recovery, driven by a deterministic
//! discrete-event loop with symbolic network latency.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{Destination, LatencyTable, LinkLatency};
use crate::stylizer::{EncoderSpec, StylizerParams};
use crate::synth::pair_dataset;
use crate::tensor::Frame;
use crate::trainer::{evaluate, train, LossBreakdown, LossRecord, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeStatus {
    Active,
    Crashed,
}

#[derive(Clone, Debug)]
pub struct EdgeNode {
    pub id: usize,
    pub params: StylizerParams,
    pub dataset: Vec<(Frame, Frame)>,
    pub images_seen: u64,
    pub status: EdgeStatus,
}

impl EdgeNode {
    pub fn new(id: usize, params: StylizerParams, dataset: Vec<(Frame, Frame)>) -> Self {
        Self {
            id,
            params,
            dataset,
            images_seen: 0,
            status: EdgeStatus::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.status == EdgeStatus::Active
    }
}

#[derive(Clone, Debug)]
pub struct CloudNode {
    pub params: StylizerParams,
    /// Number of aggregations performed so far.
    pub round: u64,
}

impl CloudNode {
    pub fn new(params: StylizerParams) -> Self {
        Self { params, round: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncPolicy {
    /// Images each edge trains on between two synchronizations.
    pub images_per_round: usize,
    pub participants: usize,
}

impl Default for SyncPolicy {
    fn default() -> Self {
        Self {
            images_per_round: 4000,
            participants: 1,
        }
    }
}

impl SyncPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.images_per_round == 0 {
            return Err(Error::Config("images_per_round must be >= 1".into()));
        }
        if self.participants == 0 {
            return Err(Error::Config("at least one participant is required".into()));
        }
        Ok(())
    }

    /// Optimizer steps needed to cover `images_per_round` at `batch`.
    pub fn steps(&self, batch: usize) -> usize {
        self.images_per_round.div_ceil(batch.max(1))
    }
}

/// One local retraining round on the edge's own data, starting from the
/// edge's current parameters with a fresh optimizer.
pub fn local_round(
    edge: &mut EdgeNode,
    policy: &SyncPolicy,
    cfg: &TrainConfig,
    enc: &EncoderSpec,
    seed: u64,
) -> Result<Vec<LossRecord>> {
    if !edge.is_active() {
        return Err(Error::Unavailable(format!("edge {} is crashed", edge.id)));
    }
    let steps = policy.steps(cfg.batch);
    let round_cfg = TrainConfig {
        steps,
        seed,
        ..cfg.clone()
    };
    let out = train(&edge.dataset, &round_cfg, edge.params.clone(), enc)?;
    edge.params = out.params;
    edge.images_seen += (steps * cfg.batch) as u64;
    Ok(out.trace)
}

/// Coordinate-wise mean, summed in slice order.
pub fn aggregate(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let (first, rest) = vectors
        .split_first()
        .ok_or_else(|| Error::Input("nothing to aggregate".into()))?;
    let mut acc = first.clone();
    for (i, v) in rest.iter().enumerate() {
        if v.len() != acc.len() {
            return Err(Error::Dimension(format!(
                "parameter vector {} has {} entries, expected {}",
                i + 1,
                v.len(),
                acc.len()
            )));
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    if vectors.len() > 1 {
        let n = vectors.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
    }
    Ok(acc)
}

/// Averages the active edges' parameters in edge-id order into the cloud
/// and advances its round counter.
pub fn aggregate_edges(cloud: &mut CloudNode, edges: &[EdgeNode]) -> Result<()> {
    let mut active: Vec<&EdgeNode> = edges.iter().filter(|e| e.is_active()).collect();
    active.sort_by_key(|e| e.id);
    let vectors: Vec<Vec<f64>> = active.iter().map(|e| e.params.flatten()).collect();
    let mean = aggregate(&vectors)?;
    cloud.params.assign_flat(&mean)?;
    cloud.round += 1;
    Ok(())
}

/// Copies the cloud parameters to every active edge; returns how many
/// edges were updated.
pub fn distribute(cloud: &CloudNode, edges: &mut [EdgeNode]) -> usize {
    let mut n = 0;
    for e in edges.iter_mut().filter(|e| e.is_active()) {
        e.params = cloud.params.clone();
        n += 1;
    }
    n
}

pub fn crash(edge: &mut EdgeNode) {
    edge.status = EdgeStatus::Crashed;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestoreOutcome {
    Restored,
    /// The edge was already running; nothing changed.
    AlreadyActive,
}

/// Reloads a crashed edge from the cloud backup.
pub fn restore(edge: &mut EdgeNode, cloud: &CloudNode) -> RestoreOutcome {
    if edge.is_active() {
        log::warn!("restore requested for edge {} which is active", edge.id);
        return RestoreOutcome::AlreadyActive;
    }
    edge.params = cloud.params.clone();
    edge.status = EdgeStatus::Active;
    RestoreOutcome::Restored
}

/// Largest coordinate difference between any two active edges.
pub fn max_divergence(edges: &[EdgeNode]) -> f64 {
    let flats: Vec<Vec<f64>> = edges
        .iter()
        .filter(|e| e.is_active())
        .map(|e| e.params.flatten())
        .collect();
    let Some(first) = flats.first() else {
        return 0.0;
    };
    flats
        .iter()
        .flat_map(|f| f.iter().zip(first).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// An edge crash at the start of `round` (1-based); the edge skips that
/// round and is restored from the cloud once the round's aggregate has
/// been distributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrashSpec {
    pub round: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub rounds: usize,
    pub seed: u64,
    pub policy: SyncPolicy,
    pub train: TrainConfig,
    /// Content/style pairs held by each edge.
    pub edge_dataset_size: usize,
    pub held_out_size: usize,
    /// Row of the latency table charged for each parameter transfer.
    pub sync_resolution: String,
    pub destination: Destination,
    pub latency: LatencyTable,
    pub crashes: Vec<CrashSpec>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            rounds: 6,
            seed: 0,
            policy: SyncPolicy::default(),
            train: TrainConfig::default(),
            edge_dataset_size: 16,
            held_out_size: 8,
            sync_resolution: "512x256".into(),
            destination: Destination::CloudLa,
            latency: LatencyTable::reference(),
            crashes: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Input("simulation needs at least one round".into()));
        }
        if self.edge_dataset_size == 0 || self.held_out_size == 0 {
            return Err(Error::Config("edge and held-out datasets must be non-empty".into()));
        }
        self.policy.validate()?;
        self.train.validate()?;
        self.latency.validate()?;
        for c in &self.crashes {
            if c.edge >= self.policy.participants || c.round == 0 || c.round > self.rounds {
                return Err(Error::Config(format!("crash {c:?} is out of range")));
            }
        }
        Ok(())
    }

    fn link(&self) -> LinkLatency {
        self.latency
            .get(&self.sync_resolution, self.destination)
            .unwrap_or_else(|| {
                log::warn!(
                    "no latency entry for {}/{}; syncs are charged 0 s",
                    self.sync_resolution,
                    self.destination
                );
                LinkLatency::default()
            })
    }
}

/// splitmix64 over `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const TAG_EDGE_DATA: u64 = 1;
const TAG_HELD_OUT: u64 = 2;
const TAG_INIT: u64 = 3;
const TAG_ROUND: u64 = 4;

/// Data of edge `id`; independent of how many edges take part.
pub fn edge_dataset(cfg: &SimConfig, id: usize) -> Vec<(Frame, Frame)> {
    let s = &cfg.train.stylizer;
    pair_dataset(
        derive_seed(cfg.seed, TAG_EDGE_DATA, id as u64),
        cfg.edge_dataset_size,
        s.working_height,
        s.working_width,
    )
}

pub fn held_out_dataset(cfg: &SimConfig) -> Vec<(Frame, Frame)> {
    let s = &cfg.train.stylizer;
    pair_dataset(
        derive_seed(cfg.seed, TAG_HELD_OUT, 0),
        cfg.held_out_size,
        s.working_height,
        s.working_width,
    )
}

pub fn initial_params(cfg: &SimConfig, enc: &EncoderSpec) -> StylizerParams {
    StylizerParams::init(derive_seed(cfg.seed, TAG_INIT, 0), enc.feature_channels())
}

/// Training seed of edge `id` in `round`.
pub fn round_seed(master: u64, round: usize, id: usize) -> u64 {
    derive_seed(master, TAG_ROUND, ((round as u64) << 32) | id as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Crash,
    LocalRound,
    Upload,
    Aggregate,
    Download,
    Restore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub round: usize,
    /// `None` for cloud-side events.
    pub edge: Option<usize>,
    pub event: EventKind,
    pub latency_s: f64,
    /// Simulated clock when the event completes.
    pub time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub participants: usize,
    pub images_per_edge: u64,
    pub total: f64,
    pub content: f64,
    pub style: f64,
    pub sim_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    /// Held-out loss before any training (round 0) and after every round.
    pub curve: Vec<RoundRecord>,
    pub events: Vec<SimEvent>,
    pub cloud: CloudNode,
    pub edges: Vec<EdgeNode>,
}

/// Pending transfer, ordered by completion time then edge id.
#[derive(Debug, PartialEq)]
struct Pending {
    time: f64,
    edge: usize,
    kind: EventKind,
    latency: f64,
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.edge.cmp(&other.edge))
    }
}

struct EventLoop {
    clock: f64,
    queue: BinaryHeap<Reverse<Pending>>,
    log: Vec<SimEvent>,
}

impl EventLoop {
    fn record(&mut self, round: usize, edge: Option<usize>, event: EventKind, latency_s: f64) {
        self.log.push(SimEvent {
            round,
            edge,
            event,
            latency_s,
            time_s: self.clock,
        });
    }

    fn schedule(&mut self, edge: usize, kind: EventKind, latency: f64) {
        self.queue.push(Reverse(Pending {
            time: self.clock + latency,
            edge,
            kind,
            latency,
        }));
    }

    /// Delivers everything queued, in time order; the clock ends at the
    /// last delivery.
    fn drain(&mut self, round: usize) {
        let start = self.clock;
        let mut end = start;
        while let Some(Reverse(p)) = self.queue.pop() {
            end = end.max(p.time);
            self.log.push(SimEvent {
                round,
                edge: Some(p.edge),
                event: p.kind,
                latency_s: p.latency,
                time_s: p.time,
            });
        }
        self.clock = end;
    }
}

fn held_out_record(
    round: usize,
    participants: usize,
    images: u64,
    loss: LossBreakdown,
    time: f64,
) -> RoundRecord {
    RoundRecord {
        round,
        participants,
        images_per_edge: images,
        total: loss.total,
        content: loss.content,
        style: loss.style,
        sim_time_s: time,
    }
}

/// Runs `cfg.rounds` rounds of local training → upload → aggregate →
/// download with `cfg.policy.participants` edges.
pub fn run_simulation(cfg: &SimConfig, enc: &EncoderSpec) -> Result<SimOutcome> {
    cfg.validate()?;
    let n = cfg.policy.participants;
    let link = cfg.link();
    let held_out = held_out_dataset(cfg);
    let init = initial_params(cfg, enc);
    let mut cloud = CloudNode::new(init.clone());
    let mut edges: Vec<EdgeNode> = (0..n)
        .map(|id| EdgeNode::new(id, init.clone(), edge_dataset(cfg, id)))
        .collect();
    let mut ev = EventLoop {
        clock: 0.0,
        queue: BinaryHeap::new(),
        log: Vec::new(),
    };

    let mut curve = vec![held_out_record(
        0,
        n,
        0,
        evaluate(&held_out, &cloud.params, enc, &cfg.train)?,
        0.0,
    )];

    for round in 1..=cfg.rounds {
        let crashed_now: Vec<usize> = cfg
            .crashes
            .iter()
            .filter(|c| c.round == round)
            .map(|c| c.edge)
            .collect();
        for &id in &crashed_now {
            crash(&mut edges[id]);
            ev.record(round, Some(id), EventKind::Crash, 0.0);
        }

        edges
            .par_iter_mut()
            .filter(|e| e.is_active())
            .map(|e| {
                let seed = round_seed(cfg.seed, round, e.id);
                local_round(e, &cfg.policy, &cfg.train, enc, seed).map(|_| ())
            })
            .collect::<Result<Vec<()>>>()?;

        let active: Vec<usize> = edges.iter().filter(|e| e.is_active()).map(|e| e.id).collect();
        for &id in &active {
            ev.record(round, Some(id), EventKind::LocalRound, 0.0);
        }
        if !active.is_empty() {
            for &id in &active {
                ev.schedule(id, EventKind::Upload, link.uplink);
            }
            ev.drain(round);
            aggregate_edges(&mut cloud, &edges)?;
            ev.record(round, None, EventKind::Aggregate, 0.0);
            distribute(&cloud, &mut edges);
            for &id in &active {
                ev.schedule(id, EventKind::Download, link.downlink);
            }
        }
        for &id in &crashed_now {
            if restore(&mut edges[id], &cloud) == RestoreOutcome::Restored {
                ev.schedule(id, EventKind::Restore, link.downlink);
            }
        }
        ev.drain(round);

        let images = edges.iter().map(|e| e.images_seen).max().unwrap_or(0);
        let loss = evaluate(&held_out, &cloud.params, enc, &cfg.train)?;
        log::info!("N={n} round {round}: held-out loss {:.6}", loss.total);
        curve.push(held_out_record(round, n, images, loss, ev.clock));
    }

    Ok(SimOutcome {
        curve,
        events: ev.log,
        cloud,
        edges,
    })
}

/// `round,participants,images_per_edge,total,content,style,sim_time_s` CSV.
pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for r in curve {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

/// One JSON object per line.
pub fn write_event_log(path: impl AsRef<Path>, events: &[SimEvent]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_of_hand_vectors() {
        let m = aggregate(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m, vec![2.0, 3.0]);
    }

    #[test]
    fn single_vector_is_bit_exact() {
        let v = vec![-0.0, 1e-300, 0.1 + 0.2, f64::MIN_POSITIVE];
        let m = aggregate(std::slice::from_ref(&v)).unwrap();
        assert!(m.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn aggregate_errors() {
        assert!(matches!(aggregate(&[]), Err(Error::Input(_))));
        assert!(matches!(
            aggregate(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn policy_steps() {
        let p = SyncPolicy {
            images_per_round: 5,
            participants: 1,
        };
        assert_eq!(p.steps(2), 3);
        assert_eq!(SyncPolicy::default().steps(2), 2000);
        assert!(SyncPolicy {
            images_per_round: 0,
            participants: 1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(round_seed(0, 1, 0), round_seed(0, 1, 1));
        assert_ne!(round_seed(0, 1, 0), round_seed(0, 2, 0));
        assert_eq!(derive_seed(5, 1, 2), derive_seed(5, 1, 2));
    }

    #[test]
    fn zero_rounds_rejected() {
        let cfg = SimConfig {
            rounds: 0,
            ..SimConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Input(_))));
    }
}
