//! Discrete-event, cycle-granular oracle for a (graph, point) pair: FIFO
//! channels with optional finite depth, double/triple-buffered tiles,
//! pipelined reduction blocks and concurrent fused tasks.
//!
//! Tasks execute the same static port-window schedule the analytical model
//! uses; what the simulator adds is real inter-task timing: an input window
//! reading from a FIFO completes no earlier than the producer committed the
//! beats it covers, a commit into a full finite FIFO waits for space, and a
//! task under sequential mode waits for its producers outright. Timelines
//! are resolved by monotone fixpoint over the task walks, which is exact for
//! acyclic dataflow and flags backpressure deadlock through the watchdog.
//! Only timing moves through the system; values are codegen's concern.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costmodel::{task_shape, CostModelConfig, TaskShape};
use crate::designspace::DesignPoint;
use crate::error::SimError;
use crate::ir::*;
use crate::taskgraph::{ChannelKind, EndPoint, FusedTaskGraph, TaskId};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// FIFO capacity in beats; `None` = unbounded.
    pub fifo_depth: Option<u64>,
    pub trace: bool,
    /// Watchdog bound on any event time.
    pub max_cycles: u64,
    /// Extra latency before the first beat of every off-chip load stream.
    pub offchip_latency: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { fifo_depth: None, trace: false, max_cycles: 1 << 40, offchip_latency: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTask {
    pub task: TaskId,
    pub start: u64,
    pub finish: u64,
    pub stall_cycles: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimChannel {
    /// Index into `graph.edges`.
    pub edge: usize,
    pub first_write_cycle: u64,
    pub total_beats: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub entity: String,
    pub action: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimReport {
    pub total_cycles: u64,
    pub per_task: Vec<SimTask>,
    pub channels: Vec<SimChannel>,
    pub trace: Option<Vec<TraceEvent>>,
}

/// Cumulative beat availability of one channel: step function over commits.
#[derive(Debug, Clone, Default, PartialEq)]
struct ChannelState {
    /// (time, cumulative beats committed by then), ascending.
    commits: Vec<(u64, u64)>,
    /// (time, cumulative beats consumed by then), ascending.
    reads: Vec<(u64, u64)>,
}

impl ChannelState {
    #[allow(dead_code)]
    fn total_committed(&self) -> u64 {
        self.commits.last().map(|(_, c)| *c).unwrap_or(0)
    }

    /// Earliest time the cumulative commit count reaches `cum`.
    fn ready_at(&self, cum: u64) -> Option<u64> {
        if cum == 0 {
            return Some(0);
        }
        for (t, c) in &self.commits {
            if *c >= cum {
                return Some(*t);
            }
        }
        None
    }

    /// Earliest time at least `cum` beats have been consumed.
    fn drained_at(&self, cum: u64) -> Option<u64> {
        if cum == 0 {
            return Some(0);
        }
        for (t, c) in &self.reads {
            if *c >= cum {
                return Some(*t);
            }
        }
        None
    }
}

/// One task's resolved timeline.
#[derive(Debug, Clone, Default, PartialEq)]
struct Timeline {
    start: u64,
    finish: u64,
    stall: u64,
    /// Absolute commit times of output tiles.
    commits: Vec<u64>,
    /// Per input array: (window completion time, beats) in order.
    reads: BTreeMap<ArrayId, Vec<(u64, u64)>>,
}

struct SimWalk<'a> {
    shape: &'a TaskShape,
    /// Per input array: channel availability (None = off-chip, always ready).
    avail: BTreeMap<ArrayId, ChannelState>,
    /// Per input array: beats already consumed in this walk.
    consumed: BTreeMap<ArrayId, u64>,
    /// Space constraint for the output channel.
    out_depth: Option<u64>,
    out_channel_reads: Option<ChannelState>,
    out_tile_beats: u64,
    offchip_first_extra: BTreeMap<ArrayId, u64>,
    timeline: Timeline,
    watchdog: u64,
    blown: bool,
}

impl<'a> SimWalk<'a> {
    /// Completion time of an input pull of `beats` from `array` starting at
    /// `start` with nominal duration folded in by the caller.
    fn data_ready(&mut self, array: ArrayId, beats: u64, nominal_end: u64) -> u64 {
        let cum = {
            let c = self.consumed.entry(array).or_insert(0);
            *c += beats;
            *c
        };
        let extra = self.offchip_first_extra.remove(&array).unwrap_or(0);
        let ready = match self.avail.get(&array) {
            None => nominal_end, // off-chip: always streaming
            Some(ch) => match ch.ready_at(cum) {
                Some(t) => t.max(nominal_end),
                None => {
                    // Producer never commits this much: deadlock.
                    self.blown = true;
                    self.watchdog + 1
                }
            },
        };
        ready + extra
    }

    fn record_read(&mut self, array: ArrayId, at: u64, beats: u64) {
        self.timeline.reads.entry(array).or_default().push((at, beats));
    }

    /// Commit one output tile finishing compute at `end`; returns the time
    /// the pipeline may proceed (space blocking pushes back).
    fn commit_tile(&mut self, end: u64) -> u64 {
        let nominal = end + self.out_tile_beats;
        let k = self.timeline.commits.len() as u64 + 1;
        let commit_at = match (self.out_depth, &self.out_channel_reads) {
            (Some(depth), Some(reads)) => {
                // The k-th tile needs the channel drained down to make room:
                // cumulative committed after this tile is k*tile; space
                // exists when consumed >= k*tile - depth.
                let need_drained = (k * self.out_tile_beats).saturating_sub(depth);
                match reads.drained_at(need_drained) {
                    Some(t) => nominal.max(t),
                    None => {
                        self.blown = true;
                        self.watchdog + 1
                    }
                }
            }
            _ => nominal,
        };
        self.timeline.commits.push(commit_at);
        commit_at
    }

    fn window(&self, n: usize, fresh: &[bool], self_first: bool) -> (u64, u64, u64) {
        let mut inb = 0;
        let mut outb = 0;
        for tr in &self.shape.traffic[n - 1] {
            let open = tr.gates.iter().all(|g| if *g == n { self_first } else { fresh[*g - 1] });
            if open {
                if tr.is_input {
                    inb += tr.beats;
                } else {
                    outb += tr.beats;
                }
            }
        }
        (inb + outb, inb, outb)
    }

    /// Pull every open input of level `n` starting at `win_start`; returns
    /// the window completion honoring channel readiness.
    fn pull_inputs(&mut self, n: usize, fresh: &[bool], self_first: bool, win_start: u64, w: u64) -> u64 {
        let nominal_end = win_start + w;
        let mut end = nominal_end;
        let traffic: Vec<(ArrayId, u64, bool)> = self.shape.traffic[n - 1]
            .iter()
            .filter(|tr| {
                tr.gates.iter().all(|g| if *g == n { self_first } else { fresh[*g - 1] })
            })
            .map(|tr| (tr.array, tr.beats, tr.is_input))
            .collect();
        for (array, beats, is_input) in traffic {
            if is_input && beats > 0 {
                let t = self.data_ready(array, beats, nominal_end);
                self.record_read(array, t, beats);
                end = end.max(t);
            }
        }
        end
    }

    fn run(&mut self, n: usize, start: u64, fresh: &mut Vec<bool>) -> u64 {
        if self.blown || start > self.watchdog {
            self.blown = true;
            return self.watchdog + 1;
        }
        let m = self.shape.trips.len();
        if n > m {
            let end = start + self.shape.compute;
            let commit_at = self.commit_tile(end);
            // A full output FIFO pushes the pipeline back; otherwise the
            // store rides the reserved windows and the block ends on time.
            return end.max(commit_at.saturating_sub(self.shape.out_tile_beats));
        }
        let trips = self.shape.trips[n - 1];

        if !self.shape.overlap {
            let mut t = start;
            for r in 0..trips {
                let first = r == 0;
                let (_, inb, outb) = self.window(n, fresh, first);
                let win_end = self.pull_inputs(n, fresh, first, t, inb);
                self.timeline.stall += win_end.saturating_sub(t + inb);
                fresh.push(first);
                let inner = self.run(n + 1, win_end, fresh);
                fresh.pop();
                t = inner + outb;
            }
            return t;
        }

        let mut alpha_in = false;
        let mut alpha_out = false;
        let mut compute_start = start;
        let mut prev_end = start;
        let mut last_w = 0;
        for r in 0..trips {
            let first = r == 0;
            let (w, inb, outb) = self.window(n, fresh, first);
            alpha_in |= inb > 0;
            alpha_out |= outb > 0;
            let w_start = compute_start;
            let w_end = if inb > 0 { self.pull_inputs(n, fresh, first, w_start, w) } else { w_start + w };
            self.timeline.stall += w_end.saturating_sub(w_start + w);
            compute_start = if first { w_end } else { w_end.max(prev_end) };
            fresh.push(first);
            prev_end = self.run(n + 1, compute_start, fresh);
            fresh.pop();
            last_w = w;
        }
        let alpha: u64 = match (alpha_in, alpha_out) {
            (true, true) => 2,
            (false, false) => 0,
            _ => 1,
        };
        prev_end + alpha * last_w
    }
}

/// Walk one task against the current channel states.
#[allow(clippy::too_many_arguments)]
fn walk_task(
    shape: &TaskShape,
    start: u64,
    avail: BTreeMap<ArrayId, ChannelState>,
    out_depth: Option<u64>,
    out_channel_reads: Option<ChannelState>,
    offchip_first_extra: BTreeMap<ArrayId, u64>,
    watchdog: u64,
) -> (Timeline, bool) {
    let mut walk = SimWalk {
        shape,
        avail,
        consumed: BTreeMap::new(),
        out_depth,
        out_channel_reads,
        out_tile_beats: shape.out_tile_beats,
        offchip_first_extra,
        timeline: Timeline { start, ..Timeline::default() },
        watchdog,
        blown: false,
    };

    // Level-0 loads, serialized at the task start.
    let mut t = start;
    for tr in &shape.level0_in {
        if tr.beats == 0 {
            continue;
        }
        let nominal = t + tr.beats;
        let end = if tr.is_input {
            let e = walk.data_ready(tr.array, tr.beats, nominal);
            walk.record_read(tr.array, e, tr.beats);
            e
        } else {
            nominal
        };
        walk.timeline.stall += end.saturating_sub(nominal);
        t = end;
    }
    let mut fresh = Vec::new();
    let body_end = walk.run(1, t, &mut fresh);
    let finish = body_end + shape.level0_out_beats;
    walk.timeline.finish = finish;
    let blown = walk.blown || finish > watchdog;
    (walk.timeline, blown)
}

/// Simulate a design: resolve every task timeline by monotone fixpoint over
/// the dataflow graph.
pub fn simulate(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
    cfg: &CostModelConfig,
    sim: &SimConfig,
) -> Result<SimReport, SimError> {
    if point.orders.len() != graph.n_fused {
        return Err(SimError::InvalidPoint("point/task count mismatch".into()));
    }
    let shapes: Vec<TaskShape> = graph
        .task_ids()
        .map(|t| task_shape(kernel, graph, t, point, cfg))
        .collect();

    // FIFO edges feeding each task, and fed by each task.
    let fifo_edges: Vec<(usize, TaskId, TaskId, ArrayId)> = graph
        .edges
        .iter()
        .enumerate()
        .filter_map(|(i, e)| match (e.kind, e.src, e.dst) {
            (ChannelKind::FifoIntertask, EndPoint::Task(s), EndPoint::Task(d)) => {
                Some((i, s, d, e.array))
            }
            _ => None,
        })
        .collect();

    let mut timelines: Vec<Timeline> = vec![Timeline::default(); graph.n_fused];
    let mut converged = false;
    let passes = 4 * graph.n_fused + 8;
    for _pass in 0..passes {
        let mut changed = false;
        for t in graph.topo_order() {
            // Start: sequential mode waits for producers; dataflow starts at 0.
            let start = if point.overlap {
                0
            } else {
                fifo_edges
                    .iter()
                    .filter(|(_, _, d, _)| *d == t)
                    .map(|(_, s, _, _)| timelines[s.0].finish)
                    .max()
                    .unwrap_or(0)
            };
            // Availability per input array of this task.
            let mut avail = BTreeMap::new();
            for (_, s, d, a) in &fifo_edges {
                if *d == t {
                    let prod = &timelines[s.0];
                    let tile = shapes[s.0].out_tile_beats;
                    let commits: Vec<(u64, u64)> = prod
                        .commits
                        .iter()
                        .enumerate()
                        .map(|(k, time)| (*time, (k as u64 + 1) * tile))
                        .collect();
                    avail.insert(*a, ChannelState { commits, reads: Vec::new() });
                }
            }
            // Backpressure on this task's output channel: union of consumer
            // reads (the tightest consumer constrains; with multiple
            // consumers each gets its own FIFO, so take the slowest).
            let out_consumers: Vec<&Timeline> = fifo_edges
                .iter()
                .filter(|(_, s, _, _)| *s == t)
                .map(|(_, _, d, _)| &timelines[d.0])
                .collect();
            let out_reads = if sim.fifo_depth.is_some() && !out_consumers.is_empty() {
                // Slowest consumer: for each cumulative level take the max time.
                let array = graph.task(t).output_array;
                let mut merged: Vec<(u64, u64)> = Vec::new();
                for c in &out_consumers {
                    let mut cum = 0;
                    let mut pts = Vec::new();
                    for (time, beats) in c.reads.get(&array).cloned().unwrap_or_default() {
                        cum += beats;
                        pts.push((time, cum));
                    }
                    if merged.is_empty() {
                        merged = pts;
                    } else {
                        for (i, p) in pts.into_iter().enumerate() {
                            if i < merged.len() {
                                merged[i].0 = merged[i].0.max(p.0);
                                merged[i].1 = merged[i].1.min(p.1);
                            }
                        }
                    }
                }
                Some(ChannelState { commits: Vec::new(), reads: merged })
            } else {
                None
            };

            let mut offchip_extra = BTreeMap::new();
            if sim.offchip_latency > 0 {
                for e in graph.inputs(t) {
                    if e.kind == ChannelKind::OffchipLoad {
                        offchip_extra.insert(e.array, sim.offchip_latency);
                    }
                }
            }

            let (tl, blown) = walk_task(
                &shapes[t.0],
                start,
                avail,
                sim.fifo_depth,
                out_reads,
                offchip_extra,
                sim.max_cycles,
            );
            if blown {
                return Err(SimError::Watchdog(sim.max_cycles));
            }
            if tl != timelines[t.0] {
                timelines[t.0] = tl;
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(SimError::Watchdog(sim.max_cycles));
    }

    // Total: all tasks idle.
    let total = timelines.iter().map(|t| t.finish).max().unwrap_or(0);

    let mut channels = Vec::new();
    let mut trace: Vec<TraceEvent> = Vec::new();
    for (i, e) in graph.edges.iter().enumerate() {
        match (e.kind, e.src) {
            (ChannelKind::FifoIntertask, EndPoint::Task(s)) | (ChannelKind::OffchipStore, EndPoint::Task(s)) => {
                let tl = &timelines[s.0];
                let tile = shapes[s.0].out_tile_beats;
                let first = tl.commits.first().copied().unwrap_or(tl.finish);
                channels.push(SimChannel {
                    edge: i,
                    first_write_cycle: first,
                    total_beats: tile * tl.commits.len() as u64,
                });
                if sim.trace {
                    for (k, c) in tl.commits.iter().enumerate() {
                        trace.push(TraceEvent {
                            cycle: *c,
                            entity: format!("{}:{}", s, kernel.array(e.array).name),
                            action: format!("commit_tile {k}"),
                        });
                    }
                }
            }
            _ => {}
        }
    }
    if sim.trace {
        for t in graph.task_ids() {
            trace.push(TraceEvent {
                cycle: timelines[t.0].start,
                entity: format!("{t}"),
                action: "start".into(),
            });
            trace.push(TraceEvent {
                cycle: timelines[t.0].finish,
                entity: format!("{t}"),
                action: "finish".into(),
            });
        }
        trace.sort_by(|a, b| (a.cycle, a.entity.clone()).cmp(&(b.cycle, b.entity.clone())));
    }

    Ok(SimReport {
        total_cycles: total,
        per_task: graph
            .task_ids()
            .map(|t| SimTask {
                task: t,
                start: timelines[t.0].start,
                finish: timelines[t.0].finish,
                stall_cycles: timelines[t.0].stall,
            })
            .collect(),
        channels,
        trace: if sim.trace { Some(trace) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costmodel::dag_latency;
    use crate::designspace::{build_space, enumerate_space, trivial_point, SpaceLimits};
    use crate::frontend::affine_c;
    use crate::taskgraph::analyze;

    fn budget() -> crate::designspace::ResourceBudget {
        crate::designspace::ResourceBudget {
            name: "test".into(),
            n_slr: 1,
            mem_bits_per_slr: 1 << 40,
            dsp_per_slr: 1e12,
            max_part: 1 << 20,
            burst_sizes: vec![1, 2, 4, 8, 16],
            max_bitwidth_bits: 512,
        }
    }

    const GEMM: &str = "
void gemm(float C[8][8], float A[8][8], float B[8][8]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++)
      for (int k = 0; k < 8; k++)
        C[i][j] += A[i][k] * B[k][j];
}";

    const CHAIN: &str = "
void chain(float A[8][8], float E[8][8], float G[8][8]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++) {
      E[i][j] = 0;
      for (int k = 0; k < 8; k++)
        E[i][j] += A[i][k] * A[i][k];
    }
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++) {
      G[i][j] = 0;
      for (int k = 0; k < 8; k++)
        G[i][j] += E[i][k] * E[i][k];
    }
}";

    #[test]
    fn single_task_sequential_matches_model_exactly() {
        let kernel = affine_c::parse(GEMM).unwrap();
        let (_, graph) = analyze(&kernel).unwrap();
        let b = budget();
        let cfg = CostModelConfig::default();
        let point = trivial_point(&kernel, &graph, &b, false);
        let model = dag_latency(&kernel, &graph, &point, &b, &cfg);
        let sim = simulate(&kernel, &graph, &point, &cfg, &SimConfig::default()).unwrap();
        assert_eq!(model.total, sim.total_cycles);
    }

    #[test]
    fn single_task_overlapped_matches_model_exactly() {
        let kernel = affine_c::parse(GEMM).unwrap();
        let (deps, graph) = analyze(&kernel).unwrap();
        let b = budget();
        let cfg = CostModelConfig::default();
        let limits = SpaceLimits { max_pad: Some(0), ..SpaceLimits::default() };
        let space = build_space(&kernel, &graph, &deps, &b, &limits).unwrap();
        let mut n = 0;
        for point in enumerate_space(&kernel, &graph, &b, &space, &limits).unwrap() {
            let model = dag_latency(&kernel, &graph, &point, &b, &cfg);
            let sim = simulate(&kernel, &graph, &point, &cfg, &SimConfig::default()).unwrap();
            assert_eq!(
                model.total, sim.total_cycles,
                "divergence at point {}",
                crate::designspace::point_to_json(&kernel, &point)
            );
            n += 1;
        }
        assert!(n > 100, "space unexpectedly small: {n}");
    }

    #[test]
    fn two_task_chain_model_close_to_sim() {
        let kernel = affine_c::parse(CHAIN).unwrap();
        let (deps, graph) = analyze(&kernel).unwrap();
        assert_eq!(graph.n_fused, 2);
        let b = budget();
        let cfg = CostModelConfig::default();
        let limits = SpaceLimits { max_pad: Some(0), ..SpaceLimits::default() };
        let space = build_space(&kernel, &graph, &deps, &b, &limits).unwrap();
        let mut worst = 0.0f64;
        for point in enumerate_space(&kernel, &graph, &b, &space, &limits).unwrap() {
            let model = dag_latency(&kernel, &graph, &point, &b, &cfg);
            let sim = simulate(&kernel, &graph, &point, &cfg, &SimConfig::default()).unwrap();
            let delta = (model.total as f64 - sim.total_cycles as f64).abs()
                / sim.total_cycles as f64;
            worst = worst.max(delta);
            assert!(
                delta <= 0.02,
                "model {} vs sim {} at {}",
                model.total,
                sim.total_cycles,
                crate::designspace::point_to_json(&kernel, &point)
            );
        }
        eprintln!("worst two-task delta: {worst:.4}");
    }

    #[test]
    fn sequential_chain_exact() {
        let kernel = affine_c::parse(CHAIN).unwrap();
        let (_, graph) = analyze(&kernel).unwrap();
        let b = budget();
        let cfg = CostModelConfig::default();
        let point = trivial_point(&kernel, &graph, &b, false);
        let model = dag_latency(&kernel, &graph, &point, &b, &cfg);
        let sim = simulate(&kernel, &graph, &point, &cfg, &SimConfig::default()).unwrap();
        assert_eq!(model.total, sim.total_cycles);
    }

    #[test]
    fn finite_fifo_depth_one_beat_watchdogs_or_slows() {
        let kernel = affine_c::parse(CHAIN).unwrap();
        let (_, graph) = analyze(&kernel).unwrap();
        let b = budget();
        let cfg = CostModelConfig::default();
        let point = trivial_point(&kernel, &graph, &b, true);
        let unbounded = simulate(&kernel, &graph, &point, &cfg, &SimConfig::default()).unwrap();
        let tight = SimConfig { fifo_depth: Some(1), ..SimConfig::default() };
        match simulate(&kernel, &graph, &point, &cfg, &tight) {
            Err(SimError::Watchdog(_)) => {}
            Ok(r) => assert!(r.total_cycles >= unbounded.total_cycles),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
}

/// Observed shift of one channel edge: first committed write relative to the
/// producer's start.
pub fn measure_shift(report: &SimReport, graph: &FusedTaskGraph, edge_idx: usize) -> Result<u64, SimError> {
    if report.trace.is_none() {
        return Err(SimError::MissingTrace);
    }
    let edge = &graph.edges[edge_idx];
    if edge.kind == ChannelKind::OffchipLoad {
        return Ok(0);
    }
    let EndPoint::Task(src) = edge.src else {
        return Ok(0);
    };
    let ch = report
        .channels
        .iter()
        .find(|c| c.edge == edge_idx)
        .ok_or(SimError::MissingTrace)?;
    let start = report.per_task[src.0].start;
    Ok(ch.first_write_cycle.saturating_sub(start))
}
