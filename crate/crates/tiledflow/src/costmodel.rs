//! Analytical latency model: per-statement pipelined blocks, the buffered
//! inter-tile level recursion with communication/computation overlap, FIFO
//! start shifts, and the dataflow DAG objective.
//!
//! The per-task schedule follows a static port-window discipline the
//! discrete-event simulator mirrors exactly: every inter-tile round reserves
//! a transfer window sized for the level's per-iteration traffic, the first
//! round's window is the prologue, steady rounds overlap the window with the
//! inner block (`max(Lat_inner, sum f/BS)`), and an `alpha`-weighted drain
//! window pays for the store flush (`alpha` = 2 when the level both loads
//! and stores, 1 otherwise). Arrays defined above their transfer level
//! refresh only while every gating loop sits at its first iteration.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::designspace::{
    footprint, partition_per_dim, statement_dsp, DesignPoint, ResourceBudget,
};
use crate::ir::*;
use crate::taskgraph::{ChannelKind, EndPoint, FusedTaskGraph, TaskId};


const EVENT_CAP: usize = 1 << 20;

/// Model constants: iteration latencies, initiation intervals, DSP costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModelConfig {
    /// Iteration latency of the dependence-free operation chain.
    pub il_par: u64,
    /// Latency of one dependence-carrying accumulation.
    pub il_red: u64,
    /// Per-statement II overrides (statement index -> II).
    pub ii_override: BTreeMap<usize, u64>,
    /// DSP cost per operation class.
    pub dsp_add: f64,
    pub dsp_sub: f64,
    pub dsp_mul: f64,
    pub dsp_div: f64,
    /// Informational clock, used for throughput reporting only.
    pub freq_mhz: f64,
    /// Off-chip access latency constant exposed to the simulator.
    pub offchip_latency: u64,
}

impl Default for CostModelConfig {
    fn default() -> Self {
        CostModelConfig {
            il_par: 5,
            il_red: 3,
            ii_override: BTreeMap::new(),
            dsp_add: 2.0,
            dsp_sub: 2.0,
            dsp_mul: 3.0,
            dsp_div: 0.0,
            freq_mhz: 220.0,
            offchip_latency: 64,
        }
    }
}

impl CostModelConfig {
    pub fn dsp_cost(&self, op: OpKind) -> f64 {
        match op {
            OpKind::Add => self.dsp_add,
            OpKind::Sub => self.dsp_sub,
            OpKind::Mul => self.dsp_mul,
            OpKind::Div => self.dsp_div,
        }
    }

    /// II of a statement's pipelined reduction loop: the accumulation
    /// latency for reductions, 1 otherwise.
    pub fn ii_of(&self, kernel: &AffineKernel, s: StmtId) -> u64 {
        if let Some(ii) = self.ii_override.get(&s.0) {
            return *ii;
        }
        if kernel.statement(s).reduction_loops.is_empty() {
            1
        } else {
            self.il_red.max(1)
        }
    }
}

fn ceil_log2(x: u64) -> u64 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros() as u64
}

/// Latency of one fully unrolled intra-tile invocation of a statement: the
/// parallel iteration latency plus an adder-tree depth over the reduction
/// intra product.
pub fn intra_latency(
    kernel: &AffineKernel,
    s: StmtId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> u64 {
    let st = kernel.statement(s);
    let red_intra: u64 = st.reduction_loops.iter().map(|l| point.tiling_of(*l).intra).product();
    if red_intra <= 1 {
        cfg.il_par
    } else {
        cfg.il_par + cfg.il_red * ceil_log2(red_intra)
    }
}

/// Latency of a statement's compute block including its pipelined reduction
/// inter-tile loop.
pub fn pipelined_task_latency(
    kernel: &AffineKernel,
    s: StmtId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> u64 {
    let st = kernel.statement(s);
    let red_inter: u64 = st.reduction_loops.iter().map(|l| point.tiling_of(*l).inter).product();
    intra_latency(kernel, s, point, cfg) + cfg.ii_of(kernel, s) * (red_inter - 1)
}

/// Compute block of a fused task: member blocks run back to back per tile.
pub fn task_compute_block(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> u64 {
    graph
        .task(t)
        .statements
        .iter()
        .map(|s| pipelined_task_latency(kernel, *s, point, cfg))
        .sum()
}

// ---------------------------------------------------------------------------
// Per-task schedule
// ---------------------------------------------------------------------------

/// One array's traffic at its transfer level.
#[derive(Debug, Clone)]
pub(crate) struct LevelTraffic {
    pub array: ArrayId,
    pub beats: u64,
    pub is_input: bool,
    /// Positions (1-based) that must all be at their first iteration for the
    /// transfer to happen: the non-indexing loops between define and
    /// transfer level.
    pub gates: Vec<usize>,
}

/// The static shape of one task's schedule, shared by model and simulator.
#[derive(Debug, Clone)]
pub(crate) struct TaskShape {
    /// Inter trips of the non-reduction levels, outermost first.
    pub trips: Vec<u64>,
    /// Traffic attached to each level (index 0 = level 1).
    pub traffic: Vec<Vec<LevelTraffic>>,
    /// One-shot loads/stores before/after all loops.
    pub level0_in: Vec<LevelTraffic>,
    pub level0_out_beats: u64,
    /// Innermost compute block duration.
    pub compute: u64,
    pub overlap: bool,
    /// Store beats of one output tile (at the innermost level).
    pub out_tile_beats: u64,
    pub out_tile_elems: u64,
}

/// Build the schedule shape of one fused task under a point.
pub(crate) fn task_shape(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> TaskShape {
    let task = graph.task(t);
    let order = &point.orders[t.0];
    let m = order.len();
    let mut traffic: Vec<Vec<LevelTraffic>> = vec![Vec::new(); m];
    let mut level0_in = Vec::new();
    let mut level0_out_beats = 0;

    let indexing_loops = |a: ArrayId| -> Vec<LoopId> {
        let mut v = Vec::new();
        for s in &task.statements {
            let st = kernel.statement(*s);
            for acc in std::iter::once(&st.write).chain(st.reads.iter()) {
                if acc.array == a {
                    for ix in &acc.index {
                        let c = task.canonical(ix.loop_id);
                        if !v.contains(&c) {
                            v.push(c);
                        }
                    }
                }
            }
        }
        v
    };

    for (a, p) in &point.placements[t.0] {
        let fp = footprint(kernel, graph, t, *a, p.transfer_level, point);
        let bw = point.bitwidth.get(a).copied().unwrap_or(1);
        let last = *fp.extents.last().unwrap_or(&1);
        let b = beats(fp.elems, last, bw);
        let is_input = *a != task.output_array;
        let idx = indexing_loops(*a);
        let gates: Vec<usize> = ((p.define_level + 1)..=p.transfer_level)
            .filter(|q| !idx.contains(&order[q - 1]))
            .collect();
        if p.transfer_level == 0 {
            if is_input {
                level0_in.push(LevelTraffic { array: *a, beats: b, is_input: true, gates: vec![] });
            } else {
                level0_out_beats += b;
            }
        } else {
            traffic[p.transfer_level - 1].push(LevelTraffic {
                array: *a,
                beats: b,
                is_input,
                gates,
            });
        }
        // Read-write output tiles are also loaded before each compute round:
        // account the inbound beats alongside the outbound ones.
        if !is_input && crate::designspace::usage_of(kernel, graph, t, *a) == crate::designspace::Usage::ReadWrite
        {
            let tr = LevelTraffic { array: *a, beats: b, is_input: true, gates: vec![] };
            if p.transfer_level == 0 {
                level0_in.push(tr);
            } else {
                traffic[p.transfer_level - 1].push(tr);
            }
        }
    }

    let out_fp = footprint(kernel, graph, t, task.output_array, m, point);
    let out_bw = point.bitwidth.get(&task.output_array).copied().unwrap_or(1);
    let out_last = *out_fp.extents.last().unwrap_or(&1);
    let out_tile_beats = beats(out_fp.elems, out_last, out_bw);

    TaskShape {
        trips: order.iter().map(|l| point.tiling_of(*l).inter).collect(),
        traffic,
        level0_in,
        level0_out_beats,
        compute: task_compute_block(kernel, graph, t, point, cfg),
        overlap: point.overlap,
        out_tile_beats,
        out_tile_elems: out_fp.elems,
    }
}

pub(crate) fn beats(elems: u64, last_extent: u64, bw: u64) -> u64 {
    if elems == 0 {
        return 0;
    }
    let rows = elems / last_extent.max(1);
    rows * last_extent.div_ceil(bw.max(1))
}

/// Fully evaluated schedule of one fused task.
#[derive(Debug, Clone)]
pub struct TaskSchedule {
    /// Total task duration (Lat_task), start-relative.
    pub lat: u64,
    /// Commit time of each output tile into the task's output channel,
    /// start-relative, in production order.
    pub commits: Vec<u64>,
    /// For each input array: start time of each transfer window that
    /// actually moves data, start-relative.
    pub needs: BTreeMap<ArrayId, Vec<u64>>,
    /// Elements per output tile and per fresh transfer of each input.
    pub out_tile_elems: u64,
    pub in_tile_elems: BTreeMap<ArrayId, u64>,
    pub compute_block: u64,
}

struct Walk<'a> {
    shape: &'a TaskShape,
    commits: Vec<u64>,
    needs: BTreeMap<ArrayId, Vec<u64>>,
}

impl<'a> Walk<'a> {
    fn window(&self, n: usize, fresh: &[bool], self_first: bool) -> (u64, u64, u64) {
        let mut inb = 0;
        let mut outb = 0;
        for tr in &self.shape.traffic[n - 1] {
            let open = tr
                .gates
                .iter()
                .all(|g| if *g == n { self_first } else { fresh[*g - 1] });
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

    fn record_needs(&mut self, n: usize, fresh: &[bool], self_first: bool, at: u64) {
        for tr in &self.shape.traffic[n - 1] {
            let open = tr
                .gates
                .iter()
                .all(|g| if *g == n { self_first } else { fresh[*g - 1] });
            if open && tr.is_input && tr.beats > 0 {
                let v = self.needs.entry(tr.array).or_default();
                if v.len() < EVENT_CAP {
                    v.push(at);
                }
            }
        }
    }

    fn commit(&mut self, at: u64) {
        if self.commits.len() < EVENT_CAP {
            self.commits.push(at);
        }
    }

    /// Run level `n` (1-based; n > m is the compute block) starting at
    /// `start`. Returns the completion time.
    fn run(&mut self, n: usize, start: u64, fresh: &mut Vec<bool>) -> u64 {
        let m = self.shape.trips.len();
        if n > m {
            let end = start + self.shape.compute;
            self.commit(end + self.shape.out_tile_beats);
            return end;
        }
        let trips = self.shape.trips[n - 1];

        if !self.shape.overlap {
            // Sequential rounds: load, inner, store.
            let mut t = start;
            for r in 0..trips {
                let first = r == 0;
                let (_, inb, outb) = self.window(n, fresh, first);
                self.record_needs(n, fresh, first, t + inb);
                fresh.push(first);
                let inner = self.run(n + 1, t + inb, fresh);
                fresh.pop();
                t = inner + outb;
            }
            return t;
        }

        // Overlapped rounds under static windows.
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
            // Window r starts at the previous round's compute start (the
            // prologue at the level start) and the round's inner block
            // begins once both the window and the previous block are done.
            // Streamed data only has to arrive by the block's start.
            let w_start = compute_start;
            compute_start = if first { start + w } else { (w_start + w).max(prev_end) };
            if inb > 0 {
                self.record_needs(n, fresh, first, compute_start);
            }
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

/// Evaluate the full schedule of one task under a point.
pub fn task_schedule(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> TaskSchedule {
    let shape = task_shape(kernel, graph, t, point, cfg);
    let mut walk = Walk { shape: &shape, commits: Vec::new(), needs: BTreeMap::new() };

    let level0_in_beats: u64 = shape.level0_in.iter().map(|tr| tr.beats).sum();
    let mut acc = 0;
    for tr in &shape.level0_in {
        acc += tr.beats;
        if tr.is_input && tr.beats > 0 {
            walk.needs.entry(tr.array).or_default().push(acc);
        }
    }
    let body_end = {
        let mut fresh = Vec::new();
        walk.run(1, level0_in_beats, &mut fresh)
    };
    let lat = body_end + shape.level0_out_beats;

    let mut in_tile_elems = BTreeMap::new();
    for t_arrays in [&shape.level0_in] {
        for tr in t_arrays.iter() {
            let placement = point.placements[t.0][&tr.array];
            let fp = footprint(kernel, graph, t, tr.array, placement.transfer_level, point);
            in_tile_elems.insert(tr.array, fp.elems);
        }
    }
    for level in &shape.traffic {
        for tr in level {
            if tr.is_input {
                let placement = point.placements[t.0][&tr.array];
                let fp = footprint(kernel, graph, t, tr.array, placement.transfer_level, point);
                in_tile_elems.insert(tr.array, fp.elems);
            }
        }
    }

    TaskSchedule {
        lat,
        commits: walk.commits,
        needs: walk.needs,
        out_tile_elems: shape.out_tile_elems,
        in_tile_elems,
        compute_block: shape.compute,
    }
}

// ---------------------------------------------------------------------------
// Shifts and the DAG objective
// ---------------------------------------------------------------------------

/// Start shift of one FIFO edge: the smallest consumer start offset (after
/// the producer's start) at which every consumer transfer window finds its
/// data already committed. Degenerates to the producer's full latency when
/// the consumer needs the whole array up front, and to 0 for off-chip loads.
pub fn shift_of_edge(
    producer: &TaskSchedule,
    consumer: &TaskSchedule,
    array: ArrayId,
) -> u64 {
    let Some(needs) = consumer.needs.get(&array) else {
        return 0;
    };
    if needs.is_empty() || producer.commits.is_empty() {
        return 0;
    }
    let tile = consumer.in_tile_elems.get(&array).copied().unwrap_or(1).max(1);
    let prod_tile = producer.out_tile_elems.max(1);
    let mut shift = 0i128;
    for (c, need_at) in needs.iter().enumerate() {
        let consumed = (c as u64 + 1) * tile;
        let k = consumed.div_ceil(prod_tile).min(producer.commits.len() as u64);
        let commit_at = producer.commits[(k - 1) as usize];
        shift = shift.max(commit_at as i128 - *need_at as i128);
    }
    shift.max(0) as u64
}

/// Per-task latency summary inside a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskLatency {
    pub task: TaskId,
    pub lat_task: u64,
    pub start: u64,
    pub finish: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub src: TaskId,
    pub dst: TaskId,
    pub array: ArrayId,
    pub cycles: u64,
}

/// Per-SLR resource aggregate.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SlrUsage {
    pub mem_bits: u64,
    pub dsp: f64,
    pub max_partition: u64,
}

/// Analytical evaluation of one design point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatencyReport {
    pub per_task: Vec<TaskLatency>,
    pub shifts: Vec<ShiftEntry>,
    /// Latest finish among sink tasks.
    pub total: u64,
    pub per_slr: Vec<SlrUsage>,
}

impl LatencyReport {
    /// Throughput estimate in GF/s for the original iteration counts.
    pub fn gflops(&self, kernel: &AffineKernel, cfg: &CostModelConfig) -> f64 {
        let ops: u64 = kernel
            .stmt_ids()
            .map(|s| {
                let st = kernel.statement(s);
                let per_iter: u64 = st.op_counts.values().map(|v| *v as u64).sum();
                per_iter * kernel.iteration_count(s)
            })
            .sum();
        if self.total == 0 {
            return 0.0;
        }
        let seconds = self.total as f64 / (cfg.freq_mhz * 1e6);
        ops as f64 / seconds / 1e9
    }
}

/// Pure DAG evaluation over explicit latencies and shifts: consumer start is
/// the max over predecessors of their start plus the edge shift; the design
/// completes when every task has finished (sinks dominate whenever shifts
/// cover the producers' tails, which they do for data-complete consumers).
pub fn dag_core(
    n_tasks: usize,
    edges: &[(usize, usize, u64)],
    lat: &[u64],
) -> (Vec<u64>, Vec<u64>, u64) {
    let mut starts = vec![0u64; n_tasks];
    // Relaxation in topological fashion: iterate until fixpoint (graphs are
    // tiny and acyclic, so n passes suffice).
    for _ in 0..n_tasks {
        for (src, dst, shift) in edges {
            starts[*dst] = starts[*dst].max(starts[*src] + shift);
        }
    }
    let finishes: Vec<u64> = starts.iter().zip(lat.iter()).map(|(s, l)| s + l).collect();
    let total = finishes.iter().copied().max().unwrap_or(0);
    (starts, finishes, total)
}

/// Per-SLR resource usage of a point.
pub fn resource_usage(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
    budget: &ResourceBudget,
    cfg: &CostModelConfig,
) -> Vec<SlrUsage> {
    let mut out = vec![SlrUsage::default(); budget.n_slr as usize];
    for t in graph.task_ids() {
        let slr = point.slr[t.0].min(budget.n_slr - 1) as usize;
        for (a, p) in &point.placements[t.0] {
            let fp = footprint(kernel, graph, t, *a, p.define_level, point);
            out[slr].mem_bits += fp.elems * p.buffers as u64 * kernel.array(*a).elem_bits as u64;
            let parts: u64 = partition_per_dim(kernel, graph, t, *a, point).iter().product();
            out[slr].max_partition = out[slr].max_partition.max(parts);
        }
        for s in &graph.task(t).statements {
            out[slr].dsp += statement_dsp(kernel, *s, point, cfg);
        }
    }
    out
}

/// Evaluate the full analytical objective for a design point.
pub fn dag_latency(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
    budget: &ResourceBudget,
    cfg: &CostModelConfig,
) -> LatencyReport {
    let schedules: Vec<TaskSchedule> = graph
        .task_ids()
        .map(|t| task_schedule(kernel, graph, t, point, cfg))
        .collect();

    let mut shifts = Vec::new();
    let mut edges = Vec::new();
    for e in &graph.edges {
        if e.kind != ChannelKind::FifoIntertask {
            continue;
        }
        let (EndPoint::Task(src), EndPoint::Task(dst)) = (e.src, e.dst) else { continue };
        // With overlap disabled the design runs sequentially: a consumer
        // starts only after its producer has fully finished.
        let cycles = if point.overlap {
            shift_of_edge(&schedules[src.0], &schedules[dst.0], e.array)
        } else {
            schedules[src.0].lat
        };
        shifts.push(ShiftEntry { src, dst, array: e.array, cycles });
        edges.push((src.0, dst.0, cycles));
    }
    let lats: Vec<u64> = schedules.iter().map(|s| s.lat).collect();
    let (starts, finishes, total) = dag_core(graph.n_fused, &edges, &lats);

    LatencyReport {
        per_task: graph
            .task_ids()
            .map(|t| TaskLatency {
                task: t,
                lat_task: lats[t.0],
                start: starts[t.0],
                finish: finishes[t.0],
            })
            .collect(),
        shifts,
        total,
        per_slr: resource_usage(kernel, graph, point, budget, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_level_shape(trip: u64, in_beats: u64, out_beats: u64, compute: u64, overlap: bool) -> TaskShape {
        let mut traffic = vec![Vec::new()];
        if in_beats > 0 {
            traffic[0].push(LevelTraffic {
                array: ArrayId(0),
                beats: in_beats,
                is_input: true,
                gates: vec![],
            });
        }
        if out_beats > 0 {
            traffic[0].push(LevelTraffic {
                array: ArrayId(1),
                beats: out_beats,
                is_input: false,
                gates: vec![],
            });
        }
        TaskShape {
            trips: vec![trip],
            traffic,
            level0_in: vec![],
            level0_out_beats: 0,
            compute,
            overlap,
            out_tile_beats: out_beats,
            out_tile_elems: 1,
        }
    }

    fn run_shape(shape: &TaskShape) -> u64 {
        let mut walk = Walk { shape, commits: Vec::new(), needs: BTreeMap::new() };
        let mut fresh = Vec::new();
        walk.run(1, 0, &mut fresh)
    }

    #[test]
    fn level_recursion_compute_bound() {
        // Inner latency 100, per-iteration transfer 60, four trips, loads
        // only (alpha = 1): prologue + 3 steady rounds + final block + drain.
        let shape = one_level_shape(4, 60, 0, 100, true);
        assert_eq!(run_shape(&shape), 60 + 3 * 100 + 100 + 60);
    }

    #[test]
    fn level_recursion_transfer_bound() {
        // Inner latency 40, transfer 60 with loads and stores (alpha = 2).
        let shape = one_level_shape(4, 30, 30, 40, true);
        assert_eq!(run_shape(&shape), 60 + 3 * 60 + 40 + 120);
    }

    #[test]
    fn level_recursion_pass_through() {
        // No transfer, single trip: the inner latency alone.
        let shape = one_level_shape(1, 0, 0, 100, true);
        assert_eq!(run_shape(&shape), 100);
    }

    #[test]
    fn level_recursion_sequential() {
        // Overlap disabled: load + compute + store per round, exactly.
        let shape = one_level_shape(4, 30, 30, 40, false);
        assert_eq!(run_shape(&shape), 4 * (30 + 40 + 30));
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
    }

    #[test]
    fn dag_core_single_task() {
        let (_, _, total) = dag_core(1, &[], &[42]);
        assert_eq!(total, 42);
    }

    #[test]
    fn dag_core_max_rule_over_sinks() {
        // Two independent sinks: max of their latencies.
        let (_, _, total) = dag_core(2, &[], &[100, 80]);
        assert_eq!(total, 100);
    }

    #[test]
    fn dag_core_chain_with_shift() {
        // start(1) = shift, finish(1) = shift + lat
        let (starts, finishes, total) = dag_core(2, &[(0, 1, 30)], &[100, 50]);
        assert_eq!(starts, vec![0, 30]);
        assert_eq!(finishes, vec![100, 80]);
        // The producer's own tail is part of the design's completion.
        assert_eq!(total, 100);
    }
}
