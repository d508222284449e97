//! The joint design space: tiling and padding, loop order, transfer and
//! define levels, bitwidth, buffering and SLR assignment, with every
//! feasibility rule the search relies on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costmodel::CostModelConfig;
use crate::dependence::{order_is_legal, DependenceSet};
use crate::error::SpaceError;
use crate::ir::*;
use crate::taskgraph::{ChannelKind, FusedTaskGraph, TaskId};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Tiling of one loop: `intra * inter = padded >= original`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    pub intra: u64,
    pub inter: u64,
    pub padded: u64,
}

impl Tiling {
    pub fn unit(trip: u64) -> Self {
        Tiling { intra: 1, inter: trip, padded: trip }
    }
}

/// How a task uses an on-chip array, which fixes the buffer count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Usage {
    ReadOnly,
    WriteOnly,
    ReadWrite,
}

/// On-chip placement of one array inside one fused task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    /// 0 = transferred before any inter-tile loop, k = under the k-th loop
    /// of the task's chosen inter-tile order.
    pub transfer_level: usize,
    /// Level the buffer is allocated (and reused) at; `<= transfer_level`.
    pub define_level: usize,
    /// Rotating buffer copies (1 = no overlap, 2 = double, 3 = triple).
    pub buffers: u32,
}

/// One complete assignment of all design variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignPoint {
    /// Per loop id.
    pub tiling: Vec<Tiling>,
    /// Per fused task: the chosen order of its non-reduction inter-tile
    /// loops (canonical ids).
    pub orders: Vec<Vec<LoopId>>,
    /// Per fused task: placement of every array it touches (inputs and its
    /// output).
    pub placements: Vec<BTreeMap<ArrayId, Placement>>,
    /// Per fused task: SLR the task is mapped to.
    pub slr: Vec<u32>,
    /// Global communication/computation overlap switch.
    pub overlap: bool,
    /// Derived: elements per transfer beat, per array.
    pub bitwidth: BTreeMap<ArrayId, u64>,
    /// Derived: last on-chip dimension of the transferred tile, per
    /// (task, array).
    pub last_dim: Vec<BTreeMap<ArrayId, u64>>,
}

impl DesignPoint {
    pub fn tiling_of(&self, l: LoopId) -> Tiling {
        self.tiling[l.0]
    }

    pub fn placement(&self, t: TaskId, a: ArrayId) -> Option<&Placement> {
        self.placements[t.0].get(&a)
    }

    /// Total on-chip memory bits over all tasks (tie-break metric).
    pub fn total_mem_bits(&self, kernel: &AffineKernel, graph: &FusedTaskGraph) -> u64 {
        graph
            .task_ids()
            .map(|t| {
                self.placements[t.0]
                    .iter()
                    .map(|(a, p)| {
                        let f = footprint(kernel, graph, t, *a, p.define_level, self);
                        f.elems * p.buffers as u64 * kernel.array(*a).elem_bits as u64
                    })
                    .sum::<u64>()
            })
            .sum()
    }
}

/// Hardware limits the search must respect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceBudget {
    pub name: String,
    pub n_slr: u32,
    /// On-chip memory bits available per SLR.
    pub mem_bits_per_slr: u64,
    /// DSP slices available per SLR.
    pub dsp_per_slr: f64,
    /// Maximum partitioning of any one array.
    pub max_part: u64,
    /// Candidate elements-per-beat burst sizes (powers of two, ascending).
    pub burst_sizes: Vec<u64>,
    /// Transfer bus cap in bits.
    pub max_bitwidth_bits: u64,
}

impl ResourceBudget {
    pub fn validate(&self) -> Result<(), SpaceError> {
        if self.n_slr == 0 || self.max_part == 0 {
            return Err(SpaceError::Schema("budget needs n_slr >= 1 and max_part >= 1".into()));
        }
        if !self.burst_sizes.contains(&1) {
            return Err(SpaceError::Schema("burst_sizes must contain 1".into()));
        }
        if self.burst_sizes.iter().any(|b| !b.is_power_of_two()) {
            return Err(SpaceError::Schema("burst_sizes must be powers of two".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintId {
    Eq1,
    Eq2,
    Eq3,
    Eq4,
    Eq5,
    Eq6,
    Eq7,
    Eq8,
    Eq9,
    Eq10,
    Slr,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub subject: String,
    pub detail: String,
}

/// Feasibility verdict for one design point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    fn from_violations(violations: Vec<Violation>) -> Self {
        ConstraintReport { feasible: violations.is_empty(), violations }
    }
}

/// Transfer/define-level enumeration policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferPolicy {
    /// Enumerate every legal (transfer, define) pair per input array.
    Free,
    /// Pin every input to the innermost level (transfer = define = m).
    FixedInnermost,
}

/// Knobs bounding the enumerated space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceLimits {
    /// Per-loop padding cap; `None` picks the distance to the next multiple
    /// of the largest burst size, capped at 32.
    pub max_pad: Option<u64>,
    /// Refuse to enumerate spaces larger than this.
    pub max_points: Option<u64>,
    pub transfer_policy: TransferPolicy,
    pub overlap: bool,
}

impl Default for SpaceLimits {
    fn default() -> Self {
        SpaceLimits {
            max_pad: None,
            max_points: None,
            transfer_policy: TransferPolicy::Free,
            overlap: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Elementary value sets
// ---------------------------------------------------------------------------

/// Padding cap for one loop under the default policy: distance to the next
/// multiple of the largest burst size, at most 32.
pub fn auto_max_pad(trip_ori: u64, budget: &ResourceBudget) -> u64 {
    let b = budget.burst_sizes.iter().copied().max().unwrap_or(1);
    let next = trip_ori.div_ceil(b) * b;
    (next - trip_ori).min(32)
}

/// All (intra trip, padded trip) pairs for a loop: the intra trip divides
/// the original or the padded trip count, padding stays within `max_pad`,
/// and the padded trip is minimal for each intra trip.
pub fn valid_intra_trips(trip_ori: u64, max_pad: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for intra in 1..=(trip_ori + max_pad) {
        let padded = trip_ori.div_ceil(intra) * intra;
        if padded <= trip_ori + max_pad {
            out.push((intra, padded));
        }
    }
    out
}

/// Largest burst size that divides the transferred tile's last dimension
/// and fits the bus cap.
pub fn compute_bitwidth(last_dim_elems: u64, elem_bits: u32, budget: &ResourceBudget) -> u64 {
    budget
        .burst_sizes
        .iter()
        .copied()
        .filter(|b| b * elem_bits as u64 <= budget.max_bitwidth_bits)
        .filter(|b| last_dim_elems % b == 0)
        .max()
        .unwrap_or(1)
}

/// Buffer copies for an on-chip array: double buffering for one-directional
/// traffic, triple when the tile is both read and written, single when
/// overlap is disabled.
pub fn buffer_count(usage: Usage, overlap: bool) -> u32 {
    if !overlap {
        return 1;
    }
    match usage {
        Usage::ReadOnly | Usage::WriteOnly => 2,
        Usage::ReadWrite => 3,
    }
}

/// How a fused task uses an array with respect to the outside world.
pub fn usage_of(kernel: &AffineKernel, graph: &FusedTaskGraph, t: TaskId, a: ArrayId) -> Usage {
    let task = graph.task(t);
    if a != task.output_array {
        return Usage::ReadOnly;
    }
    // Output tile: read-write when the first member touching it reads it
    // (accumulating into off-chip data), write-only when a member
    // initializes it outright first.
    for s in &task.statements {
        let st = kernel.statement(*s);
        let writes = st.write.array == a;
        let reads = st.reads.iter().any(|r| r.array == a);
        if writes && !reads {
            return Usage::WriteOnly;
        }
        if reads {
            return Usage::ReadWrite;
        }
    }
    Usage::WriteOnly
}

/// Reduction inter-tile loops ordered for pipelining: ascending inter trip,
/// largest innermost.
pub fn rank_reduction_loops(task: &crate::taskgraph::FusedTask, point: &DesignPoint) -> Vec<LoopId> {
    let mut reds = task.reduction_loops.clone();
    reds.sort_by_key(|l| (point.tiling_of(*l).inter, l.0));
    reds
}

// ---------------------------------------------------------------------------
// Footprints
// ---------------------------------------------------------------------------

/// Footprint of an array on-chip at a given inter-tile level of a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    /// Extent per array dimension.
    pub extents: Vec<u64>,
    pub elems: u64,
}

/// Accesses of `a` inside task `t`, with loops canonicalized.
fn task_accesses(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    a: ArrayId,
) -> Vec<ArrayAccess> {
    let task = graph.task(t);
    let mut out = Vec::new();
    for s in &task.statements {
        let st = kernel.statement(*s);
        for acc in std::iter::once(&st.write).chain(st.reads.iter()) {
            if acc.array == a {
                let canon = ArrayAccess {
                    array: a,
                    index: acc
                        .index
                        .iter()
                        .map(|ix| IndexExpr { loop_id: task.canonical(ix.loop_id), offset: ix.offset })
                        .collect(),
                };
                if !out.contains(&canon) {
                    out.push(canon);
                }
            }
        }
    }
    out
}

/// Tile extents of `a` if transferred under inter-tile level `level` of
/// task `t` (0 = before all loops): dimensions whose loop sits at or above
/// the level contribute their intra trip, everything below (deeper
/// non-reduction levels and all reduction loops) contributes the full padded
/// extent.
pub fn footprint(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    a: ArrayId,
    level: usize,
    point: &DesignPoint,
) -> Footprint {
    let order = &point.orders[t.0];
    let accesses = task_accesses(kernel, graph, t, a);
    let ndims = kernel.array(a).dims.len();
    let mut extents = Vec::with_capacity(ndims);
    for d in 0..ndims {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for acc in &accesses {
            let ix = &acc.index[d];
            let pos = order.iter().position(|l| *l == ix.loop_id).map(|p| p + 1);
            let extent = match pos {
                Some(p) if p <= level => point.tiling_of(ix.loop_id).intra,
                _ => point.tiling_of(ix.loop_id).padded,
            } as i64;
            lo = lo.min(ix.offset);
            hi = hi.max(ix.offset + extent - 1);
        }
        if accesses.is_empty() {
            extents.push(1);
        } else {
            extents.push((hi - lo + 1) as u64);
        }
    }
    let elems = extents.iter().product();
    Footprint { extents, elems }
}

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

fn all_orders(loops: &[LoopId]) -> Vec<Vec<LoopId>> {
    if loops.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for (i, l) in loops.iter().enumerate() {
        let mut rest = loops.to_vec();
        rest.remove(i);
        for mut tail in all_orders(&rest) {
            let mut v = vec![*l];
            v.append(&mut tail);
            out.push(v);
        }
    }
    out
}

/// Expand a canonical inter-tile order into one member's full loop order:
/// the member's loops arranged per the joint order, reduction loops
/// appended innermost (default ranking by original trip count, largest
/// innermost).
pub fn member_full_order(
    kernel: &AffineKernel,
    task: &crate::taskgraph::FusedTask,
    stmt: StmtId,
    inter_order: &[LoopId],
) -> Vec<LoopId> {
    let st = kernel.statement(stmt);
    let mut full: Vec<LoopId> = inter_order
        .iter()
        .filter_map(|canon| {
            st.loops
                .iter()
                .copied()
                .find(|ml| task.canonical(*ml) == *canon && !st.is_reduction(*ml))
        })
        .collect();
    let mut reds: Vec<LoopId> = st.reduction_loops.clone();
    reds.sort_by_key(|l| (kernel.trip_count(*l), l.0));
    full.extend(reds);
    full
}

/// Joint orderings of a fused task's loops: every member must accept the
/// projection of the order onto its own loops (Eq. 4's shared-position rule
/// holds by construction since the order is over canonical loops).
pub fn shared_permutations(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    deps: &DependenceSet,
) -> Result<Vec<Vec<LoopId>>, SpaceError> {
    let task = graph.task(t);
    let joint: Vec<Vec<LoopId>> = all_orders(&task.all_loops())
        .into_iter()
        .filter(|order| {
            task.statements.iter().all(|s| {
                let st = kernel.statement(*s);
                let projected: Vec<LoopId> = order
                    .iter()
                    .filter_map(|canon| {
                        st.loops.iter().copied().find(|ml| task.canonical(*ml) == *canon)
                    })
                    .collect();
                projected.len() == st.loops.len() && order_is_legal(kernel, *s, &projected, deps)
            })
        })
        .collect();
    if joint.is_empty() {
        return Err(SpaceError::EmptyPermutationSet(t.0));
    }
    Ok(joint)
}

/// The inter-tile (non-reduction) orders the search actually enumerates:
/// distinct non-reduction prefixes of the joint orderings whose
/// reduction-innermost expansion stays legal for every member.
pub fn intertile_orders(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    deps: &DependenceSet,
) -> Result<Vec<Vec<LoopId>>, SpaceError> {
    let task = graph.task(t);
    let mut out = Vec::new();
    for order in all_orders(&task.shared_loops) {
        let ok = task.statements.iter().all(|s| {
            let full = member_full_order(kernel, task, *s, &order);
            full.len() == kernel.statement(*s).loops.len()
                && order_is_legal(kernel, *s, &full, deps)
        });
        if ok {
            out.push(order);
        }
    }
    if out.is_empty() {
        return Err(SpaceError::EmptyPermutationSet(t.0));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Point derivation
// ---------------------------------------------------------------------------

/// Arrays a task touches, with the channel direction relative to the task.
/// The task's output array is never an enumerable input, even when it also
/// carries a load edge (read-write outputs share the output tile's level).
pub fn task_arrays(graph: &FusedTaskGraph, t: TaskId) -> Vec<(ArrayId, bool)> {
    let out = graph.task(t).output_array;
    let mut v: Vec<(ArrayId, bool)> = Vec::new();
    for e in graph.inputs(t) {
        if e.array != out && !v.iter().any(|(a, _)| *a == e.array) {
            v.push((e.array, true));
        }
    }
    v.push((out, false));
    v
}

/// Fill the derived fields (buffer counts, last dims, bitwidths) of a point
/// whose structural choices are set.
pub fn finalize_point(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    budget: &ResourceBudget,
    point: &mut DesignPoint,
) {
    for t in graph.task_ids() {
        let mut last = BTreeMap::new();
        let placements = point.placements[t.0].clone();
        for (a, p) in &placements {
            let fp = footprint(kernel, graph, t, *a, p.transfer_level, point);
            last.insert(*a, *fp.extents.last().unwrap_or(&1));
            let usage = usage_of(kernel, graph, t, *a);
            point.placements[t.0].get_mut(a).unwrap().buffers =
                buffer_count(usage, point.overlap);
        }
        point.last_dim[t.0] = last;
    }
    // One beat width per array: the largest burst dividing the tile's last
    // dimension in every task that moves it.
    let mut bw = BTreeMap::new();
    for a in kernel.array_ids() {
        let mut width = u64::MAX;
        let mut seen = false;
        for t in graph.task_ids() {
            if let Some(s_last) = point.last_dim[t.0].get(&a) {
                seen = true;
                width = width.min(compute_bitwidth(*s_last, kernel.array(a).elem_bits, budget));
            }
        }
        if seen {
            bw.insert(a, width);
        }
    }
    point.bitwidth = bw;
}

/// The all-ones starting point: unit tiles, original orders, innermost
/// transfer levels, every task on SLR 0.
pub fn trivial_point(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    budget: &ResourceBudget,
    overlap: bool,
) -> DesignPoint {
    let tiling = kernel.loops.iter().map(|l| Tiling::unit(l.trip_count_ori)).collect();
    let orders: Vec<Vec<LoopId>> =
        graph.fused_tasks.iter().map(|t| t.shared_loops.clone()).collect();
    let mut placements = Vec::new();
    for t in graph.task_ids() {
        let m = graph.task(t).shared_loops.len();
        let fifo_fed = fifo_fed_arrays(graph, t);
        let mut map = BTreeMap::new();
        for (a, _) in task_arrays(graph, t) {
            // FIFO-fed data cannot be re-delivered: park its buffer at the
            // top level so the refresh gates keep delivery single-shot.
            let d = if fifo_fed.contains(&a) { 0 } else { m };
            map.insert(a, Placement { transfer_level: m, define_level: d, buffers: 1 });
        }
        placements.push(map);
    }
    let mut point = DesignPoint {
        tiling,
        orders,
        placements,
        slr: vec![0; graph.n_fused],
        overlap,
        bitwidth: BTreeMap::new(),
        last_dim: vec![BTreeMap::new(); graph.n_fused],
    };
    finalize_point(kernel, graph, budget, &mut point);
    point
}

// ---------------------------------------------------------------------------
// Constraint checking
// ---------------------------------------------------------------------------

/// Array partitioning requirement per dimension: the product of the intra
/// trips of the distinct loops indexing that dimension inside the task.
pub fn partition_per_dim(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: TaskId,
    a: ArrayId,
    point: &DesignPoint,
) -> Vec<u64> {
    let accesses = task_accesses(kernel, graph, t, a);
    let ndims = kernel.array(a).dims.len();
    (0..ndims)
        .map(|d| {
            let mut loops: Vec<LoopId> = accesses.iter().map(|acc| acc.index[d].loop_id).collect();
            loops.sort();
            loops.dedup();
            loops.iter().map(|l| point.tiling_of(*l).intra).product::<u64>().max(1)
        })
        .collect()
}

/// DSP demand of one statement under a point: sum over operation classes of
/// `cost(op) * count / II`, times the full unroll factor.
pub fn statement_dsp(
    kernel: &AffineKernel,
    s: StmtId,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> f64 {
    let st = kernel.statement(s);
    let unroll: u64 = st.loops.iter().map(|l| point.tiling_of(*l).intra).product();
    let ii = cfg.ii_of(kernel, s) as f64;
    let per_iter: f64 = st
        .op_counts
        .iter()
        .map(|(op, n)| cfg.dsp_cost(*op) * *n as f64)
        .sum();
    per_iter / ii * unroll as f64
}

/// Evaluate every feasibility rule and report the violations.
pub fn check_constraints(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
    budget: &ResourceBudget,
    cfg: &CostModelConfig,
    max_pad: Option<u64>,
) -> ConstraintReport {
    let mut v: Vec<Violation> = Vec::new();
    let mut push = |c: ConstraintId, subject: String, detail: String| {
        v.push(Violation { constraint: c, subject, detail });
    };

    // Eq 1 (+ structure) and Eq 2 per loop.
    for l in kernel.loop_ids() {
        let t = point.tiling_of(l);
        let ori = kernel.trip_count(l);
        let name = kernel.loop_decl(l).iterator.clone();
        if t.intra * t.inter != t.padded || t.padded < ori || t.intra == 0 {
            push(
                ConstraintId::Eq1,
                name.clone(),
                format!("intra {} * inter {} != padded {} >= {}", t.intra, t.inter, t.padded, ori),
            );
            continue;
        }
        if ori % t.intra != 0 && t.padded % t.intra != 0 {
            push(
                ConstraintId::Eq1,
                name.clone(),
                format!("intra {} divides neither {} nor {}", t.intra, ori, t.padded),
            );
        }
        if let Some(cap) = max_pad {
            if t.padded - ori > cap {
                push(
                    ConstraintId::Eq2,
                    name,
                    format!("padding {} exceeds cap {}", t.padded - ori, cap),
                );
            }
        }
    }

    // FIFO extent consistency: producer and consumer pad a streamed array's
    // dimensions identically.
    for group in padding_classes(kernel, graph) {
        let p0 = point.tiling_of(group[0]).padded;
        for l in &group {
            if point.tiling_of(*l).padded != p0 {
                push(
                    ConstraintId::Eq1,
                    kernel.loop_decl(*l).iterator.clone(),
                    format!(
                        "padded trip {} disagrees with channel peer {} ({})",
                        point.tiling_of(*l).padded,
                        kernel.loop_decl(group[0]).iterator,
                        p0
                    ),
                );
            }
        }
    }

    // FIFO single-delivery.
    if !single_delivery_ok(kernel, graph, point) {
        push(
            ConstraintId::Eq6,
            "fifo".into(),
            "a FIFO-fed array would need the same data delivered twice".into(),
        );
    }

    // Aliased loops must share one tiling (fused members tile jointly).
    for task in &graph.fused_tasks {
        for (from, to) in &task.loop_alias {
            if point.tiling_of(*from) != point.tiling_of(*to) {
                push(
                    ConstraintId::Eq4,
                    format!("{}", task.id),
                    format!(
                        "aliased loops {} and {} tiled differently",
                        kernel.loop_decl(*from).iterator,
                        kernel.loop_decl(*to).iterator
                    ),
                );
            }
        }
        // The chosen order must cover exactly the shared loops.
        let mut want = task.shared_loops.clone();
        let mut got = point.orders[task.id.0].clone();
        want.sort();
        got.sort();
        if want != got {
            push(
                ConstraintId::Eq4,
                format!("{}", task.id),
                "inter-tile order does not cover the shared loops".into(),
            );
        }
    }

    // Eq 5 / Eq 6 per placement, plus coverage of the task's arrays.
    for t in graph.task_ids() {
        let m = point.orders[t.0].len();
        for (a, _) in task_arrays(graph, t) {
            match point.placement(t, a) {
                None => push(
                    ConstraintId::Eq5,
                    format!("{t}/{}", kernel.array(a).name),
                    "array has no transfer/define level".into(),
                ),
                Some(p) => {
                    if p.transfer_level > m || p.define_level > m {
                        push(
                            ConstraintId::Eq5,
                            format!("{t}/{}", kernel.array(a).name),
                            format!(
                                "level out of range (transfer {}, define {}, max {m})",
                                p.transfer_level, p.define_level
                            ),
                        );
                    }
                    if p.define_level > p.transfer_level {
                        push(
                            ConstraintId::Eq6,
                            format!("{t}/{}", kernel.array(a).name),
                            format!(
                                "define level {} deeper than transfer level {}",
                                p.define_level, p.transfer_level
                            ),
                        );
                    }
                }
            }
        }
    }

    // Eq 3: recorded bitwidths must match the rule.
    {
        let mut expect = point.clone();
        finalize_point(kernel, graph, budget, &mut expect);
        for (a, bw) in &expect.bitwidth {
            if point.bitwidth.get(a) != Some(bw) {
                push(
                    ConstraintId::Eq3,
                    kernel.array(*a).name.clone(),
                    format!(
                        "bitwidth {} does not match the burst rule ({} expected)",
                        point.bitwidth.get(a).copied().unwrap_or(0),
                        bw
                    ),
                );
            }
        }
    }

    // Eq 7 and Eq 10 per SLR; Eq 8/9 per array; SLR range per task.
    let mut mem = vec![0u64; budget.n_slr as usize];
    let mut dsp = vec![0f64; budget.n_slr as usize];
    for t in graph.task_ids() {
        let slr = point.slr[t.0];
        if slr >= budget.n_slr {
            push(
                ConstraintId::Slr,
                format!("{t}"),
                format!("slr {} out of range 0..{}", slr, budget.n_slr),
            );
            continue;
        }
        for (a, p) in &point.placements[t.0] {
            let fp = footprint(kernel, graph, t, *a, p.define_level, point);
            mem[slr as usize] +=
                fp.elems * p.buffers as u64 * kernel.array(*a).elem_bits as u64;
            let parts = partition_per_dim(kernel, graph, t, *a, point);
            let total: u64 = parts.iter().product();
            if total > budget.max_part {
                push(
                    ConstraintId::Eq8,
                    format!("{t}/{}", kernel.array(*a).name),
                    format!("partitioning {} exceeds max {}", total, budget.max_part),
                );
            }
        }
        for s in &graph.task(t).statements {
            dsp[slr as usize] += statement_dsp(kernel, *s, point, cfg);
        }
    }
    for slr in 0..budget.n_slr as usize {
        if mem[slr] > budget.mem_bits_per_slr {
            push(
                ConstraintId::Eq7,
                format!("slr{slr}"),
                format!("{} bits on chip, budget {}", mem[slr], budget.mem_bits_per_slr),
            );
        }
        if dsp[slr] > budget.dsp_per_slr {
            push(
                ConstraintId::Eq10,
                format!("slr{slr}"),
                format!("{:.0} DSP, budget {:.0}", dsp[slr], budget.dsp_per_slr),
            );
        }
    }

    ConstraintReport::from_violations(v)
}

// ---------------------------------------------------------------------------
// Enumeration
// ---------------------------------------------------------------------------

/// The structural choice axes of a space, precomputed.
pub struct Space {
    /// Representative loop per class; tiling is enumerated per class.
    pub class_repr: Vec<LoopId>,
    /// Distinct class representatives in enumeration order.
    pub classes: Vec<LoopId>,
    /// Tiling options per class (parallel to `classes`).
    pub tile_options: Vec<Vec<(u64, u64)>>,
    /// Inter-tile order options per task.
    pub order_options: Vec<Vec<Vec<LoopId>>>,
    /// (task, array) pairs with enumerable placements, and their options.
    pub placement_slots: Vec<(TaskId, ArrayId)>,
    pub placement_options: Vec<Vec<(usize, usize)>>,
    pub n_slr: u32,
    pub overlap: bool,
    /// Loop groups whose padded trips must agree (FIFO extent consistency).
    pub padding_classes: Vec<Vec<LoopId>>,
}

impl Space {
    /// Exact cardinality of the cross product.
    pub fn cardinality(&self) -> u128 {
        let mut n: u128 = 1;
        for t in &self.tile_options {
            n = n.saturating_mul(t.len() as u128);
        }
        for o in &self.order_options {
            n = n.saturating_mul(o.len() as u128);
        }
        for p in &self.placement_options {
            n = n.saturating_mul(p.len() as u128);
        }
        n = n.saturating_mul((self.n_slr as u128).pow(self.order_options.len() as u32));
        n
    }
}

/// Precompute the choice axes for a kernel/graph under the given limits.
pub fn build_space(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
    budget: &ResourceBudget,
    limits: &SpaceLimits,
) -> Result<Space, SpaceError> {
    let class_repr = graph.loop_class_repr(kernel.loops.len());
    let mut classes: Vec<LoopId> = Vec::new();
    for l in kernel.loop_ids() {
        let r = class_repr[l.0];
        if !classes.contains(&r) {
            classes.push(r);
        }
    }
    let tile_options: Vec<Vec<(u64, u64)>> = classes
        .iter()
        .map(|l| {
            let ori = kernel.trip_count(*l);
            let cap = limits.max_pad.unwrap_or_else(|| auto_max_pad(ori, budget));
            valid_intra_trips(ori, cap)
        })
        .collect();

    let mut order_options = Vec::new();
    for t in graph.task_ids() {
        order_options.push(intertile_orders(kernel, graph, t, deps)?);
    }

    let mut placement_slots = Vec::new();
    let mut placement_options = Vec::new();
    for t in graph.task_ids() {
        let m = graph.task(t).shared_loops.len();
        for (a, is_input) in task_arrays(graph, t) {
            if !is_input {
                continue; // outputs are pinned to the innermost level
            }
            placement_slots.push((t, a));
            let fifo_fed = fifo_fed_arrays(graph, t).contains(&a);
            let opts = match limits.transfer_policy {
                TransferPolicy::FixedInnermost if fifo_fed => vec![(m, 0)],
                TransferPolicy::FixedInnermost => vec![(m, m)],
                TransferPolicy::Free => {
                    let mut v = Vec::new();
                    for tl in 0..=m {
                        for dl in 0..=tl {
                            v.push((tl, dl));
                        }
                    }
                    v
                }
            };
            placement_options.push(opts);
        }
    }

    Ok(Space {
        class_repr,
        classes,
        tile_options,
        order_options,
        placement_slots,
        placement_options,
        n_slr: budget.n_slr,
        overlap: limits.overlap,
        padding_classes: padding_classes(kernel, graph),
    })
}

/// Materialize one point from per-axis choice indices.
pub fn point_from_choices(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    budget: &ResourceBudget,
    space: &Space,
    tile_choice: &[usize],
    order_choice: &[usize],
    placement_choice: &[usize],
    slr_choice: &[u32],
) -> DesignPoint {
    let mut tiling: Vec<Tiling> = kernel
        .loops
        .iter()
        .map(|l| Tiling::unit(l.trip_count_ori))
        .collect();
    for (ci, repr) in space.classes.iter().enumerate() {
        let (intra, padded) = space.tile_options[ci][tile_choice[ci]];
        let t = Tiling { intra, inter: padded / intra, padded };
        for l in kernel.loop_ids() {
            if space.class_repr[l.0] == *repr {
                tiling[l.0] = t;
            }
        }
    }
    let orders: Vec<Vec<LoopId>> = space
        .order_options
        .iter()
        .zip(order_choice.iter())
        .map(|(opts, i)| opts[*i].clone())
        .collect();

    let mut placements: Vec<BTreeMap<ArrayId, Placement>> = Vec::new();
    for t in graph.task_ids() {
        let m = orders[t.0].len();
        let mut map = BTreeMap::new();
        for (a, _) in task_arrays(graph, t) {
            map.insert(a, Placement { transfer_level: m, define_level: m, buffers: 1 });
        }
        placements.push(map);
    }
    for (i, slot) in space.placement_slots.iter().enumerate() {
        let (tl, dl) = space.placement_options[i][placement_choice[i]];
        placements[slot.0 .0].insert(
            slot.1,
            Placement { transfer_level: tl, define_level: dl, buffers: 1 },
        );
    }

    let mut point = DesignPoint {
        tiling,
        orders,
        placements,
        slr: slr_choice.to_vec(),
        overlap: space.overlap,
        bitwidth: BTreeMap::new(),
        last_dim: vec![BTreeMap::new(); graph.n_fused],
    };
    finalize_point(kernel, graph, budget, &mut point);
    point
}

/// Iterator over every structurally valid point of a space.
pub struct SpaceIter<'a> {
    kernel: &'a AffineKernel,
    graph: &'a FusedTaskGraph,
    budget: &'a ResourceBudget,
    space: &'a Space,
    tile: Vec<usize>,
    order: Vec<usize>,
    placement: Vec<usize>,
    slr: Vec<u32>,
    done: bool,
}

impl<'a> SpaceIter<'a> {
    fn advance(&mut self) {
        // Odometer over (slr, placement, order, tile), innermost first.
        for i in 0..self.slr.len() {
            self.slr[i] += 1;
            if self.slr[i] < self.space.n_slr {
                return;
            }
            self.slr[i] = 0;
        }
        for i in 0..self.placement.len() {
            self.placement[i] += 1;
            if self.placement[i] < self.space.placement_options[i].len() {
                return;
            }
            self.placement[i] = 0;
        }
        for i in 0..self.order.len() {
            self.order[i] += 1;
            if self.order[i] < self.space.order_options[i].len() {
                return;
            }
            self.order[i] = 0;
        }
        for i in 0..self.tile.len() {
            self.tile[i] += 1;
            if self.tile[i] < self.space.tile_options[i].len() {
                return;
            }
            self.tile[i] = 0;
        }
        self.done = true;
    }
}

impl<'a> Iterator for SpaceIter<'a> {
    type Item = DesignPoint;

    fn next(&mut self) -> Option<DesignPoint> {
        loop {
            if self.done {
                return None;
            }
            let point = point_from_choices(
                self.kernel,
                self.graph,
                self.budget,
                self.space,
                &self.tile,
                &self.order,
                &self.placement,
                &self.slr,
            );
            self.advance();
            if padding_consistent(&point, &self.space.padding_classes)
                && single_delivery_ok(self.kernel, self.graph, &point)
            {
                return Some(point);
            }
        }
    }
}

/// Enumerate the design space. Structural invariants hold for every yielded
/// point; feasibility is not pre-filtered.
pub fn enumerate_space<'a>(
    kernel: &'a AffineKernel,
    graph: &'a FusedTaskGraph,
    budget: &'a ResourceBudget,
    space: &'a Space,
    limits: &SpaceLimits,
) -> Result<SpaceIter<'a>, SpaceError> {
    if let Some(maxp) = limits.max_points {
        let n = space.cardinality();
        if n > maxp as u128 {
            return Err(SpaceError::SpaceTooLarge { estimated: n, limit: maxp });
        }
    }
    Ok(SpaceIter {
        kernel,
        graph,
        budget,
        space,
        tile: vec![0; space.tile_options.len()],
        order: vec![0; space.order_options.len()],
        placement: vec![0; space.placement_options.len()],
        slr: vec![0; graph.n_fused],
        done: false,
    })
}

// ---------------------------------------------------------------------------
// FIFO single-delivery
// ---------------------------------------------------------------------------

/// Arrays arriving into a task over inter-task FIFOs.
pub fn fifo_fed_arrays(graph: &FusedTaskGraph, t: TaskId) -> Vec<ArrayId> {
    graph
        .inputs(t)
        .iter()
        .filter(|e| e.kind == ChannelKind::FifoIntertask)
        .map(|e| e.array)
        .collect()
}

/// A FIFO delivers every beat exactly once, so a FIFO-fed array may not be
/// re-transferred: every non-reduction inter-tile loop that does not index
/// the array must sit strictly below the define level and at or above the
/// transfer level, where the refresh gate suppresses the repeat.
pub fn single_delivery_ok(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
) -> bool {
    for t in graph.task_ids() {
        let order = &point.orders[t.0];
        for a in fifo_fed_arrays(graph, t) {
            let Some(p) = point.placement(t, a) else { return false };
            let accesses = task_accesses(kernel, graph, t, a);
            for (q, l) in order.iter().enumerate() {
                let pos = q + 1;
                let indexes = accesses
                    .iter()
                    .any(|acc| acc.index.iter().any(|ix| ix.loop_id == *l));
                if !indexes && !(p.define_level < pos && pos <= p.transfer_level) {
                    return false;
                }
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Channel padding consistency
// ---------------------------------------------------------------------------

/// Loops that must agree on their padded trip count: producer and consumer
/// of a FIFO array see the same off-chip-free extents, so the loops indexing
/// one dimension of the array on both sides pad identically.
pub fn padding_classes(kernel: &AffineKernel, graph: &FusedTaskGraph) -> Vec<Vec<LoopId>> {
    let mut repr: Vec<usize> = (0..kernel.loops.len()).collect();
    fn find(repr: &mut Vec<usize>, x: usize) -> usize {
        if repr[x] != x {
            let r = find(repr, repr[x]);
            repr[x] = r;
        }
        repr[x]
    }
    let join = |repr: &mut Vec<usize>, a: LoopId, b: LoopId| {
        let (x, y) = (find(repr, a.0), find(repr, b.0));
        if x != y {
            repr[x] = y;
        }
    };
    for e in &graph.edges {
        if e.kind != ChannelKind::FifoIntertask {
            continue;
        }
        let (Some(p), Some(c)) = (e.src.task(), e.dst.task()) else { continue };
        let ndims = kernel.array(e.array).dims.len();
        for d in 0..ndims {
            let mut dim_loops: Vec<LoopId> = Vec::new();
            for t in [p, c] {
                for acc in task_accesses(kernel, graph, t, e.array) {
                    dim_loops.push(acc.index[d].loop_id);
                }
            }
            for w in dim_loops.windows(2) {
                join(&mut repr, w[0], w[1]);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<LoopId>> = BTreeMap::new();
    for l in kernel.loop_ids() {
        groups.entry(find(&mut repr, l.0)).or_default().push(l);
    }
    groups.into_values().filter(|g| g.len() > 1).collect()
}

/// All loops of each padding class carry the same padded trip count.
pub fn padding_consistent(point: &DesignPoint, classes: &[Vec<LoopId>]) -> bool {
    classes.iter().all(|group| {
        let p0 = point.tiling_of(group[0]).padded;
        group.iter().all(|l| point.tiling_of(*l).padded == p0)
    })
}

// ---------------------------------------------------------------------------
// Point JSON (named, stable interchange form)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PointDoc {
    tiling: BTreeMap<String, TilingDoc>,
    orders: Vec<Vec<String>>,
    placements: Vec<BTreeMap<String, PlacementDoc>>,
    slr: Vec<u32>,
    overlap: bool,
    bitwidth: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
struct TilingDoc {
    intra: u64,
    inter: u64,
    padded: u64,
}

#[derive(Serialize, Deserialize)]
struct PlacementDoc {
    transfer_level: usize,
    define_level: usize,
    buffers: u32,
}

/// Serialize a point with loop/array names for interchange.
pub fn point_to_json(kernel: &AffineKernel, point: &DesignPoint) -> String {
    let doc = PointDoc {
        tiling: kernel
            .loops
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let t = point.tiling[i];
                (
                    l.iterator.clone(),
                    TilingDoc { intra: t.intra, inter: t.inter, padded: t.padded },
                )
            })
            .collect(),
        orders: point
            .orders
            .iter()
            .map(|o| o.iter().map(|l| kernel.loop_decl(*l).iterator.clone()).collect())
            .collect(),
        placements: point
            .placements
            .iter()
            .map(|m| {
                m.iter()
                    .map(|(a, p)| {
                        (
                            kernel.array(*a).name.clone(),
                            PlacementDoc {
                                transfer_level: p.transfer_level,
                                define_level: p.define_level,
                                buffers: p.buffers,
                            },
                        )
                    })
                    .collect()
            })
            .collect(),
        slr: point.slr.clone(),
        overlap: point.overlap,
        bitwidth: point
            .bitwidth
            .iter()
            .map(|(a, b)| (kernel.array(*a).name.clone(), *b))
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("point serialization cannot fail")
}

/// Parse a point from interchange JSON, resolving names against the kernel.
/// Derived fields are recomputed; structural invariants are NOT checked here
/// (see `solver::import_solution`).
pub fn point_from_json(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    budget: &ResourceBudget,
    text: &str,
) -> Result<DesignPoint, SpaceError> {
    let doc: PointDoc =
        serde_json::from_str(text).map_err(|e| SpaceError::Schema(e.to_string()))?;
    let loop_by_name = |n: &str| {
        kernel
            .loops
            .iter()
            .position(|l| l.iterator == n)
            .map(LoopId)
            .ok_or_else(|| SpaceError::Schema(format!("unknown loop `{n}`")))
    };
    let array_by_name = |n: &str| {
        kernel
            .find_array(n)
            .ok_or_else(|| SpaceError::Schema(format!("unknown array `{n}`")))
    };

    let mut tiling = vec![Tiling::unit(1); kernel.loops.len()];
    for (i, l) in kernel.loops.iter().enumerate() {
        let d = doc
            .tiling
            .get(&l.iterator)
            .ok_or_else(|| SpaceError::Schema(format!("missing tiling for `{}`", l.iterator)))?;
        tiling[i] = Tiling { intra: d.intra, inter: d.inter, padded: d.padded };
    }
    if doc.orders.len() != graph.n_fused
        || doc.placements.len() != graph.n_fused
        || doc.slr.len() != graph.n_fused
    {
        return Err(SpaceError::Schema(format!(
            "point describes {} tasks, graph has {}",
            doc.orders.len(),
            graph.n_fused
        )));
    }
    let mut orders = Vec::new();
    for o in &doc.orders {
        let r: Result<Vec<LoopId>, _> = o.iter().map(|n| loop_by_name(n)).collect();
        orders.push(r?);
    }
    let mut placements = Vec::new();
    for m in &doc.placements {
        let mut map = BTreeMap::new();
        for (n, p) in m {
            map.insert(
                array_by_name(n)?,
                Placement {
                    transfer_level: p.transfer_level,
                    define_level: p.define_level,
                    buffers: p.buffers,
                },
            );
        }
        placements.push(map);
    }
    let mut point = DesignPoint {
        tiling,
        orders,
        placements,
        slr: doc.slr.clone(),
        overlap: doc.overlap,
        bitwidth: BTreeMap::new(),
        last_dim: vec![BTreeMap::new(); graph.n_fused],
    };
    finalize_point(kernel, graph, budget, &mut point);
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> ResourceBudget {
        ResourceBudget {
            name: "test".into(),
            n_slr: 1,
            mem_bits_per_slr: 1 << 34,
            dsp_per_slr: 1e9,
            max_part: 1024,
            burst_sizes: vec![1, 2, 4, 8, 16],
            max_bitwidth_bits: 512,
        }
    }

    #[test]
    fn intra_trips_without_padding_are_divisors() {
        let got: Vec<u64> = valid_intra_trips(190, 0).into_iter().map(|(i, _)| i).collect();
        assert_eq!(got, vec![1, 2, 5, 10, 19, 38, 95, 190]);
    }

    #[test]
    fn intra_trips_with_padding_cover_the_padded_divisors() {
        let got: Vec<(u64, u64)> = valid_intra_trips(190, 2);
        let intras: Vec<u64> = got.iter().map(|(i, _)| *i).collect();
        for d in [1u64, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 192] {
            assert!(intras.contains(&d), "missing intra {d}");
        }
        for d in [5u64, 10, 19, 38, 95, 190] {
            assert!(intras.contains(&d), "missing divisor {d}");
        }
        // Minimal padded trip per intra trip.
        for (i, p) in got {
            assert!(p >= 190 && p <= 192 && p % i == 0);
            if 190 % i == 0 {
                assert_eq!(p, 190);
            }
        }
    }

    #[test]
    fn bitwidth_examples() {
        let b = budget();
        assert_eq!(compute_bitwidth(190, 32, &b), 2);
        assert_eq!(compute_bitwidth(192, 32, &b), 16);
        assert_eq!(compute_bitwidth(32, 32, &b), 16);
        assert_eq!(compute_bitwidth(1, 32, &b), 1);
        // 64-bit elements cap at 8 lanes under a 512-bit bus.
        assert_eq!(compute_bitwidth(192, 64, &b), 8);
    }

    #[test]
    fn buffer_counts() {
        assert_eq!(buffer_count(Usage::ReadOnly, true), 2);
        assert_eq!(buffer_count(Usage::WriteOnly, true), 2);
        assert_eq!(buffer_count(Usage::ReadWrite, true), 3);
        assert_eq!(buffer_count(Usage::ReadWrite, false), 1);
    }

    #[test]
    fn auto_pad_distance_to_burst_multiple() {
        let b = budget();
        assert_eq!(auto_max_pad(190, &b), 2);
        assert_eq!(auto_max_pad(220, &b), 4);
        assert_eq!(auto_max_pad(16, &b), 0);
    }
}
