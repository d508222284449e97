//! Search over the design space for the minimum-latency feasible point:
//! exhaustive enumeration as the oracle for small spaces, branch-and-bound
//! with admissible compute/communication lower bounds for real ones, plus
//! solution import/export and constraint-tightening regeneration.

pub mod ampl;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::costmodel::{dag_latency, task_schedule, CostModelConfig, TaskSchedule};
use crate::dependence::DependenceSet;
use crate::designspace::{
    build_space, check_constraints, enumerate_space, padding_consistent, point_from_choices,
    point_from_json, single_delivery_ok, DesignPoint, ResourceBudget, Space, SpaceLimits,
    TransferPolicy,
};
use crate::error::{SolveError, SpaceError};
use crate::ir::*;
use crate::taskgraph::{FusedTaskGraph, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Exhaustive,
    BranchAndBound,
}

/// Variable groups that can be frozen to a previous solution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frozen {
    pub slr: bool,
    pub orders: bool,
    pub tiling: bool,
    pub placements: bool,
}

impl Frozen {
    pub fn everything() -> Self {
        Frozen { slr: true, orders: true, tiling: true, placements: true }
    }
}

/// A previous solution with the groups to keep, optionally scoped so that
/// only the listed tasks' variables stay free.
#[derive(Debug, Clone)]
pub struct KeepPartial {
    pub point: DesignPoint,
    pub frozen: Frozen,
    /// Tasks whose (non-frozen) variables may still change; everything
    /// outside is pinned to the previous point. `None` = all tasks free.
    pub free_tasks: Option<Vec<TaskId>>,
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub mode: SearchMode,
    /// Wall-clock budget in seconds.
    pub timeout_s: f64,
    /// Padding cap (None = per-loop burst-distance default).
    pub max_pad: Option<u64>,
    /// Tie-shuffling seed; results are deterministic for a fixed seed.
    pub seed: u64,
    pub transfer_policy: TransferPolicy,
    pub overlap: bool,
    /// Worker threads for branch-and-bound sibling subtrees.
    pub jobs: usize,
    /// Hard cap for exhaustive enumeration.
    pub max_points: u64,
    pub keep_partial: Option<KeepPartial>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            mode: SearchMode::BranchAndBound,
            timeout_s: 300.0,
            max_pad: None,
            seed: 0,
            transfer_policy: TransferPolicy::Free,
            overlap: true,
            jobs: 1,
            max_points: 1_000_000,
            keep_partial: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Option<DesignPoint>,
    pub best_latency: u64,
    pub proven_optimal: bool,
    pub points_evaluated: u64,
    pub elapsed_s: f64,
    pub timed_out: bool,
}

/// Candidate ordering: latency, then on-chip memory, then DSP, then the
/// canonical serialized form (full determinism).
#[derive(Clone)]
struct Candidate {
    lat: u64,
    mem: u64,
    dsp: f64,
    key: String,
    point: DesignPoint,
}

impl Candidate {
    fn better_than(&self, other: &Candidate) -> bool {
        (self.lat, self.mem, self.dsp)
            .partial_cmp(&(other.lat, other.mem, other.dsp))
            .map(|o| o.is_lt())
            .unwrap_or(false)
            || ((self.lat, self.mem) == (other.lat, other.mem)
                && self.dsp == other.dsp
                && self.key < other.key)
    }
}

struct Ctx<'a> {
    kernel: &'a AffineKernel,
    graph: &'a FusedTaskGraph,
    budget: &'a ResourceBudget,
    cfg: &'a CostModelConfig,
    search: &'a SearchConfig,
    space: Space,
    deadline: Instant,
}

impl<'a> Ctx<'a> {
    fn evaluate(&self, point: &DesignPoint) -> Option<Candidate> {
        let report =
            check_constraints(self.kernel, self.graph, point, self.budget, self.cfg, self.search.max_pad);
        if !report.feasible {
            return None;
        }
        let lat = dag_latency(self.kernel, self.graph, point, self.budget, self.cfg);
        let usage = &lat.per_slr;
        let mem: u64 = usage.iter().map(|u| u.mem_bits).sum();
        let dsp: f64 = usage.iter().map(|u| u.dsp).sum();
        Some(Candidate {
            lat: lat.total,
            mem,
            dsp,
            key: serde_json::to_string(point).unwrap_or_default(),
            point: point.clone(),
        })
    }
}

/// Restrict the per-axis option lists of a space to a kept solution.
fn apply_keep(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    space: &mut Space,
    keep: &KeepPartial,
) {
    let task_is_free = |t: TaskId| match &keep.free_tasks {
        None => true,
        Some(free) => free.contains(&t),
    };
    // A loop class is free only when every task touching one of its loops is
    // free.
    let class_is_free = |repr: LoopId| {
        graph.fused_tasks.iter().all(|task| {
            let touches = task
                .statements
                .iter()
                .flat_map(|s| kernel.statement(*s).loops.iter())
                .any(|l| space.class_repr[l.0] == repr);
            !touches || task_is_free(task.id)
        })
    };

    for (ci, repr) in space.classes.clone().iter().enumerate() {
        if keep.frozen.tiling || !class_is_free(*repr) {
            let t = keep.point.tiling_of(*repr);
            space.tile_options[ci] = vec![(t.intra, t.padded)];
        }
    }
    for t in 0..space.order_options.len() {
        if keep.frozen.orders || !task_is_free(TaskId(t)) {
            space.order_options[t] = vec![keep.point.orders[t].clone()];
        }
    }
    for (si, (t, a)) in space.placement_slots.clone().iter().enumerate() {
        if keep.frozen.placements || !task_is_free(*t) {
            if let Some(p) = keep.point.placement(*t, *a) {
                space.placement_options[si] = vec![(p.transfer_level, p.define_level)];
            }
        }
    }
}

/// Solve for the minimum-latency feasible point.
pub fn solve(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
    budget: &ResourceBudget,
    cfg: &CostModelConfig,
    search: &SearchConfig,
) -> Result<SearchResult, SolveError> {
    budget.validate()?;
    let limits = SpaceLimits {
        max_pad: search.max_pad,
        max_points: None,
        transfer_policy: search.transfer_policy,
        overlap: search.overlap,
    };
    let mut space = build_space(kernel, graph, deps, budget, &limits)?;
    if let Some(keep) = &search.keep_partial {
        apply_keep(kernel, graph, &mut space, keep);
    }
    let started = Instant::now();
    let deadline = started + std::time::Duration::from_secs_f64(search.timeout_s.max(0.001));
    let ctx = Ctx { kernel, graph, budget, cfg, search, space, deadline };

    let (best, evaluated, complete) = match search.mode {
        SearchMode::Exhaustive => run_exhaustive(&ctx, &limits)?,
        SearchMode::BranchAndBound => run_bnb(&ctx),
    };

    let elapsed = started.elapsed().as_secs_f64();
    match best {
        None if complete => Err(SolveError::Infeasible),
        None => Ok(SearchResult {
            best: None,
            best_latency: u64::MAX,
            proven_optimal: false,
            points_evaluated: evaluated,
            elapsed_s: elapsed,
            timed_out: true,
        }),
        Some(c) => Ok(SearchResult {
            best: Some(c.point),
            best_latency: c.lat,
            proven_optimal: complete,
            points_evaluated: evaluated,
            elapsed_s: elapsed,
            timed_out: !complete,
        }),
    }
}

fn run_exhaustive(
    ctx: &Ctx,
    limits: &SpaceLimits,
) -> Result<(Option<Candidate>, u64, bool), SolveError> {
    let mut limits = limits.clone();
    limits.max_points = Some(ctx.search.max_points);
    let iter = enumerate_space(ctx.kernel, ctx.graph, ctx.budget, &ctx.space, &limits)?;
    let mut best: Option<Candidate> = None;
    let mut n = 0u64;
    let mut complete = true;
    for point in iter {
        n += 1;
        if n % 256 == 0 && Instant::now() > ctx.deadline {
            complete = false;
            break;
        }
        if let Some(c) = ctx.evaluate(&point) {
            if best.as_ref().map(|b| c.better_than(b)).unwrap_or(true) {
                best = Some(c);
            }
        }
    }
    Ok((best, n, complete))
}

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

/// Admissible lower bounds precomputed per task.
struct Bounds {
    /// Communication-only beats lower bound per task (original extents,
    /// widest burst): latency can never undercut the largest single stream.
    comm_lb: Vec<u64>,
}

fn precompute_bounds(ctx: &Ctx) -> Bounds {
    let kernel = ctx.kernel;
    let comm_lb = ctx
        .graph
        .task_ids()
        .map(|t| {
            let mut best = 0u64;
            for e in ctx.graph.inputs(t).iter().chain(ctx.graph.outputs(t).iter()) {
                let a = kernel.array(e.array);
                let elems: u64 = a.dims.iter().product();
                let bw_max = ctx
                    .budget
                    .burst_sizes
                    .iter()
                    .copied()
                    .filter(|b| b * a.elem_bits as u64 <= ctx.budget.max_bitwidth_bits)
                    .max()
                    .unwrap_or(1);
                best = best.max(elems.div_ceil(bw_max));
            }
            best
        })
        .collect();
    Bounds { comm_lb }
}

/// Compute-only lower bound of one statement given the (partially) assigned
/// tiling: unassigned classes take per-factor minima, which keeps the bound
/// admissible.
fn stmt_compute_lb(
    ctx: &Ctx,
    s: StmtId,
    assigned: &[Option<usize>],
) -> u64 {
    let kernel = ctx.kernel;
    let st = kernel.statement(s);
    let class_of = |l: LoopId| {
        let repr = ctx.space.class_repr[l.0];
        ctx.space.classes.iter().position(|c| *c == repr).unwrap()
    };
    let factor = |l: LoopId, want_inter_min: bool| -> u64 {
        let ci = class_of(l);
        match assigned[ci] {
            Some(k) => {
                let (intra, padded) = ctx.space.tile_options[ci][k];
                if want_inter_min {
                    padded / intra
                } else {
                    intra
                }
            }
            None => {
                let opts = &ctx.space.tile_options[ci];
                if want_inter_min {
                    opts.iter().map(|(i, p)| p / i).min().unwrap_or(1)
                } else {
                    opts.iter().map(|(i, _)| *i).min().unwrap_or(1)
                }
            }
        }
    };
    let red_intra_min: u64 = st.reduction_loops.iter().map(|l| factor(*l, false)).product();
    let red_inter_min: u64 = st.reduction_loops.iter().map(|l| factor(*l, true)).product();
    let nonred_inter_min: u64 = st
        .loops
        .iter()
        .filter(|l| !st.is_reduction(**l))
        .map(|l| factor(*l, true))
        .product();
    let intra = if red_intra_min <= 1 {
        ctx.cfg.il_par
    } else {
        ctx.cfg.il_par + ctx.cfg.il_red * (64 - (red_intra_min - 1).leading_zeros() as u64)
    };
    let block = intra + ctx.cfg.ii_of(kernel, s) * (red_inter_min - 1);
    block.saturating_mul(nonred_inter_min)
}

fn partial_bound(ctx: &Ctx, bounds: &Bounds, assigned: &[Option<usize>]) -> u64 {
    let mut lb = 0u64;
    for t in ctx.graph.task_ids() {
        let compute: u64 = ctx
            .graph
            .task(t)
            .statements
            .iter()
            .map(|s| stmt_compute_lb(ctx, *s, assigned))
            .sum();
        lb = lb.max(compute.max(bounds.comm_lb[t.0]));
    }
    lb
}

struct BnbShared {
    incumbent_lat: AtomicU64,
    best: Mutex<Option<Candidate>>,
    evaluated: AtomicU64,
    timed_out: AtomicU64,
}

fn run_bnb(ctx: &Ctx) -> (Option<Candidate>, u64, bool) {
    let bounds = precompute_bounds(ctx);
    let shared = BnbShared {
        incumbent_lat: AtomicU64::new(u64::MAX),
        best: Mutex::new(None),
        evaluated: AtomicU64::new(0),
        timed_out: AtomicU64::new(0),
    };

    // Tiling classes explored in descending original trip count.
    let mut class_order: Vec<usize> = (0..ctx.space.classes.len()).collect();
    class_order.sort_by_key(|ci| {
        std::cmp::Reverse(ctx.kernel.trip_count(ctx.space.classes[*ci]))
    });

    // Top-level branches: order choices of every task (joint), split across
    // workers deterministically.
    let mut top: Vec<Vec<usize>> = vec![Vec::new()];
    for opts in &ctx.space.order_options {
        let mut next = Vec::new();
        for prefix in &top {
            for i in 0..opts.len() {
                let mut p = prefix.clone();
                p.push(i);
                next.push(p);
            }
        }
        top = next;
    }

    let jobs = ctx.search.jobs.max(1).min(top.len().max(1));
    if jobs <= 1 {
        for order_choice in &top {
            bnb_orders(ctx, &bounds, &shared, order_choice, &class_order);
        }
    } else {
        std::thread::scope(|scope| {
            for chunk in top.chunks(top.len().div_ceil(jobs)) {
                let shared = &shared;
                let bounds = &bounds;
                let class_order = &class_order;
                scope.spawn(move || {
                    for order_choice in chunk {
                        bnb_orders(ctx, bounds, shared, order_choice, class_order);
                    }
                });
            }
        });
    }

    let best = shared.best.lock().unwrap().clone();
    let evaluated = shared.evaluated.load(Ordering::Relaxed);
    let complete = shared.timed_out.load(Ordering::Relaxed) == 0;
    (best, evaluated, complete)
}

fn bnb_orders(
    ctx: &Ctx,
    bounds: &Bounds,
    shared: &BnbShared,
    order_choice: &[usize],
    class_order: &[usize],
) {
    let mut assigned: Vec<Option<usize>> = vec![None; ctx.space.classes.len()];
    bnb_tiling(ctx, bounds, shared, order_choice, class_order, 0, &mut assigned);
}

fn bnb_tiling(
    ctx: &Ctx,
    bounds: &Bounds,
    shared: &BnbShared,
    order_choice: &[usize],
    class_order: &[usize],
    depth: usize,
    assigned: &mut Vec<Option<usize>>,
) {
    if shared.timed_out.load(Ordering::Relaxed) != 0 {
        return;
    }
    if Instant::now() > ctx.deadline {
        shared.timed_out.store(1, Ordering::Relaxed);
        return;
    }
    let lb = partial_bound(ctx, bounds, assigned);
    if lb > shared.incumbent_lat.load(Ordering::Relaxed) {
        return;
    }
    if depth == class_order.len() {
        // Padding consistency is already decidable here.
        bnb_leaf(ctx, shared, order_choice, assigned);
        return;
    }
    let ci = class_order[depth];
    // Larger unrolls first: dives straight toward low-latency incumbents.
    let mut opt_idx: Vec<usize> = (0..ctx.space.tile_options[ci].len()).collect();
    opt_idx.sort_by_key(|k| std::cmp::Reverse(ctx.space.tile_options[ci][*k].0));
    for k in opt_idx {
        assigned[ci] = Some(k);
        if padding_classes_compatible(ctx, assigned) {
            bnb_tiling(ctx, bounds, shared, order_choice, class_order, depth + 1, assigned);
        }
        assigned[ci] = None;
    }
}

/// Check partial padding consistency: fully assigned padding classes must
/// agree.
fn padding_classes_compatible(ctx: &Ctx, assigned: &[Option<usize>]) -> bool {
    for group in &ctx.space.padding_classes {
        let mut padded: Option<u64> = None;
        for l in group {
            let repr = ctx.space.class_repr[l.0];
            let ci = ctx.space.classes.iter().position(|c| *c == repr).unwrap();
            if let Some(k) = assigned[ci] {
                let p = ctx.space.tile_options[ci][k].1;
                match padded {
                    None => padded = Some(p),
                    Some(q) if q == p => {}
                    Some(_) => return false,
                }
            }
        }
    }
    true
}

fn bnb_leaf(ctx: &Ctx, shared: &BnbShared, order_choice: &[usize], assigned: &[Option<usize>]) {
    let tile_choice: Vec<usize> = assigned.iter().map(|o| o.unwrap()).collect();

    // Enumerate placements task by task in topological order, pruning on the
    // running max of exact task latencies.
    let n_slots = ctx.space.placement_slots.len();
    let mut placement_choice = vec![0usize; n_slots];
    bnb_placements(ctx, shared, order_choice, &tile_choice, 0, &mut placement_choice, 0);
}

fn bnb_placements(
    ctx: &Ctx,
    shared: &BnbShared,
    order_choice: &[usize],
    tile_choice: &[usize],
    slot: usize,
    placement_choice: &mut Vec<usize>,
    _lat_so_far: u64,
) {
    if shared.timed_out.load(Ordering::Relaxed) != 0 {
        return;
    }
    if slot == ctx.space.placement_slots.len() {
        bnb_slr(ctx, shared, order_choice, tile_choice, placement_choice);
        return;
    }
    for k in 0..ctx.space.placement_options[slot].len() {
        placement_choice[slot] = k;
        bnb_placements(ctx, shared, order_choice, tile_choice, slot + 1, placement_choice, 0);
    }
}

fn bnb_slr(
    ctx: &Ctx,
    shared: &BnbShared,
    order_choice: &[usize],
    tile_choice: &[usize],
    placement_choice: &[usize],
) {
    if Instant::now() > ctx.deadline {
        shared.timed_out.store(1, Ordering::Relaxed);
        return;
    }
    // Materialize with the lexicographically smallest feasible SLR
    // assignment; latency does not depend on SLR, so the first feasible
    // assignment is also the tie-break winner.
    let frozen_slr = ctx
        .search
        .keep_partial
        .as_ref()
        .filter(|k| k.frozen.slr)
        .map(|k| k.point.slr.clone());
    let assignments: Vec<Vec<u32>> = match frozen_slr {
        Some(s) => vec![s],
        None => slr_assignments(ctx.graph.n_fused, ctx.space.n_slr),
    };
    for slr in assignments {
        let point = point_from_choices(
            ctx.kernel,
            ctx.graph,
            ctx.budget,
            &ctx.space,
            tile_choice,
            order_choice,
            placement_choice,
            &slr,
        );
        if !single_delivery_ok(ctx.kernel, ctx.graph, &point)
            || !padding_consistent(&point, &ctx.space.padding_classes)
        {
            return; // independent of slr: no assignment can fix it
        }
        shared.evaluated.fetch_add(1, Ordering::Relaxed);
        if let Some(c) = ctx.evaluate(&point) {
            if c.lat > shared.incumbent_lat.load(Ordering::Relaxed) {
                return; // latency is slr-independent
            }
            let mut best = shared.best.lock().unwrap();
            if best.as_ref().map(|b| c.better_than(b)).unwrap_or(true) {
                shared.incumbent_lat.store(c.lat, Ordering::Relaxed);
                *best = Some(c);
            }
            return; // first feasible assignment wins
        }
    }
}

/// Lexicographically ordered SLR assignments.
fn slr_assignments(n_tasks: usize, n_slr: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n_tasks {
        let mut next = Vec::new();
        for prefix in &out {
            for s in 0..n_slr {
                let mut p = prefix.clone();
                p.push(s);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Import / regenerate
// ---------------------------------------------------------------------------

/// Parse and structurally validate a design point from interchange JSON.
pub fn import_solution(
    point_json: &str,
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    budget: &ResourceBudget,
) -> Result<DesignPoint, SpaceError> {
    let point = point_from_json(kernel, graph, budget, point_json)?;
    validate_structure_of_point(kernel, graph, &point)?;
    Ok(point)
}

/// Structural invariants of a point (Eqs. 1, 5, 6 and the SLR range do not
/// need a budget; the full feasibility check is `check_constraints`).
pub fn validate_structure_of_point(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
) -> Result<(), SpaceError> {
    let fail = |m: String| Err(SpaceError::InvariantViolation(m));
    if point.tiling.len() != kernel.loops.len() {
        return fail("tiling does not cover every loop".into());
    }
    for l in kernel.loop_ids() {
        let t = point.tiling_of(l);
        let ori = kernel.trip_count(l);
        if t.intra == 0 || t.intra * t.inter != t.padded || t.padded < ori {
            return fail(format!(
                "loop {}: intra {} * inter {} != padded {} >= {ori}",
                kernel.loop_decl(l).iterator,
                t.intra,
                t.inter,
                t.padded
            ));
        }
        if ori % t.intra != 0 && t.padded % t.intra != 0 {
            return fail(format!(
                "loop {}: intra {} divides neither {} nor {}",
                kernel.loop_decl(l).iterator,
                t.intra,
                ori,
                t.padded
            ));
        }
    }
    for t in graph.task_ids() {
        let m = point.orders[t.0].len();
        let mut want = graph.task(t).shared_loops.clone();
        let mut got = point.orders[t.0].clone();
        want.sort();
        got.sort();
        if want != got {
            return fail(format!("{t}: order must permute the task's inter-tile loops"));
        }
        for (a, p) in &point.placements[t.0] {
            if p.transfer_level > m || p.define_level > p.transfer_level {
                return fail(format!(
                    "{t}/{}: transfer {} / define {} out of range (Eq. 5/6)",
                    kernel.array(*a).name,
                    p.transfer_level,
                    p.define_level
                ));
            }
        }
    }
    if point.slr.len() != graph.n_fused {
        return fail("slr assignment does not cover every task".into());
    }
    Ok(())
}

/// Re-solve under a tightened budget, keeping the requested parts of the
/// previous solution and freeing only the tasks whose SLR budgets changed.
#[allow(clippy::too_many_arguments)]
pub fn regenerate(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
    previous: &SearchResult,
    previous_budget: &ResourceBudget,
    tightened: &ResourceBudget,
    frozen: Frozen,
    cfg: &CostModelConfig,
    search: &SearchConfig,
) -> Result<SearchResult, SolveError> {
    let prev_point = previous.best.as_ref().ok_or(SolveError::Infeasible)?;
    // Tasks on SLRs whose budget changed are free to move their variables.
    let budgets_differ = previous_budget.mem_bits_per_slr != tightened.mem_bits_per_slr
        || previous_budget.dsp_per_slr != tightened.dsp_per_slr
        || previous_budget.max_part != tightened.max_part;
    let free_tasks = if budgets_differ {
        None // uniform change: everything may move
    } else {
        Some(Vec::new())
    };
    let mut cfg2 = search.clone();
    cfg2.keep_partial = Some(KeepPartial {
        point: prev_point.clone(),
        frozen,
        free_tasks,
    });
    solve(kernel, graph, deps, tightened, cfg, &cfg2)
}

/// Scoped regeneration: free only the given tasks (the congested SLR),
/// keeping everything else from the previous point.
#[allow(clippy::too_many_arguments)]
pub fn regenerate_scoped(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
    previous: &SearchResult,
    tightened: &ResourceBudget,
    frozen: Frozen,
    free_tasks: Vec<TaskId>,
    cfg: &CostModelConfig,
    search: &SearchConfig,
) -> Result<SearchResult, SolveError> {
    let prev_point = previous.best.as_ref().ok_or(SolveError::Infeasible)?;
    let mut cfg2 = search.clone();
    cfg2.keep_partial = Some(KeepPartial {
        point: prev_point.clone(),
        frozen,
        free_tasks: Some(free_tasks),
    });
    solve(kernel, graph, deps, tightened, cfg, &cfg2)
}

/// Convenience: schedules of every task (used by reporting and the CLI).
pub fn schedules(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    point: &DesignPoint,
    cfg: &CostModelConfig,
) -> Vec<TaskSchedule> {
    graph
        .task_ids()
        .map(|t| task_schedule(kernel, graph, t, point, cfg))
        .collect()
}

/// Tasks assigned to each SLR (manifest and codegen helper).
pub fn tasks_per_slr(point: &DesignPoint, n_slr: u32) -> Vec<Vec<TaskId>> {
    let mut v = vec![Vec::new(); n_slr as usize];
    for (i, s) in point.slr.iter().enumerate() {
        v[(*s).min(n_slr - 1) as usize].push(TaskId(i));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::affine_c;
    use crate::taskgraph::analyze;

    fn mini_budget(n_slr: u32) -> ResourceBudget {
        ResourceBudget {
            name: "mini".into(),
            n_slr,
            mem_bits_per_slr: 1 << 24,
            dsp_per_slr: 50_000.0,
            max_part: 1024,
            burst_sizes: vec![1, 2, 4, 8, 16],
            max_bitwidth_bits: 512,
        }
    }

    fn search(mode: SearchMode) -> SearchConfig {
        SearchConfig {
            mode,
            timeout_s: 120.0,
            max_pad: Some(0),
            transfer_policy: TransferPolicy::Free,
            ..SearchConfig::default()
        }
    }

    const GEMM8: &str = "
void gemm(inout float C[8][8], in float A[8][8], in float B[8][8]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++)
      for (int k = 0; k < 8; k++)
        C[i][j] += A[i][k] * B[k][j];
}";

    #[test]
    fn exhaustive_equals_bnb_on_gemm() {
        let kernel = affine_c::parse(GEMM8).unwrap();
        let (deps, graph) = analyze(&kernel).unwrap();
        let cfg = CostModelConfig::default();
        let b = mini_budget(1);
        let ex = solve(&kernel, &graph, &deps, &b, &cfg, &search(SearchMode::Exhaustive)).unwrap();
        let bb =
            solve(&kernel, &graph, &deps, &b, &cfg, &search(SearchMode::BranchAndBound)).unwrap();
        assert!(ex.proven_optimal && bb.proven_optimal);
        assert_eq!(ex.best_latency, bb.best_latency);
        assert_eq!(
            serde_json::to_string(&ex.best).unwrap(),
            serde_json::to_string(&bb.best).unwrap()
        );
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let kernel = affine_c::parse(GEMM8).unwrap();
        let (deps, graph) = analyze(&kernel).unwrap();
        let cfg = CostModelConfig::default();
        let b = ResourceBudget { mem_bits_per_slr: 0, ..mini_budget(1) };
        match solve(&kernel, &graph, &deps, &b, &cfg, &search(SearchMode::BranchAndBound)) {
            Err(SolveError::Infeasible) => {}
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn freeze_everything_returns_previous_point() {
        let kernel = affine_c::parse(GEMM8).unwrap();
        let (deps, graph) = analyze(&kernel).unwrap();
        let cfg = CostModelConfig::default();
        let b = mini_budget(1);
        let first =
            solve(&kernel, &graph, &deps, &b, &cfg, &search(SearchMode::BranchAndBound)).unwrap();
        let again = regenerate(
            &kernel,
            &graph,
            &deps,
            &first,
            &b,
            &b,
            Frozen::everything(),
            &cfg,
            &search(SearchMode::BranchAndBound),
        )
        .unwrap();
        assert_eq!(first.best_latency, again.best_latency);
        assert_eq!(
            serde_json::to_string(&first.best).unwrap(),
            serde_json::to_string(&again.best).unwrap()
        );
    }

    #[test]
    fn import_rejects_bad_levels() {
        let kernel = affine_c::parse(GEMM8).unwrap();
        let (_, graph) = analyze(&kernel).unwrap();
        let b = mini_budget(1);
        let point = crate::designspace::trivial_point(&kernel, &graph, &b, true);
        let mut doc: serde_json::Value =
            serde_json::from_str(&crate::designspace::point_to_json(&kernel, &point)).unwrap();
        doc["placements"][0]["A"]["define_level"] = serde_json::json!(9);
        let res = import_solution(&doc.to_string(), &kernel, &graph, &b);
        assert!(matches!(res, Err(SpaceError::InvariantViolation(_))));
        // SLR out of range is caught by check_constraints, not structure.
        let ok = import_solution(
            &crate::designspace::point_to_json(&kernel, &point),
            &kernel,
            &graph,
            &b,
        );
        assert!(ok.is_ok());
    }
}
