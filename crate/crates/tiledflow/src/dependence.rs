//! Exact data-dependence analysis over the restricted affine class, plus the
//! legality queries (distribution, fusion, permutation) the rest of the
//! pipeline relies on.
//!
//! Subscripts are `iterator + constant`, so the conflict system for a pair of
//! accesses is a set of unit-coefficient difference equations. We solve it
//! with potentials over the coupling graph: every connected component pins
//! its members to a root up to a constant offset, which makes distances per
//! shared loop either a fixed constant or an independent interval. The rare
//! patterns that correlate two loops (transposed self-writes and the like)
//! fall back to bounded enumeration so the result stays exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ir::*;

/// Dependence classes over a common array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepKind {
    Flow,
    Anti,
    Output,
}

/// Achievable distance values for one shared loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistRange {
    pub lo: i64,
    pub hi: i64,
}

impl DistRange {
    fn fixed(v: i64) -> Self {
        DistRange { lo: v, hi: v }
    }
    pub fn is_fixed(&self) -> bool {
        self.lo == self.hi
    }
    fn contains_zero(&self) -> bool {
        self.lo <= 0 && 0 <= self.hi
    }
    fn can_be_positive(&self) -> bool {
        self.hi >= 1
    }
    fn can_be_negative(&self) -> bool {
        self.lo <= -1
    }
}

/// The realized distance set of one access pair: either an independent box
/// per shared loop, or (for coupled systems) the explicit vector set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistProfile {
    Box(Vec<DistRange>),
    Explicit(Vec<Vec<i64>>),
}

/// One dependence edge, summarizing every conflicting access pair between two
/// statements on one array with one kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepEdge {
    pub src: StmtId,
    pub dst: StmtId,
    pub array: ArrayId,
    pub kind: DepKind,
    /// Loops the distance vector ranges over (common nest prefix).
    pub shared_loops: Vec<LoopId>,
    /// Lexicographically minimal realized distance (all zeros when the edge
    /// is loop independent).
    pub distance: Vec<i64>,
    pub loop_independent: bool,
    /// Full realized structure, one entry per conflicting access pair.
    pub profiles: Vec<DistProfile>,
}

/// All dependences of a kernel.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DependenceSet {
    pub edges: Vec<DepEdge>,
}

impl DependenceSet {
    pub fn between(&self, a: StmtId, b: StmtId) -> impl Iterator<Item = &DepEdge> {
        self.edges.iter().filter(move |e| e.src == a && e.dst == b)
    }

    pub fn self_edges(&self, s: StmtId) -> impl Iterator<Item = &DepEdge> {
        self.edges.iter().filter(move |e| e.src == s && e.dst == s)
    }

    /// (src, dst, array, kind, min distance, loop_independent) summaries,
    /// the canonical comparison form used against the brute-force oracle.
    pub fn summaries(&self) -> Vec<(StmtId, StmtId, ArrayId, DepKind, Vec<i64>, bool)> {
        let mut v: Vec<_> = self
            .edges
            .iter()
            .map(|e| (e.src, e.dst, e.array, e.kind, e.distance.clone(), e.loop_independent))
            .collect();
        v.sort();
        v
    }
}

/// Execution rank of every statement: nests execute in order, members of a
/// nest share their loop prefix and run in member order at equal iterations.
fn exec_ranks(kernel: &AffineKernel) -> Vec<(usize, usize)> {
    let mut ranks = vec![(0usize, 0usize); kernel.statements.len()];
    for (ni, nest) in kernel.nests.iter().enumerate() {
        for (mi, s) in nest.iter().enumerate() {
            ranks[s.0] = (ni, mi);
        }
    }
    ranks
}

/// Shared loops of two statements for distance purposes: the common loop
/// prefix when they belong to the same nest group, empty otherwise.
fn dep_shared_loops(kernel: &AffineKernel, ranks: &[(usize, usize)], a: StmtId, b: StmtId) -> Vec<LoopId> {
    if ranks[a.0].0 != ranks[b.0].0 {
        return Vec::new();
    }
    kernel.shared_loops(a, b)
}

// ---------------------------------------------------------------------------
// Per-access-pair conflict solving
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Var {
    Src(LoopId),
    Dst(LoopId),
}

struct PairSystem {
    vars: Vec<Var>,
    trips: Vec<i64>,
    /// (a, b, w) meaning val(a) - val(b) = w.
    eqs: Vec<(usize, usize, i64)>,
}

enum PairOutcome {
    Infeasible,
    Box(Vec<DistRange>),
    NeedsEnumeration,
}

impl PairSystem {
    fn build(
        kernel: &AffineKernel,
        src: &Statement,
        dst: &Statement,
        a_src: &ArrayAccess,
        a_dst: &ArrayAccess,
    ) -> Self {
        let mut vars = Vec::new();
        let mut trips = Vec::new();
        let mut index = BTreeMap::new();
        for l in &src.loops {
            index.insert((true, *l), vars.len());
            vars.push(Var::Src(*l));
            trips.push(kernel.trip_count(*l) as i64);
        }
        for l in &dst.loops {
            index.insert((false, *l), vars.len());
            vars.push(Var::Dst(*l));
            trips.push(kernel.trip_count(*l) as i64);
        }
        let mut eqs = Vec::new();
        for (e_src, e_dst) in a_src.index.iter().zip(a_dst.index.iter()) {
            let a = index[&(true, e_src.loop_id)];
            let b = index[&(false, e_dst.loop_id)];
            // x + c1 = y + c2  =>  x - y = c2 - c1
            eqs.push((a, b, e_dst.offset - e_src.offset));
        }
        PairSystem { vars, trips, eqs }
    }

    /// Solve by potentials. Returns the distance box over `shared` or asks
    /// for enumeration when two shared loops end up correlated.
    fn solve(&self, shared: &[LoopId]) -> PairOutcome {
        let n = self.vars.len();
        let mut comp = vec![usize::MAX; n];
        let mut phi = vec![0i64; n];
        let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        for (a, b, w) in &self.eqs {
            // val(a) - val(b) = w
            adj[*a].push((*b, -*w));
            adj[*b].push((*a, *w));
        }
        let mut ncomp = 0;
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = ncomp;
            phi[start] = 0;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                for (v, w) in adj[u].clone() {
                    // val(v) = val(u) + w
                    let cand = phi[u] + w;
                    if comp[v] == usize::MAX {
                        comp[v] = ncomp;
                        phi[v] = cand;
                        stack.push(v);
                    } else if phi[v] != cand {
                        return PairOutcome::Infeasible;
                    }
                }
            }
            ncomp += 1;
        }

        // Root interval per component: values of the root for which every
        // member stays inside [0, trip-1].
        let mut root_lo = vec![i64::MIN; ncomp];
        let mut root_hi = vec![i64::MAX; ncomp];
        for v in 0..n {
            let c = comp[v];
            root_lo[c] = root_lo[c].max(-phi[v]);
            root_hi[c] = root_hi[c].min(self.trips[v] - 1 - phi[v]);
        }
        if (0..ncomp).any(|c| root_lo[c] > root_hi[c]) {
            return PairOutcome::Infeasible;
        }

        let var_of = |v: Var| self.vars.iter().position(|x| *x == v);
        // A loop is "fixed" when both of its variables share a component.
        let is_fixed = |l: LoopId| -> Option<bool> {
            let (x, y) = (var_of(Var::Src(l))?, var_of(Var::Dst(l))?);
            Some(comp[x] == comp[y])
        };
        // Correlation check: a component may touch at most one non-fixed
        // shared loop, otherwise the distance set is not a box.
        let mut touched: Vec<Option<LoopId>> = vec![None; ncomp];
        for &l in shared {
            if is_fixed(l) == Some(true) {
                continue;
            }
            for v in [Var::Src(l), Var::Dst(l)] {
                if let Some(i) = var_of(v) {
                    match touched[comp[i]] {
                        None => touched[comp[i]] = Some(l),
                        Some(prev) if prev == l => {}
                        Some(_) => return PairOutcome::NeedsEnumeration,
                    }
                }
            }
        }

        let mut ranges = Vec::with_capacity(shared.len());
        for &l in shared {
            let x = var_of(Var::Src(l)).expect("shared loop encloses src");
            let y = var_of(Var::Dst(l)).expect("shared loop encloses dst");
            if comp[x] == comp[y] {
                ranges.push(DistRange::fixed(phi[y] - phi[x]));
            } else {
                let (xl, xh) = (root_lo[comp[x]] + phi[x], root_hi[comp[x]] + phi[x]);
                let (yl, yh) = (root_lo[comp[y]] + phi[y], root_hi[comp[y]] + phi[y]);
                ranges.push(DistRange { lo: yl - xh, hi: yh - xl });
            }
        }
        PairOutcome::Box(ranges)
    }

    /// Exhaustive solve for the correlated cases: enumerate source and
    /// destination iterations consistent with the equations.
    fn enumerate(&self, shared: &[LoopId], src_before_dst_at_zero: bool) -> Option<Vec<Vec<i64>>> {
        let n = self.vars.len();
        let work: u128 = self.trips.iter().map(|t| *t as u128).product();
        if work > 1 << 22 {
            return None;
        }
        let mut out = Vec::new();
        let mut vals = vec![0i64; n];
        enumerate_rec(0, &mut vals, self, shared, src_before_dst_at_zero, &mut out);
        out.sort();
        out.dedup();
        Some(out)
    }
}

fn enumerate_rec(
    v: usize,
    vals: &mut Vec<i64>,
    sys: &PairSystem,
    shared: &[LoopId],
    src_first: bool,
    out: &mut Vec<Vec<i64>>,
) {
    if v == sys.vars.len() {
        for (a, b, w) in &sys.eqs {
            if vals[*a] - vals[*b] != *w {
                return;
            }
        }
        let var_of = |var: Var| sys.vars.iter().position(|x| *x == var).unwrap();
        let delta: Vec<i64> = shared
            .iter()
            .map(|l| vals[var_of(Var::Dst(*l))] - vals[var_of(Var::Src(*l))])
            .collect();
        let lex = lex_sign(&delta);
        if lex > 0 || (lex == 0 && src_first) {
            out.push(delta);
        }
        return;
    }
    for x in 0..sys.trips[v] {
        vals[v] = x;
        enumerate_rec(v + 1, vals, sys, shared, src_first, out);
    }
}

fn lex_sign(v: &[i64]) -> i64 {
    for x in v {
        if *x != 0 {
            return x.signum();
        }
    }
    0
}

/// Does the box contain a lexicographically positive vector?
fn box_has_lex_positive(ranges: &[DistRange]) -> bool {
    for r in ranges {
        if r.can_be_positive() {
            return true;
        }
        if !r.contains_zero() {
            // Forced negative before any position that could go positive.
            return false;
        }
    }
    false
}

/// Lexicographic minimum among the lex-positive vectors of the box, if any:
/// zeros as long as possible, the last possible position minimally positive,
/// then everything after at its lower bound.
fn box_lex_min_positive(ranges: &[DistRange]) -> Option<Vec<i64>> {
    let mut best_t = None;
    for (t, r) in ranges.iter().enumerate() {
        if r.can_be_positive() {
            best_t = Some(t);
        }
        if !r.contains_zero() {
            break;
        }
    }
    let t = best_t?;
    let mut v = vec![0i64; ranges.len()];
    v[t] = ranges[t].lo.max(1);
    for (i, r) in ranges.iter().enumerate().skip(t + 1) {
        v[i] = r.lo;
    }
    Some(v)
}

struct PairResult {
    profile: DistProfile,
    loop_independent: bool,
    carried_min: Option<Vec<i64>>,
}

/// Full realized-distance analysis for one ordered access pair.
fn analyze_pair(
    kernel: &AffineKernel,
    src: StmtId,
    dst: StmtId,
    a_src: &ArrayAccess,
    a_dst: &ArrayAccess,
    shared: &[LoopId],
    src_first_at_zero: bool,
) -> Option<PairResult> {
    let sys = PairSystem::build(kernel, kernel.statement(src), kernel.statement(dst), a_src, a_dst);
    match sys.solve(shared) {
        PairOutcome::Infeasible => None,
        PairOutcome::Box(ranges) => {
            let li = src_first_at_zero && ranges.iter().all(DistRange::contains_zero);
            let carried = box_has_lex_positive(&ranges);
            if !li && !carried {
                return None;
            }
            let carried_min = if carried { box_lex_min_positive(&ranges) } else { None };
            Some(PairResult { profile: DistProfile::Box(ranges), loop_independent: li, carried_min })
        }
        PairOutcome::NeedsEnumeration => {
            let vecs = sys
                .enumerate(shared, src_first_at_zero)
                .expect("coupled dependence system too large to enumerate");
            if vecs.is_empty() {
                return None;
            }
            let li = vecs.iter().any(|v| lex_sign(v) == 0);
            let carried_min = vecs.iter().filter(|v| lex_sign(v) > 0).min().cloned();
            Some(PairResult { profile: DistProfile::Explicit(vecs), loop_independent: li, carried_min })
        }
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Compute the exact dependence set of a kernel.
pub fn compute_dependences(kernel: &AffineKernel) -> DependenceSet {
    let ranks = exec_ranks(kernel);
    let mut merged: BTreeMap<(StmtId, StmtId, ArrayId, DepKind), DepEdge> = BTreeMap::new();

    let stmts: Vec<StmtId> = kernel.stmt_ids().collect();
    for &s in &stmts {
        for &t in &stmts {
            let shared = dep_shared_loops(kernel, &ranks, s, t);
            // Pairs of accesses on the same array, at least one write.
            let st_s = kernel.statement(s);
            let st_t = kernel.statement(t);
            let mut pairs: Vec<(&ArrayAccess, &ArrayAccess, DepKind)> = Vec::new();
            for r in &st_t.reads {
                if r.array == st_s.write.array {
                    pairs.push((&st_s.write, r, DepKind::Flow));
                }
            }
            for r in &st_s.reads {
                if r.array == st_t.write.array {
                    pairs.push((r, &st_t.write, DepKind::Anti));
                }
            }
            if st_s.write.array == st_t.write.array {
                pairs.push((&st_s.write, &st_t.write, DepKind::Output));
            }
            for (a_src, a_dst, kind) in pairs {
                // Intra-iteration order: reads evaluate before the write of
                // the same statement (so only anti pairs can be loop
                // independent within one statement); across statements,
                // execution rank. A statement's single write never pairs
                // with itself at equal iterations.
                let src_first_at_zero = if s == t {
                    matches!(kind, DepKind::Anti)
                } else {
                    ranks[s.0] < ranks[t.0]
                };
                let Some(res) = analyze_pair(kernel, s, t, a_src, a_dst, &shared, src_first_at_zero)
                else {
                    continue;
                };
                let li = res.loop_independent;
                let carried = res.carried_min.clone();
                if !li && carried.is_none() {
                    continue;
                }
                let min_dist = if li { vec![0; shared.len()] } else { carried.clone().unwrap() };
                let entry = merged.entry((s, t, a_src.array, kind)).or_insert_with(|| DepEdge {
                    src: s,
                    dst: t,
                    array: a_src.array,
                    kind,
                    shared_loops: shared.clone(),
                    distance: min_dist.clone(),
                    loop_independent: false,
                    profiles: Vec::new(),
                });
                entry.loop_independent |= li;
                if entry.loop_independent {
                    entry.distance = vec![0; shared.len()];
                } else if min_dist < entry.distance {
                    entry.distance = min_dist;
                }
                entry.profiles.push(res.profile);
            }
        }
    }
    DependenceSet { edges: merged.into_values().collect() }
}

/// Is the realized cone of `profile` entirely lex-nonnegative when the
/// shared loops are visited in `order`?
fn profile_safe_under(profile: &DistProfile, shared: &[LoopId], order: &[LoopId]) -> bool {
    let pos_in_shared =
        |l: LoopId| shared.iter().position(|x| *x == l).expect("order must cover shared loops");
    match profile {
        DistProfile::Explicit(vecs) => {
            for v in vecs {
                let permuted: Vec<i64> = order.iter().map(|l| v[pos_in_shared(*l)]).collect();
                if lex_sign(&permuted) < 0 {
                    return false;
                }
            }
            true
        }
        DistProfile::Box(ranges) => {
            // Search for a realizable counterexample: zero prefix in `order`,
            // a negative entry at position q, and an original-order earlier
            // positive entry drawn from the suffix to keep the vector
            // realized (realized means lex-positive in original order, or
            // zero, and zero is never a counterexample).
            for q in 0..order.len() {
                let m = pos_in_shared(order[q]);
                if !ranges[m].can_be_negative() {
                    if !ranges[m].contains_zero() {
                        break; // forced positive: no later q can lead
                    }
                    continue;
                }
                let prefix_ok = order[..q].iter().all(|l| ranges[pos_in_shared(*l)].contains_zero());
                if !prefix_ok {
                    break;
                }
                let witness = order[q + 1..].iter().any(|l| {
                    let p = pos_in_shared(*l);
                    p < m && ranges[p].can_be_positive()
                });
                if witness {
                    return false;
                }
                if !ranges[m].contains_zero() {
                    break;
                }
            }
            true
        }
    }
}

/// Accumulator self-dependences are reassociable: all fixed entries zero and
/// every loose loop is a reduction loop of the statement.
fn profile_is_reduction_exempt(
    profile: &DistProfile,
    shared: &[LoopId],
    stmt: &Statement,
) -> bool {
    match profile {
        DistProfile::Box(ranges) => ranges.iter().zip(shared.iter()).all(|(r, l)| {
            if r.is_fixed() {
                r.lo == 0
            } else {
                stmt.is_reduction(*l)
            }
        }),
        DistProfile::Explicit(vecs) => vecs.iter().all(|v| {
            v.iter().zip(shared.iter()).all(|(d, l)| *d == 0 || stmt.is_reduction(*l))
        }),
    }
}

/// All dependence-legal orderings of a statement's loops. Self-dependences on
/// the accumulator across reduction loops are treated as reassociable.
pub fn legal_permutations(
    kernel: &AffineKernel,
    stmt: StmtId,
    deps: &DependenceSet,
) -> Vec<Vec<LoopId>> {
    let st = kernel.statement(stmt);
    let relevant: Vec<&DepEdge> = deps
        .self_edges(stmt)
        .filter(|e| {
            !(e.array == st.write.array
                && e.profiles.iter().all(|p| profile_is_reduction_exempt(p, &e.shared_loops, st)))
        })
        .collect();
    permutations(&st.loops)
        .into_iter()
        .filter(|order| {
            relevant.iter().all(|e| {
                // Self edges share the full loop list; restrict the order to
                // the edge's shared loops (always all of them here).
                let sub: Vec<LoopId> =
                    order.iter().copied().filter(|l| e.shared_loops.contains(l)).collect();
                e.profiles.iter().all(|p| profile_safe_under(p, &e.shared_loops, &sub))
            })
        })
        .collect()
}

/// Like [`legal_permutations`] but for an explicit order over a loop subset,
/// used by fused-task permutation checks.
pub fn order_is_legal(
    kernel: &AffineKernel,
    stmt: StmtId,
    full_order: &[LoopId],
    deps: &DependenceSet,
) -> bool {
    let st = kernel.statement(stmt);
    deps.self_edges(stmt)
        .filter(|e| {
            !(e.array == st.write.array
                && e.profiles.iter().all(|p| profile_is_reduction_exempt(p, &e.shared_loops, st)))
        })
        .all(|e| {
            let sub: Vec<LoopId> =
                full_order.iter().copied().filter(|l| e.shared_loops.contains(l)).collect();
            e.profiles.iter().all(|p| profile_safe_under(p, &e.shared_loops, &sub))
        })
}

fn permutations(items: &[LoopId]) -> Vec<Vec<LoopId>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    let mut used = vec![false; items.len()];
    fn rec(
        items: &[LoopId],
        used: &mut Vec<bool>,
        cur: &mut Vec<LoopId>,
        out: &mut Vec<Vec<LoopId>>,
    ) {
        if cur.len() == items.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..items.len() {
            if !used[i] {
                used[i] = true;
                cur.push(items[i]);
                rec(items, used, cur, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    rec(items, &mut used, &mut cur, &mut out);
    out
}

/// Output-stationary fusion legality: identical output array written at zero
/// offset, non-reduction loops aligned one-to-one through the output
/// subscripts with matching trip counts, and no dependence path between the
/// two statements through a third one (which would create a cycle at task
/// granularity).
pub fn fusion_legal(kernel: &AffineKernel, a: StmtId, b: StmtId, deps: &DependenceSet) -> bool {
    if a == b {
        return true;
    }
    let sa = kernel.statement(a);
    let sb = kernel.statement(b);
    if sa.write.array != sb.write.array {
        return false;
    }
    if sa.write.index.iter().any(|ix| ix.offset != 0)
        || sb.write.index.iter().any(|ix| ix.offset != 0)
    {
        return false;
    }
    // One-to-one merge of the non-reduction loops through the output dims.
    for st in [sa, sb] {
        let mut idx_loops: Vec<LoopId> = st.write.index.iter().map(|ix| ix.loop_id).collect();
        idx_loops.sort();
        idx_loops.dedup();
        let mut nonred = st.non_reduction_loops();
        nonred.sort();
        if idx_loops != nonred {
            return false;
        }
    }
    for (ia, ib) in sa.write.index.iter().zip(sb.write.index.iter()) {
        if kernel.trip_count(ia.loop_id) != kernel.trip_count(ib.loop_id) {
            return false;
        }
    }
    // No third statement on a dependence path between them.
    !has_indirect_path(kernel, deps, a, b) && !has_indirect_path(kernel, deps, b, a)
}

fn has_indirect_path(kernel: &AffineKernel, deps: &DependenceSet, from: StmtId, to: StmtId) -> bool {
    let n = kernel.statements.len();
    let mut seen = vec![false; n];
    let mut stack: Vec<StmtId> = deps
        .edges
        .iter()
        .filter(|e| e.src == from && e.dst != to && e.dst != from)
        .map(|e| e.dst)
        .collect();
    while let Some(u) = stack.pop() {
        if seen[u.0] {
            continue;
        }
        seen[u.0] = true;
        for e in deps.edges.iter().filter(|e| e.src == u) {
            if e.dst == to {
                return true;
            }
            if !seen[e.dst.0] && e.dst != from {
                stack.push(e.dst);
            }
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Brute-force oracle (test support): enumerate every conflicting access pair.
// Independent of the symbolic path above by construction.
// ---------------------------------------------------------------------------

pub mod oracle {
    use super::*;

    /// Dynamic-access summary identical in shape to
    /// [`DependenceSet::summaries`].
    pub fn summaries(
        kernel: &AffineKernel,
    ) -> Vec<(StmtId, StmtId, ArrayId, DepKind, Vec<i64>, bool)> {
        let ranks = super::exec_ranks(kernel);

        // Bucket every dynamic access by touched element.
        // Entry: (stmt, iter values per stmt loop, access index: 0 = write,
        // 1.. = reads, is_write)
        type Inst = (StmtId, Vec<i64>, usize, bool);
        let mut buckets: BTreeMap<(ArrayId, Vec<i64>), Vec<Inst>> = BTreeMap::new();
        for s in kernel.stmt_ids() {
            let st = kernel.statement(s);
            let trips: Vec<i64> = st.loops.iter().map(|l| kernel.trip_count(*l) as i64).collect();
            let mut iter = vec![0i64; trips.len()];
            loop {
                let accesses = std::iter::once((&st.write, true))
                    .chain(st.reads.iter().map(|r| (r, false)));
                for (ai, (acc, is_write)) in accesses.enumerate() {
                    let coords: Vec<i64> = acc
                        .index
                        .iter()
                        .map(|ix| {
                            let p = st.loops.iter().position(|l| *l == ix.loop_id).unwrap();
                            iter[p] + ix.offset
                        })
                        .collect();
                    buckets
                        .entry((acc.array, coords))
                        .or_default()
                        .push((s, iter.clone(), ai, is_write));
                }
                // Odometer.
                let mut d = trips.len();
                loop {
                    if d == 0 {
                        break;
                    }
                    d -= 1;
                    iter[d] += 1;
                    if iter[d] < trips[d] {
                        break;
                    }
                    iter[d] = 0;
                    if d == 0 {
                        d = usize::MAX;
                        break;
                    }
                }
                if d == usize::MAX || trips.is_empty() {
                    break;
                }
            }
        }

        // Execution order of two dynamic instances.
        let before = |x: &Inst, y: &Inst| -> bool {
            let shared = super::dep_shared_loops(kernel, &ranks, x.0, y.0);
            for l in &shared {
                let px = kernel.statement(x.0).loops.iter().position(|q| q == l).unwrap();
                let py = kernel.statement(y.0).loops.iter().position(|q| q == l).unwrap();
                if x.1[px] != y.1[py] {
                    return x.1[px] < y.1[py];
                }
            }
            if x.0 != y.0 {
                return ranks[x.0 .0] < ranks[y.0 .0];
            }
            if x.1 != y.1 {
                return x.1 < y.1;
            }
            // Same statement instance: reads before the write.
            !x.3 && y.3
        };

        let mut best: BTreeMap<(StmtId, StmtId, ArrayId, DepKind), (Vec<i64>, bool)> =
            BTreeMap::new();
        for ((array, _), insts) in &buckets {
            for x in insts {
                for y in insts {
                    if !x.3 && !y.3 {
                        continue;
                    }
                    if x.0 == y.0 && x.1 == y.1 && x.2 == y.2 {
                        continue; // same dynamic access
                    }
                    if !before(x, y) {
                        continue;
                    }
                    let kind = match (x.3, y.3) {
                        (true, false) => DepKind::Flow,
                        (false, true) => DepKind::Anti,
                        (true, true) => DepKind::Output,
                        (false, false) => unreachable!(),
                    };
                    let shared = super::dep_shared_loops(kernel, &ranks, x.0, y.0);
                    let dist: Vec<i64> = shared
                        .iter()
                        .map(|l| {
                            let px =
                                kernel.statement(x.0).loops.iter().position(|q| q == l).unwrap();
                            let py =
                                kernel.statement(y.0).loops.iter().position(|q| q == l).unwrap();
                            y.1[py] - x.1[px]
                        })
                        .collect();
                    let li = super::lex_sign(&dist) == 0;
                    let key = (x.0, y.0, *array, kind);
                    match best.get_mut(&key) {
                        None => {
                            best.insert(key, (dist, li));
                        }
                        Some((d, l)) => {
                            *l |= li;
                            if li {
                                *d = vec![0; d.len()];
                            } else if !*l && dist < *d {
                                *d = dist;
                            }
                        }
                    }
                }
            }
        }
        let mut v: Vec<_> = best
            .into_iter()
            .map(|((s, t, a, k), (d, li))| (s, t, a, k, d, li))
            .collect();
        v.sort();
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::affine_c;

    const GEMM: &str = "
void gemm(float C[4][4], float A[4][4], float B[4][4]) {
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      for (int k = 0; k < 4; k++)
        C[i][j] += A[i][k] * B[k][j];
}";

    #[test]
    fn gemm_self_dependence_distance() {
        let k = affine_c::parse(GEMM).unwrap();
        let deps = compute_dependences(&k);
        let flow = deps
            .edges
            .iter()
            .find(|e| e.kind == DepKind::Flow && e.src == e.dst)
            .expect("gemm has a self flow dependence");
        assert_eq!(flow.distance, vec![0, 0, 1]);
        assert!(!flow.loop_independent);
        let output = deps
            .edges
            .iter()
            .find(|e| e.kind == DepKind::Output && e.src == e.dst)
            .unwrap();
        assert_eq!(output.distance, vec![0, 0, 1]);
    }

    #[test]
    fn gemm_all_six_permutations_legal() {
        let k = affine_c::parse(GEMM).unwrap();
        let deps = compute_dependences(&k);
        let perms = legal_permutations(&k, StmtId(0), &deps);
        assert_eq!(perms.len(), 6);
    }

    #[test]
    fn madd_has_no_loop_carried_dependence() {
        let src = "
void madd(float C[4][4], float A[4][4], float B[4][4]) {
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      C[i][j] = A[i][j] + B[i][j];
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        assert!(deps.edges.iter().all(|e| e.loop_independent || e.src != e.dst));
        assert!(deps.edges.is_empty());
    }

    #[test]
    fn symbolic_matches_bruteforce_on_gemm() {
        let k = affine_c::parse(GEMM).unwrap();
        let deps = compute_dependences(&k);
        assert_eq!(deps.summaries(), oracle::summaries(&k));
    }

    #[test]
    fn stencil_offset_dependence() {
        let src = "
void sweep(float A[6][6], float B[6][6]) {
  for (int i = 0; i < 5; i++)
    for (int j = 0; j < 6; j++)
      A[i+1][j] = A[i][j] + B[i][j];
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        assert_eq!(deps.summaries(), oracle::summaries(&k));
        let flow = deps.edges.iter().find(|e| e.kind == DepKind::Flow).unwrap();
        assert_eq!(flow.distance, vec![1, 0]);
        // (i,j) order is forced: permuting would reverse the carried flow?
        // Distance (1,0) permuted to (0,1) stays lex-positive, so both orders
        // remain legal.
        let perms = legal_permutations(&k, StmtId(0), &deps);
        assert_eq!(perms.len(), 2);
    }

    #[test]
    fn backward_offset_restricts_permutation() {
        // A[i][j+1] written, A[i+1][j] read: distance (1, -1); swapping the
        // loops would make it (-1, 1), lexicographically negative.
        let src = "
void f(float A[8][8], float B[8][8]) {
  for (int i = 0; i < 7; i++)
    for (int j = 0; j < 7; j++)
      A[i][j+1] = A[i+1][j] + B[i][j];
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        assert_eq!(deps.summaries(), oracle::summaries(&k));
        let perms = legal_permutations(&k, StmtId(0), &deps);
        assert_eq!(perms, vec![vec![LoopId(0), LoopId(1)]]);
    }

    #[test]
    fn transposed_write_read_uses_enumeration_and_matches_oracle() {
        let src = "
void t(float A[5][5]) {
  for (int i = 0; i < 5; i++)
    for (int j = 0; j < 5; j++)
      A[i][j] += A[j][i];
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        assert_eq!(deps.summaries(), oracle::summaries(&k));
    }

    #[test]
    fn fusion_requires_identical_output() {
        let src = "
void two(float E[4][4], float F[4][4], float A[4][4]) {
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      E[i][j] = A[i][j];
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      F[i][j] = A[i][j];
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        assert!(!fusion_legal(&k, StmtId(0), StmtId(1), &deps));
        assert!(fusion_legal(&k, StmtId(0), StmtId(0), &deps));
    }
}
