//! Dataflow task graph: one node per statement, fused into output-stationary
//! tasks, with FIFO channels between tasks and load/store pseudo-edges to
//! off-chip memory.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dependence::{fusion_legal, DependenceSet};
use crate::error::GraphError;
use crate::ir::*;

/// Index of a fused task in [`FusedTaskGraph::fused_tasks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(pub usize);

impl std::fmt::Display for TaskId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FT{}", self.0)
    }
}

/// Endpoint of a channel: a fused task or the off-chip memory pseudo-node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndPoint {
    Task(TaskId),
    Memory,
}

impl EndPoint {
    pub fn task(self) -> Option<TaskId> {
        match self {
            EndPoint::Task(t) => Some(t),
            EndPoint::Memory => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    FifoIntertask,
    OffchipLoad,
    OffchipStore,
}

/// A data channel: FIFO between tasks, or a load/store stream to memory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelEdge {
    pub src: EndPoint,
    pub dst: EndPoint,
    pub array: ArrayId,
    pub kind: ChannelKind,
    /// Distinguishes duplicated off-chip copies of read-only inputs.
    pub copy_index: usize,
}

/// A fused task: output-stationary group of statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedTask {
    pub id: TaskId,
    /// Member statements in execution order.
    pub statements: Vec<StmtId>,
    pub output_array: ArrayId,
    /// Canonical non-reduction loops (the tileable inter-tile loops), in the
    /// primary member's nesting order.
    pub shared_loops: Vec<LoopId>,
    /// Reduction loops of the members, first-appearance order.
    pub reduction_loops: Vec<LoopId>,
    /// Member loop -> canonical loop. Identity for canonical-member loops;
    /// maps an initializer's loops onto the accumulator's through the output
    /// subscripts.
    pub loop_alias: BTreeMap<LoopId, LoopId>,
}

impl FusedTask {
    pub fn canonical(&self, l: LoopId) -> LoopId {
        *self.loop_alias.get(&l).unwrap_or(&l)
    }

    /// All loops any member iterates, canonicalized, deduplicated.
    pub fn all_loops(&self) -> Vec<LoopId> {
        let mut v = self.shared_loops.clone();
        v.extend(self.reduction_loops.iter().copied());
        v
    }
}

/// Acyclic dataflow graph of fused tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedTaskGraph {
    pub fused_tasks: Vec<FusedTask>,
    pub edges: Vec<ChannelEdge>,
    pub n_fused: usize,
}

impl FusedTaskGraph {
    pub fn task(&self, t: TaskId) -> &FusedTask {
        &self.fused_tasks[t.0]
    }

    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> {
        (0..self.fused_tasks.len()).map(TaskId)
    }

    pub fn task_of_statement(&self, s: StmtId) -> Option<TaskId> {
        self.fused_tasks
            .iter()
            .position(|t| t.statements.contains(&s))
            .map(TaskId)
    }

    /// Inter-task FIFO predecessors of a task.
    pub fn preds(&self, t: TaskId) -> Vec<&ChannelEdge> {
        self.edges
            .iter()
            .filter(|e| e.kind == ChannelKind::FifoIntertask && e.dst == EndPoint::Task(t))
            .collect()
    }

    pub fn succs(&self, t: TaskId) -> Vec<&ChannelEdge> {
        self.edges
            .iter()
            .filter(|e| e.kind == ChannelKind::FifoIntertask && e.src == EndPoint::Task(t))
            .collect()
    }

    /// Channels into a task, FIFO and load alike.
    pub fn inputs(&self, t: TaskId) -> Vec<&ChannelEdge> {
        self.edges.iter().filter(|e| e.dst == EndPoint::Task(t)).collect()
    }

    pub fn outputs(&self, t: TaskId) -> Vec<&ChannelEdge> {
        self.edges.iter().filter(|e| e.src == EndPoint::Task(t)).collect()
    }

    /// Tasks with no inter-task successors.
    pub fn sinks(&self) -> Vec<TaskId> {
        self.task_ids().filter(|t| self.succs(*t).is_empty()).collect()
    }

    /// Topological order over inter-task edges.
    pub fn topo_order(&self) -> Vec<TaskId> {
        let n = self.fused_tasks.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            if e.kind == ChannelKind::FifoIntertask {
                if let EndPoint::Task(t) = e.dst {
                    indeg[t.0] += 1;
                }
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|i| indeg[*i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop() {
            order.push(TaskId(i));
            for e in self.succs(TaskId(i)) {
                if let EndPoint::Task(t) = e.dst {
                    indeg[t.0] -= 1;
                    if indeg[t.0] == 0 {
                        ready.push(t.0);
                    }
                }
            }
            ready.sort_unstable_by(|a, b| b.cmp(a));
        }
        order
    }

    pub fn is_acyclic(&self) -> bool {
        self.topo_order().len() == self.fused_tasks.len()
    }

    /// Union-find style loop classes induced by fusion aliases: tiling
    /// variables are defined per class representative.
    pub fn loop_class_repr(&self, n_loops: usize) -> Vec<LoopId> {
        let mut repr: Vec<usize> = (0..n_loops).collect();
        fn find(repr: &mut Vec<usize>, x: usize) -> usize {
            if repr[x] != x {
                let r = find(repr, repr[x]);
                repr[x] = r;
            }
            repr[x]
        }
        for t in &self.fused_tasks {
            for (from, to) in &t.loop_alias {
                let (a, b) = (find(&mut repr, from.0), find(&mut repr, to.0));
                if a != b {
                    // Canonical loop wins as representative.
                    repr[a] = b;
                }
            }
        }
        (0..n_loops).map(|i| LoopId(find(&mut repr, i))).collect()
    }

    /// Graphviz rendering of the fused graph.
    pub fn to_dot(&self, kernel: &AffineKernel) -> String {
        let mut s = String::from("digraph tasks {\n  rankdir=LR;\n");
        for t in &self.fused_tasks {
            let members: Vec<&str> =
                t.statements.iter().map(|m| kernel.statement(*m).name.as_str()).collect();
            s.push_str(&format!(
                "  {} [shape=box,label=\"{}\\n{{{}}} -> {}\"];\n",
                t.id,
                t.id,
                members.join(","),
                kernel.array(t.output_array).name
            ));
        }
        for e in &self.edges {
            let arr = &kernel.array(e.array).name;
            match (e.src, e.dst, e.kind) {
                (EndPoint::Task(a), EndPoint::Task(b), _) => {
                    s.push_str(&format!("  {a} -> {b} [label=\"{arr}\"];\n"));
                }
                (EndPoint::Memory, EndPoint::Task(b), _) => {
                    s.push_str(&format!(
                        "  mem_{arr}_{} [shape=cylinder,label=\"{arr}\"];\n  mem_{arr}_{} -> {b};\n",
                        e.copy_index, e.copy_index
                    ));
                }
                (EndPoint::Task(a), EndPoint::Memory, _) => {
                    s.push_str(&format!(
                        "  st_{arr} [shape=cylinder,label=\"{arr}\"];\n  {a} -> st_{arr};\n"
                    ));
                }
                _ => {}
            }
        }
        s.push_str("}\n");
        s
    }
}

fn exec_rank(kernel: &AffineKernel) -> Vec<usize> {
    let mut rank = vec![0usize; kernel.statements.len()];
    let mut r = 0;
    for nest in &kernel.nests {
        for s in nest {
            rank[s.0] = r;
            r += 1;
        }
    }
    rank
}

/// Build the pre-fusion task graph: one task per statement, FIFO edges from
/// last-writer flow, and off-chip pseudo-edges for kernel inputs/outputs.
pub fn build_task_graph(
    kernel: &AffineKernel,
    deps: &DependenceSet,
) -> Result<FusedTaskGraph, GraphError> {
    let rank = exec_rank(kernel);
    let mut order: Vec<StmtId> = kernel.stmt_ids().collect();
    order.sort_by_key(|s| rank[s.0]);

    let mut tasks = Vec::new();
    for (i, s) in order.iter().enumerate() {
        let st = kernel.statement(*s);
        tasks.push(FusedTask {
            id: TaskId(i),
            statements: vec![*s],
            output_array: st.write.array,
            shared_loops: st.non_reduction_loops(),
            reduction_loops: st.reduction_loops.clone(),
            loop_alias: BTreeMap::new(),
        });
    }
    let task_of = |s: StmtId| TaskId(order.iter().position(|x| *x == s).unwrap());

    let mut edges = Vec::new();
    for s in &order {
        let st = kernel.statement(*s);
        let t = task_of(*s);
        // One channel per distinct array read; the value comes from the last
        // writer executing before this statement, or off-chip memory.
        let mut seen_reads: Vec<ArrayId> = Vec::new();
        for r in &st.reads {
            if seen_reads.contains(&r.array) {
                continue;
            }
            seen_reads.push(r.array);
            let producer = kernel
                .writers(r.array)
                .into_iter()
                .filter(|w| rank[w.0] < rank[s.0])
                .max_by_key(|w| rank[w.0]);
            match producer {
                Some(w) => edges.push(ChannelEdge {
                    src: EndPoint::Task(task_of(w)),
                    dst: EndPoint::Task(t),
                    array: r.array,
                    kind: ChannelKind::FifoIntertask,
                    copy_index: 0,
                }),
                None => edges.push(ChannelEdge {
                    src: EndPoint::Memory,
                    dst: EndPoint::Task(t),
                    array: r.array,
                    kind: ChannelKind::OffchipLoad,
                    copy_index: 0,
                }),
            }
        }
    }
    // Store edges: the last writer of every output array ships it off-chip.
    for a in kernel.array_ids() {
        if kernel.array(a).io_class != IoClass::Output {
            continue;
        }
        if let Some(w) = kernel.writers(a).into_iter().max_by_key(|w| rank[w.0]) {
            edges.push(ChannelEdge {
                src: EndPoint::Task(task_of(w)),
                dst: EndPoint::Memory,
                array: a,
                kind: ChannelKind::OffchipStore,
                copy_index: 0,
            });
        }
    }

    let graph = FusedTaskGraph { n_fused: tasks.len(), fused_tasks: tasks, edges };
    // Acyclicity over every dependence kind, not just the value channels.
    let mut check = graph.clone();
    for e in &deps.edges {
        if e.src != e.dst {
            check.edges.push(ChannelEdge {
                src: EndPoint::Task(task_of(e.src)),
                dst: EndPoint::Task(task_of(e.dst)),
                array: e.array,
                kind: ChannelKind::FifoIntertask,
                copy_index: 0,
            });
        }
    }
    if !check.is_acyclic() {
        return Err(GraphError::CyclicGraph(format!(
            "{} statements",
            kernel.statements.len()
        )));
    }
    debug_assert!(graph.is_acyclic());
    Ok(graph)
}

/// Merge tasks with identical outputs where legal (output-stationary
/// fusion), greedily in topological order.
pub fn fuse_output_stationary(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
) -> FusedTaskGraph {
    let n = graph.fused_tasks.len();
    // group[i] = fusion group of pre-fusion task i.
    let mut group: Vec<usize> = (0..n).collect();
    let topo = graph.topo_order();

    for (pos, &t) in topo.iter().enumerate() {
        for &u in topo.iter().skip(pos + 1) {
            if group[u.0] != u.0 || group[t.0] != group[t.0] {
                continue;
            }
            let (a, b) = (graph.task(t).statements[0], graph.task(u).statements[0]);
            if graph.task(t).output_array != graph.task(u).output_array {
                continue;
            }
            if !fusion_legal(kernel, a, b, deps) {
                continue;
            }
            // Tentatively merge and keep only if the quotient stays acyclic.
            let saved = group[u.0];
            group[u.0] = group[t.0];
            if quotient_acyclic(graph, &group) {
                continue;
            }
            group[u.0] = saved;
        }
    }

    build_fused(kernel, graph, &group)
}

fn quotient_acyclic(graph: &FusedTaskGraph, group: &[usize]) -> bool {
    let mut edges = Vec::new();
    for e in &graph.edges {
        if let (EndPoint::Task(a), EndPoint::Task(b)) = (e.src, e.dst) {
            let (ga, gb) = (group[a.0], group[b.0]);
            if ga != gb {
                edges.push((ga, gb));
            }
        }
    }
    // Kahn over the quotient nodes.
    let nodes: Vec<usize> = {
        let mut v: Vec<usize> = group.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let mut indeg: BTreeMap<usize, usize> = nodes.iter().map(|n| (*n, 0)).collect();
    for (_, b) in &edges {
        *indeg.get_mut(b).unwrap() += 1;
    }
    let mut ready: Vec<usize> = nodes.iter().copied().filter(|n| indeg[n] == 0).collect();
    let mut seen = 0;
    while let Some(x) = ready.pop() {
        seen += 1;
        for (a, b) in &edges {
            if *a == x {
                let d = indeg.get_mut(b).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(*b);
                }
            }
        }
    }
    seen == nodes.len()
}

fn build_fused(kernel: &AffineKernel, graph: &FusedTaskGraph, group: &[usize]) -> FusedTaskGraph {
    let rank = exec_rank(kernel);
    // Collect members per group.
    let mut members: BTreeMap<usize, Vec<StmtId>> = BTreeMap::new();
    for t in &graph.fused_tasks {
        members.entry(group[t.id.0]).or_default().push(t.statements[0]);
    }
    for m in members.values_mut() {
        m.sort_by_key(|s| rank[s.0]);
    }

    // Fused tasks numbered in topological order of the quotient graph,
    // ties broken by earliest member.
    let mut quotient_edges: Vec<(usize, usize)> = Vec::new();
    for e in &graph.edges {
        if let (EndPoint::Task(a), EndPoint::Task(b)) = (e.src, e.dst) {
            let (ga, gb) = (group[a.0], group[b.0]);
            if ga != gb {
                quotient_edges.push((ga, gb));
            }
        }
    }
    let mut keys: Vec<usize> = members.keys().copied().collect();
    let mut placed: Vec<usize> = Vec::new();
    while !keys.is_empty() {
        let mut pick = None;
        for (i, k) in keys.iter().enumerate() {
            let blocked = quotient_edges
                .iter()
                .any(|(a, b)| b == k && !placed.contains(a) && keys.contains(a));
            if !blocked {
                pick = Some(i);
                break;
            }
        }
        let i = pick.expect("pre-fusion graph is acyclic");
        placed.push(keys.remove(i));
    }

    let mut new_tasks = Vec::new();
    let mut task_of_group: BTreeMap<usize, TaskId> = BTreeMap::new();
    for (i, g) in placed.iter().enumerate() {
        let stmts = members[g].clone();
        // Canonical member: the one with the most loops (the accumulator).
        let canon = *stmts
            .iter()
            .max_by_key(|s| (kernel.statement(**s).loops.len(), usize::MAX - rank[s.0]))
            .unwrap();
        let canon_st = kernel.statement(canon);
        let shared = canon_st.non_reduction_loops();
        let mut alias = BTreeMap::new();
        let mut reductions = canon_st.reduction_loops.clone();
        for s in &stmts {
            let st = kernel.statement(*s);
            for (ix_member, ix_canon) in st.write.index.iter().zip(canon_st.write.index.iter()) {
                if ix_member.loop_id != ix_canon.loop_id {
                    alias.insert(ix_member.loop_id, ix_canon.loop_id);
                }
            }
            for r in &st.reduction_loops {
                if !reductions.contains(r) {
                    reductions.push(*r);
                }
            }
        }
        let id = TaskId(i);
        task_of_group.insert(*g, id);
        new_tasks.push(FusedTask {
            id,
            output_array: kernel.statement(stmts[0]).write.array,
            statements: stmts,
            shared_loops: shared,
            reduction_loops: reductions,
            loop_alias: alias,
        });
    }

    let mut new_edges: Vec<ChannelEdge> = Vec::new();
    for e in &graph.edges {
        let map = |p: EndPoint| match p {
            EndPoint::Task(t) => EndPoint::Task(task_of_group[&group[t.0]]),
            EndPoint::Memory => EndPoint::Memory,
        };
        let ne = ChannelEdge { src: map(e.src), dst: map(e.dst), ..e.clone() };
        if ne.src == ne.dst {
            continue; // became internal to a fused task
        }
        if !new_edges.contains(&ne) {
            new_edges.push(ne);
        }
    }

    FusedTaskGraph { n_fused: new_tasks.len(), fused_tasks: new_tasks, edges: new_edges }
}

/// Give each off-chip load of a read-only input its own memory copy, so
/// multi-reader inputs stream independently instead of feeding through.
pub fn duplicate_readonly_inputs(kernel: &AffineKernel, graph: &FusedTaskGraph) -> FusedTaskGraph {
    let mut out = graph.clone();
    for a in kernel.array_ids() {
        if kernel.array(a).io_class != IoClass::Input {
            continue;
        }
        let mut idx = 0;
        for e in out.edges.iter_mut() {
            if e.array == a && e.kind == ChannelKind::OffchipLoad {
                e.copy_index = idx;
                idx += 1;
            }
        }
    }
    out
}

/// Full standard pipeline: dependences, graph, fusion, duplication.
pub fn analyze(
    kernel: &AffineKernel,
) -> Result<(DependenceSet, FusedTaskGraph), GraphError> {
    let deps = crate::dependence::compute_dependences(kernel);
    let normalized = crate::frontend::normalize_distribute(kernel, &deps);
    let deps = crate::dependence::compute_dependences(&normalized);
    let pre = build_task_graph(&normalized, &deps)?;
    let fused = fuse_output_stationary(&normalized, &pre, &deps);
    Ok((deps, duplicate_readonly_inputs(&normalized, &fused)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::compute_dependences;
    use crate::frontend::affine_c;

    const THREE_MM: &str = "
void k3mm(float E[16][18], float A[16][20], float B[20][18],
          float F[18][22], float C[18][24], float D[24][22],
          float G[16][22]) {
  for (int i = 0; i < 16; i++)
    for (int j = 0; j < 18; j++) {
      E[i][j] = 0;
      for (int k = 0; k < 20; k++)
        E[i][j] += A[i][k] * B[k][j];
    }
  for (int i = 0; i < 18; i++)
    for (int j = 0; j < 22; j++) {
      F[i][j] = 0;
      for (int k = 0; k < 24; k++)
        F[i][j] += C[i][k] * D[k][j];
    }
  for (int i = 0; i < 16; i++)
    for (int j = 0; j < 22; j++) {
      G[i][j] = 0;
      for (int k = 0; k < 18; k++)
        G[i][j] += E[i][k] * F[k][j];
    }
}";

    fn three_mm_graphs() -> (crate::ir::AffineKernel, FusedTaskGraph, FusedTaskGraph) {
        let k = affine_c::parse(THREE_MM).unwrap();
        let deps = compute_dependences(&k);
        let norm = crate::frontend::normalize_distribute(&k, &deps);
        let deps = compute_dependences(&norm);
        let pre = build_task_graph(&norm, &deps).unwrap();
        let fused = fuse_output_stationary(&norm, &pre, &deps);
        (norm, pre, fused)
    }

    #[test]
    fn three_mm_pre_fusion_edges() {
        let (_, pre, _) = three_mm_graphs();
        assert_eq!(pre.fused_tasks.len(), 6);
        let inter: Vec<(usize, usize)> = pre
            .edges
            .iter()
            .filter(|e| e.kind == ChannelKind::FifoIntertask)
            .map(|e| (e.src.task().unwrap().0, e.dst.task().unwrap().0))
            .collect();
        let mut sorted = inter.clone();
        sorted.sort();
        assert_eq!(sorted, vec![(0, 1), (1, 5), (2, 3), (3, 5), (4, 5)]);
    }

    #[test]
    fn three_mm_fuses_into_three_tasks() {
        let (k, _, fused) = three_mm_graphs();
        assert_eq!(fused.n_fused, 3);
        let names: Vec<Vec<&str>> = fused
            .fused_tasks
            .iter()
            .map(|t| t.statements.iter().map(|s| k.statement(*s).name.as_str()).collect())
            .collect();
        assert!(names.contains(&vec!["S0", "S1"]));
        assert!(names.contains(&vec!["S2", "S3"]));
        assert!(names.contains(&vec!["S4", "S5"]));
        // E and F flow into the third task.
        let g_task = fused
            .fused_tasks
            .iter()
            .find(|t| k.array(t.output_array).name == "G")
            .unwrap();
        let in_arrays: Vec<&str> = fused
            .preds(g_task.id)
            .iter()
            .map(|e| k.array(e.array).name.as_str())
            .collect();
        assert_eq!(
            {
                let mut v = in_arrays.clone();
                v.sort();
                v
            },
            vec!["E", "F"]
        );
    }

    #[test]
    fn atax_fusion_structure() {
        let src = "
void atax(float A[12][16], float x[16], float y[16], float tmp[12]) {
  for (int i = 0; i < 16; i++)
    y[i] = 0;
  for (int i = 0; i < 12; i++) {
    tmp[i] = 0;
    for (int j = 0; j < 16; j++)
      tmp[i] += A[i][j] * x[j];
    for (int j = 0; j < 16; j++)
      y[j] += A[i][j] * tmp[i];
  }
}";
        let k = affine_c::parse(src).unwrap();
        let (_, fused) = analyze(&k).unwrap();
        assert_eq!(fused.n_fused, 2);
        // FT0 produces tmp (topologically first), FT1 produces y.
        let ft0: Vec<&str> = fused.fused_tasks[0]
            .statements
            .iter()
            .map(|s| k.statement(*s).name.as_str())
            .collect();
        let ft1: Vec<&str> = fused.fused_tasks[1]
            .statements
            .iter()
            .map(|s| k.statement(*s).name.as_str())
            .collect();
        assert_eq!(ft0, vec!["S1", "S2"]);
        assert_eq!(ft1, vec!["S0", "S3"]);
        // The y-task's initializer loop aliases onto the accumulator's j.
        assert_eq!(fused.fused_tasks[1].loop_alias.len(), 1);
    }

    #[test]
    fn cyclic_nest_rejected() {
        let src = "
void cyc(float A[8], float B[8]) {
  for (int i = 0; i < 7; i++) {
    A[i] = B[i] + 1;
    B[i+1] = A[i] + 2;
  }
}";
        let k = affine_c::parse(src).unwrap();
        let deps = compute_dependences(&k);
        let norm = crate::frontend::normalize_distribute(&k, &deps);
        // The two statements form a cycle: A feeds B same iteration, B feeds
        // A next iteration. They stay in one nest and the task graph refuses.
        assert_eq!(norm.nests.len(), 1);
        let deps = compute_dependences(&norm);
        assert!(build_task_graph(&norm, &deps).is_err());
    }

    #[test]
    fn readonly_duplication_assigns_copies() {
        let src = "
void two(float A[8][8], float E[8][8], float F[8][8]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++)
      E[i][j] = A[i][j] + 1;
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 8; j++)
      F[i][j] = A[i][j] + 2;
}";
        let k = affine_c::parse(src).unwrap();
        let (_, g) = analyze(&k).unwrap();
        let loads: Vec<usize> = g
            .edges
            .iter()
            .filter(|e| {
                e.kind == ChannelKind::OffchipLoad && k.array(e.array).name == "A"
            })
            .map(|e| e.copy_index)
            .collect();
        assert_eq!(loads.len(), 2);
        assert_ne!(loads[0], loads[1]);
    }
}
