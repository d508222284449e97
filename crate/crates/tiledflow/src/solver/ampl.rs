//! AMPL model+data export of the full design-space formulation: every
//! variable of the space, constraints Eq. 1-10 plus the SLR range, and the
//! windowed latency objective. The export exists for parity with external
//! NLP toolchains and for cross-checking; the built-in search engine never
//! consumes it.
//!
//! The start-shift between FIFO-coupled tasks is emitted in its closed
//! first-commit form (prologue + one compute block + one tile write). The
//! search engine uses the exact windowed definition, so an external solver
//! can disagree slightly on concurrent designs; the divergence is confined
//! to the `shift_` expressions below.

use std::fmt::Write as _;

use crate::costmodel::CostModelConfig;
use crate::dependence::DependenceSet;
use crate::designspace::{auto_max_pad, intertile_orders, task_arrays, ResourceBudget};
use crate::ir::*;
use crate::taskgraph::{ChannelKind, EndPoint, FusedTaskGraph};

/// Emit the AMPL model and data for a kernel under a budget. Deterministic
/// for fixed inputs.
pub fn export_nlp(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    deps: &DependenceSet,
    budget: &ResourceBudget,
    cfg: &CostModelConfig,
) -> String {
    let mut s = String::new();
    let loops: Vec<&LoopDecl> = kernel.loops.iter().collect();
    let lname = |l: LoopId| kernel.loop_decl(l).iterator.clone();
    let aname = |a: ArrayId| kernel.array(a).name.clone();

    let _ = writeln!(s, "# Design-space model for kernel `{}`", kernel.name);
    let _ = writeln!(s, "# Generated for budget `{}`; solve with a nonconvex QP/NLP solver.", budget.name);
    let _ = writeln!(s, "# shift_ uses the closed first-commit approximation (see module docs).");
    let _ = writeln!(s);

    // --- Sets and constants -------------------------------------------------
    let _ = writeln!(s, "set LOOPS;");
    let _ = writeln!(s, "set TASKS;");
    let _ = writeln!(s, "set BURSTS;");
    let _ = writeln!(s, "param tc_ori {{LOOPS}} integer > 0;");
    let _ = writeln!(s, "param pad_cap {{LOOPS}} integer >= 0;");
    let _ = writeln!(s, "param n_slr integer > 0;");
    let _ = writeln!(s, "param mem_bits integer > 0;");
    let _ = writeln!(s, "param dsp_budget > 0;");
    let _ = writeln!(s, "param max_part integer > 0;");
    let _ = writeln!(s, "param il_par integer > 0;");
    let _ = writeln!(s, "param il_red integer > 0;");
    let _ = writeln!(s);

    // --- Core variables -----------------------------------------------------
    let _ = writeln!(s, "# One intra/inter trip pair and a padding amount per loop.");
    let _ = writeln!(s, "var tc_intra {{l in LOOPS}} integer >= 1;");
    let _ = writeln!(s, "var tc_inter {{l in LOOPS}} integer >= 1;");
    let _ = writeln!(s, "var tc_pad {{l in LOOPS}} integer >= 0;");
    let _ = writeln!(s, "var slr {{t in TASKS}} integer >= 0;");
    let _ = writeln!(s);

    let _ = writeln!(s, "s.t. Eq1_split {{l in LOOPS}}: tc_intra[l] * tc_inter[l] = tc_ori[l] + tc_pad[l];");
    let _ = writeln!(
        s,
        "s.t. Eq1_divisor {{l in LOOPS}}: (tc_ori[l] mod tc_intra[l]) * ((tc_ori[l] + tc_pad[l]) mod tc_intra[l]) = 0;"
    );
    let _ = writeln!(s, "s.t. Eq2_pad {{l in LOOPS}}: tc_pad[l] <= pad_cap[l];");
    let _ = writeln!(s, "s.t. slr_range {{t in TASKS}}: slr[t] <= n_slr - 1;");
    let _ = writeln!(s);

    // --- Permutation selectors (Eq. 4 holds by construction: the selector
    // picks one joint order per fused task, shared loops included once).
    for t in graph.task_ids() {
        let orders = intertile_orders(kernel, graph, t, deps).unwrap_or_default();
        let _ = writeln!(
            s,
            "# fused task {} inter-tile orders: {}",
            t.0,
            orders
                .iter()
                .map(|o| o.iter().map(|l| lname(*l)).collect::<Vec<_>>().join(">"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        let _ = writeln!(s, "var perm_ft{} {{0..{}}} binary;", t.0, orders.len().saturating_sub(1));
        let _ = writeln!(
            s,
            "s.t. Eq4_one_order_ft{}: sum {{p in 0..{}}} perm_ft{}[p] = 1;",
            t.0,
            orders.len().saturating_sub(1),
            t.0
        );
    }
    let _ = writeln!(s);

    // --- Transfer/define levels (Eq. 5 / Eq. 6) and bitwidth (Eq. 3) -------
    let mut slast_exprs: Vec<(String, String)> = Vec::new();
    for t in graph.task_ids() {
        let task = graph.task(t);
        let m = task.shared_loops.len();
        let orders = intertile_orders(kernel, graph, t, deps).unwrap_or_default();
        for (a, _) in task_arrays(graph, t) {
            let an = aname(a);
            let _ = writeln!(s, "var tl_ft{}_{an} {{0..{m}}} binary;  # transfer level one-hot", t.0);
            let _ = writeln!(s, "var dl_ft{}_{an} {{0..{m}}} binary;  # define level one-hot", t.0);
            let _ = writeln!(
                s,
                "s.t. Eq5_transfer_ft{}_{an}: sum {{v in 0..{m}}} tl_ft{}_{an}[v] = 1;",
                t.0, t.0
            );
            let _ = writeln!(
                s,
                "s.t. Eq5_define_ft{}_{an}: sum {{v in 0..{m}}} dl_ft{}_{an}[v] = 1;",
                t.0, t.0
            );
            let _ = writeln!(
                s,
                "s.t. Eq6_define_above_ft{}_{an}: sum {{v in 0..{m}}} v * dl_ft{}_{an}[v] <= sum {{v in 0..{m}}} v * tl_ft{}_{an}[v];",
                t.0, t.0, t.0
            );

            // Footprint of `a` at each level under each order, and the last
            // tile dimension driving the bitwidth.
            let fp = footprint_exprs(kernel, graph, t, a, &orders);
            let foot = gate_by_levels(&fp.full, &format!("dl_ft{}_{an}", t.0), t.0, m);
            slast_exprs.push((
                format!("slast_ft{}_{an}", t.0),
                gate_by_levels(&fp.last_dim, &format!("tl_ft{}_{an}", t.0), t.0, m),
            ));
            let _ = writeln!(s, "var foot_ft{}_{an} >= 0;", t.0);
            let _ = writeln!(s, "s.t. footprint_ft{}_{an}: foot_ft{}_{an} = {foot};", t.0, t.0);
        }
    }
    let _ = writeln!(s);
    for (name, expr) in &slast_exprs {
        let _ = writeln!(s, "var {name} >= 1;");
        let _ = writeln!(s, "s.t. def_{name}: {name} = {expr};");
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "# Eq. 3: the widest burst dividing the transferred tile's last dim.");
    for a in kernel.array_ids() {
        let an = aname(a);
        let users: Vec<String> = graph
            .task_ids()
            .filter(|t| task_arrays(graph, *t).iter().any(|(x, _)| *x == a))
            .map(|t| format!("slast_ft{}_{an}", t.0))
            .collect();
        if users.is_empty() {
            continue;
        }
        let _ = writeln!(s, "var bwsel_{an} {{BURSTS}} binary;");
        let _ = writeln!(s, "s.t. Eq3_one_{an}: sum {{b in BURSTS}} bwsel_{an}[b] = 1;");
        for u in &users {
            let _ = writeln!(
                s,
                "s.t. Eq3_div_{an}_{u}: sum {{b in BURSTS}} bwsel_{an}[b] * ({u} mod b) = 0;"
            );
        }
        let _ = writeln!(s, "var bw_{an} >= 1;");
        let _ = writeln!(s, "s.t. Eq3_val_{an}: bw_{an} = sum {{b in BURSTS}} b * bwsel_{an}[b];");
    }
    let _ = writeln!(s);

    // --- Partitioning (Eq. 8 / Eq. 9) ---------------------------------------
    for t in graph.task_ids() {
        for (a, _) in task_arrays(graph, t) {
            let an = aname(a);
            let dims = partition_dim_loops(kernel, graph, t, a);
            let prod: Vec<String> = dims
                .iter()
                .map(|ls| {
                    if ls.is_empty() {
                        "1".to_string()
                    } else {
                        ls.iter().map(|l| format!("tc_intra['{}']", lname(*l))).collect::<Vec<_>>().join(" * ")
                    }
                })
                .collect();
            let _ = writeln!(
                s,
                "s.t. Eq8_Eq9_part_ft{}_{an}: {} <= max_part;",
                t.0,
                prod.join(" * ")
            );
        }
    }
    let _ = writeln!(s);

    // --- Memory (Eq. 7) and DSP (Eq. 10), per SLR via indicator gating ------
    let _ = writeln!(s, "var slr_sel {{t in TASKS, k in 0..n_slr-1}} binary;");
    let _ = writeln!(s, "s.t. slr_onehot {{t in TASKS}}: sum {{k in 0..n_slr-1}} slr_sel[t,k] = 1;");
    let _ = writeln!(s, "s.t. slr_link {{t in TASKS}}: slr[t] = sum {{k in 0..n_slr-1}} k * slr_sel[t,k];");
    let mut mem_terms: Vec<String> = Vec::new();
    let mut dsp_terms: Vec<String> = Vec::new();
    for t in graph.task_ids() {
        for (a, _) in task_arrays(graph, t) {
            let an = aname(a);
            let nbuf = 3; // upper bound; the engine derives 1/2/3 per usage
            let bits = kernel.array(a).elem_bits;
            mem_terms.push(format!(
                "slr_sel[{}, k] * foot_ft{}_{an} * {nbuf} * {bits}",
                t.0, t.0
            ));
        }
        for st in &graph.task(t).statements {
            let stn = kernel.statement(*st);
            let cost: f64 = stn
                .op_counts
                .iter()
                .map(|(op, n)| cfg.dsp_cost(*op) * *n as f64)
                .sum();
            let ii = cfg.ii_of(kernel, *st);
            let unroll: Vec<String> = stn
                .loops
                .iter()
                .map(|l| format!("tc_intra['{}']", lname(*l)))
                .collect();
            dsp_terms.push(format!(
                "slr_sel[{}, k] * ({cost} / {ii}) * {}",
                t.0,
                unroll.join(" * ")
            ));
        }
    }
    let _ = writeln!(
        s,
        "s.t. Eq7_mem {{k in 0..n_slr-1}}: {} <= mem_bits;",
        if mem_terms.is_empty() { "0".into() } else { mem_terms.join(" + ") }
    );
    let _ = writeln!(
        s,
        "s.t. Eq10_dsp {{k in 0..n_slr-1}}: {} <= dsp_budget;",
        if dsp_terms.is_empty() { "0".into() } else { dsp_terms.join(" + ") }
    );
    let _ = writeln!(s);

    // --- Objective: per-task windowed latency and the DAG recursion ---------
    let _ = writeln!(s, "# Per-member pipelined blocks (Eq. 13 / Eq. 14).");
    for st in kernel.stmt_ids() {
        let stn = kernel.statement(st);
        let red_intra: Vec<String> = stn
            .reduction_loops
            .iter()
            .map(|l| format!("tc_intra['{}']", lname(*l)))
            .collect();
        let red_inter: Vec<String> = stn
            .reduction_loops
            .iter()
            .map(|l| format!("tc_inter['{}']", lname(*l)))
            .collect();
        let ri = if red_intra.is_empty() { "1".into() } else { red_intra.join(" * ") };
        let re = if red_inter.is_empty() { "1".into() } else { red_inter.join(" * ") };
        let ii = cfg.ii_of(kernel, st);
        let _ = writeln!(s, "var lat_block_{} >= 0;", stn.name);
        let _ = writeln!(
            s,
            "s.t. Eq13_Eq14_{0}: lat_block_{0} = il_par + il_red * ceil(log({1}) / log(2)) + {ii} * ({2} - 1);",
            stn.name, ri, re
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "# Inter-tile level recursion (Eq. 12 windowed form).");
    for t in graph.task_ids() {
        let task = graph.task(t);
        let m = task.shared_loops.len();
        let orders = intertile_orders(kernel, graph, t, deps).unwrap_or_default();
        let members: Vec<String> = task
            .statements
            .iter()
            .map(|st| format!("lat_block_{}", kernel.statement(*st).name))
            .collect();
        let _ = writeln!(s, "var lvl_ft{} {{0..{m}}} >= 0;", t.0);
        let _ = writeln!(
            s,
            "s.t. lvl_base_ft{0}: lvl_ft{0}[{m}] = {1};",
            t.0,
            members.join(" + ")
        );
        for n in (1..=m).rev() {
            // Trips and traffic at this level, gated by the permutation.
            let trips: Vec<String> = orders
                .iter()
                .enumerate()
                .map(|(p, o)| format!("perm_ft{}[{p}] * tc_inter['{}']", t.0, lname(o[n - 1])))
                .collect();
            let traffic: Vec<String> = task_arrays(graph, t)
                .iter()
                .map(|(a, _)| {
                    format!(
                        "tl_ft{}_{}[{}] * foot_tl_ft{}_{}_{n} / bw_{}",
                        t.0,
                        aname(*a),
                        n,
                        t.0,
                        aname(*a),
                        aname(*a)
                    )
                })
                .collect();
            let rn = format!("({})", trips.join(" + "));
            let tn = format!("({})", traffic.join(" + "));
            let _ = writeln!(
                s,
                "s.t. Eq12_lvl{1}_ft{0}: lvl_ft{0}[{2}] = {tn} + ({rn} - 1) * max(lvl_ft{0}[{1}], {tn}) + lvl_ft{0}[{1}] + 2 * {tn};",
                t.0,
                n,
                n - 1
            );
        }
        let _ = writeln!(s, "var lat_task_ft{} >= 0;", t.0);
        let lvl0: Vec<String> = task_arrays(graph, t)
            .iter()
            .map(|(a, _)| {
                format!("tl_ft{}_{}[0] * foot_tl_ft{}_{}_0 / bw_{}", t.0, aname(*a), t.0, aname(*a), aname(*a))
            })
            .collect();
        let _ = writeln!(
            s,
            "s.t. lat_task_def_ft{0}: lat_task_ft{0} = lvl_ft{0}[0] + {1};",
            t.0,
            lvl0.join(" + ")
        );
    }
    // Footprints at each candidate transfer level (permutation-gated).
    for t in graph.task_ids() {
        let task = graph.task(t);
        let m = task.shared_loops.len();
        let orders = intertile_orders(kernel, graph, t, deps).unwrap_or_default();
        for (a, _) in task_arrays(graph, t) {
            let fp = footprint_exprs(kernel, graph, t, a, &orders);
            for (n, expr) in fp.full.iter().enumerate() {
                let _ = writeln!(s, "var foot_tl_ft{}_{}_{n} >= 0;", t.0, aname(a));
                let _ = writeln!(
                    s,
                    "s.t. def_foot_tl_ft{}_{}_{n}: foot_tl_ft{}_{}_{n} = {expr};",
                    t.0,
                    aname(a),
                    t.0,
                    aname(a)
                );
            }
            let _ = m;
        }
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "# DAG start times (Eq. 11, start-based) with first-commit shifts:");
    let _ = writeln!(s, "# shift = prologue windows + one compute block + one output tile write.");
    let _ = writeln!(s, "var start_ft {{t in TASKS}} >= 0;");
    let _ = writeln!(s, "var total >= 0;");
    for t in graph.task_ids() {
        let task = graph.task(t);
        let m = task.shared_loops.len();
        let members: Vec<String> = task
            .statements
            .iter()
            .map(|st| format!("lat_block_{}", kernel.statement(*st).name))
            .collect();
        let mut prologue: Vec<String> = vec![];
        for n in 0..=m {
            for (a, _) in task_arrays(graph, t) {
                prologue.push(format!(
                    "tl_ft{}_{}[{n}] * foot_tl_ft{}_{}_{n} / bw_{}",
                    t.0,
                    aname(a),
                    t.0,
                    aname(a),
                    aname(a)
                ));
            }
        }
        let out = aname(task.output_array);
        let _ = writeln!(s, "var shift_ft{} >= 0;", t.0);
        let _ = writeln!(
            s,
            "s.t. shift_def_ft{0}: shift_ft{0} = {1} + {2} + foot_tl_ft{0}_{out}_{m} / bw_{out};",
            t.0,
            prologue.join(" + "),
            members.join(" + ")
        );
    }
    for e in &graph.edges {
        let (EndPoint::Task(src), EndPoint::Task(dst)) = (e.src, e.dst) else { continue };
        if e.kind != ChannelKind::FifoIntertask {
            continue;
        }
        let _ = writeln!(
            s,
            "s.t. Eq11_edge_ft{0}_ft{1}: start_ft[{1}] >= start_ft[{0}] + shift_ft{0};",
            src.0, dst.0
        );
    }
    for t in graph.task_ids() {
        let _ = writeln!(s, "s.t. total_ft{0}: total >= start_ft[{0}] + lat_task_ft{0};", t.0);
    }
    let _ = writeln!(s, "minimize latency: total;");
    let _ = writeln!(s);

    // --- Data ----------------------------------------------------------------
    let _ = writeln!(s, "data;");
    let _ = writeln!(
        s,
        "set LOOPS := {};",
        loops.iter().map(|l| l.iterator.clone()).collect::<Vec<_>>().join(" ")
    );
    let _ = writeln!(
        s,
        "set TASKS := {};",
        graph.task_ids().map(|t| t.0.to_string()).collect::<Vec<_>>().join(" ")
    );
    let bursts: Vec<String> = budget.burst_sizes.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(s, "set BURSTS := {};", bursts.join(" "));
    let _ = writeln!(
        s,
        "param tc_ori := {};",
        loops
            .iter()
            .map(|l| format!("{} {}", l.iterator, l.trip_count_ori))
            .collect::<Vec<_>>()
            .join("  ")
    );
    let _ = writeln!(
        s,
        "param pad_cap := {};",
        loops
            .iter()
            .map(|l| format!("{} {}", l.iterator, auto_max_pad(l.trip_count_ori, budget)))
            .collect::<Vec<_>>()
            .join("  ")
    );
    let _ = writeln!(s, "param n_slr := {};", budget.n_slr);
    let _ = writeln!(s, "param mem_bits := {};", budget.mem_bits_per_slr);
    let _ = writeln!(s, "param dsp_budget := {};", budget.dsp_per_slr);
    let _ = writeln!(s, "param max_part := {};", budget.max_part);
    let _ = writeln!(s, "param il_par := {};", cfg.il_par);
    let _ = writeln!(s, "param il_red := {};", cfg.il_red);
    s
}

struct FootprintExprs {
    /// Per level 0..=m: full tile element count expression.
    full: Vec<String>,
    /// Per level 0..=m: last-dimension extent expression.
    last_dim: Vec<String>,
}

/// Permutation-gated footprint expressions of an array per transfer level.
fn footprint_exprs(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: crate::taskgraph::TaskId,
    a: ArrayId,
    orders: &[Vec<LoopId>],
) -> FootprintExprs {
    let task = graph.task(t);
    let m = task.shared_loops.len();
    let lname = |l: LoopId| kernel.loop_decl(l).iterator.clone();
    // Loops indexing each dimension (canonical, first access wins).
    let mut dim_loops: Vec<Option<LoopId>> = vec![None; kernel.array(a).dims.len()];
    for s in &task.statements {
        let st = kernel.statement(*s);
        for acc in std::iter::once(&st.write).chain(st.reads.iter()) {
            if acc.array == a {
                for (d, ix) in acc.index.iter().enumerate() {
                    dim_loops[d].get_or_insert(task.canonical(ix.loop_id));
                }
            }
        }
    }
    let mut full = Vec::new();
    let mut last = Vec::new();
    for lv in 0..=m {
        let mut perm_terms_full = Vec::new();
        let mut perm_terms_last = Vec::new();
        for (p, order) in orders.iter().enumerate() {
            let extent = |l: LoopId| -> String {
                let pos = order.iter().position(|x| *x == l).map(|q| q + 1);
                match pos {
                    Some(q) if q <= lv => format!("tc_intra['{}']", lname(l)),
                    _ => format!("(tc_ori['{}'] + tc_pad['{}'])", lname(l), lname(l)),
                }
            };
            let dims: Vec<String> = dim_loops
                .iter()
                .map(|dl| dl.map(&extent).unwrap_or_else(|| "1".into()))
                .collect();
            perm_terms_full.push(format!("perm_ft{}[{p}] * {}", t.0, dims.join(" * ")));
            perm_terms_last.push(format!(
                "perm_ft{}[{p}] * {}",
                t.0,
                dims.last().cloned().unwrap_or_else(|| "1".into())
            ));
        }
        full.push(format!("({})", perm_terms_full.join(" + ")));
        last.push(format!("({})", perm_terms_last.join(" + ")));
    }
    FootprintExprs { full, last_dim: last }
}

/// Sum of per-level expressions gated by a one-hot level selector.
fn gate_by_levels(exprs: &[String], sel: &str, _task: usize, m: usize) -> String {
    let terms: Vec<String> = (0..=m)
        .map(|lv| format!("{sel}[{lv}] * {}", exprs[lv]))
        .collect();
    terms.join(" + ")
}

/// Distinct loops indexing each dimension of an array inside a task.
fn partition_dim_loops(
    kernel: &AffineKernel,
    graph: &FusedTaskGraph,
    t: crate::taskgraph::TaskId,
    a: ArrayId,
) -> Vec<Vec<LoopId>> {
    let task = graph.task(t);
    let ndims = kernel.array(a).dims.len();
    let mut out = vec![Vec::new(); ndims];
    for s in &task.statements {
        let st = kernel.statement(*s);
        for acc in std::iter::once(&st.write).chain(st.reads.iter()) {
            if acc.array == a {
                for (d, ix) in acc.index.iter().enumerate() {
                    let c = task.canonical(ix.loop_id);
                    if !out[d].contains(&c) {
                        out[d].push(c);
                    }
                }
            }
        }
    }
    out
}
