//! Kernel front end: parsing (JSON and restricted affine-C), printing, and
//! maximal loop distribution.

pub mod affine_c;
pub mod json;

use crate::dependence::DependenceSet;
use crate::error::FrontendError;
use crate::ir::{AffineKernel, StmtId};

/// Input formats accepted by [`parse_kernel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFormat {
    AffineC,
    Json,
}

impl KernelFormat {
    /// Guess the format from a file name; defaults to JSON.
    pub fn from_path(path: &str) -> KernelFormat {
        if path.ends_with(".c") || path.ends_with(".cpp") || path.ends_with(".cc") {
            KernelFormat::AffineC
        } else {
            KernelFormat::Json
        }
    }
}

/// Parse kernel text in the declared format into the canonical IR.
pub fn parse_kernel(source_text: &str, format: KernelFormat) -> Result<AffineKernel, FrontendError> {
    match format {
        KernelFormat::AffineC => affine_c::parse(source_text),
        KernelFormat::Json => json::parse(source_text),
    }
}

/// Print a kernel in the requested format.
pub fn print_kernel(kernel: &AffineKernel, format: KernelFormat) -> String {
    match format {
        KernelFormat::AffineC => affine_c::print(kernel),
        KernelFormat::Json => json::print(kernel),
    }
}

/// Maximal loop distribution: split every nest group into the strongly
/// connected components of its internal dependence graph, in an order that
/// preserves all dependences. Statements caught in a dependence cycle stay
/// fused; everything else gets its own nest.
pub fn normalize_distribute(kernel: &AffineKernel, deps: &DependenceSet) -> AffineKernel {
    let mut out = kernel.clone();
    let mut new_nests = Vec::new();
    for group in &kernel.nests {
        if group.len() == 1 {
            new_nests.push(group.clone());
            continue;
        }
        for scc in dependence_sccs(group, deps) {
            new_nests.push(scc);
        }
    }
    out.nests = new_nests;
    out
}

/// SCCs of the dependence graph restricted to `members`, emitted in
/// program order (dependence edges always point forward in execution, so
/// ordering components by their smallest statement id is a topological
/// order).
fn dependence_sccs(members: &[StmtId], deps: &DependenceSet) -> Vec<Vec<StmtId>> {
    let n = members.len();
    let index_of = |s: StmtId| members.iter().position(|m| *m == s);
    let mut fwd = vec![vec![false; n]; n];
    for e in &deps.edges {
        if let (Some(a), Some(b)) = (index_of(e.src), index_of(e.dst)) {
            if a != b {
                fwd[a][b] = true;
            }
        }
    }
    // Transitive closure; groups are tiny so cubic is fine.
    let mut reach = fwd;
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut component = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if component[i] != usize::MAX {
            continue;
        }
        component[i] = next;
        for j in i + 1..n {
            if reach[i][j] && reach[j][i] {
                component[j] = next;
            }
        }
        next += 1;
    }
    let mut sccs: Vec<Vec<StmtId>> = vec![Vec::new(); next];
    for (i, c) in component.iter().enumerate() {
        sccs[*c].push(members[i]);
    }
    sccs.sort_by_key(|scc| scc.iter().map(|s| s.0).min().unwrap_or(usize::MAX));
    sccs
}
