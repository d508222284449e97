//! Canonical kernel IR: rectangular affine loop nests, arrays and statements.
//!
//! The IR is the post-extraction form every other module consumes. Loops are
//! global objects identified by index; two statements that reference the same
//! `LoopId` iterate the same logical loop (this is how statements that shared
//! a nest in the source remember that fact after distribution). Array index
//! expressions are restricted to `iterator + constant` per dimension.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::FrontendError;

/// Index of a loop in [`AffineKernel::loops`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoopId(pub usize);

/// Index of an array in [`AffineKernel::arrays`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArrayId(pub usize);

/// Index of a statement in [`AffineKernel::statements`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StmtId(pub usize);

impl fmt::Display for LoopId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}
impl fmt::Display for StmtId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

/// One loop of the kernel with its original (pre-padding) trip count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopDecl {
    /// Iterator name as written in the source (`i`, `j0`, ...).
    pub iterator: String,
    /// Original trip count; lower bound is always 0.
    pub trip_count_ori: u64,
}

/// Role of an array in the kernel interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoClass {
    /// Read-only off-chip input.
    Input,
    /// Off-chip result written back at the end.
    Output,
    /// Produced and consumed inside the kernel; travels over FIFOs.
    Intermediate,
}

/// One array of the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayDecl {
    pub name: String,
    /// Declared extents, outermost dimension first. Never empty.
    pub dims: Vec<u64>,
    /// Bits per element: 8, 16, 32 or 64.
    pub elem_bits: u32,
    pub io_class: IoClass,
}

/// `iterator + offset` index expression for one array dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexExpr {
    pub loop_id: LoopId,
    pub offset: i64,
}

/// A subscripted reference to an array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayAccess {
    pub array: ArrayId,
    /// One expression per array dimension.
    pub index: Vec<IndexExpr>,
}

/// Arithmetic operation classes the cost model distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpKind {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [OpKind::Add, OpKind::Sub, OpKind::Mul, OpKind::Div];

    pub fn symbol(self) -> char {
        match self {
            OpKind::Add => '+',
            OpKind::Sub => '-',
            OpKind::Mul => '*',
            OpKind::Div => '/',
        }
    }
}

/// Per-statement operation counts (one kernel invocation of the statement body).
pub type OpCounts = BTreeMap<OpKind, u32>;

/// One assignment statement of the kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    /// Label used in diagnostics and generated code (`S0`, `S1`, ...).
    pub name: String,
    /// Enclosing loops, outermost first.
    pub loops: Vec<LoopId>,
    /// Subset of `loops` carrying a reduction over the written array.
    pub reduction_loops: Vec<LoopId>,
    pub write: ArrayAccess,
    pub reads: Vec<ArrayAccess>,
    pub op_counts: OpCounts,
}

impl Statement {
    /// Loops that are not reduction loops, in nesting order.
    pub fn non_reduction_loops(&self) -> Vec<LoopId> {
        self.loops
            .iter()
            .copied()
            .filter(|l| !self.reduction_loops.contains(l))
            .collect()
    }

    pub fn is_reduction(&self, l: LoopId) -> bool {
        self.reduction_loops.contains(&l)
    }
}

/// A restricted affine kernel: the unit every pipeline stage operates on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineKernel {
    pub name: String,
    pub loops: Vec<LoopDecl>,
    pub arrays: Vec<ArrayDecl>,
    pub statements: Vec<Statement>,
    /// Execution grouping: statements listed in the same group share a loop
    /// nest and execute interleaved; groups execute in order. After
    /// normalization most groups are singletons.
    pub nests: Vec<Vec<StmtId>>,
}

impl AffineKernel {
    pub fn loop_decl(&self, l: LoopId) -> &LoopDecl {
        &self.loops[l.0]
    }

    pub fn array(&self, a: ArrayId) -> &ArrayDecl {
        &self.arrays[a.0]
    }

    pub fn statement(&self, s: StmtId) -> &Statement {
        &self.statements[s.0]
    }

    pub fn trip_count(&self, l: LoopId) -> u64 {
        self.loops[l.0].trip_count_ori
    }

    pub fn stmt_ids(&self) -> impl Iterator<Item = StmtId> {
        (0..self.statements.len()).map(StmtId)
    }

    pub fn array_ids(&self) -> impl Iterator<Item = ArrayId> {
        (0..self.arrays.len()).map(ArrayId)
    }

    pub fn loop_ids(&self) -> impl Iterator<Item = LoopId> {
        (0..self.loops.len()).map(LoopId)
    }

    pub fn find_array(&self, name: &str) -> Option<ArrayId> {
        self.arrays.iter().position(|a| a.name == name).map(ArrayId)
    }

    pub fn find_statement(&self, name: &str) -> Option<StmtId> {
        self.statements.iter().position(|s| s.name == name).map(StmtId)
    }

    /// Shared enclosing loops of two statements: the longest common prefix of
    /// their loop lists. Distance vectors are expressed over these.
    pub fn shared_loops(&self, a: StmtId, b: StmtId) -> Vec<LoopId> {
        let la = &self.statement(a).loops;
        let lb = &self.statement(b).loops;
        la.iter()
            .zip(lb.iter())
            .take_while(|(x, y)| x == y)
            .map(|(x, _)| *x)
            .collect()
    }

    /// Total iteration count of a statement (product of its loop trips).
    pub fn iteration_count(&self, s: StmtId) -> u64 {
        self.statement(s)
            .loops
            .iter()
            .map(|l| self.trip_count(*l))
            .product()
    }

    /// Statements that write a given array.
    pub fn writers(&self, a: ArrayId) -> Vec<StmtId> {
        self.stmt_ids()
            .filter(|s| self.statement(*s).write.array == a)
            .collect()
    }

    /// Statements that read a given array.
    pub fn readers(&self, a: ArrayId) -> Vec<StmtId> {
        self.stmt_ids()
            .filter(|s| self.statement(*s).reads.iter().any(|r| r.array == a))
            .collect()
    }

    /// Structural validation: every invariant the IR promises downstream.
    pub fn validate(&self) -> Result<(), FrontendError> {
        let err = |m: String| Err(FrontendError::InvalidKernel(m));
        if self.loops.iter().any(|l| l.trip_count_ori == 0) {
            return err("loop with zero trip count".into());
        }
        for arr in &self.arrays {
            if arr.dims.is_empty() {
                return err(format!("array {} has no dimensions", arr.name));
            }
            if ![8, 16, 32, 64].contains(&arr.elem_bits) {
                return err(format!("array {}: elem_bits must be 8/16/32/64", arr.name));
            }
        }
        for (i, st) in self.statements.iter().enumerate() {
            let sid = StmtId(i);
            for l in st.loops.iter().chain(st.reduction_loops.iter()) {
                if l.0 >= self.loops.len() {
                    return err(format!("{sid}: unknown loop {l}"));
                }
            }
            for l in &st.reduction_loops {
                if !st.loops.contains(l) {
                    return err(format!("{sid}: reduction loop {l} not enclosing"));
                }
            }
            let mut seen = st.loops.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != st.loops.len() {
                return err(format!("{sid}: duplicate enclosing loop"));
            }
            for acc in std::iter::once(&st.write).chain(st.reads.iter()) {
                if acc.array.0 >= self.arrays.len() {
                    return err(format!("{sid}: unknown array id {}", acc.array.0));
                }
                let arr = self.array(acc.array);
                if acc.index.len() != arr.dims.len() {
                    return err(format!(
                        "{sid}: access to {} has {} subscripts, array has {} dims",
                        arr.name,
                        acc.index.len(),
                        arr.dims.len()
                    ));
                }
                for ix in &acc.index {
                    if !st.loops.contains(&ix.loop_id) {
                        return err(format!(
                            "{sid}: subscript uses loop {} that does not enclose it",
                            ix.loop_id
                        ));
                    }
                }
            }
        }
        // The nest grouping must cover every statement exactly once and each
        // group must share a loop prefix.
        let mut covered = vec![false; self.statements.len()];
        for group in &self.nests {
            for s in group {
                if s.0 >= self.statements.len() || covered[s.0] {
                    return err("nest grouping does not partition the statements".into());
                }
                covered[s.0] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return err("nest grouping does not partition the statements".into());
        }
        Ok(())
    }
}

/// Derive the nest grouping implied by shared loop ids: consecutive
/// statements belong to the same group when their loop lists share a
/// nonempty common prefix with the group so far.
pub fn derive_nests(statements: &[Statement]) -> Vec<Vec<StmtId>> {
    let mut groups: Vec<Vec<StmtId>> = Vec::new();
    let mut prefixes: Vec<Vec<LoopId>> = Vec::new();
    for (i, st) in statements.iter().enumerate() {
        let joined = match (groups.last_mut(), prefixes.last_mut()) {
            (Some(group), Some(prefix)) => {
                let n = prefix
                    .iter()
                    .zip(st.loops.iter())
                    .take_while(|(a, b)| a == b)
                    .count();
                if n > 0 {
                    prefix.truncate(n);
                    group.push(StmtId(i));
                    true
                } else {
                    false
                }
            }
            _ => false,
        };
        if !joined {
            groups.push(vec![StmtId(i)]);
            prefixes.push(st.loops.clone());
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> AffineKernel {
        AffineKernel {
            name: "t".into(),
            loops: vec![
                LoopDecl { iterator: "i".into(), trip_count_ori: 4 },
                LoopDecl { iterator: "j".into(), trip_count_ori: 5 },
            ],
            arrays: vec![ArrayDecl {
                name: "A".into(),
                dims: vec![4, 5],
                elem_bits: 32,
                io_class: IoClass::Output,
            }],
            statements: vec![Statement {
                name: "S0".into(),
                loops: vec![LoopId(0), LoopId(1)],
                reduction_loops: vec![],
                write: ArrayAccess {
                    array: ArrayId(0),
                    index: vec![
                        IndexExpr { loop_id: LoopId(0), offset: 0 },
                        IndexExpr { loop_id: LoopId(1), offset: 0 },
                    ],
                },
                reads: vec![],
                op_counts: OpCounts::new(),
            }],
            nests: vec![vec![StmtId(0)]],
        }
    }

    #[test]
    fn valid_kernel_passes() {
        k().validate().unwrap();
    }

    #[test]
    fn bad_subscript_arity_rejected() {
        let mut kern = k();
        kern.statements[0].write.index.pop();
        assert!(kern.validate().is_err());
    }

    #[test]
    fn nest_derivation_groups_prefix_sharing() {
        let mut kern = k();
        let mut s1 = kern.statements[0].clone();
        s1.name = "S1".into();
        kern.statements.push(s1);
        let groups = derive_nests(&kern.statements);
        assert_eq!(groups, vec![vec![StmtId(0), StmtId(1)]]);
    }
}
