//! JSON kernel schema: the canonical interchange format.
//!
//! ```json
//! {
//!   "name": "gemm",
//!   "loops": [{"id": "i", "trip_count": 8}],
//!   "arrays": [{"id": "C", "dims": [8, 8], "elem_bits": 32, "io_class": "output"}],
//!   "statements": [{
//!     "id": "S0", "loops": ["i", "j"], "reduction_loops": [],
//!     "write": {"array": "C", "index": ["i", "j"]},
//!     "reads": [{"array": "A", "index": ["i", "k+1"]}],
//!     "op_counts": {"+": 1}
//!   }]
//! }
//! ```
//!
//! Subscripts are written `"i"`, `"i+2"` or `"i-1"`. Reusing a loop id across
//! statements means they index the same logical iteration space.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::FrontendError;
use crate::ir::*;

#[derive(Serialize, Deserialize)]
struct KernelDoc {
    name: String,
    loops: Vec<LoopDoc>,
    arrays: Vec<ArrayDoc>,
    statements: Vec<StatementDoc>,
}

#[derive(Serialize, Deserialize)]
struct LoopDoc {
    id: String,
    trip_count: u64,
}

#[derive(Serialize, Deserialize)]
struct ArrayDoc {
    id: String,
    dims: Vec<u64>,
    elem_bits: u32,
    io_class: IoClass,
}

#[derive(Serialize, Deserialize)]
struct StatementDoc {
    id: String,
    loops: Vec<String>,
    #[serde(default)]
    reduction_loops: Vec<String>,
    write: AccessDoc,
    #[serde(default)]
    reads: Vec<AccessDoc>,
    #[serde(default)]
    op_counts: BTreeMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct AccessDoc {
    array: String,
    index: Vec<String>,
}

fn parse_err(msg: String) -> FrontendError {
    FrontendError::Parse { line: 0, col: 0, msg }
}

fn parse_subscript(s: &str) -> Result<(String, i64), FrontendError> {
    let s = s.trim();
    for (pos, sign) in s.char_indices().skip(1) {
        if sign == '+' || sign == '-' {
            let name = s[..pos].trim().to_string();
            let off: i64 = s[pos + 1..]
                .trim()
                .parse()
                .map_err(|_| parse_err(format!("bad subscript offset in `{s}`")))?;
            return Ok((name, if sign == '-' { -off } else { off }));
        }
    }
    Ok((s.to_string(), 0))
}

fn print_subscript(iter: &str, off: i64) -> String {
    match off {
        0 => iter.to_string(),
        o if o > 0 => format!("{iter}+{o}"),
        o => format!("{iter}{o}"),
    }
}

fn op_from_key(k: &str) -> Result<OpKind, FrontendError> {
    match k {
        "+" => Ok(OpKind::Add),
        "-" => Ok(OpKind::Sub),
        "*" => Ok(OpKind::Mul),
        "/" => Ok(OpKind::Div),
        other => Err(parse_err(format!("unknown op_counts key `{other}`"))),
    }
}

/// Parse a kernel from its JSON description.
pub fn parse(text: &str) -> Result<AffineKernel, FrontendError> {
    let doc: KernelDoc =
        serde_json::from_str(text).map_err(|e| parse_err(format!("invalid JSON: {e}")))?;

    let mut loop_ids = BTreeMap::new();
    let mut loops = Vec::new();
    for (i, l) in doc.loops.iter().enumerate() {
        if l.trip_count == 0 {
            return Err(FrontendError::UnsupportedConstruct(format!(
                "loop {} has trip count 0",
                l.id
            )));
        }
        if loop_ids.insert(l.id.clone(), LoopId(i)).is_some() {
            return Err(parse_err(format!("duplicate loop id {}", l.id)));
        }
        loops.push(LoopDecl { iterator: l.id.clone(), trip_count_ori: l.trip_count });
    }

    let mut array_ids = BTreeMap::new();
    let mut arrays = Vec::new();
    for (i, a) in doc.arrays.iter().enumerate() {
        if array_ids.insert(a.id.clone(), ArrayId(i)).is_some() {
            return Err(parse_err(format!("duplicate array id {}", a.id)));
        }
        arrays.push(ArrayDecl {
            name: a.id.clone(),
            dims: a.dims.clone(),
            elem_bits: a.elem_bits,
            io_class: a.io_class,
        });
    }

    let lookup_loop = |name: &str| {
        loop_ids
            .get(name)
            .copied()
            .ok_or_else(|| parse_err(format!("unknown loop `{name}`")))
    };
    let parse_access = |acc: &AccessDoc| -> Result<ArrayAccess, FrontendError> {
        let array = *array_ids
            .get(&acc.array)
            .ok_or_else(|| parse_err(format!("unknown array `{}`", acc.array)))?;
        let mut index = Vec::new();
        for sub in &acc.index {
            let (name, offset) = parse_subscript(sub)?;
            index.push(IndexExpr { loop_id: lookup_loop(&name)?, offset });
        }
        Ok(ArrayAccess { array, index })
    };

    let mut statements = Vec::new();
    for st in &doc.statements {
        let loops_r: Result<Vec<_>, _> = st.loops.iter().map(|n| lookup_loop(n)).collect();
        let red_r: Result<Vec<_>, _> = st.reduction_loops.iter().map(|n| lookup_loop(n)).collect();
        let reads_r: Result<Vec<_>, _> = st.reads.iter().map(&parse_access).collect();
        let mut op_counts = OpCounts::new();
        for (k, v) in &st.op_counts {
            op_counts.insert(op_from_key(k)?, *v);
        }
        statements.push(Statement {
            name: st.id.clone(),
            loops: loops_r?,
            reduction_loops: red_r?,
            write: parse_access(&st.write)?,
            reads: reads_r?,
            op_counts,
        });
    }

    let nests = derive_nests(&statements);
    let kernel = AffineKernel { name: doc.name, loops, arrays, statements, nests };
    kernel.validate()?;
    Ok(kernel)
}

/// Print a kernel back to its canonical JSON form.
pub fn print(kernel: &AffineKernel) -> String {
    let loop_name = |l: LoopId| kernel.loop_decl(l).iterator.clone();
    let print_access = |acc: &ArrayAccess| AccessDoc {
        array: kernel.array(acc.array).name.clone(),
        index: acc
            .index
            .iter()
            .map(|ix| print_subscript(&kernel.loop_decl(ix.loop_id).iterator, ix.offset))
            .collect(),
    };
    let doc = KernelDoc {
        name: kernel.name.clone(),
        loops: kernel
            .loops
            .iter()
            .map(|l| LoopDoc { id: l.iterator.clone(), trip_count: l.trip_count_ori })
            .collect(),
        arrays: kernel
            .arrays
            .iter()
            .map(|a| ArrayDoc {
                id: a.name.clone(),
                dims: a.dims.clone(),
                elem_bits: a.elem_bits,
                io_class: a.io_class,
            })
            .collect(),
        statements: kernel
            .statements
            .iter()
            .map(|s| StatementDoc {
                id: s.name.clone(),
                loops: s.loops.iter().map(|l| loop_name(*l)).collect(),
                reduction_loops: s.reduction_loops.iter().map(|l| loop_name(*l)).collect(),
                write: print_access(&s.write),
                reads: s.reads.iter().map(print_access).collect(),
                op_counts: s
                    .op_counts
                    .iter()
                    .map(|(k, v)| (k.symbol().to_string(), *v))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("kernel serialization cannot fail")
}
