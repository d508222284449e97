//! Hand-rolled parser for the restricted affine-C input form.
//!
//! The accepted subset (EBNF in `docs/affine-c.md`): a single function whose
//! parameters declare the arrays, containing only rectangular `for` loops
//! with literal `0` lower bounds and literal integer upper bounds, and
//! assignment statements whose subscripts are `iterator` or
//! `iterator +- constant`. Anything else is rejected with either a parse
//! error or `UnsupportedConstruct`.

use std::collections::BTreeMap;

use crate::error::FrontendError;
use crate::ir::*;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

const SYMBOLS: [&str; 22] = [
    "+=", "-=", "*=", "/=", "++", "==", "<=", ">=", "(", ")", "{", "}", "[", "]", ";", ",", "=",
    "<", ">", "+", "-", "*",
];

fn lex(src: &str) -> Result<Lexer, FrontendError> {
    let mut toks = Vec::new();
    let bytes = src.as_bytes();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    'outer: while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            i += 2;
            while i + 1 < bytes.len() && !(bytes[i] == b'*' && bytes[i + 1] == b'/') {
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            i += 2;
            continue;
        }
        if c == '#' {
            // Pragmas and preprocessor lines are ignored.
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            toks.push((Tok::Ident(word.to_string()), line, col));
            col += i - start;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let word = &src[start..i];
            if word.contains('.') {
                // Float literals appear only as constants in statement bodies.
                toks.push((Tok::Int(0), line, col));
            } else {
                let v = word.parse().map_err(|_| FrontendError::Parse {
                    line,
                    col,
                    msg: format!("integer literal `{word}` out of range"),
                })?;
                toks.push((Tok::Int(v), line, col));
            }
            col += i - start;
            continue;
        }
        for sym in SYMBOLS {
            if src[i..].starts_with(sym) {
                toks.push((Tok::Sym(sym), line, col));
                i += sym.len();
                col += sym.len();
                continue 'outer;
            }
        }
        return Err(FrontendError::Parse { line, col, msg: format!("unexpected character `{c}`") });
    }
    Ok(Lexer { toks, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((0, 0))
    }

    fn err(&self, msg: impl Into<String>) -> FrontendError {
        let (line, col) = self.loc();
        FrontendError::Parse { line, col, msg: msg.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        match self.next() {
            Some(Tok::Sym(t)) if t == s => Ok(()),
            other => Err(self.err(format!("expected `{s}`, found {other:?}"))),
        }
    }

    fn try_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(t)) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => Err(self.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn int(&mut self) -> Result<u64, FrontendError> {
        match self.next() {
            Some(Tok::Int(v)) => Ok(v),
            other => Err(self.err(format!("expected integer, found {other:?}"))),
        }
    }
}

fn elem_bits_of(ty: &str) -> Option<u32> {
    match ty {
        "char" | "int8_t" => Some(8),
        "short" | "int16_t" => Some(16),
        "float" | "int" | "int32_t" => Some(32),
        "double" | "long" | "int64_t" => Some(64),
        _ => None,
    }
}

struct Parser {
    lx: Lexer,
    loops: Vec<LoopDecl>,
    arrays: Vec<ArrayDecl>,
    /// Parameter name -> array id (None for scalar parameters).
    params: BTreeMap<String, Option<ArrayId>>,
    /// Explicit in/out/inout qualifiers by array name.
    qualifiers: BTreeMap<String, IoClass>,
    statements: Vec<Statement>,
    /// Source iterator name -> live loop binding, innermost last.
    bindings: Vec<(String, LoopId)>,
    /// Disambiguation counters for repeated iterator names.
    iter_names: BTreeMap<String, usize>,
}

impl Parser {
    fn unsupported(&self, msg: impl Into<String>) -> FrontendError {
        FrontendError::UnsupportedConstruct(msg.into())
    }

    fn parse_signature(&mut self) -> Result<String, FrontendError> {
        let _ret_ty = self.lx.ident()?;
        let name = self.lx.ident()?;
        self.lx.eat_sym("(")?;
        if !self.lx.try_sym(")") {
            loop {
                self.parse_param()?;
                if !self.lx.try_sym(",") {
                    break;
                }
            }
            self.lx.eat_sym(")")?;
        }
        Ok(name)
    }

    fn parse_param(&mut self) -> Result<(), FrontendError> {
        let mut word = self.lx.ident()?;
        let qualifier = match word.as_str() {
            "in" => Some(IoClass::Input),
            "out" => Some(IoClass::Output),
            "inout" => Some(IoClass::Output),
            _ => None,
        };
        if qualifier.is_some() {
            word = self.lx.ident()?;
        }
        if word == "const" {
            word = self.lx.ident()?;
        }
        let ty = word;
        let bits = elem_bits_of(&ty)
            .ok_or_else(|| self.unsupported(format!("unknown element type `{ty}`")))?;
        let pname = self.lx.ident()?;
        let mut dims = Vec::new();
        while self.lx.try_sym("[") {
            dims.push(self.lx.int()?);
            self.lx.eat_sym("]")?;
        }
        if dims.is_empty() {
            // Scalar parameter: usable in expressions, never an array.
            self.params.insert(pname, None);
        } else {
            let id = ArrayId(self.arrays.len());
            self.arrays.push(ArrayDecl {
                name: pname.clone(),
                dims,
                elem_bits: bits,
                // Placeholder; refined by io inference once the body is known.
                io_class: IoClass::Input,
            });
            self.params.insert(pname.clone(), Some(id));
            if let Some(q) = qualifier {
                self.qualifiers.insert(pname, q);
            }
        }
        Ok(())
    }

    fn fresh_iter_name(&mut self, base: &str) -> String {
        let n = self.iter_names.entry(base.to_string()).or_insert(0);
        *n += 1;
        if *n == 1 {
            base.to_string()
        } else {
            format!("{base}_{}", *n - 1)
        }
    }

    fn resolve_iter(&self, name: &str) -> Option<LoopId> {
        self.bindings.iter().rev().find(|(n, _)| n == name).map(|(_, id)| *id)
    }

    /// Parse one item (loop or statement) inside the current loop stack.
    fn parse_item(&mut self, stack: &mut Vec<LoopId>) -> Result<(), FrontendError> {
        if matches!(self.lx.peek(), Some(Tok::Ident(w)) if w == "for") {
            self.parse_loop(stack)
        } else {
            self.parse_statement(stack)
        }
    }

    fn parse_loop(&mut self, stack: &mut Vec<LoopId>) -> Result<(), FrontendError> {
        self.lx.ident()?; // `for`
        self.lx.eat_sym("(")?;
        if matches!(self.lx.peek(), Some(Tok::Ident(w)) if w == "int") {
            self.lx.ident()?;
        }
        let iter = self.lx.ident()?;
        self.lx.eat_sym("=")?;
        match self.lx.next() {
            Some(Tok::Int(0)) => {}
            Some(Tok::Int(_)) => {
                return Err(self.unsupported(format!("loop `{iter}` does not start at 0")))
            }
            _ => return Err(self.unsupported(format!("non-constant lower bound for `{iter}`"))),
        }
        self.lx.eat_sym(";")?;
        let cond_iter = self.lx.ident()?;
        if cond_iter != iter {
            return Err(self.lx.err("loop condition tests a different iterator"));
        }
        let bound = match (self.lx.next(), self.lx.next()) {
            (Some(Tok::Sym("<")), Some(Tok::Int(v))) => v,
            (Some(Tok::Sym("<")), Some(Tok::Ident(n))) => {
                return Err(self.unsupported(format!("non-constant trip count `{n}`")))
            }
            (Some(Tok::Sym("<=")), Some(Tok::Int(v))) => v + 1,
            _ => return Err(self.lx.err("expected `< constant` loop bound")),
        };
        if bound == 0 {
            return Err(self.unsupported(format!("loop `{iter}` has zero trip count")));
        }
        self.lx.eat_sym(";")?;
        // i++ | ++i | i += 1
        if self.lx.try_sym("++") {
            self.lx.ident()?;
        } else {
            let inc_iter = self.lx.ident()?;
            if inc_iter != iter {
                return Err(self.lx.err("increment updates a different iterator"));
            }
            if self.lx.try_sym("++") {
                // i++
            } else if self.lx.try_sym("+=") {
                if self.lx.int()? != 1 {
                    return Err(self.unsupported(format!("non-unit stride on `{iter}`")));
                }
            } else {
                return Err(self.lx.err("expected `++` or `+= 1`"));
            }
        }
        self.lx.eat_sym(")")?;

        let ir_name = self.fresh_iter_name(&iter);
        let loop_id = LoopId(self.loops.len());
        self.loops.push(LoopDecl { iterator: ir_name, trip_count_ori: bound });
        stack.push(loop_id);
        self.bindings.push((iter.clone(), loop_id));

        if self.lx.try_sym("{") {
            while !self.lx.try_sym("}") {
                if self.lx.peek().is_none() {
                    return Err(self.lx.err("unexpected end of input in loop body"));
                }
                self.parse_item(stack)?;
            }
        } else {
            self.parse_item(stack)?;
        }

        self.bindings.pop();
        stack.pop();
        Ok(())
    }

    fn parse_access_after_ident(&mut self, name: &str) -> Result<ArrayAccess, FrontendError> {
        let Some(Some(array)) = self.params.get(name).copied() else {
            return Err(self.lx.err(format!("`{name}` is not a declared array")));
        };
        let mut index = Vec::new();
        while self.lx.try_sym("[") {
            let sub = match self.lx.next() {
                Some(Tok::Ident(s)) => s,
                _ => {
                    return Err(
                        self.unsupported(format!("non-affine subscript on `{name}`"))
                    )
                }
            };
            if matches!(self.lx.peek(), Some(Tok::Sym("["))) {
                return Err(self.unsupported(format!("indirect access `{name}[{sub}[..]]`")));
            }
            if matches!(self.lx.peek(), Some(Tok::Sym("*"))) {
                return Err(self.unsupported(format!("non-affine subscript on `{name}`")));
            }
            let Some(loop_id) = self.resolve_iter(&sub) else {
                return Err(self.unsupported(format!(
                    "subscript `{sub}` of `{name}` is not an enclosing loop iterator"
                )));
            };
            let mut offset = 0i64;
            if self.lx.try_sym("+") {
                offset = self.lx.int()? as i64;
            } else if self.lx.try_sym("-") {
                offset = -(self.lx.int()? as i64);
            }
            index.push(IndexExpr { loop_id, offset });
            self.lx.eat_sym("]")?;
        }
        if index.len() != self.arrays[array.0].dims.len() {
            return Err(self.lx.err(format!(
                "access to `{name}` has {} subscripts, declaration has {}",
                index.len(),
                self.arrays[array.0].dims.len()
            )));
        }
        Ok(ArrayAccess { array, index })
    }

    fn parse_expr(
        &mut self,
        reads: &mut Vec<ArrayAccess>,
        ops: &mut OpCounts,
    ) -> Result<(), FrontendError> {
        self.parse_term(reads, ops)?;
        loop {
            let op = if self.lx.try_sym("+") {
                OpKind::Add
            } else if self.lx.try_sym("-") {
                OpKind::Sub
            } else {
                return Ok(());
            };
            *ops.entry(op).or_insert(0) += 1;
            self.parse_term(reads, ops)?;
        }
    }

    fn parse_term(
        &mut self,
        reads: &mut Vec<ArrayAccess>,
        ops: &mut OpCounts,
    ) -> Result<(), FrontendError> {
        self.parse_factor(reads, ops)?;
        loop {
            let op = if self.lx.try_sym("*") {
                OpKind::Mul
            } else if matches!(self.lx.peek(), Some(Tok::Sym("/"))) {
                self.lx.next();
                OpKind::Div
            } else {
                return Ok(());
            };
            *ops.entry(op).or_insert(0) += 1;
            self.parse_factor(reads, ops)?;
        }
    }

    fn parse_factor(
        &mut self,
        reads: &mut Vec<ArrayAccess>,
        ops: &mut OpCounts,
    ) -> Result<(), FrontendError> {
        if self.lx.try_sym("(") {
            self.parse_expr(reads, ops)?;
            return self.lx.eat_sym(")");
        }
        if self.lx.try_sym("-") {
            // Unary minus is free.
            return self.parse_factor(reads, ops);
        }
        match self.lx.next() {
            Some(Tok::Int(_)) => Ok(()),
            Some(Tok::Ident(name)) => {
                if matches!(self.lx.peek(), Some(Tok::Sym("["))) {
                    let acc = self.parse_access_after_ident(&name)?;
                    reads.push(acc);
                    Ok(())
                } else if self.resolve_iter(&name).is_some() {
                    Err(self.unsupported(format!("bare iterator `{name}` used as a value")))
                } else {
                    // Scalar parameter or free constant symbol.
                    Ok(())
                }
            }
            other => Err(self.lx.err(format!("expected expression, found {other:?}"))),
        }
    }

    fn parse_statement(&mut self, stack: &[LoopId]) -> Result<(), FrontendError> {
        let name = self.lx.ident()?;
        let write = self.parse_access_after_ident(&name)?;
        let mut reads = Vec::new();
        let mut ops = OpCounts::new();
        let compound = if self.lx.try_sym("=") {
            None
        } else if self.lx.try_sym("+=") {
            Some(OpKind::Add)
        } else if self.lx.try_sym("-=") {
            Some(OpKind::Sub)
        } else if self.lx.try_sym("*=") {
            Some(OpKind::Mul)
        } else if self.lx.try_sym("/=") {
            Some(OpKind::Div)
        } else {
            return Err(self.lx.err("expected assignment operator"));
        };
        if let Some(op) = compound {
            *ops.entry(op).or_insert(0) += 1;
            reads.push(write.clone());
        }
        self.parse_expr(&mut reads, &mut ops)?;
        self.lx.eat_sym(";")?;

        let loops: Vec<LoopId> = stack.to_vec();
        // Loops that do not index the written element must carry a reduction:
        // the statement has to read back the element it writes.
        let reduction_loops: Vec<LoopId> = loops
            .iter()
            .copied()
            .filter(|l| !write.index.iter().any(|ix| ix.loop_id == *l))
            .collect();
        if !reduction_loops.is_empty() && !reads.iter().any(|r| *r == write) {
            return Err(self.unsupported(format!(
                "statement writing `{name}` is enclosed by a loop that does not index it \
                 and is not a reduction"
            )));
        }
        let id = StmtId(self.statements.len());
        self.statements.push(Statement {
            name: format!("S{}", id.0),
            loops,
            reduction_loops,
            write,
            reads,
            op_counts: ops,
        });
        Ok(())
    }
}

/// Infer io classes: never written -> input; read by a non-writer ->
/// intermediate; otherwise output. Explicit qualifiers win.
fn infer_io(kernel: &mut AffineKernel, qualifiers: &BTreeMap<String, IoClass>) {
    for a in kernel.array_ids().collect::<Vec<_>>() {
        let writers = kernel.writers(a);
        let readers = kernel.readers(a);
        let inferred = if writers.is_empty() {
            IoClass::Input
        } else if readers.iter().any(|r| !writers.contains(r)) {
            IoClass::Intermediate
        } else {
            IoClass::Output
        };
        let decl = &mut kernel.arrays[a.0];
        decl.io_class = qualifiers.get(&decl.name).copied().unwrap_or(inferred);
    }
}

/// Parse restricted affine-C text into the kernel IR.
pub fn parse(src: &str) -> Result<AffineKernel, FrontendError> {
    let lx = lex(src)?;
    let mut p = Parser {
        lx,
        loops: Vec::new(),
        arrays: Vec::new(),
        params: BTreeMap::new(),
        qualifiers: BTreeMap::new(),
        statements: Vec::new(),
        bindings: Vec::new(),
        iter_names: BTreeMap::new(),
    };
    let name = p.parse_signature()?;
    p.lx.eat_sym("{")?;
    let mut stack = Vec::new();
    while !p.lx.try_sym("}") {
        if p.lx.peek().is_none() {
            return Err(p.lx.err("unexpected end of input"));
        }
        p.parse_item(&mut stack)?;
    }

    let nests = derive_nests(&p.statements);
    let mut kernel =
        AffineKernel { name, loops: p.loops, arrays: p.arrays, statements: p.statements, nests };
    infer_io(&mut kernel, &p.qualifiers);
    kernel.validate()?;
    Ok(kernel)
}

/// Print a kernel as restricted affine-C. Statement bodies are reconstructed
/// from the access lists and operator counts; scalar coefficients that were
/// folded away reappear as fresh `c<n>` parameters.
pub fn print(kernel: &AffineKernel) -> String {
    let mut extra_scalars = 0usize;
    let bodies: Vec<String> = kernel
        .statements
        .iter()
        .map(|st| statement_body(kernel, st, &mut extra_scalars))
        .collect();

    let mut out = String::new();
    out.push_str(&format!("void {}(", kernel.name));
    let mut parts: Vec<String> = kernel
        .arrays
        .iter()
        .map(|a| {
            let dims: String = a.dims.iter().map(|d| format!("[{d}]")).collect();
            format!("{} {} {}{}", qualifier_kw(a.io_class), ctype(a.elem_bits), a.name, dims)
        })
        .collect();
    for i in 0..extra_scalars {
        parts.push(format!("float c{i}"));
    }
    out.push_str(&parts.join(", "));
    out.push_str(") {\n");

    for nest in &kernel.nests {
        print_nest(kernel, nest, &bodies, &mut out);
    }
    out.push_str("}\n");
    out
}

fn qualifier_kw(io: IoClass) -> &'static str {
    match io {
        IoClass::Input => "in",
        IoClass::Output => "out",
        IoClass::Intermediate => "inout",
    }
}

fn ctype(bits: u32) -> &'static str {
    match bits {
        8 => "char",
        16 => "short",
        64 => "double",
        _ => "float",
    }
}

fn access_text(kernel: &AffineKernel, acc: &ArrayAccess) -> String {
    let mut s = kernel.array(acc.array).name.clone();
    for ix in &acc.index {
        let it = &kernel.loop_decl(ix.loop_id).iterator;
        s.push('[');
        match ix.offset {
            0 => s.push_str(it),
            o if o > 0 => s.push_str(&format!("{it}+{o}")),
            o => s.push_str(&format!("{it}{o}")),
        }
        s.push(']');
    }
    s
}

fn statement_body(kernel: &AffineKernel, st: &Statement, extra_scalars: &mut usize) -> String {
    let mut ops: Vec<OpKind> = Vec::new();
    for (k, v) in &st.op_counts {
        for _ in 0..*v {
            ops.push(*k);
        }
    }
    let mut reads = st.reads.clone();
    let compound = if !reads.is_empty() && reads[0] == st.write && !ops.is_empty() {
        // Self-read first: print as a compound assignment, consuming one op
        // (add if available, otherwise whichever is there).
        let idx = ops.iter().position(|o| *o == OpKind::Add).unwrap_or(0);
        reads.remove(0);
        Some(ops.remove(idx))
    } else {
        None
    };

    let mut operands: Vec<String> = reads.iter().map(|r| access_text(kernel, r)).collect();
    if operands.is_empty() {
        operands.push(if ops.is_empty() {
            "0".to_string()
        } else {
            let s = format!("c{}", *extra_scalars);
            *extra_scalars += 1;
            s
        });
    }
    // One operator joins each additional operand; leftovers bind fresh scalars.
    let mut rhs = operands.remove(0);
    for next in operands {
        let op = ops.pop().unwrap_or(OpKind::Add);
        rhs = format!("{rhs} {} {}", op.symbol(), next);
    }
    while let Some(op) = ops.pop() {
        rhs = format!("{rhs} {} c{}", op.symbol(), *extra_scalars);
        *extra_scalars += 1;
    }
    match compound {
        Some(op) => format!("{} {}= {rhs};", access_text(kernel, &st.write), op.symbol()),
        None => format!("{} = {rhs};", access_text(kernel, &st.write)),
    }
}

fn print_nest(kernel: &AffineKernel, nest: &[StmtId], bodies: &[String], out: &mut String) {
    fn rec(
        kernel: &AffineKernel,
        members: &[StmtId],
        depth: usize,
        bodies: &[String],
        out: &mut String,
    ) {
        let indent = "  ".repeat(depth + 1);
        let mut i = 0;
        while i < members.len() {
            let st = kernel.statement(members[i]);
            if st.loops.len() == depth {
                out.push_str(&format!("{indent}{}\n", bodies[members[i].0]));
                i += 1;
                continue;
            }
            // Group the run of statements sharing the next loop.
            let l = st.loops[depth];
            let mut j = i;
            while j < members.len() {
                let sj = kernel.statement(members[j]);
                if sj.loops.len() > depth && sj.loops[depth] == l {
                    j += 1;
                } else {
                    break;
                }
            }
            let decl = kernel.loop_decl(l);
            out.push_str(&format!(
                "{indent}for (int {it} = 0; {it} < {tc}; {it}++) {{\n",
                it = decl.iterator,
                tc = decl.trip_count_ori
            ));
            rec(kernel, &members[i..j], depth + 1, bodies, out);
            out.push_str(&format!("{indent}}}\n"));
            i = j;
        }
    }
    rec(kernel, nest, 0, bodies, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    const MADD: &str = "
void madd(float C[8][9], float A[8][9], float B[8][9]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < 9; j++)
      C[i][j] = A[i][j] + B[i][j];
}";

    #[test]
    fn parses_madd() {
        let k = parse(MADD).unwrap();
        assert_eq!(k.statements.len(), 1);
        assert_eq!(k.loops.len(), 2);
        assert_eq!(k.statements[0].op_counts.get(&OpKind::Add), Some(&1));
        assert_eq!(k.array(ArrayId(0)).io_class, IoClass::Output);
        assert_eq!(k.array(ArrayId(1)).io_class, IoClass::Input);
    }

    #[test]
    fn rejects_indirect_access() {
        let src = "
void f(float A[8], int B[8]) {
  for (int i = 0; i < 8; i++)
    A[B[i]] = 0;
}";
        assert!(matches!(parse(src), Err(FrontendError::UnsupportedConstruct(_))));
    }

    #[test]
    fn rejects_non_constant_bound() {
        let src = "
void f(float A[8][8]) {
  for (int i = 0; i < 8; i++)
    for (int j = 0; j < i; j++)
      A[i][j] = 0;
}";
        assert!(matches!(parse(src), Err(FrontendError::UnsupportedConstruct(_))));
    }

    #[test]
    fn gemm_reduction_inferred() {
        let src = "
void gemm(float C[4][4], float A[4][4], float B[4][4], float alpha) {
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      for (int k = 0; k < 4; k++)
        C[i][j] += alpha * A[i][k] * B[k][j];
}";
        let k = parse(src).unwrap();
        let s = &k.statements[0];
        assert_eq!(s.reduction_loops, vec![LoopId(2)]);
        assert_eq!(s.op_counts.get(&OpKind::Mul), Some(&2));
        assert_eq!(s.op_counts.get(&OpKind::Add), Some(&1));
        assert_eq!(s.reads.len(), 3); // self-read + A + B
    }
}
