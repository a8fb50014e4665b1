//! Lowers an analyzed AST to a [`Program`].

use std::collections::HashMap;

use crate::frontend::ast::*;

use super::analysis::Analyzed;
use super::bytecode::{Chunk, Constant, Instruction as I, Program, StructEntry};
use super::AnalysisError;

struct FnState {
    chunk: u32,
    /// Named turns cannot capture; anonymous ones capture enclosing locals.
    is_named: bool,
    scopes: Vec<Vec<(String, u32)>>,
    captures: Vec<(String, u32, u32)>,
    next_slot: u32,
    code: Vec<I>,
    lines: Vec<u32>,
}

impl FnState {
    fn new(chunk: u32, is_named: bool) -> Self {
        Self {
            chunk,
            is_named,
            scopes: vec![Vec::new()],
            captures: Vec::new(),
            next_slot: 0,
            code: Vec::new(),
            lines: Vec::new(),
        }
    }

    fn declare(&mut self, name: &str) -> u32 {
        let slot = self.next_slot;
        self.next_slot += 1;
        self.scopes.last_mut().expect("scope").push((name.to_string(), slot));
        slot
    }

    fn local(&self, name: &str) -> Option<u32> {
        for scope in self.scopes.iter().rev() {
            if let Some((_, slot)) = scope.iter().rev().find(|(n, _)| n == name) {
                return Some(*slot);
            }
        }
        self.captures.iter().find(|(n, _, _)| n == name).map(|(_, _, own)| *own)
    }
}

struct Codegen {
    module: String,
    constants: Vec<Constant>,
    names: Vec<String>,
    name_index: HashMap<String, u32>,
    structs: Vec<StructEntry>,
    chunks: Vec<Option<Chunk>>,
    named: Vec<(String, u32)>,
    fns: Vec<FnState>,
    line: u32,
}

fn err(span: Span, message: impl Into<String>) -> AnalysisError {
    AnalysisError {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

/// Generate bytecode for an analyzed program.
pub fn generate(analyzed: &Analyzed, module: &str) -> Result<Program, AnalysisError> {
    let structs = analyzed
        .registry
        .defs()
        .iter()
        .zip(&analyzed.schemas)
        .map(|(def, schema)| StructEntry {
            def: def.clone(),
            schema: schema.clone(),
        })
        .collect();
    let mut g = Codegen {
        module: module.to_string(),
        constants: Vec::new(),
        names: Vec::new(),
        name_index: HashMap::new(),
        structs,
        chunks: vec![None],
        named: Vec::new(),
        fns: vec![FnState::new(0, true)],
        line: 1,
    };
    // hoist named turns so they may be referenced before their declaration
    for stmt in &analyzed.block {
        if let StmtKind::TurnDecl(t) = &stmt.kind {
            let name = t.name.clone().unwrap_or_default();
            if g.named.iter().any(|(n, _)| *n == name) {
                return Err(err(stmt.span, format!("duplicate turn name {name}")));
            }
            g.chunks.push(None);
            g.named.push((name, (g.chunks.len() - 1) as u32));
        }
    }
    for stmt in &analyzed.block {
        g.stmt(stmt)?;
    }
    g.emit(I::Halt);
    g.finish_fn(String::from("<main>"), 0);
    Ok(Program {
        module: g.module,
        constants: g.constants,
        names: g.names,
        structs: g.structs,
        chunks: g.chunks.into_iter().map(|c| c.expect("every chunk compiled")).collect(),
        exports: g.named,
    })
}

impl Codegen {
    fn cur(&mut self) -> &mut FnState {
        self.fns.last_mut().expect("function")
    }

    fn emit(&mut self, ins: I) -> usize {
        let line = self.line;
        let f = self.cur();
        f.code.push(ins);
        f.lines.push(line);
        f.code.len() - 1
    }

    fn here(&mut self) -> u32 {
        self.cur().code.len() as u32
    }

    fn patch(&mut self, at: usize, target: u32) {
        let code = &mut self.cur().code;
        code[at] = match code[at] {
            I::Jump(_) => I::Jump(target),
            I::JumpIfFalse(_) => I::JumpIfFalse(target),
            I::TryPush(_) => I::TryPush(target),
            other => unreachable!("patching {other:?}"),
        };
    }

    fn constant(&mut self, c: Constant) -> u32 {
        if let Some(i) = self.constants.iter().position(|k| match (k, &c) {
            // bitwise so that 0.0 and -0.0 stay distinct
            (Constant::Num(a), Constant::Num(b)) => a.to_bits() == b.to_bits(),
            (a, b) => a == b,
        }) {
            return i as u32;
        }
        self.constants.push(c);
        (self.constants.len() - 1) as u32
    }

    fn name(&mut self, n: &str) -> u32 {
        if let Some(&i) = self.name_index.get(n) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(n.to_string());
        self.name_index.insert(n.to_string(), i);
        i
    }

    fn struct_index(&self, name: &str, span: Span) -> Result<u32, AnalysisError> {
        self.structs
            .iter()
            .position(|s| s.def.name == name)
            .map(|i| i as u32)
            .ok_or_else(|| err(span, format!("unknown struct {name}")))
    }

    fn resolve(&mut self, depth: usize, name: &str) -> Option<u32> {
        if let Some(slot) = self.fns[depth].local(name) {
            return Some(slot);
        }
        if depth == 0 || self.fns[depth].is_named {
            return None;
        }
        let outer = self.resolve(depth - 1, name)?;
        let f = &mut self.fns[depth];
        let own = f.next_slot;
        f.next_slot += 1;
        f.captures.push((name.to_string(), outer, own));
        Some(own)
    }

    fn finish_fn(&mut self, name: String, arity: u32) -> u32 {
        let f = self.fns.pop().expect("function");
        let chunk = Chunk {
            name,
            arity,
            captures: f.captures.iter().map(|(_, outer, own)| (*outer, *own)).collect(),
            locals: f.next_slot,
            code: f.code,
            lines: f.lines,
        };
        self.chunks[f.chunk as usize] = Some(chunk);
        f.chunk
    }

    /// Compile a turn body into its own chunk and return the chunk index.
    fn function(&mut self, t: &TurnDecl, chunk: Option<u32>) -> Result<u32, AnalysisError> {
        let is_named = chunk.is_some();
        let saved_line = self.line;
        let chunk = chunk.unwrap_or_else(|| {
            self.chunks.push(None);
            (self.chunks.len() - 1) as u32
        });
        let mut f = FnState::new(chunk, is_named);
        for p in &t.params {
            f.declare(&p.name);
        }
        self.fns.push(f);
        for stmt in &t.body {
            self.stmt(stmt)?;
        }
        let null = self.constant(Constant::Null);
        self.emit(I::Const(null));
        self.emit(I::Return);
        self.line = saved_line;
        let name = t.name.clone().unwrap_or_else(|| format!("<turn@{saved_line}>"));
        Ok(self.finish_fn(name, t.params.len() as u32))
    }

    fn block(&mut self, block: &Block) -> Result<(), AnalysisError> {
        self.cur().scopes.push(Vec::new());
        for stmt in block {
            self.stmt(stmt)?;
        }
        self.cur().scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, stmt: &Stmt) -> Result<(), AnalysisError> {
        self.line = stmt.span.line;
        match &stmt.kind {
            StmtKind::StructDecl(_) => {}
            StmtKind::Let { name, value } => {
                self.expr(value)?;
                let slot = self.cur().declare(name);
                self.emit(I::StoreLocal(slot));
            }
            StmtKind::TurnDecl(t) => {
                let name = t.name.as_deref().unwrap_or_default();
                let chunk = self.named.iter().find(|(n, _)| n == name).map(|(_, c)| *c);
                self.function(t, chunk)?;
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond)?;
                let jf = self.emit(I::JumpIfFalse(0));
                self.block(then_block)?;
                if let Some(else_block) = else_block {
                    let jend = self.emit(I::Jump(0));
                    let target = self.here();
                    self.patch(jf, target);
                    self.block(else_block)?;
                    let end = self.here();
                    self.patch(jend, end);
                } else {
                    let end = self.here();
                    self.patch(jf, end);
                }
            }
            StmtKind::TryCatch {
                body,
                err_name,
                handler,
            } => {
                let push = self.emit(I::TryPush(0));
                self.block(body)?;
                self.emit(I::TryPop);
                let jend = self.emit(I::Jump(0));
                let target = self.here();
                self.patch(push, target);
                self.cur().scopes.push(Vec::new());
                let slot = self.cur().declare(err_name);
                self.emit(I::StoreLocal(slot));
                for s in handler {
                    self.stmt(s)?;
                }
                self.cur().scopes.pop();
                let end = self.here();
                self.patch(jend, end);
            }
            StmtKind::Throw(e) => {
                self.expr(e)?;
                self.emit(I::Throw);
            }
            StmtKind::Echo(e) => {
                self.expr(e)?;
                self.emit(I::Echo);
            }
            StmtKind::Return(e) => {
                match e {
                    Some(e) => self.expr(e)?,
                    None => {
                        let null = self.constant(Constant::Null);
                        self.emit(I::Const(null));
                    }
                }
                self.emit(I::Return);
            }
            StmtKind::Send { pid, value } => {
                self.expr(pid)?;
                self.expr(value)?;
                self.emit(I::Send);
            }
            StmtKind::ContextAppend(e) => {
                self.expr(e)?;
                self.emit(I::ContextAppend);
            }
            StmtKind::ContextSystem(e) => {
                self.expr(e)?;
                self.emit(I::ContextSystem);
            }
            StmtKind::Suspend => {
                self.emit(I::Suspend);
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
                self.emit(I::Pop);
            }
        }
        Ok(())
    }

    fn exprs(&mut self, exprs: &[Expr]) -> Result<(), AnalysisError> {
        for e in exprs {
            self.expr(e)?;
        }
        Ok(())
    }

    fn pairs(&mut self, fields: &[(String, Expr)]) -> Result<(), AnalysisError> {
        for (k, e) in fields {
            let c = self.constant(Constant::Str(k.clone()));
            self.emit(I::Const(c));
            self.expr(e)?;
        }
        Ok(())
    }

    fn expr(&mut self, expr: &Expr) -> Result<(), AnalysisError> {
        if expr.span.line > 0 {
            self.line = expr.span.line;
        }
        match &expr.kind {
            ExprKind::Literal(l) => {
                let c = self.constant(match l {
                    Literal::Num(n) => Constant::Num(*n),
                    Literal::Str(s) => Constant::Str(s.clone()),
                    Literal::Bool(b) => Constant::Bool(*b),
                    Literal::Null => Constant::Null,
                });
                self.emit(I::Const(c));
            }
            ExprKind::Identifier(name) => {
                let depth = self.fns.len() - 1;
                if let Some(slot) = self.resolve(depth, name) {
                    self.emit(I::LoadLocal(slot));
                } else if let Some(chunk) = self.named.iter().find(|(n, _)| n == name).map(|(_, c)| *c) {
                    self.emit(I::LoadTurn(chunk));
                } else {
                    return Err(err(expr.span, format!("unknown variable {name}")));
                }
            }
            ExprKind::ListLit(items) => {
                self.exprs(items)?;
                self.emit(I::MakeList(items.len() as u32));
            }
            ExprKind::MapLit(fields) => {
                self.pairs(fields)?;
                self.emit(I::MakeMap(fields.len() as u32));
            }
            ExprKind::StructLit { type_name, fields } => {
                let idx = self.struct_index(type_name, expr.span)?;
                self.pairs(fields)?;
                self.emit(I::MakeStruct(idx, fields.len() as u32));
            }
            ExprKind::FieldAccess { expr, field } => {
                self.expr(expr)?;
                let n = self.name(field);
                self.emit(I::GetField(n));
            }
            ExprKind::Index { expr, index } => {
                self.expr(expr)?;
                self.expr(index)?;
                self.emit(I::Index);
            }
            ExprKind::Call { callee, args } => {
                self.expr(callee)?;
                self.exprs(args)?;
                self.emit(I::Call(args.len() as u32));
            }
            ExprKind::Binary { op, lhs, rhs } => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                let ins = match op {
                    BinaryOp::Add => I::Add,
                    BinaryOp::Sub => I::Sub,
                    BinaryOp::Mul => I::Mul,
                    BinaryOp::Div => I::Div,
                    BinaryOp::Lt => I::CmpLt,
                    BinaryOp::Le => I::CmpLe,
                    BinaryOp::Gt => I::CmpGt,
                    BinaryOp::Ge => I::CmpGe,
                    BinaryOp::Eq | BinaryOp::Ne => I::CmpEq,
                    BinaryOp::And => I::And,
                    BinaryOp::Or => I::Or,
                };
                self.emit(ins);
                if *op == BinaryOp::Ne {
                    self.emit(I::Not);
                }
            }
            ExprKind::Unary { op, expr } => {
                self.expr(expr)?;
                self.emit(match op {
                    UnaryOp::Neg => I::Neg,
                    UnaryOp::Not => I::Not,
                });
            }
            ExprKind::Infer { type_name, prompt } => {
                let idx = self.struct_index(type_name, expr.span)?;
                self.expr(prompt)?;
                self.emit(I::Infer(idx));
            }
            ExprKind::Confidence(e) => {
                self.expr(e)?;
                self.emit(I::Confidence);
            }
            ExprKind::CallTool { tool_name, args } => {
                self.exprs(args)?;
                let n = self.name(tool_name);
                self.emit(I::CallTool(n, args.len() as u32));
            }
            ExprKind::Remember { key, value } => {
                self.expr(key)?;
                self.expr(value)?;
                self.emit(I::Remember);
            }
            ExprKind::Recall(key) => {
                self.expr(key)?;
                self.emit(I::Recall);
            }
            ExprKind::Spawn { kind, body } => {
                let chunk = self.function(body, None)?;
                self.emit(match kind {
                    SpawnKind::Plain => I::Spawn(chunk),
                    SpawnKind::Linked => I::SpawnLink(chunk),
                });
            }
            ExprKind::SpawnEach { list, body } => {
                self.expr(list)?;
                let chunk = self.function(body, None)?;
                self.emit(I::SpawnEach(chunk));
            }
            ExprKind::Receive => {
                self.emit(I::Receive);
            }
            ExprKind::SelfPid => {
                self.emit(I::SelfPid);
            }
            ExprKind::GrantIdentity { class, provider } => {
                let c = self.name(class);
                let p = self.name(provider);
                self.emit(I::GrantIdentity(c, p));
            }
            ExprKind::UseSchema { protocol, .. } => {
                return Err(err(expr.span, format!("use schema::{protocol} was not expanded")));
            }
            ExprKind::Turn(t) => {
                let chunk = self.function(t, None)?;
                self.emit(I::MakeClosure(chunk));
            }
        }
        Ok(())
    }
}
