//! Source printer for the AST. Output re-parses to a structurally equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_program(block: &Block) -> String {
    let mut p = Printer::default();
    for stmt in block {
        p.stmt(stmt);
    }
    p.out
}

pub fn print_expr(expr: &Expr) -> String {
    let mut p = Printer::default();
    p.expr(expr);
    p.out
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '\n' => q.push_str("\\n"),
            '\t' => q.push_str("\\t"),
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn number(n: f64) -> String {
    // Rust's shortest round-trip Display, with exponent form for huge/tiny values
    let s = format!("{n}");
    if s.len() > 24 {
        format!("{n:e}")
    } else {
        s
    }
}

impl Printer {
    fn line_start(&mut self) {
        for _ in 0..self.indent {
            self.out.push_str("    ");
        }
    }

    fn block(&mut self, block: &Block) {
        self.out.push_str("{\n");
        self.indent += 1;
        for s in block {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line_start();
        self.out.push('}');
    }

    fn stmt(&mut self, stmt: &Stmt) {
        self.line_start();
        self.stmt_inline(stmt);
        self.out.push('\n');
    }

    fn stmt_inline(&mut self, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::StructDecl(d) => {
                let fields: Vec<String> = d.fields.iter().map(|(f, t)| format!("{f}: {t}")).collect();
                let _ = write!(self.out, "struct {} {{ {} }}", d.name, fields.join(", "));
            }
            StmtKind::Let { name, value } => {
                let _ = write!(self.out, "let {name} = ");
                self.expr(value);
            }
            StmtKind::TurnDecl(t) => self.turn(t),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.out.push_str("if ");
                self.expr(cond);
                self.out.push(' ');
                self.block(then_block);
                if let Some(e) = else_block {
                    self.out.push_str(" else ");
                    self.block(e);
                }
            }
            StmtKind::TryCatch {
                body,
                err_name,
                handler,
            } => {
                self.out.push_str("try ");
                self.block(body);
                let _ = write!(self.out, " catch {err_name} ");
                self.block(handler);
            }
            StmtKind::Throw(e) => {
                self.out.push_str("throw ");
                self.expr(e);
            }
            StmtKind::Echo(e) => {
                self.out.push_str("echo ");
                self.expr(e);
            }
            StmtKind::Return(e) => {
                self.out.push_str("return");
                if let Some(e) = e {
                    self.out.push(' ');
                    self.expr(e);
                }
            }
            StmtKind::Send { pid, value } => {
                self.out.push_str("send ");
                self.expr(pid);
                self.out.push_str(", ");
                self.expr(value);
            }
            StmtKind::ContextAppend(e) => {
                self.out.push_str("context.append(");
                self.expr(e);
                self.out.push(')');
            }
            StmtKind::ContextSystem(e) => {
                self.out.push_str("context.system(");
                self.expr(e);
                self.out.push(')');
            }
            StmtKind::Suspend => self.out.push_str("suspend"),
            // A bare struct or map literal statement would be ambiguous with a block.
            StmtKind::Expr(e) => self.expr(e),
        }
    }

    fn turn(&mut self, t: &TurnDecl) {
        self.out.push_str("turn");
        if let Some(name) = &t.name {
            let _ = write!(self.out, " {name}");
        }
        self.out.push('(');
        for (i, p) in t.params.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.out.push_str(&p.name);
            if let Some(ty) = &p.type_name {
                let _ = write!(self.out, ": {ty}");
            }
        }
        self.out.push_str(") ");
        self.block(&t.body);
    }

    fn list(&mut self, items: &[Expr]) {
        for (i, e) in items.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            self.expr(e);
        }
    }

    fn fields(&mut self, fields: &[(String, Expr)]) {
        for (i, (k, e)) in fields.iter().enumerate() {
            if i > 0 {
                self.out.push_str(", ");
            }
            let _ = write!(self.out, "{}: ", quote(k));
            self.expr(e);
        }
    }

    fn expr(&mut self, expr: &Expr) {
        match &expr.kind {
            ExprKind::Literal(l) => match l {
                Literal::Num(n) => self.out.push_str(&number(*n)),
                Literal::Str(s) => self.out.push_str(&quote(s)),
                Literal::Bool(b) => self.out.push_str(if *b { "true" } else { "false" }),
                Literal::Null => self.out.push_str("null"),
            },
            ExprKind::Identifier(name) => self.out.push_str(name),
            ExprKind::ListLit(items) => {
                self.out.push('[');
                self.list(items);
                self.out.push(']');
            }
            ExprKind::MapLit(fields) => {
                self.out.push('{');
                self.fields(fields);
                self.out.push('}');
            }
            ExprKind::StructLit { type_name, fields } => {
                let _ = write!(self.out, "({type_name} {{");
                for (i, (k, e)) in fields.iter().enumerate() {
                    if i > 0 {
                        self.out.push_str(", ");
                    }
                    let _ = write!(self.out, "{k}: ");
                    self.expr(e);
                }
                self.out.push_str("})");
            }
            ExprKind::FieldAccess { expr, field } => {
                self.expr(expr);
                let _ = write!(self.out, ".{field}");
            }
            ExprKind::Index { expr, index } => {
                self.expr(expr);
                self.out.push('[');
                self.expr(index);
                self.out.push(']');
            }
            ExprKind::Call { callee, args } => {
                self.expr(callee);
                self.out.push('(');
                self.list(args);
                self.out.push(')');
            }
            ExprKind::Binary { op, lhs, rhs } => {
                self.out.push('(');
                self.expr(lhs);
                let _ = write!(self.out, " {} ", op.symbol());
                self.expr(rhs);
                self.out.push(')');
            }
            ExprKind::Unary { op, expr } => {
                self.out.push('(');
                self.out.push_str(match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "not ",
                });
                self.expr(expr);
                self.out.push(')');
            }
            ExprKind::Infer { type_name, prompt } => {
                let _ = write!(self.out, "infer {type_name} {{ ");
                self.expr(prompt);
                self.out.push_str(" }");
            }
            ExprKind::Confidence(e) => {
                self.out.push_str("(confidence ");
                self.expr(e);
                self.out.push(')');
            }
            ExprKind::CallTool { tool_name, args } => {
                let _ = write!(self.out, "call({}", quote(tool_name));
                for a in args {
                    self.out.push_str(", ");
                    self.expr(a);
                }
                self.out.push(')');
            }
            ExprKind::Remember { key, value } => {
                self.out.push_str("remember(");
                self.expr(key);
                self.out.push_str(", ");
                self.expr(value);
                self.out.push(')');
            }
            ExprKind::Recall(key) => {
                self.out.push_str("recall(");
                self.expr(key);
                self.out.push(')');
            }
            ExprKind::Spawn { kind, body } => {
                self.out.push_str(match kind {
                    SpawnKind::Plain => "spawn ",
                    SpawnKind::Linked => "spawn_link ",
                });
                self.turn(body);
            }
            ExprKind::SpawnEach { list, body } => {
                self.out.push_str("spawn_each(");
                self.expr(list);
                self.out.push_str(", ");
                self.turn(body);
                self.out.push(')');
            }
            ExprKind::Receive => self.out.push_str("receive"),
            ExprKind::SelfPid => self.out.push_str("self"),
            ExprKind::GrantIdentity { class, provider } => {
                let _ = write!(self.out, "grant identity::{class}({})", quote(provider));
            }
            ExprKind::UseSchema { protocol, url } => {
                let _ = write!(self.out, "use schema::{protocol}({})", quote(url));
            }
            ExprKind::Turn(t) => {
                self.out.push('(');
                self.turn(t);
                self.out.push(')');
            }
        }
    }
}
