//! Static checks that run after schema expansion and before code generation:
//! struct registration, schema generation, `infer` target resolution and
//! struct literal shape. Variable resolution happens during codegen, which
//! reports unknown names through the same error type.

use crate::frontend::ast::*;
use crate::schema::{generate_schema, JsonSchema, StructDef, StructRegistry, TypeTag};

use super::AnalysisError;

pub struct Analyzed {
    pub block: Block,
    pub registry: StructRegistry,
    /// Parallel to `registry.defs()`.
    pub schemas: Vec<JsonSchema>,
}

fn err(span: Span, message: impl Into<String>) -> AnalysisError {
    AnalysisError {
        line: span.line,
        column: span.column,
        message: message.into(),
    }
}

fn collect_decls<'a>(block: &'a Block, out: &mut Vec<(&'a StructDecl, Span)>) {
    for stmt in block {
        match &stmt.kind {
            StmtKind::StructDecl(d) => out.push((d, stmt.span)),
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                collect_decls(then_block, out);
                if let Some(b) = else_block {
                    collect_decls(b, out);
                }
            }
            StmtKind::TryCatch { body, handler, .. } => {
                collect_decls(body, out);
                collect_decls(handler, out);
            }
            StmtKind::TurnDecl(t) => collect_decls(&t.body, out),
            _ => {}
        }
    }
}

/// Register user and synthesized structs, generate every schema, and check
/// every use site.
pub fn analyze(block: Block, synthesized: Vec<StructDef>) -> Result<Analyzed, AnalysisError> {
    let mut decls = Vec::new();
    collect_decls(&block, &mut decls);

    let mut registry = StructRegistry::new();
    let mut spans = Vec::new();
    for (decl, span) in &decls {
        let mut fields = Vec::with_capacity(decl.fields.len());
        for (name, ty) in &decl.fields {
            let tag = TypeTag::from_name(ty).map_err(|e| err(*span, format!("struct {}: {e}", decl.name)))?;
            fields.push((name.clone(), tag));
        }
        if !registry.insert(StructDef {
            name: decl.name.clone(),
            fields,
        }) {
            return Err(err(*span, format!("duplicate struct name {}", decl.name)));
        }
        spans.push(*span);
    }
    for def in synthesized {
        let name = def.name.clone();
        if !registry.insert(def) {
            return Err(err(Span::default(), format!("duplicate struct name {name}")));
        }
        spans.push(Span::default());
    }

    let mut schemas = Vec::with_capacity(registry.len());
    for (def, span) in registry.defs().iter().zip(&spans) {
        let schema = generate_schema(def, &registry).map_err(|e| err(*span, e.to_string()))?;
        schemas.push(schema);
    }

    let checker = Checker { registry: &registry };
    checker.block(&block, true)?;
    Ok(Analyzed {
        block,
        registry,
        schemas,
    })
}

struct Checker<'a> {
    registry: &'a StructRegistry,
}

impl Checker<'_> {
    fn block(&self, block: &Block, top_level: bool) -> Result<(), AnalysisError> {
        for stmt in block {
            self.stmt(stmt, top_level)?;
        }
        Ok(())
    }

    fn stmt(&self, stmt: &Stmt, top_level: bool) -> Result<(), AnalysisError> {
        match &stmt.kind {
            StmtKind::StructDecl(_) | StmtKind::Suspend => Ok(()),
            StmtKind::Let { value, .. } => self.expr(value),
            StmtKind::TurnDecl(t) => {
                if !top_level {
                    return Err(err(
                        stmt.span,
                        format!(
                            "named turn {} must be declared at top level",
                            t.name.as_deref().unwrap_or("")
                        ),
                    ));
                }
                self.block(&t.body, false)
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond)?;
                self.block(then_block, false)?;
                if let Some(b) = else_block {
                    self.block(b, false)?;
                }
                Ok(())
            }
            StmtKind::TryCatch { body, handler, .. } => {
                self.block(body, false)?;
                self.block(handler, false)
            }
            StmtKind::Throw(e) | StmtKind::Echo(e) | StmtKind::ContextAppend(e) | StmtKind::ContextSystem(e) => {
                self.expr(e)
            }
            StmtKind::Return(e) => e.as_ref().map_or(Ok(()), |e| self.expr(e)),
            StmtKind::Send { pid, value } => {
                self.expr(pid)?;
                self.expr(value)
            }
            StmtKind::Expr(e) => self.expr(e),
        }
    }

    fn exprs<'e>(&self, exprs: impl IntoIterator<Item = &'e Expr>) -> Result<(), AnalysisError> {
        for e in exprs {
            self.expr(e)?;
        }
        Ok(())
    }

    fn expr(&self, expr: &Expr) -> Result<(), AnalysisError> {
        match &expr.kind {
            ExprKind::Literal(_)
            | ExprKind::Identifier(_)
            | ExprKind::Receive
            | ExprKind::SelfPid
            | ExprKind::GrantIdentity { .. } => Ok(()),
            ExprKind::UseSchema { protocol, .. } => Err(err(
                expr.span,
                format!("use schema::{protocol} was not expanded"),
            )),
            ExprKind::ListLit(items) => self.exprs(items),
            ExprKind::MapLit(fields) => self.exprs(fields.iter().map(|(_, e)| e)),
            ExprKind::StructLit { type_name, fields } => {
                let def = self
                    .registry
                    .get(type_name)
                    .ok_or_else(|| err(expr.span, format!("unknown struct {type_name}")))?;
                for (i, (name, _)) in fields.iter().enumerate() {
                    if def.field_type(name).is_none() {
                        return Err(err(expr.span, format!("struct {type_name} has no field {name}")));
                    }
                    if fields[..i].iter().any(|(n, _)| n == name) {
                        return Err(err(expr.span, format!("field {name} initialized twice")));
                    }
                }
                if let Some((missing, _)) = def.fields.iter().find(|(f, _)| !fields.iter().any(|(n, _)| n == f)) {
                    return Err(err(
                        expr.span,
                        format!("struct literal {type_name} is missing field {missing}"),
                    ));
                }
                self.exprs(fields.iter().map(|(_, e)| e))
            }
            ExprKind::FieldAccess { expr, .. } => self.expr(expr),
            ExprKind::Index { expr, index } => {
                self.expr(expr)?;
                self.expr(index)
            }
            ExprKind::Call { callee, args } => {
                self.expr(callee)?;
                self.exprs(args)
            }
            ExprKind::Binary { lhs, rhs, .. } => {
                self.expr(lhs)?;
                self.expr(rhs)
            }
            ExprKind::Unary { expr, .. } | ExprKind::Confidence(expr) | ExprKind::Recall(expr) => self.expr(expr),
            ExprKind::Infer { type_name, prompt } => {
                if self.registry.get(type_name).is_none() {
                    return Err(err(expr.span, format!("unknown struct {type_name}")));
                }
                self.expr(prompt)
            }
            ExprKind::CallTool { args, .. } => self.exprs(args),
            ExprKind::Remember { key, value } => {
                self.expr(key)?;
                self.expr(value)
            }
            ExprKind::Spawn { body, .. } | ExprKind::Turn(body) => self.block(&body.body, false),
            ExprKind::SpawnEach { list, body } => {
                if body.params.len() != 1 {
                    return Err(err(
                        expr.span,
                        format!("spawn_each body takes exactly one parameter, found {}", body.params.len()),
                    ));
                }
                self.expr(list)?;
                self.block(&body.body, false)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn check(src: &str) -> Result<Analyzed, AnalysisError> {
        analyze(parse_source(src).unwrap(), Vec::new())
    }

    #[test]
    fn unknown_infer_target() {
        let e = check("let x = infer Q { \"p\" }").err().unwrap();
        assert_eq!(e.message, "unknown struct Q");
        assert_eq!(e.line, 1);
    }

    #[test]
    fn duplicate_struct() {
        let e = check("struct A { x: Num }\nstruct A { y: Str }").err().unwrap();
        assert_eq!(e.message, "duplicate struct name A");
        assert_eq!(e.line, 2);
    }

    #[test]
    fn struct_literal_shape() {
        assert!(check("struct P { x: Num, y: Num }\nlet p = P { x: 1, y: 2 }").is_ok());
        let missing = check("struct P { x: Num, y: Num }\nlet p = P { x: 1 }").err().unwrap();
        assert!(missing.message.contains("missing field y"), "{}", missing.message);
        let extra = check("struct P { x: Num }\nlet p = P { x: 1, z: 2 }").err().unwrap();
        assert!(extra.message.contains("no field z"));
    }

    #[test]
    fn schemas_follow_registry_order() {
        let a = check("struct A { b: B }\nstruct B { n: Num }").unwrap();
        assert_eq!(a.schemas.len(), 2);
        assert_eq!(
            a.schemas[0].canonical(),
            r#"{"type":"object","properties":{"b":{"type":"object","properties":{"n":{"type":"number"}},"required":["n"]}},"required":["b"]}"#
        );
    }

    #[test]
    fn cycles_and_bad_field_types_are_reported() {
        assert!(check("struct A { b: B }\nstruct B { a: A }").is_err());
        let e = check("struct A { who: Identity }").err().unwrap();
        assert!(e.message.contains("Identity"));
    }

    #[test]
    fn named_turns_only_at_top_level() {
        assert!(check("turn f() { return 1 }").is_ok());
        assert!(check("if true { turn g() { return 1 } }").is_err());
    }

    #[test]
    fn spawn_each_arity() {
        assert!(check("let r = spawn_each([1], turn(x) { return x })").is_ok());
        assert!(check("let r = spawn_each([1], turn(x, y) { return x })").is_err());
    }
}
