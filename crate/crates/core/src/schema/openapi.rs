//! `use schema::openapi(url)` expansion.
//!
//! Runs on the parsed AST before analysis. Each `UseSchema` node is replaced
//! by an immediately invoked turn that returns a map from operationId to a
//! request closure `turn(auth, params)`, and a response struct is
//! synthesized per operation.

use std::path::PathBuf;

use serde_json::Value as Json;

use super::{SchemaError, StructDef, TypeTag};
use crate::frontend::ast::*;

/// Resolves a schema URL to document text.
pub trait SchemaFetcher {
    fn fetch(&self, url: &str) -> Result<String, String>;
}

/// Reads `file://` URLs and plain paths relative to `base_dir`; fetches
/// `http(s)://` only when network access is allowed.
#[derive(Debug, Clone, Default)]
pub struct FileFetcher {
    pub base_dir: Option<PathBuf>,
    pub allow_net: bool,
}

impl SchemaFetcher for FileFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        if url.starts_with("http://") || url.starts_with("https://") {
            if !self.allow_net {
                return Err("network fetch disabled (pass --allow-net)".into());
            }
            return ureq::get(url)
                .call()
                .map_err(|e| e.to_string())?
                .body_mut()
                .read_to_string()
                .map_err(|e| e.to_string());
        }
        let raw = url.strip_prefix("file://").unwrap_or(url);
        let mut path = PathBuf::from(raw);
        if path.is_relative() {
            if let Some(base) = &self.base_dir {
                path = base.join(path);
            }
        }
        std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// In-memory fetcher keyed by exact URL, for tests and embedding.
#[derive(Debug, Clone, Default)]
pub struct StaticFetcher(pub Vec<(String, String)>);

impl SchemaFetcher for StaticFetcher {
    fn fetch(&self, url: &str) -> Result<String, String> {
        self.0
            .iter()
            .find(|(u, _)| u == url)
            .map(|(_, body)| body.clone())
            .ok_or_else(|| format!("no document for {url}"))
    }
}

/// `get_customer`, `getCustomer` and `get-customer` all become `GetCustomer`.
pub fn upper_camel(id: &str) -> String {
    let mut out = String::new();
    for part in id.split(|c: char| !c.is_ascii_alphanumeric()).filter(|p| !p.is_empty()) {
        let mut chars = part.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
            out.extend(chars);
        }
    }
    out
}

fn property_type(prop: &Json) -> TypeTag {
    if prop.get("$ref").is_some() {
        return TypeTag::Map;
    }
    match prop.get("type").and_then(Json::as_str) {
        Some("number" | "integer") => TypeTag::Num,
        Some("string") => TypeTag::Str,
        Some("boolean") => TypeTag::Bool,
        Some("array") => TypeTag::List,
        _ => TypeTag::Map,
    }
}

fn resolve_ref<'a>(doc: &'a Json, schema: &'a Json) -> &'a Json {
    match schema.get("$ref").and_then(Json::as_str) {
        Some(r) => r
            .strip_prefix("#/components/schemas/")
            .and_then(|name| doc.pointer(&format!("/components/schemas/{}", name.replace('~', "~0").replace('/', "~1"))))
            .unwrap_or(&Json::Null),
        None => schema,
    }
}

struct Operation {
    id: String,
    method: String,
    path: String,
    response: StructDef,
}

fn operations(doc: &Json) -> Vec<Operation> {
    let mut ops = Vec::new();
    let Some(paths) = doc.get("paths").and_then(Json::as_object) else {
        return ops;
    };
    for (path, item) in paths {
        let Some(item) = item.as_object() else { continue };
        for (method, op) in item {
            if method != "get" && method != "post" {
                continue;
            }
            let Some(id) = op.get("operationId").and_then(Json::as_str) else {
                continue;
            };
            let Some(schema) = op.pointer("/responses/200/content/application~1json/schema") else {
                continue;
            };
            let schema = resolve_ref(doc, schema);
            let fields = schema
                .get("properties")
                .and_then(Json::as_object)
                .map(|props| {
                    props
                        .iter()
                        .map(|(name, p)| (name.clone(), property_type(p)))
                        .collect()
                })
                .unwrap_or_default();
            ops.push(Operation {
                id: id.to_string(),
                method: method.clone(),
                path: path.clone(),
                response: StructDef {
                    name: format!("{}Response", upper_camel(id)),
                    fields,
                },
            });
        }
    }
    ops
}

fn e(kind: ExprKind, span: Span) -> Expr {
    Expr::new(kind, span)
}

fn s(text: &str, span: Span) -> Expr {
    e(ExprKind::Literal(Literal::Str(text.to_string())), span)
}

fn ident(name: &str, span: Span) -> Expr {
    e(ExprKind::Identifier(name.to_string()), span)
}

fn concat(lhs: Expr, rhs: Expr, span: Span) -> Expr {
    e(
        ExprKind::Binary {
            op: BinaryOp::Add,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        span,
    )
}

/// `base + "/items/" + params["id"]` for a templated path.
fn url_expr(base: &str, path: &str, span: Span) -> Expr {
    let mut acc = s(base, span);
    let mut rest = path;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}').map(|c| open + c) else { break };
        if open > 0 {
            acc = concat(acc, s(&rest[..open], span), span);
        }
        let lookup = e(
            ExprKind::Index {
                expr: Box::new(ident("params", span)),
                index: Box::new(s(&rest[open + 1..close], span)),
            },
            span,
        );
        acc = concat(acc, lookup, span);
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        acc = concat(acc, s(rest, span), span);
    }
    acc
}

fn closure(op: &Operation, base: &str, span: Span) -> Expr {
    let url = url_expr(base, &op.path, span);
    let mut args = vec![ident("auth", span), url];
    let tool = if op.method == "get" {
        "std/net.get"
    } else {
        args.push(e(
            ExprKind::CallTool {
                tool_name: "std/json.stringify".into(),
                args: vec![ident("params", span)],
            },
            span,
        ));
        "std/net.post"
    };
    let body = vec![Stmt::new(
        StmtKind::Return(Some(e(
            ExprKind::CallTool {
                tool_name: tool.into(),
                args,
            },
            span,
        ))),
        span,
    )];
    e(
        ExprKind::Turn(TurnDecl {
            name: None,
            params: vec![
                Param {
                    name: "auth".into(),
                    type_name: Some("Identity".into()),
                },
                Param {
                    name: "params".into(),
                    type_name: Some("Map".into()),
                },
            ],
            body,
        }),
        span,
    )
}

/// Expand one `use schema::<protocol>(url)` node into its replacement
/// expression plus the synthesized response structs.
pub fn absorb_openapi(
    protocol: &str,
    url: &str,
    span: Span,
    fetcher: &dyn SchemaFetcher,
) -> Result<(Expr, Vec<StructDef>), SchemaError> {
    if protocol != "openapi" {
        return Err(SchemaError::UnsupportedProtocol {
            span,
            protocol: protocol.to_string(),
        });
    }
    let text = fetcher.fetch(url).map_err(|message| SchemaError::Fetch {
        span,
        url: url.to_string(),
        message,
    })?;
    let parse_err = |message: String| SchemaError::Parse {
        span,
        url: url.to_string(),
        message,
    };
    let doc: Json = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
    let version = doc.get("openapi").and_then(Json::as_str).unwrap_or("");
    if !version.starts_with("3.") {
        return Err(parse_err("not an OpenAPI 3.x document".into()));
    }
    let base = doc
        .pointer("/servers/0/url")
        .and_then(Json::as_str)
        .unwrap_or("")
        .trim_end_matches('/')
        .to_string();

    let ops = operations(&doc);
    let entries = ops
        .iter()
        .map(|op| (op.id.clone(), closure(op, &base, span)))
        .collect();
    let iife = e(
        ExprKind::Call {
            callee: Box::new(e(
                ExprKind::Turn(TurnDecl {
                    name: None,
                    params: vec![],
                    body: vec![Stmt::new(
                        StmtKind::Return(Some(e(ExprKind::MapLit(entries), span))),
                        span,
                    )],
                }),
                span,
            )),
            args: vec![],
        },
        span,
    );
    Ok((iife, ops.into_iter().map(|op| op.response).collect()))
}

fn expand_expr(expr: &mut Expr, fetcher: &dyn SchemaFetcher, out: &mut Vec<StructDef>) -> Result<(), SchemaError> {
    if let ExprKind::UseSchema { protocol, url } = &expr.kind {
        let (replacement, defs) = absorb_openapi(protocol, url, expr.span, fetcher)?;
        *expr = replacement;
        // the same document absorbed twice yields identical structs
        for def in defs {
            if !out.contains(&def) {
                out.push(def);
            }
        }
        return Ok(());
    }
    let mut go = |x: &mut Expr| expand_expr(x, fetcher, out);
    match &mut expr.kind {
        ExprKind::Literal(_)
        | ExprKind::Identifier(_)
        | ExprKind::Receive
        | ExprKind::SelfPid
        | ExprKind::GrantIdentity { .. }
        | ExprKind::UseSchema { .. } => {}
        ExprKind::ListLit(items) => items.iter_mut().try_for_each(go)?,
        ExprKind::MapLit(fields) | ExprKind::StructLit { fields, .. } => {
            fields.iter_mut().try_for_each(|(_, x)| go(x))?
        }
        ExprKind::FieldAccess { expr, .. } => go(expr)?,
        ExprKind::Index { expr, index } => {
            go(expr)?;
            go(index)?;
        }
        ExprKind::Call { callee, args } => {
            go(callee)?;
            args.iter_mut().try_for_each(go)?;
        }
        ExprKind::Binary { lhs, rhs, .. } => {
            go(lhs)?;
            go(rhs)?;
        }
        ExprKind::Unary { expr, .. } | ExprKind::Confidence(expr) | ExprKind::Recall(expr) => go(expr)?,
        ExprKind::Infer { prompt, .. } => go(prompt)?,
        ExprKind::CallTool { args, .. } => args.iter_mut().try_for_each(go)?,
        ExprKind::Remember { key, value } => {
            go(key)?;
            go(value)?;
        }
        ExprKind::Spawn { body, .. } | ExprKind::Turn(body) => expand_block(&mut body.body, fetcher, out)?,
        ExprKind::SpawnEach { list, body } => {
            go(list)?;
            expand_block(&mut body.body, fetcher, out)?;
        }
    }
    Ok(())
}

fn expand_block(block: &mut Block, fetcher: &dyn SchemaFetcher, out: &mut Vec<StructDef>) -> Result<(), SchemaError> {
    for stmt in block {
        match &mut stmt.kind {
            StmtKind::StructDecl(_) | StmtKind::Suspend | StmtKind::Return(None) => {}
            StmtKind::Let { value: x, .. }
            | StmtKind::Throw(x)
            | StmtKind::Echo(x)
            | StmtKind::Return(Some(x))
            | StmtKind::ContextAppend(x)
            | StmtKind::ContextSystem(x)
            | StmtKind::Expr(x) => expand_expr(x, fetcher, out)?,
            StmtKind::TurnDecl(t) => expand_block(&mut t.body, fetcher, out)?,
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                expand_expr(cond, fetcher, out)?;
                expand_block(then_block, fetcher, out)?;
                if let Some(b) = else_block {
                    expand_block(b, fetcher, out)?;
                }
            }
            StmtKind::TryCatch { body, handler, .. } => {
                expand_block(body, fetcher, out)?;
                expand_block(handler, fetcher, out)?;
            }
            StmtKind::Send { pid, value } => {
                expand_expr(pid, fetcher, out)?;
                expand_expr(value, fetcher, out)?;
            }
        }
    }
    Ok(())
}

/// Replace every `UseSchema` node in the program; returns the synthesized
/// struct definitions in source order.
pub fn expand_schemas(program: &mut Block, fetcher: &dyn SchemaFetcher) -> Result<Vec<StructDef>, SchemaError> {
    let mut out = Vec::new();
    expand_block(program, fetcher, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_source, print_program};

    const PING: &str = r#"{
      "openapi": "3.0.0",
      "info": {"title": "ping", "version": "1"},
      "servers": [{"url": "https://api.example.test/"}],
      "paths": {
        "/ping": {"get": {"operationId": "ping", "responses": {"200": {"content": {"application/json": {"schema": {"type": "object", "properties": {"ok": {"type": "boolean"}}}}}}}}}
      }
    }"#;

    fn fetcher(doc: &str) -> StaticFetcher {
        StaticFetcher(vec![("file://api.json".into(), doc.into())])
    }

    #[test]
    fn camel_case_names() {
        assert_eq!(upper_camel("ping"), "Ping");
        assert_eq!(upper_camel("getCustomer"), "GetCustomer");
        assert_eq!(upper_camel("list_customers"), "ListCustomers");
        assert_eq!(upper_camel("get-item-by-id"), "GetItemById");
    }

    #[test]
    fn minimal_ping_document() {
        let (expr, defs) = absorb_openapi("openapi", "file://api.json", Span::default(), &fetcher(PING)).unwrap();
        assert_eq!(defs, vec![StructDef::new("PingResponse", vec![("ok", TypeTag::Bool)])]);
        let ExprKind::Call { callee, args } = &expr.kind else { panic!() };
        assert!(args.is_empty());
        let ExprKind::Turn(t) = &callee.kind else { panic!() };
        let StmtKind::Return(Some(ret)) = &t.body[0].kind else { panic!() };
        let ExprKind::MapLit(entries) = &ret.kind else { panic!() };
        let keys: Vec<_> = entries.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["ping"]);
    }

    #[test]
    fn unsupported_protocol_message() {
        let err = absorb_openapi("graphql", "file://x", Span::new(3, 9), &StaticFetcher::default()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "3:9: unsupported schema protocol: graphql (adapters in development)"
        );
    }

    #[test]
    fn zero_operations() {
        let doc = r#"{"openapi": "3.1.0", "info": {}, "paths": {}}"#;
        let (expr, defs) = absorb_openapi("openapi", "file://api.json", Span::default(), &fetcher(doc)).unwrap();
        assert!(defs.is_empty());
        let printed = crate::frontend::print_expr(&expr);
        assert!(printed.contains("return {}"), "{printed}");
    }

    #[test]
    fn fetch_and_parse_errors() {
        let err = absorb_openapi("openapi", "file://missing.json", Span::default(), &StaticFetcher::default()).unwrap_err();
        assert!(matches!(err, SchemaError::Fetch { .. }));
        let err = absorb_openapi("openapi", "file://api.json", Span::default(), &fetcher("{not json")).unwrap_err();
        assert!(matches!(err, SchemaError::Parse { .. }));
        let err = absorb_openapi("openapi", "file://api.json", Span::default(), &fetcher(r#"{"swagger": "2.0"}"#)).unwrap_err();
        assert!(matches!(err, SchemaError::Parse { .. }));
    }

    #[test]
    fn ref_resolution_one_level_and_degradation() {
        let doc = r##"{
          "openapi": "3.0.3",
          "paths": {
            "/customers/{id}": {
              "get": {"operationId": "getCustomer", "responses": {"200": {"content": {"application/json": {"schema": {"$ref": "#/components/schemas/Customer"}}}}}},
              "delete": {"operationId": "deleteCustomer", "responses": {"200": {"content": {"application/json": {"schema": {"type": "object"}}}}}}
            },
            "/customers": {
              "post": {"operationId": "create_customer", "responses": {"200": {"content": {"application/json": {"schema": {"type": "object", "properties": {"id": {"type": "string"}}}}}}}},
              "get": {"operationId": "listCustomers", "responses": {"404": {}}}
            }
          },
          "components": {"schemas": {
            "Customer": {"type": "object", "properties": {
              "id": {"type": "string"}, "balance": {"type": "integer"}, "tags": {"type": "array"},
              "address": {"$ref": "#/components/schemas/Address"}, "meta": {"type": "object"}, "weird": {}
            }},
            "Address": {"type": "object", "properties": {"city": {"type": "string"}}}
          }}
        }"##;
        let (_, defs) = absorb_openapi("openapi", "file://api.json", Span::default(), &fetcher(doc)).unwrap();
        assert_eq!(
            defs,
            vec![
                StructDef::new(
                    "GetCustomerResponse",
                    vec![
                        ("id", TypeTag::Str),
                        ("balance", TypeTag::Num),
                        ("tags", TypeTag::List),
                        ("address", TypeTag::Map),
                        ("meta", TypeTag::Map),
                        ("weird", TypeTag::Map),
                    ]
                ),
                StructDef::new("CreateCustomerResponse", vec![("id", TypeTag::Str)]),
            ]
        );
    }

    #[test]
    fn path_templating_substitutes_params() {
        let url = url_expr("https://h", "/a/{x}/b/{y}", Span::default());
        assert_eq!(
            crate::frontend::print_expr(&url),
            r#"(((("https://h" + "/a/") + params["x"]) + "/b/") + params["y"])"#
        );
    }

    #[test]
    fn expansion_replaces_nested_nodes() {
        let mut prog = parse_source(
            "let api = use schema::openapi(\"file://api.json\")\nturn f() { let x = use schema::openapi(\"file://api.json\") }",
        )
        .unwrap();
        let defs = expand_schemas(&mut prog, &fetcher(PING)).unwrap();
        assert_eq!(defs.len(), 1);
        let printed = print_program(&prog);
        assert!(!printed.contains("use schema"));
        // expanded program is ordinary syntax
        assert_eq!(parse_source(&printed).unwrap(), prog);
    }
}
