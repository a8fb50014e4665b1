//! Recursive-descent parser.
//!
//! Statements end at `;`, a newline, or a closing brace. Expression
//! precedence from loosest to tightest: `or`, `and`, comparison, additive,
//! multiplicative, unary (`-`, `not`, `confidence`), postfix.

use super::ast::*;
use super::error::ParseError;
use super::lexer::{Token, TokenKind};

pub fn parse(tokens: &[Token]) -> Result<Block, ParseError> {
    if tokens.last().map(|t| t.kind) != Some(TokenKind::Eof) {
        let (line, column) = tokens.last().map(|t| (t.line, t.column)).unwrap_or((1, 1));
        return Err(ParseError {
            line,
            column,
            expected: "end-of-input marker".into(),
            found: "truncated token stream".into(),
        });
    }
    let mut parser = Parser { tokens, pos: 0 };
    let mut program = Vec::new();
    parser.skip_semis();
    while !parser.at_eof() {
        program.push(parser.statement()?);
        parser.terminator()?;
        parser.skip_semis();
    }
    Ok(program)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

fn describe(t: &Token) -> String {
    match t.kind {
        TokenKind::Eof => "end of input".into(),
        kind => format!("{kind} `{}`", t.lexeme),
    }
}

impl<'t> Parser<'t> {
    fn peek(&self) -> &'t Token {
        &self.tokens[self.pos]
    }

    fn peek_at(&self, n: usize) -> &'t Token {
        let idx = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[idx]
    }

    fn prev(&self) -> Option<&'t Token> {
        self.pos.checked_sub(1).map(|i| &self.tokens[i])
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn advance(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn span(&self) -> Span {
        let t = self.peek();
        Span::new(t.line, t.column)
    }

    fn error(&self, expected: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError {
            line: t.line,
            column: t.column,
            expected: expected.into(),
            found: describe(t),
        }
    }

    /// True if the next token starts on the same line the previous token ended.
    fn same_line(&self) -> bool {
        match self.prev() {
            Some(p) => p.end_line() == self.peek().line,
            None => true,
        }
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.peek().is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("`{p}`")))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.peek().is_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("`{kw}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        if self.peek().kind == TokenKind::Identifier {
            Ok(self.advance().lexeme.clone())
        } else {
            Err(self.error("identifier"))
        }
    }

    fn expect_string(&mut self) -> Result<String, ParseError> {
        if self.peek().kind == TokenKind::String {
            Ok(self.advance().string_value())
        } else {
            Err(self.error("string literal"))
        }
    }

    fn skip_semis(&mut self) {
        while self.eat_punct(";") {}
    }

    fn terminator(&mut self) -> Result<(), ParseError> {
        if self.eat_punct(";")
            || self.at_eof()
            || self.peek().is_punct("}")
            || !self.same_line()
            || self.prev().is_some_and(|p| p.is_punct("}"))
        {
            Ok(())
        } else {
            Err(self.error("`;` or newline after statement"))
        }
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        self.skip_semis();
        while !self.peek().is_punct("}") {
            if self.at_eof() {
                return Err(self.error("`}`"));
            }
            stmts.push(self.statement()?);
            self.terminator()?;
            self.skip_semis();
        }
        self.expect_punct("}")?;
        Ok(stmts)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let span = self.span();
        let t = self.peek();
        let kind = if t.kind == TokenKind::Keyword {
            match t.lexeme.as_str() {
                "struct" => StmtKind::StructDecl(self.struct_decl()?),
                "let" => {
                    self.advance();
                    let name = self.expect_ident()?;
                    if !self.peek().is_op("=") {
                        return Err(self.error("`=`"));
                    }
                    self.advance();
                    StmtKind::Let {
                        name,
                        value: self.expression()?,
                    }
                }
                "turn" if self.peek_at(1).kind == TokenKind::Identifier => {
                    self.advance();
                    let name = self.expect_ident()?;
                    let (params, body) = self.turn_signature_and_body()?;
                    StmtKind::TurnDecl(TurnDecl {
                        name: Some(name),
                        params,
                        body,
                    })
                }
                "if" => self.if_stmt()?,
                "try" => {
                    self.advance();
                    let body = self.block()?;
                    self.expect_keyword("catch")?;
                    let parens = self.eat_punct("(");
                    let err_name = self.expect_ident()?;
                    if parens {
                        self.expect_punct(")")?;
                    }
                    let handler = self.block()?;
                    StmtKind::TryCatch {
                        body,
                        err_name,
                        handler,
                    }
                }
                "throw" => {
                    self.advance();
                    StmtKind::Throw(self.expression()?)
                }
                "echo" => {
                    self.advance();
                    StmtKind::Echo(self.expression()?)
                }
                "return" => {
                    self.advance();
                    let value = if self.at_eof()
                        || self.peek().is_punct(";")
                        || self.peek().is_punct("}")
                        || !self.same_line()
                    {
                        None
                    } else {
                        Some(self.expression()?)
                    };
                    StmtKind::Return(value)
                }
                "send" => {
                    self.advance();
                    let pid = self.expression()?;
                    self.expect_punct(",")?;
                    let value = self.expression()?;
                    StmtKind::Send { pid, value }
                }
                "suspend" => {
                    self.advance();
                    StmtKind::Suspend
                }
                "context" => {
                    self.advance();
                    self.expect_punct(".")?;
                    let method = self.peek();
                    let system = match method.lexeme.as_str() {
                        "append" if method.kind == TokenKind::Identifier => false,
                        "system" if method.kind == TokenKind::Identifier => true,
                        _ => return Err(self.error("`append` or `system`")),
                    };
                    self.advance();
                    self.expect_punct("(")?;
                    let arg = self.expression()?;
                    self.expect_punct(")")?;
                    if system {
                        StmtKind::ContextSystem(arg)
                    } else {
                        StmtKind::ContextAppend(arg)
                    }
                }
                _ => StmtKind::Expr(self.expression()?),
            }
        } else {
            StmtKind::Expr(self.expression()?)
        };
        Ok(Stmt::new(kind, span))
    }

    fn struct_decl(&mut self) -> Result<StructDecl, ParseError> {
        self.expect_keyword("struct")?;
        let name = self.expect_ident()?;
        self.expect_punct("{")?;
        let mut fields = Vec::new();
        while !self.peek().is_punct("}") {
            let field = self.expect_ident()?;
            self.expect_punct(":")?;
            let ty = self.expect_ident()?;
            fields.push((field, ty));
            if !self.eat_punct(",") && !self.eat_punct(";") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(StructDecl { name, fields })
    }

    fn if_stmt(&mut self) -> Result<StmtKind, ParseError> {
        self.expect_keyword("if")?;
        let cond = self.expression_no_struct()?;
        let then_block = self.block()?;
        let else_block = if self.peek().is_keyword("else") {
            self.advance();
            if self.peek().is_keyword("if") {
                let span = self.span();
                let nested = self.if_stmt()?;
                Some(vec![Stmt::new(nested, span)])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(StmtKind::If {
            cond,
            then_block,
            else_block,
        })
    }

    fn turn_signature_and_body(&mut self) -> Result<(Vec<Param>, Block), ParseError> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        while !self.peek().is_punct(")") {
            let name = self.expect_ident()?;
            let type_name = if self.eat_punct(":") {
                Some(self.expect_ident()?)
            } else {
                None
            };
            params.push(Param { name, type_name });
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        let body = self.block()?;
        Ok((params, body))
    }

    fn turn_literal(&mut self) -> Result<TurnDecl, ParseError> {
        self.expect_keyword("turn")?;
        let (params, body) = self.turn_signature_and_body()?;
        Ok(TurnDecl {
            name: None,
            params,
            body,
        })
    }

    fn expression(&mut self) -> Result<Expr, ParseError> {
        self.binary(0, true)
    }

    fn expression_no_struct(&mut self) -> Result<Expr, ParseError> {
        self.binary(0, false)
    }

    fn binary_op(&self, level: usize) -> Option<BinaryOp> {
        let t = self.peek();
        let op = match (t.kind, t.lexeme.as_str()) {
            (TokenKind::Keyword, "or") => BinaryOp::Or,
            (TokenKind::Keyword, "and") => BinaryOp::And,
            (TokenKind::Operator, "<") => BinaryOp::Lt,
            (TokenKind::Operator, "<=") => BinaryOp::Le,
            (TokenKind::Operator, ">") => BinaryOp::Gt,
            (TokenKind::Operator, ">=") => BinaryOp::Ge,
            (TokenKind::Operator, "==") => BinaryOp::Eq,
            (TokenKind::Operator, "!=") => BinaryOp::Ne,
            (TokenKind::Operator, "+") => BinaryOp::Add,
            (TokenKind::Operator, "-") => BinaryOp::Sub,
            (TokenKind::Operator, "*") => BinaryOp::Mul,
            (TokenKind::Operator, "/") => BinaryOp::Div,
            _ => return None,
        };
        (precedence(op) == level).then_some(op)
    }

    fn binary(&mut self, level: usize, allow_struct: bool) -> Result<Expr, ParseError> {
        if level == 5 {
            return self.unary(allow_struct);
        }
        let mut lhs = self.binary(level + 1, allow_struct)?;
        while let Some(op) = self.binary_op(level) {
            let span = self.span();
            self.advance();
            let rhs = self.binary(level + 1, allow_struct)?;
            lhs = Expr::new(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
            // comparisons do not chain
            if level == 2 {
                break;
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self, allow_struct: bool) -> Result<Expr, ParseError> {
        let span = self.span();
        let t = self.peek();
        if t.is_op("-") {
            self.advance();
            let expr = self.unary(allow_struct)?;
            return Ok(Expr::new(
                ExprKind::Unary {
                    op: UnaryOp::Neg,
                    expr: Box::new(expr),
                },
                span,
            ));
        }
        if t.is_keyword("not") {
            self.advance();
            let expr = self.unary(allow_struct)?;
            return Ok(Expr::new(
                ExprKind::Unary {
                    op: UnaryOp::Not,
                    expr: Box::new(expr),
                },
                span,
            ));
        }
        if t.is_keyword("confidence") {
            self.advance();
            let expr = self.unary(allow_struct)?;
            return Ok(Expr::new(ExprKind::Confidence(Box::new(expr)), span));
        }
        self.postfix(allow_struct)
    }

    fn postfix(&mut self, allow_struct: bool) -> Result<Expr, ParseError> {
        let mut expr = self.primary(allow_struct)?;
        loop {
            let span = self.span();
            if self.peek().is_punct(".") {
                self.advance();
                let field = self.expect_ident()?;
                expr = Expr::new(
                    ExprKind::FieldAccess {
                        expr: Box::new(expr),
                        field,
                    },
                    span,
                );
            } else if self.peek().is_punct("[") && self.same_line() {
                self.advance();
                let index = self.expression()?;
                self.expect_punct("]")?;
                expr = Expr::new(
                    ExprKind::Index {
                        expr: Box::new(expr),
                        index: Box::new(index),
                    },
                    span,
                );
            } else if self.peek().is_punct("(") && self.same_line() {
                self.advance();
                let args = self.arguments()?;
                expr = Expr::new(
                    ExprKind::Call {
                        callee: Box::new(expr),
                        args,
                    },
                    span,
                );
            } else {
                return Ok(expr);
            }
        }
    }

    /// Comma-separated expressions up to and including `)`.
    fn arguments(&mut self) -> Result<Vec<Expr>, ParseError> {
        let mut args = Vec::new();
        while !self.peek().is_punct(")") {
            args.push(self.expression()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn field_inits(&mut self) -> Result<Vec<(String, Expr)>, ParseError> {
        let mut fields = Vec::new();
        while !self.peek().is_punct("}") {
            let key = match self.peek().kind {
                TokenKind::Identifier => self.advance().lexeme.clone(),
                TokenKind::String => self.advance().string_value(),
                _ => return Err(self.error("field name")),
            };
            self.expect_punct(":")?;
            fields.push((key, self.expression()?));
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(fields)
    }

    fn looks_like_struct_literal(&self) -> bool {
        let brace = self.peek_at(1);
        if !brace.is_punct("{") || brace.line != self.peek().line {
            return false;
        }
        let first = self.peek_at(2);
        first.is_punct("}") || (first.kind == TokenKind::Identifier && self.peek_at(3).is_punct(":"))
    }

    fn primary(&mut self, allow_struct: bool) -> Result<Expr, ParseError> {
        let span = self.span();
        let t = self.peek();
        let kind = match t.kind {
            TokenKind::Number => {
                self.advance();
                let n: f64 = t.lexeme.parse().map_err(|_| ParseError {
                    line: t.line,
                    column: t.column,
                    expected: "number".into(),
                    found: describe(t),
                })?;
                ExprKind::Literal(Literal::Num(n))
            }
            TokenKind::String => {
                self.advance();
                ExprKind::Literal(Literal::Str(t.string_value()))
            }
            TokenKind::Identifier => {
                if allow_struct && self.looks_like_struct_literal() {
                    let type_name = self.advance().lexeme.clone();
                    self.expect_punct("{")?;
                    let fields = self.field_inits()?;
                    ExprKind::StructLit { type_name, fields }
                } else {
                    self.advance();
                    ExprKind::Identifier(t.lexeme.clone())
                }
            }
            TokenKind::Punct if t.lexeme == "(" => {
                self.advance();
                let inner = self.expression()?;
                self.expect_punct(")")?;
                return Ok(inner);
            }
            TokenKind::Punct if t.lexeme == "[" => {
                self.advance();
                let mut items = Vec::new();
                while !self.peek().is_punct("]") {
                    items.push(self.expression()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("]")?;
                ExprKind::ListLit(items)
            }
            TokenKind::Punct if t.lexeme == "{" => {
                self.advance();
                ExprKind::MapLit(self.field_inits()?)
            }
            TokenKind::Keyword => return self.keyword_expr(),
            _ => return Err(self.error("expression")),
        };
        Ok(Expr::new(kind, span))
    }

    fn keyword_expr(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        let kw = self.peek().lexeme.as_str();
        let kind = match kw {
            "true" | "false" => {
                self.advance();
                ExprKind::Literal(Literal::Bool(kw == "true"))
            }
            "null" => {
                self.advance();
                ExprKind::Literal(Literal::Null)
            }
            "self" => {
                self.advance();
                ExprKind::SelfPid
            }
            "receive" => {
                self.advance();
                ExprKind::Receive
            }
            "infer" => {
                self.advance();
                let type_name = self.expect_ident()?;
                self.expect_punct("{")?;
                let prompt = self.expression()?;
                self.eat_punct(";");
                self.expect_punct("}")?;
                ExprKind::Infer {
                    type_name,
                    prompt: Box::new(prompt),
                }
            }
            "call" => {
                self.advance();
                self.expect_punct("(")?;
                let tool_name = self.expect_string()?;
                let args = if self.eat_punct(",") {
                    self.arguments()?
                } else {
                    self.expect_punct(")")?;
                    Vec::new()
                };
                ExprKind::CallTool { tool_name, args }
            }
            "remember" => {
                self.advance();
                self.expect_punct("(")?;
                let key = self.expression()?;
                self.expect_punct(",")?;
                let value = self.expression()?;
                self.expect_punct(")")?;
                ExprKind::Remember {
                    key: Box::new(key),
                    value: Box::new(value),
                }
            }
            "recall" => {
                self.advance();
                self.expect_punct("(")?;
                let key = self.expression()?;
                self.expect_punct(")")?;
                ExprKind::Recall(Box::new(key))
            }
            "spawn" | "spawn_link" => {
                self.advance();
                let kind = if kw == "spawn" {
                    SpawnKind::Plain
                } else {
                    SpawnKind::Linked
                };
                ExprKind::Spawn {
                    kind,
                    body: self.turn_literal()?,
                }
            }
            "spawn_each" => {
                self.advance();
                self.expect_punct("(")?;
                let list = self.expression()?;
                self.expect_punct(",")?;
                let body = self.turn_literal()?;
                self.expect_punct(")")?;
                ExprKind::SpawnEach {
                    list: Box::new(list),
                    body,
                }
            }
            "grant" => {
                self.advance();
                self.expect_keyword("identity")?;
                self.expect_punct("::")?;
                let class = self.expect_ident()?;
                self.expect_punct("(")?;
                let provider = self.expect_string()?;
                self.expect_punct(")")?;
                ExprKind::GrantIdentity { class, provider }
            }
            "use" => {
                self.advance();
                self.expect_keyword("schema")?;
                self.expect_punct("::")?;
                let protocol = self.expect_ident()?;
                self.expect_punct("(")?;
                let url = self.expect_string()?;
                self.expect_punct(")")?;
                ExprKind::UseSchema { protocol, url }
            }
            "turn" => ExprKind::Turn(self.turn_literal()?),
            _ => return Err(self.error("expression")),
        };
        Ok(Expr::new(kind, span))
    }
}

fn precedence(op: BinaryOp) -> usize {
    match op {
        BinaryOp::Or => 0,
        BinaryOp::And => 1,
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne => {
            2
        }
        BinaryOp::Add | BinaryOp::Sub => 3,
        BinaryOp::Mul | BinaryOp::Div => 4,
    }
}
