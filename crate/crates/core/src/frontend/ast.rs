//! Syntax tree for Turn programs.
//!
//! Nodes carry a source [`Span`], but equality on [`Stmt`] and [`Expr`]
//! compares structure only, so a pretty-printed and re-parsed tree is equal
//! to the original.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub column: u32,
}

impl Span {
    pub fn new(line: u32, column: u32) -> Self {
        Self { line, column }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Stmt {
    pub fn new(kind: StmtKind, span: Span) -> Self {
        Self { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructDecl {
    pub name: String,
    /// `(field name, type name)` in declaration order.
    pub fields: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    /// Parsed but not enforced.
    pub type_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnDecl {
    pub name: Option<String>,
    pub params: Vec<Param>,
    pub body: Block,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    StructDecl(StructDecl),
    Let {
        name: String,
        value: Expr,
    },
    /// Named top-level turn declaration.
    TurnDecl(TurnDecl),
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    TryCatch {
        body: Block,
        err_name: String,
        handler: Block,
    },
    Throw(Expr),
    Echo(Expr),
    Return(Option<Expr>),
    Send {
        pid: Expr,
        value: Expr,
    },
    ContextAppend(Expr),
    ContextSystem(Expr),
    Suspend,
    Expr(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpawnKind {
    Plain,
    Linked,
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn boxed(kind: ExprKind, span: Span) -> Box<Self> {
        Box::new(Self::new(kind, span))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Literal(Literal),
    Identifier(String),
    ListLit(Vec<Expr>),
    MapLit(Vec<(String, Expr)>),
    StructLit {
        type_name: String,
        fields: Vec<(String, Expr)>,
    },
    FieldAccess {
        expr: Box<Expr>,
        field: String,
    },
    Index {
        expr: Box<Expr>,
        index: Box<Expr>,
    },
    /// Invocation of a turn value: `f(a, b)`.
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Infer {
        type_name: String,
        prompt: Box<Expr>,
    },
    Confidence(Box<Expr>),
    CallTool {
        tool_name: String,
        args: Vec<Expr>,
    },
    Remember {
        key: Box<Expr>,
        value: Box<Expr>,
    },
    Recall(Box<Expr>),
    Spawn {
        kind: SpawnKind,
        body: TurnDecl,
    },
    SpawnEach {
        list: Box<Expr>,
        body: TurnDecl,
    },
    Receive,
    SelfPid,
    GrantIdentity {
        class: String,
        provider: String,
    },
    UseSchema {
        protocol: String,
        url: String,
    },
    /// Anonymous turn literal; evaluates to a closure.
    Turn(TurnDecl),
}
