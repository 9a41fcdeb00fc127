//! Syntax tree for the supported Verilog subset.

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFile {
    pub modules: Vec<Module>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub name: String,
    pub line: u32,
    /// `#( ... )` header parameters.
    pub params: Vec<ParamDecl>,
    pub header: PortHeader,
    pub items: Vec<Item>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PortHeader {
    /// No parenthesized port list, or an empty one.
    None,
    /// `module m(input a, output [3:0] y)`.
    Ansi(Vec<PortDecl>),
    /// `module m(a, y)`; directions come from body declarations.
    Names(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Input,
    Output,
    Inout,
}

impl Direction {
    pub fn from_keyword(kw: &str) -> Option<Self> {
        match kw {
            "input" => Some(Direction::Input),
            "output" => Some(Direction::Output),
            "inout" => Some(Direction::Inout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortDecl {
    pub direction: Direction,
    /// `wire`, `reg`, `tri`, ... when given explicitly.
    pub net_type: Option<String>,
    pub signed: bool,
    pub range: Option<Range>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub msb: Expr,
    pub lsb: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub local: bool,
    pub name: String,
    pub range: Option<Range>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub name: String,
    /// Unpacked dimensions (memories).
    pub dims: Vec<Range>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    /// `Some` for `.port(expr)` style.
    pub port: Option<String>,
    pub expr: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: Option<String>,
    pub connections: Vec<Connection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Port(PortDecl),
    Net {
        net_type: String,
        signed: bool,
        range: Option<Range>,
        decls: Vec<Declarator>,
    },
    Reg {
        signed: bool,
        range: Option<Range>,
        decls: Vec<Declarator>,
    },
    /// `integer`, `real`, `time`, `realtime`, `genvar`, `event`.
    Variable {
        kind: String,
        decls: Vec<Declarator>,
    },
    Params(Vec<ParamDecl>),
    Assign {
        line: u32,
        assignments: Vec<(Expr, Expr)>,
    },
    Always(Stmt),
    Initial(Stmt),
    Instantiation {
        module: String,
        params: Vec<Connection>,
        instances: Vec<Instance>,
    },
    Gate {
        kind: String,
        instances: Vec<Instance>,
    },
    Defparam(Vec<(Expr, Expr)>),
    /// Constructs accepted as balanced regions without further analysis:
    /// `generate`, `function`, `task`, `specify`, bare generate `for`/`if`/`case`.
    Opaque {
        keyword: String,
        line: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventExpr {
    Any,
    Edge { edge: Option<Edge>, expr: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Pos,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Timing {
    Delay(Expr),
    Event(Vec<EventExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseItem {
    /// Empty for `default`.
    pub labels: Vec<Expr>,
    pub body: Stmt,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Null,
    Block {
        label: Option<String>,
        parallel: bool,
        decls: Vec<Item>,
        stmts: Vec<Stmt>,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    Case {
        kind: String,
        subject: Expr,
        items: Vec<CaseItem>,
    },
    For {
        init: Box<Stmt>,
        cond: Expr,
        step: Box<Stmt>,
        body: Box<Stmt>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    Repeat {
        count: Expr,
        body: Box<Stmt>,
    },
    Forever(Box<Stmt>),
    Wait {
        cond: Expr,
        body: Box<Stmt>,
    },
    Timed {
        timing: Timing,
        body: Box<Stmt>,
    },
    Assign {
        lhs: Expr,
        rhs: Expr,
        blocking: bool,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    Disable(String),
    Trigger(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Plus,
    Minus,
    LogicalNot,
    BitNot,
    RedAnd,
    RedNand,
    RedOr,
    RedNor,
    RedXor,
    RedXnor,
}

impl UnaryOp {
    pub fn from_token(text: &str) -> Option<Self> {
        Some(match text {
            "+" => UnaryOp::Plus,
            "-" => UnaryOp::Minus,
            "!" => UnaryOp::LogicalNot,
            "~" => UnaryOp::BitNot,
            "&" => UnaryOp::RedAnd,
            "~&" => UnaryOp::RedNand,
            "|" => UnaryOp::RedOr,
            "~|" => UnaryOp::RedNor,
            "^" => UnaryOp::RedXor,
            "~^" | "^~" => UnaryOp::RedXnor,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    LogicalOr,
    LogicalAnd,
    BitOr,
    BitXor,
    BitXnor,
    BitAnd,
    Eq,
    Ne,
    CaseEq,
    CaseNe,
    Lt,
    Le,
    Gt,
    Ge,
    Shl,
    Shr,
    AShl,
    AShr,
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

impl BinaryOp {
    /// Operator and binding strength; higher binds tighter.
    pub fn from_token(text: &str) -> Option<(Self, u8)> {
        use BinaryOp::*;
        Some(match text {
            "||" => (LogicalOr, 1),
            "&&" => (LogicalAnd, 2),
            "|" => (BitOr, 3),
            "^" => (BitXor, 4),
            "^~" | "~^" => (BitXnor, 4),
            "&" => (BitAnd, 5),
            "==" => (Eq, 6),
            "!=" => (Ne, 6),
            "===" => (CaseEq, 6),
            "!==" => (CaseNe, 6),
            "<" => (Lt, 7),
            "<=" => (Le, 7),
            ">" => (Gt, 7),
            ">=" => (Ge, 7),
            "<<" => (Shl, 8),
            ">>" => (Shr, 8),
            "<<<" => (AShl, 8),
            ">>>" => (AShr, 8),
            "+" => (Add, 9),
            "-" => (Sub, 9),
            "*" => (Mul, 10),
            "/" => (Div, 10),
            "%" => (Mod, 10),
            "**" => (Pow, 11),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Literal text as written, e.g. `8'hFF`, `42`, `1.5`.
    Number(String),
    Str(String),
    Ident(String),
    /// Hierarchical reference `a.b.c`.
    Hier(Vec<String>),
    Macro(String),
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        base: Box<Expr>,
        msb: Box<Expr>,
        lsb: Box<Expr>,
    },
    /// `base[start +: width]` (`ascending`) or `base[start -: width]`.
    IndexedSlice {
        base: Box<Expr>,
        start: Box<Expr>,
        width: Box<Expr>,
        ascending: bool,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Ternary {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    Concat(Vec<Expr>),
    Replicate {
        count: Box<Expr>,
        items: Vec<Expr>,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    /// Names of every identifier this expression reads.
    pub fn identifiers(&self, out: &mut Vec<String>) {
        match self {
            Expr::Ident(name) => out.push(name.clone()),
            Expr::Number(_) | Expr::Str(_) | Expr::Macro(_) | Expr::Hier(_) => {}
            Expr::Index { base, index } => {
                base.identifiers(out);
                index.identifiers(out);
            }
            Expr::Slice { base, msb, lsb } => {
                base.identifiers(out);
                msb.identifiers(out);
                lsb.identifiers(out);
            }
            Expr::IndexedSlice { base, start, width, .. } => {
                base.identifiers(out);
                start.identifiers(out);
                width.identifiers(out);
            }
            Expr::Unary { operand, .. } => operand.identifiers(out),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.identifiers(out);
                rhs.identifiers(out);
            }
            Expr::Ternary { cond, then, otherwise } => {
                cond.identifiers(out);
                then.identifiers(out);
                otherwise.identifiers(out);
            }
            Expr::Concat(items) => items.iter().for_each(|e| e.identifiers(out)),
            Expr::Replicate { count, items } => {
                count.identifiers(out);
                items.iter().for_each(|e| e.identifiers(out));
            }
            Expr::Call { args, .. } => args.iter().for_each(|e| e.identifiers(out)),
        }
    }
}
