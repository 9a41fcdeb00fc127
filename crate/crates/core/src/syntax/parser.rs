//! Recursive-descent parser over the significant tokens of a file.
//!
//! On the first error inside a module the parser records it and resumes after
//! that module's `endmodule`, so one broken module yields one diagnostic.

use super::ast::*;
use super::lexer::{Token, TokenKind};

const MAX_DEPTH: u32 = 200;

const NET_TYPES: &[&str] = &[
    "wire", "tri", "tri0", "tri1", "triand", "trior", "trireg", "wand", "wor", "supply0", "supply1",
];

const VARIABLE_TYPES: &[&str] = &["integer", "real", "realtime", "time", "genvar", "event"];

const GATES: &[&str] = &[
    "and", "nand", "or", "nor", "xor", "xnor", "not", "buf", "bufif0", "bufif1", "notif0", "notif1", "pullup",
    "pulldown", "nmos", "pmos", "cmos", "rnmos", "rpmos", "rcmos", "tran", "tranif0", "tranif1", "rtran", "rtranif0",
    "rtranif1",
];

const STRENGTHS: &[&str] = &[
    "supply0", "supply1", "strong0", "strong1", "pull0", "pull1", "weak0", "weak1", "highz0", "highz1", "small",
    "medium", "large",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub message: String,
    pub line: u32,
    pub column: u32,
}

type PResult<T> = Result<T, ParseError>;

/// Parses a token stream (trivia included; it is filtered here).
pub fn parse(tokens: &[Token<'_>]) -> (SourceFile, Vec<ParseError>) {
    let significant: Vec<Token<'_>> = tokens.iter().filter(|t| !t.is_trivia()).copied().collect();
    let mut p = Parser {
        toks: &significant,
        pos: 0,
        depth: 0,
    };
    let mut modules = Vec::new();
    let mut errors = Vec::new();
    while !p.at_eof() {
        let t = p.peek();
        if t.is("module") || t.is("macromodule") {
            match p.module() {
                Ok(m) => modules.push(m),
                Err(e) => {
                    errors.push(e);
                    p.depth = 0;
                    p.recover_after("endmodule");
                }
            }
        } else if t.is("primitive") {
            p.advance();
            if let Err(e) = p.skip_balanced("endprimitive") {
                errors.push(e);
                p.recover_after("endprimitive");
            }
        } else {
            errors.push(p.error_here(format!("expected `module`, found {t}")));
            while !p.at_eof() && !p.peek().is("module") && !p.peek().is("macromodule") {
                p.advance();
            }
        }
    }
    (SourceFile { modules }, errors)
}

struct Parser<'t, 'src> {
    toks: &'t [Token<'src>],
    pos: usize,
    depth: u32,
}

impl<'src> Parser<'_, 'src> {
    fn peek(&self) -> Token<'src> {
        self.peek_at(0)
    }

    fn peek_at(&self, n: usize) -> Token<'src> {
        let i = (self.pos + n).min(self.toks.len() - 1);
        self.toks[i]
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn advance(&mut self) -> Token<'src> {
        let t = self.peek();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.peek().is(text) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_any(&mut self, options: &[&str]) -> Option<Token<'src>> {
        let t = self.peek();
        if t.kind == TokenKind::Keyword && options.contains(&t.text) {
            self.advance();
            Some(t)
        } else {
            None
        }
    }

    fn error_at(&self, t: Token<'_>, message: impl Into<String>) -> ParseError {
        ParseError {
            message: message.into(),
            line: t.line,
            column: t.column,
        }
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        self.error_at(self.peek(), message)
    }

    fn expect(&mut self, text: &str) -> PResult<Token<'src>> {
        let t = self.peek();
        if t.is(text) {
            Ok(self.advance())
        } else {
            Err(self.error_at(t, format!("expected `{text}`, found {t}")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        let t = self.peek();
        if t.kind == TokenKind::Identifier {
            self.advance();
            Ok(t.text.to_string())
        } else {
            Err(self.error_at(t, format!("expected identifier, found {t}")))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(self.error_here("nesting too deep"))
        } else {
            Ok(())
        }
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn recover_after(&mut self, keyword: &str) {
        while !self.at_eof() {
            if self.advance().is(keyword) {
                return;
            }
        }
    }

    /// Skips tokens up to and including `terminator`, requiring brackets and
    /// block keywords in between to balance.
    fn skip_balanced(&mut self, terminator: &str) -> PResult<()> {
        let mut stack: Vec<&'static str> = Vec::new();
        loop {
            let t = self.peek();
            if t.kind == TokenKind::Eof {
                return Err(self.error_at(t, format!("expected `{terminator}`, found end of file")));
            }
            if stack.is_empty() && t.is(terminator) {
                self.advance();
                return Ok(());
            }
            if t.is("endmodule") || t.is("module") {
                return Err(self.error_at(t, format!("expected `{terminator}`, found {t}")));
            }
            if stack.len() as u32 > MAX_DEPTH {
                return Err(self.error_at(t, "nesting too deep"));
            }
            let closer = match (t.kind, t.text) {
                (TokenKind::Punct, "(") => Some(")"),
                (TokenKind::Punct, "[") => Some("]"),
                (TokenKind::Punct, "{") => Some("}"),
                (TokenKind::Keyword, "begin") => Some("end"),
                (TokenKind::Keyword, "case" | "casez" | "casex") => Some("endcase"),
                (TokenKind::Keyword, "fork") => Some("join"),
                _ => None,
            };
            if let Some(c) = closer {
                stack.push(c);
            } else if matches!(
                (t.kind, t.text),
                (TokenKind::Punct, ")" | "]" | "}") | (TokenKind::Keyword, "end" | "endcase" | "join")
            ) && stack.pop() != Some(t.text)
            {
                return Err(self.error_at(t, format!("unbalanced {t}")));
            }
            self.advance();
        }
    }

    // ---- modules -------------------------------------------------------

    fn module(&mut self) -> PResult<Module> {
        let kw = self.advance();
        let name = self.ident()?;
        let params = if self.eat("#") {
            self.param_port_list()?
        } else {
            Vec::new()
        };
        let header = if self.eat("(") {
            self.port_list()?
        } else {
            PortHeader::None
        };
        self.expect(";")?;
        let mut items = Vec::new();
        loop {
            if self.eat("endmodule") {
                break;
            }
            if self.at_eof() {
                return Err(self.error_here("expected `endmodule`, found end of file"));
            }
            if let Some(item) = self.module_item()? {
                items.push(item);
            }
        }
        Ok(Module {
            name,
            line: kw.line,
            params,
            header,
            items,
        })
    }

    fn param_port_list(&mut self) -> PResult<Vec<ParamDecl>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        let mut local = false;
        let mut range = None;
        loop {
            if let Some(kw) = self.eat_any(&["parameter", "localparam"]) {
                local = kw.text == "localparam";
                range = self.param_type()?;
            }
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            out.push(ParamDecl {
                local,
                name,
                range: range.clone(),
                value,
            });
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(out);
        }
    }

    /// Optional `signed`, range, or variable type before a parameter name.
    fn param_type(&mut self) -> PResult<Option<Range>> {
        self.eat("signed");
        if self.peek().is("[") {
            return Ok(Some(self.range()?));
        }
        self.eat_any(&["integer", "real", "realtime", "time"]);
        Ok(None)
    }

    fn port_list(&mut self) -> PResult<PortHeader> {
        if self.eat(")") {
            return Ok(PortHeader::None);
        }
        if Direction::from_keyword(self.peek().text).is_some() && self.peek().kind == TokenKind::Keyword {
            let mut decls: Vec<PortDecl> = Vec::new();
            loop {
                let t = self.peek();
                if let Some(direction) = Direction::from_keyword(t.text).filter(|_| t.kind == TokenKind::Keyword) {
                    self.advance();
                    let net_type = self.port_net_type();
                    let signed = self.eat("signed");
                    let range = if self.peek().is("[") { Some(self.range()?) } else { None };
                    let name = self.ident()?;
                    if self.eat("=") {
                        self.expr()?;
                    }
                    decls.push(PortDecl {
                        direction,
                        net_type,
                        signed,
                        range,
                        names: vec![name],
                    });
                } else {
                    let name = self.ident()?;
                    decls
                        .last_mut()
                        .expect("ANSI list starts with a direction")
                        .names
                        .push(name);
                }
                if self.eat(",") {
                    continue;
                }
                self.expect(")")?;
                return Ok(PortHeader::Ansi(decls));
            }
        }
        let mut names = Vec::new();
        loop {
            names.push(self.ident()?);
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(PortHeader::Names(names));
        }
    }

    fn port_net_type(&mut self) -> Option<String> {
        let t = self.peek();
        if t.kind == TokenKind::Keyword && (t.text == "reg" || NET_TYPES.contains(&t.text)) {
            self.advance();
            Some(t.text.to_string())
        } else {
            None
        }
    }

    fn range(&mut self) -> PResult<Range> {
        self.expect("[")?;
        let msb = self.expr()?;
        self.expect(":")?;
        let lsb = self.expr()?;
        self.expect("]")?;
        Ok(Range { msb, lsb })
    }

    fn declarators(&mut self, allow_init: bool) -> PResult<Vec<Declarator>> {
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            let mut dims = Vec::new();
            while self.peek().is("[") {
                dims.push(self.range()?);
            }
            let init = if allow_init && self.eat("=") {
                Some(self.expr()?)
            } else {
                None
            };
            out.push(Declarator { name, dims, init });
            if !self.eat(",") {
                return Ok(out);
            }
        }
    }

    fn param_decls(&mut self, local: bool) -> PResult<Vec<ParamDecl>> {
        let range = self.param_type()?;
        let mut out = Vec::new();
        loop {
            let name = self.ident()?;
            self.expect("=")?;
            let value = self.expr()?;
            out.push(ParamDecl {
                local,
                name,
                range: range.clone(),
                value,
            });
            if !self.eat(",") {
                return Ok(out);
            }
        }
    }

    fn module_item(&mut self) -> PResult<Option<Item>> {
        let t = self.peek();
        if t.kind == TokenKind::Identifier {
            return self.instantiation().map(Some);
        }
        if t.is(";") {
            self.advance();
            return Ok(None);
        }
        if t.kind != TokenKind::Keyword {
            return Err(self.error_at(t, format!("unexpected {t} in module body")));
        }
        let item = match t.text {
            "input" | "output" | "inout" => {
                self.advance();
                let direction = Direction::from_keyword(t.text).expect("direction keyword");
                let net_type = self.port_net_type();
                let signed = self.eat("signed");
                let range = if self.peek().is("[") { Some(self.range()?) } else { None };
                let names = self.declarators(true)?.into_iter().map(|d| d.name).collect();
                self.expect(";")?;
                Item::Port(PortDecl {
                    direction,
                    net_type,
                    signed,
                    range,
                    names,
                })
            }
            _ if NET_TYPES.contains(&t.text) => {
                self.advance();
                self.eat_any(&["vectored", "scalared"]);
                let signed = self.eat("signed");
                let range = if self.peek().is("[") { Some(self.range()?) } else { None };
                if self.eat("#") {
                    self.delay_value()?;
                }
                let decls = self.declarators(true)?;
                self.expect(";")?;
                Item::Net {
                    net_type: t.text.to_string(),
                    signed,
                    range,
                    decls,
                }
            }
            "reg" => {
                self.advance();
                let signed = self.eat("signed");
                let range = if self.peek().is("[") { Some(self.range()?) } else { None };
                let decls = self.declarators(true)?;
                self.expect(";")?;
                Item::Reg { signed, range, decls }
            }
            _ if VARIABLE_TYPES.contains(&t.text) => {
                self.advance();
                let decls = self.declarators(true)?;
                self.expect(";")?;
                Item::Variable {
                    kind: t.text.to_string(),
                    decls,
                }
            }
            "parameter" | "localparam" => {
                self.advance();
                let decls = self.param_decls(t.text == "localparam")?;
                self.expect(";")?;
                Item::Params(decls)
            }
            "assign" => {
                self.advance();
                if self.eat("#") {
                    self.delay_value()?;
                }
                let mut assignments = Vec::new();
                loop {
                    let lhs = self.lvalue()?;
                    self.expect("=")?;
                    let rhs = self.expr()?;
                    assignments.push((lhs, rhs));
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
                Item::Assign {
                    line: t.line,
                    assignments,
                }
            }
            "always" => {
                self.advance();
                Item::Always(self.stmt()?)
            }
            "initial" => {
                self.advance();
                Item::Initial(self.stmt()?)
            }
            "generate" | "function" | "task" | "specify" => {
                self.advance();
                let end = match t.text {
                    "generate" => "endgenerate",
                    "function" => "endfunction",
                    "task" => "endtask",
                    _ => "endspecify",
                };
                self.skip_balanced(end)?;
                Item::Opaque {
                    keyword: t.text.to_string(),
                    line: t.line,
                }
            }
            "if" | "for" | "case" | "casez" | "casex" | "begin" => {
                self.generate_construct()?;
                Item::Opaque {
                    keyword: t.text.to_string(),
                    line: t.line,
                }
            }
            "defparam" => {
                self.advance();
                let mut assignments = Vec::new();
                loop {
                    let lhs = self.lvalue()?;
                    self.expect("=")?;
                    assignments.push((lhs, self.expr()?));
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
                Item::Defparam(assignments)
            }
            _ if GATES.contains(&t.text) => self.gate()?,
            _ => return Err(self.error_at(t, format!("unexpected {t} in module body"))),
        };
        Ok(Some(item))
    }

    /// Generate constructs written without `generate`/`endgenerate`.
    fn generate_construct(&mut self) -> PResult<()> {
        self.enter()?;
        let t = self.advance();
        match t.text {
            "if" => {
                self.expect("(")?;
                self.skip_balanced(")")?;
                self.generate_body()?;
                if self.eat("else") {
                    self.generate_body()?;
                }
            }
            "for" => {
                self.expect("(")?;
                self.skip_balanced(")")?;
                self.generate_body()?;
            }
            "begin" => self.skip_balanced("end")?,
            _ => self.skip_balanced("endcase")?,
        }
        self.leave();
        Ok(())
    }

    fn generate_body(&mut self) -> PResult<()> {
        let t = self.peek();
        if ["if", "for", "case", "casez", "casex", "begin"].iter().any(|k| t.is(k)) && t.kind == TokenKind::Keyword {
            self.generate_construct()
        } else {
            self.skip_balanced(";")
        }
    }

    fn connections(&mut self) -> PResult<Vec<Connection>> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            if self.eat(".") {
                let port = self.ident()?;
                self.expect("(")?;
                let expr = if self.peek().is(")") { None } else { Some(self.expr()?) };
                self.expect(")")?;
                out.push(Connection { port: Some(port), expr });
            } else if self.peek().is(",") || self.peek().is(")") {
                out.push(Connection { port: None, expr: None });
            } else {
                out.push(Connection {
                    port: None,
                    expr: Some(self.expr()?),
                });
            }
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(out);
        }
    }

    fn instances(&mut self, name_required: bool) -> PResult<Vec<Instance>> {
        let mut out = Vec::new();
        loop {
            let name = if self.peek().kind == TokenKind::Identifier {
                let n = self.ident()?;
                if self.peek().is("[") {
                    self.range()?;
                }
                Some(n)
            } else if name_required {
                return Err(self.error_here(format!("expected instance name, found {}", self.peek())));
            } else {
                None
            };
            let connections = self.connections()?;
            out.push(Instance { name, connections });
            if !self.eat(",") {
                break;
            }
        }
        self.expect(";")?;
        Ok(out)
    }

    fn instantiation(&mut self) -> PResult<Item> {
        let module = self.ident()?;
        let params = if self.eat("#") {
            if self.peek().is("(") {
                self.connections()?
            } else {
                vec![Connection {
                    port: None,
                    expr: Some(self.primary()?),
                }]
            }
        } else {
            Vec::new()
        };
        let instances = self.instances(true)?;
        Ok(Item::Instantiation {
            module,
            params,
            instances,
        })
    }

    fn gate(&mut self) -> PResult<Item> {
        let kind = self.advance().text.to_string();
        if self.peek().is("(") && STRENGTHS.contains(&self.peek_at(1).text) {
            self.advance();
            self.skip_balanced(")")?;
        }
        if self.eat("#") {
            self.delay_value()?;
        }
        let instances = self.instances(false)?;
        Ok(Item::Gate { kind, instances })
    }

    // ---- statements ----------------------------------------------------

    fn stmt(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let s = self.stmt_inner();
        self.leave();
        s
    }

    fn stmt_inner(&mut self) -> PResult<Stmt> {
        let t = self.peek();
        match (t.kind, t.text) {
            (TokenKind::Punct, ";") => {
                self.advance();
                Ok(Stmt::Null)
            }
            (TokenKind::Keyword, "begin" | "fork") => {
                self.advance();
                let parallel = t.text == "fork";
                let label = if self.eat(":") { Some(self.ident()?) } else { None };
                let mut decls = Vec::new();
                loop {
                    let d = self.peek();
                    if d.kind == TokenKind::Keyword
                        && (d.text == "reg"
                            || d.text == "parameter"
                            || d.text == "localparam"
                            || VARIABLE_TYPES.contains(&d.text))
                    {
                        if let Some(item) = self.module_item()? {
                            decls.push(item);
                        }
                    } else {
                        break;
                    }
                }
                let close = if parallel { "join" } else { "end" };
                let mut stmts = Vec::new();
                while !self.eat(close) {
                    if self.at_eof() {
                        return Err(self.error_here(format!("expected `{close}`, found end of file")));
                    }
                    stmts.push(self.stmt()?);
                }
                Ok(Stmt::Block {
                    label,
                    parallel,
                    decls,
                    stmts,
                })
            }
            (TokenKind::Keyword, "if") => {
                self.advance();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let then = Box::new(self.stmt()?);
                let otherwise = if self.eat("else") {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                Ok(Stmt::If { cond, then, otherwise })
            }
            (TokenKind::Keyword, "case" | "casez" | "casex") => {
                self.advance();
                self.expect("(")?;
                let subject = self.expr()?;
                self.expect(")")?;
                let mut items = Vec::new();
                loop {
                    if self.eat("endcase") {
                        break;
                    }
                    if self.at_eof() {
                        return Err(self.error_here("expected `endcase`, found end of file"));
                    }
                    let labels = if self.eat("default") {
                        self.eat(":");
                        Vec::new()
                    } else {
                        let mut labels = vec![self.expr()?];
                        while self.eat(",") {
                            labels.push(self.expr()?);
                        }
                        self.expect(":")?;
                        labels
                    };
                    let body = self.stmt()?;
                    items.push(CaseItem { labels, body });
                }
                Ok(Stmt::Case {
                    kind: t.text.to_string(),
                    subject,
                    items,
                })
            }
            (TokenKind::Keyword, "for") => {
                self.advance();
                self.expect("(")?;
                let init = Box::new(self.for_assignment()?);
                self.expect(";")?;
                let cond = self.expr()?;
                self.expect(";")?;
                let step = Box::new(self.for_assignment()?);
                self.expect(")")?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt::For { init, cond, step, body })
            }
            (TokenKind::Keyword, "while" | "repeat" | "wait") => {
                self.advance();
                self.expect("(")?;
                let cond = self.expr()?;
                self.expect(")")?;
                let body = Box::new(self.stmt()?);
                Ok(match t.text {
                    "while" => Stmt::While { cond, body },
                    "repeat" => Stmt::Repeat { count: cond, body },
                    _ => Stmt::Wait { cond, body },
                })
            }
            (TokenKind::Keyword, "forever") => {
                self.advance();
                Ok(Stmt::Forever(Box::new(self.stmt()?)))
            }
            (TokenKind::Punct, "#") => {
                self.advance();
                let d = self.delay_value()?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt::Timed {
                    timing: Timing::Delay(d),
                    body,
                })
            }
            (TokenKind::Punct, "@") => {
                self.advance();
                let events = self.event_control()?;
                let body = Box::new(self.stmt()?);
                Ok(Stmt::Timed {
                    timing: Timing::Event(events),
                    body,
                })
            }
            (TokenKind::Operator, "->") => {
                self.advance();
                let name = self.ident()?;
                self.expect(";")?;
                Ok(Stmt::Trigger(name))
            }
            (TokenKind::Keyword, "disable") => {
                self.advance();
                let name = self.ident()?;
                self.expect(";")?;
                Ok(Stmt::Disable(name))
            }
            (TokenKind::Keyword, "assign" | "force") => {
                self.advance();
                let lhs = self.lvalue()?;
                self.expect("=")?;
                let rhs = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Assign {
                    lhs,
                    rhs,
                    blocking: true,
                })
            }
            (TokenKind::Keyword, "deassign" | "release") => {
                self.advance();
                self.lvalue()?;
                self.expect(";")?;
                Ok(Stmt::Null)
            }
            (TokenKind::SystemIdentifier, _) => {
                self.advance();
                let args = if self.peek().is("(") {
                    self.call_args()?
                } else {
                    Vec::new()
                };
                self.expect(";")?;
                Ok(Stmt::Call {
                    name: t.text.to_string(),
                    args,
                })
            }
            (TokenKind::Identifier, _) if self.peek_at(1).is("(") || self.peek_at(1).is(";") => {
                self.advance();
                let args = if self.peek().is("(") {
                    self.call_args()?
                } else {
                    Vec::new()
                };
                self.expect(";")?;
                Ok(Stmt::Call {
                    name: t.text.to_string(),
                    args,
                })
            }
            (TokenKind::Identifier, _) | (TokenKind::Punct, "{") => {
                let lhs = self.lvalue()?;
                let op = self.peek();
                let blocking = if op.is("=") {
                    true
                } else if op.is("<=") {
                    false
                } else {
                    return Err(self.error_at(op, format!("expected `=` or `<=`, found {op}")));
                };
                self.advance();
                if self.eat("#") {
                    self.delay_value()?;
                } else if self.eat("@") {
                    self.event_control()?;
                }
                let rhs = self.expr()?;
                self.expect(";")?;
                Ok(Stmt::Assign { lhs, rhs, blocking })
            }
            _ => Err(self.error_at(t, format!("expected statement, found {t}"))),
        }
    }

    fn for_assignment(&mut self) -> PResult<Stmt> {
        let lhs = self.lvalue()?;
        self.expect("=")?;
        let rhs = self.expr()?;
        Ok(Stmt::Assign {
            lhs,
            rhs,
            blocking: true,
        })
    }

    fn delay_value(&mut self) -> PResult<Expr> {
        let t = self.peek();
        match t.kind {
            TokenKind::Number => {
                self.advance();
                Ok(Expr::Number(t.text.to_string()))
            }
            TokenKind::Identifier => Ok(Expr::Ident(self.ident()?)),
            TokenKind::MacroRef => {
                self.advance();
                Ok(Expr::Macro(t.text.to_string()))
            }
            _ if t.is("(") => {
                self.advance();
                let e = self.expr()?;
                // min:typ:max
                if self.eat(":") {
                    self.expr()?;
                    self.expect(":")?;
                    self.expr()?;
                }
                self.expect(")")?;
                Ok(e)
            }
            _ => Err(self.error_at(t, format!("expected delay value, found {t}"))),
        }
    }

    fn event_control(&mut self) -> PResult<Vec<EventExpr>> {
        if self.eat("*") {
            return Ok(vec![EventExpr::Any]);
        }
        if self.peek().kind == TokenKind::Identifier {
            return Ok(vec![EventExpr::Edge {
                edge: None,
                expr: self.hier_ident()?,
            }]);
        }
        self.expect("(")?;
        if self.eat("*") {
            self.expect(")")?;
            return Ok(vec![EventExpr::Any]);
        }
        let mut events = Vec::new();
        loop {
            let edge = if self.eat("posedge") {
                Some(Edge::Pos)
            } else if self.eat("negedge") {
                Some(Edge::Neg)
            } else {
                None
            };
            let expr = self.expr()?;
            events.push(EventExpr::Edge { edge, expr });
            if self.eat("or") || self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(events);
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.eat(")") {
            return Ok(args);
        }
        loop {
            if self.peek().is(",") {
                // empty argument, e.g. `$display(,x)`
            } else {
                args.push(self.expr()?);
            }
            if self.eat(",") {
                continue;
            }
            self.expect(")")?;
            return Ok(args);
        }
    }

    // ---- expressions ---------------------------------------------------

    fn lvalue(&mut self) -> PResult<Expr> {
        let t = self.peek();
        if t.is("{") {
            self.advance();
            self.enter()?;
            let items = self.lvalue_list();
            self.leave();
            self.expect("}")?;
            return Ok(Expr::Concat(items?));
        }
        if t.kind != TokenKind::Identifier {
            return Err(self.error_at(t, format!("expected assignment target, found {t}")));
        }
        let base = self.hier_ident()?;
        self.selects(base)
    }

    fn lvalue_list(&mut self) -> PResult<Vec<Expr>> {
        let mut items = vec![self.lvalue()?];
        while self.eat(",") {
            items.push(self.lvalue()?);
        }
        Ok(items)
    }

    fn hier_ident(&mut self) -> PResult<Expr> {
        let first = self.ident()?;
        if !self.peek().is(".") {
            return Ok(Expr::Ident(first));
        }
        let mut path = vec![first];
        while self.eat(".") {
            path.push(self.ident()?);
        }
        Ok(Expr::Hier(path))
    }

    fn selects(&mut self, mut base: Expr) -> PResult<Expr> {
        while self.eat("[") {
            let first = self.expr()?;
            base = if self.eat(":") {
                let lsb = self.expr()?;
                Expr::Slice {
                    base: Box::new(base),
                    msb: Box::new(first),
                    lsb: Box::new(lsb),
                }
            } else if self.peek().is("+:") || self.peek().is("-:") {
                let ascending = self.advance().text == "+:";
                let width = self.expr()?;
                Expr::IndexedSlice {
                    base: Box::new(base),
                    start: Box::new(first),
                    width: Box::new(width),
                    ascending,
                }
            } else {
                Expr::Index {
                    base: Box::new(base),
                    index: Box::new(first),
                }
            };
            self.expect("]")?;
        }
        Ok(base)
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let cond = self.binary(1)?;
        let out = if self.eat("?") {
            let then = self.expr()?;
            self.expect(":")?;
            let otherwise = self.expr()?;
            Expr::Ternary {
                cond: Box::new(cond),
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            }
        } else {
            cond
        };
        self.leave();
        Ok(out)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let t = self.peek();
            if t.kind != TokenKind::Operator {
                return Ok(lhs);
            }
            let Some((op, prec)) = BinaryOp::from_token(t.text) else {
                return Ok(lhs);
            };
            if prec < min_prec {
                return Ok(lhs);
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        let t = self.peek();
        if t.kind == TokenKind::Operator {
            if let Some(op) = UnaryOp::from_token(t.text) {
                self.advance();
                self.enter()?;
                let operand = self.unary();
                self.leave();
                return Ok(Expr::Unary {
                    op,
                    operand: Box::new(operand?),
                });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let t = self.peek();
        match t.kind {
            TokenKind::Number => {
                self.advance();
                Ok(Expr::Number(t.text.to_string()))
            }
            TokenKind::Str => {
                self.advance();
                Ok(Expr::Str(t.text.to_string()))
            }
            TokenKind::MacroRef => {
                self.advance();
                let mac = Expr::Macro(t.text.to_string());
                self.selects(mac)
            }
            TokenKind::SystemIdentifier => {
                self.advance();
                let args = if self.peek().is("(") {
                    self.call_args()?
                } else {
                    Vec::new()
                };
                Ok(Expr::Call {
                    name: t.text.to_string(),
                    args,
                })
            }
            TokenKind::Identifier => {
                if self.peek_at(1).is("(") {
                    self.advance();
                    let args = self.call_args()?;
                    return Ok(Expr::Call {
                        name: t.text.to_string(),
                        args,
                    });
                }
                let base = self.hier_ident()?;
                self.selects(base)
            }
            TokenKind::Punct if t.text == "(" => {
                self.advance();
                let e = self.expr()?;
                if self.eat(":") {
                    self.expr()?;
                    self.expect(":")?;
                    self.expr()?;
                }
                self.expect(")")?;
                Ok(e)
            }
            TokenKind::Punct if t.text == "{" => {
                self.advance();
                self.enter()?;
                let first = self.expr()?;
                let out = if self.peek().is("{") {
                    self.advance();
                    let mut items = vec![self.expr()?];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect("}")?;
                    self.expect("}")?;
                    Expr::Replicate {
                        count: Box::new(first),
                        items,
                    }
                } else {
                    let mut items = vec![first];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect("}")?;
                    Expr::Concat(items)
                };
                self.leave();
                Ok(out)
            }
            _ => Err(self.error_at(t, format!("expected expression, found {t}"))),
        }
    }
}

#[cfg(test)]
pub fn parse_expr(tokens: &[Token<'_>]) -> Result<Expr, ParseError> {
    let significant: Vec<Token<'_>> = tokens.iter().filter(|t| !t.is_trivia()).copied().collect();
    let mut p = Parser {
        toks: &significant,
        pos: 0,
        depth: 0,
    };
    let e = p.expr()?;
    if !p.at_eof() {
        return Err(p.error_here(format!("unexpected {}", p.peek())));
    }
    Ok(e)
}
