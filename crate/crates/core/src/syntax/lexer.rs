//! Lossless lexer for Verilog-2001 source text.
//!
//! Every token carries the whitespace that precedes it, so concatenating
//! `leading + text` over the stream reproduces the input byte for byte.
//! Comments and compiler directives are kept as tokens; the parser skips them.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Identifier,
    /// `$display`, `$finish`, ...
    SystemIdentifier,
    Keyword,
    Number,
    Operator,
    Punct,
    Str,
    Comment,
    /// A whole compiler-directive line such as `` `timescale 1ns/1ps ``.
    Directive,
    /// Use of a text macro, e.g. `` `WIDTH ``.
    MacroRef,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'src> {
    pub kind: TokenKind,
    pub text: &'src str,
    /// Whitespace between the previous token and this one.
    pub leading: &'src str,
    /// 1-based.
    pub line: u32,
    /// 1-based, in characters.
    pub column: u32,
}

impl Token<'_> {
    pub fn is(&self, text: &str) -> bool {
        self.text == text && !matches!(self.kind, TokenKind::Str | TokenKind::Comment)
    }

    pub fn is_trivia(&self) -> bool {
        matches!(self.kind, TokenKind::Comment | TokenKind::Directive)
    }
}

impl fmt::Display for Token<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Eof => f.write_str("end of file"),
            _ => write!(f, "`{}`", self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct LexError {
    pub message: String,
    pub line: u32,
    pub column: u32,
}

pub const KEYWORDS: &[&str] = &[
    "always",
    "and",
    "assign",
    "automatic",
    "begin",
    "buf",
    "bufif0",
    "bufif1",
    "case",
    "casex",
    "casez",
    "cell",
    "cmos",
    "config",
    "deassign",
    "default",
    "defparam",
    "design",
    "disable",
    "edge",
    "else",
    "end",
    "endcase",
    "endconfig",
    "endfunction",
    "endgenerate",
    "endmodule",
    "endprimitive",
    "endspecify",
    "endtable",
    "endtask",
    "event",
    "for",
    "force",
    "forever",
    "fork",
    "function",
    "generate",
    "genvar",
    "highz0",
    "highz1",
    "if",
    "ifnone",
    "incdir",
    "include",
    "initial",
    "inout",
    "input",
    "instance",
    "integer",
    "join",
    "large",
    "liblist",
    "library",
    "localparam",
    "macromodule",
    "medium",
    "module",
    "nand",
    "negedge",
    "nmos",
    "nor",
    "noshowcancelled",
    "not",
    "notif0",
    "notif1",
    "or",
    "output",
    "parameter",
    "pmos",
    "posedge",
    "primitive",
    "pull0",
    "pull1",
    "pulldown",
    "pullup",
    "pulsestyle_ondetect",
    "pulsestyle_onevent",
    "rcmos",
    "real",
    "realtime",
    "reg",
    "release",
    "repeat",
    "rnmos",
    "rpmos",
    "rtran",
    "rtranif0",
    "rtranif1",
    "scalared",
    "showcancelled",
    "signed",
    "small",
    "specify",
    "specparam",
    "strong0",
    "strong1",
    "supply0",
    "supply1",
    "table",
    "task",
    "time",
    "tran",
    "tranif0",
    "tranif1",
    "tri",
    "tri0",
    "tri1",
    "triand",
    "trior",
    "trireg",
    "unsigned",
    "use",
    "vectored",
    "wait",
    "wand",
    "weak0",
    "weak1",
    "while",
    "wire",
    "wor",
    "xnor",
    "xor",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.binary_search(&word).is_ok()
}

/// Directives whose argument runs to the end of the line.
const LINE_DIRECTIVES: &[&str] = &[
    "define",
    "undef",
    "include",
    "timescale",
    "default_nettype",
    "ifdef",
    "ifndef",
    "elsif",
    "line",
    "unconnected_drive",
    "pragma",
    "begin_keywords",
];

/// Directives that take no argument.
const BARE_DIRECTIVES: &[&str] = &[
    "else",
    "endif",
    "resetall",
    "celldefine",
    "endcelldefine",
    "nounconnected_drive",
    "end_keywords",
];

const OPERATORS: &[&str] = &[
    "<<<", ">>>", "===", "!==", "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "->",
    "+:", "-:", "+", "-", "*", "/", "%", "<", ">", "!", "~", "&", "|", "^", "?", ":", "=",
];

const PUNCT: &[u8] = b"()[]{};,.#@";

/// Splits `source` into tokens, ending with an `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token<'_>>, LexError> {
    let mut lexer = Lexer {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    loop {
        let ws_start = lexer.pos;
        lexer.skip_whitespace();
        let leading = &source[ws_start..lexer.pos];
        let (line, column) = (lexer.line, lexer.column);
        if lexer.pos >= lexer.bytes.len() {
            tokens.push(Token {
                kind: TokenKind::Eof,
                text: "",
                leading,
                line,
                column,
            });
            return Ok(tokens);
        }
        let start = lexer.pos;
        let kind = lexer.next_kind()?;
        tokens.push(Token {
            kind,
            text: &source[start..lexer.pos],
            leading,
            line,
            column,
        });
    }
}

/// Concatenates a token stream back into source text.
pub fn detokenize(tokens: &[Token<'_>]) -> String {
    let mut out = String::new();
    for t in tokens {
        out.push_str(t.leading);
        out.push_str(t.text);
    }
    out
}

struct Lexer<'src> {
    src: &'src str,
    bytes: &'src [u8],
    pos: usize,
    line: u32,
    column: u32,
}

impl Lexer<'_> {
    fn peek(&self) -> u8 {
        self.peek_at(0)
    }

    fn peek_at(&self, offset: usize) -> u8 {
        self.bytes.get(self.pos + offset).copied().unwrap_or(0)
    }

    fn bump(&mut self) {
        let b = self.bytes[self.pos];
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.column = 1;
        } else if b & 0xC0 != 0x80 {
            self.column += 1;
        }
    }

    fn bump_while(&mut self, pred: impl Fn(u8) -> bool) {
        while self.pos < self.bytes.len() && pred(self.peek()) {
            self.bump();
        }
    }

    fn error(&self, message: impl Into<String>, line: u32, column: u32) -> LexError {
        LexError {
            message: message.into(),
            line,
            column,
        }
    }

    fn skip_whitespace(&mut self) {
        self.bump_while(|b| matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0B | 0x0C));
    }

    fn next_kind(&mut self) -> Result<TokenKind, LexError> {
        let (line, column) = (self.line, self.column);
        let b = self.peek();
        match b {
            b'/' if self.peek_at(1) == b'/' => {
                self.bump_while(|b| b != b'\n');
                Ok(TokenKind::Comment)
            }
            b'/' if self.peek_at(1) == b'*' => {
                self.bump();
                self.bump();
                loop {
                    if self.pos >= self.bytes.len() {
                        return Err(self.error("unterminated block comment", line, column));
                    }
                    if self.peek() == b'*' && self.peek_at(1) == b'/' {
                        self.bump();
                        self.bump();
                        return Ok(TokenKind::Comment);
                    }
                    self.bump();
                }
            }
            b'"' => {
                self.bump();
                loop {
                    match self.peek() {
                        _ if self.pos >= self.bytes.len() => {
                            return Err(self.error("unterminated string literal", line, column))
                        }
                        b'\n' => return Err(self.error("unterminated string literal", line, column)),
                        b'\\' => {
                            self.bump();
                            if self.pos < self.bytes.len() && self.peek() != b'\n' {
                                self.bump();
                            }
                        }
                        b'"' => {
                            self.bump();
                            return Ok(TokenKind::Str);
                        }
                        _ => self.bump(),
                    }
                }
            }
            b'`' => self.directive(line, column),
            b'\\' => {
                self.bump();
                let start = self.pos;
                self.bump_while(|b| b.is_ascii_graphic());
                if self.pos == start {
                    return Err(self.error("empty escaped identifier", line, column));
                }
                Ok(TokenKind::Identifier)
            }
            b'$' => {
                self.bump();
                if !is_ident_start(self.peek()) {
                    return Err(self.error("expected system task name after `$`", line, column));
                }
                self.bump_while(is_ident_char);
                Ok(TokenKind::SystemIdentifier)
            }
            b'\'' => self.based_literal(line, column),
            b'0'..=b'9' => self.number(line, column),
            _ if is_ident_start(b) => {
                let start = self.pos;
                self.bump_while(is_ident_char);
                if is_keyword(&self.src[start..self.pos]) {
                    Ok(TokenKind::Keyword)
                } else {
                    Ok(TokenKind::Identifier)
                }
            }
            _ if PUNCT.contains(&b) => {
                self.bump();
                Ok(TokenKind::Punct)
            }
            _ => {
                let rest = &self.bytes[self.pos..];
                if let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(op.as_bytes())) {
                    for _ in 0..op.len() {
                        self.bump();
                    }
                    return Ok(TokenKind::Operator);
                }
                let ch = self.src[self.pos..].chars().next().unwrap_or('\0');
                Err(self.error(format!("unexpected character {ch:?}"), line, column))
            }
        }
    }

    fn directive(&mut self, line: u32, column: u32) -> Result<TokenKind, LexError> {
        self.bump();
        let start = self.pos;
        if !is_ident_start(self.peek()) {
            return Err(self.error("stray backtick", line, column));
        }
        self.bump_while(is_ident_char);
        let name = &self.src[start..self.pos];
        if LINE_DIRECTIVES.contains(&name) {
            // Rest of the line, honoring backslash continuations.
            while self.pos < self.bytes.len() && self.peek() != b'\n' {
                if self.peek() == b'\\' && self.peek_at(1) == b'\n' {
                    self.bump();
                }
                if self.peek() == b'\\' && self.peek_at(1) == b'\r' && self.peek_at(2) == b'\n' {
                    self.bump();
                    self.bump();
                }
                self.bump();
            }
            Ok(TokenKind::Directive)
        } else if BARE_DIRECTIVES.contains(&name) {
            Ok(TokenKind::Directive)
        } else {
            Ok(TokenKind::MacroRef)
        }
    }

    fn number(&mut self, line: u32, column: u32) -> Result<TokenKind, LexError> {
        self.bump_while(|b| b.is_ascii_digit() || b == b'_');
        if self.peek() == b'.' && self.peek_at(1).is_ascii_digit() {
            self.bump();
            self.bump_while(|b| b.is_ascii_digit() || b == b'_');
            self.exponent(line, column)?;
            return Ok(TokenKind::Number);
        }
        if matches!(self.peek(), b'e' | b'E') {
            self.exponent(line, column)?;
            return Ok(TokenKind::Number);
        }
        // Size followed by a base, possibly separated by blanks: `4 'b1010`.
        let mut ahead = 0;
        while matches!(self.peek_at(ahead), b' ' | b'\t') {
            ahead += 1;
        }
        if self.peek_at(ahead) == b'\'' {
            let mut base_at = ahead + 1;
            if matches!(self.peek_at(base_at), b's' | b'S') {
                base_at += 1;
            }
            if is_base_char(self.peek_at(base_at)) {
                for _ in 0..ahead {
                    self.bump();
                }
                return self.based_literal(line, column);
            }
        }
        if is_ident_start(self.peek()) {
            return Err(self.error("malformed number literal", line, column));
        }
        Ok(TokenKind::Number)
    }

    fn exponent(&mut self, line: u32, column: u32) -> Result<(), LexError> {
        if matches!(self.peek(), b'e' | b'E') {
            self.bump();
            if matches!(self.peek(), b'+' | b'-') {
                self.bump();
            }
            if !self.peek().is_ascii_digit() {
                return Err(self.error("malformed real literal exponent", line, column));
            }
            self.bump_while(|b| b.is_ascii_digit() || b == b'_');
        }
        Ok(())
    }

    /// Lexes `'[s]<base><digits>` with the cursor on the apostrophe.
    fn based_literal(&mut self, line: u32, column: u32) -> Result<TokenKind, LexError> {
        self.bump();
        if matches!(self.peek(), b's' | b'S') {
            self.bump();
        }
        let base = self.peek().to_ascii_lowercase();
        if !is_base_char(base) {
            return Err(self.error("malformed based literal: missing base", line, column));
        }
        self.bump();
        self.bump_while(|b| b == b' ' || b == b'\t');
        let start = self.pos;
        self.bump_while(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'?');
        let digits = &self.src[start..self.pos];
        if digits.is_empty() || digits.bytes().all(|b| b == b'_') {
            return Err(self.error("malformed based literal: no digits", line, column));
        }
        let valid = |b: u8| {
            let b = b.to_ascii_lowercase();
            b == b'_'
                || matches!(b, b'x' | b'z' | b'?')
                || match base {
                    b'b' => matches!(b, b'0' | b'1'),
                    b'o' => matches!(b, b'0'..=b'7'),
                    b'd' => b.is_ascii_digit(),
                    _ => b.is_ascii_hexdigit(),
                }
        };
        if !digits.bytes().all(valid) {
            return Err(self.error(
                format!("malformed based literal: invalid digit in `{digits}`"),
                line,
                column,
            ));
        }
        if base == b'd' {
            let xz = digits
                .bytes()
                .filter(|b| matches!(b.to_ascii_lowercase(), b'x' | b'z' | b'?'))
                .count();
            let non_sep = digits.bytes().filter(|&b| b != b'_').count();
            if xz > 0 && non_sep != 1 {
                return Err(self.error("malformed decimal literal: x/z must stand alone", line, column));
            }
        }
        Ok(TokenKind::Number)
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

fn is_base_char(b: u8) -> bool {
    matches!(b.to_ascii_lowercase(), b'b' | b'o' | b'd' | b'h')
}
