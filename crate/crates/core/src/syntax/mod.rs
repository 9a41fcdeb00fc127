//! Verilog-2001 subset front end: the syntax gate that filters candidates
//! before scoring, plus module-interface extraction for testbench wiring.
//!
//! The grammar covers module headers (ANSI and non-ANSI), parameters, net and
//! variable declarations, continuous assignments, `always`/`initial` blocks
//! with the usual statements, instantiations and gate primitives. `generate`,
//! `function`, `task` and `specify` bodies are accepted as balanced opaque
//! regions. Compiler directives are skipped, not expanded.

pub mod ast;
mod consteval;
pub mod lexer;
pub mod literal;
mod parser;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use consteval::const_eval;
pub use lexer::{detokenize, tokenize, LexError, Token, TokenKind};
pub use parser::ParseError;

use ast::{Direction, Item, Module, PortHeader, Range, SourceFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub column: u32,
}

impl Diagnostic {
    fn error(message: impl Into<String>, line: u32, column: u32) -> Self {
        Self {
            severity: Severity::Error,
            message: message.into(),
            line,
            column,
        }
    }

    fn warning(message: impl Into<String>, line: u32, column: u32) -> Self {
        Self {
            severity: Severity::Warning,
            message: message.into(),
            line,
            column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntaxStatus {
    Valid,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxReport {
    pub status: SyntaxStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub module_count: usize,
}

impl SyntaxReport {
    fn from_diagnostics(diagnostics: Vec<Diagnostic>, module_count: usize) -> Self {
        let status = if diagnostics.iter().any(|d| d.severity == Severity::Error) {
            SyntaxStatus::Invalid
        } else {
            SyntaxStatus::Valid
        };
        Self {
            status,
            diagnostics,
            module_count,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.status == SyntaxStatus::Valid
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.severity == Severity::Error)
    }
}

/// Tokenizes and parses `source`, returning the tree alongside its report.
///
/// The tree holds every module that parsed cleanly, even when others failed.
pub fn parse_source(source: &str) -> (SourceFile, SyntaxReport) {
    let tokens = match tokenize(source) {
        Ok(t) => t,
        Err(e) => {
            let report = SyntaxReport::from_diagnostics(vec![Diagnostic::error(e.message, e.line, e.column)], 0);
            return (SourceFile { modules: Vec::new() }, report);
        }
    };
    let mut diagnostics = Vec::new();
    for t in &tokens {
        match t.kind {
            TokenKind::Directive if t.text.starts_with("`define") || t.text.starts_with("`include") => {
                let name = t.text.split_whitespace().next().unwrap_or(t.text);
                diagnostics.push(Diagnostic::warning(
                    format!("directive {name} skipped without preprocessing"),
                    t.line,
                    t.column,
                ));
            }
            TokenKind::MacroRef => diagnostics.push(Diagnostic::warning(
                format!("macro {} not expanded", t.text),
                t.line,
                t.column,
            )),
            _ => {}
        }
    }
    let (file, errors) = parser::parse(&tokens);
    diagnostics.extend(
        errors
            .into_iter()
            .map(|e| Diagnostic::error(e.message, e.line, e.column)),
    );
    if file.modules.is_empty() && !diagnostics.iter().any(|d| d.severity == Severity::Error) {
        let eof = tokens.last().expect("token stream ends with eof");
        diagnostics.push(Diagnostic::error("no module declaration found", eof.line, eof.column));
    }
    let count = file.modules.len();
    (file, SyntaxReport::from_diagnostics(diagnostics, count))
}

/// Runs the syntax gate. Never fails: malformed input yields an invalid report.
pub fn check_syntax(source: &str) -> SyntaxReport {
    parse_source(source).1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub direction: PortDirection,
    pub width: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PortDirection {
    Input,
    Output,
    Inout,
}

impl From<Direction> for PortDirection {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Input => PortDirection::Input,
            Direction::Output => PortDirection::Output,
            Direction::Inout => PortDirection::Inout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleInterface {
    pub name: String,
    pub ports: Vec<Port>,
}

impl ModuleInterface {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterfaceError {
    #[error("source does not pass the syntax check")]
    Syntax(SyntaxReport),
    #[error("module `{module}`: cannot resolve width of port `{port}`")]
    UnresolvedWidth { module: String, port: String },
    #[error("module `{module}`: port `{port}` has no direction declaration")]
    MissingDirection { module: String, port: String },
    #[error("module `{module}`: duplicate port `{port}`")]
    DuplicatePort { module: String, port: String },
}

/// Parameter values of a module, from header and body declarations in order.
pub fn module_parameters(module: &Module) -> HashMap<String, i64> {
    let mut env = HashMap::new();
    let body = module.items.iter().filter_map(|i| match i {
        Item::Params(ps) => Some(ps.iter()),
        _ => None,
    });
    for p in module.params.iter().chain(body.flatten()) {
        if let Some(v) = const_eval(&p.value, &env) {
            env.insert(p.name.clone(), v);
        }
    }
    env
}

/// Bit width of `[msb:lsb]`, i.e. `|msb - lsb| + 1`.
pub fn range_width(range: Option<&Range>, env: &HashMap<String, i64>) -> Option<u32> {
    let Some(r) = range else { return Some(1) };
    let msb = const_eval(&r.msb, env)?;
    let lsb = const_eval(&r.lsb, env)?;
    u32::try_from(msb.abs_diff(lsb)).ok()?.checked_add(1)
}

pub fn module_interface(module: &Module) -> Result<ModuleInterface, InterfaceError> {
    let env = module_parameters(module);
    let err_width = |port: &str| InterfaceError::UnresolvedWidth {
        module: module.name.clone(),
        port: port.to_string(),
    };
    let mut ports = Vec::new();
    match &module.header {
        PortHeader::None => {}
        PortHeader::Ansi(decls) => {
            for d in decls {
                let width = range_width(d.range.as_ref(), &env).ok_or_else(|| err_width(&d.names[0]))?;
                for name in &d.names {
                    ports.push(Port {
                        name: name.clone(),
                        direction: d.direction.into(),
                        width,
                    });
                }
            }
        }
        PortHeader::Names(names) => {
            for name in names {
                let decl = module.items.iter().find_map(|i| match i {
                    Item::Port(p) if p.names.contains(name) => Some(p),
                    _ => None,
                });
                let Some(decl) = decl else {
                    return Err(InterfaceError::MissingDirection {
                        module: module.name.clone(),
                        port: name.clone(),
                    });
                };
                let range = decl.range.as_ref().or_else(|| {
                    module.items.iter().find_map(|i| match i {
                        Item::Net { range, decls, .. } | Item::Reg { range, decls, .. }
                            if decls.iter().any(|d| &d.name == name) =>
                        {
                            range.as_ref()
                        }
                        _ => None,
                    })
                });
                let width = range_width(range, &env).ok_or_else(|| err_width(name))?;
                ports.push(Port {
                    name: name.clone(),
                    direction: decl.direction.into(),
                    width,
                });
            }
        }
    }
    for (i, p) in ports.iter().enumerate() {
        if ports[..i].iter().any(|q| q.name == p.name) {
            return Err(InterfaceError::DuplicatePort {
                module: module.name.clone(),
                port: p.name.clone(),
            });
        }
    }
    Ok(ModuleInterface {
        name: module.name.clone(),
        ports,
    })
}

/// One interface per declared module, in source order.
pub fn extract_module_interface(source: &str) -> Result<Vec<ModuleInterface>, InterfaceError> {
    let (file, report) = parse_source(source);
    if !report.is_valid() {
        return Err(InterfaceError::Syntax(report));
    }
    file.modules.iter().map(module_interface).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mux_is_valid() {
        let r = check_syntax("module mux(input a, b, s, output y);\n  assign y = s ? b : a;\nendmodule\n");
        assert!(r.is_valid(), "{r:?}");
        assert_eq!(r.module_count, 1);
    }

    #[test]
    fn missing_endmodule_reported_at_eof() {
        let src = "module m(input a, output y);\n  assign y = a;\n";
        let r = check_syntax(src);
        assert!(!r.is_valid());
        let d = r.errors().next().unwrap();
        assert!(d.message.contains("endmodule"), "{}", d.message);
        assert_eq!((d.line, d.column), (3, 1));
    }

    #[test]
    fn directives_warn_but_stay_valid() {
        let r = check_syntax("`define W 4\n`include \"defs.vh\"\nmodule m; endmodule\n");
        assert!(r.is_valid());
        assert_eq!(
            r.diagnostics.iter().filter(|d| d.severity == Severity::Warning).count(),
            2
        );
    }

    #[test]
    fn opaque_regions_must_balance() {
        assert!(check_syntax("module m; function f; begin f = 1; end endfunction endmodule").is_valid());
        assert!(!check_syntax("module m; function f; begin f = 1; endfunction endmodule").is_valid());
        assert!(!check_syntax("module m; generate ( endgenerate endmodule").is_valid());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!(
            "module m; assign y = {}a{}; endmodule",
            "(".repeat(5000),
            ")".repeat(5000)
        );
        assert!(!check_syntax(&src).is_valid());
        let src = format!("module m; initial {} ; endmodule", "begin ".repeat(5000));
        assert!(!check_syntax(&src).is_valid());
    }

    #[test]
    fn determinism() {
        let src = "module m(input a output y); endmodule";
        assert_eq!(check_syntax(src), check_syntax(src));
    }

    #[test]
    fn adder_ports_and_widths() {
        let ifs =
            extract_module_interface("module add(input [7:0] a, b, output [8:0] s);\n assign s = a + b;\nendmodule")
                .unwrap();
        assert_eq!(ifs.len(), 1);
        let ports: Vec<_> = ifs[0]
            .ports
            .iter()
            .map(|p| (p.name.as_str(), p.direction, p.width))
            .collect();
        assert_eq!(
            ports,
            vec![
                ("a", PortDirection::Input, 8),
                ("b", PortDirection::Input, 8),
                ("s", PortDirection::Output, 9)
            ]
        );
    }

    #[test]
    fn portless_and_multiple_modules() {
        let ifs = extract_module_interface("module a; endmodule\nmodule b(input x); endmodule").unwrap();
        assert_eq!(ifs.len(), 2);
        assert_eq!(ifs[0].name, "a");
        assert!(ifs[0].ports.is_empty());
        assert_eq!(ifs[1].name, "b");
    }

    #[test]
    fn non_ansi_and_parameterized_widths() {
        let src = "module c #(parameter W = 4) (clk, q, r);\n input clk;\n output [W-1:0] q;\n output r;\n reg [0:2] r;\nendmodule";
        let ifs = extract_module_interface(src).unwrap();
        let widths: Vec<_> = ifs[0].ports.iter().map(|p| p.width).collect();
        assert_eq!(widths, vec![1, 4, 3]);

        let src = "module c(a); input a; output b; endmodule";
        assert!(extract_module_interface(src).is_ok());
        let src = "module c(a, z); input a; endmodule";
        assert!(matches!(
            extract_module_interface(src),
            Err(InterfaceError::MissingDirection { .. })
        ));
    }

    #[test]
    fn ascending_range_width() {
        let ifs = extract_module_interface("module m(input [0:3] a); endmodule").unwrap();
        assert_eq!(ifs[0].ports[0].width, 4);
    }

    #[test]
    fn extraction_surfaces_syntax_report() {
        match extract_module_interface("module m(") {
            Err(InterfaceError::Syntax(r)) => assert!(!r.is_valid()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_port_rejected() {
        assert!(matches!(
            extract_module_interface("module m(input a, output a); endmodule"),
            Err(InterfaceError::DuplicatePort { .. })
        ));
    }
}
