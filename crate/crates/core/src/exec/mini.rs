//! Hermetic evaluator for single-module combinational designs.
//!
//! Supports `wire` declarations, continuous assignments and parameters.
//! Expressions follow Verilog sizing: operands of context-determined operators
//! are extended to the width of the assignment before evaluation. Values are
//! unsigned; `signed` declarations are rejected rather than approximated.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::ops::Not;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::Vec4;
use super::{ExecStatus, ExecutionResult, Executor};
use crate::syntax::ast::{BinaryOp, Expr, Item, Module, PortHeader, UnaryOp};
use crate::syntax::literal::{mask, parse_literal, MAX_WIDTH};
use crate::syntax::{
    const_eval, module_interface, module_parameters, parse_source, ModuleInterface, PortDirection, SyntaxReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MiniError {
    #[error("source does not pass the syntax check")]
    Syntax(SyntaxReport),
    #[error("elaboration: {0}")]
    Elaboration(String),
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("combinational cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("bad stimulus: {0}")]
    Stimulus(String),
}

type MResult<T> = Result<T, MiniError>;

fn unsupported<T>(what: impl Into<String>) -> MResult<T> {
    Err(MiniError::Unsupported(what.into()))
}

/// A port value in a stimulus row: an integer, or a bit string (MSB first)
/// whose length equals the port width. Bit strings may contain `x`; in
/// expected outputs `x` marks a don't-care bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BitValue {
    Int(u64),
    Bits(String),
}

impl BitValue {
    /// Value and known-bit mask at `width`.
    fn decode(&self, width: u32, port: &str) -> MResult<Vec4> {
        match self {
            BitValue::Int(v) => {
                let v = *v as u128;
                if v & !mask(width) != 0 {
                    return Err(MiniError::Interface(format!(
                        "value {v} does not fit {width}-bit port `{port}`"
                    )));
                }
                Ok(Vec4::known(width, v))
            }
            BitValue::Bits(s) => {
                let bits: Vec<char> = s.chars().filter(|c| *c != '_').collect();
                if bits.len() != width as usize {
                    return Err(MiniError::Interface(format!(
                        "`{s}` has {} bits, port `{port}` has {width}",
                        bits.len()
                    )));
                }
                let (mut val, mut x) = (0u128, 0u128);
                for c in bits {
                    val <<= 1;
                    x <<= 1;
                    match c {
                        '0' => {}
                        '1' => val |= 1,
                        'x' | 'X' | 'z' | 'Z' | '?' => x |= 1,
                        _ => return Err(MiniError::Stimulus(format!("bad bit `{c}` in `{s}`"))),
                    }
                }
                Ok(Vec4::new(width, val, x))
            }
        }
    }
}

impl From<u64> for BitValue {
    fn from(v: u64) -> Self {
        BitValue::Int(v)
    }
}

/// Rows of input assignments with the outputs each row must produce.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusTable {
    pub inputs: Vec<BTreeMap<String, BitValue>>,
    pub expected: Vec<BTreeMap<String, BitValue>>,
}

impl StimulusTable {
    pub fn parse(text: &str) -> MResult<Self> {
        let t: StimulusTable = serde_json::from_str(text).map_err(|e| MiniError::Stimulus(e.to_string()))?;
        if t.inputs.len() != t.expected.len() {
            return Err(MiniError::Stimulus(format!(
                "{} input rows but {} expected rows",
                t.inputs.len(),
                t.expected.len()
            )));
        }
        Ok(t)
    }

    /// A self-checking Verilog testbench equivalent to this table, printing
    /// `ALL TESTS PASSED` or one `MISMATCH` line per wrong output.
    pub fn to_testbench(&self, iface: &ModuleInterface) -> MResult<String> {
        let mut tb = String::from("`timescale 1ns/1ps\nmodule tb;\n");
        for p in &iface.ports {
            let kind = if p.direction == PortDirection::Input {
                "reg"
            } else {
                "wire"
            };
            tb.push_str(&format!("  {kind} [{}:0] {};\n", p.width - 1, p.name));
        }
        tb.push_str("  integer mismatches;\n");
        let conns: Vec<String> = iface.ports.iter().map(|p| format!(".{0}({0})", p.name)).collect();
        tb.push_str(&format!("  {} dut({});\n", iface.name, conns.join(", ")));
        tb.push_str("  initial begin\n    mismatches = 0;\n");
        for (row, (ins, outs)) in self.inputs.iter().zip(&self.expected).enumerate() {
            for (name, v) in ins {
                let port = iface
                    .port(name)
                    .ok_or_else(|| MiniError::Interface(format!("no port `{name}`")))?;
                tb.push_str(&format!("    {name} = {};\n", v.decode(port.width, name)?));
            }
            tb.push_str("    #1;\n");
            for (name, v) in outs {
                let port = iface
                    .port(name)
                    .ok_or_else(|| MiniError::Interface(format!("no port `{name}`")))?;
                let want = v.decode(port.width, name)?;
                let care = Vec4::known(port.width, !want.x);
                tb.push_str(&format!(
                    "    if (({name} & {care}) !== {}) begin mismatches = mismatches + 1; \
                     $display(\"MISMATCH row {row} {name}=%b\", {name}); end\n",
                    Vec4::known(port.width, want.val)
                ));
            }
        }
        tb.push_str("    if (mismatches == 0) $display(\"ALL TESTS PASSED\");\n    $finish;\n  end\nendmodule\n");
        Ok(tb)
    }
}

#[derive(Debug, Clone)]
struct Net {
    name: String,
    width: u32,
    msb: i64,
    lsb: i64,
    direction: Option<PortDirection>,
}

impl Net {
    /// Bit position of declared index `i`, if in range.
    fn position(&self, i: i64) -> Option<u32> {
        let p = if self.msb >= self.lsb {
            i - self.lsb
        } else {
            self.lsb - i
        };
        (0..self.width as i64).contains(&p).then_some(p as u32)
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    net: usize,
    lo: u32,
    width: u32,
}

#[derive(Debug, Clone)]
struct Assign {
    /// Most significant first, as written in a concatenation.
    targets: Vec<Target>,
    rhs: Expr,
    width: u32,
}

/// An elaborated combinational module, assignments in evaluation order.
#[derive(Debug, Clone)]
pub struct Design {
    interface: ModuleInterface,
    nets: Vec<Net>,
    index: HashMap<String, usize>,
    params: HashMap<String, i64>,
    assigns: Vec<Assign>,
}

impl Design {
    pub fn elaborate(source: &str) -> MResult<Design> {
        let (file, report) = parse_source(source);
        if !report.is_valid() {
            return Err(MiniError::Syntax(report));
        }
        match file.modules.as_slice() {
            [m] => Design::from_module(m),
            ms => unsupported(format!("{} modules in one design", ms.len())),
        }
    }

    pub fn interface(&self) -> &ModuleInterface {
        &self.interface
    }

    fn from_module(m: &Module) -> MResult<Design> {
        let interface = module_interface(m).map_err(|e| MiniError::Elaboration(e.to_string()))?;
        let mut d = Design {
            interface,
            nets: Vec::new(),
            index: HashMap::new(),
            params: module_parameters(m),
            assigns: Vec::new(),
        };
        if let PortHeader::Ansi(decls) = &m.header {
            for p in decls {
                d.check_port_decl(p.signed, p.net_type.as_deref())?;
                d.declare_range(&p.names, p.range.as_ref(), Some(p.direction.into()))?;
            }
        }
        let mut pending: Vec<(&Expr, &Expr)> = Vec::new();
        let mut inits: Vec<(Expr, &Expr)> = Vec::new();
        for item in &m.items {
            match item {
                Item::Port(p) => {
                    d.check_port_decl(p.signed, p.net_type.as_deref())?;
                    d.declare_range(&p.names, p.range.as_ref(), Some(p.direction.into()))?;
                }
                Item::Net {
                    net_type,
                    signed,
                    range,
                    decls,
                } => {
                    if !matches!(net_type.as_str(), "wire" | "tri") {
                        return unsupported(format!("`{net_type}` net"));
                    }
                    if *signed {
                        return unsupported("signed net");
                    }
                    for decl in decls {
                        if !decl.dims.is_empty() {
                            return unsupported(format!("array `{}`", decl.name));
                        }
                        d.declare_range(std::slice::from_ref(&decl.name), range.as_ref(), None)?;
                        if let Some(init) = &decl.init {
                            inits.push((Expr::Ident(decl.name.clone()), init));
                        }
                    }
                }
                Item::Params(_) => {}
                Item::Assign { assignments, .. } => {
                    pending.extend(assignments.iter().map(|(l, r)| (l, r)));
                }
                Item::Reg { .. } => return unsupported("reg declaration"),
                Item::Variable { kind, .. } => return unsupported(format!("`{kind}` variable")),
                Item::Always(_) => return unsupported("always block"),
                Item::Initial(_) => return unsupported("initial block"),
                Item::Instantiation { module, .. } => return unsupported(format!("instance of `{module}`")),
                Item::Gate { kind, .. } => return unsupported(format!("`{kind}` gate")),
                Item::Defparam(_) => return unsupported("defparam"),
                Item::Opaque { keyword, .. } => return unsupported(format!("`{keyword}` region")),
            }
        }
        for p in &d.interface.ports {
            if p.direction == PortDirection::Inout {
                return unsupported(format!("inout port `{}`", p.name));
            }
        }
        let mut assigns = Vec::new();
        for (lhs, rhs) in inits.iter().map(|(l, r)| (l, *r)).chain(pending) {
            assigns.push(d.assignment(lhs, rhs)?);
        }
        d.assigns = d.order(assigns)?;
        Ok(d)
    }

    fn check_port_decl(&self, signed: bool, net_type: Option<&str>) -> MResult<()> {
        if signed {
            return unsupported("signed port");
        }
        match net_type {
            None | Some("wire") | Some("tri") => Ok(()),
            Some(other) => unsupported(format!("`{other}` port")),
        }
    }

    fn declare_range(
        &mut self,
        names: &[String],
        range: Option<&crate::syntax::ast::Range>,
        direction: Option<PortDirection>,
    ) -> MResult<()> {
        let (msb, lsb) = match range {
            None => (0, 0),
            Some(r) => (
                const_eval(&r.msb, &self.params).ok_or_else(|| MiniError::Elaboration("non-constant range".into()))?,
                const_eval(&r.lsb, &self.params).ok_or_else(|| MiniError::Elaboration("non-constant range".into()))?,
            ),
        };
        let width = msb.abs_diff(lsb) + 1;
        if width > MAX_WIDTH as u64 {
            return unsupported(format!("{width}-bit net"));
        }
        for name in names {
            match self.index.get(name) {
                // A body `wire` line may restate a port; the port keeps its direction.
                Some(&i) => {
                    let net = &mut self.nets[i];
                    if range.is_some() {
                        net.width = width as u32;
                        net.msb = msb;
                        net.lsb = lsb;
                    }
                    net.direction = net.direction.or(direction);
                }
                None => {
                    self.index.insert(name.clone(), self.nets.len());
                    self.nets.push(Net {
                        name: name.clone(),
                        width: width as u32,
                        msb,
                        lsb,
                        direction,
                    });
                }
            }
        }
        Ok(())
    }

    fn net(&self, name: &str) -> MResult<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| MiniError::Elaboration(format!("undeclared identifier `{name}`")))
    }

    fn constant(&self, e: &Expr) -> MResult<i64> {
        const_eval(e, &self.params)
            .ok_or_else(|| MiniError::Unsupported("non-constant select in assignment target".into()))
    }

    fn assignment(&mut self, lhs: &Expr, rhs: &Expr) -> MResult<Assign> {
        let mut targets = Vec::new();
        self.targets(lhs, &mut targets)?;
        for t in &targets {
            if self.nets[t.net].direction == Some(PortDirection::Input) {
                return Err(MiniError::Elaboration(format!(
                    "assignment to input `{}`",
                    self.nets[t.net].name
                )));
            }
        }
        let lhs_width: u32 = targets.iter().map(|t| t.width).sum();
        if lhs_width > MAX_WIDTH {
            return unsupported("assignment target wider than 128 bits");
        }
        let width = lhs_width.max(self.width(rhs)?);
        Ok(Assign {
            targets,
            rhs: rhs.clone(),
            width,
        })
    }

    fn targets(&mut self, lhs: &Expr, out: &mut Vec<Target>) -> MResult<()> {
        match lhs {
            Expr::Ident(name) => {
                if !self.index.contains_key(name) {
                    // Implicit one-bit net.
                    self.declare_range(std::slice::from_ref(name), None, None)?;
                }
                let net = self.net(name)?;
                out.push(Target {
                    net,
                    lo: 0,
                    width: self.nets[net].width,
                });
            }
            Expr::Index { base, index } => {
                let net = self.base_net(base)?;
                let i = self.constant(index)?;
                let lo = self.nets[net]
                    .position(i)
                    .ok_or_else(|| MiniError::Elaboration(format!("index {i} out of range")))?;
                out.push(Target { net, lo, width: 1 });
            }
            Expr::Slice { base, msb, lsb } => {
                let net = self.base_net(base)?;
                let (a, b) = (self.constant(msb)?, self.constant(lsb)?);
                out.push(self.span(net, a, b)?);
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                ascending,
            } => {
                let net = self.base_net(base)?;
                let (s, w) = (self.constant(start)?, self.constant(width)?);
                if w < 1 {
                    return Err(MiniError::Elaboration("empty part select".into()));
                }
                let end = if *ascending { s + w - 1 } else { s - w + 1 };
                out.push(self.span(net, s, end)?);
            }
            Expr::Concat(items) => {
                for item in items {
                    self.targets(item, out)?;
                }
            }
            other => return unsupported(format!("assignment target {other:?}")),
        }
        Ok(())
    }

    fn base_net(&self, base: &Expr) -> MResult<usize> {
        match base {
            Expr::Ident(name) => self.net(name),
            _ => unsupported("select of a non-net expression"),
        }
    }

    fn span(&self, net: usize, a: i64, b: i64) -> MResult<Target> {
        let n = &self.nets[net];
        match (n.position(a), n.position(b)) {
            (Some(pa), Some(pb)) => Ok(Target {
                net,
                lo: pa.min(pb),
                width: pa.abs_diff(pb) + 1,
            }),
            _ => Err(MiniError::Elaboration(format!(
                "part select [{a}:{b}] of `{}` out of range",
                n.name
            ))),
        }
    }

    /// Bits each assignment reads, per net, for dependency ordering.
    fn reads(&self, e: &Expr, out: &mut Vec<(usize, u128)>) {
        let full = |net: usize| (net, mask(self.nets[net].width));
        match e {
            Expr::Ident(name) => {
                if let Some(&net) = self.index.get(name) {
                    out.push(full(net));
                }
            }
            Expr::Index { base, index } => match (base.as_ref(), const_eval(index, &self.params)) {
                (Expr::Ident(name), Some(i)) if self.index.contains_key(name) => {
                    let net = self.index[name];
                    if let Some(p) = self.nets[net].position(i) {
                        out.push((net, 1u128 << p));
                    }
                }
                _ => {
                    self.reads(base, out);
                    self.reads(index, out);
                }
            },
            Expr::Slice { base, msb, lsb } => {
                let span = match (base.as_ref(), self.constant(msb), self.constant(lsb)) {
                    (Expr::Ident(name), Ok(a), Ok(b)) => {
                        self.index.get(name).and_then(|&net| self.span(net, a, b).ok())
                    }
                    _ => None,
                };
                match span {
                    Some(t) => out.push((t.net, mask(t.width) << t.lo)),
                    None => self.reads(base, out),
                }
            }
            Expr::IndexedSlice { base, start, width, .. } => {
                self.reads(base, out);
                self.reads(start, out);
                self.reads(width, out);
            }
            Expr::Unary { operand, .. } => self.reads(operand, out),
            Expr::Binary { lhs, rhs, .. } => {
                self.reads(lhs, out);
                self.reads(rhs, out);
            }
            Expr::Ternary { cond, then, otherwise } => {
                self.reads(cond, out);
                self.reads(then, out);
                self.reads(otherwise, out);
            }
            Expr::Concat(items) => items.iter().for_each(|i| self.reads(i, out)),
            Expr::Replicate { items, .. } => items.iter().for_each(|i| self.reads(i, out)),
            Expr::Number(_) | Expr::Str(_) | Expr::Macro(_) | Expr::Hier(_) | Expr::Call { .. } => {}
        }
    }

    /// Topological order over bit-level read/write dependencies.
    fn order(&self, assigns: Vec<Assign>) -> MResult<Vec<Assign>> {
        let writes: Vec<Vec<(usize, u128)>> = assigns
            .iter()
            .map(|a| a.targets.iter().map(|t| (t.net, mask(t.width) << t.lo)).collect())
            .collect();
        for (i, wi) in writes.iter().enumerate() {
            for wj in &writes[i + 1..] {
                for &(n1, m1) in wi {
                    if wj.iter().any(|&(n2, m2)| n1 == n2 && m1 & m2 != 0) {
                        return unsupported(format!("multiple drivers of `{}`", self.nets[n1].name));
                    }
                }
            }
        }
        let n = assigns.len();
        let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (a, assign) in assigns.iter().enumerate() {
            let mut reads = Vec::new();
            self.reads(&assign.rhs, &mut reads);
            for (b, wb) in writes.iter().enumerate() {
                if reads
                    .iter()
                    .any(|&(rn, rm)| wb.iter().any(|&(wn, wm)| rn == wn && rm & wm != 0))
                {
                    preds[a].insert(b);
                }
            }
        }
        let mut done = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let ready = (0..n).find(|&i| !done[i] && preds[i].iter().all(|&p| done[p]));
            match ready {
                Some(i) => {
                    done[i] = true;
                    order.push(i);
                }
                None => return Err(MiniError::Cycle(self.cycle(&preds, &done, &writes))),
            }
        }
        let mut slots: Vec<Option<Assign>> = assigns.into_iter().map(Some).collect();
        Ok(order
            .into_iter()
            .map(|i| slots[i].take().expect("each index once"))
            .collect())
    }

    fn cycle(&self, preds: &[BTreeSet<usize>], done: &[bool], writes: &[Vec<(usize, u128)>]) -> Vec<String> {
        // Every pending node has a pending predecessor, so walking back must revisit a node.
        let mut path = vec![(0..preds.len()).find(|&i| !done[i]).expect("pending node")];
        loop {
            let cur = *path.last().expect("nonempty");
            let next = *preds[cur].iter().find(|&&p| !done[p]).expect("pending predecessor");
            if let Some(pos) = path.iter().position(|&p| p == next) {
                let mut names: Vec<String> = path[pos..]
                    .iter()
                    .rev()
                    .map(|&i| self.nets[writes[i][0].0].name.clone())
                    .collect();
                names.push(names[0].clone());
                return names;
            }
            path.push(next);
        }
    }

    // ---- expression sizing and evaluation ------------------------------

    fn width(&self, e: &Expr) -> MResult<u32> {
        let w = match e {
            Expr::Number(text) => {
                let lit = parse_literal(text).map_err(MiniError::Unsupported)?;
                lit.width.unwrap_or(32)
            }
            Expr::Ident(name) => match self.index.get(name) {
                Some(&net) => self.nets[net].width,
                None if self.params.contains_key(name) => param_width(self.params[name]),
                None => return Err(MiniError::Elaboration(format!("undeclared identifier `{name}`"))),
            },
            Expr::Index { base, index } => {
                self.base_net(base)?;
                self.width(index)?;
                1
            }
            Expr::Slice { base, msb, lsb } => {
                let net = self.base_net(base)?;
                let (a, b) = (self.constant(msb)?, self.constant(lsb)?);
                self.span(net, a, b)?.width
            }
            Expr::IndexedSlice { base, start, width, .. } => {
                self.base_net(base)?;
                self.width(start)?;
                let w = self.constant(width)?;
                if !(1..=MAX_WIDTH as i64).contains(&w) {
                    return unsupported(format!("{w}-bit part select"));
                }
                w as u32
            }
            Expr::Unary { op, operand } => {
                let w = self.width(operand)?;
                match op {
                    UnaryOp::Plus | UnaryOp::Minus | UnaryOp::BitNot => w,
                    _ => 1,
                }
            }
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (self.width(lhs)?, self.width(rhs)?);
                use BinaryOp::*;
                match op {
                    Add | Sub | Mul | Div | Mod | BitAnd | BitOr | BitXor | BitXnor => a.max(b),
                    Pow | Shl | Shr | AShl | AShr => a,
                    _ => 1,
                }
            }
            Expr::Ternary { cond, then, otherwise } => {
                self.width(cond)?;
                self.width(then)?.max(self.width(otherwise)?)
            }
            Expr::Concat(items) => items.iter().map(|i| self.width(i)).sum::<MResult<u32>>()?,
            Expr::Replicate { count, items } => {
                let n = self.constant(count)?;
                let inner = items.iter().map(|i| self.width(i)).sum::<MResult<u32>>()?;
                if n < 1 || n * inner as i64 > MAX_WIDTH as i64 {
                    return unsupported(format!("replication {{{n}{{...}}}}"));
                }
                n as u32 * inner
            }
            Expr::Call { name, .. } => return unsupported(format!("call to `{name}`")),
            Expr::Str(_) => return unsupported("string literal"),
            Expr::Macro(m) => return unsupported(format!("macro {m}")),
            Expr::Hier(path) => return unsupported(format!("hierarchical name `{}`", path.join("."))),
        };
        if w > MAX_WIDTH {
            return unsupported(format!("{w}-bit expression"));
        }
        Ok(w)
    }

    fn eval_self(&self, e: &Expr, env: &[Vec4]) -> MResult<Vec4> {
        self.eval(e, self.width(e)?, env)
    }

    /// Evaluates `e` in a context of `w` bits (`w` is at least its own width).
    fn eval(&self, e: &Expr, w: u32, env: &[Vec4]) -> MResult<Vec4> {
        let v = match e {
            Expr::Number(text) => {
                let lit = parse_literal(text).map_err(MiniError::Unsupported)?;
                Vec4::new(lit.width.unwrap_or(32), lit.value, lit.xmask).resize(w)
            }
            Expr::Ident(name) => match self.index.get(name) {
                Some(&net) => env[net].resize(w),
                None => {
                    let p = self.params[name];
                    Vec4::known(param_width(p), p as u128).resize(w)
                }
            },
            Expr::Index { base, index } => {
                let net = self.base_net(base)?;
                let i = self.eval_self(index, env)?;
                let bit = match i.is_known().then(|| self.nets[net].position(i.val as i64)).flatten() {
                    Some(p) if i.val <= i64::MAX as u128 => env[net].extract(p, 1),
                    _ => Vec4::unknown(1),
                };
                bit.resize(w)
            }
            Expr::Slice { base, msb, lsb } => {
                let net = self.base_net(base)?;
                let t = self.span(net, self.constant(msb)?, self.constant(lsb)?)?;
                env[net].extract(t.lo, t.width).resize(w)
            }
            Expr::IndexedSlice {
                base,
                start,
                width,
                ascending,
            } => {
                let net = self.base_net(base)?;
                let pw = self.constant(width)? as u32;
                let s = self.eval_self(start, env)?;
                let n = &self.nets[net];
                let picked = if !s.is_known() || s.val > i64::MAX as u128 {
                    Vec4::unknown(pw)
                } else {
                    let s = s.val as i64;
                    let end = if *ascending {
                        s + pw as i64 - 1
                    } else {
                        s - pw as i64 + 1
                    };
                    // Read bit by bit so partially out-of-range selects yield x there.
                    let (lo, hi) = (s.min(end), s.max(end));
                    (lo..=hi).rev().fold(Vec4::known(0, 0), |acc, i| {
                        let bit = n.position(i).map_or(Vec4::unknown(1), |p| env[net].extract(p, 1));
                        acc.concat(bit)
                    })
                };
                picked.resize(w)
            }
            Expr::Unary { op, operand } => match op {
                UnaryOp::Plus => self.eval(operand, w, env)?,
                UnaryOp::Minus => {
                    let a = self.eval(operand, w, env)?;
                    a.arith(a, |x, _| Some(x.wrapping_neg()))
                }
                UnaryOp::BitNot => self.eval(operand, w, env)?.not(),
                UnaryOp::LogicalNot => Vec4::bit(self.eval_self(operand, env)?.truth().map(|t| !t)).resize(w),
                UnaryOp::RedAnd => self.eval_self(operand, env)?.reduce_and().resize(w),
                UnaryOp::RedNand => self.eval_self(operand, env)?.reduce_and().not().resize(w),
                UnaryOp::RedOr => self.eval_self(operand, env)?.reduce_or().resize(w),
                UnaryOp::RedNor => self.eval_self(operand, env)?.reduce_or().not().resize(w),
                UnaryOp::RedXor => self.eval_self(operand, env)?.reduce_xor().resize(w),
                UnaryOp::RedXnor => self.eval_self(operand, env)?.reduce_xor().not().resize(w),
            },
            Expr::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, w, env)?,
            Expr::Ternary { cond, then, otherwise } => match self.eval_self(cond, env)?.truth() {
                Some(true) => self.eval(then, w, env)?,
                Some(false) => self.eval(otherwise, w, env)?,
                None => {
                    let (t, f) = (self.eval(then, w, env)?, self.eval(otherwise, w, env)?);
                    Vec4::new(w, t.val, t.x | f.x | (t.val ^ f.val))
                }
            },
            Expr::Concat(items) => {
                let mut acc = Vec4::known(0, 0);
                for item in items {
                    acc = acc.concat(self.eval_self(item, env)?);
                }
                acc.resize(w)
            }
            Expr::Replicate { count, items } => {
                let mut unit = Vec4::known(0, 0);
                for item in items {
                    unit = unit.concat(self.eval_self(item, env)?);
                }
                let mut acc = Vec4::known(0, 0);
                for _ in 0..self.constant(count)? {
                    acc = acc.concat(unit);
                }
                acc.resize(w)
            }
            other => return unsupported(format!("{other:?}")),
        };
        Ok(v)
    }

    fn binary(&self, op: BinaryOp, lhs: &Expr, rhs: &Expr, w: u32, env: &[Vec4]) -> MResult<Vec4> {
        use BinaryOp::*;
        let m = mask(w);
        Ok(match op {
            Add | Sub | Mul | Div | Mod | BitAnd | BitOr | BitXor | BitXnor => {
                let (a, b) = (self.eval(lhs, w, env)?, self.eval(rhs, w, env)?);
                match op {
                    Add => a.arith(b, |x, y| Some(x.wrapping_add(y) & m)),
                    Sub => a.arith(b, |x, y| Some(x.wrapping_sub(y) & m)),
                    Mul => a.arith(b, |x, y| Some(x.wrapping_mul(y) & m)),
                    Div => a.arith(b, |x, y| x.checked_div(y)),
                    Mod => a.arith(b, |x, y| x.checked_rem(y)),
                    BitAnd => a.and(b),
                    BitOr => a.or(b),
                    BitXor => a.xor(b),
                    _ => a.xor(b).not(),
                }
            }
            Pow => {
                let (a, b) = (self.eval(lhs, w, env)?, self.eval_self(rhs, env)?);
                if !a.is_known() || !b.is_known() {
                    Vec4::unknown(w)
                } else {
                    Vec4::known(w, pow_mod(a.val, b.val, m))
                }
            }
            Shl | Shr | AShl | AShr => {
                let (a, s) = (self.eval(lhs, w, env)?, self.eval_self(rhs, env)?);
                if !s.is_known() {
                    Vec4::unknown(w)
                } else if s.val >= w as u128 {
                    Vec4::known(w, 0)
                } else {
                    let s = s.val as u32;
                    match op {
                        Shl | AShl => Vec4::new(w, a.val << s, a.x << s),
                        _ => Vec4::new(w, a.val >> s, a.x >> s),
                    }
                }
            }
            LogicalAnd | LogicalOr => {
                let a = self.eval_self(lhs, env)?.truth();
                let b = self.eval_self(rhs, env)?.truth();
                let r = if op == LogicalAnd {
                    match (a, b) {
                        (Some(false), _) | (_, Some(false)) => Some(false),
                        (Some(true), Some(true)) => Some(true),
                        _ => None,
                    }
                } else {
                    match (a, b) {
                        (Some(true), _) | (_, Some(true)) => Some(true),
                        (Some(false), Some(false)) => Some(false),
                        _ => None,
                    }
                };
                Vec4::bit(r).resize(w)
            }
            Eq | Ne | CaseEq | CaseNe | Lt | Le | Gt | Ge => {
                let cw = self.width(lhs)?.max(self.width(rhs)?);
                let (a, b) = (self.eval(lhs, cw, env)?, self.eval(rhs, cw, env)?);
                let known = !(a.x | b.x) & mask(cw);
                let r = match op {
                    CaseEq => Some(a == b),
                    CaseNe => Some(a != b),
                    Eq | Ne => {
                        let eq = if (a.val ^ b.val) & known != 0 {
                            Some(false)
                        } else if known != mask(cw) {
                            None
                        } else {
                            Some(true)
                        };
                        if op == Eq {
                            eq
                        } else {
                            eq.map(|e| !e)
                        }
                    }
                    _ if !a.is_known() || !b.is_known() => None,
                    Lt => Some(a.val < b.val),
                    Le => Some(a.val <= b.val),
                    Gt => Some(a.val > b.val),
                    _ => Some(a.val >= b.val),
                };
                Vec4::bit(r).resize(w)
            }
        })
    }

    /// Output port values for one row of inputs; unbound inputs read as x.
    pub fn eval_row(&self, inputs: &BTreeMap<String, Vec4>) -> MResult<BTreeMap<String, Vec4>> {
        let mut env: Vec<Vec4> = self.nets.iter().map(|n| Vec4::unknown(n.width)).collect();
        for (name, v) in inputs {
            let net = self.net(name)?;
            env[net] = v.resize(self.nets[net].width);
        }
        for a in &self.assigns {
            let mut v = self.eval(&a.rhs, a.width, &env)?;
            let lhs_width: u32 = a.targets.iter().map(|t| t.width).sum();
            v = v.resize(lhs_width);
            let mut shift = lhs_width;
            for t in &a.targets {
                shift -= t.width;
                let part = v.extract(shift, t.width);
                env[t.net] = env[t.net].insert(t.lo, part);
            }
        }
        Ok(self
            .interface
            .ports
            .iter()
            .filter(|p| p.direction == PortDirection::Output)
            .map(|p| (p.name.clone(), env[self.index[&p.name]]))
            .collect())
    }

    /// Decodes a stimulus row against this design's input ports.
    pub fn bind_row(&self, row: &BTreeMap<String, BitValue>) -> MResult<BTreeMap<String, Vec4>> {
        let mut out = BTreeMap::new();
        for (name, v) in row {
            let port = self
                .interface
                .port(name)
                .ok_or_else(|| MiniError::Interface(format!("no port `{name}`")))?;
            if port.direction != PortDirection::Input {
                return Err(MiniError::Stimulus(format!("`{name}` is not an input")));
            }
            out.insert(name.clone(), v.decode(port.width, name)?);
        }
        for p in &self.interface.ports {
            if p.direction == PortDirection::Input && !row.contains_key(&p.name) {
                return Err(MiniError::Interface(format!(
                    "input `{}` not driven by the stimulus",
                    p.name
                )));
            }
        }
        Ok(out)
    }

    /// First mismatching output of a row, if any.
    pub fn check_row(
        &self,
        outputs: &BTreeMap<String, Vec4>,
        expected: &BTreeMap<String, BitValue>,
    ) -> MResult<Option<String>> {
        for (name, want) in expected {
            let got = outputs
                .get(name)
                .ok_or_else(|| MiniError::Interface(format!("no output port `{name}`")))?;
            let want = want.decode(got.width, name)?;
            let care = mask(got.width) & !want.x;
            if got.x & care != 0 || (got.val ^ want.val) & care != 0 {
                return Ok(Some(format!(
                    "{name}: expected {} got {}",
                    want.to_bits(),
                    got.to_bits()
                )));
            }
        }
        Ok(None)
    }
}

fn param_width(v: i64) -> u32 {
    if (0..=u32::MAX as i64).contains(&v) {
        32
    } else {
        64
    }
}

fn pow_mod(mut base: u128, mut exp: u128, m: u128) -> u128 {
    let mut acc: u128 = 1;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc.wrapping_mul(base);
        }
        base = base.wrapping_mul(base);
        exp >>= 1;
    }
    acc & m
}

/// Output values for every stimulus row.
pub fn evaluate_combinational(source: &str, stimuli: &StimulusTable) -> MResult<Vec<BTreeMap<String, Vec4>>> {
    let design = Design::elaborate(source)?;
    stimuli
        .inputs
        .iter()
        .map(|row| design.eval_row(&design.bind_row(row)?))
        .collect()
}

/// In-process backend; the testbench is a [`StimulusTable`] as JSON.
///
/// Outcome mapping: syntax, elaboration and interface problems are
/// `compile_error`; constructs outside the subset and malformed stimuli are
/// `infra_error`, since they say nothing about the candidate; a combinational
/// cycle or a wrong output row is `fail`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MiniBackend;

impl MiniBackend {
    fn run(&self, source: &str, testbench: &str) -> (ExecStatus, String) {
        let table = match StimulusTable::parse(testbench) {
            Ok(t) => t,
            Err(e) => return (ExecStatus::InfraError, e.to_string()),
        };
        let design = match Design::elaborate(source) {
            Ok(d) => d,
            Err(e) => return (status_of(&e), e.to_string()),
        };
        for (i, (ins, want)) in table.inputs.iter().zip(&table.expected).enumerate() {
            let checked = design
                .bind_row(ins)
                .and_then(|bound| design.eval_row(&bound))
                .and_then(|outs| design.check_row(&outs, want));
            match checked {
                Ok(None) => {}
                Ok(Some(diff)) => return (ExecStatus::Fail, format!("row {i}: {diff}")),
                Err(e) => return (status_of(&e), format!("row {i}: {e}")),
            }
        }
        (ExecStatus::Pass, format!("{} rows matched", table.inputs.len()))
    }
}

fn status_of(e: &MiniError) -> ExecStatus {
    match e {
        MiniError::Syntax(_) | MiniError::Elaboration(_) | MiniError::Interface(_) => ExecStatus::CompileError,
        MiniError::Cycle(_) => ExecStatus::Fail,
        MiniError::Unsupported(_) | MiniError::Stimulus(_) => ExecStatus::InfraError,
    }
}

impl Executor for MiniBackend {
    fn backend_id(&self) -> &str {
        "mini"
    }

    fn execute(&self, source: &str, testbench: &str) -> ExecutionResult {
        let start = Instant::now();
        let (status, output) = self.run(source, testbench);
        ExecutionResult::new(status, &output, start.elapsed().as_secs_f64())
    }
}
