use std::collections::HashMap;

use super::ast::{BinaryOp, Expr, UnaryOp};
use super::literal::parse_literal;

/// Evaluates a constant integer expression over known parameter values.
///
/// Returns `None` for anything not statically known (macros, unknown bits,
/// overflow, division by zero).
pub fn const_eval(expr: &Expr, env: &HashMap<String, i64>) -> Option<i64> {
    match expr {
        Expr::Number(text) => {
            let lit = parse_literal(text).ok()?;
            if lit.xmask != 0 {
                return None;
            }
            i64::try_from(lit.value).ok()
        }
        Expr::Ident(name) => env.get(name).copied(),
        Expr::Unary { op, operand } => {
            let v = const_eval(operand, env)?;
            match op {
                UnaryOp::Plus => Some(v),
                UnaryOp::Minus => v.checked_neg(),
                UnaryOp::LogicalNot => Some((v == 0) as i64),
                UnaryOp::BitNot => Some(!v),
                _ => None,
            }
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = const_eval(lhs, env)?;
            let b = const_eval(rhs, env)?;
            use BinaryOp::*;
            match op {
                Add => a.checked_add(b),
                Sub => a.checked_sub(b),
                Mul => a.checked_mul(b),
                Div => a.checked_div(b),
                Mod => a.checked_rem(b),
                Pow => a.checked_pow(u32::try_from(b).ok()?),
                Shl | AShl => a.checked_shl(u32::try_from(b).ok().filter(|&s| s < 63)?),
                Shr | AShr => a.checked_shr(u32::try_from(b).ok().filter(|&s| s < 64)?),
                BitAnd => Some(a & b),
                BitOr => Some(a | b),
                BitXor => Some(a ^ b),
                BitXnor => Some(!(a ^ b)),
                LogicalAnd => Some((a != 0 && b != 0) as i64),
                LogicalOr => Some((a != 0 || b != 0) as i64),
                Eq | CaseEq => Some((a == b) as i64),
                Ne | CaseNe => Some((a != b) as i64),
                Lt => Some((a < b) as i64),
                Le => Some((a <= b) as i64),
                Gt => Some((a > b) as i64),
                Ge => Some((a >= b) as i64),
            }
        }
        Expr::Ternary { cond, then, otherwise } => {
            if const_eval(cond, env)? != 0 {
                const_eval(then, env)
            } else {
                const_eval(otherwise, env)
            }
        }
        Expr::Call { name, args } if name == "$clog2" && args.len() == 1 => {
            let v = const_eval(&args[0], env)?;
            if v <= 1 {
                Some(0)
            } else {
                Some(64 - (v - 1).leading_zeros() as i64)
            }
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::lexer::tokenize;
    use crate::syntax::parser::parse_expr;

    fn eval(src: &str, env: &[(&str, i64)]) -> Option<i64> {
        let env = env.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let toks = tokenize(src).unwrap();
        const_eval(&parse_expr(&toks).unwrap(), &env)
    }

    #[test]
    fn arithmetic_with_parameters() {
        assert_eq!(eval("W-1", &[("W", 8)]), Some(7));
        assert_eq!(eval("(1<<AW)-1", &[("AW", 4)]), Some(15));
        assert_eq!(eval("$clog2(DEPTH)", &[("DEPTH", 16)]), Some(4));
        assert_eq!(eval("$clog2(17)", &[]), Some(5));
        assert_eq!(eval("A > 2 ? 10 : 20", &[("A", 3)]), Some(10));
        assert_eq!(eval("8'hFF + 1", &[]), Some(256));
    }

    #[test]
    fn unknowns_yield_none() {
        assert_eq!(eval("W-1", &[]), None);
        assert_eq!(eval("`W-1", &[]), None);
        assert_eq!(eval("4'bx", &[]), None);
        assert_eq!(eval("1/0", &[]), None);
    }
}
