//! Concrete-syntax printer. Compound operands are always parenthesized, so
//! output never depends on operator precedence. Integer literals print bare
//! wherever the parser can recover their type from a sibling operand.

use super::expr::{BinOp, Expr};
use super::types::to_signed;

pub fn pretty_print(e: &Expr) -> String {
    let mut out = String::new();
    print(e, false, &mut out);
    out
}

/// Prints `e` for a position whose type is already fixed by the
/// surrounding syntax (e.g. the right-hand side of an assignment).
pub(crate) fn pretty_print_in_context(e: &Expr) -> String {
    let mut out = String::new();
    print(e, true, &mut out);
    out
}

/// Whether the printed form of `e` (with known type context) still names its type.
fn natural(e: &Expr) -> bool {
    match e {
        Expr::Int { .. } => false,
        Expr::Bin(op, a, b) if op.is_arith() => natural(a) || natural(b),
        Expr::Ite(_, t, f) => natural(t) || natural(f),
        _ => true,
    }
}

fn is_atom(e: &Expr) -> bool {
    match e {
        Expr::Bool(_) | Expr::Int { .. } | Expr::Var(_) | Expr::Old(_) => true,
        Expr::Select(inner, _) => is_atom(inner),
        _ => false,
    }
}

fn child(e: &Expr, known: bool, out: &mut String) {
    if is_atom(e) {
        print(e, known, out);
    } else {
        out.push('(');
        print(e, known, out);
        out.push(')');
    }
}

/// Type-knowledge flags for two same-typed operands.
fn pair_flags(a: &Expr, b: &Expr, known: bool) -> (bool, bool) {
    if known || natural(a) || natural(b) {
        (true, true)
    } else {
        (false, true)
    }
}

fn print(e: &Expr, known: bool, out: &mut String) {
    match e {
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int {
            bits,
            signed,
            width,
        } => {
            if *signed {
                out.push_str(&to_signed(*bits, *width).to_string());
            } else {
                out.push_str(&bits.to_string());
            }
            if !known {
                out.push(if *signed { 'i' } else { 'u' });
                out.push_str(&width.to_string());
            }
        }
        Expr::Var(n) => out.push_str(n),
        Expr::Old(n) => {
            out.push_str("old(");
            out.push_str(n);
            out.push(')');
        }
        Expr::Select(inner, field) => {
            child(inner, true, out);
            out.push('.');
            out.push_str(field);
        }
        Expr::Not(inner) => {
            out.push('!');
            child(inner, true, out);
        }
        Expr::Bin(op, a, b) => {
            let (ka, kb) = match op {
                BinOp::And | BinOp::Or | BinOp::Implies => (true, true),
                _ if op.is_arith() => pair_flags(a, b, known),
                _ => pair_flags(a, b, false),
            };
            child(a, ka, out);
            out.push(' ');
            out.push_str(&op.symbol());
            out.push(' ');
            child(b, kb, out);
        }
        Expr::Ite(c, t, f) => {
            let (kt, kf) = pair_flags(t, f, known);
            out.push_str("if ");
            child(c, true, out);
            out.push_str(" then ");
            child(t, kt, out);
            out.push_str(" else ");
            child(f, kf, out);
        }
    }
}
