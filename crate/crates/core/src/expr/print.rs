use std::fmt;

use super::{Expr, Node};

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        Node::Neg(_) => UNARY,
        Node::Const(c) if *c < 0.0 => UNARY,
        Node::Pow(..) => 4,
        Node::Const(_) | Node::Var(_) | Node::Fun(..) => ATOM,
    }
}

fn write_prec(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        f.write_str("(")?;
        write_prec(f, e, 0)?;
        return f.write_str(")");
    }
    match e.node() {
        Node::Const(c) if *c < 0.0 => write!(f, "-{}", -c),
        Node::Const(c) => write!(f, "{c}"),
        Node::Var(v) => f.write_str(v),
        Node::Neg(a) => {
            f.write_str("-")?;
            write_prec(f, a, UNARY)
        }
        Node::Add(a, b) | Node::Sub(a, b) => {
            let op = if matches!(e.node(), Node::Add(..)) { " + " } else { " - " };
            write_prec(f, a, SUM)?;
            f.write_str(op)?;
            write_prec(f, b, PRODUCT)
        }
        Node::Mul(a, b) | Node::Div(a, b) => {
            let op = if matches!(e.node(), Node::Mul(..)) { "*" } else { "/" };
            write_prec(f, a, PRODUCT)?;
            f.write_str(op)?;
            write_prec(f, b, UNARY)
        }
        Node::Pow(a, n) => {
            write_prec(f, a, ATOM)?;
            write!(f, "^{n}")
        }
        Node::Fun(func, a) => {
            write!(f, "{}(", func.name())?;
            write_prec(f, a, 0)?;
            f.write_str(")")
        }
    }
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    write_prec(f, e, 0)
}

#[cfg(test)]
mod tests {
    use crate::expr::parse;

    fn round(src: &str) -> String {
        parse(src).unwrap().to_string()
    }

    #[test]
    fn minimal_parentheses() {
        assert_eq!(round("x1 + 2*y1"), "x1 + 2*y1");
        assert_eq!(round("(a + b)*c"), "(a + b)*c");
        assert_eq!(round("a - (b - c)"), "a - (b - c)");
        assert_eq!(round("a/(b*c)"), "a/(b*c)");
        assert_eq!(round("-(a*b)"), "-(a*b)");
        assert_eq!(round("(x^2)^3"), "(x^2)^3");
        assert_eq!(round("(-2)^3"), "(-2)^3");
        assert_eq!(round("sin(x + 1)^2"), "sin(x + 1)^2");
    }

    #[test]
    fn reparses_structurally() {
        for src in ["a*-2", "-a*b", "x - -3", "exp(-x)/(1 + y^2)", "0.1 + 1e-7"] {
            let e = parse(src).unwrap();
            assert_eq!(parse(&e.to_string()).unwrap(), e, "{src}");
        }
    }
}
