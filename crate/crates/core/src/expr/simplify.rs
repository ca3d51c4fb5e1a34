use super::{Expr, Func, Node};

fn finite(value: f64) -> Option<Expr> {
    value.is_finite().then(|| Expr::constant(value))
}

pub(super) fn mk_neg(a: Expr) -> Expr {
    match a.node() {
        Node::Const(c) => Expr::constant(-c),
        Node::Neg(inner) => inner.clone(),
        _ => Expr::from_node(Node::Neg(a)),
    }
}

pub(super) fn mk_add(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(c) = finite(x + y) {
            return c;
        }
    }
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a;
    }
    Expr::from_node(Node::Add(a, b))
}

pub(super) fn mk_sub(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(c) = finite(x - y) {
            return c;
        }
    }
    if b.is_zero() {
        return a;
    }
    if a.is_zero() {
        return mk_neg(b);
    }
    if a == b && total(&a) {
        return Expr::zero();
    }
    Expr::from_node(Node::Sub(a, b))
}

// defined everywhere, so `a - a` may safely become 0
fn total(e: &Expr) -> bool {
    match e.node() {
        Node::Const(_) | Node::Var(_) => true,
        Node::Neg(a) | Node::Pow(a, _) => total(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) => total(a) && total(b),
        Node::Div(..) => false,
        Node::Fun(f, a) => matches!(f, Func::Sin | Func::Cos) && total(a),
    }
}

pub(super) fn mk_mul(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if let Some(c) = finite(x * y) {
            return c;
        }
    }
    if a.is_zero() || b.is_zero() {
        return Expr::zero();
    }
    if a.is_one() {
        return b;
    }
    if b.is_one() {
        return a;
    }
    Expr::from_node(Node::Mul(a, b))
}

pub(super) fn mk_div(a: Expr, b: Expr) -> Expr {
    if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
        if y != 0.0 {
            if let Some(c) = finite(x / y) {
                return c;
            }
        }
    }
    if a.is_zero() {
        return Expr::zero();
    }
    if b.is_one() {
        return a;
    }
    Expr::from_node(Node::Div(a, b))
}

pub(super) fn mk_pow(a: Expr, n: u32) -> Expr {
    match n {
        0 => return Expr::one(),
        1 => return a,
        _ => {}
    }
    if let Some(x) = a.as_const() {
        if let Some(c) = finite(x.powi(n as i32)) {
            return c;
        }
    }
    Expr::from_node(Node::Pow(a, n))
}

pub(super) fn mk_fun(f: Func, a: Expr) -> Expr {
    if let Some(x) = a.as_const() {
        let folded = match f {
            Func::Sin => Some(x.sin()),
            Func::Cos => Some(x.cos()),
            Func::Exp => Some(x.exp()),
            Func::Log => (x > 0.0).then(|| x.ln()),
            Func::Sqrt => (x >= 0.0).then(|| x.sqrt()),
        };
        if let Some(c) = folded.and_then(finite) {
            return c;
        }
    }
    Expr::from_node(Node::Fun(f, a))
}

/// Bottom-up constant folding and identity elimination.
///
/// Rewrites `x+0`, `0+x`, `x-0`, `0-x`, `x*1`, `x*0`, `0/x`, `x/1`, `x^1`,
/// `x^0`, `--x`, `a-a` (when `a` is defined everywhere) and folds every operation whose operands are constants
/// (function applications only inside their domain).
pub fn simplify_basic(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(c) => Expr::constant(*c),
        Node::Var(_) => e.clone(),
        Node::Neg(a) => mk_neg(simplify_basic(a)),
        Node::Add(a, b) => mk_add(simplify_basic(a), simplify_basic(b)),
        Node::Sub(a, b) => mk_sub(simplify_basic(a), simplify_basic(b)),
        Node::Mul(a, b) => mk_mul(simplify_basic(a), simplify_basic(b)),
        Node::Div(a, b) => mk_div(simplify_basic(a), simplify_basic(b)),
        Node::Pow(a, n) => mk_pow(simplify_basic(a), *n),
        Node::Fun(f, a) => mk_fun(*f, simplify_basic(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn simp(src: &str) -> Expr {
        simplify_basic(&parse(src).unwrap())
    }

    #[test]
    fn annihilator_and_neutral() {
        assert_eq!(simp("0*sin(x1)+y1"), Expr::var("y1"));
    }

    #[test]
    fn constant_fold() {
        assert_eq!(simp("2*3"), Expr::constant(6.0));
        assert_eq!(simp("(1+2)^2 - 9"), Expr::zero());
    }

    #[test]
    fn power_identities() {
        assert_eq!(simp("x1^0"), Expr::one());
        assert_eq!(simp("x1^1"), Expr::var("x1"));
    }

    #[test]
    fn division_rules() {
        assert_eq!(simp("0/x1"), Expr::zero());
        assert_eq!(simp("x1/1"), Expr::var("x1"));
        // x/0 is left alone so evaluation still reports the error
        assert!(matches!(simp("1/0").node(), Node::Div(..)));
    }

    #[test]
    fn domain_errors_not_folded() {
        assert!(matches!(simp("log(0-1)").node(), Node::Fun(Func::Log, _)));
        assert!(matches!(simp("sqrt(-4)").node(), Node::Fun(Func::Sqrt, _)));
        assert_eq!(simp("sqrt(4)"), Expr::constant(2.0));
    }

    #[test]
    fn self_cancellation() {
        assert_eq!(simp("x1*y1 - x1*y1"), Expr::zero());
        assert!(matches!(simp("1/x1 - 1/x1").node(), Node::Sub(..)));
    }

    #[test]
    fn double_negation() {
        assert_eq!(simp("--x1"), Expr::var("x1"));
        assert_eq!(simp("0-x1"), -Expr::var("x1"));
    }
}
