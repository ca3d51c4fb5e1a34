use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{Expr, Func, Node};

/// Symbolic partial derivative with respect to `var`.
///
/// The result is assembled through the simplifying constructors, so the
/// derivative of an expression not containing `var` is the constant `0`.
pub fn differentiate(e: &Expr, var: &str) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(v) => {
            if &**v == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Neg(a) => -differentiate(a, var),
        Node::Add(a, b) => differentiate(a, var) + differentiate(b, var),
        Node::Sub(a, b) => differentiate(a, var) - differentiate(b, var),
        Node::Mul(a, b) => differentiate(a, var) * b.clone() + a.clone() * differentiate(b, var),
        Node::Div(a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            if db.is_zero() {
                da / b.clone()
            } else {
                (da * b.clone() - a.clone() * db) / b.powi(2)
            }
        }
        Node::Pow(a, n) => Expr::constant(*n as f64) * a.powi(n - 1) * differentiate(a, var),
        Node::Fun(f, a) => {
            let inner = differentiate(a, var);
            let outer = match f {
                Func::Sin => a.cos(),
                Func::Cos => -a.sin(),
                Func::Exp => a.exp(),
                Func::Log => return inner / a.clone(),
                Func::Sqrt => return inner / (Expr::constant(2.0) * a.sqrt()),
            };
            outer * inner
        }
    }
}

/// Thread-safe memo of derivatives keyed by `(expression, variable)`.
///
/// Curvature and compatibility computations differentiate the same
/// Christoffel entries many times; one cache per computation avoids the
/// repeated tree walks.
#[derive(Default)]
pub struct Differentiator {
    cache: Mutex<HashMap<(Expr, Arc<str>), Expr>>,
}

impl Differentiator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn derivative(&self, e: &Expr, var: &str) -> Expr {
        if e.as_const().is_some() {
            return Expr::zero();
        }
        let key = (e.clone(), Arc::from(var));
        if let Some(hit) = self.cache.lock().expect("derivative cache poisoned").get(&key) {
            return hit.clone();
        }
        let d = differentiate(e, var);
        self.cache
            .lock()
            .expect("derivative cache poisoned")
            .insert(key, d.clone());
        d
    }

    pub fn len(&self) -> usize {
        self.cache.lock().expect("derivative cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
