use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::{Expr, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} of {arg} is outside its domain")]
    Domain { func: &'static str, arg: f64 },
    #[error("non-finite intermediate value")]
    NonFinite,
}

/// Variable bindings for evaluation.
pub trait Env {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Env for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Env for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Env for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Env for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

fn check(value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(EvalError::NonFinite)
    }
}

pub(super) fn evaluate(e: &Expr, env: &dyn Env) -> Result<f64, EvalError> {
    let value = match e.node() {
        Node::Const(c) => *c,
        Node::Var(v) => env.lookup(v).ok_or_else(|| EvalError::Unbound(v.to_string()))?,
        Node::Neg(a) => -evaluate(a, env)?,
        Node::Add(a, b) => evaluate(a, env)? + evaluate(b, env)?,
        Node::Sub(a, b) => evaluate(a, env)? - evaluate(b, env)?,
        Node::Mul(a, b) => evaluate(a, env)? * evaluate(b, env)?,
        Node::Div(a, b) => {
            let num = evaluate(a, env)?;
            let den = evaluate(b, env)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            num / den
        }
        Node::Pow(a, n) => evaluate(a, env)?.powi(*n as i32),
        Node::Fun(f, a) => {
            let x = evaluate(a, env)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log if x <= 0.0 => return Err(EvalError::Domain { func: "log", arg: x }),
                Func::Log => x.ln(),
                Func::Sqrt if x < 0.0 => return Err(EvalError::Domain { func: "sqrt", arg: x }),
                Func::Sqrt => x.sqrt(),
            }
        }
    };
    check(value)
}
