use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::sampling::Residual;

use super::Chart;

/// Dense array of expressions, `dim^order` entries, row-major in the index
/// order given to [`ExprTensor::get`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTensor {
    dim: usize,
    order: usize,
    data: Vec<Expr>,
}

impl ExprTensor {
    pub fn zeros(dim: usize, order: usize) -> Self {
        ExprTensor {
            dim,
            order,
            data: vec![Expr::zero(); dim.pow(order as u32)],
        }
    }

    pub fn from_vec(dim: usize, order: usize, data: Vec<Expr>) -> Result<Self> {
        if data.len() != dim.pow(order as u32) {
            return Err(Error::Shape(format!(
                "expected {}^{} entries, got {}",
                dim,
                order,
                data.len()
            )));
        }
        Ok(ExprTensor { dim, order, data })
    }

    pub fn from_fn(dim: usize, order: usize, mut f: impl FnMut(&[usize]) -> Expr) -> Self {
        let len = dim.pow(order as u32);
        let mut idx = vec![0; order];
        let mut data = Vec::with_capacity(len);
        for flat in 0..len {
            let mut rem = flat;
            for slot in idx.iter_mut().rev() {
                *slot = rem % dim;
                rem /= dim;
            }
            data.push(f(&idx));
        }
        ExprTensor { dim, order, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.order);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.dim);
            acc * self.dim + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.data[self.flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: Expr) {
        let f = self.flat(idx);
        self.data[f] = value;
    }

    pub fn entries(&self) -> &[Expr] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Expr::is_zero)
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        ExprTensor {
            dim: self.dim,
            order: self.order,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Entries evaluated at a point, same flat layout.
    pub fn eval(&self, chart: &Chart, point: &[f64]) -> Result<NumTensor> {
        let data = self
            .data
            .iter()
            .map(|e| if e.is_zero() { Ok(0.0) } else { chart.eval(e, point) })
            .collect::<Result<Vec<_>>>()?;
        Ok(NumTensor {
            dim: self.dim,
            order: self.order,
            data,
        })
    }

    /// Largest absolute entry over the given points.
    pub fn max_abs(&self, chart: &Chart, points: &[Vec<f64>]) -> Result<Residual> {
        super::max_abs_over(chart, &self.data, points)
    }
}

/// A numeric snapshot of an [`ExprTensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct NumTensor {
    dim: usize,
    order: usize,
    data: Vec<f64>,
}

impl NumTensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        let flat = idx.iter().fold(0, |acc, &i| acc * self.dim + i);
        self.data[flat]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }
}
