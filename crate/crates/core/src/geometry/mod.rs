//! Charts, symbolic tensor fields and linear connections.
//!
//! Christoffel symbols are stored as `gamma[k][j][i]`, the `∂_k` component
//! of `∇_{∂_i} ∂_j`; `i` is always the differentiation direction. Every
//! formula in this crate is written against that layout.

mod connection;
mod coords;
mod tensor;
mod transport;

use std::collections::HashSet;

pub use connection::ConnectionCoeffs;
pub use coords::{change_coordinates, frame_to_coordinate_connection};
pub use tensor::ExprTensor;
pub use transport::{
    covariant_derivative_via_transport, parallel_transport, transport_between,
    transport_trajectory, DEFAULT_STEPS,
};

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::linalg;
use crate::sampling::{self, Residual};

/// A single coordinate chart with a sampling box.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coords: Vec<String>,
    domain: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new<S: Into<String>>(coords: Vec<S>, domain: Vec<(f64, f64)>) -> Result<Chart> {
        let coords: Vec<String> = coords.into_iter().map(Into::into).collect();
        if coords.is_empty() {
            return Err(Error::InvalidChart("chart needs at least one coordinate".into()));
        }
        if coords.len() != domain.len() {
            return Err(Error::InvalidChart(format!(
                "{} coordinates but {} domain intervals",
                coords.len(),
                domain.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &coords {
            let valid = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(Error::InvalidChart(format!("invalid coordinate name `{name}`")));
            }
            if crate::expr::Func::from_name(name).is_some() || name == PathSpec::PARAMETER {
                return Err(Error::InvalidChart(format!("reserved coordinate name `{name}`")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{name}`")));
            }
        }
        for (name, (lo, hi)) in coords.iter().zip(&domain) {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidChart(format!(
                    "domain of `{name}` must satisfy lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Chart { coords, domain })
    }

    /// Chart on `names` with the same interval on every axis.
    pub fn uniform<S: Into<String>>(names: Vec<S>, lo: f64, hi: f64) -> Result<Chart> {
        let n = names.len();
        Chart::new(names, vec![(lo, hi); n])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    pub fn center(&self) -> Vec<f64> {
        self.domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn same_coords(&self, other: &Chart) -> bool {
        self.coords == other.coords
    }

    pub(crate) fn ensure_same(&self, other: &Chart, context: &str) -> Result<()> {
        if self.same_coords(other) {
            Ok(())
        } else {
            Err(Error::ChartMismatch(format!(
                "{context}: {:?} vs {:?}",
                self.coords, other.coords
            )))
        }
    }

    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        point
            .iter()
            .zip(&self.domain)
            .all(|(x, (lo, hi))| *x >= lo - slack && *x <= hi + slack)
    }

    /// The deterministic sample set: box center plus 50 seeded uniform points.
    pub fn sample_points(&self, seed: u64) -> Vec<Vec<f64>> {
        sampling::box_samples(&self.domain, seed, sampling::DEFAULT_SAMPLE_COUNT)
    }

    pub fn env<'a>(&'a self, point: &'a [f64]) -> PointEnv<'a> {
        PointEnv {
            names: &self.coords,
            values: point,
            extra: None,
        }
    }

    pub fn eval(&self, e: &Expr, point: &[f64]) -> Result<f64> {
        e.eval(&self.env(point)).map_err(|source| Error::Eval {
            source,
            point: point.to_vec(),
        })
    }

    pub fn eval_all(&self, exprs: &[Expr], point: &[f64]) -> Result<Vec<f64>> {
        exprs.iter().map(|e| self.eval(e, point)).collect()
    }

    /// Every free variable of `e` must be a coordinate of this chart.
    pub fn check_vars(&self, e: &Expr, context: &str) -> Result<()> {
        for name in e.free_vars() {
            if self.index_of(&name).is_none() {
                return Err(Error::UnknownVariable {
                    name,
                    context: context.to_string(),
                });
            }
        }
        Ok(())
    }
}

/// Binds a chart's coordinate names to a numeric point.
pub struct PointEnv<'a> {
    names: &'a [String],
    values: &'a [f64],
    extra: Option<(&'a str, f64)>,
}

impl<'a> PointEnv<'a> {
    pub fn with(mut self, name: &'a str, value: f64) -> Self {
        self.extra = Some((name, value));
        self
    }
}

impl Env for PointEnv<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        if let Some((n, v)) = self.extra {
            if n == name {
                return Some(v);
            }
        }
        self.names
            .iter()
            .position(|n| n == name)
            .and_then(|i| self.values.get(i).copied())
    }
}

/// A vector field with symbolic components in the coordinate frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldExpr {
    pub chart: Chart,
    pub components: Vec<Expr>,
}

impl VectorFieldExpr {
    pub fn new(chart: &Chart, components: Vec<Expr>) -> Result<Self> {
        if components.len() != chart.dim() {
            return Err(Error::Shape(format!(
                "vector field has {} components on a {}-dimensional chart",
                components.len(),
                chart.dim()
            )));
        }
        for c in &components {
            chart.check_vars(c, "vector field")?;
        }
        Ok(VectorFieldExpr {
            chart: chart.clone(),
            components,
        })
    }

    pub fn zero(chart: &Chart) -> Self {
        VectorFieldExpr {
            chart: chart.clone(),
            components: vec![Expr::zero(); chart.dim()],
        }
    }

    /// The coordinate field `∂/∂x^index`.
    pub fn coordinate(chart: &Chart, index: usize) -> Self {
        let components = (0..chart.dim())
            .map(|m| if m == index { Expr::one() } else { Expr::zero() })
            .collect();
        VectorFieldExpr {
            chart: chart.clone(),
            components,
        }
    }

    pub fn constant(chart: &Chart, values: &[f64]) -> Result<Self> {
        VectorFieldExpr::new(chart, values.iter().map(|&v| Expr::constant(v)).collect())
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.chart.eval_all(&self.components, point)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    /// Lie bracket `[X, Y]^k = X^i ∂_i Y^k − Y^i ∂_i X^k`.
    pub fn bracket(&self, other: &VectorFieldExpr) -> Result<VectorFieldExpr> {
        self.chart.ensure_same(&other.chart, "bracket")?;
        let coords = self.chart.coords();
        let components = (0..self.chart.dim())
            .map(|k| {
                Expr::sum(coords.iter().enumerate().map(|(i, xi)| {
                    &self.components[i] * &other.components[k].derivative(xi)
                        - &other.components[i] * &self.components[k].derivative(xi)
                }))
            })
            .collect();
        Ok(VectorFieldExpr {
            chart: self.chart.clone(),
            components,
        })
    }
}

/// A frame `{E_a}`; the frame matrix has `E_a` as its `a`-th column.
#[derive(Debug, Clone)]
pub struct FrameField {
    pub chart: Chart,
    pub vectors: Vec<VectorFieldExpr>,
}

impl FrameField {
    /// Builds the frame and verifies `|det| > 1e-10` at the chart samples.
    pub fn new(chart: &Chart, vectors: Vec<VectorFieldExpr>) -> Result<Self> {
        if vectors.len() != chart.dim() {
            return Err(Error::Shape(format!(
                "frame has {} vectors on a {}-dimensional chart",
                vectors.len(),
                chart.dim()
            )));
        }
        for v in &vectors {
            chart.ensure_same(&v.chart, "frame vector")?;
        }
        let frame = FrameField {
            chart: chart.clone(),
            vectors,
        };
        for p in chart.sample_points(sampling::DEFAULT_SEED) {
            let det = linalg::determinant(&frame.matrix_at(&p)?);
            if !(det.abs() > 1e-10) {
                return Err(Error::Singular {
                    what: "frame matrix".into(),
                    point: p,
                    det,
                });
            }
        }
        Ok(frame)
    }

    pub fn coordinate(chart: &Chart) -> Self {
        FrameField {
            chart: chart.clone(),
            vectors: (0..chart.dim())
                .map(|a| VectorFieldExpr::coordinate(chart, a))
                .collect(),
        }
    }

    /// Symbolic frame matrix, `m[row][a] = E_a^row`.
    pub fn matrix(&self) -> Vec<Vec<Expr>> {
        let n = self.chart.dim();
        (0..n)
            .map(|row| (0..n).map(|a| self.vectors[a].components[row].clone()).collect())
            .collect()
    }

    pub fn matrix_at(&self, point: &[f64]) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.chart.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for a in 0..n {
            for row in 0..n {
                m[(row, a)] = self.chart.eval(&self.vectors[a].components[row], point)?;
            }
        }
        Ok(m)
    }
}

/// A parametrized path `t ↦ x(t)` on a chart.
#[derive(Debug, Clone)]
pub struct PathSpec {
    pub chart: Chart,
    pub components: Vec<Expr>,
    pub t0: f64,
    pub t1: f64,
    velocity: Vec<Expr>,
}

impl PathSpec {
    pub const PARAMETER: &'static str = "t";
    const CHECKPOINTS: usize = 100;

    /// Validates that the image stays in the chart domain at 100 evenly
    /// spaced parameter values.
    pub fn new(chart: &Chart, components: Vec<Expr>, t0: f64, t1: f64) -> Result<PathSpec> {
        if components.len() != chart.dim() {
            return Err(Error::Shape(format!(
                "path has {} components on a {}-dimensional chart",
                components.len(),
                chart.dim()
            )));
        }
        for c in &components {
            for v in c.free_vars() {
                if v != Self::PARAMETER {
                    return Err(Error::UnknownVariable {
                        name: v,
                        context: "path (only `t` is allowed)".into(),
                    });
                }
            }
        }
        let velocity = components
            .iter()
            .map(|c| c.derivative(Self::PARAMETER))
            .collect();
        let path = PathSpec {
            chart: chart.clone(),
            components,
            t0,
            t1,
            velocity,
        };
        for s in 0..Self::CHECKPOINTS {
            let t = t0 + (t1 - t0) * s as f64 / (Self::CHECKPOINTS - 1) as f64;
            let x = path.position(t)?;
            if !chart.contains(&x, 1e-9) {
                return Err(Error::PathOutOfDomain { t });
            }
        }
        Ok(path)
    }

    fn eval_at(&self, exprs: &[Expr], t: f64) -> Result<Vec<f64>> {
        let env = [(Self::PARAMETER, t)];
        exprs
            .iter()
            .map(|e| {
                e.eval(&env).map_err(|source| Error::Eval {
                    source,
                    point: vec![t],
                })
            })
            .collect()
    }

    pub fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.eval_at(&self.components, t)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec<f64>> {
        self.eval_at(&self.velocity, t)
    }

    /// Straight segment `start + t·direction`, `t ∈ [0, 1]`.
    pub fn line(chart: &Chart, start: &[f64], direction: &[f64]) -> Result<PathSpec> {
        let t = Expr::var(Self::PARAMETER);
        let comps = start
            .iter()
            .zip(direction)
            .map(|(&s, &d)| Expr::constant(s) + Expr::constant(d) * t.clone())
            .collect();
        PathSpec::new(chart, comps, 0.0, 1.0)
    }
}

/// Max |value| of every expression over the given points.
pub fn max_abs_over(chart: &Chart, exprs: &[Expr], points: &[Vec<f64>]) -> Result<Residual> {
    let mut r = Residual::new();
    for p in points {
        for e in exprs {
            if e.is_zero() {
                r.observe(0.0, p);
            } else {
                r.observe(chart.eval(e, p)?, p);
            }
        }
    }
    Ok(r)
}
