use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::sampling::Residual;

use super::tensor::{ExprTensor, NumTensor};
use super::{Chart, VectorFieldExpr};

/// Christoffel field of a linear connection, `gamma[k][j][i]` being the
/// `∂_k` component of `∇_{∂_i} ∂_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCoeffs {
    chart: Chart,
    gamma: ExprTensor,
}

impl ConnectionCoeffs {
    pub fn new(chart: &Chart, gamma: ExprTensor) -> Result<Self> {
        if gamma.dim() != chart.dim() || gamma.order() != 3 {
            return Err(Error::Shape(format!(
                "connection on a {}-dimensional chart needs a {0}x{0}x{0} array",
                chart.dim()
            )));
        }
        for e in gamma.entries() {
            chart.check_vars(e, "connection coefficient")?;
        }
        Ok(ConnectionCoeffs {
            chart: chart.clone(),
            gamma,
        })
    }

    /// `f(k, j, i)` supplies `Γ^k_{ji}`.
    pub fn from_fn(chart: &Chart, mut f: impl FnMut(usize, usize, usize) -> Expr) -> Result<Self> {
        let gamma = ExprTensor::from_fn(chart.dim(), 3, |idx| f(idx[0], idx[1], idx[2]));
        ConnectionCoeffs::new(chart, gamma)
    }

    /// The flat coordinate connection, all `Γ = 0`.
    pub fn flat(chart: &Chart) -> Self {
        ConnectionCoeffs {
            chart: chart.clone(),
            gamma: ExprTensor::zeros(chart.dim(), 3),
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn gamma(&self) -> &ExprTensor {
        &self.gamma
    }

    pub fn get(&self, k: usize, j: usize, i: usize) -> &Expr {
        self.gamma.get(&[k, j, i])
    }

    /// All coefficients are the literal zero.
    pub fn is_flat(&self) -> bool {
        self.gamma.is_zero()
    }

    pub fn eval_at(&self, point: &[f64]) -> Result<NumTensor> {
        self.gamma.eval(&self.chart, point)
    }

    /// Adds a (1,2) tensor `A` with `A[k][j][i]` = `A(∂_i, ∂_j)^k`.
    pub fn plus(&self, a: &ExprTensor) -> Result<Self> {
        if a.dim() != self.dim() || a.order() != 3 {
            return Err(Error::Shape("correction tensor shape".into()));
        }
        ConnectionCoeffs::from_fn(&self.chart, |k, j, i| self.get(k, j, i) + a.get(&[k, j, i]))
    }

    /// Max over points of `|Γ^k_{ji} − Γ^k_{ij}|`.
    pub fn symmetry_residual(&self, points: &[Vec<f64>]) -> Result<Residual> {
        self.torsion_tensor().max_abs(&self.chart, points)
    }

    /// `T[k][i][j] = Γ^k_{ji} − Γ^k_{ij}`, the components of
    /// `∇_X Y − ∇_Y X − [X, Y]` on coordinate fields.
    pub fn torsion_tensor(&self) -> ExprTensor {
        ExprTensor::from_fn(self.dim(), 3, |idx| {
            let (k, i, j) = (idx[0], idx[1], idx[2]);
            self.get(k, j, i) - self.get(k, i, j)
        })
    }

    /// `R[l][k][i][j]` = `(R(∂_i, ∂_j) ∂_k)^l`
    /// `= ∂_i Γ^l_{kj} − ∂_j Γ^l_{ki} + Γ^l_{mi} Γ^m_{kj} − Γ^l_{mj} Γ^m_{ki}`.
    pub fn curvature_tensor(&self) -> ExprTensor {
        let n = self.dim();
        let coords = self.chart.coords();
        let cache = Differentiator::new();
        ExprTensor::from_fn(n, 4, |idx| {
            let (l, k, i, j) = (idx[0], idx[1], idx[2], idx[3]);
            if i == j {
                return Expr::zero();
            }
            let mut r = cache.derivative(self.get(l, k, j), &coords[i])
                - cache.derivative(self.get(l, k, i), &coords[j]);
            for m in 0..n {
                r = r + self.get(l, m, i) * self.get(m, k, j) - self.get(l, m, j) * self.get(m, k, i);
            }
            r
        })
    }

    /// `^tΓ^k_{ji} = Γ^k_{ij}`: the connection `^t∇_X Y = ∇_Y X + [X, Y]`.
    pub fn transpose(&self) -> Self {
        ConnectionCoeffs {
            chart: self.chart.clone(),
            gamma: ExprTensor::from_fn(self.dim(), 3, |idx| self.get(idx[0], idx[2], idx[1]).clone()),
        }
    }

    /// `½(∇ + ^t∇)`, torsion free by construction.
    pub fn symmetric_part(&self) -> Self {
        ConnectionCoeffs {
            chart: self.chart.clone(),
            gamma: ExprTensor::from_fn(self.dim(), 3, |idx| {
                let (k, j, i) = (idx[0], idx[1], idx[2]);
                let (a, b) = (self.get(k, j, i), self.get(k, i, j));
                if a == b {
                    a.clone()
                } else {
                    Expr::constant(0.5) * (a + b)
                }
            }),
        }
    }

    /// `(∇_X Y)^k = X^i ∂_i Y^k + Γ^k_{ji} Y^j X^i`.
    pub fn covariant_derivative_vector(
        &self,
        x: &VectorFieldExpr,
        y: &VectorFieldExpr,
    ) -> Result<VectorFieldExpr> {
        self.chart.ensure_same(&x.chart, "covariant derivative direction")?;
        self.chart.ensure_same(&y.chart, "covariant derivative field")?;
        let n = self.dim();
        let coords = self.chart.coords();
        let components = (0..n)
            .map(|k| {
                let mut acc = Expr::zero();
                for i in 0..n {
                    if x.components[i].is_zero() {
                        continue;
                    }
                    let mut inner = y.components[k].derivative(&coords[i]);
                    for j in 0..n {
                        inner = inner + self.get(k, j, i) * &y.components[j];
                    }
                    acc = acc + &x.components[i] * &inner;
                }
                acc
            })
            .collect();
        Ok(VectorFieldExpr {
            chart: self.chart.clone(),
            components,
        })
    }

    /// `Γ(x)(Y, X)^k = Γ^k_{ji}(x) Y^j X^i` for numeric vectors.
    pub fn contract_at(&self, gamma: &NumTensor, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for j in 0..n {
                    if y[j] == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        s += gamma.get(&[k, j, i]) * y[j] * x[i];
                    }
                }
                s
            })
            .collect()
    }

    /// Lie derivative of the connection along `v`, stored like `gamma`:
    /// `(L_V ∇)(∂_i, ∂_j)^k = V^m ∂_m Γ^k_{ji} − Γ^m_{ji} ∂_m V^k
    ///  + Γ^k_{jm} ∂_i V^m + Γ^k_{mi} ∂_j V^m + ∂_i ∂_j V^k`.
    ///
    /// It vanishes iff the flow of `v` preserves the connection.
    pub fn lie_derivative(&self, v: &VectorFieldExpr) -> Result<ExprTensor> {
        self.chart.ensure_same(&v.chart, "lie derivative")?;
        let n = self.dim();
        let coords = self.chart.coords();
        let cache = Differentiator::new();
        let dv: Vec<Vec<Expr>> = (0..n)
            .map(|k| (0..n).map(|m| cache.derivative(&v.components[k], &coords[m])).collect())
            .collect();
        Ok(ExprTensor::from_fn(n, 3, |idx| {
            let (k, j, i) = (idx[0], idx[1], idx[2]);
            let mut acc = cache.derivative(&dv[k][j], &coords[i]);
            for m in 0..n {
                acc = acc + &v.components[m] * &cache.derivative(self.get(k, j, i), &coords[m])
                    - self.get(m, j, i) * &dv[k][m]
                    + self.get(k, j, m) * &dv[m][i]
                    + self.get(k, m, i) * &dv[m][j];
            }
            acc
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::sampling::DEFAULT_SEED;

    fn chart(names: &[&str]) -> Chart {
        Chart::uniform(names.to_vec(), -1.0, 1.0).unwrap()
    }

    fn single(chart: &Chart, k: usize, j: usize, i: usize, src: &str) -> ConnectionCoeffs {
        let e = parse(src).unwrap();
        ConnectionCoeffs::from_fn(chart, |a, b, c| {
            if (a, b, c) == (k, j, i) {
                e.clone()
            } else {
                Expr::zero()
            }
        })
        .unwrap()
    }

    #[test]
    fn flat_directional_derivative() {
        let c = chart(&["x1", "x2"]);
        let conn = ConnectionCoeffs::flat(&c);
        let x = VectorFieldExpr::coordinate(&c, 0);
        let y = VectorFieldExpr::new(&c, vec![Expr::var("x1"), Expr::zero()]).unwrap();
        let d = conn.covariant_derivative_vector(&x, &y).unwrap();
        assert_eq!(d.components, vec![Expr::one(), Expr::zero()]);
    }

    #[test]
    fn zero_field_has_zero_derivative() {
        let c = chart(&["x1", "x2"]);
        let conn = single(&c, 0, 1, 1, "x1");
        let x = VectorFieldExpr::new(&c, vec![Expr::var("x2"), Expr::one()]).unwrap();
        let d = conn.covariant_derivative_vector(&x, &VectorFieldExpr::zero(&c)).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn single_christoffel_derivative() {
        // Γ^1_{22} = x1, X = Y = ∂_2 → (x1, 0)
        let c = chart(&["x1", "x2"]);
        let conn = single(&c, 0, 1, 1, "x1");
        let e2 = VectorFieldExpr::coordinate(&c, 1);
        let d = conn.covariant_derivative_vector(&e2, &e2).unwrap();
        assert_eq!(d.components, vec![Expr::var("x1"), Expr::zero()]);
    }

    #[test]
    fn torsion_examples() {
        let c = chart(&["x1", "x2"]);
        let sym = single(&c, 0, 1, 1, "x1");
        assert!(sym.torsion_tensor().is_zero());
        // Γ^1_{21} = 1: ∇_{∂1}∂2 = ∂1, ∇_{∂2}∂1 = 0 → T^1_{12} = 1
        let skew = single(&c, 0, 1, 0, "1");
        let t = skew.torsion_tensor();
        assert_eq!(t.get(&[0, 0, 1]).as_const(), Some(1.0));
        assert_eq!(t.get(&[0, 1, 0]).as_const(), Some(-1.0));
    }

    #[test]
    fn transpose_and_symmetric_part() {
        let c = chart(&["x1", "x2"]);
        let skew = single(&c, 0, 1, 0, "1");
        let t = skew.transpose();
        assert_eq!(t.get(0, 0, 1).as_const(), Some(1.0));
        assert!(t.get(0, 1, 0).is_zero());
        assert_eq!(t.transpose(), skew);
        let s = skew.symmetric_part();
        assert_eq!(s.get(0, 1, 0).as_const(), Some(0.5));
        assert_eq!(s.get(0, 0, 1).as_const(), Some(0.5));
        assert!(s.torsion_tensor().is_zero());
        let sym = single(&c, 0, 1, 1, "x1");
        assert_eq!(sym.symmetric_part(), sym);
        assert_eq!(sym.transpose(), sym);
    }

    #[test]
    fn curvature_flat_and_antisymmetric() {
        let c = chart(&["x1", "x2"]);
        assert!(ConnectionCoeffs::flat(&c).curvature_tensor().is_zero());
        let conn = single(&c, 0, 0, 0, "x2");
        let r = conn.curvature_tensor();
        let pts = c.sample_points(DEFAULT_SEED);
        for p in &pts {
            let rn = r.eval(&c, p).unwrap();
            // R^1_{1 1 2} = −∂_2 Γ^1_{11} = −1
            assert!((rn.get(&[0, 0, 0, 1]) + 1.0).abs() < 1e-14);
            assert!((rn.get(&[0, 0, 1, 0]) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn lie_derivative_of_flat_under_affine_field_vanishes() {
        let c = chart(&["x1", "x2"]);
        let conn = ConnectionCoeffs::flat(&c);
        let v = VectorFieldExpr::new(&c, vec![parse("2*x1 + x2 + 3").unwrap(), parse("x1").unwrap()]).unwrap();
        assert!(conn.lie_derivative(&v).unwrap().is_zero());
        let rot = VectorFieldExpr::new(&c, vec![parse("x1^2").unwrap(), Expr::zero()]).unwrap();
        // ∂_1∂_1 (x1^2) = 2 → not affine
        let l = conn.lie_derivative(&rot).unwrap();
        assert_eq!(l.get(&[0, 0, 0]).as_const(), Some(2.0));
    }

    #[test]
    fn shape_checked() {
        let c = chart(&["x1", "x2"]);
        assert!(ConnectionCoeffs::new(&c, ExprTensor::zeros(3, 3)).is_err());
        let bad = ExprTensor::from_fn(2, 3, |_| Expr::var("zz"));
        assert!(matches!(
            ConnectionCoeffs::new(&c, bad),
            Err(Error::UnknownVariable { .. })
        ));
    }
}
