//! Two-forms, closedness and rank checks, `∇ω`, and the correction that
//! turns a torsionless connection into a symplectic one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::geometry::{max_abs_over, Chart, ConnectionCoeffs, ExprTensor};
use crate::linalg;
use crate::sampling::{Residual, DEFAULT_SEED};

pub const CLOSED_TOL: f64 = 1e-10;
pub const DET_TOL: f64 = 1e-10;
/// Singular values below this count toward the kernel...
pub const KERNEL_SV_TOL: f64 = 1e-8;
/// ...and the rest must clear this.
pub const RANK_SV_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    /// Not validated.
    General,
    Symplectic,
    Presymplectic { rank: usize },
}

/// A 2-form `ω = Σ_{i<j} ω_ij dx^i∧dx^j`. Only the strict upper triangle is
/// stored; `ω_ji = −ω_ij` and `ω_ii = 0` by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormField {
    chart: Chart,
    upper: Vec<Expr>,
    kind: FormKind,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

impl TwoFormField {
    /// `f(i, j)` is called for `i < j` only.
    pub fn from_fn(chart: &Chart, mut f: impl FnMut(usize, usize) -> Expr) -> Result<Self> {
        let n = chart.dim();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let e = f(i, j);
                chart.check_vars(&e, "two-form coefficient")?;
                upper.push(e);
            }
        }
        Ok(TwoFormField {
            chart: chart.clone(),
            upper,
            kind: FormKind::General,
        })
    }

    /// Build from sparse `(i, j, ω_ij)` entries. Lower-triangle entries are
    /// negated into place; giving both `(i, j)` and `(j, i)` is an error, as
    /// is a nonzero diagonal entry.
    pub fn from_entries(chart: &Chart, entries: &[(usize, usize, Expr)]) -> Result<Self> {
        let n = chart.dim();
        let mut slots: Vec<Option<Expr>> = vec![None; n * n.saturating_sub(1) / 2];
        for (i, j, e) in entries {
            let (i, j) = (*i, *j);
            if i >= n || j >= n {
                return Err(Error::Shape(format!("two-form index ({},{}) out of range", i + 1, j + 1)));
            }
            if i == j {
                if e.is_zero() {
                    continue;
                }
                return Err(Error::Shape(format!("diagonal two-form entry ({0},{0}) must vanish", i + 1)));
            }
            let (lo, hi, val) = if i < j { (i, j, e.clone()) } else { (j, i, -e) };
            let slot = &mut slots[upper_index(n, lo, hi)];
            if slot.is_some() {
                return Err(Error::Shape(format!("two-form entry ({},{}) given twice", lo + 1, hi + 1)));
            }
            *slot = Some(val);
        }
        let upper: Vec<Expr> = slots.into_iter().map(|s| s.unwrap_or_else(Expr::zero)).collect();
        let mut it = upper.into_iter();
        TwoFormField::from_fn(chart, |_, _| it.next().expect("sized"))
    }

    /// `from_fn` followed by [`TwoFormField::into_symplectic`].
    pub fn symplectic(chart: &Chart, f: impl FnMut(usize, usize) -> Expr) -> Result<Self> {
        TwoFormField::from_fn(chart, f)?.into_symplectic(&chart.sample_points(DEFAULT_SEED))
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn kind(&self) -> FormKind {
        self.kind
    }

    /// `ω_ij` for any pair of indices.
    pub fn get(&self, i: usize, j: usize) -> Expr {
        let n = self.dim();
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => Expr::zero(),
            std::cmp::Ordering::Less => self.upper[upper_index(n, i, j)].clone(),
            std::cmp::Ordering::Greater => -&self.upper[upper_index(n, j, i)],
        }
    }

    pub fn matrix(&self) -> Vec<Vec<Expr>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn matrix_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let e = &self.upper[upper_index(n, i, j)];
                let v = if e.is_zero() { 0.0 } else { self.chart.eval(e, point)? };
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        Ok(m)
    }

    /// Every coefficient is a constant.
    pub fn is_constant(&self) -> bool {
        self.upper.iter().all(|e| e.as_const().is_some())
    }

    /// `ω(x, y) = ω_ij x^i y^j` at a point.
    pub fn pair_at(&self, point: &[f64], x: &[f64], y: &[f64]) -> Result<f64> {
        let m = self.matrix_at(point)?;
        Ok((DVector::from_column_slice(x).transpose() * m * DVector::from_column_slice(y))[0])
    }

    pub fn closedness_residual(&self, points: &[Vec<f64>]) -> Result<Residual> {
        exterior_derivative(self).max_abs(&self.chart, points)
    }

    /// Validate closedness and nondegeneracy at the points and flag the form.
    pub fn into_symplectic(mut self, points: &[Vec<f64>]) -> Result<Self> {
        self.check_closed(points)?;
        for p in points {
            let det = linalg::determinant(&self.matrix_at(p)?);
            if !(det.abs() > DET_TOL) {
                return Err(Error::Singular {
                    what: "two-form".into(),
                    point: p.clone(),
                    det,
                });
            }
        }
        self.kind = FormKind::Symplectic;
        Ok(self)
    }

    /// Validate closedness and constant rank `rank` at the points and flag
    /// the form.
    pub fn into_presymplectic(mut self, rank: usize, points: &[Vec<f64>]) -> Result<Self> {
        if !rank.is_multiple_of(2) || rank > self.dim() {
            return Err(Error::Shape(format!(
                "rank {rank} is not an even number ≤ {}",
                self.dim()
            )));
        }
        self.check_closed(points)?;
        for p in points {
            let found = self.rank_at(p)?;
            if found != Some(rank) {
                return Err(Error::Rank {
                    expected: rank,
                    found: found.unwrap_or_else(|| linalg::rank(&self.matrix_at(p).unwrap(), KERNEL_SV_TOL)),
                    point: p.clone(),
                });
            }
        }
        self.kind = FormKind::Presymplectic { rank };
        Ok(self)
    }

    /// Rank at a point, `None` when a singular value falls in the
    /// ambiguous band between the kernel and rank thresholds.
    pub fn rank_at(&self, point: &[f64]) -> Result<Option<usize>> {
        let sv = linalg::singular_values(&self.matrix_at(point)?);
        if sv.iter().any(|&s| (KERNEL_SV_TOL..=RANK_SV_TOL).contains(&s)) {
            return Ok(None);
        }
        Ok(Some(sv.iter().filter(|&&s| s > RANK_SV_TOL).count()))
    }

    fn check_closed(&self, points: &[Vec<f64>]) -> Result<()> {
        let r = self.closedness_residual(points)?;
        if !r.within(CLOSED_TOL) {
            return Err(Error::Precondition {
                what: "dω = 0".into(),
                residual: r.max,
                point: r.witness.unwrap_or_default(),
            });
        }
        Ok(())
    }
}

/// `(dω)_{ijk} = ∂_i ω_jk + ∂_j ω_ki + ∂_k ω_ij`.
pub fn exterior_derivative(omega: &TwoFormField) -> ExprTensor {
    let n = omega.dim();
    let coords = omega.chart.coords();
    let cache = Differentiator::new();
    ExprTensor::from_fn(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        if i == j || j == k || i == k {
            return Expr::zero();
        }
        cache.derivative(&omega.get(j, k), &coords[i])
            + cache.derivative(&omega.get(k, i), &coords[j])
            + cache.derivative(&omega.get(i, j), &coords[k])
    })
}

/// `N[i][j][k] = (∇_{∂k} ω)(∂i, ∂j) = ∂_k ω_ij − Γ^l_{ik} ω_lj − Γ^l_{jk} ω_il`.
pub fn nabla_omega(conn: &ConnectionCoeffs, omega: &TwoFormField) -> Result<ExprTensor> {
    conn.chart().ensure_same(&omega.chart, "∇ω")?;
    let n = omega.dim();
    let coords = omega.chart.coords();
    let w = omega.matrix();
    Ok(ExprTensor::from_fn(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        if i == j {
            return Expr::zero();
        }
        let mut acc = w[i][j].derivative(&coords[k]);
        for l in 0..n {
            let g = conn.get(l, i, k);
            if !g.is_zero() && !w[l][j].is_zero() {
                acc = acc - g * &w[l][j];
            }
            let g = conn.get(l, j, k);
            if !g.is_zero() && !w[i][l].is_zero() {
                acc = acc - g * &w[i][l];
            }
        }
        acc
    }))
}

/// Inverse of the Gram matrix `G_ab = ω(b_a, b_c)` of the form restricted
/// to the span of `basis`.
pub fn invert_on_span(omega: &TwoFormField, point: &[f64], basis: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = omega.dim();
    if basis.iter().any(|b| b.len() != n) {
        return Err(Error::Shape("basis vectors must match the chart dimension".into()));
    }
    let w = omega.matrix_at(point)?;
    let b = DMatrix::from_fn(n, basis.len(), |r, c| basis[c][r]);
    let gram = b.transpose() * w * &b;
    let det = linalg::determinant(&gram);
    if !(det.abs() > DET_TOL) {
        return Err(Error::Singular {
            what: "restricted two-form".into(),
            point: point.to_vec(),
            det,
        });
    }
    linalg::inverse(&gram).ok_or_else(|| Error::Singular {
        what: "restricted two-form".into(),
        point: point.to_vec(),
        det,
    })
}

/// The correction `A = A½ + A⅙` added by [`symplectize`], in the layout of
/// Christoffel arrays (`[k][j][i]` is `A(∂i, ∂j)^k`).
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticCorrection {
    /// `ω(A½(X,Y), Z) = ½ (∇°_X ω)(Y, Z)`
    pub half: ExprTensor,
    /// `ω(A⅙(X,Y), Z) = ⅙ ((∇°_Y ω)(X, Z) + (∇°_Z ω)(X, Y))`
    pub sixth: ExprTensor,
}

impl SymplecticCorrection {
    pub fn total(&self) -> ExprTensor {
        let n = self.half.dim();
        ExprTensor::from_fn(n, 3, |idx| self.half.get(idx) + self.sixth.get(idx))
    }
}

/// Inverse `W` of `ωᵀ` restricted to the index set `block`, so that
/// `A^k = Σ_l W[k][l] B_l` solves `Σ_k ω_{kl} A^k = B_l` for `k, l ∈ block`.
/// Row and column positions follow `block`.
pub(crate) fn transpose_inverse_on(
    omega: &TwoFormField,
    block: &[usize],
    points: &[Vec<f64>],
) -> Result<Vec<Vec<Expr>>> {
    let n = block.len();
    let chart = &omega.chart;
    let wt: Vec<Vec<Expr>> = block.iter().map(|&l| block.iter().map(|&k| omega.get(k, l)).collect()).collect();
    if wt.iter().flatten().all(|e| e.as_const().is_some()) {
        let m = DMatrix::from_fn(n, n, |r, c| wt[r][c].as_const().unwrap_or(0.0));
        let inv = linalg::inverse(&m).ok_or_else(|| Error::Singular {
            what: "two-form".into(),
            point: chart.center(),
            det: linalg::determinant(&m),
        })?;
        return Ok((0..n)
            .map(|r| (0..n).map(|c| Expr::constant(snap(inv[(r, c)]))).collect())
            .collect());
    }
    let inv = linalg::symbolic_inverse(&wt).ok_or_else(|| {
        Error::Degenerate("two-form matrix has a structurally zero column".into())
    })?;
    // the pivots are only structurally nonzero; confirm numerically
    for p in points {
        let mut wt_num = DMatrix::zeros(n, n);
        let mut inv_num = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                wt_num[(r, c)] = chart.eval(&wt[r][c], p)?;
                inv_num[(r, c)] = chart.eval(&inv[r][c], p)?;
            }
        }
        let err = (&wt_num * &inv_num - DMatrix::identity(n, n)).amax();
        if !(err <= 1e-9) {
            return Err(Error::Precondition {
                what: "symbolic inverse of ω".into(),
                residual: err,
                point: p.clone(),
            });
        }
    }
    Ok(inv)
}

// clean up round-off in exact inverses of small integer matrices
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-14 {
        r
    } else {
        x
    }
}

/// Solve for the correction tensor of a symmetric connection.
pub fn symplectic_correction(conn: &ConnectionCoeffs, omega: &TwoFormField) -> Result<SymplecticCorrection> {
    let chart = conn.chart().clone();
    chart.ensure_same(&omega.chart, "symplectize")?;
    let points = chart.sample_points(DEFAULT_SEED);
    let sym = conn.symmetry_residual(&points)?;
    if !sym.within(CLOSED_TOL) {
        return Err(Error::Precondition {
            what: "connection is symmetric".into(),
            residual: sym.max,
            point: sym.witness.unwrap_or_default(),
        });
    }
    let omega = match omega.kind {
        FormKind::Symplectic => omega.clone(),
        _ => omega.clone().into_symplectic(&points)?,
    };
    let n = chart.dim();
    let nab = nabla_omega(conn, &omega)?;
    let all: Vec<usize> = (0..n).collect();
    let w = transpose_inverse_on(&omega, &all, &points)?;
    let half = Expr::constant(0.5);
    let sixth = Expr::constant(1.0 / 6.0);
    // B[i][j][l] = ω(A(∂i, ∂j), ∂l), then A^k(i, j) = Σ_l W[k][l] B[i][j][l]
    let solve = |b: &dyn Fn(usize, usize, usize) -> Expr| {
        ExprTensor::from_fn(n, 3, |idx| {
            let (k, j, i) = (idx[0], idx[1], idx[2]);
            Expr::sum((0..n).filter(|&l| !w[k][l].is_zero()).map(|l| &w[k][l] * &b(i, j, l)))
        })
    };
    let half_part = solve(&|i, j, l| &half * nab.get(&[j, l, i]));
    let sixth_part = solve(&|i, j, l| &sixth * &(nab.get(&[i, l, j]) + nab.get(&[i, j, l])));
    Ok(SymplecticCorrection {
        half: half_part,
        sixth: sixth_part,
    })
}

/// `∇ = ∇° + A`: torsionless and `∇ω = 0` for a symmetric `∇°` and closed,
/// nondegenerate `ω`.
pub fn symplectize(conn: &ConnectionCoeffs, omega: &TwoFormField) -> Result<ConnectionCoeffs> {
    let a = symplectic_correction(conn, omega)?;
    conn.plus(&a.total())
}

/// Max over points and basis triples of `|ω(A(X,Y),Z) + ω(Y, A(X,Z))|`.
pub fn skew_compatibility_residual(
    omega: &TwoFormField,
    a: &ExprTensor,
    points: &[Vec<f64>],
) -> Result<Residual> {
    let n = omega.dim();
    // ω(A(∂i,∂j), ∂l) = Σ_k A^k(i,j) ω_kl
    let lowered = ExprTensor::from_fn(n, 3, |idx| {
        let (i, j, l) = (idx[0], idx[1], idx[2]);
        Expr::sum((0..n).map(|k| a.get(&[k, j, i]) * &omega.get(k, l)))
    });
    let exprs: Vec<Expr> = (0..n * n * n)
        .map(|f| {
            let (i, j, l) = (f / (n * n), (f / n) % n, f % n);
            lowered.get(&[i, j, l]) - lowered.get(&[i, l, j])
        })
        .collect();
    max_abs_over(&omega.chart, &exprs, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn canonical(n: usize) -> TwoFormField {
        let names: Vec<String> = (1..=n).map(|i| format!("x{i}")).chain((1..=n).map(|i| format!("y{i}"))).collect();
        let chart = Chart::uniform(names, -1.0, 1.0).unwrap();
        TwoFormField::symplectic(&chart, |i, j| if j == i + n { Expr::one() } else { Expr::zero() }).unwrap()
    }

    #[test]
    fn storage_is_antisymmetric() {
        let c = Chart::uniform(vec!["a", "b", "c"], -1.0, 1.0).unwrap();
        let w = TwoFormField::from_entries(&c, &[(2, 0, parse("a").unwrap()), (1, 2, Expr::one())]).unwrap();
        assert_eq!(w.get(0, 2), -Expr::var("a"));
        assert_eq!(w.get(2, 0), Expr::var("a"));
        assert_eq!(w.get(2, 1).as_const(), Some(-1.0));
        assert!(w.get(1, 1).is_zero());
        assert!(TwoFormField::from_entries(&c, &[(0, 1, Expr::one()), (1, 0, Expr::one())]).is_err());
        assert!(TwoFormField::from_entries(&c, &[(0, 0, Expr::one())]).is_err());
    }

    #[test]
    fn canonical_is_closed() {
        let w = canonical(2);
        assert!(exterior_derivative(&w).is_zero());
        assert_eq!(w.kind(), FormKind::Symplectic);
    }

    #[test]
    fn exterior_derivative_single_term() {
        let c = Chart::uniform(vec!["x1", "x2", "x3"], -1.0, 1.0).unwrap();
        let w = TwoFormField::from_entries(&c, &[(1, 2, Expr::var("x1"))]).unwrap();
        let d = exterior_derivative(&w);
        assert_eq!(d.get(&[0, 1, 2]).as_const(), Some(1.0));
        assert_eq!(d.get(&[2, 1, 0]).as_const(), Some(-1.0));
        assert_eq!(d.get(&[1, 2, 0]).as_const(), Some(1.0));
        let pts = c.sample_points(DEFAULT_SEED);
        assert!(matches!(
            w.clone().into_presymplectic(2, &pts),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn adapted_presymplectic_is_closed() {
        let c = Chart::uniform(vec!["u1", "u2", "z"], -1.0, 1.0).unwrap();
        let w = TwoFormField::from_entries(&c, &[(0, 1, parse("1 + u1^2").unwrap())]).unwrap();
        let pts = c.sample_points(DEFAULT_SEED);
        assert!(w.closedness_residual(&pts).unwrap().within(1e-12));
        let w = w.into_presymplectic(2, &pts).unwrap();
        assert_eq!(w.kind(), FormKind::Presymplectic { rank: 2 });
        assert!(matches!(
            w.clone().into_presymplectic(0, &pts),
            Err(Error::Rank { expected: 0, found: 2, .. })
        ));
        assert!(matches!(w.into_symplectic(&pts), Err(Error::Singular { .. })));
    }

    #[test]
    fn invert_on_span_examples() {
        let w = canonical(1);
        let inv = invert_on_span(&w, &[0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(inv, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));

        let c = Chart::uniform(vec!["u1", "u2", "z"], -2.0, 2.0).unwrap();
        let p = TwoFormField::from_entries(&c, &[(0, 1, parse("1 + u1^2").unwrap())]).unwrap();
        let inv = invert_on_span(&p, &[1.0, 0.0, 0.0], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]).unwrap();
        // Gram [[0,2],[-2,0]] has inverse [[0,-1/2],[1/2,0]]
        assert!((inv[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((inv[(1, 0)] - 0.5).abs() < 1e-15);
        assert!(matches!(
            invert_on_span(&p, &[0.0; 3], &[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn flat_connection_unchanged() {
        let w = canonical(2);
        let flat = ConnectionCoeffs::flat(w.chart());
        assert_eq!(symplectize(&flat, &w).unwrap(), flat);
    }

    #[test]
    fn rejects_torsion_and_open_forms() {
        let w = canonical(1);
        let skew = ConnectionCoeffs::from_fn(w.chart(), |k, j, i| {
            if (k, j, i) == (0, 1, 0) { Expr::one() } else { Expr::zero() }
        })
        .unwrap();
        assert!(matches!(symplectize(&skew, &w), Err(Error::Precondition { .. })));

        let c = Chart::uniform(vec!["a", "b", "c", "d"], 0.5, 1.0).unwrap();
        let open = TwoFormField::from_entries(&c, &[(0, 1, Expr::var("c")), (2, 3, Expr::one())]).unwrap();
        assert!(matches!(
            symplectize(&ConnectionCoeffs::flat(&c), &open),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn corrected_connection_is_symplectic() {
        let w = canonical(2);
        let c = w.chart().clone();
        let g = parse("x1*y2 + 0.3*x2^2").unwrap();
        let conn = ConnectionCoeffs::from_fn(&c, |k, j, i| match (k, j, i) {
            (0, 1, 1) => g.clone(),
            (2, 0, 3) | (2, 3, 0) => Expr::var("y1"),
            _ => Expr::zero(),
        })
        .unwrap();
        let pts = c.sample_points(DEFAULT_SEED);
        assert!(!nabla_omega(&conn, &w).unwrap().max_abs(&c, &pts).unwrap().within(1e-3));
        let s = symplectize(&conn, &w).unwrap();
        assert!(nabla_omega(&s, &w).unwrap().max_abs(&c, &pts).unwrap().within(1e-12));
        assert!(s.symmetry_residual(&pts).unwrap().within(1e-12));
        // a second pass changes nothing
        let again = symplectic_correction(&s, &w).unwrap().total();
        assert!(again.max_abs(&c, &pts).unwrap().within(1e-12));
    }

    #[test]
    fn correction_parts_compatibility() {
        let w = canonical(2);
        let c = w.chart().clone();
        let conn = ConnectionCoeffs::from_fn(&c, |k, j, i| match (k, j, i) {
            (1, 0, 0) => parse("x2*y1").unwrap(),
            (3, 2, 1) | (3, 1, 2) => Expr::var("x1"),
            _ => Expr::zero(),
        })
        .unwrap();
        let pts = c.sample_points(DEFAULT_SEED);
        let a = symplectic_correction(&conn, &w).unwrap();
        assert!(skew_compatibility_residual(&w, &a.sixth, &pts).unwrap().within(1e-12));
        // the full correction instead balances ∇°ω
        assert!(!skew_compatibility_residual(&w, &a.total(), &pts).unwrap().within(1e-3));
    }

    #[test]
    fn non_constant_form() {
        let c = Chart::uniform(vec!["p", "q"], -1.0, 1.0).unwrap();
        let w = TwoFormField::symplectic(&c, |_, _| parse("2 + p").unwrap()).unwrap();
        let flat = ConnectionCoeffs::flat(&c);
        let s = symplectize(&flat, &w).unwrap();
        let pts = c.sample_points(DEFAULT_SEED);
        assert!(nabla_omega(&s, &w).unwrap().max_abs(&c, &pts).unwrap().within(1e-12));
        assert!(s.symmetry_residual(&pts).unwrap().within(1e-12));
    }
}
