//! Presymplectic connections on adapted charts `(u^1..u^{2n}, z^1..z^p)`
//! whose characteristic distribution is spanned by the `∂/∂z`.

use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::geometry::{max_abs_over, Chart, ConnectionCoeffs, ExprTensor};
use crate::linalg;
use crate::report::{Check, CheckReport};
use crate::sampling::{Residual, DEFAULT_SEED};
use crate::symplectic::{
    nabla_omega, skew_compatibility_residual, transpose_inverse_on, FormKind, TwoFormField,
};

pub const KERNEL_TOL: f64 = 1e-9;
pub const COMPAT_TOL: f64 = 1e-8;
pub const IDENTITY_TOL: f64 = 1e-9;
pub const CURVATURE_TOL: f64 = 1e-8;
pub const PROJECTABLE_TOL: f64 = 1e-9;
pub const REDUCED_TOL: f64 = 1e-9;

/// A closed 2-form of constant rank `2n` on a `2n + p` dimensional adapted
/// chart; the last `p` coordinates span the kernel.
#[derive(Debug, Clone)]
pub struct PresymplecticStructure {
    omega: TwoFormField,
    n: usize,
    p: usize,
}

impl PresymplecticStructure {
    pub fn new(omega: TwoFormField, p: usize) -> Result<Self> {
        let dim = omega.dim();
        if p > dim || !(dim - p).is_multiple_of(2) {
            return Err(Error::Shape(format!(
                "{dim} coordinates cannot split as 2n + {p}"
            )));
        }
        let n = (dim - p) / 2;
        let points = omega.chart().sample_points(DEFAULT_SEED);
        let omega = match omega.kind() {
            FormKind::Presymplectic { rank } if rank == 2 * n => omega,
            _ => omega.into_presymplectic(2 * n, &points)?,
        };
        let ps = PresymplecticStructure { omega, n, p };
        for pt in &points {
            let kernel = ps.kernel_at(pt)?;
            let off: f64 = kernel
                .iter()
                .flat_map(|v| v[..2 * n].iter())
                .fold(0.0, |m, x| m.max(x.abs()));
            if !(off <= KERNEL_TOL) {
                return Err(Error::NotAdapted {
                    point: pt.clone(),
                    kernel,
                });
            }
        }
        let coords = ps.chart().coords();
        for a in 0..2 * n {
            for b in a + 1..2 * n {
                for z in 2 * n..dim {
                    let d = ps.omega.get(a, b).derivative(&coords[z]);
                    let r = max_abs_over(ps.chart(), &[d], &points)?;
                    if !r.within(KERNEL_TOL) {
                        return Err(Error::Precondition {
                            what: format!("ω independent of the leaf coordinate `{}`", coords[z]),
                            residual: r.max,
                            point: r.witness.unwrap_or_default(),
                        });
                    }
                }
            }
        }
        Ok(ps)
    }

    pub fn chart(&self) -> &Chart {
        self.omega.chart()
    }

    pub fn omega(&self) -> &TwoFormField {
        &self.omega
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.p
    }

    /// Orthonormal basis of the kernel of `[ω_ij(point)]`.
    pub fn kernel_at(&self, point: &[f64]) -> Result<Vec<Vec<f64>>> {
        characteristic_kernel_of(&self.omega, point)
    }
}

/// Kernel basis of a form at a point, no rank assumptions.
pub fn characteristic_kernel_of(omega: &TwoFormField, point: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(linalg::null_space(&omega.matrix_at(point)?, crate::symplectic::KERNEL_SV_TOL)
        .into_iter()
        .map(|v| v.iter().copied().collect())
        .collect())
}

/// Kernel basis, checked to have dimension `p`.
pub fn characteristic_kernel(ps: &PresymplecticStructure, point: &[f64]) -> Result<Vec<Vec<f64>>> {
    let k = ps.kernel_at(point)?;
    if k.len() != ps.p {
        return Err(Error::Rank {
            expected: 2 * ps.n,
            found: ps.dim() - k.len(),
            point: point.to_vec(),
        });
    }
    Ok(k)
}

/// `TM = S ⊕ I` by coordinate index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SplittingS {
    pub transverse: Vec<usize>,
    pub leaf: Vec<usize>,
}

impl SplittingS {
    /// `S = span{∂/∂u}`, `I = span{∂/∂z}`.
    pub fn adapted(ps: &PresymplecticStructure) -> Self {
        SplittingS {
            transverse: (0..2 * ps.n).collect(),
            leaf: (2 * ps.n..ps.dim()).collect(),
        }
    }

    pub fn new(ps: &PresymplecticStructure, transverse: Vec<usize>, leaf: Vec<usize>) -> Result<Self> {
        let mut all: Vec<usize> = transverse.iter().chain(&leaf).copied().collect();
        all.sort_unstable();
        if all != (0..ps.dim()).collect::<Vec<_>>() {
            return Err(Error::Shape("splitting indices must partition the coordinates".into()));
        }
        if leaf.len() != ps.p {
            return Err(Error::Shape(format!("leaf block must have {} indices", ps.p)));
        }
        for pt in ps.chart().sample_points(DEFAULT_SEED) {
            let m = ps.omega.matrix_at(&pt)?;
            let block = nalgebra::DMatrix::from_fn(transverse.len(), transverse.len(), |r, c| {
                m[(transverse[r], transverse[c])]
            });
            let det = linalg::determinant(&block);
            if !(det.abs() > 1e-10) {
                return Err(Error::Singular {
                    what: "ω restricted to S".into(),
                    point: pt,
                    det,
                });
            }
        }
        Ok(SplittingS { transverse, leaf })
    }

    fn is_s(&self, i: usize) -> bool {
        self.transverse.contains(&i)
    }
}

fn check_k(ps: &PresymplecticStructure, k: &ConnectionCoeffs) -> Result<()> {
    k.chart().ensure_same(ps.chart(), "auxiliary connection")?;
    let r = k.symmetry_residual(&ps.chart().sample_points(DEFAULT_SEED))?;
    if !r.within(1e-10) {
        return Err(Error::Precondition {
            what: "auxiliary connection is torsionless".into(),
            residual: r.max,
            point: r.witness.unwrap_or_default(),
        });
    }
    Ok(())
}

/// Coefficients of `D^S` on `S`-valued coordinate fields: zero along leaf
/// directions (coordinate brackets vanish), `pr_S ∘ K` along `S`. Entries
/// with a leaf field index or a leaf output index are zero.
pub fn bott_connection_s(ps: &PresymplecticStructure, s: &SplittingS, k: &ConnectionCoeffs) -> Result<ExprTensor> {
    check_k(ps, k)?;
    Ok(ExprTensor::from_fn(ps.dim(), 3, |idx| {
        let (c, b, i) = (idx[0], idx[1], idx[2]);
        if s.is_s(c) && s.is_s(b) && s.is_s(i) {
            k.get(c, b, i).clone()
        } else {
            Expr::zero()
        }
    }))
}

/// `D = D^S ⊕ D^I` with `D^I = pr_I ∘ K`.
pub fn assemble_d(ps: &PresymplecticStructure, s: &SplittingS, k: &ConnectionCoeffs) -> Result<ConnectionCoeffs> {
    let ds = bott_connection_s(ps, s, k)?;
    ConnectionCoeffs::from_fn(ps.chart(), |c, b, i| {
        if s.is_s(b) {
            ds.get(&[c, b, i]).clone()
        } else if !s.is_s(c) {
            k.get(c, b, i).clone()
        } else {
            Expr::zero()
        }
    })
}

/// Solve `ω(T(∂a, ∂b), ∂c) = rhs(a, b, c)` on `S`-triples for an `S`-valued
/// tensor vanishing on leaf arguments, stored like Christoffels.
fn solve_on_s(
    ps: &PresymplecticStructure,
    s: &SplittingS,
    rhs: impl Fn(usize, usize, usize) -> Expr,
) -> Result<ExprTensor> {
    let points = ps.chart().sample_points(DEFAULT_SEED);
    let w = transpose_inverse_on(&ps.omega, &s.transverse, &points)?;
    let pos = |i: usize| s.transverse.iter().position(|&t| t == i);
    Ok(ExprTensor::from_fn(ps.dim(), 3, |idx| {
        let (kk, b, a) = (idx[0], idx[1], idx[2]);
        match (pos(kk), pos(b), pos(a)) {
            (Some(kr), Some(_), Some(_)) => Expr::sum(
                s.transverse
                    .iter()
                    .enumerate()
                    .filter(|(lc, _)| !w[kr][*lc].is_zero())
                    .map(|(lc, &l)| &w[kr][lc] * &rhs(a, b, l)),
            ),
            _ => Expr::zero(),
        }
    }))
}

/// `ω(Θ(X', Y'), Z') = ½ (D_{X'} ω)(Y', Z')`, zero on leaf arguments.
pub fn theta_tensor(ps: &PresymplecticStructure, s: &SplittingS, d: &ConnectionCoeffs) -> Result<ExprTensor> {
    let nd = nabla_omega(d, &ps.omega)?;
    let half = Expr::constant(0.5);
    solve_on_s(ps, s, |a, b, c| &half * nd.get(&[b, c, a]))
}

/// `ω(A(X', Y'), Z') = ⅙ ((D_{Y'} ω)(X', Z') + (D_{Z'} ω)(X', Y'))`.
pub fn a_tensor(ps: &PresymplecticStructure, s: &SplittingS, d: &ConnectionCoeffs) -> Result<ExprTensor> {
    let nd = nabla_omega(d, &ps.omega)?;
    let sixth = Expr::constant(1.0 / 6.0);
    solve_on_s(ps, s, |a, b, c| &sixth * &(nd.get(&[a, c, b]) + nd.get(&[a, b, c])))
}

/// The pieces `D`, `Θ`, `A` and `∇ = D + Θ + A`.
#[derive(Debug, Clone)]
pub struct PresymplecticBuild {
    pub d: ConnectionCoeffs,
    pub theta: ExprTensor,
    pub a: ExprTensor,
    pub connection: ConnectionCoeffs,
}

pub fn build_presymplectic_parts(
    ps: &PresymplecticStructure,
    s: &SplittingS,
    k: &ConnectionCoeffs,
) -> Result<PresymplecticBuild> {
    let d = assemble_d(ps, s, k)?;
    let theta = theta_tensor(ps, s, &d)?;
    let a = a_tensor(ps, s, &d)?;
    let connection = d.plus(&theta)?.plus(&a)?;
    Ok(PresymplecticBuild {
        d,
        theta,
        a,
        connection,
    })
}

pub fn build_presymplectic_connection(
    ps: &PresymplecticStructure,
    s: &SplittingS,
    k: &ConnectionCoeffs,
) -> Result<ConnectionCoeffs> {
    Ok(build_presymplectic_parts(ps, s, k)?.connection)
}

/// `ω(T(∂i, ∂j), ∂l) = Σ_k T^k_{ij} ω_{kl}`, the part of the torsion seen
/// by `ω`; it vanishes iff the torsion is kernel-valued.
fn lowered_torsion(conn: &ConnectionCoeffs, omega: &TwoFormField) -> Vec<Expr> {
    let n = conn.dim();
    let t = conn.torsion_tensor();
    let mut out = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                out.push(Expr::sum((0..n).map(|k| t.get(&[k, i, j]) * &omega.get(k, l))));
            }
        }
    }
    out
}

pub fn kernel_torsion_check(conn: &ConnectionCoeffs, ps: &PresymplecticStructure, points: &[Vec<f64>]) -> Result<Check> {
    let r = max_abs_over(ps.chart(), &lowered_torsion(conn, &ps.omega), points)?;
    Ok(Check::from_residual("kernel_valued_torsion", r, COMPAT_TOL))
}

pub fn compatibility_check(conn: &ConnectionCoeffs, ps: &PresymplecticStructure, points: &[Vec<f64>]) -> Result<Check> {
    let r = nabla_omega(conn, &ps.omega)?.max_abs(ps.chart(), points)?;
    Ok(Check::from_residual("nabla_omega", r, COMPAT_TOL))
}

/// `Σ_cycl (D_X ω)(Y, Z) = 0` over all basis triples.
pub fn cyclic_identity_check(d: &ConnectionCoeffs, ps: &PresymplecticStructure, points: &[Vec<f64>]) -> Result<Check> {
    let nd = nabla_omega(d, &ps.omega)?;
    let n = ps.dim();
    let mut exprs = Vec::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                exprs.push(Expr::sum([nd.get(&[y, z, x]).clone(), nd.get(&[z, x, y]).clone(), nd.get(&[x, y, z]).clone()]));
            }
        }
    }
    Ok(Check::from_residual("cyclic_identity", max_abs_over(ps.chart(), &exprs, points)?, IDENTITY_TOL))
}

/// `ω(T_∇(X',Y'),Z') = ω(A(X',Y'),Z') − ω(A(Y',X'),Z') − ½(D_{Z'}ω)(X',Y')`
/// on `S`-triples.
pub fn torsion_decomposition_check(
    build: &PresymplecticBuild,
    ps: &PresymplecticStructure,
    s: &SplittingS,
    points: &[Vec<f64>],
) -> Result<Check> {
    let n = ps.dim();
    let omega = &ps.omega;
    let lowered_t = lowered_torsion(&build.connection, omega);
    let nd = nabla_omega(&build.d, omega)?;
    // ω(A(∂x, ∂y), ∂z) = Σ_k A^k(x, y) ω_kz with A[k][y][x]
    let low_a = |x: usize, y: usize, z: usize| Expr::sum((0..n).map(|k| build.a.get(&[k, y, x]) * &omega.get(k, z)));
    let half = Expr::constant(0.5);
    let mut exprs = Vec::new();
    for &x in &s.transverse {
        for &y in &s.transverse {
            for &z in &s.transverse {
                let rhs = low_a(x, y, z) - low_a(y, x, z) - &half * nd.get(&[x, y, z]);
                exprs.push(&lowered_t[(x * n + y) * n + z] - &rhs);
            }
        }
    }
    Ok(Check::from_residual(
        "torsion_decomposition",
        max_abs_over(ps.chart(), &exprs, points)?,
        IDENTITY_TOL,
    ))
}

/// `ω(A(X,Y),Z) + ω(Y,A(X,Z)) = 0`.
pub fn a_compatibility_check(
    build: &PresymplecticBuild,
    ps: &PresymplecticStructure,
    points: &[Vec<f64>],
) -> Result<Check> {
    Ok(Check::from_residual(
        "a_skew_compatible",
        skew_compatibility_residual(&ps.omega, &build.a, points)?,
        IDENTITY_TOL,
    ))
}

/// `ω(R(Z, X) Y, W)` for kernel directions `Z` and all basis `X, Y, W`.
pub fn curvature_condition_check(
    conn: &ConnectionCoeffs,
    ps: &PresymplecticStructure,
    points: &[Vec<f64>],
) -> Result<Check> {
    conn.chart().ensure_same(ps.chart(), "curvature condition")?;
    let n = ps.dim();
    let r = conn.curvature_tensor();
    let mut res = Residual::new();
    for p in points {
        res.observe(0.0, p);
        let rn = r.eval(ps.chart(), p)?;
        let wn = ps.omega.matrix_at(p)?;
        for z in ps.kernel_at(p)? {
            for x in 0..n {
                for y in 0..n {
                    // (R(Z, ∂x) ∂y)^l = Σ_i Z^i R[l][y][i][x]
                    let v: Vec<f64> = (0..n)
                        .map(|l| (0..n).map(|i| z[i] * rn.get(&[l, y, i, x])).sum())
                        .collect();
                    for wi in 0..n {
                        let val: f64 = (0..n).map(|l| v[l] * wn[(l, wi)]).sum();
                        res.observe(val, p);
                    }
                }
            }
        }
    }
    Ok(Check::from_residual("curvature_condition", res, CURVATURE_TOL))
}

/// For a connection with `∇ω = 0`, derivatives of kernel fields stay in the
/// kernel: `ω(∇_{∂i} ∂α, ·) = 0`.
pub fn kernel_parallel_check(conn: &ConnectionCoeffs, ps: &PresymplecticStructure, points: &[Vec<f64>]) -> Result<Check> {
    let n = ps.dim();
    let mut exprs = Vec::new();
    for alpha in 2 * ps.n..n {
        for i in 0..n {
            for l in 0..n {
                exprs.push(Expr::sum((0..n).map(|c| conn.get(c, alpha, i) * &ps.omega.get(c, l))));
            }
        }
    }
    Ok(Check::from_residual("kernel_parallel", max_abs_over(ps.chart(), &exprs, points)?, COMPAT_TOL))
}

/// Adaptedness (`∇_{∂z} ∂_j` has no transverse part) and leaf independence
/// of the transverse block `Γ^c_{ab}`.
pub fn projectability_check(
    conn: &ConnectionCoeffs,
    ps: &PresymplecticStructure,
    points: &[Vec<f64>],
) -> Result<CheckReport> {
    conn.chart().ensure_same(ps.chart(), "projectability")?;
    let n = ps.dim();
    let t = 2 * ps.n;
    let coords = ps.chart().coords();
    let mut adapted = Vec::new();
    for c in 0..t {
        for j in 0..n {
            for alpha in t..n {
                adapted.push(conn.get(c, j, alpha).clone());
            }
        }
    }
    let cache = Differentiator::new();
    let mut leaf_dep = Vec::new();
    for c in 0..t {
        for b in 0..t {
            for a in 0..t {
                for z in &coords[t..] {
                    let d = cache.derivative(conn.get(c, b, a), z);
                    if !d.is_zero() {
                        leaf_dep.push(d);
                    }
                }
            }
        }
    }
    let mut report = CheckReport::new();
    report.push(Check::from_residual(
        "adapted",
        max_abs_over(ps.chart(), &adapted, points)?,
        PROJECTABLE_TOL,
    ));
    let mut dep = max_abs_over(ps.chart(), &leaf_dep, points)?;
    if dep.witness.is_none() {
        dep.observe(0.0, &points.first().cloned().unwrap_or_default());
    }
    report.push(Check::from_residual("leaf_independent", dep, PROJECTABLE_TOL));
    Ok(report)
}

/// Everything checked about a build, at the given points.
pub fn build_report(
    build: &PresymplecticBuild,
    ps: &PresymplecticStructure,
    s: &SplittingS,
    points: &[Vec<f64>],
) -> Result<CheckReport> {
    let conn = &build.connection;
    let mut report = CheckReport::new();
    report.push(compatibility_check(conn, ps, points)?);
    report.push(kernel_torsion_check(conn, ps, points)?);
    report.push(a_compatibility_check(build, ps, points)?);
    report.push(cyclic_identity_check(&build.d, ps, points)?);
    report.push(torsion_decomposition_check(build, ps, s, points)?);
    report.push(kernel_parallel_check(conn, ps, points)?);
    report.push(curvature_condition_check(conn, ps, points)?);
    report.extend(projectability_check(conn, ps, points)?);
    Ok(report)
}

/// The reduced symplectic connection on the leaf space.
#[derive(Debug, Clone)]
pub struct ReducedPresymplectic {
    pub connection: ConnectionCoeffs,
    pub omega: TwoFormField,
    pub report: CheckReport,
}

/// `Γ'^c_{ab}(u) = Γ^c_{ab}(u, z_0)` with `z_0` the center of the leaf
/// coordinates, and `ω'` the transverse block of `ω`.
pub fn reduce_presymplectic(conn: &ConnectionCoeffs, ps: &PresymplecticStructure) -> Result<ReducedPresymplectic> {
    let points = ps.chart().sample_points(DEFAULT_SEED);
    let proj = projectability_check(conn, ps, &points)?;
    if let Some(bad) = proj.checks.iter().find(|c| !c.passed) {
        return Err(Error::Precondition {
            what: format!("connection is projectable ({})", bad.name),
            residual: bad.max_residual,
            point: bad.witness.clone().unwrap_or_default(),
        });
    }
    let t = 2 * ps.n;
    let chart = ps.chart();
    if t == 0 {
        return Err(Error::Degenerate("ω vanishes: the leaf space is a point".into()));
    }
    let center = chart.center();
    let leaf_value = |name: &str| -> Option<Expr> {
        let i = chart.index_of(name)?;
        (i >= t).then(|| Expr::constant(center[i]))
    };
    let q = Chart::new(chart.coords()[..t].to_vec(), chart.domain()[..t].to_vec())?;
    let qpoints = q.sample_points(DEFAULT_SEED);
    let omega = TwoFormField::from_fn(&q, |i, j| ps.omega.get(i, j).substitute(&leaf_value).simplified())?
        .into_symplectic(&qpoints)?;
    let connection = ConnectionCoeffs::from_fn(&q, |c, b, a| conn.get(c, b, a).substitute(&leaf_value).simplified())?;
    let mut report = proj;
    report.push(Check::from_residual(
        "reduced_torsion",
        connection.symmetry_residual(&qpoints)?,
        REDUCED_TOL,
    ));
    report.push(Check::from_residual(
        "reduced_nabla_omega",
        nabla_omega(&connection, &omega)?.max_abs(&q, &qpoints)?,
        REDUCED_TOL,
    ));
    Ok(ReducedPresymplectic {
        connection,
        omega,
        report,
    })
}
