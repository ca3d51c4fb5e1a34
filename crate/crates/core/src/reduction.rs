//! Reduction by the scaling–translation family `x^a ↦ s x^a + t^a` on
//! `T*R^n`: level sets, noncriticality, self-parallelism, the orbit
//! quotient and the reduced connection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::cotangent::{
    affine_family_generators, canonical_symplectic_form, lift_action, moment_map_lift, CotangentChart,
};
use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::geometry::{transport_trajectory, Chart, ConnectionCoeffs, PathSpec};
use crate::linalg;
use crate::report::{Bound, Check, CheckReport};
use crate::sampling::{self, Residual, DEFAULT_SAMPLE_COUNT, DEFAULT_SEED};
use crate::symplectic::{nabla_omega, TwoFormField};

pub const SELF_PARALLEL_TOL: f64 = 1e-9;
pub const TANGENCY_TOL: f64 = 1e-6;
pub const INVARIANCE_TOL: f64 = 1e-8;
pub const WELL_DEFINED_TOL: f64 = 1e-8;
pub const REDUCED_TOL: f64 = 1e-9;
pub const NONCRITICAL_SV_TOL: f64 = 1e-8;
/// Points sampled along each orbit for the well-definedness probe.
pub const ORBIT_SAMPLES: usize = 5;

/// `{p : N p = c}` inside a chart.
#[derive(Debug, Clone)]
pub struct AffineSubspace {
    pub ambient: Chart,
    pub constraints: DMatrix<f64>,
    pub values: DVector<f64>,
}

impl AffineSubspace {
    pub fn new(ambient: &Chart, constraints: DMatrix<f64>, values: DVector<f64>) -> Result<Self> {
        if constraints.ncols() != ambient.dim() || constraints.nrows() != values.len() {
            return Err(Error::Shape("constraint matrix does not match the chart".into()));
        }
        let sv = linalg::singular_values(&constraints);
        if let Some(&smallest) = sv.last() {
            if constraints.nrows() > constraints.ncols() || !(smallest > 1e-10) {
                return Err(Error::Degenerate(format!(
                    "constraints are not independent (smallest singular value {smallest:e})"
                )));
            }
        }
        Ok(AffineSubspace {
            ambient: ambient.clone(),
            constraints,
            values,
        })
    }

    /// The whole chart, no constraints.
    pub fn whole(ambient: &Chart) -> Self {
        AffineSubspace {
            ambient: ambient.clone(),
            constraints: DMatrix::zeros(0, ambient.dim()),
            values: DVector::zeros(0),
        }
    }

    pub fn codim(&self) -> usize {
        self.constraints.nrows()
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim() - self.codim()
    }

    /// Orthonormal tangent basis, reproducible across runs.
    pub fn tangent_basis(&self) -> Vec<Vec<f64>> {
        if self.codim() == 0 {
            return (0..self.ambient.dim())
                .map(|i| (0..self.ambient.dim()).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
        }
        linalg::null_space(&self.constraints, 1e-10)
            .into_iter()
            .map(|v| v.iter().copied().collect())
            .collect()
    }

    /// `N v`.
    pub fn normal_part(&self, v: &[f64]) -> Vec<f64> {
        (&self.constraints * DVector::from_column_slice(v)).iter().copied().collect()
    }

    /// `N p − c`.
    pub fn constraint_residual(&self, p: &[f64]) -> Vec<f64> {
        (&self.constraints * DVector::from_column_slice(p) - &self.values).iter().copied().collect()
    }

    /// Orthogonal projection of a point onto the subspace.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        if self.codim() == 0 {
            return p.to_vec();
        }
        let n = &self.constraints;
        let gram = n * n.transpose();
        let r = DVector::from_vec(self.constraint_residual(p));
        let lambda = linalg::inverse(&gram).expect("independent constraints") * r;
        (DVector::from_column_slice(p) - n.transpose() * lambda).iter().copied().collect()
    }

    /// The projection of the chart center followed by seeded points
    /// `p0 + T s`, `s` uniform in a box of half the smallest domain radius.
    pub fn sample_points(&self, seed: u64, count: usize) -> Vec<Vec<f64>> {
        let p0 = self.project(&self.ambient.center());
        let basis = self.tangent_basis();
        let radius = self
            .ambient
            .domain()
            .iter()
            .map(|(lo, hi)| 0.25 * (hi - lo))
            .fold(f64::INFINITY, f64::min);
        let mut rng = sampling::rng(seed);
        let mut out = vec![p0.clone()];
        while out.len() < count.max(1) {
            let mut p = p0.clone();
            for b in &basis {
                let s: f64 = rng.gen_range(-radius..=radius);
                for (pi, bi) in p.iter_mut().zip(b) {
                    *pi += s * bi;
                }
            }
            out.push(p);
        }
        out
    }
}

/// The action `x^a ↦ s x^a + t^a` (`a ≤ h`) lifted to `T*R^n`, with a target
/// value `ξ = (ξ_0, ξ_1..ξ_h)` of its moment map.
#[derive(Debug, Clone)]
pub struct ScalingTranslationScene {
    pub cc: CotangentChart,
    pub h: usize,
    pub xi: Vec<f64>,
}

impl ScalingTranslationScene {
    /// Base chart `x1..xn` on `[-1, 1]^n`.
    pub fn new(n: usize, h: usize, xi: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("n must be positive".into()));
        }
        let base = Chart::uniform((1..=n).map(|i| format!("x{i}")).collect(), -1.0, 1.0)?;
        ScalingTranslationScene::with_chart(CotangentChart::new(&base)?, h, xi)
    }

    pub fn with_chart(cc: CotangentChart, h: usize, xi: Vec<f64>) -> Result<Self> {
        let n = cc.n();
        if h == 0 || h > n {
            return Err(Error::Shape(format!("need 1 ≤ h ≤ n = {n}, got h = {h}")));
        }
        if xi.len() != h + 1 {
            return Err(Error::Shape(format!("ξ needs {} components, got {}", h + 1, xi.len())));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("ξ must be finite".into()));
        }
        Ok(ScalingTranslationScene { cc, h, xi })
    }

    pub fn n(&self) -> usize {
        self.cc.n()
    }

    pub fn total(&self) -> &Chart {
        self.cc.total()
    }

    /// `|(ξ_1..ξ_h)|²`.
    fn xi_norm2(&self) -> f64 {
        self.xi[1..].iter().map(|v| v * v).sum()
    }
}

/// `J = (Σ_{a≤h} x^a y_a, y_1, …, y_h)`.
pub fn scene_moment_map(scene: &ScalingTranslationScene) -> Result<Vec<Expr>> {
    let gens = affine_family_generators(scene.cc.base(), scene.h)?;
    let action = lift_action(&gens, &scene.cc)?;
    Ok(moment_map_lift(&action, &scene.cc))
}

/// The affine set `J = ξ`: `y_a = ξ_a` and `Σ ξ_a x^a = ξ_0`, without any
/// criticality check. The second constraint disappears when all `ξ_a`
/// vanish (then `ξ_0` must vanish too).
pub fn level_set_candidate(scene: &ScalingTranslationScene) -> Result<AffineSubspace> {
    let n = scene.n();
    let h = scene.h;
    let dim = 2 * n;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::new();
    for a in 0..h {
        let mut r = vec![0.0; dim];
        r[n + a] = 1.0;
        rows.push(r);
        values.push(scene.xi[a + 1]);
    }
    if scene.xi_norm2() > 0.0 {
        let mut r = vec![0.0; dim];
        r[..h].copy_from_slice(&scene.xi[1..]);
        rows.push(r);
        values.push(scene.xi[0]);
    } else if scene.xi[0] != 0.0 {
        return Err(Error::EmptyLevelSet(format!(
            "Σ x^a y_a = {} cannot hold where every y_a vanishes",
            scene.xi[0]
        )));
    }
    let m = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c]);
    AffineSubspace::new(scene.total(), m, DVector::from_vec(values))
}

/// Rank of `dJ` on sampled points of the subspace. `max_residual` carries
/// the smallest singular value seen, which must stay above the tolerance.
pub fn noncritical_check(
    j: &[Expr],
    xi: &[f64],
    subspace: &AffineSubspace,
    points: &[Vec<f64>],
) -> Result<Check> {
    let chart = &subspace.ambient;
    if j.len() != xi.len() {
        return Err(Error::Shape("moment map and ξ have different lengths".into()));
    }
    let mut on_set = Residual::new();
    for p in points {
        for (jj, x) in j.iter().zip(xi) {
            on_set.observe(chart.eval(jj, p)? - x, p);
        }
    }
    if !on_set.within(1e-10) {
        return Err(Error::Precondition {
            what: "subspace lies in J = ξ".into(),
            residual: on_set.max,
            point: on_set.witness.unwrap_or_default(),
        });
    }
    let coords = chart.coords();
    let cache = Differentiator::new();
    let jac: Vec<Vec<Expr>> = j
        .iter()
        .map(|jj| coords.iter().map(|c| cache.derivative(jj, c)).collect())
        .collect();
    let mut sigma_min = f64::INFINITY;
    let mut witness = None;
    if !j.is_empty() {
        for p in points {
            let mut m = DMatrix::zeros(j.len(), coords.len());
            for (r, row) in jac.iter().enumerate() {
                for (c, e) in row.iter().enumerate() {
                    m[(r, c)] = chart.eval(e, p)?;
                }
            }
            let s = if j.len() > coords.len() {
                0.0
            } else {
                *linalg::singular_values(&m).last().unwrap_or(&0.0)
            };
            if s < sigma_min || witness.is_none() {
                sigma_min = s;
                witness = Some(p.clone());
            }
        }
    }
    let passed = j.is_empty() || sigma_min > NONCRITICAL_SV_TOL;
    Ok(Check {
        name: "noncritical".into(),
        max_residual: if j.is_empty() { 0.0 } else { sigma_min },
        tolerance: NONCRITICAL_SV_TOL,
        witness,
        passed,
        detail: Some("smallest singular value of dJ; must exceed the tolerance".into()),
        bound: Bound::Lower,
    })
}

/// Level set of a noncritical value, of positive dimension.
pub fn scene_level_set(scene: &ScalingTranslationScene) -> Result<AffineSubspace> {
    let c = level_set_candidate(scene)?;
    let j = scene_moment_map(scene)?;
    let check = noncritical_check(&j, &scene.xi, &c, &c.sample_points(DEFAULT_SEED, DEFAULT_SAMPLE_COUNT))?;
    if !check.passed {
        return Err(Error::CriticalValue {
            point: check.witness.unwrap_or_default(),
            sigma_min: check.max_residual,
        });
    }
    if c.dim() == 0 {
        return Err(Error::Degenerate("the level set is a single point".into()));
    }
    Ok(c)
}

fn observe_normal(r: &mut Residual, c: &AffineSubspace, v: &[f64], p: &[f64]) {
    r.observe_all(c.normal_part(v), p);
}

/// `N · ∇_{T_a} T_b` on sampled points of `C`, for a tangent basis `T`
/// extended as constant fields.
pub fn self_parallel_check(conn: &ConnectionCoeffs, c: &AffineSubspace, points: &[Vec<f64>]) -> Result<Check> {
    conn.chart().ensure_same(&c.ambient, "self-parallel check")?;
    let basis = c.tangent_basis();
    let mut r = Residual::new();
    for p in points {
        if c.codim() == 0 {
            r.observe(0.0, p);
            continue;
        }
        let g = conn.eval_at(p)?;
        for ta in &basis {
            for tb in &basis {
                observe_normal(&mut r, c, &conn.contract_at(&g, ta, tb), p);
            }
        }
    }
    Ok(Check::from_residual("self_parallel", r, SELF_PARALLEL_TOL))
}

/// Transport `v0` along a path inside `C` and track `|N v(t)|`.
pub fn transport_tangency_check(
    conn: &ConnectionCoeffs,
    c: &AffineSubspace,
    path: &PathSpec,
    v0: &[f64],
    steps: usize,
) -> Result<Check> {
    conn.chart().ensure_same(&c.ambient, "tangency check")?;
    let start = path.position(path.t0)?;
    let tangent = c.normal_part(v0).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if !(tangent <= 1e-9) {
        return Err(Error::Precondition {
            what: "initial vector is tangent to C".into(),
            residual: tangent,
            point: start,
        });
    }
    let trajectory = transport_trajectory(conn, path, v0, steps)?;
    let mut r = Residual::new();
    for (t, v) in &trajectory {
        let x = path.position(*t)?;
        let off = c.constraint_residual(&x).iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        if !(off <= 1e-9) {
            return Err(Error::Precondition {
                what: "path lies in C".into(),
                residual: off,
                point: x,
            });
        }
        observe_normal(&mut r, c, v, &x);
    }
    Ok(Check::from_residual("transport_tangency", r, TANGENCY_TOL))
}

/// Orthonormal basis of `ker(ω|_{TC})`, the orbit directions of the
/// isotropy group of `ξ` on `C = J⁻¹(ξ)`.
pub fn orbit_directions(omega: &TwoFormField, c: &AffineSubspace, point: &[f64]) -> Result<Vec<Vec<f64>>> {
    let t = c.tangent_basis();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    let dim = c.ambient.dim();
    let tm = DMatrix::from_fn(dim, t.len(), |r, col| t[col][r]);
    let gram = tm.transpose() * omega.matrix_at(point)? * &tm;
    Ok(linalg::null_space(&gram, 1e-10)
        .into_iter()
        .map(|k| (&tm * k).iter().copied().collect())
        .collect())
}

/// The quotient `C / G_ξ` with coordinates `(x^u, y_u)`, `u > h`.
#[derive(Debug, Clone)]
pub struct QuotientChart {
    pub chart: Chart,
    /// Total-chart index of each quotient coordinate.
    pub embedding: Vec<usize>,
    pub omega: TwoFormField,
}

impl QuotientChart {
    /// Quotient coordinates of a point of `C`.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.embedding.iter().map(|&i| p[i]).collect()
    }
}

/// Quotient chart and reduced form for a noncritical level set.
pub fn scene_quotient(scene: &ScalingTranslationScene) -> Result<QuotientChart> {
    let n = scene.n();
    let h = scene.h;
    if n == h {
        return Err(Error::Degenerate(
            "n = h: the quotient is a point, nothing to reduce onto".into(),
        ));
    }
    let c = scene_level_set(scene)?;
    let omega = canonical_symplectic_form(&scene.cc);
    let orbits = orbit_directions(&omega, &c, &c.project(&scene.total().center()))?;
    if orbits.len() + 1 != h || c.dim() != 2 * n - h - 1 {
        return Err(Error::Degenerate(format!(
            "expected a level set of dimension {} with {}-dimensional orbits, found {} and {}",
            2 * n - h - 1,
            h - 1,
            c.dim(),
            orbits.len()
        )));
    }
    // the orbits move the x^a only, so (x^u, y_u) are coordinates on C / G_ξ
    for o in &orbits {
        if o[h..].iter().any(|v| v.abs() > 1e-10) {
            return Err(Error::Degenerate("orbit directions leave the x^a block".into()));
        }
    }
    let total = scene.total();
    let embedding: Vec<usize> = (h..n).chain(n + h..2 * n).collect();
    let names: Vec<String> = embedding.iter().map(|&i| total.coords()[i].clone()).collect();
    let domain = embedding.iter().map(|&i| total.domain()[i]).collect();
    let chart = Chart::new(names, domain)?;
    let m = n - h;
    let omega = TwoFormField::symplectic(&chart, |i, j| if j == i + m { Expr::one() } else { Expr::zero() })?;
    Ok(QuotientChart {
        chart,
        embedding,
        omega,
    })
}

/// Reduced connection with the checks run on the way.
#[derive(Debug, Clone)]
pub struct ReducedConnection {
    pub quotient: QuotientChart,
    pub connection: ConnectionCoeffs,
    pub report: CheckReport,
}

/// `Γ'` from `π_*(∇_X Y)` for the constant lifts of the quotient
/// coordinate fields, evaluated on the section `x^a = ξ_0 ξ_a / |ξ|²`,
/// `y_a = ξ_a`.
pub fn reduce_connection(conn: &ConnectionCoeffs, scene: &ScalingTranslationScene) -> Result<ReducedConnection> {
    conn.chart().ensure_same(scene.total(), "reduction")?;
    let quotient = scene_quotient(scene)?;
    let c = scene_level_set(scene)?;
    let points = c.sample_points(DEFAULT_SEED, DEFAULT_SAMPLE_COUNT);
    let mut report = CheckReport::new();

    let sp = self_parallel_check(conn, &c, &points)?;
    if !sp.passed {
        return Err(Error::Precondition {
            what: "level set is self-parallel".into(),
            residual: sp.max_residual,
            point: sp.witness.unwrap_or_default(),
        });
    }
    report.push(sp);

    let gens = affine_family_generators(scene.cc.base(), scene.h)?;
    let action = lift_action(&gens, &scene.cc)?;
    let total_points = scene.total().sample_points(DEFAULT_SEED);
    let mut inv = Residual::new();
    for v in &action.lifted {
        inv.merge(conn.lie_derivative(v)?.max_abs(scene.total(), &total_points)?);
    }
    if !inv.within(INVARIANCE_TOL) {
        return Err(Error::Precondition {
            what: "connection is invariant under the action".into(),
            residual: inv.max,
            point: inv.witness.unwrap_or_default(),
        });
    }
    report.push(Check::from_residual("action_invariance", inv, INVARIANCE_TOL));

    let n = scene.n();
    let h = scene.h;
    let norm2 = scene.xi_norm2();
    let section = |name: &str| -> Option<Expr> {
        let idx = scene.total().index_of(name)?;
        if idx < h {
            Some(Expr::constant(scene.xi[0] * scene.xi[idx + 1] / norm2))
        } else if (n..n + h).contains(&idx) {
            Some(Expr::constant(scene.xi[idx - n + 1]))
        } else {
            None
        }
    };
    let emb = &quotient.embedding;
    let reduced = ConnectionCoeffs::from_fn(&quotient.chart, |cc, b, a| {
        conn.get(emb[cc], emb[b], emb[a]).substitute(&section).simplified()
    })?;

    // well-definedness: Γ' must not vary along the orbits
    let omega = canonical_symplectic_form(&scene.cc);
    let orbits = orbit_directions(&omega, &c, &points[0])?;
    let mut rng = sampling::rng(DEFAULT_SEED ^ 0x0AB1);
    let mut wd = Residual::new();
    let m = emb.len();
    for p in &points {
        let q = quotient.project(p);
        let g_red = reduced.eval_at(&q)?;
        for _ in 0..ORBIT_SAMPLES {
            let mut x = p.clone();
            for o in &orbits {
                let s: f64 = rng.gen_range(-1.0..=1.0);
                for (xi, oi) in x.iter_mut().zip(o) {
                    *xi += s * oi;
                }
            }
            let g = conn.eval_at(&x)?;
            for cc in 0..m {
                for b in 0..m {
                    for a in 0..m {
                        wd.observe(g.get(&[emb[cc], emb[b], emb[a]]) - g_red.get(&[cc, b, a]), &x);
                    }
                }
            }
        }
    }
    if !wd.within(WELL_DEFINED_TOL) {
        return Err(Error::WellDefinedness {
            deviation: wd.max,
            point: wd.witness.unwrap_or_default(),
        });
    }
    report.push(Check::from_residual("well_defined", wd, WELL_DEFINED_TOL));

    let qpts = quotient.chart.sample_points(DEFAULT_SEED);
    report.push(Check::from_residual(
        "reduced_torsion",
        reduced.symmetry_residual(&qpts)?,
        REDUCED_TOL,
    ));
    report.push(Check::from_residual(
        "reduced_nabla_omega",
        nabla_omega(&reduced, &quotient.omega)?.max_abs(&quotient.chart, &qpts)?,
        REDUCED_TOL,
    ));
    Ok(ReducedConnection {
        quotient,
        connection: reduced,
        report,
    })
}

fn orthogonal_to(span: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for o in span {
        let d: f64 = o.iter().zip(v).map(|(a, b)| a * b).sum();
        for (x, oi) in out.iter_mut().zip(o) {
            *x -= d * oi;
        }
    }
    out
}

/// For orbit directions `Z` and tangent fields `X` of `C` (constant
/// extensions), both `∇_X Z` and `∇_Z X` must lie in the orbit span.
pub fn orbit_parallelism_check(
    conn: &ConnectionCoeffs,
    c: &AffineSubspace,
    orbits: &[Vec<f64>],
    points: &[Vec<f64>],
) -> Result<Check> {
    let tangent = c.tangent_basis();
    let mut r = Residual::new();
    for p in points {
        r.observe(0.0, p);
        let g = conn.eval_at(p)?;
        for z in orbits {
            for x in &tangent {
                r.observe_all(orthogonal_to(orbits, &conn.contract_at(&g, x, z)), p);
                r.observe_all(orthogonal_to(orbits, &conn.contract_at(&g, z, x)), p);
            }
        }
    }
    Ok(Check::from_residual("orbit_parallel", r, REDUCED_TOL))
}

/// Change of the quotient components of `∇_X Y` when the constant lifts
/// `X`, `Y` are shifted by orbit directions.
pub fn lift_independence_check(
    conn: &ConnectionCoeffs,
    quotient: &QuotientChart,
    orbits: &[Vec<f64>],
    points: &[Vec<f64>],
) -> Result<Check> {
    let dim = conn.dim();
    let emb = &quotient.embedding;
    let unit = |i: usize| -> Vec<f64> { (0..dim).map(|m| if m == i { 1.0 } else { 0.0 }).collect() };
    let shift = |v: &[f64], z: &[f64], s: f64| -> Vec<f64> { v.iter().zip(z).map(|(a, b)| a + s * b).collect() };
    let mut r = Residual::new();
    for p in points {
        r.observe(0.0, p);
        let g = conn.eval_at(p)?;
        for &a in emb {
            for &b in emb {
                let (x, y) = (unit(a), unit(b));
                let base = quotient.project(&conn.contract_at(&g, &x, &y));
                for (zi, z) in orbits.iter().enumerate() {
                    let z2 = &orbits[(zi + 1) % orbits.len()];
                    let moved = conn.contract_at(&g, &shift(&x, z, 1.0), &shift(&y, z2, -0.5));
                    let moved = quotient.project(&moved);
                    r.observe_all(base.iter().zip(&moved).map(|(u, v)| u - v), p);
                }
            }
        }
    }
    Ok(Check::from_residual("lift_independent", r, REDUCED_TOL))
}
