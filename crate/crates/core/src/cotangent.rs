//! Cotangent bundles of coordinate charts: tautological and canonical
//! forms, the horizontal frame of a base connection, lifted connections and
//! lifted actions with their moment maps.

use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::geometry::{
    frame_to_coordinate_connection, max_abs_over, Chart, ConnectionCoeffs, ExprTensor, FrameField,
    VectorFieldExpr,
};
use crate::sampling::{Residual, DEFAULT_SEED};
use crate::symplectic::{symplectize, TwoFormField};

/// Default sampling interval for the fiber coordinates.
pub const DEFAULT_FIBER_DOMAIN: (f64, f64) = (-2.0, 2.0);

/// `T*U` for a base chart `U` with coordinates `x^1..x^n`: the total chart
/// has coordinates `(x^1..x^n, y1..yn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentChart {
    base: Chart,
    total: Chart,
}

impl CotangentChart {
    pub fn new(base: &Chart) -> Result<Self> {
        CotangentChart::with_fiber_domain(base, vec![DEFAULT_FIBER_DOMAIN; base.dim()])
    }

    pub fn with_fiber_domain(base: &Chart, fiber: Vec<(f64, f64)>) -> Result<Self> {
        let n = base.dim();
        if fiber.len() != n {
            return Err(Error::InvalidChart(format!(
                "fiber domain has {} intervals for {n} base coordinates",
                fiber.len()
            )));
        }
        let names: Vec<String> = base
            .coords()
            .iter()
            .cloned()
            .chain((1..=n).map(|i| format!("y{i}")))
            .collect();
        let domain = base.domain().iter().copied().chain(fiber).collect();
        // Chart::new rejects a base name that collides with a fiber name
        let total = Chart::new(names, domain)?;
        Ok(CotangentChart {
            base: base.clone(),
            total,
        })
    }

    pub fn base(&self) -> &Chart {
        &self.base
    }

    pub fn total(&self) -> &Chart {
        &self.total
    }

    pub fn n(&self) -> usize {
        self.base.dim()
    }

    /// Total-chart index of `y_i`.
    pub fn y_index(&self, i: usize) -> usize {
        self.n() + i
    }

    pub fn y(&self, i: usize) -> Expr {
        Expr::var(&self.total.coords()[self.n() + i])
    }
}

/// `λ = y_i dx^i`, as components on the total chart.
pub fn liouville_form(cc: &CotangentChart) -> Vec<Expr> {
    let n = cc.n();
    (0..2 * n).map(|m| if m < n { cc.y(m) } else { Expr::zero() }).collect()
}

/// `ω = dx^i ∧ dy_i = −dλ`.
pub fn canonical_symplectic_form(cc: &CotangentChart) -> TwoFormField {
    let n = cc.n();
    TwoFormField::symplectic(cc.total(), |i, j| if j == i + n { Expr::one() } else { Expr::zero() })
        .expect("canonical form is closed and nondegenerate")
}

fn on_total(cc: &CotangentChart, base_conn: &ConnectionCoeffs) -> Result<()> {
    base_conn.chart().ensure_same(cc.base(), "base connection")
}

/// `{X_1..X_n, ∂/∂y_1..∂/∂y_n}` with `X_i = ∂/∂x^i + Γ^s_{ik} y_s ∂/∂y_k`.
pub fn horizontal_frame(base_conn: &ConnectionCoeffs, cc: &CotangentChart) -> Result<FrameField> {
    on_total(cc, base_conn)?;
    let n = cc.n();
    let total = cc.total();
    let mut vectors = Vec::with_capacity(2 * n);
    for i in 0..n {
        let mut comps = vec![Expr::zero(); 2 * n];
        comps[i] = Expr::one();
        for k in 0..n {
            comps[n + k] = Expr::sum((0..n).map(|s| base_conn.get(s, i, k) * &cc.y(s)));
        }
        vectors.push(VectorFieldExpr::new(total, comps)?);
    }
    for k in 0..n {
        vectors.push(VectorFieldExpr::coordinate(total, n + k));
    }
    FrameField::new(total, vectors)
}

/// Frame coefficients `C^c_{ba}` (`∇_{E_a} E_b = C^c_{ba} E_c`) of the lifted
/// connection in the horizontal frame:
///
/// `∇_{X_i} X_j = Γ^k_{ji} X_k`, `∇_{X_i} ∂/∂y_j = −Γ^j_{ik} ∂/∂y_k`, and both
/// derivatives along `∂/∂y_i` vanish.
pub fn lifted_frame_coefficients(base_conn: &ConnectionCoeffs, cc: &CotangentChart) -> Result<ExprTensor> {
    on_total(cc, base_conn)?;
    let n = cc.n();
    Ok(ExprTensor::from_fn(2 * n, 3, |idx| {
        let (c, b, a) = (idx[0], idx[1], idx[2]);
        if a >= n {
            return Expr::zero();
        }
        match (c < n, b < n) {
            (true, true) => base_conn.get(c, b, a).clone(),
            (false, false) => -base_conn.get(b - n, a, c - n),
            _ => Expr::zero(),
        }
    }))
}

/// Coordinate Christoffels of the lift `∇^M` of a base connection.
pub fn lift_connection(base_conn: &ConnectionCoeffs, cc: &CotangentChart) -> Result<ConnectionCoeffs> {
    let frame = horizontal_frame(base_conn, cc)?;
    let coeffs = lifted_frame_coefficients(base_conn, cc)?;
    frame_to_coordinate_connection(&frame, &coeffs)
}

/// Lift, symmetrize, then correct against the canonical form.
pub fn build_affine_symplectic_connection(
    base_conn: &ConnectionCoeffs,
    cc: &CotangentChart,
) -> Result<ConnectionCoeffs> {
    let points = cc.base().sample_points(DEFAULT_SEED);
    let sym = base_conn.symmetry_residual(&points)?;
    if !sym.within(1e-10) {
        return Err(Error::Precondition {
            what: "base connection is torsionless".into(),
            residual: sym.max,
            point: sym.witness.unwrap_or_default(),
        });
    }
    let lifted = lift_connection(base_conn, cc)?;
    symplectize(&lifted.symmetric_part(), &canonical_symplectic_form(cc))
}

/// Infinitesimal generators on the base and their cotangent lifts.
#[derive(Debug, Clone)]
pub struct LinearLiftedAction {
    pub generators: Vec<VectorFieldExpr>,
    pub lifted: Vec<VectorFieldExpr>,
}

impl LinearLiftedAction {
    pub fn lie_algebra_dim(&self) -> usize {
        self.generators.len()
    }
}

/// Lift each generator `ξ^i ∂/∂x^i` to `ξ^i ∂/∂x^i − y_s ∂_k ξ^s ∂/∂y_k`.
pub fn lift_action(generators: &[VectorFieldExpr], cc: &CotangentChart) -> Result<LinearLiftedAction> {
    let n = cc.n();
    let coords = cc.base().coords();
    let cache = Differentiator::new();
    let mut lifted = Vec::with_capacity(generators.len());
    for g in generators {
        g.chart.ensure_same(cc.base(), "action generator")?;
        let mut comps: Vec<Expr> = g.components.clone();
        for k in 0..n {
            comps.push(-Expr::sum(
                (0..n).map(|s| &cc.y(s) * &cache.derivative(&g.components[s], &coords[k])),
            ));
        }
        lifted.push(VectorFieldExpr::new(cc.total(), comps)?);
    }
    Ok(LinearLiftedAction {
        generators: generators.to_vec(),
        lifted,
    })
}

/// `J_A = Σ_i A_P^i(x) y_i`, one component per generator.
pub fn moment_map_lift(action: &LinearLiftedAction, cc: &CotangentChart) -> Vec<Expr> {
    action
        .generators
        .iter()
        .map(|g| Expr::sum(g.components.iter().enumerate().map(|(i, xi)| xi * &cc.y(i))))
        .collect()
}

/// Generators of `x^a ↦ s x^a + t^a` (`a ≤ h`): the scaling field
/// `Σ_{a≤h} x^a ∂/∂x^a` followed by the translations `∂/∂x^a`.
pub fn affine_family_generators(base: &Chart, h: usize) -> Result<Vec<VectorFieldExpr>> {
    let n = base.dim();
    if h == 0 || h > n {
        return Err(Error::Shape(format!("need 1 ≤ h ≤ n = {n}, got h = {h}")));
    }
    let mut scaling = vec![Expr::zero(); n];
    for (a, slot) in scaling.iter_mut().enumerate().take(h) {
        *slot = Expr::var(&base.coords()[a]);
    }
    let mut out = vec![VectorFieldExpr::new(base, scaling)?];
    out.extend((0..h).map(|a| VectorFieldExpr::coordinate(base, a)));
    Ok(out)
}

/// `(L_V λ)_m = V^a ∂_a λ_m + λ_a ∂_m V^a`.
pub fn liouville_lie_derivative(cc: &CotangentChart, v: &VectorFieldExpr) -> Result<Vec<Expr>> {
    v.chart.ensure_same(cc.total(), "Lie derivative of λ")?;
    let lambda = liouville_form(cc);
    let coords = cc.total().coords();
    Ok((0..coords.len())
        .map(|m| {
            Expr::sum(coords.iter().enumerate().map(|(a, xa)| {
                &v.components[a] * &lambda[m].derivative(xa) + &lambda[a] * &v.components[a].derivative(&coords[m])
            }))
        })
        .collect())
}

/// Max of `|V^l ω_{lm} − ∂_m J|` over points and components.
pub fn hamiltonian_residual(
    omega: &TwoFormField,
    v: &VectorFieldExpr,
    j: &Expr,
    points: &[Vec<f64>],
) -> Result<Residual> {
    v.chart.ensure_same(omega.chart(), "Hamiltonian check")?;
    let coords = omega.chart().coords();
    let exprs: Vec<Expr> = (0..coords.len())
        .map(|m| {
            Expr::sum((0..coords.len()).map(|l| &v.components[l] * &omega.get(l, m))) - j.derivative(&coords[m])
        })
        .collect();
    max_abs_over(omega.chart(), &exprs, points)
}

/// Linear part of the lifted finite transformation with parameters
/// `(s, t)`: `x^a ↦ s x^a + t^a`, `y_a ↦ y_a / s` for `a ≤ h`.
pub fn affine_family_element(cc: &CotangentChart, h: usize, s: f64, t: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = cc.n();
    if h == 0 || h > n || t.len() != h || s == 0.0 {
        return Err(Error::Shape("group element needs s ≠ 0 and h translation parameters".into()));
    }
    let mut diag = vec![1.0; 2 * n];
    let mut shift = vec![0.0; 2 * n];
    for a in 0..h {
        diag[a] = s;
        diag[n + a] = 1.0 / s;
        shift[a] = t[a];
    }
    Ok((diag, shift))
}

/// For the diagonal affine map `Φ(p) = diag·p + shift`, max over points and
/// coordinate pairs of `|L Γ(p)(e_j, e_i) − Γ(Φ(p))(L e_j, L e_i)|`, which
/// vanishes iff `Φ` pushes `∇` to itself.
pub fn equivariance_residual(
    conn: &ConnectionCoeffs,
    diag: &[f64],
    shift: &[f64],
    points: &[Vec<f64>],
) -> Result<Residual> {
    let n = conn.dim();
    if diag.len() != n || shift.len() != n {
        return Err(Error::Shape("affine map dimension".into()));
    }
    let mut r = Residual::new();
    for p in points {
        let image: Vec<f64> = (0..n).map(|m| diag[m] * p[m] + shift[m]).collect();
        let g = conn.eval_at(p)?;
        let g_img = conn.eval_at(&image)?;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = diag[k] * g.get(&[k, j, i]);
                    let rhs = g_img.get(&[k, j, i]) * diag[j] * diag[i];
                    r.observe(lhs - rhs, p);
                }
            }
        }
    }
    Ok(r)
}
