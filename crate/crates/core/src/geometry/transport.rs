//! Parallel transport by fixed-step classical RK4 on
//! `v̇^k = −Γ^k_{ji}(x(t)) v^j ẋ^i`.

use crate::error::{Error, Result};

use super::{ConnectionCoeffs, PathSpec, VectorFieldExpr};

pub const DEFAULT_STEPS: usize = 1000;

fn rhs(conn: &ConnectionCoeffs, path: &PathSpec, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    let x = path.position(t)?;
    let xdot = path.velocity(t)?;
    let gamma = conn.eval_at(&x)?;
    Ok(conn.contract_at(&gamma, &xdot, v).into_iter().map(|c| -c).collect())
}

fn axpy(v: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    v.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn rk4_step(conn: &ConnectionCoeffs, path: &PathSpec, t: f64, h: f64, v: &[f64]) -> Result<Vec<f64>> {
    let k1 = rhs(conn, path, t, v)?;
    let k2 = rhs(conn, path, t + 0.5 * h, &axpy(v, 0.5 * h, &k1))?;
    let k3 = rhs(conn, path, t + 0.5 * h, &axpy(v, 0.5 * h, &k2))?;
    let k4 = rhs(conn, path, t + h, &axpy(v, h, &k3))?;
    Ok((0..v.len())
        .map(|m| v[m] + h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]))
        .collect())
}

fn validate(conn: &ConnectionCoeffs, path: &PathSpec, v0: &[f64], steps: usize) -> Result<()> {
    conn.chart().ensure_same(&path.chart, "parallel transport")?;
    if v0.len() != conn.dim() {
        return Err(Error::Shape(format!(
            "initial vector has {} components, chart dimension is {}",
            v0.len(),
            conn.dim()
        )));
    }
    if steps == 0 {
        return Err(Error::Degenerate("transport needs at least one step".into()));
    }
    Ok(())
}

/// Transport `v0` from `x(t_from)` to `x(t_to)`; `t_to < t_from` runs the
/// path backwards.
pub fn transport_between(
    conn: &ConnectionCoeffs,
    path: &PathSpec,
    v0: &[f64],
    t_from: f64,
    t_to: f64,
    steps: usize,
) -> Result<Vec<f64>> {
    validate(conn, path, v0, steps)?;
    let mut v = v0.to_vec();
    if t_from == t_to || conn.is_flat() {
        return Ok(v);
    }
    let h = (t_to - t_from) / steps as f64;
    for s in 0..steps {
        v = rk4_step(conn, path, t_from + s as f64 * h, h, &v)?;
    }
    Ok(v)
}

/// Transport along the whole path, `t0 → t1`.
pub fn parallel_transport(
    conn: &ConnectionCoeffs,
    path: &PathSpec,
    v0: &[f64],
    steps: usize,
) -> Result<Vec<f64>> {
    transport_between(conn, path, v0, path.t0, path.t1, steps)
}

/// The transported vector after every step, starting with `(t0, v0)`.
pub fn transport_trajectory(
    conn: &ConnectionCoeffs,
    path: &PathSpec,
    v0: &[f64],
    steps: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    validate(conn, path, v0, steps)?;
    let h = (path.t1 - path.t0) / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut v = v0.to_vec();
    out.push((path.t0, v.clone()));
    for s in 0..steps {
        let t = path.t0 + s as f64 * h;
        v = rk4_step(conn, path, t, h, &v)?;
        out.push((t + h, v.clone()));
    }
    Ok(out)
}

/// Finite-difference covariant derivative from parallel transport:
/// with `f(t) = τ_t→0 Y(x(t))`, returns the second-order one-sided
/// difference `(−3 f(0) + 4 f(h) − f(2h)) / 2h` at the path start, which
/// approximates `(∇_{ẋ(0)} Y)(x(0))`.
pub fn covariant_derivative_via_transport(
    conn: &ConnectionCoeffs,
    y: &VectorFieldExpr,
    path: &PathSpec,
    t_step: f64,
) -> Result<Vec<f64>> {
    conn.chart().ensure_same(&y.chart, "transported field")?;
    if !(t_step > 0.0) {
        return Err(Error::Degenerate("t-step must be positive".into()));
    }
    let t0 = path.t0;
    let pulled_back = |t: f64| -> Result<Vec<f64>> {
        let yt = y.eval(&path.position(t)?)?;
        transport_between(conn, path, &yt, t, t0, DEFAULT_STEPS)
    };
    let f0 = y.eval(&path.position(t0)?)?;
    let f1 = pulled_back(t0 + t_step)?;
    let f2 = pulled_back(t0 + 2.0 * t_step)?;
    Ok((0..conn.dim())
        .map(|k| (-3.0 * f0[k] + 4.0 * f1[k] - f2[k]) / (2.0 * t_step))
        .collect())
}
