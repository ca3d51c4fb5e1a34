use crate::error::{Error, Result};
use crate::expr::{Differentiator, Expr};
use crate::linalg;
use crate::sampling::DEFAULT_SEED;

use super::tensor::ExprTensor;
use super::{Chart, ConnectionCoeffs, FrameField};

/// Re-express a connection in new coordinates.
///
/// `forward[c]` gives the new coordinate `u^c` as a function of the old
/// coordinates; `inverse[k]` gives the old `x^k` as a function of the new
/// ones, which are named by `new_chart`. The classical law is applied:
///
/// `Γ'^c_{ba} = ∂u^c/∂x^k (Γ^k_{ji} ∂x^j/∂u^b ∂x^i/∂u^a + ∂²x^k/∂u^a∂u^b)`,
/// with everything on the right evaluated at `x = inverse(u)`.
pub fn change_coordinates(
    conn: &ConnectionCoeffs,
    new_chart: &Chart,
    forward: &[Expr],
    inverse: &[Expr],
) -> Result<ConnectionCoeffs> {
    let old = conn.chart();
    let n = old.dim();
    if new_chart.dim() != n || forward.len() != n || inverse.len() != n {
        return Err(Error::Shape("coordinate change must preserve dimension".into()));
    }
    for e in forward {
        old.check_vars(e, "forward coordinate map")?;
    }
    for e in inverse {
        new_chart.check_vars(e, "inverse coordinate map")?;
    }
    let old_names = old.coords();
    let new_names = new_chart.coords();
    let pull = |e: &Expr| -> Expr {
        e.substitute(&|name| old.index_of(name).map(|k| inverse[k].clone()))
    };

    let samples = new_chart.sample_points(DEFAULT_SEED);
    // forward ∘ inverse must be the identity on the new chart
    let round_trip: Vec<Expr> = forward.iter().map(pull).collect();
    for p in &samples {
        for (c, e) in round_trip.iter().enumerate() {
            let r = new_chart.eval(e, p)? - p[c];
            if !(r.abs() <= 1e-10) {
                return Err(Error::Precondition {
                    what: "forward ∘ inverse = identity".into(),
                    residual: r.abs(),
                    point: p.clone(),
                });
            }
        }
    }

    let cache = Differentiator::new();
    // jac_inv[k][a] = ∂x^k/∂u^a, in new coordinates
    let jac_inv: Vec<Vec<Expr>> = (0..n)
        .map(|k| (0..n).map(|a| cache.derivative(&inverse[k], &new_names[a])).collect())
        .collect();
    // jac_fwd[c][k] = ∂u^c/∂x^k, pulled back to new coordinates
    let jac_fwd: Vec<Vec<Expr>> = (0..n)
        .map(|c| (0..n).map(|k| pull(&cache.derivative(&forward[c], &old_names[k]))).collect())
        .collect();
    for p in &samples {
        let m = nalgebra::DMatrix::from_fn(n, n, |r, c| new_chart.eval(&jac_inv[r][c], p).unwrap_or(f64::NAN));
        let det = linalg::determinant(&m);
        if !(det.abs() > 1e-10) {
            return Err(Error::Singular {
                what: "coordinate Jacobian".into(),
                point: p.clone(),
                det,
            });
        }
    }
    let gamma_old: Vec<Expr> = conn.gamma().entries().iter().map(pull).collect();
    let gamma_old = ExprTensor::from_vec(n, 3, gamma_old)?;

    ConnectionCoeffs::from_fn(new_chart, |c, b, a| {
        let mut total = Expr::zero();
        for k in 0..n {
            if jac_fwd[c][k].is_zero() {
                continue;
            }
            let mut inner = cache.derivative(&jac_inv[k][b], &new_names[a]);
            for j in 0..n {
                if jac_inv[j][b].is_zero() {
                    continue;
                }
                for i in 0..n {
                    let g = gamma_old.get(&[k, j, i]);
                    if g.is_zero() {
                        continue;
                    }
                    inner = inner + g * &jac_inv[j][b] * jac_inv[i][a].clone();
                }
            }
            total = total + &jac_fwd[c][k] * &inner;
        }
        total
    })
}

/// Coordinate Christoffels of the connection defined in a frame by
/// `∇_{E_a} E_b = C^c_{ba} E_c`, with `frame_coeffs[c][b][a] = C^c_{ba}`.
///
/// With `W = E^{-1}`:
/// `Γ^k_{ji} = W^b_j W^a_i (C^c_{ba} E^k_c − E^m_a ∂_m E^k_b)`.
pub fn frame_to_coordinate_connection(
    frame: &FrameField,
    frame_coeffs: &ExprTensor,
) -> Result<ConnectionCoeffs> {
    let chart = &frame.chart;
    let n = chart.dim();
    if frame_coeffs.dim() != n || frame_coeffs.order() != 3 {
        return Err(Error::Shape("frame coefficients must be dim³".into()));
    }
    let e = frame.matrix();
    let w = linalg::symbolic_inverse(&e).ok_or_else(|| Error::Singular {
        what: "frame matrix (structurally)".into(),
        point: chart.center(),
        det: 0.0,
    })?;
    let coords = chart.coords();
    let cache = Differentiator::new();
    // frame-indexed derivative term M^k_{ba} = C^c_{ba} E^k_c − E^m_a ∂_m E^k_b
    let m = ExprTensor::from_fn(n, 3, |idx| {
        let (k, b, a) = (idx[0], idx[1], idx[2]);
        let mut acc = Expr::zero();
        for c in 0..n {
            let coeff = frame_coeffs.get(&[c, b, a]);
            if !coeff.is_zero() {
                acc = acc + coeff * &e[k][c];
            }
        }
        for (mi, name) in coords.iter().enumerate() {
            if e[mi][a].is_zero() {
                continue;
            }
            let d = cache.derivative(&e[k][b], name);
            if !d.is_zero() {
                acc = acc - &e[mi][a] * &d;
            }
        }
        acc
    });
    ConnectionCoeffs::from_fn(chart, |k, j, i| {
        let mut acc = Expr::zero();
        for b in 0..n {
            if w[b][j].is_zero() {
                continue;
            }
            for a in 0..n {
                if w[a][i].is_zero() {
                    continue;
                }
                let term = m.get(&[k, b, a]);
                if term.is_zero() {
                    continue;
                }
                acc = acc + &w[b][j] * &w[a][i] * term.clone();
            }
        }
        acc
    })
}
