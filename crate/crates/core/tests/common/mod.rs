//! Random scene generators and numeric oracles that do not go through the
//! library's symbolic formulas.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use symred::expr::Expr;
use symred::geometry::{Chart, ConnectionCoeffs};
use symred::symplectic::TwoFormField;

pub fn rng(seed: u64) -> ChaCha8Rng {
    symred::sampling::rng(seed)
}

/// All monomials of total degree ≤ `degree` in the given variables.
pub fn monomials(vars: &[&str], degree: u32) -> Vec<Expr> {
    let mut out = vec![Expr::one()];
    let mut frontier = vec![(Expr::one(), 0usize)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (m, start) in &frontier {
            for (k, v) in vars.iter().enumerate().skip(*start) {
                let e = if m.is_one() { Expr::var(v) } else { m * &Expr::var(v) };
                out.push(e.clone());
                next.push((e, k));
            }
        }
        frontier = next;
    }
    out
}

/// `Σ c_m m` with `c_m` uniform in `[-1, 1]`.
pub fn random_poly(rng: &mut ChaCha8Rng, vars: &[&str], degree: u32) -> Expr {
    let terms: Vec<Expr> = monomials(vars, degree)
        .into_iter()
        .map(|m| Expr::constant(round4(rng.gen_range(-1.0..=1.0))) * m)
        .collect();
    Expr::sum(terms).simplified()
}

/// Random polynomial together with the sum of its coefficient magnitudes,
/// a bound for its values on `[-1, 1]^k`.
pub fn random_poly_bounded(rng: &mut ChaCha8Rng, vars: &[&str], degree: u32) -> (Expr, f64) {
    let mut bound = 0.0;
    let terms: Vec<Expr> = monomials(vars, degree)
        .into_iter()
        .map(|m| {
            let c = round4(rng.gen_range(-1.0..=1.0));
            bound += f64::abs(c);
            Expr::constant(c) * m
        })
        .collect();
    (Expr::sum(terms).simplified(), bound)
}

// short decimals keep printed scenes readable
fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn random_symmetric_connection(chart: &Chart, rng: &mut ChaCha8Rng, degree: u32) -> ConnectionCoeffs {
    let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    let n = chart.dim();
    let mut table = vec![Expr::zero(); n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in j..n {
                let e = random_poly(rng, &names, degree);
                table[(k * n + j) * n + i] = e.clone();
                table[(k * n + i) * n + j] = e;
            }
        }
    }
    ConnectionCoeffs::from_fn(chart, |k, j, i| table[(k * n + j) * n + i].clone()).unwrap()
}

pub fn random_connection(chart: &Chart, rng: &mut ChaCha8Rng, degree: u32) -> ConnectionCoeffs {
    let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    ConnectionCoeffs::from_fn(chart, |_, _, _| random_poly(rng, &names, degree)).unwrap()
}

pub fn uniform_point(rng: &mut ChaCha8Rng, domain: &[(f64, f64)]) -> Vec<f64> {
    domain.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

pub const FD_STEP: f64 = 1e-5;

/// Central difference of `f` along coordinate `m`.
pub fn partial(f: impl Fn(&[f64]) -> f64, p: &[f64], m: usize) -> f64 {
    let mut a = p.to_vec();
    let mut b = p.to_vec();
    a[m] += FD_STEP;
    b[m] -= FD_STEP;
    (f(&a) - f(&b)) / (2.0 * FD_STEP)
}

/// Γ^k_{ji}(p) straight from the coefficient expressions.
pub fn gamma_at(conn: &ConnectionCoeffs, p: &[f64]) -> Vec<f64> {
    let n = conn.dim();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out[(k * n + j) * n + i] = conn.chart().eval(conn.get(k, j, i), p).unwrap();
            }
        }
    }
    out
}

/// `(∇_{∂k} ω)(∂i, ∂j)` at `p` stored at `(i * n + j) * n + k`, with `∂ω`
/// by central differences and the connection terms assembled by hand.
pub fn nabla_omega_entries_oracle(conn: &ConnectionCoeffs, omega: &TwoFormField, p: &[f64]) -> Vec<f64> {
    let n = conn.dim();
    let g = gamma_at(conn, p);
    let w = omega.matrix_at(p).unwrap();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut v = partial(|q| omega.matrix_at(q).unwrap()[(i, j)], p, k);
                for l in 0..n {
                    // ∇_{∂k} ∂i = Γ^l_{ik} ∂l
                    v -= g[(l * n + i) * n + k] * w[(l, j)];
                    v -= g[(l * n + j) * n + k] * w[(i, l)];
                }
                out[(i * n + j) * n + k] = v;
            }
        }
    }
    out
}

pub fn nabla_omega_oracle(conn: &ConnectionCoeffs, omega: &TwoFormField, p: &[f64]) -> f64 {
    nabla_omega_entries_oracle(conn, omega, p)
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

/// `max |Γ^k_{ji} − Γ^k_{ij}|` at `p`.
pub fn torsion_oracle(conn: &ConnectionCoeffs, p: &[f64]) -> f64 {
    let n = conn.dim();
    let g = gamma_at(conn, p);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((g[(k * n + j) * n + i] - g[(k * n + i) * n + j]).abs());
            }
        }
    }
    worst
}

/// `max_l |Σ_k T^k(∂i, ∂j) ω_{kl}|` at `p`: zero iff the torsion is
/// kernel-valued.
pub fn lowered_torsion_oracle(conn: &ConnectionCoeffs, omega: &TwoFormField, p: &[f64]) -> f64 {
    let n = conn.dim();
    let g = gamma_at(conn, p);
    let w = omega.matrix_at(p).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let v: f64 = (0..n)
                    .map(|k| (g[(k * n + j) * n + i] - g[(k * n + i) * n + j]) * w[(k, l)])
                    .sum();
                worst = worst.max(v.abs());
            }
        }
    }
    worst
}

/// Plain fixed-step RK4 for `v̇ = −Γ(x(t))(v, ẋ(t))`, independent of the
/// library integrator.
pub fn rk4_transport(
    conn: &ConnectionCoeffs,
    x: impl Fn(f64) -> Vec<f64>,
    xdot: impl Fn(f64) -> Vec<f64>,
    v0: &[f64],
    t0: f64,
    t1: f64,
    steps: usize,
) -> Vec<f64> {
    let n = v0.len();
    let f = |t: f64, v: &[f64]| -> Vec<f64> {
        let g = gamma_at(conn, &x(t));
        let d = xdot(t);
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for j in 0..n {
                    for i in 0..n {
                        s += g[(k * n + j) * n + i] * v[j] * d[i];
                    }
                }
                -s
            })
            .collect()
    };
    let h = (t1 - t0) / steps as f64;
    let mut v = v0.to_vec();
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &v);
        let v2: Vec<f64> = (0..n).map(|m| v[m] + 0.5 * h * k1[m]).collect();
        let k2 = f(t + 0.5 * h, &v2);
        let v3: Vec<f64> = (0..n).map(|m| v[m] + 0.5 * h * k2[m]).collect();
        let k3 = f(t + 0.5 * h, &v3);
        let v4: Vec<f64> = (0..n).map(|m| v[m] + h * k3[m]).collect();
        let k4 = f(t + h, &v4);
        for m in 0..n {
            v[m] += h / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }
    }
    v
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}
