//! Generic Riemannian diagnostics for a metric given only as a point
//! evaluator: finite-difference Christoffel symbols, curvature components,
//! and a Runge-Kutta geodesic integrator. Used as an independent route
//! against closed-form geodesics and flatness claims.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A Riemannian metric presented as a black-box evaluator.
pub trait MetricField {
    fn dim(&self) -> usize;
    /// Symmetric positive definite matrix at x.
    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>>;
}

pub const DEFAULT_METRIC_STEP: f64 = 1e-5;
pub const DEFAULT_CONNECTION_STEP: f64 = 1e-4;

fn metric_partial<M: MetricField + ?Sized>(
    field: &M,
    x: &[f64],
    dir: usize,
    h: f64,
) -> Result<DMatrix<f64>> {
    let mut fwd = x.to_vec();
    let mut bwd = x.to_vec();
    fwd[dir] += h;
    bwd[dir] -= h;
    Ok((field.metric(&fwd)? - field.metric(&bwd)?) / (2.0 * h))
}

/// Christoffel symbols of the second kind, out[i][(j, k)] = Γ^i_{jk},
/// metric derivatives by central differences of step h.
pub fn christoffels<M: MetricField + ?Sized>(
    field: &M,
    x: &[f64],
    h: f64,
) -> Result<Vec<DMatrix<f64>>> {
    let n = field.dim();
    if x.len() != n {
        return Err(Error::Dimension { expected: n, got: x.len() });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let g = field.metric(x)?;
    let g_inv = g
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMetric)?;
    let partials: Vec<DMatrix<f64>> = (0..n)
        .map(|d| metric_partial(field, x, d, h))
        .collect::<Result<_>>()?;
    let mut out = vec![DMatrix::zeros(n, n); n];
    for j in 0..n {
        for k in 0..n {
            for i in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += g_inv[(i, l)]
                        * (partials[j][(l, k)] + partials[k][(l, j)] - partials[l][(j, k)]);
                }
                out[i][(j, k)] = 0.5 * acc;
            }
        }
    }
    Ok(out)
}

/// Curvature components R^i_{jkl}, flattened [((i·n + j)·n + k)·n + l].
/// Connection derivatives use step h_conn on top of metric step h_metric.
pub fn riemann_tensor<M: MetricField + ?Sized>(
    field: &M,
    x: &[f64],
    h_metric: f64,
    h_conn: f64,
) -> Result<Vec<f64>> {
    let n = field.dim();
    let gamma = christoffels(field, x, h_metric)?;
    let mut gamma_partials = Vec::with_capacity(n);
    for d in 0..n {
        let mut fwd = x.to_vec();
        let mut bwd = x.to_vec();
        fwd[d] += h_conn;
        bwd[d] -= h_conn;
        let gf = christoffels(field, &fwd, h_metric)?;
        let gb = christoffels(field, &bwd, h_metric)?;
        let diff: Vec<DMatrix<f64>> = gf
            .into_iter()
            .zip(gb)
            .map(|(f, b)| (f - b) / (2.0 * h_conn))
            .collect();
        gamma_partials.push(diff);
    }
    let mut out = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut value = gamma_partials[k][i][(l, j)] - gamma_partials[l][i][(k, j)];
                    for m in 0..n {
                        value += gamma[i][(k, m)] * gamma[m][(l, j)]
                            - gamma[i][(l, m)] * gamma[m][(k, j)];
                    }
                    out[((i * n + j) * n + k) * n + l] = value;
                }
            }
        }
    }
    Ok(out)
}

pub fn riemann_max_abs<M: MetricField + ?Sized>(
    field: &M,
    x: &[f64],
    h_metric: f64,
    h_conn: f64,
) -> Result<f64> {
    Ok(riemann_tensor(field, x, h_metric, h_conn)?
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
}

fn acceleration<M: MetricField + ?Sized>(
    field: &M,
    x: &[f64],
    v: &[f64],
    h_metric: f64,
) -> Result<Vec<f64>> {
    let n = field.dim();
    let gamma = christoffels(field, x, h_metric)?;
    let mut a = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                acc -= gamma[i][(j, k)] * v[j] * v[k];
            }
        }
        a[i] = acc;
    }
    Ok(a)
}

/// Integrates the geodesic equation with classical RK4; returns all
/// steps + 1 states including the start.
pub fn integrate_geodesic<M: MetricField + ?Sized>(
    field: &M,
    start: &GeodesicState,
    t_end: f64,
    steps: usize,
    h_metric: f64,
) -> Result<Vec<GeodesicState>> {
    let n = field.dim();
    if start.position.len() != n || start.velocity.len() != n {
        return Err(Error::Dimension { expected: n, got: start.position.len() });
    }
    if steps == 0 {
        return Err(Error::Domain("geodesic integration needs at least one step".into()));
    }
    let dt = t_end / steps as f64;
    let mut path = Vec::with_capacity(steps + 1);
    let mut x = start.position.clone();
    let mut v = start.velocity.clone();
    path.push(start.clone());
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + s * q).collect()
    };
    for _ in 0..steps {
        let a1 = acceleration(field, &x, &v, h_metric)?;
        let x2 = add(&x, &v, dt / 2.0);
        let v2 = add(&v, &a1, dt / 2.0);
        let a2 = acceleration(field, &x2, &v2, h_metric)?;
        let x3 = add(&x, &v2, dt / 2.0);
        let v3 = add(&v, &a2, dt / 2.0);
        let a3 = acceleration(field, &x3, &v3, h_metric)?;
        let x4 = add(&x, &v3, dt);
        let v4 = add(&v, &a3, dt);
        let a4 = acceleration(field, &x4, &v4, h_metric)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            v[i] += dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        path.push(GeodesicState { position: x.clone(), velocity: v.clone() });
    }
    Ok(path)
}
