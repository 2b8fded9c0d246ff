//! Built-in strictly convex potentials with closed-form derivatives, the
//! densities they pair with under det Hess(psi) = f, and seeded interior
//! samplers. Every sweep and command-line check runs over these fixtures.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::hessian::{Potential, Tensor3};

/// The potential families every check knows how to sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuiltinPotential {
    /// psi(x) = |x|^2 / 2 on R^dim. Density 1.
    Quadratic { dim: usize },
    /// Negative entropy sum_i eta_i log eta_i over distributions on `atoms`
    /// outcomes, in the chart (eta_1 .. eta_{atoms-1}) with eta_0 dependent.
    /// Density 1 / prod_i eta_i.
    SimplexEntropy { atoms: usize },
    /// log sum exp of natural parameters of a categorical distribution on
    /// `atoms` outcomes, gauge-fixed to theta_0 = 0. Density prod_i eta_i(theta).
    LogSumExp { atoms: usize },
    /// -log det X on positive definite symmetric size x size matrices, in
    /// upper-triangle coordinates (row-major). Density kappa det(X)^-(size+1)
    /// with kappa = 2^(size(size-1)/2).
    LogDet { size: usize },
}

impl BuiltinPotential {
    pub fn label(&self) -> String {
        match self {
            BuiltinPotential::Quadratic { dim } => format!("quadratic-{dim}"),
            BuiltinPotential::SimplexEntropy { atoms } => format!("entropy-{atoms}"),
            BuiltinPotential::LogSumExp { atoms } => format!("logsumexp-{atoms}"),
            BuiltinPotential::LogDet { size } => format!("logdet-{size}"),
        }
    }

    /// The fixed corpus the full sweep runs over.
    pub fn standard_corpus() -> Vec<BuiltinPotential> {
        let mut v = vec![BuiltinPotential::Quadratic { dim: 3 }];
        for atoms in 2..=6 {
            v.push(BuiltinPotential::SimplexEntropy { atoms });
        }
        for atoms in 2..=4 {
            v.push(BuiltinPotential::LogSumExp { atoms });
        }
        for size in 2..=3 {
            v.push(BuiltinPotential::LogDet { size });
        }
        v
    }

    /// Right-hand side f paired with the potential, positive on the domain.
    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinPotential::Quadratic { .. } => 1.0,
            BuiltinPotential::SimplexEntropy { .. } => {
                1.0 / full_simplex(x).iter().product::<f64>()
            }
            BuiltinPotential::LogSumExp { .. } => probabilities(x).iter().product(),
            BuiltinPotential::LogDet { size } => {
                let kappa = (1u64 << (size * (size - 1) / 2)) as f64;
                kappa * sym_from_coords(*size, x).determinant().powi(-(*size as i32 + 1))
            }
        }
    }

    /// Seeded interior point, far enough from the boundary for every stencil
    /// the sweeps use.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            BuiltinPotential::Quadratic { dim } => {
                DVector::from_fn(*dim, |_, _| rng.gen_range(-1.0..=1.0))
            }
            BuiltinPotential::SimplexEntropy { atoms } => {
                // exponential draws normalized to the simplex, then pulled
                // toward the barycenter so every coordinate clears `margin`
                let margin = (0.8 / *atoms as f64).min(0.12);
                let draws: Vec<f64> = (0..*atoms)
                    .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                    .collect();
                let total: f64 = draws.iter().sum();
                let scale = 1.0 - *atoms as f64 * margin;
                DVector::from_fn(atoms - 1, |i, _| margin + scale * draws[i + 1] / total)
            }
            BuiltinPotential::LogSumExp { atoms } => {
                DVector::from_fn(atoms - 1, |_, _| rng.gen_range(-2.0..=2.0))
            }
            BuiltinPotential::LogDet { size } => {
                let n = *size;
                let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
                let q = m.qr().q();
                let lambda = DVector::from_fn(n, |_, _| rng.gen_range(0.5..=2.0));
                let x = &q * DMatrix::from_diagonal(&lambda) * q.transpose();
                let x = (&x + x.transpose()) * 0.5;
                coords_from_sym(&x)
            }
        }
    }
}

impl Potential for BuiltinPotential {
    fn dim(&self) -> usize {
        match self {
            BuiltinPotential::Quadratic { dim } => *dim,
            BuiltinPotential::SimplexEntropy { atoms } => atoms - 1,
            BuiltinPotential::LogSumExp { atoms } => atoms - 1,
            BuiltinPotential::LogDet { size } => size * (size + 1) / 2,
        }
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        if !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        match self {
            BuiltinPotential::Quadratic { .. } | BuiltinPotential::LogSumExp { .. } => true,
            BuiltinPotential::SimplexEntropy { .. } => {
                x.iter().all(|&v| v > 0.0) && x.iter().sum::<f64>() < 1.0
            }
            BuiltinPotential::LogDet { size } => {
                sym_from_coords(*size, x).cholesky().is_some()
            }
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BuiltinPotential::Quadratic { .. } => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            BuiltinPotential::SimplexEntropy { .. } => {
                full_simplex(x).iter().map(|&e| e * e.ln()).sum()
            }
            BuiltinPotential::LogSumExp { .. } => {
                let m = x.iter().fold(0.0f64, |m, &v| m.max(v));
                m + ((-m).exp() + x.iter().map(|&v| (v - m).exp()).sum::<f64>()).ln()
            }
            BuiltinPotential::LogDet { size } => match sym_from_coords(*size, x).cholesky() {
                Some(chol) => -2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
                None => f64::NAN,
            },
        }
    }

    fn gradient_closed(&self, x: &[f64]) -> Option<DVector<f64>> {
        match self {
            BuiltinPotential::Quadratic { .. } => Some(DVector::from_column_slice(x)),
            BuiltinPotential::SimplexEntropy { .. } => {
                let eta = full_simplex(x);
                Some(DVector::from_fn(x.len(), |i, _| {
                    (eta[i + 1] / eta[0]).ln()
                }))
            }
            BuiltinPotential::LogSumExp { .. } => {
                let eta = probabilities(x);
                Some(DVector::from_fn(x.len(), |i, _| eta[i + 1]))
            }
            BuiltinPotential::LogDet { size } => {
                let inv = sym_from_coords(*size, x).cholesky()?.inverse();
                Some(DVector::from_fn(self.dim(), |alpha, _| {
                    let (i, j) = triu_pair(*size, alpha);
                    if i == j {
                        -inv[(i, i)]
                    } else {
                        -2.0 * inv[(i, j)]
                    }
                }))
            }
        }
    }

    fn hessian_closed(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        match self {
            BuiltinPotential::Quadratic { dim } => Some(DMatrix::identity(*dim, *dim)),
            BuiltinPotential::SimplexEntropy { .. } => {
                let eta = full_simplex(x);
                Some(DMatrix::from_fn(x.len(), x.len(), |i, j| {
                    let diag = if i == j { 1.0 / eta[i + 1] } else { 0.0 };
                    diag + 1.0 / eta[0]
                }))
            }
            BuiltinPotential::LogSumExp { .. } => {
                let eta = probabilities(x);
                Some(DMatrix::from_fn(x.len(), x.len(), |i, j| {
                    let diag = if i == j { eta[i + 1] } else { 0.0 };
                    diag - eta[i + 1] * eta[j + 1]
                }))
            }
            BuiltinPotential::LogDet { size } => {
                let slots = basis_slots(*size, x)?;
                Some(DMatrix::from_fn(self.dim(), self.dim(), |a, b| {
                    (&slots[a] * &slots[b]).trace()
                }))
            }
        }
    }

    fn third_closed(&self, x: &[f64]) -> Option<Tensor3> {
        match self {
            BuiltinPotential::Quadratic { dim } => Some(Tensor3::zeros(*dim)),
            BuiltinPotential::SimplexEntropy { .. } => {
                let eta = full_simplex(x);
                let base = 1.0 / (eta[0] * eta[0]);
                Some(Tensor3::from_fn(x.len(), |i, j, k| {
                    let diag = if i == j && j == k {
                        -1.0 / (eta[i + 1] * eta[i + 1])
                    } else {
                        0.0
                    };
                    diag + base
                }))
            }
            BuiltinPotential::LogSumExp { .. } => {
                let eta = probabilities(x);
                Some(Tensor3::from_fn(x.len(), |i, j, k| {
                    let (ei, ej, ek) = (eta[i + 1], eta[j + 1], eta[k + 1]);
                    let mut v = 2.0 * ei * ej * ek;
                    if i == j && j == k {
                        v += ei;
                    }
                    if i == j {
                        v -= ei * ek;
                    }
                    if i == k {
                        v -= ei * ej;
                    }
                    if j == k {
                        v -= ei * ej;
                    }
                    v
                }))
            }
            BuiltinPotential::LogDet { size } => {
                let slots = basis_slots(*size, x)?;
                Some(Tensor3::from_fn(self.dim(), |a, b, c| {
                    -((&slots[c] * &slots[b] * &slots[a]).trace()
                        + (&slots[b] * &slots[c] * &slots[a]).trace())
                }))
            }
        }
    }
}

/// All `atoms` simplex coordinates (eta_0, eta_1, ..) from the chart.
fn full_simplex(x: &[f64]) -> Vec<f64> {
    let mut eta = Vec::with_capacity(x.len() + 1);
    eta.push(1.0 - x.iter().sum::<f64>());
    eta.extend_from_slice(x);
    eta
}

/// Categorical probabilities (eta_0, eta_1, ..) of gauge-fixed natural
/// parameters, eta_0 belonging to the frozen theta_0 = 0.
fn probabilities(theta: &[f64]) -> Vec<f64> {
    let m = theta.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut w: Vec<f64> = Vec::with_capacity(theta.len() + 1);
    w.push((-m).exp());
    w.extend(theta.iter().map(|&v| (v - m).exp()));
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    w
}

/// Upper-triangle coordinate index -> matrix position, row-major.
fn triu_pair(n: usize, alpha: usize) -> (usize, usize) {
    let mut k = alpha;
    for i in 0..n {
        let row = n - i;
        if k < row {
            return (i, i + k);
        }
        k -= row;
    }
    unreachable!("coordinate index out of range")
}

pub(crate) fn sym_from_coords(n: usize, x: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = x[k];
            m[(j, i)] = x[k];
            k += 1;
        }
    }
    m
}

pub(crate) fn coords_from_sym(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    DVector::from_vec(out)
}

/// X^-1 E_alpha for every basis direction E of the symmetric matrices,
/// E_ii the single unit and E_ij (i < j) the symmetric pair.
fn basis_slots(n: usize, x: &[f64]) -> Option<Vec<DMatrix<f64>>> {
    let inv = sym_from_coords(n, x).cholesky()?.inverse();
    let dim = n * (n + 1) / 2;
    let mut slots = Vec::with_capacity(dim);
    for alpha in 0..dim {
        let (i, j) = triu_pair(n, alpha);
        let mut e = DMatrix::zeros(n, n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        slots.push(&inv * e);
    }
    Some(slots)
}
