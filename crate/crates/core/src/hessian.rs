//! Hessian structures of strictly convex potentials: the metric g = Hess(psi),
//! the totally symmetric third-derivative tensor A, the commutative product it
//! induces, and the max-norm residuals (Monge-Ampere defect, metric/product
//! compatibility, WDVV associativity) used to certify them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Strictly convex function on an open domain. Closed-form derivatives are
/// optional; when absent, callers fall back to central differences.
pub trait Potential {
    fn dim(&self) -> usize;

    /// True iff `x` lies in the open set where `eval` is finite and smooth.
    fn in_domain(&self, x: &[f64]) -> bool;

    /// Only called on points passing `in_domain`.
    fn eval(&self, x: &[f64]) -> f64;

    fn gradient_closed(&self, _x: &[f64]) -> Option<DVector<f64>> {
        None
    }

    fn hessian_closed(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn third_closed(&self, _x: &[f64]) -> Option<Tensor3> {
        None
    }
}

/// Symmetric positive definite matrix g_ij. Symmetry is enforced at
/// construction; definiteness is checked where the metric is produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    entries: DMatrix<f64>,
}

impl Metric {
    /// Stores (M + M^T)/2. Rejects non-square input.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension {
                expected: entries.nrows(),
                got: entries.ncols(),
            });
        }
        let sym = (&entries + entries.transpose()) * 0.5;
        Ok(Metric { entries: sym })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn det(&self) -> f64 {
        self.entries.determinant()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.entries.clone().cholesky().is_some()
    }

    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.entries
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMetric)
    }
}

/// Cubical dim^3 array T_abc indexed (a, b, c).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    entries: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Tensor3 {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    t.set(a, b, c, f(a, b, c));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim);
        (a * self.dim + b) * self.dim + c
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let i = self.idx(a, b, c);
        self.entries[i] = v;
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |T_abc - T_{sigma(abc)}| over all index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in 0..self.dim {
                for c in 0..self.dim {
                    let v = self[(a, b, c)];
                    for w in [
                        self[(a, c, b)],
                        self[(b, a, c)],
                        self[(b, c, a)],
                        self[(c, a, b)],
                        self[(c, b, a)],
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Average over the six index permutations.
    pub fn symmetrized(&self) -> Tensor3 {
        Tensor3::from_fn(self.dim, |a, b, c| {
            (self[(a, b, c)]
                + self[(a, c, b)]
                + self[(b, a, c)]
                + self[(b, c, a)]
                + self[(c, a, b)]
                + self[(c, b, a)])
                / 6.0
        })
    }
}

impl std::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.entries[self.idx(a, b, c)]
    }
}

/// Structure constants m_ab^c of a commutative product in a fixed basis,
/// upper index last.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicationTable {
    dim: usize,
    entries: Vec<f64>,
}

impl MultiplicationTable {
    pub fn zeros(dim: usize) -> Self {
        MultiplicationTable {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = MultiplicationTable::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    let i = t.idx(a, b, c);
                    t.entries[i] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        debug_assert!(a < self.dim && b < self.dim && c < self.dim);
        (a * self.dim + b) * self.dim + c
    }

    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let i = self.idx(a, b, c);
        self.entries[i] = v;
    }

    /// Product of coordinate vectors in the table's basis:
    /// (x o y)_c = sum_ab m_ab^c x_a y_b.
    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        DVector::from_fn(self.dim, |c, _| {
            let mut s = 0.0;
            for a in 0..self.dim {
                for b in 0..self.dim {
                    s += self[(a, b, c)] * x[a] * y[b];
                }
            }
            s
        })
    }
}

impl std::ops::Index<(usize, usize, usize)> for MultiplicationTable {
    type Output = f64;

    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.entries[self.idx(a, b, c)]
    }
}

/// Default step for second-derivative stencils.
pub fn default_step(x: &[f64]) -> f64 {
    1e-4 * norm_scale(x)
}

/// Base step for the extrapolated third-derivative stencil. Wider than the
/// second-derivative step: the nested stencil divides by h^3, so roundoff
/// dominates sooner.
pub fn default_third_step(x: &[f64]) -> f64 {
    2e-3 * norm_scale(x)
}

fn norm_scale(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
}

fn check_step(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("step size must be positive, got {h}")))
    }
}

fn eval_at<P: Potential + ?Sized>(p: &P, x: &[f64]) -> Result<f64> {
    if x.len() != p.dim() {
        return Err(Error::Dimension {
            expected: p.dim(),
            got: x.len(),
        });
    }
    if !p.in_domain(x) {
        return Err(Error::Domain(format!("point left the domain: {x:?}")));
    }
    let v = p.eval(x);
    if !v.is_finite() {
        return Err(Error::Domain(format!("potential not finite at {x:?}")));
    }
    Ok(v)
}

fn eval_shift<P: Potential + ?Sized>(p: &P, x: &[f64], shifts: &[(usize, f64)]) -> Result<f64> {
    let mut y = x.to_vec();
    for &(i, dv) in shifts {
        y[i] += dv;
    }
    eval_at(p, &y)
}

fn fd_hessian<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let d = x.len();
    let f0 = eval_at(p, x)?;
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let fp = eval_shift(p, x, &[(i, h)])?;
        let fm = eval_shift(p, x, &[(i, -h)])?;
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in (i + 1)..d {
            let fpp = eval_shift(p, x, &[(i, h), (j, h)])?;
            let fpm = eval_shift(p, x, &[(i, h), (j, -h)])?;
            let fmp = eval_shift(p, x, &[(i, -h), (j, h)])?;
            let fmm = eval_shift(p, x, &[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    Ok(hess)
}

fn metric_from(hess: DMatrix<f64>) -> Result<Metric> {
    let m = Metric::new(hess)?;
    if !m.is_positive_definite() {
        return Err(Error::Convexity(
            "Hessian has a non-positive eigenvalue".into(),
        ));
    }
    Ok(m)
}

/// Hessian of `p` at `x` as a metric: closed form when the potential provides
/// one, otherwise central differences with step `h`. Symmetrized either way.
pub fn hessian_metric<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<Metric> {
    eval_at(p, x)?;
    if let Some(hess) = p.hessian_closed(x) {
        return metric_from(hess);
    }
    hessian_metric_fd(p, x, h)
}

/// Always central differences, even when a closed form exists. This is the
/// independent route used to cross-check closed-form derivatives.
pub fn hessian_metric_fd<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<Metric> {
    check_step(h)?;
    metric_from(fd_hessian(p, x, h)?)
}

/// Differenced third-derivative tensor before and after symmetrization.
#[derive(Debug, Clone)]
pub struct FdThird {
    /// Fully symmetrized tensor.
    pub tensor: Tensor3,
    /// Max asymmetry of the raw differenced array over index permutations,
    /// relative to max(1, largest entry). Measures stencil noise.
    pub symmetry_defect: f64,
}

/// Third derivatives of `p` at `x`: closed form when provided, otherwise the
/// extrapolated stencil of `third_tensor_fd`.
pub fn third_tensor<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<Tensor3> {
    eval_at(p, x)?;
    if let Some(t) = p.third_closed(x) {
        return Ok(t);
    }
    Ok(third_tensor_fd(p, x, h)?.tensor)
}

/// Third derivatives by nested central differences at steps h and h/2,
/// combined as (4 T(h/2) - T(h))/3. The extrapolation cancels the h^2
/// truncation term, which plain nested differencing cannot push below ~1e-4
/// relative error at double precision.
pub fn third_tensor_fd<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<FdThird> {
    check_step(h)?;
    let coarse = nested_third(p, x, h)?;
    let fine = nested_third(p, x, h / 2.0)?;
    let d = p.dim();
    let raw = Tensor3::from_fn(d, |a, b, c| {
        (4.0 * fine[(a, b, c)] - coarse[(a, b, c)]) / 3.0
    });
    let defect = raw.symmetry_defect() / raw.max_abs().max(1.0);
    Ok(FdThird {
        tensor: raw.symmetrized(),
        symmetry_defect: defect,
    })
}

fn nested_third<P: Potential + ?Sized>(p: &P, x: &[f64], h: f64) -> Result<Tensor3> {
    let d = x.len();
    let mut out = Tensor3::zeros(d);
    for a in 0..d {
        let hp = shifted_hessian(p, x, a, h)?;
        let hm = shifted_hessian(p, x, a, -h)?;
        for b in 0..d {
            for c in 0..d {
                out.set(a, b, c, (hp[(b, c)] - hm[(b, c)]) / (2.0 * h));
            }
        }
    }
    Ok(out)
}

fn shifted_hessian<P: Potential + ?Sized>(
    p: &P,
    x: &[f64],
    a: usize,
    dv: f64,
) -> Result<DMatrix<f64>> {
    let mut y = x.to_vec();
    y[a] += dv;
    fd_hessian(p, &y, dv.abs())
}

/// det Hess(psi) - f at x. Zero certifies psi as a solution of the
/// Monge-Ampere equation with right-hand side f.
pub fn ma_residual<P, F>(p: &P, x: &[f64], f: F) -> Result<f64>
where
    P: Potential + ?Sized,
    F: Fn(&[f64]) -> f64,
{
    let rhs = f(x);
    if !(rhs > 0.0) {
        return Err(Error::Domain(format!(
            "right-hand side must be positive, got {rhs}"
        )));
    }
    let g = hessian_metric(p, x, default_step(x))?;
    Ok(g.det() - rhs)
}

fn check_dims(expected: usize, got: usize) -> Result<usize> {
    if expected == got {
        Ok(expected)
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// Gamma_ab^c = (1/2) sum_e g^{ce} A_abe, the Levi-Civita symbols of a
/// Hessian metric in flat coordinates.
pub fn christoffel(g: &Metric, a: &Tensor3) -> Result<Tensor3> {
    let d = check_dims(g.dim(), a.dim())?;
    let ginv = g.inverse()?;
    Ok(Tensor3::from_fn(d, |i, j, c| {
        0.5 * (0..d).map(|e| ginv[(c, e)] * a[(i, j, e)]).sum::<f64>()
    }))
}

/// m_ab^c = sum_e A_abe g^{ec}. No 1/2: relative to the Levi-Civita symbols
/// the factor is absorbed by rescaling the potential.
pub fn structure_constants(g: &Metric, a: &Tensor3) -> Result<MultiplicationTable> {
    let d = check_dims(g.dim(), a.dim())?;
    let ginv = g.inverse()?;
    Ok(MultiplicationTable::from_fn(d, |i, j, c| {
        (0..d).map(|e| a[(i, j, e)] * ginv[(e, c)]).sum::<f64>()
    }))
}

/// How far (g, A, m) is from a compatible triple:
/// max |sum_e m_ab^e g_ec - A_abc| plus the cyclic defect max |A_abc - A_bca|.
/// Zero iff lowering the table's upper index recovers A and A is cyclic.
pub fn compatibility_residual(g: &Metric, a: &Tensor3, m: &MultiplicationTable) -> Result<f64> {
    let d = check_dims(g.dim(), a.dim())?;
    check_dims(d, m.dim())?;
    let ge = g.entries();
    let mut lowering = 0.0f64;
    let mut cyclic = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for c in 0..d {
                let lowered: f64 = (0..d).map(|e| m[(i, j, e)] * ge[(e, c)]).sum();
                lowering = lowering.max((lowered - a[(i, j, c)]).abs());
                cyclic = cyclic.max((a[(i, j, c)] - a[(j, c, i)]).abs());
            }
        }
    }
    Ok(lowering + cyclic)
}

/// Max associator entry max_abcd |sum_e (m_ab^e m_ec^d - m_bc^e m_ae^d)|.
/// Zero iff the product is associative (the WDVV equations).
pub fn wdvv_residual(m: &MultiplicationTable) -> f64 {
    let d = m.dim();
    let mut worst = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for dd in 0..d {
                    let mut s = 0.0;
                    for e in 0..d {
                        s += m[(a, b, e)] * m[(e, c, dd)] - m[(b, c, e)] * m[(a, e, dd)];
                    }
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    worst
}
