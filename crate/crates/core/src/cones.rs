//! Symmetric cones of positive definite matrices with the log-det potential:
//! membership, metric, Monge-Ampere verification against the scaling law,
//! closed-form geodesics, Jordan and trace structures, the diagonal Cartan
//! algebra checks, and the cone-to-torus handoff.

use nalgebra::{Cholesky, Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hessian::{
    self, compatibility_residual, wdvv_residual, Metric, MultiplicationTable, Potential, Tensor3,
};
use crate::potentials::{self, BuiltinPotential};
use crate::riemann::{self, MetricField};
use crate::syz::TorusFiber;

type C64 = Complex<f64>;

const HERMITIAN_TOL: f64 = 1e-12;

fn entry_scale(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(1.0f64, |acc, v| acc.max(v.norm()))
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().fold(0.0f64, |acc, v| acc.max(v.norm()))
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn check_hermitian(m: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * entry_scale(m) {
        return Err(Error::NotSymmetric(format!(
            "Hermitian defect {defect:.3e} above tolerance"
        )));
    }
    Ok(hermitize(m))
}

/// Complex Cholesky happily factors indefinite Hermitian matrices
/// (sqrt(-1) exists there), so definiteness must come from the spectrum.
fn is_positive_definite(m: &DMatrix<C64>) -> bool {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().all(|&l| l > 0.0)
}

/// True when the (Hermitian) matrix is positive definite.
pub fn in_cone(m: &DMatrix<C64>) -> Result<bool> {
    Ok(is_positive_definite(&check_hermitian(m)?))
}

/// Interior point of the cone of positive definite Hermitian matrices.
/// Construction is the membership gate; functions taking a ConePoint are
/// total on it.
#[derive(Debug, Clone)]
pub struct ConePoint {
    x: DMatrix<C64>,
}

impl ConePoint {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let h = check_hermitian(&m)?;
        if !is_positive_definite(&h) {
            return Err(Error::NotInCone(
                "matrix is not positive definite".into(),
            ));
        }
        Ok(ConePoint { x: h })
    }

    pub fn from_real(m: DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|v| C64::new(v, 0.0)))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Real part, rejecting genuinely complex points.
    pub fn real_part(&self) -> Result<DMatrix<f64>> {
        let worst = self.x.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
        if worst > HERMITIAN_TOL * entry_scale(&self.x) {
            return Err(Error::Domain(
                "operation is defined for the real cone only".into(),
            ));
        }
        Ok(self.x.map(|v| v.re))
    }

    /// Determinant, real and positive on the cone.
    pub fn det(&self) -> f64 {
        Cholesky::new(self.x.clone())
            .expect("cone points are positive definite")
            .determinant()
    }
}

/// -log det X, the potential whose Hessian metric the rest of the module
/// measures against.
pub fn koszul_potential(x: &ConePoint) -> f64 {
    -x.det().ln()
}

/// g_X(V, W) = Re Tr(X^-1 V X^-1 W).
pub fn cone_metric(x: &ConePoint, v: &DMatrix<C64>, w: &DMatrix<C64>) -> Result<f64> {
    let n = x.dim();
    let v = check_tangent(n, v)?;
    let w = check_tangent(n, w)?;
    let inv = x
        .matrix()
        .clone()
        .try_inverse()
        .expect("cone points are invertible");
    Ok(((&inv * v) * (&inv * w)).trace().re)
}

fn check_tangent(n: usize, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if v.nrows() != n || v.ncols() != n {
        return Err(Error::Dimension { expected: n, got: v.nrows().max(v.ncols()) });
    }
    check_hermitian(v)
}

/// Finite-difference determinant of Hess(-log det) in the n(n+1)/2 real
/// matrix coordinates, next to the closed target kappa_n det(X)^-(n+1),
/// kappa_n = 2^(n(n-1)/2). Real cone only.
pub fn cone_ma_check(x: &ConePoint) -> Result<(f64, f64)> {
    let real = x.real_part()?;
    let n = x.dim();
    let coords = potentials::coords_from_sym(&real);
    let pot = BuiltinPotential::LogDet { size: n };
    let h = hessian::default_step(coords.as_slice());
    let det_hess = hessian::hessian_metric_fd(&pot, coords.as_slice(), h)?.det();
    let kappa = 2f64.powi((n * (n - 1) / 2) as i32);
    let target = kappa * x.det().powi(-(n as i32 + 1));
    Ok((det_hess, target))
}

fn rescale_eigen(eig: &SymmetricEigen<C64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| C64::new(f(l), 0.0)));
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Closed-form geodesic X^1/2 exp(t X^-1/2 V X^-1/2) X^1/2 of the cone
/// metric, through symmetric eigendecompositions so the result stays
/// Hermitian to machine precision.
pub fn geodesic(x: &ConePoint, v: &DMatrix<C64>, t: f64) -> Result<ConePoint> {
    let v = check_tangent(x.dim(), v)?;
    let eig = SymmetricEigen::new(x.matrix().clone());
    let sqrt = rescale_eigen(&eig, f64::sqrt);
    let inv_sqrt = rescale_eigen(&eig, |l| 1.0 / l.sqrt());
    let mid = hermitize(&(&inv_sqrt * v * &inv_sqrt));
    let mid_eig = SymmetricEigen::new(mid);
    let moved = rescale_eigen(&mid_eig, |l| (t * l).exp());
    ConePoint::new(hermitize(&(&sqrt * moved * &sqrt)))
}

/// Jordan product (XY + YX)/2.
pub fn jordan_product(x: &DMatrix<C64>, y: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() || x.nrows() != x.ncols() {
        return Err(Error::Dimension { expected: x.nrows(), got: y.nrows() });
    }
    Ok((x * y + y * x) * C64::new(0.5, 0.0))
}

/// The invariant bilinear form Re Tr(XY).
pub fn trace_form(x: &DMatrix<C64>, y: &DMatrix<C64>) -> Result<f64> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() || x.nrows() != x.ncols() {
        return Err(Error::Dimension { expected: x.nrows(), got: y.nrows() });
    }
    Ok((x * y).trace().re)
}

/// Positive diagonal with unit determinant, a point of the Cartan torus.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanTorusPoint {
    diag: Vec<f64>,
}

impl CartanTorusPoint {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if diag.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Domain("torus entries must be positive".into()));
        }
        let det: f64 = diag.iter().product();
        if (det - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("determinant {det} must be 1")));
        }
        Ok(CartanTorusPoint { diag })
    }

    /// Chart by the first n-1 logarithms; the last entry balances the
    /// determinant exactly.
    pub fn from_log(u: &[f64]) -> Self {
        let sum: f64 = u.iter().sum();
        let mut diag: Vec<f64> = u.iter().map(|&v| v.exp()).collect();
        diag.push((-sum).exp());
        CartanTorusPoint { diag }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_cone(&self) -> ConePoint {
        ConePoint::from_real(DMatrix::from_diagonal(&DVector::from_vec(self.diag.clone())))
            .expect("positive diagonals lie in the cone")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CartanReport {
    pub dim: usize,
    pub wdvv_residual: f64,
    pub compatibility_residual: f64,
    pub unit_residual: f64,
    pub gram_det: f64,
    pub invariance_max: f64,
    pub max_residual: f64,
}

/// Frobenius axioms on the tangent algebra of the Cartan torus: the n-dim
/// diagonal algebra with componentwise product, unit (1,...,1), and the
/// trace form. Table-level identities hold exactly; sampled invariance picks
/// up only multiplication rounding.
pub fn cartan_frobenius_check(n: usize, samples: usize, seed: u64) -> Result<CartanReport> {
    if n < 2 {
        return Err(Error::Domain("the algebra check needs n >= 2".into()));
    }
    let delta = |a: usize, b: usize, c: usize| if a == b && b == c { 1.0 } else { 0.0 };
    let gram = Metric::new(DMatrix::identity(n, n))?;
    let tensor = Tensor3::from_fn(n, delta);
    let table = MultiplicationTable::from_fn(n, delta);

    let wdvv = wdvv_residual(&table);
    let compat = compatibility_residual(&gram, &tensor, &table)?;

    let unit = DVector::from_element(n, 1.0);
    let mut unit_residual = 0.0f64;
    for b in 0..n {
        let mut e = DVector::zeros(n);
        e[b] = 1.0;
        let prod = table.apply(&unit, &e);
        unit_residual = unit_residual.max((prod - e).abs().max());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut invariance_max = 0.0f64;
    for _ in 0..samples {
        let draw = |rng: &mut ChaCha8Rng| {
            DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
        };
        let (x, y, z) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let left = table.apply(&x, &y).dot(&z);
        let right = x.dot(&table.apply(&y, &z));
        invariance_max = invariance_max.max((left - right).abs());
    }

    let gram_det = gram.det();
    let max_residual = wdvv
        .max(compat)
        .max(unit_residual)
        .max(invariance_max)
        .max((gram_det - 1.0).abs());
    Ok(CartanReport {
        dim: n,
        wdvv_residual: wdvv,
        compatibility_residual: compat,
        unit_residual,
        gram_det,
        invariance_max,
        max_residual,
    })
}

/// The det-1 torus in log coordinates, metric induced from the cone.
struct CartanChart {
    n: usize,
}

impl MetricField for CartanChart {
    fn dim(&self) -> usize {
        self.n - 1
    }

    fn metric(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        let point = CartanTorusPoint::from_log(u).to_cone();
        let lambda = CartanTorusPoint::from_log(u);
        let lambda = lambda.diag();
        let basis: Vec<DMatrix<C64>> = (0..self.n - 1)
            .map(|i| {
                let mut m = DMatrix::zeros(self.n, self.n);
                m[(i, i)] = C64::new(lambda[i], 0.0);
                m[(self.n - 1, self.n - 1)] = C64::new(-lambda[self.n - 1], 0.0);
                m
            })
            .collect();
        let k = self.n - 1;
        let mut g = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let value = cone_metric(&point, &basis[i], &basis[j])?;
                g[(i, j)] = value;
                g[(j, i)] = value;
            }
        }
        Ok(g)
    }
}

/// Largest finite-difference curvature component of the induced metric on
/// the Cartan torus over seeded chart points. Flat in exact arithmetic.
pub fn cartan_torus_flatness(n: usize, samples: usize, seed: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain("flatness needs n >= 2".into()));
    }
    let chart = CartanChart { n };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples.max(1) {
        let u: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-0.5..0.5)).collect();
        worst = worst.max(riemann::riemann_max_abs(
            &chart,
            &u,
            riemann::DEFAULT_METRIC_STEP,
            riemann::DEFAULT_CONNECTION_STEP,
        )?);
    }
    Ok(worst)
}

/// Real symmetric cone metric in the upper-triangle chart, for driving the
/// generic geodesic integrator as an independent oracle.
pub struct ConeChartMetric {
    pub n: usize,
}

fn sym_basis(n: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut m = DMatrix::zeros(n, n);
            m[(i, j)] = C64::new(1.0, 0.0);
            m[(j, i)] = C64::new(1.0, 0.0);
            out.push(m);
        }
    }
    out
}

impl MetricField for ConeChartMetric {
    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let point = ConePoint::from_real(potentials::sym_from_coords(self.n, x))?;
        let basis = sym_basis(self.n);
        let d = basis.len();
        let mut g = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let value = cone_metric(&point, &basis[a], &basis[b])?;
                g[(a, b)] = value;
                g[(b, a)] = value;
            }
        }
        Ok(g)
    }
}

/// Lattice torus R^n / Y Z^n attached to a real cone point: basis the
/// columns of Y, covolume det Y.
pub fn torus_from_cone(y: &ConePoint) -> Result<(TorusFiber, f64)> {
    let real = y.real_part()?;
    let rows: Vec<Vec<f64>> = (0..real.nrows())
        .map(|i| (0..real.ncols()).map(|j| real[(i, j)]).collect())
        .collect();
    Ok((TorusFiber::from_f64(&rows)?, y.det()))
}

/// Complex Hermitian matrices in real coordinates: n diagonal entries, then
/// (re, im) pairs along the upper triangle row by row. Dimension n^2.
#[derive(Debug, Clone)]
pub struct HermitianLogDet {
    pub size: usize,
}

pub fn herm_from_coords(n: usize, x: &[f64]) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        m[(i, i)] = C64::new(x[k], 0.0);
        k += 1;
        for j in i + 1..n {
            let v = C64::new(x[k], x[k + 1]);
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
            k += 2;
        }
    }
    m
}

pub fn herm_coords(m: &DMatrix<C64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        out.push(m[(i, i)].re);
        for j in i + 1..n {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

pub fn herm_basis(n: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut diag = DMatrix::zeros(n, n);
        diag[(i, i)] = C64::new(1.0, 0.0);
        out.push(diag);
        for j in i + 1..n {
            let mut re = DMatrix::zeros(n, n);
            re[(i, j)] = C64::new(1.0, 0.0);
            re[(j, i)] = C64::new(1.0, 0.0);
            out.push(re);
            let mut im = DMatrix::zeros(n, n);
            im[(i, j)] = C64::new(0.0, 1.0);
            im[(j, i)] = C64::new(0.0, -1.0);
            out.push(im);
        }
    }
    out
}

impl Potential for HermitianLogDet {
    fn dim(&self) -> usize {
        self.size * self.size
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && is_positive_definite(&herm_from_coords(self.size, x))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        -SymmetricEigen::new(herm_from_coords(self.size, x))
            .eigenvalues
            .iter()
            .map(|&l| l.ln())
            .sum::<f64>()
    }
}

/// Experimental: quaternionic matrices Q = A + Bi + Cj + Dk through the
/// standard 2n x 2n complex embedding [[A + iB, C + iD], [-C + iD, A - iB]].
/// Quaternion-Hermitian input (A symmetric, B, C, D antisymmetric) lands on
/// a complex Hermitian matrix with doubled spectrum.
pub fn quaternionic_embedding(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    for part in [a, b, c, d] {
        if part.nrows() != n || part.ncols() != n {
            return Err(Error::Dimension { expected: n, got: part.nrows().max(part.ncols()) });
        }
    }
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] = C64::new(a[(i, j)], b[(i, j)]);
            out[(i, j + n)] = C64::new(c[(i, j)], d[(i, j)]);
            out[(i + n, j)] = C64::new(-c[(i, j)], d[(i, j)]);
            out[(i + n, j + n)] = C64::new(a[(i, j)], -b[(i, j)]);
        }
    }
    Ok(out)
}

/// Row-major JSON matrix: entries either plain numbers or [re, im] pairs.
pub fn matrix_from_json(text: &str) -> Result<DMatrix<C64>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let rows = value
        .as_array()
        .ok_or_else(|| Error::Parse("matrix JSON must be an array of rows".into()))?;
    if rows.is_empty() {
        return Err(Error::Parse("matrix JSON has no rows".into()));
    }
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let entries = row
            .as_array()
            .ok_or_else(|| Error::Parse("matrix rows must be arrays".into()))?;
        let mut out = Vec::with_capacity(entries.len());
        for entry in entries {
            let parsed = match entry {
                serde_json::Value::Number(v) => C64::new(
                    v.as_f64()
                        .ok_or_else(|| Error::Parse("non-finite matrix entry".into()))?,
                    0.0,
                ),
                serde_json::Value::Array(pair) if pair.len() == 2 => {
                    let part = |i: usize| -> Result<f64> {
                        pair[i]
                            .as_f64()
                            .ok_or_else(|| Error::Parse("re/im pair must be numbers".into()))
                    };
                    C64::new(part(0)?, part(1)?)
                }
                _ => {
                    return Err(Error::Parse(
                        "matrix entries are numbers or [re, im] pairs".into(),
                    ))
                }
            };
            out.push(parsed);
        }
        data.push(out);
    }
    let ncols = data[0].len();
    if ncols == 0 || data.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("matrix rows must share one positive length".into()));
    }
    Ok(DMatrix::from_fn(data.len(), ncols, |i, j| data[i][j]))
}

pub fn matrix_to_json(m: &DMatrix<C64>) -> String {
    let complex = m.iter().any(|v| v.im != 0.0);
    let rows: Vec<serde_json::Value> = (0..m.nrows())
        .map(|i| {
            let row: Vec<serde_json::Value> = (0..m.ncols())
                .map(|j| {
                    let v = m[(i, j)];
                    if complex {
                        serde_json::json!([v.re, v.im])
                    } else {
                        serde_json::json!(v.re)
                    }
                })
                .collect();
            serde_json::Value::Array(row)
        })
        .collect();
    serde_json::Value::Array(rows).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hessian::{hessian_metric_fd, third_tensor_fd};
    use crate::riemann::GeodesicState;

    fn cm(entries: &[&[f64]]) -> DMatrix<C64> {
        DMatrix::from_fn(entries.len(), entries[0].len(), |i, j| {
            C64::new(entries[i][j], 0.0)
        })
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
        let raw = DMatrix::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        hermitize(&raw)
    }

    fn random_cone_point(n: usize, complex: bool, rng: &mut ChaCha8Rng) -> ConePoint {
        let raw = DMatrix::from_fn(n, n, |_, _| {
            let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
            C64::new(rng.gen_range(-1.0..1.0), im)
        });
        let q = raw.qr().q();
        let diag = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
            C64::new(rng.gen_range(0.5..2.0), 0.0)
        }));
        ConePoint::new(hermitize(&(&q * diag * q.adjoint()))).unwrap()
    }

    #[test]
    fn membership_frozen_values() {
        let id = cm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(in_cone(&id).unwrap());
        assert!(!in_cone(&cm(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap());

        let hilbert = DMatrix::from_fn(3, 3, |i, j| C64::new(1.0 / (i + j + 1) as f64, 0.0));
        // eigenvalue oracle agrees with the Cholesky route
        let min_eig = SymmetricEigen::new(hilbert.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(min_eig > 0.0);
        assert!(in_cone(&hilbert).unwrap());

        let skew = cm(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        assert!(matches!(in_cone(&skew), Err(Error::NotSymmetric(_))));
        assert!(matches!(
            ConePoint::new(cm(&[&[1.0, 0.0], &[0.0, -1.0]])),
            Err(Error::NotInCone(_))
        ));
    }

    #[test]
    fn potential_frozen_values() {
        let id = ConePoint::from_real(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(koszul_potential(&id), 0.0);

        let doubled = ConePoint::from_real(DMatrix::from_diagonal_element(2, 2, 2.0)).unwrap();
        assert!((koszul_potential(&doubled) + 4.0f64.ln()).abs() < 1e-14);

        // scaling law: potential(tX) = potential(X) - n log t
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_cone_point(3, false, &mut rng);
        let t = 1.7;
        let scaled = ConePoint::new(x.matrix() * C64::new(t, 0.0)).unwrap();
        let expect = koszul_potential(&x) - 3.0 * t.ln();
        assert!((koszul_potential(&scaled) - expect).abs() < 1e-12);
    }

    #[test]
    fn metric_frozen_values_and_fd_agreement() {
        let id = ConePoint::from_real(DMatrix::identity(2, 2)).unwrap();
        let eye = cm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(cone_metric(&id, &eye, &eye).unwrap(), 2.0);

        // Gram matrix in the (x11, x12, x22) chart at the identity
        let basis = sym_basis(2);
        let mut gram = DMatrix::zeros(3, 3);
        for a in 0..3 {
            for b in 0..3 {
                gram[(a, b)] = cone_metric(&id, &basis[a], &basis[b]).unwrap();
            }
        }
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 1.0]));
        assert!((gram - &expect).abs().max() < 1e-14);

        // FD Hessian of the potential reproduces it
        let pot = BuiltinPotential::LogDet { size: 2 };
        let coords = [1.0, 0.0, 1.0];
        let h = hessian::default_step(&coords);
        let fd = hessian_metric_fd(&pot, &coords, h).unwrap();
        assert!((fd.entries() - expect).abs().max() < 1e-6);
    }

    #[test]
    fn metric_is_congruence_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let x = random_cone_point(3, true, &mut rng);
            let v = random_hermitian(3, &mut rng);
            let w = random_hermitian(3, &mut rng);
            let a = DMatrix::from_fn(3, 3, |_, _| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            }) + DMatrix::identity(3, 3) * C64::new(2.0, 0.0);
            let moved = ConePoint::new(hermitize(&(&a * x.matrix() * a.adjoint()))).unwrap();
            let mv = hermitize(&(&a * &v * a.adjoint()));
            let mw = hermitize(&(&a * &w * a.adjoint()));
            let before = cone_metric(&x, &v, &w).unwrap();
            let after = cone_metric(&moved, &mv, &mw).unwrap();
            assert!((before - after).abs() < 1e-9 * before.abs().max(1.0));
        }
    }

    #[test]
    fn metric_matches_potential_hessian_real_and_complex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=3 {
            // real route through the symmetric chart
            let x = random_cone_point(n, false, &mut rng);
            let coords_vec = potentials::coords_from_sym(&x.real_part().unwrap());
            let coords = coords_vec.as_slice();
            let pot = BuiltinPotential::LogDet { size: n };
            let fd = hessian_metric_fd(&pot, coords, hessian::default_step(coords)).unwrap();
            let basis = sym_basis(n);
            for a in 0..basis.len() {
                for b in 0..basis.len() {
                    let direct = cone_metric(&x, &basis[a], &basis[b]).unwrap();
                    assert!(
                        (fd.entries()[(a, b)] - direct).abs() < 1e-6 * direct.abs().max(1.0),
                        "real n={n} ({a},{b})"
                    );
                }
            }

            // complex route through the Hermitian chart
            let z = random_cone_point(n, true, &mut rng);
            let coords = herm_coords(z.matrix());
            let pot = HermitianLogDet { size: n };
            let fd = hessian_metric_fd(&pot, &coords, hessian::default_step(&coords)).unwrap();
            let basis = herm_basis(n);
            for a in 0..basis.len() {
                for b in 0..basis.len() {
                    let direct = cone_metric(&z, &basis[a], &basis[b]).unwrap();
                    assert!(
                        (fd.entries()[(a, b)] - direct).abs() < 1e-6 * direct.abs().max(1.0),
                        "complex n={n} ({a},{b})"
                    );
                }
            }
        }
    }

    #[test]
    fn ma_check_frozen_values() {
        let id2 = ConePoint::from_real(DMatrix::identity(2, 2)).unwrap();
        let (det_hess, target) = cone_ma_check(&id2).unwrap();
        assert_eq!(target, 2.0);
        assert!((det_hess - 2.0).abs() < 1e-5);

        let doubled = ConePoint::from_real(DMatrix::from_diagonal_element(2, 2, 2.0)).unwrap();
        let (det_hess, target) = cone_ma_check(&doubled).unwrap();
        assert!((target - 1.0 / 32.0).abs() < 1e-15);
        assert!((det_hess - target).abs() < 1e-5 * target);

        let id3 = ConePoint::from_real(DMatrix::identity(3, 3)).unwrap();
        let (det_hess, target) = cone_ma_check(&id3).unwrap();
        assert_eq!(target, 8.0);
        assert!((det_hess - 8.0).abs() < 1e-4);
    }

    #[test]
    fn ma_ratio_is_constant_across_the_cone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for n in 2..=3 {
            let mut ratios = Vec::new();
            for _ in 0..10 {
                let x = random_cone_point(n, false, &mut rng);
                let (det_hess, _) = cone_ma_check(&x).unwrap();
                ratios.push(det_hess * x.det().powi(n as i32 + 1));
            }
            let kappa = 2f64.powi((n * (n - 1) / 2) as i32);
            for r in ratios {
                assert!((r - kappa).abs() < 1e-5 * kappa, "n={n} ratio {r}");
            }
        }
    }

    #[test]
    fn geodesic_frozen_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_cone_point(3, true, &mut rng);
        let v = random_hermitian(3, &mut rng);
        let still = geodesic(&x, &v, 0.0).unwrap();
        assert!((still.matrix() - x.matrix()).map(|c| c.norm()).max() < 1e-13);

        let id = ConePoint::from_real(DMatrix::identity(2, 2)).unwrap();
        let diag = cm(&[&[0.3, 0.0], &[0.0, -0.5]]);
        let moved = geodesic(&id, &diag, 2.0).unwrap();
        let expect = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new((0.6f64).exp(), 0.0),
            C64::new((-1.0f64).exp(), 0.0),
        ]));
        assert!((moved.matrix() - expect).map(|c| c.norm()).max() < 1e-12);
    }

    #[test]
    fn geodesic_semigroup_in_the_commuting_case() {
        let x = ConePoint::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![
            2.0, 0.7, 1.3,
        ])))
        .unwrap();
        let v = cm(&[
            &[0.4, 0.0, 0.0],
            &[0.0, -0.2, 0.0],
            &[0.0, 0.0, 0.1],
        ]);
        let (s, t) = (0.6, 0.9);
        let direct = geodesic(&x, &v, s + t).unwrap();
        let mid = geodesic(&x, &v, s).unwrap();
        // parallel transport along the flow is the curve velocity: in the
        // commuting case v_i picks up the factor e^{s v_i / x_i}
        let transported = DMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                let xi = x.matrix()[(i, i)].re;
                let vi = v[(i, i)].re;
                C64::new(vi * (s * vi / xi).exp(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let two_leg = geodesic(&mid, &transported, t).unwrap();
        assert!(
            (direct.matrix() - two_leg.matrix()).map(|c| c.norm()).max() < 1e-13
        );
    }

    #[test]
    fn geodesic_matches_ode_integration() {
        let x = ConePoint::from_real(cm(&[&[2.0, 0.5], &[0.5, 1.5]]).map(|v| v.re)).unwrap();
        let v = cm(&[&[0.3, -0.2], &[-0.2, 0.4]]);
        let closed = geodesic(&x, &v, 1.0).unwrap();

        let chart = ConeChartMetric { n: 2 };
        let start = GeodesicState {
            position: potentials::coords_from_sym(&x.real_part().unwrap())
                .as_slice()
                .to_vec(),
            velocity: vec![0.3, -0.2, 0.4],
        };
        let path = riemann::integrate_geodesic(
            &chart,
            &start,
            1.0,
            256,
            riemann::DEFAULT_METRIC_STEP,
        )
        .unwrap();
        let end = &path.last().unwrap().position;
        let closed_coords = potentials::coords_from_sym(&closed.real_part().unwrap());
        for (got, want) in end.iter().zip(closed_coords.iter()) {
            assert!((got - want).abs() < 1e-6, "ode {got} vs closed {want}");
        }
    }

    #[test]
    fn jordan_product_frozen_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = random_hermitian(3, &mut rng);
        let id = DMatrix::identity(3, 3);
        let with_unit = jordan_product(&x, &id).unwrap();
        assert!((with_unit - &x).map(|c| c.norm()).max() < 1e-15);

        let a = cm(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let b = cm(&[&[5.0, 0.0], &[0.0, -1.0]]);
        let prod = jordan_product(&a, &b).unwrap();
        assert_eq!(prod[(0, 0)], C64::new(10.0, 0.0));
        assert_eq!(prod[(1, 1)], C64::new(-3.0, 0.0));

        let swap = cm(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let sign = cm(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let zero = jordan_product(&swap, &sign).unwrap();
        assert_eq!(zero.map(|c| c.norm()).max(), 0.0);
    }

    #[test]
    fn trace_form_properties() {
        let id3 = DMatrix::<C64>::identity(3, 3);
        assert_eq!(trace_form(&id3, &id3).unwrap(), 3.0);

        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = random_hermitian(3, &mut rng);
            let y = random_hermitian(3, &mut rng);
            let z = random_hermitian(3, &mut rng);
            let left = trace_form(&jordan_product(&x, &y).unwrap(), &z).unwrap();
            let right = trace_form(&x, &jordan_product(&y, &z).unwrap()).unwrap();
            worst = worst.max((left - right).abs());
            // Hermitian arguments give a real trace
            assert!((&x * &y).trace().im.abs() < 1e-14);
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn cartan_algebra_is_frobenius_exactly() {
        let small = cartan_frobenius_check(2, 10, 1).unwrap();
        assert_eq!(small.wdvv_residual, 0.0);
        assert_eq!(small.compatibility_residual, 0.0);
        assert_eq!(small.unit_residual, 0.0);
        assert_eq!(small.gram_det, 1.0);

        let big = cartan_frobenius_check(5, 100, 7).unwrap();
        assert_eq!(big.wdvv_residual, 0.0);
        assert_eq!(big.compatibility_residual, 0.0);
        assert!(big.max_residual <= 1e-12);
    }

    #[test]
    fn cartan_torus_is_flat() {
        for n in [2, 3, 4] {
            let worst = cartan_torus_flatness(n, 3, 11).unwrap();
            assert!(worst < 1e-6, "n={n} curvature {worst}");
        }
    }

    #[test]
    fn torus_handoff_frozen_values() {
        let id = ConePoint::from_real(DMatrix::identity(2, 2)).unwrap();
        let (fiber, covol) = torus_from_cone(&id).unwrap();
        assert_eq!(covol, 1.0);
        assert_eq!(fiber.rank(), 2);

        let stretched =
            ConePoint::from_real(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])))
                .unwrap();
        let (fiber, covol) = torus_from_cone(&stretched).unwrap();
        assert!((covol - 2.0).abs() < 1e-12);
        assert!((fiber.covolume() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quaternionic_embedding_is_hermitian_with_doubled_spectrum() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 2.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, -0.4, 0.0]);
        let c = DMatrix::from_row_slice(2, 2, &[0.0, 0.2, -0.2, 0.0]);
        let d = DMatrix::from_row_slice(2, 2, &[0.0, -0.1, 0.1, 0.0]);
        let embedded = quaternionic_embedding(&a, &b, &c, &d).unwrap();
        assert!(hermitian_defect(&embedded) < 1e-15);
        assert!(in_cone(&embedded).unwrap());

        let mut eigs: Vec<f64> = SymmetricEigen::new(embedded)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eigs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for pair in eigs.chunks(2) {
            assert!((pair[0] - pair[1]).abs() < 1e-9, "spectrum not doubled: {eigs:?}");
        }
    }

    #[test]
    fn json_matrices_roundtrip() {
        let real = cm(&[&[1.0, 0.5], &[0.5, 2.0]]);
        let text = matrix_to_json(&real);
        assert_eq!(text, "[[1.0,0.5],[0.5,2.0]]");
        assert_eq!(matrix_from_json(&text).unwrap(), real);

        let complex = DMatrix::from_fn(2, 2, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let back = matrix_from_json(&matrix_to_json(&complex)).unwrap();
        assert_eq!(back, complex);

        assert!(matches!(matrix_from_json("[]"), Err(Error::Parse(_))));
        assert!(matches!(matrix_from_json("[[1.0],[2.0,3.0]]"), Err(Error::Parse(_))));
        assert!(matches!(matrix_from_json("{\"a\":1}"), Err(Error::Parse(_))));
    }

    #[test]
    fn cartan_torus_point_validation() {
        let p = CartanTorusPoint::new(vec![2.0, 0.5]).unwrap();
        assert_eq!(p.diag(), &[2.0, 0.5]);
        assert!(matches!(CartanTorusPoint::new(vec![2.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(CartanTorusPoint::new(vec![-1.0, -1.0]), Err(Error::Domain(_))));

        let from_chart = CartanTorusPoint::from_log(&[0.25, -0.4]);
        let det: f64 = from_chart.diag().iter().product();
        assert!((det - 1.0).abs() < 1e-15);
        let cone = from_chart.to_cone();
        assert_eq!(cone.dim(), 3);
    }

    #[test]
    fn third_derivatives_also_agree_on_the_hermitian_chart() {
        // guards the complex chart against sign slips in the im coordinates
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let z = random_cone_point(2, true, &mut rng);
        let coords = herm_coords(z.matrix());
        let pot = HermitianLogDet { size: 2 };
        let fd = third_tensor_fd(&pot, &coords, hessian::default_third_step(&coords)).unwrap();
        assert!(fd.symmetry_defect < 1e-6);
    }
}
