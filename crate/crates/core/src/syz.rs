//! Torus fibration side of the mirror construction: the weighted projective
//! moment map onto the simplex, hypersurface slices of it, explicit fiber
//! sampling, isotropy and fiber-dimension diagnostics, and the dual-torus /
//! Legendre correspondence.

use nalgebra::{Complex, DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bhk::{ExponentMatrix, WeightSystem};
use crate::error::{Error, Result};
use crate::expfam::{self, MeanPoint};

type C64 = Complex<f64>;

/// Point of weighted projective space, stored as a concrete representative
/// in C^{N+1}. The class is the orbit of t.z = (t^{w_0} z_0, ..., t^{w_N} z_N);
/// `canonical` picks the representative with sum w|z|^2 = 1, unique up to
/// coordinate phases.
#[derive(Debug, Clone)]
pub struct WeightedProjectivePoint {
    z: Vec<C64>,
    w: Vec<u64>,
}

impl WeightedProjectivePoint {
    pub fn new(z: Vec<C64>, w: Vec<u64>) -> Result<Self> {
        if z.len() != w.len() {
            return Err(Error::Dimension { expected: w.len(), got: z.len() });
        }
        if z.is_empty() || z.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(Error::ZeroVector);
        }
        if w.iter().any(|&wi| wi == 0) {
            return Err(Error::Domain("weights must be at least 1".into()));
        }
        Ok(WeightedProjectivePoint { z, w })
    }

    pub fn coords(&self) -> &[C64] {
        &self.z
    }

    pub fn weights(&self) -> &[u64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// The weighted action t.z.
    pub fn act(&self, t: C64) -> Result<Self> {
        if t.norm_sqr() == 0.0 {
            return Err(Error::ZeroVector);
        }
        let z = self
            .z
            .iter()
            .zip(&self.w)
            .map(|(zi, &wi)| t.powu(wi as u32) * zi)
            .collect();
        Ok(WeightedProjectivePoint { z, w: self.w.clone() })
    }

    /// Level-set sum of the representative, sum_j w_j |z_j|^2.
    pub fn level(&self) -> f64 {
        self.z
            .iter()
            .zip(&self.w)
            .map(|(zi, &wi)| wi as f64 * zi.norm_sqr())
            .sum()
    }

    /// Class representative on the level set sum w|z|^2 = 1, found by the
    /// positive rescale s with sum_j w_j s^{2 w_j} |z_j|^2 = 1. The left side
    /// is strictly increasing in s, so the root is unique.
    pub fn canonical(&self) -> Self {
        let value = |s: f64| -> f64 {
            self.z
                .iter()
                .zip(&self.w)
                .map(|(zi, &wi)| wi as f64 * s.powi(2 * wi as i32) * zi.norm_sqr())
                .sum()
        };
        let slope = |s: f64| -> f64 {
            self.z
                .iter()
                .zip(&self.w)
                .map(|(zi, &wi)| {
                    let p = 2 * wi as i32;
                    wi as f64 * p as f64 * s.powi(p - 1) * zi.norm_sqr()
                })
                .sum()
        };
        let mut lo = 1.0;
        let mut hi = 1.0;
        while value(hi) < 1.0 {
            hi *= 2.0;
        }
        while value(lo) > 1.0 {
            lo *= 0.5;
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..80 {
            if value(s) > 1.0 {
                hi = s;
            } else {
                lo = s;
            }
            s = 0.5 * (lo + hi);
        }
        for _ in 0..4 {
            s -= (value(s) - 1.0) / slope(s);
        }
        let z = self
            .z
            .iter()
            .zip(&self.w)
            .map(|(zi, &wi)| zi * s.powi(wi as i32))
            .collect();
        WeightedProjectivePoint { z, w: self.w.clone() }
    }
}

/// Point of the closed standard simplex, the image of the moment map.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentImage {
    eta: Vec<f64>,
}

impl MomentImage {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if eta.iter().any(|&v| !v.is_finite() || v < -1e-12) {
            return Err(Error::Domain("simplex coordinates must be nonnegative".into()));
        }
        let sum: f64 = eta.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("simplex coordinates sum to {sum}, not 1")));
        }
        Ok(MomentImage { eta })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.eta.iter().all(|&v| v > 0.0)
    }
}

/// eta_i = w_i |z_i|^2 / sum_j w_j |z_j|^2, evaluated on the stored
/// representative. Exactly phase-invariant; across general rescalings it is
/// constant on canonical representatives, which is how class invariance is
/// checked.
pub fn moment_map(p: &WeightedProjectivePoint) -> Result<MomentImage> {
    let denom = p.level();
    if denom == 0.0 {
        return Err(Error::ZeroVector);
    }
    MomentImage::new(
        p.z.iter()
            .zip(&p.w)
            .map(|(zi, &wi)| wi as f64 * zi.norm_sqr() / denom)
            .collect(),
    )
}

/// The hypersurface slice {eta in simplex : sum w_i eta_i = level} of the
/// moment polytope. The level defaults to 1/d; for many weight systems that
/// slice is empty, which is detected rather than papered over.
#[derive(Debug, Clone)]
pub struct SlicePolytope {
    weights: Vec<u64>,
    degree: u64,
    level: f64,
}

impl SlicePolytope {
    pub fn new(ws: &WeightSystem) -> Self {
        Self::with_level(ws, 1.0 / ws.degree as f64)
    }

    pub fn with_level(ws: &WeightSystem, level: f64) -> Self {
        SlicePolytope { weights: ws.weights.clone(), degree: ws.degree, level }
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn level(&self) -> f64 {
        self.level
    }

    /// Over the simplex, sum w_i eta_i ranges exactly over
    /// [min w, max w]; a level outside that window meets nothing.
    pub fn is_empty(&self, tol: f64) -> bool {
        let lo = *self.weights.iter().min().expect("weights nonempty") as f64;
        let hi = *self.weights.iter().max().expect("weights nonempty") as f64;
        self.level < lo - tol || self.level > hi + tol
    }

    pub fn membership(&self, eta: &MomentImage, tol: f64) -> bool {
        if eta.len() != self.weights.len() || !eta.is_interior() {
            return false;
        }
        let total: f64 = eta
            .as_slice()
            .iter()
            .zip(&self.weights)
            .map(|(&e, &w)| w as f64 * e)
            .sum();
        (total - self.level).abs() <= tol
    }
}

/// Points of the torus fiber over eta: moduli fixed at sqrt(eta_i / w_i),
/// phases seeded-uniform. Every sample lands exactly on the level set.
pub fn sample_fiber(
    eta: &MomentImage,
    w: &[u64],
    count: usize,
    seed: u64,
) -> Result<Vec<WeightedProjectivePoint>> {
    if eta.len() != w.len() {
        return Err(Error::Dimension { expected: w.len(), got: eta.len() });
    }
    if !eta.is_interior() {
        return Err(Error::Boundary("fiber sampling needs interior eta".into()));
    }
    let moduli: Vec<f64> = eta
        .as_slice()
        .iter()
        .zip(w)
        .map(|(&e, &wi)| (e / wi as f64).sqrt())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let z = moduli
                .iter()
                .map(|&m| {
                    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    C64::from_polar(m, phi)
                })
                .collect();
            WeightedProjectivePoint::new(z, w.to_vec())
        })
        .collect()
}

/// Standard symplectic pairing Im<u, v> on C^{N+1}.
pub fn symplectic_pairing(u: &[C64], v: &[C64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a.conj() * b).im).sum()
}

/// Tangent direction of the k-th coordinate phase circle at z.
pub fn phase_direction(z: &[C64], k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); z.len()];
    v[k] = C64::new(0.0, 1.0) * z[k];
    v
}

/// Largest symplectic pairing among fiber tangent directions: all pairs of
/// coordinate phase circles plus seeded real combinations of them. Torus
/// orbits are isotropic, so this should vanish identically.
pub fn isotropy_residual(p: &WeightedProjectivePoint, tangent_pairs: usize, seed: u64) -> f64 {
    let z = p.coords();
    let n = z.len();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let u = phase_direction(z, j);
        for k in 0..n {
            worst = worst.max(symplectic_pairing(&u, &phase_direction(z, k)).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..tangent_pairs {
        let combo = |rng: &mut ChaCha8Rng| -> Vec<C64> {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            z.iter()
                .zip(&coeffs)
                .map(|(zi, &c)| C64::new(0.0, c) * zi)
                .collect()
        };
        let u = combo(&mut rng);
        let v = combo(&mut rng);
        worst = worst.max(symplectic_pairing(&u, &v).abs());
    }
    worst
}

/// Numerical dimension of the phase-space solution set of W = 0 over the
/// fiber at eta, modulo the overall weighted phase: Gauss-Newton on
/// (Re W, Im W) from seeded starts, then the rank of the real Jacobian at
/// the solutions found. Returns (N+1) - 1 - rank.
pub fn hypersurface_fiber_dimension(
    e: &ExponentMatrix,
    ws: &WeightSystem,
    eta: &MomentImage,
    seed: u64,
) -> Result<usize> {
    let n = e.dim();
    if eta.len() != n || ws.weights.len() != n {
        return Err(Error::Dimension { expected: n, got: eta.len() });
    }
    if !eta.is_interior() {
        return Err(Error::Boundary("fiber dimension needs interior eta".into()));
    }
    // monomial magnitudes are constant on the fiber
    let moduli: Vec<f64> = eta
        .as_slice()
        .iter()
        .zip(&ws.weights)
        .map(|(&v, &w)| (v / w as f64).sqrt())
        .collect();
    let magnitudes: Vec<f64> = e
        .rows()
        .iter()
        .map(|row| {
            row.iter()
                .zip(&moduli)
                .map(|(&a, &m)| m.powi(a as i32))
                .product()
        })
        .collect();
    let scale: f64 = magnitudes.iter().sum();
    let tol = 1e-12 * scale;

    let poly = |phi: &[f64]| -> C64 {
        e.rows()
            .iter()
            .zip(&magnitudes)
            .map(|(row, &mag)| {
                let angle: f64 = row.iter().zip(phi).map(|(&a, &p)| a as f64 * p).sum();
                C64::from_polar(mag, angle)
            })
            .sum()
    };
    let jacobian = |phi: &[f64]| -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2, n);
        for (row, &mag) in e.rows().iter().zip(&magnitudes) {
            let angle: f64 = row.iter().zip(phi).map(|(&a, &p)| a as f64 * p).sum();
            let term = C64::from_polar(mag, angle);
            for (col, &a) in row.iter().enumerate() {
                let d = C64::new(0.0, a as f64) * term;
                j[(0, col)] += d.re;
                j[(1, col)] += d.im;
            }
        }
        j
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_rank: Option<usize> = None;
    for _ in 0..24 {
        let mut phi: Vec<f64> =
            (0..n).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        let mut residual = poly(&phi).norm();
        for _ in 0..80 {
            if residual <= tol {
                break;
            }
            let j = jacobian(&phi);
            let value = poly(&phi);
            let svd = j.clone().svd(true, true);
            let step = match svd.solve(&DVector::from_vec(vec![-value.re, -value.im]), 1e-12) {
                Ok(s) => s,
                Err(_) => break,
            };
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let trial: Vec<f64> =
                    phi.iter().zip(step.iter()).map(|(p, s)| p + alpha * s).collect();
                let trial_residual = poly(&trial).norm();
                if trial_residual < residual {
                    phi = trial;
                    residual = trial_residual;
                    improved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        if residual <= tol {
            let svd = jacobian(&phi).svd(false, false);
            let sigma_max = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
            let cutoff = (1e-7 * sigma_max).max(1e-12 * scale);
            let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
            best_rank = Some(best_rank.map_or(rank, |r| r.min(rank)));
        }
    }
    match best_rank {
        Some(rank) => Ok(n.saturating_sub(1).saturating_sub(rank)),
        None => Err(Error::NoSolutionFound),
    }
}

/// Lattice torus R^rank / basis Z^rank. Entries are kept as exact rationals
/// so dualization is an involution on the nose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorusFiber {
    basis: Vec<Vec<BigRational>>,
}

impl TorusFiber {
    pub fn from_rationals(basis: Vec<Vec<BigRational>>) -> Result<Self> {
        let rank = basis.len();
        if rank == 0 || basis.iter().any(|r| r.len() != rank) {
            return Err(Error::Dimension { expected: rank.max(1), got: 0 });
        }
        let f = TorusFiber { basis };
        if f.rational_det().is_zero() {
            return Err(Error::SingularBasis);
        }
        Ok(f)
    }

    pub fn from_integers(basis: &[Vec<i64>]) -> Result<Self> {
        Self::from_rationals(
            basis
                .iter()
                .map(|r| r.iter().map(|&v| BigRational::from_integer(v.into())).collect())
                .collect(),
        )
    }

    pub fn from_f64(basis: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<BigRational>> = basis
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| {
                        BigRational::from_f64(v)
                            .ok_or_else(|| Error::Domain(format!("non-finite basis entry {v}")))
                    })
                    .collect::<Result<_>>()
            })
            .collect::<Result<_>>()?;
        Self::from_rationals(rows)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<BigRational>] {
        &self.basis
    }

    pub fn basis_f64(&self) -> Vec<Vec<f64>> {
        self.basis
            .iter()
            .map(|r| r.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            .collect()
    }

    fn rational_det(&self) -> BigRational {
        let n = self.rank();
        let mut m = self.basis.clone();
        let mut det = BigRational::one();
        for k in 0..n {
            let pivot = match (k..n).find(|&r| !m[r][k].is_zero()) {
                Some(p) => p,
                None => return BigRational::zero(),
            };
            if pivot != k {
                m.swap(k, pivot);
                det = -det;
            }
            det *= m[k][k].clone();
            for r in k + 1..n {
                if m[r][k].is_zero() {
                    continue;
                }
                let factor = &m[r][k] / &m[k][k];
                for c in k..n {
                    let sub = &factor * &m[k][c];
                    m[r][c] = &m[r][c] - &sub;
                }
            }
        }
        det
    }

    /// Covolume |det basis| of the lattice.
    pub fn covolume(&self) -> f64 {
        self.rational_det().abs().to_f64().unwrap_or(f64::NAN)
    }

    /// Dual lattice basis, the inverse transpose. Exact, so applying it
    /// twice returns the original basis identically and the pairing
    /// basis^T . dual is exactly the identity.
    pub fn dual_fiber(&self) -> Result<TorusFiber> {
        let inv = rational_inverse(&self.basis).ok_or(Error::SingularBasis)?;
        let n = self.rank();
        let transposed: Vec<Vec<BigRational>> = (0..n)
            .map(|i| (0..n).map(|j| inv[j][i].clone()).collect())
            .collect();
        Ok(TorusFiber { basis: transposed })
    }

    /// basis^T . other.basis as exact rationals.
    pub fn pairing(&self, other: &TorusFiber) -> Result<Vec<Vec<BigRational>>> {
        let n = self.rank();
        if other.rank() != n {
            return Err(Error::Dimension { expected: n, got: other.rank() });
        }
        Ok((0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| &self.basis[k][i] * &other.basis[k][j])
                            .fold(BigRational::zero(), |acc, v| acc + v)
                    })
                    .collect()
            })
            .collect())
    }
}

fn rational_inverse(m: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = m.len();
    let mut a = m.to_vec();
    let mut inv: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect();
    for k in 0..n {
        let pivot = (k..n).find(|&r| !a[r][k].is_zero())?;
        a.swap(k, pivot);
        inv.swap(k, pivot);
        let p = a[k][k].clone();
        for c in 0..n {
            a[k][c] /= &p;
            inv[k][c] /= &p;
        }
        for r in 0..n {
            if r == k || a[r][k].is_zero() {
                continue;
            }
            let f = a[r][k].clone();
            for c in 0..n {
                let s1 = &f * &a[k][c];
                a[r][c] = &a[r][c] - &s1;
                let s2 = &f * &inv[k][c];
                inv[r][c] = &inv[r][c] - &s2;
            }
        }
    }
    Some(inv)
}

/// Natural coordinates of a simplex point: the Legendre leg of the
/// correspondence, delegated to the exponential-family machinery.
pub fn legendre_chart(eta: &MomentImage) -> Result<Vec<f64>> {
    let point = MeanPoint::from_slice(eta.as_slice())?;
    Ok(expfam::natural_params(&point)?.iter().copied().collect())
}

/// Integer d x d identity scaled lattices show up often enough in tests to
/// warrant a shorthand.
pub fn integer_lattice(diagonal: &[i64]) -> Result<TorusFiber> {
    let n = diagonal.len();
    TorusFiber::from_integers(
        &(0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diagonal[i] } else { 0 })
                    .collect::<Vec<i64>>()
            })
            .collect::<Vec<_>>(),
    )
}
