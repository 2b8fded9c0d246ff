//! Finite exponential families over weighted atoms: log-partition, densities,
//! the mean/natural Legendre pair, the Fisher metric as an exact covariance,
//! and the dual Monge-Ampere check on the probability simplex.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hessian::{default_step, hessian_metric_fd, Metric, Potential};
use crate::potentials::BuiltinPotential;

/// How the sufficient statistics are laid out. The categorical kinds unlock
/// closed-form parameter recovery; everything else goes through Newton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    /// Full indicator statistics, one per atom. Translation-invariant, so the
    /// Fisher metric is singular; gauge-fix before doing geometry.
    Categorical,
    /// Indicators with atom 0 dropped; theta_0 = 0 gauge baked in.
    CategoricalGauged,
    Generic,
}

/// Exponential family over a finite weighted sample space.
/// Row k of `stats` holds F(x_k); masses are w_k exp(C_k + <theta, F_k> - Psi).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFamily {
    kind: FamilyKind,
    stats: DMatrix<f64>,
    carrier: DVector<f64>,
    weights: DVector<f64>,
    labels: Vec<String>,
    experimental: bool,
}

impl ExponentialFamily {
    pub fn new(
        kind: FamilyKind,
        stats: DMatrix<f64>,
        carrier: DVector<f64>,
        weights: DVector<f64>,
        labels: Vec<String>,
        experimental: bool,
    ) -> Result<Self> {
        let k = stats.nrows();
        if k == 0 || stats.ncols() == 0 {
            return Err(Error::Dimension { expected: 1, got: 0 });
        }
        if carrier.len() != k {
            return Err(Error::Dimension { expected: k, got: carrier.len() });
        }
        if weights.len() != k {
            return Err(Error::Dimension { expected: k, got: weights.len() });
        }
        if labels.len() != k {
            return Err(Error::Dimension { expected: k, got: labels.len() });
        }
        if !weights.iter().all(|&w| w > 0.0 && w.is_finite()) {
            return Err(Error::Domain("base weights must be positive".into()));
        }
        let fam = ExponentialFamily { kind, stats, carrier, weights, labels, experimental };
        fam.check_kind()?;
        Ok(fam)
    }

    fn check_kind(&self) -> Result<()> {
        let k = self.atoms();
        let ok = match self.kind {
            FamilyKind::Categorical => {
                self.params() == k
                    && (0..k).all(|r| {
                        (0..k).all(|c| self.stats[(r, c)] == if r == c { 1.0 } else { 0.0 })
                    })
            }
            FamilyKind::CategoricalGauged => {
                self.params() == k - 1
                    && (0..k).all(|r| {
                        (0..k - 1)
                            .all(|c| self.stats[(r, c)] == if r == c + 1 { 1.0 } else { 0.0 })
                    })
            }
            FamilyKind::Generic => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parse(
                "statistics table does not match the declared categorical kind".into(),
            ))
        }
    }

    /// Full categorical family on `atoms` outcomes, one indicator each.
    pub fn categorical(atoms: usize) -> Self {
        ExponentialFamily {
            kind: FamilyKind::Categorical,
            stats: DMatrix::identity(atoms, atoms),
            carrier: DVector::zeros(atoms),
            weights: DVector::from_element(atoms, 1.0),
            labels: (0..atoms).map(|i| format!("atom{i}")).collect(),
            experimental: false,
        }
    }

    /// Categorical family in the theta_0 = 0 gauge: indicators of atoms 1..K.
    pub fn categorical_gauged(atoms: usize) -> Self {
        assert!(atoms >= 2, "gauged family needs at least two atoms");
        ExponentialFamily {
            kind: FamilyKind::CategoricalGauged,
            stats: DMatrix::from_fn(atoms, atoms - 1, |r, c| if r == c + 1 { 1.0 } else { 0.0 }),
            carrier: DVector::zeros(atoms),
            weights: DVector::from_element(atoms, 1.0),
            labels: (0..atoms).map(|i| format!("atom{i}")).collect(),
            experimental: false,
        }
    }

    /// One-parameter Bernoulli family: indicator of the second atom.
    pub fn two_point() -> Self {
        Self::categorical_gauged(2)
    }

    /// Midpoint quadrature of the Lebesgue family on the open simplex with
    /// `atoms` outcomes, in the chart (eta_1 .. eta_{atoms-1}). Cells of side
    /// 1/resolution whose centers lie strictly inside the chart simplex.
    /// Experimental: the continuous and discrete conventions disagree, see
    /// `legendre_discrepancy`.
    pub fn simplex_lebesgue(atoms: usize, resolution: usize) -> Result<Self> {
        if atoms < 2 || resolution == 0 {
            return Err(Error::Dimension { expected: 2, got: atoms.min(resolution) });
        }
        let dim = atoms - 1;
        let side = 1.0 / resolution as f64;
        let cell_weight = side.powi(dim as i32);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut cell = vec![0usize; dim];
        loop {
            let center: Vec<f64> = cell.iter().map(|&a| (a as f64 + 0.5) * side).collect();
            if center.iter().sum::<f64>() < 1.0 {
                rows.push(center);
            }
            // odometer over the cell grid
            let mut carry = true;
            for slot in cell.iter_mut() {
                *slot += 1;
                if *slot < resolution {
                    carry = false;
                    break;
                }
                *slot = 0;
            }
            if carry {
                break;
            }
        }
        let k = rows.len();
        let stats = DMatrix::from_fn(k, dim, |r, c| rows[r][c]);
        ExponentialFamily::new(
            FamilyKind::Generic,
            stats,
            DVector::zeros(k),
            DVector::from_element(k, cell_weight),
            (0..k).map(|i| format!("cell{i}")).collect(),
            true,
        )
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn atoms(&self) -> usize {
        self.stats.nrows()
    }

    /// Number of natural parameters.
    pub fn params(&self) -> usize {
        self.stats.ncols()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn experimental(&self) -> bool {
        self.experimental
    }

    pub fn stats(&self) -> &DMatrix<f64> {
        &self.stats
    }

    pub fn carrier(&self) -> &DVector<f64> {
        &self.carrier
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.params() {
            return Err(Error::Dimension { expected: self.params(), got: theta.len() });
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("natural parameters must be finite".into()));
        }
        Ok(())
    }

    /// Score of atom k before normalization: C_k + <theta, F_k> + log w_k.
    fn scores(&self, theta: &[f64]) -> DVector<f64> {
        DVector::from_fn(self.atoms(), |k, _| {
            let dot: f64 = (0..self.params()).map(|i| theta[i] * self.stats[(k, i)]).sum();
            self.carrier[k] + dot + self.weights[k].ln()
        })
    }

    /// Psi(theta) = log sum_k w_k exp(C_k + <theta, F_k>), computed max-shifted.
    pub fn log_partition(&self, theta: &[f64]) -> Result<f64> {
        self.check_theta(theta)?;
        let s = self.scores(theta);
        let m = s.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let total: f64 = s.iter().map(|&v| (v - m).exp()).sum();
        let psi = m + total.ln();
        if psi.is_finite() {
            Ok(psi)
        } else {
            Err(Error::Domain("log-partition diverged".into()))
        }
    }

    /// Probability masses w_k exp(C_k + <theta, F_k> - Psi); sums to one.
    pub fn masses(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let psi = self.log_partition(theta)?;
        let s = self.scores(theta);
        Ok(DVector::from_fn(self.atoms(), |k, _| (s[k] - psi).exp()))
    }

    /// Density of atom `x` relative to the base weights:
    /// exp(C_x + <theta, F_x> - Psi).
    pub fn density(&self, theta: &[f64], x: usize) -> Result<f64> {
        if x >= self.atoms() {
            return Err(Error::Domain(format!(
                "atom index {x} out of range for {} atoms",
                self.atoms()
            )));
        }
        Ok(self.masses(theta)?[x] / self.weights[x])
    }

    /// eta = grad Psi(theta), the mass-weighted mean of the statistics.
    /// Exact sums in atom order.
    pub fn mean_params(&self, theta: &[f64]) -> Result<MeanPoint> {
        let p = self.masses(theta)?;
        let eta = DVector::from_fn(self.params(), |i, _| {
            (0..self.atoms()).map(|k| p[k] * self.stats[(k, i)]).sum()
        });
        MeanPoint::new(eta)
    }

    /// Hess Psi(theta) as the centered covariance of the statistics, summed
    /// exactly over the sample space.
    pub fn fisher_metric(&self, theta: &[f64]) -> Result<Metric> {
        let p = self.masses(theta)?;
        let eta = self.mean_params(theta)?;
        let m = self.params();
        let cov = DMatrix::from_fn(m, m, |i, j| {
            (0..self.atoms())
                .map(|k| p[k] * (self.stats[(k, i)] - eta.eta()[i]) * (self.stats[(k, j)] - eta.eta()[j]))
                .sum()
        });
        let metric = Metric::new(cov)?;
        if !metric.is_positive_definite() {
            return Err(Error::Convexity(
                "Fisher metric is singular; gauge-fix the family first".into(),
            ));
        }
        Ok(metric)
    }

    /// The log-partition as a bare potential, evaluation only. Gives the
    /// finite-difference route an independent path to Hess Psi.
    pub fn as_potential(&self) -> FamilyPotential<'_> {
        FamilyPotential { fam: self }
    }

    pub fn descriptor(&self) -> FamilyDescriptor {
        FamilyDescriptor {
            schema_version: SCHEMA_VERSION,
            kind: self.kind,
            labels: self.labels.clone(),
            carrier: self.carrier.iter().copied().collect(),
            weights: self.weights.iter().copied().collect(),
            stats: (0..self.atoms())
                .map(|k| (0..self.params()).map(|i| self.stats[(k, i)]).collect())
                .collect(),
            experimental: self.experimental,
        }
    }

    pub fn from_descriptor(d: FamilyDescriptor) -> Result<Self> {
        if d.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported family schema version {}",
                d.schema_version
            )));
        }
        let k = d.stats.len();
        if k == 0 {
            return Err(Error::Parse("family needs at least one atom".into()));
        }
        let m = d.stats[0].len();
        if d.stats.iter().any(|row| row.len() != m) {
            return Err(Error::Parse("ragged statistics table".into()));
        }
        ExponentialFamily::new(
            d.kind,
            DMatrix::from_fn(k, m, |r, c| d.stats[r][c]),
            DVector::from_vec(d.carrier),
            DVector::from_vec(d.weights),
            d.labels,
            d.experimental,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.descriptor())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_descriptor(serde_json::from_str(text)?)
    }
}

pub const SCHEMA_VERSION: u32 = 1;

/// On-disk form of a family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub schema_version: u32,
    pub kind: FamilyKind,
    pub labels: Vec<String>,
    pub carrier: Vec<f64>,
    pub weights: Vec<f64>,
    pub stats: Vec<Vec<f64>>,
    pub experimental: bool,
}

/// Log-partition of a family viewed as a convex potential on theta.
pub struct FamilyPotential<'a> {
    fam: &'a ExponentialFamily,
}

impl Potential for FamilyPotential<'_> {
    fn dim(&self) -> usize {
        self.fam.params()
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.fam.log_partition(x).unwrap_or(f64::NAN)
    }
}

/// Mean parameters eta. For the categorical convention these are the atom
/// probabilities themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPoint {
    eta: DVector<f64>,
}

impl MeanPoint {
    pub fn new(eta: DVector<f64>) -> Result<Self> {
        if !eta.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("mean parameters must be finite".into()));
        }
        Ok(MeanPoint { eta })
    }

    pub fn from_slice(eta: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(eta))
    }

    pub fn eta(&self) -> &DVector<f64> {
        &self.eta
    }

    pub fn as_slice(&self) -> &[f64] {
        self.eta.as_slice()
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.len() == 0
    }

    /// Interior simplex point: every coordinate positive, total mass one.
    fn check_simplex(&self) -> Result<()> {
        if self.eta.iter().any(|&v| v <= 0.0) {
            return Err(Error::Boundary(
                "mean point touches the simplex boundary".into(),
            ));
        }
        let total: f64 = self.eta.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "simplex coordinates sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// theta_i = log eta_i, the categorical natural parameters in the gauge with
/// zero additive constant (so Psi(theta) = log sum eta = 0).
pub fn natural_params(eta: &MeanPoint) -> Result<DVector<f64>> {
    eta.check_simplex()?;
    Ok(eta.eta().map(|v| v.ln()))
}

/// Phi(eta) = sum_i eta_i log eta_i.
pub fn negative_entropy(eta: &MeanPoint) -> Result<f64> {
    eta.check_simplex()?;
    Ok(eta.eta().iter().map(|&v| v * v.ln()).sum())
}

/// Fenchel gap Psi(theta) + Phi(eta) - <theta, eta> at the dual pair of eta.
/// Zero at optimum; the categorical gauge makes Psi(log eta) = log 1 = 0.
pub fn fenchel_gap(fam: &ExponentialFamily, eta: &MeanPoint) -> Result<f64> {
    let theta = natural_params(eta)?;
    let psi = fam.log_partition(theta.as_slice())?;
    let phi = negative_entropy(eta)?;
    let pairing: f64 = theta.iter().zip(eta.eta().iter()).map(|(t, e)| t * e).sum();
    Ok(psi + phi - pairing)
}

/// Certifies the mean-side Monge-Ampere equation at an interior simplex
/// point: finite-difference det Hess of the negative entropy in the chart
/// with eta_0 dropped, against the target exp(-C), C = sum_i log eta_i.
/// Returns (detHess, target).
pub fn dual_ma_check(eta: &MeanPoint) -> Result<(f64, f64)> {
    eta.check_simplex()?;
    let atoms = eta.len();
    if atoms < 2 {
        return Err(Error::Dimension { expected: 2, got: atoms });
    }
    let chart = &eta.as_slice()[1..];
    let pot = BuiltinPotential::SimplexEntropy { atoms };
    let g = hessian_metric_fd(&pot, chart, default_step(chart))?;
    let target = 1.0 / eta.eta().iter().product::<f64>();
    Ok((g.det(), target))
}

/// Gap between the Legendre value of a quadrature log-partition and the
/// discrete negative entropy at the induced mean point. The continuous and
/// discrete conventions are not a matching pair; this reports the mismatch
/// instead of reconciling it.
pub fn legendre_discrepancy(fam: &ExponentialFamily, theta: &[f64]) -> Result<f64> {
    let psi = fam.log_partition(theta)?;
    let mean = fam.mean_params(theta)?;
    let chart = mean.as_slice();
    let head = 1.0 - chart.iter().sum::<f64>();
    if head <= 0.0 || chart.iter().any(|&v| v <= 0.0) {
        return Err(Error::Boundary("mean point left the open simplex".into()));
    }
    let pairing: f64 = theta.iter().zip(chart.iter()).map(|(t, e)| t * e).sum();
    let phi_continuous = pairing - psi;
    let phi_discrete =
        head * head.ln() + chart.iter().map(|&v| v * v.ln()).sum::<f64>();
    Ok((phi_continuous - phi_discrete).abs())
}
