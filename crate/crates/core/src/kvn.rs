//! Wavefunctions over a sampled phase space: densities, normalization, the
//! global phase fiber, the projection to exponential-family parameters, and
//! the Landau-Ginzburg free energy / field equation on periodic grids.
//! Units put hbar = c = 1.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::{ExponentialFamily, FamilyKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Complex amplitude per cell of a sampled phase space. `shape`/`spacing` are
/// present only for regular grids; the differential operators require them.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    values: Vec<Complex64>,
    cell_volume: f64,
    points: Option<Vec<Vec<f64>>>,
    shape: Option<Vec<usize>>,
    spacing: Option<f64>,
}

impl WaveFunction {
    /// Plain weighted sample space, no grid structure.
    pub fn from_values(values: Vec<Complex64>, cell_volume: f64) -> Result<Self> {
        Self::build(values, cell_volume, None, None, None)
    }

    /// Regular periodic grid with 1 to 3 axes; cell_volume = spacing^d and
    /// cells are ordered lexicographically, last axis fastest.
    pub fn on_grid(shape: Vec<usize>, spacing: f64, values: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Grid(format!(
                "grids must have 1 to 3 axes, got {}",
                shape.len()
            )));
        }
        if shape.iter().any(|&n| n == 0) {
            return Err(Error::Grid("grid axes must be nonempty".into()));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Grid(format!("grid spacing must be positive, got {spacing}")));
        }
        let cells: usize = shape.iter().product();
        if cells != values.len() {
            return Err(Error::Grid(format!(
                "shape {:?} holds {} cells but {} values were given",
                shape,
                cells,
                values.len()
            )));
        }
        let points = (0..cells)
            .map(|k| {
                coords_of(&shape, k)
                    .iter()
                    .map(|&c| c as f64 * spacing)
                    .collect()
            })
            .collect();
        let volume = spacing.powi(shape.len() as i32);
        Self::build(values, volume, Some(points), Some(shape), Some(spacing))
    }

    fn build(
        values: Vec<Complex64>,
        cell_volume: f64,
        points: Option<Vec<Vec<f64>>>,
        shape: Option<Vec<usize>>,
        spacing: Option<f64>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Grid("wavefunction needs at least one cell".into()));
        }
        if !values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Grid("wavefunction values must be finite".into()));
        }
        if !(cell_volume > 0.0 && cell_volume.is_finite()) {
            return Err(Error::Grid(format!(
                "cell volume must be positive, got {cell_volume}"
            )));
        }
        if let Some(p) = &points {
            if p.len() != values.len() {
                return Err(Error::Grid("one sample point per value required".into()));
            }
        }
        Ok(WaveFunction {
            values,
            cell_volume,
            points,
            shape,
            spacing,
        })
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn points(&self) -> Option<&[Vec<f64>]> {
        self.points.as_deref()
    }

    pub fn shape(&self) -> Option<&[usize]> {
        self.shape.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// rho = |psi|^2 per cell.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Total mass sum rho * cell_volume, summed in cell order.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume
    }

    /// Rescale so the density integrates to one. Idempotent.
    pub fn normalized(&self) -> Result<WaveFunction> {
        let total = self.mass();
        if total == 0.0 {
            return Err(Error::ZeroFunction);
        }
        let scale = 1.0 / total.sqrt();
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= scale);
        Ok(out)
    }

    /// e^{i alpha} psi, a point of the same phase fiber.
    pub fn phase_shifted(&self, alpha: f64) -> WaveFunction {
        let rot = Complex64::new(0.0, alpha).exp();
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= rot);
        out
    }

    /// Parameters of the family member with the same density. Sample spaces
    /// are identified cell-by-cell, so the family must have one atom per cell
    /// and the density must be strictly positive. Members of a categorical
    /// family are read off in closed form (full families come back with the
    /// gauge entry theta_0 = 0 in slot 0); anything else is moment-matched by
    /// damped Newton and reported as NotInFamily when that fails.
    pub fn project_pi(&self, fam: &ExponentialFamily) -> Result<DVector<f64>> {
        if fam.atoms() != self.len() {
            return Err(Error::Dimension {
                expected: fam.atoms(),
                got: self.len(),
            });
        }
        let rho = self.density();
        if rho.iter().any(|&r| r <= 0.0) {
            return Err(Error::Domain(
                "projection needs a strictly positive density".into(),
            ));
        }
        // probability masses under the family's base weights; rescaling psi
        // only shifts the recovered parameters by gauge
        let weighted: Vec<f64> = rho
            .iter()
            .zip(fam.weights().iter())
            .map(|(r, w)| r * w)
            .collect();
        let total: f64 = weighted.iter().sum();
        let masses: Vec<f64> = weighted.iter().map(|v| v / total).collect();

        match fam.kind() {
            FamilyKind::Categorical => {
                let raw = log_density(fam, &masses);
                Ok(DVector::from_fn(fam.atoms(), |j, _| raw[j] - raw[0]))
            }
            FamilyKind::CategoricalGauged => {
                let raw = log_density(fam, &masses);
                Ok(DVector::from_fn(fam.atoms() - 1, |i, _| raw[i + 1] - raw[0]))
            }
            FamilyKind::Generic => moment_match(fam, &masses),
        }
    }
}

/// log of the normalized density relative to base weights, minus the carrier.
fn log_density(fam: &ExponentialFamily, masses: &[f64]) -> Vec<f64> {
    masses
        .iter()
        .enumerate()
        .map(|(j, &p)| (p / fam.weights()[j]).ln() - fam.carrier()[j])
        .collect()
}

/// Damped Newton on grad Psi(theta) = eta_hat.
fn moment_match(fam: &ExponentialFamily, masses: &[f64]) -> Result<DVector<f64>> {
    let m = fam.params();
    let target = DVector::from_fn(m, |i, _| {
        (0..fam.atoms()).map(|k| masses[k] * fam.stats()[(k, i)]).sum::<f64>()
    });
    let tol = 1e-12 * target.amax().max(1.0);

    let mut theta = DVector::zeros(m);
    let mut mean = fam.mean_params(theta.as_slice())?.eta().clone();
    let mut resid = (&target - &mean).amax();
    for _ in 0..200 {
        if resid <= tol {
            return Ok(theta);
        }
        let step = fam
            .fisher_metric(theta.as_slice())
            .and_then(|g| Ok(g.inverse()? * (&target - &mean)))
            .map_err(|_| Error::NotInFamily { residual: resid })?;
        let mut t = 1.0;
        let mut advanced = false;
        while t >= 1.0 / 1024.0 {
            let cand = &theta + &step * t;
            if let Ok(mp) = fam.mean_params(cand.as_slice()) {
                let r = (&target - mp.eta()).amax();
                if r < resid {
                    theta = cand;
                    mean = mp.eta().clone();
                    resid = r;
                    advanced = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !advanced {
            return Err(Error::NotInFamily { residual: resid });
        }
    }
    if resid <= tol {
        Ok(theta)
    } else {
        Err(Error::NotInFamily { residual: resid })
    }
}

/// Coefficients of the Landau-Ginzburg free energy. The magnetization term
/// has no constitutive law behind it and stays a zero offset hook.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LGParams {
    pub alpha: f64,
    pub beta: f64,
    pub mass: f64,
    pub charge: f64,
    pub f0: f64,
    pub grid_spacing: f64,
    /// Per-cell vector potential, one vector of grid dimension per cell.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vector_potential: Option<Vec<Vec<f64>>>,
}

impl LGParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("mass", self.mass),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.charge.is_finite() || !self.f0.is_finite() {
            return Err(Error::Domain("charge and f0 must be finite".into()));
        }
        if !(self.grid_spacing > 0.0 && self.grid_spacing.is_finite()) {
            return Err(Error::Domain(format!(
                "grid_spacing must be positive, got {}",
                self.grid_spacing
            )));
        }
        Ok(())
    }

    /// Hook for the external-field magnetization contribution; fixed at zero.
    pub fn magnetization_offset(&self) -> f64 {
        0.0
    }
}

impl WaveFunction {
    fn require_grid<'a>(&'a self, p: &'a LGParams) -> Result<(&'a [usize], f64)> {
        p.validate()?;
        let shape = self.shape.as_deref().ok_or_else(|| {
            Error::Grid("differential operators need a regular grid (shape unknown)".into())
        })?;
        if let Some(s) = self.spacing {
            if (s - p.grid_spacing).abs() > 1e-12 * s.max(1.0) {
                return Err(Error::Grid(format!(
                    "wavefunction spacing {s} disagrees with grid_spacing {}",
                    p.grid_spacing
                )));
            }
        }
        if let Some(a) = &p.vector_potential {
            if a.len() != self.len() {
                return Err(Error::Grid(format!(
                    "vector potential has {} cells, expected {}",
                    a.len(),
                    self.len()
                )));
            }
            if a.iter().any(|row| row.len() != shape.len()) {
                return Err(Error::Grid(format!(
                    "vector potential entries must have {} components",
                    shape.len()
                )));
            }
        }
        Ok((shape, p.grid_spacing))
    }

    /// F[psi] = sum over cells of
    /// F0 - alpha |psi|^2 + (beta/2)|psi|^4 + (1/2m) |(-i grad - qA) psi|^2,
    /// times cell volume. Periodic central differences, cells summed in
    /// lexicographic order.
    pub fn lg_free_energy(&self, p: &LGParams) -> Result<f64> {
        let (shape, spacing) = self.require_grid(p)?;
        let derivs: Vec<Vec<Complex64>> = (0..shape.len())
            .map(|axis| covariant_derivative(shape, spacing, p, axis, &self.values))
            .collect();
        let mut total = 0.0;
        for k in 0..self.len() {
            let rho = self.values[k].norm_sqr();
            let kinetic: f64 = derivs.iter().map(|d| d[k].norm_sqr()).sum();
            total += (p.f0 - p.alpha * rho + 0.5 * p.beta * rho * rho
                + kinetic / (2.0 * p.mass))
                * self.cell_volume;
        }
        Ok(total + p.magnetization_offset())
    }

    /// Cell-wise magnitude of
    /// [(1/2m)(-i grad - qA)^2 - alpha + beta |psi|^2] psi.
    /// Zero everywhere iff psi solves the field equation on the grid.
    pub fn lg_equation_residual(&self, p: &LGParams) -> Result<Vec<f64>> {
        let (shape, spacing) = self.require_grid(p)?;
        let n = self.len();
        let mut squared = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..shape.len() {
            let first = covariant_derivative(shape, spacing, p, axis, &self.values);
            let second = covariant_derivative(shape, spacing, p, axis, &first);
            for k in 0..n {
                squared[k] += second[k];
            }
        }
        Ok((0..n)
            .map(|k| {
                let rho = self.values[k].norm_sqr();
                (squared[k] / (2.0 * p.mass) - p.alpha * self.values[k]
                    + p.beta * rho * self.values[k])
                    .norm()
            })
            .collect())
    }
}

/// D_a phi = -i (phi[+a] - phi[-a]) / (2 spacing) - q A_a phi, periodic.
fn covariant_derivative(
    shape: &[usize],
    spacing: f64,
    p: &LGParams,
    axis: usize,
    phi: &[Complex64],
) -> Vec<Complex64> {
    (0..phi.len())
        .map(|k| {
            let fwd = phi[neighbor(shape, k, axis, 1)];
            let bwd = phi[neighbor(shape, k, axis, -1)];
            let grad = (fwd - bwd) / (2.0 * spacing);
            let a_k = p
                .vector_potential
                .as_ref()
                .map_or(0.0, |a| a[k][axis]);
            -Complex64::i() * grad - p.charge * a_k * phi[k]
        })
        .collect()
}

fn coords_of(shape: &[usize], mut idx: usize) -> Vec<usize> {
    let mut c = vec![0usize; shape.len()];
    for a in (0..shape.len()).rev() {
        c[a] = idx % shape[a];
        idx /= shape[a];
    }
    c
}

fn index_of(shape: &[usize], c: &[usize]) -> usize {
    c.iter().zip(shape).fold(0, |acc, (&ci, &n)| acc * n + ci)
}

fn neighbor(shape: &[usize], idx: usize, axis: usize, delta: i64) -> usize {
    let mut c = coords_of(shape, idx);
    let n = shape[axis] as i64;
    c[axis] = (c[axis] as i64 + delta).rem_euclid(n) as usize;
    index_of(shape, &c)
}

/// On-disk JSON form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveFunctionFile {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub spacing: Option<f64>,
    pub cell_volume: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub points: Option<Vec<Vec<f64>>>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl WaveFunction {
    pub fn to_file(&self) -> WaveFunctionFile {
        WaveFunctionFile {
            schema_version: SCHEMA_VERSION,
            shape: self.shape.clone(),
            spacing: self.spacing,
            cell_volume: self.cell_volume,
            points: self.points.clone(),
            re: self.values.iter().map(|v| v.re).collect(),
            im: self.values.iter().map(|v| v.im).collect(),
        }
    }

    pub fn from_file(f: WaveFunctionFile) -> Result<Self> {
        if f.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported wavefunction schema version {}",
                f.schema_version
            )));
        }
        if f.re.len() != f.im.len() {
            return Err(Error::Parse(format!(
                "re/im length mismatch: {} vs {}",
                f.re.len(),
                f.im.len()
            )));
        }
        let values: Vec<Complex64> = f
            .re
            .iter()
            .zip(f.im.iter())
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        match (f.shape, f.spacing) {
            (Some(shape), Some(spacing)) => {
                let psi = WaveFunction::on_grid(shape, spacing, values)?;
                if (psi.cell_volume - f.cell_volume).abs() > 1e-12 * psi.cell_volume {
                    return Err(Error::Parse(
                        "cell_volume disagrees with spacing^dim".into(),
                    ));
                }
                Ok(psi)
            }
            (None, None) => Self::build(values, f.cell_volume, f.points, None, None),
            _ => Err(Error::Parse(
                "shape and spacing must be given together".into(),
            )),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    /// Columns x0..x{d-1},re,im,cell_volume; one row per cell. Grid structure
    /// is not representable here, so reimported functions only support the
    /// algebraic operations.
    pub fn to_csv(&self) -> Result<String> {
        let d = self.points.as_ref().map_or(0, |p| p[0].len());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        header.extend(["re".into(), "im".into(), "cell_volume".into()]);
        w.write_record(&header)?;
        for (k, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = Vec::with_capacity(d + 3);
            if let Some(points) = &self.points {
                row.extend(points[k].iter().map(|c| format_float(*c)));
            }
            row.push(format_float(v.re));
            row.push(format_float(v.im));
            row.push(format_float(self.cell_volume));
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.clone();
        let d = headers.iter().take_while(|h| h.starts_with('x')).count();
        let expected: Vec<String> = (0..d)
            .map(|i| format!("x{i}"))
            .chain(["re".into(), "im".into(), "cell_volume".into()])
            .collect();
        if headers.iter().collect::<Vec<_>>() != expected.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::Parse(format!(
                "expected columns x0..x{},re,im,cell_volume",
                d.saturating_sub(1)
            )));
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut volume: Option<f64> = None;
        for record in r.records() {
            let record = record?;
            let nums: Vec<f64> = record
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            if nums.len() != d + 3 {
                return Err(Error::Parse("short row".into()));
            }
            points.push(nums[..d].to_vec());
            values.push(Complex64::new(nums[d], nums[d + 1]));
            let v = nums[d + 2];
            match volume {
                None => volume = Some(v),
                Some(prev) if prev == v => {}
                Some(prev) => {
                    return Err(Error::Parse(format!(
                        "cell_volume varies across rows: {prev} vs {v}"
                    )))
                }
            }
        }
        let volume = volume.ok_or_else(|| Error::Parse("no data rows".into()))?;
        let points = if d == 0 { None } else { Some(points) };
        Self::build(values, volume, points, None, None)
    }
}

fn format_float(v: f64) -> String {
    let mut buf = ryu_string(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

// shortest round-trip decimal, same convention the JSON reports use
fn ryu_string(v: f64) -> String {
    let mut out = Vec::new();
    serde_json::to_writer(&mut out, &v).expect("float serialization");
    String::from_utf8(out).expect("ascii float")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::ExponentialFamily;
    use nalgebra::{DMatrix, DVector};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params(alpha: f64, beta: f64) -> LGParams {
        LGParams {
            alpha,
            beta,
            mass: 1.0,
            charge: 0.0,
            f0: 0.25,
            grid_spacing: 0.5,
            vector_potential: None,
        }
    }

    #[test]
    fn density_frozen_values() {
        let psi = WaveFunction::from_values(vec![c(1.0, 0.0), c(0.0, 2.0)], 1.0).unwrap();
        let psi = psi.normalized().unwrap();
        let rho = psi.density();
        assert!((rho[0] - 0.2).abs() < 1e-15);
        assert!((rho[1] - 0.8).abs() < 1e-15);
        let rotated = psi.phase_shifted(1.234).density();
        for (a, b) in rho.iter().zip(rotated.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn normalize_frozen_values() {
        let psi = WaveFunction::from_values(vec![c(2.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        let n = psi.normalized().unwrap();
        assert_eq!(n.values()[0], c(1.0, 0.0));

        let four = WaveFunction::from_values(vec![c(1.0, 0.0); 4], 1.0).unwrap();
        let n4 = four.normalized().unwrap();
        for v in n4.values() {
            assert!((v.re - 0.5).abs() < 1e-15);
        }
        assert!((n4.mass() - 1.0).abs() < 1e-12);

        let again = n4.normalized().unwrap();
        for (a, b) in again.values().iter().zip(n4.values()) {
            assert!((a - b).norm() < 1e-15);
        }

        let zero = WaveFunction::from_values(vec![c(0.0, 0.0); 3], 1.0).unwrap();
        assert!(matches!(zero.normalized(), Err(Error::ZeroFunction)));
    }

    #[test]
    fn phase_fiber_is_a_circle() {
        let psi = WaveFunction::from_values(vec![c(0.3, -0.4), c(1.0, 0.2)], 1.0).unwrap();
        let same = psi.phase_shifted(0.0);
        assert_eq!(same.values(), psi.values());
        let flipped = psi.phase_shifted(std::f64::consts::PI);
        assert!((flipped.values()[0] + psi.values()[0]).norm() < 1e-15);
        let around = psi.phase_shifted(2.0 * std::f64::consts::PI);
        for (a, b) in around.values().iter().zip(psi.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn projection_reads_off_categorical_parameters() {
        let fam = ExponentialFamily::categorical(3);
        let rho: [f64; 3] = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        let psi =
            WaveFunction::from_values(rho.iter().map(|&r| c(r.sqrt(), 0.0)).collect(), 1.0).unwrap();
        let theta = psi.project_pi(&fam).unwrap();
        assert_eq!(theta[0], 0.0);
        assert!((theta[1] - 2f64.ln()).abs() < 1e-12);
        assert!((theta[2] - 3f64.ln()).abs() < 1e-12);

        // the fiber collapses
        let rotated = psi.phase_shifted(0.77);
        let theta2 = rotated.project_pi(&fam).unwrap();
        assert!((&theta - &theta2).amax() < 1e-10);
    }

    #[test]
    fn projection_roundtrips_gauged_family() {
        let fam = ExponentialFamily::categorical_gauged(4);
        let star = [0.3, -0.8, 1.1];
        let masses = fam.masses(&star).unwrap();
        let psi = WaveFunction::from_values(
            masses.iter().map(|m| c(m.sqrt(), 0.0)).collect(),
            1.0,
        )
        .unwrap();
        let theta = psi.project_pi(&fam).unwrap();
        for i in 0..3 {
            assert!((theta[i] - star[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_moment_matches_generic_family() {
        let fam = ExponentialFamily::new(
            FamilyKind::Generic,
            DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]),
            DVector::zeros(3),
            DVector::from_element(3, 1.0),
            vec!["a".into(), "b".into(), "c".into()],
            false,
        )
        .unwrap();
        let star = [0.7];
        let masses = fam.masses(&star).unwrap();
        let psi = WaveFunction::from_values(
            masses.iter().map(|m| c(m.sqrt(), 0.0)).collect(),
            1.0,
        )
        .unwrap();
        let theta = psi.project_pi(&fam).unwrap();
        assert!((theta[0] - star[0]).abs() < 1e-10);

        let rotated = psi.phase_shifted(-2.1).project_pi(&fam).unwrap();
        assert!((theta[0] - rotated[0]).abs() < 1e-10);
    }

    #[test]
    fn projection_reports_failure() {
        // collinear statistics: Fisher is singular away from the solution
        let fam = ExponentialFamily::new(
            FamilyKind::Generic,
            DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]),
            DVector::zeros(3),
            DVector::from_element(3, 1.0),
            vec!["a".into(), "b".into(), "c".into()],
            false,
        )
        .unwrap();
        let psi = WaveFunction::from_values(
            vec![c(0.8, 0.0), c(0.5, 0.0), c(0.1, 0.0)],
            1.0,
        )
        .unwrap();
        match psi.project_pi(&fam) {
            Err(Error::NotInFamily { residual }) => assert!(residual > 0.0),
            other => panic!("expected NotInFamily, got {other:?}"),
        }
    }

    #[test]
    fn projection_rejects_vanishing_density() {
        let fam = ExponentialFamily::categorical(2);
        let psi = WaveFunction::from_values(vec![c(1.0, 0.0), c(0.0, 0.0)], 1.0).unwrap();
        assert!(matches!(psi.project_pi(&fam), Err(Error::Domain(_))));
    }

    #[test]
    fn lg_energy_frozen_values() {
        let p = params(1.3, 0.7);
        let cells = 16;
        let volume = cells as f64 * 0.25;

        let zero = WaveFunction::on_grid(vec![4, 4], 0.5, vec![c(0.0, 0.0); cells]).unwrap();
        assert!((zero.lg_free_energy(&p).unwrap() - p.f0 * volume).abs() < 1e-12);
        assert!(zero.lg_equation_residual(&p).unwrap().iter().all(|&r| r == 0.0));

        let min = (p.alpha / p.beta).sqrt();
        let constant =
            WaveFunction::on_grid(vec![4, 4], 0.5, vec![c(min, 0.0); cells]).unwrap();
        let want = (p.f0 - p.alpha * p.alpha / (2.0 * p.beta)) * volume;
        assert!((constant.lg_free_energy(&p).unwrap() - want).abs() < 1e-12);
        for r in constant.lg_equation_residual(&p).unwrap() {
            assert!(r < 1e-12);
        }

        // doubled amplitude: the cubic no longer cancels
        let doubled =
            WaveFunction::on_grid(vec![4, 4], 0.5, vec![c(2.0 * min, 0.0); cells]).unwrap();
        for r in doubled.lg_equation_residual(&p).unwrap() {
            assert!((r - 3.0 * p.alpha * 2.0 * min).abs() < 1e-12);
        }
    }

    #[test]
    fn nonconstant_perturbation_costs_kinetic_energy() {
        let p = params(1.3, 0.7);
        let min = (p.alpha / p.beta).sqrt();
        let values: Vec<Complex64> = (0..8)
            .map(|k| c(min + 0.1 * (k as f64 * 0.9).sin(), 0.0))
            .collect();
        let psi = WaveFunction::on_grid(vec![8], 0.5, values).unwrap();
        let total = psi.lg_free_energy(&p).unwrap();
        // Landau part alone, no derivatives
        let landau: f64 = psi
            .density()
            .iter()
            .map(|rho| (p.f0 - p.alpha * rho + 0.5 * p.beta * rho * rho) * psi.cell_volume())
            .sum();
        assert!(total > landau + 1e-6);

        // and the energy is phase invariant
        let rotated = psi.phase_shifted(0.9).lg_free_energy(&p).unwrap();
        assert!((total - rotated).abs() < 1e-12);
    }

    #[test]
    fn vector_potential_enters_covariantly() {
        let mut p = params(1.3, 0.7);
        p.charge = 0.8;
        let cells = 8;
        p.vector_potential = Some(vec![vec![0.6]; cells]);
        let min = (p.alpha / p.beta).sqrt();
        let psi = WaveFunction::on_grid(vec![cells], 0.5, vec![c(min, 0.0); cells]).unwrap();

        let qa = p.charge * 0.6;
        let volume = cells as f64 * 0.5;
        let want = (p.f0 - p.alpha * min * min + 0.5 * p.beta * min.powi(4)
            + qa * qa * min * min / (2.0 * p.mass))
            * volume;
        assert!((psi.lg_free_energy(&p).unwrap() - want).abs() < 1e-12);

        let want_res = qa * qa * min / (2.0 * p.mass);
        for r in psi.lg_equation_residual(&p).unwrap() {
            assert!((r - want_res).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_errors() {
        assert!(matches!(
            WaveFunction::on_grid(vec![2, 2], 0.5, vec![c(1.0, 0.0); 3]),
            Err(Error::Grid(_))
        ));
        assert!(matches!(
            WaveFunction::on_grid(vec![2, 2, 2, 2], 0.5, vec![c(1.0, 0.0); 16]),
            Err(Error::Grid(_))
        ));

        let p = params(1.0, 1.0);
        let flat = WaveFunction::from_values(vec![c(1.0, 0.0); 4], 0.25).unwrap();
        assert!(matches!(flat.lg_free_energy(&p), Err(Error::Grid(_))));

        let mut bad = params(1.0, 1.0);
        bad.vector_potential = Some(vec![vec![0.1]; 3]);
        let psi = WaveFunction::on_grid(vec![4], 0.5, vec![c(1.0, 0.0); 4]).unwrap();
        assert!(matches!(psi.lg_free_energy(&bad), Err(Error::Grid(_))));

        let mut neg = params(1.0, 1.0);
        neg.alpha = -1.0;
        assert!(matches!(psi.lg_free_energy(&neg), Err(Error::Domain(_))));
    }

    #[test]
    fn json_roundtrip_keeps_grid() {
        let psi = WaveFunction::on_grid(
            vec![2, 2],
            0.5,
            vec![c(0.1, 0.2), c(0.3, -0.4), c(-0.5, 0.6), c(0.7, 0.8)],
        )
        .unwrap();
        let text = psi.to_json().unwrap();
        let back = WaveFunction::from_json(&text).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn csv_roundtrip_drops_grid() {
        let psi = WaveFunction::on_grid(vec![4], 0.5, vec![c(1.0, 0.5); 4]).unwrap();
        let text = psi.to_csv().unwrap();
        let back = WaveFunction::from_csv(&text).unwrap();
        assert_eq!(back.values(), psi.values());
        assert_eq!(back.cell_volume(), psi.cell_volume());
        assert_eq!(back.points(), psi.points());
        assert!(back.shape().is_none());
        let p = params(1.0, 1.0);
        assert!(matches!(back.lg_free_energy(&p), Err(Error::Grid(_))));
    }
}
