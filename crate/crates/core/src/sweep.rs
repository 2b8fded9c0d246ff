//! Seeded whole-module sweeps with serializable reports.
//!
//! Each sweep draws a deterministic point cloud from one stream of the run
//! seed, fans the per-point kernels out through [`exec::map_points`], and
//! reduces sequentially in input order. A report is therefore a pure
//! function of (inputs, seed, sample count), identical with and without the
//! `parallel` feature.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bhk::{self, ExponentMatrix};
use crate::cones::{
    cartan_frobenius_check, cartan_torus_flatness, cone_ma_check, geodesic, herm_from_coords,
    jordan_product, trace_form, CartanReport, ConeChartMetric, ConePoint,
};
use crate::error::{Error, Result};
use crate::exec::map_points;
use crate::expfam::{self, ExponentialFamily, MeanPoint};
use crate::hessian::{
    compatibility_residual, default_step, default_third_step, hessian_metric, hessian_metric_fd,
    ma_residual, structure_constants, third_tensor_fd, wdvv_residual,
};
use crate::kvn::{LGParams, WaveFunction};
use crate::potentials::BuiltinPotential;
use crate::riemann::{integrate_geodesic, GeodesicState};
use crate::syz::{
    self, hypersurface_fiber_dimension, isotropy_residual, moment_map, sample_fiber, MomentImage,
    SlicePolytope, WeightedProjectivePoint,
};

pub const DEFAULT_SEED: u64 = 1729;

/// Stream split of the run seed: one generator lane per module, so adding
/// samples to one sweep never shifts the draws of another.
pub mod streams {
    pub const POTENTIALS: u64 = 1;
    pub const FAMILIES: u64 = 2;
    pub const FIBRATION: u64 = 3;
    pub const CONES: u64 = 4;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fold_max(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Residual maxima of one Hessian-structure sweep over seeded interior
/// points of a built-in potential.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialSweep {
    pub potential: String,
    pub dim: usize,
    pub points: usize,
    /// max |det Hess phi - f| over the cloud.
    pub max_ma_residual: f64,
    /// same residual relative to max(1, f).
    pub max_ma_relative: f64,
    /// lowering the induced product against the third-derivative tensor.
    pub max_compatibility: f64,
    /// total-symmetry defect of the differenced third-derivative tensor.
    pub max_symmetry_defect: f64,
    /// closed forms against their finite-difference counterparts.
    pub max_fd_gap: f64,
    /// associativity constraint on the structure constants, report only.
    pub max_wdvv: f64,
    /// measured Monge-Ampere constant for the determinant families.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

pub fn sweep_potential(p: &BuiltinPotential, points: usize, seed: u64) -> Result<PotentialSweep> {
    use crate::hessian::Potential;
    let mut rng = stream_rng(seed, streams::POTENTIALS);
    let cloud: Vec<DVector<f64>> = (0..points).map(|_| p.sample(&mut rng)).collect();

    struct PointResult {
        ma: f64,
        ma_rel: f64,
        compat: f64,
        symmetry: f64,
        fd_gap: f64,
        wdvv: f64,
        kappa: f64,
    }

    let results: Vec<Result<PointResult>> = map_points(&cloud, |x| {
        let x = x.as_slice();
        let f = p.density(x);
        let ma = ma_residual(p, x, |y| p.density(y))?;
        let g = hessian_metric(p, x, default_step(x))?;
        let g_fd = hessian_metric_fd(p, x, default_step(x))?;
        let fd3 = third_tensor_fd(p, x, default_third_step(x))?;
        let a = p
            .third_closed(x)
            .ok_or_else(|| Error::Domain("corpus potentials carry closed third forms".into()))?;

        let scale_g = fold_max((0..g.dim()).flat_map(|i| {
            let e = g.entries();
            (0..g.dim()).map(move |j| e[(i, j)].abs())
        }))
        .max(1.0);
        let mut fd_gap = 0.0f64;
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                fd_gap = fd_gap.max((g.entries()[(i, j)] - g_fd.entries()[(i, j)]).abs() / scale_g);
            }
        }
        let mut scale_a = 1.0f64;
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                for k in 0..a.dim() {
                    scale_a = scale_a.max(a[(i, j, k)].abs());
                }
            }
        }
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                for k in 0..a.dim() {
                    fd_gap = fd_gap.max((a[(i, j, k)] - fd3.tensor[(i, j, k)]).abs() / scale_a);
                }
            }
        }

        let m = structure_constants(&g, &a)?;
        let compat = compatibility_residual(&g, &a, &m)?;
        let kappa = match p {
            BuiltinPotential::LogDet { size } => {
                let n = *size;
                let s = crate::potentials::sym_from_coords(n, x);
                g.det() * s.determinant().powi(n as i32 + 1)
            }
            _ => f64::NAN,
        };
        Ok(PointResult {
            ma: ma.abs(),
            ma_rel: ma.abs() / f.abs().max(1.0),
            compat,
            symmetry: fd3.symmetry_defect,
            fd_gap,
            wdvv: wdvv_residual(&m),
            kappa,
        })
    });

    let mut out = PotentialSweep {
        potential: p.label(),
        dim: p.dim(),
        points,
        max_ma_residual: 0.0,
        max_ma_relative: 0.0,
        max_compatibility: 0.0,
        max_symmetry_defect: 0.0,
        max_fd_gap: 0.0,
        max_wdvv: 0.0,
        kappa: None,
    };
    let mut kappa_sum = 0.0;
    let mut kappa_count = 0usize;
    for r in results {
        let r = r?;
        out.max_ma_residual = out.max_ma_residual.max(r.ma);
        out.max_ma_relative = out.max_ma_relative.max(r.ma_rel);
        out.max_compatibility = out.max_compatibility.max(r.compat);
        out.max_symmetry_defect = out.max_symmetry_defect.max(r.symmetry);
        out.max_fd_gap = out.max_fd_gap.max(r.fd_gap);
        out.max_wdvv = out.max_wdvv.max(r.wdvv);
        if r.kappa.is_finite() {
            kappa_sum += r.kappa;
            kappa_count += 1;
        }
    }
    if kappa_count > 0 {
        out.kappa = Some(kappa_sum / kappa_count as f64);
    }
    Ok(out)
}

/// Duality residuals of the categorical family: parameter roundtrips,
/// Fenchel gaps, the mean-side Monge-Ampere certificate, and the exact
/// covariance against a differenced Hessian of the log-partition.
#[derive(Debug, Clone, Serialize)]
pub struct FamilySweep {
    pub atoms: usize,
    pub points: usize,
    pub max_roundtrip: f64,
    pub max_fenchel_gap: f64,
    pub max_dual_ma_relative: f64,
    pub max_fisher_fd_gap: f64,
    /// Legendre mismatch of the experimental quadrature family, report only.
    pub quadrature_mismatch: f64,
}

pub fn sweep_family(atoms: usize, points: usize, seed: u64) -> Result<FamilySweep> {
    if atoms < 2 {
        return Err(Error::Dimension { expected: 2, got: atoms });
    }
    let fam = ExponentialFamily::categorical(atoms);
    let mut rng = stream_rng(seed, streams::FAMILIES);

    let thetas: Vec<Vec<f64>> = (0..points)
        .map(|_| {
            let raw: Vec<f64> = (0..atoms).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            raw
        })
        .collect();
    let entropy = BuiltinPotential::SimplexEntropy { atoms };
    let etas: Vec<MeanPoint> = (0..points)
        .map(|_| {
            let chart = entropy.sample(&mut rng);
            let head = 1.0 - chart.iter().sum::<f64>();
            let mut full = vec![head];
            full.extend(chart.iter());
            MeanPoint::from_slice(&full).expect("sampler stays interior")
        })
        .collect();

    let theta_results: Vec<Result<(f64, f64)>> = map_points(&thetas, |raw| {
        let psi = fam.log_partition(raw)?;
        let gauged: Vec<f64> = raw.iter().map(|t| t - psi).collect();
        let eta = fam.mean_params(&gauged)?;
        let back = expfam::natural_params(&eta)?;
        let roundtrip = gauged
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);

        // the covariance of the full indicator family is singular, so the
        // Fisher check runs on the gauge-fixed coordinates
        let reduced = ExponentialFamily::categorical_gauged(atoms);
        let theta_red: Vec<f64> = (1..atoms).map(|i| raw[i] - raw[0]).collect();
        let fisher = reduced.fisher_metric(&theta_red)?;
        let fd = hessian_metric_fd(&reduced.as_potential(), &theta_red, default_step(&theta_red))?;
        let mut gap = 0.0f64;
        for i in 0..atoms - 1 {
            for j in 0..atoms - 1 {
                gap = gap.max((fisher.entries()[(i, j)] - fd.entries()[(i, j)]).abs());
            }
        }
        Ok((roundtrip, gap))
    });
    let eta_results: Vec<Result<(f64, f64)>> = map_points(&etas, |eta| {
        let gap = expfam::fenchel_gap(&fam, eta)?.abs();
        let (det, target) = expfam::dual_ma_check(eta)?;
        Ok((gap, (det - target).abs() / target))
    });

    let mut out = FamilySweep {
        atoms,
        points,
        max_roundtrip: 0.0,
        max_fenchel_gap: 0.0,
        max_dual_ma_relative: 0.0,
        max_fisher_fd_gap: 0.0,
        quadrature_mismatch: 0.0,
    };
    for r in theta_results {
        let (roundtrip, fisher_gap) = r?;
        out.max_roundtrip = out.max_roundtrip.max(roundtrip);
        out.max_fisher_fd_gap = out.max_fisher_fd_gap.max(fisher_gap);
    }
    for r in eta_results {
        let (fenchel, dual) = r?;
        out.max_fenchel_gap = out.max_fenchel_gap.max(fenchel);
        out.max_dual_ma_relative = out.max_dual_ma_relative.max(dual);
    }
    let quad = ExponentialFamily::simplex_lebesgue(atoms.min(4), 48)?;
    out.quadrature_mismatch =
        expfam::legendre_discrepancy(&quad, &vec![0.0; atoms.min(4) - 1])?;
    Ok(out)
}

/// One invertible polynomial with its weight system, atoms, symmetry group
/// and transposed partner. Fully deterministic, no sampling involved.
#[derive(Debug, Clone, Serialize)]
pub struct MirrorReport {
    pub polynomial: String,
    pub weights: Vec<u64>,
    pub degree: u64,
    pub calabi_yau: bool,
    pub group_factors: Vec<u64>,
    pub group_order: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BhkReport {
    pub polynomial: String,
    pub variables: usize,
    pub determinant: i128,
    pub atoms: Vec<String>,
    pub weights: Vec<u64>,
    pub degree: u64,
    pub calabi_yau: bool,
    pub group_factors: Vec<u64>,
    pub group_order: u64,
    pub mirror: MirrorReport,
}

pub fn describe_polynomial(e: &ExponentMatrix) -> Result<BhkReport> {
    let atoms = bhk::classify_atoms(e)?;
    let ws = bhk::weights(e)?;
    let group = bhk::symmetry_group(e)?;
    let mirror = bhk::transpose_mirror(e);
    let mirror_ws = bhk::weights(&mirror)?;
    let mirror_group = bhk::symmetry_group(&mirror)?;
    Ok(BhkReport {
        polynomial: e.polynomial(),
        variables: e.dim(),
        determinant: e.det(),
        atoms: atoms.iter().map(|a| a.summary(e.vars())).collect(),
        weights: ws.weights.clone(),
        degree: ws.degree,
        calabi_yau: ws.is_calabi_yau(),
        group_factors: group.invariant_factors.clone(),
        group_order: group.order,
        mirror: MirrorReport {
            polynomial: mirror.polynomial(),
            weights: mirror_ws.weights.clone(),
            degree: mirror_ws.degree,
            calabi_yau: mirror_ws.is_calabi_yau(),
            group_factors: mirror_group.invariant_factors.clone(),
            group_order: mirror_group.order,
        },
    })
}

/// Fibration diagnostics over the moment polytope of one weight system:
/// invariance of the moment map on group orbits, fiber sampling residuals,
/// isotropy of the torus directions, and the solution-set dimension of the
/// hypersurface over seeded interior points.
#[derive(Debug, Clone, Serialize)]
pub struct FibrationSweep {
    pub polynomial: String,
    pub weights: Vec<u64>,
    pub degree: u64,
    pub slice_level: f64,
    pub slice_empty: bool,
    pub samples: usize,
    pub max_moment_invariance: f64,
    pub max_fiber_roundtrip: f64,
    pub max_level_defect: f64,
    pub max_isotropy: f64,
    pub legendre_roundtrip: f64,
    /// solution-set dimension -> count over the probed fibers; "none" counts
    /// fibers where no solution was found.
    pub fiber_dims: BTreeMap<String, usize>,
}

fn interior_eta(rng: &mut ChaCha8Rng, n: usize) -> MomentImage {
    let margin = (0.8 / n as f64).min(0.12);
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    let scale = 1.0 - n as f64 * margin;
    MomentImage::new(draws.iter().map(|d| margin + scale * d / total).collect())
        .expect("margined draws stay interior")
}

pub fn sweep_fibration(
    e: &ExponentMatrix,
    samples: usize,
    level: Option<f64>,
    seed: u64,
) -> Result<FibrationSweep> {
    let ws = bhk::weights(e)?;
    let n = e.dim();
    let slice = match level {
        Some(c) => SlicePolytope::with_level(&ws, c),
        None => SlicePolytope::new(&ws),
    };
    let mut rng = stream_rng(seed, streams::FIBRATION);

    // orbit invariance: seeded fiber points acted on by seeded group
    // elements, compared through the canonical representative
    let bases: Vec<WeightedProjectivePoint> = (0..4)
        .map(|k| {
            let eta = interior_eta(&mut rng, n);
            sample_fiber(&eta, &ws.weights, 1, seed ^ (0x5eed + k as u64))
                .map(|mut v| v.pop().expect("one point requested"))
        })
        .collect::<Result<Vec<_>>>()?;
    let elements: Vec<(usize, C64)> = (0..samples)
        .map(|i| {
            let base = i % bases.len();
            let t = if i % 3 == 0 {
                C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
            } else {
                let modulus = rng.gen_range(0.05..3.0);
                C64::from_polar(modulus, rng.gen_range(0.0..std::f64::consts::TAU))
            };
            (base, t)
        })
        .collect();
    let invariance: Vec<Result<f64>> = map_points(&elements, |(base, t)| {
        let p = &bases[*base];
        let reference = moment_map(&p.canonical())?;
        let moved = moment_map(&p.act(*t)?.canonical())?;
        Ok(reference
            .as_slice()
            .iter()
            .zip(moved.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max))
    });

    // fiber residuals and isotropy over seeded interior images
    let etas: Vec<(MomentImage, u64)> = (0..samples)
        .map(|k| (interior_eta(&mut rng, n), seed ^ (0xf1be + k as u64)))
        .collect();
    let fiber_results: Vec<Result<(f64, f64, f64)>> = map_points(&etas, |(eta, s)| {
        let pts = sample_fiber(eta, &ws.weights, 2, *s)?;
        let mut roundtrip = 0.0f64;
        let mut level_defect = 0.0f64;
        let mut isotropy = 0.0f64;
        for p in &pts {
            let back = moment_map(p)?;
            roundtrip = roundtrip.max(
                back.as_slice()
                    .iter()
                    .zip(eta.as_slice())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max),
            );
            level_defect = level_defect.max((p.level() - 1.0).abs());
            isotropy = isotropy.max(isotropy_residual(p, 40, s ^ 0x150));
        }
        Ok((roundtrip, level_defect, isotropy))
    });

    // solution-set dimension over a handful of fibers
    let probes: Vec<(MomentImage, u64)> = (0..samples.min(6))
        .map(|k| (interior_eta(&mut rng, n), seed ^ (0xd1a + k as u64)))
        .collect();
    let dims: Vec<Result<Option<usize>>> = map_points(&probes, |(eta, s)| {
        match hypersurface_fiber_dimension(e, &ws, eta, *s) {
            Ok(d) => Ok(Some(d)),
            Err(Error::NoSolutionFound) => Ok(None),
            Err(other) => Err(other),
        }
    });

    let mut out = FibrationSweep {
        polynomial: e.polynomial(),
        weights: ws.weights.clone(),
        degree: ws.degree,
        slice_level: slice.level(),
        slice_empty: slice.is_empty(1e-9),
        samples,
        max_moment_invariance: 0.0,
        max_fiber_roundtrip: 0.0,
        max_level_defect: 0.0,
        max_isotropy: 0.0,
        legendre_roundtrip: 0.0,
        fiber_dims: BTreeMap::new(),
    };
    for r in invariance {
        out.max_moment_invariance = out.max_moment_invariance.max(r?);
    }
    for r in fiber_results {
        let (roundtrip, level_defect, isotropy) = r?;
        out.max_fiber_roundtrip = out.max_fiber_roundtrip.max(roundtrip);
        out.max_level_defect = out.max_level_defect.max(level_defect);
        out.max_isotropy = out.max_isotropy.max(isotropy);
    }
    for r in dims {
        let key = match r? {
            Some(d) => d.to_string(),
            None => "none".to_string(),
        };
        *out.fiber_dims.entry(key).or_insert(0) += 1;
    }

    // dual chart roundtrip through the categorical family
    let fam = ExponentialFamily::categorical(n);
    for (eta, _) in &etas {
        let theta = syz::legendre_chart(eta)?;
        let back = fam.mean_params(&theta)?;
        let worst = back
            .as_slice()
            .iter()
            .zip(eta.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        out.legendre_roundtrip = out.legendre_roundtrip.max(worst);
    }
    Ok(out)
}

/// Symmetric-cone diagnostics at one rank: the Monge-Ampere constant over
/// seeded points, closed geodesics against the generic integrator, the
/// Frobenius certificate of the Cartan subalgebra and its flatness.
#[derive(Debug, Clone, Serialize)]
pub struct ConeSweep {
    pub n: usize,
    pub points: usize,
    pub kappa_target: f64,
    pub kappa_mean: f64,
    /// (max - min) of the measured constant, relative to the target.
    pub ratio_spread: f64,
    pub max_ratio_error: f64,
    pub geodesic_ode_gap: f64,
    pub max_trace_invariance: f64,
    pub cartan: CartanReport,
    pub cartan_flatness: f64,
}

pub fn sweep_cone(n: usize, points: usize, seed: u64) -> Result<ConeSweep> {
    if n < 2 {
        return Err(Error::Dimension { expected: 2, got: n });
    }
    let mut rng = stream_rng(seed, streams::CONES);
    let sampler = BuiltinPotential::LogDet { size: n };
    let cloud: Vec<Vec<f64>> = (0..points).map(|_| sampler.sample(&mut rng).as_slice().to_vec()).collect();

    let ratios: Vec<Result<f64>> = map_points(&cloud, |coords| {
        let x = ConePoint::from_real(crate::potentials::sym_from_coords(n, coords))?;
        let (det_hess, target) = cone_ma_check(&x)?;
        let kappa = 2f64.powi((n * (n - 1) / 2) as i32);
        Ok(det_hess / target * kappa)
    });

    let kappa_target = 2f64.powi((n * (n - 1) / 2) as i32);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for r in ratios {
        let k = r?;
        lo = lo.min(k);
        hi = hi.max(k);
        sum += k;
    }

    // one closed geodesic against the generic chart integrator
    let x0 = ConePoint::from_real(crate::potentials::sym_from_coords(
        n,
        sampler.sample(&mut rng).as_slice(),
    ))?;
    let dim = n * (n + 1) / 2;
    let v_coords: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.4..=0.4)).collect();
    let v = crate::potentials::sym_from_coords(n, &v_coords).map(|e| C64::new(e, 0.0));
    let t_end = 0.5;
    let closed = geodesic(&x0, &v, t_end)?;
    let field = ConeChartMetric { n };
    let start = GeodesicState {
        position: crate::potentials::coords_from_sym(&x0.real_part()?).as_slice().to_vec(),
        velocity: v_coords.clone(),
    };
    let path = integrate_geodesic(&field, &start, t_end, 256, 1e-5)?;
    let end = path.last().expect("integrator returns the endpoint");
    let closed_coords = crate::potentials::coords_from_sym(&closed.real_part()?);
    let geodesic_ode_gap = end
        .position
        .iter()
        .zip(closed_coords.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    // associativity of the trace form over seeded Hermitian triples
    let triples: Vec<[DMatrix<C64>; 3]> = (0..points)
        .map(|_| {
            let mut draw = || {
                let coords: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                herm_from_coords(n, &coords)
            };
            [draw(), draw(), draw()]
        })
        .collect();
    let invariance: Vec<Result<f64>> = map_points(&triples, |[x, y, z]| {
        let left = trace_form(&jordan_product(x, y)?, z)?;
        let right = trace_form(x, &jordan_product(y, z)?)?;
        Ok((left - right).abs())
    });
    let mut max_trace = 0.0f64;
    for r in invariance {
        max_trace = max_trace.max(r?);
    }

    Ok(ConeSweep {
        n,
        points,
        kappa_target,
        kappa_mean: sum / points.max(1) as f64,
        ratio_spread: (hi - lo).max(0.0) / kappa_target,
        max_ratio_error: (hi - kappa_target).abs().max((lo - kappa_target).abs()) / kappa_target,
        geodesic_ode_gap,
        max_trace_invariance: max_trace,
        cartan: cartan_frobenius_check(n, 40, seed ^ 0xca7a)?,
        cartan_flatness: cartan_torus_flatness(n, 3, seed ^ 0xf1a7)?,
    })
}

/// Free-energy and projection summary of one stored wavefunction. The
/// differential quantities need a regular grid and stay `None` for
/// scattered points; the phase fields certify gauge invariance of
/// everything reported.
#[derive(Debug, Clone, Serialize)]
pub struct LgReport {
    pub cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<usize>>,
    pub mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_equation_residual: Option<f64>,
    pub theta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_energy_drift: Option<f64>,
    pub phase_theta_drift: f64,
}

fn on_grid_only<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Grid(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn lg_report(psi: &WaveFunction, params: &LGParams) -> Result<LgReport> {
    let normalized = psi.normalized()?;
    let fam = ExponentialFamily::categorical(psi.len());
    let theta = normalized.project_pi(&fam)?;
    let free_energy = on_grid_only(psi.lg_free_energy(params))?;
    let residual = on_grid_only(psi.lg_equation_residual(params))?
        .map(|r| r.into_iter().fold(0.0f64, f64::max));

    let rotated = psi.phase_shifted(0.7);
    let phase_energy_drift = match free_energy {
        Some(f) => Some((rotated.lg_free_energy(params)? - f).abs()),
        None => None,
    };
    let theta_rot = rotated.normalized()?.project_pi(&fam)?;
    let phase_theta_drift = theta
        .iter()
        .zip(theta_rot.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    Ok(LgReport {
        cells: psi.len(),
        grid: psi.shape().map(|s| s.to_vec()),
        mass: psi.mass(),
        free_energy,
        max_equation_residual: residual,
        theta: theta.as_slice().to_vec(),
        phase_energy_drift,
        phase_theta_drift,
    })
}
