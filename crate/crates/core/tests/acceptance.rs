//! End-to-end acceptance gates, one test per criterion. Each prints a
//! single PASS/FAIL line with its worst residuals; tolerances are pinned
//! here and nowhere else. The CLI determinism gate lives with the binary.

use gema_core::bhk::{self, Atom};
use gema_core::expfam::ExponentialFamily;
use gema_core::kvn::{LGParams, WaveFunction};
use gema_core::potentials::BuiltinPotential;
use gema_core::sweep::{
    describe_polynomial, lg_report, sweep_cone, sweep_family, sweep_fibration, sweep_potential,
    DEFAULT_SEED,
};
use gema_core::syz::TorusFiber;
use num_complex::Complex64;

const POINTS: usize = 100;

const MA_TOL: f64 = 1e-5;
const COMPAT_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-6;
const DUAL_MA_TOL: f64 = 1e-5;
const ROUNDTRIP_TOL: f64 = 1e-8;
const FENCHEL_TOL: f64 = 1e-10;
const ORBIT_TOL: f64 = 1e-12;
const FIBER_TOL: f64 = 1e-12;
const ISOTROPY_TOL: f64 = 1e-12;
const SPREAD_TOL: f64 = 1e-5;
const GEODESIC_TOL: f64 = 1e-6;
const TRACE_TOL: f64 = 1e-12;
const FLATNESS_TOL: f64 = 1e-6;
const LG_RESIDUAL_TOL: f64 = 1e-12;
const ENERGY_TOL: f64 = 1e-10;
const PHASE_TOL: f64 = 1e-10;

fn report(name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance {name}: {} ({detail})",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "{name}: {detail}");
}

#[test]
fn hessian_structure() {
    let mut worst_ma = 0.0f64;
    let mut worst_compat = 0.0f64;
    let mut worst_sym = 0.0f64;
    for p in BuiltinPotential::standard_corpus() {
        let s = sweep_potential(&p, POINTS, DEFAULT_SEED).unwrap();
        worst_ma = worst_ma.max(s.max_ma_residual);
        worst_compat = worst_compat.max(s.max_compatibility);
        worst_sym = worst_sym.max(s.max_symmetry_defect);
    }
    let ok = worst_ma <= MA_TOL && worst_compat <= COMPAT_TOL && worst_sym <= SYMMETRY_TOL;
    report(
        "hessian-structure",
        ok,
        &format!("ma {worst_ma:.2e}, compat {worst_compat:.2e}, symmetry {worst_sym:.2e}"),
    );
}

#[test]
fn dual_monge_ampere() {
    let mut worst = 0.0f64;
    for atoms in 2..=6 {
        let s = sweep_family(atoms, POINTS, DEFAULT_SEED).unwrap();
        worst = worst.max(s.max_dual_ma_relative);
    }
    report(
        "dual-monge-ampere",
        worst <= DUAL_MA_TOL,
        &format!("relative residual {worst:.2e} over {POINTS} points per family"),
    );
}

#[test]
fn legendre_duality() {
    let mut worst_roundtrip = 0.0f64;
    let mut worst_fenchel = 0.0f64;
    for atoms in 2..=6 {
        let s = sweep_family(atoms, POINTS, DEFAULT_SEED).unwrap();
        worst_roundtrip = worst_roundtrip.max(s.max_roundtrip);
        worst_fenchel = worst_fenchel.max(s.max_fenchel_gap);
    }
    let ok = worst_roundtrip <= ROUNDTRIP_TOL && worst_fenchel <= FENCHEL_TOL;
    report(
        "legendre-duality",
        ok,
        &format!("roundtrip {worst_roundtrip:.2e}, fenchel {worst_fenchel:.2e}"),
    );
}

#[test]
fn mirror_arithmetic() {
    let quintic = bhk::parse_polynomial("x0^5 + x1^5 + x2^5 + x3^5 + x4^5").unwrap();
    let r = describe_polynomial(&quintic).unwrap();
    let quintic_ok = r.weights == vec![1, 1, 1, 1, 1]
        && r.degree == 5
        && r.calabi_yau
        && r.group_factors == vec![5, 5, 5, 5, 5]
        && r.group_order == 3125
        && r.atoms.len() == 5
        && bhk::classify_atoms(&quintic)
            .unwrap()
            .iter()
            .all(|a| matches!(a, Atom::Fermat { exponent: 5, .. }));

    let loop3 = bhk::parse_polynomial("x0^2*x1 + x1^2*x2 + x2^2*x0").unwrap();
    let l = describe_polynomial(&loop3).unwrap();
    let loop_ok = l.weights == vec![1, 1, 1]
        && l.degree == 3
        && l.calabi_yau
        && l.group_factors == vec![9]
        && l.group_order == 9
        && l.mirror.weights == vec![1, 1, 1]
        && l.mirror.group_order == 9;

    let chain = bhk::parse_polynomial("x0^3*x1 + x1^3").unwrap();
    let c = describe_polynomial(&chain).unwrap();
    let chain_ok = c.weights == vec![2, 3]
        && c.degree == 9
        && !c.calabi_yau
        && c.mirror.weights == vec![3, 2]
        && c.mirror.degree == 9;

    // transposing twice restores the exponent rows exactly
    let involution_ok = [&quintic, &loop3, &chain].iter().all(|e| {
        let back = bhk::transpose_mirror(&bhk::transpose_mirror(e));
        back.rows() == e.rows() && back.vars() == e.vars()
    });

    let ok = quintic_ok && loop_ok && chain_ok && involution_ok;
    report(
        "mirror-arithmetic",
        ok,
        &format!(
            "quintic {quintic_ok}, loop {loop_ok}, chain {chain_ok}, involution {involution_ok}"
        ),
    );
}

#[test]
fn torus_fibration() {
    let e = bhk::parse_polynomial("x0^5 + x1^5 + x2^5 + x3^5 + x4^5").unwrap();
    let s = sweep_fibration(&e, POINTS, None, DEFAULT_SEED).unwrap();

    let diag = TorusFiber::from_integers(&[vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 3]]).unwrap();
    let skew = TorusFiber::from_integers(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]).unwrap();
    let involution_ok = [diag, skew].iter().all(|f| {
        let back = f.dual_fiber().unwrap().dual_fiber().unwrap();
        back.basis() == f.basis()
    });

    let ok = s.max_moment_invariance <= ORBIT_TOL
        && s.max_fiber_roundtrip <= FIBER_TOL
        && s.max_isotropy <= ISOTROPY_TOL
        && s.slice_empty
        && involution_ok;
    report(
        "torus-fibration",
        ok,
        &format!(
            "orbit {:.2e}, fiber {:.2e}, isotropy {:.2e}, unit slice empty {}, dual involution {}",
            s.max_moment_invariance, s.max_fiber_roundtrip, s.max_isotropy, s.slice_empty,
            involution_ok
        ),
    );
}

#[test]
fn symmetric_cone() {
    let mut detail = String::new();
    let mut ok = true;
    for n in [2usize, 3] {
        let s = sweep_cone(n, 50, DEFAULT_SEED).unwrap();
        let exact_cartan = s.cartan.wdvv_residual == 0.0
            && s.cartan.compatibility_residual == 0.0
            && s.cartan.unit_residual == 0.0;
        let here = s.ratio_spread <= SPREAD_TOL
            && s.geodesic_ode_gap <= GEODESIC_TOL
            && s.max_trace_invariance <= TRACE_TOL
            && s.cartan_flatness <= FLATNESS_TOL
            && exact_cartan;
        ok &= here;
        detail.push_str(&format!(
            "n={n}: kappa {:.6} spread {:.2e} geodesic {:.2e} trace {:.2e} flat {:.2e} cartan-exact {exact_cartan}; ",
            s.kappa_mean, s.ratio_spread, s.geodesic_ode_gap, s.max_trace_invariance,
            s.cartan_flatness
        ));
    }
    report("symmetric-cone", ok, detail.trim_end_matches("; "));
}

#[test]
fn phase_projection() {
    let params = LGParams {
        alpha: 1.3,
        beta: 0.7,
        mass: 1.0,
        charge: 0.0,
        f0: 0.25,
        grid_spacing: 0.5,
        vector_potential: None,
    };
    let cells = 16;
    let amp = (params.alpha / params.beta).sqrt();
    let psi =
        WaveFunction::on_grid(vec![4, 4], 0.5, vec![Complex64::new(amp, 0.0); cells]).unwrap();
    let r = lg_report(&psi, &params).unwrap();

    let volume = cells as f64 * 0.25;
    let want = (params.f0 - params.alpha * params.alpha / (2.0 * params.beta)) * volume;
    let energy_err = (r.free_energy.unwrap() - want).abs();
    let residual = r.max_equation_residual.unwrap();
    let phase_energy = r.phase_energy_drift.unwrap();

    // the projection also has to agree across the phase fiber for a
    // non-uniform state
    let bumpy: Vec<Complex64> = (0..cells)
        .map(|k| Complex64::new(amp * (1.0 + 0.2 * ((k as f64) * 0.7).sin()), 0.0))
        .collect();
    let fam = ExponentialFamily::categorical(cells);
    let rough = WaveFunction::on_grid(vec![4, 4], 0.5, bumpy).unwrap();
    let theta = rough.normalized().unwrap().project_pi(&fam).unwrap();
    let theta_rot = rough
        .phase_shifted(1.3)
        .normalized()
        .unwrap()
        .project_pi(&fam)
        .unwrap();
    let theta_drift = (0..cells)
        .map(|i| (theta[i] - theta_rot[i]).abs())
        .fold(0.0f64, f64::max);

    let ok = residual <= LG_RESIDUAL_TOL
        && energy_err <= ENERGY_TOL
        && phase_energy <= PHASE_TOL
        && theta_drift <= PHASE_TOL;
    report(
        "phase-projection",
        ok,
        &format!(
            "equation residual {residual:.2e}, energy error {energy_err:.2e}, phase drift {phase_energy:.2e}/{theta_drift:.2e}"
        ),
    );
}
