//! Randomized structure checks. Exact identities (weight equations, chart
//! roundtrips, group orders) get property coverage here; the numeric
//! tolerances stay in the acceptance gates.

use num_complex::Complex64;
use proptest::collection::vec as pvec;
use proptest::prelude::*;

use gema_core::bhk::{self, Atom, ExponentMatrix};
use gema_core::cones::{herm_coords, herm_from_coords};
use gema_core::expfam::{self, ExponentialFamily, MeanPoint};
use gema_core::kvn::WaveFunction;
use gema_core::syz::{moment_map, WeightedProjectivePoint};

/// Atom shapes with all exponents >= 2, which keeps head detection
/// unambiguous under any relabeling of the variables.
#[derive(Debug, Clone)]
enum Shape {
    Fermat(u64),
    Chain(Vec<u64>),
    Loop(Vec<u64>),
}

impl Shape {
    fn len(&self) -> usize {
        match self {
            Shape::Fermat(_) => 1,
            Shape::Chain(e) | Shape::Loop(e) => e.len(),
        }
    }
}

fn shape_strategy() -> impl Strategy<Value = Shape> {
    prop_oneof![
        (2u64..=6).prop_map(Shape::Fermat),
        pvec(2u64..=5, 2..=3).prop_map(Shape::Chain),
        pvec(2u64..=4, 2..=3).prop_map(Shape::Loop),
    ]
}

/// A signature invariant under variable relabeling: loops compare by their
/// lexicographically smallest rotation.
fn signature(shape: &Shape) -> (u8, Vec<u64>) {
    match shape {
        Shape::Fermat(a) => (0, vec![*a]),
        Shape::Chain(e) => (1, e.clone()),
        Shape::Loop(e) => {
            let best = (0..e.len())
                .map(|r| {
                    let mut rot = e.clone();
                    rot.rotate_left(r);
                    rot
                })
                .min()
                .expect("loops are nonempty");
            (2, best)
        }
    }
}

fn atom_signature(atom: &Atom) -> (u8, Vec<u64>) {
    match atom {
        Atom::Fermat { exponent, .. } => (0, vec![*exponent]),
        Atom::Chain { exponents, .. } => (1, exponents.clone()),
        Atom::Loop { exponents, .. } => signature(&Shape::Loop(exponents.clone())),
    }
}

/// Exponent rows of the atom sum over variables `offset..offset+len`.
fn shape_rows(shape: &Shape, offset: usize, total: usize) -> Vec<Vec<u64>> {
    let mut rows = Vec::new();
    match shape {
        Shape::Fermat(a) => {
            let mut row = vec![0; total];
            row[offset] = *a;
            rows.push(row);
        }
        Shape::Chain(exps) => {
            for (i, &a) in exps.iter().enumerate() {
                let mut row = vec![0; total];
                row[offset + i] = a;
                if i + 1 < exps.len() {
                    row[offset + i + 1] = 1;
                }
                rows.push(row);
            }
        }
        Shape::Loop(exps) => {
            for (i, &a) in exps.iter().enumerate() {
                let mut row = vec![0; total];
                row[offset + i] = a;
                row[offset + (i + 1) % exps.len()] = 1;
                rows.push(row);
            }
        }
    }
    rows
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// Random direct sums of atoms, relabeled and row-shuffled.
fn polynomial_strategy() -> impl Strategy<Value = ExponentMatrix> {
    polynomial_with_shapes().prop_map(|(e, _)| e)
}

/// Same strategy but keeping the generating shapes for multiset comparison.
fn polynomial_with_shapes() -> impl Strategy<Value = (ExponentMatrix, Vec<Shape>)> {
    pvec(shape_strategy(), 1..=3)
        .prop_filter("at most six variables", |shapes| {
            shapes.iter().map(Shape::len).sum::<usize>() <= 6
        })
        .prop_flat_map(|shapes| {
            let total: usize = shapes.iter().map(Shape::len).sum();
            (Just(shapes), permutation(total))
        })
        .prop_flat_map(|(shapes, relabel)| {
            let total = relabel.len();
            let mut rows = Vec::new();
            let mut offset = 0;
            for s in &shapes {
                rows.extend(shape_rows(s, offset, total));
                offset += s.len();
            }
            for row in &mut rows {
                let mut out = vec![0; total];
                for (v, &e) in row.iter().enumerate() {
                    out[relabel[v]] = e;
                }
                *row = out;
            }
            (Just(shapes), Just(rows).prop_shuffle())
        })
        .prop_map(|(shapes, rows)| {
            (
                ExponentMatrix::from_rows(rows).expect("atom sums are invertible"),
                shapes,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn classification_recovers_the_atoms((e, shapes) in polynomial_with_shapes()) {
        let atoms = bhk::classify_atoms(&e).unwrap();
        let mut got: Vec<_> = atoms.iter().map(atom_signature).collect();
        let mut want: Vec<_> = shapes.iter().map(signature).collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn weights_satisfy_the_degree_equations(e in polynomial_strategy()) {
        let ws = bhk::weights(&e).unwrap();
        for row in e.rows() {
            let total: u128 = row
                .iter()
                .zip(&ws.weights)
                .map(|(&a, &w)| a as u128 * w as u128)
                .sum();
            prop_assert_eq!(total, ws.degree as u128);
        }
    }

    #[test]
    fn transposition_is_an_involution(e in polynomial_strategy()) {
        let back = bhk::transpose_mirror(&bhk::transpose_mirror(&e));
        prop_assert_eq!(back.rows(), e.rows());
        prop_assert_eq!(back.vars(), e.vars());
        // the mirror's symmetry group has the same order: transposing
        // preserves the determinant and the invariant factors
        let g = bhk::symmetry_group(&e).unwrap();
        let gm = bhk::symmetry_group(&bhk::transpose_mirror(&e)).unwrap();
        prop_assert_eq!(g.invariant_factors, gm.invariant_factors);
    }

    #[test]
    fn group_order_equals_the_determinant(e in polynomial_strategy()) {
        let g = bhk::symmetry_group(&e).unwrap();
        prop_assert_eq!(g.order as i128, e.det().abs());
        // invariant factors form a divisibility chain
        for pair in g.invariant_factors.windows(2) {
            prop_assert_eq!(pair[1] % pair[0], 0);
        }
    }

    #[test]
    fn mean_and_natural_parameters_are_inverse(
        raw in pvec(0.05f64..1.0, 2..=6)
    ) {
        let total: f64 = raw.iter().sum();
        let eta: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let point = MeanPoint::from_slice(&eta).unwrap();
        let theta = expfam::natural_params(&point).unwrap();
        let fam = ExponentialFamily::categorical(eta.len());
        let back = fam.mean_params(theta.as_slice()).unwrap();
        for (a, b) in back.as_slice().iter().zip(&eta) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_chart_roundtrips(coords in pvec(-3.0f64..3.0, 4usize..=4)) {
        let m = herm_from_coords(2, &coords);
        prop_assert_eq!(herm_coords(&m), coords);
    }

    #[test]
    fn moment_images_live_on_the_simplex(
        parts in pvec((0.1f64..2.0, 0.0f64..6.28, 1u64..4), 2..=5)
    ) {
        let z: Vec<Complex64> = parts
            .iter()
            .map(|&(m, phi, _)| Complex64::from_polar(m, phi))
            .collect();
        let w: Vec<u64> = parts.iter().map(|&(_, _, wi)| wi).collect();
        let p = WeightedProjectivePoint::new(z, w).unwrap();
        let eta = moment_map(&p).unwrap();
        let sum: f64 = eta.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12);
        prop_assert!(eta.as_slice().iter().all(|&v| v > 0.0));

        // a global phase moves every coordinate without moving the image
        let rotated = p.act(Complex64::from_polar(1.0, 0.83)).unwrap();
        let eta2 = moment_map(&rotated).unwrap();
        for (a, b) in eta.as_slice().iter().zip(eta2.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn free_energy_is_gauge_invariant(
        cells in pvec((0.2f64..1.5, 0.0f64..6.28), 8usize..=8),
        alpha in 0.0f64..6.28
    ) {
        let values: Vec<Complex64> = cells
            .iter()
            .map(|&(m, phi)| Complex64::from_polar(m, phi))
            .collect();
        let psi = WaveFunction::on_grid(vec![8], 0.5, values).unwrap();
        let params = gema_core::kvn::LGParams {
            alpha: 1.1,
            beta: 0.8,
            mass: 1.0,
            charge: 0.3,
            f0: 0.2,
            grid_spacing: 0.5,
            vector_potential: None,
        };
        let base = psi.lg_free_energy(&params).unwrap();
        let rotated = psi.phase_shifted(alpha).lg_free_energy(&params).unwrap();
        prop_assert!((base - rotated).abs() < 1e-10 * base.abs().max(1.0));
        prop_assert!((psi.mass() - psi.phase_shifted(alpha).mass()).abs() < 1e-12 * psi.mass());
    }
}
