use affine_lab_core::affine::{structure_at, AffineOptions};
use affine_lab_core::families::{example_family, FamilyImmersion};
use affine_lab_core::multijet::{eval_jet, FnImmersion, SampledImmersion};
use affine_lab_core::quadrature::cumulative_simpson;
use affine_lab_core::symmetry::{canonical_fields, FrameOptions};
use affine_lab_core::{Immersion, JetOptions, Taylor};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Convex graph `(u, f(u))` near the origin.
fn graph(u: &[Taylor]) -> Vec<Taylor> {
    let mut z = u[0].constant_like(0.0);
    for v in u {
        z += v * v * 0.5;
    }
    z += u[0].powi(3) * 0.2 + &u[0] * &u[1] * &u[2] * 0.1 + u[1].exp() * 0.05;
    let mut out = u.to_vec();
    out.push(z);
    out
}

fn graph_f64(u: &[f64]) -> Vec<f64> {
    let z = u.iter().map(|v| v * v * 0.5).sum::<f64>() + 0.2 * u[0].powi(3) + 0.1 * u[0] * u[1] * u[2] + 0.05 * u[1].exp();
    let mut out = u.to_vec();
    out.push(z);
    out
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.5f64..0.5, 3)
}

/// Unimodular matrix `det^{-1/(n+1)} (I + E)` with small `E`.
fn unimodular() -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-0.3f64..0.3, 16).prop_map(|e| {
        let m = DMatrix::identity(4, 4) + DMatrix::from_row_slice(4, 4, &e);
        let det = m.determinant();
        let sign = if det < 0.0 { -1.0 } else { 1.0 };
        let mut m = m * (det.abs().powf(-0.25));
        if sign < 0.0 {
            m.row_mut(0).neg_mut();
        }
        m
    })
}

fn apply(a: &DMatrix<f64>, x: &[Taylor]) -> Vec<Taylor> {
    (0..a.nrows())
        .map(|i| {
            let mut acc = x[0].constant_like(0.0);
            for (j, xj) in x.iter().enumerate() {
                acc += xj * a[(i, j)];
            }
            acc
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn third_derivatives_are_symmetric(u in point()) {
        let jet = eval_jet(&FnImmersion::new(3, graph), &u, 3, JetOptions::default()).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    for k in 0..4 {
                        let v = jet.d3[a][b][c][k];
                        prop_assert!((v - jet.d3[b][a][c][k]).abs() < 1e-13);
                        prop_assert!((v - jet.d3[a][c][b][k]).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn finite_differences_agree_with_taylor(u in point()) {
        let exact = eval_jet(&FnImmersion::new(3, graph), &u, 3, JetOptions::default()).unwrap();
        let fd = eval_jet(&SampledImmersion::new(3, graph_f64), &u, 3, JetOptions::default()).unwrap();
        let bound = 10.0 * fd.error_estimate.unwrap() + 1e-9;
        for a in 0..3 {
            for k in 0..4 {
                prop_assert!((exact.d1[a][k] - fd.d1[a][k]).abs() < bound);
                for b in 0..3 {
                    prop_assert!((exact.d2[a][b][k] - fd.d2[a][b][k]).abs() < 1e-4);
                }
            }
        }
    }

    #[test]
    fn blaschke_normal_is_equiaffinely_invariant(u in point(), a in unimodular()) {
        let opts = AffineOptions::default();
        let s = structure_at(&FnImmersion::new(3, graph), &u, &opts).unwrap();
        let a2 = a.clone();
        let moved = FnImmersion::new(3, move |x: &[Taylor]| apply(&a2, &graph(x)));
        let t = structure_at(&moved, &u, &opts).unwrap();
        let xi = &a * DVector::from_vec(s.xi_value());
        let xi_t = DVector::from_vec(t.xi_value());
        prop_assert!((xi - xi_t).amax() < 1e-9);
        prop_assert!((s.h_value() - t.h_value()).amax() < 1e-9);
        prop_assert!((s.shape_value() - t.shape_value()).amax() < 1e-8);
    }

    #[test]
    fn metric_is_a_tensor_under_linear_reparametrization(
        u in prop::collection::vec(-0.2f64..0.2, 3),
        e in prop::collection::vec(-0.3f64..0.3, 9),
    ) {
        let b = DMatrix::identity(3, 3) + DMatrix::from_row_slice(3, 3, &e);
        prop_assume!(b.determinant().abs() > 0.2);
        let b2 = b.clone();
        let reparam = FnImmersion::new(3, move |v: &[Taylor]| graph(&apply(&b2, v)));
        let b_inv = b.clone().try_inverse().unwrap();
        let v: Vec<f64> = (&b_inv * DVector::from_vec(u.clone())).iter().copied().collect();
        let opts = AffineOptions::default();
        let s = structure_at(&FnImmersion::new(3, graph), &u, &opts).unwrap();
        let t = structure_at(&reparam, &v, &opts).unwrap();
        prop_assert!((b.transpose() * s.h_value() * &b - t.h_value()).amax() < 1e-9);
        let dxi = DVector::from_vec(s.xi_value()) - DVector::from_vec(t.xi_value());
        prop_assert!(dxi.amax() < 1e-9);
    }

    #[test]
    fn simpson_is_exact_on_quadratics(
        mut nodes in prop::collection::vec(0.0f64..2.0, 5..20),
        c in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        prop_assume!(nodes.len() >= 3);
        let f = |x: f64| c[0] + c[1] * x + c[2] * x * x;
        let big_f = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0;
        let y: Vec<f64> = nodes.iter().map(|&x| f(x)).collect();
        let cum = cumulative_simpson(&nodes, &y);
        for (x, v) in nodes.iter().zip(&cum) {
            prop_assert!((v - (big_f(*x) - big_f(nodes[0]))).abs() < 1e-10);
        }
    }

    #[test]
    fn canonical_scalars_are_equiaffine_invariants(p in prop::collection::vec(-0.4f64..0.4, 3), a in unimodular()) {
        let fam = FamilyImmersion::new(example_family("case1_semiprojective", 3).unwrap()).unwrap();
        let opts = AffineOptions::default();
        let frame = FrameOptions::default();
        let f = canonical_fields(&structure_at(&fam, &p, &opts).unwrap(), &frame).unwrap().frame;
        let a2 = a.clone();
        let moved = FnImmersion::new(3, move |x: &[Taylor]| apply(&a2, &fam.eval_taylor(x).unwrap()));
        let g = canonical_fields(&structure_at(&moved, &p, &opts).unwrap(), &frame).unwrap().frame;
        for (x, y) in [(f.a, g.a), (f.b, g.b), (f.r, g.r), (f.sigma, g.sigma)] {
            prop_assert!((x - y).abs() < 1e-8, "{f:?} vs {g:?}");
        }
    }
}
