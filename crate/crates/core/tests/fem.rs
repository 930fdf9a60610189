mod common;

use std::f64::consts::PI;

use proptest::prelude::*;
use stochwave::fem1d::{FemOperators, Field, SpatialMesh};

fn ops(a: f64, b: f64, m: usize) -> FemOperators {
    FemOperators::assemble(SpatialMesh::new(a, b, m).unwrap())
}

fn field_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn mesh_and_pair() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|m| (Just(m), field_strategy(m - 1), field_strategy(m - 1)))
}

proptest! {
    #[test]
    fn mass_and_stiffness_are_symmetric((m, x, y) in mesh_and_pair()) {
        let ops = ops(-1.0, 1.0, m);
        let mxy = ops.mass().bilinear(&x, &y);
        let myx = ops.mass().bilinear(&y, &x);
        let axy = ops.stiffness().bilinear(&x, &y);
        let ayx = ops.stiffness().bilinear(&y, &x);
        prop_assert!((mxy - myx).abs() <= 1e-12 * (1.0 + mxy.abs()));
        prop_assert!((axy - ayx).abs() <= 1e-12 * (1.0 + axy.abs()));
    }

    #[test]
    fn products_match_the_element_stencil((m, x, _y) in mesh_and_pair()) {
        let ops = ops(0.0, 3.0, m);
        let h = ops.mesh().spacing();
        let dm = common::mass(h, &x);
        let da = common::stiffness(h, &x);
        for (p, q) in ops.mass_mul(&x).iter().zip(&dm) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
        for (p, q) in ops.stiffness_mul(&x).iter().zip(&da) {
            prop_assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn mass_and_stiffness_are_positive((m, x, _y) in mesh_and_pair()) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let ops = ops(-1.0, 1.0, m);
        prop_assert!(ops.mass().bilinear(&x, &x) > 0.0);
        prop_assert!(ops.stiffness().bilinear(&x, &x) > 0.0);
    }

    #[test]
    fn shifted_solve_inverts_the_shifted_matrix(
        (m, x, _y) in mesh_and_pair(),
        alpha in 0.0f64..4.0,
    ) {
        let ops = ops(-1.0, 1.0, m);
        let rhs = ops.mass().shifted(alpha, ops.stiffness()).mul(&x);
        let back = ops.solve_shifted(alpha, &rhs).unwrap();
        let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (p, q) in back.iter().zip(&x) {
            prop_assert!((p - q).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn generalized_eigenvalues_stay_below_twelve_over_h_squared(
        (m, x, _y) in mesh_and_pair(),
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let ops = ops(-1.0, 1.0, m);
        let h = ops.mesh().spacing();
        let rayleigh = ops.stiffness().bilinear(&x, &x) / ops.mass().bilinear(&x, &x);
        prop_assert!(rayleigh <= 12.0 / (h * h) * (1.0 + 1e-12));
    }

    #[test]
    fn projection_reproduces_the_discrete_space((m, x, _y) in mesh_and_pair()) {
        let ops = ops(-1.0, 1.0, m);
        let mesh = *ops.mesh();
        let h = mesh.spacing();
        let field = Field::from_vec(x.clone());
        // Evaluate the P1 interpolant of the nodal values at any point.
        let eval = |t: f64| {
            let s = ((t - mesh.left()) / h).clamp(0.0, m as f64);
            let j = (s.floor() as usize).min(m - 1);
            let w = s - j as f64;
            let at = |k: usize| if k == 0 || k == m { 0.0 } else { field[k - 1] };
            (1.0 - w) * at(j) + w * at(j + 1)
        };
        let proj = ops.l2_project(eval).unwrap();
        for (p, q) in proj.iter().zip(&x) {
            prop_assert!((p - q).abs() <= 1e-9 * 10.0);
        }
    }
}

#[test]
fn stencil_eigenpairs_match_the_closed_form() {
    let m = 24;
    let ops = ops(0.0, 2.0, m);
    let h = ops.mesh().spacing();
    let mut largest: f64 = 0.0;
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let lambda = 6.0 / (h * h) * (1.0 - theta.cos()) / (2.0 + theta.cos());
        let x: Vec<f64> = (1..m).map(|j| (j as f64 * theta).sin()).collect();
        let ax = ops.stiffness_mul(&x);
        let mx = common::mass(h, &x);
        for (a, b) in ax.iter().zip(&mx) {
            assert!((a - lambda * b).abs() < 1e-9 * lambda);
        }
        largest = largest.max(lambda);
    }
    assert!(largest < 12.0 / (h * h));
}

#[test]
fn power_iteration_approaches_the_top_eigenvalue() {
    let m = 32;
    let ops = ops(-1.0, 1.0, m);
    let h = ops.mesh().spacing();
    let theta = (m - 1) as f64 * PI / m as f64;
    let top = 6.0 / (h * h) * (1.0 - theta.cos()) / (2.0 + theta.cos());
    let mut x = Field::from_vec((0..m - 1).map(|j| if j % 2 == 0 { 1.0 } else { -0.7 }).collect());
    let mut lambda = 0.0;
    for _ in 0..3000 {
        let y = ops.solve_shifted(0.0, &ops.stiffness_mul(&x)).unwrap();
        lambda = ops.stiffness().bilinear(&x, &x) / ops.mass().bilinear(&x, &x);
        let n = y.euclidean_norm();
        x = y.scaled(1.0 / n);
    }
    assert!((lambda - top).abs() < 1e-6 * top, "{lambda} vs {top}");
}

#[test]
fn projection_error_is_second_order() {
    let err = |m: usize| {
        let ops = ops(-1.0, 1.0, m);
        let p = ops.l2_project(|x| (PI * x).sin()).unwrap();
        // L2 distance to the exact function, by composite Gauss quadrature.
        let mesh = *ops.mesh();
        let h = mesh.spacing();
        let g = [(-(0.6f64).sqrt(), 5.0 / 9.0), (0.0, 8.0 / 9.0), ((0.6f64).sqrt(), 5.0 / 9.0)];
        let mut acc = 0.0;
        for e in 0..m {
            let left = if e == 0 { 0.0 } else { p[e - 1] };
            let right = if e + 1 == m { 0.0 } else { p[e] };
            for (xi, w) in g {
                let s = 0.5 * (1.0 + xi);
                let x = mesh.node(e) + s * h;
                let d = (1.0 - s) * left + s * right - (PI * x).sin();
                acc += 0.5 * h * w * d * d;
            }
        }
        acc.sqrt()
    };
    let order = (err(32) / err(64)).log2();
    assert!((order - 2.0).abs() < 0.1, "{order}");
}

#[test]
fn seminorm_of_projected_sine() {
    let ops = ops(-1.0, 1.0, 256);
    let p = ops.l2_project(|x| (PI * x).sin()).unwrap();
    let semi = ops.norm_h1_semi(&p).unwrap();
    assert!((semi - PI).abs() < 1e-3, "{semi}");
}

#[test]
fn discrete_laplacian_of_an_eigenfunction() {
    let ops = ops(-1.0, 1.0, 256);
    let p = ops.l2_project(|x| (PI * x).sin()).unwrap();
    let lap = ops.apply_discrete_laplacian(&p).unwrap();
    let expected = p.scaled(-PI * PI);
    let rel = ops.norm_l2(&lap.sub(&expected)).unwrap() / ops.norm_l2(&expected).unwrap();
    assert!(rel < 1e-2, "{rel}");
}
