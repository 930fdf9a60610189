#![allow(dead_code)]

use stochwave::fem1d::{FemOperators, Field};
use stochwave::noise::philox::CounterRng;
use stochwave::problem::ProblemSpec;
use stochwave::stepper::{Theta, TrajectoryState};

/// Symmetric tridiagonal product from the P1 stencil on spacing `h`,
/// assembled here without going through the library's matrices.
fn stencil_mul(diag: f64, off: f64, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let mut acc = diag * x[i];
            if i > 0 {
                acc += off * x[i - 1];
            }
            if i + 1 < n {
                acc += off * x[i + 1];
            }
            acc
        })
        .collect()
}

pub fn mass(h: f64, x: &[f64]) -> Vec<f64> {
    stencil_mul(2.0 * h / 3.0, h / 6.0, x)
}

pub fn stiffness(h: f64, x: &[f64]) -> Vec<f64> {
    stencil_mul(2.0 / h, -1.0 / h, x)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative residuals of the displacement and velocity equations of the
/// fully discrete scheme for the step `from -> to`, evaluated term by term.
#[allow(clippy::too_many_arguments)]
pub fn scheme_residuals(
    spec: &ProblemSpec,
    ops: &FemOperators,
    theta: Theta,
    tau: f64,
    from: &TrajectoryState,
    to: &TrajectoryState,
    bar: f64,
    hat: f64,
) -> (f64, f64) {
    let h = ops.mesh().spacing();
    let n = from.u.len();
    let th = theta.value();
    let s: Vec<f64> = from.u.iter().map(|&u| (spec.diffusion)(u)).collect();
    let d: Vec<f64> = from
        .u
        .iter()
        .zip(from.v.iter())
        .map(|(&u, &v)| (spec.diffusion_derivative)(u) * v)
        .collect();
    let zero = vec![0.0; n];
    let lag: &[f64] = from.u_prev.as_deref().unwrap_or(&zero);

    // M (u1 - u0) - tau M v1 + M s hat
    let t1 = mass(h, &(0..n).map(|i| to.u[i] - from.u[i]).collect::<Vec<_>>());
    let t2 = mass(h, &to.v.iter().map(|v| tau * v).collect::<Vec<_>>());
    let t3 = mass(h, &s.iter().map(|x| x * hat).collect::<Vec<_>>());
    let r1: Vec<f64> = (0..n).map(|i| t1[i] - t2[i] + t3[i]).collect();
    let scale1 = norm(&t1) + norm(&t2) + norm(&t3);

    // M (v1 - v0) + tau A u^theta - tau M F^theta - M s bar - 2 theta M d hat
    let q1 = mass(h, &(0..n).map(|i| to.v[i] - from.v[i]).collect::<Vec<_>>());
    let u_theta: Vec<f64> = (0..n)
        .map(|i| (1.0 - th) * to.u[i] + th * lag[i])
        .collect();
    let q2 = stiffness(h, &u_theta.iter().map(|x| tau * x).collect::<Vec<_>>());
    let f_theta: Vec<f64> = (0..n)
        .map(|i| {
            let lagged = if th > 0.0 { (spec.drift)(lag[i]) } else { 0.0 };
            tau * ((1.0 - th) * (spec.drift)(to.u[i]) + th * lagged)
        })
        .collect();
    let q3 = mass(h, &f_theta);
    let q4 = mass(h, &s.iter().map(|x| x * bar).collect::<Vec<_>>());
    let q5 = mass(h, &d.iter().map(|x| 2.0 * th * x * hat).collect::<Vec<_>>());
    let r2: Vec<f64> = (0..n)
        .map(|i| q1[i] + q2[i] - q3[i] - q4[i] - q5[i])
        .collect();
    let scale2 = norm(&q1) + norm(&q2) + norm(&q3) + norm(&q4) + norm(&q5);

    let rel = |r: &[f64], scale: f64| if scale == 0.0 { norm(r) } else { norm(r) / scale };
    (rel(&r1, scale1), rel(&r2, scale2))
}

/// Random field: two smooth modes plus small nodal roughness.
pub fn random_field(rng: &mut CounterRng, ops: &FemOperators, amplitude: f64) -> Field {
    let mesh = *ops.mesh();
    let (a, b) = (mesh.left(), mesh.right());
    let k = rng.uniform_in(0.5, 3.0);
    let (c1, c2) = (rng.normal(), rng.normal());
    let pi = std::f64::consts::PI;
    let values = (0..mesh.interior_nodes())
        .map(|i| {
            let s = (mesh.interior_node(i) - a) / (b - a);
            let smooth = c1 * (pi * s).sin() + c2 * (k * pi * s).sin() * s * (1.0 - s);
            amplitude * (smooth + 0.05 * rng.normal())
        })
        .collect();
    Field::from_vec(values)
}

/// Random adapted state `(u, v, u_prev)` together with increments of the
/// right magnitude for step `tau`.
pub fn random_step_input(
    rng: &mut CounterRng,
    ops: &FemOperators,
    theta: Theta,
    tau: f64,
) -> (TrajectoryState, f64, f64) {
    let u = random_field(rng, ops, 1.0);
    let v = random_field(rng, ops, 2.0);
    let u_prev = match theta {
        Theta::Zero => None,
        Theta::Half => {
            let mut p = u.clone();
            p.axpy(-tau, &v);
            p.axpy(0.1 * tau, &random_field(rng, ops, 1.0));
            Some(p)
        }
    };
    let bar = tau.sqrt() * rng.normal();
    let hat = (tau.powi(3) / 3.0).sqrt() * rng.normal();
    (TrajectoryState { n: 1, u, v, u_prev }, bar, hat)
}
