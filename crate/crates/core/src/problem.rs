//! Continuous problem data: `du_t - u_xx = F(u) dt + sigma(u) dW` on `(a, b)`
//! with homogeneous Dirichlet boundary, `u(0) = u0`, `u_t(0) = v0`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::noise::philox::CounterRng;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Drift, diffusion and initial data. The nonlinearities act pointwise.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: (f64, f64),
    pub horizon: f64,
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    /// `sigma'(u)`; the Gateaux derivative `D_u sigma(u) w` is `sigma'(u) w`.
    pub diffusion_derivative: ScalarFn,
    pub u0: ScalarFn,
    pub v0: ScalarFn,
    /// Declared Lipschitz constant of `drift`.
    pub lipschitz_drift: f64,
    /// Declared Lipschitz constant of `diffusion`.
    pub lipschitz_diffusion: f64,
    /// `sigma` vanishes identically, so runs may skip path generation.
    pub noise_free: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("horizon", &self.horizon)
            .field("lipschitz_drift", &self.lipschitz_drift)
            .field("lipschitz_diffusion", &self.lipschitz_diffusion)
            .field("noise_free", &self.noise_free)
            .finish_non_exhaustive()
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["test1", "test2", "deterministic"];

fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

impl ProblemSpec {
    /// Built-in problems on `(-1, 1)` with `T = 1` and `v0 = 0`:
    ///
    /// * `test1`: `F(u) = -u`, `sigma(u) = u`, `u0 = sin(2 pi x)`
    /// * `test2`: `F(u) = cos u`, `sigma(u) = sin u`, `u0 = sin(2 pi x)`
    /// * `deterministic`: `F = sigma = 0`, `u0 = sin(pi x)`, whose exact
    ///   solution is `sin(pi x) cos(pi t)`
    pub fn builtin(name: &str) -> Result<Self> {
        let sin2pi = func(|x| (2.0 * PI * x).sin());
        let zero = func(|_| 0.0);
        let base = |drift, diffusion, diffusion_derivative, u0, lf, ls| ProblemSpec {
            name: name.to_string(),
            domain: (-1.0, 1.0),
            horizon: 1.0,
            drift,
            diffusion,
            diffusion_derivative,
            u0,
            v0: func(|_| 0.0),
            lipschitz_drift: lf,
            lipschitz_diffusion: ls,
            noise_free: false,
        };
        match name {
            "test1" => Ok(base(
                func(|u| -u),
                func(|u| u),
                func(|_| 1.0),
                sin2pi,
                1.0,
                1.0,
            )),
            "test2" => Ok(base(
                func(f64::cos),
                func(f64::sin),
                func(f64::cos),
                sin2pi,
                1.0,
                1.0,
            )),
            "deterministic" => Ok(ProblemSpec {
                noise_free: true,
                ..base(
                    zero.clone(),
                    zero.clone(),
                    zero,
                    func(|x| (PI * x).sin()),
                    0.0,
                    0.0,
                )
            }),
            other => Err(Error::UnknownProblem(other.to_string())),
        }
    }

    pub fn with_initial(mut self, u0: ScalarFn, v0: ScalarFn) -> Self {
        self.u0 = u0;
        self.v0 = v0;
        self
    }

    /// Worst observed `|G(x) - G(y)| / (L |x - y|)` for `G` in
    /// `{drift, diffusion}` over random pairs in `[-range, range]`.
    /// Values `<= 1` mean the declared constants hold on the sample.
    pub fn lipschitz_ratio(&self, pairs: usize, range: f64, seed: u64) -> f64 {
        let mut rng = CounterRng::new(seed, 0x11b5);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let x = rng.uniform_in(-range, range);
            let y = rng.uniform_in(-range, range);
            let dx = (x - y).abs();
            if dx == 0.0 {
                continue;
            }
            for (g, l) in [
                (&self.drift, self.lipschitz_drift),
                (&self.diffusion, self.lipschitz_diffusion),
            ] {
                let dg = (g(x) - g(y)).abs();
                let ratio = if l > 0.0 {
                    dg / (l * dx)
                } else if dg == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst = worst.max(ratio);
            }
        }
        worst
    }

    /// Largest gap between the declared `sigma'` and a central difference
    /// with step `eps`, over random points in `[-range, range]`.
    pub fn derivative_mismatch(&self, points: usize, range: f64, eps: f64, seed: u64) -> f64 {
        let mut rng = CounterRng::new(seed, 0xd1ff);
        (0..points)
            .map(|_| {
                let u = rng.uniform_in(-range, range);
                let fd = ((self.diffusion)(u + eps) - (self.diffusion)(u - eps)) / (2.0 * eps);
                (fd - (self.diffusion_derivative)(u)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn satisfies_boundary(&self, tol: f64) -> bool {
        let (a, b) = self.domain;
        (self.u0)(a).abs() <= tol && (self.u0)(b).abs() <= tol
    }
}
