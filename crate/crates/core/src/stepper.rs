//! The implicit theta-scheme (`theta = 0` and `theta = 1/2`) in mixed
//! displacement/velocity form, fully discretized with P1 elements:
//!
//! ```text
//! M (u^{n+1} - u^n) = tau M v^{n+1} - M s hat_n
//! M (v^{n+1} - v^n) + tau A u^{n,theta} = tau M F^{n,theta} + M s bar_n + 2 theta M d hat_n
//! ```
//!
//! with `s = sigma(u^n)`, `d = sigma'(u^n) v^n` (nodal), `u^{n,theta} =
//! (1 - theta) u^{n+1} + theta u^{n-1}` and likewise for `F`. Eliminating
//! `v^{n+1}` leaves one implicit equation for `u^{n+1}`, solved by Picard
//! iteration on the drift with a cached factorization of `M + c tau^2 A`.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fem1d::{FemOperators, Field};
use crate::noise::{IncrementLevel, TimeGrid};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theta {
    Zero,
    Half,
}

impl Theta {
    pub fn from_value(theta: f64) -> Result<Self> {
        if theta == 0.0 {
            Ok(Theta::Zero)
        } else if theta == 0.5 {
            Ok(Theta::Half)
        } else {
            Err(Error::InvalidScheme(format!(
                "theta must be 0 or 0.5, got {theta}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Theta::Zero => 0.0,
            Theta::Half => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub theta: Theta,
    pub grid: TimeGrid,
    /// Relative change (mass-weighted L2) that ends the Picard iteration.
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl SchemeConfig {
    pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
    pub const DEFAULT_PICARD_MAX: usize = 50;

    pub fn new(theta: Theta, grid: TimeGrid) -> Self {
        Self {
            theta,
            grid,
            picard_tol: Self::DEFAULT_PICARD_TOL,
            picard_max: Self::DEFAULT_PICARD_MAX,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidScheme(format!(
                "picard_tol must be positive, got {}",
                self.picard_tol
            )));
        }
        if self.picard_max == 0 {
            return Err(Error::InvalidScheme("picard_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Discrete pair `(u^n, v^n)` and, for `theta = 1/2`, the lag `u^{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub n: usize,
    pub u: Field,
    pub v: Field,
    pub u_prev: Option<Field>,
}

impl TrajectoryState {
    pub fn energy(&self, ops: &FemOperators) -> f64 {
        discrete_energy(&self.u, &self.v, ops)
    }
}

/// `||v||_{L2}^2 + |u|_{H1}^2`.
pub fn discrete_energy(u: &[f64], v: &[f64], ops: &FemOperators) -> f64 {
    ops.mass().bilinear(v, v) + ops.stiffness().bilinear(u, u)
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct Advance {
    pub state: TrajectoryState,
    pub picard_iterations: usize,
}

/// Which step indices `n` (including `n = 0`) to keep.
#[derive(Debug, Clone, Default)]
pub enum Record {
    #[default]
    None,
    All,
    Steps(BTreeSet<usize>),
}

impl Record {
    pub fn contains(&self, n: usize) -> bool {
        match self {
            Record::None => false,
            Record::All => true,
            Record::Steps(s) => s.contains(&n),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub recorded: BTreeMap<usize, (Field, Field)>,
    /// Discrete energy at `n = 0, ..., N`.
    pub energy: Vec<f64>,
    /// Picard iterations used by steps `1 -> 2, ..., N-1 -> N`.
    pub picard_iterations: Vec<usize>,
}

impl Trajectory {
    pub fn max_energy(&self) -> f64 {
        self.energy.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A configured scheme bound to its problem and spatial operators.
#[derive(Debug, Clone, Copy)]
pub struct Scheme<'a> {
    pub spec: &'a ProblemSpec,
    pub ops: &'a FemOperators,
    pub cfg: SchemeConfig,
}

impl<'a> Scheme<'a> {
    pub fn new(spec: &'a ProblemSpec, ops: &'a FemOperators, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { spec, ops, cfg })
    }

    fn tau(&self) -> f64 {
        self.cfg.grid.tau()
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.len() == self.ops.dim() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.ops.dim(),
                found: f.len(),
            })
        }
    }

    /// `(Q_h u0, Q_h v0)`.
    pub fn initial_data(&self) -> Result<(Field, Field)> {
        Ok((
            self.ops.l2_project(&*self.spec.u0)?,
            self.ops.l2_project(&*self.spec.v0)?,
        ))
    }

    /// First step from the projected initial data:
    ///
    /// ```text
    /// u^1 = u^0 + tau v^0 + tau^2/2 (Delta_h u^0 + Q_h F(u0))
    ///       - Q_h sigma(u0) hat_0 + tau Q_h sigma(u0) bar_0
    /// v^1 = (u^1 - u^0 + Q_h sigma(u0) hat_0) / tau
    /// ```
    pub fn initial_step(&self, bar0: f64, hat0: f64) -> Result<TrajectoryState> {
        let spec = self.spec;
        let ops = self.ops;
        let tau = self.tau();
        let (u0, v0) = self.initial_data()?;
        let qf = ops.l2_project(|x| (spec.drift)((spec.u0)(x)))?;
        let qs = ops.l2_project(|x| (spec.diffusion)((spec.u0)(x)))?;
        let lap = ops.apply_discrete_laplacian(&u0)?;

        let mut u1 = u0.clone();
        u1.axpy(tau, &v0);
        u1.axpy(0.5 * tau * tau, &lap);
        u1.axpy(0.5 * tau * tau, &qf);
        u1.axpy(tau * bar0 - hat0, &qs);

        let mut v1 = u1.sub(&u0);
        v1.axpy(hat0, &qs);
        let v1 = v1.scaled(1.0 / tau);

        u1.ensure_finite("u^1")?;
        v1.ensure_finite("v^1")?;
        Ok(TrajectoryState {
            n: 1,
            u: u1,
            v: v1,
            u_prev: match self.cfg.theta {
                Theta::Zero => None,
                Theta::Half => Some(u0),
            },
        })
    }

    /// Picard iteration for `(M + alpha A) u = rhs + alpha M F(u)`.
    fn picard(&self, alpha: f64, rhs: &Field, guess: Field) -> Result<(Field, usize)> {
        let ops = self.ops;
        let drift = &*self.spec.drift;
        let mut u = guess;
        let mut change = f64::INFINITY;
        for it in 1..=self.cfg.picard_max {
            let mut load = ops.mass_mul(&u.map(drift));
            load.iter_mut()
                .zip(rhs.iter())
                .for_each(|(l, r)| *l = r + alpha * *l);
            let next = ops.solve_shifted(alpha, &load)?;
            next.ensure_finite("Picard iterate")?;
            let diff = ops.norm_l2(&next.sub(&u))?;
            let size = ops.norm_l2(&next)?;
            change = if diff == 0.0 { 0.0 } else { diff / size };
            u = next;
            if change <= self.cfg.picard_tol {
                return Ok((u, it));
            }
        }
        Err(Error::PicardDiverged {
            iterations: self.cfg.picard_max,
            change,
        })
    }

    /// `v^{n+1} = (u^{n+1} - u^n + s hat_n) / tau`.
    fn velocity(&self, u_next: &Field, u: &Field, s: &Field, hat: f64) -> Field {
        let mut v = u_next.sub(u);
        v.axpy(hat, s);
        v.scaled(1.0 / self.tau())
    }

    pub fn step_theta0(&self, state: &TrajectoryState, bar: f64, hat: f64) -> Result<Advance> {
        if self.cfg.theta != Theta::Zero {
            return Err(Error::InvalidScheme("step_theta0 called with theta = 1/2".into()));
        }
        self.check(&state.u)?;
        self.check(&state.v)?;
        let tau = self.tau();
        let s = state.u.map(&*self.spec.diffusion);

        let mut base = state.u.clone();
        base.axpy(tau, &state.v);
        base.axpy(tau * bar - hat, &s);
        let rhs = self.ops.mass_mul(&base);

        let (u_next, iterations) = self.picard(tau * tau, &rhs, base)?;
        let v_next = self.velocity(&u_next, &state.u, &s, hat);
        v_next.ensure_finite("v^{n+1}")?;
        Ok(Advance {
            state: TrajectoryState {
                n: state.n + 1,
                u: u_next,
                v: v_next,
                u_prev: None,
            },
            picard_iterations: iterations,
        })
    }

    pub fn step_theta_half(&self, state: &TrajectoryState, bar: f64, hat: f64) -> Result<Advance> {
        if self.cfg.theta != Theta::Half {
            return Err(Error::InvalidScheme("step_theta_half called with theta = 0".into()));
        }
        let u_prev = state.u_prev.as_ref().ok_or(Error::MissingLag)?;
        self.check(&state.u)?;
        self.check(&state.v)?;
        self.check(u_prev)?;
        let tau = self.tau();
        let half = 0.5 * tau * tau;
        let s = state.u.map(&*self.spec.diffusion);
        let d: Field = Field::from_vec(
            state
                .u
                .iter()
                .zip(state.v.iter())
                .map(|(&u, &v)| (self.spec.diffusion_derivative)(u) * v)
                .collect(),
        );

        let mut base = state.u.clone();
        base.axpy(tau, &state.v);
        base.axpy(tau * bar - hat, &s);
        base.axpy(tau * hat, &d);
        let mut lagged = u_prev.map(&*self.spec.drift);
        lagged = self.ops.mass_mul(&lagged);
        let mut rhs = self.ops.mass_mul(&base);
        rhs.axpy(-half, &self.ops.stiffness_mul(u_prev));
        rhs.axpy(half, &lagged);

        let (u_next, iterations) = self.picard(half, &rhs, base)?;
        let v_next = self.velocity(&u_next, &state.u, &s, hat);
        v_next.ensure_finite("v^{n+1}")?;
        Ok(Advance {
            state: TrajectoryState {
                n: state.n + 1,
                u_prev: Some(state.u.clone()),
                u: u_next,
                v: v_next,
            },
            picard_iterations: iterations,
        })
    }

    pub fn step(&self, state: &TrajectoryState, bar: f64, hat: f64) -> Result<Advance> {
        match self.cfg.theta {
            Theta::Zero => self.step_theta0(state, bar, hat),
            Theta::Half => self.step_theta_half(state, bar, hat),
        }
    }

    /// Rolls the first step and then `N - 1` steps of the configured scheme.
    pub fn run_trajectory(&self, incr: &IncrementLevel, record: &Record) -> Result<Trajectory> {
        let steps = self.cfg.grid.steps();
        if incr.grid.steps() != steps || incr.bar.len() != steps || incr.hat.len() != steps {
            return Err(Error::GridMismatch {
                expected: steps,
                found: incr.grid.steps(),
            });
        }
        let mut recorded = BTreeMap::new();
        let mut energy = Vec::with_capacity(steps + 1);
        let mut picard_iterations = Vec::with_capacity(steps - 1);

        let (u0, v0) = self.initial_data()?;
        energy.push(discrete_energy(&u0, &v0, self.ops));
        if record.contains(0) {
            recorded.insert(0, (u0, v0));
        }
        let mut state = self
            .initial_step(incr.bar[0], incr.hat[0])
            .map_err(|e| e.at_step(0))?;
        energy.push(state.energy(self.ops));
        if record.contains(1) {
            recorded.insert(1, (state.u.clone(), state.v.clone()));
        }
        for n in 1..steps {
            let adv = self
                .step(&state, incr.bar[n], incr.hat[n])
                .map_err(|e| e.at_step(n))?;
            state = adv.state;
            picard_iterations.push(adv.picard_iterations);
            energy.push(state.energy(self.ops));
            if record.contains(n + 1) {
                recorded.insert(n + 1, (state.u.clone(), state.v.clone()));
            }
        }
        Ok(Trajectory {
            recorded,
            energy,
            picard_iterations,
        })
    }
}
