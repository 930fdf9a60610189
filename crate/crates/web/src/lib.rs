//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations: run one trajectory and replay it, draw one Brownian path
//! on several coupled time grids, and run a small strong-convergence study.
//! The plain-Rust functions are independent of JavaScript so they can be
//! tested natively; the `#[wasm_bindgen]` items only convert errors.

use stochwave::experiment::{convergence_study, simulate_path, ConvergenceConfig, Study};
use stochwave::fem1d::{FemOperators, SpatialMesh};
use stochwave::noise::{simulate_increments, TimeGrid};
use stochwave::problem::ProblemSpec;
use stochwave::stepper::{Record, SchemeConfig, Trajectory};
use stochwave::{NoiseSeed, Theta};
use wasm_bindgen::prelude::*;

fn js(err: impl std::fmt::Display) -> JsError {
    JsError::new(&err.to_string())
}

/// A trajectory kept at every time step, with boundary nodes included.
#[wasm_bindgen]
pub struct Simulation {
    x: Vec<f64>,
    times: Vec<f64>,
    u: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    energy: Vec<f64>,
}

fn with_boundary(interior: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(interior.len() + 2);
    out.push(0.0);
    out.extend_from_slice(interior);
    out.push(0.0);
    out
}

impl Simulation {
    pub fn run(
        problem: &str,
        theta: f64,
        m: usize,
        steps: usize,
        seed: u32,
        sample: u32,
    ) -> stochwave::Result<Self> {
        let spec = ProblemSpec::builtin(problem)?;
        let (a, b) = spec.domain;
        let mesh = SpatialMesh::new(a, b, m)?;
        let ops = FemOperators::assemble(mesh);
        let grid = TimeGrid::new(spec.horizon, steps)?;
        let cfg = SchemeConfig::new(Theta::from_value(theta)?, grid);
        let seed = NoiseSeed::new(u64::from(seed), u64::from(sample));
        let traj: Trajectory = simulate_path(&spec, &ops, cfg, seed, &Record::All)?;
        let (u, v) = traj
            .recorded
            .values()
            .map(|(u, v)| (with_boundary(u), with_boundary(v)))
            .unzip();
        Ok(Self {
            x: (0..=m).map(|j| mesh.node(j)).collect(),
            times: (0..=steps).map(|n| grid.time(n)).collect(),
            u,
            v,
            energy: traj.energy,
        })
    }

    pub fn frame_count(&self) -> usize {
        self.times.len()
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(
        problem: &str,
        theta: f64,
        m: usize,
        steps: usize,
        seed: u32,
        sample: u32,
    ) -> Result<Simulation, JsError> {
        Self::run(problem, theta, m, steps, seed, sample).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> usize {
        self.frame_count()
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.times.get(n).copied().unwrap_or(f64::NAN)
    }

    /// Displacement at step `n` (empty when out of range).
    pub fn u(&self, n: usize) -> Vec<f64> {
        self.u.get(n).cloned().unwrap_or_default()
    }

    pub fn v(&self, n: usize) -> Vec<f64> {
        self.v.get(n).cloned().unwrap_or_default()
    }

    /// `||v^n||^2 + |u^n|_{H1}^2` for every step.
    pub fn energy(&self) -> Vec<f64> {
        self.energy.clone()
    }
}

/// One Brownian path sampled on several nested time grids.
#[wasm_bindgen]
pub struct CoupledPath {
    steps: Vec<usize>,
    paths: Vec<Vec<f64>>,
    hats: Vec<Vec<f64>>,
}

impl CoupledPath {
    pub fn draw(seed: u32, sample: u32, levels: &[usize]) -> stochwave::Result<Self> {
        let incr = simulate_increments(NoiseSeed::new(u64::from(seed), u64::from(sample)), 1.0, levels)?;
        let paths = incr
            .iter()
            .map(|l| {
                let mut w = Vec::with_capacity(l.bar.len() + 1);
                w.push(0.0);
                let mut acc = 0.0;
                for b in &l.bar {
                    acc += b;
                    w.push(acc);
                }
                w
            })
            .collect();
        Ok(Self {
            steps: levels.to_vec(),
            hats: incr.iter().map(|l| l.hat.clone()).collect(),
            paths,
        })
    }

    pub fn path_at(&self, level: usize) -> &[f64] {
        self.paths.get(level).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[wasm_bindgen]
impl CoupledPath {
    /// `levels`: strictly increasing powers of two, at most 64 (the finest
    /// level decides how many sub-mesh points are generated).
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, sample: u32, levels: Vec<u32>) -> Result<CoupledPath, JsError> {
        let levels: Vec<usize> = levels.into_iter().map(|n| n as usize).collect();
        if levels.last().is_some_and(|&n| n > 64) {
            return Err(JsError::new("finest level is limited to N = 64 in the browser"));
        }
        Self::draw(seed, sample, &levels).map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> usize {
        self.steps.len()
    }

    pub fn steps(&self, level: usize) -> usize {
        self.steps.get(level).copied().unwrap_or(0)
    }

    /// `W(t_n)`, `n = 0..=N`, from cumulative increments.
    pub fn path(&self, level: usize) -> Vec<f64> {
        self.path_at(level).to_vec()
    }

    /// Iterated-integral increments of the level.
    pub fn hat(&self, level: usize) -> Vec<f64> {
        self.hats.get(level).cloned().unwrap_or_default()
    }
}

/// CSV report of a convergence study (same columns as the command line tool).
pub fn convergence_csv(
    problem: &str,
    theta: f64,
    m: usize,
    levels: &[usize],
    reference: usize,
    samples: usize,
    seed: u32,
) -> stochwave::Result<String> {
    let cfg = ConvergenceConfig {
        problem: problem.to_string(),
        theta: Theta::from_value(theta)?,
        m,
        levels: levels.to_vec(),
        reference_steps: reference,
        samples,
        base_seed: u64::from(seed),
        horizon: 1.0,
    };
    Ok(convergence_study(&Study::new(cfg)?)?.to_csv())
}

#[wasm_bindgen]
pub fn convergence(
    problem: &str,
    theta: f64,
    m: usize,
    levels: Vec<u32>,
    reference: usize,
    samples: usize,
    seed: u32,
) -> Result<String, JsError> {
    let levels: Vec<usize> = levels.into_iter().map(|n| n as usize).collect();
    if reference > 128 {
        return Err(JsError::new("reference is limited to N = 128 in the browser"));
    }
    convergence_csv(problem, theta, m, &levels, reference, samples, seed).map_err(js)
}

#[wasm_bindgen]
pub fn version() -> String {
    stochwave::VERSION.to_string()
}
