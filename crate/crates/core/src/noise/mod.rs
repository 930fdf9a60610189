//! Coupled Brownian increments on nested dyadic time grids.
//!
//! A sample path is built by midpoint (Lévy) refinement: `W(T)` first, then
//! the midpoint of every dyadic interval conditioned on its endpoints. The
//! Gaussian used at a given dyadic point is keyed by `(base_seed,
//! sample_index, depth, index)` in a counter-based generator, so the value of
//! `W` at any dyadic time does not depend on how finely the path is resolved
//! or on which levels are requested.
//!
//! Per step of length `tau` the iterated integral
//! `int_{t_n}^{t_{n+1}} (W(t_{n+1}) - W(s)) ds` is approximated on a sub-mesh
//! of `S = N^2` equal cells by integrating the piecewise affine interpolant of
//! `W` through the sub-mesh points.

pub mod philox;

use crate::error::{Error, Result};
use crate::parallel;
use philox::{attempt_key, gaussian_pair, philox4x32};

/// Uniform partition of `[0, T]` into `N` steps, `N` a power of two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if steps < 2 || !steps.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "step count must be a power of two >= 2, got {steps}"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step size; exact because `steps` is a power of two.
    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau()
    }

    /// Sub-mesh cells per step.
    pub fn sub_steps(&self) -> usize {
        self.steps * self.steps
    }

    fn log2_steps(&self) -> u32 {
        self.steps.trailing_zeros()
    }
}

/// Identifies one Monte Carlo sample path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseSeed {
    pub base_seed: u64,
    pub sample_index: u64,
}

impl NoiseSeed {
    pub fn new(base_seed: u64, sample_index: u64) -> Self {
        Self {
            base_seed,
            sample_index,
        }
    }
}

/// One realisation of a scalar Wiener process on `[0, T]`, resolved lazily at
/// dyadic points.
#[derive(Debug, Clone, Copy)]
pub struct BrownianPath {
    seed: NoiseSeed,
    horizon: f64,
}

/// Largest supported refinement depth (`2^MAX_DEPTH` points per path).
pub const MAX_DEPTH: u32 = 56;

impl BrownianPath {
    pub fn new(seed: NoiseSeed, horizon: f64) -> Self {
        Self { seed, horizon }
    }

    /// Standard normals attached to the dyadic points `(depth, 2q)` and
    /// `(depth, 2q + 1)`.
    #[inline]
    fn normals(&self, depth: u32, q: u64) -> [f64; 2] {
        let s = self.seed.sample_index;
        let key = [self.seed.base_seed as u32, (self.seed.base_seed >> 32) as u32];
        let counter = [
            q as u32,
            ((q >> 32) as u32) | (depth << 25),
            s as u32,
            (s >> 32) as u32,
        ];
        gaussian_pair(|a| philox4x32(counter, attempt_key(key, a)))
    }

    /// `W(T)`.
    pub fn terminal(&self) -> f64 {
        self.horizon.sqrt() * self.normals(0, 0)[0]
    }

    /// Visits `W(i T / 2^depth)` for `i = 1, 2, ..., min(limit, 2^depth)` in
    /// increasing order. Memory use is `O(depth)`.
    pub fn walk(&self, depth: u32, limit: u64, mut visit: impl FnMut(u64, f64)) -> Result<()> {
        if depth > MAX_DEPTH {
            return Err(Error::SubMeshOverflow { exponent: depth });
        }
        if limit == 0 {
            return Ok(());
        }
        let w_end = self.terminal();
        if depth == 0 {
            visit(1, w_end);
            return Ok(());
        }
        // bridge standard deviation of the midpoint of a depth-d interval
        let scales: Vec<f64> = (0..depth)
            .map(|d| (self.horizon / (1u64 << (d + 2)) as f64).sqrt())
            .collect();
        let mut walker = Walker {
            path: self,
            depth,
            limit,
            scales: &scales,
            visit: &mut visit,
        };
        walker.descend(0, 0, 0.0, w_end, self.normals(1, 0)[0]);
        Ok(())
    }
}

struct Walker<'a, F> {
    path: &'a BrownianPath,
    depth: u32,
    limit: u64,
    scales: &'a [f64],
    visit: &'a mut F,
}

impl<F: FnMut(u64, f64)> Walker<'_, F> {
    fn descend(&mut self, d: u32, k: u64, w_left: f64, w_right: f64, z: f64) {
        let first_leaf = (k << (self.depth - d)) + 1;
        if first_leaf > self.limit {
            return;
        }
        let mid = 0.5 * (w_left + w_right) + self.scales[d as usize] * z;
        if d + 1 == self.depth {
            (self.visit)(2 * k + 1, mid);
            if 2 * k + 2 <= self.limit {
                (self.visit)(2 * k + 2, w_right);
            }
            return;
        }
        let [z_left, z_right] = self.path.normals(d + 2, k);
        self.descend(d + 1, 2 * k, w_left, mid, z_left);
        self.descend(d + 1, 2 * k + 1, mid, w_right, z_right);
    }
}

/// Running per-step sums for one time level.
#[derive(Debug)]
struct StepAccumulator {
    mask: u64,
    cells: usize,
    tau: f64,
    cell: f64,
    w_start: f64,
    w_prev: f64,
    trapezoid: f64,
    count: usize,
    bar: Vec<f64>,
    hat: Vec<f64>,
}

impl StepAccumulator {
    /// `stride` fine points per sub-mesh cell, `cells` cells per step.
    fn new(stride: u64, cells: usize, tau: f64, steps: usize) -> Self {
        debug_assert!(stride.is_power_of_two());
        Self {
            mask: stride - 1,
            cells,
            tau,
            cell: tau / cells as f64,
            w_start: 0.0,
            w_prev: 0.0,
            trapezoid: 0.0,
            count: 0,
            bar: Vec::with_capacity(steps),
            hat: Vec::with_capacity(steps),
        }
    }

    #[inline]
    fn feed(&mut self, i: u64, w: f64) {
        if i & self.mask != 0 {
            return;
        }
        self.trapezoid += 0.5 * ((self.w_prev - self.w_start) + (w - self.w_start));
        self.w_prev = w;
        self.count += 1;
        if self.count == self.cells {
            let rise = w - self.w_start;
            self.bar.push(rise);
            self.hat.push(self.tau * rise - self.cell * self.trapezoid);
            self.w_start = w;
            self.trapezoid = 0.0;
            self.count = 0;
        }
    }
}

/// Increments of one path on one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementLevel {
    pub grid: TimeGrid,
    /// `W(t_{n+1}) - W(t_n)`.
    pub bar: Vec<f64>,
    /// Sub-mesh approximation of `int_{t_n}^{t_{n+1}} (W(t_{n+1}) - W(s)) ds`.
    pub hat: Vec<f64>,
}

impl IncrementLevel {
    /// Pairwise (tree) sum of all `bar` increments, i.e. `W(T)`.
    ///
    /// Bit-identical for every level built from one path.
    pub fn terminal_value(&self) -> f64 {
        let mut v = self.bar.clone();
        while v.len() > 1 {
            v = pairwise_sums(&v);
        }
        v.first().copied().unwrap_or(0.0)
    }
}

/// `[x0 + x1, x2 + x3, ...]`; `values.len()` must be even.
pub fn pairwise_sums(values: &[f64]) -> Vec<f64> {
    debug_assert!(values.len().is_multiple_of(2));
    values.chunks_exact(2).map(|p| p[0] + p[1]).collect()
}

fn validate_levels(horizon: f64, levels: &[usize]) -> Result<Vec<TimeGrid>> {
    if levels.is_empty() {
        return Err(Error::LevelsNotNested("no levels requested".into()));
    }
    let grids = levels
        .iter()
        .map(|&n| TimeGrid::new(horizon, n))
        .collect::<Result<Vec<_>>>()?;
    if let Some(w) = levels.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::LevelsNotNested(format!(
            "levels must be strictly increasing, got {} before {}",
            w[0], w[1]
        )));
    }
    Ok(grids)
}

fn walk_depth(finest: &TimeGrid, extra: u32) -> Result<u32> {
    let depth = 3 * finest.log2_steps() + extra;
    if depth > MAX_DEPTH {
        Err(Error::SubMeshOverflow { exponent: depth })
    } else {
        Ok(depth)
    }
}

/// Generates coupled increments for every level of `levels` (strictly
/// increasing powers of two) from the single path identified by `seed`.
///
/// The path is streamed once at the finest level's sub-mesh resolution. The
/// finest level's `bar` are differences of path values; each coarser level's
/// `bar` are pairwise sums of the next dyadic level, so coarse increments are
/// exact sums of fine ones.
pub fn simulate_increments(
    seed: NoiseSeed,
    horizon: f64,
    levels: &[usize],
) -> Result<Vec<IncrementLevel>> {
    let grids = validate_levels(horizon, levels)?;
    let finest = *grids.last().unwrap();
    let depth = walk_depth(&finest, 0)?;
    let mut accs: Vec<StepAccumulator> = grids
        .iter()
        .map(|g| {
            let stride = 1u64 << (depth - 3 * g.log2_steps());
            StepAccumulator::new(stride, g.sub_steps(), g.tau(), g.steps())
        })
        .collect();
    BrownianPath::new(seed, horizon).walk(depth, u64::MAX, |i, w| {
        for acc in accs.iter_mut() {
            acc.feed(i, w);
        }
    })?;

    let mut out = Vec::with_capacity(grids.len());
    let finest_acc = accs.pop().unwrap();
    let mut bar = finest_acc.bar;
    out.push(IncrementLevel {
        grid: finest,
        bar: bar.clone(),
        hat: finest_acc.hat,
    });
    for (grid, acc) in grids.iter().zip(accs).rev() {
        while bar.len() > grid.steps() {
            bar = pairwise_sums(&bar);
        }
        out.push(IncrementLevel {
            grid: *grid,
            bar: bar.clone(),
            hat: acc.hat,
        });
    }
    out.reverse();
    Ok(out)
}

/// All-zero increments on the same levels, for problems without noise.
pub fn zero_increments(horizon: f64, levels: &[usize]) -> Result<Vec<IncrementLevel>> {
    Ok(validate_levels(horizon, levels)?
        .into_iter()
        .map(|grid| IncrementLevel {
            grid,
            bar: vec![0.0; grid.steps()],
            hat: vec![0.0; grid.steps()],
        })
        .collect())
}

/// Refinement of the sub-mesh used for the reference iterated integral in
/// [`moment_report`].
pub const REFERENCE_REFINEMENT: u32 = 2; // log2: 4x finer cells

/// Monte Carlo second moments of the first-step increments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub tau: f64,
    pub samples: usize,
    pub m2_bar: f64,
    pub se_bar: f64,
    pub m2_hat: f64,
    pub se_hat: f64,
    /// `E[(hat - tilde_ref)^2]`, with `tilde_ref` the same construction on a
    /// sub-mesh refined by `2^REFERENCE_REFINEMENT`.
    pub m2_diff: f64,
    pub se_diff: f64,
}

/// Per-sample first-step increments `(bar, hat, tilde_ref)`.
pub fn first_step_increments(seed: NoiseSeed, grid: &TimeGrid) -> Result<(f64, f64, f64)> {
    let depth = walk_depth(grid, REFERENCE_REFINEMENT)?;
    let cells = grid.sub_steps();
    let refine = 1u64 << REFERENCE_REFINEMENT;
    let mut coarse = StepAccumulator::new(refine, cells, grid.tau(), 1);
    let mut fine = StepAccumulator::new(1, cells * refine as usize, grid.tau(), 1);
    let points_per_step = 1u64 << (depth - grid.log2_steps());
    BrownianPath::new(seed, grid.horizon()).walk(depth, points_per_step, |i, w| {
        coarse.feed(i, w);
        fine.feed(i, w);
    })?;
    Ok((coarse.bar[0], coarse.hat[0], fine.hat[0]))
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn moment_report(samples: usize, base_seed: u64, grid: &TimeGrid) -> Result<MomentReport> {
    if samples < 100 {
        return Err(Error::InvalidExperiment(format!(
            "moment report needs at least 100 samples, got {samples}"
        )));
    }
    let draws = parallel::try_map_indexed(samples, |s| {
        first_step_increments(NoiseSeed::new(base_seed, s as u64), grid)
    })?;
    let (m2_bar, se_bar) = mean_and_se(draws.iter().map(|d| d.0 * d.0));
    let (m2_hat, se_hat) = mean_and_se(draws.iter().map(|d| d.1 * d.1));
    let (m2_diff, se_diff) = mean_and_se(draws.iter().map(|d| (d.1 - d.2) * (d.1 - d.2)));
    Ok(MomentReport {
        tau: grid.tau(),
        samples,
        m2_bar,
        se_bar,
        m2_hat,
        se_hat,
        m2_diff,
        se_diff,
    })
}
