//! Monte Carlo strong-error studies and energy sweeps.
//!
//! Every level of a sample and its reference solution are driven by one
//! Brownian path, so the measured errors are pathwise (strong) errors. The
//! reference is the `theta = 1/2` scheme on a much finer time grid with the
//! same spatial mesh, so only the time discretization error is measured.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem1d::{FemOperators, SpatialMesh};
use crate::noise::{
    pairwise_sums, simulate_increments, zero_increments, IncrementLevel, NoiseSeed, TimeGrid,
};
use crate::parallel;
use crate::problem::ProblemSpec;
use crate::stepper::{Record, Scheme, SchemeConfig, Theta, Trajectory};

/// The three error functionals, in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// `max_n ||u(t_n) - u^n||_{L2}`
    DisplacementL2 = 0,
    /// `max_n |u(t_n) - u^n|_{H1}`
    DisplacementH1 = 1,
    /// `max_n ||v(t_n) - v^n||_{L2}`
    VelocityL2 = 2,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::DisplacementL2, Norm::DisplacementH1, Norm::VelocityL2];

    pub fn label(self) -> &'static str {
        match self {
            Norm::DisplacementL2 => "u_L2",
            Norm::DisplacementH1 => "u_H1",
            Norm::VelocityL2 => "v_L2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub problem: String,
    pub theta: Theta,
    pub m: usize,
    pub levels: Vec<usize>,
    pub reference_steps: usize,
    pub samples: usize,
    pub base_seed: u64,
    pub horizon: f64,
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidExperiment(msg));
        if self.m < 8 {
            return bad(format!("need m >= 8 spatial subintervals, got {}", self.m));
        }
        if self.samples == 0 {
            return bad("need at least one sample".into());
        }
        if self.levels.is_empty() {
            return bad("need at least one time level".into());
        }
        for &n in self.levels.iter().chain(Some(&self.reference_steps)) {
            TimeGrid::new(self.horizon, n)?;
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be strictly increasing".into());
        }
        let finest = *self.levels.last().unwrap();
        if self.reference_steps < finest {
            return bad(format!(
                "reference N={} is coarser than level N={finest}",
                self.reference_steps
            ));
        }
        Ok(())
    }

    /// Requested levels followed by the reference, without duplicates.
    fn all_levels(&self) -> Vec<usize> {
        let mut all = self.levels.clone();
        if all.last() != Some(&self.reference_steps) {
            all.push(self.reference_steps);
        }
        all
    }
}

/// A validated study: configuration, problem and spatial operators.
#[derive(Debug)]
pub struct Study {
    pub cfg: ConvergenceConfig,
    pub spec: ProblemSpec,
    pub ops: FemOperators,
}

impl Study {
    pub fn new(cfg: ConvergenceConfig) -> Result<Self> {
        let spec = ProblemSpec::builtin(&cfg.problem)?;
        Self::with_spec(cfg, spec)
    }

    pub fn with_spec(cfg: ConvergenceConfig, spec: ProblemSpec) -> Result<Self> {
        cfg.validate()?;
        let (a, b) = spec.domain;
        let ops = FemOperators::assemble(SpatialMesh::new(a, b, cfg.m)?);
        Ok(Self { cfg, spec, ops })
    }

    fn scheme(&self, theta: Theta, steps: usize) -> Result<Scheme<'_>> {
        let grid = TimeGrid::new(self.cfg.horizon, steps)?;
        Scheme::new(&self.spec, &self.ops, SchemeConfig::new(theta, grid))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub steps: usize,
    /// Indexed by [`Norm`].
    pub max_error: [f64; 3],
}

/// Max-over-time errors of one sample at every level.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub sample: u64,
    pub levels: Vec<LevelError>,
    /// Coarse `bar` increments equal sums of fine ones, bit for bit, across
    /// all levels and the reference.
    pub coupling_exact: bool,
}

/// `true` if every coarser level's `bar` equals repeated pairwise sums of the
/// next finer level's `bar`, compared bitwise.
pub fn coupling_is_exact(levels: &[IncrementLevel]) -> bool {
    levels.windows(2).all(|pair| {
        let (coarse, fine) = (&pair[0], &pair[1]);
        let mut sums = fine.bar.clone();
        while sums.len() > coarse.bar.len() {
            sums = pairwise_sums(&sums);
        }
        sums.len() == coarse.bar.len()
            && sums
                .iter()
                .zip(&coarse.bar)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    })
}

/// Increments of the path `seed` on `levels`; all zero for noise-free problems.
pub fn path_increments(
    spec: &ProblemSpec,
    seed: NoiseSeed,
    horizon: f64,
    levels: &[usize],
) -> Result<Vec<IncrementLevel>> {
    if spec.noise_free {
        zero_increments(horizon, levels)
    } else {
        simulate_increments(seed, horizon, levels)
    }
}

/// One trajectory of `spec` on the path `seed`.
pub fn simulate_path(
    spec: &ProblemSpec,
    ops: &FemOperators,
    cfg: SchemeConfig,
    seed: NoiseSeed,
    record: &Record,
) -> Result<Trajectory> {
    let grid = cfg.grid;
    let incr = path_increments(spec, seed, grid.horizon(), &[grid.steps()])?;
    Scheme::new(spec, ops, cfg)?.run_trajectory(&incr[0], record)
}

fn level_error(study: &Study, coarse: &Trajectory, fine: &Trajectory, ratio: usize) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for (&n, (u, v)) in coarse.recorded.range(1..) {
        let (u_ref, v_ref) = &fine.recorded[&(n * ratio)];
        let eu = u_ref.sub(u);
        let ev = v_ref.sub(v);
        let errs = [
            study.ops.norm_l2(&eu)?,
            study.ops.norm_h1_semi(&eu)?,
            study.ops.norm_l2(&ev)?,
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    Ok(worst)
}

/// Errors of every level of one sample against the shared-path reference.
pub fn sample_error(study: &Study, sample: u64) -> Result<ErrorRecord> {
    let cfg = &study.cfg;
    let all = cfg.all_levels();
    let seed = NoiseSeed::new(cfg.base_seed, sample);
    let incr = path_increments(&study.spec, seed, cfg.horizon, &all)
        .map_err(|e| e.in_sample(sample, cfg.reference_steps))?;
    let coupling_exact = coupling_is_exact(&incr);

    let n_ref = cfg.reference_steps;
    let reference = study
        .scheme(Theta::Half, n_ref)?
        .run_trajectory(incr.last().unwrap(), &Record::All)
        .map_err(|e| e.in_sample(sample, n_ref))?;

    let mut levels = Vec::with_capacity(cfg.levels.len());
    for (&steps, level_incr) in cfg.levels.iter().zip(&incr) {
        let max_error = if steps == n_ref && cfg.theta == Theta::Half {
            [0.0; 3]
        } else {
            let traj = study
                .scheme(cfg.theta, steps)?
                .run_trajectory(level_incr, &Record::All)
                .map_err(|e| e.in_sample(sample, steps))?;
            level_error(study, &traj, &reference, n_ref / steps)?
        };
        levels.push(LevelError { steps, max_error });
    }
    Ok(ErrorRecord {
        sample,
        levels,
        coupling_exact,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub steps: usize,
    pub tau: f64,
    /// RMS over samples of the max-over-time error, per [`Norm`].
    pub rms: [f64; 3],
    /// Delta-method standard error of `rms`.
    pub se: [f64; 3],
    /// Order against the previous (coarser) row.
    pub order: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<LevelRow>,
    pub samples: usize,
    pub coupling_exact: bool,
}

impl ConvergenceReport {
    pub fn column(&self, norm: Norm) -> Vec<f64> {
        self.rows.iter().map(|r| r.rms[norm as usize]).collect()
    }

    /// Least-squares slope of `log2(rms)` against `log2(tau)`.
    pub fn fitted_order(&self, norm: Norm) -> Option<f64> {
        let col = self.column(norm);
        if col.len() < 2 || col.iter().any(|&e| !(e > 0.0)) {
            return None;
        }
        let x: Vec<f64> = self.rows.iter().map(|r| r.tau.log2()).collect();
        let y: Vec<f64> = col.iter().map(|e| e.log2()).collect();
        Some(least_squares_slope(&x, &y))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "N,tau,err_u_L2,se_u_L2,order_u_L2,err_u_H1,se_u_H1,order_u_H1,err_v_L2,se_v_L2,order_v_L2,samples\n",
        );
        for r in &self.rows {
            let _ = write!(out, "{},{}", r.steps, r.tau);
            for k in 0..3 {
                let order = r.order[k].map(|o| format!("{o:.4}")).unwrap_or_default();
                let _ = write!(out, ",{:.6e},{:.6e},{}", r.rms[k], r.se[k], order);
            }
            let _ = writeln!(out, ",{}", self.samples);
        }
        out
    }
}

pub fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `log2(err[i] / err[i + 1])` for errors on successively halved steps.
pub fn estimate_order(errors: &[f64]) -> Result<Vec<f64>> {
    if errors.len() < 2 {
        return Err(Error::InvalidExperiment(
            "order estimation needs at least two levels".into(),
        ));
    }
    if let Some(&bad) = errors.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::NonPositiveError(bad));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Mean and standard error of the mean of `values`.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates per-sample records; the result depends only on their order,
/// which is the sample order.
pub fn aggregate(cfg: &ConvergenceConfig, records: &[ErrorRecord]) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(cfg.levels.len());
    for (j, &steps) in cfg.levels.iter().enumerate() {
        let mut rms = [0.0; 3];
        let mut se = [0.0; 3];
        for k in 0..3 {
            let squares: Vec<f64> = records
                .iter()
                .map(|r| r.levels[j].max_error[k].powi(2))
                .collect();
            let (ms, ms_se) = mean_se(&squares);
            rms[k] = ms.sqrt();
            se[k] = if rms[k] > 0.0 { ms_se / (2.0 * rms[k]) } else { 0.0 };
        }
        rows.push(LevelRow {
            steps,
            tau: cfg.horizon / steps as f64,
            rms,
            se,
            order: [None; 3],
        });
    }
    for j in 1..rows.len() {
        let refine = (rows[j].steps as f64 / rows[j - 1].steps as f64).log2();
        for k in 0..3 {
            let (c, f) = (rows[j - 1].rms[k], rows[j].rms[k]);
            if c > 0.0 && f > 0.0 {
                rows[j].order[k] = Some((c / f).log2() / refine);
            }
        }
    }
    Ok(ConvergenceReport {
        rows,
        samples: records.len(),
        coupling_exact: records.iter().all(|r| r.coupling_exact),
    })
}

/// Runs all samples of a study and aggregates them.
pub fn convergence_study(study: &Study) -> Result<ConvergenceReport> {
    let records = run_samples(study)?;
    aggregate(&study.cfg, &records)
}

pub fn run_samples(study: &Study) -> Result<Vec<ErrorRecord>> {
    parallel::try_map_indexed(study.cfg.samples, |s| sample_error(study, s as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    pub problem: String,
    pub theta: Theta,
    pub levels: Vec<usize>,
    pub m: usize,
    pub samples: usize,
    pub base_seed: u64,
    pub horizon: f64,
    /// Allowed `|mean_j - mean_finest| / mean_finest`.
    pub max_relative_spread: f64,
    /// Per-sample `max_n E_n / E_0` treated as blow-up.
    pub blowup_factor: f64,
}

impl StabilityConfig {
    pub const DEFAULT_SPREAD: f64 = 0.25;
    pub const DEFAULT_BLOWUP: f64 = 10.0;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRow {
    pub steps: usize,
    pub tau: f64,
    /// Monte Carlo mean of `max_n (||v^n||^2 + |u^n|_{H1}^2)`.
    pub mean_max_energy: f64,
    pub se: f64,
    pub initial_energy: f64,
    /// Largest per-sample `max_n E_n / E_0`.
    pub max_growth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub samples: usize,
    /// Largest relative deviation of a level's mean from the finest level's.
    pub spread: f64,
    pub flagged: bool,
}

impl StabilityReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("N,tau,mean_max_energy,se_max_energy,initial_energy,max_growth,samples\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.6e},{:.6e},{:.6e},{:.6e},{}",
                r.steps, r.tau, r.mean_max_energy, r.se, r.initial_energy, r.max_growth, self.samples
            );
        }
        out
    }
}

pub fn stability_sweep(cfg: &StabilityConfig) -> Result<StabilityReport> {
    let spec = ProblemSpec::builtin(&cfg.problem)?;
    stability_sweep_with(cfg, spec)
}

pub fn stability_sweep_with(cfg: &StabilityConfig, spec: ProblemSpec) -> Result<StabilityReport> {
    if cfg.samples == 0 || cfg.m < 2 {
        return Err(Error::InvalidExperiment(
            "stability sweep needs samples >= 1 and m >= 2".into(),
        ));
    }
    let (a, b) = spec.domain;
    let ops = FemOperators::assemble(SpatialMesh::new(a, b, cfg.m)?);
    let schemes = cfg
        .levels
        .iter()
        .map(|&n| {
            let grid = TimeGrid::new(cfg.horizon, n)?;
            Scheme::new(&spec, &ops, SchemeConfig::new(cfg.theta, grid))
        })
        .collect::<Result<Vec<_>>>()?;

    // per sample, per level: (max energy, initial energy)
    let per_sample = parallel::try_map_indexed(cfg.samples, |s| {
        let seed = NoiseSeed::new(cfg.base_seed, s as u64);
        let incr = path_increments(&spec, seed, cfg.horizon, &cfg.levels)?;
        schemes
            .iter()
            .zip(&incr)
            .map(|(scheme, level)| {
                let traj = scheme
                    .run_trajectory(level, &Record::None)
                    .map_err(|e| e.in_sample(s as u64, level.grid.steps()))?;
                Ok((traj.max_energy(), traj.energy[0]))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::with_capacity(cfg.levels.len());
    for (j, &steps) in cfg.levels.iter().enumerate() {
        let maxima: Vec<f64> = per_sample.iter().map(|r| r[j].0).collect();
        let (mean, se) = mean_se(&maxima);
        let initial_energy = per_sample[0][j].1;
        let max_growth = per_sample
            .iter()
            .map(|r| {
                let (max_e, e0) = r[j];
                if e0 > 0.0 {
                    max_e / e0
                } else if max_e > 0.0 {
                    f64::INFINITY
                } else {
                    1.0
                }
            })
            .fold(0.0, f64::max);
        rows.push(StabilityRow {
            steps,
            tau: cfg.horizon / steps as f64,
            mean_max_energy: mean,
            se,
            initial_energy,
            max_growth,
        });
    }
    let finest = rows.last().map(|r| r.mean_max_energy).unwrap_or(0.0);
    let spread = rows
        .iter()
        .map(|r| {
            let dev = (r.mean_max_energy - finest).abs();
            if dev == 0.0 {
                0.0
            } else {
                dev / finest.abs()
            }
        })
        .fold(0.0, f64::max);
    let flagged = !(spread < cfg.max_relative_spread)
        || rows.iter().any(|r| !(r.max_growth < cfg.blowup_factor));
    Ok(StabilityReport {
        rows,
        samples: cfg.samples,
        spread,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_of_exact_ratios() {
        let o = estimate_order(&[0.1, 0.05]).unwrap();
        assert!((o[0] - 1.0).abs() < 1e-15);
        let o = estimate_order(&[0.1, 0.1 / 2f64.powf(1.5)]).unwrap();
        assert!((o[0] - 1.5).abs() < 1e-14);
        // rows tau = 1/8 -> 1/16 of the first published table
        let o = estimate_order(&[2.856e-2, 1.469e-2]).unwrap();
        assert!((o[0] - 0.959).abs() < 5e-4, "{}", o[0]);
    }

    #[test]
    fn order_rejects_bad_errors() {
        assert!(matches!(
            estimate_order(&[0.1, 0.0]),
            Err(Error::NonPositiveError(_))
        ));
        assert!(estimate_order(&[0.1]).is_err());
        assert!(estimate_order(&[-1.0, 0.5]).is_err());
    }

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
        assert!((least_squares_slope(&x, &y) - 1.5).abs() < 1e-14);
    }

    fn cfg() -> ConvergenceConfig {
        ConvergenceConfig {
            problem: "test1".into(),
            theta: Theta::Zero,
            m: 16,
            levels: vec![4, 8],
            reference_steps: 32,
            samples: 2,
            base_seed: 1,
            horizon: 1.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(ConvergenceConfig { m: 4, ..cfg() }.validate().is_err());
        assert!(ConvergenceConfig { levels: vec![8, 4], ..cfg() }.validate().is_err());
        assert!(ConvergenceConfig { levels: vec![4, 6], ..cfg() }.validate().is_err());
        assert!(ConvergenceConfig { reference_steps: 4, ..cfg() }.validate().is_err());
        assert!(ConvergenceConfig { samples: 0, ..cfg() }.validate().is_err());
    }

    #[test]
    fn self_comparison_is_exact() {
        let study = Study::new(ConvergenceConfig {
            theta: Theta::Half,
            levels: vec![32],
            ..cfg()
        })
        .unwrap();
        let rec = sample_error(&study, 0).unwrap();
        assert_eq!(rec.levels[0].max_error, [0.0; 3]);
        assert!(rec.coupling_exact);
    }

    #[test]
    fn sample_errors_are_reproducible() {
        let study = Study::new(cfg()).unwrap();
        let a = sample_error(&study, 3).unwrap();
        let b = sample_error(&study, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.levels.iter().all(|l| l.max_error.iter().all(|e| e.is_finite() && *e > 0.0)));
    }

    #[test]
    fn csv_has_one_row_per_level() {
        let study = Study::new(cfg()).unwrap();
        let report = convergence_study(&study).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split(',').count(), 12);
        assert_eq!(lines[1].split(',').count(), 12);
        assert!(lines[1].starts_with("4,0.25,"));
        assert!(report.rows[0].order.iter().all(Option::is_none));
        assert!(report.rows[1].order.iter().all(Option::is_some));
    }
}
