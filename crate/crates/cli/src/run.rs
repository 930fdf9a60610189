//! Subcommand dispatch and output files.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use stochwave::experiment::{
    convergence_study, simulate_path, stability_sweep, ConvergenceConfig, StabilityConfig, Study,
};
use stochwave::fem1d::{FemOperators, SpatialMesh};
use stochwave::noise::{moment_report, TimeGrid};
use stochwave::parallel::with_workers;
use stochwave::problem::ProblemSpec;
use stochwave::stepper::{Record, SchemeConfig};
use stochwave::NoiseSeed;

use crate::config::{Command, ConvergenceArgs, NoiseCheckArgs, SimulateArgs, StabilityArgs};

pub const OUT_DIR_ENV: &str = "STOCHWAVE_OUT_DIR";

/// Everything a run produces, before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub csv: String,
    /// gnuplot data blocks.
    pub data: String,
    /// gnuplot script body; `{data}` and `{image}` are substituted with file names.
    pub script: String,
}

pub fn header(command: &Command) -> String {
    let mut out = format!("# stochwave {}\n# subcommand = {}\n", stochwave::VERSION, command.name());
    for (key, value) in command.resolved() {
        let _ = writeln!(out, "# {key} = {value}");
    }
    out
}

pub fn render(command: &Command) -> anyhow::Result<Rendered> {
    let workers = command.output().workers;
    let body = with_workers(workers, || match command {
        Command::Simulate(a) => simulate(a),
        Command::Convergence(a) => convergence(a),
        Command::Stability(a) => stability(a),
        Command::NoiseCheck(a) => noise_check(a),
    })?;
    let head = header(command);
    Ok(Rendered {
        csv: format!("{head}{}", body.csv),
        data: format!("{head}{}", body.data),
        script: format!("{head}{}", body.script),
    })
}

fn operators(spec: &ProblemSpec, m: usize) -> anyhow::Result<FemOperators> {
    let (a, b) = spec.domain;
    Ok(FemOperators::assemble(SpatialMesh::new(a, b, m)?))
}

fn record_steps(times: &[f64], grid: &TimeGrid) -> anyhow::Result<Vec<usize>> {
    if times.is_empty() {
        return Ok(vec![grid.steps()]);
    }
    let tau = grid.tau();
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        let n = (t / tau).round();
        if (n * tau - t).abs() > 1e-9 * grid.horizon() || n as usize > grid.steps() {
            bail!(
                "record time {t} is not a point of the time grid (tau = {tau}, T = {})",
                grid.horizon()
            );
        }
        steps.push(n as usize);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

fn simulate(a: &SimulateArgs) -> anyhow::Result<Rendered> {
    let s = &a.scheme;
    let spec = ProblemSpec::builtin(&s.problem)?;
    let ops = operators(&spec, s.m)?;
    let grid = TimeGrid::new(s.horizon, a.steps)?;
    let steps = record_steps(&a.record, &grid)?;
    let record = Record::Steps(steps.iter().copied().collect());
    let traj = simulate_path(
        &spec,
        &ops,
        SchemeConfig::new(s.theta, grid),
        NoiseSeed::new(s.seed, a.sample_index),
        &record,
    )
    .with_context(|| format!("simulating {} with N={}", s.problem, a.steps))?;

    let mesh = *ops.mesh();
    let mut csv = String::from("n,t,x,u,v\n");
    let mut data = String::new();
    let mut script = String::from(
        "set terminal pngcairo size 900,600\nset output '{image}'\nset xlabel 'x'\nset ylabel 'u'\nplot",
    );
    for (block, (&n, (u, v))) in traj.recorded.iter().enumerate() {
        let t = grid.time(n);
        let _ = writeln!(data, "# n = {n}, t = {t}\n# x u v");
        for j in 0..=mesh.subintervals() {
            let (uj, vj) = if j == 0 || j == mesh.subintervals() {
                (0.0, 0.0)
            } else {
                (u[j - 1], v[j - 1])
            };
            let x = mesh.node(j);
            let _ = writeln!(csv, "{n},{t},{x},{uj:e},{vj:e}");
            let _ = writeln!(data, "{x} {uj:e} {vj:e}");
        }
        data.push_str("\n\n");
        let sep = if block == 0 { " " } else { ", \\\n     " };
        let _ = write!(script, "{sep}'{{data}}' index {block} using 1:2 with lines title 't = {t}'");
    }
    script.push('\n');
    Ok(Rendered { csv, data, script })
}

fn convergence(a: &ConvergenceArgs) -> anyhow::Result<Rendered> {
    let s = &a.scheme;
    let cfg = ConvergenceConfig {
        problem: s.problem.clone(),
        theta: s.theta,
        m: s.m,
        levels: a.levels.clone(),
        reference_steps: a.reference,
        samples: a.samples,
        base_seed: s.seed,
        horizon: s.horizon,
    };
    let report = convergence_study(&Study::new(cfg)?)?;
    let mut data = String::from("# tau err_u_L2 err_u_H1 err_v_L2\n");
    for r in &report.rows {
        let _ = writeln!(data, "{} {:e} {:e} {:e}", r.tau, r.rms[0], r.rms[1], r.rms[2]);
    }
    let script = String::from(
        "set terminal pngcairo size 900,600\nset output '{image}'\nset logscale xy\n\
         set xlabel 'tau'\nset ylabel 'RMS error'\nset key left top\n\
         plot '{data}' using 1:2 with linespoints title 'u, L2', \\\n     \
         '' using 1:3 with linespoints title 'u, H1', \\\n     \
         '' using 1:4 with linespoints title 'v, L2'\n",
    );
    Ok(Rendered {
        csv: report.to_csv(),
        data,
        script,
    })
}

fn stability(a: &StabilityArgs) -> anyhow::Result<Rendered> {
    let s = &a.scheme;
    let cfg = StabilityConfig {
        problem: s.problem.clone(),
        theta: s.theta,
        levels: a.levels.clone(),
        m: s.m,
        samples: a.samples,
        base_seed: s.seed,
        horizon: s.horizon,
        max_relative_spread: a.spread,
        blowup_factor: a.blowup,
    };
    let report = stability_sweep(&cfg)?;
    let mut data = String::from("# tau mean_max_energy se_max_energy\n");
    for r in &report.rows {
        let _ = writeln!(data, "{} {:e} {:e}", r.tau, r.mean_max_energy, r.se);
    }
    let script = String::from(
        "set terminal pngcairo size 900,600\nset output '{image}'\nset logscale x\n\
         set xlabel 'tau'\nset ylabel 'E[max_n energy]'\n\
         plot '{data}' using 1:2:3 with yerrorlines title 'mean max energy'\n",
    );
    Ok(Rendered {
        csv: report.to_csv(),
        data,
        script,
    })
}

fn noise_check(a: &NoiseCheckArgs) -> anyhow::Result<Rendered> {
    let mut csv = String::from("tau,m2_bar,se_bar,m2_hat,se_hat,m2_diff,se_diff\n");
    let mut data = String::from("# tau m2_bar m2_hat m2_diff\n");
    for &steps in &a.levels {
        let grid = TimeGrid::new(a.horizon, steps)?;
        let r = moment_report(a.samples, a.seed, &grid)?;
        let _ = writeln!(
            csv,
            "{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
            r.tau, r.m2_bar, r.se_bar, r.m2_hat, r.se_hat, r.m2_diff, r.se_diff
        );
        let _ = writeln!(data, "{} {:e} {:e} {:e}", r.tau, r.m2_bar, r.m2_hat, r.m2_diff);
    }
    let script = String::from(
        "set terminal pngcairo size 900,600\nset output '{image}'\nset logscale xy\n\
         set xlabel 'tau'\nset key left top\n\
         plot '{data}' using 1:2 with points title 'E[bar^2]', x with lines title 'tau', \\\n     \
         '' using 1:3 with points title 'E[hat^2]', x**3/3 with lines title 'tau^3/3', \\\n     \
         '' using 1:4 with linespoints title 'E[(hat - ref)^2]'\n",
    );
    Ok(Rendered { csv, data, script })
}

/// Where the CSV goes: `--output`, else the env directory, else stdout.
pub fn destination(command: &Command, env_dir: Option<PathBuf>) -> Option<PathBuf> {
    command
        .output()
        .output
        .clone()
        .or_else(|| env_dir.map(|d| d.join(format!("{}.csv", command.name()))))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Renders `command` and writes its files; returns the paths written.
pub fn execute(command: &Command, env_dir: Option<PathBuf>) -> anyhow::Result<Vec<PathBuf>> {
    let dest = destination(command, env_dir);
    if command.output().plot && dest.is_none() {
        bail!("--plot needs --output or {OUT_DIR_ENV}");
    }
    let rendered = render(command)?;
    let Some(csv_path) = dest else {
        std::io::stdout()
            .write_all(rendered.csv.as_bytes())
            .context("cannot write to stdout")?;
        return Ok(Vec::new());
    };
    write_file(&csv_path, &rendered.csv)?;
    let mut written = vec![csv_path.clone()];
    if command.output().plot {
        let data_path = csv_path.with_extension("dat");
        let script_path = csv_path.with_extension("gp");
        let script = rendered
            .script
            .replace("{data}", &file_name(&data_path))
            .replace("{image}", &file_name(&csv_path.with_extension("png")));
        write_file(&data_path, &rendered.data)?;
        write_file(&script_path, &script)?;
        written.push(data_path);
        written.push(script_path);
    }
    Ok(written)
}
