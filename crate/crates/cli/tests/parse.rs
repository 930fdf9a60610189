use std::fs;

use stochwave::Theta;
use stochwave_cli::{parse_args, Command};

fn parse(args: &str) -> anyhow::Result<Command> {
    let argv = std::iter::once("stochwave").chain(args.split_whitespace());
    parse_args(argv).map(|cli| cli.command)
}

#[test]
fn full_convergence_invocation() {
    let cmd = parse(
        "convergence --problem test2 --theta 0.5 --levels 4,8,16,32 --ref 256 --m 256 --samples 100 --seed 42",
    )
    .unwrap();
    let Command::Convergence(a) = cmd else {
        panic!("wrong subcommand");
    };
    assert_eq!(a.scheme.problem, "test2");
    assert_eq!(a.scheme.theta, Theta::Half);
    assert_eq!(a.levels, vec![4, 8, 16, 32]);
    assert_eq!(a.reference, 256);
    assert_eq!(a.scheme.m, 256);
    assert_eq!(a.samples, 100);
    assert_eq!(a.scheme.seed, 42);
}

#[test]
fn theta_must_be_zero_or_half() {
    let err = parse("convergence --theta 0.3").unwrap_err().to_string();
    assert!(err.contains("theta must be 0 or 0.5"), "{err}");
    assert!(parse("simulate --theta 0").is_ok());
}

#[test]
fn step_counts_must_be_powers_of_two() {
    let err = parse("convergence --levels 4,12").unwrap_err().to_string();
    assert!(err.contains("12 is not a power of two"), "{err}");
    assert!(parse("simulate --steps 24").is_err());
    assert!(parse("convergence --ref 100").is_err());
}

#[test]
fn other_invalid_values() {
    assert!(parse("bogus").is_err());
    assert!(parse("simulate --problem test3").is_err());
    assert!(parse("stability --samples 0").is_err());
    assert!(parse("noise-check --horizon -1").is_err());
    assert!(parse("simulate --m 1").is_err());
    assert!(parse("convergence --steps 8").is_err());
}

#[test]
fn later_flags_replace_earlier_ones() {
    let Command::Stability(a) = parse("stability --levels 4,8 --levels 16,32 --seed 1 --seed 2").unwrap()
    else {
        panic!("wrong subcommand");
    };
    assert_eq!(a.levels, vec![16, 32]);
    assert_eq!(a.scheme.seed, 2);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    fs::write(
        &path,
        "# study settings\nproblem = test1\ntheta = 0\nlevels = 4, 8\n\nsamples = 7   # few\nplot = true\n",
    )
    .unwrap();
    let args = format!("convergence --config {} --samples 3", path.display());
    let Command::Convergence(a) = parse(&args).unwrap() else {
        panic!("wrong subcommand");
    };
    assert_eq!(a.scheme.problem, "test1");
    assert_eq!(a.scheme.theta, Theta::Zero);
    assert_eq!(a.levels, vec![4, 8]);
    assert_eq!(a.samples, 3);
    assert!(a.out.plot);
}

#[test]
fn config_file_rejects_unknown_or_foreign_keys() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    for (text, needle) in [
        ("colour = red\n", "unknown config key `colour`"),
        ("ref = 64\n", "unknown config key `ref`"),
        ("config = other.conf\n", "unknown config key `config`"),
        ("samples 10\n", "expected `key = value`"),
        ("plot = yes\n", "expects true or false"),
    ] {
        fs::write(&path, text).unwrap();
        let err = parse(&format!("stability --config {}", path.display())).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains(needle), "{text:?}: {msg}");
    }
    let err = parse("stability --config /nonexistent/x.conf").unwrap_err();
    assert!(format!("{err:#}").contains("cannot read config file"));
}

#[test]
fn resolved_settings_round_trip_through_a_config_file() {
    let cmd = parse("simulate --problem deterministic --steps 32 --record 0.5,1 --m 64").unwrap();
    let text: String = cmd
        .resolved()
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("echo.conf");
    fs::write(&path, text).unwrap();
    let again = parse(&format!("simulate --config {}", path.display())).unwrap();
    assert_eq!(cmd.resolved(), again.resolved());
}
