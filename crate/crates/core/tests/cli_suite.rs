//! Black-box tests of the command-line binary: argument handling, config
//! files, exit codes, and byte-level determinism of the file outputs.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    run_in(args, None)
}

fn run_in(args: &[&str], cwd: Option<&Path>) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_linesource"));
    cmd.args(args);
    if let Some(dir) = cwd {
        cmd.current_dir(dir);
    }
    let out = cmd.output().expect("binary launches");
    (
        out.status.code().expect("exit code present"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Lines of a study table that carry data start with a spacing like `1/8`.
fn data_rows(stdout: &str) -> usize {
    stdout
        .lines()
        .filter(|l| l.trim_start().starts_with("1/"))
        .count()
}

#[test]
fn help_lists_every_subcommand() {
    let (code, stdout, _) = run(&["--help"]);
    assert_eq!(code, 0, "--help exits cleanly");
    for sub in [
        "study-smooth",
        "study-segment",
        "solve-network",
        "rank-segments",
        "mesh-info",
        "gen-network",
    ] {
        assert!(stdout.contains(sub), "help lost subcommand {sub}:\n{stdout}");
    }
}

#[test]
fn the_documented_example_runs_and_prints_two_rows() {
    let (code, stdout, stderr) = run(&[
        "study-smooth",
        "--h-par",
        "1/16",
        "--h-perp",
        "1/4,1/8",
        "--element",
        "prism",
        "--method",
        "ssb",
        "--threads",
        "1",
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    assert_eq!(data_rows(&stdout), 2, "expected two table rows:\n{stdout}");
    assert!(
        stdout.contains("max relative residual"),
        "summary line missing:\n{stdout}"
    );
}

#[test]
fn unknown_flags_and_bad_values_are_usage_errors() {
    let (code, _, stderr) = run(&["study-smooth", "--no-such-flag"]);
    assert_eq!(code, 1, "unknown flag: {stderr}");

    // 3/7 is not the reciprocal of an integer, so it is not a valid spacing.
    let (code, _, stderr) = run(&["study-smooth", "--h-perp", "3/7"]);
    assert_eq!(code, 1, "bad spacing accepted: {stderr}");
    assert!(
        stderr.contains("3/7"),
        "message should quote the offending value: {stderr}"
    );

    let (code, _, stderr) = run(&["mesh-info", "--vtk"]);
    assert_eq!(code, 1, "--vtk without --out should be rejected");
    assert!(stderr.contains("--out"), "hint missing: {stderr}");

    let (code, _, _) = run(&[]);
    assert_eq!(code, 1, "missing subcommand is a usage error");
}

#[test]
fn missing_files_report_their_path() {
    let (code, _, stderr) = run(&["solve-network", "--network", "/nonexistent/net.txt"]);
    assert_eq!(code, 1);
    assert!(
        stderr.contains("/nonexistent/net.txt"),
        "path missing from error: {stderr}"
    );

    let (code, _, stderr) = run(&["study-smooth", "--config", "/nonexistent/run.ini"]);
    assert_eq!(code, 1);
    assert!(
        stderr.contains("/nonexistent/run.ini"),
        "path missing from error: {stderr}"
    );
}

#[test]
fn config_files_are_respected_and_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().expect("temp dir");
    let good = dir.path().join("run.ini");
    std::fs::write(
        &good,
        "[study]\nmethod = ssb\nh_perp = 1/4\nh_par = 1/8\n\n[solver]\nrel_tol = 1e-9\n",
    )
    .expect("write config");
    let (code, stdout, stderr) = run(&["study-smooth", "--config", good.to_str().unwrap()]);
    assert_eq!(code, 0, "stderr: {stderr}");
    assert_eq!(data_rows(&stdout), 1, "config should shrink the study:\n{stdout}");

    // A flag overrides the file.
    let (code, stdout, _) = run(&[
        "study-smooth",
        "--config",
        good.to_str().unwrap(),
        "--h-perp",
        "1/4,1/8",
    ]);
    assert_eq!(code, 0);
    assert_eq!(data_rows(&stdout), 2, "flag should override config:\n{stdout}");

    let bad = dir.path().join("bad.ini");
    std::fs::write(&bad, "[study]\nmethod = ssb\nh_purp = 1/4\n").expect("write config");
    let (code, _, stderr) = run(&["study-smooth", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(
        stderr.contains("bad.ini:3"),
        "error should name file and line: {stderr}"
    );
}

#[test]
fn an_unreachable_iteration_cap_exits_with_code_two() {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = dir.path().join("cap.ini");
    std::fs::write(&cfg, "[solver]\nmax_iter = 1\n").expect("write config");
    let (code, _, stderr) = run(&[
        "study-smooth",
        "--config",
        cfg.to_str().unwrap(),
        "--h-perp",
        "1/4",
        "--h-par",
        "1/4",
        "--method",
        "ssb",
    ]);
    assert_eq!(code, 2, "stalled solver should exit 2, stderr: {stderr}");
    assert!(stderr.contains("error:"), "diagnostic missing: {stderr}");
}

#[test]
fn generated_networks_are_reproducible_from_the_seed() {
    let (c1, first, _) = run(&["gen-network", "--count", "5", "--seed", "42"]);
    let (c2, second, _) = run(&["gen-network", "--count", "5", "--seed", "42"]);
    let (c3, other, _) = run(&["gen-network", "--count", "5", "--seed", "43"]);
    assert_eq!((c1, c2, c3), (0, 0, 0));
    assert_eq!(first, second, "same seed must reproduce the network");
    assert_ne!(first, other, "different seeds should differ");
    assert_eq!(
        first.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).count(),
        5,
        "one line per segment:\n{first}"
    );
}

#[test]
fn network_pipeline_round_trips_through_files() {
    let dir = tempfile::tempdir().expect("temp dir");
    let out = dir.path().to_str().unwrap();

    let (code, _, stderr) =
        run(&["gen-network", "--count", "6", "--seed", "5", "--out", out]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let net = dir.path().join("network.txt");
    assert!(net.is_file(), "network file written");

    let (code, stdout, stderr) = run(&[
        "rank-segments",
        "--network",
        net.to_str().unwrap(),
        "--h-perp",
        "1/8",
        "--h-par",
        "1/8",
        "--out",
        out,
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    let ranking = dir.path().join("segment_ranking.csv");
    assert!(ranking.is_file(), "ranking csv written, stdout: {stdout}");
    let csv = std::fs::read_to_string(&ranking).expect("read ranking");
    assert_eq!(csv.lines().count(), 7, "header plus six rows:\n{csv}");
    assert!(
        csv.lines().next().unwrap().contains("indicator"),
        "header names the indicator column:\n{csv}"
    );

    let (code, stdout, stderr) = run(&[
        "solve-network",
        "--network",
        net.to_str().unwrap(),
        "--h-perp",
        "1/8",
        "--h-par",
        "1/8",
    ]);
    assert_eq!(code, 0, "stderr: {stderr}");
    assert!(
        stdout.contains("residual"),
        "solve summary missing residual:\n{stdout}"
    );
}

/// Two identical invocations must produce byte-identical tables and CSV
/// files on disk.
#[test]
fn study_files_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().expect("temp dir");
    let (out_a, out_b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&out_a, &out_b] {
        let (code, _, stderr) = run(&[
            "study-smooth",
            "--h-perp",
            "1/4,1/8",
            "--h-par",
            "1/8",
            "--threads",
            "1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "stderr: {stderr}");
    }
    for name in [
        "smooth_standard.txt",
        "smooth_standard.csv",
        "smooth_ssb.txt",
        "smooth_ssb.csv",
    ] {
        let a = std::fs::read(out_a.join(name)).expect("first output");
        let b = std::fs::read(out_b.join(name)).expect("second output");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}
