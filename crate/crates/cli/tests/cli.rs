use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "small"
master_seed = 5
trials = 2
horizon = 5
noise_sd = 0.1
init_count = 2

[grid]
dim = 1
levels = { count = 10, spacing = 0.1 }

[kernel]
family = "squared_exponential"
lengthscales = [0.2]

[[rules]]
kind = "eims"

[[rules]]
kind = "ucb"
"#;

fn gp_eims(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gp-eims"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn run_writes_results_and_plot_regenerates_them() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = gp_eims(&["run", "small.toml", "--out", "res", "--threads", "1"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("GP-EIMS") && stdout.contains("GP-UCB"), "{stdout}");
    let res = dir.path().join("res");
    assert_eq!(fs::read_dir(res.join("traces")).unwrap().count(), 4);
    let svg = fs::read(res.join("cumulative_regret.svg")).unwrap();
    fs::remove_file(res.join("cumulative_regret.svg")).unwrap();

    let out = gp_eims(&["plot", "res"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::read(res.join("cumulative_regret.svg")).unwrap(), svg);
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = gp_eims(
        &["run", "small.toml", "--out", "res", "--trials", "1", "--horizon", "2", "--seed", "9", "--no-checks"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let agg = fs::read_to_string(dir.path().join("res/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 2 * 2 * 2);
    assert!(fs::read_to_string(dir.path().join("res/config.toml")).unwrap().contains("master_seed = 9"));
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), SMALL.replace("lengthscales = [0.2]", "lengthscales = [0.2, 0.2]"))
        .unwrap();
    let out = gp_eims(&["run", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", text(&out.stderr));
    let out = gp_eims(&["run", "no-such-preset"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_single_check_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = gp_eims(&["verify", "--check", "q_bound"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = fs::read_to_string(dir.path().join("verify-report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("name,source,cases,violations,worst_margin"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("q_bound,"), "{row}");
    assert!(row.contains(",0,"), "{row}");
}

#[test]
fn mig_prints_curve() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    let out = gp_eims(&["mig", "small.toml"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert_eq!(stdout.lines().count(), 6);
    assert!(text(&out.stderr).contains("bound on cumulative regret"));
}

#[test]
fn presets_list_and_write() {
    let dir = tempfile::tempdir().unwrap();
    let out = gp_eims(&["presets", "--write", "cfg"], dir.path());
    assert!(out.status.success());
    let stdout = text(&out.stdout);
    for name in ["desk", "desk-matern", "full"] {
        assert!(stdout.contains(name));
        assert!(dir.path().join("cfg").join(format!("{name}.toml")).exists());
    }
    let out = gp_eims(&["mig", "cfg/desk.toml", "--horizon", "3"], dir.path());
    assert!(out.status.success(), "{}", text(&out.stderr));
}
