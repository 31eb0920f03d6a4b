use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stacked-voter"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("sv-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str], out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("STACKED_VOTER_SEED")
        .output()
        .unwrap()
}

#[test]
fn formulas_table_has_one_row_per_combination() {
    let d = scratch("formulas");
    let o = run(
        &[
            "formulas",
            "--formula",
            "h,tau",
            "--beta-grid",
            "0.001:0.1:log10",
            "--w",
            "1,2",
        ],
        &d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("formulas.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "formula,beta,w,value");
    assert_eq!(lines.len(), 1 + 2 * 3 * 2);
    let h: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();
    assert!((h - 1000.0 * 1000f64.ln()).abs() < 1e-9 * h);
}

#[test]
fn out_of_domain_beta_is_rejected() {
    let d = scratch("domain");
    let o = run(&["formulas", "--beta", "0.5"], &d);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let d = scratch("usage");
    let o = run(&["survival", "--no-such-flag"], &d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn command_line_overrides_config() {
    let d = scratch("config");
    let cfg = d.join("run.cfg");
    std::fs::write(&cfg, "formula = h\nbeta = 0.1\nw = 2\n").unwrap();
    let o = run(
        &[
            "formulas",
            "--config",
            cfg.to_str().unwrap(),
            "--beta",
            "0.01",
        ],
        &d,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("formulas.csv")).unwrap();
    assert_eq!(
        csv.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .take(3)
            .collect::<Vec<_>>(),
        ["h", "0.01", "2"]
    );
}

#[test]
fn manifest_replays_to_identical_output() {
    let a = scratch("replay-a");
    let b = scratch("replay-b");
    let o = run(
        &["cancer-init", "--reps", "300", "--w", "2", "--seed", "11"],
        &a,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = a.join("manifest.json");
    let o = run(&["--config", manifest.to_str().unwrap()], &b);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "manifest.json",
        "samples.csv",
        "sigma2_hist.csv",
        "sigma2_stats.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn seed_env_var_is_honoured() {
    let a = scratch("env-a");
    let b = scratch("env-b");
    let args = ["survival", "--beta", "0.2", "--m", "20", "--reps", "200"];
    let o1 = bin()
        .args(args)
        .arg("--out")
        .arg(&a)
        .env("STACKED_VOTER_SEED", "9")
        .output()
        .unwrap();
    let o2 = run(&[&args[..], &["--seed", "9"]].concat(), &b);
    assert!(o1.status.success() && o2.status.success());
    assert_eq!(
        std::fs::read(a.join("survival.json")).unwrap(),
        std::fs::read(b.join("survival.json")).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let a = scratch("workers-a");
    let b = scratch("workers-b");
    let args = ["cancer-init", "--reps", "200", "--seed", "3"];
    let o1 = run(&[&args[..], &["--workers", "1"]].concat(), &a);
    let o2 = run(&[&args[..], &["--workers", "3"]].concat(), &b);
    assert!(o1.status.success() && o2.status.success());
    assert_eq!(
        std::fs::read(a.join("samples.csv")).unwrap(),
        std::fs::read(b.join("samples.csv")).unwrap()
    );
}

#[test]
fn verify_rejects_unknown_criterion() {
    let d = scratch("verify");
    let o = run(&["verify", "--only", "13"], &d);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn single_quick_criterion_writes_report() {
    let d = scratch("verify-one");
    let o = run(&["verify", "--quick", "--only", "10"], &d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(d.join("verify.csv")).unwrap();
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("10,formula-exactness,true"));
}
