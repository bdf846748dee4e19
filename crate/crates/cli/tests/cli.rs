use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn mogp(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mogp"));
    cmd.args(args).env_remove("MOGP_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn manifest() -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/datasets.toml");
    p.canonicalize().unwrap().display().to_string()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(
        &path,
        format!("{body}\n[dataset]\nname = \"Spect\"\nmanifest = {:?}\n", manifest()),
    )
    .unwrap();
    path
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn smoke_run_is_fast_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "algorithm = \"nsga2\"\npopulation = 10\ngenerations = 1\nruns = 1\noutput_dir = \"out\"",
    );
    let start = Instant::now();
    let o = mogp(&["run", cfg.to_str().unwrap()], &[]);
    assert!(start.elapsed() < Duration::from_secs(5));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean HV"));
    assert!(dir.path().join("out/run_0000.csv").exists());
    assert!(dir.path().join("out/run_0000_trace.csv").exists());

    let again = mogp(&["run", cfg.to_str().unwrap(), "--jobs", "2"], &[]);
    assert!(again.status.success());
    assert!(
        stderr(&again).contains("0 runs executed, 1 already complete"),
        "{}",
        stderr(&again)
    );
}

#[test]
fn output_dir_can_be_overridden_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "algorithm = \"spea2\"\nmethod = \"sdo\"\npopulation = 10\ngenerations = 1\nruns = 2\noutput_dir = \"ignored\"\n[bounds]\nubss = 0.5",
    );
    let elsewhere = dir.path().join("elsewhere");
    let o = mogp(&["run", cfg.to_str().unwrap()], &[("MOGP_OUTPUT_DIR", &elsewhere)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(elsewhere.join("run_0001.csv").exists());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn invalid_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "algorithm = \"nsga2\"\nmethod = \"sdo\"");
    let o = mogp(&["run", cfg.to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("needs semantic bounds"), "{}", stderr(&o));

    let o = mogp(&["run", "/nonexistent/exp.toml"], &[]);
    assert!(!o.status.success());
    assert!(!mogp(&["frobnicate"], &[]).status.success());
}

#[test]
fn failed_runs_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one_positive.csv");
    let mut text = String::from("x,label\n");
    for i in 0..10 {
        text += &format!("{i},{}\n", if i == 0 { "yes" } else { "no" });
    }
    fs::write(&csv, text).unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "algorithm = \"nsga2\"\npopulation = 10\ngenerations = 1\nruns = 2\n\
         [dataset]\npath = \"one_positive.csv\"\nlabel_column = \"label\"\npositive_label = \"yes\"\n",
    )
    .unwrap();
    let o = mogp(&["run", cfg.to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("2 failed"), "{}", stderr(&o));
}

#[test]
fn sweep_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.toml");
    fs::write(
        &grid,
        format!(
            "datasets = [\"Spect\"]\nmanifest = {:?}\nalgorithms = [\"nsga2\"]\nmethods = [\"canonical\", \"psdo\"]\n\
             lbss = [\"none\"]\nubss = [0.25, 1.0]\npopulation = 10\ngenerations = 1\nruns = 2\n",
            manifest()
        ),
    )
    .unwrap();
    let o = mogp(&["sweep", grid.to_str().unwrap(), "-j", "2"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("3 cells"));
    let campaign = dir.path().join("campaign/manifest.json");
    assert!(campaign.exists());

    let out = dir.path().join("tables");
    let o = mogp(
        &["report", campaign.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "summary.csv",
        "comparisons.csv",
        "payoff.csv",
        "fronts.csv",
        "report.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }

    // Deleting a run leaves a flagged partial report.
    fs::remove_file(
        dir.path()
            .join("campaign/Spect/nsga2/psdo/lbss-none_ubss-1/run_0000.csv"),
    )
    .unwrap();
    let o = mogp(&["report", campaign.to_str().unwrap()], &[]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("partial report"), "{}", stderr(&o));
    let json = fs::read_to_string(dir.path().join("campaign/report/report.json")).unwrap();
    assert!(json.contains("\"partial\": true"));

    let dup = dir.path().join("dup.toml");
    fs::write(
        &dup,
        format!("datasets = [\"Spect\", \"Spect\"]\nmanifest = {:?}\n", manifest()),
    )
    .unwrap();
    let o = mogp(&["sweep", dup.to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("duplicate"), "{}", stderr(&o));
}
