use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hetqp::cli::{
    cmd_eval, cmd_finetune, cmd_generate, cmd_train, cmd_warmstart, load_dataset, ExperimentConfig, Split,
};
use hetqp::oracle::{branch_and_bound_with, solve_exact, BnbConfig};
use hetqp::problems::ProblemClass;
use hetqp::training::TrainMode;
use hetqp::Error;

fn config_text(out: &Path, extra: &str) -> String {
    format!(
        r#"
out = {out:?}
classes = ["MIS"]

[dataset]
n_min = 8
n_max = 12
p = 0.3
count = 10
splits = [8, 1, 1]
seed = 4

[model]
hidden_dim = 8
layers_prob = 2
layers_constr = 2

[train]
epochs = 2
batch_size = 4
validate_every = 1
{extra}
"#
    )
}

fn config(dir: &Path, extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&config_text(&dir.join("run"), extra)).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetqp"))
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, config_text(&dir.join("run"), extra)).unwrap();
    path
}

#[test]
fn generate_writes_manifest_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    cmd_generate(&cfg, false).unwrap();
    let ds = cfg.paths().dataset();
    let edges = fs::read_dir(&ds).unwrap().filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "edges");
    assert_eq!(edges.count(), 10);
    let manifest = fs::read_to_string(cfg.paths().manifest()).unwrap();
    let count = |s: &str| manifest.lines().filter(|l| l.ends_with(&format!(",{s}"))).count();
    assert_eq!((count("train"), count("val"), count("test")), (8, 1, 1));

    assert!(matches!(cmd_generate(&cfg, false), Err(Error::DirectoryNotEmpty(_))));
    cmd_generate(&cfg, true).unwrap();

    let (splits, meta) = load_dataset(&ds).unwrap();
    assert_eq!(splits.get(Split::Train).len(), 8);
    assert_eq!(meta.classes, vec![ProblemClass::Mis]);
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = config(a.path(), "");
    let cb = config(b.path(), "");
    cmd_generate(&ca, false).unwrap();
    cmd_generate(&cb, false).unwrap();
    for entry in fs::read_dir(ca.paths().dataset()).unwrap() {
        let p = entry.unwrap().path();
        let q = cb.paths().dataset().join(p.file_name().unwrap());
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap(), "{}", p.display());
    }
}

#[test]
fn invalid_splits_fail_before_touching_disk() {
    let dir = tempfile::tempdir().unwrap();
    let text = config_text(&dir.path().join("run"), "").replace("splits = [8, 1, 1]", "splits = [8, 1, 2]");
    assert!(matches!(ExperimentConfig::parse(&text), Err(Error::Config(_))));
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = bin().arg("--config").arg(&path).arg("generate").output().unwrap();
    assert!(!out.status.success());
    assert!(!dir.path().join("run").exists());
}

#[test]
fn train_eval_finetune_warmstart_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let cfg = ExperimentConfig { eval: hetqp::cli::EvalSpec { held_out: Some(ProblemClass::Mvc), ..cfg.eval.clone() }, ..cfg };
    cmd_generate(&cfg, false).unwrap();

    assert!(matches!(cmd_train(&ExperimentConfig { out: dir.path().join("nowhere"), ..cfg.clone() }, false, false), Err(Error::Config(_))));
    let (_, history) = cmd_train(&cfg, false, false).unwrap();
    let paths = cfg.paths();
    assert!(paths.checkpoint().exists() && paths.last().exists());
    let csv = fs::read_to_string(paths.history_csv()).unwrap();
    assert!(csv.starts_with("epoch,class,loss,ag,wallclock\n"));
    assert_eq!(csv.lines().count(), 1 + history.epochs.len());
    assert!(cmd_train(&cfg, false, false).is_err(), "existing checkpoint needs --force");

    let oracle = cmd_eval(&cfg, None, true).unwrap();
    assert!(oracle.classes.iter().all(|c| c.mean_ar == 1.0));
    assert_eq!(fs::read_to_string(paths.table_csv()).unwrap(), "method,MIS\noracle,1.0000 (0.0000)\n");

    let report = cmd_eval(&cfg, None, false).unwrap();
    assert!(report.instances.iter().all(|m| m.seconds >= 0.0));
    let table = fs::read_to_string(paths.table_csv()).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], vec!["method", "MIS"]);
    assert!(rows[1][1].ends_with(')') && rows[1][1].contains(" ("));

    let absent = ExperimentConfig { classes: vec![ProblemClass::Mds], ..cfg.clone() };
    assert!(matches!(cmd_eval(&absent, None, true), Err(Error::Config(_))));

    let trace = cmd_finetune(&cfg, None, None, Some(0), None).unwrap();
    assert_eq!(trace.len(), 1);
    assert_eq!(fs::read_to_string(paths.finetune_csv()).unwrap().lines().count(), 2);
    let trace = cmd_finetune(&cfg, None, None, Some(3), Some(1.05)).unwrap();
    assert_eq!(trace.len(), 4);
    let ft = fs::read_to_string(paths.finetune_csv()).unwrap();
    for (i, line) in ft.lines().skip(1).enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[0], i.to_string());
        assert_eq!(cols[2], "1.05");
    }
    // A class seen during training only warns.
    cmd_finetune(&cfg, None, Some(ProblemClass::Mis), Some(1), None).unwrap();

    let time_limit = 0.5;
    let start = Instant::now();
    let rows = cmd_warmstart(&cfg, None, None, Some(time_limit)).unwrap();
    assert!(start.elapsed().as_secs_f64() < 2.0 * time_limit * rows.len() as f64 + 5.0);
    let ws = fs::read_to_string(paths.warmstart_csv()).unwrap();
    assert_eq!(ws.lines().count(), 1 + rows.len());
    assert_eq!(rows.len(), 1);
    assert!(rows.iter().all(|r| r.warm >= r.cold && r.warm >= r.decoded));
    assert!(paths.mip_starts().join(format!("{}.mst", rows[0].name)).exists());
}

#[test]
fn warm_start_at_the_optimum_is_returned() {
    let g = hetqp::graphs::generate_er(30, 0.5, 3).unwrap();
    let qp = hetqp::problems::build_qp(&g, ProblemClass::Mc);
    let opt = solve_exact(&qp).unwrap();
    let cfg = BnbConfig { time_limit: 1e-6, node_limit: Some(1) };
    let r = branch_and_bound_with(&qp, &cfg, Some(&opt.x_star)).unwrap();
    assert_eq!(r.value_reported, opt.value_reported);
}

#[test]
fn resume_reproduces_an_uninterrupted_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let full = config(a.path(), "");
    cmd_generate(&full, false).unwrap();
    let (pa, ha) = cmd_train(&full, false, false).unwrap();

    let mut part = config(b.path(), "");
    part.train.epochs = 1;
    cmd_generate(&part, false).unwrap();
    cmd_train(&part, false, false).unwrap();
    part.train.epochs = 2;
    let (pb, hb) = cmd_train(&part, false, true).unwrap();
    assert_eq!(pa, pb);
    assert_eq!(ha.without_timing(), hb.without_timing());
}

#[test]
fn multi_class_history_has_rows_per_class() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), "");
    cfg.classes = vec![ProblemClass::Mis, ProblemClass::Mvc];
    cfg.train.mode = TrainMode::MultiErm;
    cmd_generate(&cfg, false).unwrap();
    cmd_train(&cfg, false, false).unwrap();
    let csv = fs::read_to_string(cfg.paths().history_csv()).unwrap();
    for cls in ["MIS", "MVC"] {
        assert_eq!(csv.lines().filter(|l| l.split(',').nth(1) == Some(cls)).count(), 2);
    }
}

#[test]
fn binary_runs_every_verb_with_global_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("elsewhere");
    let run = |args: &[&str]| {
        let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("--seed").arg("11").args(args).output().unwrap();
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&["generate"]);
    let again = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("generate").output().unwrap();
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    run(&["--force", "generate"]);
    run(&["train"]);
    assert!(out.join("checkpoint.json").exists());
    assert!(run(&["eval", "--oracle"]).contains("oracle,1.0000"));
    assert!(run(&["eval"]).starts_with("method,MIS"));
    assert!(run(&["finetune", "--class", "MIS", "--steps", "1"]).starts_with("step,ar"));
    assert!(run(&["warmstart", "--time-limit", "0.2"]).contains("mean cold"));
    assert!(!dir.path().join("run").exists());

    let missing = bin().arg("generate").output().unwrap();
    assert!(!missing.status.success());
}
