use std::fs::{self, File};
use std::path::Path;
use std::process::Command;

use optfolio::cli::main_with_args;
use optfolio::experiment::{write_records, write_trace, TrialRecord, RECORDS_FILE, TRACE_FILE};
use optfolio::problems::Improvement;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("optfolio").chain(args.iter().copied());
    let code = main_with_args(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write_fixture(dir: &Path, records: &[TrialRecord]) {
    write_records(File::create(dir.join(RECORDS_FILE)).unwrap(), records).unwrap();
    write_trace(File::create(dir.join(TRACE_FILE)).unwrap(), records).unwrap();
}

fn hit(instance: u64, at: u64, total: u64) -> TrialRecord {
    let trace = vec![Improvement { evals: 1, delta: 30.0 }, Improvement { evals: at, delta: 0.0 }];
    TrialRecord::from_trace(1, 2, instance, "EG50", total, trace)
}

fn miss(instance: u64, total: u64) -> TrialRecord {
    TrialRecord::from_trace(1, 2, instance, "EG50", total, vec![Improvement { evals: 1, delta: 30.0 }])
}

#[test]
fn run_portfolio_example() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("r");
    let (code, stdout, _) = run(&[
        "run", "--portfolio", "NelderMead,Powell,CG,BFGS,CMA", "--strategy", "eg", "--eps", "0.5", "--functions", "1",
        "--dims", "2", "--instances", "2", "--maxfev", "10000", "--seed", "42", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("f1 d2 i")).count(), 2);
    assert!(out.join("EG50_f01_d02_i02.mlog.csv").is_file());
    let meta = fs::read_to_string(out.join("meta.json")).unwrap();
    assert!(meta.contains("\"master_seed\": 42"));
}

#[test]
fn flag_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let cases: &[&[&str]] = &[
        &["run", "--strategy", "eg", "--out", out],
        &["run", "--portfolio", "CMA,Powell", "--strategy", "eg", "--eps", "1.5", "--out", out],
        &["run", "--portfolio", "CMA,Powell", "--strategy", "unif", "--eps", "0.5", "--out", out],
        &["run", "--portfolio", "CMA,Simplex", "--strategy", "unif", "--out", out],
        &["run", "--solver", "CMA", "--portfolio", "CMA", "--out", out],
        &["run", "--solver", "CMA", "--functions", "0-3", "--out", out],
        &["run", "--solver", "CMA", "--dims", "1", "--out", out],
        &["run", "--solver", "CMA", "--out", out, "--bogus"],
        &["ert", "--in", out],
        &["ecdf", "--in", out, "--targets", "0"],
        &["frobnicate"],
    ];
    for args in cases {
        let (code, _, stderr) = run(args);
        assert_eq!(code, 2, "{args:?}");
        assert!(stderr.contains("sage"), "{args:?}: {stderr}");
    }
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn ert_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path(), &[hit(1, 100, 100), hit(2, 200, 200), miss(3, 1000)]);
    let (code, stdout, _) = run(&["ert", "--in", tmp.path().to_str().unwrap(), "--delta", "1e-8"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.trim(), "function=1,dim=2,solver=EG50,delta_f=1.000e-08,ert=650,n_success=2,n_trials=3");
    let csv = fs::read_to_string(tmp.path().join("ert.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("function,dim,solver,delta_f,ert,n_success,n_trials"));
    assert!(lines.next().unwrap().ends_with(",650,2,3"));

    let (code, stdout, _) = run(&["ert", "--in", tmp.path().to_str().unwrap(), "--ladder", "50"]);
    assert_eq!(code, 0);
    assert_eq!(stdout.lines().count(), 50);
}

#[test]
fn ert_all_failed() {
    let tmp = tempfile::tempdir().unwrap();
    write_fixture(tmp.path(), &[miss(1, 100), miss(2, 300)]);
    let (code, stdout, _) = run(&["ert", "--in", tmp.path().to_str().unwrap(), "--delta", "1e-8"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("ert=inf,n_success=0"), "{stdout}");
}

#[test]
fn missing_or_corrupt_records_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    assert_eq!(run(&["ert", "--in", dir, "--delta", "1e-8"]).0, 1);
    assert_eq!(run(&["ecdf", "--in", dir]).0, 1);
    fs::write(tmp.path().join(RECORDS_FILE), "garbage\n1,2,3\n").unwrap();
    assert_eq!(run(&["ert", "--in", dir, "--delta", "1e-8"]).0, 1);
}

#[test]
fn ecdf_files_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let (code, _, _) = run(&[
        "run", "--solver", "BFGS", "--instances", "1", "--maxfev", "300", "--out", data.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let (code, _, _) = run(&["ecdf", "--in", data.to_str().unwrap(), "--seed", "3", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 6 * 5);
    assert!(names.contains(&"ecdf_all_20D.csv".to_string()) && names.contains(&"ecdf_mult2_3D.csv".to_string()));
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
    }
    let text = fs::read_to_string(a.join("ecdf_all_5D.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("budget_fevals_per_dim,BFGS"));
    assert_eq!(text.lines().count(), 62);

    let (code, _, _) = run(&["ecdf", "--in", data.to_str().unwrap(), "--targets", "1", "--samples", "1"]);
    assert_eq!(code, 0);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_optfolio");
    let status = Command::new(bin).args(["run", "--strategy", "eg", "--out", "x"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let status = Command::new(bin).args(["ert", "--delta", "1e-8", "--in"]).arg(tmp.path()).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
}
