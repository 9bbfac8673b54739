use std::path::Path;
use std::process::{Command, Output};

use censcope::asymptotics::{constants_row, CHERNOFF_VAR_2Z};
use censcope::birge::{birge_curve, build_partition};
use censcope::inteq::{GridModel, PhiSolver};
use censcope::npmle::{npmle_icm_with, IcmOptions};
use censcope::sim::replicate_table;
use censcope::smle::{smle_curve, SmleConfig};
use censcope::{generate_dataset, io as csvio, ObservationScheme, TargetDistribution};

fn censcope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_censcope")).args(args).env_remove("CENSCOPE_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = censcope(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.conf");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn dataset_file(dir: &Path, n: &str, seed: &str) -> String {
    let p = dir.join(format!("data-{n}-{seed}.csv"));
    let path = p.to_str().unwrap().to_string();
    ok(&["generate", "--n", n, "--seed", seed, "--out", &path]);
    path
}

#[test]
fn generate_is_deterministic_and_matches_the_library() {
    let a = ok(&["generate", "--model", "uniform", "--scheme", "nonsep", "--n", "100", "--seed", "7"]);
    let b = ok(&["generate", "--model", "uniform", "--scheme", "nonsep", "--n", "100", "--seed", "7"]);
    assert_eq!(a, b);
    let d = generate_dataset(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 100, 7).unwrap();
    let mut lib = Vec::new();
    csvio::write_dataset(&mut lib, &d.observations).unwrap();
    assert_eq!(a, lib);

    let sep = ok(&["generate", "--model", "pow4", "--scheme", "sep", "--eps", "0.2", "--n", "50", "--seed", "3"]);
    let d = generate_dataset(TargetDistribution::PowerDecay(4), ObservationScheme::Separated(0.2), 50, 3).unwrap();
    let mut lib = Vec::new();
    csvio::write_dataset(&mut lib, &d.observations).unwrap();
    assert_eq!(sep, lib);
}

#[test]
fn seed_falls_back_to_the_environment() {
    let with_env = Command::new(env!("CARGO_BIN_EXE_censcope"))
        .args(["generate", "--n", "20"])
        .env("CENSCOPE_SEED", "99")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    assert_eq!(with_env.stdout, ok(&["generate", "--n", "20", "--seed", "99"]));
    let bad = Command::new(env!("CARGO_BIN_EXE_censcope"))
        .args(["generate", "--n", "20"])
        .env("CENSCOPE_SEED", "minus one")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "n=100\nseed=4\n");
    let from_file = ok(&["--config", &conf, "generate"]);
    assert_eq!(String::from_utf8(from_file).unwrap().lines().count(), 101);
    let overridden = ok(&["generate", "--config", &conf, "--n", "500"]);
    assert_eq!(String::from_utf8(overridden.clone()).unwrap().lines().count(), 501);
    assert_eq!(overridden, ok(&["generate", "--n", "500", "--seed", "4"]));
    let empty = write_config(dir.path(), "");
    assert_eq!(ok(&["generate", "--config", &empty, "--seed", "1"]), ok(&["generate", "--seed", "1"]));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = write_config(dir.path(), "bandwidth=0.7\n");
    let out = censcope(&["--config", &conf, "generate", "--n", "10"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwidth"));

    let conf = write_config(dir.path(), "colour=blue\n");
    assert_eq!(code(&censcope(&["--config", &conf, "generate"])), 2);

    let data = dataset_file(dir.path(), "50", "1");
    let out = censcope(&["estimate", "--input", &data, "--method", "smle", "--bandwidth", "0.7"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bandwidth"));

    assert_eq!(code(&censcope(&["generate", "--n", "0"])), 2);
    assert_eq!(code(&censcope(&["generate", "--scheme", "sep", "--eps", "0.6"])), 2);
    assert_eq!(code(&censcope(&["simulate", "--table", "14"])), 2);
    assert_eq!(code(&censcope(&["simulate"])), 2);
    assert_eq!(code(&censcope(&["estimate", "--method", "mle"])), 2);
    assert_eq!(code(&censcope(&["frobnicate"])), 2);
}

#[test]
fn malformed_csv_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.csv");
    std::fs::write(&p, "t,u,d1,d2,d3\n0.1,0.4,1,0,0\n0.2,0.3,0,x,0\n").unwrap();
    let out = censcope(&["estimate", "--input", p.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 2") && msg.contains("`d2`"), "{msg}");
}

#[test]
fn estimates_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset_file(dir.path(), "300", "11");
    let obs = csvio::read_dataset(std::fs::File::open(&data).unwrap()).unwrap();
    let mle = npmle_icm_with(&obs, IcmOptions::default()).unwrap();

    let mut lib = Vec::new();
    csvio::write_step(&mut lib, &mle.estimate).unwrap();
    assert_eq!(ok(&["estimate", "--input", &data, "--method", "mle"]), lib);

    let cli = ok(&["estimate", "--input", &data, "--method", "smle", "--bandwidth", "0.251"]);
    let mut lib = Vec::new();
    csvio::write_smle_curve(&mut lib, &smle_curve(&mle.estimate, &SmleConfig::new(0.251).unwrap(), 201)).unwrap();
    assert_eq!(cli, lib);
    let text = String::from_utf8(cli).unwrap();
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(values.windows(2).all(|w| w[1] >= w[0]));

    let cli = ok(&["estimate", "--input", &data, "--method", "birge", "--t0", "0.3", "--k", "5"]);
    let mut lib = Vec::new();
    csvio::write_birge_curve(&mut lib, &birge_curve(&obs, &build_partition(0.3, 5).unwrap())).unwrap();
    assert_eq!(cli, lib);
    // default K from the optimal binwidth
    assert!(ok(&["estimate", "--input", &data, "--method", "birge"]).starts_with(b"cell_left,cell_right,value\n"));
}

#[test]
fn simulate_is_independent_of_threads_and_matches_the_library() {
    let one = ok(&["simulate", "--table", "5", "--scale", "0.002", "--seed", "8", "--threads", "1"]);
    let three = ok(&["simulate", "--table", "5", "--scale", "0.002", "--seed", "8", "--threads", "3"]);
    assert_eq!(one, three);
    let mut lib = Vec::new();
    csvio::write_table(&mut lib, &replicate_table(5, 0.002, 8).unwrap()).unwrap();
    assert_eq!(one, lib);
    assert!(one.starts_with(b"table,n,t0,estimator,scaled_mse,scaled_var,scaled_bias_sq,mc_se,asymptotic_ref\n"));
}

#[test]
fn asymptotics_and_phi_match_the_library() {
    let cli = ok(&["asymptotics", "--scheme", "sep", "--eps", "0.1", "--t0", "0.3,0.5"]);
    let s = ObservationScheme::Separated(0.1);
    let rows: Vec<_> = [0.3, 0.5].iter().map(|&t| constants_row(t, TargetDistribution::Uniform01, s).unwrap()).collect();
    let mut lib = Vec::new();
    csvio::write_constants(&mut lib, &rows, CHERNOFF_VAR_2Z).unwrap();
    assert_eq!(cli, lib);

    let cli = ok(&["phi", "--t", "0.7", "--grid", "200"]);
    let model = GridModel::exact(TargetDistribution::Uniform01, ObservationScheme::NonSeparated, 200).unwrap();
    let phi = PhiSolver::new(&model).unwrap().solve(0.7, 1000f64.powf(-0.2)).unwrap();
    let mut lib = Vec::new();
    csvio::write_phi(&mut lib, &phi).unwrap();
    assert_eq!(cli, lib);
}

#[test]
fn help_lists_defaults_and_ranges() {
    for sub in ["generate", "estimate", "simulate", "asymptotics", "phi"] {
        let help = String::from_utf8(ok(&[sub, "--help"])).unwrap();
        for line in help.lines().filter(|l| l.trim_start().starts_with("--") && !l.contains("--help") && !l.contains("--config")) {
            assert!(line.contains("default") || line.contains("required"), "{sub}: {line}");
        }
    }
}

#[test]
fn writes_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    ok(&["asymptotics", "--t0", "0.5", "--out", out.to_str().unwrap()]);
    assert!(std::fs::read_to_string(out).unwrap().starts_with("t0,target,scheme,"));
}
