//! End-to-end checks of the command-line surface: exit codes, output
//! shapes, and rerun purity.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lamx"))
}

fn work_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lamx_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

const SMALL_BIAS: &str = "\
draws = 500
c_grid = 21
r_grid = 5
r_starts = 1
r_iters = 10
r_tol = 1e-4
seed = 11
";

#[test]
fn config_violations_exit_2_and_list_everything() {
    let dir = work_dir("badcfg");
    let cfg = dir.join("bad.conf");
    std::fs::write(
        &cfg,
        "[model]\nd = 2\ng = affine(0.6*x1, 0.6*x2)\nf = wedge(1)\n",
    )
    .unwrap();
    let out = run(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("sum to 1"), "{msg}");
    assert!(msg.contains("wedge"), "{msg}");
}

#[test]
fn missing_section_exits_2() {
    let dir = work_dir("nosec");
    let cfg = dir.join("bare.conf");
    std::fs::write(&cfg, "[model]\nd = 2\ng = max(x1, x2)\n").unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[experiment]"));
}

#[test]
fn estimate_runs_and_reruns_byte_identical() {
    let dir = work_dir("estimate");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        format!("[model]\nd = 2\ng = max(x1, x2)\nf = identity\n\n[bias]\n{SMALL_BIAS}"),
    )
    .unwrap();
    let data = dir.join("obs.csv");
    let mut rows = String::from("x1,x2\n");
    // Deterministic synthetic observations.
    for i in 0..40 {
        let t = i as f64 * 0.37;
        rows.push_str(&format!("{},{}\n", (t).sin() * 0.8 + 0.1, (t * 1.3).cos()));
    }
    std::fs::write(&data, rows).unwrap();
    let out1 = dir.join("report1.csv");
    let out2 = dir.join("report2.csv");
    for out in [&out1, &out2] {
        let res = run(&[
            "estimate",
            "--config",
            cfg.to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let a = std::fs::read(&out1).unwrap();
    let b = std::fs::read(&out2).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("key,value\n"));
    for key in ["theta_hat", "c_hat", "s_hat", "plug_in", "config_hash"] {
        assert!(text.contains(&format!("\n{key},")), "missing {key} in:\n{text}");
    }
}

#[test]
fn estimate_rejects_dimension_mismatch_with_exit_3() {
    let dir = work_dir("dimmismatch");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "[model]\nd = 3\ng = max(x1, x2, x3)\n").unwrap();
    let data = dir.join("obs.csv");
    std::fs::write(&data, "x1,x2\n1,2\n3,4\n5,6\n").unwrap();
    let out = run(&[
        "estimate",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("columns"));
}

#[test]
fn bias_adjust_emits_surface_and_summary() {
    let dir = work_dir("biasadj");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        format!(
            "[model]\nd = 2\ng = max(x1, x2)\n\n[bias]\n{SMALL_BIAS}\n\
             [moments]\nbeta_hat = 0.1, 0.0\nsigma_hat = 1, 0.2; 0.2, 1.5\nn = 300\n"
        ),
    )
    .unwrap();
    let out_path = dir.join("surface.csv");
    let res = run(&[
        "bias-adjust",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("# config_hash="));
    assert!(text.contains("c,b_hat,in_E_hat\n"));
    assert!(text.contains("c_hat,eta,L,M1,seed"));
    // 21 surface rows plus headers and the summary pair.
    let surface_rows = text
        .lines()
        .filter(|l| !l.starts_with('#') && l.split(',').count() == 3 && !l.starts_with('c'))
        .count();
    assert_eq!(surface_rows, 21);
}

#[test]
fn risk_bound_emits_curve_and_summary() {
    let dir = work_dir("riskbound");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        "[model]\nd = 2\ng = max(x1, x2)\n\n\
         [bound]\nbeta0 = 0, 0\nsigma = 1, 0; 0, 1\nmc_size = 4000\nc_grid = 41\n\
         r_grid = 5\nr_starts = 1\nr_iters = 10\nseed = 3\n",
    )
    .unwrap();
    let out_path = dir.join("bound.csv");
    let res = run(&[
        "risk-bound",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("c,b\n"));
    assert!(text.contains("c_star,value,s,mc_size,seed"));
}

#[test]
fn verify_quick_passes_with_exit_0() {
    let res = run(&["verify", "--level", "quick", "--seed", "20260809"]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert_eq!(res.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("all"), "{stdout}");
    assert!(stdout.contains("PASS"), "{stdout}");
}

#[test]
fn simulate_writes_plot_data_too() {
    let dir = work_dir("simplot");
    let cfg = dir.join("run.conf");
    std::fs::write(
        &cfg,
        "[experiment]\ndesign = max_of_means\nreps = 30\ndelta0 = 0, 5\nmaster_seed = 2\n\n\
         [bias]\ndraws = 150\nc_grid = 11\nr_grid = 5\nr_starts = 1\nr_iters = 8\nr_tol = 1e-4\n",
    )
    .unwrap();
    let out_path = dir.join("risk.csv");
    let plot_path = dir.join("plot.csv");
    let res = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
        "--plot-data",
        plot_path.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let risk = std::fs::read_to_string(&out_path).unwrap();
    assert!(risk.contains(
        "delta0,estimator,scaled_mse,scaled_mse_se,scaled_bias,scaled_bias_se,reps_used,failures"
    ));
    // 2 grid points x 4 estimators.
    assert_eq!(risk.lines().filter(|l| l.contains(",minimax,")).count(), 2);
    let plot = std::fs::read_to_string(&plot_path).unwrap();
    assert!(plot.contains("delta0,estimator,metric,value"));
    assert!(plot.contains(",scaled_mse,"));
}
