use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lgm::distributions::sample_lgm;
use lgm::ingestion::write_matrix;
use lgm::report::EvalReport;
use lgm::LgmParams;

fn lgm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgm")).args(args).output().unwrap()
}

fn write_samples(path: &Path, params: &LgmParams, n: usize, seed: u64) {
    write_matrix(path, &[sample_lgm(n, params, seed).unwrap()]).unwrap();
}

fn report(out: &Output) -> EvalReport {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn fit_on_pure_gaussian_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("g.csv");
    write_samples(&input, &LgmParams::from_parts(0.0, 0.0, 1.0, 1.0, 4.0).unwrap(), 20_000, 1);
    let r = report(&lgm(&["fit", input.to_str().unwrap()]));
    assert_eq!(r.sample_count, 20_000);
    assert!((r.gaussian.mu() - 1.0).abs() < 0.05);
    assert!((r.gaussian.variance() - 4.0).abs() < 0.15);
    assert!((r.kld.lgm.d_kl - r.kld.gaussian.d_kl).abs() < 0.005);
    assert!(r.lrt.vs_gaussian.p_value > 1e-3);
}

#[test]
fn too_few_samples_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("few.csv");
    fs::write(&input, "1\n2\n3\n4\n5\n6\n7\n8\n9\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = lgm(&["fit", input.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    assert!(!out_dir.exists());
}

#[test]
fn fit_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    write_samples(&input, &LgmParams::from_parts(0.6, 0.0, 1.0, 0.0, 9.0).unwrap(), 5_000, 2);
    let args = ["fit", input.to_str().unwrap(), "--seed", "13", "--bins", "64"];
    let a = lgm(&args);
    let b = lgm(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(report(&a).bins, 64);
}

#[test]
fn batch_builds_heatmaps_from_all_trials() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::new();
    let mut k = 0;
    for subject in ["s1", "s2"] {
        for activity in ["rest", "grip"] {
            for trial in 1..=3 {
                k += 1;
                let l1 = if activity == "rest" { 0.8 } else { 0.3 };
                let p = LgmParams::from_parts(l1, 0.0, 1.0, 0.0, 9.0).unwrap();
                // Channel 1 is the loud one and must be selected.
                let loud = sample_lgm(3_000, &p, k).unwrap();
                let quiet: Vec<f64> = loud.iter().map(|v| 0.1 * v).collect();
                let name = format!("{subject}_{activity}_{trial}.csv");
                write_matrix(&dir.path().join(&name), &[quiet, loud]).unwrap();
                manifest.push_str(&format!(
                    "[[trial]]\npath = \"{name}\"\nsubject = \"{subject}\"\nactivity = \"{activity}\"\ntrial = {trial}\nsample_rate = 1000.0\nchannel_count = 2\n\n"
                ));
            }
        }
    }
    let mpath = dir.path().join("manifest.toml");
    fs::write(&mpath, manifest).unwrap();
    let out = dir.path().join("out");
    let run = lgm(&["batch", mpath.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));

    assert_eq!(fs::read_dir(out.join("reports")).unwrap().count(), 12);
    let reports: Vec<EvalReport> = fs::read_to_string(out.join("reports.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(reports.len(), 12);
    assert!(reports.iter().all(|r| r.meta.channel == 1));

    let heat = fs::read_to_string(out.join("heatmap_kld_lgm.csv")).unwrap();
    let lines: Vec<&str> = heat.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0], "subject,rest,grip");
    for (row, subject) in lines[1..].iter().zip(["s1", "s2"]) {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], subject);
        for (cell, activity) in cells[1..].iter().zip(["rest", "grip"]) {
            let trials: Vec<f64> = reports
                .iter()
                .filter(|r| r.meta.subject.as_deref() == Some(subject) && r.meta.activity.as_deref() == Some(activity))
                .map(|r| r.kld.lgm.d_kl)
                .collect();
            assert_eq!(trials.len(), 3);
            let mean = trials.iter().sum::<f64>() / 3.0;
            let got: f64 = cell.parse().unwrap();
            assert!((got - mean).abs() <= 1e-12 * mean.abs(), "{subject}/{activity}: {got} vs {mean}");
        }
    }
    for name in ["heatmap_lambda1.csv", "heatmap_counts.csv", "avg_kld_by_subject.csv", "avg_kld_by_activity.csv", "failures.csv"] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn synth_then_fit_recovers_weight() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = lgm(&[
        "synth", "--lambda1", "0.95", "--sigma1", "1", "--sigma2-sq", "16", "--mu2", "-0.5", "--n", "20000", "--seed", "4",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let echoed: LgmParams = serde_json::from_slice(&run.stdout).unwrap();
    assert_eq!(echoed.lambda1(), 0.95);
    let r = report(&lgm(&["fit", out.to_str().unwrap()]));
    assert!(r.lgm.lambda1() >= 0.9, "{}", r.lgm.lambda1());
}

#[test]
fn synth_rejects_empty_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let run = lgm(&["synth", "--lambda1", "0.5", "--sigma1", "1", "--sigma2-sq", "1", "--n", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn eval_reproduces_fit_and_penalises_wrong_params() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("m.csv");
    write_samples(&input, &LgmParams::from_parts(0.5, 0.0, 1.0, 0.0, 9.0).unwrap(), 10_000, 5);
    let fit_dir = dir.path().join("fit");
    let fit = lgm(&["fit", input.to_str().unwrap(), "--out-dir", fit_dir.to_str().unwrap(), "--curves"]);
    assert!(fit.status.success());
    assert!(fit.stdout.is_empty());
    assert!(fit_dir.join("curves.csv").exists() && fit_dir.join("qq.csv").exists());
    let report_path = fit_dir.join("report.json");
    let fitted: EvalReport = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();

    let again = report(&lgm(&["eval", input.to_str().unwrap(), report_path.to_str().unwrap()]));
    assert_eq!(again.lgm, fitted.lgm);
    assert_eq!(again.kld.lgm, fitted.kld.lgm);
    assert_eq!(again.gof.lgm, fitted.gof.lgm);
    assert_eq!(again.lrt, fitted.lrt);
    assert!(again.em.is_none());

    let p = fitted.lgm;
    let wrong = LgmParams::from_parts(p.lambda1(), p.laplacian().mu(), 10.0 * p.laplacian().sigma(), p.gaussian().mu(), 100.0 * p.gaussian().variance()).unwrap();
    let wrong_path = dir.path().join("wrong.json");
    fs::write(&wrong_path, serde_json::to_string(&wrong).unwrap()).unwrap();
    let worse = report(&lgm(&["eval", input.to_str().unwrap(), wrong_path.to_str().unwrap()]));
    assert!(worse.kld.lgm.d_kl > fitted.kld.lgm.d_kl);

    let missing = lgm(&["eval", input.to_str().unwrap(), dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}
