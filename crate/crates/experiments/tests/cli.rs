use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lppg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lppg")).args(args).output().expect("binary runs")
}

const SMALL: &str = r#"
dims = [[15]]
ranks = [1, 2]
sampling_ratios = [0.6, 1.0]
trials = 2
[solver]
max_iter = 60
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = lppg(&["phase-transition", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["results.csv", "summary.json", "curves/phase_transition_lppg.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(!a.join("results.partial.csv").exists());
    let text = fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);
    assert!(text.starts_with("experiment,variant,dims,rank,sampling_ratio,"));

    let c = tmp.path().join("c");
    let o = lppg(&["phase-transition", "--config", &cfg, "--seed", "8", "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("results.csv")).unwrap(), fs::read(c.join("results.csv")).unwrap());
}

#[test]
fn single_trial_summary_mean_is_the_trial_nmse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dims = [[17]]\nranks = [2]\nsampling_ratios = [1.0]\ntrials = 1\nnoise_level = 0.3\nbeta_multipliers = [10.0]\n");
    let out = tmp.path().join("o");
    let o = lppg(&["size-sweep", "--config", &cfg, "--variant", "lppg", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let group = &summary["groups"][0];
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let nmse: f64 = row[11].parse().unwrap();
    let mean = group["mean_nmse"].as_f64().unwrap();
    assert!((mean - nmse).abs() <= 1e-9 * nmse);
    assert_eq!(group["trials"], 1);
    let terms = &summary["terminations"];
    let total: u64 = ["tolerance", "max_iter", "rel_change"].iter().map(|k| terms[k].as_u64().unwrap()).sum();
    assert_eq!(total, 1);
    assert!(out.join("curves/size_lppg.csv").exists());
    assert!(out.join("timings.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "trials = 0\n");
    let o = lppg(&["noise-table", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let o = lppg(&["noise-table", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unwritable_output_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "dims = [[9]]\nranks = [1]\nsampling_ratios = [1.0]\ntrials = 1\n");
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = lppg(&["phase-transition", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn print_config_shows_quick_preset() {
    let o = lppg(&["convergence", "--quick", "--print-config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("trials = 10"));
    assert!(text.contains("kind = \"convergence\""));
}

#[test]
fn solve_recovers_a_sampled_signal_from_csv() {
    use lppg_core::model::{generate_signal, nmse, sample_uniform};
    let tmp = tempfile::tempdir().unwrap();
    let (x, _) = generate_signal(&[31], 2, false, 3).unwrap();
    let mask = sample_uniform(31, 0.7, 4).unwrap();
    let mut text = String::from("# dims: 31\nindex,re,im\n");
    for &i in mask.indices() {
        text.push_str(&format!("{i},{:e},{:e}\n", x[i].re, x[i].im));
    }
    let input = tmp.path().join("obs.csv");
    fs::write(&input, text).unwrap();
    let out = tmp.path().join("solved");
    let o = lppg(&["solve", input.to_str().unwrap(), "--rank", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("estimate.csv")).unwrap();
    let est: Vec<num_complex::Complex64> = rdr
        .deserialize::<(usize, f64, f64)>()
        .map(|r| {
            let (_, re, im) = r.unwrap();
            num_complex::Complex64::new(re, im)
        })
        .collect();
    assert!(nmse(&est, &x).unwrap() < 1e-3);
    assert!(out.join("curves/trace.csv").exists());

    let o = lppg(&["solve", input.to_str().unwrap(), "--rank", "40"]);
    assert_eq!(o.status.code(), Some(1));
}
