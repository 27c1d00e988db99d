mod common;

use std::path::Path;

use common::{code, path_str, stdout, synthmix};
use synthmix::bounds::{domain_shift_gap_bound, mixed_gap_bound, BoundParams, KernelBoundInputs};
use synthmix::harness::emit::{contour_csv, sweep_csv, to_json};
use synthmix::harness::{run_contour, run_ucurve, ContourKind, ContourSpec, SweepResult, UcurveConfig};
use synthmix::spectral::{power_law_field, ImageMatrix, SigmaSource};
use synthmix_cli::{estimate_report, plan_report, TraditionalArgs};

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn plan_json_equals_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("plan.json");
    let args = [
        "--out", path_str(&out), "--format", "json", "plan", "--n", "15", "--r", "2", "--d", "1.0", "--sigma2", "0.1",
        "--compare-traditional", "--ipm", "0.05",
    ];
    let res = synthmix(&args);
    assert_eq!(code(&res), 0);
    let inputs = KernelBoundInputs::new(15, 2.0, 0.1, 1.0, 0.0).unwrap();
    let trad = TraditionalArgs { c: 1.0, m_avail: None, ipm: 0.05 };
    let lib = plan_report(&inputs, false, Some(trad)).unwrap();
    assert_eq!(read(&out), to_json(&lib).unwrap());
    let text = stdout(&res);
    for label in ["numeric", "closed form", "traditional"] {
        assert!(text.contains(label), "{text}");
    }
    assert!(text.contains(&format!("M* = {}", lib.numeric.m_star_rounded)));
}

#[test]
fn bound_values_equal_library_calls() {
    let p = BoundParams::default();
    let res = synthmix(&["bound", "--theorem", "3.1", "--lambda", "0.3", "--n", "1000", "--w2", "2", "--r-star", "0.1"]);
    assert_eq!(code(&res), 0);
    let want = mixed_gap_bound(&p, 0.3, 1000, 2.0, 0.1).unwrap();
    assert!(stdout(&res).contains(&format!("{want:.10e}")), "{}", stdout(&res));

    let res = synthmix(&[
        "bound", "--theorem", "shift-gap", "--lambda", "0.4", "--n", "50",
        "--w2-target-synth", "0.5", "--w2-target-source", "2",
    ]);
    assert_eq!(code(&res), 0);
    let want = domain_shift_gap_bound(&p, 0.4, 50, 0.5, 2.0, 0.0).unwrap();
    assert!(stdout(&res).contains(&format!("{want:.10e}")));
}

#[test]
fn sweep_writes_library_contour() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let res = synthmix(&["--out", path_str(&out), "sweep", "--kind", "in_domain"]);
    assert_eq!(code(&res), 0);
    let lib = run_contour(&ContourSpec::new(ContourKind::InDomain), 1).unwrap();
    let csv = read(&out);
    assert!(csv.starts_with("ratio,discrepancy,bound\n"));
    assert_eq!(csv, contour_csv(&lib));
    assert_eq!(csv.lines().count(), 1 + 81 * 11);
}

fn save_png(img: &ImageMatrix, path: &Path) {
    let (lo, hi) = img.pixels().iter().fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    let bytes = img.pixels().iter().map(|x| ((x - lo) / (hi - lo) * 255.0).round() as u8).collect();
    image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes).unwrap().save(path).unwrap();
}

fn save_csv(img: &ImageMatrix, path: &Path) {
    let text: String = (0..img.height())
        .map(|i| (0..img.width()).map(|j| img.get(i, j).to_string()).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    std::fs::write(path, text).unwrap();
}

#[test]
fn estimate_matches_scripted_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let real = dir.path().join("real");
    let synth = dir.path().join("synth");
    std::fs::create_dir_all(&real).unwrap();
    std::fs::create_dir_all(&synth).unwrap();
    for s in 0..3 {
        save_png(&power_law_field(64, 64, 1.0, s).unwrap(), &real.join(format!("r{s}.png")));
        save_csv(&power_law_field(64, 64, 1.4, 100 + s).unwrap(), &synth.join(format!("s{s}.csv")));
    }
    let out = dir.path().join("e.json");
    let res = synthmix(&[
        "--out", path_str(&out), "--format", "json", "estimate", "--real-dir", path_str(&real), "--synth-dir",
        path_str(&synth), "--sigma2", "0.5",
    ]);
    assert_eq!(code(&res), 0, "{}", common::stderr(&res));
    let lib = estimate_report(&real, &synth, None, SigmaSource::Given(0.5), None).unwrap();
    assert_eq!(lib.n, 3);
    assert_eq!(read(&out), to_json(&lib).unwrap());
    assert!(stdout(&res).contains(&format!("{:.10e}", lib.d)));
}

#[test]
fn flags_override_config_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("h1_mismatch.cfg");
    std::fs::write(
        &cfg,
        "[mercer]\nr = 2\n\n[experiment]\ns = 0.8\ns_prime = 1.5\nt_f = 100\nt_g = 10\nn = 20\nsigma2 = 0.1\nseeds = 7, 8\n\n[grid]\nlambda_count = 8\n",
    )
    .unwrap();
    let out = dir.path().join("u.json");
    let res = synthmix(&[
        "--config", path_str(&cfg), "--seeds", "42,43,44", "--out", path_str(&out), "--format", "json", "simulate",
        "--n", "15",
    ]);
    assert_eq!(code(&res), 0, "{}", common::stderr(&res));
    let got: SweepResult = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!(got.seeds, vec![42, 43, 44]);
    assert_eq!((got.meta.n, got.meta.lambda_count), (15, 8));
    let want = UcurveConfig { n: 15, lambda_count: 8, ..UcurveConfig::default() };
    assert_eq!(got, run_ucurve(&want, 1).unwrap());

    // without the flag the config seeds are used
    let res = synthmix(&["--config", path_str(&cfg), "--out", path_str(&out), "--format", "json", "simulate"]);
    assert_eq!(code(&res), 0);
    let got: SweepResult = serde_json::from_str(&read(&out)).unwrap();
    assert_eq!((got.seeds.clone(), got.meta.n), (vec![7, 8], 20));
}

#[test]
fn csv_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("j{jobs}.csv"));
        let res = synthmix(&["--seeds", "42,43,44", "--jobs", jobs, "--out", path_str(&out), "simulate"]);
        assert_eq!(code(&res), 0);
        outputs.push(std::fs::read(&out).unwrap());
    }
    let env_out = dir.path().join("env.csv");
    let res = std::process::Command::new(env!("CARGO_BIN_EXE_synthmix"))
        .args(["--seeds", "42,43,44", "--out", path_str(&env_out), "simulate"])
        .env("SYNTHMIX_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(code(&res), 0);
    outputs.push(std::fs::read(&env_out).unwrap());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
    let lib = run_ucurve(&UcurveConfig::default(), 2).unwrap();
    assert_eq!(outputs[0], sweep_csv(&lib).into_bytes());
}
