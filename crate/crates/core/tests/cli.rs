use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rician_tv::io::{load_image, save_image};
use rician_tv::phantom::phantom;
use rician_tv::solver::TRACE_HEADER;
use rician_tv::Image;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rician-tv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn noisy_input(dir: &Path) -> std::path::PathBuf {
    let clean = dir.join("clean.pgm");
    save_image(&phantom(32, 32, 5), &clean).unwrap();
    let noisy = dir.join("noisy.pgm");
    let out = run(&[
        "noise",
        "--input",
        p(&clean),
        "--output",
        p(&noisy),
        "--sigma",
        "15",
        "--seed",
        "3",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    noisy
}

#[test]
fn noise_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let clean = dir.path().join("clean.png");
    assert!(run(&[
        "phantom",
        "--output",
        p(&clean),
        "--rows",
        "64",
        "--cols",
        "48",
        "--seed",
        "2"
    ])
    .status
    .success());
    let (a, b) = (dir.path().join("a.pgm"), dir.path().join("b.pgm"));
    for target in [&a, &b] {
        let out = run(&[
            "noise",
            "--input",
            p(&clean),
            "--output",
            p(target),
            "--sigma",
            "12",
            "--seed",
            "9",
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.pgm");
    run(&[
        "noise",
        "--input",
        p(&clean),
        "--output",
        p(&c),
        "--sigma",
        "12",
        "--seed",
        "10",
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn bad_flags_fail_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = noisy_input(dir.path());
    let output = dir.path().join("out.pgm");
    let trace = dir.path().join("trace.csv");
    let base = [
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--trace",
        p(&trace),
    ];
    let cases: &[&[&str]] = &[
        &["--sigma", "0", "--lambda", "10"],
        &["--sigma", "-3", "--lambda", "10"],
        &["--sigma", "15", "--lambda", "10", "--p", "2"],
        &["--sigma", "15", "--lambda", "10", "--p", "0.5"],
        &["--sigma", "15", "--lambda", "10", "--c", "0"],
        &["--sigma", "15", "--lambda", "10", "--c", "-1"],
        &["--sigma", "15", "--lambda", "10", "--gamma", "0.1"],
        &["--sigma", "15"],
        &["--sigma", "15", "--gamma", "0"],
    ];
    for extra in cases {
        let args: Vec<&str> = base.iter().chain(extra.iter()).copied().collect();
        let out = run(&args);
        assert!(!out.status.success(), "accepted {extra:?}");
        assert!(!out.stderr.is_empty());
        assert!(
            !output.exists() && !trace.exists(),
            "partial output for {extra:?}"
        );
    }
    let out = run(&[
        "noise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--sigma",
        "0",
    ]);
    assert!(!out.status.success() && !output.exists());
    let missing = dir.path().join("missing.pgm");
    let out = run(&["metrics", "--input", p(&missing), "--reference", p(&input)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pgm"));
}

#[test]
fn constant_below_threshold_denoises_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.pgm");
    // μ = 12, σ = 10: μ² ≤ 2σ²
    save_image(&Image::filled(16, 16, 12.0), &input).unwrap();
    let output = dir.path().join("u.pgm");
    let out = run(&[
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--sigma",
        "10",
        "--lambda",
        "5",
        "--c",
        "100",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(load_image(&output).unwrap(), Image::zeros(16, 16));
}

#[test]
fn metrics_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let input = noisy_input(dir.path());
    let out = run(&[
        "metrics",
        "--input",
        p(&input),
        "--reference",
        p(&input),
        "--json",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("PSNR=inf SSIM=1"));
    let record: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert!(record["psnr"].is_null());
    assert_eq!(record["ssim"], 1.0);
}

#[test]
fn denoise_writes_trace_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = noisy_input(dir.path());
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let output = dir.path().join(format!("u_{tag}.png"));
        let trace = dir.path().join(format!("t_{tag}.csv"));
        let out = run(&[
            "denoise",
            "--input",
            p(&input),
            "--output",
            p(&output),
            "--sigma",
            "15",
            "--gamma",
            "0.05",
            "--c",
            "10",
            "--max-outer",
            "20",
            "--trace",
            p(&trace),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        outputs.push((
            fs::read(&output).unwrap(),
            fs::read_to_string(&trace).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
    let trace = &outputs[0].1;
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some(TRACE_HEADER));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(!rows.is_empty() && rows.len() <= 20);
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 7);
        assert_eq!(row[0].parse::<usize>().unwrap(), k + 1);
        let total: f64 = row[4].parse().unwrap();
        assert!(total.is_finite());
    }
    // --gamma 0.05 is --lambda 20
    let output = dir.path().join("u_l.png");
    run(&[
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--sigma",
        "15",
        "--lambda",
        "20",
        "--c",
        "10",
        "--max-outer",
        "20",
    ]);
    assert_eq!(fs::read(&output).unwrap(), outputs[0].0);
}

#[test]
fn denoise_reports_metrics_with_reference() {
    let dir = tempfile::tempdir().unwrap();
    let input = noisy_input(dir.path());
    let output = dir.path().join("u.pgm");
    let out = run(&[
        "denoise",
        "--input",
        p(&input),
        "--output",
        p(&output),
        "--sigma",
        "15",
        "--lambda",
        "20",
        "--c",
        "30",
        "--reference",
        p(&dir.path().join("clean.pgm")),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.starts_with("PSNR=") && text.contains(" SSIM="),
        "{text}"
    );
}

#[test]
fn sweep_writes_outputs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let input = noisy_input(dir.path());
    let outdir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        "--input",
        p(&input),
        "--output",
        p(&outdir),
        "--sigma",
        "15",
        "--lambda",
        "20",
        "--c",
        "30",
        "--ps",
        "1.5,1",
        "--max-outer",
        "10",
        "--reference",
        p(&dir.path().join("clean.pgm")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for name in ["u_p1.5.pgm", "u_p1.pgm", "trace_p1.5.csv", "trace_p1.csv"] {
        assert!(outdir.join(name).exists(), "{name}");
    }
    let summary = fs::read_to_string(outdir.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "p,outer_iters,converged,energy,psnr,ssim");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1.5,") && lines[2].starts_with("1,"));

    let rejected = dir.path().join("rejected");
    let out = run(&[
        "sweep",
        "--input",
        p(&input),
        "--output",
        p(&rejected),
        "--sigma",
        "15",
        "--lambda",
        "20",
        "--ps",
        "1.5,2.5",
    ]);
    assert!(!out.status.success() && !rejected.exists());
}
