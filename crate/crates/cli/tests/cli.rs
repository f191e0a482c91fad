use std::path::Path;
use std::process::Command;

use mcrnet::psi::load_dataset;

const SMALL: &[&str] = &[
    "--data.h=8",
    "--data.w=8",
    "--model.channels=8",
    "--model.heads=2",
    "--model.cr=1/2",
    "--meta.support=4",
    "--meta.query=3",
    "--meta.meta_batch=2",
    "--meta.max_iters=3",
    "--meta.val_every=1",
    "--meta.val_tasks=1",
];

fn run(args: &[&str]) -> Result<String, mcrnet_cli::CliError> {
    let mut out = Vec::new();
    let argv = std::iter::once("mcrnet").chain(args.iter().copied());
    mcrnet_cli::run(argv, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn small(cmd: &[&str], extra: &[&str]) -> Vec<String> {
    cmd.iter().chain(SMALL).chain(extra).map(|s| s.to_string()).collect()
}

fn run_small(cmd: &[&str], extra: &[&str]) -> Result<String, mcrnet_cli::CliError> {
    let args = small(cmd, extra);
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// CSV content without `#` lines and without the trailing timing column.
fn strip_timing(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit_once(',').map_or(l, |(a, _)| a).to_string())
        .collect()
}

#[test]
fn generate_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.psid"), dir.path().join("b.psid"));
    run(&["generate", "--data.count=5", "--out", p(&a)]).unwrap();
    run(&["generate", "--data.count=5", "--out", p(&b)]).unwrap();
    let data = load_dataset(&a).unwrap();
    assert_eq!((data.h, data.w, data.quant.bits, data.samples.len()), (32, 32, 4, 5));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest = std::fs::read_to_string(dir.path().join("a.psid.manifest")).unwrap();
    assert!(manifest.starts_with("# mcrnet-cli "));
    assert!(manifest.contains("data.count=5\n"));
}

#[test]
fn generate_empty_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.psid");
    let csv = dir.path().join("e.csv");
    run(&["generate", "--data.count=0", "--out", p(&path), "--csv", p(&csv)]).unwrap();
    let data = load_dataset(&path).unwrap();
    assert_eq!((data.h, data.w, data.samples.len()), (32, 32, 0));
}

#[test]
fn meta_train_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small(&["meta-train", "--out-dir", p(&out)], &["--meta.max_iters=1"]).unwrap();
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let rows = strip_timing(&report);
    assert_eq!(rows.len(), 2, "{report}");
    assert_eq!(rows[0], "iter,meta_loss,val_loss");
    assert!(report.contains("# meta.inner_lr=0.001\n"));
    let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    for line in ["meta.meta_batch=2", "meta.support=4", "meta.outer_lr=0.0005"] {
        assert!(m.contains(line), "{m}");
    }
    assert!(out.join("weights.mcrw").exists());
}

#[test]
fn manifest_echoes_default_meta_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // Only the model and data sizes are shrunk; meta defaults stay.
    run(&[
        "meta-train", "--out-dir", p(&out), "--data.h=8", "--data.w=8", "--model.channels=8",
        "--model.heads=2", "--model.cr=1/2", "--meta.max_iters=0",
    ])
    .unwrap();
    let m = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    for line in ["meta.inner_lr=0.001", "meta.outer_lr=0.0005", "meta.meta_batch=8", "meta.support=100", "meta.query=64"] {
        assert!(m.lines().any(|l| l == line), "missing {line}");
    }
}

#[test]
fn meta_train_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_small(&["meta-train", "--out-dir", p(&a)], &["--meta.channel=awgn"]).unwrap();
    run_small(&["meta-train", "--out-dir", p(&b)], &["--meta.channel=awgn"]).unwrap();
    let read = |d: &Path| std::fs::read_to_string(d.join("report.csv")).unwrap();
    assert_eq!(strip_timing(&read(&a)), strip_timing(&read(&b)));
    assert_eq!(std::fs::read(a.join("weights.mcrw")).unwrap(), std::fs::read(b.join("weights.mcrw")).unwrap());
}

#[test]
fn joint_training_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("j");
    run_small(&["meta-train", "--joint", "--out-dir", p(&out)], &[]).unwrap();
    assert!(std::fs::read_to_string(out.join("manifest.txt")).unwrap().contains("# mode=joint"));
}

fn trained(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("run");
    run_small(&["meta-train", "--out-dir", p(&out)], &[]).unwrap();
    out
}

#[test]
fn eval_sweep_rows() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = trained(dir.path());
    let w = run_dir.join("weights.mcrw");
    let csv = dir.path().join("sweep.csv");
    run_small(&["eval-sweep", "--weights", p(&w), "--out", p(&csv)], &["--eval.samples=20"]).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "cr,snr_db,nmse,seed,wall_ms");
    assert_eq!(body.len(), 6);
    for row in &body[1..] {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f[0], "1/2");
        assert!(f[2].parse::<f64>().unwrap() >= 0.0);
    }

    // Same run through the manifest as config.
    let again = run(&["eval-sweep", "--config", p(&run_dir.join("manifest.txt")), "--weights", p(&w), "--samples=20"]);
    assert!(again.is_ok());

    let ideal = run_small(&["eval-sweep", "--weights", p(&w), "--ideal", "--snr-list", "0,10,20"], &["--eval.samples=20"]).unwrap();
    let nmses: Vec<String> = ideal
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().to_string())
        .collect();
    assert_eq!(nmses.len(), 3);
    assert!(nmses.iter().all(|n| n == &nmses[0]));
}

#[test]
fn eval_sweep_rejects_mismatched_weights() {
    let dir = tempfile::tempdir().unwrap();
    let w = trained(dir.path()).join("weights.mcrw");
    let err = run_small(&["eval-sweep", "--weights", p(&w), "--cr", "1/4"], &[]).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    let err = run_small(&["eval-sweep", "--weights", p(&w)], &["--model.channels=16"]).unwrap_err();
    assert!(err.to_string().contains("enc.conv0.weight"), "{err}");
}

#[test]
fn adapt_reports_and_zero_step_is_neutral() {
    let dir = tempfile::tempdir().unwrap();
    let w = trained(dir.path()).join("weights.mcrw");
    let a = run_small(&["adapt", "--weights", p(&w), "--task-seed", "4"], &[]).unwrap();
    let b = run_small(&["adapt", "--weights", p(&w), "--task-seed", "4"], &[]).unwrap();
    assert_eq!(a, b);
    assert!(a.contains("nmse_pre=") && a.contains("nmse_post=") && a.contains("improvement_pct="));
    let zero = run_small(&["adapt", "--weights", p(&w), "--task-seed", "4"], &["--meta.inner_lr=0"]).unwrap();
    assert!(zero.contains("improvement_pct=0\n"), "{zero}");
}

#[test]
fn benchmark_default_counts() {
    let text = run(&["benchmark", "--machine-readable", "--bench.runs=5", "--bench.warmup=1"]).unwrap();
    let get = |k: &str| {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{k}=")))
            .unwrap_or_else(|| panic!("{k} missing in {text}"))
            .to_string()
    };
    let decoder: usize = get("decoder_params").parse().unwrap();
    assert_eq!(decoder, 25_795);
    assert!(decoder < 91_157);
    assert!(get("encoder_params").parse::<usize>().unwrap() > decoder);
    assert_eq!(get("runs"), "5");
}

fn binary(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mcrnet")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(binary(&["generate", "--data.count=1", "--out", p(&dir.path().join("x.psid"))]).status.code(), Some(0));
    assert_eq!(binary(&["generate", "--model.bogus=1"]).status.code(), Some(2));
    assert_eq!(binary(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(binary(&["generate", "--data.bits=0"]).status.code(), Some(2));

    let junk = dir.path().join("junk.mcrw");
    std::fs::write(&junk, b"not weights").unwrap();
    assert_eq!(binary(&["benchmark", "--weights", p(&junk)]).status.code(), Some(4));
    assert_eq!(binary(&["benchmark", "--weights", p(&dir.path().join("missing"))]).status.code(), Some(4));

    let args = small(&["meta-train", "--out-dir", p(&dir.path().join("d"))], &["--meta.inner_lr=1e30"]);
    let out = binary(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("iteration 1"));
}

#[test]
fn help_lists_subcommands() {
    let text = run(&["--help"]).unwrap();
    for c in ["generate", "meta-train", "adapt", "eval-sweep", "benchmark"] {
        assert!(text.contains(c));
    }
}
