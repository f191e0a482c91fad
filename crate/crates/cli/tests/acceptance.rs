//! End-to-end acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line per criterion and fails if any of them failed.
//!
//! The few-shot and compression-ratio criteria train real models and take
//! tens of minutes on one core; run with `--nocapture` to see progress.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use mcrnet::meta::toy::Quadratic;
use mcrnet::meta::*;
use mcrnet::model::{dwcg, save_weights, DwcgSlots, Model, ModelConfig};
use mcrnet::psi::{batch_tensor, generate_psi, nmse, sample_task, ChannelConfig, TaskSpec};
use mcrnet::seed::derive;
use mcrnet::tensor::gradcheck::{grad_check, grad_check_coords, Coords, EPSILON};
use mcrnet::tensor::{Graph, ParameterSet, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

// ---------- helpers ----------

fn randn(r: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape.to_vec(), |_| scale * r.sample::<f64, _>(StandardNormal))
}

fn cli(args: &[&str]) -> String {
    let mut out = Vec::new();
    let argv = std::iter::once("mcrnet").chain(args.iter().copied());
    mcrnet_cli::run(argv, &mut out).unwrap_or_else(|e| panic!("mcrnet {args:?}: {e}"));
    String::from_utf8(out).unwrap()
}

/// CSV rows below the header as string fields.
fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

/// CSV text without the named timing columns.
fn without_columns(path: &Path, drop: &[&str]) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut keep: Option<Vec<bool>> = None;
    let mut out = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            out.push_str(line);
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            let mask = keep.get_or_insert_with(|| fields.iter().map(|f| !drop.contains(f)).collect());
            let kept: Vec<&str> = fields.iter().zip(mask.iter()).filter(|(_, &k)| k).map(|(f, _)| *f).collect();
            out.push_str(&kept.join(","));
        }
        out.push('\n');
    }
    out
}

// ---------- 1: gradient oracle ----------

type Build = fn(&mut Graph<f64>, &[Var]) -> mcrnet::Result<Var>;

/// One random instance of an op: input tensors and the graph using them.
fn op_instance(name: &str, r: &mut ChaCha8Rng) -> (Vec<Tensor<f64>>, Build) {
    let mut size = |lo: usize, hi: usize| r.random_range(lo..=hi);
    let (b, l, ci, co) = (size(1, 3), size(3, 12), size(1, 6), size(1, 6));
    let c = size(1, 3) * size(1, 4);
    let shapes: Vec<Vec<usize>> = match name {
        "dense" => vec![vec![l, ci], vec![ci, co], vec![co]],
        "conv1d" | "conv_transpose1d" => vec![vec![b, l, ci], vec![3, ci, co], vec![co]],
        "dwconv1d" => vec![vec![b, l, ci], vec![3, ci], vec![ci]],
        "swish" => vec![vec![l, ci], vec![1]],
        "layer_norm" => vec![vec![b, l, ci + 1], vec![ci + 1], vec![ci + 1]],
        "mhsa" => vec![vec![l, c], vec![c, c], vec![c, c], vec![c, c], vec![c, c]],
        "add" | "mul" | "mse_loss" => vec![vec![l, ci], vec![l, ci]],
        "dwcg" => vec![vec![l, ci], vec![3, ci], vec![ci], vec![1, ci], vec![ci], vec![1]],
        _ => vec![vec![l, ci]],
    };
    let inputs = shapes
        .iter()
        .map(|s| {
            let scale = if name == "mhsa" && s.len() == 2 && s[0] == s[1] && s != &shapes[0] { 1.0 / (c as f64).sqrt() } else { 1.0 };
            randn(r, s, scale)
        })
        .collect();
    let build: Build = match name {
        "dense" => |g, v| g.dense(v[0], v[1], v[2]),
        "conv1d" => |g, v| g.conv1d(v[0], v[1], v[2], 2, 1),
        "conv_transpose1d" => |g, v| g.conv_transpose1d(v[0], v[1], v[2], 2, 1, 1),
        "dwconv1d" => |g, v| g.dwconv1d(v[0], v[1], v[2]),
        "sigmoid" => |g, v| Ok(g.sigmoid(v[0])),
        "swish" => |g, v| g.swish(v[0], v[1]),
        "gelu" => |g, v| Ok(g.gelu(v[0])),
        "relu" => |g, v| Ok(g.relu(v[0])),
        "softmax" => |g, v| Ok(g.softmax(v[0])),
        "layer_norm" => |g, v| g.layer_norm(v[0], v[1], v[2]),
        "mhsa" => |g, v| {
            let c = g.value(v[1]).shape()[0];
            let heads = (1..c).rev().find(|h| c % h == 0).unwrap_or(1);
            g.mhsa(v[0], v[1], v[2], v[3], v[4], heads)
        },
        "add" => |g, v| g.add(v[0], v[1]),
        "mul" => |g, v| g.mul(v[0], v[1]),
        "sum" => |g, v| Ok(g.sum(v[0])),
        "mse_loss" => |g, v| g.mse_loss(v[0], v[1]),
        "dwcg" => |g, v| dwcg(g, v[0], v, DwcgSlots { gate: (1, 2), value: (3, 4), swish_beta: 5 }),
        other => panic!("unknown op {other}"),
    };
    (inputs, build)
}

const OPS: [&str; 16] = [
    "dense",
    "conv1d",
    "conv_transpose1d",
    "dwconv1d",
    "sigmoid",
    "swish",
    "gelu",
    "relu",
    "softmax",
    "layer_norm",
    "mhsa",
    "add",
    "mul",
    "sum",
    "mse_loss",
    "dwcg",
];

fn gradient_oracle() -> Verdict {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_op, mut worst_err) = ("", 0.0f64);
    for op in OPS {
        for _ in 0..10 {
            let (inputs, build) = op_instance(op, &mut r);
            let rep = grad_check(&inputs, EPSILON, build).unwrap();
            if rep.max_rel_err >= worst_err {
                (worst_op, worst_err) = (op, rep.max_rel_err);
            }
        }
    }

    // Random parameter point: at init the gated decoder's gradients sit at
    // round-off level.
    let config = ModelConfig { hw: 64, channels: 8, cr_stages: 2, heads: 2, ..Default::default() };
    let model: Model<f64> = Model::build(config, 21).unwrap();
    let arch = model.architecture().clone();
    let mut r = ChaCha8Rng::seed_from_u64(22);
    let x = Tensor::from_fn(vec![64, 1], |_| r.random_range(0.0..1.0));
    let inputs: Vec<Tensor<f64>> = model.params().values().map(|v| randn(&mut r, v.shape(), 0.5)).collect();
    let loss = |g: &mut Graph<f64>, p: &[Var]| {
        let xv = g.constant(x.clone());
        let z = arch.encode_graph(g, p, xv)?;
        let y = arch.decode_graph(g, p, z)?;
        g.mse_loss(y, xv)
    };
    let sampled = grad_check_coords(&inputs, EPSILON, &Coords::Sample { fraction: 0.01, seed: 5 }, loss).unwrap();

    // Diagnostic over every coordinate whose gradient is well above the
    // finite-difference noise floor.
    let mut resolvable = (0usize, 0.0f64);
    for (i, t) in inputs.iter().enumerate() {
        for j in 0..t.numel() {
            let one = grad_check_coords(&inputs, EPSILON, &Coords::Explicit(vec![(i, j)]), loss).unwrap();
            if one.analytic.abs() > 1e-6 {
                resolvable = (resolvable.0 + 1, resolvable.1.max(one.max_rel_err));
            }
        }
    }

    verdict(
        worst_err < 1e-5 && sampled.max_rel_err < 1e-4,
        format!(
            "{} ops x 10 instances, worst {worst_op} rel err {worst_err:.2e} (< 1e-5); end-to-end 1% sample ({} coords) rel err {:.2e} (< 1e-4); all {} coords with |grad| > 1e-6: {:.2e}",
            OPS.len(),
            sampled.checked,
            sampled.max_rel_err,
            resolvable.0,
            resolvable.1
        ),
    )
}

// ---------- 2: shape fidelity ----------

fn shape_fidelity() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for n in 1..=3 {
        let cfg = ModelConfig { hw: 1024, channels: 16, cr_stages: n, ..Default::default() };
        let model: Model = Model::build(cfg, 0).unwrap();
        let x = Tensor::from_fn(vec![1024, 1], |i| (i % 16) as f32 / 16.0);
        let z = model.encode(&x).unwrap();
        let want_latent = 1024 >> n;
        let mut g = Graph::<f32>::new();
        let p = g.bind_constants(model.params());
        let mut h = g.constant(z.values().clone());
        let mut lens = vec![g.value(h).shape()[0]];
        for i in 0..n {
            let w = p[model.params().slot(&format!("dec.convt{i}.weight")).unwrap()];
            let b = p[model.params().slot(&format!("dec.convt{i}.bias")).unwrap()];
            h = g.conv_transpose1d(h, w, b, 2, 1, 1).unwrap();
            lens.push(g.value(h).shape()[0]);
        }
        let want_lens: Vec<usize> = (0..=n).map(|i| want_latent << i).collect();
        let out = model.decode(&z).unwrap();
        let ok = z.len() == want_latent && lens == want_lens && out.shape() == [1024, 1];
        pass &= ok;
        lines.push(format!("CR 1/{}: latent {} stages {:?}", 1 << n, z.len(), lens));
    }
    verdict(pass, lines.join("; "))
}

// ---------- 3: parameter accounting ----------

fn closed_form(c: &ModelConfig) -> (usize, usize) {
    let (ch, n, b, m) = (c.channels, c.cr_stages, c.mhsa_blocks, c.dwcg_modules);
    let enc = 4 * ch + (n - 1) * (3 * ch * ch + ch) + b * (4 * ch * ch + 2 * ch) + ch + 1;
    let dec = 4 * ch + (n - 1) * (3 * ch * ch + ch) + m * (6 * ch + 1) + ch + 1;
    (enc, dec)
}

fn parameter_accounting() -> Verdict {
    let mut matched = 0;
    let mut shown = Vec::new();
    for (c, n, b, m) in [(16, 1, 1, 1), (16, 2, 2, 2), (32, 3, 3, 2), (32, 1, 2, 3), (64, 3, 3, 2), (64, 2, 1, 1), (8, 3, 0, 0), (48, 2, 4, 4), (24, 1, 3, 2)] {
        let cfg = ModelConfig { hw: 256, channels: c, cr_stages: n, mhsa_blocks: b, heads: 4, dwcg_modules: m };
        let model: Model = Model::build(cfg.clone(), 0).unwrap();
        let got = model.count_params();
        if (got.encoder, got.decoder) == closed_form(&cfg) {
            matched += 1;
        } else {
            shown.push(format!("mismatch at {cfg:?}: {got:?} vs {:?}", closed_form(&cfg)));
        }
    }
    let default: Model = Model::build(ModelConfig::default(), 0).unwrap();
    let d = default.count_params();
    let pass = matched == 9 && d.decoder == 25_795 && d.decoder < 91_157 && d.decoder < 197_121 && d.decoder < d.encoder;
    shown.push(format!("{matched}/9 configs match; default decoder {} encoder {}", d.decoder, d.encoder));
    verdict(pass, shown.join("; "))
}

// ---------- 4: MAML reductions ----------

struct OracleAdam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl OracleAdam {
    fn step(&mut self, params: &mut [Vec<f64>], grads: &[Vec<f64>], lr: f64) {
        self.t += 1;
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        for (k, g) in grads.iter().enumerate() {
            for i in 0..g.len() {
                self.m[k][i] = b1 * self.m[k][i] + (1.0 - b1) * g[i];
                self.v[k][i] = b2 * self.v[k][i] + (1.0 - b2) * g[i] * g[i];
                let mh = self.m[k][i] / (1.0 - b1.powi(self.t));
                let vh = self.v[k][i] / (1.0 - b2.powi(self.t));
                params[k][i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

fn maml_reductions() -> Verdict {
    let spec = TaskSpec { h: 4, w: 4, ..Default::default() };
    let cfg = ModelConfig { hw: 16, channels: 4, cr_stages: 1, heads: 2, mhsa_blocks: 1, dwcg_modules: 1 };
    let model: Model<f64> = Model::build(cfg, 3).unwrap();
    let meta = MetaConfig { inner_steps: 0, meta_batch: 1, val_tasks: 0, max_iters: 10, outer_lr: 1e-2, support: 4, query: 6, ..Default::default() };
    let out = meta_train(&model, &meta, &spec, 17).unwrap();

    let obj = ReconstructionObjective::new(model.architecture().clone(), ChannelConfig::ideal());
    let mut params = model.params().clone();
    let mut values: Vec<Vec<f64>> = params.values().map(|t| t.data().to_vec()).collect();
    let mut oracle = OracleAdam {
        m: values.iter().map(|v| vec![0.0; v.len()]).collect(),
        v: values.iter().map(|v| vec![0.0; v.len()]).collect(),
        t: 0,
    };
    let mut losses_equal = true;
    for iter in 1..=meta.max_iters {
        let task = sample_task(&spec, meta.support, meta.query, task_seed(17, iter, 0)).unwrap();
        let query: Tensor<f64> = batch_tensor(&task.query).unwrap();
        let (loss, grads) = obj.loss_and_grad(&params, &query, 0).unwrap();
        losses_equal &= loss.to_bits() == out.report.records[iter - 1].meta_loss.to_bits();
        oracle.step(&mut values, &grads.iter().map(|t| t.data().to_vec()).collect::<Vec<_>>(), meta.outer_lr);
        for (slot, v) in values.iter().enumerate() {
            params.get_mut(slot).value.data_mut().copy_from_slice(v);
        }
    }
    let bit_identical = losses_equal && out.last.params().same_values(&params);

    // (θ − 1)², θ = 0, α = 0.05: θ' = 0.1, first-order gradient 2(θ' − 1),
    // second-order multiplies by 1 − 2α = 0.9.
    let mut theta = ParameterSet::new();
    theta.push("theta", Tensor::scalar(0.0f64)).unwrap();
    let tasks = [MetaTask { support: 1.0, query: 1.0, seed: 0 }];
    let q = Quadratic { scale: 1.0 };
    let (_, fo) = meta_gradient(&q, &theta, &tasks, 0.05, 1, MetaOrder::FirstOrder).unwrap();
    let (_, so) = meta_gradient(&q, &theta, &tasks, 0.05, 1, MetaOrder::SecondOrder).unwrap();
    let fo_err = (fo[0].item() - 2.0 * (0.1 - 1.0)).abs();
    let so_err = (so[0].item() - 0.9 * 2.0 * (0.1 - 1.0)).abs();
    verdict(
        bit_identical && fo_err < 1e-10 && so_err < 1e-10,
        format!("inner_steps=0 vs Adam oracle bit-identical: {bit_identical}; first-order err {fo_err:.1e}, second-order err {so_err:.1e}"),
    )
}

// ---------- 5: sanity overfit ----------

fn sanity_training() -> Verdict {
    let spec = TaskSpec { h: 8, w: 8, ..Default::default() };
    let x: Tensor<f32> = batch_tensor(&generate_psi(&spec, 16, 1).unwrap()).unwrap();
    let cfg = ModelConfig { hw: 64, channels: 16, cr_stages: 1, ..Default::default() };
    let model: Model = Model::build(cfg, 0).unwrap();
    let obj = ReconstructionObjective::new(model.architecture().clone(), ChannelConfig::ideal());
    let (trained, losses) = fit(&obj, model.params(), &x, 2000, 1e-3, 0).unwrap();
    let last = obj.loss(&trained, &x, 0).unwrap();
    verdict(last < 1e-3, format!("MSE {:.3e} -> {last:.3e} after 2000 Adam steps (< 1e-3)", losses[0]))
}

// ---------- 6 & 7: few-shot adaptation, channel sweep ----------

fn fewshot_config() -> (TaskSpec, ModelConfig) {
    (
        TaskSpec { h: 16, w: 16, ..Default::default() },
        ModelConfig { hw: 256, channels: 32, cr_stages: 2, ..Default::default() },
    )
}

fn fewshot_adaptation(weights_out: &Path) -> Verdict {
    let (spec, cfg) = fewshot_config();
    let init: Model = Model::build(cfg, 0).unwrap();
    let meta = MetaConfig { max_iters: 1000, patience: 1000, ..Default::default() };
    let t = Instant::now();
    let out = meta_train(&init, &meta, &spec, 0).unwrap();
    save_weights(&out.best, weights_out).unwrap();
    eprintln!(
        "  meta-trained {} iterations in {:.0?}; best val {:.4e} at {} (initial {:.4e})",
        out.report.records.len(),
        t.elapsed(),
        out.report.best_val_loss.unwrap(),
        out.report.best_iter,
        out.report.initial_val_loss.unwrap()
    );

    let meta_model: Model<f64> = out.best.cast();
    let random: Model<f64> = init.cast();
    let (mut pre, mut post, mut wins) = (0.0, 0.0, 0);
    for j in 0..20 {
        let task = sample_task(&spec, 100, 64, derive(0xE7A1, &[j])).unwrap();
        let a = evaluate_adaptation(&meta_model, &task, 1e-3, 1, &ChannelConfig::ideal()).unwrap();
        let b = evaluate_adaptation(&random, &task, 1e-3, 1, &ChannelConfig::ideal()).unwrap();
        pre += a.nmse_pre / 20.0;
        post += a.nmse_post / 20.0;
        wins += usize::from(a.nmse_post < b.nmse_post);
    }
    verdict(
        post < pre && wins >= 16,
        format!("mean nmse_pre {pre:.6e} -> nmse_post {post:.6e}; meta beats random init on {wins}/20 tasks (>= 16)"),
    )
}

fn channel_behavior(weights: &Path, dir: &Path) -> Verdict {
    assert!(weights.exists(), "needs the weights trained by criterion 6");
    let w = weights.to_str().unwrap();
    let base = ["--data.h=16", "--data.w=16", "--model.channels=32", "--model.cr=1/4", "--channel.mode=awgn", "--eval.samples=200"];
    let noisy = dir.join("sweep.csv");
    let ideal = dir.join("ideal.csv");
    let mut args = vec!["eval-sweep", "--weights", w, "--snr-list", "0,5,10,15,20", "--out", noisy.to_str().unwrap()];
    args.extend(base);
    cli(&args);
    let mut args = vec!["eval-sweep", "--weights", w, "--snr-list", "0", "--ideal", "--out", ideal.to_str().unwrap()];
    args.extend(base);
    cli(&args);

    let col = |path: &Path, name: &str| -> Vec<f64> {
        let (header, rows) = csv_rows(path);
        let i = header.iter().position(|h| h == name).unwrap();
        rows.iter().map(|r| r[i].parse().unwrap()).collect()
    };
    let nmse_at = col(&noisy, "nmse");
    let ideal_nmse = col(&ideal, "nmse")[0];
    let monotone = nmse_at.windows(2).all(|p| p[1] <= p[0] * 1.05);
    let bounded = nmse_at.iter().all(|&v| ideal_nmse <= v);
    let shown: Vec<String> = nmse_at.iter().map(|v| format!("{v:.4e}")).collect();
    verdict(
        nmse_at.len() == 5 && monotone && bounded,
        format!("AWGN NMSE at 0..20 dB [{}]; ideal {ideal_nmse:.4e}; non-increasing: {monotone}; ideal lower bound: {bounded}", shown.join(", ")),
    )
}

// ---------- 8: compression-ratio ordering ----------

fn compression_ordering() -> Verdict {
    let spec = TaskSpec { h: 16, w: 16, ..Default::default() };
    let mut train = Vec::new();
    for t in 0..8 {
        train.extend(generate_psi(&spec, 16, 1000 + t).unwrap());
    }
    let mut test = Vec::new();
    for t in 0..16 {
        test.extend(generate_psi(&spec, 8, 5000 + t).unwrap());
    }
    let xtr: Tensor<f32> = batch_tensor(&train).unwrap();
    let xte: Tensor<f32> = batch_tensor(&test).unwrap();
    let mut results = Vec::new();
    for n in 1..=3 {
        let cfg = ModelConfig { hw: 256, channels: 16, cr_stages: n, ..Default::default() };
        let model: Model = Model::build(cfg, 0).unwrap();
        let obj = ReconstructionObjective::new(model.architecture().clone(), ChannelConfig::ideal());
        let (trained, _) = fit(&obj, model.params(), &xtr, 1000, 1e-3, 0).unwrap();
        results.push(nmse(&obj.reconstruct(&trained, &xte, 0).unwrap(), &xte).unwrap());
    }
    let ordered = results.windows(2).all(|p| p[0] <= p[1] * 1.1);
    verdict(
        ordered,
        format!("held-out NMSE CR 1/2 {:.4e}, 1/4 {:.4e}, 1/8 {:.4e} (each <= next + 10%)", results[0], results[1], results[2]),
    )
}

// ---------- 9: determinism ----------

fn determinism(dir: &Path) -> Verdict {
    let run = |tag: &str| -> Vec<(String, String)> {
        let d = dir.join(tag);
        std::fs::create_dir_all(&d).unwrap();
        let p = |name: &str| d.join(name).to_str().unwrap().to_string();
        let small = ["--data.h=8", "--data.w=8", "--model.channels=8", "--model.cr=1/2", "--model.heads=2", "--seed=5"];
        let with = |head: &[&str]| -> Vec<String> { head.iter().map(|s| s.to_string()).chain(small.iter().map(|s| s.to_string())).collect() };
        let call = |v: Vec<String>| cli(&v.iter().map(String::as_str).collect::<Vec<_>>());

        call(with(&["generate", "--out", &p("d.psid"), "--csv", &p("d.csv"), "--data.count=20"]));
        call(with(&[
            "meta-train",
            "--out-dir",
            &p("run"),
            "--meta.max_iters=6",
            "--meta.meta_batch=2",
            "--meta.support=5",
            "--meta.query=5",
            "--meta.val_every=2",
            "--meta.val_tasks=2",
            "--meta.channel=awgn",
        ]));
        let weights = d.join("run").join("weights.mcrw");
        let w = weights.to_str().unwrap().to_string();
        call(with(&["eval-sweep", "--weights", &w, "--samples", "10", "--out", &p("sweep.csv"), "--channel.mode=rayleigh-awgn"]));
        let adapt = call(with(&["adapt", "--weights", &w, "--task-seed", "3", "--k-support", "10"]));
        vec![
            ("generate csv".into(), without_columns(&d.join("d.csv"), &[])),
            ("generate psid".into(), format!("{:?}", std::fs::read(d.join("d.psid")).unwrap())),
            ("meta-train report".into(), without_columns(&d.join("run").join("report.csv"), &["wall_ms"])),
            ("meta-train weights".into(), format!("{:?}", std::fs::read(&weights).unwrap())),
            ("eval-sweep csv".into(), without_columns(&d.join("sweep.csv"), &["wall_ms"])),
            ("adapt".into(), adapt),
        ]
    };
    let (a, b) = (run("a"), run("b"));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    verdict(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} outputs identical across reruns", a.len())
        } else {
            format!("differing outputs: {differing:?}")
        },
    )
}

// ---------- driver ----------

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let weights: PathBuf = dir.path().join("fewshot.mcrw");
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Verdict + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("gradient oracle", Box::new(gradient_oracle)),
        ("shape fidelity", Box::new(shape_fidelity)),
        ("parameter accounting", Box::new(parameter_accounting)),
        ("MAML reductions", Box::new(maml_reductions)),
        ("sanity training", Box::new(sanity_training)),
        ("few-shot adaptation", Box::new(|| fewshot_adaptation(&weights))),
        ("channel behavior", Box::new(|| channel_behavior(&weights, dir.path()))),
        ("compression-ratio ordering", Box::new(compression_ordering)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let only: Option<Vec<usize>> = std::env::var("MCRNET_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').map(|n| n.trim().parse().expect("criterion number")).collect());

    let mut lines = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let line = format!("criterion {n} ({name}): {} [{:.1?}] {}", if v.pass { "PASS" } else { "FAIL" }, t.elapsed(), v.detail);
        println!("{line}");
        lines.push((v.pass, line));
    }
    let failed: Vec<&String> = lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("\n"));
}
