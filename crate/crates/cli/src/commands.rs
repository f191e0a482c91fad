use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use mcrnet::meta::{evaluate_adaptation, joint_train, meta_train as train};
use mcrnet::model::{load_weights, load_weights_as, save_weights, Model};
use mcrnet::psi::{
    apply_channel, batch_tensor, generate_psi, nmse, sample_task, save_dataset, write_csv, ChannelConfig, Dataset,
};
use mcrnet::seed;
use mcrnet::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ExperimentConfig;
use crate::{CliError, VERSION};

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// `#`-prefixed provenance block: tool version and resolved config.
fn comment_header(cfg: &ExperimentConfig) -> String {
    let mut s = format!("# mcrnet-cli {VERSION}\n");
    for line in cfg.raw.to_text().lines() {
        s.push_str("# ");
        s.push_str(line);
        s.push('\n');
    }
    s
}

/// Loadable config (`--config`) preceded by the tool version.
fn manifest(cfg: &ExperimentConfig, extra: &[(&str, String)]) -> String {
    let mut s = format!("# mcrnet-cli {VERSION}\n");
    for (k, v) in extra {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str(&cfg.raw.to_text());
    s
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest");
    name.into()
}

pub fn generate(cfg: &ExperimentConfig, path: &Path, csv: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let samples = generate_psi(&cfg.task, cfg.count, cfg.seed)?;
    let data = Dataset::new(cfg.task.h, cfg.task.w, cfg.task.quantization(), samples)?;
    save_dataset(&data, path)?;
    let side = sidecar(path);
    fs::write(&side, manifest(cfg, &[])).map_err(io_err(&side))?;
    if let Some(csv) = csv {
        let mut text = comment_header(cfg).into_bytes();
        write_csv(&data.samples, &mut text).map_err(io_err(csv))?;
        fs::write(csv, text).map_err(io_err(csv))?;
    }
    writeln!(
        out,
        "wrote {} samples ({}x{}, {} bits) to {}",
        data.samples.len(),
        data.h,
        data.w,
        data.quant.bits,
        path.display()
    )
    .map_err(io_err(path))
}

pub fn meta_train(cfg: &ExperimentConfig, dir: &Path, joint: bool, out: &mut dyn Write) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let init: Model = Model::build(cfg.model.clone(), cfg.seed)?;
    let outcome = if joint {
        joint_train(&init, &cfg.meta, &cfg.task, cfg.seed)?
    } else {
        train(&init, &cfg.meta, &cfg.task, cfg.seed)?
    };
    let report = &outcome.report;

    let weights = dir.join("weights.mcrw");
    save_weights(&outcome.best, &weights)?;
    let csv = dir.join("report.csv");
    let mut text = comment_header(cfg).into_bytes();
    report.write_csv(&mut text).map_err(io_err(&csv))?;
    fs::write(&csv, text).map_err(io_err(&csv))?;
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let extra = [
        ("mode", if joint { "joint" } else { "meta" }.to_string()),
        ("iterations", report.records.len().to_string()),
        ("stop", report.stop.to_string()),
        ("best_iter", report.best_iter.to_string()),
        ("best_val_loss", fmt_opt(report.best_val_loss)),
        ("initial_val_loss", fmt_opt(report.initial_val_loss)),
    ];
    let man = dir.join("manifest.txt");
    fs::write(&man, manifest(cfg, &extra)).map_err(io_err(&man))?;

    let last = report.records.last().map(|r| r.meta_loss);
    writeln!(
        out,
        "{} iterations ({}), final meta-loss {}, best validation loss {} at iteration {}\nwrote {}",
        report.records.len(),
        report.stop,
        fmt_opt(last),
        fmt_opt(report.best_val_loss),
        report.best_iter,
        dir.display()
    )
    .map_err(io_err(dir))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptSummary {
    pub nmse_pre: f64,
    pub nmse_post: f64,
    pub improvement_pct: f64,
}

/// Query NMSE of task `task_seed` before and after the configured inner
/// loop, computed in double precision.
pub fn adapt(cfg: &ExperimentConfig, weights: &Path, task_seed: u64, k_support: usize) -> Result<AdaptSummary, CliError> {
    let model: Model<f64> = load_weights_as(weights, &cfg.model)?.cast();
    let task = sample_task(&cfg.task, k_support, cfg.meta.query, task_seed)?;
    let r = evaluate_adaptation(&model, &task, cfg.meta.inner_lr, cfg.meta.inner_steps, &cfg.meta.channel)?;
    Ok(AdaptSummary {
        nmse_pre: r.nmse_pre,
        nmse_post: r.nmse_post,
        improvement_pct: 100.0 * (r.nmse_pre - r.nmse_post) / r.nmse_pre,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub cr: String,
    pub snr_db: f64,
    pub nmse: f64,
    pub seed: u64,
    pub wall_ms: f64,
}

const EVAL_SAMPLES: u64 = 1;
const EVAL_NOISE: u64 = 2;

/// One row per (repetition, SNR). Each repetition draws `eval.samples`
/// samples, each from its own task, and one standard-normal noise pattern
/// that every SNR point rescales.
pub fn eval_sweep(cfg: &ExperimentConfig, weights: &Path, ideal: bool) -> Result<Vec<SweepRow>, CliError> {
    let model = load_weights_as(weights, &cfg.model)?;
    let cr = cfg.model.compression_ratio().to_string();
    let mut rows = Vec::new();
    for rep in 0..cfg.eval.reps {
        let rep_seed = seed::derive(cfg.seed, &[rep as u64]);
        let samples = (0..cfg.eval.samples)
            .map(|i| {
                let s = generate_psi(&cfg.task, 1, seed::derive(rep_seed, &[EVAL_SAMPLES, i as u64]))?;
                Ok(s.into_iter().next().expect("one sample"))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let x: Tensor<f32> = batch_tensor(&samples)?;
        let z = model.encode(&x)?;
        for &snr_db in &cfg.eval.snr_list {
            let start = Instant::now();
            let channel = if ideal {
                ChannelConfig::ideal()
            } else {
                ChannelConfig { snr_db, ..cfg.channel }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(rep_seed, &[EVAL_NOISE]));
            let y = model.decode(&apply_channel(&z, &channel, &mut rng))?;
            rows.push(SweepRow {
                cr: cr.clone(),
                snr_db,
                nmse: nmse(&y, &x)?,
                seed: rep_seed,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(cfg: &ExperimentConfig, rows: &[SweepRow], mut out: W) -> io::Result<()> {
    out.write_all(comment_header(cfg).as_bytes())?;
    writeln!(out, "cr,snr_db,nmse,seed,wall_ms")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{:.3}", r.cr, r.snr_db, r.nmse, r.seed, r.wall_ms)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub encoder_params: usize,
    pub decoder_params: usize,
    pub encode_median_ms: f64,
    pub decode_median_ms: f64,
    pub runs: usize,
    pub warmup: usize,
    pub model: String,
}

fn median_ms(runs: usize, warmup: usize, mut f: impl FnMut() -> Result<(), CliError>) -> Result<f64, CliError> {
    for _ in 0..warmup {
        f()?;
    }
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    Ok(match times.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => times[n / 2],
        n => 0.5 * (times[n / 2 - 1] + times[n / 2]),
    })
}

pub fn benchmark(cfg: &ExperimentConfig, weights: Option<&Path>) -> Result<BenchSummary, CliError> {
    let model: Model = match weights {
        Some(p) => load_weights(p)?,
        None => Model::build(cfg.model.clone(), cfg.seed)?,
    };
    let count = model.count_params();
    let mcfg = model.config().clone();
    let task = mcrnet::psi::TaskSpec { h: 1, w: mcfg.hw, ..cfg.task.clone() };
    let x: Tensor<f32> = generate_psi(&task, 1, cfg.seed)?[0].tensor();
    let z = model.encode(&x)?;
    let (runs, warmup) = (cfg.bench.runs, cfg.bench.warmup);
    let encode_median_ms = median_ms(runs, warmup, || model.encode(&x).map(drop).map_err(Into::into))?;
    let decode_median_ms = median_ms(runs, warmup, || model.decode(&z).map(drop).map_err(Into::into))?;
    Ok(BenchSummary {
        encoder_params: count.encoder,
        decoder_params: count.decoder,
        encode_median_ms,
        decode_median_ms,
        runs,
        warmup,
        model: mcfg.to_record().trim_end().replace('\n', ","),
    })
}

pub fn write_bench(s: &BenchSummary, machine: bool, out: &mut dyn Write) -> io::Result<()> {
    if machine {
        writeln!(out, "version={VERSION}")?;
        writeln!(out, "model={}", s.model)?;
        writeln!(out, "encoder_params={}", s.encoder_params)?;
        writeln!(out, "decoder_params={}", s.decoder_params)?;
        writeln!(out, "encode_median_ms={}", s.encode_median_ms)?;
        writeln!(out, "decode_median_ms={}", s.decode_median_ms)?;
        writeln!(out, "runs={}", s.runs)?;
        writeln!(out, "warmup={}", s.warmup)
    } else {
        writeln!(out, "model: {}", s.model)?;
        writeln!(out, "encoder parameters: {}", s.encoder_params)?;
        writeln!(out, "decoder parameters: {}", s.decoder_params)?;
        writeln!(
            out,
            "median single-sample time over {} runs ({} warmup): encode {:.3} ms, decode {:.3} ms",
            s.runs, s.warmup, s.encode_median_ms, s.decode_median_ms
        )
    }
}
