use std::fmt;
use std::io::Write;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::psi::{batch_tensor, nmse, sample_task, ChannelConfig, Task, TaskSpec, DEFAULT_QUERY, DEFAULT_SUPPORT};
use crate::seed;
use crate::tensor::{ParameterSet, Scalar, Tensor};

use super::maml::{inner_adapt, meta_gradient, query_noise, MetaOrder, MetaTask};
use super::{AdamState, Objective, ReconstructionObjective};

#[derive(Clone, Debug, PartialEq)]
pub struct MetaConfig {
    /// Inner-loop SGD step size `α`.
    pub inner_lr: f64,
    /// Outer-loop Adam step size.
    pub outer_lr: f64,
    /// Zero turns the meta-update into plain training on the query sets.
    pub inner_steps: usize,
    pub meta_batch: usize,
    pub max_iters: usize,
    /// Validation checks without improvement before stopping.
    pub patience: usize,
    /// Iterations between validation checks.
    pub val_every: usize,
    pub val_tasks: usize,
    pub support: usize,
    pub query: usize,
    pub order: MetaOrder,
    /// Channel applied to the latent during training.
    pub channel: ChannelConfig,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            inner_lr: 1e-3,
            outer_lr: 5e-4,
            inner_steps: 1,
            meta_batch: 8,
            max_iters: 1000,
            patience: 50,
            val_every: 10,
            val_tasks: 4,
            support: DEFAULT_SUPPORT,
            query: DEFAULT_QUERY,
            order: MetaOrder::FirstOrder,
            channel: ChannelConfig::ideal(),
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.inner_lr, "meta.inner_lr")?;
        positive(self.outer_lr, "meta.outer_lr")?;
        for (v, name) in [
            (self.meta_batch, "meta.meta_batch"),
            (self.val_every, "meta.val_every"),
            (self.support, "meta.support"),
            (self.query, "meta.query"),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        self.channel.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIters,
    /// Validation stalled for `patience` checks.
    EarlyStop,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::MaxIters => "max_iters",
            StopReason::EarlyStop => "early_stop",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub meta_loss: f64,
    pub val_loss: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<IterRecord>,
    /// Validation loss of the initial parameters.
    pub initial_val_loss: Option<f64>,
    /// Iteration whose parameters were returned as best (0 = initial).
    pub best_iter: usize,
    pub best_val_loss: Option<f64>,
    pub stop: StopReason,
}

impl TrainReport {
    /// `iter,meta_loss,val_loss,wall_ms`; `val_loss` is blank when no
    /// check ran.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,meta_loss,val_loss,wall_ms")?;
        for r in &self.records {
            let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{:.3}", r.iter, r.meta_loss, val, r.wall_ms)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<P> {
    /// Parameters with the best validation loss; the last iterate when no
    /// validation ran.
    pub best: P,
    pub last: P,
    pub report: TrainReport,
}

/// How each iteration turns a task batch into an update direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateRule {
    Meta,
    /// Plain gradient of the summed query losses, no adaptation.
    Joint,
}

/// Outer loop over an arbitrary objective. `tasks(iter, i)` supplies task
/// `i` of iteration `iter` (1-based).
pub fn train_with<T, O, F>(
    obj: &O,
    init: &ParameterSet<T>,
    cfg: &MetaConfig,
    rule: UpdateRule,
    mut tasks: F,
    validation: &[MetaTask<O::Batch>],
) -> Result<TrainOutcome<ParameterSet<T>>>
where
    T: Scalar,
    O: Objective<T>,
    F: FnMut(usize, usize) -> Result<MetaTask<O::Batch>>,
{
    cfg.validate()?;
    let steps = match rule {
        UpdateRule::Meta => cfg.inner_steps,
        UpdateRule::Joint => 0,
    };
    let validate = |p: &ParameterSet<T>| -> Result<Option<f64>> {
        if validation.is_empty() {
            return Ok(None);
        }
        let mut acc = 0.0;
        for t in validation {
            let adapted = inner_adapt(obj, p, &t.support, cfg.inner_lr, steps, t.seed)?;
            acc += obj.loss(&adapted, &t.query, query_noise(t.seed))?;
        }
        Ok(Some(acc / validation.len() as f64))
    };

    let start = Instant::now();
    let mut params = init.clone();
    let mut adam = AdamState::new(&params);
    let initial_val_loss = validate(&params)?;
    let mut best = (params.clone(), 0, initial_val_loss);
    let mut stale = 0;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut last_finite = None;

    for iter in 1..=cfg.max_iters {
        let batch = (0..cfg.meta_batch).map(|i| tasks(iter, i)).collect::<Result<Vec<_>>>()?;
        let prev = last_finite;
        let diverged = move |()| Error::Divergence { iteration: iter, last_finite_loss: prev };
        let (losses, grads) = meta_gradient(obj, &params, &batch, cfg.inner_lr, steps, cfg.order).map_err(|e| match e {
            Error::Divergence { .. } => diverged(()),
            other => other,
        })?;
        let meta_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        if !meta_loss.is_finite() || !grads.iter().all(Tensor::all_finite) {
            return Err(diverged(()));
        }
        last_finite = Some(meta_loss);
        adam.update(&mut params, &grads, cfg.outer_lr);

        let val_loss = if iter % cfg.val_every == 0 { validate(&params)? } else { None };
        records.push(IterRecord {
            iter,
            meta_loss,
            val_loss,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(Error::Divergence { iteration: iter, last_finite_loss: last_finite });
            }
            if best.2.is_none_or(|b| v < b) {
                best = (params.clone(), iter, Some(v));
                stale = 0;
            } else {
                stale += 1;
                if stale >= cfg.patience {
                    stop = StopReason::EarlyStop;
                    break;
                }
            }
        }
    }

    let (best_params, best_iter, best_val_loss) = if validation.is_empty() {
        (params.clone(), records.len(), None)
    } else {
        best
    };
    Ok(TrainOutcome {
        best: best_params,
        last: params,
        report: TrainReport {
            records,
            initial_val_loss,
            best_iter,
            best_val_loss,
            stop,
        },
    })
}

const TRAIN_STREAM: u64 = 1;
const VALIDATION_STREAM: u64 = 2;

/// Seed of training task `index` in iteration `iter`.
pub fn task_seed(seed: u64, iter: usize, index: usize) -> u64 {
    seed::derive(seed, &[TRAIN_STREAM, iter as u64, index as u64])
}

pub fn validation_task_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[VALIDATION_STREAM, index as u64])
}

/// Draws a task and packs its sets as `[B, hw, 1]` batches.
pub fn make_task<T: Scalar>(spec: &TaskSpec, support: usize, query: usize, seed: u64) -> Result<MetaTask<Tensor<T>>> {
    let task = sample_task(spec, support, query, seed)?;
    Ok(to_meta_task(&task))
}

pub fn to_meta_task<T: Scalar>(task: &Task) -> MetaTask<Tensor<T>> {
    MetaTask {
        support: batch_tensor(&task.support).expect("non-empty support"),
        query: batch_tensor(&task.query).expect("non-empty query"),
        seed: task.seed,
    }
}

fn check_sizes<T: Scalar>(model: &Model<T>, spec: &TaskSpec) -> Result<()> {
    spec.validate()?;
    if spec.hw() != model.config().hw {
        return Err(Error::Config(format!(
            "PSI size {}x{} = {} does not match model.hw = {}",
            spec.h,
            spec.w,
            spec.hw(),
            model.config().hw
        )));
    }
    Ok(())
}

fn run<T: Scalar>(
    init: &Model<T>,
    cfg: &MetaConfig,
    spec: &TaskSpec,
    seed: u64,
    rule: UpdateRule,
) -> Result<TrainOutcome<Model<T>>> {
    check_sizes(init, spec)?;
    let obj = ReconstructionObjective::new(init.architecture().clone(), cfg.channel);
    let validation = (0..cfg.val_tasks)
        .map(|j| make_task(spec, cfg.support, cfg.query, validation_task_seed(seed, j)))
        .collect::<Result<Vec<_>>>()?;
    let out = train_with(
        &obj,
        init.params(),
        cfg,
        rule,
        |iter, i| make_task(spec, cfg.support, cfg.query, task_seed(seed, iter, i)),
        &validation,
    )?;
    Ok(TrainOutcome {
        best: init.with_params(out.best)?,
        last: init.with_params(out.last)?,
        report: out.report,
    })
}

/// Meta-learns an initialisation over tasks drawn from `spec`.
pub fn meta_train<T: Scalar>(init: &Model<T>, cfg: &MetaConfig, spec: &TaskSpec, seed: u64) -> Result<TrainOutcome<Model<T>>> {
    run(init, cfg, spec, seed, UpdateRule::Meta)
}

/// Conventional training on the same task stream: one Adam step per
/// iteration on the summed query losses, without adaptation.
pub fn joint_train<T: Scalar>(init: &Model<T>, cfg: &MetaConfig, spec: &TaskSpec, seed: u64) -> Result<TrainOutcome<Model<T>>> {
    run(init, cfg, spec, seed, UpdateRule::Joint)
}

/// Plain Adam on one fixed batch. Returns the final parameters and the
/// loss before each step.
pub fn fit<T: Scalar, O: Objective<T>>(
    obj: &O,
    init: &ParameterSet<T>,
    batch: &O::Batch,
    steps: usize,
    lr: f64,
    noise_seed: u64,
) -> Result<(ParameterSet<T>, Vec<f64>)> {
    let mut params = init.clone();
    let mut adam = AdamState::new(&params);
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let (loss, grads) = obj.loss_and_grad(&params, batch, seed::derive(noise_seed, &[step as u64]))?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration: step, last_finite_loss: losses.last().copied() });
        }
        losses.push(loss);
        adam.update(&mut params, &grads, lr);
    }
    Ok((params, losses))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptationResult {
    pub nmse_pre: f64,
    pub nmse_post: f64,
}

/// Query NMSE before and after `steps` SGD steps on the support set. Both
/// evaluations see the same channel realisation.
pub fn evaluate_adaptation<T: Scalar>(
    model: &Model<T>,
    task: &Task,
    lr: f64,
    steps: usize,
    channel: &ChannelConfig,
) -> Result<AdaptationResult> {
    let obj = ReconstructionObjective::new(model.architecture().clone(), *channel);
    let t: MetaTask<Tensor<T>> = to_meta_task(task);
    let noise = query_noise(t.seed);
    let adapted = inner_adapt(&obj, model.params(), &t.support, lr, steps, t.seed)?;
    let pre = nmse(&obj.reconstruct(model.params(), &t.query, noise)?, &t.query)?;
    let post = nmse(&obj.reconstruct(&adapted, &t.query, noise)?, &t.query)?;
    Ok(AdaptationResult { nmse_pre: pre, nmse_post: post })
}
