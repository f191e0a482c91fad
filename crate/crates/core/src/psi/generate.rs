use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{Scalar, Tensor};

use super::quantize::{quantize_index, QuantizationSpec};

/// Phase-field generator of a task family.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    /// Superposed linear phase ramps. Each task draws base slopes
    /// `(a_j, b_j)` uniformly in `[freq_min, freq_max]` (radians per
    /// element); each sample perturbs them by up to `±jitter` and draws a
    /// fresh offset `φ_j`.
    RampBeam {
        ramps: usize,
        freq_min: f64,
        freq_max: f64,
        jitter: f64,
    },
    /// Every element uniform on the grid.
    IidUniform,
}

impl Generator {
    pub fn ramp_beam() -> Self {
        Generator::RampBeam {
            ramps: 1,
            freq_min: -0.5,
            freq_max: 0.5,
            jitter: 0.05,
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Generator::RampBeam { .. } => "ramp-beam",
            Generator::IidUniform => "iid-uniform",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    pub h: usize,
    pub w: usize,
    pub bits: u8,
    pub generator: Generator,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            h: 32,
            w: 32,
            bits: 4,
            generator: Generator::ramp_beam(),
        }
    }
}

impl TaskSpec {
    pub fn hw(&self) -> usize {
        self.h * self.w
    }

    pub fn quantization(&self) -> QuantizationSpec {
        QuantizationSpec::new(self.bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.w == 0 {
            return Err(Error::Config("PSI dimensions must be positive".into()));
        }
        if !(1..=16).contains(&self.bits) {
            return Err(Error::Config(format!("bits must be in 1..=16, got {}", self.bits)));
        }
        if let Generator::RampBeam { ramps, freq_min, freq_max, jitter } = &self.generator {
            if *ramps == 0 {
                return Err(Error::Config("ramp-beam needs at least one ramp".into()));
            }
            if !(freq_min.is_finite() && freq_max.is_finite() && freq_min <= freq_max) {
                return Err(Error::Config(format!("invalid frequency range [{freq_min}, {freq_max}]")));
            }
            if !(jitter.is_finite() && *jitter >= 0.0) {
                return Err(Error::Config(format!("invalid jitter {jitter}")));
            }
        }
        Ok(())
    }
}

/// One linear ramp `a·r + b·c + φ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp {
    pub a: f64,
    pub b: f64,
    pub phi: f64,
}

/// Task-level generator parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum TaskParams {
    /// Base slopes `(a_j, b_j)`.
    RampBeam(Vec<(f64, f64)>),
    IidUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleMeta {
    pub generator: &'static str,
    pub seed: u64,
}

/// A quantized phase configuration, stored as grid indices in row-major
/// order.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseShiftSample {
    pub h: usize,
    pub w: usize,
    pub quant: QuantizationSpec,
    pub indices: Vec<u32>,
    pub meta: Option<SampleMeta>,
}

impl PhaseShiftSample {
    pub fn phases(&self) -> Vec<f64> {
        self.indices.iter().map(|&i| self.quant.phase(i)).collect()
    }

    /// Values `θ / 2π ∈ [0, 1)`.
    pub fn normalized(&self) -> Vec<f32> {
        self.indices.iter().map(|&i| self.quant.normalized(i)).collect()
    }

    /// `[hw, 1]` model input.
    pub fn tensor<T: Scalar>(&self) -> Tensor<T> {
        let data = self.indices.iter().map(|&i| T::from_f64(self.quant.normalized(i) as f64)).collect();
        Tensor::new(vec![self.indices.len(), 1], data).expect("non-empty sample")
    }
}

/// `[B, hw, 1]` batch of samples with equal size.
pub fn batch_tensor<T: Scalar>(samples: &[PhaseShiftSample]) -> Result<Tensor<T>> {
    let items: Vec<Tensor<T>> = samples.iter().map(|s| s.tensor()).collect();
    Tensor::stack(&items)
}

/// Quantized sum of ramps over an `h × w` grid.
pub fn ramp_field(h: usize, w: usize, quant: QuantizationSpec, ramps: &[Ramp]) -> PhaseShiftSample {
    let mut indices = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let theta: f64 = ramps.iter().map(|p| p.a * r as f64 + p.b * c as f64 + p.phi).sum();
            indices.push(quantize_index(theta, quant));
        }
    }
    PhaseShiftSample { h, w, quant, indices, meta: None }
}

pub fn draw_task_params<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> TaskParams {
    match &spec.generator {
        Generator::RampBeam { ramps, freq_min, freq_max, .. } => TaskParams::RampBeam(
            (0..*ramps)
                .map(|_| (uniform(rng, *freq_min, *freq_max), uniform(rng, *freq_min, *freq_max)))
                .collect(),
        ),
        Generator::IidUniform => TaskParams::IidUniform,
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// One sample of a task, fully determined by `sample_seed`.
pub fn draw_sample(spec: &TaskSpec, params: &TaskParams, sample_seed: u64) -> PhaseShiftSample {
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let quant = spec.quantization();
    let mut s = match (params, &spec.generator) {
        (TaskParams::RampBeam(base), Generator::RampBeam { jitter, .. }) => {
            let ramps: Vec<Ramp> = base
                .iter()
                .map(|&(a, b)| Ramp {
                    a: a + uniform(&mut rng, -jitter, *jitter),
                    b: b + uniform(&mut rng, -jitter, *jitter),
                    phi: rng.random_range(0.0..TAU),
                })
                .collect();
            ramp_field(spec.h, spec.w, quant, &ramps)
        }
        _ => PhaseShiftSample {
            h: spec.h,
            w: spec.w,
            quant,
            indices: (0..spec.hw()).map(|_| rng.random_range(0..quant.levels())).collect(),
            meta: None,
        },
    };
    s.meta = Some(SampleMeta { generator: spec.generator.id(), seed: sample_seed });
    s
}

const TASK_STREAM: u64 = 0;
const SAMPLE_STREAM: u64 = 1;

/// Samples `seed`'s task-level parameters.
pub fn task_params(spec: &TaskSpec, seed: u64) -> TaskParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[TASK_STREAM]));
    draw_task_params(spec, &mut rng)
}

fn sample_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, &[SAMPLE_STREAM, index as u64])
}

/// `count` samples sharing one draw of task-level parameters.
pub fn generate_psi(spec: &TaskSpec, count: usize, seed: u64) -> Result<Vec<PhaseShiftSample>> {
    spec.validate()?;
    let params = task_params(spec, seed);
    Ok((0..count).map(|i| draw_sample(spec, &params, sample_seed(seed, i))).collect())
}

pub const DEFAULT_SUPPORT: usize = 100;
pub const DEFAULT_QUERY: usize = 64;

#[derive(Clone, Debug)]
pub struct Task {
    pub seed: u64,
    pub params: TaskParams,
    pub support: Vec<PhaseShiftSample>,
    pub query: Vec<PhaseShiftSample>,
}

/// Support and query sets from one task. Sample seeds are distinct, so the
/// two sets never share a draw.
pub fn sample_task(spec: &TaskSpec, support: usize, query: usize, seed: u64) -> Result<Task> {
    spec.validate()?;
    if support == 0 || query == 0 {
        return Err(Error::Config("support and query sizes must be at least 1".into()));
    }
    let params = task_params(spec, seed);
    let draw = |range: std::ops::Range<usize>| -> Vec<PhaseShiftSample> {
        range.map(|i| draw_sample(spec, &params, sample_seed(seed, i))).collect()
    };
    Ok(Task {
        seed,
        support: draw(0..support),
        query: draw(support..support + query),
        params,
    })
}
