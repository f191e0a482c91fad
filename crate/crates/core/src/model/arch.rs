//! Parameter inventory and forward graphs of the encoder and decoder.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Init, ParameterSet, Scalar, Var};

use super::ModelConfig;

/// Kernel size, stride, padding and output padding of the resampling stages.
pub const STAGE_KERNEL: usize = 3;
pub const STAGE_STRIDE: usize = 2;
pub const STAGE_PAD: usize = 1;
pub const STAGE_OUTPUT_PAD: usize = 1;
/// Kernel sizes of the DWCG activation and value branches.
pub const GATE_KERNEL: usize = 3;
pub const VALUE_KERNEL: usize = 1;

/// Name, shape and initialiser of one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

fn spec(name: String, shape: Vec<usize>, init: Init) -> ParamSpec {
    ParamSpec { name, shape, init }
}

/// Every parameter of the model, in slot order.
pub fn param_specs(cfg: &ModelConfig) -> Vec<ParamSpec> {
    let c = cfg.channels;
    let k = STAGE_KERNEL;
    let mut out = Vec::new();
    let conv = |out: &mut Vec<ParamSpec>, prefix: String, shape: Vec<usize>, fan_in: usize, bias: usize| {
        out.push(spec(format!("{prefix}.weight"), shape, Init::FanIn(fan_in)));
        out.push(spec(format!("{prefix}.bias"), vec![bias], Init::Constant(0.0)));
    };

    for i in 0..cfg.cr_stages {
        let cin = if i == 0 { 1 } else { c };
        conv(&mut out, format!("enc.conv{i}"), vec![k, cin, c], k * cin, c);
    }
    for i in 0..cfg.mhsa_blocks {
        let p = format!("enc.mhsa{i}");
        out.push(spec(format!("{p}.ln.gamma"), vec![c], Init::Constant(1.0)));
        out.push(spec(format!("{p}.ln.beta"), vec![c], Init::Constant(0.0)));
        for m in ["wq", "wk", "wv", "wo"] {
            out.push(spec(format!("{p}.{m}"), vec![c, c], Init::FanIn(c)));
        }
    }
    conv(&mut out, "enc.proj".into(), vec![c, 1], c, 1);

    for i in 0..cfg.cr_stages {
        let cin = if i == 0 { 1 } else { c };
        conv(&mut out, format!("dec.convt{i}"), vec![k, cin, c], k * cin, c);
    }
    for i in 0..cfg.dwcg_modules {
        let p = format!("dec.dwcg{i}");
        conv(&mut out, format!("{p}.gate"), vec![GATE_KERNEL, c], GATE_KERNEL, c);
        conv(&mut out, format!("{p}.value"), vec![VALUE_KERNEL, c], VALUE_KERNEL, c);
        out.push(spec(format!("{p}.swish_beta"), vec![1], Init::Constant(1.0)));
    }
    conv(&mut out, "dec.out".into(), vec![1, c, 1], c, 1);
    out
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Affine {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MhsaSlots {
    pub gamma: usize,
    pub beta: usize,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
}

/// Slot indices of one DWCG module.
#[derive(Clone, Copy, Debug)]
pub struct DwcgSlots {
    pub gate: (usize, usize),
    pub value: (usize, usize),
    pub swish_beta: usize,
}

/// Slot indices resolved by name against a parameter set.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    enc_convs: Vec<Affine>,
    mhsa: Vec<MhsaSlots>,
    enc_proj: Affine,
    dec_convts: Vec<Affine>,
    dwcg: Vec<DwcgSlots>,
    dec_out: Affine,
}

impl Layout {
    /// Checks that `params` holds exactly the inventory of `cfg`.
    pub fn resolve<T: Scalar>(cfg: &ModelConfig, params: &ParameterSet<T>) -> Result<Self> {
        let specs = param_specs(cfg);
        for s in &specs {
            let p = params
                .by_name(&s.name)
                .ok_or_else(|| Error::Config(format!("missing parameter `{}`", s.name)))?;
            if p.value.shape() != s.shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    name: s.name.clone(),
                    expected: s.shape.clone(),
                    found: p.value.shape().to_vec(),
                });
            }
        }
        if params.len() != specs.len() {
            let extra = params
                .iter()
                .find(|p| !specs.iter().any(|s| s.name == p.name))
                .map(|p| p.name.clone())
                .unwrap_or_default();
            return Err(Error::Config(format!("unexpected parameter `{extra}`")));
        }
        let slot = |name: String| params.slot(&name).expect("checked above");
        let affine = |prefix: String| Affine {
            w: slot(format!("{prefix}.weight")),
            b: slot(format!("{prefix}.bias")),
        };
        Ok(Layout {
            enc_convs: (0..cfg.cr_stages).map(|i| affine(format!("enc.conv{i}"))).collect(),
            mhsa: (0..cfg.mhsa_blocks)
                .map(|i| {
                    let p = format!("enc.mhsa{i}");
                    MhsaSlots {
                        gamma: slot(format!("{p}.ln.gamma")),
                        beta: slot(format!("{p}.ln.beta")),
                        wq: slot(format!("{p}.wq")),
                        wk: slot(format!("{p}.wk")),
                        wv: slot(format!("{p}.wv")),
                        wo: slot(format!("{p}.wo")),
                    }
                })
                .collect(),
            enc_proj: affine("enc.proj".into()),
            dec_convts: (0..cfg.cr_stages).map(|i| affine(format!("dec.convt{i}"))).collect(),
            dwcg: (0..cfg.dwcg_modules)
                .map(|i| {
                    let p = format!("dec.dwcg{i}");
                    let g = affine(format!("{p}.gate"));
                    let v = affine(format!("{p}.value"));
                    DwcgSlots {
                        gate: (g.w, g.b),
                        value: (v.w, v.b),
                        swish_beta: slot(format!("{p}.swish_beta")),
                    }
                })
                .collect(),
            dec_out: affine("dec.out".into()),
        })
    }

    pub fn dwcg(&self, module: usize) -> DwcgSlots {
        self.dwcg[module]
    }
}

/// Encoder: stride-2 convolutions with GELU, pre-norm residual attention
/// blocks, then a per-position projection to one channel.
pub(crate) fn encode_graph<T: Scalar>(
    cfg: &ModelConfig,
    layout: &Layout,
    g: &mut Graph<T>,
    p: &[Var],
    x: Var,
) -> Result<Var> {
    let mut h = x;
    for a in &layout.enc_convs {
        h = g.conv1d(h, p[a.w], p[a.b], STAGE_STRIDE, STAGE_PAD)?;
        h = g.gelu(h);
    }
    for m in &layout.mhsa {
        let n = g.layer_norm(h, p[m.gamma], p[m.beta])?;
        let att = g.mhsa(n, p[m.wq], p[m.wk], p[m.wv], p[m.wo], cfg.heads)?;
        h = g.add(h, att)?;
    }
    g.dense(h, p[layout.enc_proj.w], p[layout.enc_proj.b])
}

/// `Swish(DWConv_3(z)) ⊗ DWConv_1(z)`.
pub fn dwcg<T: Scalar>(g: &mut Graph<T>, z: Var, p: &[Var], slots: DwcgSlots) -> Result<Var> {
    let a = g.dwconv1d(z, p[slots.gate.0], p[slots.gate.1])?;
    let gate = g.swish(a, p[slots.swish_beta])?;
    let value = g.dwconv1d(z, p[slots.value.0], p[slots.value.1])?;
    g.mul(gate, value)
}

/// Decoder: transposed convolutions with ReLU, DWCG modules, then a
/// 1×1 convolution to one channel. The output is linear.
pub(crate) fn decode_graph<T: Scalar>(
    _cfg: &ModelConfig,
    layout: &Layout,
    g: &mut Graph<T>,
    p: &[Var],
    z: Var,
) -> Result<Var> {
    let mut h = z;
    for a in &layout.dec_convts {
        h = g.conv_transpose1d(h, p[a.w], p[a.b], STAGE_STRIDE, STAGE_PAD, STAGE_OUTPUT_PAD)?;
        h = g.relu(h);
    }
    for &slots in &layout.dwcg {
        h = dwcg(g, h, p, slots)?;
    }
    g.conv1d(h, p[layout.dec_out.w], p[layout.dec_out.b], 1, 0)
}
