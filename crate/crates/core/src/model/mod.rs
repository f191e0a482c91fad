//! The asymmetric autoencoder: heavy encoder (convolutions plus
//! self-attention), light decoder (transposed convolutions plus
//! depthwise convolutional gating).

pub mod arch;
mod config;
pub mod io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Graph, ParameterSet, Scalar, Tensor, Var};

pub use arch::{dwcg, param_specs, DwcgSlots, ParamSpec};
pub use config::{CompressionRatio, ModelConfig};
pub use io::{load_weights, load_weights_as, save_weights};

use arch::Layout;

/// Scalar parameter counts per side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub encoder: usize,
    pub decoder: usize,
}

impl ParamCount {
    pub fn total(&self) -> usize {
        self.encoder + self.decoder
    }
}

/// Encoder output: `[L, 1]` or `[B, L, 1]` with `L = hw · CR`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector<T>(Tensor<T>);

impl<T: Scalar> LatentVector<T> {
    pub fn new(values: Tensor<T>, expected_len: usize) -> Result<Self> {
        let ok = match values.shape() {
            [l, 1] | [_, l, 1] => *l == expected_len,
            _ => false,
        };
        if !ok {
            return Err(Error::dim("latent", values.shape(), &[expected_len, 1]));
        }
        Ok(LatentVector(values))
    }

    /// Latent length `L` per sample.
    pub fn len(&self) -> usize {
        let s = self.0.shape();
        s[s.len() - 2]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.0
    }

    pub fn into_values(self) -> Tensor<T> {
        self.0
    }

    /// Same shape, replaced values; used by the channel simulator.
    pub(crate) fn with_data(&self, data: Vec<T>) -> Self {
        LatentVector(Tensor::from_parts(self.0.shape().to_vec(), data))
    }
}

/// Parameter-independent part of the model: configuration plus slot layout.
#[derive(Clone, Debug)]
pub struct Architecture {
    config: ModelConfig,
    layout: Layout,
}

impl Architecture {
    /// Resolves the layout of `cfg` against an existing parameter set.
    pub fn for_params<T: Scalar>(cfg: &ModelConfig, params: &ParameterSet<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Architecture {
            config: cfg.clone(),
            layout: Layout::resolve(cfg, params)?,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn check_input<T: Scalar>(&self, x: &Tensor<T>) -> Result<()> {
        let ok = matches!(x.shape(), [l, 1] | [_, l, 1] if *l == self.config.hw);
        if !ok {
            return Err(Error::dim("encode", x.shape(), &[self.config.hw, 1]));
        }
        Ok(())
    }

    /// Appends the encoder to `g`. `x` is `[hw, 1]` or `[B, hw, 1]`.
    pub fn encode_graph<T: Scalar>(&self, g: &mut Graph<T>, params: &[Var], x: Var) -> Result<Var> {
        self.check_input(g.value(x))?;
        arch::encode_graph(&self.config, &self.layout, g, params, x)
    }

    /// Appends the decoder to `g`. `z` is `[L, 1]` or `[B, L, 1]`.
    pub fn decode_graph<T: Scalar>(&self, g: &mut Graph<T>, params: &[Var], z: Var) -> Result<Var> {
        LatentVector::new(g.value(z).clone(), self.config.latent_len())?;
        arch::decode_graph(&self.config, &self.layout, g, params, z)
    }

    pub fn dwcg_slots(&self, module: usize) -> DwcgSlots {
        self.layout.dwcg(module)
    }
}

/// Configuration plus trained or initial parameters.
#[derive(Clone, Debug)]
pub struct Model<T: Scalar = f32> {
    arch: Architecture,
    params: ParameterSet<T>,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with fan-in uniform weights and zero biases.
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        for s in param_specs(&config) {
            params.init(s.name, &s.shape, s.init, &mut rng)?;
        }
        Self::from_params(config, params)
    }

    pub fn from_params(config: ModelConfig, params: ParameterSet<T>) -> Result<Self> {
        let arch = Architecture::for_params(&config, &params)?;
        Ok(Model { arch, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.arch.config
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParameterSet<T> {
        self.params
    }

    /// Same parameter layout, different values.
    pub fn with_params(&self, params: ParameterSet<T>) -> Result<Self> {
        Self::from_params(self.config().clone(), params)
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            arch: self.arch.clone(),
            params: self.params.cast(),
        }
    }

    pub fn encode(&self, x: &Tensor<T>) -> Result<LatentVector<T>> {
        let mut g = Graph::new();
        let p = g.bind_constants(&self.params);
        let xv = g.constant(x.clone());
        let z = self.arch.encode_graph(&mut g, &p, xv)?;
        LatentVector::new(g.value(z).clone(), self.config().latent_len())
    }

    pub fn decode(&self, z: &LatentVector<T>) -> Result<Tensor<T>> {
        if z.len() != self.config().latent_len() {
            return Err(Error::dim("decode", z.values().shape(), &[self.config().latent_len(), 1]));
        }
        let mut g = Graph::new();
        let p = g.bind_constants(&self.params);
        let zv = g.constant(z.values().clone());
        let y = self.arch.decode_graph(&mut g, &p, zv)?;
        Ok(g.value(y).clone())
    }

    /// Runs DWCG module `module` on `z_in` (`[L, C]` or `[B, L, C]`).
    pub fn dwcg_forward(&self, module: usize, z_in: &Tensor<T>) -> Result<Tensor<T>> {
        if module >= self.config().dwcg_modules {
            return Err(Error::Config(format!("no DWCG module {module}")));
        }
        let mut g = Graph::new();
        let p = g.bind_constants(&self.params);
        let z = g.constant(z_in.clone());
        let y = dwcg(&mut g, z, &p, self.arch.dwcg_slots(module))?;
        Ok(g.value(y).clone())
    }

    pub fn count_params(&self) -> ParamCount {
        ParamCount {
            encoder: self.params.numel_with_prefix("enc."),
            decoder: self.params.numel_with_prefix("dec."),
        }
    }
}
