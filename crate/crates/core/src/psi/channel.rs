use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::LatentVector;
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelMode {
    Ideal,
    Awgn,
    RayleighAwgn,
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(ChannelMode::Ideal),
            "awgn" => Ok(ChannelMode::Awgn),
            "rayleigh-awgn" => Ok(ChannelMode::RayleighAwgn),
            _ => Err(Error::Config(format!(
                "unknown channel mode `{s}` (expected ideal, awgn or rayleigh-awgn)"
            ))),
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Ideal => "ideal",
            ChannelMode::Awgn => "awgn",
            ChannelMode::RayleighAwgn => "rayleigh-awgn",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    pub mode: ChannelMode,
    pub snr_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            mode: ChannelMode::Ideal,
            snr_db: 10.0,
        }
    }
}

impl ChannelConfig {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn awgn(snr_db: f64) -> Self {
        ChannelConfig { mode: ChannelMode::Awgn, snr_db }
    }

    pub fn rayleigh_awgn(snr_db: f64) -> Self {
        ChannelConfig { mode: ChannelMode::RayleighAwgn, snr_db }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != ChannelMode::Ideal && self.snr_db.is_nan() {
            return Err(Error::Config("channel.snr_db must be a number".into()));
        }
        Ok(())
    }
}

/// One channel use: `y = h ⊙ z + w`. `None` stands for `h = 1` or `w = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization<T> {
    pub gains: Option<Tensor<T>>,
    pub noise: Option<Tensor<T>>,
}

impl<T: Scalar> ChannelRealization<T> {
    pub fn apply(&self, z: &Tensor<T>) -> Tensor<T> {
        let mut y = z.clone();
        if let Some(h) = &self.gains {
            for (v, &g) in y.data_mut().iter_mut().zip(h.data()) {
                *v *= g;
            }
        }
        if let Some(w) = &self.noise {
            y.axpy(T::ONE, w);
        }
        y
    }
}

/// Draws fading gains and noise for transmitting `z`. Noise power is
/// `mean(z²) / 10^(snr/10)` over the whole tensor.
pub fn realize_channel<T: Scalar, R: Rng + ?Sized>(
    z: &Tensor<T>,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> ChannelRealization<T> {
    if cfg.mode == ChannelMode::Ideal {
        return ChannelRealization { gains: None, noise: None };
    }
    let gains = (cfg.mode == ChannelMode::RayleighAwgn).then(|| {
        Tensor::from_fn(z.shape().to_vec(), |_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            T::from_f64(((re * re + im * im) / 2.0).sqrt())
        })
    });
    let power = z.data().iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>() / z.numel() as f64;
    let sigma = (power / 10f64.powf(cfg.snr_db / 10.0)).sqrt();
    let noise = Tensor::from_fn(z.shape().to_vec(), |_| T::from_f64(sigma * rng.sample::<f64, _>(StandardNormal)));
    ChannelRealization {
        gains,
        noise: Some(noise),
    }
}

pub fn apply_channel<T: Scalar, R: Rng + ?Sized>(
    z: &LatentVector<T>,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> LatentVector<T> {
    if cfg.mode == ChannelMode::Ideal {
        return z.clone();
    }
    let y = realize_channel(z.values(), cfg, rng).apply(z.values());
    z.with_data(y.into_data())
}
