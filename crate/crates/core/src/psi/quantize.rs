use std::f64::consts::TAU;

/// Uniform `K`-bit phase grid `{0, Δ, …, (2^K − 1)Δ}` with `Δ = 2π / 2^K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuantizationSpec {
    pub bits: u8,
}

impl QuantizationSpec {
    pub fn new(bits: u8) -> Self {
        assert!((1..=16).contains(&bits), "bits must be in 1..=16");
        QuantizationSpec { bits }
    }

    pub fn levels(self) -> u32 {
        1 << self.bits
    }

    pub fn step(self) -> f64 {
        TAU / self.levels() as f64
    }

    /// Radians of grid index `i`.
    pub fn phase(self, index: u32) -> f64 {
        index as f64 * self.step()
    }

    /// Normalised value `i / 2^K`, exact in `f32` for `K ≤ 16`.
    pub fn normalized(self, index: u32) -> f32 {
        index as f32 / self.levels() as f32
    }

    /// Grid index of a normalised value, if it lies exactly on the grid.
    pub fn index_of_normalized(self, value: f32) -> Option<u32> {
        let scaled = value as f64 * self.levels() as f64;
        let i = scaled.round();
        (i >= 0.0 && i < self.levels() as f64 && i == scaled).then_some(i as u32)
    }
}

/// Nearest grid index after wrapping into `[0, 2π)`. Ties round up and
/// index `2^K` wraps to 0.
pub fn quantize_index(theta: f64, spec: QuantizationSpec) -> u32 {
    let wrapped = theta.rem_euclid(TAU);
    let i = (wrapped / spec.step() + 0.5).floor() as u32;
    i % spec.levels()
}

pub fn quantize(theta: f64, spec: QuantizationSpec) -> f64 {
    spec.phase(quantize_index(theta, spec))
}
