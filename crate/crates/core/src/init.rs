//! Seeded parameter initialization: truncated normal weights, zero biases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{ConvParams, InstanceNorm, LayerNorm};
use crate::Result;

pub const INIT_STD: f32 = 0.02;

pub struct Initializer {
    rng: ChaCha8Rng,
    normal: Normal<f32>,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, INIT_STD).expect("valid std"),
        }
    }

    /// Normal(0, σ) samples redrawn until they fall within ±2σ.
    pub fn trunc_normal(&mut self, n: usize) -> Vec<f32> {
        (0..n)
            .map(|_| loop {
                let v = self.normal.sample(&mut self.rng);
                if v.abs() <= 2.0 * INIT_STD {
                    break v;
                }
            })
            .collect()
    }

    pub fn conv(
        &mut self,
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        bias: bool,
    ) -> Result<ConvParams> {
        let n = if groups > 0 && c_in % groups == 0 {
            c_out * (c_in / groups) * kernel.pow(3)
        } else {
            0
        };
        let weight = self.trunc_normal(n);
        ConvParams::strided(c_in, c_out, kernel, stride, padding, groups, weight, bias.then(|| vec![0.0; c_out]))
    }

    pub fn same(&mut self, c_in: usize, c_out: usize, kernel: usize, groups: usize, bias: bool) -> Result<ConvParams> {
        if kernel % 2 == 0 {
            // surface the odd-kernel error from the validating constructor
            return ConvParams::zeros_same(c_in, c_out, kernel, groups, bias);
        }
        self.conv(c_in, c_out, kernel, 1, kernel / 2, groups, bias)
    }

    pub fn pointwise(&mut self, c_in: usize, c_out: usize, bias: bool) -> Result<ConvParams> {
        self.conv(c_in, c_out, 1, 1, 0, 1, bias)
    }

    pub fn layer_norm(&mut self, channels: usize) -> LayerNorm {
        LayerNorm::identity(channels)
    }

    pub fn instance_norm(&mut self, channels: usize) -> InstanceNorm {
        InstanceNorm::identity(channels)
    }
}
