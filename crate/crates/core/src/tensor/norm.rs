use rayon::prelude::*;

use super::Tensor5;
use crate::error::{Error, Result};

const EPS: f32 = 1e-5;

/// Normalizes across the channel axis independently at every voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl LayerNorm {
    pub fn identity(channels: usize) -> Self {
        LayerNorm {
            weight: vec![1.0; channels],
            bias: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.weight.len()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, t: &Tensor5) -> Result<Tensor5> {
        let c = t.channels();
        check_channels(c, self.channels())?;
        let v = t.voxels();
        let mut out = Tensor5::zeros(t.dims());
        let src = t.data();
        out.data_mut()
            .par_chunks_mut(c * v)
            .enumerate()
            .for_each(|(mi, dst)| {
                let base = &src[mi * c * v..(mi + 1) * c * v];
                let mut mean = vec![0.0f32; v];
                let mut var = vec![0.0f32; v];
                for ci in 0..c {
                    for (a, b) in mean.iter_mut().zip(&base[ci * v..(ci + 1) * v]) {
                        *a += b;
                    }
                }
                let inv_c = 1.0 / c as f32;
                mean.iter_mut().for_each(|a| *a *= inv_c);
                for ci in 0..c {
                    for ((s, b), mu) in var.iter_mut().zip(&base[ci * v..(ci + 1) * v]).zip(&mean) {
                        let d = b - mu;
                        *s += d * d;
                    }
                }
                var.iter_mut().for_each(|s| *s = 1.0 / (*s * inv_c + EPS).sqrt());
                for ci in 0..c {
                    let (g, b) = (self.weight[ci], self.bias[ci]);
                    let plane = &mut dst[ci * v..(ci + 1) * v];
                    for (((o, x), mu), inv) in plane
                        .iter_mut()
                        .zip(&base[ci * v..(ci + 1) * v])
                        .zip(&mean)
                        .zip(&var)
                    {
                        *o = (x - mu) * inv * g + b;
                    }
                }
            });
        Ok(out)
    }
}

/// Per-channel normalization over the spatial extent of each modality.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceNorm {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl InstanceNorm {
    pub fn identity(channels: usize) -> Self {
        InstanceNorm {
            weight: vec![1.0; channels],
            bias: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.weight.len()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward_in_place(&self, t: &mut Tensor5) -> Result<()> {
        let c = t.channels();
        check_channels(c, self.channels())?;
        let v = t.voxels();
        if v == 0 {
            return Ok(());
        }
        t.data_mut()
            .par_chunks_mut(v)
            .enumerate()
            .for_each(|(plane, data)| {
                let ci = plane % c;
                let n = data.len() as f64;
                let mean = data.iter().map(|&x| x as f64).sum::<f64>() / n;
                let var = data.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
                let inv = 1.0 / (var + EPS as f64).sqrt();
                let (g, b) = (self.weight[ci] as f64, self.bias[ci] as f64);
                for x in data.iter_mut() {
                    *x = ((*x as f64 - mean) * inv * g + b) as f32;
                }
            });
        Ok(())
    }
}

fn check_channels(found: usize, expected: usize) -> Result<()> {
    if found != expected {
        return Err(Error::config(format!(
            "normalization built for {expected} channels, tensor has {found}"
        )));
    }
    Ok(())
}

/// tanh approximation of GELU.
#[inline]
pub fn gelu(x: f32) -> f32 {
    const K: f32 = 0.797_884_6; // sqrt(2/pi)
    0.5 * x * (1.0 + (K * (x + 0.044_715 * x * x * x)).tanh())
}

pub fn gelu_in_place(t: &mut Tensor5) {
    t.data_mut().par_iter_mut().for_each(|v| *v = gelu(*v));
}
