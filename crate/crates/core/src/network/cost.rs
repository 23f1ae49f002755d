//! Parameter and operation accounting.
//!
//! Convolutions cost two operations per multiply-accumulate plus one per bias
//! add; norms, activations and tensor additions one per element; the
//! projections and products of a paired-window attention layer are costed by
//! the closed form in [`crate::pwa::pwa_flops_multimodal`].

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jlc::{Ffn, JlcBlockParams};
use crate::tensor::{volume, ConvParams, Triple};

/// Cost of one named part of the network.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCost {
    pub name: String,
    pub params: u64,
    pub conv_flops: u64,
    pub attention_flops: u64,
    pub elementwise_flops: u64,
}

impl StageCost {
    pub fn new(name: impl Into<String>) -> Self {
        StageCost {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn flops(&self) -> u64 {
        self.conv_flops + self.attention_flops + self.elementwise_flops
    }

    /// Adds a convolution applied to `modalities` inputs of extent `input`.
    pub fn conv(&mut self, p: &ConvParams, input: Triple, modalities: usize) -> Result<Triple> {
        self.params += p.param_count() as u64;
        self.conv_flops += modalities as u64 * conv_flops(p, input)?;
        p.output_extent(input)
    }

    /// Adds `count` element-wise passes over `channels × extent × modalities` values.
    pub fn elementwise(&mut self, count: usize, channels: usize, extent: Triple, modalities: usize) {
        self.elementwise_flops += (count * channels * volume(extent) * modalities) as u64;
    }

    pub fn ffn(&mut self, f: &Ffn, extent: Triple, modalities: usize) -> Result<()> {
        self.conv(&f.expand, extent, modalities)?;
        self.elementwise(1, f.expand.c_out(), extent, modalities);
        self.conv(&f.project, extent, modalities)?;
        Ok(())
    }

    /// Branches, their sum, norm, GELU, feed-forward and residual of one JLC block.
    pub fn jlc(&mut self, p: &JlcBlockParams, extent: Triple) -> Result<()> {
        for b in p.branches() {
            self.conv(b, extent, 1)?;
        }
        let c = p.c_out();
        self.elementwise(p.branches().len() - 1, c, extent, 1);
        if let Some(n) = p.norm() {
            self.params += n.param_count() as u64;
            self.elementwise(1, c, extent, 1);
        }
        self.elementwise(1, c, extent, 1);
        if let Some(f) = p.ffn() {
            self.ffn(f, extent, 1)?;
        }
        if p.residual() {
            self.elementwise(1, c, extent, 1);
        }
        Ok(())
    }
}

/// `2·MAC` plus one add per biased output value, for one modality.
pub fn conv_flops(p: &ConvParams, input: Triple) -> Result<u64> {
    let out = volume(p.output_extent(input)?) as u64;
    let bias = if p.bias().is_some() { p.c_out() as u64 * out } else { 0 };
    Ok(2 * p.macs(input)? + bias)
}

/// Per-part costs of a network at one input extent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub extent: Triple,
    pub stages: Vec<StageCost>,
}

impl CostReport {
    pub fn params(&self) -> u64 {
        self.stages.iter().map(|s| s.params).sum()
    }

    pub fn flops(&self) -> u64 {
        self.stages.iter().map(StageCost::flops).sum()
    }

    pub fn attention_flops(&self) -> u64 {
        self.stages.iter().map(|s| s.attention_flops).sum()
    }

    /// Fraction of the total operations spent in each part.
    pub fn shares(&self) -> Vec<(String, f64)> {
        let total = self.flops().max(1) as f64;
        self.stages
            .iter()
            .map(|s| (s.name.clone(), s.flops() as f64 / total))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ConvParams;

    #[test]
    fn empty_report_is_zero() {
        let r = CostReport::default();
        assert_eq!((r.params(), r.flops()), (0, 0));
    }

    #[test]
    fn pointwise_closed_form() {
        let mut s = StageCost::new("pw");
        let p = ConvParams::zeros_same(16, 16, 1, 1, true).unwrap();
        s.conv(&p, [24; 3], 1).unwrap();
        assert_eq!(s.params, 16 * 16 + 16);
        assert_eq!(s.flops(), 2 * 16 * 16 * 13824 + 16 * 13824);
        let no_bias = ConvParams::zeros_same(16, 16, 1, 1, false).unwrap();
        assert_eq!(conv_flops(&no_bias, [24; 3]).unwrap(), 2 * 16 * 16 * 13824);
    }

    #[test]
    fn strided_and_grouped() {
        // 8→16, k=2, s=2, 4 groups over 8³: 4³ outputs, 16·2·8 weights each
        let p = ConvParams::strided(8, 16, 2, 2, 0, 4, vec![0.0; 16 * 2 * 8], None).unwrap();
        assert_eq!(conv_flops(&p, [8; 3]).unwrap(), 2 * 64 * 256);
    }
}
