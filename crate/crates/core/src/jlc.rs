//! JL-guided convolution block.
//!
//! Parallel grouped convolutions with kernels `{1, 3, 5}` read the same input
//! and share one group size. Their full-width outputs are summed, normalized
//! per channel, passed through GELU and an optional pointwise expansion, and
//! added back to the input when the channel counts agree.

use crate::error::{Error, Result};
use crate::init::Initializer;
use crate::tensor::{conv3d, gelu_in_place, ConvParams, InstanceNorm, Tensor5};

pub const DEFAULT_KERNELS: [usize; 3] = [1, 3, 5];

/// Pointwise `C → e·C → C` expansion with GELU in between.
#[derive(Clone, Debug, PartialEq)]
pub struct Ffn {
    pub expand: ConvParams,
    pub project: ConvParams,
}

impl Ffn {
    pub fn new(expand: ConvParams, project: ConvParams) -> Result<Self> {
        if expand.kernel() != 1 || project.kernel() != 1 {
            return Err(Error::config("feed-forward layers must be pointwise"));
        }
        if expand.c_out() != project.c_in() || project.c_out() != expand.c_in() {
            return Err(Error::config(format!(
                "feed-forward shapes {}→{}→{} do not chain back to the input width",
                expand.c_in(),
                expand.c_out(),
                project.c_out()
            )));
        }
        Ok(Ffn { expand, project })
    }

    pub fn init(channels: usize, ratio: usize, init: &mut Initializer) -> Result<Self> {
        let hidden = channels * ratio;
        Ffn::new(init.pointwise(channels, hidden, true)?, init.pointwise(hidden, channels, true)?)
    }

    pub fn forward(&self, x: &Tensor5) -> Result<Tensor5> {
        let mut h = conv3d(x, &self.expand)?;
        gelu_in_place(&mut h);
        conv3d(&h, &self.project)
    }

    pub fn param_count(&self) -> usize {
        self.expand.param_count() + self.project.param_count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JlcBlockParams {
    branches: Vec<ConvParams>,
    norm: Option<InstanceNorm>,
    ffn: Option<Ffn>,
}

impl JlcBlockParams {
    /// Validates that all branches are same-padded, share widths and grouping.
    pub fn new(branches: Vec<ConvParams>, norm: Option<InstanceNorm>, ffn: Option<Ffn>) -> Result<Self> {
        let first = branches
            .first()
            .ok_or_else(|| Error::config("a JLC block needs at least one branch"))?;
        for b in &branches {
            if b.c_in() != first.c_in() || b.c_out() != first.c_out() || b.groups() != first.groups() {
                return Err(Error::config(format!(
                    "branch k={} is {}→{} with {} groups; expected {}→{} with {} groups",
                    b.kernel(),
                    b.c_in(),
                    b.c_out(),
                    b.groups(),
                    first.c_in(),
                    first.c_out(),
                    first.groups()
                )));
            }
            if b.stride() != 1 || b.padding() != b.kernel() / 2 || b.kernel() % 2 == 0 {
                return Err(Error::config(format!(
                    "branch k={} must be an odd same-padded stride-1 convolution",
                    b.kernel()
                )));
            }
        }
        let c_out = first.c_out();
        if let Some(n) = &norm {
            if n.channels() != c_out {
                return Err(Error::config("norm width differs from branch output"));
            }
        }
        if let Some(f) = &ffn {
            if f.expand.c_in() != c_out {
                return Err(Error::config("feed-forward width differs from branch output"));
            }
        }
        Ok(JlcBlockParams { branches, norm, ffn })
    }

    /// Seeded block with `group_size` input channels per group.
    pub fn init(
        c_in: usize,
        c_out: usize,
        group_size: usize,
        kernels: &[usize],
        expansion: Option<usize>,
        init: &mut Initializer,
    ) -> Result<Self> {
        let groups = groups_for(c_in, c_out, group_size)?;
        let branches = kernels
            .iter()
            .map(|&k| init.same(c_in, c_out, k, groups, true))
            .collect::<Result<Vec<_>>>()?;
        let ffn = match expansion {
            Some(r) if r > 0 => Some(Ffn::init(c_out, r, init)?),
            _ => None,
        };
        Self::new(branches, Some(init.instance_norm(c_out)), ffn)
    }

    pub fn branches(&self) -> &[ConvParams] {
        &self.branches
    }

    pub fn branches_mut(&mut self) -> &mut [ConvParams] {
        &mut self.branches
    }

    pub fn norm(&self) -> Option<&InstanceNorm> {
        self.norm.as_ref()
    }

    pub fn ffn(&self) -> Option<&Ffn> {
        self.ffn.as_ref()
    }

    pub fn ffn_mut(&mut self) -> Option<&mut Ffn> {
        self.ffn.as_mut()
    }

    pub fn c_in(&self) -> usize {
        self.branches[0].c_in()
    }

    pub fn c_out(&self) -> usize {
        self.branches[0].c_out()
    }

    pub fn group_size(&self) -> usize {
        self.branches[0].group_size()
    }

    pub fn residual(&self) -> bool {
        self.c_in() == self.c_out()
    }

    /// Sum of the raw branch outputs, before normalization.
    pub fn branch_sum(&self, x: &Tensor5) -> Result<Tensor5> {
        let mut acc: Option<Tensor5> = None;
        for b in &self.branches {
            let y = conv3d(x, b)?;
            match &mut acc {
                Some(a) => a.add_assign(&y)?,
                None => acc = Some(y),
            }
        }
        Ok(acc.expect("at least one branch"))
    }
}

/// Number of groups giving `group_size` input channels per group.
pub fn groups_for(c_in: usize, c_out: usize, group_size: usize) -> Result<usize> {
    if group_size == 0 || c_in % group_size != 0 {
        return Err(Error::config(format!(
            "group size {group_size} does not divide input width {c_in}"
        )));
    }
    let groups = c_in / group_size;
    if c_out % groups != 0 {
        return Err(Error::config(format!(
            "{groups} groups do not divide output width {c_out}"
        )));
    }
    Ok(groups)
}

/// Same padding lets every branch run on extents smaller than its kernel,
/// such as the `3³` deepest stage.
pub fn jlc_forward(x: &Tensor5, p: &JlcBlockParams) -> Result<Tensor5> {
    if x.channels() != p.c_in() {
        return Err(Error::dim(
            "channel",
            format!("block expects {} channels, input has {}", p.c_in(), x.channels()),
        ));
    }
    let mut h = p.branch_sum(x)?;
    if let Some(n) = &p.norm {
        n.forward_in_place(&mut h)?;
    }
    gelu_in_place(&mut h);
    if let Some(f) = &p.ffn {
        h = f.forward(&h)?;
    }
    if p.residual() {
        h.add_assign(x)?;
    }
    Ok(h)
}

/// Stored reals: branch weights and biases, norm affine, feed-forward.
pub fn jlc_param_count(p: &JlcBlockParams) -> usize {
    p.branches.iter().map(ConvParams::param_count).sum::<usize>()
        + p.norm.as_ref().map_or(0, InstanceNorm::param_count)
        + p.ffn.as_ref().map_or(0, Ffn::param_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero_block(c_in: usize, c_out: usize, gs: usize, expansion: Option<usize>) -> JlcBlockParams {
        let groups = groups_for(c_in, c_out, gs).unwrap();
        let branches = DEFAULT_KERNELS
            .iter()
            .map(|&k| ConvParams::zeros_same(c_in, c_out, k, groups, true).unwrap())
            .collect();
        let ffn = expansion.map(|r| {
            Ffn::new(
                ConvParams::zeros_same(c_out, c_out * r, 1, 1, true).unwrap(),
                ConvParams::zeros_same(c_out * r, c_out, 1, 1, true).unwrap(),
            )
            .unwrap()
        });
        JlcBlockParams::new(branches, Some(InstanceNorm::identity(c_out)), ffn).unwrap()
    }

    #[test]
    fn zero_weights_reduce_to_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor5::from_fn([1, 8, 5, 5, 5], |_| rng.gen_range(-1.0..1.0));
        for e in [None, Some(3)] {
            let p = zero_block(8, 8, 4, e);
            assert_eq!(jlc_forward(&x, &p).unwrap(), x);
        }
    }

    #[test]
    fn depthwise_identity_branch() {
        let x = Tensor5::from_fn([1, 4, 5, 5, 5], |i| (i[1] * 100 + i[2] * 10 + i[4]) as f32);
        let mut p = zero_block(4, 4, 1, None);
        p.branches_mut()[0].weight_mut().fill(1.0);
        assert_eq!(p.branches()[0].groups(), 4);
        assert_eq!(p.branch_sum(&x).unwrap(), x);
    }

    #[test]
    fn param_counts() {
        let single = JlcBlockParams::new(vec![ConvParams::zeros_same(8, 8, 1, 8, false).unwrap()], None, None).unwrap();
        assert_eq!(jlc_param_count(&single), 8);
        let full = JlcBlockParams::new(vec![ConvParams::zeros_same(8, 8, 3, 1, false).unwrap()], None, None).unwrap();
        assert_eq!(jlc_param_count(&full), 1728);
    }

    #[test]
    fn grouping_scales_weight_count() {
        for g in [1usize, 2, 4, 8, 16] {
            let p = zero_block(16, 16, 16 / g, None);
            let weights: usize = p.branches().iter().map(|b| b.weight().len()).sum();
            assert_eq!(weights * g, 16 * 16 * (1 + 27 + 125));
        }
    }

    #[test]
    fn rejects_mismatched_geometry() {
        assert!(groups_for(16, 12, 2).is_err());
        assert!(groups_for(16, 16, 3).is_err());
        let p = zero_block(8, 8, 4, None);
        assert!(jlc_forward(&Tensor5::zeros([1, 4, 6, 6, 6]), &p).is_err());
        // same padding keeps a 3³ extent valid for the 5³ branch
        let tiny = Tensor5::filled([1, 8, 3, 3, 3], 0.5);
        assert_eq!(jlc_forward(&tiny, &p).unwrap(), tiny);
        let b1 = ConvParams::zeros_same(8, 8, 1, 2, false).unwrap();
        let b3 = ConvParams::zeros_same(8, 8, 3, 4, false).unwrap();
        assert!(JlcBlockParams::new(vec![b1, b3], None, None).is_err());
    }
}
