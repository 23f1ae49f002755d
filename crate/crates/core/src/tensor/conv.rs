use rayon::prelude::*;

use super::{Tensor5, Triple};
use crate::error::{Error, Result};

/// Weights and geometry of a grouped 3D convolution.
///
/// Weights are laid out `[c_out, c_in / groups, k, k, k]`. Output channel `o`
/// belongs to group `o / (c_out / groups)` and reads only that group's inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams {
    c_in: usize,
    c_out: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    groups: usize,
    weight: Vec<f32>,
    bias: Option<Vec<f32>>,
}

impl ConvParams {
    /// Stride-1 convolution with zero same-padding; `kernel` must be odd.
    pub fn same(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        groups: usize,
        weight: Vec<f32>,
        bias: Option<Vec<f32>>,
    ) -> Result<Self> {
        if kernel % 2 == 0 {
            return Err(Error::config(format!(
                "same-padded convolution needs an odd kernel, got {kernel}"
            )));
        }
        Self::strided(c_in, c_out, kernel, 1, kernel / 2, groups, weight, bias)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn strided(
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        groups: usize,
        weight: Vec<f32>,
        bias: Option<Vec<f32>>,
    ) -> Result<Self> {
        if kernel == 0 || stride == 0 {
            return Err(Error::config("kernel and stride must be positive"));
        }
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return Err(Error::config(format!(
                "groups={groups} must divide c_in={c_in} and c_out={c_out}"
            )));
        }
        let expected = c_out * (c_in / groups) * kernel * kernel * kernel;
        if weight.len() != expected {
            return Err(Error::config(format!(
                "weight has {} values, expected {expected}",
                weight.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != c_out {
                return Err(Error::config(format!(
                    "bias has {} values, expected {c_out}",
                    b.len()
                )));
            }
        }
        Ok(ConvParams {
            c_in,
            c_out,
            kernel,
            stride,
            padding,
            groups,
            weight,
            bias,
        })
    }

    pub fn pointwise(c_in: usize, c_out: usize, weight: Vec<f32>, bias: Option<Vec<f32>>) -> Result<Self> {
        Self::same(c_in, c_out, 1, 1, weight, bias)
    }

    pub fn zeros_same(c_in: usize, c_out: usize, kernel: usize, groups: usize, bias: bool) -> Result<Self> {
        let n = if groups == 0 || c_in % groups != 0 {
            0
        } else {
            c_out * (c_in / groups) * kernel.pow(3)
        };
        Self::same(c_in, c_out, kernel, groups, vec![0.0; n], bias.then(|| vec![0.0; c_out]))
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    /// Input channels read by each output channel.
    pub fn group_size(&self) -> usize {
        self.c_in / self.groups
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut [f32] {
        &mut self.weight
    }

    pub fn bias(&self) -> Option<&[f32]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [f32]> {
        self.bias.as_deref_mut()
    }

    #[inline]
    pub fn weight_index(&self, o: usize, ci_local: usize, kz: usize, ky: usize, kx: usize) -> usize {
        let k = self.kernel;
        (((o * self.group_size() + ci_local) * k + kz) * k + ky) * k + kx
    }

    /// Stored reals: weights plus bias.
    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.as_ref().map_or(0, Vec::len)
    }

    pub fn output_extent(&self, input: Triple) -> Result<Triple> {
        let mut out = [0; 3];
        for axis in 0..3 {
            let padded = input[axis] + 2 * self.padding;
            if padded < self.kernel {
                return Err(Error::dim(
                    super::SPATIAL_AXES[axis],
                    format!("extent {} smaller than kernel {}", input[axis], self.kernel),
                ));
            }
            out[axis] = (padded - self.kernel) / self.stride + 1;
        }
        Ok(out)
    }

    /// Multiply-accumulates for one modality at the given input extent.
    pub fn macs(&self, input: Triple) -> Result<u64> {
        let o = self.output_extent(input)?;
        Ok((super::volume(o) * self.weight.len()) as u64)
    }
}

/// Grouped 3D convolution applied independently to every modality with shared weights.
pub fn conv3d(t: &Tensor5, p: &ConvParams) -> Result<Tensor5> {
    let [m, c, d, h, w] = t.dims();
    if c != p.c_in {
        return Err(Error::config(format!(
            "convolution expects {} input channels, tensor has {c}",
            p.c_in
        )));
    }
    let [od, oh, ow] = p.output_extent([d, h, w])?;
    let ovol = od * oh * ow;
    let mut out = Tensor5::zeros([m, p.c_out, od, oh, ow]);
    if ovol == 0 {
        return Ok(out);
    }
    let pointwise = p.kernel == 1 && p.stride == 1 && p.padding == 0;
    let out_per_group = p.c_out / p.groups;
    let gs = p.group_size();
    out.data_mut()
        .par_chunks_mut(ovol)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (mi, o) = (plane / p.c_out, plane % p.c_out);
            let bias = p.bias.as_ref().map_or(0.0, |b| b[o]);
            dst.fill(bias);
            let g = o / out_per_group;
            for cl in 0..gs {
                let src = t.plane(mi, g * gs + cl);
                if pointwise {
                    let wv = p.weight[o * gs + cl];
                    for (a, b) in dst.iter_mut().zip(src) {
                        *a += wv * b;
                    }
                } else {
                    accumulate_plane(dst, src, p, o, cl, [d, h, w], [od, oh, ow]);
                }
            }
        });
    Ok(out)
}

/// Valid output index range `[lo, hi)` for one kernel tap along one axis.
#[inline]
fn tap_range(k: usize, pad: usize, stride: usize, n_in: usize, n_out: usize) -> (usize, usize) {
    // input = o * stride + k - pad must lie in [0, n_in)
    let lo = if k >= pad { 0 } else { (pad - k).div_ceil(stride) };
    let hi = if n_in + pad > k {
        ((n_in + pad - k - 1) / stride + 1).min(n_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

fn accumulate_plane(
    dst: &mut [f32],
    src: &[f32],
    p: &ConvParams,
    o: usize,
    cl: usize,
    [d, h, w]: Triple,
    [od, oh, ow]: Triple,
) {
    let (k, s, pad) = (p.kernel, p.stride, p.padding);
    for kz in 0..k {
        let (z0, z1) = tap_range(kz, pad, s, d, od);
        for ky in 0..k {
            let (y0, y1) = tap_range(ky, pad, s, h, oh);
            for kx in 0..k {
                let (x0, x1) = tap_range(kx, pad, s, w, ow);
                if x0 >= x1 {
                    continue;
                }
                let wv = p.weight[p.weight_index(o, cl, kz, ky, kx)];
                for oz in z0..z1 {
                    let iz = oz * s + kz - pad;
                    for oy in y0..y1 {
                        let iy = oy * s + ky - pad;
                        let orow = &mut dst[(oz * oh + oy) * ow..(oz * oh + oy + 1) * ow];
                        let irow = &src[(iz * h + iy) * w..(iz * h + iy + 1) * w];
                        let ix0 = x0 * s + kx - pad;
                        if s == 1 {
                            let n = x1 - x0;
                            for (a, b) in orow[x0..x1].iter_mut().zip(&irow[ix0..ix0 + n]) {
                                *a += wv * b;
                            }
                        } else {
                            for (j, a) in orow[x0..x1].iter_mut().enumerate() {
                                *a += wv * irow[ix0 + j * s];
                            }
                        }
                    }
                }
            }
        }
    }
}
