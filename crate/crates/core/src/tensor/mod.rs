//! Dense rank-5 tensor substrate.
//!
//! Every feature map is a [`Tensor5`] with axes `[modality, channel, depth,
//! height, width]`, stored contiguously with the modality axis slowest and the
//! width axis fastest. Spatial triples are always ordered `(depth, height,
//! width)`.

mod conv;
mod matrix;
mod norm;
mod pool;
mod window;

pub use conv::{conv3d, ConvParams};
pub use matrix::{matmul, matmul_counted, softmax_in_place, softmax_rows, Matrix};
pub use norm::{gelu, gelu_in_place, InstanceNorm, LayerNorm};
pub use pool::{max_pool3, unpool_broadcast};
pub use window::{window_partition, window_reverse};

use crate::error::{Error, Result};

/// Spatial triple ordered `(depth, height, width)`.
pub type Triple = [usize; 3];

pub(crate) const SPATIAL_AXES: [&str; 3] = ["depth", "height", "width"];

pub fn volume(t: Triple) -> usize {
    t[0] * t[1] * t[2]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor5 {
    dims: [usize; 5],
    data: Vec<f32>,
}

impl Tensor5 {
    pub fn zeros(dims: [usize; 5]) -> Self {
        Tensor5 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 5], value: f32) -> Self {
        Tensor5 {
            dims,
            data: vec![value; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 5], data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::dim(
                "data",
                format!("{} values supplied for dims {:?} ({expected})", data.len(), dims),
            ));
        }
        Ok(Tensor5 { dims, data })
    }

    /// Builds a tensor by evaluating `f` at every `[m, c, z, y, x]` index in layout order.
    pub fn from_fn(dims: [usize; 5], mut f: impl FnMut([usize; 5]) -> f32) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for m in 0..dims[0] {
            for c in 0..dims[1] {
                for z in 0..dims[2] {
                    for y in 0..dims[3] {
                        for x in 0..dims[4] {
                            data.push(f([m, c, z, y, x]));
                        }
                    }
                }
            }
        }
        Tensor5 { dims, data }
    }

    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn modalities(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn spatial(&self) -> Triple {
        [self.dims[2], self.dims[3], self.dims[4]]
    }

    /// Number of voxels per channel plane.
    pub fn voxels(&self) -> usize {
        self.dims[2] * self.dims[3] * self.dims[4]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 5]) -> usize {
        let [_, c, d, h, w] = self.dims;
        (((idx[0] * c + idx[1]) * d + idx[2]) * h + idx[3]) * w + idx[4]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 5]) -> f32 {
        self.data[self.offset(idx)]
    }

    /// Contiguous spatial plane of channel `c` in modality `m`.
    pub fn plane(&self, m: usize, c: usize) -> &[f32] {
        let v = self.voxels();
        let start = (m * self.dims[1] + c) * v;
        &self.data[start..start + v]
    }

    pub fn plane_mut(&mut self, m: usize, c: usize) -> &mut [f32] {
        let v = self.voxels();
        let start = (m * self.dims[1] + c) * v;
        &mut self.data[start..start + v]
    }

    /// Reinterprets the buffer under new dims with the same element count.
    pub fn reshape(self, dims: [usize; 5]) -> Result<Self> {
        Tensor5::from_vec(dims, self.data)
    }

    /// Copy of modality `m` as a single-modality tensor.
    pub fn modality(&self, m: usize) -> Tensor5 {
        let per = self.dims[1] * self.voxels();
        let mut dims = self.dims;
        dims[0] = 1;
        Tensor5 {
            dims,
            data: self.data[m * per..(m + 1) * per].to_vec(),
        }
    }

    /// Stacks single-modality tensors of identical shape along the modality axis.
    pub fn stack_modalities(parts: &[Tensor5]) -> Result<Tensor5> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("modality", "cannot stack zero tensors"))?;
        let mut dims = first.dims;
        dims[0] = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.dims[1..] != first.dims[1..] {
                return Err(Error::dim(
                    "modality",
                    format!("shape {:?} does not match {:?}", p.dims, first.dims),
                ));
            }
            dims[0] += p.dims[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor5 { dims, data })
    }

    /// Channel range `[start, end)` of every modality.
    pub fn channel_slice(&self, start: usize, end: usize) -> Result<Tensor5> {
        if start > end || end > self.dims[1] {
            return Err(Error::dim(
                "channel",
                format!("slice {start}..{end} of {} channels", self.dims[1]),
            ));
        }
        let v = self.voxels();
        let mut dims = self.dims;
        dims[1] = end - start;
        let mut data = Vec::with_capacity(dims.iter().product());
        for m in 0..self.dims[0] {
            let base = m * self.dims[1] * v;
            data.extend_from_slice(&self.data[base + start * v..base + end * v]);
        }
        Ok(Tensor5 { dims, data })
    }

    /// Concatenates along the channel axis; modality counts and extents must agree.
    pub fn concat_channels(parts: &[&Tensor5]) -> Result<Tensor5> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("channel", "cannot concatenate zero tensors"))?;
        for p in parts {
            if p.dims[0] != first.dims[0] || p.spatial() != first.spatial() {
                return Err(Error::dim(
                    "channel",
                    format!("cannot concatenate {:?} with {:?}", p.dims, first.dims),
                ));
            }
        }
        let mut dims = first.dims;
        dims[1] = parts.iter().map(|p| p.dims[1]).sum();
        let v = first.voxels();
        let mut data = Vec::with_capacity(dims.iter().product());
        for m in 0..dims[0] {
            for p in parts {
                let per = p.dims[1] * v;
                data.extend_from_slice(&p.data[m * per..(m + 1) * per]);
            }
        }
        Ok(Tensor5 { dims, data })
    }

    /// Moves the modality axis into the channel axis: `[M, C, ...]` to `[1, M*C, ...]`.
    pub fn fold_modalities(self) -> Tensor5 {
        let [m, c, d, h, w] = self.dims;
        Tensor5 {
            dims: [1, m * c, d, h, w],
            data: self.data,
        }
    }

    /// Sums over the modality axis, producing a single-modality tensor.
    pub fn sum_modalities(&self) -> Tensor5 {
        let per = self.dims[1] * self.voxels();
        let mut out = vec![0.0f32; per];
        for chunk in self.data.chunks_exact(per) {
            for (o, v) in out.iter_mut().zip(chunk) {
                *o += v;
            }
        }
        let mut dims = self.dims;
        dims[0] = 1;
        Tensor5 { dims, data: out }
    }

    pub fn add(&self, other: &Tensor5) -> Result<Tensor5> {
        let mut out = self.clone();
        out.add_assign(other)?;
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &Tensor5) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::dim(
                "shape",
                format!("cannot add {:?} and {:?}", self.dims, other.dims),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    /// Adds a single-modality tensor to every modality.
    pub fn add_broadcast_modalities(&mut self, other: &Tensor5) -> Result<()> {
        if other.dims[0] != 1 || other.dims[1..] != self.dims[1..] {
            return Err(Error::dim(
                "shape",
                format!("cannot broadcast {:?} onto {:?}", other.dims, self.dims),
            ));
        }
        let per = other.data.len();
        for chunk in self.data.chunks_exact_mut(per) {
            for (a, b) in chunk.iter_mut().zip(&other.data) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn map(mut self, f: impl Fn(f32) -> f32) -> Tensor5 {
        for v in &mut self.data {
            *v = f(*v);
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor5) -> f32 {
        assert_eq!(self.dims, other.dims, "max_abs_diff on different shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Rearranges `r³` channel groups into space: `[M, C·r³, D, H, W]` to `[M, C, rD, rH, rW]`.
///
/// Output channel `c` at sub-position `(i, j, k)` reads input channel `c·r³ + i·r² + j·r + k`.
pub fn voxel_shuffle(t: &Tensor5, r: usize) -> Result<Tensor5> {
    let [m, c, d, h, w] = t.dims();
    let r3 = r * r * r;
    if r == 0 || c % r3 != 0 {
        return Err(Error::dim(
            "channel",
            format!("{c} channels not divisible by shuffle factor {r}^3"),
        ));
    }
    let oc = c / r3;
    let (od, oh, ow) = (d * r, h * r, w * r);
    let mut out = Tensor5::zeros([m, oc, od, oh, ow]);
    for mi in 0..m {
        for co in 0..oc {
            let dst = out.plane_mut(mi, co);
            for i in 0..r {
                for j in 0..r {
                    for k in 0..r {
                        let src = t.plane(mi, co * r3 + (i * r + j) * r + k);
                        for z in 0..d {
                            for y in 0..h {
                                let row = &src[(z * h + y) * w..(z * h + y + 1) * w];
                                let base = ((z * r + i) * oh + y * r + j) * ow + k;
                                for (x, &v) in row.iter().enumerate() {
                                    dst[base + x * r] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn check_divisible(extent: Triple, block: Triple) -> Result<()> {
    for axis in 0..3 {
        if block[axis] == 0 || extent[axis] % block[axis] != 0 {
            return Err(Error::dim(
                SPATIAL_AXES[axis],
                format!("extent {} not divisible by {}", extent[axis], block[axis]),
            ));
        }
    }
    Ok(())
}
