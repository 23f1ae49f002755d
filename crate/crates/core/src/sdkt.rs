//! Gram-matrix feature matching.
//!
//! Every function is generic over the float type so gradients can be checked
//! in 64-bit while the network runs in 32-bit.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::Tensor5;

/// A `C × N` feature matrix: one row per channel, one column per voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    channels: usize,
    voxels: usize,
    data: Vec<T>,
}

impl<T: Float> FeatureMap<T> {
    pub fn new(channels: usize, voxels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 || voxels == 0 || data.len() != channels * voxels {
            return Err(Error::dim(
                "feature",
                format!("{} values for {channels} channels of {voxels} voxels", data.len()),
            ));
        }
        Ok(FeatureMap { channels, voxels, data })
    }

    pub fn zeros(channels: usize, voxels: usize) -> Self {
        FeatureMap {
            channels,
            voxels,
            data: vec![T::zero(); channels * voxels],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn voxels(&self) -> usize {
        self.voxels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn row(&self, c: usize) -> &[T] {
        &self.data[c * self.voxels..(c + 1) * self.voxels]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        FeatureMap {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }
}

impl<T: Copy> FeatureMap<T> {
    fn column(&self, i: usize) -> impl Iterator<Item = T> + '_ {
        (0..self.channels).map(move |c| self.data[c * self.voxels + i])
    }
}

impl FeatureMap<f32> {
    /// Treats every modality of `t` as extra channels.
    pub fn from_tensor(t: &Tensor5) -> Self {
        FeatureMap {
            channels: t.modalities() * t.channels(),
            voxels: t.voxels(),
            data: t.data().to_vec(),
        }
    }

    pub fn to_f64(&self) -> FeatureMap<f64> {
        FeatureMap {
            channels: self.channels,
            voxels: self.voxels,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

impl FeatureMap<f64> {
    pub fn to_f32(&self) -> FeatureMap<f32> {
        FeatureMap {
            channels: self.channels,
            voxels: self.voxels,
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}

/// Symmetric `C × C` matrix `X·Xᵀ / (C·N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<T> {
    pub size: usize,
    pub data: Vec<T>,
}

impl<T: Float> GramMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.size + j]
    }

    pub fn trace(&self) -> T {
        (0..self.size).fold(T::zero(), |acc, i| acc + self.get(i, i))
    }

    /// Squared Frobenius distance to `other`.
    pub fn distance_sq(&self, other: &GramMatrix<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
    }
}

fn dot<T: Float>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn from_usize<T: Float>(n: usize) -> T {
    T::from(n).expect("count representable as float")
}

pub fn gram<T: Float>(x: &FeatureMap<T>) -> GramMatrix<T> {
    let c = x.channels;
    let norm = from_usize::<T>(c * x.voxels);
    let mut data = vec![T::zero(); c * c];
    for i in 0..c {
        for j in i..c {
            let v = dot(x.row(i), x.row(j)) / norm;
            data[i * c + j] = v;
            data[j * c + i] = v;
        }
    }
    GramMatrix { size: c, data }
}

fn check_teachers<T: Float>(seg: &FeatureMap<T>, teachers: &[(FeatureMap<T>, T)]) -> Result<()> {
    for (i, (t, _)) in teachers.iter().enumerate() {
        if t.channels != seg.channels {
            return Err(Error::dim(
                "channel",
                format!("teacher {i} has {} channels, student has {}", t.channels, seg.channels),
            ));
        }
    }
    Ok(())
}

/// `Σ_m w_m ‖GM(T_m) − GM(S)‖²_F`.
pub fn sdkt_loss<T: Float>(seg: &FeatureMap<T>, teachers: &[(FeatureMap<T>, T)]) -> Result<T> {
    check_teachers(seg, teachers)?;
    let g = gram(seg);
    Ok(teachers
        .iter()
        .fold(T::zero(), |acc, (t, w)| acc + *w * g.distance_sq(&gram(t))))
}

/// `∂L/∂S = Σ_m w_m · 4/(C·N) · (GM(S) − GM(T_m)) · S`.
pub fn sdkt_grad<T: Float>(seg: &FeatureMap<T>, teachers: &[(FeatureMap<T>, T)]) -> Result<FeatureMap<T>> {
    check_teachers(seg, teachers)?;
    let c = seg.channels;
    let g = gram(seg);
    let scale = from_usize::<T>(4) / from_usize::<T>(c * seg.voxels);
    // accumulate the weighted Gram difference first; the product with S is linear in it
    let mut diff = vec![T::zero(); c * c];
    for (t, w) in teachers {
        let gt = gram(t);
        for (d, (&a, &b)) in diff.iter_mut().zip(g.data.iter().zip(&gt.data)) {
            *d = *d + *w * scale * (a - b);
        }
    }
    let mut out = FeatureMap::zeros(c, seg.voxels);
    for i in 0..c {
        let dst = &mut out.data[i * seg.voxels..(i + 1) * seg.voxels];
        for j in 0..c {
            let coef = diff[i * c + j];
            if coef == T::zero() {
                continue;
            }
            for (o, &s) in dst.iter_mut().zip(seg.row(j)) {
                *o = *o + coef * s;
            }
        }
    }
    Ok(out)
}

/// Biased squared MMD with kernel `k(u, v) = (uᵀv)²`, voxels as samples.
///
/// Evaluated as the explicit double sum over sample pairs, `O(N²·C)`.
pub fn mmd_poly2<T: Float>(x: &FeatureMap<T>, y: &FeatureMap<T>) -> Result<T> {
    if x.channels != y.channels {
        return Err(Error::dim(
            "channel",
            format!("samples have {} and {} channels", x.channels, y.channels),
        ));
    }
    let cols = |f: &FeatureMap<T>| -> Vec<Vec<T>> { (0..f.voxels).map(|i| f.column(i).collect()).collect() };
    let (xs, ys) = (cols(x), cols(y));
    let mean_kernel = |a: &[Vec<T>], b: &[Vec<T>]| {
        let sum = a.iter().fold(T::zero(), |acc, u| {
            b.iter().fold(acc, |acc, v| {
                let k = dot(u, v);
                acc + k * k
            })
        });
        sum / from_usize::<T>(a.len() * b.len())
    };
    let two = from_usize::<T>(2);
    Ok(mean_kernel(&xs, &xs) + mean_kernel(&ys, &ys) - two * mean_kernel(&xs, &ys))
}
