//! Binary volume files and seeded synthetic PET/CT-like volumes.
//!
//! A volume file is the magic `VXSG`, a little-endian `u32` version (1), the
//! five dimensions `M, C, D, H, W` as little-endian `u32`, then the payload as
//! little-endian `f32` in `[M, C, D, H, W]` order with `W` fastest.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tensor5, Triple, SPATIAL_AXES};

pub const MAGIC: [u8; 4] = *b"VXSG";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 5 * 4;

pub fn encode_volume(t: &Tensor5) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for d in t.dims() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_volume(bytes: &[u8]) -> Result<Tensor5> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("four bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("four bytes"));
    let version = word(0);
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let dims = [1, 2, 3, 4, 5].map(|i| word(i) as usize);
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Validation(format!("dimensions {dims:?} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < count {
        return Err(Error::Truncated {
            expected: count,
            found: payload.len(),
        });
    }
    if payload.len() > count {
        return Err(Error::Validation(format!(
            "{} trailing bytes after a {count}-byte payload",
            payload.len() - count
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("four bytes")))
        .collect();
    Tensor5::from_vec(dims, data)
}

pub fn write_volume(path: &Path, t: &Tensor5) -> Result<()> {
    if !t.is_finite() {
        return Err(Error::Validation("refusing to write a tensor with non-finite values".into()));
    }
    std::fs::write(path, encode_volume(t)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_volume(path: &Path) -> Result<Tensor5> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_volume(&bytes)
}

/// Parameters of [`gen_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub extent: Triple,
    pub modalities: usize,
    pub blobs: usize,
    /// Blob radius in voxels; a voxel belongs to a blob when its squared distance to the centre is at most `radius²`.
    pub radius: usize,
    /// Peak uptake of a hotspot in the second modality.
    pub intensity: f32,
    pub noise_sigma: f32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            extent: [96; 3],
            modalities: 2,
            blobs: 3,
            radius: 5,
            intensity: 4.0,
            noise_sigma: 0.1,
        }
    }
}

/// Lattice points within `radius` of a voxel centre.
pub fn ball_voxel_count(radius: usize) -> usize {
    let r = radius as i64;
    let mut n = 0;
    for z in -r..=r {
        for y in -r..=r {
            for x in -r..=r {
                n += (x * x + y * y + z * z <= r * r) as usize;
            }
        }
    }
    n
}

/// Seeded volumes `[M, 1, D, H, W]` and blob label `[1, 1, D, H, W]`.
///
/// The first modality holds a smooth body-like structure plus Gaussian noise
/// and a faint trace of each blob; the second holds bright blobs on a dim
/// background; further modalities are structure with other contrasts.
/// Every blob lies entirely inside the volume.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<(Tensor5, Tensor5)> {
    const STRIDE: usize = 32;
    for axis in 0..3 {
        if spec.extent[axis] == 0 || spec.extent[axis] % STRIDE != 0 {
            return Err(Error::config(format!(
                "{} extent {} is not a positive multiple of {STRIDE}",
                SPATIAL_AXES[axis], spec.extent[axis]
            )));
        }
        if spec.blobs > 0 && 2 * spec.radius + 1 > spec.extent[axis] {
            return Err(Error::config(format!(
                "blob radius {} does not fit the {} extent {}",
                spec.radius, SPATIAL_AXES[axis], spec.extent[axis]
            )));
        }
    }
    if spec.modalities == 0 {
        return Err(Error::config("at least one modality is required"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite() && spec.intensity.is_finite()) {
        return Err(Error::config("noise sigma must be non-negative and intensity finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = spec.radius;
    let centers: Vec<[usize; 3]> = (0..spec.blobs)
        .map(|_| spec.extent.map(|e| rng.gen_range(r..e - r)))
        .collect();
    let [d, h, w] = spec.extent;
    let r2 = (r * r) as i64;
    let mut label = Tensor5::zeros([1, 1, d, h, w]);
    for c in &centers {
        let lo = c.map(|v| v - r);
        for z in lo[0]..=c[0] + r {
            for y in lo[1]..=c[1] + r {
                for x in lo[2]..=c[2] + r {
                    let dz = z as i64 - c[0] as i64;
                    let dy = y as i64 - c[1] as i64;
                    let dx = x as i64 - c[2] as i64;
                    if dz * dz + dy * dy + dx * dx <= r2 {
                        label.data_mut()[(z * h + y) * w + x] = 1.0;
                    }
                }
            }
        }
    }

    let noise = Normal::new(0.0f32, spec.noise_sigma.max(f32::MIN_POSITIVE)).expect("valid sigma");
    let sample = |rng: &mut ChaCha8Rng| if spec.noise_sigma > 0.0 { noise.sample(rng) } else { 0.0 };
    let lab = label.data().to_vec();
    let mut parts = Vec::with_capacity(spec.modalities);
    for m in 0..spec.modalities {
        let contrast = 1.0 / (1 + m) as f32;
        let t = Tensor5::from_fn([1, 1, d, h, w], |i| {
            let v = (i[2] * h + i[3]) * w + i[4];
            let p = [i[2], i[3], i[4]].map(|c| c as f32);
            // ellipsoidal body filling most of the extent
            let rho = (0..3)
                .map(|a| {
                    let u = (p[a] + 0.5) / spec.extent[a] as f32 - 0.5;
                    4.0 * u * u
                })
                .sum::<f32>();
            let body = if rho < 0.8 { 1.0 } else { 0.0 };
            let base = match m {
                1 => 0.1 * body + spec.intensity * lab[v],
                0 => body * (0.5 + 0.3 * (p[0] * 0.2).sin()) + 0.2 * lab[v],
                _ => contrast * body * (0.5 + 0.3 * (p[1] * 0.15 * (m as f32)).cos()),
            };
            base + sample(&mut rng)
        });
        parts.push(t);
    }
    Ok((Tensor5::stack_modalities(&parts)?, label))
}

/// Writes `<prefix>_mod1.vxs`, `<prefix>_mod2.vxs`, ... and `<prefix>_label.vxs`, returning the paths.
pub fn write_synthetic(prefix: &str, volumes: &Tensor5, label: &Tensor5) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::new();
    for m in 0..volumes.modalities() {
        let p = std::path::PathBuf::from(format!("{prefix}_mod{}.vxs", m + 1));
        write_volume(&p, &volumes.modality(m))?;
        paths.push(p);
    }
    let p = std::path::PathBuf::from(format!("{prefix}_label.vxs"));
    write_volume(&p, label)?;
    paths.push(p);
    Ok(paths)
}
