//! Mean attention distance and the Dice overlap score.

use crate::error::{Error, Result};
use crate::tensor::{volume, Tensor5, Triple};

/// Integer `(x, y, z)` of flat index `i` on a `(D, H, W)` grid, `x` fastest.
pub fn index_to_coords(i: usize, grid: Triple) -> Result<(usize, usize, usize)> {
    let [_, h, w] = grid;
    let len = volume(grid);
    if i >= len {
        return Err(Error::Index { index: i, len });
    }
    Ok((i % w, (i / w) % h, i / (h * w)))
}

/// A dense row-stochastic attention matrix over the voxels of one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MadInput {
    weights: Vec<f64>,
    grid: Triple,
    spacing: f64,
}

/// Allowed deviation of a row sum from one.
pub const ROW_SUM_TOLERANCE: f64 = 1e-3;

impl MadInput {
    pub fn new(weights: Vec<f64>, grid: Triple, spacing: f64) -> Result<Self> {
        let l = volume(grid);
        if l == 0 || weights.len() != l * l {
            return Err(Error::dim(
                "attention",
                format!("{} weights for a grid of {l} voxels", weights.len()),
            ));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::Validation(format!("voxel spacing {spacing} must be positive")));
        }
        for (r, row) in weights.chunks_exact(l).enumerate() {
            if row.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
                return Err(Error::Validation(format!("row {r} has a negative or non-finite weight")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::Validation(format!("row {r} sums to {sum}")));
            }
        }
        Ok(MadInput { weights, grid, spacing })
    }

    pub fn uniform(grid: Triple, spacing: f64) -> Result<Self> {
        let l = volume(grid);
        Self::new(vec![1.0 / l as f64; l * l], grid, spacing)
    }

    pub fn identity(grid: Triple, spacing: f64) -> Result<Self> {
        let l = volume(grid);
        let mut w = vec![0.0; l * l];
        for i in 0..l {
            w[i * l + i] = 1.0;
        }
        Self::new(w, grid, spacing)
    }

    pub fn from_f32(weights: &[f32], grid: Triple, spacing: f64) -> Result<Self> {
        Self::new(weights.iter().map(|&w| w as f64).collect(), grid, spacing)
    }

    /// Reads `W` from a tensor holding exactly `L·L` values.
    pub fn from_tensor(t: &Tensor5, grid: Triple, spacing: f64) -> Result<Self> {
        Self::from_f32(t.data(), grid, spacing)
    }

    pub fn grid(&self) -> Triple {
        self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `(1/L) Σ_i Σ_j W_ij · s·‖p_i − p_j‖`.
pub fn mad(inp: &MadInput) -> f64 {
    let l = volume(inp.grid);
    let coords: Vec<[f64; 3]> = (0..l)
        .map(|i| {
            let (x, y, z) = index_to_coords(i, inp.grid).expect("index in range");
            [x as f64, y as f64, z as f64]
        })
        .collect();
    let mut total = 0.0;
    for (i, row) in inp.weights.chunks_exact(l).enumerate() {
        let p = coords[i];
        for (j, &w) in row.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let q = coords[j];
            let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
            total += w * d;
        }
    }
    inp.spacing * total / l as f64
}

/// `2|P ∩ G| / (|P| + |G|)` over voxels that are nonzero; 1 when both are empty.
pub fn dice(pred: &Tensor5, gt: &Tensor5) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::dim(
            "shape",
            format!("prediction {:?} and ground truth {:?} differ", pred.dims(), gt.dims()),
        ));
    }
    let (mut inter, mut p, mut g) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let (a, b) = (a != 0.0, b != 0.0);
        inter += (a && b) as usize;
        p += a as usize;
        g += b as usize;
    }
    if p + g == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (p + g) as f64)
}

/// Per-voxel class with the largest logit, as a single-channel `{0, 1, ...}` map.
pub fn argmax_labels(logits: &Tensor5) -> Tensor5 {
    let [m, c, d, h, w] = logits.dims();
    let mut out = Tensor5::zeros([m, 1, d, h, w]);
    for mi in 0..m {
        let dst = out.plane_mut(mi, 0);
        for (v, o) in dst.iter_mut().enumerate() {
            let mut best = 0;
            for ci in 1..c {
                if logits.plane(mi, ci)[v] > logits.plane(mi, best)[v] {
                    best = ci;
                }
            }
            *o = best as f32;
        }
    }
    out
}
