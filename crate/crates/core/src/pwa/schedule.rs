use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{volume, Triple, SPATIAL_AXES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPair {
    pub big: Triple,
    pub small: Triple,
}

/// Synchronously expanding (big, small) window pairs covering one feature extent.
///
/// Pair `i` is pair 0 scaled by `r^i` on every axis, so every pair yields the
/// same number of pooled tokens per big window, and the last big window is the
/// whole extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    extent: Triple,
    r: usize,
    pairs: Vec<WindowPair>,
}

impl WindowSchedule {
    pub fn extent(&self) -> Triple {
        self.extent
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn pairs(&self) -> &[WindowPair] {
        &self.pairs
    }

    pub fn n_win(&self) -> usize {
        self.pairs.len()
    }

    pub fn big_windows(&self) -> Vec<Triple> {
        self.pairs.iter().map(|p| p.big).collect()
    }

    /// Pooled tokens per axis inside one big window; equal for every pair.
    pub fn tokens_per_axis(&self) -> Triple {
        let p = self.pairs[0];
        [p.big[0] / p.small[0], p.big[1] / p.small[1], p.big[2] / p.small[2]]
    }

    /// Sequence length `L` per modality.
    pub fn seq_len(&self) -> usize {
        volume(self.tokens_per_axis())
    }

    /// Number of big windows tiling the extent at pair `i`.
    pub fn windows_at(&self, i: usize) -> usize {
        volume(self.extent) / volume(self.pairs[i].big)
    }

    /// Total batch entries `Σ n_i` produced by gathering.
    pub fn total_windows(&self) -> usize {
        (0..self.n_win()).map(|i| self.windows_at(i)).sum()
    }
}

/// Builds the pair list for `extent` from the minimum big window `b1`,
/// minimum small window `s1` and expansion rate `r`.
pub fn window_schedule(extent: Triple, b1: Triple, s1: Triple, r: usize) -> Result<WindowSchedule> {
    if r < 2 {
        return Err(Error::Schedule {
            axis: "all",
            detail: format!("expansion rate must be at least 2, got {r}"),
        });
    }
    let mut levels = [0usize; 3];
    for axis in 0..3 {
        let name = SPATIAL_AXES[axis];
        if s1[axis] == 0 || b1[axis] % s1[axis] != 0 {
            return Err(Error::Schedule {
                axis: name,
                detail: format!("big window {} not divisible by small window {}", b1[axis], s1[axis]),
            });
        }
        if b1[axis] == 0 || extent[axis] % b1[axis] != 0 {
            return Err(Error::Schedule {
                axis: name,
                detail: format!("extent {} not divisible by big window {}", extent[axis], b1[axis]),
            });
        }
        let mut ratio = extent[axis] / b1[axis];
        while ratio > 1 && ratio % r == 0 {
            ratio /= r;
            levels[axis] += 1;
        }
        if ratio != 1 {
            return Err(Error::Schedule {
                axis: name,
                detail: format!(
                    "extent {} over big window {} is not a power of {r}",
                    extent[axis], b1[axis]
                ),
            });
        }
    }
    for axis in 1..3 {
        if levels[axis] != levels[0] {
            return Err(Error::Schedule {
                axis: SPATIAL_AXES[axis],
                detail: format!(
                    "needs {} expansions but depth needs {}",
                    levels[axis], levels[0]
                ),
            });
        }
    }
    let pairs = (0..=levels[0] as u32)
        .map(|i| {
            let f = r.pow(i);
            WindowPair {
                big: b1.map(|v| v * f),
                small: s1.map(|v| v * f),
            }
        })
        .collect();
    Ok(WindowSchedule { extent, r, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_level_cube() {
        let s = window_schedule([24; 3], [3; 3], [1; 3], 2).unwrap();
        assert_eq!(s.big_windows(), vec![[3; 3], [6; 3], [12; 3], [24; 3]]);
        assert_eq!(s.n_win(), 4);
        assert_eq!(s.seq_len(), 27);
        assert_eq!(s.pairs()[3].small, [8; 3]);
        assert_eq!(s.total_windows(), 512 + 64 + 8 + 1);
    }

    #[test]
    fn single_pair() {
        let s = window_schedule([3; 3], [3; 3], [1; 3], 2).unwrap();
        assert_eq!(s.big_windows(), vec![[3; 3]]);
        assert_eq!(s.n_win(), 1);
    }

    #[test]
    fn anisotropic_minimum() {
        let s = window_schedule([16, 32, 32], [2, 4, 4], [1; 3], 2).unwrap();
        assert_eq!(s.n_win(), 4);
        assert_eq!(s.pairs().last().unwrap().big, [16, 32, 32]);
    }

    #[test]
    fn errors_name_axis() {
        match window_schedule([24, 24, 18], [3; 3], [1; 3], 2) {
            Err(Error::Schedule { axis, .. }) => assert_eq!(axis, "width"),
            other => panic!("{other:?}"),
        }
        match window_schedule([24, 12, 24], [3; 3], [1; 3], 2) {
            Err(Error::Schedule { axis, .. }) => assert_eq!(axis, "height"),
            other => panic!("{other:?}"),
        }
        assert!(window_schedule([24; 3], [3; 3], [2, 1, 1], 2).is_err());
        assert!(window_schedule([24; 3], [3; 3], [1; 3], 1).is_err());
    }
}
