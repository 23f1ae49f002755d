//! Johnson–Lindenstrauss guided group sizes.
//!
//! Covering numbers are approximated by `(M·v)^α`, so the lower bound on the
//! number of channels per convolution group is `α·ln(M·v)`. The JL constant and
//! distortion are folded into `α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volume ratios `{4³, 8³, 16³, 32³}` of a four-stage 3D network.
pub const MEDICAL_VOLUME_RATIOS: [u64; 4] = [64, 512, 4096, 32768];

/// Volume ratios `{1², 2², 4², 8²}` of a four-stage 2D network.
pub const NATURAL_VOLUME_RATIOS: [u64; 4] = [1, 4, 16, 64];

/// Lower bound on channels per group: `α·ln(M·v)`.
pub fn group_size_bound(modalities: usize, volume_ratio: u64, alpha: f64) -> Result<f64> {
    if modalities == 0 || volume_ratio == 0 {
        return Err(Error::Domain(format!(
            "modalities ({modalities}) and volume ratio ({volume_ratio}) must be positive"
        )));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    Ok(alpha * ((modalities as f64) * (volume_ratio as f64)).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Four 3D stages; group sizes `{n, 2n, 2n, 4n}`.
    Medical3d,
    /// Four 2D stages over RGB input; group sizes `{n, 2n, 4n, 4n}`.
    Natural2d,
}

impl Profile {
    pub fn volume_ratios(self) -> [u64; 4] {
        match self {
            Profile::Medical3d => MEDICAL_VOLUME_RATIOS,
            Profile::Natural2d => NATURAL_VOLUME_RATIOS,
        }
    }

    fn multipliers(self) -> [usize; 4] {
        match self {
            Profile::Medical3d => [1, 2, 2, 4],
            Profile::Natural2d => [1, 2, 4, 4],
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "medical3d" => Ok(Profile::Medical3d),
            "natural2d" => Ok(Profile::Natural2d),
            other => Err(Error::Domain(format!("unknown profile {other:?}"))),
        }
    }
}

/// Per-stage group sizes together with the raw bounds they were derived from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPlan {
    pub profile: Profile,
    pub alpha: f64,
    pub modalities: usize,
    pub n: usize,
    pub stage_volume_ratios: Vec<u64>,
    pub raw_bounds: Vec<f64>,
    pub group_sizes: Vec<usize>,
}

impl GroupPlan {
    /// Checks that every group size divides the matching stage width.
    pub fn validate_widths(&self, widths: &[usize]) -> Result<()> {
        if widths.len() != self.group_sizes.len() {
            return Err(Error::config(format!(
                "{} stage widths for a {}-stage plan",
                widths.len(),
                self.group_sizes.len()
            )));
        }
        for (stage, (&w, &g)) in widths.iter().zip(&self.group_sizes).enumerate() {
            if w % g != 0 {
                return Err(Error::config(format!(
                    "stage {}: group size {g} does not divide width {w}",
                    stage + 1
                )));
            }
        }
        Ok(())
    }
}

/// Plans group sizes for a profile, recording `α·ln(M·v_k)` for each stage.
pub fn plan_profile(profile: Profile, modalities: usize, v_list: &[u64], n: usize, alpha: f64) -> Result<GroupPlan> {
    if n == 0 {
        return Err(Error::Domain("base unit n must be positive".into()));
    }
    if v_list.len() != 4 {
        return Err(Error::Domain(format!(
            "profile plans need 4 stage volume ratios, got {}",
            v_list.len()
        )));
    }
    let raw_bounds = v_list
        .iter()
        .map(|&v| group_size_bound(modalities, v, alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(GroupPlan {
        profile,
        alpha,
        modalities,
        n,
        stage_volume_ratios: v_list.to_vec(),
        raw_bounds,
        group_sizes: profile.multipliers().iter().map(|k| k * n).collect(),
    })
}

/// Medical 3D plan `{n, 2n, 2n, 4n}` with raw bounds at `α = 1`.
pub fn plan_stages(modalities: usize, v_list: &[u64], n: usize) -> Result<GroupPlan> {
    plan_profile(Profile::Medical3d, modalities, v_list, n, 1.0)
}

/// Smallest multiple of `c_min` whose product with `n_win·n_head` covers `channels`.
pub fn head_channels(channels: usize, c_min: usize, n_win: usize, n_head: usize) -> usize {
    let unit = (c_min * n_win * n_head).max(1);
    channels.div_ceil(unit).max(1) * c_min
}
