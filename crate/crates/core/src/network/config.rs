use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jlc::{groups_for, DEFAULT_KERNELS};
use crate::pwa::{window_schedule, WindowSchedule};
use crate::tensor::{Triple, SPATIAL_AXES};

pub const STAGES: usize = 4;

/// Every hyperparameter of the dual-stream encoder-decoder.
///
/// Deserializes from JSON field-for-field; omitted fields take the AutoPET defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub modalities: usize,
    pub num_classes: usize,
    /// Patch extent the attention schedules are built for.
    pub input_extent: Triple,
    pub stage_widths: [usize; STAGES],
    /// Input channels per group of the JLC branches at each stage.
    pub group_sizes: [usize; STAGES],
    pub kernels: Vec<usize>,
    /// Attention layers per stage; all zeros gives the convolution-only model.
    pub attention_depth: [usize; STAGES],
    /// Feed-forward expansion of the JLC and attention blocks per stage.
    pub expansion_ratios: [usize; STAGES],
    pub big_window_minima: [Triple; STAGES],
    pub small_window_minima: [Triple; STAGES],
    pub r: usize,
    pub c_min: usize,
    pub n_heads: [usize; STAGES],
    /// Stride of the first patch embedding; later stages halve the extent.
    pub patch_size: usize,
    /// Channels left after the final `×patch_size` voxel shuffle.
    pub head_channels: usize,
    /// Feed all modalities to the attention stream as one input instead of separate sequences.
    pub early_fusion: bool,
    pub qkv_bias: bool,
    pub dropout: f32,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::autopet()
    }
}

impl NetworkConfig {
    /// PET/CT model at `96³`.
    pub fn autopet() -> Self {
        NetworkConfig {
            modalities: 2,
            num_classes: 2,
            input_extent: [96; 3],
            stage_widths: [16, 32, 64, 128],
            group_sizes: [4, 8, 8, 16],
            kernels: DEFAULT_KERNELS.to_vec(),
            attention_depth: [1; STAGES],
            expansion_ratios: [3, 3, 2, 2],
            big_window_minima: [[3; 3], [6; 3], [3; 3], [3; 3]],
            small_window_minima: [[1; 3]; STAGES],
            r: 2,
            c_min: 8,
            n_heads: [1; STAGES],
            patch_size: 4,
            head_channels: 4,
            early_fusion: false,
            qkv_bias: false,
            dropout: 0.0,
        }
    }

    /// The same network with every attention layer removed.
    pub fn conv_only() -> Self {
        NetworkConfig {
            attention_depth: [0; STAGES],
            ..Self::autopet()
        }
    }

    /// Four MRI sequences fused at the attention-stream input.
    pub fn early_fusion4() -> Self {
        NetworkConfig {
            modalities: 4,
            early_fusion: true,
            ..Self::autopet()
        }
    }

    /// Head-and-neck PET/CT patches of `128×128×64`.
    pub fn hecktor() -> Self {
        NetworkConfig {
            input_extent: [64, 128, 128],
            big_window_minima: [[2, 4, 4], [4, 8, 8], [2, 4, 4], [2, 4, 4]],
            ..Self::autopet()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "autopet" | "default" => Ok(Self::autopet()),
            "conv-only" => Ok(Self::conv_only()),
            "early-fusion4" => Ok(Self::early_fusion4()),
            "hecktor" => Ok(Self::hecktor()),
            other => Err(Error::config(format!(
                "unknown preset {other:?}; expected autopet, conv-only, early-fusion4 or hecktor"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn has_attention(&self) -> bool {
        self.attention_depth.iter().any(|&d| d > 0)
    }

    /// Modalities seen by the attention stream.
    pub fn attention_modalities(&self) -> usize {
        if self.early_fusion {
            1
        } else {
            self.modalities
        }
    }

    /// Total downsampling factor at the deepest stage.
    pub fn total_stride(&self) -> usize {
        self.patch_size << (STAGES - 1)
    }

    /// Feature extent at each stage for an input of `extent`.
    pub fn stage_extents(&self, extent: Triple) -> Result<[Triple; STAGES]> {
        let stride = self.total_stride();
        for axis in 0..3 {
            if stride == 0 || extent[axis] == 0 || extent[axis] % stride != 0 {
                return Err(Error::dim(
                    SPATIAL_AXES[axis],
                    format!("input extent {} is not divisible by the total stride {stride}", extent[axis]),
                ));
            }
        }
        let mut out = [[0; 3]; STAGES];
        for (k, e) in out.iter_mut().enumerate() {
            *e = extent.map(|v| v / (self.patch_size << k));
        }
        Ok(out)
    }

    /// Window schedules for every stage with attention at input `extent`.
    pub fn schedules(&self, extent: Triple) -> Result<[Option<WindowSchedule>; STAGES]> {
        let extents = self.stage_extents(extent)?;
        let mut out: [Option<WindowSchedule>; STAGES] = Default::default();
        for k in 0..STAGES {
            if self.attention_depth[k] == 0 {
                continue;
            }
            let sched = window_schedule(extents[k], self.big_window_minima[k], self.small_window_minima[k], self.r)
                .map_err(|e| match e {
                    Error::Schedule { axis, detail } => Error::Schedule {
                        axis,
                        detail: format!("stage {}: {detail}", k + 1),
                    },
                    other => other,
                })?;
            out[k] = Some(sched);
        }
        Ok(out)
    }

    /// Checks every structural constraint, naming the offending stage.
    pub fn validate(&self) -> Result<()> {
        let stage_err = |k: usize, what: String| Err(Error::config(format!("stage {}: {what}", k + 1)));
        if self.modalities == 0 || self.num_classes == 0 {
            return Err(Error::config("modalities and num_classes must be positive"));
        }
        if self.patch_size == 0 || self.head_channels == 0 || self.c_min == 0 {
            return Err(Error::config("patch_size, head_channels and c_min must be positive"));
        }
        if self.kernels.is_empty() || self.kernels.iter().any(|k| k % 2 == 0) {
            return Err(Error::config(format!("kernels {:?} must be a non-empty set of odd sizes", self.kernels)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        for k in 0..STAGES {
            let (c, g) = (self.stage_widths[k], self.group_sizes[k]);
            if c == 0 {
                return stage_err(k, "width must be positive".into());
            }
            if g == 0 || c % g != 0 {
                return stage_err(k, format!("group size {g} does not divide width {c}"));
            }
            if self.attention_depth[k] > 0 && self.n_heads[k] == 0 {
                return stage_err(k, "attention needs at least one head".into());
            }
        }
        // the stem embeds the mixed stage-1 features with the stage-1 grouping
        groups_for(self.stage_widths[0], self.stage_widths[0], self.group_sizes[0])?;
        self.schedules(self.input_extent)?;
        Ok(())
    }
}
