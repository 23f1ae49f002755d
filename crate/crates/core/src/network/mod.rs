//! The dual-stream segmentation network.
//!
//! The convolution stream concatenates all modalities, mixes them with a
//! pointwise convolution and runs one JLC block per stage. The attention
//! stream embeds every modality separately with shared weights and applies
//! paired-window attention across modalities. At each stage the attention
//! outputs are summed over modalities, projected and added to the JLC output
//! to form the skip feature. The decoder upsamples with pointwise expansion
//! and voxel shuffle, merges the skip and refines with a JLC block.

mod config;
pub mod cost;

pub use config::{NetworkConfig, STAGES};
pub use cost::{CostReport, StageCost};

use crate::error::{Error, Result};
use crate::init::Initializer;
use crate::jlc::{groups_for, jlc_forward, Ffn, JlcBlockParams};
use crate::pwa::{pwa_flops_multimodal, pwa_forward, PwaParams, WindowSchedule};
use crate::tensor::{conv3d, voxel_shuffle, ConvParams, LayerNorm, Tensor5, Triple};

/// One encoder stage of the convolution stream.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStage {
    /// Stride-2 `3³` convolution from the previous width; absent at stage 1.
    pub down: Option<ConvParams>,
    pub block: JlcBlockParams,
}

/// Paired-window attention followed by a normalized feed-forward, both residual.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionLayer {
    pub pwa: PwaParams,
    pub ffn_norm: LayerNorm,
    pub ffn: Ffn,
}

/// One encoder stage of the attention stream.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStage {
    /// Patch embedding (stage 1) or stride-2 downsampling, shared across modalities.
    pub embed: ConvParams,
    pub schedule: WindowSchedule,
    pub layers: Vec<AttentionLayer>,
    /// Projects the modality sum before it joins the convolution stream.
    pub fuse: ConvParams,
}

/// Attention-stream state threaded between stages.
#[derive(Clone, Debug, PartialEq)]
pub enum AttentionSlot {
    Active(AttentionStage),
    /// Stage without attention layers; only the embedding runs so deeper stages still receive input.
    EmbedOnly(ConvParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderStage {
    /// Pointwise `C_k → 8·C_{k−1}` before the `×2` voxel shuffle.
    pub expand: ConvParams,
    /// Pointwise `2·C_{k−1} → C_{k−1}` over the upsampled features and the skip.
    pub merge: ConvParams,
    pub block: JlcBlockParams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    config: NetworkConfig,
    seed: u64,
    mixer: ConvParams,
    patch_embed: ConvParams,
    conv_stages: Vec<ConvStage>,
    /// Empty for the convolution-only model.
    attention: Vec<AttentionSlot>,
    /// Ordered from the deepest stage upward.
    decoder: Vec<DecoderStage>,
    head_expand: ConvParams,
    head: ConvParams,
}

/// Builds a network with seeded truncated-normal weights; the same seed gives identical parameters.
pub fn build(cfg: &NetworkConfig, seed: u64) -> Result<Network> {
    cfg.validate()?;
    let mut init = Initializer::new(seed);
    let w = cfg.stage_widths;
    let m = cfg.modalities;
    let p = cfg.patch_size;
    let ffn_ratio = |k: usize| Some(cfg.expansion_ratios[k]);

    let mixer = init.pointwise(m, w[0], true)?;
    let stem_groups = groups_for(w[0], w[0], cfg.group_sizes[0])?;
    let patch_embed = init.conv(w[0], w[0], p, p, 0, stem_groups, true)?;
    let mut conv_stages = Vec::with_capacity(STAGES);
    for k in 0..STAGES {
        let down = if k == 0 {
            None
        } else {
            Some(init.conv(w[k - 1], w[k], 3, 2, 1, 1, true)?)
        };
        let block = JlcBlockParams::init(w[k], w[k], cfg.group_sizes[k], &cfg.kernels, ffn_ratio(k), &mut init)?;
        conv_stages.push(ConvStage { down, block });
    }

    let mut attention = Vec::new();
    if cfg.has_attention() {
        let schedules = cfg.schedules(cfg.input_extent)?;
        let m_att = cfg.attention_modalities();
        let embed_in = if cfg.early_fusion { m } else { 1 };
        for (k, sched) in schedules.into_iter().enumerate() {
            let embed = if k == 0 {
                init.conv(embed_in, w[0], p, p, 0, 1, true)?
            } else {
                init.conv(w[k - 1], w[k], 2, 2, 0, 1, true)?
            };
            let Some(schedule) = sched else {
                attention.push(AttentionSlot::EmbedOnly(embed));
                continue;
            };
            let layers = (0..cfg.attention_depth[k])
                .map(|_| {
                    let mut pwa = PwaParams::init(w[k], &schedule, m_att, cfg.n_heads[k], cfg.c_min, cfg.qkv_bias, &mut init)?;
                    pwa.dropout = cfg.dropout;
                    Ok(AttentionLayer {
                        pwa,
                        ffn_norm: init.layer_norm(w[k]),
                        ffn: Ffn::init(w[k], cfg.expansion_ratios[k], &mut init)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let fuse = init.pointwise(w[k], w[k], true)?;
            attention.push(AttentionSlot::Active(AttentionStage {
                embed,
                schedule,
                layers,
                fuse,
            }));
        }
    }

    let mut decoder = Vec::with_capacity(STAGES - 1);
    for k in (1..STAGES).rev() {
        let c = w[k - 1];
        decoder.push(DecoderStage {
            expand: init.pointwise(w[k], 8 * c, true)?,
            merge: init.pointwise(2 * c, c, true)?,
            block: JlcBlockParams::init(c, c, cfg.group_sizes[k - 1], &cfg.kernels, ffn_ratio(k - 1), &mut init)?,
        });
    }
    let head_expand = init.pointwise(w[0], p.pow(3) * cfg.head_channels, true)?;
    let head = init.pointwise(cfg.head_channels, cfg.num_classes, true)?;

    Ok(Network {
        config: cfg.clone(),
        seed,
        mixer,
        patch_embed,
        conv_stages,
        attention,
        decoder,
        head_expand,
        head,
    })
}

impl Network {
    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mixer(&self) -> &ConvParams {
        &self.mixer
    }

    pub fn patch_embed(&self) -> &ConvParams {
        &self.patch_embed
    }

    pub fn conv_stages(&self) -> &[ConvStage] {
        &self.conv_stages
    }

    pub fn attention_slots(&self) -> &[AttentionSlot] {
        &self.attention
    }

    /// Attention stages with at least one layer, with their stage index.
    pub fn attention_stages(&self) -> impl Iterator<Item = (usize, &AttentionStage)> {
        self.attention.iter().enumerate().filter_map(|(k, s)| match s {
            AttentionSlot::Active(a) => Some((k, a)),
            AttentionSlot::EmbedOnly(_) => None,
        })
    }

    pub fn attention_stages_mut(&mut self) -> impl Iterator<Item = &mut AttentionStage> {
        self.attention.iter_mut().filter_map(|s| match s {
            AttentionSlot::Active(a) => Some(a),
            AttentionSlot::EmbedOnly(_) => None,
        })
    }

    pub fn decoder(&self) -> &[DecoderStage] {
        &self.decoder
    }

    pub fn head(&self) -> &ConvParams {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut ConvParams {
        &mut self.head
    }

    /// Stored reals across every component.
    pub fn param_count(&self) -> usize {
        let conv = |p: &ConvParams| p.param_count();
        let jlc = crate::jlc::jlc_param_count;
        let mut n = conv(&self.mixer) + conv(&self.patch_embed) + conv(&self.head_expand) + conv(&self.head);
        for s in &self.conv_stages {
            n += s.down.as_ref().map_or(0, conv) + jlc(&s.block);
        }
        for slot in &self.attention {
            n += match slot {
                AttentionSlot::EmbedOnly(e) => conv(e),
                AttentionSlot::Active(a) => {
                    conv(&a.embed)
                        + conv(&a.fuse)
                        + a.layers
                            .iter()
                            .map(|l| l.pwa.param_count() + l.ffn_norm.param_count() + l.ffn.param_count())
                            .sum::<usize>()
                }
            };
        }
        for d in &self.decoder {
            n += conv(&d.expand) + conv(&d.merge) + jlc(&d.block);
        }
        n
    }

    /// Checks `[M, 1, D, H, W]` input and returns the schedules for its extent.
    fn check_input(&self, x: &Tensor5) -> Result<[Option<WindowSchedule>; STAGES]> {
        let cfg = &self.config;
        if x.modalities() != cfg.modalities || x.channels() != 1 {
            return Err(Error::dim(
                "modality",
                format!(
                    "expected {} single-channel volumes, got {} with {} channels",
                    cfg.modalities,
                    x.modalities(),
                    x.channels()
                ),
            ));
        }
        self.schedules_for(x.spatial())
    }

    fn schedules_for(&self, extent: Triple) -> Result<[Option<WindowSchedule>; STAGES]> {
        let schedules = self.config.schedules(extent)?;
        for (k, slot) in self.attention.iter().enumerate() {
            if let (AttentionSlot::Active(a), Some(s)) = (slot, &schedules[k]) {
                if s.n_win() != a.schedule.n_win() {
                    return Err(Error::Schedule {
                        axis: "all",
                        detail: format!(
                            "stage {}: extent {:?} needs {} window pairs, the network was built for {}",
                            k + 1,
                            extent,
                            s.n_win(),
                            a.schedule.n_win()
                        ),
                    });
                }
            }
        }
        Ok(schedules)
    }

    /// Encoder skip features at every stage.
    pub fn encode(&self, x: &Tensor5) -> Result<Vec<Tensor5>> {
        let schedules = self.check_input(x)?;
        let cfg = &self.config;
        let fused = x.clone().fold_modalities();
        let mut h = conv3d(&conv3d(&fused, &self.mixer)?, &self.patch_embed)?;
        let mut e = if cfg.early_fusion { fused } else { x.clone() };
        let mut skips = Vec::with_capacity(STAGES);
        for (k, stage) in self.conv_stages.iter().enumerate() {
            if let Some(down) = &stage.down {
                h = conv3d(&h, down)?;
            }
            h = jlc_forward(&h, &stage.block)?;
            let mut skip = h.clone();
            match self.attention.get(k) {
                Some(AttentionSlot::Active(a)) => {
                    let sched = schedules[k].as_ref().expect("schedule for active stage");
                    e = conv3d(&e, &a.embed)?;
                    for layer in &a.layers {
                        e = pwa_forward(&e, &layer.pwa, sched)?;
                        let mut f = layer.ffn.forward(&layer.ffn_norm.forward(&e)?)?;
                        f.add_assign(&e)?;
                        e = f;
                    }
                    skip.add_assign(&conv3d(&e.sum_modalities(), &a.fuse)?)?;
                }
                Some(AttentionSlot::EmbedOnly(embed)) => e = conv3d(&e, embed)?,
                None => {}
            }
            skips.push(skip);
        }
        Ok(skips)
    }

    /// Logits `[1, num_classes, D, H, W]` for `M` stacked single-channel volumes `[M, 1, D, H, W]`.
    pub fn forward(&self, x: &Tensor5) -> Result<Tensor5> {
        let mut skips = self.encode(x)?;
        let mut d = skips.pop().expect("deepest stage");
        for stage in &self.decoder {
            let skip = skips.pop().expect("one skip per decoder stage");
            let up = voxel_shuffle(&conv3d(&d, &stage.expand)?, 2)?;
            let merged = conv3d(&Tensor5::concat_channels(&[&up, &skip])?, &stage.merge)?;
            d = jlc_forward(&merged, &stage.block)?;
        }
        let up = voxel_shuffle(&conv3d(&d, &self.head_expand)?, self.config.patch_size)?;
        conv3d(&up, &self.head)
    }

    /// Per-part parameter and operation counts at input `extent`.
    pub fn cost_report(&self, extent: Triple) -> Result<CostReport> {
        let schedules = self.schedules_for(extent)?;
        let cfg = &self.config;
        let extents = cfg.stage_extents(extent)?;
        let m_att = cfg.attention_modalities();
        let mut stages = Vec::new();

        let mut stem = StageCost::new("stem");
        stem.conv(&self.mixer, extent, 1)?;
        stem.conv(&self.patch_embed, extent, 1)?;
        if let Some(slot) = self.attention.first() {
            let embed = match slot {
                AttentionSlot::Active(a) => &a.embed,
                AttentionSlot::EmbedOnly(e) => e,
            };
            stem.conv(embed, extent, m_att)?;
        }
        stages.push(stem);

        for (k, stage) in self.conv_stages.iter().enumerate() {
            let mut s = StageCost::new(format!("encoder{}", k + 1));
            let ext = extents[k];
            if let Some(down) = &stage.down {
                s.conv(down, extents[k - 1], 1)?;
            }
            s.jlc(&stage.block, ext)?;
            match self.attention.get(k) {
                Some(AttentionSlot::Active(a)) => {
                    if k > 0 {
                        s.conv(&a.embed, extents[k - 1], m_att)?;
                    }
                    let sched = schedules[k].as_ref().expect("schedule for active stage");
                    let c = cfg.stage_widths[k];
                    for layer in &a.layers {
                        s.params += layer.pwa.param_count() as u64;
                        s.elementwise(2, c, ext, m_att);
                        s.attention_flops += pwa_flops_multimodal(sched, c, m_att);
                        s.params += layer.ffn_norm.param_count() as u64;
                        s.elementwise(2, c, ext, m_att);
                        s.ffn(&layer.ffn, ext, m_att)?;
                    }
                    s.elementwise(m_att - 1, c, ext, 1);
                    s.conv(&a.fuse, ext, 1)?;
                    s.elementwise(1, c, ext, 1);
                }
                Some(AttentionSlot::EmbedOnly(embed)) if k > 0 => {
                    s.conv(embed, extents[k - 1], m_att)?;
                }
                _ => {}
            }
            stages.push(s);
        }

        for (i, stage) in self.decoder.iter().enumerate() {
            let k = STAGES - 1 - i;
            let mut s = StageCost::new(format!("decoder{k}"));
            s.conv(&stage.expand, extents[k], 1)?;
            s.conv(&stage.merge, extents[k - 1], 1)?;
            s.jlc(&stage.block, extents[k - 1])?;
            stages.push(s);
        }
        let mut head = StageCost::new("head");
        head.conv(&self.head_expand, extents[0], 1)?;
        head.conv(&self.head, extent, 1)?;
        stages.push(head);
        Ok(CostReport { extent, stages })
    }

    /// Total operations of one forward at input `extent`.
    pub fn total_flops(&self, extent: Triple) -> Result<u64> {
        Ok(self.cost_report(extent)?.flops())
    }
}
