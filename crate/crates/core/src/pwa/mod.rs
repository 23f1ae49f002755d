//! Paired window attention.
//!
//! Features of all modalities are layer-normalized and projected to
//! `N_win·N_head·Ĉ` channels. Each window pair owns one channel slice, which is
//! partitioned by its big window and max-pooled by its small window, so every
//! pair yields sequences of the same length. All sequences attend in one
//! batched call, are scattered back to voxel space and mixed to the input
//! width by a pointwise convolution with a residual connection.

mod attention;
pub mod cost;
mod gather;
mod schedule;

pub use attention::{grouped_attention, grouped_attention_traced, paired_attention, AttentionWeights, PositionBias};
pub use cost::{pwa_flops, pwa_flops_multimodal};
pub use gather::{gather, scatter, SeqBatch};
pub use schedule::{window_schedule, WindowPair, WindowSchedule};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::init::Initializer;
use crate::jl::head_channels;
use crate::tensor::{conv3d, ConvParams, LayerNorm, Tensor5};

#[derive(Clone, Debug, PartialEq)]
pub struct PwaParams {
    pub norm: LayerNorm,
    pub q: ConvParams,
    pub k: ConvParams,
    pub v: ConvParams,
    pub mixer: ConvParams,
    /// One table set per window pair, shared by all big windows of that pair.
    pub pos_bias: Vec<PositionBias>,
    n_head: usize,
    c_hat: usize,
    /// Mixer dropout; only applied when positive.
    pub dropout: f32,
    pub dropout_seed: u64,
}

impl PwaParams {
    /// Checks every shape against the schedule, modality count and minimum head size.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        norm: LayerNorm,
        q: ConvParams,
        k: ConvParams,
        v: ConvParams,
        mixer: ConvParams,
        pos_bias: Vec<PositionBias>,
        sched: &WindowSchedule,
        modalities: usize,
        n_head: usize,
        c_min: usize,
    ) -> Result<Self> {
        let channels = norm.channels();
        let c_hat = head_channels(channels, c_min, sched.n_win(), n_head);
        let projected = sched.n_win() * n_head * c_hat;
        for (name, p) in [("q", &q), ("k", &k), ("v", &v)] {
            if p.kernel() != 1 || p.c_in() != channels || p.c_out() != projected {
                return Err(Error::config(format!(
                    "{name} projection must be pointwise {channels}→{projected}, got k={} {}→{}",
                    p.kernel(),
                    p.c_in(),
                    p.c_out()
                )));
            }
        }
        if mixer.kernel() != 1 || mixer.c_in() != projected || mixer.c_out() != channels {
            return Err(Error::config(format!(
                "mixer must be pointwise {projected}→{channels}"
            )));
        }
        let len = modalities * sched.seq_len();
        if pos_bias.len() != sched.n_win() || pos_bias.iter().any(|b| b.heads != n_head || b.len != len) {
            return Err(Error::config(format!(
                "position bias must be {} tables of {n_head} heads of {len}x{len}",
                sched.n_win()
            )));
        }
        Ok(PwaParams {
            norm,
            q,
            k,
            v,
            mixer,
            pos_bias,
            n_head,
            c_hat,
            dropout: 0.0,
            dropout_seed: 0,
        })
    }

    pub fn init(
        channels: usize,
        sched: &WindowSchedule,
        modalities: usize,
        n_head: usize,
        c_min: usize,
        qkv_bias: bool,
        init: &mut Initializer,
    ) -> Result<Self> {
        let c_hat = head_channels(channels, c_min, sched.n_win(), n_head);
        let projected = sched.n_win() * n_head * c_hat;
        let len = modalities * sched.seq_len();
        let norm = init.layer_norm(channels);
        let q = init.pointwise(channels, projected, qkv_bias)?;
        let k = init.pointwise(channels, projected, qkv_bias)?;
        let v = init.pointwise(channels, projected, qkv_bias)?;
        let mixer = init.pointwise(projected, channels, true)?;
        let pos_bias = (0..sched.n_win())
            .map(|_| PositionBias::from_vec(n_head, len, init.trunc_normal(n_head * len * len)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(norm, q, k, v, mixer, pos_bias, sched, modalities, n_head, c_min)
    }

    pub fn n_head(&self) -> usize {
        self.n_head
    }

    pub fn c_hat(&self) -> usize {
        self.c_hat
    }

    pub fn channels(&self) -> usize {
        self.norm.channels()
    }

    pub fn param_count(&self) -> usize {
        self.norm.param_count()
            + self.q.param_count()
            + self.k.param_count()
            + self.v.param_count()
            + self.mixer.param_count()
            + self.pos_bias.iter().map(PositionBias::param_count).sum::<usize>()
    }
}

/// Full block: `E + mixer(scatter(attention(gather(PWC(LN(E))))))` for every modality.
pub fn pwa_forward(e: &Tensor5, params: &PwaParams, sched: &WindowSchedule) -> Result<Tensor5> {
    forward_impl(e, params, sched, false).map(|(out, _)| out)
}

/// As [`pwa_forward`], also returning the materialized attention weights.
pub fn pwa_forward_traced(e: &Tensor5, params: &PwaParams, sched: &WindowSchedule) -> Result<(Tensor5, AttentionWeights)> {
    forward_impl(e, params, sched, true).map(|(out, w)| (out, w.expect("traced")))
}

fn forward_impl(
    e: &Tensor5,
    params: &PwaParams,
    sched: &WindowSchedule,
    trace: bool,
) -> Result<(Tensor5, Option<AttentionWeights>)> {
    if e.channels() != params.channels() {
        return Err(Error::dim(
            "channel",
            format!("block built for {} channels, input has {}", params.channels(), e.channels()),
        ));
    }
    let bias_len = params.pos_bias.first().map_or(0, |b| b.len);
    if bias_len != e.modalities() * sched.seq_len() {
        return Err(Error::dim(
            "modality",
            format!(
                "position bias covers {} tokens, input gives {} modalities x {}",
                bias_len,
                e.modalities(),
                sched.seq_len()
            ),
        ));
    }
    let normed = params.norm.forward(e)?;
    let (nh, ch) = (params.n_head, params.c_hat);
    let q = gather(&conv3d(&normed, &params.q)?, sched, nh, ch)?;
    let k = gather(&conv3d(&normed, &params.k)?, sched, nh, ch)?;
    let v = gather(&conv3d(&normed, &params.v)?, sched, nh, ch)?;
    drop(normed);
    let (attended, weights) = paired_attention(&q, &k, &v, &params.pos_bias, sched, trace)?;
    let scattered = scatter(&attended, sched)?;
    let mut mixed = conv3d(&scattered, &params.mixer)?;
    if params.dropout > 0.0 {
        apply_dropout(&mut mixed, params.dropout, params.dropout_seed);
    }
    mixed.add_assign(e)?;
    Ok((mixed, weights))
}

fn apply_dropout(t: &mut Tensor5, rate: f32, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - rate;
    for v in t.data_mut() {
        *v = if rng.gen::<f32>() < keep { *v / keep } else { 0.0 };
    }
}
