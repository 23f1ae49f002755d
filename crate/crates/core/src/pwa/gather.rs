use super::schedule::WindowSchedule;
use crate::error::{Error, Result};
use crate::tensor::{max_pool3, unpool_broadcast, window_partition, window_reverse, Tensor5};

/// Batched token sequences laid out `[batch, head, c_hat, len]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqBatch {
    pub batch: usize,
    pub heads: usize,
    pub c_hat: usize,
    pub len: usize,
    pub data: Vec<f32>,
}

impl SeqBatch {
    pub fn zeros(batch: usize, heads: usize, c_hat: usize, len: usize) -> Self {
        SeqBatch {
            batch,
            heads,
            c_hat,
            len,
            data: vec![0.0; batch * heads * c_hat * len],
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.batch, self.heads, self.c_hat, self.len]
    }

    /// Size of one batch entry.
    pub fn entry_len(&self) -> usize {
        self.heads * self.c_hat * self.len
    }

    pub fn entry(&self, b: usize) -> &[f32] {
        let n = self.entry_len();
        &self.data[b * n..(b + 1) * n]
    }

    #[inline]
    pub fn get(&self, b: usize, head: usize, c: usize, t: usize) -> f32 {
        self.data[((b * self.heads + head) * self.c_hat + c) * self.len + t]
    }
}

/// Paired-window gathering.
///
/// `x` holds the projected features of all modalities, `[M, N_win·N_head·Ĉ, D, H, W]`.
/// Pair `i` reads its channel slice, partitions it by the pair's big window,
/// max-pools each small window to one token and flattens the tokens; the
/// modalities are concatenated along the sequence axis. Batch entries are
/// ordered pair-major, then by window in lexicographic order.
pub fn gather(x: &Tensor5, sched: &WindowSchedule, n_head: usize, c_hat: usize) -> Result<SeqBatch> {
    let m = x.modalities();
    let per_pair = n_head * c_hat;
    if x.channels() != sched.n_win() * per_pair {
        return Err(Error::dim(
            "channel",
            format!(
                "gather expects {} channels ({} pairs x {n_head} heads x {c_hat}), found {}",
                sched.n_win() * per_pair,
                sched.n_win(),
                x.channels()
            ),
        ));
    }
    if x.spatial() != sched.extent() {
        return Err(Error::dim(
            "spatial",
            format!("feature extent {:?} differs from schedule extent {:?}", x.spatial(), sched.extent()),
        ));
    }
    let l = sched.seq_len();
    let len = m * l;
    let mut out = SeqBatch::zeros(sched.total_windows(), n_head, c_hat, len);
    let mut entry = 0;
    for (i, pair) in sched.pairs().iter().enumerate() {
        let slice = x.channel_slice(i * per_pair, (i + 1) * per_pair)?;
        let windows = window_partition(&slice, pair.big)?;
        let pooled = max_pool3(&windows, pair.small)?;
        let n_i = sched.windows_at(i);
        for w in 0..n_i {
            let dst = &mut out.data[(entry + w) * per_pair * len..(entry + w + 1) * per_pair * len];
            for mi in 0..m {
                for ch in 0..per_pair {
                    let src = pooled.plane(mi * n_i + w, ch);
                    dst[ch * len + mi * l..ch * len + (mi + 1) * l].copy_from_slice(src);
                }
            }
        }
        entry += n_i;
    }
    Ok(out)
}

/// Paired-window scattering, the inverse of [`gather`].
///
/// Each token is written back over its whole small window, so pairs whose
/// small window is `1³` are restored exactly. Returns `[M, N_win·N_head·Ĉ, D, H, W]`.
pub fn scatter(a: &SeqBatch, sched: &WindowSchedule) -> Result<Tensor5> {
    let l = sched.seq_len();
    if a.batch != sched.total_windows() || l == 0 || a.len % l != 0 {
        return Err(Error::dim(
            "sequence",
            format!(
                "batch {:?} does not match schedule ({} windows, L = {l})",
                a.shape(),
                sched.total_windows()
            ),
        ));
    }
    let m = a.len / l;
    let per_pair = a.heads * a.c_hat;
    let tpa = sched.tokens_per_axis();
    let mut parts = Vec::with_capacity(sched.n_win());
    let mut entry = 0;
    for (i, pair) in sched.pairs().iter().enumerate() {
        let n_i = sched.windows_at(i);
        let mut pooled = Tensor5::zeros([m * n_i, per_pair, tpa[0], tpa[1], tpa[2]]);
        for w in 0..n_i {
            let src = a.entry(entry + w);
            for mi in 0..m {
                for ch in 0..per_pair {
                    pooled
                        .plane_mut(mi * n_i + w, ch)
                        .copy_from_slice(&src[ch * a.len + mi * l..ch * a.len + (mi + 1) * l]);
                }
            }
        }
        entry += n_i;
        let windows = unpool_broadcast(&pooled, pair.small);
        parts.push(window_reverse(&windows, sched.extent())?);
    }
    let refs: Vec<&Tensor5> = parts.iter().collect();
    Tensor5::concat_channels(&refs)
}
