use rayon::prelude::*;

use super::gather::SeqBatch;
use super::schedule::WindowSchedule;
use crate::error::{Error, Result};
use crate::tensor::softmax_in_place;

/// Learnable bias added to every `(M·L) × (M·L)` similarity block, one table per head.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionBias {
    pub heads: usize,
    pub len: usize,
    pub data: Vec<f32>,
}

impl PositionBias {
    pub fn zeros(heads: usize, len: usize) -> Self {
        PositionBias {
            heads,
            len,
            data: vec![0.0; heads * len * len],
        }
    }

    pub fn from_vec(heads: usize, len: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != heads * len * len {
            return Err(Error::dim(
                "position bias",
                format!("{} values for {heads} heads of {len}x{len}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("position bias must be finite".into()));
        }
        Ok(PositionBias { heads, len, data })
    }

    pub fn table(&self, head: usize) -> &[f32] {
        let n = self.len * self.len;
        &self.data[head * n..(head + 1) * n]
    }

    pub fn param_count(&self) -> usize {
        self.data.len()
    }
}

/// Attention rows recorded by [`grouped_attention_traced`], `[batch, head, len, len]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights {
    pub batch: usize,
    pub heads: usize,
    pub len: usize,
    pub data: Vec<f32>,
}

impl AttentionWeights {
    pub fn matrix(&self, b: usize, head: usize) -> &[f32] {
        let n = self.len * self.len;
        let start = (b * self.heads + head) * n;
        &self.data[start..start + n]
    }
}

/// `W = softmax(qᵀk / √Ĉ + bias)`, output `v · Wᵀ`, per batch entry and head.
/// One bias table set is shared by the whole batch.
pub fn grouped_attention(q: &SeqBatch, k: &SeqBatch, v: &SeqBatch, bias: &PositionBias) -> Result<SeqBatch> {
    run(q, k, v, &[bias.clone()], &[q.batch], false).map(|(out, _)| out)
}

/// As [`grouped_attention`], additionally materializing every weight matrix.
pub fn grouped_attention_traced(
    q: &SeqBatch,
    k: &SeqBatch,
    v: &SeqBatch,
    bias: &PositionBias,
) -> Result<(SeqBatch, AttentionWeights)> {
    run(q, k, v, &[bias.clone()], &[q.batch], true).map(|(out, w)| (out, w.expect("weights recorded")))
}

/// Attention over a gathered batch where pair `i` uses `biases[i]` for all of its windows.
pub fn paired_attention(
    q: &SeqBatch,
    k: &SeqBatch,
    v: &SeqBatch,
    biases: &[PositionBias],
    sched: &WindowSchedule,
    record: bool,
) -> Result<(SeqBatch, Option<AttentionWeights>)> {
    if biases.len() != sched.n_win() {
        return Err(Error::dim(
            "position bias",
            format!("{} tables for {} window pairs", biases.len(), sched.n_win()),
        ));
    }
    let spans: Vec<usize> = (0..sched.n_win()).map(|i| sched.windows_at(i)).collect();
    run(q, k, v, biases, &spans, record)
}

fn run(
    q: &SeqBatch,
    k: &SeqBatch,
    v: &SeqBatch,
    biases: &[PositionBias],
    spans: &[usize],
    record: bool,
) -> Result<(SeqBatch, Option<AttentionWeights>)> {
    if q.shape() != k.shape() || q.shape() != v.shape() {
        return Err(Error::dim(
            "sequence",
            format!("q {:?}, k {:?}, v {:?} differ", q.shape(), k.shape(), v.shape()),
        ));
    }
    for bias in biases {
        if bias.len != q.len || bias.heads != q.heads {
            return Err(Error::dim(
                "position bias",
                format!(
                    "bias is {} heads of {}x{}, sequences have {} heads of length {}",
                    bias.heads, bias.len, bias.len, q.heads, q.len
                ),
            ));
        }
    }
    if spans.iter().sum::<usize>() != q.batch {
        return Err(Error::dim(
            "sequence",
            format!("batch of {} entries, bias groups cover {}", q.batch, spans.iter().sum::<usize>()),
        ));
    }
    let group_of: Vec<usize> = spans
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat(g).take(n))
        .collect();
    let (c, t) = (q.c_hat, q.len);
    let scale = 1.0 / (c as f32).sqrt();
    let block = c * t;
    let mut out = SeqBatch::zeros(q.batch, q.heads, c, t);
    let mut weights = record.then(|| vec![0.0f32; q.batch * q.heads * t * t]);

    let attend = |idx: usize, dst: &mut [f32], w_out: Option<&mut [f32]>| {
        let head = idx % q.heads;
        let bias = &biases[group_of[idx / q.heads]];
        let (qs, ks, vs) = (
            &q.data[idx * block..(idx + 1) * block],
            &k.data[idx * block..(idx + 1) * block],
            &v.data[idx * block..(idx + 1) * block],
        );
        let mut scores = bias.table(head).to_vec();
        for ci in 0..c {
            let krow = &ks[ci * t..(ci + 1) * t];
            for (ti, &qv) in qs[ci * t..(ci + 1) * t].iter().enumerate() {
                let qv = qv * scale;
                for (s, kv) in scores[ti * t..(ti + 1) * t].iter_mut().zip(krow) {
                    *s += qv * kv;
                }
            }
        }
        for row in scores.chunks_exact_mut(t) {
            softmax_in_place(row);
        }
        for ci in 0..c {
            let vrow = &vs[ci * t..(ci + 1) * t];
            for (ti, o) in dst[ci * t..(ci + 1) * t].iter_mut().enumerate() {
                *o = scores[ti * t..(ti + 1) * t]
                    .iter()
                    .zip(vrow)
                    .map(|(w, v)| w * v)
                    .sum();
            }
        }
        if let Some(w) = w_out {
            w.copy_from_slice(&scores);
        }
    };

    if block > 0 {
        match &mut weights {
            Some(w) => out
                .data
                .par_chunks_mut(block)
                .zip(w.par_chunks_mut(t * t))
                .enumerate()
                .for_each(|(idx, (dst, w))| attend(idx, dst, Some(w))),
            None => out
                .data
                .par_chunks_mut(block)
                .enumerate()
                .for_each(|(idx, dst)| attend(idx, dst, None)),
        }
    }
    let traced = weights.map(|data| AttentionWeights {
        batch: q.batch,
        heads: q.heads,
        len: t,
        data,
    });
    Ok((out, traced))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, shape: [usize; 4]) -> SeqBatch {
        let mut s = SeqBatch::zeros(shape[0], shape[1], shape[2], shape[3]);
        s.data.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        s
    }

    #[test]
    fn uniform_scores_average_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = SeqBatch {
            data: vec![0.7; 2 * 4 * 5],
            ..SeqBatch::zeros(2, 1, 4, 5)
        };
        let v = random(&mut rng, [2, 1, 4, 5]);
        let out = grouped_attention(&q, &q, &v, &PositionBias::zeros(1, 5)).unwrap();
        for b in 0..2 {
            for c in 0..4 {
                let mean: f32 = (0..5).map(|t| v.get(b, 0, c, t)).sum::<f32>() / 5.0;
                for t in 0..5 {
                    assert!((out.get(b, 0, c, t) - mean).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn length_one_returns_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (q, k, v) = (
            random(&mut rng, [3, 2, 4, 1]),
            random(&mut rng, [3, 2, 4, 1]),
            random(&mut rng, [3, 2, 4, 1]),
        );
        let out = grouped_attention(&q, &k, &v, &PositionBias::zeros(2, 1)).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn strong_negative_bias_selects_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let shape = [2, 1, 8, 6];
        let (q, k, v) = (random(&mut rng, shape), random(&mut rng, shape), random(&mut rng, shape));
        let mut bias = PositionBias::zeros(1, 6);
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    bias.data[i * 6 + j] = -50.0;
                }
            }
        }
        let (out, w) = grouped_attention_traced(&q, &k, &v, &bias).unwrap();
        for (a, b) in out.data.iter().zip(&v.data) {
            assert!((a - b).abs() < 1e-4);
        }
        for row in w.data.chunks(6) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_mismatch() {
        let q = SeqBatch::zeros(1, 1, 2, 3);
        let k = SeqBatch::zeros(1, 1, 2, 4);
        assert!(grouped_attention(&q, &k, &k, &PositionBias::zeros(1, 4)).is_err());
        assert!(grouped_attention(&q, &q, &q, &PositionBias::zeros(1, 4)).is_err());
        assert!(PositionBias::from_vec(1, 1, vec![f32::NAN]).is_err());
    }
}
