//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veloxseg::jl::head_channels;
use veloxseg::network::NetworkConfig;
use veloxseg::pwa::{window_schedule, PositionBias, PwaParams, WindowSchedule};
use veloxseg::sdkt::{sdkt_grad, sdkt_loss, FeatureMap};
use veloxseg::tensor::{ConvParams, LayerNorm};
use veloxseg::Tensor5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

pub fn random_tensor(rng: &mut ChaCha8Rng, dims: [usize; 5], scale: f32) -> Tensor5 {
    Tensor5::from_vec(dims, uniform_vec(rng, dims.iter().product(), scale)).unwrap()
}

fn random_pw(rng: &mut ChaCha8Rng, c_in: usize, c_out: usize, bias: bool, scale: f32) -> ConvParams {
    let b = bias.then(|| uniform_vec(rng, c_out, scale));
    ConvParams::pointwise(c_in, c_out, uniform_vec(rng, c_in * c_out, scale), b).unwrap()
}

/// Attention parameters with every weight drawn uniformly, including norm affine and biases.
pub fn random_pwa(
    rng: &mut ChaCha8Rng,
    channels: usize,
    sched: &WindowSchedule,
    modalities: usize,
    n_head: usize,
    c_min: usize,
    scale: f32,
) -> PwaParams {
    let c_hat = head_channels(channels, c_min, sched.n_win(), n_head);
    let projected = sched.n_win() * n_head * c_hat;
    let len = modalities * sched.seq_len();
    let norm = LayerNorm {
        weight: (0..channels).map(|_| rng.gen_range(0.5..1.5)).collect(),
        bias: uniform_vec(rng, channels, 0.2),
    };
    let q = random_pw(rng, channels, projected, true, scale);
    let k = random_pw(rng, channels, projected, true, scale);
    let v = random_pw(rng, channels, projected, true, scale);
    let mixer = random_pw(rng, projected, channels, true, scale);
    let bias = (0..sched.n_win())
        .map(|_| PositionBias::from_vec(n_head, len, uniform_vec(rng, n_head * len * len, 1.0)).unwrap())
        .collect();
    PwaParams::new(norm, q, k, v, mixer, bias, sched, modalities, n_head, c_min).unwrap()
}

fn pointwise_f64(p: &ConvParams, x: &[f64]) -> Vec<f64> {
    let (ci, co) = (p.c_in(), p.c_out());
    (0..co)
        .map(|o| {
            let b = p.bias().map_or(0.0, |b| b[o] as f64);
            b + (0..ci).map(|i| p.weight()[o * ci + i] as f64 * x[i]).sum::<f64>()
        })
        .collect()
}

/// Plain multi-head attention over all `M·L` voxels of a single global window, in f64.
///
/// Builds every token vector explicitly, with no windows, pooling or
/// sequence batches, and returns `E + mixer(attention)` in `[M, C, D, H, W]` order.
pub fn dense_attention_oracle(e: &Tensor5, p: &PwaParams) -> Vec<f64> {
    let [m, c, d, h, w] = e.dims();
    let n = d * h * w;
    let (heads, ch) = (p.n_head(), p.c_hat());
    let mut q = Vec::with_capacity(m * n);
    let mut k = Vec::with_capacity(m * n);
    let mut v = Vec::with_capacity(m * n);
    for mi in 0..m {
        for t in 0..n {
            let x: Vec<f64> = (0..c).map(|ci| e.data()[(mi * c + ci) * n + t] as f64).collect();
            let mean = x.iter().sum::<f64>() / c as f64;
            let var = x.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / c as f64;
            let inv = 1.0 / (var + 1e-5).sqrt();
            let xn: Vec<f64> = (0..c)
                .map(|ci| (x[ci] - mean) * inv * p.norm.weight[ci] as f64 + p.norm.bias[ci] as f64)
                .collect();
            q.push(pointwise_f64(&p.q, &xn));
            k.push(pointwise_f64(&p.k, &xn));
            v.push(pointwise_f64(&p.v, &xn));
        }
    }
    let tokens = m * n;
    let bias = &p.pos_bias[0];
    let mut attended = vec![vec![0.0f64; heads * ch]; tokens];
    for hd in 0..heads {
        let r = hd * ch..(hd + 1) * ch;
        for i in 0..tokens {
            let scores: Vec<f64> = (0..tokens)
                .map(|j| {
                    let dot: f64 = r.clone().map(|c| q[i][c] * k[j][c]).sum();
                    dot / (ch as f64).sqrt() + bias.data[(hd * tokens + i) * tokens + j] as f64
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            for c in r.clone() {
                attended[i][c] = (0..tokens).map(|j| exps[j] / z * v[j][c]).sum();
            }
        }
    }
    let mut out = vec![0.0; m * c * n];
    for mi in 0..m {
        for t in 0..n {
            let y = pointwise_f64(&p.mixer, &attended[mi * n + t]);
            for ci in 0..c {
                let idx = (mi * c + ci) * n + t;
                out[idx] = e.data()[idx] as f64 + y[ci];
            }
        }
    }
    out
}

/// A random global-window instance: extent at most `4³`, `C ≤ 32`, `M ∈ {1, 2}`.
pub fn dense_instance(seed: u64) -> (Tensor5, PwaParams, WindowSchedule) {
    let mut r = rng(seed);
    let extent = [r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=4)];
    let m = r.gen_range(1..=2);
    let c = [4, 8, 16, 32][r.gen_range(0..4)];
    let n_head = r.gen_range(1..=2);
    let c_min = [4, 8][r.gen_range(0..2)];
    let sched = window_schedule(extent, extent, [1; 3], 2).unwrap();
    let p = random_pwa(&mut r, c, &sched, m, n_head, c_min, 0.3);
    let e = random_tensor(&mut r, [m, c, extent[0], extent[1], extent[2]], 1.0);
    (e, p, sched)
}

/// Relative error `‖a − b‖ / ‖b‖` of an analytic gradient against central differences with step `h`.
pub fn fd_relative_error(seg: &FeatureMap<f64>, teachers: &[(FeatureMap<f64>, f64)], h: f64) -> f64 {
    let analytic = sdkt_grad(seg, teachers).unwrap();
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..seg.data().len() {
        let mut plus = seg.clone();
        plus.data_mut()[i] += h;
        let mut minus = seg.clone();
        minus.data_mut()[i] -= h;
        let fd = (sdkt_loss(&plus, teachers).unwrap() - sdkt_loss(&minus, teachers).unwrap()) / (2.0 * h);
        diff += (analytic.data()[i] - fd).powi(2);
        norm += fd.powi(2);
    }
    (diff / norm.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn random_features(rng: &mut ChaCha8Rng, c: usize, n: usize) -> FeatureMap<f64> {
    FeatureMap::new(c, n, (0..c * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Exhaustive `(1/L) Σ_i Σ_j W_ij · s·dist(i, j)` with coordinates from the published index mapping.
pub fn brute_mad(w: &[f64], grid: [usize; 3], s: f64) -> f64 {
    let [d, h, wd] = grid;
    let l = d * h * wd;
    let coord = |i: usize| {
        let z = i / (h * wd);
        let y = (i - z * h * wd) / wd;
        let x = i % wd;
        (x as f64, y as f64, z as f64)
    };
    let mut sum = 0.0;
    for i in 0..l {
        for j in 0..l {
            let (xi, yi, zi) = coord(i);
            let (xj, yj, zj) = coord(j);
            let dist = s * ((xi - xj).powi(2) + (yi - yj).powi(2) + (zi - zj).powi(2)).sqrt();
            sum += w[i * l + j] * dist;
        }
    }
    sum / l as f64
}

/// Random row-stochastic `L × L` matrix.
pub fn random_stochastic(rng: &mut ChaCha8Rng, l: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(l * l);
    for _ in 0..l {
        let row: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let z: f64 = row.iter().sum();
        w.extend(row.iter().map(|v| v / z));
    }
    w
}

/// Hand tally of stored parameters, written from the architecture description
/// rather than from the built tensors.
pub fn tally_params(cfg: &NetworkConfig) -> usize {
    let w = cfg.stage_widths;
    let m = cfg.modalities;
    let p = cfg.patch_size;
    let kernels: usize = cfg.kernels.iter().map(|k| k * k * k).sum();
    let nb = cfg.kernels.len();
    let conv = |cin: usize, cout: usize, k: usize, groups: usize| cout * (cin / groups) * k * k * k + cout;
    let ffn = |c: usize, e: usize| if e == 0 { 0 } else { c * e * c + e * c + e * c * c + c };
    let jlc = |c: usize, gs: usize, e: usize| c * gs * kernels + nb * c + 2 * c + ffn(c, e);

    let mut total = conv(m, w[0], 1, 1) + conv(w[0], w[0], p, w[0] / cfg.group_sizes[0]);
    for k in 0..4 {
        if k > 0 {
            total += conv(w[k - 1], w[k], 3, 1);
        }
        total += jlc(w[k], cfg.group_sizes[k], cfg.expansion_ratios[k]);
    }
    if cfg.has_attention() {
        let m_att = if cfg.early_fusion { 1 } else { m };
        let embed_in = if cfg.early_fusion { m } else { 1 };
        let extents: Vec<usize> = (0..4).map(|k| cfg.input_extent[0] / (p << k)).collect();
        for k in 0..4 {
            total += if k == 0 { conv(embed_in, w[0], p, 1) } else { conv(w[k - 1], w[k], 2, 1) };
            if cfg.attention_depth[k] == 0 {
                continue;
            }
            let c = w[k];
            let b = cfg.big_window_minima[k];
            let tokens: usize = (0..3).map(|a| b[a] / cfg.small_window_minima[k][a]).product();
            let mut n_win = 1;
            while b[0] * cfg.r.pow(n_win as u32 - 1) < extents[k] {
                n_win += 1;
            }
            let c_hat = {
                let mut n = 1;
                while n_win * cfg.n_heads[k] * n * cfg.c_min < c {
                    n += 1;
                }
                n * cfg.c_min
            };
            let proj = n_win * cfg.n_heads[k] * c_hat;
            let qkv_bias = if cfg.qkv_bias { proj } else { 0 };
            let len = m_att * tokens;
            let layer = 2 * c
                + 3 * (c * proj + qkv_bias)
                + proj * c
                + c
                + n_win * cfg.n_heads[k] * len * len
                + 2 * c
                + ffn(c, cfg.expansion_ratios[k]);
            total += cfg.attention_depth[k] * layer + conv(c, c, 1, 1);
        }
    }
    for k in (1..4).rev() {
        let c = w[k - 1];
        total += conv(w[k], 8 * c, 1, 1) + conv(2 * c, c, 1, 1) + jlc(c, cfg.group_sizes[k - 1], cfg.expansion_ratios[k - 1]);
    }
    total + conv(w[0], p * p * p * cfg.head_channels, 1, 1) + conv(cfg.head_channels, cfg.num_classes, 1, 1)
}

/// Random schedule with unit minimum small window: per-axis `b1 ∈ 1..=4`,
/// the same number of doublings on every axis, volume at most `24³`.
pub fn random_unit_schedule(rng: &mut ChaCha8Rng, max_levels: u32) -> WindowSchedule {
    loop {
        let b1 = [rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4)];
        let levels = rng.gen_range(0..=max_levels);
        let extent = b1.map(|b| b << levels);
        if extent.iter().product::<usize>() <= 24 * 24 * 24 {
            return window_schedule(extent, b1, [1; 3], 2).unwrap();
        }
    }
}
