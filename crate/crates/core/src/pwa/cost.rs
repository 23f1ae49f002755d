//! Multiplication counts for paired-window attention.
//!
//! Big windows at pair `i` number `N / (B·r^{3i})` and each holds `L = B/S`
//! pooled tokens, so summing over pairs gives
//! `(N·κ/S)·(4C² + 2(B/S)·C)` with `κ = (1 − r^{−3·N_win}) / (1 − r^{−3})`:
//! four `C×C` projections per token plus the two `L×L×C` attention products
//! per window.

use num_rational::Ratio;

use super::schedule::WindowSchedule;
use crate::error::{Error, Result};
use crate::tensor::{
    matmul_counted, max_pool3, softmax_rows, volume, window_partition, Matrix, Tensor5,
};

/// `κ = Σ_{i<n_win} r^{−3i}` as an exact fraction.
pub fn kappa(r: u64, n_win: u32) -> Ratio<u128> {
    let r3 = (r as u128).pow(3);
    (0..n_win).fold(Ratio::from_integer(0u128), |acc, i| {
        acc + Ratio::new(1, r3.pow(i))
    })
}

/// Closed-form multiplication count for one modality.
pub fn pwa_flops_closed_form(n: u64, big: u64, small: u64, c: u64, n_win: u32, r: u64) -> Ratio<u128> {
    let (n, big, small, c) = (n as u128, big as u128, small as u128, c as u128);
    let tokens = Ratio::from_integer(n) * kappa(r, n_win) / small;
    tokens * (Ratio::from_integer(4 * c * c) + Ratio::new(2 * big * c, small))
}

fn schedule_terms(sched: &WindowSchedule) -> (u64, u64, u64, u32, u64) {
    let first = sched.pairs()[0];
    (
        volume(sched.extent()) as u64,
        volume(first.big) as u64,
        volume(first.small) as u64,
        sched.n_win() as u32,
        sched.r() as u64,
    )
}

/// Multiplications of paired-window attention over `sched` at width `c`.
pub fn pwa_flops(sched: &WindowSchedule, c: usize) -> u64 {
    let (n, b, s, n_win, r) = schedule_terms(sched);
    let cost = pwa_flops_closed_form(n, b, s, c as u64, n_win, r);
    debug_assert!(cost.is_integer());
    cost.to_integer() as u64
}

/// Multi-modal generalization: `M` modalities share each window, so the
/// sequence is `M·L` long. Reduces to [`pwa_flops`] at `M = 1`.
pub fn pwa_flops_multimodal(sched: &WindowSchedule, c: usize, modalities: usize) -> u64 {
    let (n, b, s, n_win, r) = schedule_terms(sched);
    let (c, m) = (c as u128, modalities as u128);
    let tokens = Ratio::from_integer(n as u128) * kappa(r, n_win) / s as u128;
    let cost = tokens * m * (Ratio::from_integer(4 * c * c) + Ratio::new(2 * m * b as u128 * c, s as u128));
    cost.to_integer() as u64
}

/// `C×C` projections of the single-width reference computation.
#[derive(Clone, Debug)]
pub struct ReferenceProjections {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub o: Matrix,
}

#[derive(Clone, Debug)]
pub struct ReferenceRun {
    /// Scalar multiplications executed by the projection and attention products.
    pub mults: u64,
    /// Output `C × L` token matrices, pair-major then window order.
    pub outputs: Vec<Matrix>,
}

/// Runs single-modality paired-window attention at full width `C` per pair,
/// counting every multiplication in the projections and attention products.
pub fn reference_pwa_counted(x: &Tensor5, sched: &WindowSchedule, p: &ReferenceProjections) -> Result<ReferenceRun> {
    let c = x.channels();
    if x.modalities() != 1 {
        return Err(Error::dim("modality", "reference run takes a single modality"));
    }
    for w in [&p.q, &p.k, &p.v, &p.o] {
        if w.rows != c || w.cols != c {
            return Err(Error::dim("channel", format!("projection must be {c}x{c}")));
        }
    }
    let l = sched.seq_len();
    let scale = 1.0 / (c as f32).sqrt();
    let mut mults = 0u64;
    let mut outputs = Vec::with_capacity(sched.total_windows());
    for pair in sched.pairs() {
        let pooled = max_pool3(&window_partition(x, pair.big)?, pair.small)?;
        for w in 0..pooled.modalities() {
            let tokens = Matrix::from_vec(c, l, pooled.modality(w).into_data())?;
            let q = matmul_counted(&p.q, &tokens, &mut mults)?;
            let k = matmul_counted(&p.k, &tokens, &mut mults)?;
            let v = matmul_counted(&p.v, &tokens, &mut mults)?;
            let mut scores = matmul_counted(&q.transpose(), &k, &mut mults)?;
            scores.data.iter_mut().for_each(|s| *s *= scale);
            let weights = softmax_rows(&scores);
            let attended = matmul_counted(&v, &weights.transpose(), &mut mults)?;
            outputs.push(matmul_counted(&p.o, &attended, &mut mults)?);
        }
    }
    Ok(ReferenceRun { mults, outputs })
}

#[cfg(test)]
mod tests {
    use super::super::schedule::window_schedule;
    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(kappa(2, 4), Ratio::new(32760, 28672));
        let s = window_schedule([24; 3], [3; 3], [1; 3], 2).unwrap();
        assert_eq!(pwa_flops(&s, 16), 29_820_960);
    }

    #[test]
    fn single_pair_has_unit_kappa() {
        assert_eq!(kappa(2, 1), Ratio::from_integer(1));
        let s = window_schedule([6; 3], [6; 3], [2; 3], 2).unwrap();
        // (N/S)(4C² + 2(B/S)C) with N = B = 216, S = 8, C = 4
        assert_eq!(pwa_flops(&s, 4), 27 * (64 + 2 * 27 * 4));
    }

    #[test]
    fn multimodal_reduces_to_single() {
        let s = window_schedule([12; 3], [3; 3], [1; 3], 2).unwrap();
        assert_eq!(pwa_flops_multimodal(&s, 8, 1), pwa_flops(&s, 8));
        assert!(pwa_flops_multimodal(&s, 8, 2) > 2 * pwa_flops(&s, 8));
    }

    #[test]
    fn width_doubling_tends_to_four() {
        let s = window_schedule([24; 3], [3; 3], [1; 3], 2).unwrap();
        let mut prev = 0.0;
        for c in [64usize, 256, 1024, 4096] {
            let ratio = pwa_flops(&s, 2 * c) as f64 / pwa_flops(&s, c) as f64;
            assert!(ratio < 4.0 && ratio > prev);
            prev = ratio;
        }
        assert!(prev > 3.98);
    }
}
