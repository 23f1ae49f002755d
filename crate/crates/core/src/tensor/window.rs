use super::{check_divisible, volume, Tensor5, Triple};
use crate::error::{Error, Result};

/// Splits every modality into non-overlapping `b`-sized windows.
///
/// The result is `[M * n_windows, C, b_d, b_h, b_w]`, modality-major, with
/// windows in lexicographic order (depth slowest, width fastest).
pub fn window_partition(t: &Tensor5, b: Triple) -> Result<Tensor5> {
    let [m, c, d, h, w] = t.dims();
    check_divisible([d, h, w], b)?;
    let (nd, nh, nw) = (d / b[0], h / b[1], w / b[2]);
    let n_windows = nd * nh * nw;
    let mut out = Tensor5::zeros([m * n_windows, c, b[0], b[1], b[2]]);
    let wvol = volume(b);
    let data = out.data_mut();
    let mut dst = 0;
    for mi in 0..m {
        for wz in 0..nd {
            for wy in 0..nh {
                for wx in 0..nw {
                    for ci in 0..c {
                        let src = t.plane(mi, ci);
                        for z in 0..b[0] {
                            for y in 0..b[1] {
                                let start = ((wz * b[0] + z) * h + wy * b[1] + y) * w + wx * b[2];
                                data[dst..dst + b[2]].copy_from_slice(&src[start..start + b[2]]);
                                dst += b[2];
                            }
                        }
                    }
                }
            }
        }
    }
    debug_assert_eq!(dst, m * n_windows * c * wvol);
    Ok(out)
}

/// Inverse of [`window_partition`]: reassembles windows into `[M, C, extent]`.
pub fn window_reverse(windows: &Tensor5, extent: Triple) -> Result<Tensor5> {
    let [total, c, bd, bh, bw] = windows.dims();
    let b = [bd, bh, bw];
    check_divisible(extent, b)?;
    let [d, h, w] = extent;
    let (nd, nh, nw) = (d / bd, h / bh, w / bw);
    let n_windows = nd * nh * nw;
    if total % n_windows != 0 {
        return Err(Error::dim(
            "modality",
            format!("{total} windows is not a multiple of {n_windows} per modality"),
        ));
    }
    let m = total / n_windows;
    let mut out = Tensor5::zeros([m, c, d, h, w]);
    let src = windows.data();
    let mut pos = 0;
    for mi in 0..m {
        for wz in 0..nd {
            for wy in 0..nh {
                for wx in 0..nw {
                    for ci in 0..c {
                        let dst = out.plane_mut(mi, ci);
                        for z in 0..bd {
                            for y in 0..bh {
                                let start = ((wz * bd + z) * h + wy * bh + y) * w + wx * bw;
                                dst[start..start + bw].copy_from_slice(&src[pos..pos + bw]);
                                pos += bw;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}
