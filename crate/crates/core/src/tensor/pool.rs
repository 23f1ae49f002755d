use super::{check_divisible, Tensor5, Triple};
use crate::error::Result;

/// Non-overlapping 3D max pooling with kernel and stride `s`.
pub fn max_pool3(t: &Tensor5, s: Triple) -> Result<Tensor5> {
    let [m, c, d, h, w] = t.dims();
    check_divisible([d, h, w], s)?;
    if s == [1, 1, 1] {
        return Ok(t.clone());
    }
    let (od, oh, ow) = (d / s[0], h / s[1], w / s[2]);
    let mut out = Tensor5::filled([m, c, od, oh, ow], f32::NEG_INFINITY);
    for mi in 0..m {
        for ci in 0..c {
            let src = t.plane(mi, ci);
            let dst = out.plane_mut(mi, ci);
            for z in 0..d {
                for y in 0..h {
                    let row = &src[(z * h + y) * w..(z * h + y + 1) * w];
                    let orow = ((z / s[0]) * oh + y / s[1]) * ow;
                    for (x, &v) in row.iter().enumerate() {
                        let o = &mut dst[orow + x / s[2]];
                        if v > *o {
                            *o = v;
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Nearest-neighbour unpooling: every value is broadcast over its `s`-block.
pub fn unpool_broadcast(t: &Tensor5, s: Triple) -> Tensor5 {
    let [m, c, d, h, w] = t.dims();
    if s == [1, 1, 1] {
        return t.clone();
    }
    let (od, oh, ow) = (d * s[0], h * s[1], w * s[2]);
    let mut out = Tensor5::zeros([m, c, od, oh, ow]);
    for mi in 0..m {
        for ci in 0..c {
            let src = t.plane(mi, ci);
            let dst = out.plane_mut(mi, ci);
            for z in 0..od {
                for y in 0..oh {
                    let srow = ((z / s[0]) * h + y / s[1]) * w;
                    let drow = &mut dst[(z * oh + y) * ow..(z * oh + y + 1) * ow];
                    for (x, o) in drow.iter_mut().enumerate() {
                        *o = src[srow + x / s[2]];
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_max() {
        let t = Tensor5::from_vec([1, 1, 2, 2, 2], (1..=8).map(|v| v as f32).collect()).unwrap();
        assert_eq!(max_pool3(&t, [2, 2, 2]).unwrap().data(), &[8.0]);
    }

    #[test]
    fn unit_pool_is_identity() {
        let t = Tensor5::from_fn([2, 2, 3, 3, 3], |i| (i[2] * 9 + i[3] * 3 + i[4]) as f32 - 4.0);
        assert_eq!(max_pool3(&t, [1, 1, 1]).unwrap(), t);
    }

    #[test]
    fn matches_per_block_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = Tensor5::from_fn([1, 3, 4, 4, 4], |_| rng.gen_range(-5.0..5.0));
        let p = max_pool3(&t, [2, 2, 2]).unwrap();
        for c in 0..3 {
            for bz in 0..2 {
                for by in 0..2 {
                    for bx in 0..2 {
                        let mut best = f32::NEG_INFINITY;
                        for dz in 0..2 {
                            for dy in 0..2 {
                                for dx in 0..2 {
                                    best = best.max(t.get([0, c, bz * 2 + dz, by * 2 + dy, bx * 2 + dx]));
                                }
                            }
                        }
                        assert_eq!(p.get([0, c, bz, by, bx]), best);
                    }
                }
            }
        }
    }

    #[test]
    fn anisotropic_pool_and_broadcast() {
        let t = Tensor5::from_fn([1, 1, 2, 4, 2], |i| (i[3] * 2 + i[4]) as f32);
        let p = max_pool3(&t, [1, 2, 2]).unwrap();
        assert_eq!(p.dims(), [1, 1, 2, 2, 1]);
        assert_eq!(p.data(), &[3.0, 7.0, 3.0, 7.0]);
        let u = unpool_broadcast(&p, [1, 2, 2]);
        assert_eq!(u.dims(), t.dims());
        assert_eq!(u.get([0, 0, 1, 3, 0]), 7.0);
        assert!(max_pool3(&t, [2, 3, 1]).is_err());
    }
}
