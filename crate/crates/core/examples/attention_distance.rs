//! Mean attention distance of each window pair of a deep-stage attention block.
//!
//! Attention at pair `i` runs over pooled tokens, so one step on the token grid
//! spans `small · voxel` input voxels. Run with `cargo run --release --example attention_distance`.

use veloxseg::analysis::{mad, MadInput};
use veloxseg::init::Initializer;
use veloxseg::pwa::{pwa_forward_traced, window_schedule, PwaParams};
use veloxseg::Tensor5;

fn main() -> veloxseg::Result<()> {
    // stage-3 geometry of the default model: 6³ features, 16 input voxels per feature voxel
    let (extent, voxel) = ([6; 3], 16.0);
    let sched = window_schedule(extent, [3; 3], [1; 3], 2)?;
    let c = 64;
    let params = PwaParams::init(c, &sched, 2, 4, 4, false, &mut Initializer::new(1))?;
    let e = Tensor5::from_fn([2, c, 6, 6, 6], |i| ((i[0] * 31 + i[1] * 7 + i[2] * 5 + i[3] * 3 + i[4]) % 13) as f32 / 6.5 - 1.0);
    let (_, weights) = pwa_forward_traced(&e, &params, &sched)?;

    let grid = sched.tokens_per_axis();
    let l = grid.iter().product::<usize>();
    let mut entry = 0;
    for (i, pair) in sched.pairs().iter().enumerate() {
        let spacing = voxel * pair.small[0] as f64;
        let mut total = 0.0;
        let mut count = 0;
        for b in entry..entry + sched.windows_at(i) {
            for h in 0..weights.heads {
                // the first modality's queries against its own keys, renormalized
                let full = weights.matrix(b, h);
                let mut block = Vec::with_capacity(l * l);
                for row in 0..l {
                    let r = &full[row * weights.len..row * weights.len + l];
                    let z: f32 = r.iter().sum();
                    block.extend(r.iter().map(|v| (v / z) as f64));
                }
                total += mad(&MadInput::new(block, grid, spacing)?);
                count += 1;
            }
        }
        entry += sched.windows_at(i);
        println!(
            "pair {i}: big {:?}, token spacing {spacing} voxels, mean attention distance {:.2} voxels",
            pair.big,
            total / count as f64
        );
    }
    Ok(())
}
