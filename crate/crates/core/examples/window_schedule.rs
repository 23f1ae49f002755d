//! Lists the window pairs of every attention stage and the attention cost at each.
//!
//! Run with `cargo run --example window_schedule [edge]` (default 96).

use veloxseg::network::NetworkConfig;
use veloxseg::pwa::{pwa_flops, pwa_flops_multimodal};

fn main() -> veloxseg::Result<()> {
    let edge: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(96);
    let cfg = NetworkConfig::autopet();
    let extents = cfg.stage_extents([edge; 3])?;
    for (k, sched) in cfg.schedules([edge; 3])?.iter().enumerate() {
        let Some(sched) = sched else { continue };
        let c = cfg.stage_widths[k];
        println!("stage {} at {:?}, C = {c}, L = {}", k + 1, extents[k], sched.seq_len());
        for (i, pair) in sched.pairs().iter().enumerate() {
            println!(
                "  pair {i}: big {:?} small {:?}, {} windows",
                pair.big,
                pair.small,
                sched.windows_at(i)
            );
        }
        println!(
            "  multiplications: {} single-modality, {} for M = {}",
            pwa_flops(sched, c),
            pwa_flops_multimodal(sched, c, cfg.modalities),
            cfg.modalities
        );
    }
    Ok(())
}
