//! Single-thread throughput of the default and convolution-only models.
//!
//! Run with `cargo run --release --example throughput [edge] [iters]`; the edge must
//! tile the default windows, such as 96 or 192.

use veloxseg::bench::bench;
use veloxseg::network::NetworkConfig;

fn main() -> veloxseg::Result<()> {
    let mut args = std::env::args().skip(1);
    let edge: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(96);
    let iters: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5);
    for (name, cfg) in [("autopet", NetworkConfig::autopet()), ("conv-only", NetworkConfig::conv_only())] {
        let r = bench(&cfg, [edge; 3], 1, 1, iters)?;
        println!(
            "{name:<10} {:>6.3} patches/s  median {:.3} s  {:.3} GFLOPs  {:.3} M params",
            r.patches_per_second,
            r.median_seconds,
            r.flops as f64 / 1e9,
            r.params as f64 / 1e6
        );
        let heaviest = r.stage_shares.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("stages");
        println!("           heaviest part {} with {:.1}% of operations", heaviest.0, heaviest.1 * 100.0);
    }
    Ok(())
}
