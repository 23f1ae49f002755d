//! Builds the preset networks and prints parameter and operation counts per stage.
//!
//! Run with `cargo run --release --example network_summary [preset]`.

use veloxseg::network::{build, NetworkConfig};

fn main() -> veloxseg::Result<()> {
    let names: Vec<String> = match std::env::args().nth(1) {
        Some(name) => vec![name],
        None => ["autopet", "conv-only", "early-fusion4"].map(String::from).to_vec(),
    };
    for name in names {
        let cfg = NetworkConfig::preset(&name)?;
        let net = build(&cfg, 0)?;
        let report = net.cost_report(cfg.input_extent)?;
        println!(
            "{name}: {:.3} M params, {:.3} GFLOPs at {:?}",
            net.param_count() as f64 / 1e6,
            report.flops() as f64 / 1e9,
            cfg.input_extent
        );
        for stage in &report.stages {
            println!(
                "  {:<9} params {:>8}  conv {:>12}  attention {:>11}  elementwise {:>10}",
                stage.name, stage.params, stage.conv_flops, stage.attention_flops, stage.elementwise_flops
            );
        }
    }
    Ok(())
}
