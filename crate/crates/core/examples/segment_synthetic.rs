//! Generates a synthetic two-modality case, runs the untrained network on it and
//! scores the argmax prediction against the planted label.
//!
//! Run with `cargo run --release --example segment_synthetic [seed]`.

use std::time::Instant;

use veloxseg::analysis::{argmax_labels, dice};
use veloxseg::io::{gen_synthetic, SyntheticSpec};
use veloxseg::network::{build, NetworkConfig};

fn main() -> veloxseg::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let (volumes, label) = gen_synthetic(&SyntheticSpec::default(), seed)?;
    let foreground = label.data().iter().filter(|&&v| v > 0.0).count();
    println!("input {:?}, {foreground} foreground voxels", volumes.dims());

    let cfg = NetworkConfig::autopet();
    let net = build(&cfg, seed)?;
    let start = Instant::now();
    let logits = net.forward(&volumes)?;
    println!("logits {:?} in {:.2} s", logits.dims(), start.elapsed().as_secs_f64());

    let pred = argmax_labels(&logits);
    let predicted = pred.data().iter().filter(|&&v| v > 0.0).count();
    println!("untrained weights: {predicted} voxels predicted, dice {:.4}", dice(&pred, &label)?);
    Ok(())
}
