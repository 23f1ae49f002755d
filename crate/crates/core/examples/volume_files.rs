//! Writes a synthetic case to volume files, reads it back and checks the bytes.
//!
//! Run with `cargo run --example volume_files [dir]`.

use std::path::PathBuf;

use veloxseg::io::{ball_voxel_count, encode_volume, gen_synthetic, read_volume, write_synthetic, SyntheticSpec, HEADER_LEN};

fn main() -> veloxseg::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(std::env::temp_dir, PathBuf::from);
    let spec = SyntheticSpec {
        extent: [32; 3],
        blobs: 2,
        radius: 4,
        ..SyntheticSpec::default()
    };
    let (volumes, label) = gen_synthetic(&spec, 3)?;
    let prefix = dir.join("veloxseg_case");
    let paths = write_synthetic(prefix.to_str().expect("utf-8 path"), &volumes, &label)?;
    for path in &paths {
        let t = read_volume(path)?;
        let bytes = encode_volume(&t);
        println!("{}: dims {:?}, {} bytes ({} header)", path.display(), t.dims(), bytes.len(), HEADER_LEN);
    }
    let back = read_volume(paths.last().expect("label path"))?;
    assert_eq!(back, label);
    let foreground = back.data().iter().filter(|&&v| v > 0.0).count();
    println!(
        "label round trip exact; {foreground} foreground voxels, at most {} from {} balls",
        spec.blobs * ball_voxel_count(spec.radius),
        spec.blobs
    );
    Ok(())
}
