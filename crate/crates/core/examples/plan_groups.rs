//! Prints JL-bound group sizes per stage for the 3D and 2D stage profiles.
//!
//! Run with `cargo run --example plan_groups [alpha]`.

use veloxseg::jl::{plan_profile, Profile};

fn main() -> veloxseg::Result<()> {
    let alpha: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1.0);
    for (profile, modalities) in [(Profile::Medical3d, 1), (Profile::Medical3d, 2), (Profile::Medical3d, 4), (Profile::Natural2d, 3)] {
        let plan = plan_profile(profile, modalities, &profile.volume_ratios(), 4, alpha)?;
        let bounds: Vec<String> = plan.raw_bounds.iter().map(|b| format!("{b:5.2}")).collect();
        println!(
            "{profile:?} M={modalities}: bounds [{}] -> group sizes {:?}",
            bounds.join(", "),
            plan.group_sizes
        );
    }
    Ok(())
}
