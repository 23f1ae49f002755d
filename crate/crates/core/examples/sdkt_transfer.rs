//! Pulls random student features towards a teacher's Gram matrix by gradient descent.
//!
//! Run with `cargo run --example sdkt_transfer`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use veloxseg::sdkt::{gram, mmd_poly2, sdkt_grad, sdkt_loss, FeatureMap};

fn random(rng: &mut ChaCha8Rng, c: usize, n: usize) -> veloxseg::Result<FeatureMap<f64>> {
    FeatureMap::new(c, n, (0..c * n).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

fn main() -> veloxseg::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (c, n) = (8, 216);
    // teacher with correlated channels, student independent
    let base = random(&mut rng, 1, n)?;
    let teacher = FeatureMap::new(
        c,
        n,
        (0..c).flat_map(|ch| base.row(0).iter().map(move |v| v * (1.0 + ch as f64 * 0.2))).collect(),
    )?;
    let mut student = random(&mut rng, c, n)?;
    let teachers = [(teacher.clone(), 1.0)];
    let lr = 40.0;
    for step in 0..=200 {
        if step % 40 == 0 {
            let loss = sdkt_loss(&student, &teachers)?;
            let trace = gram(&student).trace();
            println!("step {step:3}: loss {loss:.3e}, student Gram trace {trace:.4}");
        }
        let g = sdkt_grad(&student, &teachers)?;
        for (s, d) in student.data_mut().iter_mut().zip(g.data()) {
            *s -= lr * d;
        }
    }
    let scaled = (c * c) as f64 * gram(&student).distance_sq(&gram(&teacher));
    println!("C²·|GM(S) - GM(T)|² = {scaled:.3e}, mmd = {:.3e}", mmd_poly2(&student, &teacher)?);
    Ok(())
}
