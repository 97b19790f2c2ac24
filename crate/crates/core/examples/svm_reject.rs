//! One-vs-all linear SVMs with a reject option: a vector is assigned to the
//! highest-scoring class only if some score is positive.
//!
//! ```bash
//! cargo run --release --example svm_reject
//! ```

use cope::classifier::{train_ova, Decision, SvmOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cope::error::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let classes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
    let centers = [[0.9, 0.1, 0.1], [0.1, 0.9, 0.1], [0.1, 0.1, 0.9]];
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..30 {
            x.push(c.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect::<Vec<f64>>());
            y.push(Some(k));
        }
    }
    // Unlabeled background vectors are negatives for every class.
    for _ in 0..40 {
        x.push((0..3).map(|_| rng.random_range(0.0..0.15)).collect());
        y.push(None);
    }
    let model = train_ova(&x, &y, &classes, &SvmOptions::default())?;
    for (name, m) in classes.iter().zip(model.models()) {
        println!("class {name}: w = {:.2?}, b = {:.3}, J = {:.2}", m.weights, m.bias, m.cost_factor);
    }

    for probe in [[0.85, 0.15, 0.05], [0.1, 0.2, 0.8], [0.05, 0.05, 0.05], [0.6, 0.6, 0.1]] {
        let scores = model.scores(&probe)?;
        let verdict = match model.decide(&probe)? {
            Decision::Reject => "reject".to_string(),
            Decision::Class(k) => classes[k].clone(),
        };
        println!("{probe:?} -> scores {scores:.2?} -> {verdict}");
    }
    Ok(())
}
