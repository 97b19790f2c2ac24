use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn opts() -> SvmOptions {
    SvmOptions::default()
}

/// Exhaustive 2-D oracle: nested ternary search over `(w1, w2)` of the
/// primal with the bias minimized exactly at every point.
fn oracle_2d(pos: &[Vec<f64>], neg: &[Vec<f64>], c_pos: f64, c_neg: f64) -> f64 {
    let x: Vec<&Vec<f64>> = pos.iter().chain(neg).collect();
    let y: Vec<f64> = pos.iter().map(|_| 1.0).chain(neg.iter().map(|_| -1.0)).collect();
    let cost: Vec<f64> = pos.iter().map(|_| c_pos).chain(neg.iter().map(|_| c_neg)).collect();
    let primal = |w1: f64, w2: f64| {
        let scores: Vec<f64> = x.iter().map(|v| w1 * v[0] + w2 * v[1]).collect();
        // Minimize the piecewise-linear hinge over b at its breakpoints.
        let hinge = |b: f64| -> f64 {
            scores
                .iter()
                .zip(&y)
                .zip(&cost)
                .map(|((s, y), c)| c * (1.0 - y * (s + b)).max(0.0))
                .sum()
        };
        let best = scores
            .iter()
            .zip(&y)
            .map(|(s, y)| hinge(y - s))
            .fold(f64::INFINITY, f64::min);
        0.5 * (w1 * w1 + w2 * w2) + best
    };
    let bound = (2.0 * primal(0.0, 0.0)).sqrt() + 1.0;
    let ternary = |f: &dyn Fn(f64) -> f64| {
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        f(0.5 * (lo + hi))
    };
    ternary(&|w1| ternary(&|w2| primal(w1, w2)))
}

fn blobs(rng: &mut ChaCha8Rng, n: usize, center: [f64; 2], spread: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            vec![
                center[0] + spread * rng.random_range(-1.0..1.0),
                center[1] + spread * rng.random_range(-1.0..1.0),
            ]
        })
        .collect()
}

#[test]
fn separable_pair() {
    let m = train_binary(&[vec![1.0, 0.0]], &[vec![-1.0, 0.0]], &opts()).unwrap();
    assert!(m.score(&[1.0, 0.0]) >= 1.0 - 1e-6);
    assert!(m.score(&[-1.0, 0.0]) <= -1.0 + 1e-6);
    assert!((m.weights[0] - 1.0).abs() < 1e-6 && m.weights[1].abs() < 1e-9);
}

#[test]
fn cost_factor_is_exact() {
    assert_eq!(cost_factor(10, 30), 3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pos = blobs(&mut rng, 10, [1.0, 1.0], 0.5);
    let neg = blobs(&mut rng, 30, [-1.0, -1.0], 0.5);
    assert_eq!(train_binary(&pos, &neg, &opts()).unwrap().cost_factor, 3.0);
}

#[test]
fn separable_blobs_have_no_training_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pos = blobs(&mut rng, 50, [2.0, 1.0], 0.8);
    let neg = blobs(&mut rng, 50, [-1.0, -2.0], 0.8);
    let m = train_binary(&pos, &neg, &opts()).unwrap();
    assert!(pos.iter().all(|v| m.score(v) > 0.0));
    assert!(neg.iter().all(|v| m.score(v) < 0.0));
}

#[test]
fn objective_matches_oracle_on_small_sets() {
    for seed in 0..12u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let np = rng.random_range(1..=8);
        let nn = rng.random_range(1..=(20 - np).min(12));
        // Overlapping clouds so that some hinge terms stay active.
        let pos = blobs(&mut rng, np, [0.5, 0.3], 1.0);
        let neg = blobs(&mut rng, nn, [-0.4, -0.2], 1.0);
        let m = train_binary(&pos, &neg, &opts()).unwrap();
        let j = cost_factor(np, nn);
        let got = objective(&m, &pos, &neg, 1.0, j);
        let want = oracle_2d(&pos, &neg, j, 1.0);
        assert!(
            (got - want).abs() <= 1e-3 * want.abs().max(1e-12),
            "seed {seed}: {got} vs {want}"
        );
    }
}

#[test]
fn reject_rule_examples() {
    assert_eq!(decide_scores(&[-0.3, -0.1, -2.0]), Decision::Reject);
    assert_eq!(decide_scores(&[0.5, -0.2, 0.1]), Decision::Class(0));
    assert_eq!(decide_scores(&[0.4, 0.4]), Decision::Class(0));
    assert_eq!(decide_scores(&[-1.0, 0.0]), Decision::Class(1));
    assert_eq!(decide_scores(&[]), Decision::Reject);
}

#[test]
fn reject_rule_on_random_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let m = rng.random_range(1..6);
        let s: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..0.5)).collect();
        let all_negative = s.iter().all(|&v| v < 0.0);
        assert_eq!(decide_scores(&s) == Decision::Reject, all_negative);
    }
}

#[test]
fn cost_weighting_lowers_weighted_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pos = blobs(&mut rng, 6, [0.3, 0.2], 1.0);
    let neg = blobs(&mut rng, 40, [-0.3, -0.1], 1.0);
    let tight = SvmOptions {
        tolerance: 1e-10,
        ..opts()
    };
    let j = cost_factor(pos.len(), neg.len());
    let weighted = train_binary(&pos, &neg, &tight).unwrap();
    let (plain, _) = train_weighted(&pos, &neg, 1.0, 1.0, &tight).unwrap();
    assert!(objective(&weighted, &pos, &neg, 1.0, j) <= objective(&plain, &pos, &neg, 1.0, j) + 1e-9);
}

#[test]
fn degenerate_identical_points() {
    let v = vec![vec![0.5, 0.5]; 5];
    let m = train_binary(&v, &v, &opts()).unwrap();
    assert!(m.weights.iter().chain([&m.bias]).all(|x| x.is_finite()));
    let zeros = vec![vec![0.0, 0.0]; 3];
    let m = train_binary(&zeros, &zeros[..1], &opts()).unwrap();
    assert!(m.bias.is_finite());
}

#[test]
fn training_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pos = blobs(&mut rng, 30, [0.2, 0.2], 1.0);
    let neg = blobs(&mut rng, 60, [-0.2, 0.0], 1.0);
    let a = train_binary(&pos, &neg, &opts()).unwrap();
    let b = train_binary(&pos, &neg, &opts()).unwrap();
    assert_eq!(a.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>(), b.weights.iter().map(|w| w.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.bias.to_bits(), b.bias.to_bits());
}

fn three_class() -> (Vec<Vec<f64>>, Vec<Option<usize>>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (k, center) in [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]].iter().enumerate() {
        for _ in 0..20 {
            features.push(center.iter().map(|c| c + rng.random_range(-0.5..0.5)).collect());
            labels.push(Some(k));
        }
    }
    (features, labels, vec!["a".into(), "b".into(), "c".into()])
}

#[test]
fn ova_separable_three_classes() {
    let (f, l, classes) = three_class();
    let model = train_ova(&f, &l, &classes, &opts()).unwrap();
    assert_eq!(model.models().len(), 3);
    for m in model.models() {
        assert_eq!(m.cost_factor, 2.0);
    }
    for (v, label) in f.iter().zip(&l) {
        assert_eq!(model.decide(v).unwrap().class(), *label);
    }
    assert!(matches!(model.decide(&[1.0]), Err(Error::Dimension { .. })));
}

#[test]
fn ova_background_is_negative_everywhere() {
    let (mut f, mut l, classes) = three_class();
    for k in 0..10 {
        f.push(vec![0.01 * k as f64, 0.0, 0.0]);
        l.push(None);
    }
    let model = train_ova(&f, &l, &classes, &opts()).unwrap();
    assert_eq!(model.models()[0].cost_factor, 50.0 / 20.0);
    assert_eq!(model.decide(&[0.0, 0.0, 0.0]).unwrap(), Decision::Reject);
}

#[test]
fn ova_errors_and_single_class() {
    let (f, l, mut classes) = three_class();
    classes.push("ghost".into());
    match train_ova(&f, &l, &classes, &opts()) {
        Err(Error::Training(m)) => assert!(m.contains("ghost")),
        other => panic!("{other:?}"),
    }
    let single = train_ova(&f[..20], &l[..20], &classes[..1], &opts()).unwrap();
    assert_eq!(single.models().len(), 1);
    assert_eq!(single.decide(&f[0]).unwrap(), Decision::Class(0));
}

#[test]
fn model_text_round_trip() {
    let (f, l, classes) = three_class();
    let model = train_ova(&f, &l, &classes, &opts()).unwrap();
    let mut text = Vec::new();
    model.write_text(&mut text).unwrap();
    let back = MultiClassModel::parse_text(text.as_slice()).unwrap();
    assert_eq!(back, model);
    let text = String::from_utf8(text).unwrap();
    assert!(MultiClassModel::parse_text(text.replace("dimension 3", "dimension 4").as_bytes()).is_err());
    assert!(MultiClassModel::parse_text(text.replace("cope-svm v1", "svm").as_bytes()).is_err());
}

proptest! {
    #[test]
    fn decision_invariant_under_monotone_transform(
        s in prop::collection::vec(-3.0f64..3.0, 1..6),
        a in 0.1f64..10.0,
    ) {
        // Sign-preserving, strictly increasing.
        let t: Vec<f64> = s.iter().map(|v| a * v + v.powi(3)).collect();
        prop_assert_eq!(decide_scores(&s), decide_scores(&t));
    }
}
