use brittle_core::attacks::{clean_accuracy, fgsm, pgd, robust_accuracy, AttackConfig};
use brittle_core::data::{synth_linear_dataset, Dataset};
use brittle_core::models::{
    cross_entropy_loss, linear_oracle_model, per_sample_loss, train, ArchitectureSpec,
    BlackBoxModel, Network, TrainOptions,
};
use brittle_core::{Matrix, SeededRng};
use proptest::prelude::*;

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Binary softmax-linear model; the loss of label `y` depends on `x` only
/// through the logit difference `g·x + c`.
fn binary_oracle(rng: &mut SeededRng, d: usize) -> (Network, Vec<f64>, f64) {
    let w = Matrix::from_vec(
        2,
        d,
        (0..2 * d).map(|_| rng.uniform_in(-2.0, 2.0)).collect(),
    )
    .unwrap();
    let b = [rng.uniform_in(-0.5, 0.5), rng.uniform_in(-0.5, 0.5)];
    let g: Vec<f64> = (0..d).map(|j| w.get(1, j) - w.get(0, j)).collect();
    (linear_oracle_model(&w, &b).unwrap(), g, b[1] - b[0])
}

/// `max_{‖δ‖∞ ≤ ε} CE(x + δ, label)` for the binary oracle.
fn analytic_max_loss(g: &[f64], c: f64, x: &[f64], label: usize, eps: f64) -> f64 {
    let margin: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + c;
    let signed = if label == 1 { margin } else { -margin };
    let l1: f64 = g.iter().map(|v| v.abs()).sum();
    softplus(-(signed - eps * l1))
}

#[test]
fn pgd_reaches_the_linear_worst_case() {
    let mut rng = SeededRng::new(31);
    for _ in 0..20 {
        let d = 1 + rng.below(12);
        let (model, g, c) = binary_oracle(&mut rng, d);
        let eps = rng.uniform_in(0.01, 0.1);
        let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(eps, 1.0 - eps)).collect();
        let label = rng.below(2);
        let config = AttackConfig {
            steps: 10,
            step_size: eps,
            ..AttackConfig::linf(eps).with_seed(rng.next_seed())
        };
        let xm = Matrix::row_vector(&x).unwrap();
        let adv = pgd(&model, &xm, &[label], &config).unwrap();
        let loss = cross_entropy_loss(&model.predict(&adv).unwrap(), &[label]).unwrap();
        let expected = analytic_max_loss(&g, c, &x, label, eps);
        assert!(
            (loss - expected).abs() <= 1e-8 * expected.max(1.0),
            "{loss} vs {expected}"
        );
    }
}

#[test]
fn robust_accuracy_at_zero_epsilon_is_clean_accuracy() {
    let ds = synth_linear_dataset(
        &mut SeededRng::new(4),
        300,
        5,
        &[1.0, -2.0, 0.5, 0.0, 1.0],
        -0.2,
    )
    .unwrap();
    let spec = ArchitectureSpec::Mlp {
        input_dim: 5,
        hidden: vec![16],
        num_classes: 2,
    };
    let mut rng = SeededRng::new(5);
    let mut model = Network::new("m", spec, &mut rng).unwrap();
    train(
        &mut model,
        &ds,
        &TrainOptions {
            epochs: 2,
            ..TrainOptions::default()
        },
        &mut rng,
    )
    .unwrap();
    let clean = clean_accuracy(&model, &ds).unwrap();
    assert_eq!(
        robust_accuracy(&model, &ds, &AttackConfig::linf(0.0)).unwrap(),
        clean
    );
}

#[test]
fn constant_prediction_cannot_be_attacked() {
    let w = Matrix::zeros(3, 4);
    let model = linear_oracle_model(&w, &[0.2, 1.0, 0.0]).unwrap();
    let mut rng = SeededRng::new(6);
    let x = Matrix::from_vec(250, 4, (0..1000).map(|_| rng.uniform()).collect()).unwrap();
    let labels: Vec<usize> = (0..250).map(|_| rng.below(3)).collect();
    let freq = labels.iter().filter(|&&l| l == 1).count() as f64 / 250.0;
    let ds = Dataset::new("c", x, Some(labels), 3, None).unwrap();
    for eps in [0.0, 0.05, 0.3, 1.0] {
        assert_eq!(
            robust_accuracy(&model, &ds, &AttackConfig::linf(eps)).unwrap(),
            freq
        );
    }
}

#[test]
fn robust_accuracy_is_nonincreasing_on_the_linear_oracle() {
    let mut rng = SeededRng::new(7);
    let (model, g, c) = binary_oracle(&mut rng, 6);
    let x = Matrix::from_vec(400, 6, (0..2400).map(|_| rng.uniform()).collect()).unwrap();
    let labels: Vec<usize> = x
        .row_iter()
        .map(|r| usize::from(g.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() + c > 0.0))
        .collect();
    let ds = Dataset::new("lin", x, Some(labels), 2, None).unwrap();
    let mut previous = f64::INFINITY;
    for eps in [
        0.0,
        1.0 / 255.0,
        2.0 / 255.0,
        4.0 / 255.0,
        8.0 / 255.0,
        0.1,
        0.3,
    ] {
        let acc = robust_accuracy(&model, &ds, &AttackConfig::linf(eps).with_seed(3)).unwrap();
        assert!(acc <= previous, "eps {eps}: {acc} > {previous}");
        previous = acc;
    }
    assert!(previous < 1.0);
}

#[test]
fn achieved_loss_grows_with_epsilon_on_a_trained_mlp() {
    let ds = synth_linear_dataset(
        &mut SeededRng::new(12),
        400,
        8,
        &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0],
        0.0,
    )
    .unwrap();
    let spec = ArchitectureSpec::Mlp {
        input_dim: 8,
        hidden: vec![32],
        num_classes: 2,
    };
    let mut rng = SeededRng::new(13);
    let mut model = Network::new("m", spec, &mut rng).unwrap();
    train(
        &mut model,
        &ds,
        &TrainOptions {
            epochs: 3,
            ..TrainOptions::default()
        },
        &mut rng,
    )
    .unwrap();
    let labels = ds.labels().unwrap();
    let mut previous = 0.0;
    for eps in [0.0, 2.0 / 255.0, 8.0 / 255.0] {
        let adv = pgd(
            &model,
            ds.features(),
            labels,
            &AttackConfig::linf(eps).with_seed(1),
        )
        .unwrap();
        let loss = cross_entropy_loss(&model.predict(&adv).unwrap(), labels).unwrap();
        assert!(loss >= previous, "eps {eps}: {loss} < {previous}");
        previous = loss;
    }
}

#[test]
fn linear_oracle_loss_is_monotone_per_sample() {
    let mut rng = SeededRng::new(17);
    let (model, _, _) = binary_oracle(&mut rng, 5);
    let x = Matrix::from_vec(50, 5, (0..250).map(|_| rng.uniform()).collect()).unwrap();
    let labels: Vec<usize> = (0..50).map(|_| rng.below(2)).collect();
    let mut previous = vec![0.0; 50];
    for k in 0..=10 {
        let eps = 0.02 * k as f64;
        let config = AttackConfig {
            step_size: eps.max(1e-3),
            ..AttackConfig::linf(eps).with_seed(9)
        };
        let adv = pgd(&model, &x, &labels, &config).unwrap();
        let losses = per_sample_loss(&model.predict(&adv).unwrap(), &labels);
        for (l, p) in losses.iter().zip(&previous) {
            assert!(*l >= p - 1e-12);
        }
        previous = losses;
    }
}

fn random_mlp(seed: u64, d: usize) -> Network {
    let spec = ArchitectureSpec::Mlp {
        input_dim: d,
        hidden: vec![10],
        num_classes: 3,
    };
    Network::new("p", spec, &mut SeededRng::new(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pgd_stays_in_the_ball_and_the_box(seed in any::<u64>(), eps in 0.0f64..0.6, steps in 1usize..6, random_start in any::<bool>()) {
        let model = random_mlp(seed, 7);
        let mut rng = SeededRng::new(seed ^ 1);
        let x = Matrix::from_vec(4, 7, (0..28).map(|_| rng.uniform()).collect()).unwrap();
        let labels: Vec<usize> = (0..4).map(|_| rng.below(3)).collect();
        let config = AttackConfig {
            steps,
            random_start,
            step_size: if eps == 0.0 { 0.0 } else { eps / 2.0 },
            ..AttackConfig::linf(eps).with_seed(seed)
        };
        let adv = pgd(&model, &x, &labels, &config).unwrap();
        for (a, o) in adv.as_slice().iter().zip(x.as_slice()) {
            prop_assert!((0.0..=1.0).contains(a));
            prop_assert!((a - o).abs() <= eps + 1e-9);
        }
    }

    #[test]
    fn fgsm_is_single_step_pgd(seed in any::<u64>(), eps in 0.001f64..0.5) {
        let model = random_mlp(seed, 5);
        let mut rng = SeededRng::new(seed ^ 2);
        let x = Matrix::from_vec(6, 5, (0..30).map(|_| rng.uniform()).collect()).unwrap();
        let labels: Vec<usize> = (0..6).map(|_| rng.below(3)).collect();
        let config = AttackConfig {
            steps: 1,
            step_size: eps,
            random_start: false,
            ..AttackConfig::linf(eps)
        };
        let a = fgsm(&model, &x, &labels, eps).unwrap();
        let b = pgd(&model, &x, &labels, &config).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn fgsm_with_zero_epsilon_is_identity() {
    let model = random_mlp(1, 4);
    let x = Matrix::from_rows(&[[0.1, 0.9, 0.5, 0.0]]).unwrap();
    assert_eq!(fgsm(&model, &x, &[2], 0.0).unwrap(), x);
}
