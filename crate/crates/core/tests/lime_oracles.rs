use brittle_core::lime::{
    explain, sample_neighborhood, sparsity, Kernel, LimeConfig, RawLinearResponse,
};
use brittle_core::models::{linear_oracle_model, BlackBoxModel, ConstantModel, Network};
use brittle_core::{Matrix, Result, SeededRng};
use proptest::prelude::*;

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&diff) / l2(b).max(1e-300)
}

fn exact_config(k: usize, seed: u64) -> LimeConfig {
    LimeConfig {
        k,
        lambda: 0.0,
        clip_to_domain: false,
        ..LimeConfig::default().with_seed(seed)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn raw_linear_weights_are_recovered(seed in any::<u64>(), d in 1usize..25) {
        let mut rng = SeededRng::new(seed);
        let target = RawLinearResponse {
            weights: (0..d).map(|_| rng.uniform_in(-5.0, 5.0)).collect(),
            bias: rng.uniform_in(-1.0, 1.0),
        };
        let x: Vec<f64> = (0..d).map(|_| rng.uniform()).collect();
        let k = d + 2 + rng.below(200);
        let e = explain(&target, &x, &exact_config(k, seed)).unwrap();
        prop_assert!(rel_err(&e.weights, &target.weights) <= 1e-8);
        prop_assert!((e.r_squared - 1.0).abs() <= 1e-9);
        prop_assert!(e.r_squared <= 1.0);
    }

    #[test]
    fn explanations_are_reproducible(seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let w = Matrix::from_vec(3, 6, (0..18).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let model = linear_oracle_model(&w, &[0.0, 0.1, -0.1]).unwrap();
        let x: Vec<f64> = (0..6).map(|_| rng.uniform()).collect();
        let config = LimeConfig { k: 64, ..LimeConfig::default().with_seed(seed) };
        prop_assert_eq!(explain(&model, &x, &config).unwrap(), explain(&model, &x, &config).unwrap());
    }
}

#[test]
fn constant_model_has_zero_weights() {
    let model = ConstantModel::new(5, vec![0.1, 0.6, 0.3]).unwrap();
    let e = explain(&model, &[0.5; 5], &LimeConfig::default()).unwrap();
    assert!(e.weights.iter().all(|&w| w == 0.0));
    assert_eq!(e.r_squared, 0.0);
    assert_eq!(e.target_class, 1);
}

#[test]
fn softmax_linear_weights_approximate_the_probability_gradient() {
    let mut rng = SeededRng::new(41);
    let (c, d) = (4, 10);
    let w = Matrix::from_vec(
        c,
        d,
        (0..c * d).map(|_| rng.uniform_in(-1.5, 1.5)).collect(),
    )
    .unwrap();
    let b: Vec<f64> = (0..c).map(|_| rng.uniform_in(-0.3, 0.3)).collect();
    let model = linear_oracle_model(&w, &b).unwrap();
    for trial in 0..10 {
        let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(0.1, 0.9)).collect();
        let p = model.predict(&Matrix::row_vector(&x).unwrap()).unwrap();
        let p = p.row(0);
        let t = brittle_core::math::argmax_row(p).unwrap();
        let analytic: Vec<f64> = (0..d)
            .map(|j| p[t] * (w.get(t, j) - (0..c).map(|k| p[k] * w.get(k, j)).sum::<f64>()))
            .collect();
        let config = LimeConfig {
            noise_stddev: 0.01,
            clip_to_domain: false,
            ..LimeConfig::default().with_seed(trial)
        };
        let e = explain(&model, &x, &config).unwrap();
        assert_eq!(e.target_class, t);
        let err = rel_err(&e.weights, &analytic);
        assert!(err <= 0.05, "trial {trial}: relative error {err}");
    }
}

/// Presents `inner` with its inputs reordered: coordinate `j` of the wrapper
/// feeds coordinate `perm[j]` of the wrapped model.
struct Shuffled<M> {
    inner: M,
    perm: Vec<usize>,
}

impl<M: BlackBoxModel> BlackBoxModel for Shuffled<M> {
    fn input_dim(&self) -> usize {
        self.perm.len()
    }

    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let mut inner = Matrix::zeros(batch.rows(), batch.cols());
        for r in 0..batch.rows() {
            for (j, &p) in self.perm.iter().enumerate() {
                inner.set(r, p, batch.get(r, j));
            }
        }
        self.inner.predict(&inner)
    }
}

#[test]
fn permuting_inputs_permutes_weights() {
    let mut rng = SeededRng::new(53);
    let d = 12;
    let w = Matrix::from_vec(
        3,
        d,
        (0..3 * d).map(|_| rng.uniform_in(-1.0, 1.0)).collect(),
    )
    .unwrap();
    let model = linear_oracle_model(&w, &[0.0, 0.2, -0.2]).unwrap();
    let perm = rng.permutation(d);
    let x: Vec<f64> = (0..d).map(|_| rng.uniform_in(0.2, 0.8)).collect();
    let shuffled_x: Vec<f64> = perm.iter().map(|&p| x[p]).collect();
    let config = LimeConfig {
        noise_stddev: 0.01,
        k: 2000,
        clip_to_domain: false,
        ..LimeConfig::default()
    };
    let base = explain(&model, &x, &config).unwrap();
    let wrapped = Shuffled {
        inner: model.clone(),
        perm: perm.clone(),
    };
    let moved = explain(&wrapped, &shuffled_x, &config).unwrap();
    let expected: Vec<f64> = perm.iter().map(|&p| base.weights[p]).collect();
    assert_eq!(moved.target_class, base.target_class);
    assert!(rel_err(&moved.weights, &expected) < 0.02);

    let raw = RawLinearResponse {
        weights: w.row(0).to_vec(),
        bias: 0.3,
    };
    let raw_moved = RawLinearResponse {
        weights: perm.iter().map(|&p| raw.weights[p]).collect(),
        bias: 0.3,
    };
    let a = explain(&raw, &x, &exact_config(50, 1)).unwrap();
    let b = explain(&raw_moved, &shuffled_x, &exact_config(50, 1)).unwrap();
    let expected: Vec<f64> = perm.iter().map(|&p| a.weights[p]).collect();
    assert!(rel_err(&b.weights, &expected) < 1e-8);
}

fn weight_variance(model: &Network, x: &[f64], k: usize, seeds: u64) -> f64 {
    let runs: Vec<Vec<f64>> = (0..seeds)
        .map(|s| {
            let config = LimeConfig {
                k,
                ..LimeConfig::default().with_seed(1000 + s)
            };
            explain(model, x, &config).unwrap().weights
        })
        .collect();
    let d = x.len();
    (0..d)
        .map(|j| {
            let mean = runs.iter().map(|r| r[j]).sum::<f64>() / seeds as f64;
            runs.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64
        })
        .sum()
}

#[test]
fn doubling_k_does_not_increase_weight_variance() {
    let mut rng = SeededRng::new(61);
    let spec = brittle_core::models::ArchitectureSpec::Mlp {
        input_dim: 8,
        hidden: vec![16],
        num_classes: 3,
    };
    let model = Network::new("smooth", spec, &mut rng).unwrap();
    let x: Vec<f64> = (0..8).map(|_| rng.uniform()).collect();
    let mut previous = f64::INFINITY;
    for k in [50, 100, 200, 400] {
        let v = weight_variance(&model, &x, k, 24);
        assert!(v <= previous, "k = {k}: variance {v} > {previous}");
        previous = v;
    }
}

#[test]
fn neighborhood_scaling_and_clipping() {
    let x = vec![0.3, 0.7, 0.5];
    let tiny = LimeConfig {
        k: 100,
        noise_stddev: 1e-9,
        clip_to_domain: false,
        ..LimeConfig::default()
    };
    let z = sample_neighborhood(&x, &tiny, &mut SeededRng::new(1)).unwrap();
    for row in z.row_iter() {
        for (a, b) in row.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-7);
        }
    }
    let corner = LimeConfig {
        k: 500,
        ..LimeConfig::default()
    };
    let z = sample_neighborhood(&[1.0; 4], &corner, &mut SeededRng::new(2)).unwrap();
    assert!(z.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(z.as_slice().contains(&1.0));
}

#[test]
fn neighborhood_has_the_configured_spread() {
    let config = LimeConfig {
        k: 5000,
        noise_stddev: 0.3,
        clip_to_domain: false,
        ..LimeConfig::default()
    };
    let z = sample_neighborhood(&[0.5, 0.4], &config, &mut SeededRng::new(3)).unwrap();
    for j in 0..2 {
        let col = z.column(j);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd =
            (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        assert!((sd - 0.3).abs() <= 0.02, "{sd}");
    }
}

#[test]
fn exponential_kernel_keeps_linear_recovery() {
    let target = RawLinearResponse {
        weights: vec![0.5, -1.5, 2.0],
        bias: 0.25,
    };
    let config = LimeConfig {
        kernel: Kernel::Exponential { width: 0.5 },
        ..exact_config(40, 8)
    };
    let e = explain(&target, &[0.4, 0.5, 0.6], &config).unwrap();
    assert!(rel_err(&e.weights, &target.weights) <= 1e-8);
}

#[test]
fn sparsity_counts_the_threshold_band() {
    let mut e = explain(
        &RawLinearResponse {
            weights: vec![10.0, 0.1, 0.1, 0.1],
            bias: 0.0,
        },
        &[0.5; 4],
        &exact_config(20, 0),
    )
    .unwrap();
    e.weights = vec![10.0, 0.1, 0.1, 0.1];
    assert_eq!(sparsity(&e, 0.05).unwrap(), 0.75);
    e.weights = vec![0.0; 4];
    assert_eq!(sparsity(&e, 0.05).unwrap(), 1.0);
    assert!(sparsity(&e, 0.0).is_err());
    assert!(sparsity(&e, 1.0).is_err());
}
