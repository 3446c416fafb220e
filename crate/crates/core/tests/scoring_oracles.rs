use brittle_core::lime::{LimeConfig, RawLinearResponse};
use brittle_core::models::{linear_oracle_model, ConstantModel};
use brittle_core::scoring::{
    brittle_score, correlation, rank_models, relative_improvement, spearman, ScoreReport,
};
use brittle_core::{Matrix, SeededRng};
use proptest::prelude::*;

const TABLE_ROBUST: [f64; 6] = [0.0, 41.44, 49.25, 56.17, 60.27, 66.56];
const TABLE_SCORES: [f64; 6] = [0.6028, 0.5984, 0.5962, 0.5960, 0.5960, 0.5956];

fn uniform_samples(seed: u64, n: usize, d: usize) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.uniform()).collect()).unwrap()
}

fn exact_config() -> LimeConfig {
    LimeConfig {
        k: 50,
        clip_to_domain: false,
        ..LimeConfig::default()
    }
}

#[test]
fn raw_linear_score_is_the_mean_absolute_weight() {
    let target = RawLinearResponse {
        weights: vec![1.0, -1.0, 2.0, 0.0],
        bias: 0.5,
    };
    for n in [1, 7, 40] {
        let r = brittle_score(
            &target,
            &uniform_samples(n as u64, n, 4),
            "u",
            &exact_config(),
        )
        .unwrap();
        assert!((r.brittle_score - 1.0).abs() <= 1e-8, "{}", r.brittle_score);
        assert_eq!(r.per_sample_l1.len(), n);
    }
}

#[test]
fn constant_model_scores_zero() {
    let model = ConstantModel::new(6, vec![0.25, 0.75]).unwrap();
    let r = brittle_score(
        &model,
        &uniform_samples(1, 20, 6),
        "u",
        &LimeConfig {
            k: 100,
            ..LimeConfig::default()
        },
    )
    .unwrap();
    assert!(r.brittle_score <= 1e-9);
    assert_eq!(r.model_id, "constant");
}

#[test]
fn report_invariants_and_errors() {
    let mut rng = SeededRng::new(3);
    let w = Matrix::from_vec(3, 5, (0..15).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap();
    let model = linear_oracle_model(&w, &[0.0; 3]).unwrap();
    let samples = uniform_samples(4, 12, 5);
    let config = LimeConfig {
        k: 80,
        ..LimeConfig::default()
    };
    let r = brittle_score(&model, &samples, "u", &config).unwrap();
    let mean = r.per_sample_l1.iter().sum::<f64>() / 12.0;
    assert!((r.brittle_score - mean / 5.0).abs() <= 1e-12);
    assert!(r.brittle_score >= 0.0);
    assert_eq!((r.n, r.d), (12, 5));
    assert!(brittle_score(&model, &uniform_samples(4, 3, 4), "u", &config).is_err());
    let outside = Matrix::filled(2, 5, 1.5);
    assert!(brittle_score(&model, &outside, "u", &config).is_err());
}

#[test]
fn score_is_permutation_invariant_and_an_average_of_single_scores() {
    let mut rng = SeededRng::new(9);
    let w = Matrix::from_vec(4, 6, (0..24).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap();
    let model = linear_oracle_model(&w, &[0.1, 0.0, -0.1, 0.2]).unwrap();
    let samples = uniform_samples(10, 30, 6);
    let config = LimeConfig {
        k: 60,
        ..LimeConfig::default().with_seed(5)
    };
    let base = brittle_score(&model, &samples, "u", &config).unwrap();

    let perm = rng.permutation(30);
    let shuffled = brittle_score(&model, &samples.select_rows(&perm), "u", &config).unwrap();
    assert!((base.brittle_score - shuffled.brittle_score).abs() <= 1e-12);
    for (i, &p) in perm.iter().enumerate() {
        assert_eq!(shuffled.per_sample_l1[i], base.per_sample_l1[p]);
    }

    let singles: f64 = (0..30)
        .map(|i| {
            brittle_score(&model, &samples.row_range(i, i + 1), "u", &config)
                .unwrap()
                .brittle_score
        })
        .sum::<f64>()
        / 30.0;
    assert!((singles - base.brittle_score).abs() <= 1e-12);
}

#[test]
fn table_fixture_relative_improvement() {
    let ri = relative_improvement(0.6028, 0.5984).unwrap();
    assert!((ri - 0.7299).abs() <= 1e-4);
    assert_eq!(relative_improvement(0.6028, 0.6028).unwrap(), 0.0);
}

#[test]
fn table_fixture_correlation() {
    let c = correlation(&TABLE_ROBUST, &TABLE_SCORES).unwrap();
    assert!((c.spearman + 0.986).abs() <= 1e-3, "{}", c.spearman);
    assert!(c.pearson < 0.0);
}

fn report(id: &str, score: f64) -> ScoreReport {
    ScoreReport {
        model_id: id.to_string(),
        dataset_id: "fixture".to_string(),
        n: 1,
        d: 1,
        lime_config: LimeConfig::default(),
        brittle_score: score,
        robust_acc: None,
        relative_improvement: None,
        per_sample_l1: vec![score],
        timestamp: String::new(),
    }
}

#[test]
fn table_fixture_ranking_follows_robust_accuracy() {
    let reports: Vec<ScoreReport> = TABLE_SCORES
        .iter()
        .enumerate()
        .map(|(i, &s)| report(&format!("m{i}"), s))
        .collect();
    let order = rank_models(&reports).unwrap();
    assert_eq!(order, vec![5, 3, 4, 2, 1, 0]);
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if TABLE_SCORES[i] != TABLE_SCORES[j] {
                assert!(TABLE_ROBUST[i] > TABLE_ROBUST[j]);
            }
        }
    }
}

proptest! {
    #[test]
    fn ranking_ignores_positive_rescaling(scores in prop::collection::vec(0.0f64..1.0, 1..12), factor in 1e-3f64..1e3) {
        let a: Vec<ScoreReport> = scores.iter().enumerate().map(|(i, &s)| report(&i.to_string(), s)).collect();
        let b: Vec<ScoreReport> = scores.iter().enumerate().map(|(i, &s)| report(&i.to_string(), s * factor)).collect();
        prop_assert_eq!(rank_models(&a).unwrap(), rank_models(&b).unwrap());
    }

    #[test]
    fn spearman_ignores_monotone_transforms(x in prop::collection::vec(-5.0f64..5.0, 3..20), seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let y: Vec<f64> = x.iter().map(|_| rng.uniform()).collect();
        let base = spearman(&x, &y);
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| v * v * v + 2.0 * v).collect();
        match base {
            Ok(r) => prop_assert!((spearman(&tx, &ty).unwrap() - r).abs() <= 1e-12),
            Err(_) => prop_assert!(spearman(&tx, &ty).is_err()),
        }
    }

    #[test]
    fn relative_improvement_is_antitone(s in 1e-3f64..10.0, a in 0.0f64..10.0, b in 0.0f64..10.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(relative_improvement(s, lo).unwrap() >= relative_improvement(s, hi).unwrap());
        prop_assert_eq!(relative_improvement(s, s).unwrap(), 0.0);
    }
}
