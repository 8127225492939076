use mdport::estimation::{covariance, covariance_change, mean_returns};
use mdport::{asset_stats, perturb_returns, PerturbationConfig, ReturnMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_returns(rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = rng.random_range(1..=12);
    let t = rng.random_range(2..=60);
    let drift: Vec<f64> = (0..n).map(|_| rng.random_range(-0.01..0.01)).collect();
    (0..n)
        .map(|i| (0..t).map(|_| drift[i] + rng.random_range(-0.05..0.05)).collect())
        .collect()
}

/// Textbook two-pass mean and population covariance with plain loops.
fn two_pass(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t = rows[0].len() as f64;
    let mean: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / t).collect();
    let cov = (0..rows.len())
        .map(|i| {
            (0..rows.len())
                .map(|j| {
                    let mut s = 0.0;
                    for k in 0..rows[i].len() {
                        s += (rows[i][k] - mean[i]) * (rows[j][k] - mean[j]);
                    }
                    s / t
                })
                .collect()
        })
        .collect();
    (mean, cov)
}

#[test]
fn mean_and_covariance_match_two_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    for _ in 0..100 {
        let rows = random_returns(&mut rng);
        let r = ReturnMatrix::from_rows(&rows).unwrap();
        let (mean, cov) = two_pass(&rows);
        let got_mean = mean_returns(&r).unwrap();
        let got_cov = covariance(&r).unwrap();
        for i in 0..rows.len() {
            assert!((got_mean[i] - mean[i]).abs() <= 1e-12);
            for j in 0..rows.len() {
                assert!((got_cov[(i, j)] - cov[i][j]).abs() <= 1e-12);
            }
        }
        // Passing the stats constructor means symmetric and PSD.
        asset_stats(&r).unwrap();
    }
}

#[test]
fn perturbation_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let r = ReturnMatrix::from_rows(&random_returns(&mut rng)).unwrap();
    let cfg = PerturbationConfig::new(1000.0, 42).unwrap();
    let a = perturb_returns(&r, &cfg).unwrap();
    let b = perturb_returns(&r, &cfg).unwrap();
    assert_eq!(a, b);
    let other = perturb_returns(&r, &PerturbationConfig::new(1000.0, 43).unwrap()).unwrap();
    assert_ne!(a, other);
}

#[test]
fn perturbation_ignores_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..30).map(|_| rng.random_range(-0.05..0.05)).collect())
        .collect();
    let r = ReturnMatrix::from_rows(&rows).unwrap();
    let cfg = PerturbationConfig::with_seed(7);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| perturb_returns(&r, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn constant_assets_are_untouched() {
    let rows = vec![vec![0.01; 20], vec![-0.002; 20]];
    let r = ReturnMatrix::from_rows(&rows).unwrap();
    let p = perturb_returns(&r, &PerturbationConfig::with_seed(3)).unwrap();
    assert_eq!(p.returns(), r.returns());
    let before = covariance(&r).unwrap();
    let change = covariance_change(&before, &covariance(&p).unwrap()).unwrap();
    assert_eq!(change.relative_change, 0.0);
}

#[test]
fn noise_scale_follows_the_divisor() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows = vec![(0..5000).map(|_| rng.random_range(-0.03..0.03)).collect::<Vec<f64>>()];
    let r = ReturnMatrix::from_rows(&rows).unwrap();
    let sigma = covariance(&r).unwrap()[(0, 0)].sqrt();
    let p = perturb_returns(&r, &PerturbationConfig::new(10.0, 1).unwrap()).unwrap();
    let noise: Vec<f64> = p.returns().iter().zip(r.returns().iter()).map(|(a, b)| a - b).collect();
    let sd = (noise.iter().map(|z| z * z).sum::<f64>() / noise.len() as f64).sqrt();
    // 5000 draws: the sample sd is within a few percent of sigma / c.
    assert!((sd / (sigma / 10.0) - 1.0).abs() < 0.05, "{sd} vs {}", sigma / 10.0);
}

#[test]
fn bad_divisor_is_rejected() {
    assert!(PerturbationConfig::new(0.0, 1).is_err());
    assert!(PerturbationConfig::new(f64::NAN, 1).is_err());
}
