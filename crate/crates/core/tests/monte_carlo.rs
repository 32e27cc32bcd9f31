//! Slower statistical checks of the noise generators and estimators.

use eigdebias::denoise;
use eigdebias::pca;
use eigdebias::rng::{gaussian_matrix, trial_rng};
use eigdebias::{eigendecompose, eigenvalues, Ordering};

#[test]
fn noise_norm_near_semicircle_edge() {
    let n = 2000;
    for s in 0..20 {
        let h = denoise::generate_noise(n, 1.0, s);
        let vals = eigenvalues(&h, Ordering::ByMagnitudeDesc).unwrap();
        let ratio = vals[0].abs() / (2.0 * (n as f64).sqrt());
        assert!((0.97..=1.03).contains(&ratio), "seed {s}: ratio {ratio}");
    }
}

#[test]
fn pure_noise_level_estimate() {
    let (p, n) = (100, 10_000);
    let s = gaussian_matrix(p, n, &mut trial_rng(21, 0, 0));
    let spec = eigendecompose(&pca::sample_covariance(s.as_ref()), Ordering::ByValueDesc).unwrap();
    let sigma2 = pca::estimate_noise_pca(&spec, 0, n).unwrap();
    assert!((0.95..=1.05).contains(&sigma2), "{sigma2}");
}

#[test]
fn wide_noise_level_estimate() {
    let (p, n) = (400, 100);
    let s = gaussian_matrix(p, n, &mut trial_rng(22, 0, 0)) * 1.5;
    let spec = eigendecompose(&pca::sample_covariance(s.as_ref()), Ordering::ByValueDesc).unwrap();
    let sigma2 = pca::estimate_noise_pca(&spec, 0, n).unwrap();
    assert!((sigma2 / 2.25 - 1.0).abs() < 0.05, "{sigma2}");
}
