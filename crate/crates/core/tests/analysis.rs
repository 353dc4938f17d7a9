//! Region statistics, KS calibration and the linear-mean fit.

use ghoststat_core::estimators::{correlate, max_relative_deviation};
use ghoststat_core::forward::simulate_run;
use ghoststat_core::reduce::Sequential;
use ghoststat_core::{
    build_region_index, compute_moments, ks_statistic, ks_threshold, linearity_fit, make_test_card, region_statistics,
    CardLayout, DistributionSpec, Estimator, GrayImage, NoiseModel, Reconstruction, RegionStats, SeedRecipe,
    TheoryPrediction, TransformSpec,
};

#[test]
fn ks_rejects_about_five_percent_of_gaussian_samples() {
    let stream = SeedRecipe::new(31337).noise_stream();
    let n = 10_000;
    let (mu, sigma) = (2.5, 0.75);
    let threshold = ks_threshold(n);
    let passes = (0..200u64)
        .filter(|trial| {
            let xs: Vec<f64> = (0..n as u64).map(|i| mu + sigma * stream.standard_normal(trial * n as u64 + i)).collect();
            ks_statistic(&xs, mu, sigma * sigma).unwrap() < threshold
        })
        .count();
    assert!(passes >= 190, "{passes} of 200 below the 5% critical value");
}

#[test]
fn ks_detects_a_shifted_gaussian() {
    let stream = SeedRecipe::new(4).noise_stream();
    let xs: Vec<f64> = (0..10_000u64).map(|i| 0.1 + stream.standard_normal(i)).collect();
    assert!(ks_statistic(&xs, 0.0, 1.0).unwrap() > ks_threshold(xs.len()));
}

fn delta_g2_setup(frames: usize) -> (GrayImage, Reconstruction, TheoryPrediction) {
    let image = make_test_card(32, 32, &[0.0, 0.4, 0.7, 1.0], CardLayout::Stripes).unwrap();
    let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let run = simulate_run(&image, &dist, &SeedRecipe::new(5), frames, 1.0, NoiseModel::None).unwrap();
    let src = run.seeded_frames().unwrap().unwrap();
    let acc = correlate(&src, &run.buckets, &[TransformSpec::Identity], &Sequential).unwrap().remove(0);
    let recon = acc.finish(Estimator::DeltaG2, TransformSpec::Identity).unwrap();
    let moments = compute_moments(&dist, &TransformSpec::Identity).unwrap();
    let theory = TheoryPrediction::new(Estimator::DeltaG2, &moments, &image, &[0.0, 0.4, 0.7, 1.0], 1.0, frames, &NoiseModel::None)
        .unwrap();
    (image, recon, theory)
}

fn ok_stats(recon: &Reconstruction, image: &GrayImage, theory: Option<&TheoryPrediction>) -> Vec<RegionStats> {
    let regions = build_region_index(image, 1e-9);
    region_statistics(recon, &regions, theory).unwrap().into_iter().map(|r| r.unwrap()).collect()
}

#[test]
fn region_moments_match_brute_force() {
    let (image, recon, theory) = delta_g2_setup(2_000);
    for s in ok_stats(&recon, &image, Some(&theory)) {
        let xs: Vec<f64> = image
            .values()
            .iter()
            .zip(&recon.values)
            .filter(|(d, _)| (**d - s.level).abs() < 1e-12)
            .map(|(_, v)| *v)
            .collect();
        assert_eq!(xs.len(), s.pixels);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((s.mean - mean).abs() <= 1e-13 * mean.abs().max(1e-3), "{} vs {mean}", s.mean);
        assert!((s.variance - var).abs() <= 1e-12 * var);
        let total: f64 = s.histogram.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(s.histogram.probabilities.len(), 51);
        let th = s.histogram.theoretical.as_ref().unwrap();
        assert!(th.iter().all(|p| *p >= 0.0));
    }
}

#[test]
fn region_means_sit_in_their_sampling_band() {
    let (image, recon, theory) = delta_g2_setup(20_000);
    for s in ok_stats(&recon, &image, Some(&theory)) {
        let band = 4.0 * (s.sigma2.unwrap() / s.pixels as f64).sqrt();
        assert!((s.mean - s.mu.unwrap()).abs() <= band, "d={}: {} vs {} ± {band}", s.level, s.mean, s.mu.unwrap());
    }
}

#[test]
fn stats_without_theory_have_no_fit_columns() {
    let (image, recon, _) = delta_g2_setup(500);
    for s in ok_stats(&recon, &image, None) {
        assert!(s.mu.is_none() && s.sigma2.is_none() && s.ks.is_none());
        assert!(s.histogram.theoretical.is_none());
    }
}

#[test]
fn exact_two_level_line() {
    let image = GrayImage::new(2, 2, vec![0.2, 0.2, 0.8, 0.8]).unwrap();
    // Values lying on 3·d + 1 exactly, with symmetric spread inside each region.
    let recon = Reconstruction {
        estimator: Estimator::G2,
        transform: TransformSpec::Identity,
        values: vec![1.5, 1.7, 3.3, 3.5],
        frames: 10,
    };
    let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let moments = compute_moments(&dist, &TransformSpec::Identity).unwrap();
    let theory = TheoryPrediction::new(Estimator::G2, &moments, &image, &[0.2, 0.8], 1.0, 10, &NoiseModel::None).unwrap();
    let stats = ok_stats(&recon, &image, Some(&theory));
    let fit = linearity_fit(&stats, Estimator::G2, &theory).unwrap();
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    assert!((fit.slope - 3.0).abs() < 1e-12);
    assert!((fit.intercept - 1.0).abs() < 1e-12);
    assert!(!fit.degenerate);
}

#[test]
fn dgi_on_a_uniform_object_is_zero_and_flagged_degenerate() {
    let image = GrayImage::new(2, 2, vec![0.5; 4]).unwrap();
    let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let run = simulate_run(&image, &dist, &SeedRecipe::new(2), 1_000, 1.0, NoiseModel::None).unwrap();
    let src = run.seeded_frames().unwrap().unwrap();
    let acc = correlate(&src, &run.buckets, &[TransformSpec::Identity], &Sequential).unwrap().remove(0);
    let dgi = acc.finish(Estimator::Dgi, TransformSpec::Identity).unwrap();
    let g2 = acc.finish(Estimator::G2, TransformSpec::Identity).unwrap();
    let zeros = vec![0.0; 4];
    assert!(max_relative_deviation(&dgi.values, &zeros) <= 1e-12 * max_relative_deviation(&g2.values, &zeros));

    // A flat object has a single level; fit its (zero) means against a
    // second copy placed at another level.
    let moments = compute_moments(&dist, &TransformSpec::Identity).unwrap();
    let theory = TheoryPrediction::new(Estimator::Dgi, &moments, &image, &[0.5], 1.0, 1_000, &NoiseModel::None).unwrap();
    assert!(theory.levels[0].mu.abs() < 1e-15, "predicted DGI mean C1·(d − C4) vanishes");
    let stats = ok_stats(&dgi, &image, Some(&theory));
    let mut shifted = stats[0].clone();
    shifted.level = 0.25;
    let fit = linearity_fit(&[stats[0].clone(), shifted], Estimator::Dgi, &theory).unwrap();
    assert!(fit.degenerate);
}
