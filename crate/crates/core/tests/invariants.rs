//! Property tests for the forward model, estimators and region analysis.

use ghoststat_core::estimators::{
    accumulate_range, correlate, correlate_centered, max_relative_deviation, reconstruct_delta_g2,
    reconstruct_delta_g2_centered,
};
use ghoststat_core::forward::simulate_run;
use ghoststat_core::reduce::Sequential;
use ghoststat_core::{
    bucket_signal, build_region_index, DistributionSpec, Estimator, GrayImage, Histogram, MeasurementRun, NoiseModel,
    PatternFrame, PatternSource, PatternStack, SeedRecipe, TransformSpec,
};
use proptest::prelude::*;

fn gray() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.25), Just(0.5), Just(1.0), 0.0..=1.0f64]
}

fn image_strategy() -> impl Strategy<Value = GrayImage> {
    (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
        proptest::collection::vec(gray(), w * h).prop_map(move |v| GrayImage::new(w, h, v).unwrap())
    })
}

fn stack_run(image: &GrayImage, buckets: Vec<f64>) -> MeasurementRun {
    MeasurementRun {
        gamma: 1.0,
        pixels: image.len(),
        buckets,
        source: PatternSource::External { reference: "memory".into() },
        image: Some(image.clone()),
        noise: NoiseModel::None,
    }
}

fn random_stack(pixels: usize, frames: usize, seed: u64) -> PatternStack {
    let stream = SeedRecipe::new(seed).pattern_stream();
    let values = (0..pixels * frames).map(|c| 0.1 + stream.uniform(c as u64)).collect();
    PatternStack::new(pixels, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn region_index_round_trips(image in image_strategy()) {
        let idx = build_region_index(&image, 1e-9);
        prop_assert_eq!(idx.to_values(), image.values().to_vec());
        let total: usize = idx.regions().map(|(_, m)| m.len()).sum();
        prop_assert_eq!(total, image.len());
        prop_assert!(idx.levels().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bucket_is_linear_and_decomposes(
        image in image_strategy(), seed in any::<u64>(), gamma in 0.1..10.0f64, n_pick in any::<prop::sample::Index>()
    ) {
        let stream = SeedRecipe::new(seed).pattern_stream();
        let frame: Vec<f64> = (0..image.len()).map(|c| stream.uniform(c as u64)).collect();
        let frame = PatternFrame::new(frame).unwrap();
        let s = bucket_signal(&image, &frame, gamma).unwrap();
        // Doubling the image doubles the signal.
        let half: Vec<f64> = image.values().iter().map(|v| v / 2.0).collect();
        let half = GrayImage::new(image.width(), image.height(), half).unwrap();
        let s_half = bucket_signal(&half, &frame, gamma).unwrap();
        prop_assert!((s - 2.0 * s_half).abs() <= 1e-12 * s.abs().max(1.0));
        // S = S̃ + γ d_n I_n
        let n = n_pick.index(image.len());
        let without = image.with_pixel(n, 0.0).unwrap();
        let s_tilde = bucket_signal(&without, &frame, gamma).unwrap();
        let split = s_tilde + gamma * image.values()[n] * frame.values()[n];
        prop_assert!((s - split).abs() <= 1e-12 * s.abs().max(1.0));
    }

    #[test]
    fn accumulator_merge_is_associative(seed in any::<u64>(), cut1 in 1usize..60, cut2 in 1usize..60) {
        let pixels = 7;
        let frames = 120;
        let stack = random_stack(pixels, frames, seed);
        // Unequal weights, so no estimator is identically zero.
        let buckets: Vec<f64> = (0..frames)
            .map(|t| stack.frame(t).iter().enumerate().map(|(n, x)| (n % 3) as f64 * x).sum::<f64>())
            .collect();
        let (a, b) = (cut1.min(cut2), cut1.max(cut2) + 1);
        let tr = [TransformSpec::Exp];
        let part = |r: std::ops::Range<usize>| accumulate_range(&stack, &buckets, &tr, r).unwrap().remove(0);
        let left = part(0..a).merge(&part(a..b)).merge(&part(b..frames));
        let right = part(0..a).merge(&part(a..b).merge(&part(b..frames)));
        let whole = part(0..frames);
        for est in [Estimator::G2, Estimator::DeltaG2, Estimator::NormalizedG2, Estimator::Dgi] {
            let l = left.finish(est, tr[0]).unwrap().values;
            let r = right.finish(est, tr[0]).unwrap().values;
            let w = whole.finish(est, tr[0]).unwrap().values;
            prop_assert!(max_relative_deviation(&l, &w) <= 1e-9);
            prop_assert!(max_relative_deviation(&r, &w) <= 1e-9);
        }
    }

    #[test]
    fn centered_and_one_pass_delta_g2_agree(seed in any::<u64>(), frames in 2usize..400) {
        let image = GrayImage::new(3, 2, vec![0.0, 0.4, 1.0, 0.7, 0.7, 0.0]).unwrap();
        let stack = random_stack(image.len(), frames, seed);
        let buckets: Vec<f64> = (0..frames)
            .map(|t| bucket_signal(&image, &PatternFrame::new(stack.frame(t).to_vec()).unwrap(), 2.0).unwrap())
            .collect();
        let run = stack_run(&image, buckets);
        for tr in [TransformSpec::Identity, TransformSpec::Log, TransformSpec::Power(0.5)] {
            let one = reconstruct_delta_g2(&run, &stack, tr).unwrap();
            let two = reconstruct_delta_g2_centered(&run, &stack, tr).unwrap();
            let scale = run.buckets.iter().map(|s| s.abs()).fold(0.0, f64::max)
                * stack.values().iter().map(|x| tr.eval(*x).abs()).fold(0.0, f64::max);
            for (a, b) in one.values.iter().zip(&two.values) {
                prop_assert!((a - b).abs() <= 1e-9 * scale, "{} vs {}", a, b);
            }
        }
    }

    #[test]
    fn affine_bucket_response(seed in any::<u64>(), a in 0.1..10.0f64, b in -50.0..50.0f64) {
        let pixels = 5;
        let frames = 200;
        let stack = random_stack(pixels, frames, seed);
        let image = GrayImage::new(5, 1, vec![1.0, 0.0, 0.3, 0.6, 1.0]).unwrap();
        let buckets: Vec<f64> = (0..frames)
            .map(|t| bucket_signal(&image, &PatternFrame::new(stack.frame(t).to_vec()).unwrap(), 1.0).unwrap())
            .collect();
        let shifted: Vec<f64> = buckets.iter().map(|s| a * s + b).collect();
        let tr = [TransformSpec::Identity];
        let base = correlate(&stack, &buckets, &tr, &Sequential).unwrap().remove(0);
        let moved = correlate(&stack, &shifted, &tr, &Sequential).unwrap().remove(0);
        // ΔG² scales by a and ignores b.
        let d0 = base.finish(Estimator::DeltaG2, tr[0]).unwrap().values;
        let d1 = moved.finish(Estimator::DeltaG2, tr[0]).unwrap().values;
        let scaled: Vec<f64> = d0.iter().map(|v| a * v).collect();
        let tol = 1e-9 * (a.abs() + b.abs()) * buckets.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        for (x, y) in d1.iter().zip(&scaled) {
            prop_assert!((x - y).abs() <= tol.max(1e-12));
        }
        // G² picks up b·⟨F⟩.
        let g0 = base.finish(Estimator::G2, tr[0]).unwrap().values;
        let g1 = moved.finish(Estimator::G2, tr[0]).unwrap().values;
        let mean_f = base.mean_f();
        for n in 0..pixels {
            prop_assert!((g1[n] - (a * g0[n] + b * mean_f[n])).abs() <= tol.max(1e-12));
        }
    }

    #[test]
    fn histogram_conserves_mass(
        samples in proptest::collection::vec(-10.0..10.0f64, 1..300), lo in -5.0..0.0f64, width in 0.1..5.0f64
    ) {
        let h = Histogram::build(&samples, lo, lo + width, 51);
        let total: f64 = h.probabilities.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert_eq!(h.edges.len(), 52);
    }
}

#[test]
fn simulated_and_stacked_runs_reconstruct_identically() {
    let image = GrayImage::new(4, 2, vec![0.0, 1.0, 0.4, 0.7, 1.0, 1.0, 0.0, 0.4]).unwrap();
    let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let recipe = SeedRecipe::new(99);
    let frames = 1000;
    let run = simulate_run(&image, &dist, &recipe, frames, 2.5, NoiseModel::gaussian(1.0, 0.5).unwrap()).unwrap();
    let seeded = run.seeded_frames().unwrap().unwrap();
    let patterns: Vec<f64> = (0..frames)
        .flat_map(|t| ghoststat_core::sample_pattern(&dist, image.len(), t, &recipe).unwrap().into_values())
        .collect();
    let stack = PatternStack::new(image.len(), patterns).unwrap();
    let tr = [TransformSpec::Identity, TransformSpec::Exp];
    let a = correlate(&seeded, &run.buckets, &tr, &Sequential).unwrap();
    let b = correlate(&stack, &run.buckets, &tr, &Sequential).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.finish(Estimator::Dgi, tr[0]).unwrap().values, y.finish(Estimator::Dgi, tr[0]).unwrap().values);
    }
    let c = correlate_centered(&seeded, &run.buckets, &tr, &a, &Sequential).unwrap();
    let d = reconstruct_delta_g2(&run, &seeded, tr[1]).unwrap();
    assert!(max_relative_deviation(&c[1].values, &d.values) < 1e-9);
}
