//! Independent oracles for the moment engine and the ΔG² variance expansion.

use ghoststat_core::theory::{compute_moments, theoretical_constants, theoretical_variance_delta_g2};
use ghoststat_core::{DistributionSpec, Estimator, GrayImage, NoiseModel, TheoryPrediction, TransformSpec};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `E(I^k)` for `I ~ uniform(a, b)`.
fn uniform_raw(a: f64, b: f64, k: i32) -> f64 {
    (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * (b - a))
}

#[test]
fn single_pixel_variance_matches_central_moment_oracle() {
    // M = 1, d = 1, γ = 1, F = I: D{(I − μ)²} = μ₄ − D(I)².
    let (a, b) = (0.1, 1.0);
    let (m1, m2, m3, m4) = (uniform_raw(a, b, 1), uniform_raw(a, b, 2), uniform_raw(a, b, 3), uniform_raw(a, b, 4));
    let central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    let var = m2 - m1 * m1;
    let oracle = central4 - var * var;

    let dist = DistributionSpec::uniform(a, b).unwrap();
    let moments = compute_moments(&dist, &TransformSpec::Identity).unwrap();
    let image = GrayImage::filled(1, 1, 1.0).unwrap();
    let frames = 1000;
    let terms = theoretical_variance_delta_g2(&moments, &image, 1.0, 1.0, frames, &NoiseModel::None).unwrap();
    assert!(rel(terms.single_pattern_variance, oracle) < 1e-10, "{} vs {oracle}", terms.single_pattern_variance);
    assert!(rel(terms.sigma2, oracle / frames as f64) < 1e-10);
}

/// Exact `E[X]` and `D[X]` of `X = (S − E S)(F_n − E F)` by enumerating every
/// joint outcome of a discrete pixel law (and a two-point noise law).
fn enumerate(
    image: &[f64],
    atoms: &[(f64, f64)],
    f: impl Fn(f64) -> f64,
    gamma: f64,
    noise: &[(f64, f64)],
    n: usize,
) -> (f64, f64) {
    let m = image.len();
    let e_i: f64 = atoms.iter().map(|(x, p)| x * p).sum();
    let e_f: f64 = atoms.iter().map(|(x, p)| f(*x) * p).sum();
    let e_e: f64 = noise.iter().map(|(x, p)| x * p).sum();
    let e_s = gamma * image.iter().sum::<f64>() * e_i + e_e;
    let (mut ex, mut ex2) = (0.0, 0.0);
    let outcomes = atoms.len().pow(m as u32);
    for code in 0..outcomes {
        let mut c = code;
        let mut prob = 1.0;
        let mut s = 0.0;
        let mut f_n = 0.0;
        for (k, d) in image.iter().enumerate() {
            let (x, p) = atoms[c % atoms.len()];
            c /= atoms.len();
            prob *= p;
            s += gamma * d * x;
            if k == n {
                f_n = f(x);
            }
        }
        for &(e, pe) in noise {
            let x = (s + e - e_s) * (f_n - e_f);
            ex += prob * pe * x;
            ex2 += prob * pe * x * x;
        }
    }
    (ex, ex2 - ex * ex)
}

#[test]
fn variance_expansion_matches_enumeration() {
    let image_vals = [0.4, 1.0, 0.7, 0.0];
    let image = GrayImage::new(2, 2, image_vals.to_vec()).unwrap();
    let atoms = [(0.2, 0.3), (0.5, 0.45), (1.3, 0.25)];
    let dist = DistributionSpec::discrete(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect()).unwrap();
    let gamma = 1.7;
    for transform in [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp, TransformSpec::Log] {
        let moments = compute_moments(&dist, &transform).unwrap();
        for (n, &d) in image_vals.iter().enumerate() {
            let (mean, var) = enumerate(&image_vals, &atoms, |x| transform.eval(x), gamma, &[(0.0, 1.0)], n);
            let terms = theoretical_variance_delta_g2(&moments, &image, d, gamma, 2, &NoiseModel::None).unwrap();
            assert!(rel(terms.single_pattern_variance, var) < 1e-9, "{transform} n={n}: {} vs {var}", terms.single_pattern_variance);
            let c = theoretical_constants(&moments, &image, gamma, &NoiseModel::None);
            assert!((c.c1 * d - mean).abs() < 1e-12, "{transform} n={n}: mean {mean} vs {}", c.c1 * d);
        }
    }
}

#[test]
fn noise_substitution_matches_enumeration() {
    let image_vals = [1.0, 0.0, 1.0];
    let image = GrayImage::new(3, 1, image_vals.to_vec()).unwrap();
    let atoms = [(0.0, 0.5), (1.0, 0.5)];
    let dist = DistributionSpec::bernoulli(0.5, 0.0, 1.0).unwrap();
    // Two-point noise with mean 3 and variance 4.
    let noise_law = [(1.0, 0.5), (5.0, 0.5)];
    let noise = NoiseModel::gaussian(3.0, 4.0).unwrap();
    for transform in [TransformSpec::Identity, TransformSpec::Exp] {
        let moments = compute_moments(&dist, &transform).unwrap();
        for (n, &d) in image_vals.iter().enumerate() {
            let (_, var) = enumerate(&image_vals, &atoms, |x| transform.eval(x), 2.0, &noise_law, n);
            let terms = theoretical_variance_delta_g2(&moments, &image, d, 2.0, 2, &noise).unwrap();
            assert!(rel(terms.single_pattern_variance, var) < 1e-9, "{transform} n={n}");
        }
    }
}

fn shipped_pairs() -> Vec<(DistributionSpec, TransformSpec)> {
    let u = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let b = DistributionSpec::bernoulli(0.5, 0.0, 1.0).unwrap();
    let mut v: Vec<_> = [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp, TransformSpec::Log]
        .into_iter()
        .map(|t| (u.clone(), t))
        .collect();
    v.extend([TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp].into_iter().map(|t| (b.clone(), t)));
    v
}

fn card() -> GrayImage {
    ghoststat_core::image::make_weighted_card(
        64,
        64,
        &[0.0, 0.4, 0.7, 1.0],
        &[0.81975, 0.05265, 0.08055, 0.04705],
        ghoststat_core::CardLayout::Stripes,
    )
    .unwrap()
}

#[test]
fn variance_positive_and_scales_with_gamma_squared() {
    let image = card();
    for (dist, t) in shipped_pairs() {
        let m = compute_moments(&dist, &t).unwrap();
        for d in [0.0, 0.4, 0.7, 1.0] {
            let v1 = theoretical_variance_delta_g2(&m, &image, d, 1.0, 1000, &NoiseModel::None).unwrap();
            let v2 = theoretical_variance_delta_g2(&m, &image, d, 2.0, 1000, &NoiseModel::None).unwrap();
            assert!(v1.sigma2 > 0.0, "{dist} {t} d={d}");
            assert!(rel(v2.sigma2, 4.0 * v1.sigma2) < 1e-10, "{dist} {t} d={d}");
            let p1 = TheoryPrediction::new(Estimator::DeltaG2, &m, &image, &[d], 1.0, 1000, &NoiseModel::None).unwrap();
            let p2 = TheoryPrediction::new(Estimator::DeltaG2, &m, &image, &[d], 2.0, 1000, &NoiseModel::None).unwrap();
            assert!((p2.levels[0].mu - 2.0 * p1.levels[0].mu).abs() <= 1e-15 * p2.levels[0].mu.abs().max(1.0));
        }
    }
}

#[test]
fn noise_variance_increases_sigma() {
    let image = card();
    for (dist, t) in shipped_pairs() {
        let m = compute_moments(&dist, &t).unwrap();
        let mut last = 0.0;
        for var_e in [0.0, 1.0, 10.0, 1e3] {
            let noise = NoiseModel::gaussian(5.0, var_e).unwrap();
            let s = theoretical_variance_delta_g2(&m, &image, 0.7, 1.0, 100, &noise).unwrap().sigma2;
            assert!(s > last, "{dist} {t}: {s} <= {last}");
            last = s;
        }
    }
}

#[test]
fn delta_g2_mean_is_linear_in_gray() {
    let dist = DistributionSpec::uniform(0.1, 1.0).unwrap();
    let m = compute_moments(&dist, &TransformSpec::Log).unwrap();
    let image = card();
    let frames = 1000;
    let p = TheoryPrediction::new(Estimator::DeltaG2, &m, &image, &[0.0, 0.3, 0.9], 1.0, frames, &NoiseModel::None).unwrap();
    let [a, b, c] = [p.levels[0].mu, p.levels[1].mu, p.levels[2].mu];
    // three-point collinearity
    assert!(((b - a) / 0.3 - (c - a) / 0.9).abs() < 1e-15);
    assert!((p.slope - (1.0 - 1.0 / frames as f64) * p.constants.c1).abs() < 1e-18);
    assert_eq!(a, 0.0);
}

#[test]
fn moment_engine_matches_monte_carlo_quickly() {
    // 1e6-sample smoke version of the 1e7 acceptance check, at 4 standard errors.
    use ghoststat_core::rng::SeedRecipe;
    let n = 1_000_000;
    for (dist, t) in shipped_pairs() {
        let m = compute_moments(&dist, &t).unwrap();
        let sampler = dist.sampler();
        let stream = SeedRecipe::new(2024).pattern_stream();
        let mut sums = [0.0f64; 8];
        let mut sq = [0.0f64; 8];
        for c in 0..n {
            let x = sampler.map(stream.uniform(c));
            let f = t.eval(x);
            for (k, &(a, b)) in ghoststat_core::MomentSet::POWERS.iter().enumerate() {
                let v = x.powi(a as i32) * f.powi(b as i32);
                sums[k] += v;
                sq[k] += v * v;
            }
        }
        for (k, exact) in m.as_array().iter().enumerate() {
            let mean = sums[k] / n as f64;
            let se = ((sq[k] / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((mean - exact).abs() <= 4.0 * se + 1e-15, "{dist} {t} {}: {mean} vs {exact}", ghoststat_core::MomentSet::NAMES[k]);
        }
    }
}
