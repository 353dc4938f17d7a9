//! Closed-form statistics of the reconstructions.
//!
//! Every prediction is a function of eight joint moments of the pixel law `I`
//! and the transformed value `F = f(I)` ([`MomentSet`]), the image sums
//! `Σ d_m` and `Σ d_m²`, the scale `γ`, the frame count `T` and the first two
//! moments of the measurement noise.
//!
//! The ΔG² variance at a pixel of gray value `d` is
//! `σ² = D{[S − E(S)][F_n − E(F)]} / T`, expanded through `S = S̃ + γ d I_n`
//! with `S̃` independent of `(I_n, F_n)`. Additive noise `e` enters only via
//! `S̃ → S̃ + e`: `E(S̃) += E(e)` and `D(S̃) += D(e)`.

use alloc::format;
use alloc::vec::Vec;

use crate::dist::{validate_pair, DistributionSpec, TransformSpec};
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::forward::NoiseModel;
use crate::image::GrayImage;
use crate::quadrature::{GaussLegendre, DEFAULT_ORDER};

/// Raw and joint moments of `(I, F)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentSet {
    pub e_i: f64,
    pub e_i2: f64,
    pub e_f: f64,
    pub e_f2: f64,
    pub e_if: f64,
    pub e_if2: f64,
    pub e_i2f: f64,
    pub e_i2f2: f64,
}

impl MomentSet {
    /// `D(I)`
    pub fn var_i(&self) -> f64 {
        self.e_i2 - self.e_i * self.e_i
    }

    /// `D(F)`
    pub fn var_f(&self) -> f64 {
        self.e_f2 - self.e_f * self.e_f
    }

    /// `E(IF) − E(I)E(F)`
    pub fn cov_if(&self) -> f64 {
        self.e_if - self.e_i * self.e_f
    }

    pub fn as_array(&self) -> [f64; 8] {
        [self.e_i, self.e_i2, self.e_f, self.e_f2, self.e_if, self.e_if2, self.e_i2f, self.e_i2f2]
    }

    pub const NAMES: [&'static str; 8] = ["E_I", "E_I2", "E_F", "E_F2", "E_IF", "E_IF2", "E_I2F", "E_I2F2"];

    /// Expectations of `I^a F^b` for `(a, b)` matching [`as_array`](Self::as_array).
    pub const POWERS: [(u32, u32); 8] = [(1, 0), (2, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 1), (2, 2)];

    fn from_fn<G: Fn(u32, u32) -> f64>(g: G) -> Self {
        let v: Vec<f64> = Self::POWERS.iter().map(|&(a, b)| g(a, b)).collect();
        Self {
            e_i: v[0],
            e_i2: v[1],
            e_f: v[2],
            e_f2: v[3],
            e_if: v[4],
            e_if2: v[5],
            e_i2f: v[6],
            e_i2f2: v[7],
        }
    }

    /// Checks `D(I) ≥ 0`, `D(F) ≥ 0` and Cauchy–Schwarz with 1e-12 slack.
    pub fn check(&self) -> Result<()> {
        let slack = |x: f64| 1e-12 * x.abs().max(1.0);
        if self.var_i() < -slack(self.e_i2) || self.var_f() < -slack(self.e_f2) {
            return Err(Error::InvalidParameter(format!("negative variance in moment set {self:?}")));
        }
        if self.e_if * self.e_if > self.e_i2 * self.e_f2 + slack(self.e_i2 * self.e_f2) {
            return Err(Error::InvalidParameter(format!("moment set violates Cauchy-Schwarz: {self:?}")));
        }
        Ok(())
    }
}

/// Exact moments of `(I, f(I))`.
///
/// Finite laws are summed directly. The uniform law has closed forms for the
/// identity, integer powers, `exp` and `log`; any other transform falls back
/// to 64-point Gauss–Legendre quadrature over the support.
pub fn compute_moments(dist: &DistributionSpec, transform: &TransformSpec) -> Result<MomentSet> {
    validate_pair(dist, transform)?;
    let m = match dist {
        DistributionSpec::Uniform { lo, hi } => match transform {
            TransformSpec::Identity => {
                MomentSet::from_fn(|a, b| uniform_power_moment(*lo, *hi, (a + b) as f64))
            }
            TransformSpec::Power(_) if transform.integer_power().is_some() => {
                let k = transform.integer_power().unwrap_or(1);
                MomentSet::from_fn(|a, b| uniform_power_moment(*lo, *hi, (a + b * k) as f64))
            }
            TransformSpec::Exp => MomentSet::from_fn(|a, b| uniform_xexp_moment(*lo, *hi, a, b as f64)),
            TransformSpec::Log => MomentSet::from_fn(|a, b| uniform_xlog_moment(*lo, *hi, a, b)),
            TransformSpec::Power(_) => moments_by_quadrature(*lo, *hi, transform),
        },
        DistributionSpec::Bernoulli { .. } | DistributionSpec::Discrete { .. } => {
            let atoms = dist.atoms().unwrap_or_default();
            MomentSet::from_fn(|a, b| {
                let terms: Vec<f64> = atoms
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|&(x, p)| p * ipow(x, a) * ipow(transform.eval(x), b))
                    .collect();
                crate::sum::pairwise_sum(&terms)
            })
        }
    };
    m.check()?;
    Ok(m)
}

/// Moments of `(I, f(I))` for `I ~ uniform(lo, hi)` by quadrature.
pub fn moments_by_quadrature(lo: f64, hi: f64, transform: &TransformSpec) -> MomentSet {
    let rule = GaussLegendre::new(DEFAULT_ORDER);
    let width = hi - lo;
    MomentSet::from_fn(|a, b| rule.integrate(lo, hi, |x| ipow(x, a) * ipow(transform.eval(x), b)) / width)
}

fn ipow(x: f64, n: u32) -> f64 {
    (0..n).fold(1.0, |acc, _| acc * x)
}

/// `E(I^p)` for `I ~ uniform(lo, hi)`, `p ≥ 0`.
fn uniform_power_moment(lo: f64, hi: f64, p: f64) -> f64 {
    let q = p + 1.0;
    (libm::pow(hi, q) - libm::pow(lo, q)) / (q * (hi - lo))
}

/// `E(I^j e^{cI})`, `j ≤ 2`, from the antiderivatives of `x^j e^{cx}`.
fn uniform_xexp_moment(lo: f64, hi: f64, j: u32, c: f64) -> f64 {
    if c == 0.0 {
        return uniform_power_moment(lo, hi, j as f64);
    }
    let anti = |x: f64| {
        let e = libm::exp(c * x);
        match j {
            0 => e / c,
            1 => e * (x / c - 1.0 / (c * c)),
            _ => e * (x * x / c - 2.0 * x / (c * c) + 2.0 / (c * c * c)),
        }
    };
    (anti(hi) - anti(lo)) / (hi - lo)
}

/// `E(I^j (ln I)^q)`, `j, q ≤ 2`, `lo > 0`.
fn uniform_xlog_moment(lo: f64, hi: f64, j: u32, q: u32) -> f64 {
    let k = j as f64 + 1.0;
    let anti = |x: f64| {
        let l = libm::log(x);
        let xk = libm::pow(x, k);
        match q {
            0 => xk / k,
            1 => xk * (l / k - 1.0 / (k * k)),
            _ => xk * (l * l / k - 2.0 * l / (k * k) + 2.0 / (k * k * k)),
        }
    };
    (anti(hi) - anti(lo)) / (hi - lo)
}

/// Affine mean coefficients of the four estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Constants {
    /// `γ [E(IF) − E(I)E(F)]`
    pub c1: f64,
    /// `E(S')·E(F)`; `γ Σd E(I)E(F)` without noise.
    pub c2: f64,
    /// `C1 / C2`; undefined when `Σd = 0` or `E(I)E(F) = 0`.
    pub c3: Option<f64>,
    /// Mean gray value `Σd / M`.
    pub c4: f64,
    /// `E(S') / (γ M E(I))`, the offset DGI actually subtracts; equals `c4`
    /// without noise.
    pub c4_effective: f64,
}

impl Constants {
    pub fn c3(&self) -> Result<f64> {
        self.c3.ok_or(Error::DegenerateConstant("C3 needs a nonzero Σd·E(I)·E(F)"))
    }
}

/// `C1..C4` for a law, an image and a bucket scale.
///
/// With noise, `E(e)` enters every place `E(S)` does: `C2`, the `g²`
/// denominator and the DGI offset.
pub fn theoretical_constants(moments: &MomentSet, image: &GrayImage, gamma: f64, noise: &NoiseModel) -> Constants {
    let sum_d = image.sum();
    let pixels = image.len() as f64;
    let mean_s = gamma * sum_d * moments.e_i + noise.mean();
    let c1 = gamma * moments.cov_if();
    let c2 = mean_s * moments.e_f;
    let c3 = if sum_d != 0.0 && moments.e_i * moments.e_f != 0.0 && c2 != 0.0 {
        Some(c1 / c2)
    } else {
        None
    };
    let c4 = sum_d / pixels;
    let c4_effective = if moments.e_i != 0.0 { mean_s / (gamma * pixels * moments.e_i) } else { c4 };
    Constants { c1, c2, c3, c4, c4_effective }
}

/// Expected reconstruction value at gray level `d` after `frames` patterns.
pub fn theoretical_mean(estimator: Estimator, d: f64, constants: &Constants, frames: usize) -> Result<f64> {
    let (slope, intercept) = mean_line(estimator, constants, frames)?;
    Ok(intercept + slope * d)
}

/// `(slope, intercept)` of the mean as a function of `d`.
pub fn mean_line(estimator: Estimator, c: &Constants, frames: usize) -> Result<(f64, f64)> {
    Ok(match estimator {
        Estimator::G2 => (c.c1, c.c2),
        Estimator::DeltaG2 => ((1.0 - 1.0 / frames as f64) * c.c1, 0.0),
        Estimator::NormalizedG2 => (c.c3()?, 1.0),
        Estimator::Dgi => (c.c1, -c.c1 * c.c4_effective),
    })
}

/// Every intermediate of the ΔG² variance expansion at one gray level.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceTerms {
    pub d: f64,
    /// `E(S̃)` (plus `E(e)`)
    pub e_s_tilde: f64,
    /// `D(S̃)` (plus `D(e)`)
    pub d_s_tilde: f64,
    /// `E(S̃²) = E(S̃)² + D(S̃)`
    pub e_s_tilde2: f64,
    pub e_s: f64,
    pub e_sf: f64,
    pub e_sf2: f64,
    pub d_s: f64,
    pub e_s2f: f64,
    pub e_s2f2: f64,
    pub d_sf: f64,
    /// `E(S)[6E(SF)E(F) − 2E(SF²)]`
    pub term_cross: f64,
    /// `E(S)²[D(F) − 2E(F)²]`
    pub term_mean_sq: f64,
    /// `D(S)E(F)²`
    pub term_var_s: f64,
    /// `−2E(S²F)E(F)`
    pub term_s2f: f64,
    /// `D{[S − E(S)][F − E(F)]}` for a single pattern.
    pub single_pattern_variance: f64,
    /// `σ² = single_pattern_variance / T`
    pub sigma2: f64,
}

/// `σ²` of ΔG² at a pixel with gray value `d_n`.
pub fn theoretical_variance_delta_g2(
    moments: &MomentSet,
    image: &GrayImage,
    d_n: f64,
    gamma: f64,
    frames: usize,
    noise: &NoiseModel,
) -> Result<VarianceTerms> {
    if frames < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: frames });
    }
    let m = moments;
    let rest_sum = image.sum() - d_n;
    let rest_sum_sq = image.sum_squares() - d_n * d_n;
    let g = gamma;

    let e_s_tilde = g * rest_sum * m.e_i + noise.mean();
    let d_s_tilde = g * g * rest_sum_sq * m.var_i() + noise.variance();
    let e_s_tilde2 = e_s_tilde * e_s_tilde + d_s_tilde;

    let e_s = e_s_tilde + g * d_n * m.e_i;
    let e_sf = e_s_tilde * m.e_f + g * d_n * m.e_if;
    let e_sf2 = e_s_tilde * m.e_f2 + g * d_n * m.e_if2;
    let d_s = d_s_tilde + g * g * d_n * d_n * m.var_i();
    let e_s2f = e_s_tilde2 * m.e_f + 2.0 * g * d_n * e_s_tilde * m.e_if + g * g * d_n * d_n * m.e_i2f;
    let e_s2f2 = e_s_tilde2 * m.e_f2 + 2.0 * g * d_n * e_s_tilde * m.e_if2 + g * g * d_n * d_n * m.e_i2f2;
    let d_sf = e_s2f2 - e_sf * e_sf;

    let term_cross = e_s * (6.0 * e_sf * m.e_f - 2.0 * e_sf2);
    let term_mean_sq = e_s * e_s * (m.var_f() - 2.0 * m.e_f * m.e_f);
    let term_var_s = d_s * m.e_f * m.e_f;
    let term_s2f = -2.0 * e_s2f * m.e_f;
    let parts = [term_cross, term_mean_sq, term_var_s, term_s2f, d_sf];
    let total: f64 = parts.iter().sum();
    let scale = parts.iter().fold(0.0f64, |a, p| a.max(p.abs()));

    let single = if total < 0.0 {
        // Cancellation among terms of size `scale` leaves ~1e-12 relative slack.
        if -total <= 1e-12 * scale {
            0.0
        } else {
            return Err(Error::NegativeVariance {
                sigma2: total / frames as f64,
                terms: format!(
                    "E(S)={e_s:e} E(SF)={e_sf:e} E(SF^2)={e_sf2:e} D(S)={d_s:e} E(S^2F)={e_s2f:e} \
                     E(S^2F^2)={e_s2f2:e} D(SF)={d_sf:e} cross={term_cross:e} mean_sq={term_mean_sq:e} \
                     var_s={term_var_s:e} s2f={term_s2f:e}"
                ),
            });
        }
    } else {
        total
    };

    Ok(VarianceTerms {
        d: d_n,
        e_s_tilde,
        d_s_tilde,
        e_s_tilde2,
        e_s,
        e_sf,
        e_sf2,
        d_s,
        e_s2f,
        e_s2f2,
        d_sf,
        term_cross,
        term_mean_sq,
        term_var_s,
        term_s2f,
        single_pattern_variance: single,
        sigma2: single / frames as f64,
    })
}

/// Predicted mean (and, for ΔG², variance) at one gray level.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelPrediction {
    pub d: f64,
    pub mu: f64,
    pub sigma2: Option<f64>,
    pub terms: Option<VarianceTerms>,
}

/// Theory for one estimator over the gray levels of an image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TheoryPrediction {
    pub estimator: Estimator,
    pub moments: MomentSet,
    pub constants: Constants,
    pub frames: usize,
    pub gamma: f64,
    pub noise_mean: f64,
    pub noise_var: f64,
    pub slope: f64,
    pub intercept: f64,
    pub levels: Vec<LevelPrediction>,
}

impl TheoryPrediction {
    /// Builds predictions at `levels`; variances are filled in for ΔG² only.
    pub fn new(
        estimator: Estimator,
        moments: &MomentSet,
        image: &GrayImage,
        levels: &[f64],
        gamma: f64,
        frames: usize,
        noise: &NoiseModel,
    ) -> Result<Self> {
        let constants = theoretical_constants(moments, image, gamma, noise);
        let (slope, intercept) = mean_line(estimator, &constants, frames)?;
        let levels = levels
            .iter()
            .map(|&d| {
                let terms = match estimator {
                    Estimator::DeltaG2 => Some(theoretical_variance_delta_g2(moments, image, d, gamma, frames, noise)?),
                    _ => None,
                };
                Ok(LevelPrediction { d, mu: intercept + slope * d, sigma2: terms.map(|t| t.sigma2), terms })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            estimator,
            moments: *moments,
            constants,
            frames,
            gamma,
            noise_mean: noise.mean(),
            noise_var: noise.variance(),
            slope,
            intercept,
            levels,
        })
    }

    /// Prediction at the level closest to `d`.
    pub fn level(&self, d: f64) -> Option<&LevelPrediction> {
        self.levels
            .iter()
            .min_by(|a, b| (a.d - d).abs().total_cmp(&(b.d - d).abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{make_test_card, CardLayout};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn uniform_identity_moments() {
        let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let m = compute_moments(&d, &TransformSpec::Identity).unwrap();
        // ∫ x^k dx / 0.9 over [0.1, 1]
        assert!(close(m.e_i, 0.55, 1e-15));
        assert!(close(m.e_i2, 0.37, 1e-14));
        assert!(close(m.e_if, 0.37, 1e-14));
        assert!(close(m.cov_if(), 0.0675, 1e-13));
    }

    #[test]
    fn bernoulli_identity_moments() {
        let d = DistributionSpec::bernoulli(0.5, 0.0, 1.0).unwrap();
        let m = compute_moments(&d, &TransformSpec::Identity).unwrap();
        assert_eq!(m.e_i, 0.5);
        assert_eq!(m.e_i2, 0.5);
        assert_eq!(m.cov_if(), 0.25);
    }

    #[test]
    fn point_mass_has_no_fluctuation() {
        let d = DistributionSpec::point_mass(0.6).unwrap();
        let m = compute_moments(&d, &TransformSpec::Identity).unwrap();
        assert!(m.var_i().abs() < 1e-16 && m.cov_if().abs() < 1e-16);
        let img = make_test_card(4, 4, &[0.0, 1.0], CardLayout::Stripes).unwrap();
        let c = theoretical_constants(&m, &img, 1.0, &NoiseModel::None);
        assert!(c.c1.abs() < 1e-16);
        let v = theoretical_variance_delta_g2(&m, &img, 1.0, 1.0, 100, &NoiseModel::None).unwrap();
        assert!(v.sigma2.abs() < 1e-15);
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        for t in [TransformSpec::Identity, TransformSpec::Power(3.0), TransformSpec::Exp, TransformSpec::Log] {
            let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
            let closed = compute_moments(&d, &t).unwrap();
            let quad = moments_by_quadrature(0.1, 1.0, &t);
            for (a, b) in closed.as_array().iter().zip(quad.as_array()) {
                assert!(close(*a, b, 1e-12), "{t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_needs_positive_support() {
        let d = DistributionSpec::uniform(0.0, 1.0).unwrap();
        assert!(compute_moments(&d, &TransformSpec::Log).is_err());
    }

    #[test]
    fn constants_for_opaque_image() {
        let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let m = compute_moments(&d, &TransformSpec::Identity).unwrap();
        let img = GrayImage::filled(4, 4, 0.0).unwrap();
        let c = theoretical_constants(&m, &img, 1.0, &NoiseModel::None);
        assert_eq!(c.c2, 0.0);
        assert_eq!(c.c4, 0.0);
        assert!(c.c3().is_err());
        assert!(close(c.c1, 0.0675, 1e-13));
    }

    #[test]
    fn gamma_scaling_of_constants() {
        let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let m = compute_moments(&d, &TransformSpec::Exp).unwrap();
        let img = make_test_card(8, 8, &[0.0, 0.4, 0.7, 1.0], CardLayout::Stripes).unwrap();
        let a = theoretical_constants(&m, &img, 1.0, &NoiseModel::None);
        let b = theoretical_constants(&m, &img, 2.0, &NoiseModel::None);
        assert!(close(b.c1, 2.0 * a.c1, 1e-15));
        assert!(close(b.c2, 2.0 * a.c2, 1e-15));
        assert!(close(b.c3.unwrap(), a.c3.unwrap(), 1e-15));
        assert_eq!(a.c4, b.c4);
    }

    #[test]
    fn mean_examples() {
        let c = Constants { c1: 0.3, c2: 5.0, c3: Some(0.06), c4: 0.4, c4_effective: 0.4 };
        assert_eq!(theoretical_mean(Estimator::DeltaG2, 0.0, &c, 100).unwrap(), 0.0);
        assert_eq!(theoretical_mean(Estimator::NormalizedG2, 0.0, &c, 100).unwrap(), 1.0);
        assert!(theoretical_mean(Estimator::Dgi, 0.4, &c, 100).unwrap().abs() < 1e-16);
        assert_eq!(theoretical_mean(Estimator::G2, 1.0, &c, 100).unwrap(), 5.3);
        let with_t = theoretical_mean(Estimator::DeltaG2, 1.0, &c, 100).unwrap();
        assert!(close(with_t, 0.99 * 0.3, 1e-15));
    }

    #[test]
    fn variance_needs_two_frames() {
        let d = DistributionSpec::uniform(0.1, 1.0).unwrap();
        let m = compute_moments(&d, &TransformSpec::Identity).unwrap();
        let img = GrayImage::filled(2, 2, 1.0).unwrap();
        assert!(theoretical_variance_delta_g2(&m, &img, 1.0, 1.0, 1, &NoiseModel::None).is_err());
    }

    #[test]
    fn corrupted_moments_surface_negative_variance() {
        let mut m = compute_moments(&DistributionSpec::uniform(0.1, 1.0).unwrap(), &TransformSpec::Identity).unwrap();
        m.e_i2f2 = -10.0;
        let img = GrayImage::filled(1, 1, 1.0).unwrap();
        match theoretical_variance_delta_g2(&m, &img, 1.0, 1.0, 10, &NoiseModel::None) {
            Err(Error::NegativeVariance { terms, .. }) => assert!(terms.contains("D(SF)")),
            other => panic!("expected negative variance, got {other:?}"),
        }
    }
}
