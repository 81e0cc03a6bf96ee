//! Seedable sampling of stationary-noise scenarios.
//!
//! Interferer amplitudes and widths follow Gamma laws, centers follow a
//! Normal law (expressed in units of `unit_hz`, 10^5 Hz by default) and the
//! interferer count is Poisson. Every sampler consumes uniforms from a
//! [`RngState`], a ChaCha8 stream, so a seed fixes the whole scenario on every
//! platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::exec::Execution;
use crate::model::{BackgroundParams, Band, Interferer, Preset, StationaryModel};
use crate::special::ln_factorial;

/// Maximum redraws per interferer slot before [`sample_model`] gives up.
pub const MAX_ATTEMPTS_PER_SLOT: usize = 1000;

/// Deterministic pseudo-random stream.
#[derive(Debug, Clone)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        RngState {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `index` derived from `seed`. Batch operations use
    /// one substream per item so results do not depend on scheduling.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        RngState { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on the open interval `(0, 1)`.
    #[inline]
    pub fn uniform_open(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Gamma law with shape `k` and scale `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaSpec {
    pub shape: f64,
    pub scale: f64,
}

impl GammaSpec {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let s = GammaSpec { shape, scale };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape.is_finite()
            && self.scale.is_finite()
            && self.shape > 0.0
            && self.scale > 0.0)
        {
            return Err(argument(format!(
                "gamma law needs shape > 0 and scale > 0, got ({}, {})",
                self.shape, self.scale
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn cdf(&self, x: f64) -> f64 {
        crate::special::gamma_p(self.shape, x / self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: f64,
    pub std: f64,
}

impl NormalSpec {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        let s = NormalSpec { mean, std };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.std.is_finite() && self.std > 0.0) {
            return Err(argument(format!(
                "normal law needs finite mean and std > 0, got ({}, {})",
                self.mean, self.std
            )));
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        crate::special::normal_cdf((x - self.mean) / self.std)
    }
}

/// Normal law of interferer centers, in units of `unit_hz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterPrior {
    #[serde(flatten)]
    pub law: NormalSpec,
    pub unit_hz: f64,
}

/// Poisson law of the interferer count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountSpec {
    pub lambda: f64,
}

/// Distributions from which whole scenarios are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPriors {
    pub amp_db: GammaSpec,
    pub center: CenterPrior,
    pub width_hz: GammaSpec,
    pub count: CountSpec,
    pub background: BackgroundParams,
    pub band: Band,
}

impl Default for ParameterPriors {
    fn default() -> Self {
        ParameterPriors {
            amp_db: GammaSpec {
                shape: 6.09,
                scale: 1.58,
            },
            center: CenterPrior {
                law: NormalSpec {
                    mean: 2.72,
                    std: 1.39,
                },
                unit_hz: 1.0e5,
            },
            width_hz: GammaSpec {
                shape: 2.54,
                scale: 440.99,
            },
            count: CountSpec { lambda: 8.0 },
            background: Preset::Worst.params(),
            band: Band::default(),
        }
    }
}

impl ParameterPriors {
    pub fn validate(&self) -> Result<()> {
        self.amp_db.validate()?;
        self.center.law.validate()?;
        self.width_hz.validate()?;
        if !(self.center.unit_hz.is_finite() && self.center.unit_hz > 0.0) {
            return Err(argument("center unit_hz must be positive"));
        }
        if !(self.count.lambda.is_finite() && self.count.lambda > 0.0) {
            return Err(argument(format!(
                "count lambda must be positive, got {}",
                self.count.lambda
            )));
        }
        self.background.validate()?;
        self.band.validate()
    }

    /// Center law converted to Hz.
    pub fn center_hz(&self) -> NormalSpec {
        NormalSpec {
            mean: self.center.law.mean * self.center.unit_hz,
            std: self.center.law.std * self.center.unit_hz,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: ParameterPriors = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("priors serialize")
    }
}

/// Draws a Normal variate with the Marsaglia polar method. The second variate
/// of each accepted pair is discarded so every call consumes whole pairs of
/// uniforms.
pub fn sample_normal(rng: &mut RngState, spec: &NormalSpec) -> f64 {
    spec.mean + spec.std * standard_normal(rng)
}

fn standard_normal(rng: &mut RngState) -> f64 {
    loop {
        let u = 2.0 * rng.uniform() - 1.0;
        let v = 2.0 * rng.uniform() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Draws a Gamma variate with the Marsaglia-Tsang squeeze method. Shapes below
/// one sample `Gamma(k + 1)` and scale by `U^(1/k)`.
pub fn sample_gamma(rng: &mut RngState, spec: &GammaSpec) -> f64 {
    if spec.shape < 1.0 {
        let g = standard_gamma_ge1(rng, spec.shape + 1.0);
        let u = rng.uniform_open();
        return spec.scale * g * u.powf(1.0 / spec.shape);
    }
    spec.scale * standard_gamma_ge1(rng, spec.shape)
}

fn standard_gamma_ge1(rng: &mut RngState, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.uniform_open();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draws a Poisson count. Means below 30 use sequential inversion; larger
/// means use Hörmann's transformed rejection (PTRS).
pub fn sample_count(rng: &mut RngState, lambda: f64) -> u64 {
    debug_assert!(lambda > 0.0);
    if lambda < 30.0 {
        poisson_inversion(rng, lambda)
    } else {
        poisson_ptrs(rng, lambda)
    }
}

fn poisson_inversion(rng: &mut RngState, lambda: f64) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
        // cdf has converged to within rounding of 1
        if p < f64::EPSILON * cdf && k as f64 > lambda {
            break;
        }
    }
    k
}

fn poisson_ptrs(rng: &mut RngState, lambda: f64) -> u64 {
    let slam = lambda.sqrt();
    let loglam = lambda.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.uniform_open();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lambda + 0.43).floor();
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        let rhs = -lambda + k * loglam - ln_factorial(k as u64);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Draws one scenario: a Poisson number of interferers, each with Gamma
/// amplitude, Normal center and Gamma width. Draws landing outside the band
/// or with non-positive amplitude or width are redrawn, up to
/// [`MAX_ATTEMPTS_PER_SLOT`] times per interferer.
pub fn sample_model(rng: &mut RngState, priors: &ParameterPriors) -> Result<StationaryModel> {
    priors.validate()?;
    let count = sample_count(rng, priors.count.lambda);
    let center = priors.center_hz();
    let mut interferers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        interferers.push(sample_interferer(rng, priors, &center)?);
    }
    StationaryModel::new(priors.background, interferers, priors.band)
}

fn sample_interferer(
    rng: &mut RngState,
    priors: &ParameterPriors,
    center: &NormalSpec,
) -> Result<Interferer> {
    let mut rejected_by = "amp_db";
    for _ in 0..MAX_ATTEMPTS_PER_SLOT {
        let amplitude_db = sample_gamma(rng, &priors.amp_db);
        let center_hz = sample_normal(rng, center);
        let sigma_hz = sample_gamma(rng, &priors.width_hz);
        if !(amplitude_db > 0.0) {
            rejected_by = "amp_db";
        } else if !priors.band.contains(center_hz) {
            rejected_by = "center";
        } else if !(sigma_hz > 0.0) {
            rejected_by = "width_hz";
        } else {
            return Ok(Interferer {
                amplitude_db,
                center_hz,
                sigma_hz,
            });
        }
    }
    Err(Error::Sampling {
        distribution: rejected_by,
        attempts: MAX_ATTEMPTS_PER_SLOT,
    })
}

/// Draws `count` scenarios; scenario `i` uses substream `(seed, i)`.
pub fn sample_models(
    seed: u64,
    priors: &ParameterPriors,
    count: usize,
) -> Result<Vec<StationaryModel>> {
    sample_models_with(seed, priors, count, Execution::default())
}

pub fn sample_models_with(
    seed: u64,
    priors: &ParameterPriors,
    count: usize,
    exec: Execution,
) -> Result<Vec<StationaryModel>> {
    priors.validate()?;
    exec.map_indexed(count, |i| {
        let mut rng = RngState::substream(seed, i as u64);
        sample_model(&mut rng, priors)
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn uniform_ranges() {
        let mut rng = RngState::from_seed(1);
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            let o = rng.uniform_open();
            assert!(o > 0.0 && o < 1.0);
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = RngState::substream(5, 0);
        let mut b = RngState::substream(5, 1);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut c = RngState::substream(5, 0);
        let mut d = RngState::substream(5, 0);
        assert_eq!(c.next_u64(), d.next_u64());
    }

    #[test]
    fn normal_degenerate_width() {
        let mut rng = RngState::from_seed(3);
        let spec = NormalSpec::new(5.0, 1e-12).unwrap();
        for _ in 0..100 {
            assert!((sample_normal(&mut rng, &spec) - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn normal_mean() {
        let mut rng = RngState::from_seed(11);
        let spec = NormalSpec::new(2.72, 1.39).unwrap();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_normal(&mut rng, &spec))
            .collect();
        let (m, v) = moments(&xs);
        assert!((m - 2.72).abs() < 0.01, "{m}");
        assert!((v.sqrt() / 1.39 - 1.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn normal_determinism() {
        let spec = NormalSpec::new(0.0, 1.0).unwrap();
        let mut a = RngState::from_seed(42);
        let mut b = RngState::from_seed(42);
        let xa: Vec<f64> = (0..1000).map(|_| sample_normal(&mut a, &spec)).collect();
        let xb: Vec<f64> = (0..1000).map(|_| sample_normal(&mut b, &spec)).collect();
        assert_eq!(xa, xb);
    }

    #[test]
    fn gamma_exponential_reduction() {
        let mut rng = RngState::from_seed(2);
        let spec = GammaSpec::new(1.0, 2.0).unwrap();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_gamma(&mut rng, &spec))
            .collect();
        let (m, _) = moments(&xs);
        assert!((m / 2.0 - 1.0).abs() < 0.01, "{m}");
    }

    #[test]
    fn gamma_moments_amplitude_prior() {
        let mut rng = RngState::from_seed(9);
        let spec = GammaSpec::new(6.09, 1.58).unwrap();
        let xs: Vec<f64> = (0..1_000_000)
            .map(|_| sample_gamma(&mut rng, &spec))
            .collect();
        let (m, v) = moments(&xs);
        assert!((m / 9.6222 - 1.0).abs() < 0.01, "{m}");
        assert!((v / 15.203 - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn gamma_small_shape() {
        let mut rng = RngState::from_seed(4);
        let spec = GammaSpec::new(0.3, 2.0).unwrap();
        let xs: Vec<f64> = (0..400_000)
            .map(|_| sample_gamma(&mut rng, &spec))
            .collect();
        assert!(xs.iter().all(|&x| x >= 0.0 && x.is_finite()));
        let (m, v) = moments(&xs);
        assert!((m / 0.6 - 1.0).abs() < 0.02, "{m}");
        assert!((v / 1.2 - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn poisson_small_lambda() {
        let mut rng = RngState::from_seed(8);
        let total: u64 = (0..100_000).map(|_| sample_count(&mut rng, 1e-9)).sum();
        assert!((total as f64 / 1e5) < 0.001);
    }

    #[test]
    fn poisson_moments() {
        for (lambda, seed) in [(8.0, 21), (120.0, 22)] {
            let mut rng = RngState::from_seed(seed);
            let xs: Vec<f64> = (0..1_000_000)
                .map(|_| sample_count(&mut rng, lambda) as f64)
                .collect();
            let (m, v) = moments(&xs);
            assert!((m / lambda - 1.0).abs() < 0.01, "lambda={lambda} mean={m}");
            assert!((v / lambda - 1.0).abs() < 0.03, "lambda={lambda} var={v}");
        }
    }

    #[test]
    fn poisson_determinism() {
        let mut a = RngState::from_seed(77);
        let mut b = RngState::from_seed(77);
        for _ in 0..1000 {
            assert_eq!(sample_count(&mut a, 8.0), sample_count(&mut b, 8.0));
        }
    }

    #[test]
    fn tiny_lambda_gives_empty_model() {
        let priors = ParameterPriors {
            count: CountSpec { lambda: 1e-9 },
            ..Default::default()
        };
        let mut rng = RngState::from_seed(0);
        let m = sample_model(&mut rng, &priors).unwrap();
        assert!(m.interferers.is_empty());
        assert_eq!(m.background, Preset::Worst.params());
    }

    #[test]
    fn sampled_models_are_valid_and_in_band() {
        let priors = ParameterPriors::default();
        let models = sample_models(123, &priors, 500).unwrap();
        for m in &models {
            assert!(m
                .interferers
                .windows(2)
                .all(|w| w[0].canonical_cmp(&w[1]).is_le()));
            for i in &m.interferers {
                i.validate().unwrap();
                assert!(priors.band.contains(i.center_hz));
            }
        }
    }

    #[test]
    fn same_seed_same_json() {
        let priors = ParameterPriors::default();
        let a = sample_model(&mut RngState::from_seed(17), &priors).unwrap();
        let b = sample_model(&mut RngState::from_seed(17), &priors).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn batch_policies_agree() {
        let priors = ParameterPriors::default();
        let a = sample_models_with(9, &priors, 64, Execution::Sequential).unwrap();
        let b = sample_models_with(9, &priors, 64, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_budget_exhausted() {
        // centers far outside the band are always rejected
        let mut priors = ParameterPriors::default();
        priors.center.law = NormalSpec::new(1e4, 1.0).unwrap();
        priors.count.lambda = 50.0;
        let err = sample_model(&mut RngState::from_seed(1), &priors).unwrap_err();
        match err {
            Error::Sampling { distribution, .. } => assert_eq!(distribution, "center"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn priors_json_shape() {
        let p = ParameterPriors::default();
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["amp_db"]["shape"], 6.09);
        assert_eq!(v["amp_db"]["scale"], 1.58);
        assert_eq!(v["center"]["mean"], 2.72);
        assert_eq!(v["center"]["std"], 1.39);
        assert_eq!(v["center"]["unit_hz"], 100000.0);
        assert_eq!(v["width_hz"]["scale"], 440.99);
        assert_eq!(v["count"]["lambda"], 8.0);
        assert_eq!(v["background"]["b"], 0.3942);
        assert_eq!(v["band"]["f_max_hz"], 500000.0);
        assert_eq!(ParameterPriors::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn invalid_priors_rejected() {
        let mut p = ParameterPriors::default();
        p.count.lambda = 0.0;
        assert!(p.validate().is_err());
        let mut p = ParameterPriors::default();
        p.amp_db.shape = -1.0;
        assert!(p.validate().is_err());
    }
}
