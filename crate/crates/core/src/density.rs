//! Target densities, noise models and the noisy oracle.
//!
//! A target is an unnormalized density p(θ) restricted to a box. A
//! [`NoiseModel`] turns an exact value p(θ) into one random realization
//! m̃(θ) = H(p(θ), ε); its expectation m(θ) (the mean function) is what a
//! noisy sampler ends up targeting. Closed-form mean functions are provided
//! for every noise kind.

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};

use crate::rng::Rng;
use crate::special::{gaussian_pdf, normal_cdf, normal_pdf};
use crate::{Error, Result};

/// Axis-aligned box Θ = Π [lower_i, upper_i].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoundedDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidDomain(format!(
                    "bound {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube [lo, hi]^dim.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    /// Closed box membership. Assumes the dimension already matches.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }

    /// Dimension check plus membership.
    pub fn check(&self, theta: &[f64]) -> Result<()> {
        self.check_dim(theta)?;
        if !self.contains(theta) {
            return Err(Error::OutsideDomain(theta.to_vec()));
        }
        Ok(())
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }
}

/// An unnormalized density p(θ) on a bounded domain, zero outside it.
pub trait TargetDensity: Send + Sync {
    fn domain(&self) -> &BoundedDomain;

    /// Density at an in-domain point of the right dimension. Callers that
    /// cannot guarantee this should use [`TargetDensity::eval`].
    fn density(&self, theta: &[f64]) -> f64;

    fn eval(&self, theta: &[f64]) -> Result<f64> {
        let d = self.domain();
        d.check_dim(theta)?;
        Ok(if d.contains(theta) { self.density(theta) } else { 0.0 })
    }
}

/// The two-dimensional banana-shaped benchmark
///
/// p(θ) = exp(−(c − Bθ₁ − θ₂²)²/(2η₀²) − θ₁²/(2η₁²) − θ₂²/(2η₂²)).
///
/// The default parameters (c = 4, B = 10, η₀ = 4, η₁ = η₂ = 3.5) are the
/// ones whose moments match the published ground truths μ = [−0.48, 0],
/// diag Σ = [1.38, 8.90]; see [`Banana::printed`] for the other reading.
#[derive(Debug, Clone)]
pub struct Banana {
    pub offset: f64,
    pub b: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    domain: BoundedDomain,
}

impl Default for Banana {
    fn default() -> Self {
        Self::with_params(4.0, 10.0, 4.0, 3.5, 3.5)
    }
}

impl Banana {
    /// Parameters exactly as typeset next to the formula (c = η₁ = 3.5,
    /// B = 4). Its moments do not match the published ground truths.
    pub fn printed() -> Self {
        Self::with_params(3.5, 4.0, 4.0, 3.5, 3.5)
    }

    pub fn with_params(offset: f64, b: f64, eta0: f64, eta1: f64, eta2: f64) -> Self {
        Self {
            offset,
            b,
            eta0,
            eta1,
            eta2,
            domain: BoundedDomain::cube(2, -10.0, 10.0).expect("static domain"),
        }
    }
}

impl TargetDensity for Banana {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, theta: &[f64]) -> f64 {
        let (t1, t2) = (theta[0], theta[1]);
        let r = self.offset - self.b * t1 - t2 * t2;
        (-r * r / (2.0 * self.eta0 * self.eta0)
            - t1 * t1 / (2.0 * self.eta1 * self.eta1)
            - t2 * t2 / (2.0 * self.eta2 * self.eta2))
            .exp()
    }
}

/// Equal mixture of N([10,0], 9I) and N([−10,0], 9I) on [−20,20]².
#[derive(Debug, Clone)]
pub struct Bimodal {
    domain: BoundedDomain,
}

impl Default for Bimodal {
    fn default() -> Self {
        Self { domain: BoundedDomain::cube(2, -20.0, 20.0).expect("static domain") }
    }
}

impl TargetDensity for Bimodal {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, theta: &[f64]) -> f64 {
        let var = 9.0;
        let comp = |cx: f64| {
            let dx = theta[0] - cx;
            let d2 = dx * dx + theta[1] * theta[1];
            (-0.5 * d2 / var).exp() / (2.0 * std::f64::consts::PI * var)
        };
        0.5 * comp(10.0) + 0.5 * comp(-10.0)
    }
}

/// ½N(θ; −1, 1) + ½N(θ; 5, 2) on [−8, 17]; second parameters are variances.
#[derive(Debug, Clone)]
pub struct GaussMix1d {
    domain: BoundedDomain,
}

impl Default for GaussMix1d {
    fn default() -> Self {
        Self { domain: BoundedDomain::new(vec![-8.0], vec![17.0]).expect("static domain") }
    }
}

impl GaussMix1d {
    pub fn at(&self, x: f64) -> f64 {
        if !(-8.0..=17.0).contains(&x) {
            return 0.0;
        }
        0.5 * gaussian_pdf(x, -1.0, 1.0) + 0.5 * gaussian_pdf(x, 5.0, 2.0)
    }
}

impl TargetDensity for GaussMix1d {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, theta: &[f64]) -> f64 {
        self.at(theta[0])
    }
}

/// Isotropic Gaussian N(mean, var·I) truncated to a box.
#[derive(Debug, Clone)]
pub struct IsotropicGaussian {
    pub mean: Vec<f64>,
    pub var: f64,
    domain: BoundedDomain,
}

impl IsotropicGaussian {
    pub fn new(mean: Vec<f64>, var: f64, domain: BoundedDomain) -> Result<Self> {
        domain.check_dim(&mean)?;
        if !(var > 0.0) {
            return Err(Error::InvalidParameter(format!("variance must be positive, got {var}")));
        }
        Ok(Self { mean, var, domain })
    }
}

impl TargetDensity for IsotropicGaussian {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.mean).map(|(x, m)| gaussian_pdf(*x, *m, self.var)).product()
    }
}

/// Constant density 1 on a box.
#[derive(Debug, Clone)]
pub struct Flat {
    domain: BoundedDomain,
}

impl Flat {
    pub fn new(domain: BoundedDomain) -> Self {
        Self { domain }
    }
}

impl TargetDensity for Flat {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, _theta: &[f64]) -> f64 {
        1.0
    }
}

/// Wraps a closure as a target, e.g. a mean function m(θ) built from
/// another target and a noise model.
pub struct FnDensity<F> {
    f: F,
    domain: BoundedDomain,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnDensity<F> {
    pub fn new(domain: BoundedDomain, f: F) -> Self {
        Self { f, domain }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> TargetDensity for FnDensity<F> {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn density(&self, theta: &[f64]) -> f64 {
        (self.f)(theta)
    }
}

/// The transformation H(p, ε) producing a noisy realization from p.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// ε·p with ε ~ Exp(rate).
    MultiplicativeExponential { rate: f64 },
    /// max(0, p + ε) with ε ~ N(0, σ²).
    RectifiedGaussian { sigma: f64 },
    /// |p + ε| with ε ~ N(0, σ²).
    FoldedGaussian { sigma: f64 },
    /// exp(log p + ε) with ε ~ N(0, σ²). Undefined at p = 0.
    LogAdditiveGaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            NoiseModel::None => return Ok(()),
            NoiseModel::MultiplicativeExponential { rate } => ("rate", rate),
            NoiseModel::RectifiedGaussian { sigma }
            | NoiseModel::FoldedGaussian { sigma }
            | NoiseModel::LogAdditiveGaussian { sigma } => ("sigma", sigma),
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
        }
    }

    /// One draw of m̃ given the exact value `p`.
    pub fn perturb(&self, p: f64, rng: &mut Rng) -> Result<f64> {
        if !(p >= 0.0) {
            return Err(Error::InvalidParameter(format!("density value must be >= 0, got {p}")));
        }
        let gauss = |sigma: f64, rng: &mut Rng| -> f64 {
            Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
        };
        Ok(match *self {
            NoiseModel::None => p,
            NoiseModel::MultiplicativeExponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(rng) * p
            }
            NoiseModel::RectifiedGaussian { sigma } => (p + gauss(sigma, rng)).max(0.0),
            NoiseModel::FoldedGaussian { sigma } => (p + gauss(sigma, rng)).abs(),
            NoiseModel::LogAdditiveGaussian { sigma } => {
                if p == 0.0 {
                    return Err(Error::LogOfZero);
                }
                (p.ln() + gauss(sigma, rng)).exp()
            }
        })
    }

    /// Closed-form mean function m = E[m̃ | p].
    pub fn mean(&self, p: f64) -> f64 {
        match *self {
            NoiseModel::None => p,
            NoiseModel::MultiplicativeExponential { rate } => p / rate,
            NoiseModel::RectifiedGaussian { sigma } => rectified_mean(p, sigma),
            NoiseModel::FoldedGaussian { sigma } => folded_mean(p, sigma),
            NoiseModel::LogAdditiveGaussian { sigma } => p * (0.5 * sigma * sigma).exp(),
        }
    }
}

/// E[max(0, p + ε)], ε ~ N(0, σ²):  p·Φ(p/σ) + σ·φ(p/σ).
///
/// Algebraically the same as [p + σφ(−p/σ)/(1−Φ(−p/σ))]·[1−Φ(−p/σ)] but
/// without the division, which underflows for p ≪ −σ.
pub fn rectified_mean(p: f64, sigma: f64) -> f64 {
    let z = p / sigma;
    p * normal_cdf(z) + sigma * normal_pdf(z)
}

/// E[|p + ε|], ε ~ N(0, σ²):  σ√(2/π)·exp(−p²/2σ²) + p·[1 − 2Φ(−p/σ)].
pub fn folded_mean(p: f64, sigma: f64) -> f64 {
    let z = p / sigma;
    sigma * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
        + p * (1.0 - 2.0 * normal_cdf(-z))
}

/// Source of noisy realizations m̃(θ).
///
/// Implementations count every realization they produce. Callers only
/// query in-domain points of the right dimension; samplers reject anything
/// else before reaching the oracle.
pub trait NoisyOracle {
    fn domain(&self) -> &BoundedDomain;

    fn realize(&mut self, theta: &[f64]) -> Result<f64>;

    /// Number of realizations produced so far.
    fn evaluations(&self) -> u64;
}

impl<O: NoisyOracle + ?Sized> NoisyOracle for &mut O {
    fn domain(&self) -> &BoundedDomain {
        (**self).domain()
    }

    fn realize(&mut self, theta: &[f64]) -> Result<f64> {
        (**self).realize(theta)
    }

    fn evaluations(&self) -> u64 {
        (**self).evaluations()
    }
}

/// m̃(θ) = H(p(θ), ε) for an analytic target and a noise model.
pub struct DensityOracle<T> {
    target: T,
    noise: NoiseModel,
    rng: Rng,
    count: u64,
}

impl<T: TargetDensity> DensityOracle<T> {
    pub fn new(target: T, noise: NoiseModel, rng: Rng) -> Result<Self> {
        noise.validate()?;
        Ok(Self { target, noise, rng, count: 0 })
    }

    pub fn target(&self) -> &T {
        &self.target
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Closed-form m(θ) for this oracle.
    pub fn mean_function(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.noise.mean(self.target.eval(theta)?))
    }
}

impl<T: TargetDensity> NoisyOracle for DensityOracle<T> {
    fn domain(&self) -> &BoundedDomain {
        self.target.domain()
    }

    fn realize(&mut self, theta: &[f64]) -> Result<f64> {
        let p = self.target.eval(theta)?;
        self.count += 1;
        self.noise.perturb(p, &mut self.rng)
    }

    fn evaluations(&self) -> u64 {
        self.count
    }
}

/// Sample mean and unbiased sample variance of `m` realizations at θ.
pub fn empirical_mean_var<O: NoisyOracle>(oracle: &mut O, theta: &[f64], m: usize) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::Size(format!("need at least 2 draws, got {m}")));
    }
    // Welford keeps the variance exactly zero for a constant stream.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..m {
        let x = oracle.realize(theta)?;
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok((mean, m2 / (m - 1) as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn mc_mean(noise: NoiseModel, p: f64, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded(seed);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = noise.perturb(p, &mut rng).unwrap();
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        (mean, (var / n as f64).sqrt())
    }

    #[test]
    fn domain_validation() {
        assert!(BoundedDomain::new(vec![], vec![]).is_err());
        assert!(BoundedDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoundedDomain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let d = BoundedDomain::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(d.volume(), 4.0);
        assert!(d.contains(&[1.0, -1.0]));
        assert!(!d.contains(&[1.0 + 1e-12, 0.0]));
    }

    #[test]
    fn banana_values() {
        let b = Banana::default();
        // (4 − 0 − 0)²/(2·16) = 0.5
        assert!((b.eval(&[0.0, 0.0]).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(b.eval(&[11.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(b.eval(&[0.0]), Err(Error::Dimension { expected: 2, got: 1 })));
        let p0 = b.eval(&[0.0, 0.0]).unwrap();
        let p1 = b.eval(&[0.0, 1e-9]).unwrap();
        assert!((p0 - p1).abs() < 1e-12);
        // Printed reading at the origin: exp(−3.5²/32).
        let lit = Banana::printed().eval(&[0.0, 0.0]).unwrap();
        assert!((lit - 0.681_87).abs() < 1e-4);
    }

    #[test]
    fn bimodal_values() {
        let b = Bimodal::default();
        let a = b.eval(&[10.0, 0.0]).unwrap();
        assert_eq!(a, b.eval(&[-10.0, 0.0]).unwrap());
        let far = (-0.5 * 400.0 / 9.0f64).exp() / (18.0 * std::f64::consts::PI);
        assert!((a - (0.5 / (18.0 * std::f64::consts::PI) + 0.5 * far)).abs() < 1e-17);
        assert!((a / (0.5 / (18.0 * std::f64::consts::PI)) - 1.0).abs() < 1e-9);
        let c = b.eval(&[0.0, 0.0]).unwrap();
        let one = (-0.5 * 100.0 / 9.0f64).exp() / (18.0 * std::f64::consts::PI);
        assert!((c - one).abs() < 1e-18);
        assert_eq!(b.eval(&[20.5, 0.0]).unwrap(), 0.0);
        assert!(b.eval(&[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn gaussmix_values() {
        let g = GaussMix1d::default();
        let want = 0.5 / (2.0 * std::f64::consts::PI).sqrt() + 0.5 * gaussian_pdf(-1.0, 5.0, 2.0);
        assert!((g.at(-1.0) - want).abs() < 1e-15);
        assert!((g.at(-1.0) - 0.199_489).abs() < 1e-6);
        assert_eq!(g.at(-8.5), 0.0);
        assert_eq!(g.at(17.5), 0.0);
        for i in 1..20 {
            let t = i as f64 * 0.3;
            let a = gaussian_pdf(-1.0 + t, -1.0, 1.0);
            let b = gaussian_pdf(-1.0 - t, -1.0, 1.0);
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn perturb_identity_and_errors() {
        let mut rng = seeded(1);
        assert_eq!(NoiseModel::None.perturb(0.3, &mut rng).unwrap(), 0.3);
        let log = NoiseModel::LogAdditiveGaussian { sigma: 0.5 };
        assert_eq!(log.perturb(0.0, &mut rng), Err(Error::LogOfZero));
        assert!(NoiseModel::RectifiedGaussian { sigma: 0.0 }.validate().is_err());
        assert!(NoiseModel::MultiplicativeExponential { rate: -1.0 }.validate().is_err());
    }

    #[test]
    fn exponential_noise_is_unbiased() {
        let (m, se) = mc_mean(NoiseModel::MultiplicativeExponential { rate: 1.0 }, 0.3, 1_000_000, 11);
        assert!((m - 0.3).abs() < 3.0 * se, "{m} ± {se}");
        let (m, se) = mc_mean(NoiseModel::MultiplicativeExponential { rate: 2.5 }, 1.0, 1_000_000, 12);
        assert!((m - 0.4).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn rectified_at_zero() {
        let sigma = 0.05;
        let exact = rectified_mean(0.0, sigma);
        assert!((exact - sigma / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert!((exact - 0.019_947).abs() < 1e-6);
        let (m, se) = mc_mean(NoiseModel::RectifiedGaussian { sigma }, 0.0, 1_000_000, 13);
        assert!((m - exact).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn closed_forms_asymptotics() {
        let sigma = 0.05;
        let p = 10.0 * sigma;
        assert!(((rectified_mean(p, sigma) - p) / p).abs() < 1e-20);
        assert!(((folded_mean(p, sigma) - p) / p).abs() < 1e-20);
        assert!((folded_mean(0.0, sigma) - sigma * (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-16);
    }

    #[test]
    fn closed_forms_match_monte_carlo() {
        for (noise, f) in [
            (NoiseModel::RectifiedGaussian { sigma: 0.05 }, rectified_mean as fn(f64, f64) -> f64),
            (NoiseModel::FoldedGaussian { sigma: 0.05 }, folded_mean),
        ] {
            let (m, se) = mc_mean(noise, 0.05, 10_000_000, 14);
            let exact = f(0.05, 0.05);
            assert!((m - exact).abs() < 3.0 * se, "{noise:?}: {m} vs {exact} ± {se}");
        }
    }

    #[test]
    fn rectified_below_folded() {
        for i in 0..=200 {
            let p = i as f64 * 0.005;
            for sigma in [0.01, 0.05, 0.3] {
                assert!(rectified_mean(p, sigma) <= folded_mean(p, sigma) + 1e-15);
            }
        }
    }

    #[test]
    fn log_additive_scale() {
        let sigma = 0.4;
        let noise = NoiseModel::LogAdditiveGaussian { sigma };
        let (m, se) = mc_mean(noise, 0.7, 1_000_000, 15);
        let want = 0.7 * (0.5 * sigma * sigma).exp();
        assert!((m - want).abs() < 3.0 * se);
        assert_eq!(noise.mean(0.7), want);
    }

    #[test]
    fn oracle_counts_and_empirical_moments() {
        let target = IsotropicGaussian::new(vec![0.0], 1.0, BoundedDomain::cube(1, -5.0, 5.0).unwrap()).unwrap();
        let mut exact = DensityOracle::new(target.clone(), NoiseModel::None, seeded(3)).unwrap();
        let (m, v) = empirical_mean_var(&mut exact, &[0.5], 100).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(m, target.eval(&[0.5]).unwrap());
        assert_eq!(exact.evaluations(), 100);
        assert!(empirical_mean_var(&mut exact, &[0.5], 1).is_err());

        let mut noisy =
            DensityOracle::new(target.clone(), NoiseModel::MultiplicativeExponential { rate: 1.0 }, seeded(4))
                .unwrap();
        let c = target.eval(&[0.0]).unwrap();
        let (_, v) = empirical_mean_var(&mut noisy, &[0.0], 400_000).unwrap();
        // var[ε c] = c² for ε ~ Exp(1); fourth moment of Exp(1) is 24, so
        // the sd of the variance estimate is about c²·sqrt(23/n).
        let tol = 3.0 * c * c * (23.0f64 / 400_000.0).sqrt();
        assert!((v - c * c).abs() < tol, "{v} vs {}", c * c);
    }

    #[test]
    fn rectified_variance_shape() {
        // The standard deviation of max(0, p+ε) grows from its value at p=0
        // towards σ as p leaves the rectification region.
        let sigma = 0.05;
        let target = Flat::new(BoundedDomain::cube(1, 0.0, 1.0).unwrap());
        let mut sds = Vec::new();
        for p in [0.0, 0.025, 0.05, 0.1, 0.2] {
            let t = FnDensity::new(target.domain().clone(), move |_| p);
            let mut o = DensityOracle::new(t, NoiseModel::RectifiedGaussian { sigma }, seeded(5)).unwrap();
            let (_, v) = empirical_mean_var(&mut o, &[0.5], 200_000).unwrap();
            sds.push(v.sqrt());
        }
        for w in sds.windows(2) {
            assert!(w[0] < w[1] + 1e-3);
        }
        assert!(sds[0] < 0.6 * sigma);
        assert!((sds[4] - sigma).abs() < 0.02 * sigma);
    }
}
