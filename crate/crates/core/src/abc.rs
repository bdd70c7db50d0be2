//! Approximate Bayesian computation as a noisy target.
//!
//! m̃_ε(θ) = (1/N)·Σₙ h(y_true | y⁽ⁿ⁾, ε) with y⁽ⁿ⁾ ~ ℓ(·|θ), optionally
//! multiplied by g(θ)/q(θ). The Gaussian kernel is left unnormalized.

use rand_distr::{Distribution, StandardNormal};

use crate::density::{BoundedDomain, NoisyOracle};
use crate::rng::Rng;
use crate::samplers::IndependentProposal;
use crate::special::gaussian_pdf;
use crate::{Error, Point, Result};

/// A generative model with a prior: θ ~ g, y ~ ℓ(·|θ).
pub trait Simulator {
    fn domain(&self) -> &BoundedDomain;

    /// One pseudo-dataset written into `out` (cleared first); draws are
    /// i.i.d. given θ.
    fn simulate(&self, theta: &[f64], out: &mut Vec<f64>, rng: &mut Rng);

    fn prior_density(&self, theta: &[f64]) -> f64;

    fn sample_prior(&self, rng: &mut Rng) -> Point;
}

/// Discrepancy kernel h(y_true | y, ε).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbcKernel {
    /// 1 if ‖y_true − y‖ < ε, else 0.
    Indicator(f64),
    /// exp(−‖y_true − y‖² / 2ε²).
    Gaussian(f64),
}

impl AbcKernel {
    pub fn epsilon(&self) -> f64 {
        match *self {
            AbcKernel::Indicator(e) | AbcKernel::Gaussian(e) => e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = self.epsilon();
        if e > 0.0 && !e.is_nan() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("kernel width must be positive, got {e}")))
        }
    }

    pub fn eval(&self, y_true: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = y_true.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        match *self {
            AbcKernel::Indicator(e) => {
                if d2.sqrt() < e {
                    1.0
                } else {
                    0.0
                }
            }
            AbcKernel::Gaussian(e) => (-d2 / (2.0 * e * e)).exp(),
        }
    }
}

/// The N-pseudo-dataset kernel average at θ, times g(θ)/q(θ) when `q` is
/// given.
pub fn abc_noisy_eval<S: Simulator + ?Sized>(
    sim: &S,
    kernel: AbcKernel,
    y_true: &[f64],
    theta: &[f64],
    n: usize,
    q: Option<&IndependentProposal>,
    rng: &mut Rng,
) -> Result<f64> {
    kernel.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one pseudo-dataset".into()));
    }
    sim.domain().check(theta)?;
    let mut acc = 0.0;
    let mut y = Vec::with_capacity(y_true.len());
    for _ in 0..n {
        sim.simulate(theta, &mut y, rng);
        if y.len() != y_true.len() {
            return Err(Error::Dimension { expected: y_true.len(), got: y.len() });
        }
        acc += kernel.eval(y_true, &y);
    }
    let mut m = acc / n as f64;
    if let Some(q) = q {
        let qv = q.density(theta);
        m = if qv > 0.0 { m * sim.prior_density(theta) / qv } else { 0.0 };
    }
    Ok(m)
}

/// T pairs (θ_t, m̃_ε(θ_t)) with θ_t ~ q and the g/q correction applied.
pub fn abc_target_pairs<S: Simulator + ?Sized>(
    sim: &S,
    kernel: AbcKernel,
    y_true: &[f64],
    t: usize,
    n: usize,
    proposal: &IndependentProposal,
    rng: &mut Rng,
) -> Result<Vec<(Point, f64)>> {
    let domain = sim.domain();
    (0..t)
        .map(|_| {
            let theta = proposal.sample(rng);
            let m = if domain.contains(&theta) {
                abc_noisy_eval(sim, kernel, y_true, &theta, n, Some(proposal), rng)?
            } else {
                0.0
            };
            Ok((theta, m))
        })
        .collect()
}

/// Noisy oracle for the ABC posterior: g(θ)·(1/N)Σₙ h(y_true | y⁽ⁿ⁾, ε).
/// One realization costs one oracle unit and N simulator units.
pub struct AbcOracle<S> {
    sim: S,
    kernel: AbcKernel,
    y_true: Vec<f64>,
    n: usize,
    rng: Rng,
    calls: u64,
    simulator_units: u64,
}

impl<S: Simulator> AbcOracle<S> {
    pub fn new(sim: S, kernel: AbcKernel, y_true: Vec<f64>, n: usize, rng: Rng) -> Result<Self> {
        kernel.validate()?;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one pseudo-dataset".into()));
        }
        Ok(Self { sim, kernel, y_true, n, rng, calls: 0, simulator_units: 0 })
    }

    pub fn simulator(&self) -> &S {
        &self.sim
    }

    pub fn simulator_units(&self) -> u64 {
        self.simulator_units
    }
}

impl<S: Simulator> NoisyOracle for AbcOracle<S> {
    fn domain(&self) -> &BoundedDomain {
        self.sim.domain()
    }

    fn realize(&mut self, theta: &[f64]) -> Result<f64> {
        let lik = abc_noisy_eval(&self.sim, self.kernel, &self.y_true, theta, self.n, None, &mut self.rng)?;
        self.calls += 1;
        self.simulator_units += self.n as u64;
        Ok(lik * self.sim.prior_density(theta))
    }

    fn evaluations(&self) -> u64 {
        self.calls
    }
}

/// y | θ ~ N(θ, σ²), θ ~ N(0, τ²), truncated to a bounded domain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateGaussian {
    pub noise_sd: f64,
    pub prior_sd: f64,
    domain: BoundedDomain,
}

impl Default for ConjugateGaussian {
    fn default() -> Self {
        Self::new(1.0, 10.0, BoundedDomain::cube(1, -50.0, 50.0).expect("valid interval"))
    }
}

impl ConjugateGaussian {
    pub fn new(noise_sd: f64, prior_sd: f64, domain: BoundedDomain) -> Self {
        Self { noise_sd, prior_sd, domain }
    }

    /// Exact posterior mean and variance for one observation.
    pub fn posterior(&self, y: f64) -> (f64, f64) {
        self.smoothed_posterior(y, None)
    }

    /// Posterior under a Gaussian kernel of width ε, which inflates the
    /// likelihood variance to σ² + ε². `None` gives the exact posterior.
    pub fn smoothed_posterior(&self, y: f64, epsilon: Option<f64>) -> (f64, f64) {
        let s2 = self.noise_sd.powi(2) + epsilon.map_or(0.0, |e| e * e);
        let t2 = self.prior_sd.powi(2);
        (y * t2 / (t2 + s2), t2 * s2 / (t2 + s2))
    }

    /// E[h(y_true | y, ε)] under the Gaussian kernel, in closed form.
    pub fn gaussian_kernel_mean(&self, y_true: f64, theta: f64, epsilon: f64) -> f64 {
        let e2 = epsilon * epsilon;
        let s2 = self.noise_sd.powi(2) + e2;
        (e2 / s2).sqrt() * (-(y_true - theta).powi(2) / (2.0 * s2)).exp()
    }
}

impl Simulator for ConjugateGaussian {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn simulate(&self, theta: &[f64], out: &mut Vec<f64>, rng: &mut Rng) {
        out.clear();
        out.extend(theta.iter().map(|t| {
            let z: f64 = StandardNormal.sample(rng);
            t + self.noise_sd * z
        }));
    }

    fn prior_density(&self, theta: &[f64]) -> f64 {
        if !self.domain.contains(theta) {
            return 0.0;
        }
        theta.iter().map(|t| gaussian_pdf(*t, 0.0, self.prior_sd.powi(2))).product()
    }

    fn sample_prior(&self, rng: &mut Rng) -> Point {
        loop {
            let th: Point = (0..self.domain.dim())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    self.prior_sd * z
                })
                .collect();
            if self.domain.contains(&th) {
                return th;
            }
        }
    }
}
