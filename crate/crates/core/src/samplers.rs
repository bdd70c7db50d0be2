//! Noisy Monte Carlo samplers.
//!
//! - [`noisy_mh`]: pseudo-marginal MH and Monte Carlo-within-Metropolis.
//! - [`noisy_is`]: importance sampling with noisy weights.
//! - [`mh_s`]: MH on an iteratively refined surrogate.
//! - [`da_pm_mh`]: delayed-acceptance pseudo-marginal MH with `T_surr`
//!   inner surrogate steps.
//! - [`n_dis`]: noisy deep importance sampling.
//!
//! Every sampler spends oracle calls against a budget and stops as soon as
//! the next step would need a call that is no longer available. Proposals
//! outside the domain are rejected without touching the oracle. All
//! Metropolis tests run in log space and only draw a uniform when the
//! ratio is below one.

use std::io::Write;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::density::{BoundedDomain, NoisyOracle};
use crate::rng::Rng;
use crate::surrogate::KnnSurrogate;
use crate::special::gaussian_pdf;
use crate::{Error, Point, Result};

/// Symmetric Gaussian random walk φ(θ|θ′) = N(θ | θ′, scale²·I).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRandomWalk {
    scale: f64,
}

impl GaussianRandomWalk {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidParameter(format!("proposal scale must be positive, got {scale}")));
        }
        Ok(Self { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn propose(&self, from: &[f64], rng: &mut Rng) -> Point {
        from.iter()
            .map(|x| {
                let z: f64 = StandardNormal.sample(rng);
                x + self.scale * z
            })
            .collect()
    }

    /// φ(to | from).
    pub fn density(&self, to: &[f64], from: &[f64]) -> f64 {
        let var = self.scale * self.scale;
        to.iter().zip(from).map(|(a, b)| gaussian_pdf(*a, *b, var)).product()
    }
}

/// Independent proposal q(θ) used by the importance samplers.
#[derive(Debug, Clone, PartialEq)]
pub enum IndependentProposal {
    Uniform(BoundedDomain),
    /// N(mean, diag(sd²)).
    Gaussian { mean: Vec<f64>, sd: Vec<f64> },
}

impl IndependentProposal {
    pub fn dim(&self) -> usize {
        match self {
            IndependentProposal::Uniform(d) => d.dim(),
            IndependentProposal::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Point {
        match self {
            IndependentProposal::Uniform(d) => d.sample_uniform(rng),
            IndependentProposal::Gaussian { mean, sd } => mean
                .iter()
                .zip(sd)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect(),
        }
    }

    pub fn density(&self, theta: &[f64]) -> f64 {
        match self {
            IndependentProposal::Uniform(d) => {
                if d.contains(theta) {
                    1.0 / d.volume()
                } else {
                    0.0
                }
            }
            IndependentProposal::Gaussian { mean, sd } => theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(x, (m, s))| gaussian_pdf(*x, *m, s * s))
                .product(),
        }
    }
}

/// Counts oracle calls against a fixed allowance E.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetLedger {
    limit: u64,
    spent: u64,
}

impl BudgetLedger {
    pub fn new(limit: u64) -> Self {
        Self { limit, spent: 0 }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.spent
    }

    pub fn can_afford(&self, calls: u64) -> bool {
        self.remaining() >= calls
    }

    /// One oracle call, charged before it is made.
    pub fn realize<O: NoisyOracle>(&mut self, oracle: &mut O, theta: &[f64]) -> Result<f64> {
        assert!(self.spent < self.limit, "budget overdrawn");
        self.spent += 1;
        oracle.realize(theta)
    }
}

/// Iteration cap, oracle budget and tracing switch shared by the samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLimits {
    pub iterations: usize,
    pub budget: u64,
    pub trace: bool,
}

impl RunLimits {
    pub fn new(iterations: usize, budget: u64) -> Self {
        Self { iterations, budget, trace: false }
    }

    /// Runs until the budget is spent, with a generous iteration cap.
    pub fn budget_only(budget: u64) -> Self {
        Self::new(usize::MAX, budget)
    }

    pub fn traced(mut self) -> Self {
        self.trace = true;
        self
    }
}

/// One line of a sampler trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub state: Point,
    pub proposed: Point,
    /// Acceptance ratio before the min{1, ·}; NaN when no test was made.
    pub ratio: f64,
    pub accepted: bool,
    pub oracle_calls: u64,
}

/// Writes a trace as plain text. Columns: iteration, state coordinates,
/// proposed coordinates, ratio, accepted flag (0/1), oracle calls so far.
pub fn write_trace<W: Write>(rows: &[TraceRow], mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    if let Some(first) = rows.first() {
        let d = first.state.len();
        let mut header = String::from("# iter");
        for i in 0..d {
            header.push_str(&format!(" state{i}"));
        }
        for i in 0..d {
            header.push_str(&format!(" prop{i}"));
        }
        header.push_str(" ratio accepted oracle_calls");
        writeln!(w, "{header}").map_err(io)?;
    }
    for r in rows {
        let mut line = r.iteration.to_string();
        for x in r.state.iter().chain(&r.proposed) {
            line.push_str(&format!(" {x}"));
        }
        line.push_str(&format!(" {} {} {}", r.ratio, r.accepted as u8, r.oracle_calls));
        writeln!(w, "{line}").map_err(io)?;
    }
    Ok(())
}

/// Output of the MCMC samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    /// θ₀, θ₁, …; length is iterations + 1.
    pub states: Vec<Point>,
    /// Recycled m̃(θ_t) per state for pseudo-marginal chains, empty otherwise.
    pub values: Vec<f64>,
    pub accepted: usize,
    pub oracle_calls: u64,
    /// The run stopped because the next step needed an unaffordable call.
    pub budget_exhausted: bool,
    pub trace: Vec<TraceRow>,
}

impl Chain {
    fn start(theta0: &[f64], value: Option<f64>) -> Self {
        Self {
            states: vec![theta0.to_vec()],
            values: value.into_iter().collect(),
            accepted: 0,
            oracle_calls: 0,
            budget_exhausted: false,
            trace: Vec::new(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.states.len() - 1
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations() == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iterations() as f64
        }
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("chain is never empty")
    }
}

/// Samples with unnormalized and normalized importance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    pub samples: Vec<Point>,
    pub raw_weights: Vec<f64>,
    pub normalized_weights: Vec<f64>,
}

impl WeightedSampleSet {
    pub fn new(samples: Vec<Point>, raw_weights: Vec<f64>) -> Result<Self> {
        if samples.len() != raw_weights.len() {
            return Err(Error::Size(format!(
                "{} samples but {} weights",
                samples.len(),
                raw_weights.len()
            )));
        }
        let normalized_weights = normalize_weights(&raw_weights)?;
        Ok(Self { samples, raw_weights, normalized_weights })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Z̃ = (1/N)·Σ wₙ.
    pub fn evidence(&self) -> f64 {
        self.raw_weights.iter().sum::<f64>() / self.raw_weights.len() as f64
    }
}

/// w̄ₙ = wₙ / Σⱼ wⱼ.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = raw.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter(format!("weights must be finite and >= 0, got {bad}")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Multinomial resampling: `n` indices drawn with probabilities ∝ `weights`.
pub fn sir_resample_indices(weights: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    let probs = normalize_weights(weights)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let last_positive = probs.iter().rposition(|p| *p > 0.0).expect("positive total");
    Ok((0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            // First index whose cumulative mass exceeds u. Zero-weight
            // entries never win since their cdf equals their predecessor's.
            cdf.partition_point(|c| *c <= u).min(last_positive)
        })
        .collect())
}

/// Sampling importance resampling: `n` multinomial draws from `candidates`
/// with probabilities ∝ `weights`.
pub fn sir_resample(candidates: &[Point], weights: &[f64], n: usize, rng: &mut Rng) -> Result<Vec<Point>> {
    if candidates.len() != weights.len() {
        return Err(Error::Size(format!("{} candidates but {} weights", candidates.len(), weights.len())));
    }
    Ok(sir_resample_indices(weights, n, rng)?.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Metropolis decision on a log ratio. A uniform is drawn only when the
/// ratio is below one.
fn mh_accept(log_ratio: f64, rng: &mut Rng) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    if log_ratio == f64::NEG_INFINITY {
        return false;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// log(now / before) for noisy realizations. A zero current value accepts
/// anything; a zero proposed value is always rejected otherwise.
fn noisy_log_ratio(now: f64, before: f64) -> f64 {
    if before == 0.0 {
        f64::INFINITY
    } else if now == 0.0 {
        f64::NEG_INFINITY
    } else {
        now.ln() - before.ln()
    }
}

fn check_start(domain: &BoundedDomain, theta0: &[f64]) -> Result<()> {
    domain.check(theta0)
}

/// How the noisy value at the current state is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoisyMhMode {
    /// Recycle m̃(θ_{t−1}) from the step that accepted it.
    PseudoMarginal,
    /// Draw a fresh m̃(θ_{t−1}) every iteration.
    McWithinMh,
}

/// Noisy Metropolis-Hastings with a symmetric random walk.
///
/// Pseudo-marginal mode spends one call on m̃(θ₀) and one per in-domain
/// proposal; Monte Carlo-within-MH spends two per in-domain proposal.
pub fn noisy_mh<O: NoisyOracle>(
    oracle: &mut O,
    proposal: &GaussianRandomWalk,
    theta0: &[f64],
    limits: RunLimits,
    mode: NoisyMhMode,
    rng: &mut Rng,
) -> Result<Chain> {
    let domain = oracle.domain().clone();
    check_start(&domain, theta0)?;
    let mut budget = BudgetLedger::new(limits.budget);
    let mut chain = match mode {
        NoisyMhMode::PseudoMarginal => {
            if !budget.can_afford(1) {
                return Err(Error::InvalidParameter("budget does not cover m̃(θ₀)".into()));
            }
            let v0 = budget.realize(oracle, theta0)?;
            Chain::start(theta0, Some(v0))
        }
        NoisyMhMode::McWithinMh => Chain::start(theta0, None),
    };
    let calls_per_step = match mode {
        NoisyMhMode::PseudoMarginal => 1,
        NoisyMhMode::McWithinMh => 2,
    };
    let mut current = theta0.to_vec();
    let mut current_value = chain.values.first().copied().unwrap_or(f64::NAN);

    for it in 1..=limits.iterations {
        if !budget.can_afford(calls_per_step) {
            chain.budget_exhausted = true;
            break;
        }
        let prop = proposal.propose(&current, rng);
        let (accepted, ratio) = if domain.contains(&prop) {
            let now = budget.realize(oracle, &prop)?;
            let before = match mode {
                NoisyMhMode::PseudoMarginal => current_value,
                NoisyMhMode::McWithinMh => budget.realize(oracle, &current)?,
            };
            let lr = noisy_log_ratio(now, before);
            let acc = mh_accept(lr, rng);
            if acc {
                current.clone_from(&prop);
                current_value = now;
            }
            (acc, lr.exp())
        } else {
            (false, 0.0)
        };
        if accepted {
            chain.accepted += 1;
        }
        chain.states.push(current.clone());
        if mode == NoisyMhMode::PseudoMarginal {
            chain.values.push(current_value);
        }
        if limits.trace {
            chain.trace.push(TraceRow {
                iteration: it,
                state: current.clone(),
                proposed: prop,
                ratio,
                accepted,
                oracle_calls: budget.spent(),
            });
        }
    }
    chain.oracle_calls = budget.spent();
    Ok(chain)
}

/// Noisy importance sampling: N draws from q with weights m̃(θₙ)/q(θₙ).
pub fn noisy_is<O: NoisyOracle>(
    oracle: &mut O,
    proposal: &IndependentProposal,
    n: usize,
    rng: &mut Rng,
) -> Result<WeightedSampleSet> {
    let domain = oracle.domain().clone();
    if proposal.dim() != domain.dim() {
        return Err(Error::Dimension { expected: domain.dim(), got: proposal.dim() });
    }
    let mut samples = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let theta = proposal.sample(rng);
        let q = proposal.density(&theta);
        // The call is charged even outside the domain, where m̃ is zero.
        let m = if domain.contains(&theta) { oracle.realize(&theta)? } else { 0.0 };
        raw.push(if q > 0.0 { m / q } else { 0.0 });
        samples.push(theta);
    }
    WeightedSampleSet::new(samples, raw)
}

/// When MH-S refines its surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// ρ_update = 1: every in-domain proposal is evaluated and inserted.
    Always,
    /// ρ_update = α_MH, coupled to the accept decision: the proposal is
    /// evaluated and inserted iff it is accepted.
    AcceptProb,
    /// ρ_update = α_MH with a separate uniform draw.
    AcceptProbIndependent,
}

/// Where the refinement sits relative to the accept test. Only meaningful
/// for [`UpdateRule::Always`]; the α-driven rules always update after.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateTiming {
    BeforeTest,
    AfterTest,
}

/// Metropolis-Hastings on an iteratively refined surrogate.
///
/// Every MH test is computed on the current surrogate only. The new node
/// is the proposed state of the iteration; each refinement costs one
/// oracle call. Returns the chain and the refined surrogate.
pub fn mh_s<O: NoisyOracle>(
    oracle: &mut O,
    mut surrogate: KnnSurrogate,
    proposal: &GaussianRandomWalk,
    theta0: &[f64],
    limits: RunLimits,
    rule: UpdateRule,
    timing: UpdateTiming,
    rng: &mut Rng,
) -> Result<(Chain, KnnSurrogate)> {
    let domain = oracle.domain().clone();
    check_start(&domain, theta0)?;
    if surrogate.domain() != &domain {
        return Err(Error::InvalidDomain("surrogate and oracle domains differ".into()));
    }
    let mut budget = BudgetLedger::new(limits.budget);
    let mut chain = Chain::start(theta0, None);
    let mut current = theta0.to_vec();
    let before = rule == UpdateRule::Always && timing == UpdateTiming::BeforeTest;

    for it in 1..=limits.iterations {
        if !budget.can_afford(1) {
            chain.budget_exhausted = true;
            break;
        }
        let prop = proposal.propose(&current, rng);
        let mut ratio = 0.0;
        let mut accepted = false;
        if domain.contains(&prop) {
            if before {
                let v = budget.realize(oracle, &prop)?;
                surrogate.insert(&prop, v)?;
            }
            let lr = surrogate.predict(&prop)?.ln() - surrogate.predict(&current)?.ln();
            ratio = lr.exp();
            accepted = mh_accept(lr, rng);
            let update = match rule {
                UpdateRule::Always => !before,
                UpdateRule::AcceptProb => accepted,
                UpdateRule::AcceptProbIndependent => lr >= 0.0 || rng.random::<f64>().ln() < lr,
            };
            if update {
                let v = budget.realize(oracle, &prop)?;
                surrogate.insert(&prop, v)?;
            }
            if accepted {
                current.clone_from(&prop);
                chain.accepted += 1;
            }
        }
        chain.states.push(current.clone());
        if limits.trace {
            chain.trace.push(TraceRow {
                iteration: it,
                state: current.clone(),
                proposed: prop,
                ratio,
                accepted,
                oracle_calls: budget.spent(),
            });
        }
    }
    chain.oracle_calls = budget.spent();
    Ok((chain, surrogate))
}

/// Settings specific to [`da_pm_mh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayedAcceptance {
    /// Inner MH steps on the surrogate per outer iteration (≥ 1).
    pub inner_steps: usize,
    /// Probability of inserting the freshly evaluated candidate.
    pub rho_update: f64,
}

/// Delayed-acceptance pseudo-marginal MH.
///
/// Each outer iteration runs `inner_steps` MH steps on the surrogate from
/// θ_{t−1}; the end point is then tested against the noisy target with the
/// ratio m̃(θ_prop)·m̂(θ_{t−1}) / (m̃(θ_{t−1})·m̂(θ_prop)). When every inner
/// step was rejected the iteration is a free, trivial acceptance. The
/// initial realization m̃(θ₀) is charged to the budget and inserted into
/// the surrogate.
pub fn da_pm_mh<O: NoisyOracle>(
    oracle: &mut O,
    mut surrogate: KnnSurrogate,
    proposal: &GaussianRandomWalk,
    theta0: &[f64],
    limits: RunLimits,
    da: DelayedAcceptance,
    rng: &mut Rng,
) -> Result<(Chain, KnnSurrogate)> {
    let domain = oracle.domain().clone();
    check_start(&domain, theta0)?;
    if surrogate.domain() != &domain {
        return Err(Error::InvalidDomain("surrogate and oracle domains differ".into()));
    }
    if da.inner_steps == 0 {
        return Err(Error::InvalidParameter("inner_steps must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&da.rho_update) {
        return Err(Error::InvalidParameter(format!("rho_update must lie in [0, 1], got {}", da.rho_update)));
    }
    let mut budget = BudgetLedger::new(limits.budget);
    if !budget.can_afford(1) {
        return Err(Error::InvalidParameter("budget does not cover m̃(θ₀)".into()));
    }
    let v0 = budget.realize(oracle, theta0)?;
    surrogate.insert(theta0, v0)?;
    let mut chain = Chain::start(theta0, Some(v0));
    let mut current = theta0.to_vec();
    let mut current_value = v0;

    for it in 1..=limits.iterations {
        if !budget.can_afford(1) {
            chain.budget_exhausted = true;
            break;
        }
        // Inner chain on m̂_{t−1}.
        let surr_current = surrogate.predict(&current)?;
        let mut xi = current.clone();
        let mut surr_xi = surr_current;
        let mut moved = false;
        for _ in 0..da.inner_steps {
            let cand = proposal.propose(&xi, rng);
            if !domain.contains(&cand) {
                continue;
            }
            let surr_cand = surrogate.predict(&cand)?;
            if mh_accept(surr_cand.ln() - surr_xi.ln(), rng) {
                xi = cand;
                surr_xi = surr_cand;
                moved = true;
            }
        }

        let mut ratio = f64::NAN;
        let mut accepted = false;
        if moved {
            let now = budget.realize(oracle, &xi)?;
            let lr = noisy_log_ratio(now, current_value) + surr_current.ln() - surr_xi.ln();
            ratio = lr.exp();
            accepted = mh_accept(lr, rng);
            let update = da.rho_update >= 1.0 || (da.rho_update > 0.0 && rng.random::<f64>() < da.rho_update);
            if update {
                surrogate.insert(&xi, now)?;
            }
            if accepted {
                current.clone_from(&xi);
                current_value = now;
            }
        }
        // A trivial step keeps θ_{t−1}; it counts as an acceptance of the
        // unchanged state, not as a move.
        if accepted {
            chain.accepted += 1;
        }
        chain.states.push(current.clone());
        chain.values.push(current_value);
        if limits.trace {
            chain.trace.push(TraceRow {
                iteration: it,
                state: current.clone(),
                proposed: xi,
                ratio,
                accepted,
                oracle_calls: budget.spent(),
            });
        }
    }
    chain.oracle_calls = budget.spent();
    Ok((chain, surrogate))
}

/// How the past surrogates enter the mixture denominator of N-DIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureScaling {
    /// Use m̂_τ as is.
    Raw,
    /// Divide each m̂_τ by its SIR estimate of ∫m̂_τ, so every mixture
    /// component is the (approximate) density the samples were drawn from.
    Normalized,
}

/// Settings for [`n_dis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdisSettings {
    /// Outer iterations T.
    pub iterations: usize,
    /// Resampled points (and oracle calls) per iteration, N.
    pub per_iteration: usize,
    /// SIR candidates per iteration, L ≥ 10·N.
    pub candidates: usize,
    pub scaling: MixtureScaling,
}

/// Output of [`n_dis`].
#[derive(Debug, Clone)]
pub struct NdisOutput {
    pub samples: WeightedSampleSet,
    pub surrogate: KnnSurrogate,
    pub oracle_calls: u64,
    /// Some SIR step had all-zero inner weights and fell back to uniform
    /// resampling among its candidates.
    pub degenerate_resampling: bool,
}

/// Noisy deep importance sampling.
///
/// Iteration t draws L points from q, weights them by m̂_{t−1}/q, resamples
/// N of them, evaluates the oracle there and weights each by
/// m̃ / ((1/t)·Σ_{τ<t} m̂_τ), then adds the N new nodes. Past surrogates are
/// prefixes of the single growing design set. All N·T weights are
/// normalized jointly at the end.
pub fn n_dis<O: NoisyOracle>(
    oracle: &mut O,
    mut surrogate: KnnSurrogate,
    q: &IndependentProposal,
    settings: NdisSettings,
    rng: &mut Rng,
) -> Result<NdisOutput> {
    let domain = oracle.domain().clone();
    if q.dim() != domain.dim() {
        return Err(Error::Dimension { expected: domain.dim(), got: q.dim() });
    }
    let NdisSettings { iterations: t_max, per_iteration: n, candidates: l, scaling } = settings;
    if t_max == 0 || n == 0 {
        return Err(Error::InvalidParameter("T and N must be at least 1".into()));
    }
    if n.saturating_mul(10) > l {
        return Err(Error::InvalidParameter(format!("need N <= L/10, got N = {n}, L = {l}")));
    }
    let mut budget = BudgetLedger::new((n * t_max) as u64);
    let mut prefixes: Vec<usize> = Vec::with_capacity(t_max);
    let mut scales: Vec<f64> = Vec::with_capacity(t_max);
    let mut samples = Vec::with_capacity(n * t_max);
    let mut raw = Vec::with_capacity(n * t_max);
    let mut degenerate = false;

    for t in 1..=t_max {
        let prefix = surrogate.len();
        prefixes.push(prefix);
        let cands: Vec<Point> = (0..l).map(|_| q.sample(rng)).collect();
        let gamma: Vec<f64> = cands
            .iter()
            .map(|c| {
                let qc = q.density(c);
                if qc > 0.0 && domain.contains(c) {
                    Ok(surrogate.predict_prefix(c, prefix)? / qc)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?;
        scales.push(match scaling {
            MixtureScaling::Raw => 1.0,
            MixtureScaling::Normalized => gamma.iter().sum::<f64>() / l as f64,
        });
        let picked = match sir_resample(&cands, &gamma, n, rng) {
            Ok(p) => p,
            Err(Error::DegenerateWeights) => {
                degenerate = true;
                sir_resample(&cands, &vec![1.0; l], n, rng)?
            }
            Err(e) => return Err(e),
        };

        let mut fresh = Vec::with_capacity(n);
        for theta in picked {
            let m = if domain.contains(&theta) { budget.realize(oracle, &theta)? } else {
                budget.spent += 1;
                0.0
            };
            let mut denom = 0.0;
            for (tau, &len) in prefixes.iter().enumerate() {
                denom += surrogate.predict_prefix(&theta, len)? / scales[tau];
            }
            denom /= t as f64;
            raw.push(m / denom);
            fresh.push((theta.clone(), m));
            samples.push(theta);
        }
        for (theta, m) in fresh {
            if domain.contains(&theta) {
                surrogate.insert(&theta, m)?;
            }
        }
    }
    Ok(NdisOutput {
        samples: WeightedSampleSet::new(samples, raw)?,
        surrogate,
        oracle_calls: budget.spent(),
        degenerate_resampling: degenerate,
    })
}
