//! Seeded repetitions of one configured experiment.

use std::time::Instant;

use rayon::prelude::*;

use noisy_mc::abc::{AbcKernel, AbcOracle, ConjugateGaussian, Simulator};
use noisy_mc::cartpole::{CartPoleParams, ReturnOracle};
use noisy_mc::density::{
    rectified_mean, Banana, Bimodal, BoundedDomain, DensityOracle, GaussMix1d, NoiseModel, NoisyOracle,
    TargetDensity,
};
use noisy_mc::diagnostics::{chain_moments, quadrature_moments, relative_sq_errors, weighted_moments, GroundTruth, MomentEstimate};
use noisy_mc::rng::{stream, Rng, ORACLE_STREAM, SAMPLER_STREAM};
use noisy_mc::samplers::{
    da_pm_mh, mh_s, n_dis, noisy_is, noisy_mh, DelayedAcceptance, GaussianRandomWalk, IndependentProposal,
    NdisSettings, NoisyMhMode, RunLimits, UpdateRule,
};
use noisy_mc::surrogate::KnnSurrogate;

use crate::config::{Algorithm, Experiment, ExperimentConfig};

/// Stream used to score cart-pole policies, apart from sampler and oracle.
pub const EVALUATION_STREAM: u64 = 2;

/// Iteration cap per unit of budget for samplers that can take free steps.
const ITERATIONS_PER_CALL: usize = 2000;

/// Grid points per axis for quadrature ground truths.
pub const QUADRATURE_GRID_2D: usize = 2000;
pub const QUADRATURE_GRID_1D: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Run,
    Aggregate,
}

/// One CSV line: a config echo plus results of one run or their aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub kind: RowKind,
    pub config: ExperimentConfig,
    /// Repetition index; `None` on aggregate rows.
    pub run: Option<usize>,
    pub oracle_units: u64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Relative squared error on run rows, its median over runs on the
    /// aggregate row. NaN without a ground truth.
    pub mean_error: f64,
    pub var_error: f64,
    /// Mean return of the estimated policy (cart-pole only).
    pub expected_return: Option<f64>,
    pub wall_ms: Option<f64>,
}

/// Output of a single seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub estimate: MomentEstimate,
    pub oracle_units: u64,
    pub expected_return: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{0}")]
    Sampler(#[from] noisy_mc::Error),
    #[error("{0}")]
    Config(#[from] crate::config::ConfigError),
}

pub fn banana_noise(experiment: Experiment) -> NoiseModel {
    match experiment {
        Experiment::BananaMax => NoiseModel::RectifiedGaussian { sigma: 0.01 },
        Experiment::Illustrative1d => NoiseModel::RectifiedGaussian { sigma: 0.05 },
        _ => NoiseModel::MultiplicativeExponential { rate: 1.0 },
    }
}

fn abc_model() -> ConjugateGaussian {
    ConjugateGaussian::default()
}

/// A boxed oracle for the experiment, drawing from `rng`.
pub fn build_oracle(cfg: &ExperimentConfig, rng: Rng) -> Result<Box<dyn NoisyOracle + Send>, RunError> {
    let noise = banana_noise(cfg.experiment);
    Ok(match cfg.experiment {
        Experiment::BananaExp | Experiment::BananaMax => Box::new(DensityOracle::new(Banana::default(), noise, rng)?),
        Experiment::BimodalExp => Box::new(DensityOracle::new(Bimodal::default(), noise, rng)?),
        Experiment::Illustrative1d => Box::new(DensityOracle::new(GaussMix1d::default(), noise, rng)?),
        Experiment::Cartpole => Box::new(ReturnOracle::new(CartPoleParams::default(), cfg.episodes, rng)?),
        Experiment::AbcToy => Box::new(AbcOracle::new(
            abc_model(),
            AbcKernel::Gaussian(cfg.abc_epsilon),
            cfg.abc_y.clone(),
            cfg.abc_n,
            rng,
        )?),
    })
}

/// Quadrature moments of the mean function each experiment targets.
/// Cart-pole has no closed-form target and returns `None`.
pub fn quadrature_truth(cfg: &ExperimentConfig) -> Result<Option<GroundTruth>, RunError> {
    let noise = banana_noise(cfg.experiment);
    let t = match cfg.experiment {
        Experiment::BananaExp | Experiment::BananaMax => {
            let b = Banana::default();
            quadrature_moments(|x| noise.mean(b.density(x)), b.domain(), QUADRATURE_GRID_2D)?
        }
        Experiment::BimodalExp => {
            let b = Bimodal::default();
            quadrature_moments(|x| b.density(x), b.domain(), QUADRATURE_GRID_2D)?
        }
        Experiment::Illustrative1d => {
            let g = GaussMix1d::default();
            quadrature_moments(|x| rectified_mean(g.density(x), 0.05), g.domain(), QUADRATURE_GRID_1D)?
        }
        Experiment::AbcToy => {
            let m = abc_model();
            let (y, eps) = (cfg.abc_y[0], cfg.abc_epsilon);
            quadrature_moments(
                |x| m.prior_density(x) * m.gaussian_kernel_mean(y, x[0], eps),
                m.domain(),
                QUADRATURE_GRID_1D,
            )?
        }
        Experiment::Cartpole => return Ok(None),
    };
    Ok(Some(t))
}

fn surrogate(cfg: &ExperimentConfig, domain: &BoundedDomain) -> Result<KnnSurrogate, RunError> {
    Ok(KnnSurrogate::new(domain.clone(), cfg.k)?)
}

/// Runs repetition `run` of `cfg`.
pub fn run_once(cfg: &ExperimentConfig, run: usize) -> Result<RunOutcome, RunError> {
    let started = Instant::now();
    let mut srng = stream(cfg.seed, run as u64, SAMPLER_STREAM);
    let mut oracle = build_oracle(cfg, stream(cfg.seed, run as u64, ORACLE_STREAM))?;
    let mut oracle: &mut (dyn NoisyOracle + Send) = oracle.as_mut();
    let domain = oracle.domain().clone();
    let proposal = GaussianRandomWalk::new(cfg.proposal_scale)?;
    let cap = usize::try_from(cfg.budget).unwrap_or(usize::MAX).saturating_mul(ITERATIONS_PER_CALL);
    let limits = RunLimits::new(cap, cfg.budget);

    let (estimate, units) = if cfg.algorithm.is_mcmc() {
        let theta0 = domain.sample_uniform(&mut srng);
        let chain = match cfg.algorithm {
            Algorithm::PmMh => noisy_mh(&mut oracle, &proposal, &theta0, limits, NoisyMhMode::PseudoMarginal, &mut srng)?,
            Algorithm::McWithinMh => noisy_mh(&mut oracle, &proposal, &theta0, limits, NoisyMhMode::McWithinMh, &mut srng)?,
            Algorithm::MhSAlways | Algorithm::MhSAccept => {
                let rule = if cfg.algorithm == Algorithm::MhSAlways { UpdateRule::Always } else { UpdateRule::AcceptProb };
                let s = surrogate(cfg, &domain)?;
                mh_s(&mut oracle, s, &proposal, &theta0, limits, rule, cfg.mhs_update, &mut srng)?.0
            }
            Algorithm::DaPmMh => {
                let s = surrogate(cfg, &domain)?;
                let da = DelayedAcceptance { inner_steps: cfg.t_surr, rho_update: cfg.rho_update };
                da_pm_mh(&mut oracle, s, &proposal, &theta0, limits, da, &mut srng)?.0
            }
            Algorithm::NoisyIs | Algorithm::NDis => unreachable!("importance samplers handled below"),
        };
        (chain_moments(&chain, cfg.burn_in)?, chain.oracle_calls)
    } else {
        let q = IndependentProposal::Uniform(domain.clone());
        match cfg.algorithm {
            Algorithm::NoisyIs => {
                let n = usize::try_from(cfg.budget).map_err(|_| noisy_mc::Error::Size("budget too large".into()))?;
                let ws = noisy_is(&mut oracle, &q, n, &mut srng)?;
                (weighted_moments(&ws)?, n as u64)
            }
            Algorithm::NDis => {
                let settings = NdisSettings {
                    iterations: cfg.ndis_t,
                    per_iteration: cfg.ndis_n,
                    candidates: cfg.ndis_l,
                    scaling: cfg.ndis_mixture,
                };
                let out = n_dis(&mut oracle, surrogate(cfg, &domain)?, &q, settings, &mut srng)?;
                (weighted_moments(&out.samples)?, out.oracle_calls)
            }
            _ => unreachable!("MCMC samplers handled above"),
        }
    };

    let expected_return = if cfg.experiment == Experiment::Cartpole {
        let mut erng = stream(cfg.seed, run as u64, EVALUATION_STREAM);
        Some(policy_return(&estimate.mean, cfg.eval_episodes, &mut erng)?)
    } else {
        None
    };
    Ok(RunOutcome {
        run,
        estimate,
        oracle_units: units,
        expected_return,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Mean return of a linear policy over `episodes` episodes.
pub fn policy_return(theta: &[f64], episodes: usize, rng: &mut Rng) -> Result<f64, RunError> {
    let p = CartPoleParams::default();
    let mut total = 0.0;
    for _ in 0..episodes {
        total += p.run_episode(theta, rng)?.ret();
    }
    Ok(total / episodes as f64)
}

/// All repetitions of `cfg` in parallel, ordered by run index.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>, RunError> {
    cfg.validate()?;
    (0..cfg.reps).into_par_iter().map(|r| run_once(cfg, r)).collect()
}

/// Run rows followed by one aggregate row.
pub fn rows_from_outcomes(
    cfg: &ExperimentConfig,
    outcomes: &[RunOutcome],
    truth: Option<&GroundTruth>,
    timing: bool,
) -> Vec<ResultRow> {
    let mut rows = Vec::with_capacity(outcomes.len() + 1);
    let mut errs = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let (me, ve) = truth.map_or((f64::NAN, f64::NAN), |t| relative_sq_errors(&o.estimate, t));
        errs.push((me, ve));
        rows.push(ResultRow {
            kind: RowKind::Run,
            config: cfg.clone(),
            run: Some(o.run),
            oracle_units: o.oracle_units,
            mean: o.estimate.mean.clone(),
            var: o.estimate.var.clone(),
            mean_error: me,
            var_error: ve,
            expected_return: o.expected_return,
            wall_ms: timing.then_some(o.wall_ms),
        });
    }
    if outcomes.is_empty() {
        return rows;
    }
    let n = outcomes.len() as f64;
    let d = outcomes[0].estimate.mean.len();
    let avg = |f: &dyn Fn(&RunOutcome) -> &Vec<f64>| -> Vec<f64> {
        (0..d).map(|j| outcomes.iter().map(|o| f(o)[j]).sum::<f64>() / n).collect()
    };
    let median_of = |sel: &dyn Fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = errs.iter().map(sel).collect();
        if v.iter().any(|x| x.is_nan()) {
            f64::NAN
        } else {
            noisy_mc::diagnostics::median(&v)
        }
    };
    let returns: Vec<f64> = outcomes.iter().filter_map(|o| o.expected_return).collect();
    rows.push(ResultRow {
        kind: RowKind::Aggregate,
        config: cfg.clone(),
        run: None,
        oracle_units: outcomes.iter().map(|o| o.oracle_units).max().unwrap_or(0),
        mean: avg(&|o| &o.estimate.mean),
        var: avg(&|o| &o.estimate.var),
        mean_error: median_of(&|e| e.0),
        var_error: median_of(&|e| e.1),
        expected_return: (!returns.is_empty()).then(|| returns.iter().sum::<f64>() / returns.len() as f64),
        wall_ms: timing.then(|| outcomes.iter().map(|o| o.wall_ms).sum()),
    });
    rows
}

/// Runs every repetition and returns run rows plus the aggregate row.
pub fn run_experiment(cfg: &ExperimentConfig, truth: Option<&GroundTruth>, timing: bool) -> Result<Vec<ResultRow>, RunError> {
    let outcomes = run_all(cfg)?;
    Ok(rows_from_outcomes(cfg, &outcomes, truth, timing))
}
