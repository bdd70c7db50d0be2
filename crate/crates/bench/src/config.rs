//! Experiment presets and the flat `key = value` configuration format.

use std::fmt;
use std::str::FromStr;

use noisy_mc::samplers::{MixtureScaling, UpdateTiming};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown experiment '{0}' (expected one of: {list})", list = Experiment::names().join(", "))]
    UnknownExperiment(String),
    #[error("unknown algorithm '{0}' (expected one of: {list})", list = Algorithm::names().join(", "))]
    UnknownAlgorithm(String),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("bad value for '{key}': {msg}")]
    BadValue { key: String, msg: String },
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
}

macro_rules! named_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn names() -> Vec<&'static str> {
                Self::ALL.iter().map(|v| v.name()).collect()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(Experiment {
    BananaExp => "banana-exp",
    BananaMax => "banana-max",
    BimodalExp => "bimodal-exp",
    Cartpole => "cartpole",
    AbcToy => "abc-toy",
    Illustrative1d => "illustrative-1d",
});

named_enum!(Algorithm {
    PmMh => "pm-mh",
    McWithinMh => "mc-within-mh",
    MhSAlways => "mh-s-always",
    MhSAccept => "mh-s-accept",
    DaPmMh => "da-pm-mh",
    NoisyIs => "noisy-is",
    NDis => "n-dis",
});

impl FromStr for Experiment {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.iter().copied().find(|e| e.name() == s).ok_or_else(|| ConfigError::UnknownExperiment(s.into()))
    }
}

impl FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.iter().copied().find(|e| e.name() == s).ok_or_else(|| ConfigError::UnknownAlgorithm(s.into()))
    }
}

impl Algorithm {
    pub fn uses_surrogate(self) -> bool {
        matches!(self, Algorithm::MhSAlways | Algorithm::MhSAccept | Algorithm::DaPmMh | Algorithm::NDis)
    }

    pub fn is_mcmc(self) -> bool {
        !matches!(self, Algorithm::NoisyIs | Algorithm::NDis)
    }
}

/// Everything needed to reproduce one benchmark row set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub algorithm: Algorithm,
    /// Oracle budget E.
    pub budget: u64,
    /// Surrogate neighbors K.
    pub k: usize,
    /// Inner surrogate steps of DA-PM-MH.
    pub t_surr: usize,
    /// Surrogate refinement probability of DA-PM-MH.
    pub rho_update: f64,
    /// N-DIS iterations T, resampled points per iteration N, SIR pool L.
    pub ndis_t: usize,
    pub ndis_n: usize,
    pub ndis_l: usize,
    /// Random-walk standard deviation per coordinate.
    pub proposal_scale: f64,
    pub burn_in: f64,
    pub seed: u64,
    pub reps: usize,
    /// Episodes averaged per cart-pole oracle call.
    pub episodes: usize,
    /// Episodes used to score the MMSE policy of each cart-pole run.
    pub eval_episodes: usize,
    /// ABC kernel width, pseudo-datasets per call and observed data.
    pub abc_epsilon: f64,
    pub abc_n: usize,
    pub abc_y: Vec<f64>,
    /// Whether MH-S with ρ = 1 refines before or after its accept test.
    pub mhs_update: UpdateTiming,
    /// Scaling of the past surrogates in the N-DIS mixture denominator.
    pub ndis_mixture: MixtureScaling,
}

impl ExperimentConfig {
    /// The published settings for an experiment, with PM-MH as algorithm.
    pub fn preset(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            algorithm: Algorithm::PmMh,
            budget: 5000,
            k: 1,
            t_surr: 1,
            rho_update: 1.0,
            ndis_t: 5,
            ndis_n: 1000,
            ndis_l: 10_000,
            proposal_scale: 3.0,
            burn_in: 0.2,
            seed: 1,
            reps: 50,
            episodes: 1,
            eval_episodes: 200,
            abc_epsilon: 0.05,
            abc_n: 10_000,
            abc_y: vec![1.5],
            mhs_update: UpdateTiming::BeforeTest,
            ndis_mixture: MixtureScaling::Normalized,
        };
        match experiment {
            Experiment::BananaExp | Experiment::BananaMax => base,
            Experiment::BimodalExp => Self { proposal_scale: 2.0, k: 10, t_surr: 5, ..base },
            Experiment::Cartpole => Self {
                budget: 100_000,
                k: 100,
                t_surr: 5,
                proposal_scale: 5.0,
                reps: 1,
                ndis_t: 10,
                ndis_n: 10_000,
                ndis_l: 100_000,
                ..base
            },
            Experiment::AbcToy => Self { proposal_scale: 2.5, reps: 1, ..base },
            Experiment::Illustrative1d => Self {
                budget: 625_000,
                proposal_scale: 4.0,
                reps: 1,
                ndis_t: 5,
                ndis_n: 125_000,
                ndis_l: 1_250_000,
                ..base
            },
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            v.parse().map_err(|e: T::Err| ConfigError::BadValue { key: key.into(), msg: e.to_string() })
        }
        let v = value.trim();
        match key.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "experiment" => self.experiment = v.parse()?,
            "algorithm" => self.algorithm = v.parse()?,
            "budget" | "e" => self.budget = num(key, v)?,
            "k" => self.k = num(key, v)?,
            "t-surr" => self.t_surr = num(key, v)?,
            "rho-update" => self.rho_update = num(key, v)?,
            "t" | "ndis-t" => self.ndis_t = num(key, v)?,
            "n" | "ndis-n" => self.ndis_n = num(key, v)?,
            "l" | "ndis-l" => self.ndis_l = num(key, v)?,
            "proposal-scale" => self.proposal_scale = num(key, v)?,
            "burn-in" => self.burn_in = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "reps" | "r" => self.reps = num(key, v)?,
            "episodes" => self.episodes = num(key, v)?,
            "eval-episodes" => self.eval_episodes = num(key, v)?,
            "abc-epsilon" => self.abc_epsilon = num(key, v)?,
            "abc-n" => self.abc_n = num(key, v)?,
            "abc-y" | "y-true" => {
                self.abc_y = v.split_whitespace().map(|w| num(key, w)).collect::<Result<_, _>>()?;
            }
            "mhs-update" => {
                self.mhs_update = match v {
                    "before" => UpdateTiming::BeforeTest,
                    "after" => UpdateTiming::AfterTest,
                    _ => return Err(ConfigError::BadValue { key: key.into(), msg: "expected 'before' or 'after'".into() }),
                }
            }
            "ndis-mixture" => {
                self.ndis_mixture = match v {
                    "raw" => MixtureScaling::Raw,
                    "normalized" => MixtureScaling::Normalized,
                    _ => return Err(ConfigError::BadValue { key: key.into(), msg: "expected 'raw' or 'normalized'".into() }),
                }
            }
            _ => return Err(ConfigError::UnknownKey(key.trim().into())),
        }
        Ok(())
    }

    /// Parses a flat config file. `experiment` selects the preset the
    /// remaining keys override, wherever it appears in the file.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            pairs.push((k.trim().to_owned(), v.trim().to_owned()));
        }
        let exp = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .ok_or(ConfigError::Missing("experiment"))?
            .1
            .parse()?;
        let mut cfg = Self::preset(exp);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The settings as a config file that [`ExperimentConfig::parse`] reads back.
    pub fn to_text(&self) -> String {
        let y: Vec<String> = self.abc_y.iter().map(|x| format!("{x:?}")).collect();
        format!(
            "experiment = {}\nalgorithm = {}\nbudget = {}\nk = {}\nt_surr = {}\nrho_update = {:?}\n\
             ndis_t = {}\nndis_n = {}\nndis_l = {}\nproposal_scale = {:?}\nburn_in = {:?}\nseed = {}\n\
             reps = {}\nepisodes = {}\neval_episodes = {}\nabc_epsilon = {:?}\nabc_n = {}\nabc_y = {}\n\
             mhs_update = {}\nndis_mixture = {}\n",
            self.experiment,
            self.algorithm,
            self.budget,
            self.k,
            self.t_surr,
            self.rho_update,
            self.ndis_t,
            self.ndis_n,
            self.ndis_l,
            self.proposal_scale,
            self.burn_in,
            self.seed,
            self.reps,
            self.episodes,
            self.eval_episodes,
            self.abc_epsilon,
            self.abc_n,
            y.join(" "),
            match self.mhs_update {
                UpdateTiming::BeforeTest => "before",
                UpdateTiming::AfterTest => "after",
            },
            match self.ndis_mixture {
                MixtureScaling::Raw => "raw",
                MixtureScaling::Normalized => "normalized",
            },
        )
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.budget == 0 {
            return bad("budget must be positive".into());
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale.is_finite()) {
            return bad(format!("proposal_scale must be positive, got {}", self.proposal_scale));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        match self.algorithm {
            Algorithm::McWithinMh if self.budget % 2 != 0 => {
                return bad(format!("mc-within-mh spends two calls per step; budget {} is odd", self.budget));
            }
            Algorithm::DaPmMh if self.t_surr == 0 => return bad("t_surr must be at least 1".into()),
            Algorithm::DaPmMh if !(0.0..=1.0).contains(&self.rho_update) => {
                return bad(format!("rho_update must lie in [0, 1], got {}", self.rho_update));
            }
            Algorithm::NDis => {
                if (self.ndis_t as u64).checked_mul(self.ndis_n as u64) != Some(self.budget) {
                    return bad(format!(
                        "n-dis needs T*N = budget, got {} * {} != {}",
                        self.ndis_t, self.ndis_n, self.budget
                    ));
                }
                if self.ndis_n.saturating_mul(10) > self.ndis_l {
                    return bad(format!("n-dis needs N <= L/10, got N = {}, L = {}", self.ndis_n, self.ndis_l));
                }
            }
            _ => {}
        }
        if self.experiment == Experiment::Cartpole && (self.episodes == 0 || self.eval_episodes == 0) {
            return bad("cart-pole episode counts must be positive".into());
        }
        if self.experiment == Experiment::AbcToy {
            if !(self.abc_epsilon > 0.0) || self.abc_n == 0 {
                return bad("abc_epsilon and abc_n must be positive".into());
            }
            if self.abc_y.len() != 1 {
                return bad(format!("abc-toy observes one value, got {}", self.abc_y.len()));
            }
        }
        Ok(())
    }
}

/// One line per preset with its full settings, for `--list`.
pub fn preset_listing() -> String {
    let mut out = String::new();
    for e in Experiment::ALL {
        let c = ExperimentConfig::preset(*e);
        let detail = match e {
            Experiment::BananaExp => "banana target, multiplicative Exp(1) noise".to_string(),
            Experiment::BananaMax => "banana target, rectified Gaussian noise sigma=0.01".to_string(),
            Experiment::BimodalExp => "two-component Gaussian on [-20,20]^2, multiplicative Exp(1) noise".to_string(),
            Experiment::Cartpole => format!("double pole balancing, linear policy in [-60,60]^6, {} episode(s) per call", c.episodes),
            Experiment::AbcToy => format!(
                "y|theta ~ N(theta,1), prior N(0,10^2), Gaussian kernel eps={}, N={}, y_true={:?}",
                c.abc_epsilon, c.abc_n, c.abc_y
            ),
            Experiment::Illustrative1d => "1D two-component mixture on [-8,17], rectified Gaussian noise sigma=0.05".to_string(),
        };
        out.push_str(&format!(
            "{:<16} E={} K={} T_surr={} T={} N={} L={} proposal_scale={} reps={}  {}\n",
            e.name(),
            c.budget,
            c.k,
            c.t_surr,
            c.ndis_t,
            c.ndis_n,
            c.ndis_l,
            c.proposal_scale,
            c.reps,
            detail
        ));
    }
    out
}
