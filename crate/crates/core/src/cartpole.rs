//! Double pole balancing on a cart and its expected-return noisy target.
//!
//! Two uniform poles hinge independently on a frictionless cart. With α
//! measured from the upright position, lᵢ the half-length of pole i and F
//! the force on the cart:
//!
//! ```text
//! ẍ   = (F + Σ F̃ᵢ) / (M + Σ m̃ᵢ)
//! F̃ᵢ  = mᵢ lᵢ α̇ᵢ² sin αᵢ − ¾ mᵢ g sin αᵢ cos αᵢ
//! m̃ᵢ  = mᵢ (1 − ¾ cos² αᵢ)
//! α̈ᵢ  = ¾ (g sin αᵢ − ẍ cos αᵢ) / lᵢ
//! ```
//!
//! A linear policy a = clamp(θᵀs, ±F_max) is applied to the previous state
//! and held constant over a 0.02 s RK4 step. An episode earns one unit of
//! reward per step until x, α₁ or α₂ leaves its bound, up to 1000 steps.

use std::io::Write;

use rand::Rng as _;

use crate::density::{BoundedDomain, NoisyOracle};
use crate::rng::Rng;
use crate::{Error, Result};

/// s = [x, ẋ, α₁, α̇₁, α₂, α̇₂].
pub type CartPoleState = [f64; 6];

/// Physical constants, bounds and episode settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartPoleParams {
    pub cart_mass: f64,
    pub pole_mass: [f64; 2],
    pub half_length: [f64; 2],
    pub gravity: f64,
    pub max_force: f64,
    pub track_bound: f64,
    pub angle_bound: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Draw α₁ from the same interval as α₂ instead of the narrower one.
    pub symmetric_alpha1: bool,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: [0.1, 0.01],
            half_length: [0.5, 0.05],
            gravity: 9.8,
            max_force: 10.0,
            track_bound: 2.4,
            angle_bound: 36f64.to_radians(),
            dt: 0.02,
            max_steps: 1000,
            symmetric_alpha1: false,
        }
    }
}

/// Half-widths of the uniform initial-state intervals.
pub const INITIAL_HALF_WIDTHS: CartPoleState = [1.944, 1.215, 0.0472, 0.135088, 0.10472, 0.135088];

/// Policy parameter box used by the experiments.
pub const POLICY_BOUND: f64 = 60.0;

/// MMSE policies reported for the benchmark, one per algorithm.
pub const REFERENCE_POLICIES: [[f64; 6]; 5] = [
    [-7.1281, -15.0300, 5.1756, 15.0946, 15.4696, 4.9734],
    [-5.6738, -15.7544, 3.0080, 14.9182, 16.3909, 6.0570],
    [-6.6351, -10.2346, -1.9859, 12.5025, 12.8274, 6.0455],
    [-8.9285, -17.0432, 4.0197, 13.3249, 15.7900, 3.9512],
    [-5.7748, -17.5469, 6.6250, 15.9932, 17.5892, 5.2058],
];

pub fn policy_domain() -> BoundedDomain {
    BoundedDomain::cube(6, -POLICY_BOUND, POLICY_BOUND).expect("valid box")
}

impl CartPoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.cart_mass,
            self.pole_mass[0],
            self.pole_mass[1],
            self.half_length[0],
            self.half_length[1],
            self.max_force,
            self.track_bound,
            self.angle_bound,
            self.dt,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !self.gravity.is_finite() {
            return Err(Error::InvalidParameter(format!("cart-pole parameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    pub fn sample_initial_state(&self, rng: &mut Rng) -> CartPoleState {
        let mut w = INITIAL_HALF_WIDTHS;
        if self.symmetric_alpha1 {
            w[2] = w[4];
        }
        w.map(|h| rng.random_range(-h..=h))
    }

    /// Time derivative of the state under a constant force.
    pub fn derivative(&self, s: &CartPoleState, force: f64) -> CartPoleState {
        let g = self.gravity;
        let (mut f_sum, mut m_sum) = (0.0, 0.0);
        let mut sc = [(0.0, 0.0); 2];
        for i in 0..2 {
            let (a, w) = (s[2 + 2 * i], s[3 + 2 * i]);
            let (sin, cos) = a.sin_cos();
            sc[i] = (sin, cos);
            let (m, l) = (self.pole_mass[i], self.half_length[i]);
            f_sum += m * l * w * w * sin - 0.75 * m * g * sin * cos;
            m_sum += m * (1.0 - 0.75 * cos * cos);
        }
        let xdd = (force + f_sum) / (self.cart_mass + m_sum);
        let add = |i: usize| 0.75 * (g * sc[i].0 - xdd * sc[i].1) / self.half_length[i];
        [s[1], xdd, s[3], add(0), s[5], add(1)]
    }

    /// One RK4 step of length `dt` with the force clamped to ±F_max.
    pub fn step_by(&self, s: &CartPoleState, force: f64, dt: f64) -> Result<CartPoleState> {
        if !force.is_finite() || s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("state {s:?}, force {force}")));
        }
        let f = force.clamp(-self.max_force, self.max_force);
        let shift = |k: &CartPoleState, h: f64| -> CartPoleState { std::array::from_fn(|j| s[j] + h * k[j]) };
        let k1 = self.derivative(s, f);
        let k2 = self.derivative(&shift(&k1, 0.5 * dt), f);
        let k3 = self.derivative(&shift(&k2, 0.5 * dt), f);
        let k4 = self.derivative(&shift(&k3, dt), f);
        let next: CartPoleState =
            std::array::from_fn(|j| s[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
        if next.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("step from {s:?} diverged")));
        }
        Ok(next)
    }

    pub fn step(&self, s: &CartPoleState, force: f64) -> Result<CartPoleState> {
        self.step_by(s, force, self.dt)
    }

    pub fn in_bounds(&self, s: &CartPoleState) -> bool {
        s[0].abs() <= self.track_bound && s[2].abs() <= self.angle_bound && s[4].abs() <= self.angle_bound
    }

    /// Total mechanical energy with the pivot height as the zero level.
    pub fn energy(&self, s: &CartPoleState) -> f64 {
        let total_mass = self.cart_mass + self.pole_mass[0] + self.pole_mass[1];
        let mut e = 0.5 * total_mass * s[1] * s[1];
        for i in 0..2 {
            let (a, w) = (s[2 + 2 * i], s[3 + 2 * i]);
            let (m, l) = (self.pole_mass[i], self.half_length[i]);
            e += m * s[1] * l * w * a.cos() + 2.0 / 3.0 * m * l * l * w * w + m * self.gravity * l * a.cos();
        }
        e
    }

    /// Saturated force of a linear policy.
    pub fn action(&self, theta: &[f64], s: &CartPoleState) -> f64 {
        let a: f64 = theta.iter().zip(s).map(|(t, x)| t * x).sum();
        a.clamp(-self.max_force, self.max_force)
    }

    /// Runs one episode from `s0`. Returns the number of steps survived.
    pub fn run_from(&self, theta: &[f64], s0: CartPoleState, record: bool) -> Result<EpisodeResult> {
        if theta.len() != 6 {
            return Err(Error::Dimension { expected: 6, got: theta.len() });
        }
        let mut s = s0;
        let mut trajectory = record.then(Vec::new);
        let mut length = 0;
        for t in 1..=self.max_steps {
            let a = self.action(theta, &s);
            s = self.step(&s, a)?;
            let alive = self.in_bounds(&s);
            if let Some(tr) = trajectory.as_mut() {
                tr.push(TrajectoryStep { t, state: s, action: a, reward: u32::from(alive) });
            }
            if !alive {
                break;
            }
            length = t;
        }
        Ok(EpisodeResult { length, initial: s0, trajectory })
    }

    pub fn run_episode(&self, theta: &[f64], rng: &mut Rng) -> Result<EpisodeResult> {
        let s0 = self.sample_initial_state(rng);
        self.run_from(theta, s0, false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryStep {
    pub t: usize,
    pub state: CartPoleState,
    pub action: f64,
    pub reward: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Steps survived; equal to the return.
    pub length: usize,
    pub initial: CartPoleState,
    pub trajectory: Option<Vec<TrajectoryStep>>,
}

impl EpisodeResult {
    pub fn ret(&self) -> f64 {
        self.length as f64
    }
}

/// One line per step: t, the six state components, action, reward.
pub fn write_trajectory<W: Write>(steps: &[TrajectoryStep], mut w: W) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(e.to_string());
    writeln!(w, "# t x xdot a1 a1dot a2 a2dot action reward").map_err(io)?;
    for st in steps {
        let s = &st.state;
        writeln!(w, "{} {} {} {} {} {} {} {} {}", st.t, s[0], s[1], s[2], s[3], s[4], s[5], st.action, st.reward)
            .map_err(io)?;
    }
    Ok(())
}

/// Mean return over `episodes` independent episodes, as a noisy oracle.
/// Each realization is one oracle unit and `episodes` episode units.
pub struct ReturnOracle {
    params: CartPoleParams,
    domain: BoundedDomain,
    episodes: usize,
    rng: Rng,
    calls: u64,
    episode_units: u64,
}

impl ReturnOracle {
    pub fn new(params: CartPoleParams, episodes: usize, rng: Rng) -> Result<Self> {
        params.validate()?;
        if episodes == 0 {
            return Err(Error::InvalidParameter("need at least one episode per evaluation".into()));
        }
        Ok(Self { params, domain: policy_domain(), episodes, rng, calls: 0, episode_units: 0 })
    }

    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn episode_units(&self) -> u64 {
        self.episode_units
    }
}

impl NoisyOracle for ReturnOracle {
    fn domain(&self) -> &BoundedDomain {
        &self.domain
    }

    fn realize(&mut self, theta: &[f64]) -> Result<f64> {
        self.domain.check(theta)?;
        self.calls += 1;
        let mut total = 0.0;
        for _ in 0..self.episodes {
            total += self.params.run_episode(theta, &mut self.rng)?.ret();
        }
        self.episode_units += self.episodes as u64;
        Ok(total / self.episodes as f64)
    }

    fn evaluations(&self) -> u64 {
        self.calls
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn equilibrium_is_fixed() {
        let p = CartPoleParams::default();
        assert_eq!(p.step(&[0.0; 6], 0.0).unwrap(), [0.0; 6]);
    }

    #[test]
    fn mirror_symmetry() {
        let p = CartPoleParams::default();
        let s = [0.3, -0.2, 0.05, 0.1, -0.07, 0.02];
        let a = p.step(&s, 3.7).unwrap();
        let b = p.step(&s.map(|x| -x), -3.7).unwrap();
        for j in 0..6 {
            assert_eq!(a[j], -b[j]);
        }
    }

    #[test]
    fn force_is_saturated() {
        let p = CartPoleParams::default();
        let s = [0.0, 0.0, 0.01, 0.0, 0.0, 0.0];
        assert_eq!(p.step(&s, 1e6).unwrap(), p.step(&s, 10.0).unwrap());
        assert!(p.step(&s, f64::NAN).is_err());
        assert!(p.step(&[f64::INFINITY, 0.0, 0.0, 0.0, 0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn energy_is_conserved_without_force() {
        let p = CartPoleParams::default();
        let mut s = [0.0, 0.1, 0.01, 0.0, -0.01, 0.02];
        let e0 = p.energy(&s);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            s = p.step(&s, 0.0).unwrap();
            worst = worst.max((p.energy(&s) - e0).abs());
        }
        assert!(worst < 1e-3 * e0.abs(), "drift {worst} of {e0}");
    }

    #[test]
    fn energy_matches_the_equations_of_motion() {
        // dE/dt = F·ẋ along the flow, checked by finite differences.
        let p = CartPoleParams::default();
        let s = [0.2, 0.4, 0.1, -0.3, -0.05, 0.6];
        let f = 2.5;
        let d = p.derivative(&s, f);
        let h = 1e-6;
        let fwd: CartPoleState = std::array::from_fn(|j| s[j] + h * d[j]);
        let bwd: CartPoleState = std::array::from_fn(|j| s[j] - h * d[j]);
        let rate = (p.energy(&fwd) - p.energy(&bwd)) / (2.0 * h);
        assert!((rate - f * s[1]).abs() < 1e-6, "{rate} vs {}", f * s[1]);
    }

    #[test]
    fn rk4_is_time_reversible_for_small_amplitudes() {
        let p = CartPoleParams::default();
        let s = [0.01, 0.0, 0.002, -0.001, 0.001, 0.0];
        let there = p.step_by(&s, 0.0, 0.02).unwrap();
        let back = p.step_by(&there, 0.0, -0.02).unwrap();
        for j in 0..6 {
            assert!((back[j] - s[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn initial_states_within_intervals() {
        let p = CartPoleParams::default();
        let mut rng = seeded(1);
        for _ in 0..10_000 {
            let s = p.sample_initial_state(&mut rng);
            for j in 0..6 {
                assert!(s[j].abs() <= INITIAL_HALF_WIDTHS[j]);
            }
        }
        let sym = CartPoleParams { symmetric_alpha1: true, ..p };
        let widest = (0..10_000).map(|_| sym.sample_initial_state(&mut rng)[2].abs()).fold(0.0, f64::max);
        assert!(widest > 0.0472 && widest <= 0.10472);
        assert_eq!(p.sample_initial_state(&mut seeded(5)), p.sample_initial_state(&mut seeded(5)));
    }

    #[test]
    fn zero_policy_falls() {
        let p = CartPoleParams::default();
        let mut rng = seeded(2);
        for _ in 0..100 {
            let r = p.run_episode(&[0.0; 6], &mut rng).unwrap();
            assert!(r.length < 1000);
        }
    }

    #[test]
    fn widening_bounds_never_shortens_episodes() {
        let p = CartPoleParams::default();
        let wide = CartPoleParams { track_bound: 4.8, angle_bound: 1.2, ..p };
        let mut rng = seeded(3);
        for _ in 0..200 {
            let theta: Vec<f64> = (0..6).map(|_| rng.random_range(-60.0..60.0)).collect();
            let s0 = p.sample_initial_state(&mut rng);
            let a = p.run_from(&theta, s0, false).unwrap();
            let b = wide.run_from(&theta, s0, false).unwrap();
            assert!(b.length >= a.length);
            assert!(a.length <= 1000);
        }
    }

    #[test]
    fn recorded_trajectory_agrees_with_return() {
        let p = CartPoleParams::default();
        let s0 = p.sample_initial_state(&mut seeded(4));
        let r = p.run_from(&[0.0; 6], s0, true).unwrap();
        let tr = r.trajectory.as_ref().unwrap();
        let rewards: u32 = tr.iter().map(|s| s.reward).sum();
        assert_eq!(rewards as usize, r.length);
        let mut buf = Vec::new();
        write_trajectory(tr, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), tr.len() + 1);
    }

    #[test]
    fn return_oracle_counts_units() {
        let mut o = ReturnOracle::new(CartPoleParams::default(), 4, seeded(6)).unwrap();
        let v = o.realize(&[0.0; 6]).unwrap();
        assert!((0.0..=1000.0).contains(&v));
        assert_eq!(o.evaluations(), 1);
        assert_eq!(o.episode_units(), 4);
        assert!(o.realize(&[61.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(ReturnOracle::new(CartPoleParams::default(), 0, seeded(6)).is_err());
    }
}
