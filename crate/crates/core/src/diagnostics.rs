//! Moment estimators, tensor quadrature ground truths and the relative
//! median squared error.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::density::BoundedDomain;
use crate::samplers::{Chain, WeightedSampleSet};
use crate::{Error, Result};

/// Default fraction of a chain discarded as burn-in.
pub const DEFAULT_BURN_IN: f64 = 0.2;

/// Mean vector and diagonal of the covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Published,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub provenance: Provenance,
}

impl GroundTruth {
    pub fn published(mean: Vec<f64>, var: Vec<f64>) -> Self {
        Self { mean, var, provenance: Provenance::Published }
    }

    pub fn moments(&self) -> MomentEstimate {
        MomentEstimate { mean: self.mean.clone(), var: self.var.clone() }
    }
}

/// Sample mean and per-coordinate sample variance of the states after
/// discarding the leading `burn_in` fraction.
pub fn chain_moments(chain: &Chain, burn_in: f64) -> Result<MomentEstimate> {
    state_moments(&chain.states, burn_in)
}

pub fn state_moments(states: &[Vec<f64>], burn_in: f64) -> Result<MomentEstimate> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(Error::InvalidParameter(format!("burn-in fraction must lie in [0, 1), got {burn_in}")));
    }
    let skip = (states.len() as f64 * burn_in).floor() as usize;
    let kept = &states[skip.min(states.len())..];
    if kept.len() < 2 {
        return Err(Error::Size(format!("need at least 2 post burn-in states, got {}", kept.len())));
    }
    let d = kept[0].len();
    let n = kept.len() as f64;
    let mut mean = vec![0.0; d];
    for s in kept {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for s in kept {
        for ((v, x), m) in var.iter_mut().zip(s).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= n - 1.0);
    Ok(MomentEstimate { mean, var })
}

/// Self-normalized weighted mean and variance.
pub fn weighted_moments(ws: &WeightedSampleSet) -> Result<MomentEstimate> {
    if ws.is_empty() {
        return Err(Error::DegenerateWeights);
    }
    weighted_points_moments(&ws.samples, &ws.normalized_weights)
}

fn weighted_points_moments(points: &[Vec<f64>], w: &[f64]) -> Result<MomentEstimate> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let d = points[0].len();
    let mut mean = vec![0.0; d];
    for (p, wi) in points.iter().zip(w) {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += wi * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; d];
    for (p, wi) in points.iter().zip(w) {
        for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
            *v += wi * (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v /= total);
    Ok(MomentEstimate { mean, var })
}

/// Midpoints of `n` equal cells along each axis of `domain`.
pub fn midpoint_axes(domain: &BoundedDomain, n: usize) -> Vec<Vec<f64>> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(lo, hi)| {
            let h = (hi - lo) / n as f64;
            (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
        })
        .collect()
}

/// Normalized mean and diagonal covariance of `density` over `domain` by
/// the midpoint rule on an `n`-per-axis tensor grid (dimension 1 or 2).
pub fn quadrature_moments<F: Fn(&[f64]) -> f64>(density: F, domain: &BoundedDomain, n: usize) -> Result<GroundTruth> {
    if n < 64 {
        return Err(Error::InvalidParameter(format!("need at least 64 grid points per axis, got {n}")));
    }
    let d = domain.dim();
    if d > 2 {
        return Err(Error::InvalidParameter(format!("tensor quadrature supports dimension <= 2, got {d}")));
    }
    let axes = midpoint_axes(domain, n);
    // Raw moments Σp, Σpθ, Σpθ² accumulated per row, then across rows.
    let mut z = 0.0;
    let mut s1 = vec![0.0; d];
    let mut s2 = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let rows = if d == 1 { 1 } else { n };
    for r in 0..rows {
        let mut rz = 0.0;
        let mut r1 = vec![0.0; d];
        let mut r2 = vec![0.0; d];
        if d == 2 {
            theta[0] = axes[0][r];
        }
        for c in 0..n {
            theta[d - 1] = axes[d - 1][c];
            let p = density(&theta);
            if !(p >= 0.0 && p.is_finite()) {
                return Err(Error::NonFinite(format!("density {p} at {theta:?}")));
            }
            rz += p;
            for k in 0..d {
                r1[k] += p * theta[k];
                r2[k] += p * theta[k] * theta[k];
            }
        }
        z += rz;
        for k in 0..d {
            s1[k] += r1[k];
            s2[k] += r2[k];
        }
    }
    if z <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let mean: Vec<f64> = s1.iter().map(|s| s / z).collect();
    let var = s2.iter().zip(&mean).map(|(s, m)| (s / z - m * m).max(0.0)).collect();
    Ok(GroundTruth { mean, var, provenance: Provenance::Quadrature })
}

/// ∫ density over `domain` by the same midpoint rule.
pub fn quadrature_integral<F: Fn(&[f64]) -> f64>(density: F, domain: &BoundedDomain, n: usize) -> Result<f64> {
    let d = domain.dim();
    if d > 2 || n == 0 {
        return Err(Error::InvalidParameter(format!("unsupported grid: dim {d}, {n} points")));
    }
    let axes = midpoint_axes(domain, n);
    let cell = domain.volume() / (n as f64).powi(d as i32);
    let mut total = 0.0;
    if d == 1 {
        total = axes[0].iter().map(|x| density(&[*x])).sum();
    } else {
        for x in &axes[0] {
            total += axes[1].iter().map(|y| density(&[*x, *y])).sum::<f64>();
        }
    }
    Ok(total * cell)
}

/// Relative median squared errors of a batch of estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean_error: f64,
    pub var_error: f64,
    /// The truth's mean vector is zero, so `mean_error` is unnormalized.
    pub mean_unnormalized: bool,
    pub var_unnormalized: bool,
}

/// Median of a slice; the average of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared norm below which a truth mean counts as zero, relative to the
/// total variance. Quadrature on symmetric targets leaves residues near
/// machine precision instead of exact zeros.
pub const ZERO_MEAN_TOL: f64 = 1e-20;

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn mean_is_zero(truth: &GroundTruth) -> bool {
    sq_norm(&truth.mean) <= ZERO_MEAN_TOL * truth.var.iter().sum::<f64>().max(1.0)
}

fn var_is_zero(truth: &GroundTruth) -> bool {
    sq_norm(&truth.var) == 0.0
}

/// ‖est − truth‖² / ‖truth‖² per run, one value per block. A zero block
/// falls back to the plain squared error.
pub fn relative_sq_errors(est: &MomentEstimate, truth: &GroundTruth) -> (f64, f64) {
    let m = if mean_is_zero(truth) { 1.0 } else { sq_norm(&truth.mean) };
    let v = if var_is_zero(truth) { 1.0 } else { sq_norm(&truth.var) };
    (sq_dist(&est.mean, &truth.mean) / m, sq_dist(&est.var, &truth.var) / v)
}

/// Median over runs of the per-block relative squared error.
pub fn rel_median_sq_error(estimates: &[MomentEstimate], truth: &GroundTruth) -> Result<ErrorSummary> {
    if estimates.is_empty() {
        return Err(Error::Size("no estimates".into()));
    }
    for e in estimates {
        if e.mean.len() != truth.mean.len() || e.var.len() != truth.var.len() {
            return Err(Error::Dimension { expected: truth.mean.len(), got: e.mean.len() });
        }
    }
    let (m, v): (Vec<f64>, Vec<f64>) = estimates.iter().map(|e| relative_sq_errors(e, truth)).unzip();
    Ok(ErrorSummary {
        mean_error: median(&m),
        var_error: median(&v),
        mean_unnormalized: mean_is_zero(truth),
        var_unnormalized: var_is_zero(truth),
    })
}

/// Quadrature ground truths keyed by a free-form label such as
/// `banana/exp/2000`. One entry per line: `key mean... | var...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TruthCache {
    entries: BTreeMap<String, GroundTruth>,
}

impl TruthCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&GroundTruth> {
        self.entries.get(key)
    }

    pub fn insert(&mut self, key: &str, truth: GroundTruth) -> Result<()> {
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(Error::InvalidParameter(format!("cache key must be a non-empty word, got {key:?}")));
        }
        self.entries.insert(key.to_owned(), truth);
        Ok(())
    }

    /// Cached value, or computes and stores it.
    pub fn get_or_compute<F: FnOnce() -> Result<GroundTruth>>(&mut self, key: &str, f: F) -> Result<GroundTruth> {
        if let Some(t) = self.entries.get(key) {
            return Ok(t.clone());
        }
        let t = f()?;
        self.insert(key, t.clone())?;
        Ok(t)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        for (k, t) in &self.entries {
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
            writeln!(w, "{k} {} | {}", fmt(&t.mean), fmt(&t.var)).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut cache = Self::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::Io(e.to_string()))?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let bad = |msg: &str| Error::Parse { line: i + 1, msg: msg.to_owned() };
            let (head, var) = t.split_once('|').ok_or_else(|| bad("missing '|'"))?;
            let mut words = head.split_whitespace();
            let key = words.next().ok_or_else(|| bad("missing key"))?;
            let parse = |it: &mut dyn Iterator<Item = &str>| -> Result<Vec<f64>> {
                it.map(|w| w.parse::<f64>().map_err(|e| bad(&e.to_string()))).collect()
            };
            let mean = parse(&mut words)?;
            let var = parse(&mut var.split_whitespace())?;
            if mean.len() != var.len() || mean.is_empty() {
                return Err(bad("mean and variance blocks differ in length"));
            }
            cache.entries.insert(key.to_owned(), GroundTruth { mean, var, provenance: Provenance::Quadrature });
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    fn chain_of(states: Vec<Vec<f64>>) -> Chain {
        Chain {
            states,
            values: Vec::new(),
            accepted: 0,
            oracle_calls: 0,
            budget_exhausted: false,
            trace: Vec::new(),
        }
    }

    #[test]
    fn constant_chain_has_zero_variance() {
        let m = chain_moments(&chain_of(vec![vec![1.5, -2.0]; 100]), DEFAULT_BURN_IN).unwrap();
        assert_eq!(m.mean, vec![1.5, -2.0]);
        assert_eq!(m.var, vec![0.0, 0.0]);
    }

    #[test]
    fn iid_normal_stream() {
        let mut rng = seeded(1);
        let n = 1_000_000;
        let states: Vec<Vec<f64>> = (0..n).map(|_| vec![StandardNormal.sample(&mut rng)]).collect();
        let m = chain_moments(&chain_of(states), 0.0).unwrap();
        assert!(m.mean[0].abs() < 3.0 / (n as f64).sqrt());
        assert!((m.var[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn burn_in_boundaries() {
        let states: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let all = chain_moments(&chain_of(states.clone()), 0.0).unwrap();
        assert_eq!(all.mean, vec![4.5]);
        let tail = chain_moments(&chain_of(states.clone()), 0.5).unwrap();
        assert_eq!(tail.mean, vec![7.0]);
        assert!(chain_moments(&chain_of(states.clone()), 0.95).is_err());
        assert!(chain_moments(&chain_of(states), 1.0).is_err());
    }

    #[test]
    fn weighted_special_cases() {
        let pts = vec![vec![1.0, 0.0], vec![3.0, 2.0], vec![5.0, 4.0]];
        let ws = WeightedSampleSet::new(pts.clone(), vec![2.0; 3]).unwrap();
        let m = weighted_moments(&ws).unwrap();
        assert!((m.mean[0] - 3.0).abs() < 1e-15 && (m.mean[1] - 2.0).abs() < 1e-15);
        // population variance, as for any self-normalized estimator
        assert!((m.var[0] - 8.0 / 3.0).abs() < 1e-12);
        let ws = WeightedSampleSet::new(pts, vec![0.0, 7.0, 0.0]).unwrap();
        let m = weighted_moments(&ws).unwrap();
        assert_eq!(m.mean, vec![3.0, 2.0]);
        assert_eq!(m.var, vec![0.0, 0.0]);
    }

    #[test]
    fn uniform_square_quadrature() {
        let d = BoundedDomain::cube(2, -1.0, 1.0).unwrap();
        let t = quadrature_moments(|_| 1.0, &d, 2000).unwrap();
        for k in 0..2 {
            assert!(t.mean[k].abs() < 1e-12);
            assert!((t.var[k] - 1.0 / 3.0).abs() < 1e-6);
        }
        assert!(quadrature_moments(|_| 0.0, &d, 64).is_err());
        assert!(quadrature_moments(|_| 1.0, &d, 10).is_err());
        assert!(quadrature_moments(|_| 1.0, &BoundedDomain::cube(3, 0.0, 1.0).unwrap(), 64).is_err());
    }

    #[test]
    fn weighted_grid_equals_quadrature() {
        let d = BoundedDomain::cube(2, -3.0, 3.0).unwrap();
        let f = |t: &[f64]| (-(t[0] - 0.5).powi(2) - 0.3 * t[1] * t[1] - 0.2 * t[0] * t[1]).exp();
        let n = 64;
        let q = quadrature_moments(f, &d, n).unwrap();
        let axes = midpoint_axes(&d, n);
        let mut pts = Vec::new();
        let mut w = Vec::new();
        for x in &axes[0] {
            for y in &axes[1] {
                pts.push(vec![*x, *y]);
                w.push(f(&[*x, *y]));
            }
        }
        let m = weighted_moments(&WeightedSampleSet::new(pts, w).unwrap()).unwrap();
        for k in 0..2 {
            assert!((m.mean[k] - q.mean[k]).abs() < 1e-12);
            assert!((m.var[k] - q.var[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn integral_of_gaussian() {
        let d = BoundedDomain::cube(1, -10.0, 10.0).unwrap();
        let z = quadrature_integral(|t| (-0.5 * t[0] * t[0]).exp(), &d, 4000).unwrap();
        assert!((z - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn error_metric_examples() {
        let truth = GroundTruth::published(vec![1.0, 2.0], vec![3.0, 4.0]);
        let exact = truth.moments();
        let s = rel_median_sq_error(&[exact.clone(), exact.clone()], &truth).unwrap();
        assert_eq!((s.mean_error, s.var_error), (0.0, 0.0));

        let double = MomentEstimate { mean: vec![2.0, 4.0], var: vec![6.0, 8.0] };
        let s = rel_median_sq_error(&[double], &truth).unwrap();
        assert_eq!((s.mean_error, s.var_error), (1.0, 1.0));

        let outlier = MomentEstimate { mean: vec![1e6, 0.0], var: vec![3.0, 4.0] };
        let small = MomentEstimate { mean: vec![1.1, 2.0], var: vec![3.0, 4.0] };
        let s = rel_median_sq_error(&[small.clone(), small.clone(), outlier], &truth).unwrap();
        let (expected, _) = relative_sq_errors(&small, &truth);
        assert_eq!(s.mean_error, expected);
        assert!(rel_median_sq_error(&[], &truth).is_err());
    }

    #[test]
    fn zero_truth_is_flagged() {
        let truth = GroundTruth::published(vec![0.0, 0.0], vec![1.0, 1.0]);
        let est = MomentEstimate { mean: vec![0.1, 0.0], var: vec![1.0, 1.0] };
        let s = rel_median_sq_error(&[est], &truth).unwrap();
        assert!(s.mean_unnormalized && !s.var_unnormalized);
        assert!((s.mean_error - 0.01).abs() < 1e-15);

        let residue = GroundTruth::published(vec![3e-17, -1e-16], vec![108.87, 9.0]);
        let s = rel_median_sq_error(&[MomentEstimate { mean: vec![0.1, 0.0], var: vec![108.87, 9.0] }], &residue).unwrap();
        assert!(s.mean_unnormalized);
        assert!((s.mean_error - 0.01).abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn cache_round_trip() {
        let mut c = TruthCache::new();
        c.insert("banana/none/2000", GroundTruth { mean: vec![-0.1 / 3.0, 0.0], var: vec![1.0 / 7.0, 8.9], provenance: Provenance::Quadrature }).unwrap();
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = TruthCache::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, c);
        let mut calls = 0;
        let mut c2 = back.clone();
        c2.get_or_compute("banana/none/2000", || {
            calls += 1;
            Ok(GroundTruth::published(vec![], vec![]))
        })
        .unwrap();
        assert_eq!(calls, 0);
        assert!(TruthCache::read_text("k 1 2 | 3".as_bytes()).is_err());
        assert!(c2.insert("has space", GroundTruth::published(vec![1.0], vec![1.0])).is_err());
    }
}
