use noisy_mc::cartpole::{CartPoleParams, CartPoleState};
use noisy_mc::density::{
    folded_mean, rectified_mean, Banana, BoundedDomain, DensityOracle, NoiseModel, NoisyOracle, TargetDensity,
};
use noisy_mc::diagnostics::{median, rel_median_sq_error, GroundTruth, MomentEstimate, TruthCache};
use noisy_mc::rng::{seeded, stream};
use noisy_mc::samplers::{
    da_pm_mh, mh_s, noisy_mh, normalize_weights, sir_resample_indices, DelayedAcceptance, GaussianRandomWalk,
    NoisyMhMode, RunLimits, UpdateRule, UpdateTiming,
};
use noisy_mc::special::{normal_cdf, normal_pdf};
use noisy_mc::surrogate::{nearest_k, DesignSet, KnnSurrogate};
use proptest::prelude::*;

fn noise_strategy() -> impl Strategy<Value = NoiseModel> {
    prop_oneof![
        Just(NoiseModel::None),
        (0.1f64..5.0).prop_map(|rate| NoiseModel::MultiplicativeExponential { rate }),
        (0.001f64..2.0).prop_map(|sigma| NoiseModel::RectifiedGaussian { sigma }),
        (0.001f64..2.0).prop_map(|sigma| NoiseModel::FoldedGaussian { sigma }),
        (0.01f64..2.0).prop_map(|sigma| NoiseModel::LogAdditiveGaussian { sigma }),
    ]
}

/// Mean of the rectified Gaussian in the truncated-normal form.
fn rectified_mean_truncated_form(p: f64, sigma: f64) -> f64 {
    let tail = 1.0 - normal_cdf(-p / sigma);
    (p + sigma * normal_pdf(-p / sigma) / tail) * tail
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn realizations_are_nonnegative(noise in noise_strategy(), p in 1e-6f64..10.0, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        for _ in 0..16 {
            let v = noise.perturb(p, &mut rng).unwrap();
            prop_assert!(v >= 0.0 && v.is_finite());
        }
    }

    #[test]
    fn rectified_mean_agrees_with_truncated_form(p in -0.5f64..5.0, sigma in 0.01f64..2.0) {
        let a = rectified_mean(p, sigma);
        let z = -p / sigma;
        if z < 8.0 {
            let b = rectified_mean_truncated_form(p, sigma);
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
        } else {
            prop_assert!(a > 0.0 && a <= sigma * normal_pdf(z) / (z * z), "{a}");
        }
        prop_assert!(a >= p.max(0.0) - 1e-15);
    }

    #[test]
    fn folded_mean_dominates_abs(p in -5.0f64..5.0, sigma in 0.001f64..2.0) {
        let f = folded_mean(p, sigma);
        prop_assert!(f >= p.abs() - 1e-12);
        prop_assert!(f >= rectified_mean(p, sigma) - 1e-12);
        prop_assert!((folded_mean(-p, sigma) - f).abs() <= 1e-12 * (1.0 + f));
    }

    #[test]
    fn density_is_zero_outside_domain(x in -30.0f64..30.0, y in -30.0f64..30.0) {
        let b = Banana::default();
        let v = b.eval(&[x, y]).unwrap();
        prop_assert!(v >= 0.0 && v.is_finite());
        if x.abs() > 10.0 || y.abs() > 10.0 {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn uniform_samples_stay_in_domain(lo in -50.0f64..0.0, width in 0.1f64..40.0, seed in any::<u64>()) {
        let d = BoundedDomain::new(vec![lo, lo - 1.0], vec![lo + width, lo + 2.0 * width]).unwrap();
        let mut rng = seeded(seed);
        for _ in 0..32 {
            prop_assert!(d.contains(&d.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn normalized_weights_sum_to_one(w in prop::collection::vec(0.0f64..1e6, 1..64)) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let n = normalize_weights(&w).unwrap();
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(n.iter().zip(&w).all(|(a, b)| (*a == 0.0) == (*b == 0.0)));
    }

    #[test]
    fn resampling_never_picks_zero_weight(w in prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..5.0], 1..32), seed in any::<u64>()) {
        prop_assume!(w.iter().any(|x| *x > 0.0));
        let idx = sir_resample_indices(&w, 200, &mut seeded(seed)).unwrap();
        prop_assert_eq!(idx.len(), 200);
        prop_assert!(idx.iter().all(|i| w[*i] > 0.0));
    }

    #[test]
    fn kd_tree_matches_brute_force(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.0f64..3.0), 1..120),
        queries in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..12),
        k in 1usize..20,
    ) {
        let domain = BoundedDomain::cube(2, -10.0, 10.0).unwrap();
        let mut design = DesignSet::new(2);
        for (x, y, v) in &pts {
            design.push(&[*x, *y], *v).unwrap();
        }
        let fast = KnnSurrogate::new(domain.clone(), k).unwrap().with_design(design.clone()).unwrap();
        let slow = KnnSurrogate::new(domain, k).unwrap().with_design(design.clone()).unwrap().brute_force();
        for (x, y) in &queries {
            let q = [*x, *y];
            prop_assert_eq!(fast.predict(&q).unwrap(), slow.predict(&q).unwrap());
            let kk = k.min(design.len());
            let nn = nearest_k(&design, &q, kk).unwrap();
            prop_assert_eq!(nn.len(), kk);
            let d = |i: usize| design.point(i).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let farthest = nn.iter().map(|i| d(*i)).fold(0.0, f64::max);
            prop_assert!((0..design.len()).filter(|i| !nn.contains(i)).all(|i| d(i) >= farthest));
        }
    }

    #[test]
    fn surrogate_prediction_is_bounded_by_design(
        vals in prop::collection::vec(0.0f64..100.0, 1..50),
        seed in any::<u64>(),
        k in 1usize..10,
    ) {
        let domain = BoundedDomain::cube(2, -1.0, 1.0).unwrap();
        let mut rng = seeded(seed);
        let mut s = KnnSurrogate::new(domain.clone(), k).unwrap();
        for v in &vals {
            s.insert(&domain.sample_uniform(&mut rng), *v).unwrap();
        }
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        for _ in 0..8 {
            let p = s.predict(&domain.sample_uniform(&mut rng)).unwrap();
            prop_assert!(p >= s.floor() && p <= hi.max(s.floor()));
        }
    }

    #[test]
    fn cartpole_mirror_symmetry(
        s in prop::array::uniform6(-0.3f64..0.3),
        f in -10.0f64..10.0,
    ) {
        let p = CartPoleParams::default();
        let a = p.step(&s, f).unwrap();
        let neg: CartPoleState = s.map(|x| -x);
        let b = p.step(&neg, -f).unwrap();
        for j in 0..6 {
            prop_assert!((a[j] + b[j]).abs() <= 1e-12 * (1.0 + a[j].abs()));
        }
    }

    #[test]
    fn median_ignores_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..40), seed in any::<u64>()) {
        let m = median(&v);
        let k = (seed as usize) % v.len();
        v.rotate_left(k);
        v.reverse();
        prop_assert_eq!(median(&v), m);
    }

    #[test]
    fn exact_estimates_have_zero_error(
        mean in prop::collection::vec(-5.0f64..5.0, 2),
        var in prop::collection::vec(0.1f64..10.0, 2),
        r in 1usize..8,
    ) {
        let truth = GroundTruth::published(mean.clone(), var.clone());
        let est = vec![MomentEstimate { mean, var }; r];
        let s = rel_median_sq_error(&est, &truth).unwrap();
        prop_assert_eq!((s.mean_error, s.var_error), (0.0, 0.0));
    }

    #[test]
    fn truth_cache_round_trips(
        entries in prop::collection::btree_map("[a-z][a-z0-9/_-]{0,12}", (prop::collection::vec(-1e3f64..1e3, 2), prop::collection::vec(0.0f64..1e3, 2)), 0..6),
    ) {
        let mut c = TruthCache::new();
        for (k, (m, v)) in &entries {
            c.insert(k, GroundTruth::published(m.clone(), v.clone())).unwrap();
        }
        let mut buf = Vec::new();
        c.write_text(&mut buf).unwrap();
        let back = TruthCache::read_text(buf.as_slice()).unwrap();
        for (k, (m, v)) in &entries {
            let t = back.get(k).unwrap();
            prop_assert_eq!(&t.mean, m);
            prop_assert_eq!(&t.var, v);
        }
    }
}

fn banana_oracle(seed: u64) -> DensityOracle<Banana> {
    DensityOracle::new(Banana::default(), NoiseModel::MultiplicativeExponential { rate: 1.0 }, stream(seed, 0, 1)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn chains_respect_budget_and_domain(seed in any::<u64>(), budget in 2u64..400, scale in 0.5f64..8.0) {
        let prop = GaussianRandomWalk::new(scale).unwrap();
        let theta0 = [0.5, -0.5];
        let limits = RunLimits::new(100_000, budget);
        let domain = BoundedDomain::cube(2, -10.0, 10.0).unwrap();

        let mut o = banana_oracle(seed);
        let c = noisy_mh(&mut o, &prop, &theta0, limits, NoisyMhMode::PseudoMarginal, &mut seeded(seed)).unwrap();
        prop_assert_eq!(c.oracle_calls, budget);
        prop_assert_eq!(o.evaluations(), budget);
        prop_assert!(c.states.iter().all(|s| domain.contains(s)));

        let mut o = banana_oracle(seed);
        let c = noisy_mh(&mut o, &prop, &theta0, limits, NoisyMhMode::McWithinMh, &mut seeded(seed)).unwrap();
        prop_assert!(c.oracle_calls <= budget && budget - c.oracle_calls < 2);

        for rule in [UpdateRule::Always, UpdateRule::AcceptProb, UpdateRule::AcceptProbIndependent] {
            let mut o = banana_oracle(seed);
            let s = KnnSurrogate::new(domain.clone(), 3).unwrap();
            let limits = RunLimits::new(5_000, budget);
            let (c, sur) = mh_s(&mut o, s, &prop, &theta0, limits, rule, UpdateTiming::BeforeTest, &mut seeded(seed)).unwrap();
            prop_assert!(c.oracle_calls <= budget);
            prop_assert_eq!(sur.len() as u64, c.oracle_calls);
            prop_assert!(c.states.iter().all(|s| domain.contains(s)));
        }

        let mut o = banana_oracle(seed);
        let s = KnnSurrogate::new(domain.clone(), 5).unwrap();
        let da = DelayedAcceptance { inner_steps: 3, rho_update: 1.0 };
        let (c, sur) = da_pm_mh(&mut o, s, &prop, &theta0, limits, da, &mut seeded(seed)).unwrap();
        prop_assert_eq!(c.oracle_calls, budget);
        prop_assert_eq!(sur.len() as u64, budget);
        prop_assert!(c.states.iter().all(|s| domain.contains(s)));
        prop_assert_eq!(c.values.len(), c.states.len());
    }
}
