mod common;

use common::{brute_signal, random_formula, random_samples};
use hyfal_core::benchmarks::make_billiard;
use hyfal_core::descent::DescentTarget;
use hyfal_core::tl::robustness_signal;
use hyfal_core::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space() -> SearchSpace {
    SearchSpace::new(
        vec![(0.0, 1.0), (-2.0, 2.0), (0.5, 0.5)],
        PiecewiseConstantInput::new(vec![InputChannel::uniform(2, 4.0, 0.0, (-1.0, 1.0))]).unwrap(),
    )
}

fn direction(d: &[f64]) -> DescentDirection {
    DescentDirection {
        dx0: Vector::from_column_slice(&d[..3]),
        dtheta: Vector::from_column_slice(&d[3..]),
        dj: -1.0,
        target: DescentTarget::Guard { transition: 0 },
        t_star_used: 0.0,
    }
}

proptest! {
    #[test]
    fn inbox_stays_in_the_box(
        u in prop::collection::vec(0.0f64..1.0, 5),
        d in prop::collection::vec(-3.0f64..3.0, 5),
        h in 0.0f64..2.0,
    ) {
        let s = space();
        let flat: Vec<f64> = s.bounds().iter().zip(&u).map(|((lo, hi), t)| lo + t * (hi - lo)).collect();
        let p = s.from_flat(&flat);
        let q = inbox(&p, &direction(&d), h, &s);
        prop_assert!(s.contains(&q));
        for (((v, w), dv), (lo, hi)) in p.flat().iter().zip(q.flat()).zip(&d).zip(s.bounds()) {
            let free = v + h * dv;
            if (lo..=hi).contains(&free) {
                prop_assert_eq!(w, free);
            } else {
                prop_assert!(w == lo || w == hi);
            }
        }
    }

    #[test]
    fn monitor_agrees_with_the_definition(seed in any::<u64>(), len in 1usize..80, depth in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = random_samples(&mut rng, len);
        let phi = random_formula(&mut rng, depth, samples.last().unwrap().t.max(0.5));
        let fast = robustness_signal(&phi, &samples);
        let slow = brute_signal(&phi, &samples);
        prop_assert!(fast.iter().zip(&slow).all(|(a, b)| a.to_bits() == b.to_bits()));
        let neg = robustness_signal(&Formula::not(phi), &samples);
        prop_assert!(neg.iter().zip(&fast).all(|(a, b)| a.to_bits() == (-b).to_bits()));
    }

    #[test]
    fn derived_seeds_differ(master in any::<u64>()) {
        let seeds = ExperimentConfig::derived_seeds(master, 16);
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), seeds.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gd_respects_its_simulation_budget(
        u in prop::collection::vec(0.0f64..1.0, 3),
        k1 in 1usize..6,
        k2 in 0usize..4,
    ) {
        let b = make_billiard();
        let problem = b.problem(SimOptions::default());
        let flat: Vec<f64> = b.space.bounds().iter().zip(u.iter().chain([0.0, 0.0].iter()))
            .map(|((lo, hi), t)| lo + t * (hi - lo)).collect();
        let start = SearchPoint::new(vec![flat[0], flat[1], 0.0, 0.0], vec![30.0 + 15.0 * u[2]]);
        let cfg = GdConfig { k1, k2, ..Default::default() };
        let trace = gradient_descent(&problem, &start, &cfg);
        prop_assert!(trace.sims <= cfg.max_sims());
        prop_assert_eq!(trace.sims, trace.records.len());
        let best = trace.records.iter().filter(|r| r.accepted).filter_map(|r| r.r).fold(f64::INFINITY, f64::min);
        prop_assert!(trace.best_r == best || trace.sims == 1);
    }

    #[test]
    fn sa_is_reproducible_and_within_budget(seed in any::<u64>(), budget in 1usize..30) {
        let b = make_billiard();
        let problem = b.problem(SimOptions::default());
        let cfg = SaConfig { budget, seed, ..Default::default() };
        let a = simulated_annealing(&problem, &cfg);
        prop_assert!(a.sims <= budget);
        prop_assert!(a.sims == budget || a.falsified);
        prop_assert!(a.records.iter().all(|r| b.space.contains(&r.point)));
        prop_assert_eq!(a.to_json(), simulated_annealing(&problem, &cfg).to_json());
    }
}
