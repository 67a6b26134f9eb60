mod common;

use approx::assert_abs_diff_eq;
use common::{max_abs_diff, projection_by_search, random_simplex};
use fedsamp::ensemble::{expert_count, expert_grid, meta_init};
use fedsamp::feedback::sample_with_replacement;
use fedsamp::osmd::multiplicative_update;
use fedsamp::{
    BanditFeedback, BanditSampler, BlockSchedule, DoublingState, EnsembleState, ExpertGrid, FloorConstraint,
    Observation, OsmdState, RateSchedule, RngStream, Selection, SimplexPoint,
};

fn single(k: usize, client: usize, value: f64) -> BanditFeedback {
    BanditFeedback::new(
        k,
        vec![Observation {
            client,
            count: k,
            value,
        }],
    )
    .unwrap()
}

/// Feedback for `k` draws from the sampler's distribution with heavy-tailed values.
fn random_feedback(sampler: &dyn BanditSampler, k: usize, rng: &mut RngStream) -> BanditFeedback {
    let sel = sample_with_replacement(sampler.distribution(), k, rng);
    let values: Vec<f64> = (0..sampler.distribution().len())
        .map(|_| (4.0 * rng.standard_normal()).exp())
        .collect();
    BanditFeedback::observe(&sel, |m| values[m]).unwrap()
}

#[test]
fn osmd_step_example() {
    let c = FloorConstraint::new(0.4, 2).unwrap();
    let u = SimplexPoint::uniform(2);
    let y = multiplicative_update(&u, &single(1, 0, 0.5), 1.0).unwrap();
    assert_abs_diff_eq!(y.values()[0], 0.5 * 4f64.exp(), epsilon = 1e-12);
    assert_eq!(y.values()[1], 0.5);

    let mut s = OsmdState::new(c, RateSchedule::constant(1.0).unwrap());
    s.step(&single(1, 0, 0.5)).unwrap();
    let oracle = projection_by_search(y.values(), 0.4);
    assert!(max_abs_diff(s.current().probs(), &oracle) < 1e-6);
    assert_abs_diff_eq!(s.current()[0], 0.8, epsilon = 1e-12);
    assert_abs_diff_eq!(s.current()[1], 0.2, epsilon = 1e-12);
}

#[test]
fn osmd_stays_feasible_under_fuzzing() {
    let mut rng = RngStream::new(40);
    for (m, alpha) in [(2, 0.1), (5, 0.4), (30, 0.01), (100, 0.4)] {
        let c = FloorConstraint::new(alpha, m).unwrap();
        let mut s = OsmdState::new(c, RateSchedule::constant(0.05).unwrap());
        for _ in 0..2_500 {
            let k = 1 + (rng.next_u64() % 5) as usize;
            let fb = random_feedback(&s, k, &mut rng);
            s.step(&fb).unwrap();
            assert!(c.contains(s.current()));
        }
    }
}

#[test]
fn larger_feedback_never_lowers_probability() {
    let mut rng = RngStream::new(41);
    for _ in 0..500 {
        let m = 2 + (rng.next_u64() % 6) as usize;
        let alpha = 0.05 + 0.9 * rng.uniform();
        let c = FloorConstraint::new(alpha, m).unwrap();
        let init = SimplexPoint::new(random_simplex(&mut rng, m, alpha / m as f64)).unwrap();
        let eta = 10f64.powf(-3.0 + 3.0 * rng.uniform());
        let target = (rng.next_u64() % m as u64) as usize;
        let other = (target + 1) % m;
        let base = rng.uniform();
        let run = |v: f64| {
            let mut s = OsmdState::with_initial(c, RateSchedule::constant(eta).unwrap(), init.clone()).unwrap();
            let fb = BanditFeedback::new(
                2,
                vec![
                    Observation {
                        client: target,
                        count: 1,
                        value: v,
                    },
                    Observation {
                        client: other,
                        count: 1,
                        value: 0.7,
                    },
                ],
            )
            .unwrap();
            s.step(&fb).unwrap();
            s.current()[target]
        };
        assert!(run(base + rng.uniform()) >= run(base));
    }
}

#[test]
fn expert_count_example() {
    let recomputed = (0.5 * (1.0 + 4.0 * 250f64.ln() / 100f64.ln() * 999.0).log2()).floor() as usize + 1;
    assert_eq!(recomputed, 7);
    assert_eq!(expert_count(100, 0.4, 1000), recomputed);
    assert_eq!(expert_grid(100, 0.4, 5, 2.0, 1000).unwrap().len(), 7);
}

#[test]
fn grid_brackets_tuned_rate() {
    let (m, alpha, k, a_bar, t) = (100usize, 0.4, 5usize, 3.0, 1000usize);
    let grid = expert_grid(m, alpha, k, a_bar, t).unwrap();
    let mf = m as f64;
    for i in 0..100 {
        let tv = 2.0 * (t - 1) as f64 * i as f64 / 99.0;
        let eta_star = (k * k) as f64 * alpha.powi(3) / (mf.powi(3) * a_bar)
            * ((mf.ln() + 2.0 * (mf / alpha).ln() * tv) / (2.0 * t as f64)).sqrt();
        assert!(
            grid.rates()
                .iter()
                .any(|&r| r <= eta_star * (1.0 + 1e-12) && eta_star <= 2.0 * r * (1.0 + 1e-12)),
            "tv={tv}"
        );
    }
}

#[test]
fn meta_init_sums_to_one() {
    for e in 1..=50 {
        let theta = meta_init(e);
        assert_eq!(theta.len(), e);
        assert!((theta.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let floor = 1.0 / (e * e) as f64;
        assert!(theta.iter().all(|&w| w >= floor * (1.0 - 1e-12)));
    }
}

#[test]
fn ensemble_weights_stay_normalized() {
    let mut rng = RngStream::new(42);
    let c = FloorConstraint::new(0.3, 12).unwrap();
    let mut ens = EnsembleState::for_horizon(c, 3, 1.0, 10_000, SimplexPoint::uniform(12)).unwrap();
    for _ in 0..10_000 {
        let fb = random_feedback(&ens, 3, &mut rng);
        ens.step(&fb).unwrap();
        let theta = ens.theta();
        assert!(theta.iter().all(|w| w.is_finite() && *w >= 0.0));
        assert!((theta.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(c.contains(ens.aggregated()));
        for i in 0..12 {
            let lo = ens
                .experts()
                .iter()
                .map(|e| e.current()[i])
                .fold(f64::INFINITY, f64::min);
            let hi = ens.experts().iter().map(|e| e.current()[i]).fold(0.0, f64::max);
            let v = ens.aggregated()[i];
            assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }
}

#[test]
fn single_expert_matches_osmd() {
    let mut rng = RngStream::new(43);
    let c = FloorConstraint::new(0.2, 6).unwrap();
    let eta = 3e-3;
    let grid = ExpertGrid::from_rates(vec![eta]).unwrap();
    let mut ens = EnsembleState::new(&grid, 0.5, c, SimplexPoint::uniform(6)).unwrap();
    let mut osmd = OsmdState::new(c, RateSchedule::constant(eta).unwrap());
    for _ in 0..2_000 {
        let fb = random_feedback(&osmd, 2, &mut rng);
        ens.step(&fb).unwrap();
        osmd.step(&fb).unwrap();
        assert!(max_abs_diff(ens.aggregated().probs(), osmd.current().probs()) <= 1e-12);
    }
}

#[test]
fn single_block_doubling_matches_ensemble() {
    let mut rng = RngStream::new(44);
    let (m, k, a_bar, horizon) = (20, 4, 0.5, 300);
    let c = FloorConstraint::new(0.4, m).unwrap();
    let mut plain = EnsembleState::for_horizon(c, k, a_bar, horizon, SimplexPoint::uniform(m)).unwrap();
    let mut wrapped = DoublingState::new(c, k, a_bar, true, BlockSchedule::Single { horizon }).unwrap();
    for _ in 0..horizon {
        assert_eq!(plain.aggregated(), wrapped.aggregated());
        let fb = random_feedback(&plain, k, &mut rng);
        plain.step(&fb).unwrap();
        wrapped.step(&fb).unwrap();
    }
    assert_eq!(plain.aggregated(), wrapped.aggregated());
    assert_eq!(plain.theta(), wrapped.inner().theta());
}

#[test]
fn doubling_restarts_stay_feasible() {
    let mut rng = RngStream::new(45);
    let c = FloorConstraint::new(0.4, 10).unwrap();
    for warm in [true, false] {
        let mut s = DoublingState::new(c, 3, 1.0, warm, BlockSchedule::Doubling).unwrap();
        for t in 1..=600usize {
            assert_eq!(s.round(), t);
            assert_eq!(s.block(), usize::BITS - t.leading_zeros());
            let fb = random_feedback(&s, 3, &mut rng);
            s.step(&fb).unwrap();
            assert!(c.contains(s.aggregated()));
        }
    }
}

#[test]
fn selection_helpers_agree() {
    let sel = Selection::new(vec![2, 0, 2]);
    assert_eq!(sel.multiplicities(), vec![(0, 1), (2, 2)]);
    let fb = BanditFeedback::observe(&sel, |m| m as f64).unwrap();
    assert_eq!(fb.k(), 3);
    assert_eq!(fb.max_value(), 2.0);
}
