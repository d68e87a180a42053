use declinesim::dispatch::{self, spillover_closed, Group, IdlePool};
use declinesim::engine::{self, MarketState, RunOptions};
use declinesim::rng::rng_from_seed;
use declinesim::{analytics, OrderResolution, RawParams, Resolver};
use proptest::prelude::*;

/// Expected spill by direct enumeration of the offer chain: each offer hits a
/// participant with probability q, who declines below the threshold.
fn chain_spill(q: f64, z_max: u32, delta: f64) -> f64 {
    let mut reach = 1.0; // P(first z offers all declined)
    let mut np_mass = 0.0;
    let mut np_spill = 0.0;
    for z in 0..=z_max {
        let hit_np = reach * (1.0 - q);
        np_mass += hit_np;
        np_spill += hit_np * z as f64 * delta;
        reach *= q;
    }
    np_spill / np_mass
}

fn params_with(tau_cents: i64, r_cents: i64, delta_cents: i64) -> RawParams {
    RawParams {
        threshold: tau_cents as f64 / 100.0,
        base_pay: r_cents as f64 / 100.0,
        increment: delta_cents as f64 / 100.0,
        ..RawParams::default()
    }
}

proptest! {
    #[test]
    fn closed_form_matches_chain(qi in 1u32..100, z in 1u32..60) {
        let q = qi as f64 / 100.0;
        let closed = spillover_closed(q, z, 0.25).unwrap();
        let oracle = chain_spill(q, z, 0.25);
        prop_assert!((closed - oracle).abs() < 1e-10, "q={q} z={z}: {closed} vs {oracle}");
    }

    #[test]
    fn spillover_strictly_inside_escalation_range(q in 0.001f64..0.999, z in 1u32..60) {
        let r = spillover_closed(q, z, 0.25).unwrap();
        prop_assert!(r > 0.0);
        prop_assert!(r < z as f64 * 0.25);
    }

    #[test]
    fn spillover_increases_with_participant_share(q in 0.01f64..0.97, z in 1u32..40) {
        let lo = spillover_closed(q, z, 0.25).unwrap();
        let hi = spillover_closed(q + 0.02, z, 0.25).unwrap();
        prop_assert!(hi > lo);
    }

    #[test]
    fn leaf_masses_sum_to_one(q in 0.0f64..1.0, z in 0u32..40) {
        let beta = dispatch::beta(q, z);
        let np: f64 = (0..=z).map(|j| q.powi(j as i32) * (1.0 - q)).sum();
        prop_assert!((beta + np - 1.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_is_reached_after_max_declines(
        r in 1i64..800, delta in 1i64..100, z in 0u32..40
    ) {
        let tau = r + delta * z as i64;
        let p = params_with(tau, r, delta).validate().unwrap();
        prop_assert_eq!(p.max_declines(), z);
        prop_assert_eq!(p.pay_after(p.max_declines()), p.threshold());
        let d = p.max_declines() as i64 * p.increment().0 + p.base_pay().0;
        prop_assert_eq!(d, p.threshold().0);
    }

    #[test]
    fn ladder_gap_must_be_a_multiple(r in 100i64..500, delta in 2i64..50, z in 1i64..20, off in 1i64..50) {
        prop_assume!(off % delta != 0);
        let tau = r + delta * z + off;
        prop_assert!(params_with(tau, r, delta).validate().is_err());
    }

    #[test]
    fn run_accounting_identities(
        workers in 2u32..80,
        frac in 0.0f64..=1.0,
        k in 1u32..80,
        seed in any::<u64>(),
        resolver in prop_oneof![Just(Resolver::Sampled), Just(Resolver::Iterative)],
    ) {
        let p = RawParams::default()
            .with_workers(workers)
            .with_alpha(frac)
            .with_locality(k.min(workers))
            .with_seed(seed)
            .validate()
            .unwrap();
        let options = RunOptions { warmup: Some(40), horizon: 600, resolver };
        let m = engine::run(&p, &options).unwrap();
        prop_assert_eq!(m.steps, 600);
        prop_assert_eq!(m.accepted_participant + m.accepted_non_participant + m.lost, m.steps);
        prop_assert_eq!(m.decline_hist.iter().sum::<u64>(), m.delivered());
        if p.participants() == 0 {
            prop_assert_eq!(m.accepted_participant, 0);
            prop_assert_eq!(m.spill_cents, 0);
        }

        let u = engine::utilities(&m, &p).unwrap();
        prop_assert!((u.gain - (u.u_average - u.u_base)).abs() < 1e-12);
        let nf = p.workers() as f64;
        let total = p.participants() as f64 * u.u_participant.unwrap_or(0.0)
            + p.non_participants() as f64 * u.u_non_participant.unwrap_or(0.0);
        prop_assert!((total - nf * u.u_average).abs() < 1e-9 * nf.max(1.0) * 10.0);
        if let (Some(d), Some(a)) = (u.u_participant, u.u_non_participant) {
            prop_assert!((u.benefit.unwrap() - (d - a)).abs() < 1e-12);
            prop_assert!((u.freeriding.unwrap() - (a - u.u_base)).abs() < 1e-12);
        }
        prop_assert!(u.lost_fraction >= 0.0 && u.lost_fraction <= 1.0);
    }

    #[test]
    fn participants_only_accept_at_threshold(
        workers in 2u32..60, frac in 0.05f64..0.95, seed in any::<u64>()
    ) {
        let p = RawParams::default()
            .with_workers(workers)
            .with_alpha(frac)
            .with_seed(seed)
            .validate()
            .unwrap();
        let mut state = MarketState::new(&p);
        let mut rng = rng_from_seed(seed);
        for _ in 0..300 {
            let out = state.step(&p, Resolver::Iterative, &mut rng);
            if let OrderResolution::Accepted(a) = out.resolution {
                prop_assert!(a.pay <= p.threshold());
                if a.group == Group::Participant {
                    prop_assert_eq!(a.pay, p.threshold());
                }
                prop_assert_eq!(state.group(a.worker), a.group);
            }
        }
    }

    #[test]
    fn undersupply_gain_matches_closed_form(
        workers in 2u32..=30, frac in 0.0f64..=1.0, seed in any::<u64>()
    ) {
        let p = RawParams::default()
            .with_workers(workers)
            .with_alpha(frac)
            .with_seed(seed)
            .validate()
            .unwrap();
        let closed = analytics::undersupply_report(&p).unwrap();
        // A horizon that is a whole number of busy periods removes the window effect.
        let options = RunOptions { warmup: Some(150), horizon: 30 * 200, resolver: Resolver::Sampled };
        let u = engine::simulate(&p, &options).unwrap();
        prop_assert!((u.gain - closed.gain).abs() < 1e-9);
        prop_assert_eq!(u.spillover_per_step, 0.0);
    }

    #[test]
    fn gamma_bounds_well_formed(workers in 1u32..200, frac in 0.0f64..=1.0) {
        let p = RawParams::default().with_workers(workers).with_alpha(frac).validate().unwrap();
        let g = analytics::gamma_bounds(&p);
        prop_assert!(0.0 <= g.lower && g.lower <= g.upper && g.upper <= 1.0);
    }

    #[test]
    fn shift_degree_never_rises(workers in 2u32..200, frac in 0.05f64..=1.0) {
        let p = RawParams::default().with_workers(workers).with_alpha(frac).validate().unwrap();
        let mut last = f64::INFINITY;
        for s in 1..=6 {
            if let Ok(plan) = analytics::shift_plan(&p, s) {
                prop_assert!(plan.degree <= last);
                prop_assert!(plan.participants <= plan.workers);
                last = plan.degree;
            }
        }
    }
}

fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn locality_sample_is_hypergeometric() {
    let p = RawParams::default()
        .with_workers(40)
        .with_participants(16)
        .with_locality(10)
        .validate()
        .unwrap();
    let draws = 40_000;
    let mut counts = [0u64; 11];
    let mut rng = rng_from_seed(99);
    for _ in 0..draws {
        let mut state = MarketState::new(&p);
        let out = state.step(&p, Resolver::Sampled, &mut rng);
        assert_eq!(out.offered.total(), 10);
        counts[out.offered.participants as usize] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        let j = j as u64;
        let pmf = choose(16, j) * choose(24, 10 - j) / choose(40, 10);
        let got = c as f64 / draws as f64;
        let se = (pmf * (1.0 - pmf) / draws as f64).sqrt();
        assert!((got - pmf).abs() < 4.0 * se + 1e-4, "j={j}: {got} vs {pmf}");
    }
}

#[test]
fn realized_spill_tracks_its_expectation() {
    for (workers, alpha) in [(45, 0.3), (60, 0.5), (90, 0.9)] {
        let p = RawParams::default()
            .with_workers(workers)
            .with_alpha(alpha)
            .with_seed(5)
            .validate()
            .unwrap();
        let m = engine::run(
            &p,
            &RunOptions {
                horizon: 200_000,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let rel = (m.spill_cents as f64 - m.expected_spill_cents).abs() / m.expected_spill_cents;
        assert!(rel < 0.03, "N={workers} alpha={alpha}: rel {rel}");
        let rel = (m.accepted_participant as f64 - m.expected_participant_orders).abs()
            / m.expected_participant_orders;
        assert!(
            rel < 0.03,
            "N={workers} alpha={alpha}: participant rel {rel}"
        );
    }
}

#[test]
fn oversupplied_pool_never_loses_orders() {
    let p = RawParams::default()
        .with_workers(31)
        .with_alpha(0.5)
        .validate()
        .unwrap();
    let m = engine::run(&p, &RunOptions::default()).unwrap();
    assert_eq!(m.lost, 0);
}

#[test]
fn empty_pool_is_lost_for_both_resolvers() {
    let p = RawParams::default().validate().unwrap();
    let pool = IdlePool::new(&[], &[]);
    let mut rng = rng_from_seed(1);
    for r in [Resolver::Sampled, Resolver::Iterative] {
        assert!(dispatch::resolve(r, &pool, &p, &mut rng).is_lost());
    }
}
