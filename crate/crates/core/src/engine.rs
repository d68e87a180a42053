//! The time loop: one order per step, busy clocks, lost orders, locality
//! sampling, and the ledger from which utilities are estimated.
//!
//! Workers `0..M` are participants and `M..N` are not. At every step,
//! workers whose busy clock has run out rejoin the idle pool before the
//! order arrives, so a worker who accepts at `t` is offered the order at
//! `t + b`.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::analytics;
use crate::dispatch::{self, Group, IdlePool, OrderResolution, Resolver, WorkerId};
use crate::params::ModelParams;
use crate::rng::rng_from_seed;

pub const DEFAULT_HORIZON: u64 = 10_000;
pub const WARMUP_BUSY_MULTIPLE: u64 = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("measurement horizon must be at least one step")]
    EmptyHorizon,
    #[error("metrics cover {metrics} workers but parameters describe {params}")]
    MismatchedParams { metrics: u32, params: u32 },
}

/// Composition of the pool an order was actually offered to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolCounts {
    pub participants: u32,
    pub non_participants: u32,
}

impl PoolCounts {
    pub fn total(&self) -> u32 {
        self.participants + self.non_participants
    }

    pub fn participant_share(&self) -> Option<f64> {
        (self.total() > 0).then(|| self.participants as f64 / self.total() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub t: u64,
    pub resolution: OrderResolution,
    pub offered: PoolCounts,
    pub idle: PoolCounts,
}

/// Per-worker busy clocks and the derived idle pool.
#[derive(Debug, Clone)]
pub struct MarketState {
    t: u64,
    busy_until: Vec<u64>,
    groups: Vec<Group>,
    idle_participants: Vec<WorkerId>,
    idle_non_participants: Vec<WorkerId>,
    // Position of each idle worker inside its idle list.
    slot: Vec<usize>,
    releases: BinaryHeap<Reverse<(u64, WorkerId)>>,
    sample_participants: Vec<WorkerId>,
    sample_non_participants: Vec<WorkerId>,
}

impl MarketState {
    /// Everyone idle at `t = 0`.
    pub fn new(params: &ModelParams) -> Self {
        Self::with_clocks(params, 0, vec![0; params.workers() as usize])
    }

    /// State at step `t` with explicit release steps; a worker is idle iff
    /// `busy_until[w] <= t`.
    pub fn with_clocks(params: &ModelParams, t: u64, busy_until: Vec<u64>) -> Self {
        assert_eq!(busy_until.len(), params.workers() as usize);
        let m = params.participants();
        let groups = (0..params.workers())
            .map(|w| {
                if w < m {
                    Group::Participant
                } else {
                    Group::NonParticipant
                }
            })
            .collect();
        let mut state = MarketState {
            t,
            busy_until,
            groups,
            idle_participants: Vec::new(),
            idle_non_participants: Vec::new(),
            slot: vec![usize::MAX; params.workers() as usize],
            releases: BinaryHeap::new(),
            sample_participants: Vec::new(),
            sample_non_participants: Vec::new(),
        };
        for w in 0..params.workers() {
            let until = state.busy_until[w as usize];
            if until <= t {
                state.mark_idle(w);
            } else {
                state.releases.push(Reverse((until, w)));
            }
        }
        state
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn busy_until(&self) -> &[u64] {
        &self.busy_until
    }

    pub fn group(&self, worker: WorkerId) -> Group {
        self.groups[worker as usize]
    }

    /// Idle workers as of the last release pass.
    pub fn idle(&self) -> IdlePool<'_> {
        IdlePool::new(&self.idle_participants, &self.idle_non_participants)
    }

    fn mark_idle(&mut self, w: WorkerId) {
        let list = match self.groups[w as usize] {
            Group::Participant => &mut self.idle_participants,
            Group::NonParticipant => &mut self.idle_non_participants,
        };
        self.slot[w as usize] = list.len();
        list.push(w);
    }

    fn mark_busy(&mut self, w: WorkerId, until: u64) {
        let list = match self.groups[w as usize] {
            Group::Participant => &mut self.idle_participants,
            Group::NonParticipant => &mut self.idle_non_participants,
        };
        let at = self.slot[w as usize];
        list.swap_remove(at);
        if let Some(&moved) = list.get(at) {
            self.slot[moved as usize] = at;
        }
        self.slot[w as usize] = usize::MAX;
        self.busy_until[w as usize] = until;
        self.releases.push(Reverse((until, w)));
    }

    fn release_due(&mut self) {
        while let Some(&Reverse((until, w))) = self.releases.peek() {
            if until > self.t {
                break;
            }
            self.releases.pop();
            self.mark_idle(w);
        }
    }

    fn idle_counts(&self) -> PoolCounts {
        PoolCounts {
            participants: self.idle_participants.len() as u32,
            non_participants: self.idle_non_participants.len() as u32,
        }
    }

    /// Processes the order arriving at the current step and advances time.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &ModelParams,
        resolver: Resolver,
        rng: &mut R,
    ) -> StepOutcome {
        self.release_due();
        let t = self.t;
        let idle = self.idle_counts();
        let available = idle.total() as usize;
        let k = params.locality() as usize;

        let (resolution, offered) = if available == 0 {
            (OrderResolution::Lost, PoolCounts::default())
        } else if k >= available {
            let pool = IdlePool::new(&self.idle_participants, &self.idle_non_participants);
            (dispatch::resolve(resolver, &pool, params, rng), idle)
        } else {
            self.sample_participants.clear();
            self.sample_non_participants.clear();
            let d = self.idle_participants.len();
            for i in index::sample(rng, available, k) {
                if i < d {
                    self.sample_participants.push(self.idle_participants[i]);
                } else {
                    self.sample_non_participants
                        .push(self.idle_non_participants[i - d]);
                }
            }
            let pool = IdlePool::new(&self.sample_participants, &self.sample_non_participants);
            let offered = PoolCounts {
                participants: self.sample_participants.len() as u32,
                non_participants: self.sample_non_participants.len() as u32,
            };
            (dispatch::resolve(resolver, &pool, params, rng), offered)
        };

        if let Some(accepted) = resolution.acceptance() {
            self.mark_busy(accepted.worker, t + params.busy_steps() as u64);
        }
        self.t += 1;
        StepOutcome {
            t,
            resolution,
            offered,
            idle,
        }
    }
}

/// Windowed accumulators for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub workers: u32,
    /// T
    pub steps: u64,
    pub accepted_participant: u64,
    pub accepted_non_participant: u64,
    pub lost: u64,
    /// Sum of z·delta over non-participant acceptances.
    pub spill_cents: i64,
    /// Count of acceptances by decline count z = 0..=Z.
    pub decline_hist: Vec<u64>,
    /// Sum over steps of `q_t^(Z+1)` for steps with an offer.
    pub expected_participant_orders: f64,
    /// Sum over steps of `(1 - beta_t) R_t`, in cents.
    pub expected_spill_cents: f64,
}

impl Metrics {
    pub fn new(params: &ModelParams) -> Self {
        Metrics {
            workers: params.workers(),
            steps: 0,
            accepted_participant: 0,
            accepted_non_participant: 0,
            lost: 0,
            spill_cents: 0,
            decline_hist: vec![0; params.max_declines() as usize + 1],
            expected_participant_orders: 0.0,
            expected_spill_cents: 0.0,
        }
    }

    pub fn record(&mut self, outcome: &StepOutcome, params: &ModelParams) {
        self.steps += 1;
        match outcome.resolution {
            OrderResolution::Lost => self.lost += 1,
            OrderResolution::Accepted(a) => {
                self.decline_hist[a.declines as usize] += 1;
                match a.group {
                    Group::Participant => self.accepted_participant += 1,
                    Group::NonParticipant => {
                        self.accepted_non_participant += 1;
                        self.spill_cents += a.declines as i64 * params.increment().0;
                    }
                }
            }
        }
        if let Some(q) = outcome.offered.participant_share() {
            let z = params.max_declines();
            let b = dispatch::beta(q, z);
            self.expected_participant_orders += b;
            if q < 1.0 {
                let r_t =
                    dispatch::spillover_closed(q, z, params.increment().0 as f64).expect("q < 1");
                self.expected_spill_cents += (1.0 - b) * r_t;
            }
        }
    }

    pub fn delivered(&self) -> u64 {
        self.accepted_participant + self.accepted_non_participant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// `None` means five busy periods.
    pub warmup: Option<u64>,
    pub horizon: u64,
    pub resolver: Resolver,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            warmup: None,
            horizon: DEFAULT_HORIZON,
            resolver: Resolver::default(),
        }
    }
}

impl RunOptions {
    pub fn warmup_for(&self, params: &ModelParams) -> u64 {
        self.warmup
            .unwrap_or(WARMUP_BUSY_MULTIPLE * params.busy_steps() as u64)
    }
}

/// One run seeded from `params.seed()`.
pub fn run(params: &ModelParams, options: &RunOptions) -> Result<Metrics, EngineError> {
    let mut rng = rng_from_seed(params.seed());
    run_with_rng(params, options, &mut rng)
}

pub fn run_with_rng<R: Rng + ?Sized>(
    params: &ModelParams,
    options: &RunOptions,
    rng: &mut R,
) -> Result<Metrics, EngineError> {
    if options.horizon == 0 {
        return Err(EngineError::EmptyHorizon);
    }
    let mut state = MarketState::new(params);
    for _ in 0..options.warmup_for(params) {
        state.step(params, options.resolver, rng);
    }
    let mut metrics = Metrics::new(params);
    for _ in 0..options.horizon {
        let outcome = state.step(params, options.resolver, rng);
        metrics.record(&outcome, params);
    }
    Ok(metrics)
}

/// Hourly utilities and derived gaps, in dollars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityReport {
    /// u^D; absent without participants.
    pub u_participant: Option<f64>,
    /// u^A; absent without non-participants.
    pub u_non_participant: Option<f64>,
    pub u_average: f64,
    pub u_base: f64,
    /// G = u - u_base
    pub gain: f64,
    /// F = u^A - u_base
    pub freeriding: Option<f64>,
    /// B = u^D - u^A
    pub benefit: Option<f64>,
    /// gamma_D, share of delivered orders taken by participants.
    pub participant_order_share: Option<f64>,
    /// Realized spillover dollars per step (estimates R).
    pub spillover_per_step: f64,
    /// Participant acceptances per step (estimates E[beta_t I_t]).
    pub participant_accept_rate: f64,
    pub lost_fraction: f64,
}

/// How non-participant order volume enters u^A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NonParticipantVolume {
    /// Orders actually accepted by non-participants.
    #[default]
    Realized,
    /// `n (1 - E[beta_t I_t])`, which also credits lost orders to
    /// non-participants. Diagnostic only.
    ComplementOfParticipantShare,
}

pub fn utilities(metrics: &Metrics, params: &ModelParams) -> Result<UtilityReport, EngineError> {
    utilities_with(metrics, params, NonParticipantVolume::Realized)
}

pub fn utilities_with(
    metrics: &Metrics,
    params: &ModelParams,
    volume: NonParticipantVolume,
) -> Result<UtilityReport, EngineError> {
    if metrics.steps == 0 {
        return Err(EngineError::EmptyHorizon);
    }
    if metrics.workers != params.workers() {
        return Err(EngineError::MismatchedParams {
            metrics: metrics.workers,
            params: params.workers(),
        });
    }
    let n = params.orders_per_hour() as f64;
    let steps = metrics.steps as f64;
    let m = params.participants();
    let others = params.non_participants();
    let cost = params.cost_per_order_cents();
    let margin_participant = params.threshold().0 as f64 - cost;
    let margin_base = params.base_pay().0 as f64 - cost;
    let spill = metrics.spill_cents as f64;
    let acc_d = metrics.accepted_participant as f64;
    let acc_a = match volume {
        NonParticipantVolume::Realized => metrics.accepted_non_participant as f64,
        NonParticipantVolume::ComplementOfParticipantShare => {
            steps - metrics.expected_participant_orders
        }
    };

    let u_participant =
        (m > 0).then(|| margin_participant * acc_d * n / (steps * m as f64) / 100.0);
    let u_non_participant =
        (others > 0).then(|| (margin_base * acc_a + spill) * n / (steps * others as f64) / 100.0);
    let u_average = match volume {
        NonParticipantVolume::Realized => {
            (margin_participant * acc_d + margin_base * acc_a + spill) * n
                / (steps * params.workers() as f64)
                / 100.0
        }
        NonParticipantVolume::ComplementOfParticipantShare => {
            let alpha = params.alpha();
            alpha * u_participant.unwrap_or(0.0) + (1.0 - alpha) * u_non_participant.unwrap_or(0.0)
        }
    };
    let u_base = analytics::base_utility(params);
    let delivered = metrics.delivered();

    Ok(UtilityReport {
        u_participant,
        u_non_participant,
        u_average,
        u_base,
        gain: u_average - u_base,
        freeriding: u_non_participant.map(|u| u - u_base),
        benefit: u_participant.zip(u_non_participant).map(|(d, a)| d - a),
        participant_order_share: (delivered > 0)
            .then(|| metrics.accepted_participant as f64 / delivered as f64),
        spillover_per_step: spill / steps / 100.0,
        participant_accept_rate: acc_d / steps,
        lost_fraction: metrics.lost as f64 / steps,
    })
}

/// Runs and summarizes in one call.
pub fn simulate(params: &ModelParams, options: &RunOptions) -> Result<UtilityReport, EngineError> {
    utilities(&run(params, options)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::RawParams;
    use crate::rng::rng_from_seed;

    fn market(workers: u32, participants: u32) -> ModelParams {
        RawParams::default()
            .with_workers(workers)
            .with_participants(participants)
            .validate()
            .unwrap()
    }

    #[test]
    fn all_busy_loses_order() {
        let params = market(3, 1);
        let mut state = MarketState::with_clocks(&params, 5, vec![9, 7, 30]);
        let before = state.busy_until().to_vec();
        let mut rng = rng_from_seed(1);
        let out = state.step(&params, Resolver::Sampled, &mut rng);
        assert!(out.resolution.is_lost());
        assert_eq!(out.offered.total(), 0);
        assert_eq!(state.busy_until(), &before[..]);
        assert_eq!(state.t(), 6);
    }

    #[test]
    fn lone_participant_takes_threshold() {
        let params = market(1, 1);
        let mut state = MarketState::new(&params);
        let mut rng = rng_from_seed(2);
        for resolver in [Resolver::Iterative, Resolver::Sampled] {
            let mut state2 = state.clone();
            let out = state2.step(&params, resolver, &mut rng);
            let a = out.resolution.acceptance().unwrap();
            assert_eq!(a.group, Group::Participant);
            assert_eq!(a.pay, params.threshold());
        }
        state.step(&params, Resolver::Sampled, &mut rng);
        assert_eq!(state.busy_until()[0], 30);
    }

    #[test]
    fn acceptor_returns_exactly_b_steps_later() {
        let params = market(1, 0);
        let mut state = MarketState::new(&params);
        let mut rng = rng_from_seed(3);
        let mut accepted_at = Vec::new();
        for _ in 0..100 {
            let out = state.step(&params, Resolver::Sampled, &mut rng);
            if !out.resolution.is_lost() {
                accepted_at.push(out.t);
            }
        }
        assert_eq!(accepted_at, vec![0, 30, 60, 90]);
    }

    #[test]
    fn locality_sample_size_is_exact() {
        let params = market(40, 16).with_locality(10).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let mut state = MarketState::new(&params);
            let out = state.step(&params, Resolver::Sampled, &mut rng);
            assert_eq!(out.offered.total(), 10);
            assert_eq!(out.idle.total(), 40);
        }
    }

    #[test]
    fn no_participants_means_base_pay_only() {
        let params = market(60, 0);
        let metrics = run(&params, &RunOptions::default()).unwrap();
        assert_eq!(metrics.accepted_participant, 0);
        assert_eq!(metrics.spill_cents, 0);
        assert_eq!(metrics.decline_hist[0], metrics.delivered());
    }

    #[test]
    fn identical_seeds_identical_metrics() {
        let params = market(45, 20).with_seed(99);
        let a = run(&params, &RunOptions::default()).unwrap();
        let b = run(&params, &RunOptions::default()).unwrap();
        assert_eq!(a, b);
        let c = run(&params.with_seed(100), &RunOptions::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_horizon_rejected() {
        let params = market(10, 3);
        let options = RunOptions {
            horizon: 0,
            ..RunOptions::default()
        };
        assert_eq!(run(&params, &options), Err(EngineError::EmptyHorizon));
    }

    #[test]
    fn undersupply_steady_state() {
        let params = market(25, 10);
        let horizon = 10_000u64;
        let m = run(
            &params,
            &RunOptions {
                horizon,
                ..RunOptions::default()
            },
        )
        .unwrap();
        let expected_lost = horizon as f64 * (1.0 - 25.0 / 30.0);
        assert!((m.lost as f64 - expected_lost).abs() <= 25.0);
        let expected_d = 10.0 / 30.0 * horizon as f64;
        assert!((m.accepted_participant as f64 - expected_d).abs() <= 25.0);
        assert_eq!(m.spill_cents, 0);
    }

    #[test]
    fn degenerate_groups_report_absent_utilities() {
        let params = market(20, 20);
        let m = run(&params, &RunOptions::default()).unwrap();
        let r = utilities(&m, &params).unwrap();
        assert!(r.u_non_participant.is_none());
        assert!(r.benefit.is_none());
        assert!(r.freeriding.is_none());
        assert_eq!(r.participant_order_share, Some(1.0));
        assert_eq!(Some(r.u_average), r.u_participant);

        let params = market(90, 0);
        let m = run(&params, &RunOptions::default()).unwrap();
        let r = utilities(&m, &params).unwrap();
        assert!(r.u_participant.is_none());
        // Oversupply without a collective: every order at base pay, shared
        // by all N workers, i.e. exactly the base utility.
        assert_eq!(m.lost, 0);
        assert!((r.u_non_participant.unwrap() - r.u_base).abs() < 1e-12);
        assert!(r.gain.abs() < 1e-12);
    }

    #[test]
    fn main_text_volume_credits_lost_orders() {
        let params = market(25, 10);
        let m = run(&params, &RunOptions::default()).unwrap();
        let realized = utilities(&m, &params).unwrap();
        let diag = utilities_with(
            &m,
            &params,
            NonParticipantVolume::ComplementOfParticipantShare,
        )
        .unwrap();
        // Lost orders (5 of every 30 steps) count as non-participant work in
        // the diagnostic, against 15 of 30 actually delivered.
        let ratio = diag.u_non_participant.unwrap() / realized.u_non_participant.unwrap();
        assert!((ratio - 20.0 / 15.0).abs() < 0.02, "{ratio}");
    }
}
