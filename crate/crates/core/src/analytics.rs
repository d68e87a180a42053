//! Closed forms: the no-strategy baseline, the undersupply regime, bounds on
//! the participant order share, the participation threshold, and shift
//! arithmetic.

use thiserror::Error;

use crate::engine::UtilityReport;
use crate::params::{ModelParams, ParamError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("closed forms require undersupply (N <= b), got N = {workers}, b = {busy}")]
    NotUndersupplied { workers: u32, busy: u32 },
    #[error("the participation threshold is undefined when everyone participates")]
    EveryoneParticipates,
    #[error("the participation threshold assumes base pay exceeds the cost per order")]
    BasePayBelowCost,
    #[error("spillover must be finite and non-negative, got {0}")]
    BadSpillover(f64),
    #[error("number of shifts must be at least 1")]
    NoShifts,
    #[error("{shifts} shifts leave no participant active per shift (M = {participants})")]
    InfeasibleShifts { shifts: u32, participants: u32 },
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Hourly income per worker without any strategy, in dollars.
///
/// In undersupply every worker delivers `n/b` orders an hour; past the
/// matching point the `n` hourly orders are shared by all `N` workers. Both
/// are `(r - c·m) · n / max(N, b)`.
pub fn base_utility(params: &ModelParams) -> f64 {
    let margin = params.base_pay().0 as f64 - params.cost_per_order_cents();
    let share = params.workers().max(params.busy_steps()) as f64;
    margin * params.orders_per_hour() as f64 / share / 100.0
}

/// Exact utilities in undersupply, where every worker is handed an order the
/// moment they become idle.
pub fn undersupply_report(params: &ModelParams) -> Result<UtilityReport, AnalyticsError> {
    if !params.is_undersupplied() {
        return Err(AnalyticsError::NotUndersupplied {
            workers: params.workers(),
            busy: params.busy_steps(),
        });
    }
    let n = params.orders_per_hour() as f64;
    let b = params.busy_steps() as f64;
    let rate = n / b;
    let cost = params.cost_per_order_cents();
    let tau = params.threshold().0 as f64;
    let r = params.base_pay().0 as f64;
    let alpha = params.alpha();

    let u_participant = (params.participants() > 0).then(|| rate * (tau - cost) / 100.0);
    let u_non_participant = (params.non_participants() > 0).then(|| rate * (r - cost) / 100.0);
    let u_base = base_utility(params);
    let gain = rate * alpha * (tau - r) / 100.0;
    let workers = params.workers() as f64;

    Ok(UtilityReport {
        u_participant,
        u_non_participant,
        u_average: u_base + gain,
        u_base,
        gain,
        freeriding: u_non_participant.map(|_| 0.0),
        benefit: u_participant
            .zip(u_non_participant)
            .map(|_| rate * (tau - r) / 100.0),
        participant_order_share: Some(alpha),
        spillover_per_step: 0.0,
        participant_accept_rate: params.participants() as f64 / b,
        lost_fraction: 1.0 - workers / b,
    })
}

/// Closed interval of admissible values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn widened(&self, by: f64) -> Interval {
        Interval {
            lower: self.lower - by,
            upper: self.upper + by,
        }
    }
}

/// Range of the participant share of delivered orders.
///
/// Exactly alpha in undersupply. In oversupply the share is at most alpha,
/// and at least the fraction of each busy period left over once all
/// non-participants have been served.
pub fn gamma_bounds(params: &ModelParams) -> Interval {
    let alpha = params.alpha();
    if params.is_undersupplied() {
        return Interval {
            lower: alpha,
            upper: alpha,
        };
    }
    Interval {
        lower: (1.0 - (1.0 - alpha) * params.degree()).max(0.0),
        upper: alpha,
    }
}

/// Degree of oversupply below which participation pays (`B > 0`), given the
/// per-step spillover `spillover` in dollars.
pub fn participation_bound(params: &ModelParams, spillover: f64) -> Result<f64, AnalyticsError> {
    let alpha = params.alpha();
    if params.non_participants() == 0 {
        return Err(AnalyticsError::EveryoneParticipates);
    }
    let cost = params.cost_per_order_cents() / 100.0;
    let r = params.base_pay().dollars();
    let tau = params.threshold().dollars();
    if r <= cost {
        return Err(AnalyticsError::BasePayBelowCost);
    }
    if !spillover.is_finite() || spillover < 0.0 {
        return Err(AnalyticsError::BadSpillover(spillover));
    }
    let weighted = (1.0 - alpha) * (tau - cost) + alpha * (r - cost);
    Ok((1.0 - alpha * (r + spillover - cost) / weighted) / (1.0 - alpha))
}

/// A collective split into `s` rotating shifts, as seen by one shift.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftPlan {
    pub shifts: u32,
    /// Active workers per shift: all non-participants plus one shift's worth
    /// of the collective.
    pub workers: u32,
    /// Active participants per shift.
    pub participants: u32,
    pub degree: f64,
    /// Participants as a share of the active pool.
    pub alpha_pool: f64,
    /// Participants per shift as a share of the full workforce.
    pub alpha_of_workforce: f64,
    /// Parameters of the per-shift market.
    pub params: ModelParams,
}

/// Splits the collective into `shifts` groups. Only one group works at a
/// time, alongside every non-participant.
pub fn shift_plan(params: &ModelParams, shifts: u32) -> Result<ShiftPlan, AnalyticsError> {
    if shifts == 0 {
        return Err(AnalyticsError::NoShifts);
    }
    let m = params.participants();
    // round(M / s), halves up.
    let per_shift = (2 * m + shifts) / (2 * shifts);
    if m >= 1 && per_shift == 0 {
        return Err(AnalyticsError::InfeasibleShifts {
            shifts,
            participants: m,
        });
    }
    let workers = params.non_participants() + per_shift;
    let shift_params = params.with_market(workers, per_shift)?;
    Ok(ShiftPlan {
        shifts,
        workers,
        participants: per_shift,
        degree: shift_params.degree(),
        alpha_pool: per_shift as f64 / workers as f64,
        alpha_of_workforce: per_shift as f64 / params.workers() as f64,
        params: shift_params,
    })
}
