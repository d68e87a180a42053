//! Resolution of a single order against a frozen idle pool.
//!
//! An order starts at base pay and is offered to a uniformly drawn idle
//! worker. A non-participant takes it at whatever it pays. A participant
//! takes it only at the threshold; otherwise the pay goes up one increment
//! and the order is re-offered to the same pool, the decliner included.
//! With a fraction `q` of participants in the pool this is a chain of at most
//! `Z + 1` participant draws, which gives the closed forms below.

use rand::Rng;
use thiserror::Error;

use crate::params::{Cents, ModelParams};

pub type WorkerId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Participant,
    NonParticipant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("spillover is undefined for an all-participant pool (q = {0})")]
    AllParticipants(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("cannot resolve an order against an empty pool")]
    EmptyPool,
}

/// Idle workers competing for one order, split by group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdlePool<'a> {
    participants: &'a [WorkerId],
    non_participants: &'a [WorkerId],
}

impl<'a> IdlePool<'a> {
    pub fn new(participants: &'a [WorkerId], non_participants: &'a [WorkerId]) -> Self {
        debug_assert!(participants.iter().all(|p| !non_participants.contains(p)));
        IdlePool {
            participants,
            non_participants,
        }
    }

    pub fn participants(&self) -> &'a [WorkerId] {
        self.participants
    }

    pub fn non_participants(&self) -> &'a [WorkerId] {
        self.non_participants
    }

    pub fn len(&self) -> usize {
        self.participants.len() + self.non_participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Participant share `q`; `None` for an empty pool.
    pub fn participant_share(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.participants.len() as f64 / self.len() as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Acceptance {
    pub worker: WorkerId,
    pub group: Group,
    /// Number of declines before acceptance, z.
    pub declines: u32,
    pub pay: Cents,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderResolution {
    /// No idle worker was on offer; the order is dropped.
    Lost,
    Accepted(Acceptance),
}

impl OrderResolution {
    pub fn acceptance(&self) -> Option<&Acceptance> {
        match self {
            OrderResolution::Lost => None,
            OrderResolution::Accepted(a) => Some(a),
        }
    }

    pub fn is_lost(&self) -> bool {
        matches!(self, OrderResolution::Lost)
    }
}

/// Which resolver the engine uses. Both produce the same outcome law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resolver {
    /// Walks the decline chain draw by draw.
    Iterative,
    /// Draws the leaf of the decline chain directly.
    #[default]
    Sampled,
}

/// Probability that a participant ends up with the order, `q^(Z+1)`.
pub fn beta(q: f64, max_declines: u32) -> f64 {
    q.powi(max_declines as i32 + 1)
}

fn check_spill_domain(q: f64) -> Result<(), DispatchError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(DispatchError::BadProbability(q));
    }
    if q >= 1.0 {
        return Err(DispatchError::AllParticipants(q));
    }
    Ok(())
}

/// Expected pay increase over base, conditional on a non-participant
/// accepting, in closed form. `increment` is in dollars and so is the result.
pub fn spillover_closed(q: f64, max_declines: u32, increment: f64) -> Result<f64, DispatchError> {
    check_spill_domain(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let z = max_declines as i32;
    let zf = max_declines as f64;
    let numerator = zf * q.powi(z + 1) - (zf + 1.0) * q.powi(z) + 1.0;
    let denominator = (1.0 - q) * (1.0 - q.powi(z + 1));
    Ok(increment * q * numerator / denominator)
}

/// Same quantity as [`spillover_closed`], summed term by term over the
/// truncated geometric law of the decline count.
pub fn spillover_sum(q: f64, max_declines: u32, increment: f64) -> Result<f64, DispatchError> {
    check_spill_domain(q)?;
    if q == 0.0 {
        return Ok(0.0);
    }
    let norm = 1.0 - q.powi(max_declines as i32 + 1);
    let mut total = 0.0;
    let mut q_pow = 1.0;
    for z in 0..=max_declines {
        total += z as f64 * increment * q_pow * (1.0 - q) / norm;
        q_pow *= q;
    }
    Ok(total)
}

fn pick<R: Rng + ?Sized>(ids: &[WorkerId], rng: &mut R) -> WorkerId {
    ids[rng.random_range(0..ids.len())]
}

/// Simulates the offer chain one draw at a time.
pub fn resolve_iterative<R: Rng + ?Sized>(
    pool: &IdlePool<'_>,
    params: &ModelParams,
    rng: &mut R,
) -> OrderResolution {
    if pool.is_empty() {
        return OrderResolution::Lost;
    }
    let n_part = pool.participants.len();
    let mut declines = 0u32;
    loop {
        let pay = params.pay_after(declines);
        let slot = rng.random_range(0..pool.len());
        if slot >= n_part {
            return OrderResolution::Accepted(Acceptance {
                worker: pool.non_participants[slot - n_part],
                group: Group::NonParticipant,
                declines,
                pay,
            });
        }
        if pay >= params.threshold() {
            return OrderResolution::Accepted(Acceptance {
                worker: pool.participants[slot],
                group: Group::Participant,
                declines,
                pay,
            });
        }
        declines += 1;
    }
}

/// Draws the outcome of the offer chain in one step from its leaf law:
/// a participant at the threshold with probability `q^(Z+1)`, otherwise a
/// non-participant after `z` declines with probability proportional to
/// `q^z (1 - q)`.
pub fn resolve_sampled<R: Rng + ?Sized>(
    pool: &IdlePool<'_>,
    params: &ModelParams,
    rng: &mut R,
) -> Result<OrderResolution, DispatchError> {
    let q = pool.participant_share().ok_or(DispatchError::EmptyPool)?;
    let max_declines = params.max_declines();
    let to_participant = beta(q, max_declines);
    let u: f64 = rng.random();
    if u < to_participant {
        return Ok(OrderResolution::Accepted(Acceptance {
            worker: pick(pool.participants, rng),
            group: Group::Participant,
            declines: max_declines,
            pay: params.threshold(),
        }));
    }
    let declines = if q == 0.0 {
        0
    } else {
        // Inverse CDF of the truncated geometric on {0..Z}:
        // P(z >= j) = (q^j - q^(Z+1)) / (1 - q^(Z+1)).
        let v = (u - to_participant) / (1.0 - to_participant);
        let w = 1.0 - v * (1.0 - to_participant);
        ((w.ln() / q.ln()).floor() as u32).min(max_declines)
    };
    Ok(OrderResolution::Accepted(Acceptance {
        worker: pick(pool.non_participants, rng),
        group: Group::NonParticipant,
        declines,
        pay: params.pay_after(declines),
    }))
}

/// Dispatches to the chosen resolver.
pub fn resolve<R: Rng + ?Sized>(
    resolver: Resolver,
    pool: &IdlePool<'_>,
    params: &ModelParams,
    rng: &mut R,
) -> OrderResolution {
    match resolver {
        Resolver::Iterative => resolve_iterative(pool, params, rng),
        Resolver::Sampled => resolve_sampled(pool, params, rng).unwrap_or(OrderResolution::Lost),
    }
}
