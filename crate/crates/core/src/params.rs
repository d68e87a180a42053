//! Model parameters, validation, and derived quantities.
//!
//! Money is carried as integer cents so that "the pay ladder reaches the
//! threshold exactly" is an integer statement. Reports convert back to
//! dollars at the edge.

use std::fmt;

use thiserror::Error;

/// Dollar amount stored as whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cents(pub i64);

impl Cents {
    /// Converts a dollar amount with at most two decimals into cents.
    pub fn from_dollars(dollars: f64) -> Result<Self, ParamError> {
        if !dollars.is_finite() {
            return Err(ParamError::NotFinite(dollars));
        }
        let scaled = dollars * 100.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 {
            return Err(ParamError::SubCent(dollars));
        }
        Ok(Cents(rounded as i64))
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:02}", abs / 100, abs % 100)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be at least {min}, got {value}")]
    TooSmall {
        name: &'static str,
        min: u64,
        value: u64,
    },
    #[error("participant count {participants} exceeds worker count {workers}")]
    TooManyParticipants { participants: u32, workers: u32 },
    #[error("locality sample size {k} exceeds worker count {workers}")]
    LocalityTooLarge { k: u32, workers: u32 },
    #[error("participant fraction {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("participation not given: supply either a participant count or a fraction")]
    MissingParticipation,
    #[error("threshold {tau} is below base pay {base}")]
    ThresholdBelowBase { tau: Cents, base: Cents },
    #[error("pay increment must be positive, got {0}")]
    NonPositiveIncrement(Cents),
    #[error("negative base pay {0}")]
    NegativePay(Cents),
    #[error("(threshold - base) = {gap} is not a whole multiple of the increment {increment}")]
    LadderNotIntegral { gap: Cents, increment: Cents },
    #[error("{0} has more than two decimals; money is stored in whole cents")]
    SubCent(f64),
    #[error("value {0} is not finite")]
    NotFinite(f64),
    #[error("miles per order must be finite and non-negative, got {0}")]
    BadMiles(f64),
}

/// Non-fatal observations made during validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamWarning {
    /// Base pay does not cover the per-order driving cost. The participation
    /// threshold result assumes it does.
    BasePayBelowCost { base: Cents, cost_per_order: f64 },
}

impl fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamWarning::BasePayBelowCost {
                base,
                cost_per_order,
            } => write!(
                f,
                "base pay ${base} does not exceed cost per order ${cost_per_order:.2}"
            ),
        }
    }
}

/// How the size of the collective is specified before validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Participation {
    Count(u32),
    Fraction(f64),
}

/// Unvalidated parameter record, money in dollars.
#[derive(Debug, Clone, PartialEq)]
pub struct RawParams {
    pub workers: u32,
    pub participation: Option<Participation>,
    pub threshold: f64,
    pub base_pay: f64,
    pub increment: f64,
    pub busy_steps: u32,
    pub orders_per_hour: u32,
    pub cost_per_mile: f64,
    pub miles_per_order: f64,
    /// `None` means global assignment (k = N).
    pub locality: Option<u32>,
    pub seed: u64,
}

impl Default for RawParams {
    /// Reference instantiation: $7 threshold, $4 base pay, $0.25 steps,
    /// 30-step deliveries, 60 orders an hour, $0.60/mile over 6 miles.
    fn default() -> Self {
        RawParams {
            workers: 30,
            participation: Some(Participation::Fraction(0.5)),
            threshold: 7.0,
            base_pay: 4.0,
            increment: 0.25,
            busy_steps: 30,
            orders_per_hour: 60,
            cost_per_mile: 0.6,
            miles_per_order: 6.0,
            locality: None,
            seed: 1,
        }
    }
}

impl RawParams {
    pub fn with_workers(mut self, workers: u32) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.participation = Some(Participation::Fraction(alpha));
        self
    }

    pub fn with_participants(mut self, participants: u32) -> Self {
        self.participation = Some(Participation::Count(participants));
        self
    }

    pub fn with_locality(mut self, k: u32) -> Self {
        self.locality = Some(k);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<ModelParams, ParamError> {
        validate(self)
    }
}

/// Validated, immutable parameter set for one market.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    workers: u32,
    participants: u32,
    threshold: Cents,
    base_pay: Cents,
    increment: Cents,
    busy_steps: u32,
    orders_per_hour: u32,
    cost_per_mile: Cents,
    miles_per_order: f64,
    locality: u32,
    seed: u64,
}

/// Rounds a participant fraction to a head count, halves going up.
///
/// The small tolerance absorbs decimal fractions such as 0.3 that land a
/// hair below the half in binary.
pub fn participants_from_alpha(alpha: f64, workers: u32) -> u32 {
    (alpha * workers as f64 + 0.5 + 1e-9).floor() as u32
}

pub fn validate(raw: &RawParams) -> Result<ModelParams, ParamError> {
    let workers = raw.workers;
    if workers < 1 {
        return Err(ParamError::TooSmall {
            name: "worker count",
            min: 1,
            value: 0,
        });
    }
    if raw.busy_steps < 1 {
        return Err(ParamError::TooSmall {
            name: "busy duration",
            min: 1,
            value: 0,
        });
    }
    if raw.orders_per_hour < 1 {
        return Err(ParamError::TooSmall {
            name: "orders per hour",
            min: 1,
            value: 0,
        });
    }
    let participants = match raw.participation {
        None => return Err(ParamError::MissingParticipation),
        Some(Participation::Count(m)) => m,
        Some(Participation::Fraction(alpha)) => {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(ParamError::AlphaOutOfRange(alpha));
            }
            participants_from_alpha(alpha, workers)
        }
    };
    if participants > workers {
        return Err(ParamError::TooManyParticipants {
            participants,
            workers,
        });
    }
    let locality = raw.locality.unwrap_or(workers);
    if locality < 1 {
        return Err(ParamError::TooSmall {
            name: "locality sample size",
            min: 1,
            value: 0,
        });
    }
    if locality > workers {
        return Err(ParamError::LocalityTooLarge {
            k: locality,
            workers,
        });
    }

    let threshold = Cents::from_dollars(raw.threshold)?;
    let base_pay = Cents::from_dollars(raw.base_pay)?;
    let increment = Cents::from_dollars(raw.increment)?;
    let cost_per_mile = Cents::from_dollars(raw.cost_per_mile)?;
    if base_pay.0 < 0 {
        return Err(ParamError::NegativePay(base_pay));
    }
    if threshold < base_pay {
        return Err(ParamError::ThresholdBelowBase {
            tau: threshold,
            base: base_pay,
        });
    }
    if increment.0 <= 0 {
        return Err(ParamError::NonPositiveIncrement(increment));
    }
    let gap = threshold.0 - base_pay.0;
    if gap % increment.0 != 0 {
        return Err(ParamError::LadderNotIntegral {
            gap: Cents(gap),
            increment,
        });
    }
    if !raw.miles_per_order.is_finite() || raw.miles_per_order < 0.0 {
        return Err(ParamError::BadMiles(raw.miles_per_order));
    }

    Ok(ModelParams {
        workers,
        participants,
        threshold,
        base_pay,
        increment,
        busy_steps: raw.busy_steps,
        orders_per_hour: raw.orders_per_hour,
        cost_per_mile,
        miles_per_order: raw.miles_per_order,
        locality,
        seed: raw.seed,
    })
}

impl ModelParams {
    /// N
    pub fn workers(&self) -> u32 {
        self.workers
    }

    /// M
    pub fn participants(&self) -> u32 {
        self.participants
    }

    pub fn non_participants(&self) -> u32 {
        self.workers - self.participants
    }

    /// tau
    pub fn threshold(&self) -> Cents {
        self.threshold
    }

    /// r
    pub fn base_pay(&self) -> Cents {
        self.base_pay
    }

    /// delta
    pub fn increment(&self) -> Cents {
        self.increment
    }

    /// b
    pub fn busy_steps(&self) -> u32 {
        self.busy_steps
    }

    /// n; one time step lasts 1/n hour.
    pub fn orders_per_hour(&self) -> u32 {
        self.orders_per_hour
    }

    /// c
    pub fn cost_per_mile(&self) -> Cents {
        self.cost_per_mile
    }

    /// m
    pub fn miles_per_order(&self) -> f64 {
        self.miles_per_order
    }

    /// k; equals N under global assignment.
    pub fn locality(&self) -> u32 {
        self.locality
    }

    pub fn is_global(&self) -> bool {
        self.locality == self.workers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Realized participant fraction M/N.
    pub fn alpha(&self) -> f64 {
        self.participants as f64 / self.workers as f64
    }

    /// Z, the number of declines needed to lift base pay to the threshold.
    pub fn max_declines(&self) -> u32 {
        ((self.threshold.0 - self.base_pay.0) / self.increment.0) as u32
    }

    /// Pay after `declines` escalations.
    pub fn pay_after(&self, declines: u32) -> Cents {
        Cents(self.base_pay.0 + declines as i64 * self.increment.0)
    }

    /// c·m in cents (fractional when m is).
    pub fn cost_per_order_cents(&self) -> f64 {
        self.cost_per_mile.0 as f64 * self.miles_per_order
    }

    pub fn degree(&self) -> f64 {
        self.workers as f64 / self.busy_steps as f64
    }

    /// N ≤ b
    pub fn is_undersupplied(&self) -> bool {
        self.workers <= self.busy_steps
    }

    pub fn warnings(&self) -> Vec<ParamWarning> {
        let mut out = Vec::new();
        if self.base_pay.0 as f64 <= self.cost_per_order_cents() {
            out.push(ParamWarning::BasePayBelowCost {
                base: self.base_pay,
                cost_per_order: self.cost_per_order_cents() / 100.0,
            });
        }
        out
    }

    /// Copy with a different market size; locality follows N when global and
    /// is clamped to N otherwise.
    pub fn with_market(&self, workers: u32, participants: u32) -> Result<Self, ParamError> {
        if workers < 1 {
            return Err(ParamError::TooSmall {
                name: "worker count",
                min: 1,
                value: 0,
            });
        }
        if participants > workers {
            return Err(ParamError::TooManyParticipants {
                participants,
                workers,
            });
        }
        let locality = if self.is_global() {
            workers
        } else {
            self.locality.min(workers)
        };
        Ok(ModelParams {
            workers,
            participants,
            locality,
            ..self.clone()
        })
    }

    /// Copy with locality `k`, clamped to N.
    pub fn with_locality(&self, k: u32) -> Result<Self, ParamError> {
        if k < 1 {
            return Err(ParamError::TooSmall {
                name: "locality sample size",
                min: 1,
                value: 0,
            });
        }
        Ok(ModelParams {
            locality: k.min(self.workers),
            ..self.clone()
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelParams {
            seed,
            ..self.clone()
        }
    }

    pub fn derive(&self) -> Derived {
        derive(self)
    }

    /// Inverse of [`validate`]; feeds manifests and configs.
    pub fn to_raw(&self) -> RawParams {
        RawParams {
            workers: self.workers,
            participation: Some(Participation::Count(self.participants)),
            threshold: self.threshold.dollars(),
            base_pay: self.base_pay.dollars(),
            increment: self.increment.dollars(),
            busy_steps: self.busy_steps,
            orders_per_hour: self.orders_per_hour,
            cost_per_mile: self.cost_per_mile.dollars(),
            miles_per_order: self.miles_per_order,
            locality: if self.is_global() {
                None
            } else {
                Some(self.locality)
            },
            seed: self.seed,
        }
    }
}

/// Quantities computed from a validated parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    /// Z
    pub max_declines: u32,
    /// N/b
    pub degree: f64,
    /// M/N
    pub alpha: f64,
    /// c·m in dollars
    pub cost_per_order: f64,
}

pub fn derive(params: &ModelParams) -> Derived {
    Derived {
        max_declines: params.max_declines(),
        degree: params.degree(),
        alpha: params.alpha(),
        cost_per_order: params.cost_per_order_cents() / 100.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> RawParams {
        RawParams::default().with_workers(30).with_alpha(0.5)
    }

    #[test]
    fn reference_instantiation_is_valid() {
        let p = reference().validate().unwrap();
        assert_eq!(p.participants(), 15);
        assert_eq!(p.max_declines(), 12);
        assert_eq!(p.locality(), 30);
        assert!(p.warnings().is_empty());
        let d = p.derive();
        assert_eq!(d.degree, 1.0);
        assert_eq!(d.alpha, 0.5);
        assert!((d.cost_per_order - 3.6).abs() < 1e-12);
    }

    #[test]
    fn threshold_equal_to_base_gives_zero_declines() {
        let raw = RawParams {
            threshold: 4.0,
            ..reference()
        };
        assert_eq!(raw.validate().unwrap().max_declines(), 0);
    }

    #[test]
    fn non_integral_ladder_rejected() {
        let raw = RawParams {
            increment: 0.4,
            ..reference()
        };
        assert!(matches!(
            raw.validate(),
            Err(ParamError::LadderNotIntegral { .. })
        ));
    }

    #[test]
    fn degree_is_n_over_b() {
        let p = reference().with_workers(45).validate().unwrap();
        assert_eq!(p.degree(), 1.5);
        assert!(!p.is_undersupplied());
        let p = reference().with_workers(30).validate().unwrap();
        assert!(p.is_undersupplied());
    }

    #[test]
    fn alpha_rounds_half_up() {
        assert_eq!(participants_from_alpha(0.5, 15), 8);
        assert_eq!(participants_from_alpha(0.3, 15), 5);
        assert_eq!(participants_from_alpha(0.1, 15), 2);
        assert_eq!(participants_from_alpha(0.4, 25), 10);
        assert_eq!(participants_from_alpha(0.0, 25), 0);
        assert_eq!(participants_from_alpha(1.0, 25), 25);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(
            reference().with_locality(31).validate(),
            Err(ParamError::LocalityTooLarge { .. })
        ));
        assert!(matches!(
            reference().with_participants(31).validate(),
            Err(ParamError::TooManyParticipants { .. })
        ));
        let raw = RawParams {
            busy_steps: 0,
            ..reference()
        };
        assert!(matches!(raw.validate(), Err(ParamError::TooSmall { .. })));
        let raw = RawParams {
            participation: None,
            ..reference()
        };
        assert_eq!(raw.validate(), Err(ParamError::MissingParticipation));
        assert!(reference().with_alpha(1.2).validate().is_err());
        let raw = RawParams {
            threshold: 3.0,
            ..reference()
        };
        assert!(matches!(
            raw.validate(),
            Err(ParamError::ThresholdBelowBase { .. })
        ));
    }

    #[test]
    fn sub_cent_money_rejected() {
        assert_eq!(Cents::from_dollars(0.25).unwrap(), Cents(25));
        assert_eq!(Cents::from_dollars(7.0).unwrap(), Cents(700));
        assert_eq!(Cents::from_dollars(0.6).unwrap(), Cents(60));
        assert!(matches!(
            Cents::from_dollars(0.255),
            Err(ParamError::SubCent(_))
        ));
        assert_eq!(Cents(-5).to_string(), "-0.05");
        assert_eq!(Cents(725).to_string(), "7.25");
    }

    #[test]
    fn low_base_pay_warns_but_validates() {
        let raw = RawParams {
            base_pay: 3.5,
            threshold: 7.0,
            ..reference()
        };
        let p = raw.validate().unwrap();
        assert_eq!(p.warnings().len(), 1);
    }

    #[test]
    fn raw_round_trip() {
        let p = reference().with_locality(10).validate().unwrap();
        assert_eq!(p.to_raw().validate().unwrap(), p);
        let g = reference().validate().unwrap();
        assert_eq!(g.to_raw().validate().unwrap(), g);
    }

    #[test]
    fn market_resize_tracks_global_locality() {
        let p = reference().validate().unwrap();
        let q = p.with_market(60, 20).unwrap();
        assert_eq!(q.locality(), 60);
        let local = p.with_locality(10).unwrap().with_market(8, 2).unwrap();
        assert_eq!(local.locality(), 8);
    }
}
