//! Simulation and closed-form analysis of a decline-below-threshold
//! collective on a delivery dispatch platform.
//!
//! A fixed pool of workers receives one order per time step. Participants
//! decline any offer below a threshold; each decline raises the pay by a
//! fixed increment and re-offers the order to another randomly drawn idle
//! worker. The crate measures what this does to hourly income for
//! participants, non-participants and the workforce as a whole.
//!
//! - [`params`]: validated parameters and derived quantities
//! - [`dispatch`]: resolution of one order against an idle pool
//! - [`engine`]: the time loop and utility estimation
//! - [`analytics`]: closed forms and bounds
//! - [`experiments`]: parameter sweeps, CSV output, boundary searches
//!
//! ```
//! use declinesim::{engine, RawParams, RunOptions};
//!
//! let params = RawParams::default().with_workers(25).with_alpha(0.4).validate()?;
//! let report = engine::simulate(&params, &RunOptions::default())?;
//! assert!(report.benefit.unwrap() > 5.9);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod analytics;
pub mod dispatch;
pub mod engine;
pub mod experiments;
pub mod params;
pub mod rng;

pub use analytics::{AnalyticsError, Interval, ShiftPlan};
pub use dispatch::{DispatchError, Group, IdlePool, OrderResolution, Resolver};
pub use engine::{EngineError, MarketState, Metrics, RunOptions, UtilityReport};
pub use experiments::{FigureId, SweepError, SweepRow, SweepSpec, SweepTable};
pub use params::{Cents, Derived, ModelParams, ParamError, RawParams};

/// The guide under `book/`, compiled here so its code blocks run as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/dispatch.md")]
    pub mod dispatch {}
    #[doc = include_str!("../../../book/src/engine.md")]
    pub mod engine {}
    #[doc = include_str!("../../../book/src/results.md")]
    pub mod results {}
    #[doc = include_str!("../../../book/src/locality-and-shifts.md")]
    pub mod locality_and_shifts {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
}
