//! Completion-time minimization for a wireless-powered UAV data-collection
//! mission.
//!
//! The planner searches the mission horizon `T` by bisection ([`bsa`]). Each
//! probe runs an alternating optimization ([`sco`]) that solves a scheduling
//! LP ([`gsp`]) for a fixed trajectory, then a convexified trajectory
//! program ([`utp`]) for a fixed schedule, built from global lower bounds of
//! the rate and harvested energy ([`linearize`]). Every plan can be replayed
//! against the exact models by [`verify`].

pub mod barrier;
pub mod baselines;
pub mod bsa;
pub mod error;
pub mod geometry;
pub mod gsp;
pub mod init;
pub mod io;
pub mod linearize;
pub mod model;
pub mod plan;
pub mod sco;
pub mod sweep;
pub mod utp;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::Point2;
pub use model::{EhParams, GroundTerminal, HarvestModel, Logistic, Scenario, SystemParams};
pub use plan::{Plan, Schedule, Trajectory};
