//! Longitudinal controllers behind a common trait, registered by tag and
//! selected at runtime from the `controllers` config table.
//!
//! Built-in tags: `gipps`, `idm`, `bcm`, `unilateral`, `rl`. All controller
//! math is pure; a controller sees only its own kinematics and its immediate
//! neighbors through [`StepContext`].

mod bcm;
mod gipps;
mod idm;
mod registry;
mod rl;

pub use bcm::{bcm_accel, unilateral_accel, Bcm, BcmGains, Unilateral};
pub use gipps::{gipps_safe_speed, gipps_speed, Gipps, GippsParams};
pub use idm::{idm_accel, idm_desired_gap, idm_equilibrium_gap, Idm, IdmParams};
pub use registry::{BuildContext, ControllerFactory, ControllerRegistry};
pub use rl::PolicyController;

use crate::error::Result;
use crate::sim::NeighborView;

/// Acceleration command bounds of the learned policy's action space, m/s².
pub const ACCEL_MIN: f64 = -3.0;
pub const ACCEL_MAX: f64 = 3.0;

/// Everything a controller may look at when choosing an acceleration.
#[derive(Clone, Copy, Debug)]
pub struct StepContext {
    pub v_self: f64,
    /// Acceleration realized over the previous step.
    pub prev_accel: f64,
    pub dt: f64,
    pub neighbors: NeighborView,
    /// Posted target speed for the road section.
    pub target_speed: f64,
}

/// A car-following strategy: context in, acceleration command out.
pub trait Controller: Send {
    fn tag(&self) -> &'static str;
    fn accel(&self, ctx: &StepContext) -> Result<f64>;
}

/// Saturate an acceleration command to `[lo, hi]`.
pub fn clip_accel(a: f64, lo: f64, hi: f64) -> f64 {
    a.clamp(lo, hi)
}
