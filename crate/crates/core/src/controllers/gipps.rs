//! Gipps' speed-assignment model: take the minimum of the free-flow speed
//! and the safe following speed, convert to an acceleration over one step.

use crate::error::Result;

use super::{Controller, StepContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GippsParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    /// Comfortable deceleration, positive magnitude.
    pub comfort_decel: f64,
    pub reaction_time: f64,
}

/// Fastest speed that still allows stopping behind a leader that brakes to a
/// complete stop: v_safe = -bτ + sqrt(b²τ² + v_leader² + 2·b·gap).
pub fn gipps_safe_speed(gap: f64, v_leader: f64, p: &GippsParams) -> f64 {
    let bt = p.comfort_decel * p.reaction_time;
    -bt + (bt * bt + v_leader * v_leader + 2.0 * p.comfort_decel * gap).sqrt()
}

/// Speed for the next step: min of acceleration-limited, desired and safe
/// speeds. The commanded acceleration is `(result - v_self) / dt`.
pub fn gipps_speed(v_self: f64, gap: f64, v_leader: f64, p: &GippsParams, dt: f64) -> f64 {
    (v_self + p.max_accel * dt)
        .min(p.desired_speed)
        .min(gipps_safe_speed(gap, v_leader, p))
}

#[derive(Clone, Debug)]
pub struct Gipps {
    params: GippsParams,
}

impl Gipps {
    pub fn new(params: GippsParams) -> Self {
        Self { params }
    }
}

impl Controller for Gipps {
    fn tag(&self) -> &'static str {
        "gipps"
    }

    fn accel(&self, ctx: &StepContext) -> Result<f64> {
        let p = &self.params;
        let next = match ctx.neighbors.front {
            Some(front) => gipps_speed(ctx.v_self, front.gap, front.speed, p, ctx.dt),
            // Free-flow mode: no leader to be safe against.
            None => (ctx.v_self + p.max_accel * ctx.dt).min(p.desired_speed),
        };
        Ok((next - ctx.v_self) / ctx.dt)
    }
}
