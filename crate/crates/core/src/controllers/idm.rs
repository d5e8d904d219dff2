//! Intelligent Driver Model. Closing speed `dv` is self minus leader,
//! positive while approaching, which makes the dynamic braking term grow as
//! the gap closes.

use crate::error::{Error, Result};

use super::{Controller, StepContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdmParams {
    pub desired_speed: f64,
    pub max_accel: f64,
    pub comfort_decel: f64,
    pub time_headway: f64,
    /// Minimum jam distance s0.
    pub jam_distance: f64,
    /// Free-flow exponent, usually 4.
    pub exponent: f64,
}

/// Desired dynamic gap s* = s0 + max(v·T + v·dv / (2·sqrt(a·b)), 0).
pub fn idm_desired_gap(v: f64, dv_closing: f64, p: &IdmParams) -> f64 {
    p.jam_distance
        + (v * p.time_headway + v * dv_closing / (2.0 * (p.max_accel * p.comfort_decel).sqrt()))
            .max(0.0)
}

/// IDM acceleration: a·[1 − (v/v0)^δ − (s*/gap)²]. Undefined at non-positive
/// gaps (those are flagged collision states upstream).
pub fn idm_accel(v_self: f64, gap: f64, dv_closing: f64, p: &IdmParams) -> Result<f64> {
    if gap <= 0.0 {
        return Err(Error::NonPositiveGap(gap));
    }
    let s_star = idm_desired_gap(v_self, dv_closing, p);
    Ok(p.max_accel * (1.0 - (v_self / p.desired_speed).powf(p.exponent) - (s_star / gap).powi(2)))
}

/// Gap at which a follower at speed `v` holds steady behind a leader at the
/// same speed: solve accel = 0 with dv = 0. Requires v < desired speed.
pub fn idm_equilibrium_gap(v: f64, p: &IdmParams) -> f64 {
    let free = 1.0 - (v / p.desired_speed).powf(p.exponent);
    (p.jam_distance + v * p.time_headway) / free.sqrt()
}

#[derive(Clone, Debug)]
pub struct Idm {
    params: IdmParams,
}

impl Idm {
    pub fn new(params: IdmParams) -> Self {
        Self { params }
    }
}

impl Controller for Idm {
    fn tag(&self) -> &'static str {
        "idm"
    }

    fn accel(&self, ctx: &StepContext) -> Result<f64> {
        let p = &self.params;
        match ctx.neighbors.front {
            Some(front) => idm_accel(ctx.v_self, front.gap, ctx.v_self - front.speed, p),
            // Free road: only the free-flow term remains.
            None => Ok(p.max_accel * (1.0 - (ctx.v_self / p.desired_speed).powf(p.exponent))),
        }
    }
}
