//! Bilateral controller (drives toward the spatial midpoint and velocity
//! average of both neighbors) and its front-only proportional-derivative
//! fallback, which is also the standalone unilateral baseline.

use crate::error::{Error, Result};

use super::{Controller, StepContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BcmGains {
    /// Proportional gain on the gap asymmetry, 1/s².
    pub k_d: f64,
    /// Derivative gain on the relative speeds, 1/s.
    pub k_v: f64,
    /// Reaction time for the fallback's adaptive desired spacing s0 = v·T.
    pub reaction_time: f64,
}

/// a = k_d·(front_gap − back_gap) + k_v·(r_front − r_back), with
/// r_front = v_leader − v_self and r_back = v_self − v_follower.
pub fn bcm_accel(front_gap: f64, back_gap: f64, r_front: f64, r_back: f64, g: &BcmGains) -> f64 {
    g.k_d * (front_gap - back_gap) + g.k_v * (r_front - r_back)
}

/// Front-only mode: the back terms are replaced by the constants (s0, 0)
/// with s0 = v_self·T set adaptively from the current speed.
pub fn unilateral_accel(front_gap: f64, v_self: f64, v_leader: f64, g: &BcmGains) -> f64 {
    let s0 = v_self * g.reaction_time;
    g.k_d * (front_gap - s0) + g.k_v * (v_leader - v_self)
}

#[derive(Clone, Debug)]
pub struct Bcm {
    gains: BcmGains,
}

impl Bcm {
    pub fn new(gains: BcmGains) -> Self {
        Self { gains }
    }
}

impl Controller for Bcm {
    fn tag(&self) -> &'static str {
        "bcm"
    }

    fn accel(&self, ctx: &StepContext) -> Result<f64> {
        let front = ctx
            .neighbors
            .front
            .ok_or(Error::MissingFrontNeighbor { controller: "bcm" })?;
        Ok(match ctx.neighbors.back {
            Some(back) => bcm_accel(
                front.gap,
                back.gap,
                front.speed - ctx.v_self,
                ctx.v_self - back.speed,
                &self.gains,
            ),
            // No follower: switch to the unilateral mode.
            None => unilateral_accel(front.gap, ctx.v_self, front.speed, &self.gains),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Unilateral {
    gains: BcmGains,
}

impl Unilateral {
    pub fn new(gains: BcmGains) -> Self {
        Self { gains }
    }
}

impl Controller for Unilateral {
    fn tag(&self) -> &'static str {
        "unilateral"
    }

    fn accel(&self, ctx: &StepContext) -> Result<f64> {
        let front = ctx.neighbors.front.ok_or(Error::MissingFrontNeighbor {
            controller: "unilateral",
        })?;
        Ok(unilateral_accel(
            front.gap,
            ctx.v_self,
            front.speed,
            &self.gains,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn gains() -> BcmGains {
        BcmGains {
            k_d: 0.5,
            k_v: 1.0,
            reaction_time: 1.26,
        }
    }

    #[test]
    fn equilibrium_is_zero() {
        assert_eq!(bcm_accel(25.0, 25.0, 0.0, 0.0, &gains()), 0.0);
    }

    #[test]
    fn gap_asymmetry_drives_toward_midpoint() {
        assert_relative_eq!(
            bcm_accel(30.0, 20.0, 0.0, 0.0, &gains()),
            5.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn speed_second_difference() {
        // Leader at 22, self at 20, follower at 20.
        assert_relative_eq!(
            bcm_accel(25.0, 25.0, 22.0 - 20.0, 20.0 - 20.0, &gains()),
            2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn unilateral_examples() {
        let g = gains();
        // At the adaptive desired spacing with matched speeds: no action.
        assert_eq!(unilateral_accel(20.0 * 1.26, 20.0, 20.0, &g), 0.0);
        assert_relative_eq!(
            unilateral_accel(30.0, 20.0, 20.0, &g),
            2.4,
            max_relative = 1e-12
        );
        // Slower leader at the equilibrium gap: braking.
        assert!(unilateral_accel(25.2, 20.0, 18.0, &g) < 0.0);
    }

    proptest! {
        // Negating gap asymmetry and both relative speeds negates the output.
        #[test]
        fn bcm_antisymmetry(
            fg in 0.0f64..60.0,
            bg in 0.0f64..60.0,
            rf in -10.0f64..10.0,
            rb in -10.0f64..10.0,
        ) {
            let g = gains();
            let a = bcm_accel(fg, bg, rf, rb, &g);
            let b = bcm_accel(bg, fg, -rf, -rb, &g);
            prop_assert!((a + b).abs() < 1e-12);
        }

        // The fallback equals the bilateral law with the back terms replaced
        // by the constants (s0, 0).
        #[test]
        fn fallback_is_a_substitution(
            fg in 0.0f64..80.0,
            v in 0.0f64..35.0,
            vl in 0.0f64..35.0,
        ) {
            let g = gains();
            let uni = unilateral_accel(fg, v, vl, &g);
            let sub = bcm_accel(fg, v * g.reaction_time, vl - v, 0.0, &g);
            prop_assert_eq!(uni, sub);
        }
    }
}
