//! Reward shaping for learned car-following: a log-TTC safety penalty, a
//! log-normal time-headway efficiency term, a quadratic jerk comfort term,
//! and the bilateral combination that also scores the vehicle behind.
//!
//! Sign conventions: TTC and headways arrive as `Option<f64>`, `None` meaning
//! the quantity is undefined at this step (not closing, or stopped). Undefined
//! inputs contribute zero to every component.

use serde::{Deserialize, Serialize};

/// TTC at or below this many seconds draws a safety penalty.
pub const SAFE_TTC: f64 = 4.0;

/// Lower clamp on the safety component; ln(ttc/4) diverges as ttc -> 0 and an
/// unbounded penalty would swamp returns and gradients.
pub const SAFETY_FLOOR: f64 = -10.0;

/// Divisor that maps the jerk range reachable at dt = 0.1 s and |a| <= 3 m/s²
/// (i.e. jerk in [-60, 60] m/s³) onto a comfort score in [-1, 0].
pub const COMFORT_SCALE: f64 = 3600.0;

/// Weights on the safety / efficiency / comfort components.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub safety: f64,
    pub efficiency: f64,
    pub comfort: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            safety: 1.0,
            efficiency: 1.0,
            comfort: 1.0,
        }
    }
}

/// Log-normal parameters for the headway efficiency term. The defaults are
/// the empirical human-driving fit (mode near h = 1.26 s, peak near 0.659).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffParams {
    /// Mean of ln(h).
    pub u: f64,
    /// Standard deviation of ln(h); must be positive.
    pub sigma: f64,
}

impl Default for EffParams {
    fn default() -> Self {
        Self {
            u: 0.4226,
            sigma: 0.4365,
        }
    }
}

impl EffParams {
    /// Parameters whose density peaks exactly at `target_headway`.
    pub fn for_target_headway(target_headway: f64, sigma: f64) -> Self {
        Self {
            u: retarget_u(target_headway, sigma),
            sigma,
        }
    }

    /// Headway at which the efficiency term attains its maximum.
    pub fn mode(&self) -> f64 {
        (self.u - self.sigma * self.sigma).exp()
    }
}

/// Log-space mean that places the log-normal mode at `target_headway`:
/// mode = exp(u - sigma²), so u = ln(h*) + sigma².
pub fn retarget_u(target_headway: f64, sigma: f64) -> f64 {
    target_headway.ln() + sigma * sigma
}

/// ln(ttc/4) for ttc <= 4 s, zero otherwise (including undefined TTC),
/// clamped at [`SAFETY_FLOOR`]. Non-positive TTC (a flagged collision state)
/// lands on the floor.
pub fn f_safety(ttc: Option<f64>) -> f64 {
    match ttc {
        Some(t) if t <= SAFE_TTC => (t / SAFE_TTC).ln().max(SAFETY_FLOOR),
        _ => 0.0,
    }
}

/// Log-normal pdf of the time headway; zero for undefined or non-positive h.
pub fn f_eff(headway: Option<f64>, p: &EffParams) -> f64 {
    match headway {
        Some(h) if h > 0.0 => {
            let z = (h.ln() - p.u) / p.sigma;
            (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h * p.sigma)
        }
        _ => 0.0,
    }
}

/// -jerk²/3600, in [-1, 0] for every jerk reachable under the bounded action
/// space at dt = 0.1 s.
pub fn f_comfort(jerk: f64) -> f64 {
    -(jerk * jerk) / COMFORT_SCALE
}

/// Front-view reward: weighted sum of safety, efficiency and comfort.
pub fn reward_cfm(
    ttc: Option<f64>,
    headway: Option<f64>,
    jerk: f64,
    w: &RewardWeights,
    p: &EffParams,
) -> f64 {
    w.safety * f_safety(ttc) + w.efficiency * f_eff(headway, p) + w.comfort * f_comfort(jerk)
}

/// Bilateral reward: front-view components plus the follower's safety and
/// headway scored with the same functions. With no follower the back terms
/// are zero and this equals [`reward_cfm`] exactly.
#[allow(clippy::too_many_arguments)]
pub fn reward_bilateral(
    ttc_front: Option<f64>,
    headway_front: Option<f64>,
    ttc_back: Option<f64>,
    headway_back: Option<f64>,
    jerk: f64,
    w: &RewardWeights,
    p: &EffParams,
) -> f64 {
    w.safety * (f_safety(ttc_front) + f_safety(ttc_back))
        + w.efficiency * (f_eff(headway_front, p) + f_eff(headway_back, p))
        + w.comfort * f_comfort(jerk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn safety_branches() {
        assert_eq!(f_safety(Some(4.0)), 0.0);
        assert_eq!(f_safety(Some(10.0)), 0.0);
        assert_eq!(f_safety(None), 0.0);
        assert_relative_eq!(f_safety(Some(2.0)), 0.5_f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn safety_floor_engages_near_zero() {
        assert_eq!(f_safety(Some(0.0)), SAFETY_FLOOR);
        assert_eq!(f_safety(Some(1e-9)), SAFETY_FLOOR);
        // Flagged collision states can report a non-positive TTC.
        assert_eq!(f_safety(Some(-0.3)), SAFETY_FLOOR);
        let just_above_floor = SAFE_TTC * (-10.0_f64).exp() * 1.01;
        assert!(f_safety(Some(just_above_floor)) > SAFETY_FLOOR);
    }

    #[test]
    fn efficiency_peak_matches_human_fit() {
        let p = EffParams::default();
        assert_relative_eq!(f_eff(Some(1.26), &p), 0.659, max_relative = 1e-2);
        // At h = e^u the exponent vanishes and only the prefactor remains.
        let h = p.u.exp();
        let expected = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * p.sigma);
        assert_relative_eq!(f_eff(Some(h), &p), expected, max_relative = 1e-12);
        assert_relative_eq!(expected, 0.598, max_relative = 2e-3);
    }

    #[test]
    fn efficiency_degenerate_inputs() {
        let p = EffParams::default();
        assert_eq!(f_eff(None, &p), 0.0);
        assert_eq!(f_eff(Some(0.0), &p), 0.0);
        assert_eq!(f_eff(Some(-1.0), &p), 0.0);
        assert!(f_eff(Some(1e-6), &p) < 1e-9); // pdf -> 0 as h -> 0+
    }

    #[test]
    fn efficiency_positive_with_unique_mode() {
        let p = EffParams::default();
        let mode = p.mode();
        let peak = f_eff(Some(mode), &p);
        let mut h = 0.01;
        while h < 10.0 {
            let v = f_eff(Some(h), &p);
            assert!(v > 0.0);
            assert!(v <= peak + 1e-12);
            h += 0.01;
        }
    }

    #[test]
    fn comfort_values() {
        assert_eq!(f_comfort(0.0), 0.0);
        assert_eq!(f_comfort(60.0), -1.0);
        assert_eq!(f_comfort(-60.0), -1.0);
        assert_relative_eq!(f_comfort(30.0), -0.25, max_relative = 1e-12);
    }

    #[test]
    fn retargeting_recovers_defaults() {
        // The human-fit constants are self-consistent with the mode formula.
        let u = retarget_u(1.26, 0.4365);
        assert!((u - 0.4226).abs() < 2e-3);
        let u08 = retarget_u(0.8, 0.4365);
        assert_relative_eq!(u08, -0.0326, epsilon = 1e-4);
        let p = EffParams::for_target_headway(0.8, 0.4365);
        assert_relative_eq!(p.mode(), 0.8, max_relative = 1e-12);
    }

    #[test]
    fn cfm_reward_composition() {
        let w = RewardWeights::default();
        let p = EffParams::default();
        // All components at their neutral points.
        assert_eq!(reward_cfm(Some(10.0), None, 0.0, &w, &p), 0.0);
        let r = reward_cfm(Some(4.0), Some(1.26), 0.0, &w, &p);
        assert_relative_eq!(r, 0.659, max_relative = 1e-2);
        // Weight projection reduces the sum to a single component.
        let w_eff = RewardWeights {
            safety: 0.0,
            efficiency: 1.0,
            comfort: 0.0,
        };
        let expected = f_eff(Some(0.9), &p);
        assert_eq!(reward_cfm(Some(2.0), Some(0.9), 3.0, &w_eff, &p), expected);
    }

    #[test]
    fn bilateral_reward_cases() {
        let w = RewardWeights::default();
        let p = EffParams::default();
        let sym = reward_bilateral(None, Some(1.26), None, Some(1.26), 0.0, &w, &p);
        assert_relative_eq!(sym, 1.318, max_relative = 2e-3);

        // A tailgating follower at ttc = 2 costs ln 2 relative to a safe one.
        let safe = reward_bilateral(None, Some(1.26), Some(8.0), Some(1.26), 0.0, &w, &p);
        let risky = reward_bilateral(None, Some(1.26), Some(2.0), Some(1.26), 0.0, &w, &p);
        assert_relative_eq!(safe - risky, 2.0_f64.ln(), max_relative = 1e-12);
    }

    #[test]
    fn bilateral_degenerates_to_cfm_without_follower() {
        let w = RewardWeights::default();
        let p = EffParams::default();
        let cases = [
            (Some(3.0), Some(1.1), 12.0),
            (None, None, 0.0),
            (Some(0.5), Some(4.2), -33.0),
        ];
        for (ttc, h, jerk) in cases {
            let a = reward_bilateral(ttc, h, None, None, jerk, &w, &p);
            let b = reward_cfm(ttc, h, jerk, &w, &p);
            assert_eq!(a, b);
        }
    }
}
