//! A trained policy wrapped as an ordinary controller, so checkpointed
//! agents plug into the same per-vehicle selection as the closed-form models.

use std::path::Path;

use crate::env::{build_observation, ObsVariant};
use crate::error::{Error, Result};
use crate::learner::{Checkpoint, Mlp};

use super::{clip_accel, Controller, StepContext, ACCEL_MAX, ACCEL_MIN};

#[derive(Clone, Debug)]
pub struct PolicyController {
    actor: Mlp,
    variant: ObsVariant,
}

impl PolicyController {
    pub fn new(actor: Mlp, variant: ObsVariant) -> Result<Self> {
        if actor.input_dim() != variant.dim() {
            return Err(Error::DimensionMismatch {
                expected: variant.dim(),
                got: actor.input_dim(),
            });
        }
        Ok(Self { actor, variant })
    }

    pub fn from_checkpoint(path: &Path, variant: ObsVariant) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        Self::new(ckpt.actor, variant)
    }

    pub fn variant(&self) -> ObsVariant {
        self.variant
    }
}

impl Controller for PolicyController {
    fn tag(&self) -> &'static str {
        "rl"
    }

    fn accel(&self, ctx: &StepContext) -> Result<f64> {
        let obs = build_observation(
            self.variant,
            ctx.v_self,
            ctx.prev_accel,
            ctx.neighbors.front.map(|f| (f.gap, f.speed - ctx.v_self)),
            ctx.neighbors.back.map(|b| (b.gap, ctx.v_self - b.speed)),
            ctx.target_speed,
        );
        let a = self.actor.forward(&obs)?[0];
        Ok(clip_accel(a, ACCEL_MIN, ACCEL_MAX))
    }
}
