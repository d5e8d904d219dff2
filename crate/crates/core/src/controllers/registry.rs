//! Name-keyed controller registry. The built-in tags cover the closed-form
//! models and checkpointed policies; embedders can register additional
//! strategies under new tags without touching the environment code.

use std::collections::BTreeMap;

use crate::config::{ControllersConfig, ScenarioConfig};
use crate::env::ObsVariant;
use crate::error::{Error, Result};

use super::{Bcm, Controller, Gipps, Idm, PolicyController, Unilateral};

/// Inputs available when instantiating a controller for a scenario.
pub struct BuildContext<'a> {
    pub scenario: &'a ScenarioConfig,
    pub controllers: &'a ControllersConfig,
}

pub type ControllerFactory =
    Box<dyn Fn(&BuildContext) -> Result<Box<dyn Controller>> + Send + Sync>;

pub struct ControllerRegistry {
    factories: BTreeMap<String, ControllerFactory>,
}

impl ControllerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// Registry with the built-in strategies.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("gipps", |ctx: &BuildContext| {
            Ok(
                Box::new(Gipps::new(ctx.controllers.gipps_params(ctx.scenario)))
                    as Box<dyn Controller>,
            )
        });
        reg.register("idm", |ctx: &BuildContext| {
            Ok(Box::new(Idm::new(ctx.controllers.idm_params(ctx.scenario))) as Box<dyn Controller>)
        });
        reg.register("bcm", |ctx: &BuildContext| {
            Ok(Box::new(Bcm::new(ctx.controllers.bcm_gains())) as Box<dyn Controller>)
        });
        reg.register("unilateral", |ctx: &BuildContext| {
            Ok(
                Box::new(Unilateral::new(ctx.controllers.unilateral_gains()))
                    as Box<dyn Controller>,
            )
        });
        reg.register("rl", |ctx: &BuildContext| {
            let rl = &ctx.controllers.rl;
            let path = rl.checkpoint.as_ref().ok_or(Error::MissingCheckpoint)?;
            let variant: ObsVariant = rl.variant;
            Ok(Box::new(PolicyController::from_checkpoint(path, variant)?) as Box<dyn Controller>)
        });
        reg
    }

    pub fn register<F>(&mut self, tag: impl Into<String>, factory: F)
    where
        F: Fn(&BuildContext) -> Result<Box<dyn Controller>> + Send + Sync + 'static,
    {
        self.factories.insert(tag.into(), Box::new(factory));
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.factories.contains_key(tag)
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, tag: &str, ctx: &BuildContext) -> Result<Box<dyn Controller>> {
        let factory = self
            .factories
            .get(tag)
            .ok_or_else(|| Error::UnknownController(tag.to_string()))?;
        factory(ctx)
    }
}

impl Default for ControllerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;

    #[test]
    fn builtins_resolve() {
        let cfg = Config::preset("closed-loop").unwrap();
        let reg = ControllerRegistry::with_builtins();
        let ctx = BuildContext {
            scenario: &cfg.scenario,
            controllers: &cfg.controllers,
        };
        for tag in ["gipps", "idm", "bcm", "unilateral"] {
            let c = reg.build(tag, &ctx).unwrap();
            assert_eq!(c.tag(), tag);
        }
        assert!(matches!(
            reg.build("acc-magic", &ctx),
            Err(Error::UnknownController(_))
        ));
        // The rl tag needs a checkpoint to load.
        assert!(matches!(
            reg.build("rl", &ctx),
            Err(Error::MissingCheckpoint)
        ));
    }

    #[test]
    fn custom_strategies_can_register() {
        struct Coast;
        impl Controller for Coast {
            fn tag(&self) -> &'static str {
                "coast"
            }
            fn accel(&self, _ctx: &super::super::StepContext) -> crate::error::Result<f64> {
                Ok(0.0)
            }
        }
        let cfg = Config::preset("closed-loop").unwrap();
        let mut reg = ControllerRegistry::with_builtins();
        reg.register("coast", |_ctx: &BuildContext| {
            Ok(Box::new(Coast) as Box<dyn Controller>)
        });
        let ctx = BuildContext {
            scenario: &cfg.scenario,
            controllers: &cfg.controllers,
        };
        assert_eq!(reg.build("coast", &ctx).unwrap().tag(), "coast");
    }
}
