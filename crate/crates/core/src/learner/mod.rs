//! Desk-scale DDPG: small actor/critic networks with target copies, a replay
//! buffer, Gaussian exploration, and a training loop fed by the decentralized
//! shared transition stream (all agents pool experience into one buffer and
//! share one policy).

mod mlp;
mod replay;

pub use mlp::{Activation, Adam, FwdCache, Layer, Mlp, MlpGrads};
pub use replay::ReplayBuffer;

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::{Config, TrainConfig};
use crate::controllers::{clip_accel, ControllerRegistry, ACCEL_MAX, ACCEL_MIN};
use crate::env::{ObsVariant, Policy, TrafficEnv, Transition};
use crate::error::{Error, Result};
use crate::metrics::EpisodeMetrics;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Persisted policy: a small header plus the actor parameters, stored as
/// portable JSON (f64 values round-trip exactly).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub seed: u64,
    pub episodes_trained: usize,
    pub variant: ObsVariant,
    pub actor: Mlp,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                ckpt.format_version
            )));
        }
        if ckpt.actor.layer_sizes() != ckpt.layer_sizes {
            return Err(Error::Checkpoint(
                "header layer sizes disagree with stored parameters".into(),
            ));
        }
        if !ckpt.actor.params_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(ckpt)
    }
}

/// Deterministic actor rollout policy.
pub struct ActorPolicy<'a> {
    actor: &'a Mlp,
}

impl<'a> ActorPolicy<'a> {
    pub fn new(actor: &'a Mlp) -> Self {
        Self { actor }
    }
}

impl Policy for ActorPolicy<'_> {
    fn act(&mut self, obs: &[f64]) -> f64 {
        let a = self.actor.forward(obs).expect("observation matches actor")[0];
        clip_accel(a, ACCEL_MIN, ACCEL_MAX)
    }
}

/// Uniform random actions over the bounded action space; the untrained
/// baseline the smoke tests compare against.
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn act(&mut self, _obs: &[f64]) -> f64 {
        self.rng.gen_range(ACCEL_MIN..ACCEL_MAX)
    }
}

/// Actor/critic pair with target copies and per-network Adam state.
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    gamma: f64,
    tau: f64,
    batch_size: usize,
    obs_dim: usize,
}

impl DdpgAgent {
    pub fn new<R: Rng>(obs_dim: usize, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut actor_sizes = vec![obs_dim];
        actor_sizes.extend(&cfg.hidden);
        actor_sizes.push(1);
        let mut critic_sizes = vec![obs_dim + 1];
        critic_sizes.extend(&cfg.hidden);
        critic_sizes.push(1);

        let actor = Mlp::new(
            &actor_sizes,
            Activation::Tanh,
            Activation::ScaledTanh { scale: ACCEL_MAX },
            rng,
        );
        let critic = Mlp::new(&critic_sizes, Activation::Tanh, Activation::Linear, rng);
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor_opt: Adam::new(&actor, cfg.actor_lr),
            critic_opt: Adam::new(&critic, cfg.critic_lr),
            actor,
            critic,
            gamma: cfg.gamma,
            tau: cfg.soft_update,
            batch_size: cfg.batch_size,
            obs_dim,
        })
    }

    /// Deterministic action for an observation, bounded by construction.
    pub fn act(&self, obs: &[f64]) -> Result<f64> {
        Ok(self.actor.forward(obs)?[0])
    }

    /// One DDPG update on a uniform minibatch: the critic regresses toward
    /// r + γ·(1−done)·Q_target(s', μ_target(s')), the actor ascends
    /// Q(s, μ(s)), and both targets are soft-updated. Returns
    /// (critic loss, mean actor objective).
    pub fn update<R: Rng>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<(f64, f64)> {
        if buffer.len() < self.batch_size {
            return Err(Error::BufferTooSmall {
                have: buffer.len(),
                need: self.batch_size,
            });
        }
        let indices = buffer.sample_indices(self.batch_size, rng);
        let n = self.batch_size as f64;

        let mut critic_grads = MlpGrads::zeros_like(&self.critic);
        let mut critic_loss = 0.0;
        for &i in &indices {
            let tr = buffer.get(i);
            let mut sa_next = tr.next_obs.clone();
            sa_next.push(self.target_actor.forward(&tr.next_obs)?[0]);
            let q_next = self.target_critic.forward(&sa_next)?[0];
            let bootstrap = if tr.done { 0.0 } else { self.gamma * q_next };
            let y = tr.reward + bootstrap;

            let mut sa = tr.obs.clone();
            sa.push(tr.action);
            let cache = self.critic.forward_cached(&sa)?;
            let q = cache.output()[0];
            let diff = q - y;
            critic_loss += diff * diff / n;
            self.critic
                .backward(&cache, &[2.0 * diff / n], Some(&mut critic_grads));
        }
        if !critic_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                quantity: "critic loss",
            });
        }
        self.critic_opt.step(&mut self.critic, &critic_grads);

        let mut actor_grads = MlpGrads::zeros_like(&self.actor);
        let mut actor_objective = 0.0;
        for &i in &indices {
            let tr = buffer.get(i);
            let actor_cache = self.actor.forward_cached(&tr.obs)?;
            let a = actor_cache.output()[0];
            let mut sa = tr.obs.clone();
            sa.push(a);
            let q_cache = self.critic.forward_cached(&sa)?;
            actor_objective += q_cache.output()[0] / n;
            // dQ/da, scaled by 1/n; minimize -Q to ascend the objective.
            let input_grad = self.critic.backward(&q_cache, &[1.0 / n], None);
            let dq_da = input_grad[self.obs_dim];
            self.actor
                .backward(&actor_cache, &[-dq_da], Some(&mut actor_grads));
        }
        if !actor_objective.is_finite() {
            return Err(Error::NonFiniteLoss {
                quantity: "actor objective",
            });
        }
        self.actor_opt.step(&mut self.actor, &actor_grads);

        self.target_critic.soft_update_from(&self.critic, self.tau);
        self.target_actor.soft_update_from(&self.actor, self.tau);
        Ok((critic_loss, actor_objective))
    }
}

/// Per-episode curve entry written to `curve.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Mean per-agent return (sum of rewards over the episode).
    pub mean_reward: f64,
    pub mean_headway: Option<f64>,
    pub collisions: usize,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub curve: Vec<CurvePoint>,
}

/// Train the shared policy on the configured scenario. Fully deterministic
/// for a fixed `scenario.rng_seed`.
pub fn train(config: &Config, registry: &ControllerRegistry) -> Result<TrainOutcome> {
    train_with(config, registry, |_| {})
}

pub fn train_with(
    config: &Config,
    registry: &ControllerRegistry,
    mut on_episode: impl FnMut(&CurvePoint),
) -> Result<TrainOutcome> {
    let mut cfg = config.clone();
    cfg.scenario.steps_per_episode = cfg.train.steps;
    cfg.validate()?;
    let train_cfg = cfg.train.clone();
    let seed = cfg.scenario.rng_seed;

    let mut env = TrafficEnv::for_training(&cfg, registry)?;
    let num_agents = env.num_agents().max(1);
    let rl_ids = env.rl_ids().to_vec();
    let obs_dim = env.variant().dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = DdpgAgent::new(obs_dim, &train_cfg, &mut rng)?;
    let mut buffer = ReplayBuffer::new(train_cfg.buffer_capacity);

    let mut curve = Vec::with_capacity(train_cfg.episodes);
    let mut total_steps = 0usize;
    for episode in 0..train_cfg.episodes {
        env.reset()?;
        let sigma = train_cfg.noise_sigma * train_cfg.noise_decay.powi(episode as i32);
        let mut obs = env.observations();
        let mut reward_sum = 0.0;
        let mut collisions = 0usize;
        let mut records = Vec::with_capacity(train_cfg.steps);

        loop {
            let mut actions = Vec::with_capacity(obs.len());
            for o in &obs {
                let noise: f64 = rng.sample(StandardNormal);
                actions.push(clip_accel(
                    agent.act(o)? + sigma * noise,
                    ACCEL_MIN,
                    ACCEL_MAX,
                ));
            }
            let step = env.step(Some(&actions))?;
            for (k, &id) in rl_ids.iter().enumerate() {
                reward_sum += step.rewards[k];
                buffer.push(Transition {
                    agent_id: id,
                    obs: std::mem::take(&mut obs[k]),
                    action: step.actions[k],
                    reward: step.rewards[k],
                    next_obs: step.observations[k].clone(),
                    done: step.done,
                });
            }
            total_steps += 1;
            if buffer.len() >= train_cfg.batch_size && total_steps >= train_cfg.warmup_steps {
                for _ in 0..train_cfg.updates_per_step {
                    agent.update(&buffer, &mut rng)?;
                }
            }
            let done = step.done;
            collisions += step.record.rows.iter().filter(|r| r.collision).count();
            records.push(step.record);
            obs = step.observations;
            if done {
                break;
            }
        }

        let metrics = EpisodeMetrics::from_records(&records, Some(&rl_ids));
        let point = CurvePoint {
            episode,
            mean_reward: reward_sum / num_agents as f64,
            mean_headway: metrics.mean_time_headway,
            collisions,
        };
        on_episode(&point);
        curve.push(point);
    }

    let checkpoint = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        layer_sizes: agent.actor.layer_sizes(),
        seed,
        episodes_trained: train_cfg.episodes,
        variant: env.variant(),
        actor: agent.actor,
    };
    Ok(TrainOutcome { checkpoint, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::build_observation;

    fn train_cfg() -> TrainConfig {
        TrainConfig::default()
    }

    #[test]
    fn zero_episodes_returns_initial_policy() {
        let mut cfg = Config::preset("smoke").unwrap();
        cfg.train.episodes = 0;
        cfg.train.steps = 50;
        let registry = ControllerRegistry::with_builtins();
        let out = train(&cfg, &registry).unwrap();
        assert!(out.curve.is_empty());
        assert_eq!(out.checkpoint.episodes_trained, 0);

        // The returned policy is exactly the seeded initialization.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.scenario.rng_seed);
        let fresh = DdpgAgent::new(7, &cfg.train, &mut rng).unwrap();
        assert_eq!(out.checkpoint.actor, fresh.actor);
    }

    #[test]
    fn same_seed_same_curve() {
        let mut cfg = Config::preset("smoke").unwrap();
        cfg.train.episodes = 2;
        cfg.train.steps = 60;
        cfg.train.warmup_steps = 30;
        let registry = ControllerRegistry::with_builtins();
        let a = train(&cfg, &registry).unwrap();
        let b = train(&cfg, &registry).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.checkpoint.actor, b.checkpoint.actor);
    }

    #[test]
    fn critic_converges_to_constant_reward_when_gamma_is_zero() {
        let mut cfg = train_cfg();
        cfg.gamma = 1e-9; // gamma must be in (0,1); effectively zero
        cfg.batch_size = 16;
        cfg.critic_lr = 1e-2;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = DdpgAgent::new(3, &cfg, &mut rng).unwrap();
        let mut buffer = ReplayBuffer::new(64);
        let obs = vec![0.2, -0.1, 0.4];
        for _ in 0..64 {
            buffer.push(Transition {
                agent_id: 0,
                obs: obs.clone(),
                action: 0.5,
                reward: 1.75,
                next_obs: obs.clone(),
                done: false,
            });
        }
        for _ in 0..3000 {
            agent.update(&buffer, &mut rng).unwrap();
        }
        let mut sa = obs.clone();
        sa.push(0.5);
        let q = agent.critic.forward(&sa).unwrap()[0];
        assert!((q - 1.75).abs() < 0.05, "q = {q}");
    }

    #[test]
    fn full_soft_update_copies_networks() {
        let mut cfg = train_cfg();
        cfg.soft_update = 1.0;
        cfg.batch_size = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut agent = DdpgAgent::new(2, &cfg, &mut rng).unwrap();
        let mut buffer = ReplayBuffer::new(32);
        for i in 0..32 {
            buffer.push(Transition {
                agent_id: 0,
                obs: vec![0.1 * i as f64, -0.2],
                action: 0.3,
                reward: -1.0,
                next_obs: vec![0.1, 0.2],
                done: i % 4 == 0,
            });
        }
        agent.update(&buffer, &mut rng).unwrap();
        assert_eq!(agent.target_actor, agent.actor);
        assert_eq!(agent.target_critic, agent.critic);
    }

    #[test]
    fn bandit_actor_finds_the_peak() {
        // One-step bandit with reward -(a - 0.5)²: the optimum is a = 0.5.
        let mut cfg = train_cfg();
        cfg.batch_size = 32;
        cfg.actor_lr = 2e-3;
        cfg.critic_lr = 5e-3;
        cfg.soft_update = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut agent = DdpgAgent::new(1, &cfg, &mut rng).unwrap();
        let mut buffer = ReplayBuffer::new(4096);
        let obs = vec![0.0];
        for _ in 0..4000 {
            let a = clip_accel(
                agent.act(&obs).unwrap() + 0.5 * rng.sample::<f64, _>(StandardNormal),
                ACCEL_MIN,
                ACCEL_MAX,
            );
            let r = -(a - 0.5) * (a - 0.5);
            buffer.push(Transition {
                agent_id: 0,
                obs: obs.clone(),
                action: a,
                reward: r,
                next_obs: obs.clone(),
                done: true,
            });
            if buffer.len() >= cfg.batch_size {
                agent.update(&buffer, &mut rng).unwrap();
            }
        }
        let a = agent.act(&obs).unwrap();
        assert!((a - 0.5).abs() < 0.05, "actor converged to {a}");
    }

    #[test]
    fn update_requires_a_full_batch() {
        let cfg = train_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut agent = DdpgAgent::new(2, &cfg, &mut rng).unwrap();
        let buffer = ReplayBuffer::new(16);
        assert!(matches!(
            agent.update(&buffer, &mut rng),
            Err(Error::BufferTooSmall { .. })
        ));
    }

    #[test]
    fn actor_actions_stay_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut agent = DdpgAgent::new(7, &train_cfg(), &mut rng).unwrap();
        // Blow up the final layer; tanh saturation must still bound actions.
        for w in &mut agent.actor.layers.last_mut().unwrap().weights {
            *w = 1e9;
        }
        for i in 0..50 {
            let obs = build_observation(
                ObsVariant::Bilateral,
                (i as f64).sin().abs() * 30.0,
                0.0,
                Some((5.0 + i as f64, -3.0)),
                Some((8.0, 1.0)),
                20.0,
            );
            let a = agent.act(&obs).unwrap();
            assert!((ACCEL_MIN..=ACCEL_MAX).contains(&a));
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let agent = DdpgAgent::new(7, &train_cfg(), &mut rng).unwrap();
        let ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            layer_sizes: agent.actor.layer_sizes(),
            seed: 21,
            episodes_trained: 3,
            variant: ObsVariant::Bilateral,
            actor: agent.actor.clone(),
        };
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(loaded.actor, ckpt.actor);
        // Identical actions on a batch of observations.
        for k in 0..20 {
            let obs = build_observation(
                ObsVariant::Bilateral,
                k as f64,
                0.1,
                Some((20.0, -1.0)),
                Some((15.0, 0.5)),
                20.0,
            );
            assert_eq!(
                agent.actor.forward(&obs).unwrap(),
                loaded.actor.forward(&obs).unwrap()
            );
        }
    }

    #[test]
    fn shared_policy_gives_identical_actions_for_identical_observations() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let agent = DdpgAgent::new(7, &train_cfg(), &mut rng).unwrap();
        let mut policy = ActorPolicy::new(&agent.actor);
        let obs = build_observation(
            ObsVariant::Bilateral,
            18.0,
            0.4,
            Some((22.0, -1.5)),
            Some((19.0, 0.7)),
            20.0,
        );
        // Two agents presented the same observation act identically.
        let a = crate::env::Policy::act(&mut policy, &obs);
        let b = crate::env::Policy::act(&mut policy, &obs);
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_header_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let agent = DdpgAgent::new(5, &train_cfg(), &mut rng).unwrap();
        let mut ckpt = Checkpoint {
            format_version: CHECKPOINT_VERSION,
            layer_sizes: vec![5, 64, 64, 1],
            seed: 0,
            episodes_trained: 0,
            variant: ObsVariant::Cfm,
            actor: agent.actor,
        };
        ckpt.layer_sizes = vec![7, 64, 64, 1]; // wrong header
        ckpt.save(&path).unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
    }
}
