//! The RL -> annealer training loop and its baselines.
//!
//! Each iteration rolls the policy out for `x` steps from a starting packing,
//! runs `y` annealing steps from the policy's final packing `s_x`, and takes
//! the annealer's improvement `cost(s_x) - cost(s_{x+y})` as the value of
//! `s_x` when computing returns. Three modes share that loop:
//!
//! * [`Mode::LearnInit`] starts every iteration from a fresh random packing.
//! * [`Mode::Alternating`] hands the annealer's final packing back to the
//!   policy as the next iteration's start.
//! * [`Mode::PureRl`] is the alternating loop without annealing; the critic's
//!   own estimate at `s_x` is the bootstrap.

use std::sync::Arc;

use rand::Rng;

use crate::binpack::{Instance, Packing};
use crate::error::{Error, Result};
use crate::policy::{self, Batch, Learner, PolicyParams, PpoConfig, Transition, UpdateStats};
use crate::rng::{self, Stream};
use crate::sa::{self, SaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    LearnInit,
    Alternating,
    PureRl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RlhoConfig {
    pub mode: Mode,
    pub ppo: PpoConfig,
    /// `sa.steps` is the per-iteration annealing budget `y`.
    pub sa: SaConfig,
    pub iterations: usize,
}

impl RlhoConfig {
    pub fn new(mode: Mode, x: usize, y: usize, iterations: usize) -> Self {
        Self {
            mode,
            ppo: PpoConfig {
                rollout_len: x,
                ..PpoConfig::default()
            },
            sa: SaConfig::default().with_steps(y),
            iterations,
        }
    }

    pub fn x(&self) -> usize {
        self.ppo.rollout_len
    }

    pub fn y(&self) -> usize {
        match self.mode {
            Mode::PureRl => 0,
            _ => self.sa.steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.ppo.validate()?;
        self.sa.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be >= 1"));
        }
        Ok(())
    }
}

/// Outcome of one training iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub iteration: u64,
    pub cost_s0: usize,
    pub cost_sx: usize,
    pub cost_sxy: usize,
    /// `cost_sx - cost_sxy`
    pub ho_reward: i64,
    /// Sum of the `x` per-step rewards.
    pub rl_reward_sum: i64,
    pub bootstrap: f64,
    pub best_cost: usize,
    pub policy_steps: u64,
    /// Every packing visited during the rollout passed a full invariant check.
    pub all_feasible: bool,
    pub stats: UpdateStats,
}

struct Rollout {
    transitions: Vec<Transition>,
    reward_sum: i64,
    best_cost: usize,
    all_feasible: bool,
}

/// Rolls `params` out for `x` steps on `packing`. The environment presents
/// items from `env_rng`; actions are sampled from `policy_rng`, or taken
/// greedily when it is `None`.
fn rollout<E: Rng + ?Sized, P: Rng + ?Sized>(
    params: &PolicyParams,
    packing: &mut Packing,
    x: usize,
    env_rng: &mut E,
    mut policy_rng: Option<&mut P>,
) -> Result<Rollout> {
    let n = packing.n();
    let mut transitions = Vec::with_capacity(x);
    let mut reward_sum = 0;
    let mut best_cost = packing.cost();
    let mut all_feasible = true;
    for t in 0..x {
        let presented = env_rng.random_range(0..n);
        let obs = packing.observe(presented)?;
        let (logits, value) = params.forward(obs.as_slice())?;
        let (action, logprob) = match policy_rng.as_deref_mut() {
            Some(r) => policy::sample_action(&logits, r),
            None => {
                let a = policy::greedy_action(&logits);
                (a, policy::log_softmax(&logits)[a])
            }
        };
        let outcome = packing.apply_action(presented, action)?;
        all_feasible &= packing.check_invariants().is_ok();
        reward_sum += outcome.reward;
        best_cost = best_cost.min(packing.cost());
        transitions.push(Transition {
            obs,
            action,
            logprob,
            reward: outcome.reward as f64,
            value,
            is_rollout_end: t + 1 == x,
        });
    }
    Ok(Rollout {
        transitions,
        reward_sum,
        best_cost,
        all_feasible,
    })
}

/// Training state for one run: one instance, one policy, one seed.
#[derive(Debug, Clone)]
pub struct Trainer {
    instance: Arc<Instance>,
    cfg: RlhoConfig,
    seed: u64,
    learner: Learner,
    working: Option<Packing>,
    best_cost: usize,
    iteration: u64,
    policy_steps: u64,
}

impl Trainer {
    pub fn new(instance: Arc<Instance>, cfg: RlhoConfig, seed: u64) -> Result<Self> {
        let params = PolicyParams::init(
            instance.n(),
            cfg.ppo.hidden,
            &mut rng::derive(seed, 0, Stream::ParamInit),
        );
        Self::with_params(instance, cfg, seed, params)
    }

    pub fn with_params(
        instance: Arc<Instance>,
        cfg: RlhoConfig,
        seed: u64,
        params: PolicyParams,
    ) -> Result<Self> {
        cfg.validate()?;
        if params.n_actions() != instance.n() {
            return Err(Error::invalid(format!(
                "policy has {} actions, instance has {} items",
                params.n_actions(),
                instance.n()
            )));
        }
        let best_cost = instance.n();
        Ok(Self {
            instance,
            cfg,
            seed,
            learner: Learner::new(params),
            working: None,
            best_cost,
            iteration: 0,
            policy_steps: 0,
        })
    }

    pub fn params(&self) -> &PolicyParams {
        &self.learner.params
    }

    pub fn config(&self) -> &RlhoConfig {
        &self.cfg
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn best_cost(&self) -> usize {
        self.best_cost
    }

    pub fn policy_steps(&self) -> u64 {
        self.policy_steps
    }

    /// Packing the next alternating iteration starts from.
    pub fn working_packing(&self) -> Option<&Packing> {
        self.working.as_ref()
    }

    /// Runs the next iteration in the configured mode.
    pub fn step(&mut self) -> Result<EpisodeResult> {
        let key = self.iteration;
        let result = match self.cfg.mode {
            Mode::LearnInit => self.run_iteration_mode_a(key),
            Mode::Alternating | Mode::PureRl => self.run_iteration_persistent(key),
        }?;
        Ok(result)
    }

    /// Iterator over the remaining iterations of `cfg.iterations`.
    pub fn episodes(&mut self) -> impl Iterator<Item = Result<EpisodeResult>> + '_ {
        let remaining = (self.cfg.iterations as u64).saturating_sub(self.iteration);
        (0..remaining).map(move |_| self.step())
    }

    /// One reset-per-episode iteration whose randomness is keyed by
    /// `episode` alone, so it depends on no earlier iteration except
    /// through the policy parameters.
    pub fn run_iteration_mode_a(&mut self, episode: u64) -> Result<EpisodeResult> {
        let start = Packing::random(
            self.instance.clone(),
            &mut rng::derive(self.seed, episode, Stream::InitialPacking),
        );
        self.iterate(start, episode)
    }

    fn run_iteration_persistent(&mut self, key: u64) -> Result<EpisodeResult> {
        let start = match self.working.take() {
            Some(p) => p,
            None => Packing::random(
                self.instance.clone(),
                &mut rng::derive(self.seed, 0, Stream::InitialPacking),
            ),
        };
        self.iterate(start, key)
    }

    fn iterate(&mut self, start: Packing, key: u64) -> Result<EpisodeResult> {
        let seed = self.seed;
        let mut env_rng = rng::derive(seed, key, Stream::Environment);
        let mut policy_rng = rng::derive(seed, key, Stream::PolicySample);

        let cost_s0 = start.cost();
        let mut packing = start;
        let ro = rollout(
            &self.learner.params,
            &mut packing,
            self.cfg.x(),
            &mut env_rng,
            Some(&mut policy_rng),
        )?;
        let cost_sx = packing.cost();
        let mut best = cost_s0.min(ro.best_cost);

        let (after, bootstrap) = match self.cfg.mode {
            Mode::PureRl => {
                let presented = env_rng.random_range(0..packing.n());
                let (_, value) = self
                    .learner
                    .params
                    .forward(packing.observe(presented)?.as_slice())?;
                (packing, value)
            }
            Mode::LearnInit | Mode::Alternating => {
                let res = sa::run(
                    &packing,
                    &self.cfg.sa,
                    &mut rng::derive(seed, key, Stream::Annealing),
                );
                best = best.min(res.best.cost());
                let ho_reward = cost_sx as i64 - res.last.cost() as i64;
                (res.last, ho_reward as f64)
            }
        };
        let cost_sxy = after.cost();
        let ho_reward = cost_sx as i64 - cost_sxy as i64;

        let (returns, advantages) = policy::returns_and_advantages(
            &ro.transitions,
            bootstrap,
            self.cfg.ppo.gamma,
            self.cfg.ppo.gae_lambda,
        )?;
        let batch = Batch {
            transitions: ro.transitions,
            returns,
            advantages,
        };
        let stats = self.learner.update(
            &batch,
            &self.cfg.ppo,
            &mut rng::derive(seed, key, Stream::Shuffle),
        )?;

        if self.cfg.mode != Mode::LearnInit {
            self.working = Some(after);
        }
        self.best_cost = self.best_cost.min(best);
        self.policy_steps += self.cfg.x() as u64;
        let iteration = self.iteration;
        self.iteration += 1;

        Ok(EpisodeResult {
            iteration,
            cost_s0,
            cost_sx,
            cost_sxy,
            ho_reward,
            rl_reward_sum: ro.reward_sum,
            bootstrap,
            best_cost: self.best_cost,
            policy_steps: self.policy_steps,
            all_feasible: ro.all_feasible,
            stats,
        })
    }
}

/// Result of initializing a packing and annealing it to convergence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergedRun {
    pub cost_s0: usize,
    pub cost_sx: usize,
    pub best_cost: usize,
    pub sa_steps: usize,
}

fn converge(
    cost_s0: usize,
    start: &Packing,
    sa_cfg: &SaConfig,
    seed: u64,
    restart: u64,
) -> ConvergedRun {
    let res = sa::run_to_convergence(
        start,
        sa_cfg,
        &mut rng::derive(seed, restart, Stream::EvalAnnealing),
    );
    ConvergedRun {
        cost_s0,
        cost_sx: start.cost(),
        best_cost: res.best.cost().min(start.cost()),
        sa_steps: res.steps_run,
    }
}

/// Greedy policy rollout of `x` steps from a fresh random packing, then
/// annealing to convergence. Shares its initial packing, item presentation
/// and annealing streams with [`random_then_ho`] for the same
/// `(seed, restart)`.
pub fn evaluate_initialization(
    params: &PolicyParams,
    instance: &Arc<Instance>,
    x: usize,
    sa_cfg: &SaConfig,
    seed: u64,
    restart: u64,
) -> Result<ConvergedRun> {
    if params.n_actions() != instance.n() {
        return Err(Error::invalid("policy size does not match the instance"));
    }
    let mut packing = Packing::random(
        instance.clone(),
        &mut rng::derive(seed, restart, Stream::EvalInitialPacking),
    );
    let cost_s0 = packing.cost();
    let mut env_rng = rng::derive(seed, restart, Stream::EvalEnvironment);
    rollout(params, &mut packing, x, &mut env_rng, None::<&mut rng::Rng>)?;
    Ok(converge(cost_s0, &packing, sa_cfg, seed, restart))
}

/// `x` uniformly random actions from a fresh random packing, then annealing
/// to convergence. With `x = 0` this is cold-start annealing.
pub fn random_then_ho(
    instance: &Arc<Instance>,
    x: usize,
    sa_cfg: &SaConfig,
    seed: u64,
    restart: u64,
) -> Result<ConvergedRun> {
    let mut packing = Packing::random(
        instance.clone(),
        &mut rng::derive(seed, restart, Stream::EvalInitialPacking),
    );
    let cost_s0 = packing.cost();
    let n = instance.n();
    let mut env_rng = rng::derive(seed, restart, Stream::EvalEnvironment);
    let mut act_rng = rng::derive(seed, restart, Stream::RandomActions);
    for _ in 0..x {
        let presented = env_rng.random_range(0..n);
        packing.apply_action(presented, act_rng.random_range(0..n))?;
    }
    debug_assert!(packing.check_invariants().is_ok());
    Ok(converge(cost_s0, &packing, sa_cfg, seed, restart))
}
