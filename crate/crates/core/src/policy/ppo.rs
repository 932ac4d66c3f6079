//! PPO with a clipped surrogate, GAE advantages and an externally supplied
//! bootstrap for the value beyond the rollout horizon.

use rand::seq::SliceRandom;
use rand::Rng;

use super::network::{log_softmax, PolicyParams};
use crate::binpack::Observation;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_epsilon: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub normalize_advantages: bool,
    /// Rollout length in policy steps.
    pub rollout_len: usize,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_epsilon: 0.2,
            learning_rate: 3e-4,
            epochs: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            normalize_advantages: true,
            rollout_len: 128,
            hidden: 64,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::invalid("gamma and gae_lambda must lie in [0, 1]"));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::invalid("clip epsilon must lie in (0, 1)"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be finite and >= 0"));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.hidden == 0 {
            return Err(Error::invalid(
                "epochs, minibatch size and hidden width must be >= 1",
            ));
        }
        if self.rollout_len == 0 {
            return Err(Error::invalid("rollout length x must be >= 1"));
        }
        if self.value_coef < 0.0 || self.entropy_coef < 0.0 {
            return Err(Error::invalid("loss coefficients must be >= 0"));
        }
        Ok(())
    }
}

/// One policy step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: usize,
    pub logprob: f64,
    pub reward: f64,
    pub value: f64,
    pub is_rollout_end: bool,
}

/// Discounted returns with `bootstrap` standing in for the value after the
/// last transition, and GAE(gamma, lambda) advantages using the same
/// bootstrap. Advantages are returned unnormalized.
pub fn returns_and_advantages(
    traj: &[Transition],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if traj.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let len = traj.len();
    let mut returns = vec![0.0; len];
    let mut advantages = vec![0.0; len];
    let mut ret = bootstrap;
    let mut next_value = bootstrap;
    let mut gae = 0.0;
    for t in (0..len).rev() {
        let tr = &traj[t];
        ret = tr.reward + gamma * ret;
        returns[t] = ret;
        let delta = tr.reward + gamma * next_value - tr.value;
        gae = delta + gamma * lambda * gae;
        advantages[t] = gae;
        next_value = tr.value;
    }
    Ok((returns, advantages))
}

/// Zero mean, unit variance; left alone for batches of one.
pub fn normalize(values: &mut [f64]) {
    if values.len() < 2 {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    values
        .iter_mut()
        .for_each(|v| *v = (*v - mean) / (std + 1e-8));
}

/// Everything one PPO update consumes.
#[derive(Debug, Clone, Default)]
pub struct Batch {
    pub transitions: Vec<Transition>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossParts {
    /// `-mean(min(ratio * A, clip(ratio) * A))`
    pub policy: f64,
    /// `mean((V - R)^2)`
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// `policy + value_coef * value - entropy_coef * entropy`
    pub total: f64,
}

/// Minibatch loss over `indices` of `batch` and, when `grad` is given, its
/// gradient with respect to every parameter (overwritten).
pub fn loss(
    params: &PolicyParams,
    batch: &Batch,
    indices: &[usize],
    cfg: &PpoConfig,
    mut grad: Option<&mut [f64]>,
) -> LossParts {
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    let m = indices.len() as f64;
    let (lo, hi) = (1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
    let mut parts = LossParts::default();
    let mut clipped = 0usize;

    for &k in indices {
        let tr = &batch.transitions[k];
        let adv = batch.advantages[k];
        let ret = batch.returns[k];
        let x = tr.obs.as_slice();
        let act = params.forward_cached(x);
        let logp = log_softmax(&act.logits);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();

        let ratio = (logp[tr.action] - tr.logprob).exp();
        let unclipped = ratio * adv;
        let bounded = ratio.clamp(lo, hi) * adv;
        let surrogate = unclipped.min(bounded);
        if ratio < lo || ratio > hi {
            clipped += 1;
        }
        let entropy = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        let err = act.value - ret;

        parts.policy -= surrogate / m;
        parts.value += err * err / m;
        parts.entropy += entropy / m;

        if let Some(g) = grad.as_deref_mut() {
            // d(-surrogate)/d logp[a] is -ratio * A on the unclipped branch,
            // zero when the clipped (constant) branch is the minimum.
            let dlogp_a = if unclipped <= bounded {
                -ratio * adv / m
            } else {
                0.0
            };
            let ent_scale = -cfg.entropy_coef / m;
            let dlogits: Vec<f64> = probs
                .iter()
                .zip(&logp)
                .enumerate()
                .map(|(i, (&p, &l))| {
                    let onehot = if i == tr.action { 1.0 } else { 0.0 };
                    dlogp_a * (onehot - p) + ent_scale * (-p * (l + entropy))
                })
                .collect();
            let dvalue = cfg.value_coef * 2.0 * err / m;
            params.backward(x, &act, &dlogits, dvalue, g);
        }
    }
    parts.clip_fraction = clipped as f64 / m;
    parts.total = parts.policy + cfg.value_coef * parts.value - cfg.entropy_coef * parts.entropy;
    parts
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Loss diagnostics averaged over every minibatch of an update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Policy parameters plus optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub params: PolicyParams,
    pub adam: Adam,
}

impl Learner {
    pub fn new(params: PolicyParams) -> Self {
        let adam = Adam::new(params.data.len());
        Self { params, adam }
    }

    /// `cfg.epochs` shuffled passes of minibatch Adam steps. Nothing is
    /// committed if any minibatch produces a non-finite loss or gradient.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        batch: &Batch,
        cfg: &PpoConfig,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if batch.is_empty() {
            return Err(Error::invalid("PPO update on an empty batch"));
        }
        if batch.returns.len() != batch.len() || batch.advantages.len() != batch.len() {
            return Err(Error::invalid("batch columns have different lengths"));
        }
        if batch.advantages.iter().any(|a| !a.is_finite()) {
            return Err(Error::Divergence("non-finite advantage".into()));
        }
        let mut batch = batch.clone();
        if cfg.normalize_advantages {
            normalize(&mut batch.advantages);
        }

        let mut params = self.params.clone();
        let mut adam = self.adam.clone();
        let mut grad = vec![0.0; params.data.len()];
        let mut order: Vec<usize> = (0..batch.len()).collect();
        let mut stats = UpdateStats::default();
        let mut minibatches = 0usize;

        for _ in 0..cfg.epochs {
            order.shuffle(rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                let parts = loss(&params, &batch, chunk, cfg, Some(&mut grad));
                if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Divergence(format!(
                        "non-finite loss (policy {}, value {}, entropy {})",
                        parts.policy, parts.value, parts.entropy
                    )));
                }
                adam.step(&mut params.data, &grad, cfg.learning_rate);
                stats.policy_loss += parts.policy;
                stats.value_loss += parts.value;
                stats.entropy += parts.entropy;
                stats.clip_fraction += parts.clip_fraction;
                minibatches += 1;
            }
        }
        if !params.is_finite() {
            return Err(Error::Divergence("parameters became non-finite".into()));
        }

        let k = minibatches as f64;
        stats.policy_loss /= k;
        stats.value_loss /= k;
        stats.entropy /= k;
        stats.clip_fraction /= k;
        self.params = params;
        self.adam = adam;
        Ok(stats)
    }
}
