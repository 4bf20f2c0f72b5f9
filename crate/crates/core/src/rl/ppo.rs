//! Returns, advantages and the clipped-surrogate PPO update.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::env::Observation;
use super::policy::PolicyParams;
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub lr: f64,
    pub epochs_per_batch: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub batch_episodes: usize,
    pub max_grad_norm: f64,
    pub adam_eps: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            lr: 3e-4,
            epochs_per_batch: 10,
            minibatch: 64,
            value_coef: 0.5,
            entropy_coef: 0.0,
            batch_episodes: 8,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.lam > 0.0 && self.lam <= 1.0) {
            return bad("lam must lie in (0, 1]");
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return bad("clip_eps must lie in (0, 1)");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be non-negative");
        }
        if self.epochs_per_batch == 0 || self.minibatch == 0 || self.batch_episodes == 0 {
            return bad("epochs_per_batch, minibatch and batch_episodes must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}

/// `returns[t] = sum_k gamma^k rewards[t + k]`.
pub fn discounted_returns<T: Scalar>(rewards: &[T], gamma: T) -> Vec<T> {
    let mut out = vec![T::zero(); rewards.len()];
    let mut acc = T::zero();
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// Generalized advantage estimates. `values` carries one bootstrap entry past
/// the last reward.
pub fn gae_advantages<T: Scalar>(rewards: &[T], values: &[T], gamma: T, lam: T) -> Result<Vec<T>> {
    if values.len() != rewards.len() + 1 {
        return Err(Error::InvalidInput(format!(
            "gae needs {} values, got {}",
            rewards.len() + 1,
            values.len()
        )));
    }
    let mut out = vec![T::zero(); rewards.len()];
    let mut acc = T::zero();
    for t in (0..rewards.len()).rev() {
        let delta = rewards[t] + gamma * values[t + 1] - values[t];
        acc = delta + gamma * lam * acc;
        out[t] = acc;
    }
    Ok(out)
}

/// `min(r A, clip(r, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate<T: Scalar>(ratio: T, advantage: T, eps: T) -> T {
    let clipped = ratio.max(T::one() - eps).min(T::one() + eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Shifts to zero mean and scales to unit (population) variance.
pub fn normalize_advantages<T: Scalar>(adv: &mut [T]) {
    if adv.is_empty() {
        return;
    }
    let n = T::lit(adv.len() as f64);
    let mean = adv.iter().copied().sum::<T>() / n;
    let var = adv.iter().map(|a| (*a - mean) * (*a - mean)).sum::<T>() / n;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = if std > T::zero() { (*a - mean) / std } else { T::zero() };
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub observation: Observation<T>,
    pub scores: Vec<T>,
    pub old_log_prob: T,
    pub advantage: T,
    pub ret: T,
}

/// A training batch with returns and normalized advantages.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory<T> {
    pub samples: Vec<Sample<T>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Minibatch loss to minimise, `-(surrogate) + c_v (V - R)^2 - c_e H`,
/// averaged over samples, with its parts.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts<T> {
    pub total: T,
    pub policy: T,
    pub value: T,
    pub entropy: T,
    pub mean_ratio: T,
    pub clip_fraction: T,
    pub approx_kl: T,
}

pub fn ppo_loss<T: Scalar>(params: &PolicyParams<T>, batch: &[&Sample<T>], h: &Hyperparams) -> LossParts<T> {
    ppo_loss_and_grad(params, batch, h, false).0
}

/// Loss and, when `want_grad`, its analytic gradient with respect to
/// `params.theta`.
pub fn ppo_loss_and_grad<T: Scalar>(
    params: &PolicyParams<T>,
    batch: &[&Sample<T>],
    h: &Hyperparams,
    want_grad: bool,
) -> (LossParts<T>, Vec<T>) {
    let eps = T::lit(h.clip_eps);
    let c_v = T::lit(h.value_coef);
    let c_e = T::lit(h.entropy_coef);
    let m = T::lit(batch.len() as f64);
    let mut grad = if want_grad {
        vec![T::zero(); params.len()]
    } else {
        Vec::new()
    };
    let mut parts = LossParts::<T>::default();
    for s in batch {
        let n = s.scores.len();
        let logp = params.log_prob(&s.observation, &s.scores);
        let log_ratio = logp - s.old_log_prob;
        let ratio = log_ratio.exp();
        let surrogate = clipped_surrogate(ratio, s.advantage, eps);
        let v = params.value(&s.observation);
        let v_err = v - s.ret;
        let ent = params.entropy(n);
        parts.policy += -surrogate / m;
        parts.value += v_err * v_err / m;
        parts.entropy += ent / m;
        parts.mean_ratio += ratio / m;
        if (ratio - T::one()).abs() > eps {
            parts.clip_fraction += T::one() / m;
        }
        parts.approx_kl += ((ratio - T::one()) - log_ratio) / m;
        if want_grad {
            // unclipped branch active: d(-r A)/d theta = -A r d logp
            if ratio * s.advantage <= surrogate {
                params.add_log_prob_grad(&s.observation, &s.scores, -s.advantage * ratio / m, &mut grad);
            }
            params.add_value_grad(&s.observation, T::lit(2.0) * c_v * v_err / m, &mut grad);
            if c_e != T::zero() {
                params.add_entropy_grad(n, -c_e / m, &mut grad);
            }
        }
    }
    parts.total = parts.policy + c_v * parts.value - c_e * parts.entropy;
    (parts, grad)
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [T], grad: &[T], lr: f64, eps: f64) {
        let (b1, b2) = (T::lit(0.9), T::lit(0.999));
        self.t += 1;
        let c1 = T::one() - b1.powi(self.t as i32);
        let c2 = T::one() - b2.powi(self.t as i32);
        let lr = T::lit(lr);
        let eps = T::lit(eps);
        for i in 0..theta.len() {
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

fn clip_grad_norm<T: Scalar>(grad: &mut [T], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| *g * *g).sum::<T>().sqrt();
    let max_norm = T::lit(max_norm);
    if norm > max_norm {
        let scale = max_norm / (norm + T::lit(1e-6));
        for g in grad.iter_mut() {
            *g *= scale;
        }
    }
    norm.to_f64_lossy()
}

/// Several epochs of minibatch gradient steps on the clipped objective.
pub fn ppo_update<T: Scalar>(
    params: &PolicyParams<T>,
    batch: &Trajectory<T>,
    h: &Hyperparams,
    opt: &mut Adam<T>,
    rng: &mut RngStream,
) -> Result<(PolicyParams<T>, UpdateStats)> {
    if batch.samples.is_empty() {
        return Err(Error::InvalidInput("empty PPO batch".into()));
    }
    let mut p = params.clone();
    let mut idx: Vec<usize> = (0..batch.samples.len()).collect();
    let mut stats = UpdateStats::default();
    let mut acc = [0.0f64; 7];
    for _ in 0..h.epochs_per_batch {
        idx.shuffle(rng);
        for chunk in idx.chunks(h.minibatch) {
            let mb: Vec<&Sample<T>> = chunk.iter().map(|&i| &batch.samples[i]).collect();
            let (parts, mut grad) = ppo_loss_and_grad(&p, &mb, h, true);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "PPO loss {} (policy {}, value {}) at minibatch {}",
                    parts.total, parts.policy, parts.value, stats.minibatches
                )));
            }
            let norm = clip_grad_norm(&mut grad, h.max_grad_norm);
            opt.step(&mut p.theta, &grad, h.lr, h.adam_eps);
            p.clamp_log_std();
            for (a, v) in acc.iter_mut().zip([
                parts.mean_ratio,
                parts.clip_fraction,
                parts.policy,
                parts.value,
                parts.entropy,
                parts.approx_kl,
            ]) {
                *a += v.to_f64_lossy();
            }
            acc[6] += norm;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches as f64;
    stats.mean_ratio = acc[0] / k;
    stats.clip_fraction = acc[1] / k;
    stats.policy_loss = acc[2] / k;
    stats.value_loss = acc[3] / k;
    stats.entropy = acc[4] / k;
    stats.approx_kl = acc[5] / k;
    stats.grad_norm = acc[6] / k;
    if !p.is_finite() {
        return Err(Error::NonFinite("parameters became non-finite".into()));
    }
    Ok((p, stats))
}
