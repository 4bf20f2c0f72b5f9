//! Noisy-sort ranking policy.
//!
//! A small scorer maps each slot's normalized latency to a mean score;
//! Gaussian noise with a shared scale is added and the slots are sorted by
//! score, highest first. Latencies are standardized across the node's own
//! neighbors and the mean scores are centered, since a ranking only sees
//! score differences. The log-density of the noisy score vector serves
//! as the action log-probability. A separate value network reads the whole
//! padded observation.
//!
//! All weights live in one flat vector so the optimizer and finite
//! difference checks can treat them uniformly.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::env::{Observation, RankingAction};
use crate::engine::RngStream;
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams<T> {
    hidden: usize,
    width: usize,
    pub theta: Vec<T>,
}

/// Offsets into `theta`.
#[derive(Clone, Copy, Debug)]
struct Layout {
    h: usize,
    d: usize,
}

impl Layout {
    fn s_w1(&self) -> usize {
        0
    }
    fn s_b1(&self) -> usize {
        self.h
    }
    fn s_w2(&self) -> usize {
        2 * self.h
    }
    fn s_b2(&self) -> usize {
        3 * self.h
    }
    fn log_std(&self) -> usize {
        3 * self.h + 1
    }
    fn v_w1(&self) -> usize {
        3 * self.h + 2
    }
    fn v_b1(&self) -> usize {
        self.v_w1() + self.h * self.d
    }
    fn v_w2(&self) -> usize {
        self.v_b1() + self.h
    }
    fn v_b2(&self) -> usize {
        self.v_w2() + self.h
    }
    fn len(&self) -> usize {
        self.v_b2() + 1
    }
}

/// A sampled (or greedy) ranking with its bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranking<T> {
    pub action: RankingAction,
    pub scores: Vec<T>,
    pub log_prob: T,
    pub value: T,
}

impl<T: Scalar> PolicyParams<T> {
    /// All-zero weights: constant zero scores and zero value.
    pub fn zeroed(hidden: usize, width: usize, log_std: f64) -> Self {
        let layout = Layout { h: hidden, d: width };
        let mut theta = vec![T::zero(); layout.len()];
        theta[layout.log_std()] = T::lit(log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Self { hidden, width, theta }
    }

    /// Random hidden layers with zero output layers, so the fresh scorer
    /// outputs 0 for every slot (uniformly random rankings under noise).
    pub fn init(hidden: usize, width: usize, log_std: f64, rng: &mut RngStream) -> Self {
        let mut p = Self::zeroed(hidden, width, log_std);
        let l = p.layout();
        for k in 0..hidden {
            p.theta[l.s_w1() + k] = T::lit(2.0 * rng.uniform() - 1.0) * T::lit(4.0);
            p.theta[l.s_b1() + k] = T::lit(2.0 * rng.uniform() - 1.0) * T::lit(2.0);
        }
        let scale = 1.0 / (width.max(1) as f64).sqrt();
        for i in 0..hidden * width {
            p.theta[l.v_w1() + i] = T::lit((2.0 * rng.uniform() - 1.0) * scale);
        }
        p
    }

    fn layout(&self) -> Layout {
        Layout {
            h: self.hidden,
            d: self.width,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Observation width the value network expects.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn log_std(&self) -> T {
        self.theta[self.layout().log_std()]
    }

    pub fn clamp_log_std(&mut self) {
        let i = self.layout().log_std();
        self.theta[i] = self.theta[i].max(T::lit(LOG_STD_MIN)).min(T::lit(LOG_STD_MAX));
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    /// Scorer output for one standardized latency.
    pub fn score_mean(&self, x: T) -> T {
        let l = self.layout();
        let th = &self.theta;
        let mut mu = th[l.s_b2()];
        for k in 0..self.hidden {
            let h = (th[l.s_w1() + k] * x + th[l.s_b1() + k]).tanh();
            mu += th[l.s_w2() + k] * h;
        }
        mu
    }

    /// Centered mean score of every unmasked slot.
    pub fn slot_means(&self, obs: &Observation<T>) -> Vec<T> {
        let mut mu: Vec<T> = standardized(obs).into_iter().map(|x| self.score_mean(x)).collect();
        center(&mut mu);
        mu
    }

    pub fn value(&self, obs: &Observation<T>) -> T {
        let l = self.layout();
        let th = &self.theta;
        let mut v = th[l.v_b2()];
        for k in 0..self.hidden {
            let row = &th[l.v_w1() + k * self.width..l.v_w1() + (k + 1) * self.width];
            let pre: T = row.iter().zip(&obs.latencies).map(|(w, x)| *w * *x).sum::<T>() + th[l.v_b1() + k];
            v += th[l.v_w2() + k] * pre.tanh();
        }
        v
    }

    /// Log-density of `scores` under the current policy:
    /// `sum_i [ -z_i^2/2 - log_std - ln(2 pi)/2 ]`, `z_i = (s_i - mu_i) / std`.
    pub fn log_prob(&self, obs: &Observation<T>, scores: &[T]) -> T {
        let log_std = self.log_std();
        let inv_std = (-log_std).exp();
        let half_ln_2pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
        let half = T::lit(0.5);
        scores
            .iter()
            .zip(self.slot_means(obs))
            .map(|(&s, mu)| {
                let z = (s - mu) * inv_std;
                -half * z * z - log_std - half_ln_2pi
            })
            .sum()
    }

    /// Entropy of the score distribution over `n` slots.
    pub fn entropy(&self, n: usize) -> T {
        let c = T::lit(0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln());
        T::lit(n as f64) * (c + self.log_std())
    }

    /// `grad += coef * d log_prob(obs, scores) / d theta`.
    pub fn add_log_prob_grad(&self, obs: &Observation<T>, scores: &[T], coef: T, grad: &mut [T]) {
        let l = self.layout();
        let th = &self.theta;
        let inv_var = (T::lit(-2.0) * self.log_std()).exp();
        let mut d_log_std = T::zero();
        let mut gs: Vec<T> = scores
            .iter()
            .zip(self.slot_means(obs))
            .map(|(&s, mu)| {
                let diff = s - mu;
                d_log_std += diff * diff * inv_var - T::one();
                coef * diff * inv_var
            })
            .collect();
        // centering passes only the deviation from the mean through
        center(&mut gs);
        let mut hs = vec![T::zero(); self.hidden];
        for (g, x) in gs.into_iter().zip(standardized(obs)) {
            for (k, h) in hs.iter_mut().enumerate() {
                *h = (th[l.s_w1() + k] * x + th[l.s_b1() + k]).tanh();
            }
            grad[l.s_b2()] += g;
            for (k, &h) in hs.iter().enumerate() {
                grad[l.s_w2() + k] += g * h;
                let back = g * th[l.s_w2() + k] * (T::one() - h * h);
                grad[l.s_b1() + k] += back;
                grad[l.s_w1() + k] += back * x;
            }
        }
        grad[l.log_std()] += coef * d_log_std;
    }

    /// `grad += coef * d entropy(n) / d theta`.
    pub fn add_entropy_grad(&self, n: usize, coef: T, grad: &mut [T]) {
        grad[self.layout().log_std()] += coef * T::lit(n as f64);
    }

    /// `grad += coef * d value(obs) / d theta`.
    pub fn add_value_grad(&self, obs: &Observation<T>, coef: T, grad: &mut [T]) {
        let l = self.layout();
        let th = &self.theta;
        grad[l.v_b2()] += coef;
        for k in 0..self.hidden {
            let start = l.v_w1() + k * self.width;
            let row = &th[start..start + self.width];
            let pre: T = row.iter().zip(&obs.latencies).map(|(w, x)| *w * *x).sum::<T>() + th[l.v_b1() + k];
            let h = pre.tanh();
            grad[l.v_w2() + k] += coef * h;
            let back = coef * th[l.v_w2() + k] * (T::one() - h * h);
            grad[l.v_b1() + k] += back;
            for (g, &x) in grad[start..start + self.width].iter_mut().zip(&obs.latencies) {
                *g += back * x;
            }
        }
    }
}

/// Unmasked latencies shifted and scaled to zero mean and unit variance;
/// all zero when they do not vary.
fn standardized<T: Scalar>(obs: &Observation<T>) -> Vec<T> {
    let xs = &obs.latencies[..obs.degree()];
    if xs.is_empty() {
        return Vec::new();
    }
    let n = T::lit(xs.len() as f64);
    let mean = xs.iter().copied().sum::<T>() / n;
    let sd = (xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n).sqrt();
    if sd <= T::lit(1e-9) {
        return vec![T::zero(); xs.len()];
    }
    xs.iter().map(|&x| (x - mean) / sd).collect()
}

fn center<T: Scalar>(v: &mut [T]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().copied().sum::<T>() / T::lit(v.len() as f64);
    for x in v.iter_mut() {
        *x -= mean;
    }
}

/// Scores every unmasked slot and sorts descending (ties: lower slot first).
/// With `rng == None` the policy is greedy and the scores are the means.
pub fn sample_ranking<T: Scalar>(params: &PolicyParams<T>, obs: &Observation<T>, rng: Option<&mut RngStream>) -> Ranking<T> {
    let means = params.slot_means(obs);
    let scores: Vec<T> = match rng {
        None => means,
        Some(rng) => {
            let std = params.log_std().exp();
            means
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + std * T::lit(z)
                })
                .collect()
        }
    };
    let mut permutation: Vec<usize> = (0..scores.len()).collect();
    permutation.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    Ranking {
        log_prob: params.log_prob(obs, &scores),
        value: params.value(obs),
        action: RankingAction { permutation },
        scores,
    }
}
