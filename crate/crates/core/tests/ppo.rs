use bcast_core::engine::RngStream;
use bcast_core::rl::ppo::{
    clipped_surrogate, discounted_returns, gae_advantages, normalize_advantages, ppo_loss, ppo_loss_and_grad, ppo_update, Adam,
    Hyperparams, Sample, Trajectory,
};
use bcast_core::rl::{Observation, PolicyParams};
use proptest::prelude::*;
use rand::Rng;

/// A_t = sum_{k >= 0} (gamma lam)^k delta_{t+k}, summed term by term.
fn gae_brute(r: &[f64], v: &[f64], gamma: f64, lam: f64) -> Vec<f64> {
    let t_max = r.len();
    (0..t_max)
        .map(|t| {
            let mut a = 0.0;
            for k in 0..t_max - t {
                let delta = r[t + k] + gamma * v[t + k + 1] - v[t + k];
                a += (gamma * lam).powi(k as i32) * delta;
            }
            a
        })
        .collect()
}

#[test]
fn gae_matches_brute_force() {
    let mut rng = RngStream::derive(8, "gae");
    for _ in 0..50 {
        let t = rng.random_range(1..30);
        let r: Vec<f64> = (0..t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..=t).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (g, l) = (rng.random_range(0.5..1.0), rng.random_range(0.0..1.0));
        let fast = gae_advantages(&r, &v, g, l).unwrap();
        for (a, b) in fast.iter().zip(gae_brute(&r, &v, g, l)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
    // ten-step instance pinned
    let r = [0.1, 0.0, -0.3, 0.2, 0.0, 0.0, 1.0, -1.0, 0.5, 2.0];
    let v = [0.0, 0.5, 0.2, -0.1, 0.3, 0.3, 0.9, 0.0, 0.4, 1.1, 0.0];
    let fast = gae_advantages(&r, &v, 0.99, 0.95).unwrap();
    for (a, b) in fast.iter().zip(gae_brute(&r, &v, 0.99, 0.95)) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn random_batch(rng: &mut RngStream, p: &PolicyParams<f64>, n: usize, eps: f64) -> Vec<Sample<f64>> {
    let width = p.width();
    (0..n)
        .map(|_| {
            let degree = rng.random_range(1..=width);
            let mut latencies: Vec<f64> = (0..width).map(|_| rng.random_range(0.0..1.0)).collect();
            let mask: Vec<bool> = (0..width).map(|i| i < degree).collect();
            for l in latencies.iter_mut().skip(degree) {
                *l = 1.0;
            }
            let observation = Observation { latencies, mask };
            let scores: Vec<f64> = (0..degree).map(|_| rng.random_range(-2.0..2.0)).collect();
            let logp = p.log_prob(&observation, &scores);
            // keep every ratio well away from the clip kinks
            let shift = loop {
                let s: f64 = rng.random_range(-0.6..0.6);
                let r = (-s).exp();
                if (r - (1.0 - eps)).abs() > 0.03 && (r - (1.0 + eps)).abs() > 0.03 {
                    break s;
                }
            };
            Sample {
                observation,
                scores,
                old_log_prob: logp + shift,
                advantage: rng.random_range(-2.0..2.0),
                ret: rng.random_range(-1.0..1.0),
            }
        })
        .collect()
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let h = Hyperparams {
        entropy_coef: 0.01,
        ..Hyperparams::default()
    };
    for draw in 0..10 {
        let mut rng = RngStream::derive(draw, "gradcheck");
        let hidden = rng.random_range(1..5);
        let width = rng.random_range(2..6);
        let mut p = PolicyParams::<f64>::init(hidden, width, rng.random_range(-1.0..0.5), &mut rng);
        for t in p.theta.iter_mut() {
            *t += rng.random_range(-0.5..0.5);
        }
        let batch = random_batch(&mut rng, &p, 8, h.clip_eps);
        let refs: Vec<&Sample<f64>> = batch.iter().collect();
        let (_, grad) = ppo_loss_and_grad(&p, &refs, &h, true);
        let step = 1e-5;
        let mut numeric = vec![0.0; p.len()];
        for i in 0..p.len() {
            let mut plus = p.clone();
            plus.theta[i] += step;
            let mut minus = p.clone();
            minus.theta[i] -= step;
            numeric[i] = (ppo_loss(&plus, &refs, &h).total - ppo_loss(&minus, &refs, &h).total) / (2.0 * step);
        }
        let diff: f64 = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        assert!(diff / scale < 1e-4, "draw {draw}: relative error {}", diff / scale);
        for (i, (a, b)) in grad.iter().zip(&numeric).enumerate() {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()) + 1e-7, "draw {draw} param {i}: {a} vs {b}");
        }
    }
}

#[test]
fn surrogate_clip_cases() {
    assert_eq!(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
    assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    assert_eq!(clipped_surrogate(1.0, 1.0, 0.2), 1.0);
    assert_eq!(clipped_surrogate(2.0, -1.0, 0.2), -2.0);
    assert_eq!(clipped_surrogate(0.5, 1.0, 0.2), 0.5);
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let mut rng = RngStream::derive(1, "zero-lr");
    let p = PolicyParams::<f64>::init(4, 5, 0.0, &mut rng);
    let batch = Trajectory {
        samples: random_batch(&mut rng, &p, 100, 0.2),
    };
    let h = Hyperparams {
        lr: 0.0,
        ..Hyperparams::default()
    };
    let mut opt = Adam::new(p.len());
    let (q, stats) = ppo_update(&p, &batch, &h, &mut opt, &mut RngStream::derive(1, "mb")).unwrap();
    assert_eq!(q.theta, p.theta);
    assert_eq!(stats.minibatches, 10 * 2);
}

#[test]
fn non_finite_batch_is_rejected() {
    let mut rng = RngStream::derive(2, "nan");
    let p = PolicyParams::<f64>::init(2, 3, 0.0, &mut rng);
    let mut samples = random_batch(&mut rng, &p, 4, 0.2);
    samples[1].advantage = f64::NAN;
    let err = ppo_update(&p, &Trajectory { samples }, &Hyperparams::default(), &mut Adam::new(p.len()), &mut rng);
    assert!(matches!(err, Err(bcast_core::Error::NonFinite(_))));
}

#[test]
fn terminal_reward_returns() {
    let r = discounted_returns(&[0.0, 0.0, 0.0, 2.0], 0.99);
    for (t, v) in r.iter().enumerate() {
        assert!((v - 0.99f64.powi(3 - t as i32) * 2.0).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn surrogate_is_the_smaller_branch(ratio in 0.0f64..5.0, adv in -10.0f64..10.0, eps in 0.01f64..0.99) {
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
        let l = clipped_surrogate(ratio, adv, eps);
        prop_assert!(l <= (ratio * adv).max(clipped * adv));
        prop_assert!(l == (ratio * adv).min(clipped * adv));
    }

    #[test]
    fn normalized_advantages(mut a in prop::collection::vec(-1e3f64..1e3, 2..300)) {
        let spread = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - a.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        normalize_advantages(&mut a);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        prop_assert!(mean.abs() < 1e-10);
        prop_assert!((var - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clip_fraction_is_a_fraction(seed in 0u64..1000) {
        let mut rng = RngStream::derive(seed, "clipfrac");
        let p = PolicyParams::<f64>::init(2, 3, 0.0, &mut rng);
        let batch = random_batch(&mut rng, &p, 16, 0.2);
        let refs: Vec<&Sample<f64>> = batch.iter().collect();
        let parts = ppo_loss(&p, &refs, &Hyperparams::default());
        prop_assert!((0.0..=1.0).contains(&parts.clip_fraction));
    }
}
