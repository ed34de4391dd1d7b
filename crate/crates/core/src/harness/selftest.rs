//! Built-in consistency checks run by `hddpg selftest`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::NoiseState;
use crate::maze::rewards::{flat_reward, high_reward, low_reward};
use crate::nn::{xavier_init_with, Activation, MlpNet};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_all() -> Vec<SuiteResult> {
    vec![gradient_check(20, 7), reward_tables(), noise_rule()]
}

/// Random networks covering every activation, in both hidden and head roles.
pub fn random_net(rng: &mut ChaCha8Rng, index: usize) -> MlpNet {
    let acts = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Identity,
    ];
    let hidden_act = acts[index % 4];
    let n_in = rng.random_range(1..6);
    let hidden: Vec<usize> = (0..rng.random_range(1..3))
        .map(|_| rng.random_range(2..8))
        .collect();
    let head: Vec<(usize, Activation)> = (0..rng.random_range(1..4))
        .map(|k| (rng.random_range(1..3), acts[(index + k + 1) % 4]))
        .collect();
    let mut net = xavier_init_with(n_in, &hidden, hidden_act, &head, rng).expect("valid shape");
    // non-zero biases so that every unit is exercised away from the origin
    for layer in net.layers_mut() {
        for b in layer.biases_mut() {
            *b = rng.random_range(-0.5..0.5);
        }
    }
    net
}

/// Worst relative error between backpropagated and central-difference
/// gradients of `w · f(x)` over all parameters and inputs of `net`.
pub fn max_gradient_error(net: &MlpNet, input: &[f64], weights: &[f64], eps: f64) -> f64 {
    let objective = |n: &MlpNet, x: &[f64]| -> f64 {
        n.forward(x)
            .expect("input fits")
            .iter()
            .zip(weights)
            .map(|(y, w)| y * w)
            .sum()
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let (grads, dx) = net.backward(input, weights).expect("shapes fit");
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let mut worst = 0.0f64;
    let n = net.num_params();
    for i in 0..n {
        let mut plus = net.clone();
        *plus.params_mut().nth(i).expect("index in range") += eps;
        let mut minus = net.clone();
        *minus.params_mut().nth(i).expect("index in range") -= eps;
        let numeric = (objective(&plus, input) - objective(&minus, input)) / (2.0 * eps);
        worst = worst.max(rel(analytic[i], numeric));
    }
    for j in 0..input.len() {
        let mut xp = input.to_vec();
        xp[j] += eps;
        let mut xm = input.to_vec();
        xm[j] -= eps;
        let numeric = (objective(net, &xp) - objective(net, &xm)) / (2.0 * eps);
        worst = worst.max(rel(dx[j], numeric));
    }
    worst
}

pub fn gradient_check(nets: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..nets {
        let net = random_net(&mut rng, k);
        let x: Vec<f64> = (0..net.input_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let w: Vec<f64> = (0..net.output_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        worst = worst.max(max_gradient_error(&net, &x, &w, 1e-5));
    }
    SuiteResult {
        name: "gradient-check",
        passed: worst <= 1e-4,
        detail: format!("{nets} nets, worst relative error {worst:.3e} (limit 1e-4)"),
    }
}

pub fn reward_tables() -> SuiteResult {
    let cases: [(&str, f64, f64); 12] = [
        ("low collision", low_reward(true, true, 1.0), -500.0),
        ("low subgoal", low_reward(false, true, -1.0), 100.0),
        ("low progress", low_reward(false, false, 0.05), 1.0),
        ("low zero progress", low_reward(false, false, 0.0), -8.0),
        ("low regress", low_reward(false, false, -0.1), -8.0),
        ("high goal", high_reward(false, true, 200.0, 0.4), 1080.0),
        (
            "high collision",
            high_reward(true, false, -600.0, 0.4),
            -740.0,
        ),
        ("high both flags", high_reward(true, true, 0.0, 0.4), -500.0),
        ("high neutral", high_reward(false, false, 0.0, 0.4), 0.0),
        ("flat collision", flat_reward(true, 0.1, true), -500.0),
        ("flat progress", flat_reward(false, 0.1, false), 2.0),
        ("flat zero progress", flat_reward(false, 0.0, false), -8.0),
    ];
    let failed: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-9)
        .map(|(name, got, want)| format!("{name}: {got} != {want}"))
        .collect();
    SuiteResult {
        name: "reward-table",
        passed: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} cases", cases.len())
        } else {
            failed.join("; ")
        },
    }
}

pub fn noise_rule() -> SuiteResult {
    let distances = [0.1, 0.3, 0.2, 0.0, 0.25, 0.19, 0.21, 0.2, 5.0, 0.05];
    let mut n = NoiseState::default();
    let mut net_growth = 0i32;
    for &d in &distances {
        n = n.adapt(d);
        net_growth += if d <= 0.2 { 1 } else { -1 };
    }
    let expected = 0.2 * 1.01f64.powi(net_growth);
    let err = (n.sigma - expected).abs();
    SuiteResult {
        name: "noise-rule",
        passed: err <= 1e-12,
        detail: format!("sigma {} vs {expected} (error {err:.1e})", n.sigma),
    }
}
