//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use advjudge_core::numerics::{softmax, BackwardOptions, Network, Tensor};

/// Outcome of a finite-difference gradient comparison.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped_at_kinks: usize,
    pub max_rel_error: f64,
}

/// Loss used by the checks: cross-entropy of softmax(logits) for `label`,
/// or the raw single output when the network has one output.
fn scalar_loss(net: &Network<f64>, input: &[f64], label: usize) -> (f64, Vec<u32>) {
    let (out, trace) = net.forward_batch(input, 1).unwrap();
    let pattern = net.switch_pattern(&trace);
    if out.len() == 1 {
        return (out[0], pattern);
    }
    let p = softmax(&Tensor::vector(out).unwrap()).unwrap();
    (-p.probs()[label].ln(), pattern)
}

fn analytic(net: &Network<f64>, input: &[f64], label: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (out, trace) = net.forward_batch(input, 1).unwrap();
    let upstream = if out.len() == 1 {
        vec![1.0]
    } else {
        let p = softmax(&Tensor::vector(out).unwrap()).unwrap();
        let mut g = p.probs().to_vec();
        g[label] -= 1.0;
        g
    };
    // The upstream above is d loss / d logits, i.e. taken before any final
    // activation only when that activation is the identity; networks in
    // these checks end with an identity layer unless they have one output.
    let (grads, gx) = net.backward_batch(&trace, &upstream, BackwardOptions::default()).unwrap();
    (grads.unwrap().tensors, gx.unwrap())
}

fn rel_error(a: f64, n: f64) -> f64 {
    let denom = a.abs().max(n.abs());
    if denom < 1e-12 {
        (a - n).abs()
    } else {
        (a - n).abs() / denom
    }
}

/// Central differences with step `h` on `coords` random parameter and input
/// coordinates. Coordinates whose perturbation flips a relu or pool switch
/// are skipped and replaced, since the loss is not differentiable across
/// the switch.
pub fn check_gradients(
    net: &Network<f64>,
    input: &[f64],
    label: usize,
    h: f64,
    coords: usize,
    seed: u64,
) -> GradCheck {
    let (param_grads, input_grad) = analytic(net, input, label);
    let (_, base_pattern) = scalar_loss(net, input, label);
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as usize
    };
    let sizes: Vec<usize> = net.params().iter().map(|p| p.len()).collect();
    let total_params: usize = sizes.iter().sum();
    let mut out = GradCheck::default();
    let mut attempts = 0;
    while out.checked < coords && attempts < coords * 20 {
        attempts += 1;
        let pick = next() % (total_params + input.len());
        let (plus, minus, exact) = if pick < total_params {
            let (mut t, mut j) = (0, pick);
            while j >= sizes[t] {
                j -= sizes[t];
                t += 1;
            }
            let mut np = net.clone();
            np.params_mut()[t][j] += h;
            let plus = scalar_loss(&np, input, label);
            np.params_mut()[t][j] -= 2.0 * h;
            let minus = scalar_loss(&np, input, label);
            (plus, minus, param_grads[t][j])
        } else {
            let j = pick - total_params;
            let mut x = input.to_vec();
            x[j] += h;
            let plus = scalar_loss(net, &x, label);
            x[j] -= 2.0 * h;
            let minus = scalar_loss(net, &x, label);
            (plus, minus, input_grad[j])
        };
        if plus.1 != base_pattern || minus.1 != base_pattern {
            out.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (plus.0 - minus.0) / (2.0 * h);
        out.max_rel_error = out.max_rel_error.max(rel_error(exact, numeric));
        out.checked += 1;
    }
    out
}

/// Naive O(N^4) orthonormal 2-D DCT-II.
pub fn naive_dct2(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let alpha = |k: usize, n: usize| if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
    let mut out = vec![0.0; rows * cols];
    for u in 0..rows {
        for v in 0..cols {
            let mut s = 0.0;
            for i in 0..rows {
                for j in 0..cols {
                    s += x[i * cols + j]
                        * (std::f64::consts::PI * (2 * i + 1) as f64 * u as f64 / (2 * rows) as f64).cos()
                        * (std::f64::consts::PI * (2 * j + 1) as f64 * v as f64 / (2 * cols) as f64).cos();
                }
            }
            out[u * cols + v] = alpha(u, rows) * alpha(v, cols) * s;
        }
    }
    out
}

/// KL divergence with Neumaier-compensated summation over sorted terms.
pub fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut terms: Vec<f64> = p
        .iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(&pi, &qi)| {
            let pi_c = pi.max(1e-12);
            let qi_c = qi.max(1e-12);
            pi * (pi_c.ln() - qi_c.ln())
        })
        .collect();
    terms.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Mann-Whitney AUC by exhaustive pair comparison (ties count one half).
pub fn mann_whitney_auc(scores: &[f64], truths: &[bool]) -> f64 {
    let pos: Vec<f64> = scores.iter().zip(truths).filter(|(_, t)| **t).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(truths).filter(|(_, t)| !**t).map(|(s, _)| *s).collect();
    let mut wins = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Brute-force threshold search: for every candidate T, TPR = #adv > T,
/// TNR = #benign <= T; keeps the first (smallest) T with the largest product.
pub fn brute_force_threshold(benign: &[f64], adversarial: &[f64]) -> (f64, f64) {
    let mut candidates: Vec<f64> = benign.iter().chain(adversarial).copied().collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(f64, f64)> = None;
    for &t in &candidates {
        let tp = adversarial.iter().filter(|&&s| s > t).count();
        let tn = benign.iter().filter(|&&s| s <= t).count();
        let product = (tp as f64 / adversarial.len() as f64) * (tn as f64 / benign.len() as f64);
        match best {
            Some((_, bp)) if product <= bp => {}
            _ => best = Some((t, product)),
        }
    }
    best.unwrap()
}

/// Small learnable image set: each class lights up its own horizontal band
/// of a `1 x side x side` image, on top of seeded uniform noise.
pub fn banded_set(n: usize, classes: usize, side: usize, seed: u64) -> advjudge_core::dataset::LabeledImageSet<f32> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let band = (side / classes).max(1);
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        let px = (0..side * side)
            .map(|j| {
                let row = j / side;
                let base: f32 = if row / band == label { 0.7 } else { 0.1 };
                (base + rng.random_range(0.0..0.2f32)).min(1.0)
            })
            .collect();
        images.push(advjudge_core::Image::new(1, side, side, px).unwrap());
        labels.push(label);
    }
    advjudge_core::dataset::LabeledImageSet::new(images, labels, classes).unwrap()
}
