use crate::error::{Error, Result};
use crate::numerics::{Gradients, Network};
use crate::scalar::Scalar;

/// Adam moments for a fixed list of parameter buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<S>>,
    second: Vec<Vec<S>>,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(sizes: &[usize]) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            second: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
        }
    }

    pub fn for_network(network: &Network<S>) -> Self {
        let sizes: Vec<usize> = network.params().iter().map(|p| p.len()).collect();
        AdamState::new(&sizes)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [&mut [S]], grads: &[&[S]], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(Error::invalid("parameter/gradient count does not match optimizer state"));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(Error::invalid("gradient shape does not match parameter shape"));
            }
        }
        if grads.iter().any(|g| g.iter().any(|v| v.is_nan())) {
            return Err(Error::numeric("NaN in gradient"));
        }
        self.step += 1;
        let t = self.step as i32;
        let b1 = S::from_f64_lossy(self.beta1);
        let b2 = S::from_f64_lossy(self.beta2);
        let eps = S::from_f64_lossy(self.epsilon);
        let corr1 = S::from_f64_lossy(1.0 - self.beta1.powi(t));
        let corr2 = S::from_f64_lossy(1.0 - self.beta2.powi(t));
        let lr = S::from_f64_lossy(lr);
        let one = S::one();
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i];
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            for j in 0..p.len() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let m_hat = m[j] / corr1;
                let v_hat = v[j] / corr2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to every parameter of `network`.
pub fn adam_step<S: Scalar>(
    network: &mut Network<S>,
    gradients: &Gradients<S>,
    state: &mut AdamState<S>,
    lr: f64,
) -> Result<()> {
    let grads: Vec<&[S]> = gradients.tensors.iter().map(Vec::as_slice).collect();
    let mut params = network.params_mut();
    state.update(&mut params, &grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{Activation, LayerSpec};

    fn net() -> Network<f64> {
        Network::new(&[3], &[LayerSpec::Dense { outputs: 2, activation: Activation::Relu }], 5).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = net();
        let before = n.clone();
        let mut state = AdamState::for_network(&n);
        adam_step(&mut n, &Gradients::zeros_like(&before), &mut state, 1e-3).unwrap();
        assert_eq!(n, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut n = net();
        let before = n.clone();
        let mut grads = Gradients::zeros_like(&n);
        grads.tensors[0] = vec![0.5, -3.0, 1e-3, -1e-2, 2.0, 7.0];
        let mut state = AdamState::for_network(&n);
        adam_step(&mut n, &grads, &mut state, 1e-3).unwrap();
        // At t = 1, m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
        for ((a, b), g) in n.params()[0].iter().zip(before.params()[0]).zip(&grads.tensors[0]) {
            let expected = -1e-3 * g.signum();
            assert!((a - b - expected).abs() < 1e-8, "{} vs {expected}", a - b);
        }
    }

    #[test]
    fn nan_gradient_is_numeric_error() {
        let mut n = net();
        let mut grads = Gradients::zeros_like(&n);
        grads.tensors[1][0] = f64::NAN;
        let mut state = AdamState::for_network(&n);
        let err = adam_step(&mut n, &grads, &mut state, 1e-3).unwrap_err();
        assert_eq!(err.kind(), "numeric-error");
    }

    #[test]
    fn identical_runs_identical_parameters() {
        let run = || {
            let mut n = net();
            let mut state = AdamState::for_network(&n);
            for k in 0..5 {
                let mut g = Gradients::zeros_like(&n);
                g.tensors[0].iter_mut().enumerate().for_each(|(i, v)| *v = ((i + k) as f64).sin());
                adam_step(&mut n, &g, &mut state, 1e-2).unwrap();
            }
            n
        };
        assert_eq!(run(), run());
    }
}
