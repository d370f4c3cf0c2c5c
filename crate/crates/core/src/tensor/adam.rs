use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};

/// Per-parameter Adam moments for one network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    first_moment: Mlp,
    second_moment: Mlp,
    step_count: u64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl AdamState {
    pub fn new(params: &Mlp) -> Self {
        Self::with_hyper(params, 0.9, 0.999, 1e-8).expect("default Adam constants are valid")
    }

    pub fn with_hyper(params: &Mlp, beta1: f64, beta2: f64, epsilon: f64) -> Result<Self> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(beta1) || !in_unit(beta2) || !(epsilon > 0.0 && epsilon <= 1e-3) {
            return Err(Error::contract(format!(
                "adam constants out of range: beta1={beta1}, beta2={beta2}, epsilon={epsilon}"
            )));
        }
        Ok(Self {
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
            beta1,
            beta2,
            epsilon,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &Mlp {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Mlp {
        &self.second_moment
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut Mlp, grads: &Mlp, lr: f64) -> Result<()> {
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(Error::contract(format!("learning rate must be positive, got {lr}")));
        }
        if !params.same_shape(grads) || !params.same_shape(&self.first_moment) {
            return Err(Error::contract(format!(
                "adam: gradient shape {:?} does not match parameters {:?}",
                grads.layer_sizes(),
                params.layer_sizes()
            )));
        }
        for (layer, w, b) in grads.layer_slices() {
            if w.iter().chain(b).any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient { layer });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);

        let moments = self.first_moment.buffers_mut().zip(self.second_moment.buffers_mut());
        for ((p, g), (m, v)) in params.buffers_mut().zip(grads.buffers()).zip(moments) {
            let n = p.len();
            let (g, m, v) = (&g[..n], &mut m[..n], &mut v[..n]);
            for i in 0..n {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so that their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut Mlp, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Activation;

    fn scalar_net(value: f64) -> Mlp {
        let mut net = Mlp::zeros(&[1, 1], Activation::Relu).unwrap();
        net.layers_mut()[0].set_weight(0, 0, value);
        net
    }

    #[test]
    fn zero_grads_leave_params_unchanged() {
        let mut p = scalar_net(0.7);
        let before = p.clone();
        let mut adam = AdamState::new(&p);
        let g = p.zeros_like();
        adam.step(&mut p, &g, 1e-3).unwrap();
        assert_eq!(p, before);
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        for g in [3.0, -0.02] {
            let mut p = scalar_net(1.0);
            let mut adam = AdamState::new(&p);
            let grads = scalar_net(g);
            adam.step(&mut p, &grads, 0.01).unwrap();
            let delta = p.layers()[0].weight(0, 0) - 1.0;
            assert!((delta + 0.01 * g.signum()).abs() < 1e-8, "delta {delta}");
        }
    }

    #[test]
    fn five_steps_on_quadratic_match_scalar_reference() {
        // f(x) = (x - 3)^2, gradient 2(x - 3), hand-coded Adam
        let (b1, b2, eps, lr) = (0.9_f64, 0.999_f64, 1e-8, 0.1);
        let mut x_ref = 0.5_f64;
        let (mut m, mut v) = (0.0_f64, 0.0_f64);
        let mut trace = Vec::new();
        for t in 1..=5 {
            let g = 2.0 * (x_ref - 3.0);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x_ref -= lr * mh / (vh.sqrt() + eps);
            trace.push(x_ref);
        }

        let mut p = scalar_net(0.5);
        let mut adam = AdamState::new(&p);
        for want in trace {
            let x = p.layers()[0].weight(0, 0);
            adam.step(&mut p, &scalar_net(2.0 * (x - 3.0)), lr).unwrap();
            assert!((p.layers()[0].weight(0, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut p = Mlp::zeros(&[2, 2, 1], Activation::Relu).unwrap();
        let mut g = p.zeros_like();
        g.layers_mut()[1].bias_mut()[0] = f64::NAN;
        let mut adam = AdamState::new(&p);
        match adam.step(&mut p, &g, 1e-3) {
            Err(Error::NonFiniteGradient { layer }) => assert_eq!(layer, 1),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(adam.step_count(), 0);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut g = Mlp::zeros(&[1, 2], Activation::Relu).unwrap();
        g.layers_mut()[0].set_weight(0, 0, 3.0);
        g.layers_mut()[0].set_weight(1, 0, 4.0);
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        assert!((g.norm() - 0.5).abs() < 1e-15);
    }
}
