//! ADADELTA: per-weight adaptive steps from running averages of squared
//! gradients and squared updates. No global learning rate.

use crate::error::{Result, TensorError};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdadeltaConfig {
    pub rho: f32,
    pub epsilon: f32,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        Self { rho: 0.95, epsilon: 1e-6 }
    }
}

impl AdadeltaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(TensorError::InvalidParameter(format!("rho {} not in (0,1)", self.rho)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(TensorError::InvalidParameter(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// Running averages for one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdadeltaState {
    pub accum_grad_sq: Vec<f32>,
    pub accum_update_sq: Vec<f32>,
    pub rho: f32,
    pub epsilon: f32,
}

impl AdadeltaState {
    pub fn new(len: usize, config: AdadeltaConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            accum_grad_sq: vec![0.0; len],
            accum_update_sq: vec![0.0; len],
            rho: config.rho,
            epsilon: config.epsilon,
        })
    }

    pub fn len(&self) -> usize {
        self.accum_grad_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accum_grad_sq.is_empty()
    }

    /// Applies one update in place. A non-finite gradient leaves both
    /// `param` and the state untouched.
    pub fn step(&mut self, param: &mut [f32], grad: &[f32]) -> Result<()> {
        if param.len() != self.len() || grad.len() != self.len() {
            return Err(TensorError::Dimension(format!(
                "adadelta state of {} for param {} / grad {}",
                self.len(),
                param.len(),
                grad.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(TensorError::NonFinite("adadelta gradient"));
        }
        let (rho, eps) = (self.rho, self.epsilon);
        for (((p, &g), eg), ex) in param
            .iter_mut()
            .zip(grad)
            .zip(&mut self.accum_grad_sq)
            .zip(&mut self.accum_update_sq)
        {
            *eg = rho * *eg + (1.0 - rho) * g * g;
            let dx = -((*ex + eps).sqrt() / (*eg + eps).sqrt()) * g;
            *ex = rho * *ex + (1.0 - rho) * dx * dx;
            *p += dx;
        }
        Ok(())
    }

    /// Steps `param` using its stored gradient, which is consumed.
    pub fn step_tensor(&mut self, param: &mut Tensor) -> Result<()> {
        let Some(grad) = param.take_grad() else {
            return Ok(());
        };
        if let Err(e) = self.step(param.data_mut(), &grad) {
            param.set_grad(grad)?;
            return Err(e);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> AdadeltaConfig {
        AdadeltaConfig { rho: 0.95, epsilon: 1e-6 }
    }

    #[test]
    fn first_step_from_fresh_state() {
        // E[g^2] = 0.05, dx = -sqrt(1e-6) / sqrt(0.05 + 1e-6)
        let mut s = AdadeltaState::new(1, config()).unwrap();
        let mut w = [0.0f32];
        s.step(&mut w, &[1.0]).unwrap();
        assert!((w[0] + 0.004472).abs() < 1e-6, "{}", w[0]);
        assert!((s.accum_grad_sq[0] - 0.05).abs() < 1e-7);
        assert!(s.accum_update_sq[0] > 0.0);
    }

    #[test]
    fn zero_gradient_is_a_no_op_on_the_param() {
        let mut s = AdadeltaState::new(2, config()).unwrap();
        let mut w = [1.5f32, -2.0];
        s.step(&mut w, &[0.0, 0.0]).unwrap();
        assert_eq!(w, [1.5, -2.0]);
    }

    #[test]
    fn non_finite_gradient_leaves_state_unchanged() {
        let mut s = AdadeltaState::new(2, config()).unwrap();
        let mut w = [1.0f32, 1.0];
        s.step(&mut w, &[0.5, 0.5]).unwrap();
        let (before_state, before_w) = (s.clone(), w);
        assert!(s.step(&mut w, &[f32::NAN, 1.0]).is_err());
        assert_eq!(s, before_state);
        assert_eq!(w, before_w);
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let mut s = AdadeltaState::new(1, config()).unwrap();
        let mut w = [0.0f32];
        let reached = (0..10_000).position(|_| {
            let g = 2.0 * (w[0] - 2.0);
            s.step(&mut w, &[g]).unwrap();
            (w[0] - 2.0).abs() < 0.05
        });
        assert!(reached.is_some(), "ended at {}", w[0]);
    }

    #[test]
    fn invalid_hyper_parameters() {
        assert!(AdadeltaState::new(1, AdadeltaConfig { rho: 1.0, epsilon: 1e-6 }).is_err());
        assert!(AdadeltaState::new(1, AdadeltaConfig { rho: 0.9, epsilon: 0.0 }).is_err());
    }

    #[test]
    fn accumulators_stay_non_negative() {
        let mut s = AdadeltaState::new(3, config()).unwrap();
        let mut w = [0.0f32; 3];
        for i in 0..50 {
            let g = [(i as f32).sin(), -3.0, 1e-3];
            s.step(&mut w, &g).unwrap();
            assert!(s.accum_grad_sq.iter().chain(&s.accum_update_sq).all(|&v| v >= 0.0));
        }
    }
}
