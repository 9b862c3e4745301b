use super::{NeuralError, ParamVector};

/// Adam moments and hyperparameters for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Self::with_betas(param_count, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(param_count: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
            lr,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.second_moment
    }

    pub fn len(&self) -> usize {
        self.first_moment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_moment.is_empty()
    }

    /// In-place bias-corrected Adam update of `params`.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NeuralError> {
        if params.len() != self.len() || grads.len() != self.len() {
            return Err(NeuralError::Shape {
                what: "adam parameter/gradient length",
                expected: self.len(),
                actual: if params.len() != self.len() {
                    params.len()
                } else {
                    grads.len()
                },
            });
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (self.beta1, self.beta2);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Functional form: returns the updated parameters and advances `state`.
pub fn adam_step(
    params: &ParamVector,
    grads: &ParamVector,
    state: &mut AdamState,
) -> Result<ParamVector, NeuralError> {
    if params.layout() != grads.layout() {
        return Err(NeuralError::Architecture(format!(
            "gradient layout {:?} does not match parameters {:?}",
            grads.layout(),
            params.layout()
        )));
    }
    let mut out = params.clone();
    state.apply(out.values_mut(), grads.values())?;
    Ok(out)
}
