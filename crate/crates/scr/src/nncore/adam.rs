use super::Scalar;
use crate::error::{Result, ScrError};

/// Adam optimizer state over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step: u64,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_count: usize, learning_rate: f64) -> Self {
        Self {
            step: 0,
            first_moment: vec![T::zero(); param_count],
            second_moment: vec![T::zero(); param_count],
            learning_rate: T::of(learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            epsilon: T::of(1e-8),
        }
    }

    /// Bias-corrected Adam update, in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(ScrError::Shape(format!(
                "adam: {} params, {} grads, state sized {}",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(ScrError::Numeric(format!(
                "non-finite gradient at index {i} on step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let corr1 = T::one() - self.beta1.powi(t);
        let corr2 = T::one() - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(&mut self.second_moment))
        {
            *m = self.beta1 * *m + (T::one() - self.beta1) * *g;
            *v = self.beta2 * *v + (T::one() - self.beta2) * *g * *g;
            let m_hat = *m / corr1;
            let v_hat = *v / corr2;
            *p = *p - self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
