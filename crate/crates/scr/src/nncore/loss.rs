use super::{Scalar, Tensor2};
use crate::error::{Result, ScrError};

/// Floor added inside the log of the multinomial likelihood.
pub const NLL_FLOOR: f64 = 1e-10;
/// Sigmoid probabilities are clamped to [BCE_CLAMP, 1−BCE_CLAMP].
pub const BCE_CLAMP: f64 = 1e-7;

/// Diagonal Gaussian given as mean and log-variance (log keeps the variance
/// positive without constraining the network output).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams<T> {
    pub mu: Vec<T>,
    pub log_var: Vec<T>,
}

impl<T: Scalar> GaussianParams<T> {
    pub fn new(mu: Vec<T>, log_var: Vec<T>) -> Result<Self> {
        if mu.len() != log_var.len() {
            return Err(ScrError::Shape(format!(
                "mu length {} != log_var length {}",
                mu.len(),
                log_var.len()
            )));
        }
        if mu.iter().chain(&log_var).any(|v| !v.is_finite()) {
            return Err(ScrError::Domain("non-finite Gaussian parameters".into()));
        }
        Ok(Self { mu, log_var })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

/// Multinomial negative log-likelihood: −Σ targets·log(probs + floor).
/// `targets` must be binary and `probs` rows must each sum to 1 within 1e-6.
pub fn multinomial_nll<T: Scalar>(targets: &Tensor2<T>, probs: &Tensor2<T>) -> Result<T> {
    check_same_shape("multinomial_nll", targets, probs)?;
    let tol = T::of(1e-6);
    for r in 0..probs.rows() {
        let mut sum = T::zero();
        for &p in probs.row(r) {
            if p < T::zero() {
                return Err(ScrError::Domain(format!("negative probability in row {r}")));
            }
            sum = sum + p;
        }
        if (sum - T::one()).abs() > tol {
            return Err(ScrError::Domain(format!(
                "probability row {r} sums to {sum}, not 1"
            )));
        }
    }
    check_binary(targets)?;
    let floor = T::of(NLL_FLOOR);
    let mut acc = T::zero();
    for (&t, &p) in targets.data().iter().zip(probs.data()) {
        if t != T::zero() {
            acc = acc - t * (p + floor).ln();
        }
    }
    Ok(acc)
}

/// KL(q ‖ N(0, I)) for a diagonal Gaussian:
/// 0.5 · Σⱼ (μⱼ² + σⱼ² − 1 − log σⱼ²).
pub fn gaussian_kl<T: Scalar>(params: &GaussianParams<T>) -> Result<T> {
    gaussian_kl_parts(&params.mu, &params.log_var)
}

pub fn gaussian_kl_parts<T: Scalar>(mu: &[T], log_var: &[T]) -> Result<T> {
    if mu.len() != log_var.len() {
        return Err(ScrError::Shape("mu/log_var length mismatch".into()));
    }
    let half = T::of(0.5);
    let mut acc = T::zero();
    for (&m, &lv) in mu.iter().zip(log_var) {
        if !m.is_finite() || !lv.is_finite() {
            return Err(ScrError::Domain("non-finite Gaussian parameters".into()));
        }
        acc = acc + half * (m * m + lv.exp() - T::one() - lv);
    }
    Ok(acc)
}

/// Sum of independent per-style binary cross-entropies:
/// −Σ [s·log p + (1−s)·log(1−p)], with p clamped away from {0, 1}.
pub fn multilabel_bce<T: Scalar>(targets: &Tensor2<T>, probs: &Tensor2<T>) -> Result<T> {
    check_same_shape("multilabel_bce", targets, probs)?;
    check_binary(targets)?;
    let lo = T::of(BCE_CLAMP);
    let hi = T::one() - lo;
    let mut acc = T::zero();
    for (&t, &p) in targets.data().iter().zip(probs.data()) {
        let p = p.max(lo).min(hi);
        acc = acc - (t * p.ln() + (T::one() - t) * (T::one() - p).ln());
    }
    Ok(acc)
}

fn check_same_shape<T: Scalar>(op: &str, a: &Tensor2<T>, b: &Tensor2<T>) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(ScrError::Shape(format!(
            "{op}: {}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

fn check_binary<T: Scalar>(targets: &Tensor2<T>) -> Result<()> {
    if targets
        .data()
        .iter()
        .any(|&t| t != T::zero() && t != T::one())
    {
        return Err(ScrError::Domain("targets must be binary".into()));
    }
    Ok(())
}
