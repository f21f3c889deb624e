//! Minimal neural-network kernel: dense tensors, layers, losses, Adam, and
//! finite-difference gradient verification. Everything the two encoders and
//! the decoder are built on.

mod adam;
mod gradcheck;
mod layer;
mod loss;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckReport, FD_STEP};
pub use layer::{dropout_mask, Activation, DenseLayer, LayerCache, LayerGrads};
pub use loss::{gaussian_kl, gaussian_kl_parts, multilabel_bce, multinomial_nll, GaussianParams};
pub use tensor::Tensor2;

/// Floating-point scalar the kernel is generic over: f32 or f64.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + 'static
{
    /// Lift an f64 constant into the scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
