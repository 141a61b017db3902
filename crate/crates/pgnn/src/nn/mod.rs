//! Minimal differentiable-computation engine.
//!
//! Exactly the layer set the two architectures need — convolutions (plain
//! and transposed), batch normalization, LeakyReLU/ReLU/dropout, linear,
//! pooling — each with hand-written forward and backward passes, plus a
//! bias-corrected Adam optimizer and a finite-difference gradient checker.
//! There is no graph compiler: models compose layers explicitly and unwind
//! them in reverse for backpropagation.
//!
//! Layers are generic over the element type: `f32` for training speed,
//! `f64` for gradient verification.

mod adam;
mod conv;
mod dense;
mod gradcheck;
mod linalg;
mod norm;
mod param;
mod pointwise;
mod tensor;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use conv::{Conv2d, ConvTranspose2d};
pub use dense::{GlobalAvgPool, Linear, MaxPool2d};
pub use gradcheck::{grad_check, DotProbe, GradCheckReport, ScalarObjective, SumSquares};
pub use norm::BatchNorm2d;
pub use param::{Param, ParamStore, ParamVisit, SlotKind};
pub use pointwise::{Dropout, LeakyRelu, Relu};
pub use tensor::Tensor4;

use crate::error::Result;

/// Element type of tensors and parameters.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
}

impl Scalar for f32 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

/// Forward-pass mode. Training mode engages dropout and batch statistics;
/// eval mode is deterministic and uses running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A differentiable computation with owned parameters.
///
/// `forward` caches whatever `backward` needs; `backward` consumes that
/// cache, accumulates parameter gradients in place, and returns the gradient
/// with respect to the input. A module instance is single-writer: one
/// forward/backward pair at a time.
pub trait Module<S: Scalar> {
    fn forward(&mut self, x: &Tensor4<S>, mode: Mode) -> Result<Tensor4<S>>;

    /// Panics if called without a preceding `forward` (caller bug).
    fn backward(&mut self, grad_out: &Tensor4<S>) -> Tensor4<S>;

    /// Visits every trainable parameter, names prefixed by `prefix`.
    fn visit_params(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>));

    /// Visits non-trainable state (running statistics). Default: none.
    fn visit_state(&mut self, prefix: &str, f: &mut dyn FnMut(ParamVisit<'_, S>)) {
        let _ = (prefix, f);
    }

    fn zero_grad(&mut self) {
        self.visit_params("", &mut |p| p.grad.fill(S::ZERO));
    }
}
