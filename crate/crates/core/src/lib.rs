//! Phase-only computer-generated holograms for far-field (Fraunhofer)
//! replay, optimized by gradient descent with Adam or limited-memory BFGS
//! under mean-squared-error or cross-entropy losses.
//!
//! The pipeline is `phase → exp(iφ) → centered unitary DFT → |F|² (or |F|) →
//! loss against the target`, with the phase gradient computed analytically
//! through the adjoint transform (see [`autograd`]).

pub mod autograd;
pub mod cli;
pub mod error;
pub mod field;
pub mod imageio;
pub mod loss;
pub mod optim;
pub mod pipeline;

pub use autograd::{loss_and_grad, LossAndGrad, Objective};
pub use error::{Error, Result};
pub use field::{
    amplitude, fraunhofer_adjoint, fraunhofer_forward, intensity, phase_to_field, AmplitudeImage,
    ComplexField, Fraunhofer, PhaseMask,
};
pub use loss::LossKind;
pub use optim::{Adam, Lbfgs, Optimizer};
pub use pipeline::{
    initial_phase, optimize, quantize_binary, symmetrize_target, OptimizerKind, ReconModel,
    Reconstruction, RunConfig, RunRecord, Scaling, StepRule,
};
