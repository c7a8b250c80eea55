//! Dense matrices, tape-based reverse-mode gradients, Adam and a
//! finite-difference gradient checker.

mod adam;
mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{
    check_against, grad_check, relative_error, GradCheckEntry, GradCheckOptions, GradCheckReport,
};
pub use param::{ParamId, ParamSet, Parameter};
pub use tape::{sigmoid, softmax, Activation, Tape, Var, PROB_CLAMP};
pub use tensor::Tensor;
