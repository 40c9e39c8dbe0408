//! Dense networks with hand-written reverse-mode gradients and Adam.

mod adam;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use gradcheck::{gradient_check, gradient_check_report, GradCheckReport};
pub use mlp::{Activation, ForwardCache, Gradients, Mlp, MlpSpec};
