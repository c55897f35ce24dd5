//! Small differentiable-computation core: a fixed layer vocabulary with
//! exact reverse-mode gradients, He initialisation, Adam, and the joint
//! slope/duration loss. Everything runs per sample in double precision.

mod adam;
mod gradcheck;
mod init;
mod layers;
mod loss;
mod network;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, grad_check_report, GradCheckReport, STEP as GRAD_CHECK_STEP};
pub use init::{he_init, Seed};
pub use layers::{Layer, LayerCache, LayerSpec};
pub use loss::joint_loss;
pub use network::{NetCache, NetGrads, NetInput, Network, Sequential, SequentialCache, TreNet};
pub use tensor::Tensor;
