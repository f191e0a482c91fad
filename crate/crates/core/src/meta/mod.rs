//! Model-agnostic meta-learning: SGD adaptation on support sets, Adam on
//! post-adaptation query losses, validation-based early stopping, and a
//! conventional training baseline.

mod adam;
mod maml;
mod objective;
pub mod toy;
mod train;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use maml::{inner_adapt, meta_gradient, MetaOrder, MetaTask};
pub use objective::{Objective, ReconstructionObjective};
pub use train::{
    evaluate_adaptation, fit, joint_train, make_task, meta_train, task_seed, to_meta_task, train_with,
    validation_task_seed, AdaptationResult, IterRecord, MetaConfig, StopReason, TrainOutcome, TrainReport,
    UpdateRule,
};
