//! Joint objective, optimiser and the teacher-forced training loop.

mod adam;
mod loss;
mod schedule;
mod trainer;

pub use adam::Adam;
pub use loss::{joint_loss, stream_loss, JointLoss};
pub use schedule::lr_schedule;
pub use trainer::{
    expand_items, prepare, teacher_forcing, train, write_loss_csv, LossRow, Prepared, PreparedRecord, TrainItem,
    TrainOutput, Trainer,
};
